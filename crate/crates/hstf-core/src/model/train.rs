//! Minibatch training with Adam, seeded shuffling, and early stopping on
//! validation F1. Samples stream from their source batch by batch, so
//! memory scales with the batch size rather than the corpus.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::Adam;
use super::backward::backward;
use super::forward::{forward, Mode, TensorSample};
use super::params::Params;
use super::tensor::Scalar;
use super::ModelConfig;
use crate::error::{HstfError, Result};
use crate::features::SampleSource;
use crate::flow::Label;
use crate::seed::mix_seed;

/// Gradients of one batch are computed in parallel over chunks of this
/// size and reduced in chunk order, so thread count never changes sums.
const REDUCE_CHUNK: usize = 16;

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            batch_size: 64,
            max_epochs: 50,
            patience: 5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub acc: f64,
    pub val_recall: f64,
    pub val_f1: f64,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug)]
pub struct TrainOutcome<T> {
    pub params: Params<T>,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_f1: f64,
}

fn check_labeled(labels: &[Label], idx: &[usize], split: &'static str) -> Result<()> {
    if idx.is_empty() {
        return Err(HstfError::EmptySplit(split));
    }
    if idx.iter().any(|&i| labels[i] == Label::Unlabeled) {
        return Err(HstfError::Config(format!("{split} split contains unlabeled samples")));
    }
    Ok(())
}

fn load_batch<T: Scalar>(
    source: &mut dyn SampleSource,
    indices: &[usize],
    cfg: &ModelConfig,
) -> Result<Vec<TensorSample<T>>> {
    indices
        .iter()
        .map(|&i| TensorSample::from_sample(&source.get(i)?, cfg))
        .collect()
}

/// Validation recall and F1 at lambda = 0.5. Degenerate splits (no
/// positives or no predicted positives) score 0 rather than erroring.
fn validation_scores<T: Scalar>(
    source: &mut dyn SampleSource,
    val_idx: &[usize],
    params: &Params<T>,
    cfg: &ModelConfig,
    batch: usize,
) -> Result<(f64, f64)> {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for chunk in val_idx.chunks(batch) {
        let samples = load_batch::<T>(source, chunk, cfg)?;
        let preds: Vec<(f64, Label)> = samples
            .par_iter()
            .map(|s| forward(s, params, cfg, Mode::Infer).map(|(p, _)| (p.p_malicious, s.label)))
            .collect::<Result<_>>()?;
        for (p_mal, label) in preds {
            let predicted_mal = p_mal > 0.5;
            match (predicted_mal, label == Label::Malicious) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
    let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok((recall, f1))
}

/// Train on `train_idx`, early-stop on `val_idx` F1 (patience epochs
/// without improvement), and return the best-F1 parameters plus history.
pub fn train<T: Scalar>(
    source: &mut dyn SampleSource,
    train_idx: &[usize],
    val_idx: &[usize],
    cfg: &ModelConfig,
    opts: &TrainOptions,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    check_labeled(source.labels(), train_idx, "train")?;
    check_labeled(source.labels(), val_idx, "validation")?;

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, &[0]));
    let mut params = Params::<T>::init(cfg, &mut rng);
    let mut opt = Adam::new(cfg, cfg.lr, opts.beta1, opts.beta2, opts.eps);
    let mut order: Vec<usize> = train_idx.to_vec();

    let mut history = Vec::new();
    let mut best_val_f1 = f64::NEG_INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params = params.clone();
    let mut stale = 0usize;

    for epoch in 0..opts.max_epochs {
        let started = std::time::Instant::now();
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0f64;
        let mut correct = 0usize;
        for (batch_no, batch_idx) in order.chunks(opts.batch_size).enumerate() {
            let samples = load_batch::<T>(source, batch_idx, cfg)?;
            // Deterministic per-sample dropout seeds.
            let seeds: Vec<u64> = (0..samples.len())
                .map(|i| mix_seed(cfg.seed, &[1, epoch as u64, batch_no as u64, i as u64]))
                .collect();

            let chunk_results: Vec<Result<(Params<T>, f64, usize)>> = samples
                .par_chunks(REDUCE_CHUNK)
                .zip(seeds.par_chunks(REDUCE_CHUNK))
                .map(|(chunk, chunk_seeds)| {
                    let mut acc = Params::<T>::zeros(cfg);
                    let mut loss_sum = 0.0f64;
                    let mut correct = 0usize;
                    for (s, &seed) in chunk.iter().zip(chunk_seeds) {
                        let (pred, cache) =
                            forward(s, &params, cfg, Mode::Train { dropout_seed: seed })?;
                        let (g, loss) = backward(s, &params, &cache.unwrap(), cfg);
                        acc.add_in_place(&g);
                        loss_sum += loss.as_f64();
                        let predicted = pred.p_malicious > 0.5;
                        if predicted == (s.label == Label::Malicious) {
                            correct += 1;
                        }
                    }
                    Ok((acc, loss_sum, correct))
                })
                .collect();

            let mut grads = Params::<T>::zeros(cfg);
            let mut batch_loss = 0.0f64;
            for r in chunk_results {
                let (g, l, c) = r?;
                grads.add_in_place(&g);
                batch_loss += l;
                correct += c;
            }
            if !batch_loss.is_finite() {
                return Err(HstfError::Divergence { epoch });
            }
            grads.scale(T::from_f64(1.0 / batch_idx.len() as f64));
            opt.step(&mut params, &grads);
            epoch_loss += batch_loss;
        }

        let loss = epoch_loss / order.len() as f64;
        if !loss.is_finite() {
            return Err(HstfError::Divergence { epoch });
        }
        let acc = correct as f64 / order.len() as f64;
        let (val_recall, val_f1) =
            validation_scores::<T>(source, val_idx, &params, cfg, opts.batch_size)?;
        history.push(EpochStats {
            epoch,
            loss,
            acc,
            val_recall,
            val_f1,
            seconds: started.elapsed().as_secs_f64(),
        });

        // A tie refreshes the checkpoint (the later model has trained
        // longer at the same score) but only strict improvement resets
        // the early-stop counter.
        let improved = val_f1 > best_val_f1 + 1e-12;
        if val_f1 >= best_val_f1 {
            best_val_f1 = val_f1;
            best_epoch = epoch;
            best_params = params.clone();
        }
        if improved {
            stale = 0;
        } else {
            stale += 1;
            if stale >= opts.patience {
                break;
            }
        }
    }

    Ok(TrainOutcome {
        params: best_params,
        history,
        best_epoch,
        best_val_f1: best_val_f1.max(0.0),
    })
}
