//! Scenario execution: repeated train/evaluate runs, averaged metrics,
//! pooled ROC, optional cross-corpus testing.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::metrics::{
    compute_metrics, confusion_at, roc_sweep, ConfusionCounts, PointMetrics, RocCurve,
};
use super::scenario::{build_scenario, ReferenceRow, Scenario};
use crate::error::{HstfError, Result};
use crate::features::SampleSource;
use crate::flow::Label;
use crate::model::forward::{forward, Mode, TensorSample};
use crate::model::{train, ModelConfig, Scalar, TrainOptions};
use crate::seed::mix_seed;

pub const REPORT_SCHEMA: &str = "hstf-report/v1";

#[derive(Debug, Clone, Serialize)]
pub struct RepeatMetrics {
    pub repeat: usize,
    pub counts: ConfusionCounts,
    pub point: PointMetrics,
    pub auc: f64,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeanMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
    pub fpr: f64,
    pub tpr: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub scenario: Scenario,
    pub mode: String,
    pub config_hash: String,
    pub lambda: f64,
    pub repeats: Vec<RepeatMetrics>,
    pub mean: MeanMetrics,
    pub roc: RocCurve,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceRow>,
}

/// Model config for a scenario repeat: scenario dims, per-repeat seed.
fn repeat_config(base: &ModelConfig, sc: &Scenario, repeat: usize) -> ModelConfig {
    let mut cfg = base.clone();
    cfg.rows = sc.packet_rows;
    cfg.cols = sc.packet_cols;
    cfg.flow_size = sc.flow_size;
    cfg.er_hidden = cfg.cols;
    // Each repeat owns its RNG stream: seed + repeat index.
    cfg.seed = sc.seed.wrapping_add(repeat as u64);
    cfg
}

/// Hash of everything that determines an experiment's outputs.
pub fn config_hash(sc: &Scenario, cfg: &ModelConfig, lambda: f64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(sc).unwrap_or_default());
    hasher.update(serde_json::to_vec(cfg).unwrap_or_default());
    hasher.update(lambda.to_le_bytes());
    let digest = hasher.finalize();
    digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

fn score_samples<T: Scalar>(
    source: &mut dyn SampleSource,
    idx: &[usize],
    params: &crate::model::Params<T>,
    cfg: &ModelConfig,
) -> Result<Vec<(f64, Label)>> {
    let mut preds = Vec::with_capacity(idx.len());
    for &i in idx {
        let sample = source.get(i)?;
        let ts = TensorSample::<T>::from_sample(&sample, cfg)?;
        let (p, _) = forward(&ts, params, cfg, Mode::Infer)?;
        preds.push((p.p_malicious, sample.label));
    }
    Ok(preds)
}

/// Independent recount of the threshold confusion, kept deliberately
/// separate from `confusion_at`; the two must always agree.
fn recount(preds: &[(f64, Label)], lambda: f64) -> ConfusionCounts {
    let tp = preds.iter().filter(|(s, l)| *l == Label::Malicious && *s > lambda).count();
    let fn_ = preds.iter().filter(|(s, l)| *l == Label::Malicious && *s <= lambda).count();
    let fp = preds.iter().filter(|(s, l)| *l != Label::Malicious && *s > lambda).count();
    let tn = preds.iter().filter(|(s, l)| *l != Label::Malicious && *s <= lambda).count();
    ConfusionCounts { tp, fp, tn, fn_ }
}

/// Draw a 1:1 test split from a foreign corpus for generalization runs.
fn foreign_test_indices(
    labels: &[Label],
    per_class: Option<usize>,
    seed: u64,
    repeat: usize,
) -> Result<Vec<usize>> {
    let mut mal: Vec<usize> = Vec::new();
    let mut ben: Vec<usize> = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            Label::Malicious => mal.push(i),
            Label::Benign => ben.push(i),
            Label::Unlabeled => {}
        }
    }
    let n = per_class.unwrap_or_else(|| (mal.len().min(ben.len()) / 5).max(1));
    if mal.len() < n {
        return Err(HstfError::InsufficientData {
            class: "malicious",
            required: n,
            available: mal.len(),
        });
    }
    if ben.len() < n {
        return Err(HstfError::InsufficientData {
            class: "benign",
            required: n,
            available: ben.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[5, repeat as u64]));
    mal.shuffle(&mut rng);
    ben.shuffle(&mut rng);
    Ok(mal[..n].iter().chain(&ben[..n]).copied().collect())
}

/// Run a scenario: per repeat, train on the home pool and evaluate on the
/// repeat's test split (or on a foreign corpus in generalization mode).
pub fn run_experiment<'f, T: Scalar>(
    pool: &mut (dyn SampleSource + '_),
    mut foreign_test: Option<&mut (dyn SampleSource + 'f)>,
    sc: &Scenario,
    base_cfg: &ModelConfig,
    opts: &TrainOptions,
    lambda: f64,
    reference: Option<ReferenceRow>,
) -> Result<ExperimentReport> {
    let pool_cfg = pool.config().clone();
    if pool_cfg.rows != sc.packet_rows
        || pool_cfg.cols != sc.packet_cols
        || pool_cfg.flow_size != sc.flow_size
    {
        return Err(HstfError::Config(format!(
            "pool extracted as {}x{} flow_size {} but scenario `{}` needs {}x{} flow_size {}",
            pool_cfg.rows,
            pool_cfg.cols,
            pool_cfg.flow_size,
            sc.name,
            sc.packet_rows,
            sc.packet_cols,
            sc.flow_size
        )));
    }

    let splits = build_scenario(&pool.labels().to_vec(), sc)?;
    let mut repeats = Vec::with_capacity(splits.len());
    let mut pooled_preds = Vec::new();

    for (r, split) in splits.iter().enumerate() {
        let cfg = repeat_config(base_cfg, sc, r);
        cfg.validate()?;
        let outcome = train::<T>(pool, &split.train, &split.val, &cfg, opts)?;

        let preds = match foreign_test.as_deref_mut() {
            Some(foreign) => {
                let idx =
                    foreign_test_indices(foreign.labels(), sc.test_per_class, sc.seed, r)?;
                score_samples::<T>(foreign, &idx, &outcome.params, &cfg)?
            }
            None => score_samples::<T>(pool, &split.test, &outcome.params, &cfg)?,
        };

        let counts = confusion_at(&preds, lambda);
        if counts != recount(&preds, lambda) {
            return Err(HstfError::Config("confusion recount mismatch".into()));
        }
        let point = compute_metrics(&counts, 1.0)?;
        let auc = roc_sweep(&preds, 0)?.auc;
        repeats.push(RepeatMetrics {
            repeat: r,
            counts,
            point,
            auc,
            epochs_run: outcome.history.len(),
        });
        pooled_preds.extend(preds);
    }

    let n = repeats.len() as f64;
    let mean = MeanMetrics {
        precision: repeats.iter().map(|r| r.point.precision).sum::<f64>() / n,
        recall: repeats.iter().map(|r| r.point.recall).sum::<f64>() / n,
        f_beta: repeats.iter().map(|r| r.point.f_beta).sum::<f64>() / n,
        fpr: repeats.iter().map(|r| r.point.fpr).sum::<f64>() / n,
        tpr: repeats.iter().map(|r| r.point.tpr).sum::<f64>() / n,
        auc: repeats.iter().map(|r| r.auc).sum::<f64>() / n,
    };
    let roc = roc_sweep(&pooled_preds, 512)?;

    Ok(ExperimentReport {
        schema: REPORT_SCHEMA.into(),
        scenario: sc.clone(),
        mode: if foreign_test.is_some() { "cross-corpus".into() } else { "within-corpus".into() },
        config_hash: config_hash(sc, base_cfg, lambda),
        lambda,
        repeats,
        mean,
        roc,
        reference,
    })
}
