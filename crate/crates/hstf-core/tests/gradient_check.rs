//! Analytic gradients vs central finite differences on a shrunken
//! network, in 64-bit mode. Every parameter array must match with max
//! relative error below 1e-4.

use hstf_core::features::{FL_REQ_LEN, FL_RES_LEN, PL_LEN};
use hstf_core::flow::Label;
use hstf_core::model::backward::backward;
use hstf_core::model::forward::{forward, loss_of, Mode, TensorSample};
use hstf_core::model::{ModelConfig, Params};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-4;
const TOLERANCE: f64 = 1e-4;
/// Gradient pairs smaller than this are treated as matched zeros; finite
/// differences carry ~1e-12 absolute noise.
const FLOOR: f64 = 1e-7;

fn shrunken_config() -> ModelConfig {
    let mut cfg = ModelConfig::with_shape(4, 8, 2);
    cfg.conv_kernels = 1;
    cfg.conv_kw = 2; // 4x8 -> conv 2x4 -> pool 1x3 -> flat 3
    cfg.lstm_hidden = 3;
    cfg.ep_out = 4;
    cfg.ef_out = 4;
    cfg.head_hidden = 8;
    cfg.validate().unwrap();
    cfg
}

/// Strictly positive inputs keep pre-activations away from ReLU kinks.
fn random_sample(cfg: &ModelConfig, seed: u64, label: Label) -> TensorSample<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |len: usize| -> Vec<f64> {
        (0..len).map(|_| rng.random_range(0.05..0.95)).collect()
    };
    let cells = cfg.rows * cfg.cols;
    TensorSample {
        req_mats: (0..cfg.flow_size).map(|_| draw(cells)).collect(),
        res_mats: (0..cfg.flow_size).map(|_| draw(cells)).collect(),
        req_pl: (0..cfg.flow_size).map(|_| draw(PL_LEN)).collect(),
        res_pl: (0..cfg.flow_size).map(|_| draw(PL_LEN)).collect(),
        req_fl: draw(FL_REQ_LEN),
        res_fl: draw(FL_RES_LEN),
        label,
    }
}

fn random_params(cfg: &ModelConfig, seed: u64) -> Params<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Params::<f64>::zeros(cfg);
    for (_, arr) in p.arrays_mut() {
        for v in arr {
            *v = rng.random_range(-0.5..0.5);
        }
    }
    p
}

fn run_check(cfg: &ModelConfig, mode: Mode, sample_seed: u64, param_seed: u64, label: Label) {
    let sample = random_sample(cfg, sample_seed, label);
    let params = random_params(cfg, param_seed);

    let (_, cache) = forward(&sample, &params, cfg, mode).unwrap();
    let (analytic, _) = backward(&sample, &params, &cache.unwrap(), cfg);

    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let analytic_arrays = analytic.arrays();
    let mut perturbed = params.clone();
    for (array_idx, (name, _)) in params.arrays().iter().enumerate() {
        let len = analytic_arrays[array_idx].1.len();
        for i in 0..len {
            let original = {
                let mut arrays = perturbed.arrays_mut();
                let v = &mut arrays[array_idx].1[i];
                let orig = *v;
                *v = orig + EPS;
                orig
            };
            let plus = loss_of(&sample, &perturbed, cfg, mode).unwrap();
            {
                let mut arrays = perturbed.arrays_mut();
                arrays[array_idx].1[i] = original - EPS;
            }
            let minus = loss_of(&sample, &perturbed, cfg, mode).unwrap();
            {
                let mut arrays = perturbed.arrays_mut();
                arrays[array_idx].1[i] = original;
            }

            let numeric = (plus - minus) / (2.0 * EPS);
            let a = analytic_arrays[array_idx].1[i];
            let scale = a.abs().max(numeric.abs());
            if scale < FLOOR {
                continue;
            }
            let rel = (a - numeric).abs() / scale;
            if rel > worst {
                worst = rel;
                worst_at = format!("{name}[{i}] analytic={a} numeric={numeric}");
            }
        }
    }
    assert!(
        worst < TOLERANCE,
        "max relative error {worst:.3e} at {worst_at} exceeds {TOLERANCE:.0e}"
    );
    println!("gradient check ok: max relative error {worst:.3e}");
}

#[test]
fn gradients_match_finite_differences_without_dropout() {
    let mut cfg = shrunken_config();
    cfg.dropout = 0.0;
    run_check(&cfg, Mode::Train { dropout_seed: 1234 }, 7, 8, Label::Malicious);
}

#[test]
fn gradients_match_finite_differences_with_dropout() {
    let cfg = shrunken_config(); // dropout 0.3, mask fixed by the seed
    run_check(&cfg, Mode::Train { dropout_seed: 77 }, 9, 10, Label::Benign);
}

#[test]
fn gradients_match_on_second_draw() {
    let cfg = shrunken_config();
    run_check(&cfg, Mode::Train { dropout_seed: 5150 }, 21, 22, Label::Malicious);
}
