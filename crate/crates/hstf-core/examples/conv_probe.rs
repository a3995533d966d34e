//! Scratch probe for training dynamics at acceptance-criteria scale.
//! Usage: conv_probe [toy N | sep | imbalance]

use hstf_core::eval::{run_experiment, Scenario};
use hstf_core::features::{flow_to_sample, FeatureConfig, MemSamples};
use hstf_core::model::{train, ModelConfig, TrainOptions};
use hstf_core::synth::{generate, GenProfile, Separability};

fn pool(mal: usize, ben: usize, seed: u64) -> MemSamples {
    let cfg = FeatureConfig::default();
    let mut flows = generate(&GenProfile::trojan(Separability::High, seed), mal);
    flows.extend(generate(&GenProfile::benign(Separability::High, seed + 1), ben));
    let samples: Vec<_> = flows
        .iter()
        .enumerate()
        .map(|(i, f)| flow_to_sample(f, &cfg, i as u64).unwrap())
        .collect();
    MemSamples::new(cfg, samples)
}

fn toy(n: usize) {
    let mut source = pool(n, n, 42);
    let len = 2 * n;
    let half = len / 2;
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for i in 0..len {
        let idx = if i % 2 == 0 { i / 2 } else { half + i / 2 };
        if i % 20 == 8 || i % 20 == 19 {
            val_idx.push(idx);
        } else {
            train_idx.push(idx);
        }
    }
    let cfg = ModelConfig::default();
    let opts = TrainOptions { max_epochs: 50, patience: 1000, ..Default::default() };
    let started = std::time::Instant::now();
    let out = train::<f32>(&mut source, &train_idx, &val_idx, &cfg, &opts).unwrap();
    for h in &out.history {
        println!(
            "epoch {:2}  loss {:.4}  acc {:.3}  val_recall {:.3}  val_f1 {:.3}  ({:.2}s)",
            h.epoch, h.loss, h.acc, h.val_recall, h.val_f1, h.seconds
        );
    }
    println!(
        "total {:.1}s best_epoch {} best_f1 {}",
        started.elapsed().as_secs_f64(),
        out.best_epoch,
        out.best_val_f1
    );
}

fn scenario_run(mal: usize, ben: usize, sc: Scenario) {
    let mut source = pool(mal, ben, 11);
    let cfg = ModelConfig::default();
    let started = std::time::Instant::now();
    let report =
        run_experiment::<f32>(&mut source, None, &sc, &cfg, &TrainOptions::default(), 0.5, None)
            .unwrap();
    for r in &report.repeats {
        println!(
            "repeat {}  P {:.4} R {:.4} F1 {:.4} FPR {:.4} AUC {:.4} epochs {}",
            r.repeat,
            r.point.precision,
            r.point.recall,
            r.point.f_beta,
            r.point.fpr,
            r.auc,
            r.epochs_run
        );
    }
    println!(
        "mean F1 {:.4}  mean FPR {:.4}  total {:.1}s",
        report.mean.f_beta,
        report.mean.fpr,
        started.elapsed().as_secs_f64()
    );
}

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "toy".into());
    match mode.as_str() {
        "toy" => {
            let n = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(100);
            toy(n);
        }
        "sep" => scenario_run(
            1000,
            1000,
            Scenario { name: "sep".into(), repeats: 3, ..Default::default() },
        ),
        "imbalance" => scenario_run(
            250,
            10_150,
            Scenario {
                name: "imbalance".into(),
                ratio_ben: 100,
                train_mal: Some(100),
                test_per_class: Some(100),
                repeats: 1,
                ..Default::default()
            },
        ),
        other => eprintln!("unknown probe `{other}`"),
    }
}
