//! Training-cost benchmark: wall time per epoch and heap high-water as
//! the sample count grows. Data streams from disk, so the expected shape
//! is time linear in N and memory flat in N at a fixed batch size.

use std::path::Path;

use serde::Serialize;

use crate::alloc_track;
use crate::error::Result;
use crate::features::sample_io::{BinSampleFile, BinSampleWriter};
use crate::features::{flow_to_sample, SampleSource};
use crate::model::{train, ModelConfig, TrainOptions};
use crate::synth::{generate, GenProfile, Separability};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TimingRow {
    pub n: usize,
    pub secs_per_epoch: f64,
    pub peak_mem_bytes: usize,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if xs.is_empty() {
        0.0
    } else {
        xs[xs.len() / 2]
    }
}

/// Benchmark one corpus size: synthesize, spill to the binary sample
/// form, then train `epochs` epochs streaming from disk.
fn bench_one(
    cfg: &ModelConfig,
    n: usize,
    epochs: usize,
    batch_size: usize,
    work_dir: &Path,
    seed: u64,
) -> Result<TimingRow> {
    let fcfg = cfg.feature_config();
    let path = work_dir.join(format!("bench-{n}.samples.bin"));
    {
        let trojan = generate(&GenProfile::trojan(Separability::High, seed), n / 2);
        let benign = generate(&GenProfile::benign(Separability::High, seed + 1), n - n / 2);
        let mut writer = BinSampleWriter::create(&path, &fcfg)?;
        // Interleave classes so any index tail contains both.
        let mut id = 0u64;
        for pair in trojan.iter().zip(&benign) {
            for flow in [pair.0, pair.1] {
                if let Some(s) = flow_to_sample(flow, &fcfg, id) {
                    writer.append(&s)?;
                    id += 1;
                }
            }
        }
        for flow in benign.iter().skip(trojan.len()) {
            if let Some(s) = flow_to_sample(flow, &fcfg, id) {
                writer.append(&s)?;
                id += 1;
            }
        }
        writer.finish()?;
    }

    let mut source = BinSampleFile::open(&path, &fcfg)?;
    let total = source.len();
    let val_n = 20.min(total / 4).max(2);
    let train_idx: Vec<usize> = (0..total - val_n).collect();
    let val_idx: Vec<usize> = (total - val_n..total).collect();

    let mut cfg = cfg.clone();
    cfg.seed = seed;
    let opts = TrainOptions {
        batch_size,
        max_epochs: epochs,
        patience: usize::MAX,
        ..Default::default()
    };

    alloc_track::reset_peak();
    let outcome = train::<f32>(&mut source, &train_idx, &val_idx, &cfg, &opts)?;
    let peak = alloc_track::peak_bytes();

    let _ = std::fs::remove_file(&path);
    Ok(TimingRow {
        n,
        secs_per_epoch: median(outcome.history.iter().map(|h| h.seconds).collect()),
        peak_mem_bytes: peak,
    })
}

/// Measure seconds/epoch and peak heap for each corpus size on an
/// identical config and batch size. Peak numbers are zero unless the
/// calling binary registered the tracking allocator.
pub fn timing_benchmark(
    cfg: &ModelConfig,
    sizes: &[usize],
    epochs: usize,
    batch_size: usize,
    work_dir: &Path,
    seed: u64,
) -> Result<Vec<TimingRow>> {
    sizes.iter().map(|&n| bench_one(cfg, n, epochs, batch_size, work_dir, seed)).collect()
}
