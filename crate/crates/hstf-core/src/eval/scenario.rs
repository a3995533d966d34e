//! Imbalance scenarios: seeded repeated splits with a fixed 1:1 test
//! ratio and a configurable malicious:benign train ratio.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HstfError, Result};
use crate::flow::Label;
use crate::seed::mix_seed;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Train-set ratio malicious : benign.
    pub ratio_mal: u32,
    pub ratio_ben: u32,
    pub packet_rows: usize,
    pub packet_cols: usize,
    pub flow_size: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Malicious train count; None takes as much as the pool allows.
    pub train_mal: Option<usize>,
    /// Per-class test count; None uses 20% of the smaller class.
    pub test_per_class: Option<usize>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "custom".into(),
            ratio_mal: 1,
            ratio_ben: 1,
            packet_rows: 20,
            packet_cols: 40,
            flow_size: 3,
            repeats: 10,
            seed: 42,
            train_mal: None,
            test_per_class: None,
        }
    }
}

/// One repeat's index sets into the sample pool; pairwise disjoint.
#[derive(Debug, Clone, Serialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

fn class_indices(labels: &[Label]) -> (Vec<usize>, Vec<usize>) {
    let mut mal = Vec::new();
    let mut ben = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            Label::Malicious => mal.push(i),
            Label::Benign => ben.push(i),
            Label::Unlabeled => {}
        }
    }
    (mal, ben)
}

fn need(class: &'static str, required: usize, available: usize) -> Result<()> {
    if required > available {
        Err(HstfError::InsufficientData { class, required, available })
    } else {
        Ok(())
    }
}

/// Carve a stratified validation split (10% per class) out of a train
/// list that is laid out malicious-first.
fn carve_val(train: &mut Vec<usize>, n_mal: usize) -> Vec<usize> {
    let n_ben = train.len() - n_mal;
    let val_mal = if n_mal >= 2 { (n_mal / 10).max(1) } else { 0 };
    let val_ben = if n_ben >= 2 { (n_ben / 10).max(1) } else { 0 };
    let mut val = Vec::with_capacity(val_mal + val_ben);
    // Take from the tail of each class block so train keeps its prefix.
    val.extend(train.drain(n_mal - val_mal..n_mal));
    let len = train.len();
    val.extend(train.drain(len - val_ben..));
    val
}

/// Build `repeats` disjoint (train, val, test) splits over a labeled
/// pool. Test is 1:1; train honors the scenario ratio; validation is a
/// stratified 10% carved from the train portion.
pub fn build_scenario(labels: &[Label], sc: &Scenario) -> Result<Vec<SplitIndices>> {
    if sc.ratio_mal == 0 || sc.ratio_ben == 0 {
        return Err(HstfError::Config("scenario ratios must be positive".into()));
    }
    let (mal_pool, ben_pool) = class_indices(labels);

    let test_n = sc
        .test_per_class
        .unwrap_or_else(|| (mal_pool.len().min(ben_pool.len()) / 5).max(1));
    need("malicious", test_n + 1, mal_pool.len())?;
    need("benign", test_n + 1, ben_pool.len())?;
    let avail_mal = mal_pool.len() - test_n;
    let avail_ben = ben_pool.len() - test_n;

    let train_mal = match sc.train_mal {
        Some(n) => n,
        None => {
            let cap_by_ben = (avail_ben as u64 * sc.ratio_mal as u64 / sc.ratio_ben as u64) as usize;
            avail_mal.min(cap_by_ben).max(1)
        }
    };
    let train_ben = (train_mal as u64 * sc.ratio_ben as u64 / sc.ratio_mal as u64) as usize;
    need("malicious", train_mal, avail_mal)?;
    need("benign", train_ben.max(1), avail_ben)?;
    if train_mal == 0 || train_ben == 0 {
        return Err(HstfError::Config(format!(
            "ratio {}:{} with train_mal {train_mal} leaves an empty class",
            sc.ratio_mal, sc.ratio_ben
        )));
    }

    let mut splits = Vec::with_capacity(sc.repeats);
    for repeat in 0..sc.repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(sc.seed, &[2, repeat as u64]));
        let mut mal = mal_pool.clone();
        let mut ben = ben_pool.clone();
        mal.shuffle(&mut rng);
        ben.shuffle(&mut rng);

        let test: Vec<usize> = mal[..test_n].iter().chain(&ben[..test_n]).copied().collect();
        let mut train: Vec<usize> = mal[test_n..test_n + train_mal]
            .iter()
            .chain(&ben[test_n..test_n + train_ben])
            .copied()
            .collect();
        let val = carve_val(&mut train, train_mal);
        splits.push(SplitIndices { train, val, test });
    }
    Ok(splits)
}

/// Published reference results for the BTHT-2018 robustness grid
/// (train ratio 1:k, percentages).
pub const BTHT2018_REFERENCE: [(u32, f64, f64, f64); 8] = [
    (1, 99.66, 99.28, 99.47),
    (3, 99.76, 99.74, 99.75),
    (6, 99.96, 99.66, 99.81),
    (10, 99.76, 99.42, 99.59),
    (16, 99.84, 99.00, 99.42),
    (24, 99.78, 99.34, 99.56),
    (50, 99.90, 98.34, 99.11),
    (100, 99.98, 97.30, 98.62),
];

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub precision_pct: f64,
    pub recall_pct: f64,
    pub f1_pct: f64,
}

/// A preset resolves to one scenario or a whole grid with reference rows
/// to print next to the measured results.
pub enum EvalPlan {
    Single(Scenario),
    Grid(Vec<(Scenario, ReferenceRow)>),
}

fn robustness(ratio_ben: u32, seed: u64) -> Scenario {
    Scenario {
        name: format!("robustness-1to{ratio_ben}"),
        ratio_ben,
        seed,
        ..Default::default()
    }
}

fn sized(rows: usize, cols: usize, flow_size: usize, seed: u64) -> Scenario {
    Scenario {
        name: format!("size-{}-{}", rows * cols, flow_size),
        packet_rows: rows,
        packet_cols: cols,
        flow_size,
        seed,
        ..Default::default()
    }
}

pub const RATIO_GRID: [u32; 8] = [1, 3, 6, 10, 16, 24, 50, 100];

/// Resolve a named preset. The ratio grid mirrors the published
/// robustness scenarios; packet sizes 400 and 800 map to 20x20 and
/// 20x40 matrices with flow sizes 3 or 6.
pub fn preset(name: &str, seed: u64) -> Result<EvalPlan> {
    for k in RATIO_GRID {
        if name == format!("robustness-1to{k}") {
            return Ok(EvalPlan::Single(robustness(k, seed)));
        }
    }
    match name {
        "size-400-3" => Ok(EvalPlan::Single(sized(20, 20, 3, seed))),
        "size-400-6" => Ok(EvalPlan::Single(sized(20, 20, 6, seed))),
        "size-800-3" => Ok(EvalPlan::Single(sized(20, 40, 3, seed))),
        "size-800-6" => Ok(EvalPlan::Single(sized(20, 40, 6, seed))),
        "paper-robustness" => Ok(EvalPlan::Grid(
            BTHT2018_REFERENCE
                .iter()
                .map(|&(k, p, r, f1)| {
                    (
                        robustness(k, seed),
                        ReferenceRow { precision_pct: p, recall_pct: r, f1_pct: f1 },
                    )
                })
                .collect(),
        )),
        other => Err(HstfError::UnknownPreset(other.into(), preset_names().join(", "))),
    }
}

pub fn preset_names() -> Vec<String> {
    let mut names: Vec<String> =
        RATIO_GRID.iter().map(|k| format!("robustness-1to{k}")).collect();
    names.extend(
        ["size-400-3", "size-400-6", "size-800-3", "size-800-6", "paper-robustness"]
            .map(String::from),
    );
    names
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(mal: usize, ben: usize) -> Vec<Label> {
        let mut v = vec![Label::Malicious; mal];
        v.extend(vec![Label::Benign; ben]);
        v
    }

    #[test]
    fn ratio_and_disjointness() {
        let labels = pool(1000, 10000);
        let sc = Scenario {
            ratio_ben: 10,
            test_per_class: Some(200),
            repeats: 3,
            ..Default::default()
        };
        let splits = build_scenario(&labels, &sc).unwrap();
        assert_eq!(splits.len(), 3);
        for s in &splits {
            let train_mal = s.train.iter().filter(|&&i| labels[i] == Label::Malicious).count();
            let train_ben = s.train.len() - train_mal;
            // 10% per class went to validation.
            let val_mal = s.val.iter().filter(|&&i| labels[i] == Label::Malicious).count();
            let total_mal = train_mal + val_mal;
            let total_ben = train_ben + (s.val.len() - val_mal);
            assert_eq!(total_ben, total_mal * 10);

            let test_mal = s.test.iter().filter(|&&i| labels[i] == Label::Malicious).count();
            assert_eq!(test_mal * 2, s.test.len());

            let mut all: Vec<usize> =
                s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            let n = all.len();
            all.sort_unstable();
            all.dedup();
            assert_eq!(all.len(), n, "splits overlap");
        }
    }

    #[test]
    fn repeats_differ_but_reseed_identically() {
        let labels = pool(50, 500);
        let sc = Scenario { ratio_ben: 3, repeats: 2, ..Default::default() };
        let a = build_scenario(&labels, &sc).unwrap();
        let b = build_scenario(&labels, &sc).unwrap();
        assert_eq!(a[0].train, b[0].train);
        assert_eq!(a[1].test, b[1].test);
        assert_ne!(a[0].train, a[1].train);
    }

    #[test]
    fn insufficient_pool_is_fatal_with_counts() {
        let labels = pool(50, 10000);
        let sc = Scenario {
            ratio_ben: 100,
            train_mal: Some(100),
            test_per_class: Some(10),
            ..Default::default()
        };
        match build_scenario(&labels, &sc) {
            Err(HstfError::InsufficientData { class, required, available }) => {
                assert_eq!(class, "malicious");
                assert_eq!(required, 100);
                assert_eq!(available, 40);
            }
            other => panic!("expected InsufficientData, got {other:?}"),
        }
    }

    #[test]
    fn presets_resolve() {
        assert!(matches!(preset("robustness-1to100", 1), Ok(EvalPlan::Single(_))));
        assert!(matches!(preset("size-400-6", 1), Ok(EvalPlan::Single(s)) if s.packet_cols == 20));
        match preset("paper-robustness", 1) {
            Ok(EvalPlan::Grid(grid)) => {
                assert_eq!(grid.len(), 8);
                assert_eq!(grid[7].0.ratio_ben, 100);
                assert_eq!(grid[7].1.f1_pct, 98.62);
            }
            _ => panic!("grid expected"),
        }
        match preset("nope", 1) {
            Err(HstfError::UnknownPreset(name, list)) => {
                assert_eq!(name, "nope");
                assert!(list.contains("robustness-1to1"));
            }
            _ => panic!("unknown preset expected"),
        }
    }
}
