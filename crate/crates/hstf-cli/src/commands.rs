//! Subcommand implementations.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};

use hstf_core::eval::{
    preset, report as report_io, run_experiment, timing_benchmark, EvalPlan, ExperimentReport,
    Scenario,
};
use hstf_core::features::sample_io::{
    read_samples_jsonl, write_samples_jsonl, BinSampleFile, BinSampleWriter,
};
use hstf_core::features::{flow_to_sample, FeatureConfig, FlowSample, MemSamples, SampleSource};
use hstf_core::flow::{
    jsonl, load_labels, parse_capture, reassemble, CaptureFormat, Flow, Label, LabelMap,
    ParseStats,
};
use hstf_core::model::{
    classify, forward, load_checkpoint, peek_dtype, save_checkpoint, CheckpointMeta, Mode,
    Scalar, TensorSample,
};
use hstf_core::seed::mix_seed;
use hstf_core::synth::{generate, GenProfile, Separability};

use crate::config::FileConfig;
use crate::{log_info, log_warn};

const IDLE_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Pcap,
    FlowJsonl,
    SamplesJsonl,
    SamplesBin,
}

/// Identify a file by magic bytes / first record shape.
pub fn sniff(path: &Path) -> Result<InputKind> {
    let mut head = [0u8; 8];
    let n = {
        let mut f = std::fs::File::open(path)
            .with_context(|| format!("cannot open {}", path.display()))?;
        f.read(&mut head)?
    };
    if n >= 8 && &head == b"HSTFBIN1" {
        return Ok(InputKind::SamplesBin);
    }
    if n >= 4 {
        let magic = u32::from_le_bytes(head[0..4].try_into().unwrap());
        if [0xa1b2_c3d4u32, 0xd4c3_b2a1, 0xa1b2_3c4d, 0x4d3c_b2a1].contains(&magic) {
            return Ok(InputKind::Pcap);
        }
    }
    // Peek at the first non-empty line for JSON-shaped input.
    let text = std::fs::read_to_string(path).unwrap_or_default();
    if let Some(line) = text.lines().find(|l| !l.trim().is_empty()) {
        if let Ok(v) = serde_json::from_str::<serde_json::Value>(line) {
            if v.get("schema").and_then(|s| s.as_str()) == Some("hstf-sample/v1") {
                return Ok(InputKind::SamplesJsonl);
            }
            if v.get("raw_b64").is_some() {
                return Ok(InputKind::FlowJsonl);
            }
        }
    }
    if text.is_empty() {
        // An empty capture is valid flow-jsonl.
        return Ok(InputKind::FlowJsonl);
    }
    bail!("unrecognized input format: {}", path.display())
}

fn resolve_format(flag: &str, path: &Path) -> Result<InputKind> {
    match flag {
        "auto" => sniff(path),
        "pcap" => Ok(InputKind::Pcap),
        "flow-jsonl" => Ok(InputKind::FlowJsonl),
        "samples" => match sniff(path)? {
            k @ (InputKind::SamplesBin | InputKind::SamplesJsonl) => Ok(k),
            _ => bail!("--format samples but {} is not a sample file", path.display()),
        },
        other => bail!("unknown format `{other}` (pcap, flow-jsonl, samples, auto)"),
    }
}

fn parse_flows(path: &Path, kind: InputKind) -> Result<(Vec<Flow>, ParseStats)> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let format = match kind {
        InputKind::Pcap => CaptureFormat::Pcap,
        InputKind::FlowJsonl => CaptureFormat::FlowJsonl,
        _ => bail!("expected a capture, found a sample file: {}", path.display()),
    };
    let (msgs, stats) = parse_capture(file, format)?;
    Ok((reassemble(msgs, IDLE_TIMEOUT), stats))
}

fn load_pool(path: &Path, fcfg: &FeatureConfig) -> Result<Box<dyn SampleSource>> {
    match sniff(path)? {
        InputKind::SamplesBin => Ok(Box::new(BinSampleFile::open(path, fcfg)?)),
        InputKind::SamplesJsonl => {
            let file = std::fs::File::open(path)?;
            let samples = read_samples_jsonl(file, fcfg)?;
            Ok(Box::new(MemSamples::new(fcfg.clone(), samples)))
        }
        _ => bail!("{} is not a sample file (extract it first)", path.display()),
    }
}

fn extract_samples(flows: &[Flow], fcfg: &FeatureConfig) -> (Vec<FlowSample>, usize) {
    let mut discarded = 0usize;
    let mut samples = Vec::with_capacity(flows.len());
    for (id, flow) in flows.iter().enumerate() {
        match flow_to_sample(flow, fcfg, id as u64) {
            Some(s) => samples.push(s),
            None => discarded += 1,
        }
    }
    (samples, discarded)
}

pub struct ExtractArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    pub format: String,
    pub labels: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub policy: Option<hstf_core::features::OverflowPolicy>,
    pub write_bin: bool,
}

pub fn cmd_extract(args: ExtractArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let fcfg = cfg.feature_config(args.policy)?;
    fcfg.validate()?;

    let kind = resolve_format(&args.format, &args.input)?;
    let (mut flows, stats) = parse_flows(&args.input, kind)?;
    if let Some(labels_path) = &args.labels {
        let map = LabelMap::from_path(labels_path)?;
        load_labels(&mut flows, &map);
    }
    let (samples, discarded) = extract_samples(&flows, &fcfg);

    std::fs::create_dir_all(&args.output)
        .with_context(|| format!("cannot create {}", args.output.display()))?;
    let flows_path = args.output.join("flows.jsonl");
    let mut flows_file = std::fs::File::create(&flows_path)?;
    jsonl::write_grouped(&mut flows_file, &flows)?;

    let samples_path = args.output.join("samples.jsonl");
    let mut samples_file = std::fs::File::create(&samples_path)?;
    write_samples_jsonl(&mut samples_file, &samples)?;

    if args.write_bin {
        let bin_path = args.output.join("samples.bin");
        let mut writer = BinSampleWriter::create(&bin_path, &fcfg)?;
        for s in &samples {
            writer.append(s)?;
        }
        writer.finish()?;
    }

    if flows.is_empty() {
        log_warn("capture contained no parseable HTTP messages");
    }
    println!(
        "extract: messages={} skipped_non_http={} skipped_undecodable={} flows={} samples={} discarded={}",
        stats.messages, stats.skipped_non_http, stats.skipped_undecodable,
        flows.len(), samples.len(), discarded
    );
    Ok(())
}

pub struct TrainArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    pub config: Option<PathBuf>,
    pub seed: u64,
    pub sidecar: bool,
}

/// Stratified 90/10 train/validation split over the pool.
fn train_val_split(labels: &[Label], seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut mal: Vec<usize> = Vec::new();
    let mut ben: Vec<usize> = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            Label::Malicious => mal.push(i),
            Label::Benign => ben.push(i),
            Label::Unlabeled => bail!("corpus contains unlabeled samples; label them first"),
        }
    }
    if mal.len() < 2 || ben.len() < 2 {
        bail!(
            "training needs at least 2 samples of each class (have {} malicious, {} benign)",
            mal.len(),
            ben.len()
        );
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(mix_seed(seed, &[6]));
    mal.shuffle(&mut rng);
    ben.shuffle(&mut rng);
    let mut val: Vec<usize> = Vec::new();
    let mut train: Vec<usize> = Vec::new();
    for class in [mal, ben] {
        let n_val = (class.len() / 10).max(1);
        val.extend(&class[..n_val]);
        train.extend(&class[n_val..]);
    }
    Ok((train, val))
}

pub fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg_file = FileConfig::load(args.config.as_deref())?;
    let fcfg = cfg_file.feature_config(None)?;
    let mut pool = load_pool(&args.input, &fcfg)?;
    let pool_cfg = pool.config().clone();

    let mut model_cfg = cfg_file.model_config(args.seed);
    model_cfg.rows = pool_cfg.rows;
    model_cfg.cols = pool_cfg.cols;
    model_cfg.flow_size = pool_cfg.flow_size;
    model_cfg.er_hidden = pool_cfg.cols;
    model_cfg.validate()?;
    let opts = cfg_file.train_options();

    let (train_idx, val_idx) = train_val_split(pool.labels(), args.seed)?;
    log_info(&format!(
        "training on {} samples ({} validation) at lr {}",
        train_idx.len(),
        val_idx.len(),
        model_cfg.lr
    ));
    let outcome =
        hstf_core::model::train::<f32>(pool.as_mut(), &train_idx, &val_idx, &model_cfg, &opts)?;

    let meta = CheckpointMeta {
        epochs: outcome.history.len(),
        final_loss: outcome.history.last().map(|h| h.loss).unwrap_or(f64::NAN),
        best_val_f1: outcome.best_val_f1,
        seed: args.seed,
        dtype: String::new(), // set by save_checkpoint
    };
    save_checkpoint(&args.output, &model_cfg, &outcome.params, &meta, args.sidecar)?;

    let history_path = args.output.with_extension("history.csv");
    let mut hist = std::fs::File::create(&history_path)?;
    writeln!(hist, "epoch,loss,acc,val_recall")?;
    for h in &outcome.history {
        writeln!(hist, "{},{},{},{}", h.epoch, h.loss, h.acc, h.val_recall)?;
    }

    println!(
        "train: epochs={} best_epoch={} best_val_f1={:.4} checkpoint={} history={}",
        outcome.history.len(),
        outcome.best_epoch,
        outcome.best_val_f1,
        args.output.display(),
        history_path.display()
    );
    Ok(())
}

pub struct DetectArgs {
    pub input: PathBuf,
    pub checkpoint: PathBuf,
    pub lambda: f64,
    pub format: String,
    pub output: Option<PathBuf>,
    pub policy: Option<hstf_core::features::OverflowPolicy>,
}

pub fn cmd_detect(args: DetectArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.lambda) {
        bail!("lambda {} outside [0, 1]", args.lambda);
    }
    match peek_dtype(&args.checkpoint)?.as_str() {
        "f32" => detect_typed::<f32>(args),
        "f64" => detect_typed::<f64>(args),
        other => bail!("checkpoint dtype `{other}` not runnable"),
    }
}

fn detect_typed<T: Scalar>(args: DetectArgs) -> Result<()> {
    let (model_cfg, params, _) = load_checkpoint::<T>(&args.checkpoint)?;
    let mut fcfg = model_cfg.feature_config();
    if let Some(policy) = args.policy {
        fcfg.overflow_policy = policy;
    }

    let kind = resolve_format(&args.format, &args.input)?;
    let (samples, discarded) = match kind {
        InputKind::Pcap | InputKind::FlowJsonl => {
            let (flows, _) = parse_flows(&args.input, kind)?;
            extract_samples(&flows, &fcfg)
        }
        InputKind::SamplesBin | InputKind::SamplesJsonl => {
            let mut pool = load_pool(&args.input, &fcfg)?;
            let all: Vec<FlowSample> =
                (0..pool.len()).map(|i| pool.get(i)).collect::<hstf_core::Result<_>>()?;
            (all, 0)
        }
    };

    let mut out: Box<dyn Write> = match &args.output {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout()),
    };
    let mut malicious = 0usize;
    let mut truncated_count = 0usize;
    for sample in &samples {
        let ts = TensorSample::<T>::from_sample(sample, &model_cfg)?;
        let (pred, _) = forward(&ts, &params, &model_cfg, Mode::Infer)?;
        let verdict = classify(&pred, args.lambda);
        if verdict == Label::Malicious {
            malicious += 1;
        }
        if sample.truncated {
            truncated_count += 1;
        }
        writeln!(
            out,
            "flow_id={} p_malicious={:.6} verdict={}{}",
            sample.flow_id,
            pred.p_malicious,
            match verdict {
                Label::Malicious => "Malicious",
                _ => "Benign",
            },
            if sample.truncated { " truncated" } else { "" }
        )?;
    }
    out.flush()?;
    println!(
        "detect: flows={} malicious={} benign={} truncated={} discarded={} lambda={}",
        samples.len(),
        malicious,
        samples.len() - malicious,
        truncated_count,
        discarded,
        args.lambda
    );
    Ok(())
}

pub struct EvalArgs {
    pub input: PathBuf,
    pub test_pool: Option<PathBuf>,
    pub preset: String,
    pub output: PathBuf,
    pub config: Option<PathBuf>,
    pub repeats: Option<usize>,
    pub seed: u64,
    pub lambda: f64,
}

pub fn cmd_eval(args: EvalArgs) -> Result<()> {
    let cfg_file = FileConfig::load(args.config.as_deref())?;
    let plan = preset(&args.preset, args.seed)?;
    let scenarios: Vec<(Scenario, Option<hstf_core::eval::ReferenceRow>)> = match plan {
        EvalPlan::Single(sc) => vec![(sc, None)],
        EvalPlan::Grid(grid) => grid.into_iter().map(|(sc, r)| (sc, Some(r))).collect(),
    };

    std::fs::create_dir_all(&args.output)?;
    let mut reports: Vec<ExperimentReport> = Vec::new();
    for (mut sc, reference) in scenarios {
        if let Some(r) = args.repeats {
            sc.repeats = r;
        }
        let fcfg = FeatureConfig {
            rows: sc.packet_rows,
            cols: sc.packet_cols,
            flow_size: sc.flow_size,
            ..cfg_file.feature_config(None)?
        };
        let mut pool = load_pool(&args.input, &fcfg)?;
        let mut foreign = match &args.test_pool {
            Some(p) => Some(load_pool(p, &fcfg)?),
            None => None,
        };
        let model_cfg = cfg_file.model_config(args.seed);
        let opts = cfg_file.train_options();
        log_info(&format!("running scenario {} ({} repeats)", sc.name, sc.repeats));
        let report = run_experiment::<f32>(
            pool.as_mut(),
            foreign.as_deref_mut(),
            &sc,
            &model_cfg,
            &opts,
            args.lambda,
            reference,
        )?;
        let roc_name = if reports.is_empty() && args.preset != "paper-robustness" {
            "roc.csv".to_string()
        } else {
            format!("roc-{}.csv", sc.name)
        };
        report_io::write_roc_csv(&args.output.join(roc_name), &report.roc, &report.config_hash)?;
        println!(
            "eval {}: mode={} mean P={:.4} R={:.4} F1={:.4} FPR={:.4} AUC={:.4}",
            report.scenario.name,
            report.mode,
            report.mean.precision,
            report.mean.recall,
            report.mean.f_beta,
            report.mean.fpr,
            report.mean.auc
        );
        reports.push(report);
    }

    let report_path = args.output.join("report.json");
    report_io::write_report_json(&report_path, &reports)?;
    if args.preset == "paper-robustness" {
        println!("{}", report_io::reference_comparison(&reports));
    }
    println!("eval: report={}", report_path.display());
    Ok(())
}

pub struct SynthArgs {
    pub output: PathBuf,
    pub count: usize,
    pub class: String,
    pub separability: String,
    pub seed: u64,
}

pub fn cmd_synth(args: SynthArgs) -> Result<()> {
    if args.count == 0 {
        bail!("count must be positive");
    }
    let sep = Separability::parse(&args.separability)
        .ok_or_else(|| anyhow::anyhow!("separability must be high, medium, or low"))?;

    let flows: Vec<Flow> = match args.class.as_str() {
        "trojan" => generate(&GenProfile::trojan(sep, args.seed), args.count),
        "benign" => generate(&GenProfile::benign(sep, args.seed), args.count),
        "both" => {
            let half = args.count / 2;
            let trojan = generate(&GenProfile::trojan(sep, args.seed), half);
            let benign = generate(&GenProfile::benign(sep, args.seed + 1), args.count - half);
            // Interleave so any prefix of the corpus is class-balanced.
            let mut out = Vec::with_capacity(args.count);
            let mut t = trojan.into_iter();
            let mut b = benign.into_iter();
            loop {
                match (t.next(), b.next()) {
                    (None, None) => break,
                    (x, y) => {
                        out.extend(x);
                        out.extend(y);
                    }
                }
            }
            out
        }
        other => bail!("class must be trojan, benign, or both (got `{other}`)"),
    };

    std::fs::create_dir_all(&args.output)?;
    let flows_path = args.output.join("flows.jsonl");
    let mut flows_file = std::fs::File::create(&flows_path)?;
    jsonl::write_jsonl(&mut flows_file, &flows)?;

    let labels_path = args.output.join("labels.csv");
    let mut labels_file = std::fs::File::create(&labels_path)?;
    writeln!(labels_file, "# seed: {}", args.seed)?;
    writeln!(labels_file, "key,label")?;
    let mut seen = std::collections::BTreeSet::new();
    for flow in &flows {
        let key = flow.key.server.host.clone();
        if seen.insert(key.clone()) {
            writeln!(labels_file, "{key},{}", flow.label.as_str())?;
        }
    }

    let trojan_count = flows.iter().filter(|f| f.label == Label::Malicious).count();
    println!(
        "synth: flows={} trojan={} benign={} out={}",
        flows.len(),
        trojan_count,
        flows.len() - trojan_count,
        args.output.display()
    );
    Ok(())
}

pub struct BenchArgs {
    pub output: PathBuf,
    pub sizes: Vec<usize>,
    pub epochs: usize,
    pub config: Option<PathBuf>,
    pub seed: u64,
}

pub fn cmd_bench(args: BenchArgs) -> Result<()> {
    let cfg_file = FileConfig::load(args.config.as_deref())?;
    let model_cfg = cfg_file.model_config(args.seed);
    let work_dir = std::env::temp_dir().join(format!("hstf-bench-{}", std::process::id()));
    std::fs::create_dir_all(&work_dir)?;

    let batch = cfg_file.train_options().batch_size;
    let rows = timing_benchmark(&model_cfg, &args.sizes, args.epochs, batch, &work_dir, args.seed)?;
    let _ = std::fs::remove_dir_all(&work_dir);

    let hash = hstf_core::eval::config_hash(&Scenario::default(), &model_cfg, 0.5);
    report_io::write_timing_csv(&args.output, &rows, &hash)?;
    for r in &rows {
        println!(
            "bench: n={} secs_per_epoch={:.3} peak_mem_bytes={}",
            r.n, r.secs_per_epoch, r.peak_mem_bytes
        );
    }
    if !hstf_core::alloc_track::active() {
        log_warn("peak memory reads 0: heap tracking inactive");
    }
    println!("bench: table={}", args.output.display());
    Ok(())
}
