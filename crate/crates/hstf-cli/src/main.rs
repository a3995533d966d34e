//! hstf: HTTP-flow Trojan detection toolkit.
//!
//! Subcommands wire the library into complete workflows: capture
//! extraction, training, detection, evaluation, corpus synthesis, and
//! the training-cost benchmark.

mod commands;
mod config;

use std::path::PathBuf;
use std::sync::OnceLock;

use clap::{Parser, Subcommand};
use hstf_core::features::OverflowPolicy;

#[global_allocator]
static ALLOC: hstf_core::alloc_track::TrackingAllocator =
    hstf_core::alloc_track::TrackingAllocator;

const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(name = "hstf", version, about = "HTTP-flow Trojan detection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_policy(s: &str) -> Result<OverflowPolicy, String> {
    match s {
        "truncate" => Ok(OverflowPolicy::Truncate),
        "discard" => Ok(OverflowPolicy::Discard),
        _ => Err("policy must be `truncate` or `discard`".into()),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse a capture, reassemble flows, and write feature samples.
    Extract {
        #[arg(long)]
        input: PathBuf,
        /// Output directory for flows.jsonl and samples.jsonl.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value = "auto")]
        format: String,
        /// CSV label map (`key,label`, key = server host or flow id).
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Oversized-direction policy: truncate or discard.
        #[arg(long, value_parser = parse_policy)]
        policy: Option<OverflowPolicy>,
        /// Also write the compact binary sample form (samples.bin).
        #[arg(long)]
        bin: bool,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Train a detector on labeled samples and write a checkpoint.
    Train {
        #[arg(long)]
        input: PathBuf,
        /// Checkpoint path; history CSV lands at <output>.history.csv.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Store parameter data in a little-endian f32 sidecar blob.
        #[arg(long)]
        sidecar: bool,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Score flows with a checkpoint and print verdicts.
    Detect {
        /// Capture or sample file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Detection threshold on the malicious probability.
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[arg(long, default_value = "auto")]
        format: String,
        /// Write per-flow verdict lines here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_parser = parse_policy)]
        policy: Option<OverflowPolicy>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Run an evaluation preset over a labeled sample pool.
    Eval {
        #[arg(long)]
        input: PathBuf,
        /// Foreign corpus for cross-corpus (generalization) testing.
        #[arg(long)]
        test_pool: Option<PathBuf>,
        #[arg(long)]
        preset: String,
        /// Output directory for report.json and ROC CSVs.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the preset's repeat count.
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Generate a deterministic synthetic corpus.
    Synth {
        /// Output directory for flows.jsonl and labels.csv.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        count: usize,
        /// trojan, benign, or both (interleaved half/half).
        #[arg(long, default_value = "both")]
        class: String,
        #[arg(long, default_value = "high")]
        separability: String,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Measure seconds/epoch and peak memory across corpus sizes.
    Bench {
        /// Timing table CSV path.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [500usize, 1000, 2000, 4000])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        epochs: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

fn verbosity() -> u8 {
    static LEVEL: OnceLock<u8> = OnceLock::new();
    *LEVEL.get_or_init(|| match std::env::var("HSTF_LOG").as_deref() {
        Ok("quiet") | Ok("0") => 0,
        Ok("debug") | Ok("2") => 2,
        _ => 1,
    })
}

pub fn log_info(msg: &str) {
    if verbosity() >= 1 {
        eprintln!("hstf: {msg}");
    }
}

pub fn log_warn(msg: &str) {
    if verbosity() >= 1 {
        eprintln!("hstf: warning: {msg}");
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Extract { input, output, format, labels, config, policy, bin, seed: _ } => {
            commands::cmd_extract(commands::ExtractArgs {
                input,
                output,
                format,
                labels,
                config,
                policy,
                write_bin: bin,
            })
        }
        Command::Train { input, output, config, sidecar, seed } => {
            commands::cmd_train(commands::TrainArgs { input, output, config, seed, sidecar })
        }
        Command::Detect { input, checkpoint, lambda, format, output, policy, seed: _ } => {
            commands::cmd_detect(commands::DetectArgs {
                input,
                checkpoint,
                lambda,
                format,
                output,
                policy,
            })
        }
        Command::Eval { input, test_pool, preset, output, config, repeats, lambda, seed } => {
            commands::cmd_eval(commands::EvalArgs {
                input,
                test_pool,
                preset,
                output,
                config,
                repeats,
                seed,
                lambda,
            })
        }
        Command::Synth { output, count, class, separability, seed } => {
            commands::cmd_synth(commands::SynthArgs { output, count, class, separability, seed })
        }
        Command::Bench { output, sizes, epochs, config, seed } => {
            commands::cmd_bench(commands::BenchArgs { output, sizes, epochs, config, seed })
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        // One machine-parsable line per fatal error.
        let code = err
            .downcast_ref::<hstf_core::HstfError>()
            .map(|e| e.code())
            .unwrap_or("HSTF-E000");
        eprintln!("error[{code}]: {err:#}");
        std::process::exit(1);
    }
}
