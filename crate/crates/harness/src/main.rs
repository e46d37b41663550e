//! `qadv`: train, attack, and evaluate quantum and classical classifiers.
//!
//! Every subcommand reads an experiment config (TOML; built-in desk-scale
//! default when omitted), applies flag overrides, and writes CSV reports
//! plus a manifest carrying the config hash and the full seed plan. Exit
//! codes: 0 success, 2 usage, 10+ one per error category (printed on stderr
//! as `error category=<cat>: ...`).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qadv_harness::config::{DatasetSpec, ExperimentConfig};
use qadv_harness::experiments::{self, Context};
use qadv_core::{Error, Result};

#[derive(Parser)]
#[command(name = "qadv", version, about = "Adversarial robustness benchmark for quantum ML")]
struct Cli {
    /// Experiment config (TOML). Omit for the built-in desk-scale experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the attack ε grid (comma-separated, ascending).
    #[arg(long, global = true, value_delimiter = ',')]
    epsilon_grid: Option<Vec<f64>>,
    /// Select a single model id where the subcommand supports it.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Override the dataset kind: synth-digits | synth-blobs.
    #[arg(long, global = true)]
    dataset: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured model (or --model) and record clean accuracy.
    Train,
    /// Adversarially train a model at each ε^train and compare the twins.
    Advtrain,
    /// White-box attack curves across the ε grid.
    Attack,
    /// Attack one source model, replay on every target.
    Transfer,
    /// Trajectory-sampled accuracy under quantum noise channels.
    NoiseSweep,
    /// Score the classical/quantum disagreement detector.
    Detect,
    /// Export original/delta/perturbed PGM galleries.
    Export,
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::desk_default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(grid) = &cli.epsilon_grid {
        cfg.attack.epsilon_grid = grid.clone();
    }
    if let Some(kind) = &cli.dataset {
        let (train_examples, test_examples) = cfg.dataset.sizes();
        let classes = cfg.dataset.classes();
        let (width, height) = cfg.dataset.dims();
        cfg.dataset = match kind.as_str() {
            "synth-digits" => {
                DatasetSpec::SynthDigits { classes, width, height, train_examples, test_examples }
            }
            "synth-blobs" => {
                DatasetSpec::SynthBlobs { classes, width, height, train_examples, test_examples }
            }
            other => {
                return Err(Error::Config(format!(
                    "--dataset {other} is not 'synth-digits' or 'synth-blobs'"
                )))
            }
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = effective_config(cli)?;
    let ctx = Context::new(cfg)?;
    let model = cli.model.as_deref();
    match cli.command {
        Command::Train => {
            let rows = experiments::cmd_train(&ctx, model)?;
            for r in &rows {
                println!("{}: clean test accuracy {:.3}", r.target_id, r.accuracy);
            }
        }
        Command::Advtrain => {
            experiments::cmd_advtrain(&ctx, model)?;
        }
        Command::Attack => {
            let rows = experiments::cmd_attack(&ctx, model)?;
            for r in &rows {
                println!("{} @ ε={}: accuracy {:.3}", r.target_id, r.epsilon, r.accuracy);
            }
        }
        Command::Transfer => {
            let reports = experiments::cmd_transfer(&ctx)?;
            for rep in &reports {
                println!(
                    "transfer from {}: {} targets × {} ε cells",
                    rep.source_id,
                    rep.target_ids.len(),
                    rep.epsilon_grid.len()
                );
            }
        }
        Command::NoiseSweep => {
            let rows = experiments::cmd_noise(&ctx, model)?;
            for r in &rows {
                println!(
                    "{} p={}: accuracy {:.3} [{:.3}, {:.3}]",
                    r.noise_kind, r.strength, r.accuracy, r.ci_low, r.ci_high
                );
            }
        }
        Command::Detect => {
            experiments::cmd_detect(&ctx)?;
        }
        Command::Export => {
            experiments::cmd_export(&ctx, model)?;
        }
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err.category() {
        "config" => 10,
        "capability" => 11,
        "degenerate-input" => 12,
        "capacity" => 13,
        "data" => 14,
        "format" => 15,
        "training" => 16,
        _ => 17, // io
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error category={}: {err}", err.category());
            ExitCode::from(exit_code(&err))
        }
    }
}
