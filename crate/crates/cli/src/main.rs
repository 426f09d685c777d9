mod commands;
mod config;
mod error;
mod io;
mod preprocess;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{EvaluateArgs, PreprocessArgs, Protocol};
use config::RunConfig;
use error::Result;
use preprocess::PreprocessSpec;

#[derive(Parser)]
#[command(name = "hdp-slds", version, about = "Sticky HDP-HMM switching VAR / SLDS samplers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a synthetic scenario: data.csv, z.csv and (SLDS) states.csv.
    Generate {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 1000)]
        length: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Transform a series; writes OUT and OUT.meta.json with the learned constants.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// log(max(y², 1e-12)), applied first.
        #[arg(long)]
        log_squared: bool,
        #[arg(long)]
        first_difference: bool,
        #[arg(long)]
        center: bool,
        /// Divide each component by its standard deviation.
        #[arg(long)]
        scale: bool,
        /// Rescale so the largest absolute entry equals this value.
        #[arg(long)]
        max_abs: Option<f64>,
        /// Undo centering and scaling using a metadata file from an earlier run.
        #[arg(long, conflicts_with_all = ["log_squared", "first_difference", "center", "scale", "max_abs"])]
        invert: Option<PathBuf>,
    },
    /// Run the Gibbs sampler; writes chain-*.jsonl traces and manifest.json.
    Fit {
        /// TOML or JSON run configuration.
        #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
        config: Option<PathBuf>,
        /// Re-run the configuration recorded in a manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize traces as plot-ready CSV files.
    Evaluate {
        /// Directory holding chain-*.jsonl (and manifest.json for held-out evaluation).
        #[arg(long)]
        traces: PathBuf,
        #[arg(long, value_enum)]
        protocol: ProtocolArg,
        #[arg(long)]
        out: PathBuf,
        /// True mode labels (1-based single-column CSV).
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Window length for the change-point ROC.
        #[arg(long, default_value_t = 50)]
        window: usize,
        /// Held-out observations in the same format as the training data.
        #[arg(long)]
        heldout: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Mode sequences drawn per posterior sample for the SLDS held-out likelihood.
        #[arg(long)]
        draws: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Hamming,
    Roc,
    Heldout,
    Modes,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { scenario, length, seed, out } => commands::generate(&scenario, length, seed, &out),
        Command::Preprocess { input, out, log_squared, first_difference, center, scale, max_abs, invert } => {
            commands::preprocess(PreprocessArgs {
                input: &input,
                out: &out,
                spec: PreprocessSpec { log_squared, first_difference, center, scale, max_abs },
                invert: invert.as_deref(),
            })
        }
        Command::Fit { config, manifest, seed, chains, out } => {
            let mut cfg = match (config, manifest) {
                (Some(path), _) => RunConfig::load(&path)?,
                (None, Some(path)) => commands::load_manifest(&path)?.config,
                (None, None) => unreachable!("clap requires one of --config and --manifest"),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(c) = chains {
                cfg.chains = c;
            }
            if let Some(o) = out {
                cfg.output = o;
            }
            let m = commands::fit(cfg)?;
            println!("wrote {} trace files to {} (config {})", m.traces.len(), m.config.output.display(), &m.config_hash[..12]);
            Ok(())
        }
        Command::Evaluate { traces, protocol, out, truth, window, heldout, seed, draws } => {
            commands::evaluate(EvaluateArgs {
                traces: &traces,
                protocol: match protocol {
                    ProtocolArg::Hamming => Protocol::Hamming,
                    ProtocolArg::Roc => Protocol::Roc,
                    ProtocolArg::Heldout => Protocol::Heldout,
                    ProtocolArg::Modes => Protocol::Modes,
                },
                out: &out,
                truth: truth.as_deref(),
                window,
                heldout: heldout.as_deref(),
                seed,
                draws,
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
