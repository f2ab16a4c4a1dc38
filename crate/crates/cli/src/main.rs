//! `sensorsweep`: generate a synthetic sensor dataset, train the surrogate,
//! evaluate it and sweep the settings space for the best curve.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "sensorsweep", version, about = "Neural surrogate sensor tuning pipeline")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Reports directory; every output is written under it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Shrink the grids: 1.0 is the full design, 0.2 keeps 2 values per input.
    #[arg(long, global = true)]
    scale: Option<f64>,

    /// Disable the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the factorial dataset and the oracle configuration.
    Generate {
        /// Gaussian SNR noise, dB.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Train the surrogate on the training partition.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Hidden layer widths, comma separated.
        #[arg(long, value_delimiter = ',')]
        hidden: Option<Vec<usize>>,
        /// `adam` or `sgd`.
        #[arg(long)]
        optimizer: Option<String>,
    },
    /// Report MSE and R² per output on a partition.
    Evaluate {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        partition: commands::PartitionArg,
    },
    /// Sweep interpolated settings and select the best combinations.
    Optimize {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Oracle config for the ground-truth cross-check; defaults to
        /// `<out>/oracle.toml` when present.
        #[arg(long)]
        oracle: Option<PathBuf>,
        /// Extra criteria subset to select with, e.g. `c1,c2`.
        #[arg(long, value_delimiter = ',')]
        criteria: Option<Vec<String>>,
        #[arg(long)]
        row_budget: Option<u64>,
    },
}

fn resolve(cli: &Cli) -> Result<RunConfig, sensorsweep::Error> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let c = &cli.common;
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = &c.out {
        cfg.out = v.clone();
    }
    if let Some(v) = c.scale {
        cfg.scale = v;
    }
    if c.sequential {
        cfg.parallel = false;
    }
    match &cli.command {
        Command::Generate { noise } => {
            if let Some(v) = noise {
                cfg.oracle.noise_db = *v;
            }
        }
        Command::Train { dataset, epochs, batch_size, lr, hidden, optimizer } => {
            if let Some(v) = dataset {
                cfg.dataset = Some(v.clone());
            }
            if let Some(v) = epochs {
                cfg.train.epochs = *v;
            }
            if let Some(v) = batch_size {
                cfg.train.batch_size = *v;
            }
            if let Some(v) = lr {
                cfg.train.learning_rate = *v;
            }
            if let Some(v) = hidden {
                cfg.train.hidden = v.clone();
            }
            if let Some(v) = optimizer {
                cfg.train.optimizer = v.clone();
            }
        }
        Command::Evaluate { dataset, model, .. } => {
            if let Some(v) = dataset {
                cfg.dataset = Some(v.clone());
            }
            if let Some(v) = model {
                cfg.model = Some(v.clone());
            }
        }
        Command::Optimize { model, criteria, row_budget, .. } => {
            if let Some(v) = model {
                cfg.model = Some(v.clone());
            }
            if let Some(v) = criteria {
                cfg.sweep.criteria = v.clone();
            }
            if let Some(v) = row_budget {
                cfg.sweep.row_budget = *v;
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use sensorsweep::Error;
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => 1,
        _ => 2,
    }
}

/// The error chain joined with `: `, skipping causes whose text the
/// previous message already includes.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match resolve(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Generate { .. } => commands::generate(&cfg),
        Command::Train { .. } => commands::train(&cfg),
        Command::Evaluate { partition, .. } => commands::evaluate(&cfg, *partition),
        Command::Optimize { oracle, .. } => commands::optimize(&cfg, oracle.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
