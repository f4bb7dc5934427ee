use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fbpinn_core::harness::{counters_check, gradcheck, run_experiment, Setup};
use fbpinn_core::problems::{burgers_reference, linspace};
use fbpinn_core::{Error, ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "fbpinn", version, about = "FBPINN trainer with multi-preconditioned L-BFGS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a config file and write its trace.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the Burgers reference field on a uniform (t, x) grid.
    Reference {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        nt: usize,
        #[arg(long)]
        nx: usize,
    },
    /// Check gradients and spatial jets against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train from a config and compare measured against predicted costs.
    Costcheck {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Loads a config and applies the `THREADS` override.
fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Ok(v) = std::env::var("THREADS") {
        cfg.threads = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("THREADS='{v}' is not a thread count")))?;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn train(config: &Path) -> Result<bool> {
    let cfg = load_config(config)?;
    let exp = run_experiment(&cfg)?;
    let last = exp.trace.final_record();
    println!(
        "{} {} epochs {} loss {:.6e} rel_l2 {:.6e}",
        cfg.problem, exp.trace.strategy, last.epoch, last.loss, last.l2
    );
    if let Some(reason) = &exp.trace.aborted {
        eprintln!("aborted: {reason}");
        return Ok(false);
    }
    Ok(true)
}

fn reference(out: &Path, nt: usize, nx: usize) -> Result<bool> {
    if nt < 2 || nx < 2 {
        return Err(Error::InvalidConfig("nt and nx must be at least 2".into()));
    }
    let field = burgers_reference(&linspace(0.0, 1.0, nt), &linspace(-1.0, 1.0, nx))?;
    let mut w = BufWriter::new(File::create(out)?);
    field.write_csv(&mut w)?;
    w.flush()?;
    Ok(true)
}

fn costcheck(config: &Path) -> Result<bool> {
    let cfg = load_config(config)?;
    let setup = Setup::new(&cfg)?;
    let trace = setup.run(&cfg.mp())?;
    if let Some(reason) = &trace.aborted {
        eprintln!("aborted: {reason}");
        return Ok(false);
    }
    let report = counters_check(trace.strategy, &trace.iteration_costs())?;
    println!("{report}");
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train { config } => train(&config),
        Command::Reference { out, nt, nx } => reference(&out, nt, nx),
        Command::Gradcheck { seed } => gradcheck(seed).map(|r| {
            println!("{r}");
            r.passed()
        }),
        Command::Costcheck { config } => costcheck(&config),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
