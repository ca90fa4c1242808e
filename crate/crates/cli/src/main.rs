//! `zonosmooth` command-line driver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use zonosmooth::harness::{self, ExperimentConfig, Task, FULL_SCALE_TRIALS};

#[derive(Parser)]
#[command(name = "zonosmooth", version, about = "Set-membership filtering and smoothing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter only: diameters.csv and hulls_trial0.csv.
    Filter(Common),
    /// Filter and smoother: adds mse.csv.
    Smooth {
        #[command(flatten)]
        common: Common,
        /// Also write trial 0's sets as JSON records (linear systems).
        #[arg(long)]
        dump_sets: bool,
    },
    /// Smoother against the Gaussian RTS baseline, fixed and grid-tuned.
    CompareRts(Common),
    /// Compare trial 0's hulls against the lattice oracle.
    OracleCheck(Common),
    /// Grid search of the RTS noise parameters: rts_grid.csv.
    TuneRts(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config file; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir` from the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the full Monte-Carlo trial count.
    #[arg(long, conflicts_with = "trials")]
    full_scale: bool,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)
                .with_context(|| format!("loading config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if self.full_scale {
            cfg.trials = FULL_SCALE_TRIALS;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate().context("invalid settings")?;
        let out = self.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
        Ok((cfg, out))
    }
}

fn report(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn experiment(common: &Common, task: Task) -> Result<(ExperimentConfig, PathBuf)> {
    let (cfg, out) = common.load()?;
    log::info!("{} trials, horizon {}, seed {}", cfg.trials, cfg.horizon, cfg.seed);
    let summary = harness::run_experiment(&cfg, task, &out)?;
    if let Some(best) = summary.tuned {
        println!("tuned q = {}, r = {}, mse = {}", best.q, best.r, best.mse);
    }
    report(&summary.files);
    Ok((cfg, out))
}

fn oracle_check(common: &Common) -> Result<()> {
    let (cfg, out) = common.load()?;
    let rows = harness::oracle_check(&cfg, Some(&out))?;
    println!("{:>3} {:>12} {:>12}", "k", "filt_gap", "smooth_gap");
    for r in &rows {
        println!("{:>3} {:>12.6} {:>12.6}", r.k, r.filtered_gap(), r.smoothed_gap());
    }
    report(&[out.join("oracle_check.csv")]);
    Ok(())
}

fn tune(common: &Common) -> Result<()> {
    let (cfg, out) = common.load()?;
    let res = harness::tune_rts(&cfg, Some(&out))?;
    println!("best q = {}, r = {}, mse = {}", res.best.q, res.best.r, res.best.mse);
    report(&[out.join("rts_grid.csv")]);
    Ok(())
}

fn dump_sets(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let path = harness::write_sets(cfg, out)?;
    report(&[path]);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Filter(c) => experiment(c, Task::Filter).map(drop),
        Command::Smooth { common, dump_sets: dump } => {
            let (cfg, out) = experiment(common, Task::Smooth)?;
            if *dump {
                dump_sets(&cfg, &out)?;
            }
            Ok(())
        }
        Command::CompareRts(c) => experiment(c, Task::CompareRts).map(drop),
        Command::OracleCheck(c) => oracle_check(c),
        Command::TuneRts(c) => tune(c),
    }
}

/// Joins the error chain, skipping causes already quoted by their parent.
fn chain_message(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    let mut last = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !last.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
        last = text;
    }
    msg
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", chain_message(&e));
            ExitCode::FAILURE
        }
    }
}
