//! `pqlab` — experiment driver for the (p,q)-growth laboratory.

use clap::{Parser, Subcommand};
use pqlab_cli::config::ExperimentConfig;
use pqlab_cli::experiments::{contrast, counterexample, degiorgi_run, lipschitz, lorentz, regularize};
use pqlab_cli::{acceptance, CliError, CliResult};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "pqlab", about = "Numerical experiments for (p,q)-growth variational problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat key = value config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output CSV path (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 1 is the bitwise-reproducible reference mode.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    q: Option<f64>,
    #[arg(long, global = true)]
    kappa: Option<f64>,
    #[arg(long, global = true)]
    mu: Option<f64>,
    #[arg(long, global = true)]
    nu: Option<f64>,
    /// Comma-separated increasing contrast list.
    #[arg(long, global = true)]
    lambda_list: Option<String>,
    #[arg(long, global = true)]
    h: Option<f64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Input CSV (value,measure) for `lorentz`.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sup/L2 scaling of the anisotropic counterexample profile.
    Counterexample,
    /// Contrast study: measured ratios against c (Lambda/nu)^m.
    Contrast {
        /// Solve the PDE instead of using the analytic profile.
        #[arg(long)]
        solve: bool,
    },
    /// End-to-end level-set iteration study.
    Degiorgi,
    /// Lipschitz-estimate ratio across two grids.
    Lipschitz,
    /// Regularization convergence table.
    Regularize,
    /// Lorentz norms of a CSV sample set.
    Lorentz,
    /// Run the acceptance suite.
    Check,
}

fn build_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    macro_rules! over {
        ($field:ident, $key:literal) => {
            if let Some(v) = &cli.$field {
                cfg.set($key, &v.to_string())?;
            }
        };
    }
    over!(threads, "threads");
    over!(n, "n");
    over!(p, "p");
    over!(q, "q");
    over!(kappa, "kappa");
    over!(mu, "mu");
    over!(nu, "nu");
    over!(h, "h");
    over!(tol, "tol");
    if let Some(list) = &cli.lambda_list {
        cfg.set("lambda_list", list)?;
    }
    if let Some(input) = &cli.input {
        cfg.input = Some(input.clone());
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> CliResult<()> {
    let cfg = build_config(cli)?;
    let csv = match &cli.command {
        Command::Counterexample => counterexample::run(&cfg)?,
        Command::Contrast { solve } => contrast::run(
            &cfg,
            if *solve {
                contrast::ContrastMode::Solve
            } else {
                contrast::ContrastMode::Counterexample
            },
        )?,
        Command::Degiorgi => degiorgi_run::run(&cfg)?,
        Command::Lipschitz => lipschitz::run(&cfg)?,
        Command::Regularize => regularize::run(&cfg)?,
        Command::Lorentz => lorentz::run(&cfg)?,
        Command::Check => {
            let mut all_pass = true;
            for c in acceptance::run_all() {
                println!("{}", c.line());
                all_pass &= c.pass;
            }
            if !all_pass {
                return Err(CliError::Soundness("acceptance criteria failed".into()));
            }
            return Ok(());
        }
    };
    csv.write(cfg.out.as_deref())?;
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("pqlab: {e}");
        std::process::exit(e.exit_code());
    }
}
