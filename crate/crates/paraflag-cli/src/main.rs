//! `paraflag`: run a configured experiment, write CSV rows and a JSON
//! summary. Exit code 0 on success, 1 on config or usage errors, 2 when
//! an internal consistency check fails.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use paraflag::Error;
use paraflag_cli::{config, experiments, report};

#[derive(Parser)]
#[command(
    name = "paraflag",
    version,
    about = "Batch experiments for spectral paraproducts, model operators, and coupled systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Two-term Leibnitz ratio trials
    KatoPonce(RunArgs),
    /// Four-term second-order Leibnitz ratio trials
    GrandLeibnitz(RunArgs),
    /// Operator norm ratios over trials and a dilation ladder
    NormSweep(RunArgs),
    /// Size-energy bound ratios on random coefficient trees
    ModelBound(RunArgs),
    /// Coupled-system sup norms over a spectral parameter grid
    AknsScan(RunArgs),
    /// Scale-split residuals for products and triple products
    Decompose(RunArgs),
    /// Run the built-in closed-form checks
    SelfTest(SelfTestArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config
    #[arg(long)]
    config: PathBuf,
    /// CSV output path
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON summary path
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's trial count
    #[arg(long)]
    trials: Option<u32>,
    /// Suppress the progress line
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct SelfTestArgs {
    /// Suppress per-check lines
    #[arg(long)]
    quiet: bool,
}

fn emit(
    args: &RunArgs,
    experiment: &str,
    config: &impl serde::Serialize,
    csv: report::Csv,
    stats: serde_json::Value,
    progress: String,
) -> paraflag::Result<()> {
    if let Some(out) = &args.out {
        csv.write(out)?;
    }
    if let Some(summary) = &args.summary {
        report::write_summary(summary, experiment, config, stats)?;
    }
    if !args.quiet {
        println!("{experiment}: {progress}");
    }
    Ok(())
}

fn run(cmd: &Command) -> paraflag::Result<()> {
    match cmd {
        Command::KatoPonce(args) => {
            let mut cfg: config::KatoPonceConfig = config::load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            if let Some(trials) = args.trials {
                cfg.trials = trials;
            }
            let rep = experiments::run_kato_ponce(&cfg)?;
            let line = format!(
                "{} trials, max ratio {:.6}, median {:.6}",
                rep.rows.len(),
                rep.max_ratio,
                rep.median_ratio
            );
            emit(args, "kato-ponce", &cfg, rep.csv(), rep.stats(), line)
        }
        Command::GrandLeibnitz(args) => {
            let mut cfg: config::GrandLeibnitzConfig = config::load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            if let Some(trials) = args.trials {
                cfg.trials = trials;
            }
            let rep = experiments::run_grand_leibnitz(&cfg)?;
            let line = format!(
                "{} trials, max ratio {:.6}, median {:.6}",
                rep.rows.len(),
                rep.max_ratio,
                rep.median_ratio
            );
            emit(args, "grand-leibnitz", &cfg, rep.csv(), rep.stats(), line)
        }
        Command::NormSweep(args) => {
            let mut cfg: config::NormSweepConfig = config::load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            if let Some(trials) = args.trials {
                cfg.trials = trials;
            }
            let rep = experiments::run_norm_sweep(&cfg)?;
            let line = format!(
                "{} rows, max ratio per rung {:?}",
                rep.rows.len(),
                rep.max_per_rung
            );
            emit(args, "norm-sweep", &cfg, rep.csv(), rep.stats(), line)
        }
        Command::ModelBound(args) => {
            let mut cfg: config::ModelBoundConfig = config::load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            if let Some(trials) = args.trials {
                cfg.trials = trials;
            }
            let rep = experiments::run_model_bound(&cfg)?;
            let line = format!("{} rows", rep.rows.len());
            emit(args, "model-bound", &cfg, rep.csv(), rep.stats(&cfg), line)
        }
        Command::AknsScan(args) => {
            let cfg: config::AknsScanConfig = config::load_config(&args.config)?;
            let rows = experiments::run_akns_scan(&cfg)?;
            let stats = serde_json::json!({ "rows": rows.len() });
            let line = format!("{} rows", rows.len());
            emit(args, "akns-scan", &cfg, experiments::akns_csv(&rows), stats, line)
        }
        Command::Decompose(args) => {
            let mut cfg: config::DecomposeConfig = config::load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            if let Some(trials) = args.trials {
                cfg.trials = trials;
            }
            let rep = experiments::run_decompose(&cfg)?;
            let line = format!(
                "{} rows, max residuals {:.3e} (product) {:.3e} (triple)",
                rep.rows.len(),
                rep.max_product_residual,
                rep.max_triple_residual
            );
            emit(args, "decompose", &cfg, rep.csv(), rep.stats(), line)
        }
        Command::SelfTest(args) => experiments::self_test(args.quiet),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own usage text; config and usage problems
            // share exit code 1.
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InternalCheck(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
