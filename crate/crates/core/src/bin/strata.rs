//! Batch experiment driver for layered-composite rigidity and
//! homogenization studies. Exit codes: 0 success, 2 configuration error,
//! 3 numerical non-convergence (partial CSV still written).

use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::process::ExitCode;
use strata_core::experiments::{
    run_cell_sweep, run_pipeline, run_scaling, run_weak_convergence, CsvDoc, ExperimentConfig,
    ExperimentKind,
};
use strata_core::rigidity::ScalingVerdict;
use strata_core::Error;

#[derive(Parser)]
#[command(
    name = "strata",
    about = "Scaling studies, weak-convergence checks, rigidity pipelines and cell-formula sweeps for layered composites",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Flat key-value configuration file.
    #[arg(long)]
    config: std::path::PathBuf,
    /// Output CSV path (overrides `out` from the config).
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Cap on worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Energy-scaling sweep over eps with a log-log exponent fit.
    Scaling(RunArgs),
    /// Weak-convergence errors against polynomial test fields.
    Weakconv(RunArgs),
    /// Layerwise rotation extraction, approximants and shift moduli.
    Pipeline(RunArgs),
    /// Homogenized-density values along a shear ray, by all available paths.
    Cellsweep(RunArgs),
}

fn load_config(args: &RunArgs, kind: ExperimentKind) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = ExperimentConfig::parse(&text, kind)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_csv(args: &RunArgs, cfg: &ExperimentConfig, csv: &CsvDoc) -> Result<(), Error> {
    let path = args
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(std::path::PathBuf::from))
        .ok_or_else(|| Error::Config {
            line: 0,
            field: "out".into(),
            msg: "no output path: set `out` in the config or pass --out".into(),
        })?;
    let mut file = std::fs::File::create(&path)?;
    csv.write_to(&mut file)?;
    file.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(kind: ExperimentKind, args: &RunArgs) -> Result<bool, Error> {
    if let Some(threads) = args.threads {
        // ignore failure when a pool is already installed (tests, repeats)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let cfg = load_config(args, kind)?;
    match kind {
        ExperimentKind::Scaling => {
            let out = run_scaling(&cfg)?;
            write_csv(args, &cfg, &out.csv)?;
            match out.report.verdict {
                ScalingVerdict::PowerLaw {
                    slope, residual, ..
                } => println!(
                    "scaling[{}]: fitted slope {slope:.4} (rms log-residual {residual:.2e})",
                    cfg.example.name()
                ),
                ScalingVerdict::ExactRigidity => println!(
                    "scaling[{}]: exact rigidity (all stiff energies vanish)",
                    cfg.example.name()
                ),
            }
            Ok(true)
        }
        ExperimentKind::WeakConv => {
            let csv = run_weak_convergence(&cfg)?;
            write_csv(args, &cfg, &csv)?;
            println!("weakconv[{}]: {} rows", cfg.example.name(), csv.rows.len());
            Ok(true)
        }
        ExperimentKind::Pipeline => {
            let csv = run_pipeline(&cfg)?;
            write_csv(args, &cfg, &csv)?;
            println!("pipeline[{}]: {} rows", cfg.example.name(), csv.rows.len());
            Ok(true)
        }
        ExperimentKind::CellSweep => {
            let out = run_cell_sweep(&cfg)?;
            write_csv(args, &cfg, &out.csv)?;
            println!(
                "cellsweep[{}]: {} rows, converged = {}",
                cfg.density.name(),
                out.csv.rows.len(),
                out.all_converged
            );
            Ok(out.all_converged)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Scaling(a) => (ExperimentKind::Scaling, a),
        Command::Weakconv(a) => (ExperimentKind::WeakConv, a),
        Command::Pipeline(a) => (ExperimentKind::Pipeline, a),
        Command::Cellsweep(a) => (ExperimentKind::CellSweep, a),
    };
    match run(kind, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: numerical non-convergence; partial results written");
            ExitCode::from(3)
        }
        Err(e @ Error::Config { .. }) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(Error::NonConvergence(msg)) => {
            eprintln!("non-convergence: {msg}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
