use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use qmet::cli::{
    cmd_bound_sweep, cmd_check, cmd_optimize_unitary, cmd_reconstruct, cmd_two_pixel_sweep,
    GridSpec, OutputWriter, SweepVar, UnitarySelector,
};
use qmet::error::{Error, Result};
use qmet::scenario::ScenarioConfig;

#[derive(Parser)]
#[command(
    name = "qmet",
    version,
    about = "Quantum-limited passive interferometric imaging simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the two-mode mixing angle and the local-measurement penalty.
    TwoPixel {
        #[command(flatten)]
        common: Common,
        /// Mixing-angle grid, `start:stop:count` or a comma list.
        #[arg(long, default_value = "0.015707963267948967:3.125884690321844:199")]
        grid: String,
    },
    /// Sweep one scenario variable and record the bounds.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Swept variable: mu, a or p.
        #[arg(long, default_value = "mu")]
        var: String,
        /// Value grid, `start:stop:count` or a comma list.
        #[arg(long, default_value = "0.05,0.1,0.5")]
        grid: String,
        /// Sample size used to scale the reported bounds.
        #[arg(long, default_value_t = 1)]
        samples: u64,
    },
    /// Optimize the detection unitary for the scenario image.
    Optimize {
        #[command(flatten)]
        common: Common,
    },
    /// Sample counts and reconstruct the temperature image.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Unitary: a CSV file path, or identity | uniform-optimal | image-optimal.
        #[arg(long, default_value = "image-optimal")]
        unitary: String,
        /// Number of detection shots.
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        /// Monte-Carlo replications.
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Allow paper-scale sample sizes (long runtime).
        #[arg(long, default_value_t = false)]
        full: bool,
    },
    /// Run the scenario consistency checks.
    Check {
        #[command(flatten)]
        common: Common,
    },
}

fn init_thread_pool() {
    if let Ok(text) = std::env::var("QMET_THREADS") {
        if let Ok(n) = text.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TwoPixel { common, grid } => {
            let started = Instant::now();
            let cfg = ScenarioConfig::from_path(&common.scenario)?;
            let grid = GridSpec::parse(&grid)?;
            let mut out = OutputWriter::new(&common.out)?;
            let summary = cmd_two_pixel_sweep(&cfg, &grid, &mut out)?;
            out.finish(Some(&common.scenario), "two-pixel", common.seed, started)?;
            println!(
                "two-pixel: argmin phi = {:.6}, CCRB_min/QCRB = {:.6}, gain = {:.4}",
                summary.argmin_phi,
                summary.min_ccrb / summary.qcrb,
                summary.gain_at_min
            );
        }
        Command::Sweep {
            common,
            var,
            grid,
            samples,
        } => {
            let started = Instant::now();
            let cfg = ScenarioConfig::from_path(&common.scenario)?;
            let var = SweepVar::parse(&var)?;
            let grid = GridSpec::parse(&grid)?;
            let mut out = OutputWriter::new(&common.out)?;
            let rows = cmd_bound_sweep(&cfg, var, &grid, common.seed, samples, &mut out)?;
            out.finish(Some(&common.scenario), "sweep", common.seed, started)?;
            for r in &rows {
                println!(
                    "value {:.4}: QCRB {:.6e}, CCRB(image-opt) {:.6e}{}",
                    r.value,
                    r.qcrb,
                    r.ccrb_image_opt,
                    if r.stalled { " [stalled]" } else { "" }
                );
            }
        }
        Command::Optimize { common } => {
            let started = Instant::now();
            let cfg = ScenarioConfig::from_path(&common.scenario)?;
            let mut out = OutputWriter::new(&common.out)?;
            let summary = cmd_optimize_unitary(&cfg, common.seed, &mut out)?;
            out.finish(Some(&common.scenario), "optimize", common.seed, started)?;
            println!(
                "optimize: CCRB {:.6e}, QCRB {:.6e}, ratio {:.6} ({} iterations)",
                summary.final_ccrb, summary.qcrb, summary.ratio, summary.iterations
            );
        }
        Command::Reconstruct {
            common,
            unitary,
            samples,
            reps,
            full,
        } => {
            let started = Instant::now();
            let cfg = ScenarioConfig::from_path(&common.scenario)?;
            let sel = UnitarySelector::parse(&unitary);
            let mut out = OutputWriter::new(&common.out)?;
            let summary =
                cmd_reconstruct(&cfg, &sel, samples, common.seed, reps, full, &mut out)?;
            out.finish(Some(&common.scenario), "reconstruct", common.seed, started)?;
            println!(
                "reconstruct: median RMSE {:.4} K over {} replications of {} shots",
                summary.median_rmse, summary.replications, summary.samples
            );
        }
        Command::Check { common } => {
            let cfg = ScenarioConfig::from_path(&common.scenario)?;
            let passed = cmd_check(&cfg, common.seed)?;
            for name in passed {
                println!("check {name}: ok");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match &e {
                Error::Config(_) | Error::Domain(_) | Error::Io(_) | Error::Json(_) => 2u8,
                _ => 3u8,
            };
            ExitCode::from(code)
        }
    }
}
