//! Loss-factor sweep for a 1D pixel array: how the quantum bound and the
//! single-photon classical bound separate as the photon flux grows.
//!
//! Run with: cargo run --example bound_sweep

use qmet::cli::{cmd_bound_sweep, GridSpec, OutputWriter, SweepVar};
use qmet::scenario::ScenarioConfig;

fn main() -> qmet::Result<()> {
    let cfg = ScenarioConfig::line_scene(3, 2.5e3, 0.5, 300.0);
    let dir = std::env::temp_dir().join("qmet_bound_sweep");
    let mut out = OutputWriter::new(&dir)?;
    let grid = GridSpec {
        values: vec![0.05, 0.1, 0.2, 0.5],
    };
    let rows = cmd_bound_sweep(&cfg, SweepVar::Mu, &grid, 7, 1, &mut out)?;
    println!("bound sweep written to {}", dir.display());
    println!(
        "{:>6} {:>13} {:>13} {:>13} {:>10} {:>9}",
        "mu", "QCRB", "CCRB(image)", "CCRB(random)", "Tr Γ", "ratio"
    );
    for r in &rows {
        println!(
            "{:>6.2} {:>13.5e} {:>13.5e} {:>13.5e} {:>10.5} {:>9.4}",
            r.value,
            r.qcrb,
            r.ccrb_image_opt,
            r.ccrb_initial,
            r.trace_gamma,
            r.ccrb_image_opt / r.qcrb
        );
    }
    Ok(())
}
