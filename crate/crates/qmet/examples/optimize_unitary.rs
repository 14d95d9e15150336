//! Riemannian conjugate gradient search for the most informative detection
//! unitary of a 1D array, starting from a Haar-random point.
//!
//! Run with: cargo run --example optimize_unitary

use qmet::cli::{cg_options_for, optimize_ccrb, scalar_qcrb};
use qmet::povm::{scalar_ccrb, UnitaryPoint};
use qmet::scenario::ScenarioConfig;

fn main() -> qmet::Result<()> {
    let cfg = ScenarioConfig::line_scene(4, 2.5e3, 0.05, 300.0);
    let coh = cfg.coherence()?;
    let qcrb = scalar_qcrb(&coh)?;
    let identity = scalar_ccrb(&coh, &UnitaryPoint::identity(coh.num_modes()), None)
        .unwrap_or(f64::INFINITY);

    let outcome = optimize_ccrb(&coh, &cg_options_for(coh.num_modes(), 1), None)?;
    println!("scalar QCRB            = {:.6e} K²", qcrb);
    println!("CCRB, identity U       = {:.6e} K²", identity);
    println!("CCRB, initial random U = {:.6e} K²", outcome.trace[0]);
    println!("CCRB, optimized U      = {:.6e} K²", outcome.cost);
    println!(
        "saturation CCRB/QCRB   = {:.4} after {} iterations (converged: {})",
        outcome.cost / qcrb,
        outcome.iterations,
        outcome.converged
    );
    println!("cost trace (every 10th iterate):");
    for (i, c) in outcome.trace.iter().enumerate().step_by(10) {
        println!("  iter {i:>4}: {c:.6e}");
    }
    Ok(())
}
