//! End-to-end image reconstruction: samples single-photon counts from a
//! contrasty 1D scene and recovers the pixel temperatures by maximum
//! likelihood, under the image-optimized and the identity measurement.
//!
//! Run with: cargo run --example reconstruct

use qmet::cli::{cmd_reconstruct, OutputWriter, UnitarySelector};
use qmet::scenario::{ScenarioConfig, Temperatures};

fn main() -> qmet::Result<()> {
    let mut cfg = ScenarioConfig::line_scene(5, 3e3, 0.01, 300.0);
    cfg.temperatures_k = Temperatures::PerPixel(vec![240.0, 320.0, 240.0, 320.0, 240.0]);

    for sel in [UnitarySelector::ImageOptimal, UnitarySelector::Identity] {
        let name = match &sel {
            UnitarySelector::ImageOptimal => "image-optimal",
            _ => "identity",
        };
        let dir = std::env::temp_dir().join(format!("qmet_reconstruct_{name}"));
        let mut out = OutputWriter::new(&dir)?;
        let summary = cmd_reconstruct(&cfg, &sel, 2_000_000, 11, 3, false, &mut out)?;
        println!(
            "{name:>14}: median RMSE {:.2} K over {} replications ({} shots each)",
            summary.median_rmse, summary.replications, summary.samples
        );
        println!("{:>14}  outputs in {}", "", dir.display());
    }
    Ok(())
}
