//! Quantum bounds for a small interferometric scene: builds the coherence
//! matrix, computes the quantum Fisher information matrix, the scalar bound,
//! and the symmetric logarithmic derivative of each pixel temperature.
//!
//! Run with: cargo run --example fisher_bounds

use qmet::fisher::{
    commutation_on_average, covariance_from_coherence, qfi_matrix, sld_detection_unitary,
    sld_matrix,
};
use qmet::scenario::ScenarioConfig;

fn main() -> qmet::Result<()> {
    let cfg = ScenarioConfig::line_scene(3, 2.5e3, 0.1, 300.0);
    let coh = cfg.coherence()?;
    println!(
        "scene: {} pixels, {} modes, Tr Γ = {:.4}",
        coh.num_params(),
        coh.num_modes(),
        coh.trace()
    );

    let cov = covariance_from_coherence(&coh);
    let qfi = qfi_matrix(&cov)?;
    println!("QFI matrix (1/K²):");
    for i in 0..coh.num_params() {
        let row: Vec<String> = (0..coh.num_params())
            .map(|j| format!("{:>12.5e}", qfi.matrix()[(i, j)]))
            .collect();
        println!("  {}", row.join(" "));
    }
    println!("scalar QCRB Tr(𝓕⁻¹) = {:.5e} K²", qfi.scalar_bound(None)?);
    println!("gain factor = {:.4} (max {})", qfi.gain_factor()?, coh.num_params());

    // SLD coefficient matrices and their measurement bases
    let slds: Vec<_> = (0..coh.num_params())
        .map(|i| sld_matrix(&cov, i))
        .collect::<qmet::Result<_>>()?;
    for (i, sld) in slds.iter().enumerate() {
        let (_, eigs) = sld_detection_unitary(sld);
        println!("SLD {i}: eigenvalues {:?}", eigs.iter().map(|e| (e * 1e3).round() / 1e3).collect::<Vec<_>>());
    }

    // commutation on average decides whether one measurement can be jointly
    // optimal for all parameters
    let c = commutation_on_average(&slds[0], &slds[1], coh.gamma())?;
    println!("Tr([M₁, M₂] Γᵀ) = {:.3e} (≈ 0: compatible)", c.norm());
    Ok(())
}
