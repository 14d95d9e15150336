//! Imaging geometry and the coherence matrix of the received thermal field.
//!
//! A pixelated temperature scene on the ground illuminates an antenna array at
//! altitude `R`. In the far-field, narrowband regime the second moments
//! `Γ_kl = ⟨b†_k b_l⟩` of the received Gaussian state are linear in the pixel
//! temperatures: each antenna pair samples one spatial frequency of the scene,
//! with a sinc envelope from the finite pixel size.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Boltzmann constant, J/K (CODATA).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Reduced Planck constant, J s (CODATA).
pub const REDUCED_PLANCK: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Radiometric sensitivity constant `2 k_B / (π ħ ω₀)` in 1/K for the
/// observation band centered at `wavelength` (m).
pub fn compute_kappa(wavelength: f64) -> Result<f64> {
    if !(wavelength > 0.0) || !wavelength.is_finite() {
        return Err(Error::Domain(format!(
            "wavelength must be positive and finite, got {wavelength}"
        )));
    }
    let omega0 = 2.0 * PI * SPEED_OF_LIGHT / wavelength;
    Ok(2.0 * BOLTZMANN / (PI * REDUCED_PLANCK * omega0))
}

/// Normalized sinc, `sin(πu)/(πu)`; the exact Fourier transform of a unit box.
pub fn sinc_pi(u: f64) -> f64 {
    let x = PI * u;
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Physical constants of the observation: inverse temperature `kappa` (1/K),
/// loss factor `mu`, central `wavelength` (m) and the filter `bandwidth` (Hz).
///
/// The bandwidth is carried for bookkeeping only; the narrowband coherence
/// model does not depend on it.
#[derive(Debug, Clone)]
pub struct PhysicsConstants {
    pub kappa: f64,
    pub mu: f64,
    pub wavelength: f64,
    pub bandwidth: f64,
}

impl PhysicsConstants {
    pub fn new(kappa: f64, mu: f64, wavelength: f64, bandwidth: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::Domain(format!("kappa must be > 0, got {kappa}")));
        }
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::Domain(format!("mu must be in (0, 1], got {mu}")));
        }
        if !(wavelength > 0.0) {
            return Err(Error::Domain(format!(
                "wavelength must be > 0, got {wavelength}"
            )));
        }
        Ok(Self {
            kappa,
            mu,
            wavelength,
            bandwidth,
        })
    }

    /// Derives `kappa` from the wavelength.
    pub fn from_wavelength(mu: f64, wavelength: f64, bandwidth: f64) -> Result<Self> {
        let kappa = compute_kappa(wavelength)?;
        Self::new(kappa, mu, wavelength, bandwidth)
    }
}

/// Pixel grid and antenna array layout, all lengths in meters.
///
/// Pixels tile the source plane contiguously (`a` edge length, no gaps);
/// detectors form a uniform array spanning the maximum baselines. Pixels and
/// detectors are stored row-major: the x index varies fastest.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub altitude: f64,
    pub pixel_size: f64,
    pub px: usize,
    pub py: usize,
    pub nx: usize,
    pub ny: usize,
    pub dx_max: f64,
    pub dy_max: f64,
    pub pixel_centers: Vec<[f64; 2]>,
    pub detector_positions: Vec<[f64; 2]>,
}

impl Geometry {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        altitude: f64,
        pixel_size: f64,
        px: usize,
        py: usize,
        nx: usize,
        ny: usize,
        dx_max: f64,
        dy_max: f64,
    ) -> Result<Self> {
        if px == 0 || py == 0 || nx == 0 || ny == 0 {
            return Err(Error::Config(
                "pixel and detector counts must be >= 1".into(),
            ));
        }
        if px * py != nx * ny {
            return Err(Error::Config(format!(
                "number of pixels ({}x{}={}) must equal number of detection modes ({}x{}={})",
                px,
                py,
                px * py,
                nx,
                ny,
                nx * ny
            )));
        }
        if !(pixel_size > 0.0) || !(altitude > 0.0) {
            return Err(Error::Config(
                "pixel_size and altitude must be > 0".into(),
            ));
        }
        // a single detector along an axis sits at the origin; only
        // multi-detector axes need a positive span
        if (nx > 1 && !(dx_max > 0.0)) || (ny > 1 && !(dy_max > 0.0)) {
            return Err(Error::Config(
                "maximum baseline must be > 0 along axes with more than one detector".into(),
            ));
        }
        if !(dx_max >= 0.0) || !(dy_max >= 0.0) {
            return Err(Error::Config("maximum baselines must be >= 0".into()));
        }

        let pixel_axis = |count: usize| -> Vec<f64> {
            (1..=count)
                .map(|j| (2.0 * j as f64 - count as f64 - 1.0) * pixel_size / 2.0)
                .collect()
        };
        let detector_axis = |count: usize, d_max: f64| -> Vec<f64> {
            (1..=count)
                .map(|k| (2.0 * k as f64 - count as f64 - 1.0) * d_max / count as f64)
                .collect()
        };

        let pxs = pixel_axis(px);
        let pys = pixel_axis(py);
        let mut pixel_centers = Vec::with_capacity(px * py);
        for &y in &pys {
            for &x in &pxs {
                pixel_centers.push([x, y]);
            }
        }

        let dxs = detector_axis(nx, dx_max);
        let dys = detector_axis(ny, dy_max);
        let mut detector_positions = Vec::with_capacity(nx * ny);
        for &y in &dys {
            for &x in &dxs {
                detector_positions.push([x, y]);
            }
        }

        Ok(Self {
            altitude,
            pixel_size,
            px,
            py,
            nx,
            ny,
            dx_max,
            dy_max,
            pixel_centers,
            detector_positions,
        })
    }

    /// Number of pixels (estimated parameters).
    pub fn num_pixels(&self) -> usize {
        self.px * self.py
    }

    /// Number of detection modes.
    pub fn num_modes(&self) -> usize {
        self.nx * self.ny
    }
}

/// Effective pixel temperatures in kelvin, row-major over the pixel grid.
#[derive(Debug, Clone)]
pub struct TemperatureMap {
    temps: Vec<f64>,
}

impl TemperatureMap {
    pub fn new(temps: Vec<f64>) -> Result<Self> {
        if temps.is_empty() {
            return Err(Error::Config("temperature map must not be empty".into()));
        }
        if temps.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
            return Err(Error::Domain(
                "all temperatures must be finite and >= 0".into(),
            ));
        }
        Ok(Self { temps })
    }

    pub fn uniform(value: f64, count: usize) -> Result<Self> {
        Self::new(vec![value; count])
    }

    pub fn values(&self) -> &[f64] {
        &self.temps
    }

    pub fn len(&self) -> usize {
        self.temps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.temps.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.temps.iter().sum::<f64>() / self.temps.len() as f64
    }
}

/// Coherence matrix `Γ` of the received modes together with its stack of
/// parameter derivatives `∂Γ/∂T_i`.
///
/// The model is linear in the temperatures, so the derivative matrices are
/// temperature independent and `Γ = Σ_i T_i ∂Γ/∂T_i` holds exactly.
#[derive(Debug, Clone)]
pub struct CoherenceMatrix {
    gamma: DMatrix<Complex64>,
    dgamma: Vec<DMatrix<Complex64>>,
}

impl CoherenceMatrix {
    /// Builds a coherence matrix from raw parts, checking Hermiticity and
    /// positive semidefiniteness.
    pub fn from_parts(gamma: DMatrix<Complex64>, dgamma: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if !gamma.is_square() {
            return Err(Error::Domain("coherence matrix must be square".into()));
        }
        let scale = gamma.norm().max(1e-300);
        let herm_err = (&gamma - gamma.adjoint()).norm() / scale;
        if herm_err > 1e-12 {
            return Err(Error::Domain(format!(
                "coherence matrix not Hermitian (relative deviation {herm_err:.3e})"
            )));
        }
        let eig = gamma.clone().symmetric_eigenvalues();
        let min_eig = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 * scale {
            return Err(Error::Domain(format!(
                "coherence matrix not positive semidefinite (min eigenvalue {min_eig:.3e})"
            )));
        }
        for d in &dgamma {
            if d.shape() != gamma.shape() {
                return Err(Error::Domain(
                    "derivative stack shape mismatch with coherence matrix".into(),
                ));
            }
        }
        Ok(Self { gamma, dgamma })
    }

    pub(crate) fn from_parts_unchecked(
        gamma: DMatrix<Complex64>,
        dgamma: Vec<DMatrix<Complex64>>,
    ) -> Self {
        Self { gamma, dgamma }
    }

    pub fn gamma(&self) -> &DMatrix<Complex64> {
        &self.gamma
    }

    pub fn dgamma(&self) -> &[DMatrix<Complex64>] {
        &self.dgamma
    }

    /// Number of modes.
    pub fn num_modes(&self) -> usize {
        self.gamma.nrows()
    }

    /// Number of parameters in the derivative stack.
    pub fn num_params(&self) -> usize {
        self.dgamma.len()
    }

    /// Mean total photon number `Tr Γ`.
    pub fn trace(&self) -> f64 {
        self.gamma.trace().re
    }
}

/// Coherence matrix of the received state for the given scene.
///
/// Diagonal entries are `(μκa²/R²) Σ_i T_i`; off-diagonal entries carry the
/// phase factor of the baseline's spatial frequency and the sinc envelope
/// `η_kl = sincπ(v^x_kl a) sincπ(v^y_kl a)` from the pixel box integral.
pub fn coherence_matrix(
    geom: &Geometry,
    phys: &PhysicsConstants,
    temps: &TemperatureMap,
) -> Result<CoherenceMatrix> {
    let p = geom.num_pixels();
    let n = geom.num_modes();
    if temps.len() != p {
        return Err(Error::Config(format!(
            "temperature map has {} entries, geometry has {} pixels",
            temps.len(),
            p
        )));
    }

    let a = geom.pixel_size;
    let prefactor = phys.mu * phys.kappa * a * a / (geom.altitude * geom.altitude);
    let lambda_r = phys.wavelength * geom.altitude;

    let mut dgamma = vec![DMatrix::<Complex64>::zeros(n, n); p];
    for k in 0..n {
        for l in k..n {
            // spatial frequency sampled by the (k, l) baseline
            let vx = (geom.detector_positions[l][0] - geom.detector_positions[k][0]) / lambda_r;
            let vy = (geom.detector_positions[l][1] - geom.detector_positions[k][1]) / lambda_r;
            let eta = sinc_pi(vx * a) * sinc_pi(vy * a);
            for (i, center) in geom.pixel_centers.iter().enumerate() {
                let phase = 2.0 * PI * (vx * center[0] + vy * center[1]);
                let value = Complex64::from_polar(prefactor * eta, phase);
                dgamma[i][(k, l)] = value;
                dgamma[i][(l, k)] = value.conj();
            }
        }
    }
    // diagonal of each derivative is exactly real
    for d in dgamma.iter_mut() {
        for k in 0..n {
            d[(k, k)] = Complex64::new(d[(k, k)].re, 0.0);
        }
    }

    let mut gamma = DMatrix::<Complex64>::zeros(n, n);
    for (i, d) in dgamma.iter().enumerate() {
        gamma += d * Complex64::new(temps.values()[i], 0.0);
    }

    Ok(CoherenceMatrix { gamma, dgamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kappa_matches_smos_band() {
        // 21 cm band value quoted for SMOS-like parameters
        let kappa = compute_kappa(0.21).unwrap();
        assert!((9.2..=9.6).contains(&kappa), "kappa = {kappa}");
    }

    #[test]
    fn kappa_scales_linearly_with_wavelength() {
        let k1 = compute_kappa(0.21).unwrap();
        let k2 = compute_kappa(0.42).unwrap();
        assert_relative_eq!(k2, 2.0 * k1, max_relative = 1e-14);
    }

    #[test]
    fn kappa_fixture_value() {
        // direct evaluation of k_B λ / (π² ħ c) at λ = 0.105 m
        let expected = BOLTZMANN * 0.105 / (PI * PI * REDUCED_PLANCK * SPEED_OF_LIGHT);
        assert_relative_eq!(compute_kappa(0.105).unwrap(), expected, max_relative = 1e-14);
        assert_relative_eq!(compute_kappa(0.105).unwrap(), 4.645, max_relative = 1e-3);
    }

    #[test]
    fn kappa_rejects_nonpositive_wavelength() {
        assert!(compute_kappa(0.0).is_err());
        assert!(compute_kappa(-1.0).is_err());
    }

    #[test]
    fn two_pixel_centers() {
        let g = Geometry::build(758e3, 4000.0, 2, 1, 2, 1, 10.0, 10.0).unwrap();
        assert_eq!(g.pixel_centers.len(), 2);
        assert_relative_eq!(g.pixel_centers[0][0], -2000.0);
        assert_relative_eq!(g.pixel_centers[1][0], 2000.0);
        assert_relative_eq!(g.pixel_centers[0][1], 0.0);
    }

    #[test]
    fn single_pixel_at_origin() {
        let g = Geometry::build(758e3, 4000.0, 1, 1, 1, 1, 10.0, 10.0).unwrap();
        assert_relative_eq!(g.pixel_centers[0][0], 0.0);
        assert_relative_eq!(g.pixel_centers[0][1], 0.0);
        assert_relative_eq!(g.detector_positions[0][0], 0.0);
    }

    #[test]
    fn three_pixel_centers() {
        let g = Geometry::build(758e3, 2500.0, 3, 1, 3, 1, 10.0, 10.0).unwrap();
        let xs: Vec<f64> = g.pixel_centers.iter().map(|c| c[0]).collect();
        assert_relative_eq!(xs[0], -2500.0);
        assert_relative_eq!(xs[1], 0.0);
        assert_relative_eq!(xs[2], 2500.0);
    }

    #[test]
    fn mismatched_counts_rejected() {
        assert!(Geometry::build(758e3, 2500.0, 3, 1, 2, 1, 10.0, 10.0).is_err());
    }

    #[test]
    fn single_mode_diagonal_exact() {
        let g = Geometry::build(1000.0, 10.0, 1, 1, 1, 1, 1.0, 1.0).unwrap();
        let phys = PhysicsConstants::new(2.0, 1.0, 0.21, 0.0).unwrap();
        let temps = TemperatureMap::new(vec![5.0]).unwrap();
        let coh = coherence_matrix(&g, &phys, &temps).unwrap();
        // κ a² T / R² with μ = 1
        assert_relative_eq!(coh.gamma()[(0, 0)].re, 2.0 * 100.0 * 5.0 / 1e6, max_relative = 1e-14);
        assert_relative_eq!(coh.gamma()[(0, 0)].im, 0.0);
    }

    #[test]
    fn thirty_pixel_photon_budget() {
        // 6x5 scene at 293 K, heavy losses: total photon number near 0.39
        let g = Geometry::build(758e3, 3000.0, 6, 5, 6, 5, 10.0, 10.0).unwrap();
        let phys = PhysicsConstants::from_wavelength(0.01, 0.21, 0.0).unwrap();
        let temps = TemperatureMap::uniform(293.0, 30).unwrap();
        let coh = coherence_matrix(&g, &phys, &temps).unwrap();
        let tr = coh.trace();
        assert!((tr - 0.39).abs() <= 0.02, "Tr Gamma = {tr}");
    }

    #[test]
    fn off_diagonal_ratio_is_sinc_of_baseline() {
        // one centered pixel seen by two detectors at ±Δx/2:
        // |Γ12|/Γ11 = |sincπ(Δx a/(λR))|
        let a = 4000.0;
        let r = 758e3;
        let lambda = 0.21;
        let dx = 10.0;
        let g = Geometry {
            altitude: r,
            pixel_size: a,
            px: 1,
            py: 1,
            nx: 2,
            ny: 1,
            dx_max: dx,
            dy_max: dx,
            pixel_centers: vec![[0.0, 0.0]],
            detector_positions: vec![[-dx / 2.0, 0.0], [dx / 2.0, 0.0]],
        };
        let phys = PhysicsConstants::from_wavelength(0.5, lambda, 0.0).unwrap();
        let temps = TemperatureMap::new(vec![300.0]).unwrap();
        let coh = coherence_matrix(&g, &phys, &temps).unwrap();
        let ratio = coh.gamma()[(0, 1)].norm() / coh.gamma()[(0, 0)].re;
        assert_relative_eq!(
            ratio,
            sinc_pi(dx * a / (lambda * r)).abs(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn quadrature_oracle_validates_sinc_envelope() {
        // entry-by-entry midpoint 2D quadrature of the pixel phase integral
        let r = 758e3;
        let lambda = 0.21;
        let a = 4000.0;
        let g = Geometry::build(r, a, 2, 1, 2, 1, 10.0, 10.0).unwrap();
        let phys = PhysicsConstants::from_wavelength(0.5, lambda, 0.0).unwrap();
        let temps = TemperatureMap::new(vec![300.0, 260.0]).unwrap();
        let coh = coherence_matrix(&g, &phys, &temps).unwrap();

        let nodes = 96;
        let prefactor = phys.mu * phys.kappa / (r * r);
        for k in 0..2 {
            for l in 0..2 {
                let vx = (g.detector_positions[l][0] - g.detector_positions[k][0]) / (lambda * r);
                let mut total = Complex64::new(0.0, 0.0);
                for (i, c) in g.pixel_centers.iter().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for ix in 0..nodes {
                        let x = c[0] - a / 2.0 + (ix as f64 + 0.5) * a / nodes as f64;
                        for iy in 0..nodes {
                            let _y = c[1] - a / 2.0 + (iy as f64 + 0.5) * a / nodes as f64;
                            acc += Complex64::from_polar(1.0, 2.0 * PI * vx * x);
                        }
                    }
                    acc *= Complex64::new(a * a / (nodes * nodes) as f64, 0.0);
                    total += acc * Complex64::new(temps.values()[i], 0.0);
                }
                total *= Complex64::new(prefactor, 0.0);
                let got = coh.gamma()[(k, l)];
                assert!(
                    (got - total).norm() <= 1e-3 * got.norm().max(1e-12),
                    "entry ({k},{l}): closed form {got}, quadrature {total}"
                );
            }
        }
    }

    #[test]
    fn derivative_stack_is_exact_linearization() {
        let g = Geometry::build(758e3, 2500.0, 3, 1, 3, 1, 10.0, 10.0).unwrap();
        let phys = PhysicsConstants::from_wavelength(0.3, 0.21, 0.0).unwrap();
        let temps = TemperatureMap::new(vec![310.0, 290.0, 305.0]).unwrap();
        let coh = coherence_matrix(&g, &phys, &temps).unwrap();
        let eps = 7.0;
        let mut bumped = temps.values().to_vec();
        bumped[1] += eps;
        let coh2 = coherence_matrix(&g, &phys, &TemperatureMap::new(bumped).unwrap()).unwrap();
        let diff = coh2.gamma() - coh.gamma();
        let expected = &coh.dgamma()[1] * Complex64::new(eps, 0.0);
        assert!((diff - expected).norm() <= 1e-13 * coh.gamma().norm());
    }

    #[test]
    fn zero_baseline_makes_all_entries_equal() {
        // detectors collapsed to (numerically) the same point: every entry of
        // Γ equals the diagonal value
        let g = Geometry::build(758e3, 2500.0, 2, 1, 2, 1, 1e-9, 1e-9).unwrap();
        let phys = PhysicsConstants::from_wavelength(0.3, 0.21, 0.0).unwrap();
        let temps = TemperatureMap::new(vec![300.0, 280.0]).unwrap();
        let coh = coherence_matrix(&g, &phys, &temps).unwrap();
        let d = coh.gamma()[(0, 0)];
        for k in 0..2 {
            for l in 0..2 {
                assert!((coh.gamma()[(k, l)] - d).norm() <= 1e-10 * d.norm());
            }
        }
    }
}
