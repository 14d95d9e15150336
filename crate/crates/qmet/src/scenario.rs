//! Scenario files: JSON descriptions of geometry, physics and the scene.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{coherence_matrix, CoherenceMatrix, Geometry, PhysicsConstants, TemperatureMap};

/// Narrowband filter width carried through for bookkeeping; it does not
/// enter the per-shot coherence matrix.
pub const NOMINAL_BANDWIDTH_HZ: f64 = 19e6;

/// Temperatures given either as a scalar (uniform scene) or per pixel,
/// row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Temperatures {
    Uniform(f64),
    PerPixel(Vec<f64>),
}

/// A scenario file. Lengths are in meters, temperatures in kelvin.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Distance from the scene plane to the antenna array.
    #[serde(rename = "R_m")]
    pub r_m: f64,
    pub wavelength_m: f64,
    pub pixel_size_m: f64,
    /// Pixel grid dimensions.
    pub px: usize,
    pub py: usize,
    /// Antenna grid dimensions.
    pub nx: usize,
    pub ny: usize,
    pub dx_max_m: f64,
    pub dy_max_m: f64,
    /// Detected-photon efficiency factor.
    pub mu: f64,
    #[serde(rename = "temperatures_K")]
    pub temperatures_k: Temperatures,
}

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read scenario {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid scenario {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Temperatures::PerPixel(v) = &self.temperatures_k {
            if v.len() != self.px * self.py {
                return Err(Error::Config(format!(
                    "temperatures_K has {} entries, grid is {}×{}",
                    v.len(),
                    self.px,
                    self.py
                )));
            }
            if v.iter().any(|t| !t.is_finite() || *t < 0.0) {
                return Err(Error::Config("temperatures must be finite and ≥ 0".into()));
            }
        }
        Ok(())
    }

    pub fn num_pixels(&self) -> usize {
        self.px * self.py
    }

    pub fn num_modes(&self) -> usize {
        self.nx * self.ny
    }

    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::build(
            self.r_m,
            self.pixel_size_m,
            self.px,
            self.py,
            self.nx,
            self.ny,
            self.dx_max_m,
            self.dy_max_m,
        )
    }

    pub fn physics(&self) -> Result<PhysicsConstants> {
        PhysicsConstants::from_wavelength(self.mu, self.wavelength_m, NOMINAL_BANDWIDTH_HZ)
    }

    pub fn temperature_map(&self) -> Result<TemperatureMap> {
        match &self.temperatures_k {
            Temperatures::Uniform(t) => TemperatureMap::uniform(*t, self.num_pixels()),
            Temperatures::PerPixel(v) => TemperatureMap::new(v.clone()),
        }
    }

    /// Builds the coherence matrix and its temperature derivatives.
    pub fn coherence(&self) -> Result<CoherenceMatrix> {
        coherence_matrix(&self.geometry()?, &self.physics()?, &self.temperature_map()?)
    }

    /// The two-pixel benchmark scene: two pixels on the x-axis observed by
    /// two antennas, uniform 300 K.
    ///
    /// The distance and baseline put the array in the weak-flux regime
    /// (`Tr Γ ≈ 0.03`) where single-photon counting saturates the quantum
    /// bound, with the baseline phase tuned to the joint-estimation optimum.
    pub fn two_pixel_default() -> Self {
        Self {
            r_m: 8000e3,
            wavelength_m: 0.21,
            pixel_size_m: 4e3,
            px: 2,
            py: 1,
            nx: 2,
            ny: 1,
            dx_max_m: 154.0,
            dy_max_m: 0.0,
            mu: 0.5,
            temperatures_k: Temperatures::Uniform(300.0),
        }
    }

    /// Two-pixel scene at low orbit with the full photon flux, where the
    /// contrast between local photon counting and the optimized non-local
    /// measurement is largest.
    pub fn two_pixel_high_flux() -> Self {
        Self {
            r_m: 758e3,
            wavelength_m: 0.21,
            pixel_size_m: 4e3,
            px: 2,
            py: 1,
            nx: 2,
            ny: 1,
            dx_max_m: 15.0,
            dy_max_m: 0.0,
            mu: 1.0,
            temperatures_k: Temperatures::Uniform(300.0),
        }
    }

    /// A 1D scene with `p` pixels and as many antennas, uniform temperature.
    pub fn line_scene(p: usize, pixel_size_m: f64, mu: f64, t: f64) -> Self {
        Self {
            r_m: 758e3,
            wavelength_m: 0.21,
            pixel_size_m,
            px: p,
            py: 1,
            nx: p,
            ny: 1,
            dx_max_m: 10.0,
            dy_max_m: 0.0,
            mu,
            temperatures_k: Temperatures::Uniform(t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_json() {
        let cfg = ScenarioConfig::two_pixel_default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"R_m\""));
        assert!(text.contains("\"temperatures_K\""));
        let back: ScenarioConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.px, 2);
        assert!(matches!(back.temperatures_k, Temperatures::Uniform(t) if t == 300.0));
    }

    #[test]
    fn parses_per_pixel_temperatures() {
        let text = r#"{
            "R_m": 758e3, "wavelength_m": 0.21, "pixel_size_m": 3e3,
            "px": 2, "py": 1, "nx": 2, "ny": 1,
            "dx_max_m": 10.0, "dy_max_m": 0.0, "mu": 0.01,
            "temperatures_K": [250.0, 320.0]
        }"#;
        let cfg: ScenarioConfig = serde_json::from_str(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.temperature_map().unwrap().values(), &[250.0, 320.0]);
    }

    #[test]
    fn rejects_wrong_temperature_count() {
        let mut cfg = ScenarioConfig::two_pixel_default();
        cfg.temperatures_k = Temperatures::PerPixel(vec![300.0; 5]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = r#"{"R_m": 1.0, "bogus": 2}"#;
        assert!(serde_json::from_str::<ScenarioConfig>(text).is_err());
    }

    #[test]
    fn builds_coherence_for_default_scene() {
        let coh = ScenarioConfig::two_pixel_default().coherence().unwrap();
        assert_eq!(coh.num_modes(), 2);
        assert_eq!(coh.num_params(), 2);
        assert!(coh.trace() > 0.0);
    }
}
