//! Sampling of photon-counting records and maximum-likelihood temperature
//! estimation.
//!
//! The detection-mode coherence matrix is linear in the pixel temperatures,
//! `Γ̃(T) = Σ_i T_i ∂Γ̃_i`, so a [`LikelihoodModel`] only stores the
//! transformed derivative stack and rebuilds the outcome distribution at any
//! candidate temperature vector. Estimation runs projected Fisher scoring
//! with backtracking inside the box `[0, t_max]`, restarted from several
//! initial images.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::povm::{outcome_distribution_parts, OutcomeDistribution, UnitaryPoint};
use crate::scene::CoherenceMatrix;

/// Observed outcome counts from repeated single-photon detection shots.
#[derive(Debug, Clone)]
pub struct MeasurementRecord {
    /// One count per outcome, `n + 2` entries.
    pub counts: Vec<u64>,
    /// Total number of shots.
    pub total: u64,
    /// Seed used to draw the record, kept for reproducibility.
    pub seed: u64,
}

/// Draws `shots` multinomial samples from an outcome distribution.
///
/// Sampling walks the outcomes once, drawing each count from the binomial
/// conditional on the shots not yet assigned.
pub fn sample_outcomes(dist: &OutcomeDistribution, shots: u64, seed: u64) -> Result<MeasurementRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = dist.probs.len();
    let mut counts = vec![0u64; m];
    let mut remaining_shots = shots;
    let mut remaining_prob = 1.0f64;
    for (l, count) in counts.iter_mut().enumerate() {
        if remaining_shots == 0 {
            break;
        }
        if l + 1 == m {
            *count = remaining_shots;
            break;
        }
        let p = (dist.probs[l] / remaining_prob).clamp(0.0, 1.0);
        let draw = if p >= 1.0 {
            remaining_shots
        } else {
            Binomial::new(remaining_shots, p)
                .map_err(|e| Error::Numerical(format!("binomial sampling failed: {e}")))?
                .sample(&mut rng)
        };
        *count = draw;
        remaining_shots -= draw;
        remaining_prob = (remaining_prob - dist.probs[l]).max(f64::MIN_POSITIVE);
    }
    Ok(MeasurementRecord {
        counts,
        total: shots,
        seed,
    })
}

/// Photon-counting likelihood of a temperature image for a fixed detection
/// unitary.
pub struct LikelihoodModel {
    /// Detection-mode derivative stack `∂Γ̃_i`.
    dstack: Vec<DMatrix<Complex64>>,
    num_modes: usize,
}

impl LikelihoodModel {
    /// Builds the model by transforming the scene's derivative stack into the
    /// detection modes of `u`.
    pub fn new(coh: &CoherenceMatrix, u: &UnitaryPoint) -> Result<Self> {
        let tilde = crate::povm::detection_coherence(coh, u)?;
        Ok(Self {
            num_modes: tilde.num_modes(),
            dstack: tilde.dgamma().to_vec(),
        })
    }

    pub fn num_params(&self) -> usize {
        self.dstack.len()
    }

    pub fn num_outcomes(&self) -> usize {
        self.num_modes + 2
    }

    fn gamma_tilde(&self, temps: &[f64]) -> Result<DMatrix<Complex64>> {
        if temps.len() != self.dstack.len() {
            return Err(Error::Config(format!(
                "temperature vector has {} entries, model has {} parameters",
                temps.len(),
                self.dstack.len()
            )));
        }
        let mut g = DMatrix::<Complex64>::zeros(self.num_modes, self.num_modes);
        for (t, d) in temps.iter().zip(&self.dstack) {
            g += d * Complex64::new(*t, 0.0);
        }
        Ok(g)
    }

    /// Outcome distribution at a candidate image.
    pub fn distribution(&self, temps: &[f64]) -> Result<OutcomeDistribution> {
        outcome_distribution_parts(&self.gamma_tilde(temps)?, &self.dstack)
    }

    /// Log-likelihood `Σ_l c_l ln P_l(T)` and its gradient for fractional
    /// outcome weights `c_l`. Outcomes with zero weight contribute nothing
    /// even when their probability vanishes.
    pub fn log_likelihood(&self, weights: &[f64], temps: &[f64]) -> Result<(f64, DVector<f64>)> {
        let dist = self.distribution(temps)?;
        if weights.len() != dist.probs.len() {
            return Err(Error::Config(format!(
                "{} outcome weights for {} outcomes",
                weights.len(),
                dist.probs.len()
            )));
        }
        let p = self.num_params();
        let mut ll = 0.0;
        let mut grad = DVector::<f64>::zeros(p);
        for (l, &c) in weights.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let prob = dist.probs[l];
            if prob <= 0.0 {
                return Ok((f64::NEG_INFINITY, grad));
            }
            ll += c * prob.ln();
            for i in 0..p {
                grad[i] += c * dist.dprobs[(l, i)] / prob;
            }
        }
        Ok((ll, grad))
    }
}

/// Options for [`mle_estimate`].
#[derive(Debug, Clone)]
pub struct MleOptions {
    /// Upper edge of the temperature box, in kelvin.
    pub t_max: f64,
    /// Maximum Fisher-scoring iterations per start.
    pub max_iters: usize,
    /// Relative log-likelihood improvement below which a start terminates.
    pub tol: f64,
    /// Number of random restarts (the first start is the uniform mean image).
    pub starts: usize,
    /// Seed for the restart initializations.
    pub seed: u64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            t_max: 1e4,
            max_iters: 400,
            tol: 1e-12,
            starts: 4,
            seed: 0,
        }
    }
}

/// Result of a maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct MleResult {
    /// Estimated temperature image, in kelvin.
    pub temperatures: Vec<f64>,
    /// Final mean log-likelihood (per shot).
    pub log_likelihood: f64,
    /// Iterations consumed by the winning start.
    pub iterations: usize,
    pub converged: bool,
}

/// Maximum-likelihood image from an observed record.
pub fn mle_estimate(
    model: &LikelihoodModel,
    record: &MeasurementRecord,
    opts: &MleOptions,
) -> Result<MleResult> {
    if record.total == 0 {
        return Err(Error::Config("empty measurement record".into()));
    }
    if record.counts.len() != model.num_outcomes() {
        return Err(Error::Config(format!(
            "record has {} outcomes, model has {}",
            record.counts.len(),
            model.num_outcomes()
        )));
    }
    let weights: Vec<f64> = record
        .counts
        .iter()
        .map(|&c| c as f64 / record.total as f64)
        .collect();
    mle_from_weights(model, &weights, opts)
}

/// Maximum-likelihood image from fractional outcome weights. Passing the
/// model probabilities themselves recovers the generating image in the
/// infinite-sample limit.
pub fn mle_from_weights(
    model: &LikelihoodModel,
    weights: &[f64],
    opts: &MleOptions,
) -> Result<MleResult> {
    if !(opts.t_max > 0.0) || opts.max_iters == 0 || opts.starts == 0 {
        return Err(Error::Config("invalid estimator options".into()));
    }
    let p = model.num_params();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<MleResult> = None;
    for start in 0..opts.starts {
        let init: Vec<f64> = if start == 0 {
            vec![280.0_f64.min(opts.t_max / 2.0); p]
        } else {
            (0..p)
                .map(|_| rng.gen::<f64>() * opts.t_max.min(600.0))
                .collect()
        };
        match fisher_scoring(model, weights, init, opts) {
            Ok(candidate) => {
                let better = best
                    .as_ref()
                    .map(|b| candidate.log_likelihood > b.log_likelihood)
                    .unwrap_or(true);
                if better {
                    best = Some(candidate);
                }
            }
            Err(Error::Numerical(_)) | Err(Error::Unidentifiable { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| Error::Numerical("all estimator starts failed".into()))
}

fn project(temps: &mut [f64], t_max: f64) {
    for t in temps.iter_mut() {
        *t = t.clamp(0.0, t_max);
    }
}

fn fisher_scoring(
    model: &LikelihoodModel,
    weights: &[f64],
    mut temps: Vec<f64>,
    opts: &MleOptions,
) -> Result<MleResult> {
    let p = model.num_params();
    project(&mut temps, opts.t_max);
    let (mut ll, mut grad) = model.log_likelihood(weights, &temps)?;
    if !ll.is_finite() {
        return Err(Error::Numerical("non-finite likelihood at start".into()));
    }
    let mut converged = false;
    let mut iter = 0;
    while iter < opts.max_iters {
        iter += 1;
        let dist = model.distribution(&temps)?;
        // at the box boundary (all-dark pixels) the Fisher matrix becomes
        // singular; the current iterate is still the constrained optimum
        let cfi = match crate::povm::cfi_matrix(&dist) {
            Ok(c) => c,
            Err(Error::Unidentifiable { .. }) => {
                converged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        // scoring direction from the damped normal equations
        let mut direction = None;
        let scale = cfi.matrix().diagonal().amax().max(1e-300);
        let mut damping = 1e-10 * scale;
        for _ in 0..40 {
            let mut a = cfi.matrix().clone();
            for i in 0..p {
                a[(i, i)] += damping;
            }
            if let Some(chol) = nalgebra::Cholesky::new(a) {
                direction = Some(chol.solve(&grad));
                break;
            }
            damping *= 10.0;
        }
        let d = direction
            .ok_or_else(|| Error::Numerical("Fisher scoring system not positive definite".into()))?;

        // backtracking along the projected step
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut candidate = temps.clone();
            for i in 0..p {
                candidate[i] += step * d[i];
            }
            project(&mut candidate, opts.t_max);
            let (ll_new, grad_new) = model.log_likelihood(weights, &candidate)?;
            if ll_new.is_finite() && ll_new >= ll {
                let improvement = ll_new - ll;
                temps = candidate;
                grad = grad_new;
                ll = ll_new;
                accepted = true;
                if improvement <= opts.tol * ll.abs().max(1.0) {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted || converged {
            converged = converged || !accepted && grad.amax() < 1e-8;
            break;
        }
    }
    Ok(MleResult {
        temperatures: temps,
        log_likelihood: ll,
        iterations: iter,
        converged,
    })
}
