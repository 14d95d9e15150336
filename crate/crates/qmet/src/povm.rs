//! Single-photon counting POVM in the detection modes.
//!
//! The incoming modes are mixed by a unitary `U` into detection modes with
//! coherence matrix `Γ̃ = conj(U) Γ Uᵀ`. Photon counting with at most one
//! photon per shot yields `n + 2` outcomes: vacuum, a single photon in mode
//! `k`, and the lumped remainder. The probabilities, their analytic
//! temperature derivatives, and the resulting classical Fisher information
//! are all rational functions of `Γ̃`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fisher::{FisherKind, FisherMatrix};
use crate::optim::CostFunction;
use crate::scene::CoherenceMatrix;

/// Tolerance on `‖U†U − I‖_F` for accepting a matrix as unitary.
pub const UNITARITY_TOL: f64 = 1e-9;

/// Probability floor below which an outcome is treated as unsupported.
const PROB_FLOOR: f64 = 1e-14;

/// An `n×n` matrix constrained to the unitary group.
#[derive(Debug, Clone)]
pub struct UnitaryPoint {
    u: DMatrix<Complex64>,
}

impl UnitaryPoint {
    pub fn new(u: DMatrix<Complex64>) -> Result<Self> {
        if !u.is_square() {
            return Err(Error::Domain("unitary must be square".into()));
        }
        let n = u.nrows();
        let drift = (u.adjoint() * &u - DMatrix::<Complex64>::identity(n, n)).norm();
        if drift > UNITARITY_TOL {
            return Err(Error::Domain(format!(
                "matrix is not unitary (‖U†U − I‖ = {drift:.3e})"
            )));
        }
        Ok(Self { u })
    }

    pub(crate) fn new_unchecked(u: DMatrix<Complex64>) -> Self {
        Self { u }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            u: DMatrix::identity(n, n),
        }
    }

    /// The two-mode mixing family `U(φ) = (1/√2) [[1, e^{iφ}], [1, −e^{iφ}]]`.
    pub fn two_mode(phi: f64) -> Self {
        let s = Complex64::new(1.0 / 2.0f64.sqrt(), 0.0);
        let e = Complex64::from_polar(1.0, phi);
        let u = DMatrix::from_row_slice(2, 2, &[s, s * e, s, -(s * e)]);
        Self { u }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.u
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }
}

/// Probabilities of the `n + 2` outcomes with their `∂P_l/∂T_i` matrix.
#[derive(Debug, Clone)]
pub struct OutcomeDistribution {
    /// `P₀, P₁ … P_n, P_{n+1}` in order.
    pub probs: Vec<f64>,
    /// `(n+2) × p` derivative matrix.
    pub dprobs: DMatrix<f64>,
}

impl OutcomeDistribution {
    pub fn num_outcomes(&self) -> usize {
        self.probs.len()
    }

    pub fn num_params(&self) -> usize {
        self.dprobs.ncols()
    }
}

/// Coherence matrix of the detection modes, `Γ̃_ij = Σ_kl U*_ik U_jl Γ_kl`,
/// with the derivative stack transformed by the same congruence.
pub fn detection_coherence(coh: &CoherenceMatrix, u: &UnitaryPoint) -> Result<CoherenceMatrix> {
    if u.dim() != coh.num_modes() {
        return Err(Error::Config(format!(
            "unitary dimension {} does not match mode count {}",
            u.dim(),
            coh.num_modes()
        )));
    }
    let n = u.dim();
    // loose check only: the optimizer probes finite-difference points a
    // distance ~1e-6 off the group and the cost must stay defined there
    let drift = (u.u.adjoint() * &u.u - DMatrix::<Complex64>::identity(n, n)).norm();
    if drift > 1e-4 {
        return Err(Error::Domain(format!(
            "detection unitary drifted off the group (‖U†U − I‖ = {drift:.3e})"
        )));
    }
    let uc = u.u.conjugate();
    let ut = u.u.transpose();
    let transform = |m: &DMatrix<Complex64>| hermitize(&(&uc * m * &ut));
    Ok(CoherenceMatrix::from_parts_unchecked(
        transform(coh.gamma()),
        coh.dgamma().iter().map(transform).collect(),
    ))
}

fn hermitize(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

struct Factorized {
    p0: f64,
    /// `(Γ̃ + I)⁻¹`
    b_inv: DMatrix<Complex64>,
    /// diagonal of `Γ̃ (Γ̃ + I)⁻¹`
    s_diag: Vec<f64>,
}

fn factorize(gamma_tilde: &DMatrix<Complex64>) -> Result<Factorized> {
    let n = gamma_tilde.nrows();
    let b = gamma_tilde + DMatrix::<Complex64>::identity(n, n);
    let chol = nalgebra::Cholesky::new(b).ok_or_else(|| {
        Error::Numerical(
            "det(Γ̃ + I) is not positive: detection coherence matrix is ill-conditioned".into(),
        )
    })?;
    // log-determinant accumulated from the Cholesky diagonal
    let log_det: f64 = chol.l().diagonal().iter().map(|z| 2.0 * z.re.ln()).sum();
    let p0 = (-log_det).exp();
    let b_inv = chol.inverse();
    let s = gamma_tilde * &b_inv;
    let s_diag = (0..n).map(|k| s[(k, k)].re).collect();
    Ok(Factorized { p0, b_inv, s_diag })
}

/// Outcome probabilities for a given detection coherence matrix:
/// `P₀ = 1/det(Γ̃+I)`, `P_k = [Γ̃(Γ̃+I)⁻¹]_kk P₀`, `P_{n+1}` the remainder.
pub fn outcome_probabilities(gamma_tilde: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    let f = factorize(gamma_tilde)?;
    Ok(assemble_probs(&f))
}

fn assemble_probs(f: &Factorized) -> Vec<f64> {
    let n = f.s_diag.len();
    let mut probs = Vec::with_capacity(n + 2);
    probs.push(f.p0.clamp(0.0, 1.0));
    for &s in &f.s_diag {
        probs.push((s * f.p0).clamp(0.0, 1.0));
    }
    let sum: f64 = probs.iter().sum();
    probs.push((1.0 - sum).max(0.0));
    probs
}

/// Probabilities together with analytic derivatives along the coherence
/// matrix's parameter stack.
pub fn outcome_distribution(coh_tilde: &CoherenceMatrix) -> Result<OutcomeDistribution> {
    outcome_distribution_parts(coh_tilde.gamma(), coh_tilde.dgamma())
}

pub(crate) fn outcome_distribution_parts(
    gamma_tilde: &DMatrix<Complex64>,
    dstack: &[DMatrix<Complex64>],
) -> Result<OutcomeDistribution> {
    let f = factorize(gamma_tilde)?;
    let probs = assemble_probs(&f);
    let n = gamma_tilde.nrows();
    let p = dstack.len();
    let mut dprobs = DMatrix::<f64>::zeros(n + 2, p);
    for (i, dg) in dstack.iter().enumerate() {
        let bd = &f.b_inv * dg;
        let trace = bd.trace().re;
        dprobs[(0, i)] = -f.p0 * trace;
        let c = &bd * &f.b_inv;
        let mut col_sum = dprobs[(0, i)];
        for k in 0..n {
            let v = f.p0 * (c[(k, k)].re - f.s_diag[k] * trace);
            dprobs[(k + 1, i)] = v;
            col_sum += v;
        }
        dprobs[(n + 1, i)] = -col_sum;
    }
    Ok(OutcomeDistribution { probs, dprobs })
}

/// Classical Fisher information `𝓕_ij = Σ_l (∂P_l/∂θ_i)(∂P_l/∂θ_j)/P_l`
/// over all `n + 2` outcomes.
///
/// Outcomes with vanishing probability are skipped only when their
/// derivatives vanish too; otherwise the parameters are flagged as
/// unidentifiable at this point.
pub fn cfi_matrix(dist: &OutcomeDistribution) -> Result<FisherMatrix> {
    let p = dist.num_params();
    let scale = dist.dprobs.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let mut f = DMatrix::<f64>::zeros(p, p);
    for (l, &prob) in dist.probs.iter().enumerate() {
        if prob < PROB_FLOOR {
            let max_d = (0..p).map(|i| dist.dprobs[(l, i)].abs()).fold(0.0, f64::max);
            if max_d >= PROB_FLOOR.sqrt() * scale.max(1e-300) {
                return Err(Error::Unidentifiable {
                    reason: format!(
                        "outcome {l} has probability {prob:.3e} but derivative magnitude {max_d:.3e}"
                    ),
                    null_vector: (0..p).map(|i| dist.dprobs[(l, i)]).collect(),
                });
            }
            continue;
        }
        for i in 0..p {
            let di = dist.dprobs[(l, i)];
            for j in i..p {
                f[(i, j)] += di * dist.dprobs[(l, j)] / prob;
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            f[(i, j)] = f[(j, i)];
        }
    }
    FisherMatrix::new(f, FisherKind::Classical)
}

/// Scalar classical Cramér-Rao bound `Tr(w 𝓕⁻¹)` of single-photon counting in
/// the detection modes defined by `u`. This is the cost function minimized by
/// the unitary optimization.
pub fn scalar_ccrb(
    coh: &CoherenceMatrix,
    u: &UnitaryPoint,
    weight: Option<&DMatrix<f64>>,
) -> Result<f64> {
    let tilde = detection_coherence(coh, u)?;
    let dist = outcome_distribution(&tilde)?;
    let cfi = cfi_matrix(&dist)?;
    cfi.scalar_bound(weight)
}

/// [`scalar_ccrb`] packaged as a [`CostFunction`] over `U(n)`.
pub struct ScalarCcrbCost {
    coh: CoherenceMatrix,
    weight: Option<DMatrix<f64>>,
}

impl ScalarCcrbCost {
    pub fn new(coh: CoherenceMatrix, weight: Option<DMatrix<f64>>) -> Self {
        Self { coh, weight }
    }

    pub fn coherence(&self) -> &CoherenceMatrix {
        &self.coh
    }
}

impl CostFunction for ScalarCcrbCost {
    fn dim(&self) -> usize {
        self.coh.num_modes()
    }

    fn evaluate(&self, u: &DMatrix<Complex64>) -> Result<f64> {
        let point = UnitaryPoint::new_unchecked(u.clone());
        scalar_ccrb(&self.coh, &point, self.weight.as_ref())
    }

    fn euclidean_gradient(&self, u: &DMatrix<Complex64>) -> Option<Result<DMatrix<Complex64>>> {
        Some(self.analytic_gradient(u))
    }
}

impl ScalarCcrbCost {
    /// Wirtinger gradient `∂F/∂U*` of the scalar bound, by differentiating
    /// `Tr(w 𝓕⁻¹)` through the Fisher matrix, the outcome probabilities and
    /// the congruence `Γ̃ = conj(U) Γ Uᵀ`.
    ///
    /// Writing `R = (Γ̃+I)⁻¹`, `C_i = R ∂Γ̃_i R`, `t_i = Tr(R ∂Γ̃_i)` and
    /// `H = 𝓕⁻¹ w 𝓕⁻¹`, the chain rule collapses to two Hermitian
    /// sensitivity matrices `Ω₀ = ∂F/∂Γ̃` and `Ω_i = ∂F/∂(∂Γ̃_i)`, and then
    /// `G = conj(Ω₀ Ū Γ + Σ_i Ω_i Ū ∂Γ_i)`. This replaces the `2n²`
    /// finite-difference evaluations with work comparable to a handful of
    /// cost evaluations.
    fn analytic_gradient(&self, u: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        let point = UnitaryPoint::new_unchecked(u.clone());
        let tilde = detection_coherence(&self.coh, &point)?;
        let n = tilde.num_modes();
        let p = tilde.num_params();
        let fac = factorize(tilde.gamma())?;
        let r = &fac.b_inv;
        let p0 = fac.p0;

        let mut t = Vec::with_capacity(p);
        let mut c_mats = Vec::with_capacity(p);
        for dg in tilde.dgamma() {
            let rd = r * dg;
            t.push(rd.trace().re);
            c_mats.push(&rd * r);
        }

        // outcome distribution from the pieces already at hand (identical to
        // `outcome_distribution`)
        let probs = assemble_probs(&fac);
        let mut dprobs = DMatrix::<f64>::zeros(n + 2, p);
        for i in 0..p {
            dprobs[(0, i)] = -p0 * t[i];
            let mut col_sum = dprobs[(0, i)];
            for k in 0..n {
                let v = p0 * (c_mats[i][(k, k)].re - fac.s_diag[k] * t[i]);
                dprobs[(k + 1, i)] = v;
                col_sum += v;
            }
            dprobs[(n + 1, i)] = -col_sum;
        }
        let dist = OutcomeDistribution { probs, dprobs };
        let fisher = cfi_matrix(&dist)?;

        // H = 𝓕⁻¹ w 𝓕⁻¹ through the same spectral inverse as the bound
        let se = nalgebra::SymmetricEigen::new(fisher.matrix().clone());
        let max = se.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let min = se.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        if min <= 1e-12 * max.max(1e-300) {
            return Err(Error::Numerical(format!(
                "Fisher matrix is singular at the gradient point (eigenvalue {min:.3e})"
            )));
        }
        let inv_diag = DMatrix::from_diagonal(&se.eigenvalues.map(|v| 1.0 / v));
        let f_inv = &se.eigenvectors * inv_diag * se.eigenvectors.transpose();
        let h = match &self.weight {
            None => &f_inv * &f_inv,
            Some(w) => &f_inv * w * &f_inv,
        };

        // per-outcome sensitivities of Tr(w 𝓕⁻¹): coefficient a_l on δP_l
        // and the row c_l on δ(∂P_l), skipping unsupported outcomes exactly
        // as the Fisher assembly does
        let num_out = n + 2;
        let mut a = vec![0.0f64; num_out];
        let mut crows = DMatrix::<f64>::zeros(num_out, p);
        for l in 0..num_out {
            let pl = dist.probs[l];
            if pl < PROB_FLOOR {
                continue;
            }
            let row = dist.dprobs.row(l).transpose();
            let hrow = &h * &row;
            a[l] = row.dot(&hrow) / (pl * pl);
            for i in 0..p {
                crows[(l, i)] = -2.0 * hrow[i] / pl;
            }
        }
        // the remainder outcome is 1 − ΣP_l: fold its sensitivities into the
        // explicit outcomes
        let a_rem = a[n + 1];
        for v in a.iter_mut().take(n + 1) {
            *v -= a_rem;
        }
        for i in 0..p {
            let c_rem = crows[(n + 1, i)];
            for l in 0..=n {
                crows[(l, i)] -= c_rem;
            }
        }

        // scalar coefficient of δP₀ (every probability carries a P₀ factor)
        let mut lambda = a[0];
        for k in 0..n {
            lambda += a[k + 1] * fac.s_diag[k];
        }
        for i in 0..p {
            let mut acc = crows[(0, i)] * dist.dprobs[(0, i)];
            for k in 0..n {
                acc += crows[(k + 1, i)] * dist.dprobs[(k + 1, i)];
            }
            lambda += acc / p0;
        }
        // diagonal coefficient on (R δΓ̃ R)_kk and the trace coefficients
        let e: Vec<f64> = (0..n)
            .map(|k| {
                let mut v = a[k + 1];
                for i in 0..p {
                    v -= crows[(k + 1, i)] * t[i];
                }
                p0 * v
            })
            .collect();
        let tau: Vec<f64> = (0..p)
            .map(|i| {
                let mut v = crows[(0, i)];
                for k in 0..n {
                    v += crows[(k + 1, i)] * fac.s_diag[k];
                }
                -p0 * v
            })
            .collect();

        // Ω₀ = −λP₀R + R diag(e) R − Σ_i [τ_i C_i + C_i D_i R + (C_i D_i R)†]
        let scale_cols = |m: &DMatrix<Complex64>, d: &[f64]| {
            let mut out = m.clone();
            for (j, &dj) in d.iter().enumerate() {
                for i in 0..n {
                    out[(i, j)] *= Complex64::new(dj, 0.0);
                }
            }
            out
        };
        let mut omega0 = r * Complex64::new(-lambda * p0, 0.0);
        omega0 += scale_cols(r, &e) * r;
        let mut omega_parts = Vec::with_capacity(p);
        for i in 0..p {
            let di: Vec<f64> = (0..n).map(|k| p0 * crows[(k + 1, i)]).collect();
            let cdr = scale_cols(&c_mats[i], &di) * r;
            omega0 -= &c_mats[i] * Complex64::new(tau[i], 0.0);
            omega0 -= &cdr;
            omega0 -= cdr.adjoint();
            // Ω_i = τ_i R + R D_i R
            omega_parts.push(r * Complex64::new(tau[i], 0.0) + scale_cols(r, &di) * r);
        }

        // chain through Γ̃ = conj(U) Γ Uᵀ: G = conj(Ω₀ Ū Γ + Σ_i Ω_i Ū ∂Γ_i)
        let ubar = u.conjugate();
        let mut acc = omega0 * &ubar * self.coh.gamma();
        for (omega_i, dg) in omega_parts.iter().zip(self.coh.dgamma()) {
            acc += omega_i * &ubar * dg;
        }
        Ok(acc.conjugate())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_coherence(n: usize, p: usize, seed: u64) -> CoherenceMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dgamma = Vec::with_capacity(p);
        for _ in 0..p {
            let a = DMatrix::from_fn(n, n, |_, _| {
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            dgamma.push(&a * a.adjoint() * Complex64::new(0.05, 0.0));
        }
        let temps: Vec<f64> = (0..p).map(|_| 0.5 + rng.gen::<f64>()).collect();
        let mut gamma = DMatrix::<Complex64>::zeros(n, n);
        for (t, d) in temps.iter().zip(&dgamma) {
            gamma += d * Complex64::new(*t, 0.0);
        }
        CoherenceMatrix::from_parts(gamma, dgamma).unwrap()
    }

    #[test]
    fn identity_leaves_coherence_unchanged() {
        let coh = random_coherence(3, 2, 1);
        let out = detection_coherence(&coh, &UnitaryPoint::identity(3)).unwrap();
        assert!((out.gamma() - coh.gamma()).norm() < 1e-14);
    }

    #[test]
    fn permutation_relabels_entries() {
        let coh = random_coherence(3, 1, 2);
        // cyclic permutation matrix: d_i = b_{perm(i)}
        let mut pm = DMatrix::<Complex64>::zeros(3, 3);
        let perm = [1usize, 2, 0];
        for (i, &j) in perm.iter().enumerate() {
            pm[(i, j)] = Complex64::new(1.0, 0.0);
        }
        let u = UnitaryPoint::new(pm).unwrap();
        let out = detection_coherence(&coh, &u).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((out.gamma()[(i, j)] - coh.gamma()[(perm[i], perm[j])]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn two_mode_unitary_matches_elementwise_sum() {
        let coh = random_coherence(2, 1, 3);
        let u = UnitaryPoint::two_mode(0.7);
        let out = detection_coherence(&coh, &u).unwrap();
        let um = u.matrix();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..2 {
                    for l in 0..2 {
                        acc += um[(i, k)].conj() * um[(j, l)] * coh.gamma()[(k, l)];
                    }
                }
                assert!((out.gamma()[(i, j)] - acc).norm() < 1e-13);
            }
        }
        // photon number is preserved
        assert_relative_eq!(out.trace(), coh.trace(), max_relative = 1e-12);
    }

    #[test]
    fn rejects_non_unitary() {
        let m = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert!(UnitaryPoint::new(m).is_err());
    }

    #[test]
    fn vacuum_probabilities() {
        let probs = outcome_probabilities(&DMatrix::<Complex64>::zeros(3, 3)).unwrap();
        assert_relative_eq!(probs[0], 1.0);
        for &p in &probs[1..] {
            assert!(p.abs() < 1e-14);
        }
    }

    #[test]
    fn single_mode_thermal_statistics() {
        let nbar = 0.6;
        let g = DMatrix::from_element(1, 1, Complex64::new(nbar, 0.0));
        let probs = outcome_probabilities(&g).unwrap();
        assert_relative_eq!(probs[0], 1.0 / (1.0 + nbar), max_relative = 1e-12);
        assert_relative_eq!(probs[1], nbar / ((1.0 + nbar) * (1.0 + nbar)), max_relative = 1e-12);
        assert_relative_eq!(probs[2], 1.0 - probs[0] - probs[1], epsilon = 1e-15);
    }

    #[test]
    fn product_state_factorization() {
        let (x, y) = (0.8, 0.3);
        let mut g = DMatrix::<Complex64>::zeros(2, 2);
        g[(0, 0)] = Complex64::new(x, 0.0);
        g[(1, 1)] = Complex64::new(y, 0.0);
        let probs = outcome_probabilities(&g).unwrap();
        assert_relative_eq!(probs[0], 1.0 / ((1.0 + x) * (1.0 + y)), max_relative = 1e-12);
        assert_relative_eq!(
            probs[1],
            x / ((1.0 + x) * (1.0 + x) * (1.0 + y)),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            probs[2],
            y / ((1.0 + y) * (1.0 + y) * (1.0 + x)),
            max_relative = 1e-12
        );
    }

    #[test]
    fn probabilities_normalized_and_derivatives_sum_to_zero() {
        let coh = random_coherence(4, 3, 9);
        let dist = outcome_distribution(&coh).unwrap();
        let sum: f64 = dist.probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        for i in 0..3 {
            let col: f64 = (0..dist.num_outcomes()).map(|l| dist.dprobs[(l, i)]).sum();
            assert!(col.abs() < 1e-12);
        }
    }

    #[test]
    fn zero_derivative_stack_gives_zero_dprobs() {
        let coh = CoherenceMatrix::from_parts(
            DMatrix::from_element(1, 1, Complex64::new(0.4, 0.0)),
            vec![DMatrix::zeros(1, 1)],
        )
        .unwrap();
        let dist = outcome_distribution(&coh).unwrap();
        assert!(dist.dprobs.norm() < 1e-15);
    }

    #[test]
    fn single_mode_derivative_matches_hand_formula() {
        // Γ̃ = n̄(T) = c T: ∂P₀/∂T = −c/(1+n̄)²
        let c = 0.05;
        let t = 7.0;
        let nbar = c * t;
        let coh = CoherenceMatrix::from_parts(
            DMatrix::from_element(1, 1, Complex64::new(nbar, 0.0)),
            vec![DMatrix::from_element(1, 1, Complex64::new(c, 0.0))],
        )
        .unwrap();
        let dist = outcome_distribution(&coh).unwrap();
        assert_relative_eq!(
            dist.dprobs[(0, 0)],
            -c / ((1.0 + nbar) * (1.0 + nbar)),
            max_relative = 1e-12
        );
        // P₁ = n̄/(1+n̄)²: ∂P₁/∂T = c (1−n̄)/(1+n̄)³
        assert_relative_eq!(
            dist.dprobs[(1, 0)],
            c * (1.0 - nbar) / (1.0 + nbar).powi(3),
            max_relative = 1e-12
        );
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let coh = random_coherence(3, 3, 17);
        let dist = outcome_distribution(&coh).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let bump = |sign: f64| {
                let g = coh.gamma() + &coh.dgamma()[i] * Complex64::new(sign * h, 0.0);
                outcome_probabilities(&g).unwrap()
            };
            let plus = bump(1.0);
            let minus = bump(-1.0);
            for l in 0..dist.num_outcomes() {
                let fd = (plus[l] - minus[l]) / (2.0 * h);
                let scale = fd.abs().max(1e-10);
                assert!(
                    (dist.dprobs[(l, i)] - fd).abs() / scale < 1e-5,
                    "outcome {l} param {i}: analytic {} vs fd {fd}",
                    dist.dprobs[(l, i)]
                );
            }
        }
    }

    #[test]
    fn binomial_fisher_information() {
        // one parameter, effectively two outcomes
        let dist = OutcomeDistribution {
            probs: vec![0.3, 0.7, 0.0],
            dprobs: DMatrix::from_column_slice(3, 1, &[0.2, -0.2, 0.0]),
        };
        let f = cfi_matrix(&dist).unwrap();
        assert_relative_eq!(f.matrix()[(0, 0)], 0.04 / 0.3 + 0.04 / 0.7, max_relative = 1e-12);
    }

    #[test]
    fn independent_parameter_gives_zero_row() {
        let dist = OutcomeDistribution {
            probs: vec![0.5, 0.5],
            dprobs: DMatrix::from_column_slice(2, 2, &[0.1, -0.1, 0.0, 0.0]),
        };
        let f = cfi_matrix(&dist).unwrap();
        assert!(f.matrix()[(1, 1)].abs() < 1e-15);
        assert!(f.matrix()[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn degenerate_support_is_an_error() {
        let dist = OutcomeDistribution {
            probs: vec![1.0, 0.0],
            dprobs: DMatrix::from_column_slice(2, 1, &[-0.3, 0.3]),
        };
        match cfi_matrix(&dist) {
            Err(Error::Unidentifiable { .. }) => {}
            other => panic!("expected degenerate-support error, got {other:?}"),
        }
    }

    #[test]
    fn analytic_cost_gradient_matches_finite_differences() {
        use crate::optim::{random_unitary, wirtinger_gradient_fd, CostFunction};
        for (n, p, seed) in [(2usize, 2usize, 5u64), (3, 2, 6), (4, 3, 7)] {
            let coh = random_coherence(n, p, seed);
            let weight = if seed % 2 == 0 {
                None
            } else {
                let mut w = DMatrix::<f64>::identity(p, p);
                w[(0, 0)] = 2.5;
                Some(w)
            };
            let cost = ScalarCcrbCost::new(coh, weight);
            for trial in 0..3u64 {
                let u = random_unitary(n, 100 * seed + trial);
                let g_an = cost.euclidean_gradient(&u).unwrap().unwrap();
                let g_fd = wirtinger_gradient_fd(&cost, &u, 1e-6).unwrap();
                let rel = (&g_an - &g_fd).norm() / g_fd.norm().max(1e-300);
                assert!(
                    rel < 1e-5,
                    "n={n} p={p} seed={seed} trial={trial}: gradient mismatch {rel:.3e}"
                );
            }
        }
    }

    #[test]
    fn permutation_leaves_ccrb_unchanged() {
        let coh = random_coherence(3, 3, 33);
        let base = scalar_ccrb(&coh, &UnitaryPoint::identity(3), None).unwrap();
        let mut pm = DMatrix::<Complex64>::zeros(3, 3);
        for (i, &j) in [2usize, 0, 1].iter().enumerate() {
            pm[(i, j)] = Complex64::new(1.0, 0.0);
        }
        let permuted = scalar_ccrb(&coh, &UnitaryPoint::new(pm).unwrap(), None).unwrap();
        assert_relative_eq!(base, permuted, max_relative = 1e-9);
    }
}
