//! Riemannian conjugate gradient descent on the unitary group.
//!
//! The iteration follows the geodesic scheme for `U(n)`: a Wirtinger
//! Euclidean gradient `G = ∂F/∂U*` is projected to the skew-Hermitian
//! Riemannian gradient `W = G U† − U G†`, steps move along geodesics
//! `U ← exp(−αH) U`, the step size comes from an Armijo doubling/halving
//! search, and search directions are updated with the Polak-Ribière rule with
//! a periodic restart every `n²` iterations.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// A real-valued cost over `U(n)`.
///
/// `evaluate` must be deterministic and reentrant: finite-difference probes
/// may be evaluated concurrently. An analytic Wirtinger gradient is optional;
/// without one the optimizer falls back to central differences (`2n²`
/// evaluations per gradient).
pub trait CostFunction: Sync {
    fn dim(&self) -> usize;

    fn evaluate(&self, u: &DMatrix<Complex64>) -> Result<f64>;

    /// Analytic `∂F/∂U*`, if available.
    fn euclidean_gradient(&self, _u: &DMatrix<Complex64>) -> Option<Result<DMatrix<Complex64>>> {
        None
    }
}

/// Options for [`minimize`].
#[derive(Debug, Clone)]
pub struct CgOptions {
    /// Maximum number of conjugate gradient iterations.
    pub max_iters: usize,
    /// Central-difference step for the Wirtinger gradient.
    pub fd_step: f64,
    /// Relative cost-decrease tolerance for the plateau test.
    pub cost_tol: f64,
    /// Number of consecutive iterations below `cost_tol` that terminates.
    pub plateau_window: usize,
    /// Fresh-gradient restart period; defaults to `n²` when `None`.
    pub reset_period: Option<usize>,
    /// Initial Armijo step size.
    pub initial_alpha: f64,
    /// Terminate when the Riemannian gradient norm falls below this.
    pub grad_tol: f64,
    /// Seed for the Haar-random initial unitary.
    pub seed: u64,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            fd_step: 1e-6,
            cost_tol: 1e-10,
            plateau_window: 20,
            reset_period: None,
            initial_alpha: 1.0,
            grad_tol: 0.0,
            seed: 0,
        }
    }
}

impl CgOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0
            || !(self.fd_step > 0.0)
            || !(self.cost_tol > 0.0)
            || self.plateau_window == 0
            || !(self.initial_alpha > 0.0)
            || !(self.grad_tol >= 0.0)
        {
            return Err(Error::Config("invalid conjugate gradient options".into()));
        }
        Ok(())
    }
}

/// State of one conjugate gradient iterate.
#[derive(Debug, Clone)]
pub struct CgState {
    pub u: DMatrix<Complex64>,
    pub w: DMatrix<Complex64>,
    pub h: DMatrix<Complex64>,
    pub alpha: f64,
    pub k: usize,
    pub f: f64,
}

/// Result of a minimization run.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub u: DMatrix<Complex64>,
    pub cost: f64,
    /// Cost after every accepted iterate, starting with the initial point.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the line search stalled and the best-so-far point was kept.
    pub stalled: bool,
}

/// Bi-invariant inner product `⟨X, Y⟩ = Re Tr(X†Y)/2` on the tangent space.
pub fn inner(x: &DMatrix<Complex64>, y: &DMatrix<Complex64>) -> f64 {
    let mut acc = 0.0;
    for (a, b) in x.iter().zip(y.iter()) {
        acc += a.re * b.re + a.im * b.im;
    }
    acc / 2.0
}

/// Haar-random unitary from the QR decomposition of a seeded complex
/// Gaussian matrix, with the R-diagonal phase correction.
pub fn random_unitary(n: usize, seed: u64) -> DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move || {
        // Box-Muller
        let u1: f64 = rng.gen::<f64>().max(1e-300);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let z = DMatrix::from_fn(n, n, |_, _| Complex64::new(normal(), normal()));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / Complex64::new(d.norm(), 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Central-difference Wirtinger gradient `G_kl = ½(∂F/∂Re U_kl + i ∂F/∂Im U_kl)`.
pub fn wirtinger_gradient_fd(
    cost: &dyn CostFunction,
    u: &DMatrix<Complex64>,
    step: f64,
) -> Result<DMatrix<Complex64>> {
    let n = u.nrows();
    let entries: Vec<(usize, usize, bool)> = (0..n)
        .flat_map(|r| (0..n).flat_map(move |c| [(r, c, false), (r, c, true)]))
        .collect();
    let partials: Vec<Result<f64>> = entries
        .par_iter()
        .map(|&(r, c, imag)| {
            let delta = if imag {
                Complex64::new(0.0, step)
            } else {
                Complex64::new(step, 0.0)
            };
            let mut plus = u.clone();
            plus[(r, c)] += delta;
            let mut minus = u.clone();
            minus[(r, c)] -= delta;
            let fp = cost.evaluate(&plus)?;
            let fm = cost.evaluate(&minus)?;
            if !fp.is_finite() || !fm.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite cost at finite-difference probe ({r}, {c}, imag={imag})"
                )));
            }
            Ok((fp - fm) / (2.0 * step))
        })
        .collect();
    let mut g = DMatrix::<Complex64>::zeros(n, n);
    for (&(r, c, imag), partial) in entries.iter().zip(partials) {
        let d = partial?;
        if imag {
            g[(r, c)] += Complex64::new(0.0, 0.5 * d);
        } else {
            g[(r, c)] += Complex64::new(0.5 * d, 0.0);
        }
    }
    Ok(g)
}

/// Euclidean gradient: analytic when the cost provides one, otherwise
/// central finite differences.
pub fn euclidean_gradient(
    cost: &dyn CostFunction,
    u: &DMatrix<Complex64>,
    fd_step: f64,
) -> Result<DMatrix<Complex64>> {
    match cost.euclidean_gradient(u) {
        Some(g) => g,
        None => wirtinger_gradient_fd(cost, u, fd_step),
    }
}

/// Riemannian gradient `W = G U† − U G†`; skew-Hermitian by construction.
pub fn riemannian_gradient(g: &DMatrix<Complex64>, u: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    g * u.adjoint() - u * g.adjoint()
}

/// Exact unitary exponential `exp(−αH)` of a skew-Hermitian direction via the
/// Hermitian eigendecomposition of `iH`.
pub fn unitary_exp(h: &DMatrix<Complex64>, alpha: f64) -> DMatrix<Complex64> {
    let n = h.nrows();
    let a = (h * Complex64::new(0.0, 1.0) + (h * Complex64::new(0.0, 1.0)).adjoint())
        * Complex64::new(0.5, 0.0);
    let se = nalgebra::SymmetricEigen::new(a);
    let mut phases = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        // −αH = iα(iH)
        phases[(i, i)] = Complex64::from_polar(1.0, alpha * se.eigenvalues[i]);
    }
    &se.eigenvectors * phases * se.eigenvectors.adjoint()
}

/// Geodesic retraction `U ← exp(−αH) U`, re-unitarized by polar projection
/// when drift exceeds tolerance.
pub fn geodesic_step(
    u: &DMatrix<Complex64>,
    h: &DMatrix<Complex64>,
    alpha: f64,
) -> DMatrix<Complex64> {
    reunitarize(unitary_exp(h, alpha) * u)
}

fn unitarity_drift(u: &DMatrix<Complex64>) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - DMatrix::<Complex64>::identity(n, n)).norm()
}

fn reunitarize(u: DMatrix<Complex64>) -> DMatrix<Complex64> {
    if unitarity_drift(&u) <= 1e-12 {
        return u;
    }
    let svd = nalgebra::SVD::new(u, true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

fn eval_or_inf(cost: &dyn CostFunction, u: &DMatrix<Complex64>) -> f64 {
    match cost.evaluate(u) {
        Ok(v) if v.is_finite() => v,
        _ => f64::INFINITY,
    }
}

const LINE_SEARCH_BUDGET: usize = 60;

/// Armijo doubling/halving line search along the geodesic `exp(−αH)U`.
///
/// Doubles while the doubled step still achieves a decrease of at least
/// `α⟨W, H⟩`, then halves until the decrease reaches `(α/2)⟨W, H⟩`. Returns
/// the accepted step size, the new point, and its cost.
pub fn armijo_line_search(
    cost: &dyn CostFunction,
    u: &DMatrix<Complex64>,
    f0: f64,
    w: &DMatrix<Complex64>,
    h: &DMatrix<Complex64>,
    alpha_in: f64,
) -> Result<(f64, DMatrix<Complex64>, f64)> {
    let wh = inner(w, h);
    if !(wh > 0.0) {
        return Err(Error::Domain(format!(
            "line search requires a descent direction (⟨W, H⟩ = {wh:.3e})"
        )));
    }
    let mut alpha = alpha_in;
    let mut p = unitary_exp(h, alpha);
    let mut q = &p * &p;
    let mut budget = LINE_SEARCH_BUDGET;

    // doubling: the doubled step still satisfies the decrease condition
    while budget > 0 {
        budget -= 1;
        let fq = eval_or_inf(cost, &(&q * u));
        if f0 - fq >= alpha * wh {
            p = q;
            q = &p * &p;
            alpha *= 2.0;
        } else {
            break;
        }
    }

    // halving: shrink until the sufficient-decrease condition holds
    while budget > 0 {
        budget -= 1;
        let candidate = reunitarize(&p * u);
        let fp = eval_or_inf(cost, &candidate);
        if f0 - fp < 0.5 * alpha * wh {
            alpha *= 0.5;
            if alpha < 1e-20 {
                return Err(Error::LineSearchStall(
                    "step size underflowed without sufficient decrease".into(),
                ));
            }
            p = unitary_exp(h, alpha);
        } else {
            return Ok((alpha, candidate, fp));
        }
    }
    Err(Error::LineSearchStall(format!(
        "no acceptable step within {LINE_SEARCH_BUDGET} trial evaluations"
    )))
}

/// Minimizes `cost` from a Haar-random starting unitary drawn with
/// `opts.seed`.
pub fn minimize(cost: &dyn CostFunction, opts: &CgOptions) -> Result<CgOutcome> {
    let u0 = random_unitary(cost.dim(), opts.seed);
    minimize_from(cost, u0, opts)
}

/// Minimizes `cost` starting from `u0`.
pub fn minimize_from(
    cost: &dyn CostFunction,
    u0: DMatrix<Complex64>,
    opts: &CgOptions,
) -> Result<CgOutcome> {
    opts.validate()?;
    let n = cost.dim();
    if u0.nrows() != n || u0.ncols() != n {
        return Err(Error::Config("starting point dimension mismatch".into()));
    }
    let reset_period = opts.reset_period.unwrap_or(n * n).max(1);

    let mut u = reunitarize(u0);
    let mut f = cost.evaluate(&u)?;
    let mut trace = vec![f];
    let mut alpha = opts.initial_alpha;
    let mut w = DMatrix::<Complex64>::zeros(n, n);
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    let mut converged = false;
    let mut stalled = false;
    let mut plateau = 0usize;
    let mut k = 0usize;

    while k < opts.max_iters {
        if k.is_multiple_of(reset_period) {
            let g = euclidean_gradient(cost, &u, opts.fd_step)?;
            w = riemannian_gradient(&g, &u);
            h = w.clone();
        }

        let w_norm = inner(&w, &w).sqrt();
        if w_norm <= opts.grad_tol {
            converged = true;
            break;
        }
        if !(inner(&w, &h) > 0.0) {
            h = w.clone();
        }
        if !(inner(&w, &h) > 0.0) {
            // gradient numerically zero: stationary point
            converged = true;
            break;
        }

        match armijo_line_search(cost, &u, f, &w, &h, alpha) {
            Ok((a, u_next, f_next)) => {
                alpha = a;
                let decrease = f - f_next;
                u = u_next;
                f = f_next;
                trace.push(f);
                k += 1;

                let g_next = euclidean_gradient(cost, &u, opts.fd_step)?;
                let w_next = riemannian_gradient(&g_next, &u);
                let ww = inner(&w, &w);
                let gamma = if ww > 0.0 {
                    inner(&(&w_next - &w), &w) / ww
                } else {
                    0.0
                };
                h = &w_next + &h * Complex64::new(gamma, 0.0);
                if inner(&w_next, &h) <= 0.0 {
                    h = w_next.clone();
                }
                w = w_next;

                if decrease.abs() <= opts.cost_tol * f.abs().max(1e-300) {
                    plateau += 1;
                    if plateau >= opts.plateau_window {
                        converged = true;
                        break;
                    }
                } else {
                    plateau = 0;
                }
            }
            Err(Error::LineSearchStall(_)) => {
                stalled = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }

    Ok(CgOutcome {
        u,
        cost: f,
        trace,
        iterations: k,
        converged,
        stalled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Procrustes {
        target: DMatrix<Complex64>,
        analytic: bool,
    }

    impl CostFunction for Procrustes {
        fn dim(&self) -> usize {
            self.target.nrows()
        }

        fn evaluate(&self, u: &DMatrix<Complex64>) -> Result<f64> {
            Ok((u - &self.target).norm_squared())
        }

        fn euclidean_gradient(&self, u: &DMatrix<Complex64>) -> Option<Result<DMatrix<Complex64>>> {
            if self.analytic {
                Some(Ok(u - &self.target))
            } else {
                None
            }
        }
    }

    struct LinearTrace {
        a: DMatrix<Complex64>,
    }

    impl CostFunction for LinearTrace {
        fn dim(&self) -> usize {
            self.a.nrows()
        }

        fn evaluate(&self, u: &DMatrix<Complex64>) -> Result<f64> {
            Ok((self.a.adjoint() * u).trace().re)
        }
    }

    #[test]
    fn fd_gradient_of_linear_functional() {
        // F(U) = Re Tr(A†U) has Wirtinger gradient A/2
        let a = random_unitary(3, 42) * Complex64::new(1.7, 0.0);
        let cost = LinearTrace { a: a.clone() };
        let u = random_unitary(3, 1);
        let g = wirtinger_gradient_fd(&cost, &u, 1e-6).unwrap();
        assert!((g - a * Complex64::new(0.5, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn fd_gradient_constant_cost_is_zero() {
        struct Constant;
        impl CostFunction for Constant {
            fn dim(&self) -> usize {
                2
            }
            fn evaluate(&self, _u: &DMatrix<Complex64>) -> Result<f64> {
                Ok(3.5)
            }
        }
        let g = wirtinger_gradient_fd(&Constant, &random_unitary(2, 9), 1e-6).unwrap();
        assert!(g.norm() < 1e-12);
    }

    #[test]
    fn fd_matches_analytic_procrustes_gradient() {
        let target = random_unitary(3, 7);
        let fd_cost = Procrustes {
            target: target.clone(),
            analytic: false,
        };
        let u = random_unitary(3, 8);
        let g_fd = wirtinger_gradient_fd(&fd_cost, &u, 1e-6).unwrap();
        let g_an = &u - &target;
        assert!((g_fd - g_an).norm() < 1e-8);
    }

    #[test]
    fn riemannian_gradient_properties() {
        let u = random_unitary(4, 3);
        // G proportional to U is tangent-orthogonal
        let w = riemannian_gradient(&u, &u);
        assert!(w.norm() < 1e-13);
        // G = iU gives 2iI
        let w = riemannian_gradient(&(&u * Complex64::new(0.0, 1.0)), &u);
        let expected = DMatrix::<Complex64>::identity(4, 4) * Complex64::new(0.0, 2.0);
        assert!((&w - expected).norm() < 1e-12);
        // random G: skew-Hermitian, nonnegative norm
        let g = random_unitary(4, 5) * Complex64::new(0.3, 0.1);
        let w = riemannian_gradient(&g, &u);
        assert!((&w + w.adjoint()).norm() < 1e-12);
        assert!(inner(&w, &w) >= 0.0);
    }

    #[test]
    fn geodesic_step_cases() {
        let u = random_unitary(2, 11);
        let h = {
            let g = random_unitary(2, 12);
            riemannian_gradient(&g, &u)
        };
        // alpha = 0 leaves U unchanged
        assert!((geodesic_step(&u, &h, 0.0) - &u).norm() < 1e-12);
        // diagonal skew-Hermitian direction: phases
        let theta = 0.8;
        let hd = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(0.0, theta),
            Complex64::new(0.0, -theta),
        ]));
        let e = unitary_exp(&hd, 1.0);
        assert!((e[(0, 0)] - Complex64::from_polar(1.0, -theta)).norm() < 1e-12);
        assert!((e[(1, 1)] - Complex64::from_polar(1.0, theta)).norm() < 1e-12);
        // exp(−αH) exp(αH) = I
        let fwd = unitary_exp(&h, 0.7);
        let bwd = unitary_exp(&h, -0.7);
        assert!((fwd * bwd - DMatrix::<Complex64>::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn line_search_zero_direction_rejected() {
        let target = random_unitary(2, 1);
        let cost = Procrustes {
            target: target.clone(),
            analytic: true,
        };
        let z = DMatrix::<Complex64>::zeros(2, 2);
        let f0 = cost.evaluate(&target).unwrap();
        assert!(armijo_line_search(&cost, &target, f0, &z, &z, 1.0).is_err());
    }

    #[test]
    fn line_search_satisfies_armijo_and_decreases() {
        let target = random_unitary(3, 2);
        let cost = Procrustes {
            target: target.clone(),
            analytic: true,
        };
        let u = random_unitary(3, 4);
        let f0 = cost.evaluate(&u).unwrap();
        let g = cost.euclidean_gradient(&u).unwrap().unwrap();
        let w = riemannian_gradient(&g, &u);
        let h = w.clone();
        let (alpha, _u_next, f_next) = armijo_line_search(&cost, &u, f0, &w, &h, 1.0).unwrap();
        // sufficient decrease at the accepted step
        assert!(f0 - f_next >= 0.5 * alpha * inner(&w, &h));
        assert!(f_next < f0);
    }

    #[test]
    fn minimize_procrustes_converges() {
        let target = random_unitary(4, 77);
        let cost = Procrustes {
            target: target.clone(),
            analytic: false,
        };
        let out = minimize(
            &cost,
            &CgOptions {
                max_iters: 500,
                seed: 5,
                ..CgOptions::default()
            },
        )
        .unwrap();
        assert!(out.cost <= 1e-8, "final cost {}", out.cost);
        assert!((out.u - target).norm() < 1e-3);
        // monotone trace
        for pair in out.trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    #[test]
    fn minimize_brockett_reaches_eigenvalue_pairing() {
        // F(U) = Re Tr(Λ U A U†), Λ = diag(1, 2): minimum pairs the larger
        // Λ entry with the smaller eigenvalue of A
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
        ]));
        let base = random_unitary(2, 10);
        let a = &base
            * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                Complex64::new(-0.7, 0.0),
                Complex64::new(1.9, 0.0),
            ]))
            * base.adjoint();
        struct Brockett {
            lambda: DMatrix<Complex64>,
            a: DMatrix<Complex64>,
        }
        impl CostFunction for Brockett {
            fn dim(&self) -> usize {
                2
            }
            fn evaluate(&self, u: &DMatrix<Complex64>) -> Result<f64> {
                Ok((&self.lambda * u * &self.a * u.adjoint()).trace().re)
            }
        }
        let cost = Brockett {
            lambda,
            a: a.clone(),
        };
        let out = minimize(
            &cost,
            &CgOptions {
                max_iters: 300,
                seed: 3,
                ..CgOptions::default()
            },
        )
        .unwrap();
        // closed form: 1·1.9 + 2·(−0.7)
        let expected = 1.0 * 1.9 + 2.0 * (-0.7);
        assert_relative_eq!(out.cost, expected, max_relative = 1e-6);

        // brute-force grid over the U(2) angles as an independent oracle
        let mut best = f64::INFINITY;
        let steps = 40;
        for it in 0..steps {
            let theta = std::f64::consts::PI * it as f64 / steps as f64;
            for ia in 0..steps {
                let alpha = 2.0 * std::f64::consts::PI * ia as f64 / steps as f64;
                for ib in 0..steps {
                    let beta = 2.0 * std::f64::consts::PI * ib as f64 / steps as f64;
                    let u = DMatrix::from_row_slice(
                        2,
                        2,
                        &[
                            Complex64::from_polar(theta.cos(), alpha),
                            Complex64::from_polar(theta.sin(), beta),
                            Complex64::from_polar(-theta.sin(), -beta),
                            Complex64::from_polar(theta.cos(), -alpha),
                        ],
                    );
                    let v = cost.evaluate(&u).unwrap();
                    if v < best {
                        best = v;
                    }
                }
            }
        }
        assert!(out.cost <= best + 5e-3, "cg {} vs grid {best}", out.cost);
    }

    #[test]
    fn minimize_keeps_unitarity() {
        let target = random_unitary(3, 6);
        let cost = Procrustes {
            target,
            analytic: true,
        };
        let out = minimize(
            &cost,
            &CgOptions {
                max_iters: 200,
                seed: 8,
                ..CgOptions::default()
            },
        )
        .unwrap();
        assert!(unitarity_drift(&out.u) <= 1e-9);
    }

    #[test]
    fn right_translation_invariance() {
        // minimizing F(U) and F(U P₀) from correspondingly shifted starts
        // gives the same final cost
        let target = random_unitary(3, 15);
        let p0 = random_unitary(3, 16);
        let cost = Procrustes {
            target: target.clone(),
            analytic: false,
        };
        struct Shifted {
            inner: Procrustes,
            p0: DMatrix<Complex64>,
        }
        impl CostFunction for Shifted {
            fn dim(&self) -> usize {
                self.inner.dim()
            }
            fn evaluate(&self, u: &DMatrix<Complex64>) -> Result<f64> {
                self.inner.evaluate(&(u * &self.p0))
            }
        }
        let shifted = Shifted {
            inner: Procrustes {
                target: target.clone(),
                analytic: false,
            },
            p0: p0.clone(),
        };
        let u0 = random_unitary(3, 17);
        let opts = CgOptions {
            max_iters: 300,
            ..CgOptions::default()
        };
        let a = minimize_from(&cost, u0.clone(), &opts).unwrap();
        let b = minimize_from(&shifted, u0 * p0.adjoint(), &opts).unwrap();
        assert!((a.cost - b.cost).abs() < 1e-6);
    }
}
