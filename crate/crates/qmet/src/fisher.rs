//! Quantum Fisher information for circularly symmetric Gaussian states.
//!
//! The state is fully described by the coherence matrix `Γ`. Its symmetrized
//! covariance matrix `Σ` (mode ordering `b = [b₁, b₁†, b₂, b₂†, …]`) enters the
//! moment operator `𝔐 = Σ⊗Σ + ¼Ω⊗Ω`, which determines both the QFI matrix and
//! the quadratic coefficient matrices `M_i` of the symmetric logarithmic
//! derivatives `𝓛_i = b̄† M_i b̄`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scene::CoherenceMatrix;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Symmetrized covariance matrix `Σ_αβ = ½⟨{b_α, b_β}⟩` with its parameter
/// derivative stack.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    sigma: DMatrix<Complex64>,
    dsigma: Vec<DMatrix<Complex64>>,
}

impl CovarianceMatrix {
    pub fn sigma(&self) -> &DMatrix<Complex64> {
        &self.sigma
    }

    pub fn dsigma(&self) -> &[DMatrix<Complex64>] {
        &self.dsigma
    }

    /// Number of bosonic modes (half the matrix dimension).
    pub fn num_modes(&self) -> usize {
        self.sigma.nrows() / 2
    }

    pub fn num_params(&self) -> usize {
        self.dsigma.len()
    }
}

fn covariance_map(gamma: &DMatrix<Complex64>, vacuum: bool) -> DMatrix<Complex64> {
    let n = gamma.nrows();
    let mut sigma = DMatrix::<Complex64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let delta = if vacuum && i == j { 0.5 } else { 0.0 };
            // (b_i, b_j†) and (b_i†, b_j) entries; ⟨b b⟩ moments vanish
            sigma[(2 * i, 2 * j + 1)] = gamma[(j, i)] + Complex64::new(delta, 0.0);
            sigma[(2 * i + 1, 2 * j)] = gamma[(i, j)] + Complex64::new(delta, 0.0);
        }
    }
    sigma
}

/// Covariance matrix of a circularly symmetric zero-mean Gaussian state with
/// coherence matrix `Γ`, including the vacuum contribution on the diagonal
/// blocks.
pub fn covariance_from_coherence(coh: &CoherenceMatrix) -> CovarianceMatrix {
    CovarianceMatrix {
        sigma: covariance_map(coh.gamma(), true),
        dsigma: coh.dgamma().iter().map(|d| covariance_map(d, false)).collect(),
    }
}

/// Symplectic form `Ω = ⊕_k iσ_y` in the interleaved mode ordering.
fn symplectic_form(n: usize) -> DMatrix<Complex64> {
    let mut omega = DMatrix::<Complex64>::zeros(2 * n, 2 * n);
    for k in 0..n {
        omega[(2 * k, 2 * k + 1)] = ONE;
        omega[(2 * k + 1, 2 * k)] = -ONE;
    }
    omega
}

/// The moment operator `𝔐 = Σ⊗Σ + ¼Ω⊗Ω` acting on column-major vectorized
/// matrices: `𝔐 vec(A) = vec(Σ A Σᵀ + ¼ Ω A Ωᵀ)`.
pub fn moment_operator(sigma: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = sigma.nrows() / 2;
    let omega = symplectic_form(n);
    sigma.kronecker(sigma) + omega.kronecker(&omega) * Complex64::new(0.25, 0.0)
}

struct MomentSolver {
    lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl MomentSolver {
    fn new(sigma: &DMatrix<Complex64>) -> Result<Self> {
        let op = moment_operator(sigma);
        let scale = op
            .diagonal()
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max)
            .max(1e-300);
        let lu = op.lu();
        let min_pivot = lu
            .u()
            .diagonal()
            .iter()
            .map(|z| z.norm())
            .fold(f64::INFINITY, f64::min);
        if !(min_pivot > 1e-13 * scale) {
            return Err(Error::Numerical(format!(
                "moment operator is singular (smallest pivot {min_pivot:.3e}); \
                 the state is too close to pure for the Gaussian QFI formula"
            )));
        }
        Ok(Self { lu })
    }

    /// Solves `𝔐 X = vec(rhs)` and returns `X` as a matrix.
    fn solve(&self, rhs: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        let dim = rhs.nrows();
        let v = DVector::from_column_slice(rhs.as_slice());
        let x = self
            .lu
            .solve(&v)
            .ok_or_else(|| Error::Numerical("moment operator solve failed".into()))?;
        Ok(DMatrix::from_column_slice(dim, dim, x.as_slice()))
    }
}

/// Which bound a Fisher matrix refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherKind {
    Quantum,
    Classical,
}

/// Real symmetric positive semidefinite Fisher information matrix.
#[derive(Debug, Clone)]
pub struct FisherMatrix {
    matrix: DMatrix<f64>,
    kind: FisherKind,
}

impl FisherMatrix {
    pub fn new(matrix: DMatrix<f64>, kind: FisherKind) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Domain("Fisher matrix must be square".into()));
        }
        let scale = matrix.norm().max(1e-300);
        if (&matrix - matrix.transpose()).norm() > 1e-10 * scale {
            return Err(Error::Numerical("Fisher matrix is not symmetric".into()));
        }
        Ok(Self { matrix, kind })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> FisherKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn eigen(&self) -> (DVector<f64>, DMatrix<f64>) {
        let se = nalgebra::SymmetricEigen::new(self.matrix.clone());
        (se.eigenvalues, se.eigenvectors)
    }

    /// Scalar Cramér-Rao bound `Tr(w F⁻¹)` for a positive weight matrix `w`
    /// (identity when `None`).
    pub fn scalar_bound(&self, weight: Option<&DMatrix<f64>>) -> Result<f64> {
        let (vals, vecs) = self.eigen();
        let max = vals.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let (idx_min, &min) = vals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty spectrum");
        if min <= 1e-12 * max.max(1e-300) {
            return Err(Error::Unidentifiable {
                reason: format!(
                    "Fisher matrix is singular (eigenvalue {min:.3e} vs max {max:.3e})"
                ),
                null_vector: vecs.column(idx_min).iter().cloned().collect(),
            });
        }
        match weight {
            None => Ok(vals.iter().map(|&v| 1.0 / v).sum()),
            Some(w) => {
                if w.shape() != self.matrix.shape() {
                    return Err(Error::Config("weight matrix dimension mismatch".into()));
                }
                let inv_vals = DVector::from_iterator(vals.len(), vals.iter().map(|&v| 1.0 / v));
                let f_inv = &vecs * DMatrix::from_diagonal(&inv_vals) * vecs.transpose();
                Ok((w * f_inv).trace())
            }
        }
    }

    /// Ratio of extreme eigenvalue magnitudes; large values flag an
    /// effectively singular matrix.
    pub fn condition_number(&self) -> f64 {
        let (vals, _) = self.eigen();
        let max = vals.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let min = vals.iter().fold(f64::INFINITY, |m, &v| m.min(v.abs()));
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Advantage of joint over separate estimation,
    /// `𝓡 = p Σ_i (1/F_ii) / Tr(F⁻¹)`, bounded by the parameter count.
    pub fn gain_factor(&self) -> Result<f64> {
        let p = self.dim() as f64;
        if self.matrix.diagonal().iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Domain(
                "gain factor requires positive diagonal Fisher entries".into(),
            ));
        }
        let diag_sum: f64 = self.matrix.diagonal().iter().map(|&d| 1.0 / d).sum();
        let tr_inv = self.scalar_bound(None)?;
        Ok(p * diag_sum / tr_inv)
    }
}

/// Scalar bound `Tr(w F⁻¹)`; free-function form of [`FisherMatrix::scalar_bound`].
pub fn scalar_bound(f: &FisherMatrix, weight: Option<&DMatrix<f64>>) -> Result<f64> {
    f.scalar_bound(weight)
}

/// Joint-estimation gain factor of a Fisher matrix.
pub fn gain_factor(f: &FisherMatrix) -> Result<f64> {
    f.gain_factor()
}

/// QFI matrix `F_ij = ½ vec(∂_jΣ) · 𝔐⁻¹ vec(∂_iΣ)`.
pub fn qfi_matrix(cov: &CovarianceMatrix) -> Result<FisherMatrix> {
    let solver = MomentSolver::new(&cov.sigma)?;
    let p = cov.num_params();
    let solutions: Vec<DMatrix<Complex64>> = cov
        .dsigma
        .iter()
        .map(|d| solver.solve(d))
        .collect::<Result<_>>()?;
    let mut f = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            // bilinear (unconjugated) contraction of the two index pairs
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, b) in cov.dsigma[j].iter().zip(solutions[i].iter()) {
                acc += a * b;
            }
            let val = 0.5 * acc.re;
            f[(i, j)] = val;
            f[(j, i)] = val;
        }
    }
    FisherMatrix::new(f, FisherKind::Quantum)
}

/// Hermitian coefficient matrix `M_i` of the SLD `𝓛_i = b̄† M_i b̄`.
#[derive(Debug, Clone)]
pub struct SldMatrix {
    m: DMatrix<Complex64>,
    parameter_index: usize,
}

impl SldMatrix {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn parameter_index(&self) -> usize {
        self.parameter_index
    }

    pub fn num_modes(&self) -> usize {
        self.m.nrows()
    }

    /// Embeds the coefficients back into the symmetric `2n×2n` array that
    /// multiplies `b_α b_β` in the quadratic form; `𝔐 vec(coeffs)` must
    /// reproduce `vec(∂Σ)`.
    pub fn coefficient_array(&self) -> DMatrix<Complex64> {
        let n = self.num_modes();
        let mut x = DMatrix::<Complex64>::zeros(2 * n, 2 * n);
        for a in 0..n {
            for b in 0..n {
                // (b†_a, b_b) slot and its transpose
                x[(2 * a + 1, 2 * b)] = self.m[(a, b)];
                x[(2 * b, 2 * a + 1)] = self.m[(a, b)];
            }
        }
        x
    }
}

/// Solves the SLD moment equation for parameter `i` and extracts the `n×n`
/// Hermitian coefficient matrix from the `(b†, b)` slots of the solution.
pub fn sld_matrix(cov: &CovarianceMatrix, param: usize) -> Result<SldMatrix> {
    if param >= cov.num_params() {
        return Err(Error::Config(format!(
            "parameter index {param} out of range ({} parameters)",
            cov.num_params()
        )));
    }
    let solver = MomentSolver::new(&cov.sigma)?;
    let x = solver.solve(&cov.dsigma[param])?;
    let n = cov.num_modes();
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            m[(a, b)] = x[(2 * a + 1, 2 * b)];
        }
    }
    let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(SldMatrix {
        m,
        parameter_index: param,
    })
}

/// Diagonalizes an SLD coefficient matrix: returns `(V, d)` with `V M V† = diag(d)`
/// and eigenvalues sorted descending. Eigenvector phases are fixed so the
/// largest-magnitude component of each row of `V` is real and positive.
pub fn sld_detection_unitary(sld: &SldMatrix) -> (DMatrix<Complex64>, DVector<f64>) {
    let se = nalgebra::SymmetricEigen::new(sld.m.clone());
    let n = sld.num_modes();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));
    let mut v = DMatrix::<Complex64>::zeros(n, n);
    let mut d = DVector::<f64>::zeros(n);
    for (row, &src) in order.iter().enumerate() {
        d[row] = se.eigenvalues[src];
        let col = se.eigenvectors.column(src);
        // phase convention for reproducibility
        let (pivot_idx, _) = col
            .iter()
            .enumerate()
            .fold((0usize, 0.0f64), |(bi, bm), (i, z)| {
                if z.norm() > bm {
                    (i, z.norm())
                } else {
                    (bi, bm)
                }
            });
        let pivot = col[pivot_idx];
        let phase = if pivot.norm() > 0.0 {
            pivot.conj() / Complex64::new(pivot.norm(), 0.0)
        } else {
            ONE
        };
        for i in 0..n {
            // row of V = conjugate transpose of the phased eigenvector
            v[(row, i)] = (col[i] * phase).conj();
        }
    }
    (v, d)
}

/// Gaussian-state expectation of the commutator of two SLDs,
/// `Tr(ρ[𝓛_i, 𝓛_j]) = Tr([M_i, M_j] Γᵀ)`.
pub fn commutation_on_average(
    m_i: &SldMatrix,
    m_j: &SldMatrix,
    gamma: &DMatrix<Complex64>,
) -> Result<Complex64> {
    if m_i.num_modes() != m_j.num_modes() || m_i.num_modes() != gamma.nrows() {
        return Err(Error::Config("SLD / coherence dimension mismatch".into()));
    }
    let comm = &m_i.m * &m_j.m - &m_j.m * &m_i.m;
    Ok((comm * gamma.transpose()).trace())
}

/// [`commutation_on_average`] normalized by `‖M_i‖ ‖M_j‖ ‖Γ‖`.
pub fn relative_commutation(
    m_i: &SldMatrix,
    m_j: &SldMatrix,
    gamma: &DMatrix<Complex64>,
) -> Result<f64> {
    let raw = commutation_on_average(m_i, m_j, gamma)?;
    let scale = m_i.m.norm() * m_j.m.norm() * gamma.norm();
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(raw.norm() / scale)
}
