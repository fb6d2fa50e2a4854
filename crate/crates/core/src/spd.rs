//! Symmetric positive-definite matrices and their spectral calculus.
//!
//! Everything on the manifold goes through one primitive: the cyclic Jacobi
//! eigensolver in [`eig_sym`]. Matrix functions (log, exp, square root,
//! inverse square root) are eigenvalue maps `V·diag(f(λ))·Vᵀ`, and the
//! affine-invariant distance is read off the spectrum of the whitened pair
//! `A^{-1/2} B A^{-1/2}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;

/// Relative asymmetry absorbed by symmetrization at construction.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Jacobi sweep cap. One sweep is n(n−1)/2 rotations, so the rotation budget
/// is 50·n·(n−1), comfortably above 30·n² for every n ≥ 3. For n = 2 a single
/// rotation diagonalizes exactly.
const MAX_JACOBI_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpdError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix asymmetry {asymmetry:e} exceeds relative tolerance")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive definite (eigenvalues span [{min:e}, {max:e}])")]
    NotPositiveDefinite { min: f64, max: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("scalar function undefined at eigenvalue {eigenvalue:e}")]
    DomainError { eigenvalue: f64 },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("shrinkage {0} outside [0, 1)")]
    InvalidShrinkage(f64),
}

pub type Result<T> = std::result::Result<T, SpdError>;

fn check_symmetric(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(SpdError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if !m.is_finite() {
        return Err(SpdError::NonFinite);
    }
    let asym = m.max_asymmetry();
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(SpdError::NotSymmetric {
            asymmetry: asym / scale,
        });
    }
    Ok(m.symmetrized())
}

/// Real symmetric matrix, not necessarily definite. Codomain of the matrix
/// logarithm and home of tangent vectors before vectorization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMatrix(Matrix);

impl SymmetricMatrix {
    /// Accepts `m` if it is symmetric within [`SYMMETRY_TOLERANCE`] relative
    /// to its largest entry, storing `(m + mᵀ)/2`.
    pub fn new(m: Matrix) -> Result<Self> {
        check_symmetric(&m).map(Self)
    }

    pub fn zeros(n: usize) -> Self {
        Self(Matrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.frobenius_norm()
    }

    pub fn scale(&self, factor: f64) -> SymmetricMatrix {
        SymmetricMatrix(self.0.scale(factor))
    }

    pub fn eig(&self) -> Result<SymEigen> {
        eig_sym(self)
    }

    /// `V·diag(f(λ))·Vᵀ`; errors if `f` is non-finite at any eigenvalue.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<SymmetricMatrix> {
        self.eig()?.map(f)
    }

    /// Matrix exponential; always SPD.
    pub fn exp(&self) -> Result<SpdMatrix> {
        let eig = self.eig()?;
        let mapped = eig.map(f64::exp)?;
        SpdMatrix::new(mapped.0)
    }
}

/// Eigendecomposition `M = V·diag(λ)·Vᵀ` with λ descending and the columns of
/// V orthonormal.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymEigen {
    /// Rebuilds `V·diag(f(λ))·Vᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<SymmetricMatrix> {
        let mapped: Vec<f64> = self
            .values
            .iter()
            .map(|&l| {
                let v = f(l);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(SpdError::DomainError { eigenvalue: l })
                }
            })
            .collect::<Result<_>>()?;
        Ok(SymmetricMatrix(reconstruct(&self.vectors, &mapped)))
    }
}

fn reconstruct(vectors: &Matrix, values: &[f64]) -> Matrix {
    let n = vectors.nrows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        let vi = vectors.row(i);
        for j in i..n {
            let vj = vectors.row(j);
            let mut s = 0.0;
            for k in 0..n {
                s += vi[k] * values[k] * vj[k];
            }
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    out
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Rotations sweep the strict upper triangle row by row in a fixed order, so
/// the result is bit-reproducible for a given input. Eigenvalues come back in
/// descending order with matching eigenvector columns.
pub fn eig_sym(m: &SymmetricMatrix) -> Result<SymEigen> {
    let n = m.dim();
    let mut a = m.0.clone();
    let mut v = Matrix::identity(n);
    let norm = a.frobenius_norm();

    let mut converged = false;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        // quadratic convergence: once below this, the next sweep is pure noise
        if off.sqrt() <= 1e-3 * f64::EPSILON * norm || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    a[(k, p)] = new_kp;
                    a[(p, k)] = new_kp;
                    a[(k, q)] = new_kq;
                    a[(q, k)] = new_kq;
                }
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(SpdError::NoConvergence {
            sweeps: MAX_JACOBI_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps index order among equal eigenvalues
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymEigen { values, vectors })
}

/// Symmetric positive-definite matrix; a point on the manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct SpdMatrix(Matrix);

impl TryFrom<Matrix> for SpdMatrix {
    type Error = SpdError;

    fn try_from(m: Matrix) -> Result<Self> {
        SpdMatrix::new(m)
    }
}

impl From<SpdMatrix> for Matrix {
    fn from(s: SpdMatrix) -> Matrix {
        s.0
    }
}

fn check_definite(values: &[f64]) -> Result<()> {
    let n = values.len();
    let max = values.first().copied().unwrap_or(0.0);
    let min = values.last().copied().unwrap_or(0.0);
    if !(max > 0.0) || !(min > n as f64 * f64::EPSILON * max) {
        return Err(SpdError::NotPositiveDefinite { min, max });
    }
    Ok(())
}

impl SpdMatrix {
    /// Symmetrizes `m` and verifies `λ_min > n·ε·λ_max`.
    pub fn new(m: Matrix) -> Result<Self> {
        let sym = SymmetricMatrix::new(m)?;
        if sym.dim() == 0 {
            return Err(SpdError::InvalidShape("empty matrix".into()));
        }
        let eig = eig_sym(&sym)?;
        check_definite(&eig.values)?;
        Ok(Self(sym.0))
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n))
    }

    /// Diagonal SPD matrix; errors on a non-positive entry.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(Matrix::from_diagonal(diag))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn as_symmetric(&self) -> SymmetricMatrix {
        SymmetricMatrix(self.0.clone())
    }

    pub fn eig(&self) -> Result<SymEigen> {
        eig_sym(&SymmetricMatrix(self.0.clone()))
    }

    /// Matrix function through the spectrum, `V·diag(f(λ))·Vᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<SymmetricMatrix> {
        spd_map(self, f)
    }

    pub fn log(&self) -> Result<SymmetricMatrix> {
        spd_map(self, f64::ln)
    }

    pub fn sqrt(&self) -> Result<SpdMatrix> {
        Ok(SpdMatrix(spd_map(self, f64::sqrt)?.0))
    }

    pub fn inv_sqrt(&self) -> Result<SpdMatrix> {
        Ok(SpdMatrix(spd_map(self, |l| 1.0 / l.sqrt())?.0))
    }

    pub fn inverse(&self) -> Result<SpdMatrix> {
        Ok(SpdMatrix(spd_map(self, |l| 1.0 / l)?.0))
    }

    /// `W·Σ·Wᵀ` for a square `W` of matching dimension. The result is
    /// re-validated, so a singular `W` surfaces as `NotPositiveDefinite`.
    pub fn congruence(&self, w: &Matrix) -> Result<SpdMatrix> {
        if w.nrows() != self.dim() || w.ncols() != self.dim() {
            return Err(SpdError::DimensionMismatch {
                expected: self.dim(),
                found: w.nrows(),
            });
        }
        SpdMatrix::new(w.matmul(&self.0).matmul(&w.transpose()).symmetrized())
    }

    /// `S·Σ·S` for a symmetric `S` (whitening when `S = R^{-1/2}`).
    pub fn sandwich(&self, s: &SpdMatrix) -> Result<SpdMatrix> {
        if s.dim() != self.dim() {
            return Err(SpdError::DimensionMismatch {
                expected: s.dim(),
                found: self.dim(),
            });
        }
        SpdMatrix::new(s.0.matmul(&self.0).matmul(&s.0).symmetrized())
    }

    /// Like [`sandwich`](Self::sandwich) but without the PD re-check, for
    /// callers that immediately take a matrix function of the result.
    pub(crate) fn sandwich_symmetric(&self, s: &SpdMatrix) -> Result<SymmetricMatrix> {
        if s.dim() != self.dim() {
            return Err(SpdError::DimensionMismatch {
                expected: s.dim(),
                found: self.dim(),
            });
        }
        Ok(SymmetricMatrix(
            s.0.matmul(&self.0).matmul(&s.0).symmetrized(),
        ))
    }

    pub(crate) fn from_trusted(m: Matrix) -> Self {
        Self(m)
    }
}

/// Applies a scalar function to the spectrum of an SPD matrix.
pub fn spd_map(sigma: &SpdMatrix, f: impl Fn(f64) -> f64) -> Result<SymmetricMatrix> {
    sigma.eig()?.map(f)
}

/// Trial data `X ∈ ℝ^{C×T}`: channels by samples (or frequency bins).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix(Matrix);

impl FeatureMatrix {
    /// Requires at least two channels and two columns, all finite.
    pub fn new(data: Matrix) -> Result<Self> {
        if data.nrows() < 2 || data.ncols() < 2 {
            return Err(SpdError::InvalidShape(format!(
                "feature matrix must be at least 2x2, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if !data.is_finite() {
            return Err(SpdError::NonFinite);
        }
        Ok(Self(data))
    }

    pub fn channels(&self) -> usize {
        self.0.nrows()
    }

    pub fn samples(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

/// Sample covariance `(1/(T−1))·X·Xᵀ`, optionally shrunk toward
/// `(tr S / C)·I`.
///
/// No mean is removed: band-magnitude features are not zero-mean, and the
/// estimator is applied to the trial as given.
pub fn scm(x: &FeatureMatrix, shrinkage: f64) -> Result<SpdMatrix> {
    if !(0.0..1.0).contains(&shrinkage) {
        return Err(SpdError::InvalidShrinkage(shrinkage));
    }
    let c = x.channels();
    let t = x.samples();
    let mut s = x.0.gram().scale(1.0 / (t as f64 - 1.0));
    if shrinkage > 0.0 {
        let target = s.trace() / c as f64;
        s = s.scale(1.0 - shrinkage);
        for i in 0..c {
            s[(i, i)] += shrinkage * target;
        }
    }
    SpdMatrix::new(s)
}

/// Affine-invariant Riemannian distance, `sqrt(Σ_c ln² λ_c)` over the
/// eigenvalues of `A^{-1/2} B A^{-1/2}`.
pub fn riemannian_distance(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    let w = whitened(a, b)?;
    let eig = eig_sym(&w)?;
    let mut acc = 0.0;
    for &l in &eig.values {
        if !(l > 0.0) {
            return Err(SpdError::DomainError { eigenvalue: l });
        }
        let ln = l.ln();
        acc += ln * ln;
    }
    Ok(acc.sqrt())
}

/// The same distance as the Frobenius norm of the matrix logarithm,
/// `‖log(A^{-1/2} B A^{-1/2})‖_F`.
pub fn riemannian_distance_log_frobenius(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    let w = whitened(a, b)?;
    Ok(w.map(f64::ln)?.frobenius_norm())
}

/// `A^{-1/2}·B·A^{-1/2}` or `B^{-1/2}·A·B^{-1/2}`, whichever whitens by the
/// better-conditioned argument. The two have reciprocal spectra, so every
/// `Σ log²λ` quantity is the same either way.
fn whitened(a: &SpdMatrix, b: &SpdMatrix) -> Result<SymmetricMatrix> {
    if a.dim() != b.dim() {
        return Err(SpdError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (ea, eb) = (a.eig()?, b.eig()?);
    let cond = |e: &SymEigen| e.values[0] / e.values[e.values.len() - 1];
    let (whitener, other) = if cond(&eb) < cond(&ea) { (eb, a) } else { (ea, b) };
    let inv_sqrt = SpdMatrix(whitener.map(|l| 1.0 / l.sqrt())?.0);
    other.sandwich_symmetric(&inv_sqrt)
}
