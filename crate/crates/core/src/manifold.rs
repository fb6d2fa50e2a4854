//! Operations on the SPD manifold built on top of [`crate::spd`]:
//! the Fréchet (Karcher) mean, geodesics, per-subject recentering and the
//! whitened tangent-space map with its √2-weighted vectorization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::spd::{SpdError, SpdMatrix, SymmetricMatrix};

/// Step halvings allowed per iteration when the dispersion increases.
const MAX_HALVINGS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManifoldError {
    #[error(transparent)]
    Spd(#[from] SpdError),
    #[error("empty matrix list")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid Fréchet configuration: {0}")]
    InvalidConfig(String),
    #[error("Fréchet mean did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        best: Box<SpdMatrix>,
        residual: f64,
        iterations: usize,
    },
    #[error("tangent vector of length {len} does not match base dimension {base_dim}")]
    BadTangentLength { len: usize, base_dim: usize },
}

pub type Result<T> = std::result::Result<T, ManifoldError>;

/// Gradient-descent parameters for the Fréchet mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrechetConfig {
    /// Initial step along the mean whitened log, in (0, 2].
    pub step: f64,
    /// Stop once the Frobenius norm of the mean tangent falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FrechetConfig {
    fn default() -> Self {
        Self {
            step: 1.0,
            tol: 1e-8,
            max_iter: 50,
        }
    }
}

impl FrechetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step <= 2.0) {
            return Err(ManifoldError::InvalidConfig(format!(
                "step {} outside (0, 2]",
                self.step
            )));
        }
        if !(self.tol > 0.0) {
            return Err(ManifoldError::InvalidConfig(format!(
                "tol {} must be positive",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(ManifoldError::InvalidConfig("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Converged mean together with its diagnostics.
#[derive(Debug, Clone)]
pub struct FrechetOutcome {
    pub mean: SpdMatrix,
    pub iterations: usize,
    /// ‖(1/I)·Σᵢ log(G^{-1/2} Σᵢ G^{-1/2})‖_F at the returned point.
    pub residual: f64,
}

fn check_dims(list: &[SpdMatrix]) -> Result<usize> {
    let first = list.first().ok_or(ManifoldError::EmptyInput)?;
    let n = first.dim();
    for m in list {
        if m.dim() != n {
            return Err(ManifoldError::DimensionMismatch {
                expected: n,
                found: m.dim(),
            });
        }
    }
    Ok(n)
}

/// `(G^{1/2}, G^{-1/2})` from a single eigendecomposition.
fn sqrt_pair(g: &SpdMatrix) -> Result<(SpdMatrix, SpdMatrix)> {
    let eig = g.eig()?;
    let sqrt = eig.map(f64::sqrt)?.into_matrix();
    let inv_sqrt = eig.map(|l| 1.0 / l.sqrt())?.into_matrix();
    Ok((SpdMatrix::from_trusted(sqrt), SpdMatrix::from_trusted(inv_sqrt)))
}

struct Evaluation {
    sqrt: SpdMatrix,
    mean_log: SymmetricMatrix,
    dispersion: f64,
}

/// Whitened logs at `g`, reduced in index order so the result does not
/// depend on how rayon schedules the per-matrix work.
fn evaluate(g: &SpdMatrix, list: &[SpdMatrix]) -> Result<Evaluation> {
    let (sqrt, inv_sqrt) = sqrt_pair(g)?;
    let logs: Vec<SymmetricMatrix> = list
        .par_iter()
        .map(|s| -> Result<SymmetricMatrix> { Ok(s.sandwich_symmetric(&inv_sqrt)?.map(f64::ln)?) })
        .collect::<Result<_>>()?;
    let n = g.dim();
    let mut acc = Matrix::zeros(n, n);
    let mut dispersion = 0.0;
    for l in &logs {
        acc.add_scaled(l.matrix(), 1.0);
        let f = l.frobenius_norm();
        dispersion += f * f;
    }
    let mean_log = SymmetricMatrix::new(acc.scale(1.0 / list.len() as f64))?;
    Ok(Evaluation {
        sqrt,
        mean_log,
        dispersion,
    })
}

fn arithmetic_mean(list: &[SpdMatrix]) -> Result<SpdMatrix> {
    let n = list[0].dim();
    let mut acc = Matrix::zeros(n, n);
    for m in list {
        acc.add_scaled(m.matrix(), 1.0);
    }
    if list.len() > 1 {
        acc = acc.scale(1.0 / list.len() as f64);
    }
    Ok(SpdMatrix::new(acc)?)
}

/// `G^{1/2}·exp(S)·G^{1/2}`.
fn exp_at(sqrt: &SpdMatrix, tangent: &SymmetricMatrix) -> Result<SpdMatrix> {
    let e = tangent.exp()?;
    Ok(e.sandwich(sqrt)?)
}

/// Riemannian (Fréchet/Karcher) mean, erroring with the best iterate if the
/// iteration budget runs out.
pub fn frechet_mean(list: &[SpdMatrix], cfg: &FrechetConfig) -> Result<SpdMatrix> {
    frechet_mean_detailed(list, cfg).map(|o| o.mean)
}

/// Fixed-point gradient descent `G ← G^{1/2}·exp(step·T)·G^{1/2}`, where `T`
/// is the mean whitened log at `G`, starting from the arithmetic mean.
///
/// The step is halved (up to ten times) whenever the candidate increases the
/// summed squared distance; after the last halving the candidate is taken
/// regardless, since by then the change is below rounding noise.
pub fn frechet_mean_detailed(list: &[SpdMatrix], cfg: &FrechetConfig) -> Result<FrechetOutcome> {
    cfg.validate()?;
    check_dims(list)?;

    let mut g = arithmetic_mean(list)?;
    let mut eval = evaluate(&g, list)?;
    let mut residual = eval.mean_log.frobenius_norm();
    let mut best = (g.clone(), residual);

    let mut iterations = 0;
    while residual >= cfg.tol && iterations < cfg.max_iter {
        iterations += 1;
        let mut step = cfg.step;
        let mut halvings = 0;
        let (cand, cand_eval) = loop {
            let cand = exp_at(&eval.sqrt, &eval.mean_log.scale(step))?;
            let cand_eval = evaluate(&cand, list)?;
            if cand_eval.dispersion <= eval.dispersion * (1.0 + 1e-12) || halvings == MAX_HALVINGS
            {
                break (cand, cand_eval);
            }
            step *= 0.5;
            halvings += 1;
        };
        g = cand;
        eval = cand_eval;
        residual = eval.mean_log.frobenius_norm();
        if residual < best.1 {
            best = (g.clone(), residual);
        }
    }

    if residual < cfg.tol {
        Ok(FrechetOutcome {
            mean: g,
            iterations,
            residual,
        })
    } else {
        Err(ManifoldError::NoConvergence {
            best: Box::new(best.0),
            residual: best.1,
            iterations,
        })
    }
}

/// Sum of squared Riemannian distances from `point` to every matrix.
pub fn dispersion(point: &SpdMatrix, list: &[SpdMatrix]) -> Result<f64> {
    check_dims(list)?;
    Ok(evaluate(point, list)?.dispersion)
}

/// Point at parameter `t` on the geodesic from `a` (t = 0) to `b` (t = 1):
/// `A^{1/2}·(A^{-1/2} B A^{-1/2})^t·A^{1/2}`.
pub fn geodesic(a: &SpdMatrix, b: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    if a.dim() != b.dim() {
        return Err(ManifoldError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (sqrt, inv_sqrt) = sqrt_pair(a)?;
    let inner = b.sandwich_symmetric(&inv_sqrt)?.map(|l| l.powf(t))?;
    Ok(SpdMatrix::new(inner.into_matrix())?.sandwich(&sqrt)?)
}

/// Congruence `R^{-1/2}·Σᵢ·R^{-1/2}` applied to every matrix.
pub fn recenter(list: &[SpdMatrix], reference: &SpdMatrix) -> Result<Vec<SpdMatrix>> {
    for m in list {
        if m.dim() != reference.dim() {
            return Err(ManifoldError::DimensionMismatch {
                expected: reference.dim(),
                found: m.dim(),
            });
        }
    }
    let inv_sqrt = reference.inv_sqrt()?;
    list.par_iter()
        .map(|m| Ok(m.sandwich(&inv_sqrt)?))
        .collect()
}

/// Whitened logarithmic map `log(B^{-1/2}·Σ·B^{-1/2})`. Its Frobenius norm is
/// the Riemannian distance between `sigma` and `base`.
pub fn tangent_map(sigma: &SpdMatrix, base: &SpdMatrix) -> Result<SymmetricMatrix> {
    TangentSpace::new(base)?.log(sigma)
}

/// Tangent space anchored at a fixed base point, with the base's square root
/// and inverse square root cached.
#[derive(Debug, Clone)]
pub struct TangentSpace {
    base: SpdMatrix,
    sqrt: SpdMatrix,
    inv_sqrt: SpdMatrix,
}

impl TangentSpace {
    pub fn new(base: &SpdMatrix) -> Result<Self> {
        let (sqrt, inv_sqrt) = sqrt_pair(base)?;
        Ok(Self {
            base: base.clone(),
            sqrt,
            inv_sqrt,
        })
    }

    pub fn base(&self) -> &SpdMatrix {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn log(&self, sigma: &SpdMatrix) -> Result<SymmetricMatrix> {
        if sigma.dim() != self.dim() {
            return Err(ManifoldError::DimensionMismatch {
                expected: self.dim(),
                found: sigma.dim(),
            });
        }
        Ok(sigma.sandwich_symmetric(&self.inv_sqrt)?.map(f64::ln)?)
    }

    /// Inverse of [`log`](Self::log): `B^{1/2}·exp(S)·B^{1/2}`.
    pub fn exp(&self, tangent: &SymmetricMatrix) -> Result<SpdMatrix> {
        if tangent.dim() != self.dim() {
            return Err(ManifoldError::DimensionMismatch {
                expected: self.dim(),
                found: tangent.dim(),
            });
        }
        exp_at(&self.sqrt, tangent)
    }

    pub fn project(&self, sigma: &SpdMatrix) -> Result<TangentVector> {
        Ok(vectorize(&self.log(sigma)?))
    }

    /// Projects a batch, preserving input order.
    pub fn project_all(&self, list: &[SpdMatrix]) -> Result<Vec<TangentVector>> {
        list.par_iter().map(|s| self.project(s)).collect()
    }
}

/// Upper-triangular flattening of a symmetric matrix, off-diagonal entries
/// weighted by √2 so the Euclidean norm equals the Frobenius norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    base_dim: usize,
    data: Vec<f64>,
}

/// `n(n+1)/2`.
pub fn tangent_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

impl TangentVector {
    pub fn new(base_dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != tangent_dim(base_dim) {
            return Err(ManifoldError::BadTangentLength {
                len: data.len(),
                base_dim,
            });
        }
        Ok(Self { base_dim, data })
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub fn vectorize(s: &SymmetricMatrix) -> TangentVector {
    let n = s.dim();
    let m = s.matrix();
    let mut data = Vec::with_capacity(tangent_dim(n));
    for i in 0..n {
        data.push(m[(i, i)]);
        for j in (i + 1)..n {
            data.push(std::f64::consts::SQRT_2 * m[(i, j)]);
        }
    }
    TangentVector { base_dim: n, data }
}

pub fn unvectorize(v: &TangentVector) -> SymmetricMatrix {
    let n = v.base_dim;
    let mut m = Matrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        m[(i, i)] = v.data[k];
        k += 1;
        for j in (i + 1)..n {
            let x = v.data[k] / std::f64::consts::SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    SymmetricMatrix::new(m).expect("constructed symmetric")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::riemannian_distance;

    #[test]
    fn mean_of_single_matrix_is_exact() {
        let s = SpdMatrix::new(Matrix::from_rows(&[[2.0, 0.4], [0.4, 1.5]])).unwrap();
        let m = frechet_mean(std::slice::from_ref(&s), &FrechetConfig::default()).unwrap();
        assert_eq!(m, s);
    }

    #[test]
    fn mean_of_commuting_pair() {
        let a = SpdMatrix::from_diagonal(&[1.0, 4.0]).unwrap();
        let b = SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap();
        let m = frechet_mean(&[a, b], &FrechetConfig::default()).unwrap();
        let diff = m.matrix().sub(&Matrix::from_diagonal(&[2.0, 2.0])).max_abs();
        assert!(diff < 1e-12, "diff {diff}");
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        let cfg = FrechetConfig::default();
        assert_eq!(frechet_mean(&[], &cfg), Err(ManifoldError::EmptyInput));
        let r = frechet_mean(&[SpdMatrix::identity(2), SpdMatrix::identity(3)], &cfg);
        assert!(matches!(r, Err(ManifoldError::DimensionMismatch { .. })));
    }

    #[test]
    fn config_validation() {
        let bad = [
            FrechetConfig { step: 0.0, ..Default::default() },
            FrechetConfig { step: 2.5, ..Default::default() },
            FrechetConfig { tol: 0.0, ..Default::default() },
            FrechetConfig { max_iter: 0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        assert!(FrechetConfig::default().validate().is_ok());
    }

    #[test]
    fn no_convergence_reports_best_iterate() {
        let a = SpdMatrix::from_diagonal(&[1.0, 100.0]).unwrap();
        let b = SpdMatrix::new(Matrix::from_rows(&[[50.0, 10.0], [10.0, 3.0]])).unwrap();
        let c = SpdMatrix::from_diagonal(&[0.01, 2.0]).unwrap();
        let cfg = FrechetConfig { max_iter: 1, tol: 1e-14, ..Default::default() };
        match frechet_mean(&[a, b, c], &cfg) {
            Err(ManifoldError::NoConvergence { residual, iterations, .. }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 0.0);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn recenter_by_identity_is_noop() {
        let s = SpdMatrix::new(Matrix::from_rows(&[[2.0, 0.4], [0.4, 1.5]])).unwrap();
        let out = recenter(std::slice::from_ref(&s), &SpdMatrix::identity(2)).unwrap();
        assert_eq!(out[0], s);
    }

    #[test]
    fn recenter_single_by_itself_is_identity() {
        let s = SpdMatrix::new(Matrix::from_rows(&[[2.0, 0.4], [0.4, 1.5]])).unwrap();
        let out = recenter(std::slice::from_ref(&s), &s).unwrap();
        assert!(out[0].matrix().sub(&Matrix::identity(2)).max_abs() < 1e-9);
    }

    #[test]
    fn tangent_map_basics() {
        let base = SpdMatrix::new(Matrix::from_rows(&[[2.0, 0.4], [0.4, 1.5]])).unwrap();
        let z = tangent_map(&base, &base).unwrap();
        assert!(z.matrix().max_abs() < 1e-14);

        let s = SpdMatrix::from_diagonal(&[std::f64::consts::E, 1.0]).unwrap();
        let t = tangent_map(&s, &SpdMatrix::identity(2)).unwrap();
        assert!(t.matrix().sub(&Matrix::from_diagonal(&[1.0, 0.0])).max_abs() < 1e-15);

        let d = riemannian_distance(&s, &base).unwrap();
        assert!((tangent_map(&s, &base).unwrap().frobenius_norm() - d).abs() < 1e-12);
    }

    #[test]
    fn vectorize_two_by_two() {
        let s = SymmetricMatrix::new(Matrix::from_rows(&[[1.0, 2.0], [2.0, 3.0]])).unwrap();
        let v = vectorize(&s);
        assert_eq!(v.as_slice(), &[1.0, 2.0 * std::f64::consts::SQRT_2, 3.0]);
        assert_eq!(unvectorize(&v), s);
    }

    #[test]
    fn tangent_dimension_for_23_channels() {
        assert_eq!(tangent_dim(23), 276);
        assert_eq!(vectorize(&SymmetricMatrix::zeros(23)).len(), 276);
        assert!(TangentVector::new(3, vec![0.0; 5]).is_err());
    }

    #[test]
    fn geodesic_endpoints() {
        let a = SpdMatrix::from_diagonal(&[1.0, 4.0]).unwrap();
        let b = SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap();
        let mid = geodesic(&a, &b, 0.5).unwrap();
        assert!(mid.matrix().sub(&Matrix::from_diagonal(&[2.0, 2.0])).max_abs() < 1e-12);
        let end = geodesic(&a, &b, 1.0).unwrap();
        assert!(end.matrix().sub(b.matrix()).max_abs() < 1e-12);
    }
}
