//! Spectral clustering of subjects on the SPD manifold.
//!
//! Subjects are represented by their mean covariance. A Gaussian kernel over
//! pairwise Riemannian distances (zero diagonal) gives the affinity `A`; the
//! number of clusters is the count of eigenvalues of `D^{-1/2} A D^{-1/2}`
//! within `tau` of one, and k-means on the (row-normalized) leading
//! eigenvectors yields the assignment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::spd::{eig_sym, riemannian_distance, SpdError, SpdMatrix, SymmetricMatrix};

pub const DEFAULT_SIGMA: f64 = 0.5;
pub const DEFAULT_TAU: f64 = 0.05;

const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error(transparent)]
    Spd(#[from] SpdError),
    #[error("need at least 2 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("sigma must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("tau must lie in (0, 1), got {0}")]
    InvalidTau(f64),
    #[error("subject {index} has zero affinity to every other subject")]
    IsolatedSubject { index: usize },
    #[error("cannot embed {n} subjects into {k} clusters")]
    DegenerateEmbedding { k: usize, n: usize },
}

pub type Result<T> = std::result::Result<T, ClusterError>;

/// Gaussian affinity between subject means, zero on the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityMatrix {
    sigma: f64,
    data: Matrix,
}

impl AffinityMatrix {
    /// Builds an affinity directly from entries, e.g. for hand-made graphs.
    /// Entries must be symmetric, within [0, 1], with zero diagonal.
    pub fn from_matrix(data: Matrix, sigma: f64) -> Result<Self> {
        let n = data.nrows();
        if !data.is_square() {
            return Err(SpdError::NotSquare { rows: n, cols: data.ncols() }.into());
        }
        if data.max_asymmetry() != 0.0 {
            return Err(SpdError::NotSymmetric { asymmetry: data.max_asymmetry() }.into());
        }
        let in_range = data.as_slice().iter().all(|&a| (0.0..=1.0).contains(&a));
        if !in_range || data.diagonal().iter().any(|&d| d != 0.0) {
            return Err(SpdError::InvalidShape(
                "affinity entries must lie in [0, 1] with zero diagonal".into(),
            )
            .into());
        }
        Ok(Self { sigma, data })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn n_subjects(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_subjects())
            .map(|i| self.data.row(i).iter().sum())
            .collect()
    }

    fn submatrix(&self, keep: &[usize]) -> AffinityMatrix {
        let data = Matrix::from_fn(keep.len(), keep.len(), |i, j| self.data[(keep[i], keep[j])]);
        AffinityMatrix { sigma: self.sigma, data }
    }
}

/// Pairwise Riemannian distances; the upper triangle is computed in parallel
/// and mirrored.
pub fn pairwise_distances(means: &[SpdMatrix]) -> Result<Matrix> {
    let n = means.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let dists: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| riemannian_distance(&means[i], &means[j]))
        .collect::<std::result::Result<_, _>>()?;
    let mut d = Matrix::zeros(n, n);
    for (&(i, j), &v) in pairs.iter().zip(&dists) {
        d[(i, j)] = v;
        d[(j, i)] = v;
    }
    Ok(d)
}

/// `A_ij = exp(−δ²/σ²)` off the diagonal, zero on it.
pub fn affinity_from_distances(distances: &Matrix, sigma: f64) -> Result<AffinityMatrix> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(ClusterError::InvalidSigma(sigma));
    }
    let n = distances.nrows();
    let s2 = sigma * sigma;
    let data = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let d = distances[(i, j)];
            (-(d * d) / s2).exp()
        }
    });
    Ok(AffinityMatrix { sigma, data })
}

pub fn affinity(means: &[SpdMatrix], sigma: f64) -> Result<AffinityMatrix> {
    if means.len() < 2 {
        return Err(ClusterError::TooFewSubjects(means.len()));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(ClusterError::InvalidSigma(sigma));
    }
    let n = means[0].dim();
    if let Some(bad) = means.iter().find(|m| m.dim() != n) {
        return Err(SpdError::DimensionMismatch { expected: n, found: bad.dim() }.into());
    }
    affinity_from_distances(&pairwise_distances(means)?, sigma)
}

/// Normalized affinity `D^{-1/2} A D^{-1/2}` with `D` the row sums.
pub fn normalize(a: &AffinityMatrix) -> Result<SymmetricMatrix> {
    let sums = a.row_sums();
    if let Some(index) = sums.iter().position(|&d| d <= 0.0) {
        return Err(ClusterError::IsolatedSubject { index });
    }
    let inv: Vec<f64> = sums.iter().map(|d| 1.0 / d.sqrt()).collect();
    let n = a.n_subjects();
    let m = Matrix::from_fn(n, n, |i, j| inv[i] * a.data[(i, j)] * inv[j]);
    Ok(SymmetricMatrix::new(m)?)
}

/// Number of eigenvalues `≥ 1 − tau`, clamped to `[1, N]`.
pub fn estimate_k(eigenvalues: &[f64], tau: f64) -> usize {
    let count = eigenvalues.iter().filter(|&&l| l >= 1.0 - tau).count();
    count.clamp(1, eigenvalues.len().max(1))
}

/// Spectral clustering parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub sigma: f64,
    pub tau: f64,
    /// Fixed cluster count instead of the eigenvalue estimate.
    pub k_override: Option<usize>,
    pub seed: u64,
    /// Scale embedding rows to unit length before k-means.
    pub row_normalize: bool,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            sigma: DEFAULT_SIGMA,
            tau: DEFAULT_TAU,
            k_override: None,
            seed: 42,
            row_normalize: true,
        }
    }
}

impl SpectralConfig {
    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(ClusterError::InvalidSigma(self.sigma));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(ClusterError::InvalidTau(self.tau));
        }
        Ok(())
    }
}

/// Result of spectral clustering over N subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    #[serde(rename = "K")]
    pub k: usize,
    pub sigma: f64,
    pub tau: f64,
    pub seed: u64,
    /// Cluster index per subject, labelled in order of first appearance.
    pub assignments: Vec<usize>,
    /// Spectrum of the normalized affinity, descending.
    pub eigenvalues: Vec<f64>,
    /// Subjects with zero affinity to everyone, each given its own cluster.
    #[serde(default)]
    pub isolated: Vec<usize>,
    /// Row-per-subject spectral embedding fed to k-means.
    #[serde(skip)]
    pub embedding: Matrix,
}

impl ClusterModel {
    pub fn n_subjects(&self) -> usize {
        self.assignments.len()
    }

    /// Subjects assigned to `cluster`, in index order.
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| (c == cluster).then_some(i))
            .collect()
    }

    pub fn is_isolated(&self, subject: usize) -> bool {
        self.isolated.contains(&subject)
    }
}

/// Clusters subjects from their means. Errors with `IsolatedSubject` if a
/// subject's affinity row is all zero; see
/// [`spectral_cluster_with_singletons`] for the tolerant variant.
pub fn spectral_cluster(means: &[SpdMatrix], cfg: &SpectralConfig) -> Result<ClusterModel> {
    cfg.validate()?;
    let a = affinity(means, cfg.sigma)?;
    cluster_affinity(&a, cfg)
}

/// As [`spectral_cluster`], but subjects isolated by a zero affinity row are
/// set aside as singleton clusters and the rest are clustered normally.
pub fn spectral_cluster_with_singletons(
    means: &[SpdMatrix],
    cfg: &SpectralConfig,
) -> Result<ClusterModel> {
    cfg.validate()?;
    let a = affinity(means, cfg.sigma)?;
    let sums = a.row_sums();
    let isolated: Vec<usize> = (0..sums.len()).filter(|&i| sums[i] <= 0.0).collect();
    if isolated.is_empty() {
        return cluster_affinity(&a, cfg);
    }
    let core: Vec<usize> = (0..sums.len()).filter(|&i| sums[i] > 0.0).collect();
    let n = means.len();

    let mut raw = vec![0usize; n];
    let (core_k, eigenvalues, core_embedding) = if core.len() >= 2 {
        // removing isolated subjects leaves the remaining row sums unchanged
        let sub = cluster_affinity(&a.submatrix(&core), cfg)?;
        for (pos, &i) in core.iter().enumerate() {
            raw[i] = sub.assignments[pos];
        }
        (sub.k, sub.eigenvalues, Some(sub.embedding))
    } else {
        (core.len(), Vec::new(), None)
    };
    for (offset, &i) in isolated.iter().enumerate() {
        raw[i] = core_k + offset;
    }

    let cols = core_embedding.as_ref().map_or(0, |e| e.ncols());
    let mut embedding = Matrix::zeros(n, cols);
    if let Some(e) = core_embedding {
        for (pos, &i) in core.iter().enumerate() {
            embedding.row_mut(i).copy_from_slice(e.row(pos));
        }
    }

    Ok(ClusterModel {
        k: core_k + isolated.len(),
        sigma: cfg.sigma,
        tau: cfg.tau,
        seed: cfg.seed,
        assignments: relabel_by_first_appearance(&raw),
        eigenvalues,
        isolated,
        embedding,
    })
}

fn cluster_affinity(a: &AffinityMatrix, cfg: &SpectralConfig) -> Result<ClusterModel> {
    let n = a.n_subjects();
    if n < 2 {
        return Err(ClusterError::TooFewSubjects(n));
    }
    let normalized = normalize(a)?;
    let eig = eig_sym(&normalized)?;
    let k = cfg.k_override.unwrap_or_else(|| estimate_k(&eig.values, cfg.tau));
    if k == 0 || k > n {
        return Err(ClusterError::DegenerateEmbedding { k, n });
    }

    let mut u = Matrix::from_fn(n, k, |i, j| eig.vectors[(i, j)]);
    fix_column_signs(&mut u);
    if cfg.row_normalize {
        for i in 0..n {
            let row = u.row_mut(i);
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|x| *x /= norm);
            }
        }
    }

    let km = kmeans(&u, k, cfg.seed);
    Ok(ClusterModel {
        k,
        sigma: a.sigma,
        tau: cfg.tau,
        seed: cfg.seed,
        assignments: relabel_by_first_appearance(&km.labels),
        eigenvalues: eig.values,
        isolated: Vec::new(),
        embedding: u,
    })
}

/// Flips each column so its largest-magnitude entry (first on ties) is
/// positive.
fn fix_column_signs(u: &mut Matrix) {
    for j in 0..u.ncols() {
        let mut pivot = 0.0_f64;
        for i in 0..u.nrows() {
            if u[(i, j)].abs() > pivot.abs() {
                pivot = u[(i, j)];
            }
        }
        if pivot < 0.0 {
            for i in 0..u.nrows() {
                u[(i, j)] = -u[(i, j)];
            }
        }
    }
}

fn relabel_by_first_appearance(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<(usize, usize)> = Vec::new();
    labels
        .iter()
        .map(|&l| match map.iter().find(|(from, _)| *from == l) {
            Some(&(_, to)) => to,
            None => {
                let to = map.len();
                map.push((l, to));
                to
            }
        })
        .collect()
}

/// Outcome of the best k-means restart.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centers: Matrix,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means on the rows of `points`: k-means++ seeding, at most 100 Lloyd
/// iterations, 10 restarts keeping the lowest inertia (earliest restart on
/// ties). Each restart draws from its own seeded stream, so running restarts
/// in parallel does not change the result.
///
/// Panics if `k == 0` or `k > points.nrows()`.
pub fn kmeans(points: &Matrix, k: usize, seed: u64) -> KMeans {
    assert!(k >= 1 && k <= points.nrows(), "k must lie in [1, n]");
    let runs: Vec<KMeans> = (0..KMEANS_RESTARTS as u64)
        .into_par_iter()
        .map(|r| {
            let stream = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(r);
            kmeans_single(points, k, &mut ChaCha8Rng::seed_from_u64(stream))
        })
        .collect();
    runs.into_iter()
        .reduce(|best, run| if run.inertia < best.inertia { run } else { best })
        .expect("at least one restart")
}

fn kmeans_plus_plus(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), points.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            // rounding can walk off the end onto a zero-weight point
            if d2[pick] == 0.0 {
                pick = (0..n).rev().find(|&i| d2[i] > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, w) in d2.iter_mut().enumerate() {
            *w = w.min(sq_dist(points.row(i), points.row(next)));
        }
    }
    chosen
}

fn kmeans_single(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> KMeans {
    let n = points.nrows();
    let dim = points.ncols();
    let seeds = kmeans_plus_plus(points, k, rng);
    let mut centers = Matrix::from_fn(k, dim, |c, j| points[(seeds[c], j)]);
    let mut labels = vec![usize::MAX; n];

    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        let mut dist = vec![0.0; n];
        for i in 0..n {
            let mut best = (0, f64::INFINITY);
            for c in 0..k {
                let d = sq_dist(points.row(i), centers.row(c));
                if d < best.1 {
                    best = (c, d);
                }
            }
            if labels[i] != best.0 {
                labels[i] = best.0;
                changed = true;
            }
            dist[i] = best.1;
        }

        // re-seed empty clusters with the worst-fitting point of a
        // cluster that can spare one
        let mut sizes = vec![0usize; k];
        labels.iter().for_each(|&l| sizes[l] += 1);
        for c in 0..k {
            if sizes[c] > 0 {
                continue;
            }
            let donor = (0..n)
                .filter(|&i| sizes[labels[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                .expect("k <= n guarantees a donor");
            sizes[labels[donor]] -= 1;
            sizes[c] = 1;
            labels[donor] = c;
            dist[donor] = 0.0;
            changed = true;
        }

        let mut sums = Matrix::zeros(k, dim);
        for i in 0..n {
            let row = points.row(i);
            for (s, &x) in sums.row_mut(labels[i]).iter_mut().zip(row) {
                *s += x;
            }
        }
        for c in 0..k {
            let inv = 1.0 / sizes[c] as f64;
            for (dst, &s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                *dst = s * inv;
            }
        }
        if !changed {
            break;
        }
    }

    let inertia = (0..n)
        .map(|i| sq_dist(points.row(i), centers.row(labels[i])))
        .sum();
    KMeans {
        labels,
        centers,
        inertia,
    }
}

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand Index between two labelings of the same items.
///
/// Returns 1.0 when the index is undefined because both partitions are
/// trivial in the same way (all in one cluster, or all singletons).
///
/// Panics if the labelings differ in length.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let index: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_a: f64 = table.iter().map(|r| choose2(r.iter().sum())).sum();
    let sum_b: f64 = (0..kb)
        .map(|j| choose2(table.iter().map(|r| r[j]).sum()))
        .sum();
    let total = choose2(n);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum(a: &AffinityMatrix) -> Vec<f64> {
        eig_sym(&normalize(a).unwrap()).unwrap().values
    }

    #[test]
    fn identical_pair_affinity() {
        let m = SpdMatrix::identity(3);
        let a = affinity(&[m.clone(), m], DEFAULT_SIGMA).unwrap();
        assert_eq!(a.matrix()[(0, 1)], 1.0);
        assert_eq!(a.matrix()[(0, 0)], 0.0);
        assert_eq!(a.matrix()[(1, 1)], 0.0);
    }

    #[test]
    fn affinity_at_distance_sigma() {
        // δ(I, diag(e^a, 1)) = a
        let sigma: f64 = 0.5;
        let b = SpdMatrix::from_diagonal(&[sigma.exp(), 1.0]).unwrap();
        let a = affinity(&[SpdMatrix::identity(2), b], sigma).unwrap();
        assert!((a.matrix()[(0, 1)] - (-1.0f64).exp()).abs() < 1e-14);
        assert!((a.matrix()[(0, 1)] - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn affinity_errors() {
        let i2 = SpdMatrix::identity(2);
        assert!(matches!(
            affinity(&[i2.clone(), SpdMatrix::identity(3)], 0.5),
            Err(ClusterError::Spd(SpdError::DimensionMismatch { .. }))
        ));
        assert!(matches!(
            affinity(&[i2.clone(), i2.clone()], 0.0),
            Err(ClusterError::InvalidSigma(_))
        ));
        assert!(matches!(affinity(&[i2], 0.5), Err(ClusterError::TooFewSubjects(1))));
    }

    #[test]
    fn two_node_normalization() {
        let a = AffinityMatrix::from_matrix(Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]), 0.5)
            .unwrap();
        let n = normalize(&a).unwrap();
        assert_eq!(n.matrix(), a.matrix());
        let vals = spectrum(&a);
        assert!((vals[0] - 1.0).abs() < 1e-15 && (vals[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn isolated_subject_detected() {
        let a = AffinityMatrix::from_matrix(
            Matrix::from_rows(&[[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
            0.5,
        )
        .unwrap();
        assert_eq!(normalize(&a), Err(ClusterError::IsolatedSubject { index: 2 }));
    }

    #[test]
    fn uniform_affinity_has_one_unit_eigenvalue() {
        let n = 6;
        let m = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 0.7 });
        let vals = spectrum(&AffinityMatrix::from_matrix(m, 0.5).unwrap());
        assert_eq!(vals.iter().filter(|&&l| (l - 1.0).abs() < 1e-12).count(), 1);
        assert_eq!(estimate_k(&vals, DEFAULT_TAU), 1);
    }

    #[test]
    fn estimate_k_threshold() {
        assert_eq!(estimate_k(&[1.0, 0.99, 0.2, 0.1], 0.05), 2);
        assert_eq!(estimate_k(&[0.5, 0.2], 0.05), 1);
        assert_eq!(estimate_k(&[1.0, 1.0], 0.05), 2);
    }

    #[test]
    fn identical_means_form_one_cluster() {
        let m = SpdMatrix::new(Matrix::from_rows(&[[2.0, 0.1], [0.1, 1.0]])).unwrap();
        let model = spectral_cluster(&vec![m; 5], &SpectralConfig::default()).unwrap();
        assert_eq!(model.k, 1);
        assert_eq!(model.assignments, vec![0; 5]);
    }

    #[test]
    fn two_subjects_boundary() {
        let a = SpdMatrix::identity(2);
        let b = SpdMatrix::from_diagonal(&[1.3, 0.8]).unwrap();
        let model = spectral_cluster(&[a, b], &SpectralConfig::default()).unwrap();
        assert!(model.k == 1 || model.k == 2);
        assert_eq!(model.assignments.len(), 2);
        assert!(model.assignments.iter().all(|&c| c < model.k));
    }

    #[test]
    fn k_override_too_large() {
        let m = SpdMatrix::identity(2);
        let cfg = SpectralConfig { k_override: Some(3), ..Default::default() };
        assert_eq!(
            spectral_cluster(&[m.clone(), m], &cfg),
            Err(ClusterError::DegenerateEmbedding { k: 3, n: 2 })
        );
    }

    #[test]
    fn k_override_on_identical_points_keeps_clusters_nonempty() {
        let m = SpdMatrix::identity(2);
        let cfg = SpectralConfig { k_override: Some(2), ..Default::default() };
        let model = spectral_cluster(&vec![m; 4], &cfg).unwrap();
        assert_eq!(model.k, 2);
        for c in 0..2 {
            assert!(!model.members(c).is_empty());
        }
    }

    #[test]
    fn singleton_fallback() {
        let near = SpdMatrix::identity(2);
        let near2 = SpdMatrix::from_diagonal(&[1.1, 0.9]).unwrap();
        // δ ≈ 14.1, so exp(−δ²/σ²) = exp(−800) underflows to exactly zero
        let far = SpdMatrix::from_diagonal(&[10f64.exp(), 10f64.exp()]).unwrap();
        let means = [near.clone(), far, near2];
        let cfg = SpectralConfig::default();
        assert!(matches!(
            spectral_cluster(&means, &cfg),
            Err(ClusterError::IsolatedSubject { index: 1 })
        ));
        let model = spectral_cluster_with_singletons(&means, &cfg).unwrap();
        assert_eq!(model.isolated, vec![1]);
        assert_eq!(model.k, 2);
        assert_eq!(model.assignments, vec![0, 1, 0]);
    }

    #[test]
    fn invalid_tau() {
        let m = SpdMatrix::identity(2);
        let cfg = SpectralConfig { tau: 1.0, ..Default::default() };
        assert_eq!(spectral_cluster(&[m.clone(), m], &cfg), Err(ClusterError::InvalidTau(1.0)));
    }

    #[test]
    fn ari_known_values() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 0, 0], &[0, 0, 0]), 1.0);
        // sklearn: adjusted_rand_score([0,0,1,1],[0,0,1,2]) = 0.5714285714285715
        let v = adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 1, 2]);
        assert!((v - 0.5714285714285715).abs() < 1e-12, "{v}");
        // sklearn: adjusted_rand_score([0,0,1,1],[0,1,0,1]) = -0.5
        assert!((adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn kmeans_separates_obvious_groups() {
        let pts = Matrix::from_rows(&[
            [0.0, 0.0],
            [0.1, 0.0],
            [10.0, 10.0],
            [10.1, 10.0],
            [0.0, 0.1],
        ]);
        let km = kmeans(&pts, 2, 7);
        let canon = relabel_by_first_appearance(&km.labels);
        assert_eq!(canon, vec![0, 0, 1, 1, 0]);
        assert!(km.inertia < 0.1);
    }

    #[test]
    fn relabel_is_canonical() {
        assert_eq!(relabel_by_first_appearance(&[2, 2, 0, 1, 0]), vec![0, 0, 1, 2, 1]);
    }
}
