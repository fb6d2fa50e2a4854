//! Synthetic subject populations with known cluster structure.
//!
//! Every cluster owns a base covariance ("physiology"). Each subject is a
//! geodesic perturbation of its cluster base, and each epoch is
//! `P^{1/2}·exp(shift·y·D_c + noise·N)·P^{1/2}` in expectation, where `P` is
//! the subject matrix, `y` the seizure label, `D_c` a seizure direction
//! shared within the cluster and `N` per-epoch noise. Feature matrices are
//! drawn so that their sample covariance estimates that matrix.
//!
//! Seizure directions share one common axis; their cluster-specific parts
//! are spread evenly on a circle in the tangent space, so a classifier
//! trained on pooled clusters only sees the common part reliably.

use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{label_window, Epoch, SignalError};
use crate::linalg::Matrix;
use crate::manifold::{tangent_dim, unvectorize, TangentVector};
use crate::pipeline::SubjectEpochs;
use crate::spd::{FeatureMatrix, SpdMatrix, SymmetricMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_clusters: usize,
    pub subjects_per_cluster: usize,
    pub epochs_per_subject: usize,
    /// Riemannian distance between cluster base matrices.
    pub separation: f64,
    /// Riemannian distance from each subject matrix to its cluster base.
    pub within_spread: f64,
    pub channels: usize,
    /// Columns per feature matrix.
    pub features: usize,
    /// Share of seizure epochs per subject, in [0, 0.5].
    pub seizure_fraction: f64,
    /// Tangent-space length of the seizure displacement.
    pub class_shift: f64,
    /// Weight of the seizure direction common to all clusters, relative to
    /// the unit cluster-specific part.
    pub shared_seizure: f64,
    /// Tangent-space scale of per-epoch noise.
    pub epoch_noise: f64,
    pub epoch_len_sec: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_clusters: 3,
            subjects_per_cluster: 6,
            epochs_per_subject: 200,
            separation: 1.5,
            within_spread: 0.15,
            channels: 8,
            features: 250,
            seizure_fraction: 0.2,
            class_shift: 1.0,
            shared_seizure: 0.5,
            epoch_noise: 1.0,
            epoch_len_sec: 10.0,
            seed: 42,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<(), SignalError> {
        let bad = |msg: &str| Err(SignalError::InvalidSynthConfig(msg.into()));
        if self.n_clusters == 0 || self.subjects_per_cluster == 0 || self.epochs_per_subject == 0 {
            return bad("cluster, subject and epoch counts must be >= 1");
        }
        if self.channels < 2 || self.features <= self.channels {
            return bad("need >= 2 channels and more features than channels");
        }
        if !(0.0..=0.5).contains(&self.seizure_fraction) {
            return bad("seizure_fraction must lie in [0, 0.5]");
        }
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !finite_nonneg(self.separation)
            || !finite_nonneg(self.within_spread)
            || !finite_nonneg(self.class_shift)
            || !finite_nonneg(self.shared_seizure)
            || !finite_nonneg(self.epoch_noise)
        {
            return bad("separation, spreads and shifts must be finite and >= 0");
        }
        if !(self.epoch_len_sec > 0.0) || !self.epoch_len_sec.is_finite() {
            return bad("epoch_len_sec must be positive");
        }
        Ok(())
    }
}

/// Generated subjects plus the ground-truth cluster of each.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPopulation {
    pub subjects: Vec<SubjectEpochs>,
    pub clusters: Vec<usize>,
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v = normals(rng, tangent_dim(n));
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// `count` orthonormal tangent directions by Gram-Schmidt.
fn orthonormal(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    while out.len() < count {
        let mut v = unit_direction(rng, n);
        for b in &out {
            let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            out.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    out
}

fn as_symmetric(n: usize, v: Vec<f64>) -> SymmetricMatrix {
    unvectorize(&TangentVector::new(n, v).expect("length n(n+1)/2"))
}

/// Random orthogonal matrix: eigenvectors of a random symmetric matrix.
fn random_rotation(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let s = as_symmetric(n, normals(rng, tangent_dim(n)));
    s.eig().expect("finite symmetric matrix").vectors
}

/// Places seizure events as runs of whole epochs, one run per slot of the
/// timeline, with onsets and offsets jittered inside the boundary epochs
/// while keeping those epochs more than half covered.
fn seizure_events(rng: &mut ChaCha8Rng, n_epochs: usize, fraction: f64, len: f64) -> Vec<(f64, f64)> {
    let target = (fraction * n_epochs as f64).round() as usize;
    if target == 0 {
        return Vec::new();
    }
    let n_events = target.div_ceil(6);
    let slot = n_epochs / n_events;
    let mut remaining = target;
    let mut events = Vec::with_capacity(n_events);
    for e in 0..n_events {
        let run = remaining.div_ceil(n_events - e).min(slot);
        remaining -= run;
        let slack = slot - run;
        let first = e * slot + if slack > 0 { rng.random_range(0..=slack) } else { 0 };
        let onset = (first as f64 + rng.random_range(0.0..0.4)) * len;
        let offset = ((first + run) as f64 - rng.random_range(0.0..0.4)) * len;
        events.push((onset, offset));
    }
    events
}

/// Deterministic synthetic population; subject `i` belongs to cluster
/// `i mod n_clusters`.
pub fn synth_population(cfg: &SynthConfig) -> Result<SyntheticPopulation, SignalError> {
    cfg.validate()?;
    let n = cfg.channels;
    let m = tangent_dim(n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let rotation = random_rotation(&mut rng, n);
    // cluster bases exp(a·E_kk) are pairwise exactly `separation` apart
    let a = cfg.separation / SQRT_2;
    let bases: Vec<SpdMatrix> = (0..cfg.n_clusters)
        .map(|k| {
            let direction = if k < n {
                let mut d = Matrix::zeros(n, n);
                d[(k, k)] = 1.0;
                SymmetricMatrix::new(d)?
            } else {
                as_symmetric(n, unit_direction(&mut rng, n))
            };
            let local = direction.scale(a).exp()?;
            Ok(local.congruence(&rotation)?)
        })
        .collect::<Result<_, SignalError>>()?;

    // orthonormal triple: shared seizure axis plus the plane of cluster-specific ones
    let basis = orthonormal(&mut rng, n, 3);
    let (w, u, v) = (&basis[0], &basis[1], &basis[2]);
    let seizure_dirs: Vec<Vec<f64>> = (0..cfg.n_clusters)
        .map(|c| {
            let angle = 2.0 * PI * c as f64 / cfg.n_clusters as f64;
            let d: Vec<f64> = (0..m)
                .map(|i| cfg.shared_seizure * w[i] + angle.cos() * u[i] + angle.sin() * v[i])
                .collect();
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            d.into_iter().map(|x| x / norm).collect()
        })
        .collect();

    let n_subjects = cfg.n_clusters * cfg.subjects_per_cluster;
    let mut subjects = Vec::with_capacity(n_subjects);
    let mut clusters = Vec::with_capacity(n_subjects);
    for s in 0..n_subjects {
        let cluster = s % cfg.n_clusters;
        let base_sqrt = bases[cluster].sqrt()?;
        let perturb = as_symmetric(n, unit_direction(&mut rng, n))
            .scale(cfg.within_spread)
            .exp()?;
        let subject_sqrt = perturb.sandwich(&base_sqrt)?.sqrt()?;

        let len = cfg.epoch_len_sec;
        let events = seizure_events(&mut rng, cfg.epochs_per_subject, cfg.seizure_fraction, len);
        let mut epochs = Vec::with_capacity(cfg.epochs_per_subject);
        for e in 0..cfg.epochs_per_subject {
            let start = e as f64 * len;
            let label = label_window(start, start + len, &events);
            let noise_scale = cfg.epoch_noise / (m as f64).sqrt();
            let mut tangent: Vec<f64> = normals(&mut rng, m).iter().map(|x| x * noise_scale).collect();
            if label {
                for (t, d) in tangent.iter_mut().zip(&seizure_dirs[cluster]) {
                    *t += cfg.class_shift * d;
                }
            }
            // half the tangent gives the square-root factor of exp(tangent)
            let half = as_symmetric(n, tangent).scale(0.5).exp()?;
            let mixing = subject_sqrt.matrix().matmul(half.matrix());
            let z = Matrix::from_vec(n, cfg.features, normals(&mut rng, n * cfg.features));
            let features = FeatureMatrix::new(mixing.matmul(&z))?;
            epochs.push(Epoch {
                features,
                label,
                start_sec: start,
            });
        }
        subjects.push(SubjectEpochs {
            id: format!("synth{s:03}"),
            epoch_len_sec: len,
            total_hours: cfg.epochs_per_subject as f64 * len / 3600.0,
            events,
            epochs,
        });
        clusters.push(cluster);
    }
    Ok(SyntheticPopulation { subjects, clusters })
}
