//! Linear soft-margin SVM (hinge loss, L2 regularization) trained by dual
//! coordinate descent.
//!
//! The bias is learned as the weight of an extra constant feature. That
//! feature's value is the mean norm of the training vectors rather than a
//! fixed 1, so rescaling every input by γ together with `C` by 1/γ² yields
//! exactly the same decisions.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifold::TangentVector;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SvmError {
    #[error("training set contains a single class ({0})")]
    SingleClass(i32),
    #[error("labels contain more than two classes")]
    TooManyClasses,
    #[error("empty training set")]
    Empty,
    #[error("{vectors} vectors but {labels} labels")]
    LabelCountMismatch { vectors: usize, labels: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("C must be positive and finite, got {0}")]
    InvalidC(f64),
    #[error("non-finite feature value")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, SvmError>;

impl AsRef<[f64]> for TangentVector {
    fn as_ref(&self) -> &[f64] {
        self.as_slice()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    /// Regularization trade-off.
    pub c: f64,
    /// Relative duality-gap tolerance.
    pub tol: f64,
    /// Maximum number of passes over the training set.
    pub max_passes: usize,
    pub seed: u64,
    /// Scale per-class C by inverse class frequency.
    pub balanced: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-4,
            max_passes: 1000,
            seed: 42,
            balanced: true,
        }
    }
}

/// Trained linear decision function `sign(w·x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    #[serde(rename = "C")]
    pub c: f64,
    /// `(negative, positive)` class labels.
    pub classes: (i32, i32),
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Signed distance-like score `w·x + b`.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(SvmError::DimensionMismatch {
                expected: self.weights.len(),
                found: x.len(),
            });
        }
        Ok(dot(&self.weights, x) + self.bias)
    }

    /// Label and margin; a margin of exactly zero maps to the positive class.
    pub fn predict(&self, x: &[f64]) -> Result<(i32, f64)> {
        let margin = self.decision(x)?;
        let label = if margin >= 0.0 {
            self.classes.1
        } else {
            self.classes.0
        };
        Ok((label, margin))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

pub fn svm_predict(model: &SvmModel, v: &TangentVector) -> Result<(i32, f64)> {
    model.predict(v.as_slice())
}

/// Per-pass diagnostics from training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    /// Dual objective after each pass, starting with the value at α = 0.
    pub dual_objective: Vec<f64>,
    pub primal_objective: f64,
    pub passes: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn svm_train<V: AsRef<[f64]>>(vectors: &[V], labels: &[i32], cfg: &SvmConfig) -> Result<SvmModel> {
    svm_train_traced(vectors, labels, cfg).map(|(m, _)| m)
}

/// Dual coordinate descent for
/// `min ½‖w‖² + Σᵢ Cᵢ·max(0, 1 − yᵢ(w·xᵢ + b))`, with the coordinate order
/// reshuffled every pass from a seeded stream. Stops once the duality gap
/// drops below `tol` times the primal objective, or after `max_passes`.
pub fn svm_train_traced<V: AsRef<[f64]>>(
    vectors: &[V],
    labels: &[i32],
    cfg: &SvmConfig,
) -> Result<(SvmModel, TrainTrace)> {
    if !(cfg.c > 0.0) || !cfg.c.is_finite() {
        return Err(SvmError::InvalidC(cfg.c));
    }
    if vectors.len() != labels.len() {
        return Err(SvmError::LabelCountMismatch {
            vectors: vectors.len(),
            labels: labels.len(),
        });
    }
    let first = vectors.first().ok_or(SvmError::Empty)?;
    let dim = first.as_ref().len();
    for v in vectors {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(SvmError::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(SvmError::NonFinite);
        }
    }

    let neg = *labels.iter().min().expect("non-empty");
    let pos = *labels.iter().max().expect("non-empty");
    if neg == pos {
        return Err(SvmError::SingleClass(neg));
    }
    if labels.iter().any(|&l| l != neg && l != pos) {
        return Err(SvmError::TooManyClasses);
    }

    let n = vectors.len();
    let y: Vec<f64> = labels.iter().map(|&l| if l == pos { 1.0 } else { -1.0 }).collect();
    let n_pos = y.iter().filter(|&&v| v > 0.0).count();
    let (c_pos, c_neg) = if cfg.balanced {
        (
            cfg.c * n as f64 / (2.0 * n_pos as f64),
            cfg.c * n as f64 / (2.0 * (n - n_pos) as f64),
        )
    } else {
        (cfg.c, cfg.c)
    };
    let upper: Vec<f64> = y.iter().map(|&v| if v > 0.0 { c_pos } else { c_neg }).collect();

    let mean_norm = vectors.iter().map(|v| dot(v.as_ref(), v.as_ref()).sqrt()).sum::<f64>() / n as f64;
    let bias_feature = if mean_norm > 0.0 { mean_norm } else { 1.0 };
    let bias2 = bias_feature * bias_feature;

    let q_diag: Vec<f64> = vectors.iter().map(|v| dot(v.as_ref(), v.as_ref()) + bias2).collect();
    let mut alpha = vec![0.0; n];
    // last slot holds the bias-feature weight
    let mut w = vec![0.0; dim + 1];
    let margin = |w: &[f64], i: usize| dot(&w[..dim], vectors[i].as_ref()) + w[dim] * bias_feature;

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dual_trace = vec![0.0];
    let mut primal = f64::INFINITY;
    let mut converged = false;
    let mut passes = 0;

    while passes < cfg.max_passes {
        passes += 1;
        order.shuffle(&mut rng);
        for &i in &order {
            let g = y[i] * margin(&w, i) - 1.0;
            let a = alpha[i];
            let pg = if a == 0.0 {
                g.min(0.0)
            } else if a == upper[i] {
                g.max(0.0)
            } else {
                g
            };
            if pg == 0.0 {
                continue;
            }
            let new_a = (a - g / q_diag[i]).clamp(0.0, upper[i]);
            let delta = (new_a - a) * y[i];
            if delta == 0.0 {
                continue;
            }
            alpha[i] = new_a;
            for (wj, &xj) in w[..dim].iter_mut().zip(vectors[i].as_ref()) {
                *wj += delta * xj;
            }
            w[dim] += delta * bias_feature;
        }

        let w2 = dot(&w, &w);
        let hinge: f64 = (0..n)
            .map(|i| upper[i] * (1.0 - y[i] * margin(&w, i)).max(0.0))
            .sum();
        primal = 0.5 * w2 + hinge;
        let dual = alpha.iter().sum::<f64>() - 0.5 * w2;
        dual_trace.push(dual);
        if primal - dual <= cfg.tol * primal {
            converged = true;
            break;
        }
    }

    let model = SvmModel {
        bias: w[dim] * bias_feature,
        weights: w[..dim].to_vec(),
        c: cfg.c,
        classes: (neg, pos),
    };
    let trace = TrainTrace {
        dual_objective: dual_trace,
        primal_objective: primal,
        passes,
        converged,
    };
    Ok((model, trace))
}
