//! Cross-subject classification of multichannel biosignals on the manifold
//! of symmetric positive-definite covariance matrices.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`] / [`spd`]: dense matrices, the Jacobi eigensolver, matrix
//!   functions, the sample covariance estimator and the affine-invariant
//!   Riemannian distance.
//! - [`manifold`]: Fréchet mean, recentering and tangent-space projection.
//! - [`clustering`]: Gaussian affinity over subject means, normalized
//!   spectrum, cluster-count estimation and spectral k-means.
//! - [`classifier`]: linear soft-margin SVM trained by dual coordinate descent.
//! - [`signal`]: Butterworth band-pass, epoching, band FFT features and a
//!   synthetic population generator.
//! - [`ingest`]: EDF reader/writer, annotation CSV and the `RSEL1` epoch store.
//! - [`pipeline`]: subject selection plus leave-one-subject-out evaluation.

pub mod linalg;
pub mod spd;
pub mod manifold;
pub mod clustering;
pub mod classifier;
pub mod signal;
pub mod ingest;
pub mod pipeline;

pub use linalg::Matrix;
pub use spd::{FeatureMatrix, SpdMatrix, SymmetricMatrix};
