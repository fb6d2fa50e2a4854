//! Fixed-length epoching and band-limited FFT magnitude features.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{Recording, SignalError};
use crate::linalg::Matrix;
use crate::spd::FeatureMatrix;

/// Window length that gives 0.1 Hz bin spacing.
pub const FEATURE_WINDOW_SEC: f64 = 10.0;

/// Raw time-domain window of a recording, before feature extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEpoch {
    /// Channels × samples.
    pub samples: Matrix,
    pub label: bool,
    pub start_sec: f64,
}

/// Feature epoch: the per-trial matrix fed to the covariance estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    pub features: FeatureMatrix,
    /// `true` for seizure.
    pub label: bool,
    pub start_sec: f64,
}

/// Seconds of `[start, end)` covered by the union of `intervals`, which are
/// assumed non-overlapping.
pub fn covered_seconds(start: f64, end: f64, intervals: &[(f64, f64)]) -> f64 {
    intervals
        .iter()
        .map(|&(on, off)| (off.min(end) - on.max(start)).max(0.0))
        .sum()
}

/// A window is seizure when annotated intervals cover strictly more than
/// half of it.
pub fn label_window(start: f64, end: f64, intervals: &[(f64, f64)]) -> bool {
    covered_seconds(start, end, intervals) > 0.5 * (end - start)
}

/// Samples per window, rejecting lengths that are not a whole number of
/// samples.
pub fn window_samples(len_sec: f64, fs: f64) -> Result<usize, SignalError> {
    let exact = len_sec * fs;
    let rounded = exact.round();
    if !(len_sec > 0.0) || !exact.is_finite() || rounded < 1.0 || (exact - rounded).abs() > 1e-9 * exact.max(1.0) {
        return Err(SignalError::InvalidEpochLength { len_sec, fs });
    }
    Ok(rounded as usize)
}

/// Splits a recording into consecutive non-overlapping windows of `len_sec`
/// seconds, dropping any trailing partial window.
pub fn epoch(rec: &Recording, len_sec: f64) -> Result<Vec<RawEpoch>, SignalError> {
    let len = window_samples(len_sec, rec.fs())?;
    let n = rec.n_samples();
    let count = n / len;
    let out = (0..count)
        .map(|e| {
            let lo = e * len;
            let samples = Matrix::from_fn(rec.n_channels(), len, |c, t| rec.channels()[c][lo + t]);
            let start_sec = lo as f64 / rec.fs();
            let end_sec = (lo + len) as f64 / rec.fs();
            RawEpoch {
                samples,
                label: label_window(start_sec, end_sec, rec.annotations()),
                start_sec,
            }
        })
        .collect();
    Ok(out)
}

/// Frequency bands in Hz as half-open intervals `[low, high)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub bands: Vec<(f64, f64)>,
}

impl Default for BandSpec {
    /// Theta [4,7), alpha [8,13), beta [13,30): 30 + 50 + 170 = 250 bins.
    fn default() -> Self {
        Self {
            bands: vec![(4.0, 7.0), (8.0, 13.0), (13.0, 30.0)],
        }
    }
}

impl BandSpec {
    /// DFT bin indices covered at spacing `df`, in band order.
    pub fn bins(&self, df: f64) -> Vec<usize> {
        let first = |f: f64| (f / df - 1e-9).ceil().max(0.0) as usize;
        self.bands
            .iter()
            .flat_map(|&(lo, hi)| first(lo)..first(hi))
            .collect()
    }

    pub fn highest_hz(&self) -> f64 {
        self.bands.iter().fold(0.0, |m, &(_, hi)| m.max(hi))
    }
}

/// Reusable extractor holding the FFT plan for one sampling rate.
#[derive(Clone)]
pub struct BandFeatureExtractor {
    fs: f64,
    window: usize,
    bins: Vec<usize>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for BandFeatureExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BandFeatureExtractor")
            .field("fs", &self.fs)
            .field("window", &self.window)
            .field("bins", &self.bins.len())
            .finish()
    }
}

impl BandFeatureExtractor {
    pub fn new(fs: f64, bands: &BandSpec) -> Result<Self, SignalError> {
        if !(fs >= 64.0) || !fs.is_finite() {
            return Err(SignalError::SampleRateTooLow(fs));
        }
        if bands.highest_hz() >= fs / 2.0 {
            return Err(SignalError::SampleRateTooLow(fs));
        }
        let window = window_samples(FEATURE_WINDOW_SEC, fs)?;
        let bins = bands.bins(1.0 / FEATURE_WINDOW_SEC);
        if bins.len() < 2 {
            return Err(SignalError::InvalidBands);
        }
        let fft = FftPlanner::new().plan_fft_forward(window);
        Ok(Self {
            fs,
            window,
            bins,
            fft,
        })
    }

    pub fn n_features(&self) -> usize {
        self.bins.len()
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    /// Per channel, `(2/L)·|X_k|` at every band bin; a unit-amplitude tone
    /// aligned with a bin yields 1.0 there.
    pub fn extract(&self, samples: &Matrix) -> Result<FeatureMatrix, SignalError> {
        if samples.ncols() != self.window {
            return Err(SignalError::ResolutionMismatch {
                expected: self.window,
                found: samples.ncols(),
            });
        }
        let scale = 2.0 / self.window as f64;
        let mut out = Matrix::zeros(samples.nrows(), self.bins.len());
        let mut buf = vec![Complex::new(0.0, 0.0); self.window];
        for c in 0..samples.nrows() {
            for (b, &x) in buf.iter_mut().zip(samples.row(c)) {
                *b = Complex::new(x, 0.0);
            }
            self.fft.process(&mut buf);
            for (dst, &k) in out.row_mut(c).iter_mut().zip(&self.bins) {
                *dst = scale * buf[k].norm();
            }
        }
        Ok(FeatureMatrix::new(out)?)
    }
}

/// Band FFT magnitudes of one 10 s window with the default bands.
pub fn band_features(samples: &Matrix, fs: f64) -> Result<FeatureMatrix, SignalError> {
    BandFeatureExtractor::new(fs, &BandSpec::default())?.extract(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bands_give_250_bins() {
        let bins = BandSpec::default().bins(0.1);
        assert_eq!(bins.len(), 250);
        assert_eq!(bins[0], 40);
        assert_eq!(bins[29], 69);
        assert_eq!(bins[30], 80);
        // 13.0 Hz is counted once, in beta
        assert_eq!(bins.iter().filter(|&&k| k == 130).count(), 1);
        assert_eq!(*bins.last().unwrap(), 299);
    }

    #[test]
    fn zero_input_gives_zero_features() {
        let f = band_features(&Matrix::zeros(2, 2560), 256.0).unwrap();
        assert_eq!(f.samples(), 250);
        assert!(f.matrix().as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn wrong_window_length() {
        assert!(matches!(
            band_features(&Matrix::zeros(2, 2000), 256.0),
            Err(SignalError::ResolutionMismatch { expected: 2560, found: 2000 })
        ));
        assert!(matches!(
            band_features(&Matrix::zeros(2, 320), 32.0),
            Err(SignalError::SampleRateTooLow(_))
        ));
    }

    #[test]
    fn labeling_rule() {
        let ann = [(100.0, 106.0)];
        assert!(label_window(100.0, 110.0, &ann));
        let ann = [(100.0, 104.0)];
        assert!(!label_window(100.0, 110.0, &ann));
        // exactly half is not dominant
        let ann = [(105.0, 115.0)];
        assert!(!label_window(100.0, 110.0, &ann));
    }

    #[test]
    fn epoch_count_for_an_hour() {
        let rec = Recording::new(2.0, vec![vec![0.0; 7200]; 2], vec![]).unwrap();
        let epochs = epoch(&rec, 10.0).unwrap();
        assert_eq!(epochs.len(), 360);
        assert_eq!(epochs[1].start_sec, 10.0);
        assert_eq!(epochs[0].samples.ncols(), 20);
    }

    #[test]
    fn trailing_partial_window_dropped() {
        let rec = Recording::new(10.0, vec![vec![0.0; 255]; 2], vec![]).unwrap();
        assert_eq!(epoch(&rec, 10.0).unwrap().len(), 2);
    }

    #[test]
    fn non_integer_window_rejected() {
        let rec = Recording::new(256.0, vec![vec![0.0; 4096]; 2], vec![]).unwrap();
        assert!(matches!(epoch(&rec, 0.001), Err(SignalError::InvalidEpochLength { .. })));
    }
}
