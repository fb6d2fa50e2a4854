//! Preprocessing chain from raw multichannel recordings to per-epoch feature
//! matrices: Butterworth band-pass, fixed-length epoching with seizure
//! labels, and band-limited FFT magnitudes. Also hosts the synthetic subject
//! population used for desk-scale experiments.

mod features;
mod filter;
mod synth;

pub use features::{
    band_features, covered_seconds, epoch, label_window, window_samples, BandFeatureExtractor,
    BandSpec, Epoch, RawEpoch, FEATURE_WINDOW_SEC,
};
pub use filter::{butterworth_bandpass, filt, Biquad, IirFilter};
pub use synth::{synth_population, SynthConfig, SyntheticPopulation};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spd::SpdError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("invalid band-pass: order {order}, [{low_hz}, {high_hz}] Hz at fs {fs} Hz")]
    InvalidBand {
        order: usize,
        low_hz: f64,
        high_hz: f64,
        fs: f64,
    },
    #[error("designed filter has a pole on or outside the unit circle")]
    UnstableFilter,
    #[error("epoch length {len_sec} s is not a whole number of samples at {fs} Hz")]
    InvalidEpochLength { len_sec: f64, fs: f64 },
    #[error("window has {found} samples, 0.1 Hz resolution needs {expected}")]
    ResolutionMismatch { expected: usize, found: usize },
    #[error("sample rate {0} Hz too low for the requested bands")]
    SampleRateTooLow(f64),
    #[error("band specification selects fewer than two bins")]
    InvalidBands,
    #[error("invalid recording: {0}")]
    InvalidRecording(String),
    #[error("invalid synthetic population parameters: {0}")]
    InvalidSynthConfig(String),
    #[error(transparent)]
    Spd(#[from] SpdError),
}

/// Multichannel recording at a single sampling rate, with seizure intervals
/// in seconds from the start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    fs: f64,
    labels: Vec<String>,
    channels: Vec<Vec<f64>>,
    annotations: Vec<(f64, f64)>,
}

impl Recording {
    /// Validates shape and annotations; annotations are sorted by onset and
    /// must be non-overlapping and lie within the recording.
    pub fn new(
        fs: f64,
        channels: Vec<Vec<f64>>,
        mut annotations: Vec<(f64, f64)>,
    ) -> Result<Self, SignalError> {
        if !(fs > 0.0) || !fs.is_finite() {
            return Err(SignalError::InvalidRecording(format!("sample rate {fs}")));
        }
        let n = channels.first().map(Vec::len).ok_or_else(|| {
            SignalError::InvalidRecording("recording has no channels".into())
        })?;
        if channels.iter().any(|c| c.len() != n) {
            return Err(SignalError::InvalidRecording(
                "channels differ in length".into(),
            ));
        }
        annotations.sort_by(|a, b| a.0.total_cmp(&b.0));
        let duration = n as f64 / fs;
        for (i, &(on, off)) in annotations.iter().enumerate() {
            if !(on >= 0.0 && on < off && off <= duration) {
                return Err(SignalError::InvalidRecording(format!(
                    "annotation [{on}, {off}] outside [0, {duration}] or empty"
                )));
            }
            if i > 0 && on < annotations[i - 1].1 {
                return Err(SignalError::InvalidRecording(format!(
                    "annotation starting at {on} overlaps its predecessor"
                )));
            }
        }
        let labels = (0..channels.len()).map(|i| format!("ch{i}")).collect();
        Ok(Self {
            fs,
            labels,
            channels,
            annotations,
        })
    }

    /// Replaces channel labels; panics if the count differs.
    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.channels.len(), "one label per channel");
        self.labels = labels;
        self
    }

    /// Same recording with new seizure intervals.
    pub fn with_annotations(self, annotations: Vec<(f64, f64)>) -> Result<Self, SignalError> {
        let labels = self.labels;
        Ok(Recording::new(self.fs, self.channels, annotations)?.with_labels(labels))
    }

    pub(crate) fn with_channels(&self, channels: Vec<Vec<f64>>) -> Recording {
        debug_assert_eq!(channels.len(), self.channels.len());
        Recording {
            fs: self.fs,
            labels: self.labels.clone(),
            channels,
            annotations: self.annotations.clone(),
        }
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn annotations(&self) -> &[(f64, f64)] {
        &self.annotations
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.channels[0].len()
    }

    pub fn duration_sec(&self) -> f64 {
        self.n_samples() as f64 / self.fs
    }
}
