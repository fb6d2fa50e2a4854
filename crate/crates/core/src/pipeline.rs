//! Subject records, leave-one-subject-out evaluation and seizure-detection
//! metrics.
//!
//! Per held-out subject: cluster every subject's (unlabelled) mean, train on
//! the labelled subjects sharing the held-out subject's cluster, recenter
//! every subject by its own mean, project all trials to the tangent space at
//! the grand mean of the recentered training trials, fit a linear SVM and
//! score the held-out epochs.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{svm_train, SvmConfig, SvmError};
use crate::clustering::{
    spectral_cluster_with_singletons, ClusterError, ClusterModel, SpectralConfig, DEFAULT_SIGMA,
    DEFAULT_TAU,
};
use crate::manifold::{
    frechet_mean_detailed, recenter, FrechetConfig, ManifoldError, TangentSpace,
};
use crate::signal::{
    butterworth_bandpass, epoch, filt, BandFeatureExtractor, BandSpec, Epoch, Recording,
    SignalError,
};
use crate::spd::{scm, SpdError, SpdMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("need ≥{need} subjects, got {found}")]
    TooFewSubjects { need: usize, found: usize },
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("subject {id}: {reason}")]
    InvalidSubject { id: String, reason: String },
    #[error("no training set with both classes for held-out subject {0}")]
    Untrainable(String),
    #[error(transparent)]
    Spd(#[from] SpdError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// One subject's feature epochs with the bookkeeping needed for metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEpochs {
    pub id: String,
    pub epoch_len_sec: f64,
    /// Total recorded duration, used as the false-positive-rate denominator.
    pub total_hours: f64,
    /// Annotated seizure intervals in seconds on the subject's timeline.
    pub events: Vec<(f64, f64)>,
    pub epochs: Vec<Epoch>,
}

impl SubjectEpochs {
    pub fn labels(&self) -> Vec<bool> {
        self.epochs.iter().map(|e| e.label).collect()
    }

    pub fn start_times(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.start_sec).collect()
    }

    fn check(&self) -> Result<()> {
        let bad = |reason: String| {
            Err(PipelineError::InvalidSubject {
                id: self.id.clone(),
                reason,
            })
        };
        if self.epochs.is_empty() {
            return bad("no epochs".into());
        }
        if !(self.epoch_len_sec > 0.0) || !(self.total_hours > 0.0) {
            return bad("epoch length and total hours must be positive".into());
        }
        let c = self.epochs[0].features.channels();
        if self.epochs.iter().any(|e| e.features.channels() != c) {
            return bad("epochs differ in channel count".into());
        }
        Ok(())
    }
}

/// Subject epochs plus per-epoch SCMs and their Fréchet mean.
#[derive(Debug, Clone)]
pub struct SubjectRecord {
    pub data: SubjectEpochs,
    pub scms: Vec<SpdMatrix>,
    /// Fréchet mean of `scms` (before any recentering).
    pub mean: SpdMatrix,
    /// Residual of the mean; above the configured tolerance when the
    /// iteration budget ran out and the best iterate was kept.
    pub mean_residual: f64,
}

impl SubjectRecord {
    pub fn build(data: SubjectEpochs, shrinkage: f64, frechet: &FrechetConfig) -> Result<Self> {
        data.check()?;
        let scms = data
            .epochs
            .par_iter()
            .map(|e| scm(&e.features, shrinkage))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|err| PipelineError::InvalidSubject {
                id: data.id.clone(),
                reason: err.to_string(),
            })?;
        let (mean, mean_residual) = mean_or_best(&scms, frechet)?;
        Ok(Self {
            data,
            scms,
            mean,
            mean_residual,
        })
    }

    pub fn id(&self) -> &str {
        &self.data.id
    }

    pub fn labels(&self) -> Vec<bool> {
        self.data.labels()
    }
}

/// Fréchet mean, keeping the best iterate when the budget runs out.
fn mean_or_best(list: &[SpdMatrix], cfg: &FrechetConfig) -> Result<(SpdMatrix, f64)> {
    match frechet_mean_detailed(list, cfg) {
        Ok(out) => Ok((out.mean, out.residual)),
        Err(ManifoldError::NoConvergence { best, residual, .. }) => Ok((*best, residual)),
        Err(e) => Err(e.into()),
    }
}

pub fn build_records(
    subjects: Vec<SubjectEpochs>,
    shrinkage: f64,
    frechet: &FrechetConfig,
) -> Result<Vec<SubjectRecord>> {
    subjects
        .into_iter()
        .map(|s| SubjectRecord::build(s, shrinkage, frechet))
        .collect()
}

/// How false positives are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FprMode {
    /// Runs of consecutive false-positive epochs count once.
    #[default]
    Event,
    /// Every false-positive epoch counts.
    Epoch,
}

impl FromStr for FprMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "event" => Ok(FprMode::Event),
            "epoch" => Ok(FprMode::Epoch),
            _ => Err(format!("fpr mode must be 'event' or 'epoch', got '{s}'")),
        }
    }
}

impl fmt::Display for FprMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FprMode::Event => "event",
            FprMode::Epoch => "epoch",
        })
    }
}

/// Every tunable of a run. Serialized verbatim into CLI outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub sigma: f64,
    pub tau: f64,
    pub k_override: Option<usize>,
    pub svm_c: f64,
    pub seed: u64,
    pub epoch_len_sec: f64,
    pub bands: BandSpec,
    pub order: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub recenter_before_cluster: bool,
    pub fpr_mode: FprMode,
    pub shrinkage: f64,
    pub row_normalize: bool,
    pub balanced: bool,
    pub svm_tol: f64,
    pub svm_max_passes: usize,
    pub frechet: FrechetConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sigma: DEFAULT_SIGMA,
            tau: DEFAULT_TAU,
            k_override: None,
            svm_c: 1.0,
            seed: 42,
            epoch_len_sec: 10.0,
            bands: BandSpec::default(),
            order: 5,
            low_hz: 0.5,
            high_hz: 30.0,
            recenter_before_cluster: false,
            fpr_mode: FprMode::Event,
            shrinkage: 0.0,
            row_normalize: true,
            balanced: true,
            svm_tol: 1e-4,
            svm_max_passes: 1000,
            frechet: FrechetConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad(format!("tau must lie in (0, 1), got {}", self.tau));
        }
        if self.k_override == Some(0) {
            return bad("k must be >= 1".into());
        }
        if !(self.svm_c > 0.0) || !self.svm_c.is_finite() {
            return bad(format!("svm C must be positive, got {}", self.svm_c));
        }
        if !(self.epoch_len_sec > 0.0) || !self.epoch_len_sec.is_finite() {
            return bad(format!("epoch length must be positive, got {}", self.epoch_len_sec));
        }
        if !(0.0..1.0).contains(&self.shrinkage) {
            return bad(format!("shrinkage must lie in [0, 1), got {}", self.shrinkage));
        }
        if !(self.svm_tol > 0.0) || self.svm_max_passes == 0 {
            return bad("svm tolerance and pass budget must be positive".into());
        }
        self.frechet.validate()?;
        Ok(())
    }

    pub fn spectral(&self) -> SpectralConfig {
        SpectralConfig {
            sigma: self.sigma,
            tau: self.tau,
            k_override: self.k_override,
            seed: self.seed,
            row_normalize: self.row_normalize,
        }
    }

    pub fn svm(&self) -> SvmConfig {
        SvmConfig {
            c: self.svm_c,
            tol: self.svm_tol,
            max_passes: self.svm_max_passes,
            seed: self.seed,
            balanced: self.balanced,
        }
    }
}

/// Filters, epochs and featurizes a subject's recordings, laid end to end on
/// one timeline in the given order.
pub fn extract_subject(id: &str, recordings: &[Recording], cfg: &RunConfig) -> Result<SubjectEpochs> {
    if recordings.is_empty() {
        return Err(PipelineError::InvalidSubject {
            id: id.into(),
            reason: "no recordings".into(),
        });
    }
    let mut offset = 0.0;
    let mut events = Vec::new();
    let mut epochs = Vec::new();
    for rec in recordings {
        let filter = butterworth_bandpass(cfg.order, cfg.low_hz, cfg.high_hz, rec.fs())?;
        let extractor = BandFeatureExtractor::new(rec.fs(), &cfg.bands)?;
        let raw = epoch(&filt(&filter, rec), cfg.epoch_len_sec)?;
        let feats = raw
            .par_iter()
            .map(|r| extractor.extract(&r.samples))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        for (r, features) in raw.iter().zip(feats) {
            epochs.push(Epoch {
                features,
                label: r.label,
                start_sec: offset + r.start_sec,
            });
        }
        events.extend(rec.annotations().iter().map(|&(a, b)| (offset + a, offset + b)));
        offset += rec.duration_sec();
    }
    Ok(SubjectEpochs {
        id: id.into(),
        epoch_len_sec: cfg.epoch_len_sec,
        total_hours: offset / 3600.0,
        events,
        epochs,
    })
}

/// Clusters subjects by their means; with `recenter_before_cluster` the
/// means of the self-recentered trials are used instead (all ≈ identity).
pub fn cluster_subjects(subjects: &[SubjectRecord], cfg: &RunConfig) -> Result<ClusterModel> {
    cfg.validate()?;
    if subjects.len() < 2 {
        return Err(PipelineError::TooFewSubjects {
            need: 2,
            found: subjects.len(),
        });
    }
    let means: Vec<SpdMatrix> = if cfg.recenter_before_cluster {
        subjects
            .par_iter()
            .map(|s| {
                let centered = recenter(&s.scms, &s.mean)?;
                Ok(mean_or_best(&centered, &cfg.frechet)?.0)
            })
            .collect::<Result<_>>()?
    } else {
        subjects.iter().map(|s| s.mean.clone()).collect()
    };
    Ok(spectral_cluster_with_singletons(&means, &cfg.spectral())?)
}

/// Where a fold's training subjects come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainingMode {
    /// Subjects sharing the held-out subject's cluster.
    Clustered,
    /// Every other subject.
    Baseline,
}

/// Why a fold trained on every other subject instead of its cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    EmptyCluster,
    SingleClass,
}

/// Epoch-level and event-level detection metrics for one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub n_epochs: usize,
    pub n_seizure_epochs: usize,
    pub accuracy: f64,
    /// Undefined without seizure epochs.
    pub sensitivity: Option<f64>,
    /// Undefined without non-seizure epochs.
    pub specificity: Option<f64>,
    pub false_positives: usize,
    pub fpr_per_hour: f64,
    pub n_events: usize,
    pub detected_events: usize,
    /// Mean onset-to-detection delay over detected events.
    pub latency_sec: Option<f64>,
}

/// Scores per-epoch predictions. Percentages are in [0, 100].
///
/// Latency for an event is the start of the first predicted-seizure epoch
/// overlapping it minus the onset, clipped at zero; its resolution is the
/// epoch length.
pub fn compute_metrics(
    predictions: &[bool],
    truth: &[bool],
    start_secs: &[f64],
    events: &[(f64, f64)],
    epoch_len_sec: f64,
    total_hours: f64,
    fpr_mode: FprMode,
) -> MetricsRow {
    assert_eq!(predictions.len(), truth.len(), "one prediction per epoch");
    assert_eq!(start_secs.len(), truth.len(), "one start time per epoch");
    let n = truth.len();
    let count = |p: bool, t: bool| {
        predictions
            .iter()
            .zip(truth)
            .filter(|&(&a, &b)| a == p && b == t)
            .count()
    };
    let (tp, tn, fp, fne) = (count(true, true), count(false, false), count(true, false), count(false, true));
    let pct = |num: usize, den: usize| (den > 0).then(|| 100.0 * num as f64 / den as f64);

    let fp_flags: Vec<bool> = predictions.iter().zip(truth).map(|(&p, &t)| p && !t).collect();
    let false_positives = match fpr_mode {
        FprMode::Epoch => fp,
        FprMode::Event => (0..n)
            .filter(|&i| {
                fp_flags[i] && {
                    // a run continues only across time-adjacent epochs
                    let continues = i > 0
                        && fp_flags[i - 1]
                        && (start_secs[i] - start_secs[i - 1] - epoch_len_sec).abs() <= 1e-6 * epoch_len_sec;
                    !continues
                }
            })
            .count(),
    };
    let fpr_per_hour = if total_hours > 0.0 {
        false_positives as f64 / total_hours
    } else {
        0.0
    };

    let delays: Vec<f64> = events
        .iter()
        .filter_map(|&(on, off)| {
            (0..n)
                .find(|&i| predictions[i] && start_secs[i] < off && start_secs[i] + epoch_len_sec > on)
                .map(|i| (start_secs[i] - on).max(0.0))
        })
        .collect();
    let latency_sec = (!delays.is_empty()).then(|| delays.iter().sum::<f64>() / delays.len() as f64);

    MetricsRow {
        n_epochs: n,
        n_seizure_epochs: tp + fne,
        accuracy: pct(tp + tn, n).unwrap_or(0.0),
        sensitivity: pct(tp, tp + fne),
        specificity: pct(tn, tn + fp),
        false_positives,
        fpr_per_hour,
        n_events: events.len(),
        detected_events: delays.len(),
        latency_sec,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub subject_id: String,
    /// Held-out subject's cluster (clustered mode only).
    pub cluster: Option<usize>,
    pub training_subjects: Vec<String>,
    pub n_train_epochs: usize,
    pub fallback: Option<Fallback>,
    pub metrics: MetricsRow,
}

/// Mean and sample standard deviation over subjects where a metric is
/// defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Aggregate {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len();
        let mean = (n > 0).then(|| v.iter().sum::<f64>() / n as f64);
        let std = mean.filter(|_| n > 1).map(|m| {
            (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64).sqrt()
        });
        Self { n, mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub accuracy: Aggregate,
    pub sensitivity: Aggregate,
    pub specificity: Aggregate,
    pub fpr_per_hour: Aggregate,
    pub latency_sec: Aggregate,
}

impl Summary {
    fn from_rows(rows: &[&MetricsRow]) -> Self {
        Self {
            accuracy: Aggregate::from_values(rows.iter().map(|r| r.accuracy)),
            sensitivity: Aggregate::from_values(rows.iter().filter_map(|r| r.sensitivity)),
            specificity: Aggregate::from_values(rows.iter().filter_map(|r| r.specificity)),
            fpr_per_hour: Aggregate::from_values(rows.iter().map(|r| r.fpr_per_hour)),
            latency_sec: Aggregate::from_values(rows.iter().filter_map(|r| r.latency_sec)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: TrainingMode,
    pub fpr_mode: FprMode,
    /// Latency is measured to epoch starts, so this bounds its resolution.
    pub latency_resolution_sec: f64,
    pub clusters: Option<ClusterModel>,
    pub folds: Vec<FoldReport>,
    pub summary: Summary,
}

const TABLE_COLUMNS: [&str; 5] = [
    "Subject ID",
    "Accuracy (%)",
    "Sensitivity (%)",
    "False Positive rate (seizures/h)",
    "Latency (sec)",
];

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.2}"))
}

fn agg_cell(a: &Aggregate) -> String {
    match (a.mean, a.std) {
        (Some(m), Some(s)) => format!("{m:.2} ± {s:.2}"),
        (Some(m), None) => format!("{m:.2}"),
        _ => "-".into(),
    }
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned text table with one row per subject and a mean ± std row,
    /// followed by the specificity aggregate.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<[String; 5]> = self
            .folds
            .iter()
            .map(|f| {
                [
                    f.subject_id.clone(),
                    cell(Some(f.metrics.accuracy)),
                    cell(f.metrics.sensitivity),
                    cell(Some(f.metrics.fpr_per_hour)),
                    cell(f.metrics.latency_sec),
                ]
            })
            .collect();
        let s = &self.summary;
        rows.push([
            "Mean ± std".into(),
            agg_cell(&s.accuracy),
            agg_cell(&s.sensitivity),
            agg_cell(&s.fpr_per_hour),
            agg_cell(&s.latency_sec),
        ]);
        let widths: Vec<usize> = (0..5)
            .map(|c| {
                rows.iter()
                    .map(|r| r[c].chars().count())
                    .chain([TABLE_COLUMNS[c].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[&str]| {
            let mut out = String::new();
            for (c, text) in cells.iter().enumerate() {
                let pad = widths[c] - text.chars().count();
                if c == 0 {
                    let _ = write!(out, "{text}{}", " ".repeat(pad));
                } else {
                    let _ = write!(out, "  {}{text}", " ".repeat(pad));
                }
            }
            out.push('\n');
            out
        };
        let mut out = line(&TABLE_COLUMNS);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        out += &line(&rule.iter().map(String::as_str).collect::<Vec<_>>());
        for (i, r) in rows.iter().enumerate() {
            if i + 1 == rows.len() {
                out += &line(&rule.iter().map(String::as_str).collect::<Vec<_>>());
            }
            out += &line(&r.iter().map(String::as_str).collect::<Vec<_>>());
        }
        let _ = writeln!(out, "Specificity (%): {}", agg_cell(&s.specificity));
        out
    }
}

/// Leave-one-subject-out evaluation. Folds run in parallel; the report is
/// identical for any thread count.
pub fn loso_run(subjects: &[SubjectRecord], cfg: &RunConfig, mode: TrainingMode) -> Result<MetricsReport> {
    cfg.validate()?;
    if subjects.len() < 3 {
        return Err(PipelineError::TooFewSubjects {
            need: 3,
            found: subjects.len(),
        });
    }
    let clusters = match mode {
        TrainingMode::Clustered => Some(cluster_subjects(subjects, cfg)?),
        TrainingMode::Baseline => None,
    };
    // recentering needs no labels, so it is shared by every fold
    let centered: Vec<Vec<SpdMatrix>> = subjects
        .par_iter()
        .map(|s| recenter(&s.scms, &s.mean))
        .collect::<std::result::Result<_, _>>()?;
    let labels: Vec<Vec<bool>> = subjects.iter().map(SubjectRecord::labels).collect();

    let folds = (0..subjects.len())
        .into_par_iter()
        .map(|t| run_fold(t, subjects, &centered, &labels, clusters.as_ref(), cfg))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<&MetricsRow> = folds.iter().map(|f| &f.metrics).collect();
    let summary = Summary::from_rows(&rows);
    Ok(MetricsReport {
        mode,
        fpr_mode: cfg.fpr_mode,
        latency_resolution_sec: subjects[0].data.epoch_len_sec,
        clusters,
        folds,
        summary,
    })
}

fn has_both_classes(members: &[usize], labels: &[Vec<bool>]) -> bool {
    let any = |v: bool| members.iter().any(|&j| labels[j].contains(&v));
    any(true) && any(false)
}

/// Training set and predictions for one held-out subject. The held-out
/// subject's labels are never read.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPrediction {
    pub training: Vec<usize>,
    pub fallback: Option<Fallback>,
    pub n_train_epochs: usize,
    pub predictions: Vec<bool>,
    pub margins: Vec<f64>,
}

/// Runs one fold; `clusters` of `None` trains on every other subject.
pub fn predict_held_out(
    subjects: &[SubjectRecord],
    held_out: usize,
    clusters: Option<&ClusterModel>,
    cfg: &RunConfig,
) -> Result<FoldPrediction> {
    cfg.validate()?;
    if held_out >= subjects.len() {
        return Err(PipelineError::InvalidConfig(format!(
            "held-out index {held_out} out of range"
        )));
    }
    if let Some(c) = clusters {
        if c.assignments.len() != subjects.len() {
            return Err(PipelineError::InvalidConfig(
                "cluster model does not match the subject list".into(),
            ));
        }
    }
    let centered: Vec<Vec<SpdMatrix>> = subjects
        .par_iter()
        .map(|s| recenter(&s.scms, &s.mean))
        .collect::<std::result::Result<_, _>>()?;
    let labels: Vec<Vec<bool>> = subjects.iter().map(SubjectRecord::labels).collect();
    fold_prediction(held_out, subjects, &centered, &labels, clusters, cfg)
}

fn fold_prediction(
    t: usize,
    subjects: &[SubjectRecord],
    centered: &[Vec<SpdMatrix>],
    labels: &[Vec<bool>],
    clusters: Option<&ClusterModel>,
    cfg: &RunConfig,
) -> Result<FoldPrediction> {
    let others: Vec<usize> = (0..subjects.len()).filter(|&j| j != t).collect();
    let (training, fallback) = match clusters {
        None => (others, None),
        Some(c) => {
            let k = c.assignments[t];
            let same: Vec<usize> = others.iter().copied().filter(|&j| c.assignments[j] == k).collect();
            if same.is_empty() {
                (others, Some(Fallback::EmptyCluster))
            } else if !has_both_classes(&same, labels) {
                (others, Some(Fallback::SingleClass))
            } else {
                (same, None)
            }
        }
    };
    if !has_both_classes(&training, labels) {
        return Err(PipelineError::Untrainable(subjects[t].id().into()));
    }

    let train: Vec<SpdMatrix> = training.iter().flat_map(|&j| centered[j].iter().cloned()).collect();
    let train_labels: Vec<i32> = training
        .iter()
        .flat_map(|&j| labels[j].iter().map(|&l| i32::from(l)))
        .collect();
    let (grand_mean, _) = mean_or_best(&train, &cfg.frechet)?;
    let space = TangentSpace::new(&grand_mean)?;
    let train_vectors = space.project_all(&train)?;
    let model = svm_train(&train_vectors, &train_labels, &cfg.svm())?;

    let scored = space
        .project_all(&centered[t])?
        .iter()
        .map(|v| model.predict(v.as_slice()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(FoldPrediction {
        training,
        fallback,
        n_train_epochs: train.len(),
        predictions: scored.iter().map(|&(label, _)| label == 1).collect(),
        margins: scored.iter().map(|&(_, m)| m).collect(),
    })
}

fn run_fold(
    t: usize,
    subjects: &[SubjectRecord],
    centered: &[Vec<SpdMatrix>],
    labels: &[Vec<bool>],
    clusters: Option<&ClusterModel>,
    cfg: &RunConfig,
) -> Result<FoldReport> {
    let fold = fold_prediction(t, subjects, centered, labels, clusters, cfg)?;
    let data = &subjects[t].data;
    let metrics = compute_metrics(
        &fold.predictions,
        &labels[t],
        &data.start_times(),
        &data.events,
        data.epoch_len_sec,
        data.total_hours,
        cfg.fpr_mode,
    );
    Ok(FoldReport {
        subject_id: data.id.clone(),
        cluster: clusters.map(|c| c.assignments[t]),
        training_subjects: fold.training.iter().map(|&j| subjects[j].id().to_string()).collect(),
        n_train_epochs: fold.n_train_epochs,
        fallback: fold.fallback,
        metrics,
    })
}
