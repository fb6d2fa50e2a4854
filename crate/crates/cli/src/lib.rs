//! Command-line front end: `features`, `cluster`, `loso` and `synth`.
//!
//! Run settings come from defaults, then an optional `key = value` file
//! (`--config`), then flags. Every JSON output carries a `version` field and
//! the resolved `config`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use rsel_core::clustering::ClusterModel;
use rsel_core::ingest::{epoch_store_read, epoch_store_write, load_annotations, read_edf, IngestError};
use rsel_core::pipeline::{
    build_records, cluster_subjects, extract_subject, loso_run, FprMode, MetricsReport, PipelineError,
    RunConfig, SubjectEpochs, TrainingMode,
};
use rsel_core::signal::{synth_population, BandSpec, Recording, SignalError, SynthConfig};
use serde::Serialize;
use thiserror::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{context}: {source}")]
    Ingest { context: String, source: IngestError },
    #[error("{context}: {source}")]
    Signal { context: String, source: SignalError },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    /// Stable class name printed in front of the message.
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "IoError",
            CliError::Ingest { .. } => "IngestError",
            CliError::Signal { .. } => "SignalError",
            CliError::Pipeline(_) => "PipelineError",
            CliError::Config(_) => "ConfigError",
        }
    }

    /// `error: <Class>: <message>` on one line.
    pub fn line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error: {}: {msg}", self.class())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "rsel", version, about = "Riemannian subject selection for cross-subject seizure detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter, epoch and featurize a directory of EDF files into an RSEL1 store.
    Features(FeaturesArgs),
    /// Cluster the subjects of an RSEL1 store and print the cluster model JSON.
    Cluster(ClusterArgs),
    /// Leave-one-subject-out evaluation; prints the metrics table.
    Loso(LosoArgs),
    /// Write a synthetic clustered population as an RSEL1 store.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Directory of `.edf` files, or of per-subject directories holding them.
    /// The subject id is the file stem up to its first `_`.
    #[arg(long)]
    pub input: PathBuf,
    /// CSV of `recording_id,onset_sec,offset_sec`, keyed by file stem.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// RSEL1 epoch store.
    #[arg(long)]
    pub input: PathBuf,
    /// JSON destination; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct LosoArgs {
    /// RSEL1 epoch store.
    #[arg(long)]
    pub input: PathBuf,
    /// JSON report destination.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Also train every fold on all other subjects and report both.
    #[arg(long)]
    pub baseline: bool,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub clusters: usize,
    #[arg(long, default_value_t = 6)]
    pub subjects_per_cluster: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub channels: usize,
    #[arg(long, default_value_t = 250)]
    pub features: usize,
    /// Riemannian distance between cluster bases.
    #[arg(long, default_value_t = 1.5)]
    pub separation: f64,
    /// Riemannian distance from a subject to its cluster base.
    #[arg(long, default_value_t = 0.15)]
    pub within_spread: f64,
    #[arg(long, default_value_t = 0.2)]
    pub seizure_fraction: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

/// Run-configuration flags shared by the data commands. Unset flags fall
/// back to the config file, then to the defaults listed under `--help`.
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// File of `key = value` lines using the flag names below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Affinity kernel width.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Tolerance for counting eigenvalues as unity.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Fix the number of clusters instead of estimating it.
    #[arg(long)]
    pub k: Option<usize>,
    /// SVM box constraint.
    #[arg(long)]
    pub svm_c: Option<f64>,
    /// k-means seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Epoch length in seconds.
    #[arg(long)]
    pub epoch_len: Option<f64>,
    /// Butterworth order.
    #[arg(long)]
    pub order: Option<usize>,
    /// Lower band-pass edge in Hz.
    #[arg(long)]
    pub low_hz: Option<f64>,
    /// Upper band-pass edge in Hz.
    #[arg(long)]
    pub high_hz: Option<f64>,
    /// Cluster the means of self-recentered trials.
    #[arg(long)]
    pub recenter_before_cluster: bool,
    /// `event` merges consecutive false-positive epochs, `epoch` counts each.
    #[arg(long)]
    pub fpr_mode: Option<FprMode>,
    /// Worker thread cap.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Resolved run settings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Settings {
    pub run: RunConfig,
    pub threads: Option<usize>,
}

/// Every settable key, in help order.
pub const KEYS: &[&str] = &[
    "sigma",
    "tau",
    "k",
    "svm-c",
    "seed",
    "epoch-len",
    "bands",
    "order",
    "low-hz",
    "high-hz",
    "recenter-before-cluster",
    "fpr-mode",
    "shrinkage",
    "row-normalize",
    "balanced",
    "svm-tol",
    "svm-max-passes",
    "frechet-step",
    "frechet-tol",
    "frechet-max-iter",
    "threads",
];

fn format_bands(b: &BandSpec) -> String {
    b.bands.iter().map(|(lo, hi)| format!("{lo}-{hi}")).collect::<Vec<_>>().join(",")
}

fn parse_bands(s: &str) -> Option<BandSpec> {
    let bands = s
        .split(',')
        .map(|part| {
            let (lo, hi) = part.trim().split_once('-')?;
            Some((lo.trim().parse().ok()?, hi.trim().parse().ok()?))
        })
        .collect::<Option<Vec<(f64, f64)>>>()?;
    Some(BandSpec { bands })
}

impl Settings {
    pub fn get(&self, key: &str) -> Option<String> {
        let r = &self.run;
        Some(match key {
            "sigma" => r.sigma.to_string(),
            "tau" => r.tau.to_string(),
            "k" => r.k_override.map_or("auto".into(), |k| k.to_string()),
            "svm-c" => r.svm_c.to_string(),
            "seed" => r.seed.to_string(),
            "epoch-len" => r.epoch_len_sec.to_string(),
            "bands" => format_bands(&r.bands),
            "order" => r.order.to_string(),
            "low-hz" => r.low_hz.to_string(),
            "high-hz" => r.high_hz.to_string(),
            "recenter-before-cluster" => r.recenter_before_cluster.to_string(),
            "fpr-mode" => r.fpr_mode.to_string(),
            "shrinkage" => r.shrinkage.to_string(),
            "row-normalize" => r.row_normalize.to_string(),
            "balanced" => r.balanced.to_string(),
            "svm-tol" => r.svm_tol.to_string(),
            "svm-max-passes" => r.svm_max_passes.to_string(),
            "frechet-step" => r.frechet.step.to_string(),
            "frechet-tol" => r.frechet.tol.to_string(),
            "frechet-max-iter" => r.frechet.max_iter.to_string(),
            "threads" => self.threads.map_or("all".into(), |t| t.to_string()),
            _ => return None,
        })
    }

    /// Sets one key from its text form. Underscores and dashes are
    /// interchangeable in the key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let bad = || CliError::Config(format!("invalid value '{value}' for {key}"));
        fn num<T: std::str::FromStr>(v: &str, bad: impl Fn() -> CliError) -> Result<T> {
            v.parse().map_err(|_| bad())
        }
        let r = &mut self.run;
        match key.as_str() {
            "sigma" => r.sigma = num(value, bad)?,
            "tau" => r.tau = num(value, bad)?,
            "k" => r.k_override = if value == "auto" { None } else { Some(num(value, bad)?) },
            "svm-c" => r.svm_c = num(value, bad)?,
            "seed" => r.seed = num(value, bad)?,
            "epoch-len" => r.epoch_len_sec = num(value, bad)?,
            "bands" => r.bands = parse_bands(value).ok_or_else(bad)?,
            "order" => r.order = num(value, bad)?,
            "low-hz" => r.low_hz = num(value, bad)?,
            "high-hz" => r.high_hz = num(value, bad)?,
            "recenter-before-cluster" => r.recenter_before_cluster = num(value, bad)?,
            "fpr-mode" => r.fpr_mode = num(value, bad)?,
            "shrinkage" => r.shrinkage = num(value, bad)?,
            "row-normalize" => r.row_normalize = num(value, bad)?,
            "balanced" => r.balanced = num(value, bad)?,
            "svm-tol" => r.svm_tol = num(value, bad)?,
            "svm-max-passes" => r.svm_max_passes = num(value, bad)?,
            "frechet-step" => r.frechet.step = num(value, bad)?,
            "frechet-tol" => r.frechet.tol = num(value, bad)?,
            "frechet-max-iter" => r.frechet.max_iter = num(value, bad)?,
            "threads" => self.threads = if value == "all" { None } else { Some(num(value, bad)?) },
            _ => return Err(CliError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k, v)
                .map_err(|e| CliError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// Defaults, then the config file, then flags.
    pub fn resolve(args: &RunArgs) -> Result<Self> {
        let mut s = Settings::default();
        if let Some(path) = &args.config {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            s.apply_file_text(&text)?;
        }
        let flags: [(&str, Option<String>); 12] = [
            ("sigma", args.sigma.map(|v| v.to_string())),
            ("tau", args.tau.map(|v| v.to_string())),
            ("k", args.k.map(|v| v.to_string())),
            ("svm-c", args.svm_c.map(|v| v.to_string())),
            ("seed", args.seed.map(|v| v.to_string())),
            ("epoch-len", args.epoch_len.map(|v| v.to_string())),
            ("order", args.order.map(|v| v.to_string())),
            ("low-hz", args.low_hz.map(|v| v.to_string())),
            ("high-hz", args.high_hz.map(|v| v.to_string())),
            ("recenter-before-cluster", args.recenter_before_cluster.then(|| "true".into())),
            ("fpr-mode", args.fpr_mode.map(|v| v.to_string())),
            ("threads", args.threads.map(|v| v.to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                s.set(k, &v)?;
            }
        }
        if s.threads == Some(0) {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        s.run.validate()?;
        Ok(s)
    }
}

/// Help epilogue listing every configuration key with its default.
pub fn defaults_help() -> String {
    let d = Settings::default();
    let mut out = String::from("Run configuration (flag or config-file key = default):\n");
    for key in KEYS {
        out.push_str(&format!("  {key} = {}\n", d.get(key).unwrap_or_default()));
    }
    out
}

/// The clap command with the defaults epilogue on every data subcommand.
pub fn command() -> clap::Command {
    let help = defaults_help();
    let mut cmd = Cli::command();
    for name in ["features", "cluster", "loso"] {
        cmd = cmd.mut_subcommand(name, |s| s.after_help(help.clone()));
    }
    cmd
}

pub fn parse_from<I, T>(args: I) -> std::result::Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = command().try_get_matches_from(args)?;
    Cli::from_arg_matches(&matches)
}

#[derive(Serialize)]
struct Output<'a, T: Serialize> {
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    #[serde(flatten)]
    body: T,
}

fn render<T: Serialize>(command: &'static str, config: &RunConfig, body: T) -> String {
    let doc = Output {
        version: VERSION,
        command,
        config,
        body,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report types serialize");
    s.push('\n');
    s
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn read_store(path: &Path) -> Result<Vec<SubjectEpochs>> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    epoch_store_read(&bytes).map_err(|source| CliError::Ingest {
        context: path.display().to_string(),
        source,
    })
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Features(a) => cmd_features(&a),
        Command::Cluster(a) => cmd_cluster(&a),
        Command::Loso(a) => cmd_loso(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

/// `.edf` files directly under `dir` and one directory level below, sorted.
fn edf_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let is_edf = |p: &Path| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("edf"));
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_dir() {
            for inner in fs::read_dir(&path).map_err(io_err(&path))? {
                let p = inner.map_err(io_err(&path))?.path();
                if p.is_file() && is_edf(&p) {
                    out.push(p);
                }
            }
        } else if is_edf(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Recording id (file stem) and subject id (stem up to the first `_`).
pub fn recording_ids(path: &Path) -> (String, String) {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let subject = stem.split('_').next().unwrap_or(&stem).to_string();
    (stem, subject)
}

pub fn cmd_features(a: &FeaturesArgs) -> Result<()> {
    let settings = Settings::resolve(&a.run)?;
    let annotations = match &a.annotations {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            load_annotations(&text).map_err(|source| CliError::Ingest {
                context: path.display().to_string(),
                source,
            })?
        }
        None => Default::default(),
    };
    let files = edf_files(&a.input)?;
    if files.is_empty() {
        return Err(CliError::Config(format!("no .edf files under {}", a.input.display())));
    }
    let mut groups: BTreeMap<String, Vec<(String, PathBuf)>> = BTreeMap::new();
    for path in files {
        let (stem, subject) = recording_ids(&path);
        groups.entry(subject).or_default().push((stem, path));
    }
    let known: Vec<&String> = groups.values().flatten().map(|(s, _)| s).collect();
    for id in annotations.recordings.keys() {
        if !known.contains(&id) {
            eprintln!("warning: annotations name recording '{id}' with no matching file");
        }
    }

    let subjects = with_threads(settings.threads, || -> Result<Vec<SubjectEpochs>> {
        let mut subjects = Vec::new();
        for (subject, recs) in &groups {
            let mut recordings = Vec::new();
            for (stem, path) in recs {
                let bytes = fs::read(path).map_err(io_err(path))?;
                let context = || path.display().to_string();
                let (_, rec) = read_edf(&bytes).map_err(|source| CliError::Ingest {
                    context: context(),
                    source,
                })?;
                let rec: Recording = rec
                    .with_annotations(annotations.get(stem).to_vec())
                    .map_err(|source| CliError::Signal {
                        context: context(),
                        source,
                    })?;
                recordings.push(rec);
            }
            subjects.push(extract_subject(subject, &recordings, &settings.run)?);
        }
        Ok(subjects)
    })??;
    let bytes = epoch_store_write(&subjects).map_err(|source| CliError::Ingest {
        context: a.output.display().to_string(),
        source,
    })?;
    write_file(&a.output, &bytes)?;
    eprintln!(
        "wrote {} subjects, {} epochs to {}",
        subjects.len(),
        subjects.iter().map(|s| s.epochs.len()).sum::<usize>(),
        a.output.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ClusterBody<'a> {
    subjects: Vec<&'a str>,
    clusters: &'a ClusterModel,
}

pub fn cmd_cluster(a: &ClusterArgs) -> Result<()> {
    let settings = Settings::resolve(&a.run)?;
    let subjects = read_store(&a.input)?;
    let cfg = &settings.run;
    let (ids, model) = with_threads(settings.threads, || -> Result<_> {
        let ids: Vec<String> = subjects.iter().map(|s| s.id.clone()).collect();
        let records = build_records(subjects, cfg.shrinkage, &cfg.frechet)?;
        Ok((ids, cluster_subjects(&records, cfg)?))
    })??;
    let json = render(
        "cluster",
        cfg,
        ClusterBody {
            subjects: ids.iter().map(String::as_str).collect(),
            clusters: &model,
        },
    );
    match &a.output {
        Some(path) => write_file(path, json.as_bytes()),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct LosoBody<'a> {
    clustered: &'a MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline: Option<&'a MetricsReport>,
}

pub fn cmd_loso(a: &LosoArgs) -> Result<()> {
    let settings = Settings::resolve(&a.run)?;
    let subjects = read_store(&a.input)?;
    let cfg = &settings.run;
    let (clustered, baseline) = with_threads(settings.threads, || -> Result<_> {
        let records = build_records(subjects, cfg.shrinkage, &cfg.frechet)?;
        let clustered = loso_run(&records, cfg, TrainingMode::Clustered)?;
        let baseline = if a.baseline {
            Some(loso_run(&records, cfg, TrainingMode::Baseline)?)
        } else {
            None
        };
        Ok((clustered, baseline))
    })??;
    if let Some(path) = &a.output {
        let json = render(
            "loso",
            cfg,
            LosoBody {
                clustered: &clustered,
                baseline: baseline.as_ref(),
            },
        );
        write_file(path, json.as_bytes())?;
    }
    match &baseline {
        Some(b) => {
            println!("Cluster-selected training\n");
            print!("{}", clustered.to_table());
            println!("\nBaseline: train on all other subjects\n");
            print!("{}", b.to_table());
        }
        None => print!("{}", clustered.to_table()),
    }
    Ok(())
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_clusters: a.clusters,
        subjects_per_cluster: a.subjects_per_cluster,
        epochs_per_subject: a.epochs,
        channels: a.channels,
        features: a.features,
        separation: a.separation,
        within_spread: a.within_spread,
        seizure_fraction: a.seizure_fraction,
        seed: a.seed,
        ..Default::default()
    };
    let pop = synth_population(&cfg).map_err(|source| CliError::Signal {
        context: "synth".into(),
        source,
    })?;
    let bytes = epoch_store_write(&pop.subjects).map_err(|source| CliError::Ingest {
        context: a.output.display().to_string(),
        source,
    })?;
    write_file(&a.output, &bytes)?;
    eprintln!("wrote {} synthetic subjects to {}", pop.subjects.len(), a.output.display());
    Ok(())
}
