//! EDF reading and writing, seizure annotation CSV, and the `RSEL1` epoch
//! store.
//!
//! The EDF support covers the plain (non-plus) subset: a 256-byte fixed
//! header, 256 bytes of per-signal fields, then data records of 16-bit
//! little-endian samples. Every length taken from a file is checked before
//! use, so malformed input yields an error rather than a panic.
//!
//! `RSEL1` layout (all integers `u32`, all reals `f64`, little-endian):
//!
//! ```text
//! "RSEL1" n_subjects
//! per subject:
//!   id_len id_bytes n_epochs channels features epoch_len_sec total_hours
//!   n_events (onset offset)*n_events
//!   label_u8*n_epochs start_sec*n_epochs
//!   features (row-major channels×features per epoch)
//!   crc32 of the block bytes above
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::pipeline::SubjectEpochs;
use crate::signal::{Epoch, Recording};
use crate::spd::FeatureMatrix;

pub const EDF_HEADER_BYTES: usize = 256;
pub const EDF_SIGNAL_HEADER_BYTES: usize = 256;
pub const STORE_MAGIC: &[u8; 5] = b"RSEL1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("malformed EDF header: {0}")]
    MalformedHeader(String),
    #[error("EDF data truncated: header implies {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("signals have different sample rates")]
    MixedRates,
    #[error("cannot encode as EDF: {0}")]
    Unencodable(String),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: offset not after onset")]
    NegativeDuration { line: usize },
    #[error("overlapping seizure intervals in recording {0}")]
    OverlapError(String),
    #[error("not an RSEL1 epoch store")]
    BadMagic,
    #[error("subject block {0} is truncated or corrupt")]
    ChecksumMismatch(usize),
    #[error("non-finite value in subject {0}")]
    NonFiniteFeature(String),
    #[error("invalid epoch store contents: {0}")]
    InvalidStore(String),
}

pub type Result<T> = std::result::Result<T, IngestError>;

/// Per-signal header fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdfSignal {
    pub label: String,
    pub transducer: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefiltering: String,
    pub samples_per_record: usize,
}

impl EdfSignal {
    /// Digital to physical conversion; the digital extremes map exactly to
    /// the physical extremes.
    pub fn to_physical(&self, d: i16) -> f64 {
        let d = i32::from(d);
        if d == self.digital_min {
            return self.physical_min;
        }
        if d == self.digital_max {
            return self.physical_max;
        }
        let gain = (self.physical_max - self.physical_min)
            / f64::from(self.digital_max - self.digital_min);
        self.physical_min + f64::from(d - self.digital_min) * gain
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdfHeader {
    pub version: String,
    pub patient_id: String,
    pub recording_id: String,
    pub start_date: String,
    pub start_time: String,
    pub header_bytes: usize,
    /// Number of data records (inferred from the file size when declared -1).
    pub n_records: usize,
    pub record_duration_sec: f64,
    pub signals: Vec<EdfSignal>,
}

impl EdfHeader {
    pub fn n_signals(&self) -> usize {
        self.signals.len()
    }

    fn record_samples(&self) -> usize {
        self.signals.iter().map(|s| s.samples_per_record).sum()
    }
}

/// Cursor over fixed-width ASCII fields.
struct Fields<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Fields<'a> {
    fn take(&mut self, width: usize, what: &str) -> Result<&'a str> {
        let end = self.pos.checked_add(width).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            IngestError::MalformedHeader(format!("header ends inside field '{what}'"))
        })?;
        let raw = &self.bytes[self.pos..end];
        self.pos = end;
        if !raw.is_ascii() {
            return Err(IngestError::MalformedHeader(format!("field '{what}' is not ASCII")));
        }
        Ok(std::str::from_utf8(raw).expect("ASCII is UTF-8").trim_matches(|c| c == ' ' || c == '\0'))
    }

    fn text(&mut self, width: usize, what: &str) -> Result<String> {
        self.take(width, what).map(str::to_string)
    }

    fn number<T: std::str::FromStr>(&mut self, width: usize, what: &str) -> Result<T> {
        let s = self.take(width, what)?;
        s.parse()
            .map_err(|_| IngestError::MalformedHeader(format!("field '{what}' = '{s}' is not numeric")))
    }

    fn real(&mut self, width: usize, what: &str) -> Result<f64> {
        let v: f64 = self.number(width, what)?;
        if !v.is_finite() {
            return Err(IngestError::MalformedHeader(format!("field '{what}' is not finite")));
        }
        Ok(v)
    }
}

/// Parses and validates the fixed and per-signal headers. The returned
/// record count is checked against the data length.
pub fn parse_edf_header(bytes: &[u8]) -> Result<EdfHeader> {
    if bytes.len() < EDF_HEADER_BYTES {
        return Err(IngestError::MalformedHeader(format!(
            "file has {} bytes, fixed header needs {EDF_HEADER_BYTES}",
            bytes.len()
        )));
    }
    let mut f = Fields { bytes, pos: 0 };
    let version = f.text(8, "version")?;
    let patient_id = f.text(80, "patient id")?;
    let recording_id = f.text(80, "recording id")?;
    let start_date = f.text(8, "start date")?;
    let start_time = f.text(8, "start time")?;
    let header_bytes: usize = f.number(8, "header bytes")?;
    f.take(44, "reserved")?;
    let declared_records: i64 = f.number(8, "number of records")?;
    let record_duration_sec = f.real(8, "record duration")?;
    let ns: usize = f.number(4, "number of signals")?;

    if ns == 0 {
        return Err(IngestError::MalformedHeader("0 signals declared".into()));
    }
    let expected_header = ns
        .checked_mul(EDF_SIGNAL_HEADER_BYTES)
        .and_then(|v| v.checked_add(EDF_HEADER_BYTES))
        .ok_or_else(|| IngestError::MalformedHeader("signal count overflows".into()))?;
    if header_bytes != expected_header {
        return Err(IngestError::MalformedHeader(format!(
            "header size {header_bytes} does not match {ns} signals ({expected_header})"
        )));
    }
    if bytes.len() < expected_header {
        return Err(IngestError::MalformedHeader(format!(
            "file has {} bytes, headers need {expected_header}",
            bytes.len()
        )));
    }
    if !(record_duration_sec > 0.0) {
        return Err(IngestError::MalformedHeader(format!(
            "record duration {record_duration_sec} must be positive"
        )));
    }

    // per-signal fields are stored field-major: all labels, then all transducers, ...
    let mut column = |width: usize, what: &str| -> Result<Vec<&str>> {
        (0..ns).map(|_| f.take(width, what)).collect()
    };
    let labels = column(16, "label")?;
    let transducers = column(80, "transducer")?;
    let dims = column(8, "physical dimension")?;
    let pmins = column(8, "physical minimum")?;
    let pmaxs = column(8, "physical maximum")?;
    let dmins = column(8, "digital minimum")?;
    let dmaxs = column(8, "digital maximum")?;
    let prefilters = column(80, "prefiltering")?;
    let sprs = column(8, "samples per record")?;
    column(32, "signal reserved")?;

    let num = |s: &str, what: &str| -> Result<f64> {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| IngestError::MalformedHeader(format!("{what} '{s}' is not numeric")))
    };
    let int = |s: &str, what: &str| -> Result<i64> {
        s.parse::<i64>()
            .map_err(|_| IngestError::MalformedHeader(format!("{what} '{s}' is not an integer")))
    };
    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        let physical_min = num(pmins[i], "physical minimum")?;
        let physical_max = num(pmaxs[i], "physical maximum")?;
        let digital_min = int(dmins[i], "digital minimum")?;
        let digital_max = int(dmaxs[i], "digital maximum")?;
        let spr = int(sprs[i], "samples per record")?;
        let range = i64::from(i16::MIN)..=i64::from(i16::MAX);
        if !range.contains(&digital_min) || !range.contains(&digital_max) || digital_max <= digital_min {
            return Err(IngestError::MalformedHeader(format!(
                "signal {i}: digital range [{digital_min}, {digital_max}] invalid"
            )));
        }
        if physical_max == physical_min {
            return Err(IngestError::MalformedHeader(format!(
                "signal {i}: physical minimum equals maximum"
            )));
        }
        if spr < 1 {
            return Err(IngestError::MalformedHeader(format!(
                "signal {i}: {spr} samples per record"
            )));
        }
        signals.push(EdfSignal {
            label: labels[i].to_string(),
            transducer: transducers[i].to_string(),
            physical_dimension: dims[i].to_string(),
            physical_min,
            physical_max,
            digital_min: digital_min as i32,
            digital_max: digital_max as i32,
            prefiltering: prefilters[i].to_string(),
            samples_per_record: usize::try_from(spr)
                .map_err(|_| IngestError::MalformedHeader("samples per record too large".into()))?,
        });
    }

    let mut header = EdfHeader {
        version,
        patient_id,
        recording_id,
        start_date,
        start_time,
        header_bytes,
        n_records: 0,
        record_duration_sec,
        signals,
    };
    let record_bytes = header
        .signals
        .iter()
        .try_fold(0usize, |acc, s| acc.checked_add(s.samples_per_record))
        .and_then(|n| n.checked_mul(2))
        .ok_or_else(|| IngestError::MalformedHeader("record size overflows".into()))?;
    let available = bytes.len() - header_bytes;
    header.n_records = match declared_records {
        -1 => available / record_bytes,
        n if n >= 0 => {
            let n = usize::try_from(n)
                .map_err(|_| IngestError::MalformedHeader("record count too large".into()))?;
            let needed = n
                .checked_mul(record_bytes)
                .ok_or_else(|| IngestError::MalformedHeader("data size overflows".into()))?;
            if needed > available {
                return Err(IngestError::TruncatedData {
                    expected: header_bytes.saturating_add(needed),
                    found: bytes.len(),
                });
            }
            n
        }
        n => {
            return Err(IngestError::MalformedHeader(format!("record count {n}")));
        }
    };
    Ok(header)
}

/// Parses an EDF file into its header and a recording in physical units.
pub fn read_edf(bytes: &[u8]) -> Result<(EdfHeader, Recording)> {
    let header = parse_edf_header(bytes)?;
    let spr = header.signals[0].samples_per_record;
    if header.signals.iter().any(|s| s.samples_per_record != spr) {
        return Err(IngestError::MixedRates);
    }
    let fs = spr as f64 / header.record_duration_sec;
    if !fs.is_finite() || fs <= 0.0 {
        return Err(IngestError::MalformedHeader(format!("sample rate {fs}")));
    }
    let ns = header.n_signals();
    let n_samples = header.n_records * spr;
    let mut channels: Vec<Vec<f64>> = (0..ns).map(|_| Vec::with_capacity(n_samples)).collect();
    let record_bytes = header.record_samples() * 2;
    for r in 0..header.n_records {
        let record = &bytes[header.header_bytes + r * record_bytes..][..record_bytes];
        for (s, signal) in header.signals.iter().enumerate() {
            let chunk = &record[s * spr * 2..(s + 1) * spr * 2];
            channels[s].extend(
                chunk
                    .chunks_exact(2)
                    .map(|b| signal.to_physical(i16::from_le_bytes([b[0], b[1]]))),
            );
        }
    }
    let labels = header.signals.iter().map(|s| s.label.clone()).collect();
    let rec = Recording::new(fs, channels, Vec::new())
        .map_err(|e| IngestError::MalformedHeader(e.to_string()))?
        .with_labels(labels);
    Ok((header, rec))
}

/// Parses an EDF file into a recording in physical units.
pub fn parse_edf(bytes: &[u8]) -> Result<Recording> {
    read_edf(bytes).map(|(_, rec)| rec)
}

#[derive(Clone, Copy)]
enum Round {
    Down,
    Up,
}

/// Shortest decimal rendering within `width` characters, rounded in the
/// given direction.
fn fit_number(x: f64, width: usize, round: Round) -> Option<(String, f64)> {
    for decimals in (0..width).rev() {
        let scale = 10f64.powi(decimals as i32);
        let scaled = match round {
            Round::Down => (x * scale).floor(),
            Round::Up => (x * scale).ceil(),
        };
        let s = format!("{:.*}", decimals, scaled / scale);
        if s.len() <= width {
            let v: f64 = s.parse().ok()?;
            let ok = match round {
                Round::Down => v <= x,
                Round::Up => v >= x,
            };
            if ok {
                return Some((s, v));
            }
        }
    }
    None
}

fn push_field(out: &mut Vec<u8>, s: &str, width: usize) {
    let mut bytes: Vec<u8> = s.bytes().filter(u8::is_ascii).take(width).collect();
    bytes.resize(width, b' ');
    out.extend(bytes);
}

/// Encodes a recording as EDF with 1 s records and full 16-bit digital
/// range. The physical range of each channel is its data range rounded
/// outward to fit the 8-character header fields; samples are quantized to
/// the nearest digital level.
pub fn write_edf(rec: &Recording) -> Result<Vec<u8>> {
    let fs = rec.fs();
    if fs.fract() != 0.0 || fs > 99_999_999.0 {
        return Err(IngestError::Unencodable(format!("sample rate {fs} is not an integer")));
    }
    let spr = fs as usize;
    if rec.n_samples() % spr != 0 {
        return Err(IngestError::Unencodable(format!(
            "{} samples is not a whole number of 1 s records",
            rec.n_samples()
        )));
    }
    let n_records = rec.n_samples() / spr;
    let ns = rec.n_channels();
    let (dmin, dmax) = (i32::from(i16::MIN), i32::from(i16::MAX));

    let mut ranges = Vec::with_capacity(ns);
    for (c, ch) in rec.channels().iter().enumerate() {
        let lo = ch.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ch.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() || !hi.is_finite() {
            return Err(IngestError::Unencodable(format!("channel {c} is empty or non-finite")));
        }
        let (lo, hi) = if lo == hi { (lo - 1.0, hi + 1.0) } else { (lo, hi) };
        let pmin = fit_number(lo, 8, Round::Down);
        let pmax = fit_number(hi, 8, Round::Up);
        match (pmin, pmax) {
            (Some(a), Some(b)) if a.1 < b.1 => ranges.push((a, b)),
            _ => {
                return Err(IngestError::Unencodable(format!(
                    "channel {c} range [{lo}, {hi}] does not fit the header fields"
                )))
            }
        }
    }

    let header_bytes = EDF_HEADER_BYTES + ns * EDF_SIGNAL_HEADER_BYTES;
    let mut out = Vec::with_capacity(header_bytes + 2 * rec.n_samples() * ns);
    push_field(&mut out, "0", 8);
    push_field(&mut out, "X X X X", 80);
    push_field(&mut out, "Startdate X X X X", 80);
    push_field(&mut out, "01.01.01", 8);
    push_field(&mut out, "00.00.00", 8);
    push_field(&mut out, &header_bytes.to_string(), 8);
    push_field(&mut out, "", 44);
    push_field(&mut out, &n_records.to_string(), 8);
    push_field(&mut out, "1", 8);
    push_field(&mut out, &ns.to_string(), 4);
    for label in rec.labels() {
        push_field(&mut out, label, 16);
    }
    for _ in 0..ns {
        push_field(&mut out, "", 80);
    }
    for _ in 0..ns {
        push_field(&mut out, "uV", 8);
    }
    for ((s, _), _) in &ranges {
        push_field(&mut out, s, 8);
    }
    for (_, (s, _)) in &ranges {
        push_field(&mut out, s, 8);
    }
    for _ in 0..ns {
        push_field(&mut out, &dmin.to_string(), 8);
    }
    for _ in 0..ns {
        push_field(&mut out, &dmax.to_string(), 8);
    }
    for _ in 0..ns {
        push_field(&mut out, "", 80);
    }
    for _ in 0..ns {
        push_field(&mut out, &spr.to_string(), 8);
    }
    for _ in 0..ns {
        push_field(&mut out, "", 32);
    }
    debug_assert_eq!(out.len(), header_bytes);

    let span = f64::from(dmax - dmin);
    for r in 0..n_records {
        for (c, ch) in rec.channels().iter().enumerate() {
            let ((_, pmin), (_, pmax)) = ranges[c];
            for &x in &ch[r * spr..(r + 1) * spr] {
                let d = ((x - pmin) / (pmax - pmin) * span + f64::from(dmin)).round();
                let d = d.clamp(f64::from(dmin), f64::from(dmax)) as i16;
                out.extend(d.to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Seizure intervals per recording id, sorted and non-overlapping.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub recordings: BTreeMap<String, Vec<(f64, f64)>>,
}

impl AnnotationFile {
    /// Intervals for `id`; empty when the recording has none.
    pub fn get(&self, id: &str) -> &[(f64, f64)] {
        self.recordings.get(id).map_or(&[], Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.recordings.is_empty()
    }
}

/// Parses `recording_id,onset_sec,offset_sec` lines. Blank lines and lines
/// starting with `#` are skipped.
pub fn load_annotations(text: &str) -> Result<AnnotationFile> {
    let mut recordings: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let malformed = |reason: &str| IngestError::MalformedLine {
            line,
            reason: reason.into(),
        };
        let [id, on, off] = parts[..] else {
            return Err(malformed("expected 3 comma-separated fields"));
        };
        if id.is_empty() {
            return Err(malformed("empty recording id"));
        }
        let parse = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0);
        let (Some(on), Some(off)) = (parse(on), parse(off)) else {
            return Err(malformed("onset and offset must be non-negative numbers"));
        };
        if off <= on {
            return Err(IngestError::NegativeDuration { line });
        }
        recordings.entry(id.to_string()).or_default().push((on, off));
    }
    for (id, intervals) in recordings.iter_mut() {
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        if intervals.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(IngestError::OverlapError(id.clone()));
        }
    }
    Ok(AnnotationFile { recordings })
}

fn put_u32(out: &mut Vec<u8>, v: usize, what: &str) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| IngestError::InvalidStore(format!("{what} exceeds u32")))?;
    out.extend(v.to_le_bytes());
    Ok(())
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend(v.to_le_bytes());
}

/// Serializes subjects to an `RSEL1` byte buffer. Non-finite values are
/// rejected.
pub fn epoch_store_write(subjects: &[SubjectEpochs]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(STORE_MAGIC);
    put_u32(&mut out, subjects.len(), "subject count")?;
    for s in subjects {
        let non_finite = || IngestError::NonFiniteFeature(s.id.clone());
        let finite = s.epoch_len_sec.is_finite()
            && s.total_hours.is_finite()
            && s.events.iter().all(|(a, b)| a.is_finite() && b.is_finite())
            && s.epochs.iter().all(|e| e.start_sec.is_finite() && e.features.matrix().is_finite());
        if !finite {
            return Err(non_finite());
        }
        let (c, f) = s
            .epochs
            .first()
            .map_or((0, 0), |e| (e.features.channels(), e.features.samples()));
        if s.epochs.iter().any(|e| e.features.channels() != c || e.features.samples() != f) {
            return Err(IngestError::InvalidStore(format!(
                "subject {} mixes feature matrix shapes",
                s.id
            )));
        }

        let mut block = Vec::new();
        put_u32(&mut block, s.id.len(), "id length")?;
        block.extend_from_slice(s.id.as_bytes());
        put_u32(&mut block, s.epochs.len(), "epoch count")?;
        put_u32(&mut block, c, "channel count")?;
        put_u32(&mut block, f, "feature count")?;
        put_f64(&mut block, s.epoch_len_sec);
        put_f64(&mut block, s.total_hours);
        put_u32(&mut block, s.events.len(), "event count")?;
        for &(a, b) in &s.events {
            put_f64(&mut block, a);
            put_f64(&mut block, b);
        }
        block.extend(s.epochs.iter().map(|e| u8::from(e.label)));
        for e in &s.epochs {
            put_f64(&mut block, e.start_sec);
        }
        for e in &s.epochs {
            for &x in e.features.matrix().as_slice() {
                put_f64(&mut block, x);
            }
        }
        let crc = crc32fast::hash(&block);
        out.extend(block);
        out.extend(crc.to_le_bytes());
    }
    Ok(out)
}

/// Bounds-checked reader; running off the end means the block is truncated.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    block: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(IngestError::ChecksumMismatch(self.block))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or(IngestError::ChecksumMismatch(self.block))?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect())
    }
}

/// Parses an `RSEL1` buffer; `epoch_store_read(epoch_store_write(x)) == x`
/// bit for bit.
pub fn epoch_store_read(bytes: &[u8]) -> Result<Vec<SubjectEpochs>> {
    if bytes.len() < STORE_MAGIC.len() || &bytes[..STORE_MAGIC.len()] != STORE_MAGIC {
        return Err(IngestError::BadMagic);
    }
    let mut r = Reader {
        bytes,
        pos: STORE_MAGIC.len(),
        block: 0,
    };
    let n_subjects = r
        .u32()
        .map_err(|_| IngestError::InvalidStore("missing subject count".into()))?;
    let mut subjects = Vec::new();
    for block in 0..n_subjects {
        r.block = block;
        let start = r.pos;
        let id_len = r.u32()?;
        let id = String::from_utf8(r.take(id_len)?.to_vec());
        let n_epochs = r.u32()?;
        let c = r.u32()?;
        let f = r.u32()?;
        let epoch_len_sec = r.f64()?;
        let total_hours = r.f64()?;
        let n_events = r.u32()?;
        let event_values = r.f64s(n_events.checked_mul(2).ok_or(IngestError::ChecksumMismatch(block))?)?;
        let labels = r.take(n_epochs)?.to_vec();
        let starts = r.f64s(n_epochs)?;
        let per_epoch = c.checked_mul(f).ok_or(IngestError::ChecksumMismatch(block))?;
        let values = r.f64s(per_epoch.checked_mul(n_epochs).ok_or(IngestError::ChecksumMismatch(block))?)?;
        let end = r.pos;
        let stored = r.u32()? as u32;
        if crc32fast::hash(&bytes[start..end]) != stored {
            return Err(IngestError::ChecksumMismatch(block));
        }

        let id = id.map_err(|_| IngestError::InvalidStore(format!("subject {block} id is not UTF-8")))?;
        let invalid = |m: String| IngestError::InvalidStore(format!("subject {id}: {m}"));
        if labels.iter().any(|&l| l > 1) {
            return Err(invalid("label byte not 0 or 1".into()));
        }
        let events = event_values.chunks_exact(2).map(|p| (p[0], p[1])).collect();
        let epochs = (0..n_epochs)
            .map(|e| {
                let data = values[e * per_epoch..(e + 1) * per_epoch].to_vec();
                let features = FeatureMatrix::new(Matrix::from_vec(c, f, data))
                    .map_err(|err| invalid(err.to_string()))?;
                Ok(Epoch {
                    features,
                    label: labels[e] == 1,
                    start_sec: starts[e],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        subjects.push(SubjectEpochs {
            id,
            epoch_len_sec,
            total_hours,
            events,
            epochs,
        });
    }
    if r.pos != bytes.len() {
        return Err(IngestError::InvalidStore("trailing bytes after last subject".into()));
    }
    Ok(subjects)
}
