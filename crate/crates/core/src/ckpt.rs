//! Checkpoint reports: the file protocol, the per-job ledger, and the
//! next-checkpoint predictor.
//!
//! Applications append one timestamp per line to `<spool>/ckpt_<job_id>.log`
//! after every completed checkpoint. The simulator feeds its checkpoint
//! events through the same line parser, so both paths share validation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use crate::model::{JobId, Seconds};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CkptError {
    #[error("line {line}: not a timestamp: {text:?}")]
    NotNumeric { line: usize, text: String },
    #[error("line {line}: timestamp {value} does not increase (previous {previous})")]
    NotIncreasing {
        line: usize,
        value: Seconds,
        previous: Seconds,
    },
    #[error("job {job_id}: checkpoint at {at} precedes job start {start}")]
    BeforeStart { job_id: JobId, at: Seconds, start: Seconds },
    #[error("job {0} is not tracked")]
    UnknownJob(JobId),
    #[error("job {0} has no checkpoints recorded")]
    NoData(JobId),
}

/// Parses a single report line. Decimal values are floored; blank lines give `None`.
pub fn parse_checkpoint_line(text: &str, line: usize) -> Result<Option<Seconds>, CkptError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(None);
    }
    let not_numeric = || CkptError::NotNumeric {
        line,
        text: trimmed.to_string(),
    };
    if let Ok(v) = trimmed.parse::<u64>() {
        return Ok(Some(v));
    }
    let v: f64 = trimmed.parse().map_err(|_| not_numeric())?;
    if !v.is_finite() || v < 0.0 {
        return Err(not_numeric());
    }
    Ok(Some(v.floor() as Seconds))
}

/// Parses a whole checkpoint file into a strictly increasing list.
pub fn parse_checkpoint_file(text: &str) -> Result<Vec<Seconds>, CkptError> {
    let mut out: Vec<Seconds> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let Some(value) = parse_checkpoint_line(raw, line)? else {
            continue;
        };
        if let Some(&previous) = out.last() {
            if value <= previous {
                return Err(CkptError::NotIncreasing { line, value, previous });
            }
        }
        out.push(value);
    }
    Ok(out)
}

pub fn checkpoint_file_name(job_id: JobId) -> String {
    format!("ckpt_{job_id}.log")
}

pub fn checkpoint_file_path(spool_dir: &Path, job_id: JobId) -> PathBuf {
    spool_dir.join(checkpoint_file_name(job_id))
}

/// Extracts the job id from a `ckpt_<job_id>.log` file name.
pub fn job_id_from_file_name(name: &str) -> Option<JobId> {
    name.strip_prefix("ckpt_")?.strip_suffix(".log")?.parse().ok()
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LedgerEntry {
    pub job_start: Seconds,
    pub timestamps: Vec<Seconds>,
}

impl LedgerEntry {
    pub fn new(job_start: Seconds) -> Self {
        LedgerEntry {
            job_start,
            timestamps: Vec::new(),
        }
    }

    pub fn with_timestamps(job_start: Seconds, timestamps: Vec<Seconds>) -> Self {
        LedgerEntry { job_start, timestamps }
    }

    pub fn last(&self) -> Option<Seconds> {
        self.timestamps.last().copied()
    }
}

/// Average checkpoint interval, rounded to the nearest second.
///
/// With a single checkpoint the interval is measured from job start.
pub fn estimate_interval(entry: &LedgerEntry) -> Option<Seconds> {
    let (&first, &last) = (entry.timestamps.first()?, entry.timestamps.last()?);
    if entry.timestamps.len() == 1 {
        return Some(first.saturating_sub(entry.job_start));
    }
    // Successive differences telescope to last - first.
    let gaps = (entry.timestamps.len() - 1) as u64;
    let span = last - first;
    Some((2 * span + gaps) / (2 * gaps))
}

/// Last checkpoint plus the estimated interval.
pub fn predict_next(entry: &LedgerEntry) -> Option<Seconds> {
    let interval = estimate_interval(entry)?;
    // A zero interval (checkpoint at the very start) still predicts strictly later.
    Some(entry.last()? + interval.max(1))
}

/// Per-job checkpoint history.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CheckpointLedger {
    entries: BTreeMap<JobId, LedgerEntry>,
}

impl CheckpointLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, job_id: JobId, job_start: Seconds) {
        self.entries.insert(job_id, LedgerEntry::new(job_start));
    }

    pub fn insert(&mut self, job_id: JobId, entry: LedgerEntry) {
        self.entries.insert(job_id, entry);
    }

    pub fn remove(&mut self, job_id: JobId) -> Option<LedgerEntry> {
        self.entries.remove(&job_id)
    }

    pub fn get(&self, job_id: JobId) -> Option<&LedgerEntry> {
        self.entries.get(&job_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (JobId, &LedgerEntry)> {
        self.entries.iter().map(|(id, e)| (*id, e))
    }

    /// Appends one report line for a registered job.
    pub fn append_report(&mut self, job_id: JobId, line_text: &str) -> Result<(), CkptError> {
        let entry = self.entries.get_mut(&job_id).ok_or(CkptError::UnknownJob(job_id))?;
        let line = entry.timestamps.len() + 1;
        let Some(at) = parse_checkpoint_line(line_text, line)? else {
            return Ok(());
        };
        if at < entry.job_start {
            return Err(CkptError::BeforeStart {
                job_id,
                at,
                start: entry.job_start,
            });
        }
        if let Some(previous) = entry.last() {
            if at <= previous {
                return Err(CkptError::NotIncreasing {
                    line,
                    value: at,
                    previous,
                });
            }
        }
        entry.timestamps.push(at);
        Ok(())
    }

    /// Replaces a job's history with the contents of its report file.
    pub fn load_file_contents(&mut self, job_id: JobId, job_start: Seconds, text: &str) -> Result<(), CkptError> {
        let timestamps = parse_checkpoint_file(text)?;
        if let Some(&first) = timestamps.first() {
            if first < job_start {
                return Err(CkptError::BeforeStart {
                    job_id,
                    at: first,
                    start: job_start,
                });
            }
        }
        self.entries
            .insert(job_id, LedgerEntry::with_timestamps(job_start, timestamps));
        Ok(())
    }

    pub fn estimate_interval(&self, job_id: JobId) -> Result<Seconds, CkptError> {
        let entry = self.get(job_id).ok_or(CkptError::UnknownJob(job_id))?;
        estimate_interval(entry).ok_or(CkptError::NoData(job_id))
    }

    pub fn predict_next(&self, job_id: JobId) -> Result<Seconds, CkptError> {
        let entry = self.get(job_id).ok_or(CkptError::UnknownJob(job_id))?;
        predict_next(entry).ok_or(CkptError::NoData(job_id))
    }
}

/// One writer, one reader. Readers take whole-ledger snapshots and never
/// see a half-applied append.
#[derive(Debug, Clone, Default)]
pub struct SharedLedger {
    inner: Arc<RwLock<CheckpointLedger>>,
}

impl SharedLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&self, job_id: JobId, job_start: Seconds) {
        self.inner
            .write()
            .expect("ledger lock poisoned")
            .register(job_id, job_start);
    }

    pub fn append_report(&self, job_id: JobId, line: &str) -> Result<(), CkptError> {
        self.inner
            .write()
            .expect("ledger lock poisoned")
            .append_report(job_id, line)
    }

    pub fn snapshot(&self) -> CheckpointLedger {
        self.inner.read().expect("ledger lock poisoned").clone()
    }
}
