use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{JobId, Seconds};

/// Event kinds. The declaration order is the tie-break order for events at
/// the same instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    Submit,
    SchedulePass,
    JobEndNatural,
    JobLimitReached,
    CheckpointDone,
    DaemonPoll,
    Cancel,
    LimitUpdate,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("kind serializes");
        f.write_str(s.as_str().unwrap_or_default())
    }
}

/// A queued event. Ordered by `(time, kind, job_id)`; `job_id` is `None`
/// for cluster-wide events, which sort ahead of per-job events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimEvent {
    pub time: Seconds,
    pub kind: EventKind,
    pub job_id: Option<JobId>,
    /// New limit for `LimitUpdate`; unused otherwise.
    pub value: Option<Seconds>,
}

impl SimEvent {
    pub fn global(time: Seconds, kind: EventKind) -> Self {
        SimEvent {
            time,
            kind,
            job_id: None,
            value: None,
        }
    }

    pub fn job(time: Seconds, kind: EventKind, job_id: JobId) -> Self {
        SimEvent {
            time,
            kind,
            job_id: Some(job_id),
            value: None,
        }
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    events: BTreeSet<SimEvent>,
}

impl EventQueue {
    pub fn push(&mut self, event: SimEvent) -> bool {
        self.events.insert(event)
    }

    pub fn remove(&mut self, event: &SimEvent) -> bool {
        self.events.remove(event)
    }

    pub fn pop(&mut self) -> Option<SimEvent> {
        self.events.pop_first()
    }

    pub fn peek(&self) -> Option<&SimEvent> {
        self.events.first()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// One processed event, as exported.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub time: Seconds,
    pub kind: EventKind,
    pub job_id: Option<JobId>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    pub records: Vec<LogRecord>,
}

impl EventLog {
    pub fn push(&mut self, time: Seconds, kind: EventKind, job_id: Option<JobId>, detail: String) {
        self.records.push(LogRecord {
            time,
            kind,
            job_id,
            detail,
        });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.records.iter().filter(|r| r.kind == kind).count()
    }

    /// JSON lines with fields in the order time, kind, job_id, detail.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    /// SHA-256 of the JSON-lines export, hex encoded.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for r in &self.records {
            hasher.update(serde_json::to_vec(r).expect("record serializes"));
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}
