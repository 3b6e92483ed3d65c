//! Workloads: trace ingestion, the filter/scale/mark pipeline, the synthetic
//! generator, and reading/writing job lists.

mod synth;
mod trace;

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::model::{JobSpec, ModelError};

pub use synth::{synthesize_workload, DestinedSummary, GeneratorConfig};
pub use trace::{
    filter_jobs, mark_checkpointing, parse_trace, scale_time, FilterCriteria, FinalState, ScaleFactor, TraceRecord,
    TRACE_COLUMNS,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WorkloadError {
    #[error("line {line}: unknown column `{column}`")]
    UnknownColumn { line: usize, column: String },
    #[error("line {line}: missing required field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: field `{field}` is not a non-negative integer: `{value}`")]
    NotNumeric {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: field `{field}` is negative: `{value}`")]
    Negative {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: field `{field}` is not a boolean: `{value}`")]
    NotBoolean {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("scale factor must be a positive rational, got `{0}`")]
    BadScaleFactor(String),
    #[error("infeasible generator shape: {0}")]
    InfeasibleShape(String),
    #[error("unknown workload format `{0}` (expected csv or jsonl)")]
    UnknownFormat(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for WorkloadError {
    fn from(e: std::io::Error) -> Self {
        WorkloadError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    /// `.jsonl`/`.json` is JSON lines; anything else is CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "json" | "ndjson") => Format::Jsonl,
            _ => Format::Csv,
        }
    }
}

impl FromStr for Format {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" | "json" => Ok(Format::Jsonl),
            _ => Err(WorkloadError::UnknownFormat(s.to_string())),
        }
    }
}

/// Flat CSV row for a job; `ckpt_interval` is empty for non-checkpointing jobs.
#[derive(serde::Serialize, serde::Deserialize)]
struct JobRow {
    job_id: u64,
    submit_time: u64,
    nodes: u32,
    cores_per_node: u32,
    time_limit: u64,
    true_duration: u64,
    checkpointing: bool,
    ckpt_interval: Option<u64>,
}

pub fn write_jobs<W: Write>(jobs: &[JobSpec], format: Format, mut out: W) -> Result<(), WorkloadError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for j in jobs {
                w.serialize(JobRow {
                    job_id: j.job_id,
                    submit_time: j.submit_time,
                    nodes: j.nodes,
                    cores_per_node: j.cores_per_node,
                    time_limit: j.time_limit,
                    true_duration: j.true_duration,
                    checkpointing: j.checkpointing,
                    ckpt_interval: j.ckpt_interval,
                })
                .map_err(|e| WorkloadError::Io(e.to_string()))?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            for j in jobs {
                serde_json::to_writer(&mut out, j).map_err(|e| WorkloadError::Io(e.to_string()))?;
                out.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

/// Reads and validates a job list written by [`write_jobs`].
pub fn read_jobs<R: Read>(input: R, format: Format) -> Result<Vec<JobSpec>, WorkloadError> {
    let jobs = match format {
        Format::Csv => {
            let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
            let mut jobs = Vec::new();
            for row in reader.deserialize::<JobRow>() {
                let row = row.map_err(|e| WorkloadError::Csv {
                    line: e.position().map_or(0, |p| p.line() as usize),
                    message: e.to_string(),
                })?;
                jobs.push(JobSpec {
                    job_id: row.job_id,
                    submit_time: row.submit_time,
                    nodes: row.nodes,
                    cores_per_node: row.cores_per_node,
                    time_limit: row.time_limit,
                    true_duration: row.true_duration,
                    checkpointing: row.checkpointing,
                    ckpt_interval: row.ckpt_interval,
                });
            }
            jobs
        }
        Format::Jsonl => {
            let mut jobs = Vec::new();
            for (idx, line) in BufReader::new(input).lines().enumerate() {
                let line_text = line?;
                if line_text.trim().is_empty() {
                    continue;
                }
                jobs.push(serde_json::from_str(&line_text).map_err(|e| WorkloadError::Json {
                    line: idx + 1,
                    message: e.to_string(),
                })?);
            }
            jobs
        }
    };
    for j in &jobs {
        j.validate()?;
    }
    Ok(jobs)
}

pub fn read_jobs_file(path: &Path) -> Result<Vec<JobSpec>, WorkloadError> {
    let file = std::fs::File::open(path).map_err(|e| WorkloadError::Io(format!("{}: {e}", path.display())))?;
    read_jobs(file, Format::from_path(path))
}

pub fn write_jobs_file(jobs: &[JobSpec], path: &Path) -> Result<(), WorkloadError> {
    let file = std::fs::File::create(path).map_err(|e| WorkloadError::Io(format!("{}: {e}", path.display())))?;
    let mut out = std::io::BufWriter::new(file);
    write_jobs(jobs, Format::from_path(path), &mut out)?;
    out.flush()?;
    Ok(())
}
