//! Running policies over a workload and writing run directories.
//!
//! A run directory holds `manifest.json` plus, per policy, `events.jsonl`,
//! `actions.jsonl` and `report.json`. Comparisons put each policy in its own
//! subdirectory and add `comparison.csv` and `summary.txt`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::thread;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::daemon::DelayReference;
use crate::metrics::{self, tail_waste_reduction_pct, Comparison, MetricsError, MetricsReport};
use crate::model::{ClusterConfig, JobSpec, PolicyKind};
use crate::sim::{SimError, SimOptions, SimOutcome, Simulation};
use crate::workload::{GeneratorConfig, WorkloadError};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("config: {0}")]
    Config(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |e| ExperimentError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Settings a config file may carry. Missing fields take defaults.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub cluster: ClusterConfig,
    pub generator: GeneratorConfig,
    pub seed: u64,
    pub delay_reference: DelayReference,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_json(&fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            delay_reference: self.delay_reference,
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }
}

#[derive(Debug, Clone)]
pub struct PolicyRun {
    pub report: MetricsReport,
    pub outcome: SimOutcome,
}

pub fn run_policy(
    jobs: &[JobSpec],
    cluster: &ClusterConfig,
    policy: PolicyKind,
    options: SimOptions,
) -> Result<PolicyRun, ExperimentError> {
    let outcome = Simulation::with_options(jobs, cluster, policy, options)?.run()?;
    let report = metrics::aggregate(&outcome.runtimes, policy)?;
    Ok(PolicyRun { report, outcome })
}

/// Runs all four policies on separate threads. Results are in
/// [`PolicyKind::ALL`] order, baseline first.
pub fn compare_all(
    jobs: &[JobSpec],
    cluster: &ClusterConfig,
    options: SimOptions,
) -> Result<(Vec<PolicyRun>, Comparison), ExperimentError> {
    let results: Vec<Result<PolicyRun, ExperimentError>> = thread::scope(|s| {
        let handles: Vec<_> = PolicyKind::ALL
            .iter()
            .map(|&p| s.spawn(move || run_policy(jobs, cluster, p, options)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("policy thread panicked"))
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let reports: Vec<MetricsReport> = runs.iter().map(|r| r.report.clone()).collect();
    let comparison = metrics::compare(&reports)?;
    Ok((runs, comparison))
}

/// Human-readable summary: the table, then per-policy tail-waste reduction.
pub fn summary_text(runs: &[PolicyRun], comparison: &Comparison) -> String {
    let mut out = comparison.render_table();
    let baseline = &runs[0].report;
    out.push('\n');
    for run in &runs[1..] {
        let line = match tail_waste_reduction_pct(baseline, &run.report) {
            Some(pct) => format!("{}: tail waste reduced by {pct:.1}%\n", run.report.policy),
            None => format!(
                "{}: tail waste reduction undefined (baseline has none)\n",
                run.report.policy
            ),
        };
        out.push_str(&line);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of_file(path: &Path) -> Result<Self, ExperimentError> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        Ok(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub policies: Vec<PolicyKind>,
    /// Event-log digests, one per policy.
    pub event_log_sha256: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig, inputs: Vec<InputDigest>) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            inputs,
            config_hash: config.hash(),
            config: config.clone(),
            policies: Vec::new(),
            event_log_sha256: Vec::new(),
        }
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), ExperimentError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(contents).map_err(io_err(path))
}

/// Writes `events.jsonl`, `actions.jsonl` and `report.json` into `dir`.
pub fn write_policy_outputs(dir: &Path, run: &PolicyRun) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_file(&dir.join("events.jsonl"), run.outcome.log.to_jsonl().as_bytes())?;
    let mut actions = Vec::new();
    for a in &run.outcome.actions {
        serde_json::to_writer(&mut actions, a).expect("action serializes");
        actions.push(b'\n');
    }
    write_file(&dir.join("actions.jsonl"), &actions)?;
    let mut report = run.report.to_json_pretty();
    report.push('\n');
    write_file(&dir.join("report.json"), report.as_bytes())
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    write_file(&dir.join("manifest.json"), text.as_bytes())
}

/// Writes a single-policy run directory.
pub fn write_run_dir(dir: &Path, run: &PolicyRun, mut manifest: Manifest) -> Result<(), ExperimentError> {
    write_policy_outputs(dir, run)?;
    manifest.policies = vec![run.report.policy];
    manifest.event_log_sha256 = vec![run.outcome.log.digest()];
    write_manifest(dir, &manifest)
}

/// Writes a comparison run directory with one subdirectory per policy.
pub fn write_compare_dir(
    dir: &Path,
    runs: &[PolicyRun],
    comparison: &Comparison,
    mut manifest: Manifest,
) -> Result<(), ExperimentError> {
    for run in runs {
        write_policy_outputs(&dir.join(run.report.policy.as_str()), run)?;
    }
    write_file(&dir.join("comparison.csv"), comparison.to_csv().as_bytes())?;
    write_file(&dir.join("summary.txt"), summary_text(runs, comparison).as_bytes())?;
    manifest.policies = runs.iter().map(|r| r.report.policy).collect();
    manifest.event_log_sha256 = runs.iter().map(|r| r.outcome.log.digest()).collect();
    write_manifest(dir, &manifest)
}
