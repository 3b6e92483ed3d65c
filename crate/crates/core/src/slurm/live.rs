use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::NaiveDateTime;

use crate::ckpt::{checkpoint_file_path, CheckpointLedger};
use crate::daemon::{poll_with, ActionVerb, AdjustmentAction, DelayReference, QueueSnapshot};
use crate::model::{ClusterConfig, JobId, PolicyKind};
use crate::slurm::{
    build_cancel_command, build_update_command, parse_squeue_output, squeue_command, AdapterError, CommandRunner,
    SchedulerCommand, SqueueContext,
};

/// Drives a real scheduler: each tick reads the queue with `squeue`, loads
/// `ckpt_<job_id>.log` files from the spool directory, and issues
/// `scontrol`/`scancel` for the policy's decisions.
///
/// Checkpoint files hold seconds on the daemon clock, i.e. since `epoch`.
#[derive(Debug, Clone)]
pub struct LiveDaemon {
    pub policy: PolicyKind,
    pub cluster: ClusterConfig,
    pub reference: DelayReference,
    pub spool_dir: PathBuf,
    pub nodes: Vec<String>,
    pub epoch: NaiveDateTime,
    /// Decide and report, but never run mutating commands.
    pub dry_run: bool,
    extensions: BTreeMap<JobId, u32>,
}

#[derive(Debug, Clone, Default)]
pub struct TickReport {
    pub snapshot: QueueSnapshot,
    pub actions: Vec<AdjustmentAction>,
    /// Commands issued (or that would be issued in a dry run), in order.
    pub commands: Vec<SchedulerCommand>,
    pub warnings: Vec<String>,
}

impl LiveDaemon {
    pub fn new(
        policy: PolicyKind,
        cluster: ClusterConfig,
        spool_dir: PathBuf,
        nodes: Vec<String>,
        epoch: NaiveDateTime,
    ) -> Self {
        LiveDaemon {
            policy,
            cluster,
            reference: DelayReference::default(),
            spool_dir,
            nodes,
            epoch,
            dry_run: false,
            extensions: BTreeMap::new(),
        }
    }

    pub fn extensions_granted(&self, job_id: JobId) -> u32 {
        self.extensions.get(&job_id).copied().unwrap_or(0)
    }

    pub fn tick(&mut self, runner: &mut dyn CommandRunner, now: NaiveDateTime) -> Result<TickReport, AdapterError> {
        let output = runner.run_checked(&squeue_command())?;
        let ctx = SqueueContext {
            epoch: self.epoch,
            now,
            nodes: self.nodes.clone(),
        };
        let parsed = parse_squeue_output(&output.stdout, &ctx)?;
        let mut report = TickReport {
            snapshot: parsed.snapshot,
            warnings: parsed.warnings,
            ..TickReport::default()
        };

        self.extensions
            .retain(|id, _| report.snapshot.running.iter().any(|r| r.job_id == *id));
        let mut ledger = CheckpointLedger::new();
        for job in &mut report.snapshot.running {
            job.extensions_granted = self.extensions_granted(job.job_id);
            let path = checkpoint_file_path(&self.spool_dir, job.job_id);
            let Ok(text) = std::fs::read_to_string(&path) else {
                continue;
            };
            if let Err(e) = ledger.load_file_contents(job.job_id, job.start_time, &text) {
                report.warnings.push(format!("{}: {e}", path.display()));
            }
        }

        report.actions = poll_with(&report.snapshot, &ledger, self.policy, &self.cluster, self.reference);
        for action in &report.actions {
            let id = i64::try_from(action.job_id).unwrap_or(-1);
            let command = match (action.verb, action.new_limit) {
                (ActionVerb::ExtendTo, Some(limit)) => build_update_command(id, limit),
                _ => build_cancel_command(id),
            };
            let command = match command {
                Ok(c) => c,
                Err(e) => {
                    report.warnings.push(format!("job {}: {e}", action.job_id));
                    continue;
                }
            };
            if !self.dry_run {
                if let Err(e) = runner.run_checked(&command) {
                    report.warnings.push(e.to_string());
                    continue;
                }
            }
            if action.verb == ActionVerb::ExtendTo {
                *self.extensions.entry(action.job_id).or_default() += 1;
            }
            report.commands.push(command);
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slurm::{CommandOutput, FixtureRunner, SQUEUE_HEADER};

    fn at(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S").unwrap()
    }

    fn daemon(policy: PolicyKind, spool: &std::path::Path) -> LiveDaemon {
        LiveDaemon::new(
            policy,
            ClusterConfig::default(),
            spool.to_path_buf(),
            vec!["cn01".into(), "cn02".into()],
            at("2025-05-01T00:00:00"),
        )
    }

    fn runner(queue: &str) -> FixtureRunner {
        FixtureRunner::new()
            .respond(&squeue_command(), CommandOutput::ok(queue))
            .with_fallback(CommandOutput::ok(""))
    }

    #[test]
    fn cancels_and_extends_from_spool_files() {
        let spool = tempfile::tempdir().unwrap();
        std::fs::write(spool.path().join("ckpt_7.log"), "420\n840\n1260\n").unwrap();
        let queue = format!("{SQUEUE_HEADER}\n7|RUNNING|2025-05-01T00:00:00|24:00|cn01|(null)|1\n");
        let now = at("2025-05-01T00:21:05");

        let mut ec = daemon(PolicyKind::EarlyCancel, spool.path());
        let mut r = runner(&queue);
        let report = ec.tick(&mut r, now).unwrap();
        assert_eq!(report.commands[0].to_string(), "scancel 7");
        assert_eq!(r.calls.len(), 2);

        let mut ext = daemon(PolicyKind::Extend, spool.path());
        let mut r = runner(&queue);
        let report = ext.tick(&mut r, now).unwrap();
        assert_eq!(
            report.commands[0].to_string(),
            "scontrol update JobId=7 TimeLimit=0-00:28:20"
        );
        assert_eq!(ext.extensions_granted(7), 1);
    }

    #[test]
    fn dry_run_issues_nothing() {
        let spool = tempfile::tempdir().unwrap();
        std::fs::write(spool.path().join("ckpt_7.log"), "420\n840\n1260\n").unwrap();
        let queue = format!("{SQUEUE_HEADER}\n7|RUNNING|2025-05-01T00:00:00|24:00|cn01|(null)|1\n");
        let mut d = daemon(PolicyKind::EarlyCancel, spool.path());
        d.dry_run = true;
        let mut r = runner(&queue);
        let report = d.tick(&mut r, at("2025-05-01T00:21:05")).unwrap();
        assert_eq!(report.commands.len(), 1);
        assert_eq!(r.calls.len(), 1);
    }

    #[test]
    fn jobs_without_reports_and_bad_files() {
        let spool = tempfile::tempdir().unwrap();
        std::fs::write(spool.path().join("ckpt_8.log"), "oops\n").unwrap();
        let queue = format!(
            "{SQUEUE_HEADER}\n7|RUNNING|2025-05-01T00:00:00|24:00|cn01|(null)|1\n8|RUNNING|2025-05-01T00:00:00|24:00|cn02|(null)|1\n"
        );
        let mut d = daemon(PolicyKind::EarlyCancel, spool.path());
        let report = d.tick(&mut runner(&queue), at("2025-05-01T00:21:05")).unwrap();
        assert!(report.actions.is_empty());
        assert_eq!(report.warnings.len(), 1);
    }
}
