//! Slurm command construction and output parsing.
//!
//! Commands are plain argv vectors executed through a [`CommandRunner`], so
//! everything here can be tested without a cluster.

mod live;
mod runner;
mod squeue;
mod timelimit;

use std::fmt;

use crate::model::Seconds;

pub use live::{LiveDaemon, TickReport};
pub use runner::{CommandOutput, CommandRunner, FixtureRunner, ShellRunner};
pub use squeue::{
    expand_hostlist, parse_squeue_output, parse_squeue_rows, squeue_command, SqueueContext, SqueueParse, SqueueRow,
    SQUEUE_FORMAT, SQUEUE_HEADER,
};
pub use timelimit::{format_timelimit, parse_timelimit, TimeLimit};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AdapterError {
    #[error("malformed time limit `{0}`")]
    BadTimeLimit(String),
    #[error("new time limit must be positive")]
    ZeroLimit,
    #[error("job id must be non-negative, got {0}")]
    NegativeJobId(i64),
    #[error("squeue output has no header line `{SQUEUE_HEADER}`")]
    MissingHeader,
    #[error("malformed hostlist `{0}`")]
    BadHostlist(String),
    #[error("`{command}` exited with {status}, expected {expected}: {stderr}")]
    UnexpectedExit {
        command: String,
        status: i32,
        expected: i32,
        stderr: String,
    },
    #[error("`{0}` timed out")]
    Timeout(String),
    #[error("no fixture for `{0}`")]
    NoFixture(String),
    #[error("failed to run `{command}`: {message}")]
    Spawn { command: String, message: String },
    #[error("checkpoint file for job {job_id}: {message}")]
    Checkpoint { job_id: u64, message: String },
}

/// An argv vector plus the exit status that counts as success.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SchedulerCommand {
    pub argv: Vec<String>,
    pub expected_exit: i32,
}

impl SchedulerCommand {
    pub fn program(&self) -> &str {
        &self.argv[0]
    }
}

impl fmt::Display for SchedulerCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.argv.join(" "))
    }
}

fn job_id_token(job_id: i64) -> Result<String, AdapterError> {
    if job_id < 0 {
        return Err(AdapterError::NegativeJobId(job_id));
    }
    Ok(job_id.to_string())
}

/// `scontrol update JobId=<id> TimeLimit=<D-HH:MM:SS>`.
pub fn build_update_command(job_id: i64, new_limit: Seconds) -> Result<SchedulerCommand, AdapterError> {
    if new_limit == 0 {
        return Err(AdapterError::ZeroLimit);
    }
    let id = job_id_token(job_id)?;
    Ok(SchedulerCommand {
        argv: vec![
            "scontrol".into(),
            "update".into(),
            format!("JobId={id}"),
            format!("TimeLimit={}", format_timelimit(new_limit)),
        ],
        expected_exit: 0,
    })
}

/// `scancel <id>`.
pub fn build_cancel_command(job_id: i64) -> Result<SchedulerCommand, AdapterError> {
    Ok(SchedulerCommand {
        argv: vec!["scancel".into(), job_id_token(job_id)?],
        expected_exit: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn golden_commands() {
        assert_eq!(
            build_update_command(1234, 1700).unwrap().to_string(),
            "scontrol update JobId=1234 TimeLimit=0-00:28:20"
        );
        assert_eq!(
            build_update_command(1, 60).unwrap().to_string(),
            "scontrol update JobId=1 TimeLimit=0-00:01:00"
        );
        assert_eq!(build_update_command(1, 0), Err(AdapterError::ZeroLimit));
        assert_eq!(build_cancel_command(1234).unwrap().argv, ["scancel", "1234"]);
        assert_eq!(build_cancel_command(0).unwrap().to_string(), "scancel 0");
        assert_eq!(build_cancel_command(-3), Err(AdapterError::NegativeJobId(-3)));
    }

    proptest! {
        #[test]
        fn builders_are_injective(a in 0i64..1_000_000, b in 0i64..1_000_000, la in 1u64..10_000_000, lb in 1u64..10_000_000) {
            let ca = build_update_command(a, la).unwrap();
            let cb = build_update_command(b, lb).unwrap();
            prop_assert_eq!(ca == cb, (a, la) == (b, lb));
            prop_assert_eq!(build_cancel_command(a).unwrap() == build_cancel_command(b).unwrap(), a == b);
            prop_assert!(["squeue", "scontrol", "scancel"].contains(&ca.program()));
        }
    }
}
