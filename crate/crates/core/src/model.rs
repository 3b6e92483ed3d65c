//! Job and cluster types shared by the simulator, the daemon and the reports.
//!
//! Time is integer seconds on a clock starting at 0. Jobs always request
//! whole nodes and occupy them exclusively.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub type Seconds = u64;
pub type JobId = u64;
pub type NodeId = u32;
/// Cores multiplied by seconds.
pub type CoreSeconds = u64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("job {job_id}: {reason}")]
    InvalidSpec { job_id: JobId, reason: &'static str },
    #[error("illegal transition: job in state {state} cannot accept event {event}")]
    IllegalTransition { state: JobState, event: &'static str },
    #[error("job {job_id}: event at t={at} inconsistent with runtime ({reason})")]
    InconsistentTime {
        job_id: JobId,
        at: Seconds,
        reason: &'static str,
    },
    #[error("job {0} has not finished")]
    NotFinished(JobId),
    #[error("job {job_id}: limit {new_limit} does not exceed current limit {current}")]
    LimitNotIncreased {
        job_id: JobId,
        current: Seconds,
        new_limit: Seconds,
    },
    #[error("invalid cluster config: {0}")]
    InvalidCluster(&'static str),
}

/// A job as submitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobSpec {
    pub job_id: JobId,
    pub submit_time: Seconds,
    pub nodes: u32,
    pub cores_per_node: u32,
    pub time_limit: Seconds,
    /// How long the job would run if never interrupted.
    pub true_duration: Seconds,
    pub checkpointing: bool,
    /// Period between checkpoint completions, phase-locked to job start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ckpt_interval: Option<Seconds>,
}

impl JobSpec {
    pub fn cores(&self) -> u64 {
        u64::from(self.nodes) * u64::from(self.cores_per_node)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |reason| {
            Err(ModelError::InvalidSpec {
                job_id: self.job_id,
                reason,
            })
        };
        if self.time_limit == 0 {
            return fail("time_limit must be positive");
        }
        if self.true_duration == 0 {
            return fail("true_duration must be positive");
        }
        if self.nodes == 0 {
            return fail("nodes must be at least 1");
        }
        if self.cores_per_node == 0 {
            return fail("cores_per_node must be at least 1");
        }
        match (self.checkpointing, self.ckpt_interval) {
            (true, None) | (true, Some(0)) => fail("checkpointing job needs a positive ckpt_interval"),
            (false, Some(_)) => fail("ckpt_interval given for a non-checkpointing job"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobState {
    Pending,
    Running,
    Completed,
    Timeout,
    CancelledAtCkpt,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            JobState::Completed | JobState::Timeout | JobState::CancelledAtCkpt
        )
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JobState::Pending => "PENDING",
            JobState::Running => "RUNNING",
            JobState::Completed => "COMPLETED",
            JobState::Timeout => "TIMEOUT",
            JobState::CancelledAtCkpt => "CANCELLED_AT_CKPT",
        })
    }
}

/// Which scheduler path started a job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SchedSource {
    Main,
    Backfill,
}

impl fmt::Display for SchedSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchedSource::Main => "MAIN",
            SchedSource::Backfill => "BACKFILL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LifecycleEvent {
    Start {
        at: Seconds,
        nodes: Vec<NodeId>,
        source: SchedSource,
    },
    /// The job ran for its full `true_duration`.
    Finish {
        at: Seconds,
    },
    LimitReached {
        at: Seconds,
    },
    Cancel {
        at: Seconds,
    },
}

impl LifecycleEvent {
    pub fn name(&self) -> &'static str {
        match self {
            LifecycleEvent::Start { .. } => "start",
            LifecycleEvent::Finish { .. } => "finish",
            LifecycleEvent::LimitReached { .. } => "limit-reached",
            LifecycleEvent::Cancel { .. } => "cancel",
        }
    }
}

/// Mutable execution state of one job.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobRuntime {
    pub spec: JobSpec,
    pub state: JobState,
    pub start_time: Option<Seconds>,
    pub current_limit: Seconds,
    pub allocated_nodes: Vec<NodeId>,
    /// Absolute completion times, strictly increasing.
    pub checkpoints: Vec<Seconds>,
    pub end_time: Option<Seconds>,
    pub sched_source: Option<SchedSource>,
    pub extensions_granted: u32,
}

impl JobRuntime {
    pub fn new(spec: JobSpec) -> Self {
        let current_limit = spec.time_limit;
        JobRuntime {
            spec,
            state: JobState::Pending,
            start_time: None,
            current_limit,
            allocated_nodes: Vec::new(),
            checkpoints: Vec::new(),
            end_time: None,
            sched_source: None,
            extensions_granted: 0,
        }
    }

    pub fn job_id(&self) -> JobId {
        self.spec.job_id
    }

    pub fn last_checkpoint(&self) -> Option<Seconds> {
        self.checkpoints.last().copied()
    }

    /// Start plus current limit. `None` until the job starts.
    pub fn expected_end(&self) -> Option<Seconds> {
        self.start_time.map(|s| s + self.current_limit)
    }

    pub fn wait_time(&self) -> Option<Seconds> {
        self.start_time.map(|s| s.saturating_sub(self.spec.submit_time))
    }

    pub fn record_checkpoint(&mut self, at: Seconds) -> Result<(), ModelError> {
        if self.state != JobState::Running {
            return Err(ModelError::IllegalTransition {
                state: self.state,
                event: "checkpoint",
            });
        }
        let floor = self.last_checkpoint().map(|c| c + 1).or(self.start_time);
        if floor.is_some_and(|f| at < f) {
            return Err(ModelError::InconsistentTime {
                job_id: self.job_id(),
                at,
                reason: "checkpoints must be strictly increasing and after start",
            });
        }
        self.checkpoints.push(at);
        Ok(())
    }

    /// Raise the running job's limit. Limits never shrink.
    pub fn extend_limit(&mut self, new_limit: Seconds) -> Result<(), ModelError> {
        if self.state != JobState::Running {
            return Err(ModelError::IllegalTransition {
                state: self.state,
                event: "limit-update",
            });
        }
        if new_limit <= self.current_limit {
            return Err(ModelError::LimitNotIncreased {
                job_id: self.job_id(),
                current: self.current_limit,
                new_limit,
            });
        }
        self.current_limit = new_limit;
        self.extensions_granted += 1;
        Ok(())
    }
}

/// Applies a lifecycle event, enforcing the job state machine.
pub fn job_transition(mut runtime: JobRuntime, event: LifecycleEvent) -> Result<JobRuntime, ModelError> {
    let illegal = |rt: &JobRuntime, ev: &LifecycleEvent| ModelError::IllegalTransition {
        state: rt.state,
        event: ev.name(),
    };
    let job_id = runtime.job_id();
    match (&runtime.state, &event) {
        (JobState::Pending, LifecycleEvent::Start { at, nodes, source }) => {
            if *at < runtime.spec.submit_time {
                return Err(ModelError::InconsistentTime {
                    job_id,
                    at: *at,
                    reason: "start before submit",
                });
            }
            runtime.state = JobState::Running;
            runtime.start_time = Some(*at);
            runtime.allocated_nodes = nodes.clone();
            runtime.sched_source = Some(*source);
            Ok(runtime)
        }
        (JobState::Running, LifecycleEvent::Finish { at }) => {
            let start = runtime.start_time.unwrap_or_default();
            if *at != start + runtime.spec.true_duration || runtime.spec.true_duration > runtime.current_limit {
                return Err(ModelError::InconsistentTime {
                    job_id,
                    at: *at,
                    reason: "natural end must be start + true_duration within the limit",
                });
            }
            runtime.state = JobState::Completed;
            runtime.end_time = Some(*at);
            Ok(runtime)
        }
        (JobState::Running, LifecycleEvent::LimitReached { at }) => {
            let start = runtime.start_time.unwrap_or_default();
            if *at != start + runtime.current_limit || runtime.current_limit >= runtime.spec.true_duration {
                return Err(ModelError::InconsistentTime {
                    job_id,
                    at: *at,
                    reason: "timeout must be start + current_limit before the natural end",
                });
            }
            runtime.state = JobState::Timeout;
            runtime.end_time = Some(*at);
            Ok(runtime)
        }
        (JobState::Running, LifecycleEvent::Cancel { at }) => match runtime.last_checkpoint() {
            None => Err(ModelError::InconsistentTime {
                job_id,
                at: *at,
                reason: "cancel requires a completed checkpoint",
            }),
            Some(last) if *at < last => Err(ModelError::InconsistentTime {
                job_id,
                at: *at,
                reason: "cancel precedes the last checkpoint",
            }),
            Some(_) => {
                runtime.state = JobState::CancelledAtCkpt;
                runtime.end_time = Some(*at);
                Ok(runtime)
            }
        },
        _ => Err(illegal(&runtime, &event)),
    }
}

/// Execution time multiplied by allocated cores.
pub fn cpu_time(runtime: &JobRuntime) -> Result<CoreSeconds, ModelError> {
    match (runtime.state.is_terminal(), runtime.start_time, runtime.end_time) {
        (true, Some(start), Some(end)) => Ok((end - start) * runtime.spec.cores()),
        _ => Err(ModelError::NotFinished(runtime.job_id())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub node_count: u32,
    pub cores_per_node: u32,
    pub poll_interval: Seconds,
    pub extension_grace: Seconds,
    pub max_extensions_per_job: u32,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            node_count: 20,
            cores_per_node: 32,
            poll_interval: 20,
            extension_grace: 20,
            max_extensions_per_job: 1,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.node_count == 0 {
            return Err(ModelError::InvalidCluster("node_count must be at least 1"));
        }
        if self.cores_per_node == 0 {
            return Err(ModelError::InvalidCluster("cores_per_node must be at least 1"));
        }
        if self.poll_interval == 0 {
            return Err(ModelError::InvalidCluster("poll_interval must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Baseline,
    EarlyCancel,
    Extend,
    Hybrid,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Baseline,
        PolicyKind::EarlyCancel,
        PolicyKind::Extend,
        PolicyKind::Hybrid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Baseline => "baseline",
            PolicyKind::EarlyCancel => "early-cancel",
            PolicyKind::Extend => "extend",
            PolicyKind::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown policy {0:?} (expected baseline, early-cancel, extend or hybrid)")]
pub struct UnknownPolicy(pub String);

impl FromStr for PolicyKind {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "baseline" => Ok(PolicyKind::Baseline),
            "early-cancel" | "early-cancellation" => Ok(PolicyKind::EarlyCancel),
            "extend" | "extension" => Ok(PolicyKind::Extend),
            "hybrid" => Ok(PolicyKind::Hybrid),
            _ => Err(UnknownPolicy(s.to_string())),
        }
    }
}
