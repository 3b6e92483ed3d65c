//! Checkpoint-aware time limit adjustment for batch clusters.
//!
//! Running jobs that report checkpoints can be cancelled right after their
//! last checkpoint that fits the limit, or given just enough extra time to
//! reach one more. This crate contains:
//!
//! - [`sim`]: a deterministic discrete-event cluster with priority and EASY
//!   backfill scheduling, plus the forward planner used for planned starts;
//! - [`ckpt`]: checkpoint report parsing and next-checkpoint prediction;
//! - [`daemon`]: the per-poll decision logic for each policy;
//! - [`workload`]: trace ingestion, filtering/scaling, and a synthetic generator;
//! - [`metrics`]: tail waste, CPU time, waits, makespan and policy comparison;
//! - [`slurm`]: `squeue`/`scontrol`/`scancel` command construction and parsing;
//! - [`experiment`]: run directories and multi-policy comparisons.

pub mod ckpt;
pub mod daemon;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod sim;
pub mod slurm;
pub mod workload;

pub use model::{ClusterConfig, JobId, JobRuntime, JobSpec, JobState, NodeId, PolicyKind, SchedSource, Seconds};
