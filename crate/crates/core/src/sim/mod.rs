//! Discrete-event cluster simulator with a Slurm-like scheduler.

pub mod engine;
pub mod event;
pub mod schedule;

pub use engine::{run_simulation, SimError, SimOptions, SimOutcome, Simulation};
pub use event::{EventKind, EventLog, LogRecord, SimEvent};
pub use schedule::{
    plan_schedule, schedule_pass, NodeSet, PendingView, Placement, PlanInput, PlannedStart, RunningView, SchedulePlan,
};
