use std::collections::{BTreeSet, HashMap};

use crate::ckpt::{CheckpointLedger, CkptError};
use crate::daemon::{self, ActionVerb, AdjustmentAction, DelayReference, PendingJob, QueueSnapshot, RunningJob};
use crate::model::{
    job_transition, ClusterConfig, JobId, JobRuntime, JobSpec, JobState, LifecycleEvent, ModelError, PolicyKind,
    Seconds,
};
use crate::sim::event::{EventKind, EventLog, EventQueue, SimEvent};
use crate::sim::schedule::{plan_schedule, schedule_pass, NodeSet, PendingView, PlanInput, RunningView, SchedulePlan};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("job {job_id} requests {nodes} nodes but the cluster has {cluster_nodes}")]
    InfeasibleJob {
        job_id: JobId,
        nodes: u32,
        cluster_nodes: u32,
    },
    #[error("duplicate job id {0}")]
    DuplicateJob(JobId),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("job {0} is not running")]
    NotRunning(JobId),
    #[error("job {0} is unknown")]
    UnknownJob(JobId),
    #[error("job {job_id} already used {granted} of {max} extensions")]
    ExtensionBudget { job_id: JobId, granted: u32, max: u32 },
    #[error(transparent)]
    Checkpoint(#[from] CkptError),
    #[error("internal: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimOptions {
    pub delay_reference: DelayReference,
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub runtimes: Vec<JobRuntime>,
    pub log: EventLog,
    pub actions: Vec<AdjustmentAction>,
}

#[derive(Debug, Clone)]
struct Slot {
    runtime: JobRuntime,
    end_event: Option<SimEvent>,
    limit_event: Option<SimEvent>,
    ckpt_event: Option<SimEvent>,
}

/// Discrete-event run of one workload under one policy.
///
/// Ties at the same instant resolve by event kind and then job id, so a run
/// is fully determined by its inputs.
pub struct Simulation {
    cluster: ClusterConfig,
    policy: PolicyKind,
    options: SimOptions,
    slots: Vec<Slot>,
    index: HashMap<JobId, usize>,
    queue: EventQueue,
    log: EventLog,
    ledger: CheckpointLedger,
    actions: Vec<AdjustmentAction>,
    /// Submitted, not yet started; ordered by (submit_time, job_id).
    waiting: BTreeSet<(Seconds, JobId)>,
    free: NodeSet,
    now: Seconds,
    unfinished: usize,
}

pub fn run_simulation(jobs: &[JobSpec], cluster: &ClusterConfig, policy: PolicyKind) -> Result<SimOutcome, SimError> {
    Simulation::new(jobs, cluster, policy)?.run()
}

fn node_list(nodes: &[u32]) -> String {
    nodes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
}

impl Simulation {
    pub fn new(jobs: &[JobSpec], cluster: &ClusterConfig, policy: PolicyKind) -> Result<Self, SimError> {
        Self::with_options(jobs, cluster, policy, SimOptions::default())
    }

    pub fn with_options(
        jobs: &[JobSpec],
        cluster: &ClusterConfig,
        policy: PolicyKind,
        options: SimOptions,
    ) -> Result<Self, SimError> {
        cluster.validate()?;
        let mut slots = Vec::with_capacity(jobs.len());
        let mut index = HashMap::with_capacity(jobs.len());
        let mut queue = EventQueue::default();
        for spec in jobs {
            spec.validate()?;
            if spec.nodes > cluster.node_count {
                return Err(SimError::InfeasibleJob {
                    job_id: spec.job_id,
                    nodes: spec.nodes,
                    cluster_nodes: cluster.node_count,
                });
            }
            if index.insert(spec.job_id, slots.len()).is_some() {
                return Err(SimError::DuplicateJob(spec.job_id));
            }
            queue.push(SimEvent::job(spec.submit_time, EventKind::Submit, spec.job_id));
            slots.push(Slot {
                runtime: JobRuntime::new(spec.clone()),
                end_event: None,
                limit_event: None,
                ckpt_event: None,
            });
        }
        if !jobs.is_empty() {
            queue.push(SimEvent::global(0, EventKind::DaemonPoll));
        }
        Ok(Simulation {
            cluster: cluster.clone(),
            policy,
            options,
            unfinished: slots.len(),
            slots,
            index,
            queue,
            log: EventLog::default(),
            ledger: CheckpointLedger::new(),
            actions: Vec::new(),
            waiting: BTreeSet::new(),
            free: NodeSet::range(cluster.node_count),
            now: 0,
        })
    }

    pub fn now(&self) -> Seconds {
        self.now
    }

    pub fn policy(&self) -> PolicyKind {
        self.policy
    }

    pub fn cluster(&self) -> &ClusterConfig {
        &self.cluster
    }

    pub fn is_finished(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn peek_event(&self) -> Option<&SimEvent> {
        self.queue.peek()
    }

    pub fn runtime(&self, job_id: JobId) -> Option<&JobRuntime> {
        self.index.get(&job_id).map(|&i| &self.slots[i].runtime)
    }

    pub fn runtimes(&self) -> impl Iterator<Item = &JobRuntime> {
        self.slots.iter().map(|s| &s.runtime)
    }

    pub fn ledger(&self) -> &CheckpointLedger {
        &self.ledger
    }

    pub fn actions(&self) -> &[AdjustmentAction] {
        &self.actions
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn free_nodes(&self) -> &NodeSet {
        &self.free
    }

    fn slot(&self, job_id: JobId) -> Result<&Slot, SimError> {
        self.index
            .get(&job_id)
            .map(|&i| &self.slots[i])
            .ok_or(SimError::UnknownJob(job_id))
    }

    fn slot_mut(&mut self, job_id: JobId) -> Result<&mut Slot, SimError> {
        match self.index.get(&job_id) {
            Some(&i) => Ok(&mut self.slots[i]),
            None => Err(SimError::UnknownJob(job_id)),
        }
    }

    fn running_ids(&self) -> Vec<JobId> {
        let mut ids: Vec<JobId> = self
            .slots
            .iter()
            .filter(|s| s.runtime.state == JobState::Running)
            .map(|s| s.runtime.job_id())
            .collect();
        ids.sort_unstable();
        ids
    }

    fn pending_views(&self) -> Vec<PendingView> {
        self.waiting
            .iter()
            .map(|&(_, id)| {
                let spec = &self.slots[self.index[&id]].runtime.spec;
                PendingView {
                    job_id: id,
                    nodes: spec.nodes,
                    time_limit: spec.time_limit,
                }
            })
            .collect()
    }

    fn running_views(&self) -> Vec<RunningView> {
        self.running_ids()
            .into_iter()
            .map(|id| {
                let rt = &self.slots[self.index[&id]].runtime;
                RunningView {
                    job_id: id,
                    nodes: rt.allocated_nodes.clone(),
                    expected_end: rt.expected_end().unwrap_or(self.now),
                }
            })
            .collect()
    }

    /// Planner input for the current state.
    pub fn plan_input(&self) -> PlanInput {
        PlanInput {
            now: self.now,
            running: self.running_views(),
            pending: self.pending_views(),
            free_nodes: self.free.clone(),
        }
    }

    pub fn plan(&self) -> SchedulePlan {
        plan_schedule(&self.plan_input())
    }

    /// The queue as the daemon sees it (running and pending, no plan).
    pub fn snapshot(&self) -> QueueSnapshot {
        QueueSnapshot {
            now: self.now,
            running: self
                .running_ids()
                .into_iter()
                .map(|id| {
                    let rt = &self.slots[self.index[&id]].runtime;
                    RunningJob {
                        job_id: id,
                        start_time: rt.start_time.unwrap_or_default(),
                        current_limit: rt.current_limit,
                        allocated_nodes: rt.allocated_nodes.clone(),
                        extensions_granted: rt.extensions_granted,
                    }
                })
                .collect(),
            pending: self
                .pending_views()
                .into_iter()
                .map(|p| PendingJob {
                    job_id: p.job_id,
                    nodes: p.nodes,
                    time_limit: p.time_limit,
                    planned_start: None,
                    planned_nodes: Vec::new(),
                })
                .collect(),
            free_nodes: self.free.clone(),
        }
    }

    /// Processes the next event. Returns `None` once the queue is empty.
    pub fn step(&mut self) -> Result<Option<SimEvent>, SimError> {
        let Some(event) = self.queue.pop() else {
            return Ok(None);
        };
        if event.time < self.now {
            return Err(SimError::Internal(format!(
                "event {event:?} is earlier than the clock ({})",
                self.now
            )));
        }
        self.now = event.time;
        let job = event.job_id;
        match (event.kind, job) {
            (EventKind::Submit, Some(id)) => self.on_submit(id)?,
            (EventKind::SchedulePass, None) => self.on_schedule_pass()?,
            (EventKind::JobEndNatural, Some(id)) => self.on_natural_end(id)?,
            (EventKind::JobLimitReached, Some(id)) => self.on_limit_reached(id)?,
            (EventKind::CheckpointDone, Some(id)) => self.on_checkpoint(id)?,
            (EventKind::DaemonPoll, None) => self.on_poll()?,
            (EventKind::Cancel, Some(id)) => self.cancel_job(id)?,
            (EventKind::LimitUpdate, Some(id)) => {
                let limit = event
                    .value
                    .ok_or_else(|| SimError::Internal("limit update without a value".into()))?;
                self.apply_limit_update(id, limit)?;
            }
            _ => return Err(SimError::Internal(format!("malformed event {event:?}"))),
        }
        Ok(Some(event))
    }

    pub fn run(mut self) -> Result<SimOutcome, SimError> {
        while self.step()?.is_some() {}
        if self.unfinished != 0 {
            return Err(SimError::Internal(format!("{} jobs never finished", self.unfinished)));
        }
        Ok(SimOutcome {
            runtimes: self.slots.into_iter().map(|s| s.runtime).collect(),
            log: self.log,
            actions: self.actions,
        })
    }

    fn request_pass(&mut self) {
        self.queue.push(SimEvent::global(self.now, EventKind::SchedulePass));
    }

    fn on_submit(&mut self, id: JobId) -> Result<(), SimError> {
        let spec = &self.slot(id)?.runtime.spec;
        let detail = format!("nodes={} limit={}", spec.nodes, spec.time_limit);
        self.waiting.insert((spec.submit_time, id));
        self.log.push(self.now, EventKind::Submit, Some(id), detail);
        self.request_pass();
        Ok(())
    }

    fn on_schedule_pass(&mut self) -> Result<(), SimError> {
        if self.waiting.is_empty() {
            return Ok(());
        }
        let placements = schedule_pass(&self.pending_views(), &self.running_views(), &self.free, self.now);
        let now = self.now;
        for p in placements {
            if p.nodes.iter().any(|n| !self.free.contains(*n)) {
                return Err(SimError::Internal(format!(
                    "job {} placed on busy nodes {:?}",
                    p.job_id, p.nodes
                )));
            }
            self.free.remove_all(&p.nodes);
            let detail = format!("source={} nodes={}", p.source, node_list(&p.nodes));
            let slot = self.slot_mut(p.job_id)?;
            let submit = slot.runtime.spec.submit_time;
            slot.runtime = job_transition(
                slot.runtime.clone(),
                LifecycleEvent::Start {
                    at: now,
                    nodes: p.nodes,
                    source: p.source,
                },
            )?;
            let spec = &slot.runtime.spec;
            let end = SimEvent::job(now + spec.true_duration, EventKind::JobEndNatural, p.job_id);
            let limit = SimEvent::job(now + spec.time_limit, EventKind::JobLimitReached, p.job_id);
            let ckpt = spec
                .ckpt_interval
                .filter(|_| spec.checkpointing)
                .map(|i| SimEvent::job(now + i, EventKind::CheckpointDone, p.job_id));
            let checkpointing = spec.checkpointing;
            slot.end_event = Some(end);
            slot.limit_event = Some(limit);
            slot.ckpt_event = ckpt;
            self.queue.push(end);
            self.queue.push(limit);
            if let Some(c) = ckpt {
                self.queue.push(c);
            }
            if checkpointing {
                self.ledger.register(p.job_id, now);
            }
            self.waiting.remove(&(submit, p.job_id));
            self.log.push(now, EventKind::SchedulePass, Some(p.job_id), detail);
        }
        Ok(())
    }

    /// Drops the job's outstanding events and frees its nodes.
    fn release(&mut self, id: JobId) -> Result<(), SimError> {
        let slot = self.slot_mut(id)?;
        let events: Vec<SimEvent> = [slot.end_event.take(), slot.limit_event.take(), slot.ckpt_event.take()]
            .into_iter()
            .flatten()
            .collect();
        let nodes = slot.runtime.allocated_nodes.clone();
        for e in events {
            self.queue.remove(&e);
        }
        for n in nodes {
            if !self.free.insert(n) {
                return Err(SimError::Internal(format!("node {n} freed twice")));
            }
        }
        self.ledger.remove(id);
        self.unfinished -= 1;
        self.request_pass();
        Ok(())
    }

    fn terminate(&mut self, id: JobId, event: LifecycleEvent, kind: EventKind) -> Result<(), SimError> {
        let slot = self.slot_mut(id)?;
        slot.runtime = job_transition(slot.runtime.clone(), event)?;
        let detail = format!("state={}", slot.runtime.state);
        self.release(id)?;
        self.log.push(self.now, kind, Some(id), detail);
        Ok(())
    }

    fn on_natural_end(&mut self, id: JobId) -> Result<(), SimError> {
        self.slot_mut(id)?.end_event = None;
        self.terminate(id, LifecycleEvent::Finish { at: self.now }, EventKind::JobEndNatural)
    }

    fn on_limit_reached(&mut self, id: JobId) -> Result<(), SimError> {
        self.slot_mut(id)?.limit_event = None;
        self.terminate(
            id,
            LifecycleEvent::LimitReached { at: self.now },
            EventKind::JobLimitReached,
        )
    }

    fn on_checkpoint(&mut self, id: JobId) -> Result<(), SimError> {
        let now = self.now;
        let slot = self.slot_mut(id)?;
        slot.ckpt_event = None;
        slot.runtime.record_checkpoint(now)?;
        let count = slot.runtime.checkpoints.len();
        let next = slot
            .runtime
            .spec
            .ckpt_interval
            .map(|i| SimEvent::job(now + i, EventKind::CheckpointDone, id));
        slot.ckpt_event = next;
        if let Some(e) = next {
            self.queue.push(e);
        }
        // Same path as a line appended to the job's report file.
        self.ledger.append_report(id, &format!("{now}\n"))?;
        self.log
            .push(now, EventKind::CheckpointDone, Some(id), format!("count={count}"));
        Ok(())
    }

    fn on_poll(&mut self) -> Result<(), SimError> {
        let actions = if self.policy == PolicyKind::Baseline {
            Vec::new()
        } else {
            daemon::poll_with(
                &self.snapshot(),
                &self.ledger,
                self.policy,
                &self.cluster,
                self.options.delay_reference,
            )
        };
        for a in &actions {
            let mut e = match a.verb {
                ActionVerb::CancelNow => SimEvent::job(self.now, EventKind::Cancel, a.job_id),
                ActionVerb::ExtendTo => SimEvent::job(self.now, EventKind::LimitUpdate, a.job_id),
            };
            e.value = a.new_limit;
            self.queue.push(e);
        }
        self.log.push(
            self.now,
            EventKind::DaemonPoll,
            None,
            format!("actions={}", actions.len()),
        );
        self.actions.extend(actions);
        if self.unfinished > 0 {
            self.queue.push(SimEvent::global(
                self.now + self.cluster.poll_interval,
                EventKind::DaemonPoll,
            ));
        }
        Ok(())
    }

    /// Raises a running job's limit and moves its limit event.
    pub fn apply_limit_update(&mut self, id: JobId, new_limit: Seconds) -> Result<(), SimError> {
        let max = self.cluster.max_extensions_per_job;
        let slot = self.slot_mut(id)?;
        if slot.runtime.state != JobState::Running {
            return Err(SimError::NotRunning(id));
        }
        if slot.runtime.extensions_granted >= max {
            return Err(SimError::ExtensionBudget {
                job_id: id,
                granted: slot.runtime.extensions_granted,
                max,
            });
        }
        slot.runtime.extend_limit(new_limit)?;
        let start = slot.runtime.start_time.unwrap_or_default();
        let moved = SimEvent::job(start + new_limit, EventKind::JobLimitReached, id);
        let old = slot.limit_event.replace(moved);
        if let Some(old) = old {
            self.queue.remove(&old);
        }
        self.queue.push(moved);
        self.log
            .push(self.now, EventKind::LimitUpdate, Some(id), format!("limit={new_limit}"));
        self.request_pass();
        Ok(())
    }

    /// Ends a running job at the current instant, after its last checkpoint.
    pub fn cancel_job(&mut self, id: JobId) -> Result<(), SimError> {
        let rt = &self.slot(id)?.runtime;
        if rt.state != JobState::Running {
            return Err(SimError::NotRunning(id));
        }
        if rt.checkpoints.is_empty() {
            return Err(SimError::Model(ModelError::InconsistentTime {
                job_id: id,
                at: self.now,
                reason: "cancel requires a completed checkpoint",
            }));
        }
        self.terminate(id, LifecycleEvent::Cancel { at: self.now }, EventKind::Cancel)
    }
}
