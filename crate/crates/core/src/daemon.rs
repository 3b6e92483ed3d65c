//! Time limit adjustment decisions.
//!
//! At each poll the daemon looks at running jobs that report checkpoints. A
//! job becomes eligible once its predicted next checkpoint lies past its
//! current limit end. Eligible jobs are cancelled right away (their last
//! checkpoint was the last one that fits) or have their limit raised to
//! cover one more checkpoint, depending on the policy.

use serde::{Deserialize, Serialize};

use crate::ckpt::{predict_next, CheckpointLedger, LedgerEntry};
use crate::model::{ClusterConfig, JobId, NodeId, PolicyKind, Seconds};
use crate::sim::schedule::{plan_schedule, NodeSet, PendingView, PlanInput, RunningView, SchedulePlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionVerb {
    CancelNow,
    ExtendTo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionReason {
    NoNextCkptFits,
    NextCkptAccommodated,
    ExtensionWouldDelay,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjustmentAction {
    pub job_id: JobId,
    pub verb: ActionVerb,
    /// Relative to job start; only for `ExtendTo`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_limit: Option<Seconds>,
    pub reason: ActionReason,
    pub decided_at: Seconds,
}

impl AdjustmentAction {
    pub fn cancel(job_id: JobId, reason: ActionReason, decided_at: Seconds) -> Self {
        AdjustmentAction {
            job_id,
            verb: ActionVerb::CancelNow,
            new_limit: None,
            reason,
            decided_at,
        }
    }

    pub fn extend(job_id: JobId, new_limit: Seconds, decided_at: Seconds) -> Self {
        AdjustmentAction {
            job_id,
            verb: ActionVerb::ExtendTo,
            new_limit: Some(new_limit),
            reason: ActionReason::NextCkptAccommodated,
            decided_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunningJob {
    pub job_id: JobId,
    pub start_time: Seconds,
    pub current_limit: Seconds,
    pub allocated_nodes: Vec<NodeId>,
    #[serde(default)]
    pub extensions_granted: u32,
}

impl RunningJob {
    pub fn limit_end(&self) -> Seconds {
        self.start_time + self.current_limit
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingJob {
    pub job_id: JobId,
    pub nodes: u32,
    pub time_limit: Seconds,
    #[serde(default)]
    pub planned_start: Option<Seconds>,
    #[serde(default)]
    pub planned_nodes: Vec<NodeId>,
}

/// The daemon's view of the queue at one instant. `pending` is in priority order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QueueSnapshot {
    pub now: Seconds,
    pub running: Vec<RunningJob>,
    pub pending: Vec<PendingJob>,
    pub free_nodes: NodeSet,
}

impl QueueSnapshot {
    pub fn plan_input(&self) -> PlanInput {
        PlanInput {
            now: self.now,
            running: self
                .running
                .iter()
                .map(|r| RunningView {
                    job_id: r.job_id,
                    nodes: r.allocated_nodes.clone(),
                    expected_end: r.limit_end().max(self.now),
                })
                .collect(),
            pending: self
                .pending
                .iter()
                .map(|p| PendingView {
                    job_id: p.job_id,
                    nodes: p.nodes,
                    time_limit: p.time_limit,
                })
                .collect(),
            free_nodes: self.free_nodes.clone(),
        }
    }
}

/// What the hybrid policy compares an extension's plan against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayReference {
    /// Plan that results from cancelling the job now instead.
    #[default]
    CancelAlternative,
    /// Plan with the job's current limit left untouched.
    CurrentPlan,
}

/// Predicted next checkpoint, if it falls beyond the job's current limit end.
pub fn eligibility(job: &RunningJob, entry: &LedgerEntry) -> Option<Seconds> {
    predict_next(entry).filter(|&next| next > job.limit_end())
}

pub fn decide_early_cancel(job: &RunningJob, entry: &LedgerEntry, now: Seconds) -> Option<AdjustmentAction> {
    eligibility(job, entry)?;
    entry.last()?;
    Some(AdjustmentAction::cancel(job.job_id, ActionReason::NoNextCkptFits, now))
}

/// Limit that covers the predicted checkpoint plus a grace period.
fn extension_target(job: &RunningJob, predicted: Seconds, cluster: &ClusterConfig) -> Seconds {
    predicted - job.start_time + cluster.extension_grace
}

/// Extends to the next predicted checkpoint; once the extension budget is
/// spent, cancels instead.
pub fn decide_extension(
    job: &RunningJob,
    entry: &LedgerEntry,
    cluster: &ClusterConfig,
    now: Seconds,
) -> Option<AdjustmentAction> {
    let predicted = eligibility(job, entry)?;
    if job.extensions_granted >= cluster.max_extensions_per_job {
        return decide_early_cancel(job, entry, now);
    }
    Some(AdjustmentAction::extend(
        job.job_id,
        extension_target(job, predicted, cluster),
        now,
    ))
}

/// True if any pending job starts later in `after` than in `before`.
pub fn would_delay(before: &SchedulePlan, after: &SchedulePlan) -> bool {
    before.pending.iter().any(|(id, planned)| match after.pending.get(id) {
        Some(later) => later.start > planned.start,
        None => true,
    })
}

/// Extends only when no pending job's planned start gets worse than under
/// `reference`; otherwise cancels.
pub fn decide_hybrid(
    job: &RunningJob,
    entry: &LedgerEntry,
    input: &PlanInput,
    cluster: &ClusterConfig,
    reference: DelayReference,
    now: Seconds,
) -> Option<AdjustmentAction> {
    let candidate = decide_extension(job, entry, cluster, now)?;
    let Some(new_limit) = candidate.new_limit else {
        return Some(candidate);
    };
    let before = match reference {
        DelayReference::CancelAlternative => plan_schedule(&input.with_cancelled(job.job_id)),
        DelayReference::CurrentPlan => plan_schedule(input),
    };
    let after = plan_schedule(&input.with_expected_end(job.job_id, job.start_time + new_limit));
    if would_delay(&before, &after) {
        Some(AdjustmentAction::cancel(
            job.job_id,
            ActionReason::ExtensionWouldDelay,
            now,
        ))
    } else {
        Some(candidate)
    }
}

/// One poll tick with the default hybrid reference.
pub fn poll(
    snapshot: &QueueSnapshot,
    ledgers: &CheckpointLedger,
    policy: PolicyKind,
    cluster: &ClusterConfig,
) -> Vec<AdjustmentAction> {
    poll_with(snapshot, ledgers, policy, cluster, DelayReference::default())
}

/// One poll tick. At most one action per job, in ascending job id. Hybrid
/// decisions see the effect of earlier decisions from the same tick.
pub fn poll_with(
    snapshot: &QueueSnapshot,
    ledgers: &CheckpointLedger,
    policy: PolicyKind,
    cluster: &ClusterConfig,
    reference: DelayReference,
) -> Vec<AdjustmentAction> {
    if policy == PolicyKind::Baseline {
        return Vec::new();
    }
    let now = snapshot.now;
    let mut jobs: Vec<&RunningJob> = snapshot.running.iter().collect();
    jobs.sort_by_key(|j| j.job_id);

    let mut plan_input: Option<PlanInput> = None;
    let mut actions = Vec::new();
    for job in jobs {
        let Some(entry) = ledgers.get(job.job_id) else {
            continue;
        };
        if eligibility(job, entry).is_none() {
            continue;
        }
        let action = match policy {
            PolicyKind::Baseline => None,
            PolicyKind::EarlyCancel => decide_early_cancel(job, entry, now),
            PolicyKind::Extend => decide_extension(job, entry, cluster, now),
            PolicyKind::Hybrid => {
                let input = plan_input.get_or_insert_with(|| snapshot.plan_input());
                let action = decide_hybrid(job, entry, input, cluster, reference, now);
                if let Some(a) = &action {
                    *input = apply_to_plan_input(input, job, a);
                }
                action
            }
        };
        actions.extend(action);
    }
    actions
}

/// The planner input after `action` takes effect.
pub fn apply_to_plan_input(input: &PlanInput, job: &RunningJob, action: &AdjustmentAction) -> PlanInput {
    match (action.verb, action.new_limit) {
        (ActionVerb::ExtendTo, Some(limit)) => input.with_expected_end(job.job_id, job.start_time + limit),
        _ => input.with_cancelled(job.job_id),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job(job_id: JobId, nodes: std::ops::Range<u32>) -> RunningJob {
        RunningJob {
            job_id,
            start_time: 0,
            current_limit: 1440,
            allocated_nodes: nodes.collect(),
            extensions_granted: 0,
        }
    }

    fn ledger(job_id: JobId, ts: &[Seconds]) -> CheckpointLedger {
        let mut l = CheckpointLedger::new();
        l.insert(job_id, LedgerEntry::with_timestamps(0, ts.to_vec()));
        l
    }

    fn snapshot(now: Seconds, running: Vec<RunningJob>, pending: Vec<PendingJob>, free: NodeSet) -> QueueSnapshot {
        QueueSnapshot {
            now,
            running,
            pending,
            free_nodes: free,
        }
    }

    fn pending(job_id: JobId, nodes: u32, time_limit: Seconds) -> PendingJob {
        PendingJob {
            job_id,
            nodes,
            time_limit,
            planned_start: None,
            planned_nodes: vec![],
        }
    }

    #[test]
    fn poll_examples() {
        let cluster = ClusterConfig::default();
        let snap = snapshot(1280, vec![job(1, 0..1)], vec![], NodeSet::new());
        let l = ledger(1, &[420, 840, 1260]);

        let ec = poll(&snap, &l, PolicyKind::EarlyCancel, &cluster);
        assert_eq!(
            ec,
            vec![AdjustmentAction::cancel(1, ActionReason::NoNextCkptFits, 1280)]
        );

        let ext = poll(&snap, &l, PolicyKind::Extend, &cluster);
        assert_eq!(ext, vec![AdjustmentAction::extend(1, 1700, 1280)]);

        let early = poll(&snap, &ledger(1, &[420]), PolicyKind::Extend, &cluster);
        assert!(early.is_empty());

        assert!(poll(&snap, &l, PolicyKind::Baseline, &cluster).is_empty());
    }

    #[test]
    fn jobs_without_ledger_are_ignored() {
        let cluster = ClusterConfig::default();
        let snap = snapshot(1280, vec![job(1, 0..1), job(2, 1..2)], vec![], NodeSet::new());
        let actions = poll(&snap, &ledger(2, &[420, 840, 1260]), PolicyKind::EarlyCancel, &cluster);
        assert_eq!(actions.len(), 1);
        assert_eq!(actions[0].job_id, 2);
    }

    #[test]
    fn early_cancel_guards() {
        let j = job(1, 0..1);
        assert!(decide_early_cancel(&j, &LedgerEntry::with_timestamps(0, vec![]), 10).is_none());
        assert!(decide_early_cancel(&j, &LedgerEntry::with_timestamps(0, vec![420]), 430).is_none());
        assert!(decide_early_cancel(&j, &LedgerEntry::with_timestamps(0, vec![420, 840, 1260]), 1260).is_some());
    }

    #[test]
    fn extension_budget() {
        let cluster = ClusterConfig::default();
        let mut j = job(1, 0..1);
        let entry = LedgerEntry::with_timestamps(0, vec![420, 840, 1260]);
        assert_eq!(
            decide_extension(&j, &entry, &cluster, 1280).unwrap().new_limit,
            Some(1700)
        );
        j.current_limit = 1700;
        j.extensions_granted = 1;
        // still before the extended checkpoint: 1680 fits in 1700
        assert!(decide_extension(&j, &entry, &cluster, 1300).is_none());
        let after = LedgerEntry::with_timestamps(0, vec![420, 840, 1260, 1680]);
        let a = decide_extension(&j, &after, &cluster, 1680).unwrap();
        assert_eq!(a.verb, ActionVerb::CancelNow);
        assert_eq!(a.reason, ActionReason::NoNextCkptFits);
    }

    #[test]
    fn hybrid_with_empty_queue_extends() {
        let cluster = ClusterConfig::default();
        let snap = snapshot(1280, vec![job(1, 0..2)], vec![], NodeSet::new());
        let a = poll(&snap, &ledger(1, &[420, 840, 1260]), PolicyKind::Hybrid, &cluster);
        assert_eq!(a, vec![AdjustmentAction::extend(1, 1700, 1280)]);
    }

    #[test]
    fn hybrid_cancels_when_pending_job_waits_on_its_nodes() {
        let cluster = ClusterConfig::default();
        // Pending job needs both nodes; its planned start is the job's limit end.
        let snap = snapshot(1280, vec![job(1, 0..2)], vec![pending(2, 2, 600)], NodeSet::new());
        let input = snap.plan_input();
        assert_eq!(plan_schedule(&input).planned_start(2), Some(1440));
        let l = ledger(1, &[420, 840, 1260]);
        for reference in [DelayReference::CancelAlternative, DelayReference::CurrentPlan] {
            let a = poll_with(&snap, &l, PolicyKind::Hybrid, &cluster, reference);
            assert_eq!(
                a,
                vec![AdjustmentAction::cancel(1, ActionReason::ExtensionWouldDelay, 1280)]
            );
        }
    }

    #[test]
    fn hybrid_extends_when_pending_jobs_use_other_nodes() {
        let cluster = ClusterConfig::default();
        // 4 nodes. Job 1 on node 0 (eligible). Job 9 holds nodes 1..4 until 5000.
        // Pending job 2 needs 3 nodes: only 9's nodes can ever host it together
        // with node 0, and cancelling job 1 leaves it at 5000 either way.
        let mut blocker = job(9, 1..4);
        blocker.current_limit = 5000;
        let snap = snapshot(
            1280,
            vec![job(1, 0..1), blocker],
            vec![pending(2, 3, 100)],
            NodeSet::new(),
        );
        let input = snap.plan_input();
        let before = plan_schedule(&input);
        assert_eq!(before.planned_start(2), Some(5000));
        let after = plan_schedule(&input.with_expected_end(1, 1700));
        assert_eq!(after.planned_start(2), Some(5000));
        assert_eq!(plan_schedule(&input.with_cancelled(1)).planned_start(2), Some(5000));

        let a = poll(&snap, &ledger(1, &[420, 840, 1260]), PolicyKind::Hybrid, &cluster);
        assert_eq!(a, vec![AdjustmentAction::extend(1, 1700, 1280)]);
    }

    #[test]
    fn references_can_disagree() {
        // Jobs 1 and 8 both hold one node until 1440. Pending job 2 needs one
        // node: extending job 1 just moves it to job 8's node at 1440, while
        // cancelling job 1 would let it start right away.
        let cluster = ClusterConfig::default();
        let snap = snapshot(
            1280,
            vec![job(1, 0..1), job(8, 1..2)],
            vec![pending(2, 1, 100)],
            NodeSet::new(),
        );
        let l = ledger(1, &[420, 840, 1260]);
        let current = poll_with(&snap, &l, PolicyKind::Hybrid, &cluster, DelayReference::CurrentPlan);
        assert_eq!(current[0].verb, ActionVerb::ExtendTo);
        let alt = poll_with(
            &snap,
            &l,
            PolicyKind::Hybrid,
            &cluster,
            DelayReference::CancelAlternative,
        );
        assert_eq!(alt[0].verb, ActionVerb::CancelNow);
    }

    #[test]
    fn would_delay_examples() {
        let mut before = SchedulePlan::default();
        assert!(!would_delay(&before, &before.clone()));
        before.pending.insert(
            2,
            crate::sim::schedule::PlannedStart {
                start: 900,
                nodes: vec![0],
            },
        );
        let mut after = before.clone();
        assert!(!would_delay(&before, &after));
        after.pending.get_mut(&2).unwrap().start = 1340;
        assert!(would_delay(&before, &after));
        assert!(!would_delay(&after, &before));
    }
}
