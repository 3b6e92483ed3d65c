//! Two-path scheduling (priority pass + EASY backfill) and forward planning.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{JobId, NodeId, SchedSource, Seconds};

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeSet(BTreeSet<NodeId>);

impl NodeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn range(count: u32) -> Self {
        NodeSet((0..count).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.0.contains(&node)
    }

    pub fn insert(&mut self, node: NodeId) -> bool {
        self.0.insert(node)
    }

    pub fn extend<I: IntoIterator<Item = NodeId>>(&mut self, nodes: I) {
        self.0.extend(nodes)
    }

    pub fn remove_all(&mut self, nodes: &[NodeId]) {
        for n in nodes {
            self.0.remove(n);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.0.iter().copied()
    }

    pub fn to_vec(&self) -> Vec<NodeId> {
        self.0.iter().copied().collect()
    }

    /// The `count` lowest-numbered nodes, skipping any in `exclude`.
    pub fn lowest(&self, count: usize, exclude: Option<&NodeSet>) -> Option<Vec<NodeId>> {
        let picked: Vec<NodeId> = self
            .iter()
            .filter(|n| exclude.is_none_or(|ex| !ex.contains(*n)))
            .take(count)
            .collect();
        (picked.len() == count).then_some(picked)
    }
}

impl FromIterator<NodeId> for NodeSet {
    fn from_iter<T: IntoIterator<Item = NodeId>>(iter: T) -> Self {
        NodeSet(iter.into_iter().collect())
    }
}

/// A queued job as the scheduler sees it. Queues are passed in priority order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingView {
    pub job_id: JobId,
    pub nodes: u32,
    pub time_limit: Seconds,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunningView {
    pub job_id: JobId,
    pub nodes: Vec<NodeId>,
    /// Start plus current limit.
    pub expected_end: Seconds,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub job_id: JobId,
    pub nodes: Vec<NodeId>,
    pub source: SchedSource,
}

/// Head-of-queue reservation computed by the backfill pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reservation {
    pub job_id: JobId,
    pub start: Seconds,
    pub nodes: NodeSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PassOutcome {
    pub placements: Vec<Placement>,
    pub reservation: Option<Reservation>,
}

/// One scheduling pass at `now`.
///
/// The main path starts jobs in priority order until the first one that does
/// not fit. That job gets a reservation at the earliest time enough nodes are
/// released (running jobs release at their expected end). Every later job
/// may then backfill if it either ends by the reservation start or only uses
/// nodes outside the reserved set.
pub fn schedule_pass(queue: &[PendingView], running: &[RunningView], free: &NodeSet, now: Seconds) -> Vec<Placement> {
    schedule_pass_detailed(queue, running, free, now).placements
}

pub fn schedule_pass_detailed(
    queue: &[PendingView],
    running: &[RunningView],
    free: &NodeSet,
    now: Seconds,
) -> PassOutcome {
    let mut free = free.clone();
    let mut releases: Vec<(Seconds, Vec<NodeId>)> = running
        .iter()
        .map(|r| (r.expected_end.max(now), r.nodes.clone()))
        .collect();
    let mut out = PassOutcome::default();

    let mut idx = 0;
    while let Some(job) = queue.get(idx) {
        let Some(nodes) = free.lowest(job.nodes as usize, None) else {
            break;
        };
        free.remove_all(&nodes);
        releases.push((now + job.time_limit, nodes.clone()));
        out.placements.push(Placement {
            job_id: job.job_id,
            nodes,
            source: SchedSource::Main,
        });
        idx += 1;
    }
    let Some(head) = queue.get(idx) else {
        return out;
    };

    releases.sort();
    let mut available = free.clone();
    let mut shadow = now;
    for (end, nodes) in &releases {
        if available.len() >= head.nodes as usize {
            break;
        }
        available.extend(nodes.iter().copied());
        shadow = *end;
    }
    let Some(reserved) = available.lowest(head.nodes as usize, None) else {
        // Head can never fit; admission control should have rejected it.
        return out;
    };
    let reserved: NodeSet = reserved.into_iter().collect();

    for job in &queue[idx + 1..] {
        if free.is_empty() {
            break;
        }
        if job.nodes as usize > free.len() {
            continue;
        }
        let exclude = (now + job.time_limit > shadow).then_some(&reserved);
        if let Some(nodes) = free.lowest(job.nodes as usize, exclude) {
            free.remove_all(&nodes);
            out.placements.push(Placement {
                job_id: job.job_id,
                nodes,
                source: SchedSource::Backfill,
            });
        }
    }
    out.reservation = Some(Reservation {
        job_id: head.job_id,
        start: shadow,
        nodes: reserved,
    });
    out
}

/// Everything the planner needs: running jobs with their expected ends and
/// the pending queue in priority order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlanInput {
    pub now: Seconds,
    pub running: Vec<RunningView>,
    pub pending: Vec<PendingView>,
    pub free_nodes: NodeSet,
}

impl PlanInput {
    /// Copy of the input with one running job's limit end moved.
    pub fn with_expected_end(&self, job_id: JobId, expected_end: Seconds) -> PlanInput {
        let mut next = self.clone();
        for r in next.running.iter_mut().filter(|r| r.job_id == job_id) {
            r.expected_end = expected_end;
        }
        next
    }

    /// Copy of the input with a running job removed and its nodes released now.
    pub fn with_cancelled(&self, job_id: JobId) -> PlanInput {
        let mut next = self.clone();
        if let Some(pos) = next.running.iter().position(|r| r.job_id == job_id) {
            let job = next.running.remove(pos);
            next.free_nodes.extend(job.nodes);
        }
        next
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedStart {
    pub start: Seconds,
    pub nodes: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SchedulePlan {
    pub pending: BTreeMap<JobId, PlannedStart>,
    pub running_ends: BTreeMap<JobId, Seconds>,
}

impl SchedulePlan {
    pub fn planned_start(&self, job_id: JobId) -> Option<Seconds> {
        self.pending.get(&job_id).map(|p| p.start)
    }
}

/// Forward-simulates the scheduler assuming every job runs to its limit.
pub fn plan_schedule(input: &PlanInput) -> SchedulePlan {
    let mut plan = SchedulePlan {
        pending: BTreeMap::new(),
        running_ends: input.running.iter().map(|r| (r.job_id, r.expected_end)).collect(),
    };
    let mut now = input.now;
    let mut free = input.free_nodes.clone();
    let mut running: Vec<RunningView> = input.running.clone();
    let mut pending: Vec<PendingView> = input.pending.clone();

    loop {
        let started = schedule_pass(&pending, &running, &free, now);
        if !started.is_empty() {
            let limits: BTreeMap<JobId, Seconds> = pending.iter().map(|p| (p.job_id, p.time_limit)).collect();
            for p in started {
                free.remove_all(&p.nodes);
                running.push(RunningView {
                    job_id: p.job_id,
                    nodes: p.nodes.clone(),
                    expected_end: now + limits[&p.job_id],
                });
                plan.pending.insert(
                    p.job_id,
                    PlannedStart {
                        start: now,
                        nodes: p.nodes,
                    },
                );
            }
            pending.retain(|p| !plan.pending.contains_key(&p.job_id));
        }
        if pending.is_empty() {
            break;
        }
        let Some(next) = running.iter().map(|r| r.expected_end.max(now)).min() else {
            // Nothing running and nothing fits: a job larger than the cluster.
            break;
        };
        now = next;
        running.retain(|r| {
            if r.expected_end <= now {
                free.extend(r.nodes.iter().copied());
                false
            } else {
                true
            }
        });
    }
    plan
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pending(job_id: JobId, nodes: u32, time_limit: Seconds) -> PendingView {
        PendingView {
            job_id,
            nodes,
            time_limit,
        }
    }

    fn running(job_id: JobId, nodes: std::ops::Range<u32>, expected_end: Seconds) -> RunningView {
        RunningView {
            job_id,
            nodes: nodes.collect(),
            expected_end,
        }
    }

    #[test]
    fn head_fits_starts_on_main() {
        let out = schedule_pass(&[pending(1, 2, 100)], &[], &NodeSet::range(4), 0);
        assert_eq!(
            out,
            vec![Placement {
                job_id: 1,
                nodes: vec![0, 1],
                source: SchedSource::Main
            }]
        );
    }

    #[test]
    fn short_job_backfills_before_reservation() {
        // 20-node cluster, nodes 10..20 busy until t+500, head wants all 20.
        let now = 1000;
        let busy = [running(9, 10..20, now + 500)];
        let free: NodeSet = (0..10).collect();
        let queue = [pending(1, 20, 3000), pending(2, 5, 400)];
        let out = schedule_pass_detailed(&queue, &busy, &free, now);
        assert_eq!(out.placements.len(), 1);
        assert_eq!(out.placements[0].job_id, 2);
        assert_eq!(out.placements[0].source, SchedSource::Backfill);
        let res = out.reservation.unwrap();
        assert_eq!(res.start, now + 500);
        assert_eq!(res.nodes.len(), 20);
    }

    #[test]
    fn long_job_cannot_delay_reservation() {
        let now = 1000;
        let busy = [running(9, 10..20, now + 500)];
        let free: NodeSet = (0..10).collect();
        let queue = [pending(1, 20, 3000), pending(2, 5, 600)];
        assert!(schedule_pass(&queue, &busy, &free, now).is_empty());
    }

    #[test]
    fn long_job_may_use_unreserved_nodes() {
        // Head needs 4 nodes at t=100 (nodes 0..4). Nodes 4,5 are spare.
        let busy = [running(9, 0..4, 100)];
        let free: NodeSet = (4..6).collect();
        let queue = [pending(1, 4, 50), pending(2, 2, 10_000)];
        let out = schedule_pass_detailed(&queue, &busy, &free, 0);
        assert_eq!(out.placements[0].nodes, vec![4, 5]);
        assert_eq!(out.reservation.unwrap().nodes, (0..4).collect());
    }

    #[test]
    fn empty_queue_plans_nothing() {
        let input = PlanInput {
            now: 0,
            running: vec![running(1, 0..2, 900)],
            pending: vec![],
            free_nodes: NodeSet::new(),
        };
        let plan = plan_schedule(&input);
        assert!(plan.pending.is_empty());
        assert_eq!(plan.running_ends[&1], 900);
    }

    #[test]
    fn plan_follows_limit_of_blocking_job() {
        let input = PlanInput {
            now: 100,
            running: vec![running(1, 0..2, 900)],
            pending: vec![pending(2, 2, 50)],
            free_nodes: NodeSet::new(),
        };
        assert_eq!(plan_schedule(&input).planned_start(2), Some(900));
        let extended = input.with_expected_end(1, 1340);
        assert_eq!(plan_schedule(&extended).planned_start(2), Some(1340));
        let cancelled = input.with_cancelled(1);
        assert_eq!(plan_schedule(&cancelled).planned_start(2), Some(100));
    }

    #[test]
    fn plan_chains_and_backfills() {
        // 2 nodes; job 1 runs on node 0 until 100.
        // Queue: 2 (2 nodes, 50 s), 3 (1 node, 60 s), 4 (1 node, 500 s).
        let input = PlanInput {
            now: 0,
            running: vec![running(1, 0..1, 100)],
            pending: vec![pending(2, 2, 50), pending(3, 1, 60), pending(4, 1, 500)],
            free_nodes: (1..2).collect(),
        };
        let plan = plan_schedule(&input);
        assert_eq!(plan.planned_start(3), Some(0)); // backfilled, ends at 60 <= 100
        assert_eq!(plan.planned_start(2), Some(100));
        assert_eq!(plan.planned_start(4), Some(150));
    }
}
