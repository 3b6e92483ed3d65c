//! Scheduling metrics for a finished run and cross-policy comparison.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{cpu_time, CoreSeconds, JobRuntime, JobState, ModelError, PolicyKind, SchedSource, Seconds};

/// Core-seconds between the last checkpoint and the end of a checkpointing
/// job. Completed jobs and non-checkpointing jobs lose nothing.
pub fn tail_waste(runtime: &JobRuntime) -> Result<CoreSeconds, ModelError> {
    let (Some(start), Some(end)) = (runtime.start_time, runtime.end_time) else {
        return Err(ModelError::NotFinished(runtime.job_id()));
    };
    if !runtime.state.is_terminal() {
        return Err(ModelError::NotFinished(runtime.job_id()));
    }
    if !runtime.spec.checkpointing || runtime.state == JobState::Completed {
        return Ok(0);
    }
    let saved_until = runtime.last_checkpoint().unwrap_or(start);
    Ok(end.saturating_sub(saved_until) * runtime.spec.cores())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaitStats {
    /// Plain mean wait, seconds.
    pub avg_wait: f64,
    /// Node-weighted mean wait, seconds.
    pub weighted_avg_wait: f64,
    /// Sum of nodes times wait over the job count, node-seconds.
    pub weighted_wait_node_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("no jobs to average over")]
    Empty,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("comparison needs at least two reports")]
    TooFewReports,
    #[error("comparison must start with the baseline report, got {0}")]
    BaselineNotFirst(PolicyKind),
    #[error("policy {0} appears more than once")]
    DuplicatePolicy(PolicyKind),
}

pub fn waits(runtimes: &[JobRuntime]) -> Result<WaitStats, MetricsError> {
    if runtimes.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut total = 0u128;
    let mut weighted = 0u128;
    let mut nodes = 0u128;
    for rt in runtimes {
        let wait = rt.wait_time().ok_or(ModelError::NotFinished(rt.job_id()))? as u128;
        total += wait;
        weighted += wait * u128::from(rt.spec.nodes);
        nodes += u128::from(rt.spec.nodes);
    }
    let n = runtimes.len() as f64;
    Ok(WaitStats {
        avg_wait: total as f64 / n,
        weighted_avg_wait: weighted as f64 / nodes as f64,
        weighted_wait_node_seconds: weighted as f64 / n,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobCounts {
    pub completed: usize,
    pub timeout: usize,
    pub cancelled_at_ckpt: usize,
    /// Cancelled without having been extended.
    pub early_cancelled: usize,
    /// Granted at least one extension.
    pub extended: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceCounts {
    pub main: usize,
    pub backfill: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub policy: PolicyKind,
    pub counts: JobCounts,
    pub sched_source_counts: SourceCounts,
    pub total_checkpoints: usize,
    pub avg_wait: f64,
    pub weighted_avg_wait: f64,
    pub weighted_wait_node_seconds: f64,
    pub tail_waste: CoreSeconds,
    pub total_cpu: CoreSeconds,
    pub makespan: Seconds,
}

impl MetricsReport {
    pub fn empty(policy: PolicyKind) -> Self {
        MetricsReport {
            policy,
            counts: JobCounts::default(),
            sched_source_counts: SourceCounts::default(),
            total_checkpoints: 0,
            avg_wait: 0.0,
            weighted_avg_wait: 0.0,
            weighted_wait_node_seconds: 0.0,
            tail_waste: 0,
            total_cpu: 0,
            makespan: 0,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Summarizes a finished run.
pub fn aggregate(runtimes: &[JobRuntime], policy: PolicyKind) -> Result<MetricsReport, MetricsError> {
    if runtimes.is_empty() {
        return Ok(MetricsReport::empty(policy));
    }
    let mut report = MetricsReport::empty(policy);
    let mut first_submit = Seconds::MAX;
    let mut last_end = 0;
    for rt in runtimes {
        let c = &mut report.counts;
        c.total += 1;
        match rt.state {
            JobState::Completed => c.completed += 1,
            JobState::Timeout => c.timeout += 1,
            JobState::CancelledAtCkpt => {
                c.cancelled_at_ckpt += 1;
                if rt.extensions_granted == 0 {
                    c.early_cancelled += 1;
                }
            }
            JobState::Pending | JobState::Running => {
                return Err(ModelError::NotFinished(rt.job_id()).into());
            }
        }
        if rt.extensions_granted > 0 {
            c.extended += 1;
        }
        match rt.sched_source {
            Some(SchedSource::Main) => report.sched_source_counts.main += 1,
            Some(SchedSource::Backfill) => report.sched_source_counts.backfill += 1,
            None => {}
        }
        report.total_checkpoints += rt.checkpoints.len();
        report.tail_waste += tail_waste(rt)?;
        report.total_cpu += cpu_time(rt)?;
        first_submit = first_submit.min(rt.spec.submit_time);
        last_end = last_end.max(rt.end_time.unwrap_or_default());
    }
    let w = waits(runtimes)?;
    report.avg_wait = w.avg_wait;
    report.weighted_avg_wait = w.weighted_avg_wait;
    report.weighted_wait_node_seconds = w.weighted_wait_node_seconds;
    report.makespan = last_end.saturating_sub(first_submit);
    Ok(report)
}

/// Percent change from `base` to `value`; 0 when both are 0.
pub fn percent_delta(base: f64, value: f64) -> Option<f64> {
    if base == 0.0 {
        return (value == 0.0).then_some(0.0);
    }
    Some((value - base) / base * 100.0)
}

/// Percent of baseline tail waste removed by a policy. `None` when the
/// baseline has no tail waste.
pub fn tail_waste_reduction_pct(baseline: &MetricsReport, other: &MetricsReport) -> Option<f64> {
    if baseline.tail_waste == 0 {
        return None;
    }
    percent_delta(baseline.tail_waste as f64, other.tail_waste as f64).map(|d| -d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub unit: String,
    pub values: Vec<f64>,
    /// Percent change vs the first column; empty cell when undefined.
    pub deltas_pct: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub policies: Vec<PolicyKind>,
    pub rows: Vec<ComparisonRow>,
}

type Extract = fn(&MetricsReport) -> f64;

const ROWS: &[(&str, &str, Extract)] = &[
    ("timeout", "jobs", |r| r.counts.timeout as f64),
    ("early_cancelled", "jobs", |r| r.counts.early_cancelled as f64),
    ("extended", "jobs", |r| r.counts.extended as f64),
    ("completed", "jobs", |r| r.counts.completed as f64),
    ("total_jobs", "jobs", |r| r.counts.total as f64),
    ("sched_main", "jobs", |r| r.sched_source_counts.main as f64),
    ("sched_backfill", "jobs", |r| r.sched_source_counts.backfill as f64),
    ("total_checkpoints", "count", |r| r.total_checkpoints as f64),
    ("avg_wait", "s", |r| r.avg_wait),
    ("weighted_avg_wait", "s", |r| r.weighted_avg_wait),
    ("weighted_wait_node_seconds", "node*s", |r| r.weighted_wait_node_seconds),
    ("tail_waste", "core*s", |r| r.tail_waste as f64),
    ("total_cpu", "core*s", |r| r.total_cpu as f64),
    ("makespan", "s", |r| r.makespan as f64),
];

/// Lines up reports metric by metric. The first report is the baseline.
pub fn compare(reports: &[MetricsReport]) -> Result<Comparison, MetricsError> {
    if reports.len() < 2 {
        return Err(MetricsError::TooFewReports);
    }
    if reports[0].policy != PolicyKind::Baseline {
        return Err(MetricsError::BaselineNotFirst(reports[0].policy));
    }
    let mut seen = HashSet::new();
    for r in reports {
        if !seen.insert(r.policy) {
            return Err(MetricsError::DuplicatePolicy(r.policy));
        }
    }
    let rows = ROWS
        .iter()
        .map(|(metric, unit, get)| {
            let values: Vec<f64> = reports.iter().map(get).collect();
            let deltas_pct = values[1..].iter().map(|v| percent_delta(values[0], *v)).collect();
            ComparisonRow {
                metric: metric.to_string(),
                unit: unit.to_string(),
                values,
                deltas_pct,
            }
        })
        .collect();
    Ok(Comparison {
        policies: reports.iter().map(|r| r.policy).collect(),
        rows,
    })
}

fn fmt_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.3}")
    }
}

impl Comparison {
    pub fn row(&self, metric: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    /// CSV: metric, unit, one column per policy, then one delta column per
    /// non-baseline policy.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,unit");
        for p in &self.policies {
            write!(out, ",{p}").unwrap();
        }
        for p in &self.policies[1..] {
            write!(out, ",delta_pct_{p}").unwrap();
        }
        out.push('\n');
        for row in &self.rows {
            write!(out, "{},{}", row.metric, row.unit).unwrap();
            for v in &row.values {
                write!(out, ",{}", fmt_value(*v)).unwrap();
            }
            for d in &row.deltas_pct {
                match d {
                    Some(d) => write!(out, ",{d:.2}").unwrap(),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Aligned plain-text table; columns are sized to their widest cell.
    pub fn render_table(&self) -> String {
        let mut grid = vec![std::iter::once("metric".to_string())
            .chain(self.policies.iter().map(|p| p.to_string()))
            .collect::<Vec<_>>()];
        for row in &self.rows {
            let mut cells = vec![format!("{} ({})", row.metric, row.unit)];
            for (i, v) in row.values.iter().enumerate() {
                cells.push(match i.checked_sub(1).and_then(|j| row.deltas_pct[j]) {
                    Some(d) if d != 0.0 => format!("{} ({:+.1}%)", fmt_value(*v), d),
                    _ => fmt_value(*v),
                });
            }
            grid.push(cells);
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|c| grid.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for cells in &grid {
            write!(out, "{:<w$}", cells[0], w = widths[0]).unwrap();
            for (cell, w) in cells[1..].iter().zip(&widths[1..]) {
                write!(out, "  {cell:>w$}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{job_transition, JobSpec, LifecycleEvent};

    fn finished(
        job_id: u64,
        nodes: u32,
        checkpointing: bool,
        start: Seconds,
        ckpts: &[Seconds],
        end: LifecycleEvent,
    ) -> JobRuntime {
        let spec = JobSpec {
            job_id,
            submit_time: 0,
            nodes,
            cores_per_node: 32,
            time_limit: 1440,
            true_duration: if matches!(end, LifecycleEvent::Finish { .. }) {
                600
            } else {
                1861
            },
            checkpointing,
            ckpt_interval: checkpointing.then_some(420),
        };
        let mut rt = job_transition(
            JobRuntime::new(spec),
            LifecycleEvent::Start {
                at: start,
                nodes: (0..nodes).collect(),
                source: SchedSource::Main,
            },
        )
        .unwrap();
        for c in ckpts {
            rt.record_checkpoint(*c).unwrap();
        }
        job_transition(rt, end).unwrap()
    }

    #[test]
    fn tail_waste_examples() {
        let rt = finished(
            1,
            2,
            true,
            0,
            &[420, 840, 1260],
            LifecycleEvent::LimitReached { at: 1440 },
        );
        assert_eq!(tail_waste(&rt).unwrap(), 11_520);
        let rt = finished(1, 2, true, 0, &[420, 840, 1260], LifecycleEvent::Cancel { at: 1260 });
        assert_eq!(tail_waste(&rt).unwrap(), 0);
        let rt = finished(1, 2, false, 0, &[], LifecycleEvent::LimitReached { at: 1440 });
        assert_eq!(tail_waste(&rt).unwrap(), 0);
        let rt = finished(1, 1, true, 0, &[420], LifecycleEvent::Finish { at: 600 });
        assert_eq!(tail_waste(&rt).unwrap(), 0);
    }

    #[test]
    fn tail_waste_without_any_checkpoint_counts_from_start() {
        let mut rt = finished(1, 1, true, 100, &[], LifecycleEvent::LimitReached { at: 1540 });
        assert_eq!(tail_waste(&rt).unwrap(), 1440 * 32);
        rt.end_time = None;
        assert!(tail_waste(&rt).is_err());
    }

    #[test]
    fn wait_examples() {
        let a = finished(1, 1, false, 10, &[], LifecycleEvent::Finish { at: 610 });
        let b = finished(2, 9, false, 100, &[], LifecycleEvent::Finish { at: 700 });
        let w = waits(&[a.clone(), b]).unwrap();
        assert_eq!(w.avg_wait, 55.0);
        assert_eq!(w.weighted_avg_wait, 91.0);
        assert_eq!(w.weighted_wait_node_seconds, 455.0);

        let c = finished(3, 1, false, 30, &[], LifecycleEvent::Finish { at: 630 });
        let w = waits(&[a.clone(), c]).unwrap();
        assert_eq!(w.avg_wait, w.weighted_avg_wait);

        let w = waits(&[a]).unwrap();
        assert_eq!((w.avg_wait, w.weighted_avg_wait), (10.0, 10.0));
        assert_eq!(waits(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn aggregate_counts_and_totals() {
        let mut extended = finished(3, 1, true, 0, &[420, 840, 1260], LifecycleEvent::Cancel { at: 1270 });
        extended.extensions_granted = 1;
        let runs = vec![
            finished(
                1,
                1,
                true,
                0,
                &[420, 840, 1260],
                LifecycleEvent::LimitReached { at: 1440 },
            ),
            finished(2, 2, false, 0, &[], LifecycleEvent::Finish { at: 600 }),
            extended,
            finished(4, 1, true, 0, &[420, 840, 1260], LifecycleEvent::Cancel { at: 1265 }),
        ];
        let r = aggregate(&runs, PolicyKind::Hybrid).unwrap();
        assert_eq!(r.counts.total, 4);
        assert_eq!(r.counts.timeout, 1);
        assert_eq!(r.counts.completed, 1);
        assert_eq!(r.counts.cancelled_at_ckpt, 2);
        assert_eq!(r.counts.early_cancelled, 1);
        assert_eq!(r.counts.extended, 1);
        assert_eq!(r.total_checkpoints, 9);
        assert_eq!(r.tail_waste, (180 + 10 + 5) * 32);
        let cpu: u64 = runs.iter().map(|rt| cpu_time(rt).unwrap()).sum();
        assert_eq!(r.total_cpu, cpu);
        assert_eq!(r.makespan, 1440);
        assert_eq!(r.sched_source_counts.main, 4);
    }

    #[test]
    fn empty_aggregate_is_zero() {
        let r = aggregate(&[], PolicyKind::Baseline).unwrap();
        assert_eq!(r, MetricsReport::empty(PolicyKind::Baseline));
    }

    #[test]
    fn comparison_deltas() {
        let mut base = MetricsReport::empty(PolicyKind::Baseline);
        base.tail_waste = 875_520;
        let mut ec = MetricsReport::empty(PolicyKind::EarlyCancel);
        ec.tail_waste = 43_120;
        let cmp = compare(&[base.clone(), ec.clone()]).unwrap();
        let row = cmp.row("tail_waste").unwrap();
        let delta = row.deltas_pct[0].unwrap();
        assert!((delta + 95.07).abs() < 0.01, "{delta}");
        assert!((tail_waste_reduction_pct(&base, &ec).unwrap() - 95.1).abs() < 0.05);
        // all-zero rows have 0% deltas
        assert_eq!(cmp.row("makespan").unwrap().deltas_pct, vec![Some(0.0)]);
        let csv = cmp.to_csv();
        assert!(csv.starts_with("metric,unit,baseline,early-cancel,delta_pct_early-cancel\n"));
        assert!(csv.contains("tail_waste,core*s,875520,43120,-95.07\n"));
    }

    #[test]
    fn identical_reports_have_zero_deltas() {
        let base = MetricsReport {
            total_cpu: 100,
            makespan: 7,
            ..MetricsReport::empty(PolicyKind::Baseline)
        };
        let same = MetricsReport {
            policy: PolicyKind::Extend,
            ..base.clone()
        };
        let cmp = compare(&[base, same]).unwrap();
        assert!(cmp.rows.iter().all(|r| r.deltas_pct == vec![Some(0.0)]));
    }

    #[test]
    fn comparison_errors() {
        let b = MetricsReport::empty(PolicyKind::Baseline);
        let e = MetricsReport::empty(PolicyKind::Extend);
        assert_eq!(compare(std::slice::from_ref(&b)), Err(MetricsError::TooFewReports));
        assert_eq!(
            compare(&[e.clone(), b.clone()]),
            Err(MetricsError::BaselineNotFirst(PolicyKind::Extend))
        );
        assert_eq!(
            compare(&[b, e.clone(), e]),
            Err(MetricsError::DuplicatePolicy(PolicyKind::Extend))
        );
    }
}
