use std::collections::BTreeMap;

use chrono::NaiveDateTime;

use crate::daemon::{PendingJob, QueueSnapshot, RunningJob};
use crate::model::{JobId, NodeId, Seconds};
use crate::sim::NodeSet;
use crate::slurm::{parse_timelimit, AdapterError, SchedulerCommand, TimeLimit};

/// Field list passed to `squeue --Format`. Each field but the last carries a
/// `|` suffix, so rows come out pipe separated.
pub const SQUEUE_FORMAT: &str = "JobID:|,State:|,StartTime:|,TimeLimit:|,NodeList:|,SchedNodes:|,NumNodes:";

/// Header line `squeue` prints for [`SQUEUE_FORMAT`].
pub const SQUEUE_HEADER: &str = "JOBID|STATE|START_TIME|TIME_LIMIT|NODELIST|SCHEDNODES|NODES";

const START_TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Running jobs with an unlimited limit are planned as ending this far out.
const UNLIMITED_HORIZON: Seconds = 10 * 365 * 86_400;

/// `squeue --states=PENDING,RUNNING --sort=-p,i --Format=<SQUEUE_FORMAT>`.
/// Pending rows come out in priority order.
pub fn squeue_command() -> SchedulerCommand {
    SchedulerCommand {
        argv: vec![
            "squeue".into(),
            "--states=PENDING,RUNNING".into(),
            "--sort=-p,i".into(),
            format!("--Format={SQUEUE_FORMAT}"),
        ],
        expected_exit: 0,
    }
}

/// One typed `squeue` row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqueueRow {
    pub job_id: JobId,
    pub state: String,
    /// Actual start for running jobs, expected start for pending ones.
    pub start_time: Option<NaiveDateTime>,
    pub time_limit: TimeLimit,
    pub node_list: Vec<String>,
    pub sched_nodes: Vec<String>,
    pub num_nodes: u32,
}

/// Maps wall-clock times and host names onto the daemon's clock and node ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqueueContext {
    /// Wall-clock instant that is t=0 on the daemon clock.
    pub epoch: NaiveDateTime,
    pub now: NaiveDateTime,
    /// Host names; a node's id is its index here.
    pub nodes: Vec<String>,
}

impl SqueueContext {
    pub fn seconds(&self, at: NaiveDateTime) -> Seconds {
        (at - self.epoch).num_seconds().max(0) as Seconds
    }

    fn node_ids(&self) -> BTreeMap<&str, NodeId> {
        self.nodes.iter().zip(0..).map(|(n, i)| (n.as_str(), i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqueueParse {
    pub snapshot: QueueSnapshot,
    /// Rows that could not be used, with their line numbers.
    pub warnings: Vec<String>,
}

/// Expands a Slurm hostlist such as `cn[01-03,07],gpu1`.
pub fn expand_hostlist(list: &str) -> Result<Vec<String>, AdapterError> {
    let list = list.trim();
    if list.is_empty() || list == "(null)" || list.eq_ignore_ascii_case("n/a") {
        return Ok(Vec::new());
    }
    let bad = || AdapterError::BadHostlist(list.to_string());
    let mut items = Vec::new();
    let (mut depth, mut begin) = (0i32, 0);
    for (i, c) in list.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                items.push(&list[begin..i]);
                begin = i + 1;
            }
            _ => {}
        }
        if depth < 0 {
            return Err(bad());
        }
    }
    if depth != 0 {
        return Err(bad());
    }
    items.push(&list[begin..]);

    let mut hosts = Vec::new();
    for item in items {
        hosts.extend(expand_item(item).ok_or_else(bad)?);
    }
    Ok(hosts)
}

fn expand_item(item: &str) -> Option<Vec<String>> {
    if item.is_empty() {
        return None;
    }
    let Some(open) = item.find('[') else {
        return Some(vec![item.to_string()]);
    };
    let close = open + item[open..].find(']')?;
    let (prefix, body, rest) = (&item[..open], &item[open + 1..close], &item[close + 1..]);
    let tails = if rest.is_empty() {
        vec![String::new()]
    } else {
        expand_item(rest)?
    };
    let mut out = Vec::new();
    for range in body.split(',') {
        let (lo, hi) = range.split_once('-').unwrap_or((range, range));
        if lo.is_empty() || !lo.bytes().chain(hi.bytes()).all(|b| b.is_ascii_digit()) {
            return None;
        }
        let (a, b): (u64, u64) = (lo.parse().ok()?, hi.parse().ok()?);
        if a > b {
            return None;
        }
        for n in a..=b {
            for tail in &tails {
                out.push(format!("{prefix}{n:0width$}{tail}", width = lo.len()));
            }
        }
    }
    Some(out)
}

fn parse_start(text: &str) -> Result<Option<NaiveDateTime>, String> {
    match text {
        "" | "N/A" | "Unknown" | "None" => Ok(None),
        _ => NaiveDateTime::parse_from_str(text, START_TIME_FORMAT)
            .map(Some)
            .map_err(|e| format!("start time `{text}`: {e}")),
    }
}

fn parse_row(text: &str) -> Result<SqueueRow, String> {
    let mut fields: Vec<&str> = text.split('|').map(str::trim).collect();
    if fields.len() == 8 && fields[7].is_empty() {
        fields.pop();
    }
    let [job_id, state, start, limit, node_list, sched_nodes, num_nodes] = fields[..] else {
        return Err(format!("expected 7 fields, found {}", fields.len()));
    };
    Ok(SqueueRow {
        job_id: job_id.parse().map_err(|_| format!("job id `{job_id}`"))?,
        state: state.to_string(),
        start_time: parse_start(start)?,
        time_limit: parse_timelimit(limit).map_err(|e| e.to_string())?,
        node_list: expand_hostlist(node_list).map_err(|e| e.to_string())?,
        sched_nodes: expand_hostlist(sched_nodes).map_err(|e| e.to_string())?,
        num_nodes: num_nodes.parse().map_err(|_| format!("node count `{num_nodes}`"))?,
    })
}

/// Rows tagged with their 1-based line numbers, plus warnings.
pub type ParsedRows = (Vec<(usize, SqueueRow)>, Vec<String>);

/// Splits `squeue` output into typed rows. Rows that fail to parse become
/// warnings; only a missing header is fatal.
pub fn parse_squeue_rows(text: &str) -> Result<ParsedRows, AdapterError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let header = lines.next().ok_or(AdapterError::MissingHeader)?.1;
    let header: Vec<&str> = header.split('|').map(str::trim).filter(|f| !f.is_empty()).collect();
    if header.join("|") != SQUEUE_HEADER {
        return Err(AdapterError::MissingHeader);
    }
    let (mut rows, mut warnings) = (Vec::new(), Vec::new());
    for (idx, line) in lines {
        match parse_row(line) {
            Ok(row) => rows.push((idx + 1, row)),
            Err(e) => warnings.push(format!("line {}: {e}", idx + 1)),
        }
    }
    Ok((rows, warnings))
}

/// Builds the daemon's queue view from `squeue` output. Running means
/// RUNNING or COMPLETING; other states besides PENDING are ignored.
pub fn parse_squeue_output(text: &str, ctx: &SqueueContext) -> Result<SqueueParse, AdapterError> {
    let (rows, mut warnings) = parse_squeue_rows(text)?;
    let ids = ctx.node_ids();
    let resolve = |hosts: &[String]| -> Result<Vec<NodeId>, String> {
        hosts
            .iter()
            .map(|h| {
                ids.get(h.as_str())
                    .copied()
                    .ok_or_else(|| format!("unknown host `{h}`"))
            })
            .collect()
    };
    let mut snapshot = QueueSnapshot {
        now: ctx.seconds(ctx.now),
        ..QueueSnapshot::default()
    };
    let mut busy = NodeSet::default();
    for (line, row) in rows {
        let limit = row.time_limit.seconds();
        match row.state.as_str() {
            "RUNNING" | "COMPLETING" => {
                let Some(start) = row.start_time else {
                    warnings.push(format!("line {line}: running job {} has no start time", row.job_id));
                    continue;
                };
                let nodes = match resolve(&row.node_list) {
                    Ok(n) => n,
                    Err(e) => {
                        warnings.push(format!("line {line}: {e}"));
                        continue;
                    }
                };
                busy.extend(nodes.iter().copied());
                snapshot.running.push(RunningJob {
                    job_id: row.job_id,
                    start_time: ctx.seconds(start),
                    current_limit: limit.unwrap_or(UNLIMITED_HORIZON),
                    allocated_nodes: nodes,
                    extensions_granted: 0,
                });
            }
            "PENDING" => {
                let planned_nodes = resolve(&row.sched_nodes).unwrap_or_else(|e| {
                    warnings.push(format!("line {line}: {e}; planned nodes dropped"));
                    Vec::new()
                });
                snapshot.pending.push(PendingJob {
                    job_id: row.job_id,
                    nodes: row.num_nodes,
                    time_limit: limit.unwrap_or(UNLIMITED_HORIZON),
                    planned_start: row.start_time.map(|t| ctx.seconds(t)),
                    planned_nodes,
                });
            }
            _ => {}
        }
    }
    snapshot.free_nodes = (0..ctx.nodes.len() as NodeId).filter(|n| !busy.contains(*n)).collect();
    Ok(SqueueParse { snapshot, warnings })
}
