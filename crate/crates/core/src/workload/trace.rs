//! Production trace records and the filter / scale / mark pipeline.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{JobSpec, Seconds};
use crate::workload::{Format, WorkloadError};

pub const TRACE_COLUMNS: [&str; 11] = [
    "job_id",
    "submit_time",
    "nodes",
    "cores_per_node",
    "time_limit",
    "run_duration",
    "final_state",
    "exclusive",
    "partition",
    "queue",
    "month",
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum FinalState {
    Completed,
    Timeout,
    Other(String),
}

impl From<String> for FinalState {
    fn from(s: String) -> Self {
        match s.trim() {
            "COMPLETED" => FinalState::Completed,
            "TIMEOUT" => FinalState::Timeout,
            other => FinalState::Other(other.to_string()),
        }
    }
}

impl From<FinalState> for String {
    fn from(s: FinalState) -> Self {
        s.to_string()
    }
}

impl fmt::Display for FinalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FinalState::Completed => f.write_str("COMPLETED"),
            FinalState::Timeout => f.write_str("TIMEOUT"),
            FinalState::Other(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub job_id: u64,
    pub submit_time: Seconds,
    pub nodes: u32,
    pub cores_per_node: u32,
    pub time_limit: Seconds,
    pub run_duration: Seconds,
    pub final_state: FinalState,
    pub exclusive: bool,
    pub partition: String,
    pub queue: String,
    pub month: String,
}

fn field(get: &impl Fn(&str) -> Option<String>, name: &'static str, line: usize) -> Result<String, WorkloadError> {
    get(name).ok_or(WorkloadError::MissingField { line, field: name })
}

fn number<T: TryFrom<i128>>(
    get: &impl Fn(&str) -> Option<String>,
    name: &'static str,
    line: usize,
) -> Result<T, WorkloadError> {
    let raw = field(get, name, line)?;
    let value: i128 = raw.trim().parse().map_err(|_| WorkloadError::NotNumeric {
        line,
        field: name,
        value: raw.clone(),
    })?;
    if value < 0 {
        return Err(WorkloadError::Negative {
            line,
            field: name,
            value: raw,
        });
    }
    T::try_from(value).map_err(|_| WorkloadError::NotNumeric {
        line,
        field: name,
        value: raw,
    })
}

fn boolean(get: &impl Fn(&str) -> Option<String>, name: &'static str, line: usize) -> Result<bool, WorkloadError> {
    let raw = field(get, name, line)?;
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(WorkloadError::NotBoolean {
            line,
            field: name,
            value: raw,
        }),
    }
}

fn build_record(get: impl Fn(&str) -> Option<String>, line: usize) -> Result<TraceRecord, WorkloadError> {
    Ok(TraceRecord {
        job_id: number(&get, "job_id", line)?,
        submit_time: number(&get, "submit_time", line)?,
        nodes: number(&get, "nodes", line)?,
        cores_per_node: number(&get, "cores_per_node", line)?,
        time_limit: number(&get, "time_limit", line)?,
        run_duration: number(&get, "run_duration", line)?,
        final_state: FinalState::from(field(&get, "final_state", line)?),
        exclusive: boolean(&get, "exclusive", line)?,
        partition: field(&get, "partition", line)?.trim().to_string(),
        queue: field(&get, "queue", line)?.trim().to_string(),
        month: field(&get, "month", line)?.trim().to_string(),
    })
}

/// Reads a trace in file order. Every error names the offending line.
pub fn parse_trace<R: Read>(input: R, format: Format) -> Result<Vec<TraceRecord>, WorkloadError> {
    match format {
        Format::Csv => parse_csv(input),
        Format::Jsonl => parse_jsonl(input),
    }
}

fn parse_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>, WorkloadError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let mut rows = reader.records();
    let header = match rows.next() {
        None => return Ok(Vec::new()),
        Some(h) => h.map_err(|e| WorkloadError::Csv {
            line: 1,
            message: e.to_string(),
        })?,
    };
    let mut columns = HashMap::new();
    for (i, name) in header.iter().enumerate() {
        if !TRACE_COLUMNS.contains(&name) {
            return Err(WorkloadError::UnknownColumn {
                line: 1,
                column: name.to_string(),
            });
        }
        columns.insert(name.to_string(), i);
    }
    if let Some(missing) = TRACE_COLUMNS.iter().find(|c| !columns.contains_key(**c)) {
        return Err(WorkloadError::MissingField {
            line: 1,
            field: missing,
        });
    }
    let mut out = Vec::new();
    for row in rows {
        let row = row.map_err(|e| WorkloadError::Csv {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.iter().all(str::is_empty) {
            continue;
        }
        let get = |name: &str| {
            columns
                .get(name)
                .and_then(|&i| row.get(i))
                .filter(|v| !v.is_empty())
                .map(str::to_string)
        };
        out.push(build_record(get, line)?);
    }
    Ok(out)
}

fn parse_jsonl<R: Read>(input: R) -> Result<Vec<TraceRecord>, WorkloadError> {
    let mut out = Vec::new();
    for (idx, text) in BufReader::new(input).lines().enumerate() {
        let line = idx + 1;
        let text = text.map_err(|e| WorkloadError::Io(e.to_string()))?;
        if text.trim().is_empty() {
            continue;
        }
        let object: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(&text).map_err(|e| WorkloadError::Json {
                line,
                message: e.to_string(),
            })?;
        if let Some(key) = object.keys().find(|k| !TRACE_COLUMNS.contains(&k.as_str())) {
            return Err(WorkloadError::UnknownColumn {
                line,
                column: key.clone(),
            });
        }
        let get = |name: &str| match object.get(name)? {
            serde_json::Value::Null => None,
            serde_json::Value::String(s) => Some(s.clone()),
            other => Some(other.to_string()),
        };
        out.push(build_record(get, line)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterCriteria {
    pub partition: Option<String>,
    pub queue: Option<String>,
    pub month: Option<String>,
    /// Empty accepts any state.
    pub states: Vec<FinalState>,
    pub min_run_duration: Seconds,
    pub require_exclusive: bool,
}

impl FilterCriteria {
    /// Busiest partition/queue/month of the source trace, exclusive
    /// COMPLETED or TIMEOUT jobs that ran at least an hour.
    pub fn reference_subset() -> Self {
        FilterCriteria {
            partition: Some("1".into()),
            queue: Some("1".into()),
            month: Some("May".into()),
            states: vec![FinalState::Completed, FinalState::Timeout],
            min_run_duration: 3600,
            require_exclusive: true,
        }
    }

    pub fn accepts(&self, r: &TraceRecord) -> bool {
        let matches = |want: &Option<String>, have: &str| want.as_deref().is_none_or(|w| w == have);
        matches(&self.partition, &r.partition)
            && matches(&self.queue, &r.queue)
            && matches(&self.month, &r.month)
            && (self.states.is_empty() || self.states.contains(&r.final_state))
            && r.run_duration >= self.min_run_duration
            && (!self.require_exclusive || r.exclusive)
    }
}

pub fn filter_jobs(records: &[TraceRecord], criteria: &FilterCriteria) -> Vec<TraceRecord> {
    records.iter().filter(|r| criteria.accepts(r)).cloned().collect()
}

/// Positive rational time compression factor, `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleFactor {
    pub num: u64,
    pub den: u64,
}

impl ScaleFactor {
    pub fn new(num: u64, den: u64) -> Result<Self, WorkloadError> {
        if num == 0 || den == 0 {
            return Err(WorkloadError::BadScaleFactor(format!("{num}/{den}")));
        }
        Ok(ScaleFactor { num, den })
    }

    pub fn integer(factor: u64) -> Result<Self, WorkloadError> {
        Self::new(factor, 1)
    }

    /// `value / factor`, rounded to the nearest integer with ties to even.
    pub fn shrink(&self, value: Seconds) -> Seconds {
        let scaled = u128::from(value) * u128::from(self.den);
        let num = u128::from(self.num);
        let (q, r) = (scaled / num, scaled % num);
        let q = match (2 * r).cmp(&num) {
            std::cmp::Ordering::Less => q,
            std::cmp::Ordering::Greater => q + 1,
            std::cmp::Ordering::Equal => q + (q & 1),
        };
        q as Seconds
    }
}

impl FromStr for ScaleFactor {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || WorkloadError::BadScaleFactor(s.to_string());
        let (num, den) = s.split_once('/').unwrap_or((s, "1"));
        let num = num.trim().parse().map_err(|_| bad())?;
        let den = den.trim().parse().map_err(|_| bad())?;
        ScaleFactor::new(num, den)
    }
}

/// Compresses limits and durations and releases every job at t=0.
pub fn scale_time(records: &[TraceRecord], factor: ScaleFactor) -> Vec<TraceRecord> {
    records
        .iter()
        .map(|r| TraceRecord {
            submit_time: 0,
            time_limit: factor.shrink(r.time_limit),
            run_duration: factor.shrink(r.run_duration),
            ..r.clone()
        })
        .collect()
}

/// Turns trace records into jobs. TIMEOUT jobs that hit `max_limit` become
/// checkpointing jobs that would outlast one extension; all other TIMEOUT
/// jobs overrun their limit by the same margin without checkpointing.
pub fn mark_checkpointing(records: &[TraceRecord], max_limit: Seconds, ckpt_interval: Seconds) -> Vec<JobSpec> {
    records
        .iter()
        .map(|r| {
            let time_limit = r.time_limit.max(1);
            let timed_out = r.final_state == FinalState::Timeout;
            let checkpointing = timed_out && r.time_limit == max_limit && ckpt_interval > 0;
            let true_duration = if timed_out {
                time_limit + ckpt_interval + 1
            } else {
                r.run_duration.clamp(1, time_limit)
            };
            JobSpec {
                job_id: r.job_id,
                submit_time: r.submit_time,
                nodes: r.nodes.max(1),
                cores_per_node: r.cores_per_node.max(1),
                time_limit,
                true_duration,
                checkpointing,
                ckpt_interval: checkpointing.then_some(ckpt_interval),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str =
        "job_id,submit_time,nodes,cores_per_node,time_limit,run_duration,final_state,exclusive,partition,queue,month\n";

    fn record(run_duration: Seconds, state: FinalState) -> TraceRecord {
        TraceRecord {
            job_id: 1,
            submit_time: 500,
            nodes: 2,
            cores_per_node: 32,
            time_limit: 86_400,
            run_duration,
            final_state: state,
            exclusive: true,
            partition: "1".into(),
            queue: "1".into(),
            month: "May".into(),
        }
    }

    #[test]
    fn parses_csv_row() {
        let text = format!("{HEADER}17,0,2,32,86400,86400,TIMEOUT,true,1,1,May\n");
        let recs = parse_trace(text.as_bytes(), Format::Csv).unwrap();
        assert_eq!(
            recs,
            vec![TraceRecord {
                job_id: 17,
                submit_time: 0,
                run_duration: 86_400,
                ..record(0, FinalState::Timeout)
            }]
        );
    }

    #[test]
    fn empty_stream_is_empty() {
        assert!(parse_trace(&b""[..], Format::Csv).unwrap().is_empty());
        assert!(parse_trace(&b""[..], Format::Jsonl).unwrap().is_empty());
        assert!(parse_trace(HEADER.as_bytes(), Format::Csv).unwrap().is_empty());
    }

    #[test]
    fn negative_nodes_rejected_with_line() {
        let text = format!("{HEADER}1,0,1,32,60,60,COMPLETED,true,1,1,May\n2,0,-1,32,60,60,COMPLETED,true,1,1,May\n");
        let err = parse_trace(text.as_bytes(), Format::Csv).unwrap_err();
        assert!(
            matches!(
                err,
                WorkloadError::Negative {
                    line: 3,
                    field: "nodes",
                    ..
                }
            ),
            "{err:?}"
        );
    }

    #[test]
    fn csv_errors_carry_lines() {
        let bad_header = "job_id,wat\n";
        assert!(matches!(
            parse_trace(bad_header.as_bytes(), Format::Csv),
            Err(WorkloadError::UnknownColumn { line: 1, .. })
        ));
        let missing = "job_id,submit_time\n";
        assert!(matches!(
            parse_trace(missing.as_bytes(), Format::Csv),
            Err(WorkloadError::MissingField { line: 1, .. })
        ));
        let text = format!("{HEADER}1,0,x,32,60,60,COMPLETED,true,1,1,May\n");
        assert!(matches!(
            parse_trace(text.as_bytes(), Format::Csv),
            Err(WorkloadError::NotNumeric {
                line: 2,
                field: "nodes",
                ..
            })
        ));
        let text = format!("{HEADER}1,0,1,32,60,,COMPLETED,true,1,1,May\n");
        assert!(matches!(
            parse_trace(text.as_bytes(), Format::Csv),
            Err(WorkloadError::MissingField {
                line: 2,
                field: "run_duration"
            })
        ));
    }

    #[test]
    fn parses_jsonl_and_maps_unknown_states() {
        let text = concat!(
            r#"{"job_id":3,"submit_time":10,"nodes":1,"cores_per_node":32,"time_limit":600,"run_duration":30,"final_state":"FAILED","exclusive":false,"partition":"1","queue":"1","month":"May"}"#,
            "\n\n",
            r#"{"job_id":4,"submit_time":"11","nodes":1,"cores_per_node":32,"time_limit":600,"run_duration":30,"final_state":"COMPLETED","exclusive":"true","partition":1,"queue":1,"month":"May"}"#,
            "\n"
        );
        let recs = parse_trace(text.as_bytes(), Format::Jsonl).unwrap();
        assert_eq!(recs[0].final_state, FinalState::Other("FAILED".into()));
        assert_eq!(recs[1].submit_time, 11);
        assert_eq!(recs[1].partition, "1");
        let bad = r#"{"job_id":3,"colour":"red"}"#;
        assert!(matches!(
            parse_trace(bad.as_bytes(), Format::Jsonl),
            Err(WorkloadError::UnknownColumn { line: 1, .. })
        ));
    }

    #[test]
    fn filter_examples() {
        let criteria = FilterCriteria::reference_subset();
        assert!(filter_jobs(&[record(3599, FinalState::Completed)], &criteria).is_empty());
        assert!(filter_jobs(&[record(7200, FinalState::Other("FAILED".into()))], &criteria).is_empty());
        let all = vec![record(3600, FinalState::Completed), record(9000, FinalState::Timeout)];
        assert_eq!(filter_jobs(&all, &criteria), all);
        let mut shared = record(9000, FinalState::Timeout);
        shared.exclusive = false;
        assert!(filter_jobs(&[shared], &criteria).is_empty());
    }

    #[test]
    fn scale_examples() {
        let sixty = ScaleFactor::integer(60).unwrap();
        let scaled = scale_time(&[record(3600, FinalState::Completed)], sixty);
        assert_eq!(scaled[0].time_limit, 1440);
        assert_eq!(scaled[0].run_duration, 60);
        assert_eq!(scaled[0].submit_time, 0);
        let same = scale_time(&[record(3599, FinalState::Completed)], ScaleFactor::integer(1).unwrap());
        assert_eq!(same[0].run_duration, 3599);
        assert_eq!(same[0].time_limit, 86_400);
        assert_eq!(same[0].submit_time, 0);
    }

    #[test]
    fn scale_rounds_half_to_even() {
        let f = ScaleFactor::integer(60).unwrap();
        assert_eq!(f.shrink(90), 2); // 1.5
        assert_eq!(f.shrink(150), 2); // 2.5
        assert_eq!(f.shrink(89), 1);
        assert_eq!(f.shrink(91), 2);
        let half: ScaleFactor = "1/2".parse().unwrap();
        assert_eq!(half.shrink(7), 14);
    }

    #[test]
    fn bad_scale_factors() {
        assert!(ScaleFactor::integer(0).is_err());
        assert!("0/3".parse::<ScaleFactor>().is_err());
        assert!("x".parse::<ScaleFactor>().is_err());
        assert_eq!("60".parse::<ScaleFactor>().unwrap(), ScaleFactor { num: 60, den: 1 });
    }

    #[test]
    fn mark_examples() {
        let mut at_max = record(1440, FinalState::Timeout);
        at_max.time_limit = 1440;
        let mut shorter = record(600, FinalState::Timeout);
        shorter.time_limit = 600;
        let mut done = record(300, FinalState::Completed);
        done.time_limit = 600;
        let specs = mark_checkpointing(&[at_max, shorter, done], 1440, 420);
        assert!(specs[0].checkpointing);
        assert_eq!(specs[0].ckpt_interval, Some(420));
        assert_eq!(specs[0].true_duration, 1861);
        assert!(!specs[1].checkpointing);
        assert!(specs[1].true_duration > specs[1].time_limit);
        assert!(!specs[2].checkpointing);
        assert_eq!(specs[2].true_duration, 300);
        assert!(specs.iter().all(|s| s.validate().is_ok()));
    }

    fn arb_record() -> impl Strategy<Value = TraceRecord> {
        (
            1u64..1_000_000,
            0u64..200,
            0u64..200,
            prop_oneof![
                Just(FinalState::Completed),
                Just(FinalState::Timeout),
                Just(FinalState::Other("FAILED".into()))
            ],
            any::<bool>(),
            1u32..16,
        )
            .prop_map(
                |(job_id, limit_units, run_units, final_state, exclusive, nodes)| TraceRecord {
                    job_id,
                    submit_time: job_id * 7,
                    nodes,
                    cores_per_node: 48,
                    time_limit: limit_units * 60,
                    run_duration: run_units * 60,
                    final_state,
                    exclusive,
                    partition: "1".into(),
                    queue: "1".into(),
                    month: "May".into(),
                },
            )
    }

    proptest! {
        // Durations are whole multiples of the factor, so rounding never
        // moves a record across the threshold.
        #[test]
        fn filter_and_scale_commute(records in proptest::collection::vec(arb_record(), 0..40), min_units in 0u64..100) {
            let factor = ScaleFactor::integer(60).unwrap();
            let criteria = FilterCriteria {
                min_run_duration: min_units * 60,
                ..FilterCriteria::reference_subset()
            };
            let scaled_criteria = FilterCriteria { min_run_duration: min_units, ..criteria.clone() };
            let a = scale_time(&filter_jobs(&records, &criteria), factor);
            let b = filter_jobs(&scale_time(&records, factor), &scaled_criteria);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn marking_partitions_records(records in proptest::collection::vec(arb_record(), 0..40)) {
            let specs = mark_checkpointing(&records, 120 * 60, 420);
            prop_assert_eq!(specs.len(), records.len());
            for (spec, rec) in specs.iter().zip(&records) {
                let expect = rec.final_state == FinalState::Timeout && rec.time_limit == 120 * 60;
                prop_assert_eq!(spec.checkpointing, expect);
                prop_assert_eq!(spec.ckpt_interval.is_some(), expect);
                prop_assert!(spec.validate().is_ok());
            }
        }
    }
}
