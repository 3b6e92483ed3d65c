//! Parses a small accounting trace, keeps the reference subset, scales time
//! down by 60 and marks long-limit jobs as checkpointing.
//!
//! cargo run --example trace_pipeline

use tailguard::workload::{
    filter_jobs, mark_checkpointing, parse_trace, scale_time, FilterCriteria, Format, ScaleFactor, TRACE_COLUMNS,
};

const ROWS: &[&str] = &[
    "1,0,2,32,86400,3700,COMPLETED,true,1,1,May",
    "2,60,1,32,86400,86400,TIMEOUT,true,1,1,May",
    "3,120,4,32,28800,28800,TIMEOUT,true,1,1,May",
    "4,180,1,32,7200,600,COMPLETED,true,1,1,May",
    "5,240,2,32,7200,4000,COMPLETED,false,1,1,May",
    "6,300,2,32,7200,4000,FAILED,true,1,1,May",
    "7,360,8,32,14400,9000,COMPLETED,true,2,1,May",
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = format!("{}\n{}\n", TRACE_COLUMNS.join(","), ROWS.join("\n"));
    let records = parse_trace(text.as_bytes(), Format::Csv)?;
    let kept = filter_jobs(&records, &FilterCriteria::reference_subset());
    let scaled = scale_time(&kept, ScaleFactor::integer(60)?);
    let jobs = mark_checkpointing(&scaled, 1440, 420);

    println!("{} records, {} kept", records.len(), kept.len());
    for j in &jobs {
        println!(
            "job {:>2}: {} nodes, limit {:>4} s, runs {:>4} s, checkpointing {}",
            j.job_id, j.nodes, j.time_limit, j.true_duration, j.checkpointing
        );
    }
    Ok(())
}
