//! Builds the scheduler commands the daemon issues and parses a captured
//! `squeue` listing into a queue snapshot.
//!
//! cargo run --example slurm_commands

use chrono::NaiveDateTime;
use tailguard::slurm::{
    build_cancel_command, build_update_command, format_timelimit, parse_squeue_output, parse_timelimit, squeue_command,
    SqueueContext, SQUEUE_HEADER,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{}", squeue_command());
    println!("{}", build_update_command(4242, 1705)?);
    println!("{}", build_cancel_command(4242)?);
    for text in ["30", "1:30:00", "2-12", "UNLIMITED"] {
        println!("time limit {text:>9} -> {:?}", parse_timelimit(text)?);
    }
    println!("1705 s formats as {}", format_timelimit(1705));

    let listing = format!(
        "{SQUEUE_HEADER}\n\
         101|RUNNING|2025-05-01T00:00:00|1-00:00:00|cn[01-02]|(null)|2\n\
         102|PENDING|2025-05-01T01:00:00|2:00:00|(null)|cn[01-03]|3\n"
    );
    let at = |s| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S");
    let ctx = SqueueContext {
        epoch: at("2025-05-01T00:00:00")?,
        now: at("2025-05-01T00:30:00")?,
        nodes: ["cn01", "cn02", "cn03", "cn04"].map(String::from).to_vec(),
    };
    let parsed = parse_squeue_output(&listing, &ctx)?;
    println!("{}", serde_json::to_string_pretty(&parsed.snapshot)?);
    Ok(())
}
