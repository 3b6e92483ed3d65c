//! Drives the live daemon against canned scheduler output in dry-run mode:
//! the queue comes from a fixture, checkpoint reports from a temporary spool
//! directory, and the decided commands are printed instead of run.
//!
//! cargo run --example live_dry_run

use chrono::NaiveDateTime;
use tailguard::slurm::{squeue_command, CommandOutput, FixtureRunner, LiveDaemon, SQUEUE_HEADER};
use tailguard::{ClusterConfig, PolicyKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spool = std::env::temp_dir().join(format!("tailguard-spool-{}", std::process::id()));
    std::fs::create_dir_all(&spool)?;
    std::fs::write(spool.join("ckpt_7.log"), "420\n840\n1260\n")?;
    std::fs::write(spool.join("ckpt_8.log"), "300\n")?;

    let queue = format!(
        "{SQUEUE_HEADER}\n\
         7|RUNNING|2025-05-01T00:00:00|24:00|cn01|(null)|1\n\
         8|RUNNING|2025-05-01T00:10:00|1:00:00|cn02|(null)|1\n"
    );
    let at = |s| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S");
    let now = at("2025-05-01T00:21:05")?;

    for policy in [PolicyKind::EarlyCancel, PolicyKind::Extend] {
        let mut daemon = LiveDaemon::new(
            policy,
            ClusterConfig::default(),
            spool.clone(),
            vec!["cn01".into(), "cn02".into()],
            at("2025-05-01T00:00:00")?,
        );
        daemon.dry_run = true;
        let mut runner = FixtureRunner::new().respond(&squeue_command(), CommandOutput::ok(queue.clone()));
        let report = daemon.tick(&mut runner, now)?;
        println!(
            "{policy}: {} running, {} warnings",
            report.snapshot.running.len(),
            report.warnings.len()
        );
        for cmd in &report.commands {
            println!("  would run: {cmd}");
        }
    }
    std::fs::remove_dir_all(&spool)?;
    Ok(())
}
