//! Feeds checkpoint report lines into a ledger and shows the interval
//! estimate and next prediction after each one.
//!
//! cargo run --example predict_checkpoints

use tailguard::ckpt::{estimate_interval, predict_next, CheckpointLedger};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut ledger = CheckpointLedger::new();
    let job_start = 100;
    let limit_end = job_start + 1440;
    ledger.register(7, job_start);

    for line in ["520", "  ", "940.0", "1345", "1780"] {
        ledger.append_report(7, line)?;
        let entry = ledger.get(7).expect("registered");
        let (Some(interval), Some(next)) = (estimate_interval(entry), predict_next(entry)) else {
            println!("{line:>6?}: no checkpoint yet");
            continue;
        };
        let verdict = if next > limit_end { "beyond the limit" } else { "fits" };
        println!("{line:>6?}: interval {interval} s, next at {next} ({verdict}, limit ends {limit_end})");
    }
    Ok(())
}
