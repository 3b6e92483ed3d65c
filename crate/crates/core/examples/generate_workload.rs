//! Generates the default synthetic workload and the calibrated preset, then
//! prints their class counts.
//!
//! cargo run --example generate_workload [seed]

use tailguard::workload::{synthesize_workload, DestinedSummary, GeneratorConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    for (name, shape) in [
        ("default", GeneratorConfig::default()),
        ("small-checkpointers", GeneratorConfig::small_checkpointers()),
    ] {
        let jobs = synthesize_workload(seed, &shape)?;
        let node_seconds: u64 = jobs
            .iter()
            .map(|j| u64::from(j.nodes) * j.true_duration.min(j.time_limit))
            .sum();
        println!("{name}: {}", DestinedSummary::of(&jobs));
        println!("  {} jobs, {node_seconds} node-seconds of work", jobs.len());
    }
    Ok(())
}
