//! Simulates one policy on the default workload and prints its report.
//!
//! cargo run --release --example run_policy [baseline|early-cancel|extend|hybrid]

use tailguard::metrics::aggregate;
use tailguard::sim::{run_simulation, EventKind};
use tailguard::workload::{synthesize_workload, GeneratorConfig};
use tailguard::{ClusterConfig, PolicyKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let policy: PolicyKind = std::env::args().nth(1).as_deref().unwrap_or("early-cancel").parse()?;
    let jobs = synthesize_workload(1, &GeneratorConfig::default())?;
    let outcome = run_simulation(&jobs, &ClusterConfig::default(), policy)?;
    let report = aggregate(&outcome.runtimes, policy)?;

    println!("{}", report.to_json_pretty());
    println!(
        "{} events, {} daemon actions, {} checkpoints, log sha256 {}",
        outcome.log.len(),
        outcome.actions.len(),
        outcome.log.count(EventKind::CheckpointDone),
        outcome.log.digest()
    );
    Ok(())
}
