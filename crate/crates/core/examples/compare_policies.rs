//! Runs all four policies on the same workload and prints the comparison.
//!
//! cargo run --release --example compare_policies

use tailguard::experiment::{compare_all, summary_text};
use tailguard::sim::SimOptions;
use tailguard::workload::{synthesize_workload, GeneratorConfig};
use tailguard::ClusterConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let jobs = synthesize_workload(1, &GeneratorConfig::default())?;
    let (runs, comparison) = compare_all(&jobs, &ClusterConfig::default(), SimOptions::default())?;
    print!("{}", summary_text(&runs, &comparison));

    let baseline_cpu = runs[0].report.total_cpu as f64;
    for run in &runs[1..] {
        let saved = baseline_cpu - run.report.total_cpu as f64;
        println!(
            "{}: {:+.2}% CPU time vs baseline",
            run.report.policy,
            -100.0 * saved / baseline_cpu
        );
    }
    Ok(())
}
