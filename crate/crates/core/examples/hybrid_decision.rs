//! One daemon poll over a hand-built queue, under each policy. Job 1 has
//! just written its last checkpoint that fits; job 3 is waiting for nodes.
//!
//! cargo run --example hybrid_decision

use tailguard::ckpt::{CheckpointLedger, LedgerEntry};
use tailguard::daemon::{poll, PendingJob, QueueSnapshot, RunningJob};
use tailguard::sim::NodeSet;
use tailguard::{ClusterConfig, PolicyKind};

fn snapshot(pending_nodes: u32) -> QueueSnapshot {
    QueueSnapshot {
        now: 1265,
        running: vec![
            RunningJob {
                job_id: 1,
                start_time: 0,
                current_limit: 1440,
                allocated_nodes: vec![0],
                extensions_granted: 0,
            },
            RunningJob {
                job_id: 2,
                start_time: 0,
                current_limit: 3000,
                allocated_nodes: vec![1],
                extensions_granted: 0,
            },
        ],
        pending: vec![PendingJob {
            job_id: 3,
            nodes: pending_nodes,
            time_limit: 600,
            planned_start: None,
            planned_nodes: Vec::new(),
        }],
        free_nodes: NodeSet::new(),
    }
}

fn main() {
    let cluster = ClusterConfig {
        node_count: 2,
        ..ClusterConfig::default()
    };
    let mut ledger = CheckpointLedger::new();
    ledger.insert(1, LedgerEntry::with_timestamps(0, vec![420, 840, 1260]));

    for (label, pending_nodes) in [
        ("pending job needs job 1's node", 1),
        ("pending job needs both nodes", 2),
    ] {
        println!("{label}:");
        for policy in PolicyKind::ALL {
            let actions = poll(&snapshot(pending_nodes), &ledger, policy, &cluster);
            let shown: Vec<String> = actions
                .iter()
                .map(|a| match a.new_limit {
                    Some(limit) => format!("job {} -> limit {limit} s", a.job_id),
                    None => format!("cancel job {} ({:?})", a.job_id, a.reason),
                })
                .collect();
            println!(
                "  {:<12} {}",
                policy.to_string(),
                if shown.is_empty() {
                    "no action".into()
                } else {
                    shown.join(", ")
                }
            );
        }
    }
}
