//! Seeded generator for a workload with the reference experiment's shape.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{JobSpec, Seconds};
use crate::workload::WorkloadError;

/// Generator shape. Node and limit histograms are approximations; every
/// field is a knob.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub completed: usize,
    pub timeout: usize,
    pub checkpointing: usize,
    /// Node counts drawn uniformly for non-checkpointing jobs.
    pub node_choices: Vec<u32>,
    /// Node counts for checkpointing jobs; `None` reuses `node_choices`.
    pub checkpointing_node_choices: Option<Vec<u32>>,
    pub cores_per_node: u32,
    pub cluster_nodes: u32,
    pub ckpt_limit: Seconds,
    pub ckpt_interval: Seconds,
    pub completed_limits: Vec<Seconds>,
    pub timeout_limits: Vec<Seconds>,
    /// Shortest completed run; the source trace kept only jobs that ran an hour.
    pub min_duration: Seconds,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            completed: 556,
            timeout: 108,
            checkpointing: 109,
            node_choices: vec![1, 2, 4],
            checkpointing_node_choices: None,
            cores_per_node: 32,
            cluster_nodes: 20,
            ckpt_limit: 1440,
            ckpt_interval: 420,
            completed_limits: vec![120, 240, 480, 720, 960, 1440],
            timeout_limits: vec![120, 240, 480, 720, 960],
            min_duration: 60,
        }
    }
}

impl GeneratorConfig {
    /// Default shape with node choices above `cluster_nodes` dropped.
    pub fn for_cluster(cluster_nodes: u32) -> Self {
        let mut cfg = GeneratorConfig {
            cluster_nodes,
            ..Self::default()
        };
        cfg.node_choices.retain(|&n| n <= cluster_nodes);
        cfg
    }

    /// Single-node checkpointing jobs and a wider mix elsewhere, which puts
    /// the baseline tail waste near 1.3% of total CPU time.
    pub fn small_checkpointers() -> Self {
        GeneratorConfig {
            node_choices: vec![1, 2, 4, 8, 12],
            checkpointing_node_choices: Some(vec![1]),
            ..Self::default()
        }
    }

    /// Powers of two up to and including `max`, plus `max` itself.
    pub fn with_nodes_max(mut self, max: u32) -> Self {
        let mut choices: Vec<u32> = std::iter::successors(Some(1u32), |n| n.checked_mul(2))
            .take_while(|&n| n <= max)
            .collect();
        if max > 0 && choices.last() != Some(&max) {
            choices.push(max);
        }
        self.node_choices = choices;
        self
    }

    pub fn total(&self) -> usize {
        self.completed + self.timeout + self.checkpointing
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        let fail = |msg: String| Err(WorkloadError::InfeasibleShape(msg));
        if self.cluster_nodes == 0 {
            return fail("cluster has no nodes".into());
        }
        if self.cores_per_node == 0 {
            return fail("cores_per_node must be positive".into());
        }
        let ckpt_nodes = self.checkpointing_node_choices.as_ref().unwrap_or(&self.node_choices);
        for (name, choices, needed) in [
            ("node_choices", &self.node_choices, self.completed + self.timeout > 0),
            ("checkpointing_node_choices", ckpt_nodes, self.checkpointing > 0),
        ] {
            if needed && choices.is_empty() {
                return fail(format!("{name} is empty"));
            }
            if let Some(&n) = choices.iter().find(|&&n| n == 0 || n > self.cluster_nodes) {
                return fail(format!("{name} contains {n}, cluster has {} nodes", self.cluster_nodes));
            }
        }
        if self.checkpointing > 0 && (self.ckpt_interval == 0 || self.ckpt_limit < self.ckpt_interval) {
            return fail("checkpointing jobs need 0 < ckpt_interval <= ckpt_limit".into());
        }
        if self.completed > 0 {
            if self.completed_limits.is_empty() {
                return fail("completed_limits is empty".into());
            }
            if let Some(l) = self.completed_limits.iter().find(|&&l| l <= self.min_duration.max(1)) {
                return fail(format!("completed limit {l} leaves no room above min_duration"));
            }
        }
        if self.timeout > 0 {
            if self.timeout_limits.is_empty() {
                return fail("timeout_limits is empty".into());
            }
            if self.timeout_limits.iter().any(|&l| l == 0 || l == self.ckpt_limit) {
                return fail("timeout limits must be positive and differ from ckpt_limit".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DestinedSummary {
    pub completed: usize,
    pub timeout: usize,
    pub checkpointing: usize,
}

impl DestinedSummary {
    pub fn of(jobs: &[JobSpec]) -> Self {
        let mut s = DestinedSummary::default();
        for j in jobs {
            if j.checkpointing {
                s.checkpointing += 1;
            } else if j.true_duration > j.time_limit {
                s.timeout += 1;
            } else {
                s.completed += 1;
            }
        }
        s
    }
}

impl std::fmt::Display for DestinedSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} complete-destined / {} timeout / {} checkpointing",
            self.completed, self.timeout, self.checkpointing
        )
    }
}

#[derive(Clone, Copy)]
enum Destiny {
    Completed,
    Timeout,
    Checkpointing,
}

/// All jobs are released at t=0; ids 1..=N follow a seeded shuffle of the
/// three classes. Overrunning jobs get `limit + ckpt_interval + 1`.
pub fn synthesize_workload(seed: u64, shape: &GeneratorConfig) -> Result<Vec<JobSpec>, WorkloadError> {
    shape.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut destinies: Vec<Destiny> = std::iter::repeat_n(Destiny::Completed, shape.completed)
        .chain(std::iter::repeat_n(Destiny::Timeout, shape.timeout))
        .chain(std::iter::repeat_n(Destiny::Checkpointing, shape.checkpointing))
        .collect();
    destinies.shuffle(&mut rng);

    let ckpt_nodes = shape.checkpointing_node_choices.as_ref().unwrap_or(&shape.node_choices);
    let overrun = shape.ckpt_interval + 1;
    let jobs = destinies
        .into_iter()
        .zip(1u64..)
        .map(|(destiny, job_id)| {
            let base = JobSpec {
                job_id,
                submit_time: 0,
                nodes: 1,
                cores_per_node: shape.cores_per_node,
                time_limit: 1,
                true_duration: 1,
                checkpointing: false,
                ckpt_interval: None,
            };
            match destiny {
                Destiny::Completed => {
                    let limit = *shape.completed_limits.choose(&mut rng).expect("validated");
                    JobSpec {
                        nodes: *shape.node_choices.choose(&mut rng).expect("validated"),
                        time_limit: limit,
                        true_duration: rng.gen_range(shape.min_duration.max(1)..limit),
                        ..base
                    }
                }
                Destiny::Timeout => {
                    let limit = *shape.timeout_limits.choose(&mut rng).expect("validated");
                    JobSpec {
                        nodes: *shape.node_choices.choose(&mut rng).expect("validated"),
                        time_limit: limit,
                        true_duration: limit + overrun,
                        ..base
                    }
                }
                Destiny::Checkpointing => JobSpec {
                    nodes: *ckpt_nodes.choose(&mut rng).expect("validated"),
                    time_limit: shape.ckpt_limit,
                    true_duration: shape.ckpt_limit + overrun,
                    checkpointing: true,
                    ckpt_interval: Some(shape.ckpt_interval),
                    ..base
                },
            }
        })
        .collect();
    Ok(jobs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_shape_counts() {
        let jobs = synthesize_workload(1, &GeneratorConfig::default()).unwrap();
        assert_eq!(jobs.len(), 773);
        assert_eq!(jobs.iter().filter(|j| j.checkpointing).count(), 109);
        assert_eq!(
            DestinedSummary::of(&jobs).to_string(),
            "556 complete-destined / 108 timeout / 109 checkpointing"
        );
        assert!(jobs.iter().all(|j| j.submit_time == 0 && j.validate().is_ok()));
        for j in jobs.iter().filter(|j| j.checkpointing) {
            assert_eq!(
                (j.time_limit, j.ckpt_interval, j.true_duration),
                (1440, Some(420), 1861)
            );
            assert_eq!(j.time_limit / 420, 3);
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let cfg = GeneratorConfig::default();
        assert_eq!(
            synthesize_workload(7, &cfg).unwrap(),
            synthesize_workload(7, &cfg).unwrap()
        );
        assert_ne!(
            synthesize_workload(7, &cfg).unwrap(),
            synthesize_workload(8, &cfg).unwrap()
        );
    }

    #[test]
    fn infeasible_shapes_rejected() {
        let too_wide = GeneratorConfig::default().with_nodes_max(100);
        assert!(matches!(
            synthesize_workload(1, &too_wide),
            Err(WorkloadError::InfeasibleShape(_))
        ));
        let ckpt_at_timeout_limit = GeneratorConfig {
            timeout_limits: vec![1440],
            ..GeneratorConfig::default()
        };
        assert!(ckpt_at_timeout_limit.validate().is_err());
        let no_room = GeneratorConfig {
            completed_limits: vec![60],
            ..GeneratorConfig::default()
        };
        assert!(no_room.validate().is_err());
    }

    #[test]
    fn nodes_max_and_cluster_caps() {
        assert_eq!(
            GeneratorConfig::default().with_nodes_max(8).node_choices,
            vec![1, 2, 4, 8]
        );
        assert_eq!(
            GeneratorConfig::default().with_nodes_max(6).node_choices,
            vec![1, 2, 4, 6]
        );
        assert_eq!(GeneratorConfig::for_cluster(2).node_choices, vec![1, 2]);
    }

    #[test]
    fn config_json_fills_defaults() {
        let cfg: GeneratorConfig = serde_json::from_str(r#"{"completed": 3, "node_choices": [1]}"#).unwrap();
        assert_eq!(cfg.completed, 3);
        assert_eq!(cfg.checkpointing, 109);
        assert_eq!(cfg.node_choices, vec![1]);
    }

    proptest! {
        #[test]
        fn generator_totals(seed in any::<u64>(), c in 0usize..30, t in 0usize..30, k in 0usize..30) {
            let cfg = GeneratorConfig { completed: c, timeout: t, checkpointing: k, ..GeneratorConfig::default() };
            let jobs = synthesize_workload(seed, &cfg).unwrap();
            let s = DestinedSummary::of(&jobs);
            prop_assert_eq!(jobs.len(), c + t + k);
            prop_assert_eq!((s.completed, s.timeout, s.checkpointing), (c, t, k));
            for j in &jobs {
                if j.checkpointing {
                    let interval = j.ckpt_interval.unwrap();
                    prop_assert_eq!(j.time_limit / interval, 3);
                    prop_assert!(j.true_duration > j.time_limit + interval);
                } else if j.true_duration > j.time_limit {
                    prop_assert!(cfg.timeout_limits.contains(&j.time_limit));
                } else {
                    prop_assert!(j.true_duration < j.time_limit);
                }
            }
        }
    }
}
