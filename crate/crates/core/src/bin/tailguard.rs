//! Command-line front end. Exit codes: 0 success, 1 usage, 2 input error,
//! 3 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tailguard::experiment::{self, ExperimentConfig, ExperimentError, InputDigest, Manifest};
use tailguard::sim::SimError;
use tailguard::workload::{self, DestinedSummary, GeneratorConfig};
use tailguard::{ClusterConfig, PolicyKind};

#[derive(Parser)]
#[command(name = "tailguard", version, about = "Checkpoint-aware job time limit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic workload file (.csv or .jsonl).
    GenWorkload(GenArgs),
    /// Simulate one policy and write a run directory.
    Run(RunArgs),
    /// Simulate all four policies and write a comparison.
    Compare(CompareArgs),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); overrides built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cluster config (JSON); overrides the config file's cluster section.
    #[arg(long)]
    cluster: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    poll_interval: Option<u64>,
    #[arg(long)]
    grace: Option<u64>,
    #[arg(long)]
    max_extensions: Option<u32>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Default,
    SmallCheckpointers,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: Common,
    /// Replaces the generator's node choices with powers of two up to N.
    #[arg(long)]
    nodes_max: Option<u32>,
    /// Starting shape when the config file has no generator section.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    workload: PathBuf,
    #[arg(long)]
    policy: PolicyKind,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    workload: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Defaults, then the config file, then the cluster file, then flags.
fn resolve(common: &Common) -> Result<(ExperimentConfig, Vec<InputDigest>), ExperimentError> {
    let mut inputs = Vec::new();
    let mut cfg = match &common.config {
        Some(path) => {
            inputs.push(InputDigest::of_file(path)?);
            ExperimentConfig::load(path)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(path) = &common.cluster {
        inputs.push(InputDigest::of_file(path)?);
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Io {
            path: path.clone(),
            message: e.to_string(),
        })?;
        cfg.cluster =
            serde_json::from_str::<ClusterConfig>(&text).map_err(|e| ExperimentError::Config(e.to_string()))?;
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.poll_interval {
        cfg.cluster.poll_interval = v;
    }
    if let Some(v) = common.grace {
        cfg.cluster.extension_grace = v;
    }
    if let Some(v) = common.max_extensions {
        cfg.cluster.max_extensions_per_job = v;
    }
    cfg.cluster
        .validate()
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    Ok((cfg, inputs))
}

fn gen_workload(args: &GenArgs) -> Result<(), ExperimentError> {
    let (mut cfg, _) = resolve(&args.common)?;
    let config_has_generator = match &args.common.config {
        Some(p) => std::fs::read_to_string(p)
            .ok()
            .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
            .is_some_and(|v| v.get("generator").is_some()),
        None => false,
    };
    if !config_has_generator {
        cfg.generator = match args.preset.unwrap_or(Preset::Default) {
            Preset::Default => GeneratorConfig::default(),
            Preset::SmallCheckpointers => GeneratorConfig::small_checkpointers(),
        };
        cfg.generator.cores_per_node = cfg.cluster.cores_per_node;
    }
    cfg.generator.cluster_nodes = cfg.cluster.node_count;
    if let Some(max) = args.nodes_max {
        cfg.generator = cfg.generator.with_nodes_max(max);
    }
    let jobs = workload::synthesize_workload(cfg.seed, &cfg.generator)?;
    workload::write_jobs_file(&jobs, &args.out)?;
    println!("wrote {} jobs to {}", jobs.len(), args.out.display());
    println!("{}", DestinedSummary::of(&jobs));
    Ok(())
}

fn load_workload(path: &Path) -> Result<(Vec<tailguard::JobSpec>, InputDigest), ExperimentError> {
    let digest = InputDigest::of_file(path)?;
    Ok((workload::read_jobs_file(path)?, digest))
}

fn run(args: &RunArgs) -> Result<(), ExperimentError> {
    let (cfg, mut inputs) = resolve(&args.common)?;
    let (jobs, digest) = load_workload(&args.workload)?;
    inputs.insert(0, digest);
    let result = experiment::run_policy(&jobs, &cfg.cluster, args.policy, cfg.sim_options())?;
    experiment::write_run_dir(&args.out, &result, Manifest::new("run", &cfg, inputs))?;
    let c = &result.report.counts;
    println!(
        "{}: {} jobs, {} completed, {} timeout, {} early-cancelled, {} extended, {} checkpoints, makespan {} s",
        args.policy,
        c.total,
        c.completed,
        c.timeout,
        c.early_cancelled,
        c.extended,
        result.report.total_checkpoints,
        result.report.makespan
    );
    println!("outputs in {}", args.out.display());
    Ok(())
}

fn compare(args: &CompareArgs) -> Result<(), ExperimentError> {
    let (cfg, mut inputs) = resolve(&args.common)?;
    let (jobs, digest) = load_workload(&args.workload)?;
    inputs.insert(0, digest);
    let (runs, comparison) = experiment::compare_all(&jobs, &cfg.cluster, cfg.sim_options())?;
    experiment::write_compare_dir(&args.out, &runs, &comparison, Manifest::new("compare", &cfg, inputs))?;
    print!("{}", experiment::summary_text(&runs, &comparison));
    println!("outputs in {}", args.out.display());
    Ok(())
}

fn exit_code(err: &ExperimentError) -> u8 {
    match err {
        ExperimentError::Sim(SimError::InfeasibleJob { .. } | SimError::DuplicateJob(_) | SimError::Model(_)) => 2,
        ExperimentError::Sim(_) | ExperimentError::Metrics(_) => 3,
        ExperimentError::Workload(_) | ExperimentError::Io { .. } | ExperimentError::Config(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::GenWorkload(a) => gen_workload(a),
        Command::Run(a) => run(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
