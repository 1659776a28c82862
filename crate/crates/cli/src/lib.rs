//! Command-line front end: instance generation, distance caching, single
//! solves, the multi-scenario experiment, the station-expansion study and
//! solution evaluation.

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use pmedian_core::instance::InstanceData;
use pmedian_core::metaheuristics::{Algorithm, IterBudget};
use pmedian_core::{AlgorithmConfig, DistanceKind, Instance, WeightKind};

pub mod commands;
pub mod experiment;
pub mod expand;
pub mod output;

#[derive(Debug, Parser)]
#[command(name = "pmedian", version, about = "Weighted p-median solvers for bike-station placement")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic city instance directory.
    GenInstance(GenInstanceArgs),
    /// Compute a distance matrix and store it in the binary cache format.
    PrecomputeDistances(PrecomputeArgs),
    /// Run one algorithm once and write solution and trace files.
    Solve(SolveArgs),
    /// Run every (scenario, algorithm, seed) cell and write the report tables.
    Experiment(experiment::ExperimentArgs),
    /// Grow a fixed baseline deployment to larger station counts.
    Expand(expand::ExpandArgs),
    /// Print the fitness and mean walking distance of a site list.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenInstanceArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 363)]
    pub customers: usize,
    #[arg(long, default_value_t = 2000)]
    pub sites: usize,
    /// Fraction of non-tree grid streets kept, in (0, 1].
    #[arg(long, default_value_t = 0.35)]
    pub density: f64,
    #[arg(long, default_value_t = 23)]
    pub p: usize,
}

#[derive(Debug, Clone, Args)]
pub struct PrecomputeArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Defaults to `distances.bin` inside the instance directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Defaults to the kind named in meta.json.
    #[arg(long)]
    pub distance: Option<DistanceKind>,
}

/// Where the algorithm configuration comes from, plus per-run overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Flat key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Use the shipped preset for this algorithm (GA, ILS, PSO, SA, VNS).
    #[arg(long, conflicts_with = "config")]
    pub algorithm: Option<Algorithm>,
    #[arg(long)]
    pub time_budget: Option<f64>,
    /// Override the iteration budget (Np/5, 100p, 2N100, 1M or a count).
    #[arg(long)]
    pub iter: Option<IterBudget>,
}

impl ConfigArgs {
    pub fn resolve(&self, default: Option<Algorithm>) -> Result<AlgorithmConfig> {
        let mut cfg = match (&self.config, self.algorithm.or(default)) {
            (Some(path), _) => AlgorithmConfig::load(path)?,
            (None, Some(alg)) => AlgorithmConfig::preset(alg),
            (None, None) => return Err(Invalid::new("either --config or --algorithm is required").into()),
        };
        self.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&self, cfg: &mut AlgorithmConfig) {
        if let Some(t) = self.time_budget {
            cfg.time_budget_s = t;
        }
        if let Some(it) = self.iter {
            cfg.iter = it;
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Defaults to the kind named in meta.json.
    #[arg(long)]
    pub distance: Option<DistanceKind>,
    /// Defaults to the weight model named in meta.json.
    #[arg(long)]
    pub weight: Option<WeightKind>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Site ids, one per line.
    #[arg(long)]
    pub solution: PathBuf,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
}

/// A usage or input problem detected by the front end (exit code 2).
#[derive(Debug)]
pub struct Invalid(pub String);

impl Invalid {
    pub fn new(msg: impl Into<String>) -> Self {
        Invalid(msg.into())
    }
}

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

/// Process exit code for an error: 2 for bad input or configuration, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use pmedian_core::Error as E;
    for cause in err.chain() {
        if cause.is::<Invalid>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Io { .. } | E::Unreachable { .. } | E::Checksum { .. } | E::Empty(_) => 1,
                _ => 2,
            };
        }
    }
    1
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenInstance(a) => commands::gen_instance(&a),
        Command::PrecomputeDistances(a) => commands::precompute_distances(&a).map(|_| ()),
        Command::Solve(a) => commands::solve(&a).map(|_| ()),
        Command::Experiment(a) => experiment::run(&a).and_then(|o| o.into_result()),
        Command::Expand(a) => expand::run(&a).map(|_| ()),
        Command::Eval(a) => {
            let e = commands::eval(&a)?;
            println!("fitness={}", output::num(e.fitness));
            println!("mean_walk_m={}", output::num(e.mean_walk_m));
            Ok(())
        }
    }
}

pub(crate) fn load_data(dir: &std::path::Path) -> Result<InstanceData> {
    InstanceData::load(dir).with_context(|| format!("loading instance {}", dir.display()))
}

/// Instance for the scenario, sharing a freshly loaded distance matrix.
pub(crate) fn scenario_instance(data: &InstanceData, scenario: &ScenarioArgs) -> Result<Instance> {
    let dk = scenario.distance.unwrap_or(data.meta.distance);
    let wk = scenario.weight.unwrap_or(data.meta.weight);
    Ok(data.instance_with(Arc::new(data.distances(dk)?), wk)?)
}

/// Distances and weights used for reported walking distances: street-graph
/// distances when the instance has a graph, citizen weights.
pub(crate) fn report_instance(data: &InstanceData, reuse: Option<&Instance>) -> Result<Instance> {
    let kind = if data.edges.is_some() { DistanceKind::Graph } else { DistanceKind::Euclidean };
    if let Some(inst) = reuse.filter(|i| i.distance_kind() == kind) {
        return Ok(data.instance_with(Arc::clone(inst.distances_arc()), WeightKind::Citizens)?);
    }
    Ok(data.instance_with(Arc::new(data.distances(kind)?), WeightKind::Citizens)?)
}

/// Mean walking distance per inhabitant of an arbitrary site set.
pub(crate) fn mean_walk(report: &Instance, sites: &[usize]) -> Result<f64> {
    Ok(pmedian_core::evaluation::mean_walk_distance(report, sites, report.weights())?)
}
