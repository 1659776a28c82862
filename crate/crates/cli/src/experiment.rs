//! The scenario × algorithm × seed experiment and its report tables.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, Result};
use clap::Args;
use pmedian_core::evaluation::fitness_of;
use pmedian_core::instance::{read_site_list, InstanceData};
use pmedian_core::metaheuristics::{self as mh, Algorithm, RunOptions};
use pmedian_core::neighborhood::DomainCache;
use pmedian_core::statistics::{bonferroni, ecdf, percent_improvement, summarize, wilcoxon_rank_sum, RunRecord, SummaryRow};
use pmedian_core::{AlgorithmConfig, DistanceKind, Instance, WeightKind};
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::site_indices;
use crate::output::{num, quote, unix_timestamp, write_json, Csv, WALL_CLOCK_NOTE};
use crate::{load_data, mean_walk, report_instance, ConfigArgs, Invalid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Scenario {
    pub distance: DistanceKind,
    pub weight: WeightKind,
}

impl Scenario {
    pub fn all() -> Vec<Scenario> {
        let mut v = Vec::new();
        for distance in [DistanceKind::Euclidean, DistanceKind::Graph] {
            for weight in [WeightKind::Uniform, WeightKind::Citizens, WeightKind::Demand] {
                v.push(Scenario { distance, weight });
            }
        }
        v
    }

    pub fn label(&self) -> String {
        format!("{}_{}", self.distance, self.weight)
    }
}

impl FromStr for Scenario {
    type Err = Invalid;

    fn from_str(s: &str) -> std::result::Result<Self, Invalid> {
        let (d, w) = s
            .split_once(':')
            .ok_or_else(|| Invalid::new(format!("scenario `{s}` is not DISTANCE:WEIGHT")))?;
        Ok(Scenario {
            distance: d.parse().map_err(|e| Invalid::new(format!("{e}")))?,
            weight: w.parse().map_err(|e| Invalid::new(format!("{e}")))?,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Configuration files, one per algorithm. Repeatable.
    #[arg(long = "config")]
    pub configs: Vec<PathBuf>,
    /// Preset algorithms to run when no --config is given.
    #[arg(long, value_delimiter = ',')]
    pub algorithms: Vec<Algorithm>,
    /// DISTANCE:WEIGHT pairs; all six combinations by default.
    #[arg(long, value_delimiter = ',')]
    pub scenarios: Vec<Scenario>,
    #[arg(long, default_value_t = 30)]
    pub runs: u64,
    /// Seed of run 0; run r uses seed + r.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 60.0)]
    pub time_budget: f64,
    #[arg(long)]
    pub iter: Option<pmedian_core::metaheuristics::IterBudget>,
    /// Site ids of the current deployment; defaults to the instance's baseline.txt.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Concurrent cells; defaults to the number of CPUs.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

impl ExperimentArgs {
    pub fn new(instance: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            instance: instance.into(),
            configs: Vec::new(),
            algorithms: Vec::new(),
            scenarios: Vec::new(),
            runs: 30,
            seed: 1,
            time_budget: 60.0,
            iter: None,
            baseline: None,
            workers: None,
            out: out.into(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(Invalid::new("--runs must be at least 1").into());
        }
        if !(self.time_budget > 0.0) {
            return Err(Invalid::new("--time-budget must be positive").into());
        }
        if self.workers == Some(0) {
            return Err(Invalid::new("--workers must be at least 1").into());
        }
        Ok(())
    }

    fn algorithm_configs(&self) -> Result<Vec<AlgorithmConfig>> {
        let overrides = ConfigArgs { time_budget: Some(self.time_budget), iter: self.iter, ..Default::default() };
        let mut configs: Vec<AlgorithmConfig> = if self.configs.is_empty() {
            let algs = if self.algorithms.is_empty() { Algorithm::ALL.to_vec() } else { self.algorithms.clone() };
            algs.into_iter().map(AlgorithmConfig::preset).collect()
        } else {
            self.configs.iter().map(AlgorithmConfig::load).collect::<pmedian_core::Result<_>>()?
        };
        for c in &mut configs {
            overrides.apply(c);
            c.validate()?;
        }
        let mut seen = Vec::new();
        for c in &configs {
            if seen.contains(&c.algorithm) {
                return Err(Invalid::new(format!("algorithm {} listed twice", c.algorithm)).into());
            }
            seen.push(c.algorithm);
        }
        Ok(configs)
    }
}

/// Per-run result file. Holds only quantities that are a function of the
/// inputs; wall-clock measurements go to the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunFile {
    pub distance: DistanceKind,
    pub weight: WeightKind,
    pub algorithm: String,
    pub seed: u64,
    pub final_fitness: f64,
    pub mean_walk_m: f64,
    pub iterations: u64,
    pub stop: String,
    pub solution: Vec<i64>,
    /// `(iteration, best_fitness)` at each improvement.
    pub trace: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellFailure {
    pub distance: DistanceKind,
    pub weight: WeightKind,
    pub algorithm: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
struct CellTiming {
    distance: DistanceKind,
    weight: WeightKind,
    algorithm: String,
    seed: u64,
    wall_time_s: f64,
    /// `(elapsed_ms, best_fitness)` at each improvement.
    trace: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairTest {
    pub distance: DistanceKind,
    pub weight: WeightKind,
    pub a: String,
    pub b: String,
    pub statistic: f64,
    pub raw_p: f64,
    pub corrected_p: f64,
    pub exact: bool,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub records: Vec<RunRecord>,
    pub runs: Vec<RunFile>,
    pub failures: Vec<CellFailure>,
    pub summary: Vec<SummaryRow>,
    pub tests: Vec<PairTest>,
    /// Baseline fitness per scenario, when a baseline is known.
    pub baseline_fitness: BTreeMap<Scenario, f64>,
}

impl ExperimentOutcome {
    /// Error when any cell failed, so the exit code reflects it.
    pub fn into_result(self) -> Result<()> {
        if self.failures.is_empty() {
            Ok(())
        } else {
            Err(anyhow!("{} of {} cells failed", self.failures.len(), self.failures.len() + self.records.len()))
        }
    }

    pub fn fitnesses(&self, scenario: Scenario, algorithm: &str) -> Vec<f64> {
        self.runs
            .iter()
            .filter(|r| r.distance == scenario.distance && r.weight == scenario.weight && r.algorithm == algorithm)
            .map(|r| r.final_fitness)
            .collect()
    }
}

struct ScenarioData {
    scenario: Scenario,
    instance: Instance,
    report: Arc<Instance>,
}

struct Cell<'a> {
    scenario: &'a ScenarioData,
    config: &'a AlgorithmConfig,
    seed: u64,
}

enum CellResult {
    Done(RunFile, RunRecord),
    Failed(CellFailure),
}

pub fn run(args: &ExperimentArgs) -> Result<ExperimentOutcome> {
    args.validate()?;
    let configs = args.algorithm_configs()?;
    let scenarios = if args.scenarios.is_empty() { Scenario::all() } else { args.scenarios.clone() };
    let data = load_data(&args.instance)?;
    let baseline_ids = match &args.baseline {
        Some(p) => Some(read_site_list(p)?),
        None => data.baseline.clone(),
    };

    let mut failures = Vec::new();
    let built = build_scenarios(&data, &scenarios);
    let mut ready = Vec::new();
    for (scenario, res) in built {
        match res {
            Ok(s) => ready.push(s),
            Err(e) => {
                log::error!("scenario {} unavailable: {e:#}", scenario.label());
                for c in &configs {
                    for r in 0..args.runs {
                        failures.push(CellFailure {
                            distance: scenario.distance,
                            weight: scenario.weight,
                            algorithm: c.algorithm.to_string(),
                            seed: args.seed + r,
                            error: format!("{e:#}"),
                        });
                    }
                }
            }
        }
    }

    let mut cells = Vec::new();
    for s in &ready {
        for c in &configs {
            for r in 0..args.runs {
                cells.push(Cell { scenario: s, config: c, seed: args.seed + r });
            }
        }
    }

    let domains = DomainCache::new();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers.unwrap_or(0))
        .build()?;
    let results: Vec<(CellResult, Option<CellTiming>)> =
        pool.install(|| cells.par_iter().map(|cell| run_cell(cell, &domains, &args.out)).collect());

    let mut runs = Vec::new();
    let mut records = Vec::new();
    let mut timings = Vec::new();
    for (res, timing) in results {
        match res {
            CellResult::Done(f, r) => {
                runs.push(f);
                records.push(r);
            }
            CellResult::Failed(f) => failures.push(f),
        }
        timings.extend(timing);
    }

    let summary = if records.is_empty() { Vec::new() } else { summarize(&records)? };
    write_summary(&args.out.join("summary.csv"), &summary)?;
    write_ranking(&args.out.join("ranking.csv"), &summary)?;

    let tests = pairwise_tests(&runs, &ready, &configs)?;
    write_tests(&args.out.join("tests.csv"), &tests)?;

    let mut baseline_fitness = BTreeMap::new();
    if let Some(ids) = &baseline_ids {
        for s in &ready {
            let idx = site_indices(&s.instance, ids)?;
            baseline_fitness.insert(s.scenario, fitness_of(&s.instance, &idx));
        }
        write_ecdf(&args.out.join("ecdf.csv"), &runs, &baseline_fitness, &configs)?;
    }

    let mut fail_csv = Csv::new(&["distance", "weight", "algorithm", "seed", "error"]);
    failures.sort_by(|a, b| (a.distance, a.weight, &a.algorithm, a.seed).cmp(&(b.distance, b.weight, &b.algorithm, b.seed)));
    for f in &failures {
        fail_csv.row([
            f.distance.to_string(),
            f.weight.to_string(),
            f.algorithm.clone(),
            f.seed.to_string(),
            quote(&f.error),
        ]);
    }
    fail_csv.write(&args.out.join("failures.csv"))?;

    write_json(
        &args.out.join("manifest.json"),
        &serde_json::json!({
            "timestamp_unix": unix_timestamp(),
            "note": WALL_CLOCK_NOTE,
            "instance": args.instance,
            "scenarios": scenarios.iter().map(Scenario::label).collect::<Vec<_>>(),
            "algorithms": configs.iter().map(|c| c.algorithm.to_string()).collect::<Vec<_>>(),
            "configs": configs.iter().map(|c| c.to_text()).collect::<Vec<_>>(),
            "runs": args.runs,
            "base_seed": args.seed,
            "time_budget_s": args.time_budget,
            "workers": pool.current_num_threads(),
            "baseline": baseline_ids,
            "cells": cells.len() + failures.len(),
            "failed_cells": failures.len(),
            "timing": timings,
        }),
    )?;

    Ok(ExperimentOutcome { records, runs, failures, summary, tests, baseline_fitness })
}

fn build_scenarios(data: &InstanceData, scenarios: &[Scenario]) -> Vec<(Scenario, Result<ScenarioData>)> {
    let mut matrices: HashMap<DistanceKind, Result<Arc<pmedian_core::DistanceMatrix>, String>> = HashMap::new();
    let mut report: Option<Result<Arc<Instance>, String>> = None;
    scenarios
        .iter()
        .map(|&scenario| {
            let m = matrices
                .entry(scenario.distance)
                .or_insert_with(|| data.distances(scenario.distance).map(Arc::new).map_err(|e| e.to_string()))
                .clone();
            let res = (|| -> Result<ScenarioData> {
                let m = m.map_err(|e| anyhow!(e))?;
                let instance = data.instance_with(m, scenario.weight)?;
                let rep = report
                    .get_or_insert_with(|| report_instance(data, Some(&instance)).map(Arc::new).map_err(|e| format!("{e:#}")))
                    .clone()
                    .map_err(|e| anyhow!(e))?;
                Ok(ScenarioData { scenario, instance, report: rep })
            })();
            (scenario, res)
        })
        .collect()
}

fn run_cell(cell: &Cell<'_>, domains: &DomainCache, out: &Path) -> (CellResult, Option<CellTiming>) {
    let s = cell.scenario;
    let alg = cell.config.algorithm.to_string();
    let mut cfg = cell.config.clone();
    cfg.seed = cell.seed;
    let started = Instant::now();
    let outcome = (|| -> Result<(RunFile, RunRecord, CellTiming)> {
        let res = mh::run(&s.instance, &cfg, RunOptions { domains: Some(domains), ..Default::default() })?;
        let walk = mean_walk(&s.report, res.solution.sites())?;
        let sites = s.instance.sites();
        let file = RunFile {
            distance: s.scenario.distance,
            weight: s.scenario.weight,
            algorithm: alg.clone(),
            seed: cell.seed,
            final_fitness: res.fitness,
            mean_walk_m: walk,
            iterations: res.iterations,
            stop: format!("{:?}", res.stop),
            solution: res.solution.sites().iter().map(|&j| sites[j].id).collect(),
            trace: res.trace.iter().map(|t| (t.iteration, t.best_fitness)).collect(),
        };
        let path = out
            .join("runs")
            .join(s.scenario.label())
            .join(&alg)
            .join(format!("seed_{}.json", cell.seed));
        write_json(&path, &file)?;
        let time_trace: Vec<(f64, f64)> = res.trace.iter().map(|t| (t.elapsed_ms, t.best_fitness)).collect();
        let wall = started.elapsed().as_secs_f64();
        let record = RunRecord {
            distance: s.scenario.distance,
            weight: s.scenario.weight,
            algorithm: alg.clone(),
            seed: cell.seed,
            final_fitness: res.fitness,
            mean_walk_m: walk,
            wall_time_s: wall,
            trace: time_trace.clone(),
        };
        let timing = CellTiming {
            distance: s.scenario.distance,
            weight: s.scenario.weight,
            algorithm: alg.clone(),
            seed: cell.seed,
            wall_time_s: wall,
            trace: time_trace,
        };
        Ok((file, record, timing))
    })();
    match outcome {
        Ok((f, r, t)) => {
            log::info!("{} {} seed {}: {}", s.scenario.label(), alg, cell.seed, f.final_fitness);
            (CellResult::Done(f, r), Some(t))
        }
        Err(e) => {
            log::error!("{} {} seed {} failed: {e:#}", s.scenario.label(), alg, cell.seed);
            let failure = CellFailure {
                distance: s.scenario.distance,
                weight: s.scenario.weight,
                algorithm: alg,
                seed: cell.seed,
                error: format!("{e:#}"),
            };
            (CellResult::Failed(failure), None)
        }
    }
}

fn write_summary(path: &Path, summary: &[SummaryRow]) -> Result<()> {
    let mut csv = Csv::new(&[
        "distance",
        "weight",
        "algorithm",
        "runs",
        "fitness_min",
        "fitness_median",
        "fitness_mean",
        "fitness_max",
        "walk_min_m",
        "walk_median_m",
        "walk_mean_m",
        "walk_max_m",
    ]);
    for r in summary {
        csv.row([
            r.distance.to_string(),
            r.weight.to_string(),
            r.algorithm.clone(),
            r.runs.to_string(),
            num(r.fitness.min),
            num(r.fitness.median),
            num(r.fitness.mean),
            num(r.fitness.max),
            num(r.mean_walk_m.min),
            num(r.mean_walk_m.median),
            num(r.mean_walk_m.mean),
            num(r.mean_walk_m.max),
        ]);
    }
    csv.write(path)
}

/// Algorithms per scenario ordered by median fitness, with the gap to the
/// next one in percent.
fn write_ranking(path: &Path, summary: &[SummaryRow]) -> Result<()> {
    let mut groups: BTreeMap<(DistanceKind, WeightKind), Vec<&SummaryRow>> = BTreeMap::new();
    for r in summary {
        groups.entry((r.distance, r.weight)).or_default().push(r);
    }
    let mut csv = Csv::new(&["distance", "weight", "rank", "algorithm", "median_fitness", "gain_over_next_pct"]);
    for ((d, w), mut rows) in groups {
        rows.sort_by(|a, b| a.fitness.median.total_cmp(&b.fitness.median).then(a.algorithm.cmp(&b.algorithm)));
        for (i, r) in rows.iter().enumerate() {
            let gain = rows
                .get(i + 1)
                .and_then(|next| percent_improvement(next.fitness.median, r.fitness.median).ok())
                .map(num)
                .unwrap_or_default();
            csv.row([d.to_string(), w.to_string(), (i + 1).to_string(), r.algorithm.clone(), num(r.fitness.median), gain]);
        }
    }
    csv.write(path)
}

fn pairwise_tests(runs: &[RunFile], scenarios: &[ScenarioData], configs: &[AlgorithmConfig]) -> Result<Vec<PairTest>> {
    let mut tests = Vec::new();
    for s in scenarios {
        let fits = |alg: &str| -> Vec<f64> {
            runs.iter()
                .filter(|r| r.distance == s.scenario.distance && r.weight == s.scenario.weight && r.algorithm == alg)
                .map(|r| r.final_fitness)
                .collect()
        };
        let mut local = Vec::new();
        for (i, a) in configs.iter().enumerate() {
            for b in &configs[i + 1..] {
                let (fa, fb) = (fits(a.algorithm.as_str()), fits(b.algorithm.as_str()));
                if fa.is_empty() || fb.is_empty() {
                    continue;
                }
                let t = wilcoxon_rank_sum(&fa, &fb)?;
                local.push(PairTest {
                    distance: s.scenario.distance,
                    weight: s.scenario.weight,
                    a: a.algorithm.to_string(),
                    b: b.algorithm.to_string(),
                    statistic: t.statistic,
                    raw_p: t.p_value,
                    corrected_p: 0.0,
                    exact: t.exact,
                });
            }
        }
        let m = local.len();
        for t in &mut local {
            t.corrected_p = bonferroni(t.raw_p, m);
        }
        tests.extend(local);
    }
    Ok(tests)
}

fn write_tests(path: &Path, tests: &[PairTest]) -> Result<()> {
    let mut csv = Csv::new(&["distance", "weight", "pair", "statistic", "raw_p", "corrected_p", "exact"]);
    for t in tests {
        csv.row([
            t.distance.to_string(),
            t.weight.to_string(),
            format!("{}-{}", t.a, t.b),
            num(t.statistic),
            num(t.raw_p),
            num(t.corrected_p),
            t.exact.to_string(),
        ]);
    }
    csv.write(path)
}

/// Improvement-over-baseline ECDF per scenario and algorithm, plus the
/// baseline's own 0% row.
fn write_ecdf(
    path: &Path,
    runs: &[RunFile],
    baseline: &BTreeMap<Scenario, f64>,
    configs: &[AlgorithmConfig],
) -> Result<()> {
    let mut csv = Csv::new(&["distance", "weight", "algorithm", "improvement_pct", "fraction"]);
    for (s, &base) in baseline {
        let self_gain = percent_improvement(base, base)?;
        csv.row([s.distance.to_string(), s.weight.to_string(), "BASELINE".into(), num(self_gain), num(1.0)]);
        for c in configs {
            let gains: Vec<f64> = runs
                .iter()
                .filter(|r| r.distance == s.distance && r.weight == s.weight && r.algorithm == c.algorithm.as_str())
                .map(|r| percent_improvement(base, r.final_fitness))
                .collect::<pmedian_core::Result<_>>()?;
            if gains.is_empty() {
                continue;
            }
            for (x, f) in ecdf(&gains)? {
                csv.row([s.distance.to_string(), s.weight.to_string(), c.algorithm.to_string(), num(x), num(f)]);
            }
        }
    }
    csv.write(path)
}
