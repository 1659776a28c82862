//! Incremental expansion of an existing deployment.

use std::collections::HashSet;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use pmedian_core::evaluation::fitness_of;
use pmedian_core::instance::{format_site_list, read_site_list};
use pmedian_core::metaheuristics::{self as mh, Algorithm, RunOptions};
use pmedian_core::neighborhood::DomainCache;
use pmedian_core::statistics::percent_improvement;
use pmedian_core::{Instance, Solution};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::site_indices;
use crate::output::{num, unix_timestamp, write_atomic, write_json, Csv, WALL_CLOCK_NOTE};
use crate::{load_data, mean_walk, report_instance, scenario_instance, ConfigArgs, Invalid, ScenarioArgs};

pub const DEFAULT_SEEDS: u64 = 10;

#[derive(Debug, Clone, Args)]
pub struct ExpandArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Site ids of the deployment to keep; defaults to the instance's baseline.txt.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Station counts to reach, each larger than the baseline.
    #[arg(long, value_delimiter = ',', default_values_t = [30, 35, 40, 45, 50])]
    pub targets: Vec<usize>,
    /// Defaults to the GA preset.
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Runs per target; the best one is kept.
    #[arg(long, default_value_t = DEFAULT_SEEDS)]
    pub seeds: u64,
    /// Seed of run 0; run r uses seed + r.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

impl ExpandArgs {
    pub fn new(instance: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            instance: instance.into(),
            baseline: None,
            targets: vec![30, 35, 40, 45, 50],
            config: ConfigArgs::default(),
            scenario: ScenarioArgs::default(),
            seeds: DEFAULT_SEEDS,
            seed: 1,
            workers: None,
            out: out.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionRow {
    /// Number of open stations.
    pub stations: usize,
    pub fitness: f64,
    pub mean_walk_m: f64,
    /// Reduction of the mean walk relative to the baseline, in percent.
    pub reduction_pct: f64,
    /// Seed of the kept run; none for the baseline row.
    pub seed: Option<u64>,
    pub solution: Vec<i64>,
}

/// Baseline row first, then one row per target.
pub fn run(args: &ExpandArgs) -> Result<Vec<ExpansionRow>> {
    let cfg = args.config.resolve(Some(Algorithm::Ga))?;
    if args.seeds < 1 {
        return Err(Invalid::new("--seeds must be at least 1").into());
    }
    if args.targets.is_empty() {
        return Err(Invalid::new("no targets given").into());
    }
    let data = load_data(&args.instance)?;
    let base_ids = match &args.baseline {
        Some(p) => read_site_list(p)?,
        None => data
            .baseline
            .clone()
            .ok_or_else(|| Invalid::new("no --baseline given and the instance has no baseline.txt"))?,
    };
    let inst = scenario_instance(&data, &args.scenario)?;
    let report = report_instance(&data, Some(&inst))?;
    let base = site_indices(&inst, &base_ids)?;
    for &t in &args.targets {
        if t <= base.len() {
            return Err(Invalid::new(format!("target {t} is not larger than the baseline ({} sites)", base.len())).into());
        }
        if t > inst.n_sites() {
            return Err(Invalid::new(format!("target {t} exceeds the {} candidate sites", inst.n_sites())).into());
        }
    }
    let mut targets = args.targets.clone();
    targets.sort_unstable();
    targets.dedup();

    let base_walk = mean_walk(&report, &base)?;
    let mut rows = vec![ExpansionRow {
        stations: base.len(),
        fitness: fitness_of(&inst, &base),
        mean_walk_m: base_walk,
        reduction_pct: 0.0,
        seed: None,
        solution: base_ids.clone(),
    }];

    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.workers.unwrap_or(0)).build()?;
    let domains = DomainCache::new();
    let mut timings = Vec::new();
    let mut prev = base.clone();
    for &t in &targets {
        let target_inst = inst.with_p(t, base.clone())?;
        let seeds: Vec<u64> = (0..args.seeds).map(|r| args.seed + r).collect();
        let results = pool.install(|| {
            seeds
                .par_iter()
                .map(|&seed| {
                    let warm = warm_start(&target_inst, &prev, base.len(), seed);
                    let mut c = cfg.clone();
                    c.seed = seed;
                    mh::run(&target_inst, &c, RunOptions { domains: Some(&domains), warm_start: Some(warm), observer: None })
                        .map(|r| (seed, r))
                })
                .collect::<pmedian_core::Result<Vec<_>>>()
        })?;
        // Best fitness, ties to the lowest seed (results are in seed order).
        let (seed, best) = results
            .iter()
            .fold(None::<&(u64, pmedian_core::RunResult)>, |acc, r| match acc {
                Some(a) if a.1.fitness <= r.1.fitness => Some(a),
                _ => Some(r),
            })
            .expect("at least one seed");
        timings.push(serde_json::json!({
            "stations": t,
            "wall_time_s": results.iter().map(|(_, r)| r.elapsed.as_secs_f64()).collect::<Vec<_>>(),
        }));
        let sites = best.solution.sites().to_vec();
        let walk = mean_walk(&report, &sites)?;
        let ids: Vec<i64> = sites.iter().map(|&j| inst.sites()[j].id).collect();
        log::info!("{t} stations: mean walk {walk:.1} m (seed {seed})");
        rows.push(ExpansionRow {
            stations: t,
            fitness: best.fitness,
            mean_walk_m: walk,
            reduction_pct: percent_improvement(base_walk, walk)?,
            seed: Some(*seed),
            solution: ids,
        });
        prev = sites;
    }

    let mut csv = Csv::new(&["stations", "fitness", "mean_walk_m", "reduction_pct", "seed"]);
    for r in &rows {
        csv.row([
            r.stations.to_string(),
            num(r.fitness),
            num(r.mean_walk_m),
            num(r.reduction_pct),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
        ]);
        write_atomic(
            &args.out.join("solutions").join(format!("stations_{}.txt", r.stations)),
            format_site_list(&r.solution).as_bytes(),
        )?;
    }
    csv.write(&args.out.join("expansion.csv"))?;
    write_json(
        &args.out.join("manifest.json"),
        &serde_json::json!({
            "timestamp_unix": unix_timestamp(),
            "note": WALL_CLOCK_NOTE,
            "instance": args.instance,
            "baseline": base_ids,
            "targets": targets,
            "seeds_per_target": args.seeds,
            "base_seed": args.seed,
            "config": cfg.to_text(),
            "timing": timings,
        }),
    )?;
    Ok(rows)
}

/// The previous best solution plus uniformly drawn new sites up to `p`.
fn warm_start(inst: &Instance, prev: &[usize], fixed: usize, seed: u64) -> Solution {
    let open: HashSet<usize> = prev.iter().copied().collect();
    let closed: Vec<usize> = (0..inst.n_sites()).filter(|j| !open.contains(j)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((inst.p() as u64) << 40));
    let mut sites = prev.to_vec();
    sites.extend(sample(&mut rng, closed.len(), inst.p() - prev.len()).into_iter().map(|k| closed[k]));
    Solution::new(sites, fixed)
}
