//! The single-shot subcommands.

use std::collections::HashSet;
use std::path::PathBuf;

use anyhow::{Context, Result};
use pmedian_core::distances::save_matrix;
use pmedian_core::evaluation::fitness_of;
use pmedian_core::instance::{format_site_list, read_site_list, DISTANCE_CACHE_FILE};
use pmedian_core::instance::SyntheticParams;
use pmedian_core::metaheuristics::{run, RunOptions};
use pmedian_core::{DistanceMatrix, RunResult};
use serde::Serialize;

use crate::output::{num, unix_timestamp, write_atomic, write_json, Csv, WALL_CLOCK_NOTE};
use crate::{load_data, mean_walk, report_instance, scenario_instance, EvalArgs, GenInstanceArgs, Invalid, PrecomputeArgs, SolveArgs};

pub fn gen_instance(args: &GenInstanceArgs) -> Result<()> {
    let data = SyntheticParams::new(args.seed, args.customers, args.sites, args.density)
        .with_p(args.p)
        .generate()?;
    data.write(&args.out)?;
    log::info!(
        "wrote {} customers, {} sites to {}",
        data.customers.len(),
        data.sites.len(),
        args.out.display()
    );
    Ok(())
}

pub fn precompute_distances(args: &PrecomputeArgs) -> Result<PathBuf> {
    let data = load_data(&args.instance)?;
    let kind = args.distance.unwrap_or(data.meta.distance);
    let m: DistanceMatrix = data.compute_distances(kind)?;
    let out = args.out.clone().unwrap_or_else(|| args.instance.join(DISTANCE_CACHE_FILE));
    save_matrix(&m, &out)?;
    log::info!("wrote {}x{} {kind} matrix to {}", m.rows(), m.cols(), out.display());
    Ok(out)
}

#[derive(Serialize)]
struct SolveManifest {
    timestamp_unix: u64,
    note: &'static str,
    algorithm: String,
    seed: u64,
    distance: String,
    weight: String,
    fitness: f64,
    iterations: u64,
    stop: String,
    wall_time_s: f64,
    config: String,
}

/// Solve once; writes `solution.txt`, `solution.csv`, `trace.csv` and `manifest.json`.
pub fn solve(args: &SolveArgs) -> Result<RunResult> {
    let mut cfg = args.config.resolve(None)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let data = load_data(&args.instance)?;
    let inst = scenario_instance(&data, &args.scenario)?;
    let result = run(&inst, &cfg, RunOptions::default())?;

    let sites = inst.sites();
    let ids: Vec<i64> = result.solution.sites().iter().map(|&j| sites[j].id).collect();
    write_atomic(&args.out.join("solution.txt"), format_site_list(&ids).as_bytes())?;

    let mut csv = Csv::new(&["id", "lat", "lon"]);
    for &j in result.solution.sites() {
        let s = &sites[j];
        csv.row([s.id.to_string(), num(s.lat), num(s.lon)]);
    }
    csv.write(&args.out.join("solution.csv"))?;

    let mut trace = Csv::new(&["iteration", "best_fitness"]);
    for t in &result.trace {
        trace.row([t.iteration.to_string(), num(t.best_fitness)]);
    }
    trace.write(&args.out.join("trace.csv"))?;

    write_json(
        &args.out.join("manifest.json"),
        &SolveManifest {
            timestamp_unix: unix_timestamp(),
            note: WALL_CLOCK_NOTE,
            algorithm: cfg.algorithm.to_string(),
            seed: cfg.seed,
            distance: inst.distance_kind().to_string(),
            weight: inst.weight_model().kind().to_string(),
            fitness: result.fitness,
            iterations: result.iterations,
            stop: format!("{:?}", result.stop),
            wall_time_s: result.elapsed.as_secs_f64(),
            config: cfg.to_text(),
        },
    )?;
    println!("fitness={}", num(result.fitness));
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub mean_walk_m: f64,
}

/// Fitness under the chosen scenario and mean walk under graph distances
/// with citizen weights. Any number of distinct sites is accepted.
pub fn eval(args: &EvalArgs) -> Result<Evaluation> {
    let ids = read_site_list(&args.solution)?;
    let data = load_data(&args.instance)?;
    let inst = scenario_instance(&data, &args.scenario)?;
    let idx = site_indices(&inst, &ids).with_context(|| format!("reading {}", args.solution.display()))?;
    let report = report_instance(&data, Some(&inst))?;
    Ok(Evaluation {
        fitness: fitness_of(&inst, &idx),
        mean_walk_m: mean_walk(&report, &idx)?,
    })
}

/// Indices of a non-empty list of distinct, known site ids.
pub(crate) fn site_indices(inst: &pmedian_core::Instance, ids: &[i64]) -> Result<Vec<usize>> {
    if ids.is_empty() {
        return Err(Invalid::new("site list is empty").into());
    }
    let mut seen = HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(**id)) {
        return Err(Invalid::new(format!("duplicate site id {dup}")).into());
    }
    Ok(inst.site_indices(ids)?)
}
