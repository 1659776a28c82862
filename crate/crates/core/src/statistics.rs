//! Run summaries, improvement over a baseline, ECDFs and the Wilcoxon
//! rank-sum test.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::distances::DistanceKind;
use crate::error::{Error, Result};
use crate::instance::WeightKind;

/// Above this many observations the normal approximation is used.
pub const EXACT_LIMIT: usize = 12;

/// Outcome of one solver run inside an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub distance: DistanceKind,
    pub weight: WeightKind,
    pub algorithm: String,
    pub seed: u64,
    pub final_fitness: f64,
    pub mean_walk_m: f64,
    pub wall_time_s: f64,
    /// `(elapsed_ms, best_fitness)` at each improvement.
    pub trace: Vec<(f64, f64)>,
}

/// `100 · (baseline − run) / baseline`; positive when the run is better.
pub fn percent_improvement(baseline_fitness: f64, run_fitness: f64) -> Result<f64> {
    if !(baseline_fitness > 0.0) {
        return Err(Error::InvalidArgument(format!("baseline fitness {baseline_fitness} is not positive")));
    }
    Ok(100.0 * (baseline_fitness - run_fitness) / baseline_fitness)
}

/// Distinct sorted values with the fraction of observations at or below each.
pub fn ecdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::Empty("ecdf input"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (k, &x) in v.iter().enumerate() {
        let frac = (k + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = frac,
            _ => out.push((x, frac)),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alternative {
    TwoSided,
    /// First sample tends to be smaller.
    Less,
    /// First sample tends to be larger.
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Exact when the total sample size is at most [`EXACT_LIMIT`].
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSumTest {
    /// Mann-Whitney `U` of the first sample: its rank sum minus `n_a(n_a+1)/2`.
    pub statistic: f64,
    pub p_value: f64,
    pub exact: bool,
}

/// Two-sided Wilcoxon rank-sum test with midranks for ties.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<RankSumTest> {
    wilcoxon_rank_sum_with(a, b, Alternative::TwoSided, Method::Auto)
}

/// Rank sum test with a chosen alternative and method.
pub fn wilcoxon_rank_sum_with(a: &[f64], b: &[f64], alternative: Alternative, method: Method) -> Result<RankSumTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("rank-sum sample"));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("rank-sum sample contains NaN".into()));
    }
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    // Doubled midranks are integers.
    let ranks2 = doubled_midranks(a.iter().chain(b).copied().collect());
    let w2: u64 = ranks2[..na].iter().sum();
    let statistic = w2 as f64 / 2.0 - (na * (na + 1)) as f64 / 2.0;
    let exact = match method {
        Method::Exact => true,
        Method::Normal => false,
        Method::Auto => n <= EXACT_LIMIT,
    };
    let p = if exact {
        exact_p(&ranks2, na, w2, alternative)
    } else {
        normal_p(&ranks2, na, nb, w2, alternative)
    };
    Ok(RankSumTest { statistic, p_value: p.clamp(0.0, 1.0), exact })
}

/// `2 × midrank` of every value, in input order.
fn doubled_midranks(values: Vec<f64>) -> Vec<u64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&x, &y| values[x].total_cmp(&values[y]));
    let mut ranks = vec![0u64; values.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut e = k;
        while e + 1 < idx.len() && values[idx[e + 1]] == values[idx[k]] {
            e += 1;
        }
        // Positions k..=e share ranks k+1..=e+1; doubled mean is k + e + 2.
        for &j in &idx[k..=e] {
            ranks[j] = (k + e + 2) as u64;
        }
        k = e + 1;
    }
    ranks
}

/// Null distribution of the doubled rank sum of `na` of the observations,
/// as counts per sum value.
fn rank_sum_counts(ranks2: &[u64], na: usize) -> Vec<f64> {
    let max: u64 = ranks2.iter().sum();
    // counts[j][s]: subsets of size j with doubled sum s.
    let mut counts = vec![vec![0f64; max as usize + 1]; na + 1];
    counts[0][0] = 1.0;
    for &r in ranks2 {
        for j in (1..=na).rev() {
            let (lo, hi) = counts.split_at_mut(j);
            let (prev, cur) = (&lo[j - 1], &mut hi[0]);
            for s in (r as usize..=max as usize).rev() {
                if prev[s - r as usize] != 0.0 {
                    cur[s] += prev[s - r as usize];
                }
            }
        }
    }
    counts.swap_remove(na)
}

fn exact_p(ranks2: &[u64], na: usize, w2: u64, alternative: Alternative) -> f64 {
    let counts = rank_sum_counts(ranks2, na);
    let total: f64 = counts.iter().sum();
    let n = ranks2.len() as i64;
    let centre2 = na as i64 * (n + 1);
    let obs = w2 as i64;
    let hits: f64 = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0.0)
        .filter(|(s, _)| {
            let s = *s as i64;
            match alternative {
                Alternative::TwoSided => (s - centre2).abs() >= (obs - centre2).abs(),
                Alternative::Less => s <= obs,
                Alternative::Greater => s >= obs,
            }
        })
        .map(|(_, &c)| c)
        .sum();
    hits / total
}

fn normal_p(ranks2: &[u64], na: usize, nb: usize, w2: u64, alternative: Alternative) -> f64 {
    let n = (na + nb) as f64;
    let (na_f, nb_f) = (na as f64, nb as f64);
    let w = w2 as f64 / 2.0;
    let mean = na_f * (n + 1.0) / 2.0;
    let mut ties: BTreeMap<u64, f64> = BTreeMap::new();
    for &r in ranks2 {
        *ties.entry(r).or_default() += 1.0;
    }
    let tie_sum: f64 = ties.values().map(|t| t * t * t - t).sum();
    let var = na_f * nb_f / 12.0 * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
    if !(var > 0.0) {
        return 1.0;
    }
    let sd = var.sqrt();
    let z = Normal::new(0.0, 1.0).expect("standard normal");
    match alternative {
        Alternative::TwoSided => {
            let dev = ((w - mean).abs() - 0.5).max(0.0);
            2.0 * (1.0 - z.cdf(dev / sd))
        }
        Alternative::Less => z.cdf((w - mean + 0.5) / sd),
        Alternative::Greater => 1.0 - z.cdf((w - mean - 0.5) / sd),
    }
}

/// Bonferroni-adjusted p-value, capped at 1.
pub fn bonferroni(p: f64, comparisons: usize) -> f64 {
    (p * comparisons.max(1) as f64).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Describe {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

pub fn describe(values: &[f64]) -> Result<Describe> {
    if values.is_empty() {
        return Err(Error::Empty("values to describe"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
    Ok(Describe {
        min: v[0],
        max: v[n - 1],
        mean: v.iter().sum::<f64>() / n as f64,
        median,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub distance: DistanceKind,
    pub weight: WeightKind,
    pub algorithm: String,
    pub runs: usize,
    pub fitness: Describe,
    pub mean_walk_m: Describe,
}

/// Min / max / mean / median of fitness and walking distance per
/// (distance, weight, algorithm), in that sort order.
pub fn summarize(records: &[RunRecord]) -> Result<Vec<SummaryRow>> {
    let mut groups: BTreeMap<(&str, &str, &str), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.distance.as_str(), r.weight.as_str(), r.algorithm.as_str()))
            .or_default()
            .push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let fit: Vec<f64> = g.iter().map(|r| r.final_fitness).collect();
            let walk: Vec<f64> = g.iter().map(|r| r.mean_walk_m).collect();
            Ok(SummaryRow {
                distance: g[0].distance,
                weight: g[0].weight,
                algorithm: g[0].algorithm.clone(),
                runs: g.len(),
                fitness: describe(&fit)?,
                mean_walk_m: describe(&walk)?,
            })
        })
        .collect()
}
