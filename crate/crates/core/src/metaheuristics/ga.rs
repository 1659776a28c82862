//! Generational GA: λ offspring per iteration from two selected parents,
//! crossover, optional mutation, then (μ,λ) or (μ+λ) replacement.

use rand::Rng;

use super::config::{Crossover, Replacement, Selection};
use super::generation::greedy_fill;
use super::Context;
use crate::error::Result;
use crate::evaluation::{fitness_of, AssignmentState, Solution};
use crate::instance::Instance;
use crate::neighborhood::random_closed;
use crate::scalar::Scalar;

pub(crate) fn run<T: Scalar>(ctx: &mut Context<'_, '_, T>) -> Result<()> {
    let cfg = ctx.config;
    let inst = ctx.instance;
    let mu = cfg.population;

    let mut pop: Vec<(Solution, T)> = Vec::with_capacity(mu);
    for _ in 0..mu {
        let s = ctx.initial();
        let f = fitness_of(inst, s.sites());
        ctx.observe(&s);
        ctx.offer(0, &s, f);
        pop.push((s, f));
    }

    let mut i = 1;
    while ctx.may_run(i) {
        let mut offspring: Vec<(Solution, T)> = Vec::with_capacity(cfg.lambda);
        for _ in 0..cfg.lambda {
            let (a, b) = select(&pop, cfg.selection, &mut ctx.rng);
            let child = crossover(inst, &pop[a].0, &pop[b].0, cfg.crossover, &mut ctx.rng)?;
            let child = if ctx.rng.random::<f64>() < cfg.mutation_prob {
                ctx.shake(&child, 1, cfg.mutation)?
            } else {
                child
            };
            let f = fitness_of(inst, child.sites());
            ctx.observe(&child);
            ctx.offer(i, &child, f);
            offspring.push((child, f));
        }
        pop = replace(pop, offspring, cfg.replacement);
        ctx.finish_iteration(i);
        i += 1;
    }
    Ok(())
}

/// Indices sorted by fitness, ties by population order.
fn ranked<T: Scalar>(pop: &[(Solution, T)]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pop.len()).collect();
    idx.sort_by(|&a, &b| pop[a].1.partial_cmp(&pop[b].1).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx
}

fn select<T: Scalar, R: Rng + ?Sized>(pop: &[(Solution, T)], mode: Selection, rng: &mut R) -> (usize, usize) {
    let n = pop.len();
    if n == 1 {
        return (0, 0);
    }
    match mode {
        Selection::Rand => {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            (a, b)
        }
        Selection::Better => {
            let r = ranked(pop);
            (r[0], r[1])
        }
        Selection::Worse => {
            let r = ranked(pop);
            (r[n - 1], r[n - 2])
        }
    }
}

/// Combine two parents into one child with `p` sites and the same fixed prefix.
pub fn crossover<T: Scalar, R: Rng + ?Sized>(
    inst: &Instance<T>,
    a: &Solution,
    b: &Solution,
    mode: Crossover,
    rng: &mut R,
) -> Result<Solution> {
    let p = a.len();
    let fixed = a.fixed_prefix();
    let sites = match mode {
        Crossover::RandParent => {
            return Ok(if rng.random_bool(0.5) { a.clone() } else { b.clone() });
        }
        Crossover::OnePoint => {
            let cut = rng.random_range(fixed..=p);
            let mut child: Vec<usize> = a.sites()[..cut].iter().chain(&b.sites()[cut..]).copied().collect();
            repair_duplicates(&mut child, fixed, inst.n_sites(), rng);
            child
        }
        Crossover::Merging => {
            let mut union = a.sites().to_vec();
            union.extend(b.sites().iter().filter(|s| !a.contains(**s)));
            let mut state = AssignmentState::with_sites(inst, union, fixed)?;
            while state.open_sites().len() > p {
                let mut best: Option<(T, usize)> = None;
                for &s in &state.open_sites()[fixed..] {
                    let d = state.remove_delta(s);
                    if best.is_none_or(|(bd, bs)| d < bd || (d == bd && s < bs)) {
                        best = Some((d, s));
                    }
                }
                let (_, s) = best.expect("more than p sites implies a movable one");
                state.remove(s)?;
            }
            state.open_sites().to_vec()
        }
        Crossover::CupCap => {
            let common: Vec<usize> = a.sites().iter().copied().filter(|&s| b.contains(s)).collect();
            let mut diff: Vec<usize> = a
                .sites()
                .iter()
                .chain(b.sites())
                .copied()
                .filter(|&s| !common.contains(&s))
                .collect();
            diff.sort_unstable();
            greedy_fill(inst, common, &diff, p)
        }
    };
    Ok(Solution::new(sites, fixed))
}

/// Replace repeated sites (after the first occurrence) with uniform unused ones.
fn repair_duplicates<R: Rng + ?Sized>(sites: &mut [usize], fixed: usize, n_sites: usize, rng: &mut R) {
    let mut open = vec![false; n_sites];
    let mut dup = Vec::new();
    for (k, &s) in sites.iter().enumerate() {
        if open[s] {
            dup.push(k);
        } else {
            open[s] = true;
        }
    }
    for k in dup {
        debug_assert!(k >= fixed);
        let r = random_closed(&open, rng).expect("fewer than p distinct sites leaves room");
        open[r] = true;
        sites[k] = r;
    }
}

fn replace<T: Scalar>(pop: Vec<(Solution, T)>, offspring: Vec<(Solution, T)>, mode: Replacement) -> Vec<(Solution, T)> {
    let mu = pop.len();
    match mode {
        Replacement::Plus => {
            let all: Vec<(Solution, T)> = pop.into_iter().chain(offspring).collect();
            let order = ranked(&all);
            let mut slots: Vec<Option<(Solution, T)>> = all.into_iter().map(Some).collect();
            order.into_iter().take(mu).map(|k| slots[k].take().expect("index used once")).collect()
        }
        Replacement::Comma => {
            let lambda = offspring.len();
            if lambda >= mu {
                let order = ranked(&offspring);
                let mut slots: Vec<Option<(Solution, T)>> = offspring.into_iter().map(Some).collect();
                order.into_iter().take(mu).map(|k| slots[k].take().expect("index used once")).collect()
            } else {
                // Keep the best μ − λ incumbents, the λ offspring take the rest.
                let order = ranked(&pop);
                let mut slots: Vec<Option<(Solution, T)>> = pop.into_iter().map(Some).collect();
                let mut next: Vec<(Solution, T)> = order
                    .into_iter()
                    .take(mu - lambda)
                    .map(|k| slots[k].take().expect("index used once"))
                    .collect();
                next.extend(offspring);
                next
            }
        }
    }
}
