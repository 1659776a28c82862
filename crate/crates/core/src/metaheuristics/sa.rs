//! Simulated annealing over shake moves with a best-ever record.

use rand::Rng;

use super::config::Cooling;
use super::{Context, SA_K_CAP};
use crate::error::Result;
use crate::evaluation::{fitness_of, AssignmentState};
use crate::scalar::{better, Scalar};

/// Temperature at iteration `i` of `iter`.
pub fn temperature(cooling: Cooling, t0: f64, cooling_opt: f64, i: u64, iter: u64) -> f64 {
    match cooling {
        Cooling::Lin => t0 * (1.0 - i as f64 / iter.max(1) as f64),
        Cooling::Exp => t0 * cooling_opt.powf(i as f64),
        Cooling::None => i as f64,
    }
}

/// Probability of accepting a non-improving move of size `de`.
pub fn acceptance_probability(de: f64, k: usize, t: f64) -> f64 {
    (-de / (k as f64 * t)).exp()
}

pub(crate) fn run<T: Scalar>(ctx: &mut Context<'_, '_, T>) -> Result<()> {
    let cfg = ctx.config;
    let inst = ctx.instance;
    let start = ctx.initial();
    let mut state = AssignmentState::new(inst, &start)?;
    ctx.local_search(cfg.localsearch, &mut state)?;
    let mut x = state.solution();
    let mut fx = state.fitness();
    ctx.observe(&x);
    ctx.offer(0, &x, fx);

    let mut i = 1;
    while ctx.may_run(i) {
        let t = temperature(cfg.cooling, cfg.t0, cfg.cooling_opt, i, ctx.max_iter);
        let k = ctx.next_k(cfg.next, i, SA_K_CAP);
        let candidate = ctx.shake(&x, k, cfg.shake)?;
        let fc = fitness_of(inst, candidate.sites());
        ctx.observe(&candidate);
        let accept = if better(fc, fx) {
            true
        } else {
            let de = (fc - fx).to_f64_lossy();
            let u: f64 = ctx.rng.random();
            u < acceptance_probability(de, k, t)
        };
        if accept {
            x = candidate;
            fx = fc;
            ctx.offer(i, &x, fx);
        }
        ctx.finish_iteration(i);
        i += 1;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cooling_schedules() {
        assert_eq!(temperature(Cooling::Lin, 10.0, 0.0, 5, 10), 5.0);
        assert!((temperature(Cooling::Exp, 4.45, 0.39, 2, 100) - 4.45 * 0.39 * 0.39).abs() < 1e-12);
        assert_eq!(temperature(Cooling::None, 4.45, 0.39, 7, 100), 7.0);
    }

    #[test]
    fn frozen_limit() {
        assert!(acceptance_probability(1.0, 1, 1e-9) < 1e-300);
        assert_eq!(acceptance_probability(1.0, 1, 0.0), 0.0);
        assert!((acceptance_probability(2.0, 2, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
    }
}
