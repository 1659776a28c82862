//! Variable neighbourhood search: up to K sweeps of shake sizes 1..k_max,
//! restarting the sweeps whenever a candidate is accepted.

use rand::Rng;

use super::config::Accept;
use super::{Context, StopReason};
use crate::error::Result;
use crate::evaluation::AssignmentState;
use crate::scalar::{better, Scalar};

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

    let mut iteration = 1;
    let mut restart = true;
    'outer: while restart {
        restart = false;
        let mut j = 1;
        while !restart && j <= cfg.big_k {
            let mut i = 1;
            while !restart && i <= cfg.kmax {
                if !ctx.may_run(iteration) {
                    break 'outer;
                }
                let k = ctx.next_k(cfg.next, i as u64, cfg.kmax);
                let shaken = ctx.shake(&x, k, cfg.shake)?;
                let mut state = AssignmentState::new(inst, &shaken)?;
                ctx.local_search(cfg.localsearch2, &mut state)?;
                let candidate = state.solution();
                let fc = state.fitness();
                ctx.observe(&candidate);
                let accepted = match cfg.accept {
                    Accept::Elitist => better(fc, fx),
                    Accept::Walk => true,
                    Accept::Prob => better(fc, fx) || ctx.rng.random::<f64>() < cfg.accept_prob,
                };
                if accepted {
                    x = candidate;
                    fx = fc;
                    ctx.offer(iteration, &x, fx);
                }
                restart = accepted;
                ctx.finish_iteration(iteration);
                iteration += 1;
                i += 1;
            }
            j += 1;
        }
        if !restart {
            ctx.stop = StopReason::Converged;
        }
    }
    Ok(())
}
