//! Iterated local search: shake the incumbent, descend, keep strict improvements.

use super::Context;
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

    let mut i = 1;
    while ctx.may_run(i) {
        let shaken = ctx.shake(&x, cfg.npert, cfg.shake)?;
        let mut state = AssignmentState::new(inst, &shaken)?;
        ctx.local_search(cfg.localsearch, &mut state)?;
        let candidate = state.solution();
        ctx.observe(&candidate);
        if better(state.fitness(), fx) {
            x = candidate;
            fx = state.fitness();
            ctx.offer(i, &x, fx);
        }
        ctx.finish_iteration(i);
        i += 1;
    }
    Ok(())
}
