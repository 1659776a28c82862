//! The five solvers (GA, ILS, PSO, SA, VNS), their configuration and the
//! bookkeeping they share: seeded randomness, budgets and the best-so-far trace.

mod config;
mod ga;
mod generation;
mod ils;
mod pso;
mod sa;
mod vns;

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{
    iteration_budget, Accept, Algorithm, AlgorithmConfig, Cooling, Crossover, Generation, IterBudget, NextMode,
    Replacement, Selection,
};
pub use generation::{generate_initial, greedy_fill, random_solution};

use crate::error::{Error, Result};
use crate::evaluation::{AssignmentState, Solution};
use crate::instance::Instance;
use crate::local_search::LocalSearch;
use crate::neighborhood::{shake, DomainCache, DomainModel, ShakeMode};
use crate::scalar::{better, Scalar};

/// Largest shake size produced by the SEQ / DVNS schedules in SA.
pub const SA_K_CAP: usize = 20;

/// One improvement of the best-so-far fitness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint<T: Scalar = f64> {
    pub iteration: u64,
    pub elapsed_ms: f64,
    pub best_fitness: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Iterations,
    Time,
    /// The algorithm ended on its own (VNS after K rounds without improvement).
    Converged,
}

#[derive(Debug, Clone)]
pub struct RunResult<T: Scalar = f64> {
    pub solution: Solution,
    pub fitness: T,
    pub trace: Vec<TracePoint<T>>,
    pub iterations: u64,
    pub elapsed: Duration,
    pub stop: StopReason,
}

/// Optional inputs to [`run`].
#[derive(Default)]
pub struct RunOptions<'a> {
    /// Shared cache of domain models; a private one is used when absent.
    pub domains: Option<&'a DomainCache>,
    /// Replaces the generated initial solution (or the first individual).
    pub warm_start: Option<Solution>,
    /// Called with every solution the algorithm produces.
    pub observer: Option<&'a mut dyn FnMut(&Solution)>,
}

/// Run the configured algorithm on `instance`.
pub fn run<T: Scalar>(instance: &Instance<T>, config: &AlgorithmConfig, options: RunOptions<'_>) -> Result<RunResult<T>> {
    config.validate()?;
    if let Some(w) = &options.warm_start {
        w.validate(instance)?;
    }
    let domain = match config.domain {
        Some((kind, d)) => Some(match options.domains {
            Some(cache) => cache.get(kind, d, instance.site_points())?,
            None => Arc::new(DomainModel::build(kind, instance.site_points(), d)?),
        }),
        None => None,
    };
    let mut ctx = Context {
        instance,
        config,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        start: Instant::now(),
        deadline: Instant::now() + Duration::from_secs_f64(config.time_budget_s),
        max_iter: config.iter.iterations(instance.n_customers(), instance.p()),
        domain,
        trace: Vec::new(),
        best: None,
        iterations: 0,
        stop: StopReason::Iterations,
        warm_start: options.warm_start,
        observer: options.observer,
    };
    match config.algorithm {
        Algorithm::Ga => ga::run(&mut ctx)?,
        Algorithm::Ils => ils::run(&mut ctx)?,
        Algorithm::Pso => pso::run(&mut ctx)?,
        Algorithm::Sa => sa::run(&mut ctx)?,
        Algorithm::Vns => vns::run(&mut ctx)?,
    }
    let (solution, fitness) = ctx.best.take().ok_or(Error::Empty("solver produced no solution"))?;
    Ok(RunResult {
        solution,
        fitness,
        trace: ctx.trace,
        iterations: ctx.iterations,
        elapsed: ctx.start.elapsed(),
        stop: ctx.stop,
    })
}

/// Per-run state shared by the solver loops.
pub(crate) struct Context<'a, 'o, T: Scalar> {
    pub instance: &'a Instance<T>,
    pub config: &'a AlgorithmConfig,
    pub rng: ChaCha8Rng,
    pub start: Instant,
    pub deadline: Instant,
    pub max_iter: u64,
    pub domain: Option<Arc<DomainModel>>,
    pub trace: Vec<TracePoint<T>>,
    pub best: Option<(Solution, T)>,
    pub iterations: u64,
    pub stop: StopReason,
    pub warm_start: Option<Solution>,
    pub observer: Option<&'o mut dyn FnMut(&Solution)>,
}

impl<'a, 'o, T: Scalar> Context<'a, 'o, T> {
    /// `true` when iteration `i` (1-based) may run; records why not otherwise.
    pub fn may_run(&mut self, i: u64) -> bool {
        if i > self.max_iter {
            self.stop = StopReason::Iterations;
            return false;
        }
        if Instant::now() >= self.deadline {
            self.stop = StopReason::Time;
            return false;
        }
        true
    }

    pub fn finish_iteration(&mut self, i: u64) {
        self.iterations = i;
    }

    pub fn domain(&self) -> Option<&DomainModel> {
        self.domain.as_deref()
    }

    pub fn observe(&mut self, s: &Solution) {
        if let Some(obs) = self.observer.as_mut() {
            obs(s);
        }
    }

    /// Offer a candidate for best-so-far; appends a trace point when it wins.
    pub fn offer(&mut self, iteration: u64, s: &Solution, fitness: T) {
        let wins = match &self.best {
            None => true,
            Some((_, b)) => better(fitness, *b),
        };
        if wins {
            self.best = Some((s.clone(), fitness));
            self.trace.push(TracePoint {
                iteration,
                elapsed_ms: self.start.elapsed().as_secs_f64() * 1e3,
                best_fitness: fitness,
            });
        }
    }

    /// The configured generation strategy, or the warm start when given.
    pub fn initial(&mut self) -> Solution {
        match self.warm_start.take() {
            Some(s) => s,
            None => generate_initial(self.instance, self.config.generation, &mut self.rng),
        }
    }

    pub fn local_search(&self, ls: LocalSearch, state: &mut AssignmentState<'a, T>) -> Result<()> {
        ls.run(state, self.domain(), Some(self.deadline))
    }

    pub fn shake(&mut self, s: &Solution, k: usize, mode: ShakeMode) -> Result<Solution> {
        let domain = self.domain.clone();
        shake(s, k, mode, domain.as_deref(), self.instance.n_sites(), &mut self.rng)
    }

    /// Shake size for step `i` under `mode`, capped at `cap`.
    pub fn next_k(&mut self, mode: NextMode, i: u64, cap: usize) -> usize {
        match mode {
            NextMode::Seq => ((i as usize - 1) % cap) + 1,
            NextMode::Dvns => truncated_geometric(&mut self.rng, cap),
        }
    }
}

/// `k` in `[1, cap]` with `P(k)` proportional to `0.5^k`.
pub fn truncated_geometric<R: Rng + ?Sized>(rng: &mut R, cap: usize) -> usize {
    let total: f64 = (1..=cap).map(|k| 0.5f64.powi(k as i32)).sum();
    let mut u = rng.random::<f64>() * total;
    for k in 1..=cap {
        u -= 0.5f64.powi(k as i32);
        if u < 0.0 {
            return k;
        }
    }
    cap
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_stays_in_range_and_favours_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut counts = [0usize; 6];
        for _ in 0..20_000 {
            let k = truncated_geometric(&mut rng, 5);
            assert!((1..=5).contains(&k));
            counts[k] += 1;
        }
        assert!(counts[1] > counts[2] && counts[2] > counts[3]);
        assert_eq!(truncated_geometric(&mut rng, 1), 1);
    }
}
