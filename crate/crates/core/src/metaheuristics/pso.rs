//! Particle swarm over site-index vectors: real-valued velocity update, then
//! rounding, clamping and duplicate repair back to a valid site list.

use rand::Rng;

use super::Context;
use crate::error::Result;
use crate::evaluation::{fitness_of, Solution};
use crate::neighborhood::random_closed;
use crate::scalar::{better, Scalar};

struct Particle<T> {
    x: Vec<f64>,
    v: Vec<f64>,
    best: Vec<f64>,
    best_f: T,
}

/// Round, clamp to `[0, n_sites - 1]` and replace repeated sites (after the
/// first occurrence) with uniform unused ones. Fixed coordinates are kept.
pub fn decode<R: Rng + ?Sized>(x: &[f64], fixed: &[usize], n_sites: usize, rng: &mut R) -> Vec<usize> {
    let mut sites: Vec<usize> = fixed.to_vec();
    let mut open = vec![false; n_sites];
    for &s in fixed {
        open[s] = true;
    }
    let mut dup = Vec::new();
    for (k, &c) in x.iter().enumerate().skip(fixed.len()) {
        let s = c.round().clamp(0.0, (n_sites - 1) as f64) as usize;
        if open[s] {
            dup.push(k);
        } else {
            open[s] = true;
        }
        sites.push(s);
    }
    for k in dup {
        let r = random_closed(&open, rng).expect("p <= number of sites");
        open[r] = true;
        sites[k] = r;
    }
    sites
}

pub(crate) fn run<T: Scalar>(ctx: &mut Context<'_, '_, T>) -> Result<()> {
    let cfg = ctx.config;
    let inst = ctx.instance;
    let fixed = inst.fixed_sites().to_vec();
    let nf = fixed.len();
    let range = (inst.n_sites() - 1) as f64;

    let mut swarm: Vec<Particle<T>> = Vec::with_capacity(cfg.population);
    for _ in 0..cfg.population {
        let s = ctx.initial();
        let f = fitness_of(inst, s.sites());
        ctx.observe(&s);
        ctx.offer(0, &s, f);
        let x: Vec<f64> = s.sites().iter().map(|&v| v as f64).collect();
        swarm.push(Particle { best: x.clone(), best_f: f, x, v: Vec::new() });
    }
    for particle in swarm.iter_mut() {
        particle.v = (0..inst.p())
            .map(|k| if k < nf || range == 0.0 { 0.0 } else { ctx.rng.random_range(-range..=range) })
            .collect();
    }
    let (mut g, mut g_f) = {
        let b = swarm
            .iter()
            .enumerate()
            .fold(0, |b, (k, p)| if p.best_f < swarm[b].best_f { k } else { b });
        (swarm[b].best.clone(), swarm[b].best_f)
    };

    let mut i = 1;
    while ctx.may_run(i) {
        for particle in swarm.iter_mut() {
            for f in nf..particle.x.len() {
                let rp: f64 = ctx.rng.random();
                let rg: f64 = ctx.rng.random();
                particle.v[f] = cfg.omega * particle.v[f]
                    + cfg.phi_p * rp * (particle.best[f] - particle.x[f])
                    + cfg.phi_g * rg * (g[f] - particle.x[f]);
            }
            let moved: Vec<f64> = particle.x.iter().zip(&particle.v).map(|(x, v)| x + v).collect();
            let sites = decode(&moved, &fixed, inst.n_sites(), &mut ctx.rng);
            particle.x = sites.iter().map(|&s| s as f64).collect();
            let s = Solution::new(sites, nf);
            let f = fitness_of(inst, s.sites());
            ctx.observe(&s);
            if better(f, particle.best_f) {
                particle.best = particle.x.clone();
                particle.best_f = f;
                if better(f, g_f) {
                    g = particle.x.clone();
                    g_f = f;
                }
            }
            ctx.offer(i, &s, f);
        }
        ctx.finish_iteration(i);
        i += 1;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn decode_rounds_clamps_and_repairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = decode(&[4.0, 1.4, -3.0, 99.0, 1.2], &[4], 10, &mut rng);
        assert_eq!(&s[..4], &[4, 1, 0, 9]);
        assert!(![4, 1, 0, 9].contains(&s[4]));
    }
}
