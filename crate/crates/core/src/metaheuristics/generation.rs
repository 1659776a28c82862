//! Initial solutions: uniform random, best of 100 random, greedy construction.

use rand::seq::index::sample;
use rand::Rng;

use super::config::Generation;
use crate::evaluation::{fitness_of, Solution};
use crate::instance::Instance;
use crate::scalar::Scalar;

/// Sites that are not fixed, ascending.
pub(crate) fn movable_sites<T: Scalar>(instance: &Instance<T>) -> Vec<usize> {
    let mut fixed = vec![false; instance.n_sites()];
    for &s in instance.fixed_sites() {
        fixed[s] = true;
    }
    (0..instance.n_sites()).filter(|&s| !fixed[s]).collect()
}

/// Fixed prefix followed by a uniform subset of the movable sites.
pub fn random_solution<T: Scalar, R: Rng + ?Sized>(instance: &Instance<T>, rng: &mut R) -> Solution {
    random_with(instance, &movable_sites(instance), rng)
}

fn random_with<T: Scalar, R: Rng + ?Sized>(instance: &Instance<T>, movable: &[usize], rng: &mut R) -> Solution {
    let fixed = instance.fixed_sites();
    let need = instance.p() - fixed.len();
    let mut sites = fixed.to_vec();
    sites.extend(sample(rng, movable.len(), need).into_iter().map(|k| movable[k]));
    Solution::new(sites, fixed.len())
}

/// Greedily extend `base` from `candidates` until it holds `p` sites, each
/// time adding the candidate giving the lowest objective (ties to the
/// earliest candidate).
pub fn greedy_fill<T: Scalar>(instance: &Instance<T>, mut base: Vec<usize>, candidates: &[usize], p: usize) -> Vec<usize> {
    let n = instance.n_customers();
    let w = instance.weights();
    let mut cur = vec![T::infinity(); n];
    for (i, c) in cur.iter_mut().enumerate() {
        let row = instance.distances().row(i);
        *c = base.iter().map(|&s| row[s]).fold(T::infinity(), T::min);
    }
    let mut used: Vec<bool> = candidates.iter().map(|c| base.contains(c)).collect();
    while base.len() < p {
        let mut best: Option<(T, usize)> = None;
        for (k, &c) in candidates.iter().enumerate() {
            if used[k] {
                continue;
            }
            let mut total = T::zero();
            for i in 0..n {
                total = total + w[i] * cur[i].min(instance.distance(i, c));
            }
            if best.is_none_or(|(b, _)| total < b) {
                best = Some((total, k));
            }
        }
        let Some((_, k)) = best else { break };
        used[k] = true;
        let c = candidates[k];
        for (i, v) in cur.iter_mut().enumerate() {
            *v = v.min(instance.distance(i, c));
        }
        base.push(c);
    }
    base
}

/// Build an initial solution with the given strategy.
pub fn generate_initial<T: Scalar, R: Rng + ?Sized>(instance: &Instance<T>, strategy: Generation, rng: &mut R) -> Solution {
    let movable = movable_sites(instance);
    match strategy {
        Generation::Rand => random_with(instance, &movable, rng),
        Generation::Rand100 => {
            let mut best = random_with(instance, &movable, rng);
            let mut best_f = fitness_of(instance, best.sites());
            for _ in 1..100 {
                let s = random_with(instance, &movable, rng);
                let f = fitness_of(instance, s.sites());
                if f < best_f {
                    best = s;
                    best_f = f;
                }
            }
            best
        }
        Generation::Start => {
            let fixed = instance.fixed_sites();
            let sites = greedy_fill(instance, fixed.to_vec(), &movable, instance.p());
            Solution::new(sites, fixed.len())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distances::{DistanceKind, DistanceMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn inst(seed: u64, n: usize, f: usize, p: usize) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..f).map(|_| rng.random_range(0.0..100.0)).collect()).collect();
        let w = (0..n).map(|_| rng.random_range(1.0..10.0)).collect();
        Instance::from_matrix(DistanceMatrix::from_rows(DistanceKind::Euclidean, &rows).unwrap(), w, p).unwrap()
    }

    #[test]
    fn forced_solution_when_p_equals_sites() {
        let i = inst(1, 6, 4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for g in [Generation::Rand, Generation::Rand100, Generation::Start] {
            let s = generate_initial(&i, g, &mut rng);
            assert_eq!(s.sorted(), vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn best_of_hundred_beats_its_first_sample() {
        let i = inst(2, 20, 15, 3);
        let first = random_solution(&i, &mut ChaCha8Rng::seed_from_u64(5));
        let best = generate_initial(&i, Generation::Rand100, &mut ChaCha8Rng::seed_from_u64(5));
        assert!(fitness_of(&i, best.sites()) <= fitness_of(&i, first.sites()));
        assert!(best.validate(&i).is_ok());
    }

    #[test]
    fn start_keeps_fixed_prefix() {
        let i = inst(3, 10, 8, 4).with_p(4, vec![6, 2]).unwrap();
        let s = generate_initial(&i, Generation::Start, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(&s.sites()[..2], &[6, 2]);
        assert!(s.validate(&i).is_ok());
    }
}
