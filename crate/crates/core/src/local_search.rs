//! Descent procedures: fast interchange (FI), alternate location-allocation
//! with a candidate shortlist (IALT) and domain-restricted interchange (IMP).
//!
//! All three work in place on an [`AssignmentState`], never move fixed sites
//! and use no randomness.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::distances::Point;
use crate::error::{Error, Result};
use crate::evaluation::{AssignmentState, Solution};
use crate::instance::Instance;
use crate::neighborhood::DomainModel;
use crate::scalar::{improves, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocalSearch {
    None,
    Fi,
    Ialt { laux: usize },
    Imp { imp_param: usize },
}

impl LocalSearch {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LocalSearch::Ialt { laux: 0 } => Err(Error::InvalidArgument("laux must be at least 1".into())),
            LocalSearch::Imp { imp_param: 0 } => Err(Error::InvalidArgument("IMP parameter must be at least 1".into())),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LocalSearch::None => "NONE",
            LocalSearch::Fi => "FI",
            LocalSearch::Ialt { .. } => "IALT",
            LocalSearch::Imp { .. } => "IMP",
        }
    }

    /// Run the search in place. IMP needs a domain model.
    pub fn run<T: Scalar>(
        &self,
        state: &mut AssignmentState<'_, T>,
        domain: Option<&DomainModel>,
        deadline: Option<Instant>,
    ) -> Result<()> {
        self.validate()?;
        match *self {
            LocalSearch::None => {}
            LocalSearch::Fi => {
                fi(state, deadline);
            }
            LocalSearch::Ialt { laux } => {
                ialt(state, laux, deadline);
            }
            LocalSearch::Imp { imp_param } => {
                let domain = domain.ok_or_else(|| Error::Config {
                    key: "domain".into(),
                    message: "IMP local search needs a domain model".into(),
                })?;
                imp(state, imp_param, domain, deadline);
            }
        }
        Ok(())
    }

    /// Convenience wrapper over a [`Solution`].
    pub fn apply<T: Scalar>(
        &self,
        instance: &Instance<T>,
        solution: &Solution,
        domain: Option<&DomainModel>,
    ) -> Result<Solution> {
        let mut state = AssignmentState::new(instance, solution)?;
        self.run(&mut state, domain, None)?;
        Ok(state.solution())
    }
}

fn expired(deadline: Option<Instant>) -> bool {
    deadline.is_some_and(|d| Instant::now() >= d)
}

/// Best-improvement swap descent. Each pass prices every (closed, open) pair
/// through the nearest / second-nearest decomposition and applies the best
/// improving one, ties to the lowest `(in, out)` pair. Stops at a 1-swap
/// local optimum (or the deadline). Returns the number of swaps applied.
pub fn fi<T: Scalar>(state: &mut AssignmentState<'_, T>, deadline: Option<Instant>) -> usize {
    let inst = state.instance();
    let n_sites = inst.n_sites();
    let p = state.open_sites().len();
    let fixed = state.fixed_prefix();
    if p == fixed || p == n_sites {
        return 0;
    }
    let w = inst.weights();
    let dist = inst.distances();
    let mut loss = vec![T::zero(); p];
    let mut moves = 0;
    loop {
        if expired(deadline) {
            break;
        }
        let open = state.open_sites().to_vec();
        let mut pos_of = vec![usize::MAX; n_sites];
        for (k, &s) in open.iter().enumerate() {
            pos_of[s] = k;
        }
        let mut best: Option<(T, usize, usize)> = None;
        for in_site in 0..n_sites {
            if pos_of[in_site] != usize::MAX {
                continue;
            }
            loss.iter_mut().for_each(|l| *l = T::zero());
            let mut gain = T::zero();
            for i in 0..w.len() {
                let dn = dist.get(i, in_site);
                let d1 = state.nearest_dist(i);
                if dn < d1 {
                    gain = gain + w[i] * (d1 - dn);
                }
                let k = pos_of[state.nearest(i)];
                let d2 = state.second_dist(i);
                let extra = d2.min(dn) - d1.min(dn);
                if extra > T::zero() {
                    loss[k] = loss[k] + w[i] * extra;
                }
            }
            for k in fixed..p {
                let delta = loss[k] - gain;
                let out_site = open[k];
                let take = match best {
                    None => true,
                    Some((bd, bi, bo)) => delta < bd || (delta == bd && (in_site, out_site) < (bi, bo)),
                };
                if take {
                    best = Some((delta, in_site, out_site));
                }
            }
        }
        match best {
            Some((delta, in_site, out_site)) if improves(delta, state.fitness()) => {
                let before = state.fitness();
                state.apply_swap_unchecked(out_site, in_site);
                moves += 1;
                // Guard against a decomposition rounding artefact.
                if !(state.fitness() < before) {
                    state.apply_swap_unchecked(in_site, out_site);
                    break;
                }
            }
            _ => break,
        }
    }
    moves
}

/// Alternate location-allocation. Allocation assigns customers to their
/// nearest open site; location moves each movable site to the best of the
/// `laux` sites nearest the weighted centroid of its cluster (or stays).
/// Repeats until a full pass changes nothing. Returns the number of moves.
pub fn ialt<T: Scalar>(state: &mut AssignmentState<'_, T>, laux: usize, deadline: Option<Instant>) -> usize {
    let inst = state.instance();
    let cust = inst.customer_points();
    let site_pts = inst.site_points();
    let w = inst.weights();
    let fixed = state.fixed_prefix();
    let mut moves = 0;
    loop {
        if expired(deadline) {
            break;
        }
        let open = state.open_sites().to_vec();
        let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); open.len()];
        for i in 0..inst.n_customers() {
            let pos = state.position_of(state.nearest(i)).expect("nearest site is open");
            clusters[pos].push(i);
        }
        let mut changed = false;
        for (pos, &site) in open.iter().enumerate().skip(fixed) {
            let members = &clusters[pos];
            if members.is_empty() {
                continue;
            }
            let centre = weighted_centroid(members, cust, w);
            let shortlist = nearest_candidates(centre, site_pts, laux, |s| s == site || !state.is_open(s));
            let cost = |s: usize| -> T {
                members
                    .iter()
                    .fold(T::zero(), |acc, &i| acc + w[i] * inst.distance(i, s))
            };
            let current = cost(site);
            let mut best = (current, site);
            for s in shortlist {
                let c = cost(s);
                if c < best.0 {
                    best = (c, s);
                }
            }
            if best.1 != site && improves(best.0 - current, current) {
                state.apply_swap_unchecked(site, best.1);
                moves += 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    moves
}

fn weighted_centroid<T: Scalar>(members: &[usize], pts: &[Point], w: &[T]) -> Point {
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for &i in members {
        let wi = w[i].to_f64_lossy();
        sx += wi * pts[i].x;
        sy += wi * pts[i].y;
        sw += wi;
    }
    if sw > 0.0 {
        return Point { x: sx / sw, y: sy / sw };
    }
    let n = members.len() as f64;
    let (sx, sy) = members.iter().fold((0.0, 0.0), |(a, b), &i| (a + pts[i].x, b + pts[i].y));
    Point { x: sx / n, y: sy / n }
}

/// Up to `count` eligible sites nearest to `centre`, ties to lower index.
fn nearest_candidates(centre: Point, sites: &[Point], count: usize, eligible: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = sites
        .iter()
        .enumerate()
        .filter(|(s, _)| eligible(*s))
        .map(|(s, p)| (centre.dist2(*p), s))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if count < cand.len() {
        cand.select_nth_unstable_by(count, cmp);
        cand.truncate(count);
    }
    cand.sort_unstable_by(cmp);
    cand.into_iter().map(|(_, s)| s).collect()
}

/// `imp_param` rounds of domain-restricted interchange: every movable site in
/// turn takes its best improving swap with a closed member of its domain list.
/// Stops early after a round without changes. Returns the number of swaps.
pub fn imp<T: Scalar>(
    state: &mut AssignmentState<'_, T>,
    imp_param: usize,
    domain: &DomainModel,
    deadline: Option<Instant>,
) -> usize {
    let fixed = state.fixed_prefix();
    let mut moves = 0;
    for _ in 0..imp_param {
        let mut changed = false;
        for pos in fixed..state.open_sites().len() {
            if expired(deadline) {
                return moves;
            }
            let site = state.open_sites()[pos];
            let mut best: Option<(T, usize)> = None;
            for &cand in domain.list(site) {
                let cand = cand as usize;
                if state.is_open(cand) {
                    continue;
                }
                let delta = state.swap_delta_unchecked(site, cand);
                if best.is_none_or(|(bd, _)| delta < bd) {
                    best = Some((delta, cand));
                }
            }
            if let Some((delta, cand)) = best {
                if improves(delta, state.fitness()) {
                    state.apply_swap_unchecked(site, cand);
                    moves += 1;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    moves
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distances::{DistanceKind, DistanceMatrix};
    use crate::evaluation::fitness_of;
    use crate::instance::{CandidateSite, Customer, WeightModel};
    use crate::neighborhood::build_near;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn geo_instance(seed: u64, n: usize, f: usize, p: usize) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let customers: Vec<Customer> = (0..n)
            .map(|i| Customer {
                id: i as i64,
                lat: 36.7 + rng.random_range(0.0..0.05),
                lon: -4.4 + rng.random_range(0.0..0.05),
                population: rng.random_range(1..500),
                graph_node: None,
            })
            .collect();
        let sites: Vec<CandidateSite> = (0..f)
            .map(|j| CandidateSite {
                id: j as i64,
                lat: 36.7 + rng.random_range(0.0..0.05),
                lon: -4.4 + rng.random_range(0.0..0.05),
                graph_node: None,
            })
            .collect();
        let m = crate::distances::euclidean_matrix(&customers, &sites);
        let w = WeightModel::citizens(&customers);
        Instance::new(Arc::new(customers), Arc::new(sites), p, Arc::new(m), w, vec![]).unwrap()
    }

    fn is_swap_optimal(inst: &Instance, sites: &[usize]) -> bool {
        let f = fitness_of(inst, sites);
        for pos in 0..sites.len() {
            for cand in 0..inst.n_sites() {
                if sites.contains(&cand) {
                    continue;
                }
                let mut s = sites.to_vec();
                s[pos] = cand;
                if fitness_of(inst, &s) < f * (1.0 - 1e-12) {
                    return false;
                }
            }
        }
        true
    }

    fn random_start(rng: &mut ChaCha8Rng, f: usize, p: usize) -> Solution {
        Solution::new(rand::seq::index::sample(rng, f, p).into_vec(), 0)
    }

    #[test]
    fn fi_reaches_swap_optimum() {
        let inst = geo_instance(1, 30, 12, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let start = random_start(&mut rng, 12, 3);
            let out = LocalSearch::Fi.apply(&inst, &start, None).unwrap();
            assert!(is_swap_optimal(&inst, out.sites()));
            assert!(fitness_of(&inst, out.sites()) <= fitness_of(&inst, start.sites()));
            let again = LocalSearch::Fi.apply(&inst, &out, None).unwrap();
            assert_eq!(again, out);
        }
    }

    #[test]
    fn fi_keeps_fixed_sites() {
        let inst = geo_instance(3, 25, 12, 4).with_p(4, vec![5, 7]).unwrap();
        let start = Solution::new(vec![5, 7, 0, 1], 2);
        let out = LocalSearch::Fi.apply(&inst, &start, None).unwrap();
        assert_eq!(&out.sites()[..2], &[5, 7]);
    }

    #[test]
    fn ialt_descends_and_exact_with_full_shortlist() {
        let inst = geo_instance(4, 30, 10, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let start = random_start(&mut rng, 10, 3);
            let out = LocalSearch::Ialt { laux: 10 }.apply(&inst, &start, None).unwrap();
            let f = fitness_of(&inst, out.sites());
            assert!(f <= fitness_of(&inst, start.sites()));
            // Fixed point: each cluster's site is its best 1-median among
            // sites not open elsewhere.
            let st = AssignmentState::new(&inst, &out).unwrap();
            for &site in out.sites() {
                let members: Vec<usize> = (0..30).filter(|&i| st.nearest(i) == site).collect();
                let cost = |s: usize| members.iter().map(|&i| inst.weights()[i] * inst.distance(i, s)).sum::<f64>();
                for s in 0..10 {
                    if s == site || !out.contains(s) {
                        assert!(cost(s) >= cost(site) * (1.0 - 1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn imp_with_full_domain_is_swap_optimal() {
        let inst = geo_instance(5, 30, 10, 3);
        let dm = build_near(inst.site_points(), 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let start = random_start(&mut rng, 10, 3);
            let out = LocalSearch::Imp { imp_param: 1000 }.apply(&inst, &start, Some(&dm)).unwrap();
            assert!(is_swap_optimal(&inst, out.sites()));
            let fi_out = LocalSearch::Fi.apply(&inst, &start, None).unwrap();
            assert!(is_swap_optimal(&inst, fi_out.sites()));
        }
    }

    #[test]
    fn imp_needs_domain() {
        let inst = geo_instance(6, 5, 5, 2);
        assert!(LocalSearch::Imp { imp_param: 1 }.apply(&inst, &Solution::new(vec![0, 1], 0), None).is_err());
        assert!(LocalSearch::Ialt { laux: 0 }.validate().is_err());
    }

    #[test]
    fn searches_on_matrix_only_instance() {
        let m = DistanceMatrix::from_rows(DistanceKind::Euclidean, &[vec![1., 4., 2.], vec![2., 3., 9.]]).unwrap();
        let inst = Instance::from_matrix(m, vec![1.0, 1.0], 1).unwrap();
        let out = LocalSearch::Fi.apply(&inst, &Solution::new(vec![2], 0), None).unwrap();
        assert_eq!(out.sites(), &[0]);
    }
}
