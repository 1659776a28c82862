//! Objective evaluation and incremental nearest / second-nearest bookkeeping.
//!
//! [`AssignmentState`] keeps, for every customer, the closest and second
//! closest open site. A swap `(out, in)` then costs O(N) to price and O(N + k·p)
//! to apply, where k is the number of customers that were served by `out`.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::scalar::Scalar;

const NONE: u32 = u32::MAX;

/// An ordered list of open site indices. The first `fixed_prefix` entries are
/// the instance's fixed sites and never move.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Solution {
    sites: Vec<usize>,
    fixed_prefix: usize,
}

impl Solution {
    /// Unchecked constructor; use [`Solution::for_instance`] or
    /// [`Solution::validate`] before handing it to a solver.
    pub fn new(sites: Vec<usize>, fixed_prefix: usize) -> Self {
        Self { sites, fixed_prefix }
    }

    /// Build a solution whose fixed prefix matches the instance.
    pub fn for_instance<T: Scalar>(instance: &Instance<T>, sites: Vec<usize>) -> Result<Self> {
        let s = Self::new(sites, instance.fixed_sites().len());
        s.validate(instance)?;
        Ok(s)
    }

    pub fn validate<T: Scalar>(&self, instance: &Instance<T>) -> Result<()> {
        if self.sites.len() != instance.p() {
            return Err(Error::InvalidSolution(format!(
                "{} open sites, expected p = {}",
                self.sites.len(),
                instance.p()
            )));
        }
        check_distinct(&self.sites, instance.n_sites())?;
        let fixed = instance.fixed_sites();
        if self.fixed_prefix != fixed.len() || self.sites[..self.fixed_prefix] != *fixed {
            return Err(Error::InvalidSolution(
                "leading sites do not match the instance's fixed sites".into(),
            ));
        }
        Ok(())
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn into_sites(self) -> Vec<usize> {
        self.sites
    }

    pub fn fixed_prefix(&self) -> usize {
        self.fixed_prefix
    }

    /// Sites that may be moved.
    pub fn movable(&self) -> &[usize] {
        &self.sites[self.fixed_prefix..]
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, site: usize) -> bool {
        self.sites.contains(&site)
    }

    /// Replace the site at position `pos`, which must not be in the fixed prefix.
    pub fn set(&mut self, pos: usize, site: usize) {
        assert!(pos >= self.fixed_prefix, "position {pos} is fixed");
        self.sites[pos] = site;
    }

    /// The open sites as a sorted vector, for set comparisons.
    pub fn sorted(&self) -> Vec<usize> {
        let mut v = self.sites.clone();
        v.sort_unstable();
        v
    }

    pub fn same_set(&self, other: &Solution) -> bool {
        self.sorted() == other.sorted()
    }
}

fn check_distinct(sites: &[usize], n_sites: usize) -> Result<()> {
    let mut seen = HashSet::with_capacity(sites.len());
    for &s in sites {
        if s >= n_sites {
            return Err(Error::InvalidSolution(format!("site index {s} out of range")));
        }
        if !seen.insert(s) {
            return Err(Error::InvalidSolution(format!("site index {s} appears twice")));
        }
    }
    Ok(())
}

/// `(d_a, a)` precedes `(d_b, b)`: closer, or equally close with lower index.
#[inline]
fn precedes<T: Scalar>(d_a: T, a: u32, d_b: T, b: u32) -> bool {
    d_a < d_b || (d_a == d_b && a < b)
}

/// Per-customer nearest and second-nearest open sites plus cached fitness.
#[derive(Debug, Clone)]
pub struct AssignmentState<'a, T: Scalar = f64> {
    instance: &'a Instance<T>,
    open: Vec<usize>,
    fixed_prefix: usize,
    position: Vec<u32>,
    nearest: Vec<u32>,
    d1: Vec<T>,
    second: Vec<u32>,
    d2: Vec<T>,
    fitness: T,
}

impl<'a, T: Scalar> AssignmentState<'a, T> {
    /// Build the state for a valid solution.
    pub fn new(instance: &'a Instance<T>, solution: &Solution) -> Result<Self> {
        solution.validate(instance)?;
        Ok(Self::build(instance, solution.sites.clone(), solution.fixed_prefix))
    }

    /// Build the state for any non-empty set of distinct sites, regardless of p.
    /// Used by operators that temporarily hold more or fewer than p sites.
    pub fn with_sites(instance: &'a Instance<T>, sites: Vec<usize>, fixed_prefix: usize) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidSolution("no open sites".into()));
        }
        check_distinct(&sites, instance.n_sites())?;
        let fixed_prefix = fixed_prefix.min(sites.len());
        Ok(Self::build(instance, sites, fixed_prefix))
    }

    fn build(instance: &'a Instance<T>, open: Vec<usize>, fixed_prefix: usize) -> Self {
        let n = instance.n_customers();
        let mut position = vec![NONE; instance.n_sites()];
        for (k, &s) in open.iter().enumerate() {
            position[s] = k as u32;
        }
        let mut state = Self {
            instance,
            open,
            fixed_prefix,
            position,
            nearest: vec![NONE; n],
            d1: vec![T::infinity(); n],
            second: vec![NONE; n],
            d2: vec![T::infinity(); n],
            fitness: T::zero(),
        };
        let mut total = T::zero();
        let w = instance.weights();
        for i in 0..n {
            state.rescan(i);
            total = total + w[i] * state.d1[i];
        }
        state.fitness = total;
        state
    }

    fn rescan(&mut self, i: usize) {
        let row = self.instance.distances().row(i);
        let (mut n1, mut e1, mut n2, mut e2) = (NONE, T::infinity(), NONE, T::infinity());
        for &s in &self.open {
            let d = row[s];
            let s = s as u32;
            if precedes(d, s, e1, n1) {
                n2 = n1;
                e2 = e1;
                n1 = s;
                e1 = d;
            } else if precedes(d, s, e2, n2) {
                n2 = s;
                e2 = d;
            }
        }
        self.nearest[i] = n1;
        self.d1[i] = e1;
        self.second[i] = n2;
        self.d2[i] = e2;
    }

    pub fn instance(&self) -> &'a Instance<T> {
        self.instance
    }

    #[inline]
    pub fn fitness(&self) -> T {
        self.fitness
    }

    pub fn open_sites(&self) -> &[usize] {
        &self.open
    }

    pub fn fixed_prefix(&self) -> usize {
        self.fixed_prefix
    }

    #[inline]
    pub fn is_open(&self, site: usize) -> bool {
        self.position[site] != NONE
    }

    /// Position of `site` in the open-site list.
    #[inline]
    pub fn position_of(&self, site: usize) -> Option<usize> {
        let pos = self.position[site];
        (pos != NONE).then_some(pos as usize)
    }

    /// Whether `site` is one of the immovable leading sites.
    #[inline]
    pub fn is_fixed(&self, site: usize) -> bool {
        let pos = self.position[site];
        pos != NONE && (pos as usize) < self.fixed_prefix
    }

    pub fn solution(&self) -> Solution {
        Solution::new(self.open.clone(), self.fixed_prefix)
    }

    #[inline]
    pub fn nearest(&self, customer: usize) -> usize {
        self.nearest[customer] as usize
    }

    #[inline]
    pub fn nearest_dist(&self, customer: usize) -> T {
        self.d1[customer]
    }

    /// Second-nearest open site; `None` when only one site is open.
    #[inline]
    pub fn second(&self, customer: usize) -> Option<usize> {
        let s = self.second[customer];
        (s != NONE).then_some(s as usize)
    }

    #[inline]
    pub fn second_dist(&self, customer: usize) -> T {
        self.d2[customer]
    }

    pub fn nearest_dists(&self) -> &[T] {
        &self.d1
    }

    fn check_swap(&self, out_site: usize, in_site: usize) -> Result<()> {
        let n = self.instance.n_sites();
        if out_site >= n || in_site >= n {
            return Err(Error::InvalidMove(format!("site index out of range in swap ({out_site}, {in_site})")));
        }
        if out_site == in_site {
            return Err(Error::InvalidMove(format!("cannot swap site {out_site} with itself")));
        }
        if !self.is_open(out_site) {
            return Err(Error::InvalidMove(format!("site {out_site} is not open")));
        }
        if self.is_open(in_site) {
            return Err(Error::InvalidMove(format!("site {in_site} is already open")));
        }
        if self.is_fixed(out_site) {
            return Err(Error::InvalidMove(format!("site {out_site} is fixed")));
        }
        Ok(())
    }

    /// `fitness(L - out + in) - fitness(L)`.
    pub fn swap_delta(&self, out_site: usize, in_site: usize) -> Result<T> {
        self.check_swap(out_site, in_site)?;
        Ok(self.swap_delta_unchecked(out_site, in_site))
    }

    /// [`swap_delta`](Self::swap_delta) without precondition checks.
    pub fn swap_delta_unchecked(&self, out_site: usize, in_site: usize) -> T {
        let dist = self.instance.distances();
        let w = self.instance.weights();
        let out = out_site as u32;
        let mut delta = T::zero();
        for i in 0..self.d1.len() {
            let dn = dist.get(i, in_site);
            let new = if self.nearest[i] == out {
                dn.min(self.d2[i])
            } else {
                dn.min(self.d1[i])
            };
            if new != self.d1[i] {
                delta = delta + w[i] * (new - self.d1[i]);
            }
        }
        delta
    }

    /// Replace `out_site` by `in_site` (same position in the site list) and
    /// repair the assignment. Customers served first or second by `out_site`
    /// are rescanned; the rest only compare against `in_site`. The cached
    /// fitness is re-accumulated in customer order, so it is bit-identical to
    /// a fresh evaluation of the new set.
    pub fn apply_swap(&mut self, out_site: usize, in_site: usize) -> Result<()> {
        self.check_swap(out_site, in_site)?;
        self.apply_swap_unchecked(out_site, in_site);
        Ok(())
    }

    pub fn apply_swap_unchecked(&mut self, out_site: usize, in_site: usize) {
        let pos = self.position[out_site];
        self.position[out_site] = NONE;
        self.position[in_site] = pos;
        self.open[pos as usize] = in_site;
        self.repair(Some(out_site as u32), Some(in_site as u32));
    }

    /// Open an additional site (the state may then hold more than p sites).
    pub fn add(&mut self, site: usize) -> Result<()> {
        if site >= self.instance.n_sites() || self.is_open(site) {
            return Err(Error::InvalidMove(format!("cannot open site {site}")));
        }
        self.position[site] = self.open.len() as u32;
        self.open.push(site);
        self.repair(None, Some(site as u32));
        Ok(())
    }

    /// Fitness change of closing `site` (infinite when it is the only open site).
    pub fn remove_delta(&self, site: usize) -> T {
        let w = self.instance.weights();
        let s = site as u32;
        let mut delta = T::zero();
        for i in 0..self.d1.len() {
            if self.nearest[i] == s {
                if self.second[i] == NONE {
                    return T::infinity();
                }
                delta = delta + w[i] * (self.d2[i] - self.d1[i]);
            }
        }
        delta
    }

    /// Close a non-fixed site, keeping the order of the remaining sites.
    pub fn remove(&mut self, site: usize) -> Result<()> {
        if site >= self.instance.n_sites() || !self.is_open(site) || self.is_fixed(site) || self.open.len() == 1 {
            return Err(Error::InvalidMove(format!("cannot close site {site}")));
        }
        let pos = self.position[site] as usize;
        self.open.remove(pos);
        self.position[site] = NONE;
        for (k, &s) in self.open.iter().enumerate().skip(pos) {
            self.position[s] = k as u32;
        }
        self.repair(Some(site as u32), None);
        Ok(())
    }

    fn repair(&mut self, removed: Option<u32>, added: Option<u32>) {
        let w = self.instance.weights();
        let mut total = T::zero();
        for i in 0..self.d1.len() {
            let affected = removed.is_some_and(|r| self.nearest[i] == r || self.second[i] == r);
            if affected {
                self.rescan(i);
            } else if let Some(a) = added {
                let d = self.instance.distance(i, a as usize);
                if precedes(d, a, self.d1[i], self.nearest[i]) {
                    self.second[i] = self.nearest[i];
                    self.d2[i] = self.d1[i];
                    self.nearest[i] = a;
                    self.d1[i] = d;
                } else if precedes(d, a, self.d2[i], self.second[i]) {
                    self.second[i] = a;
                    self.d2[i] = d;
                }
            }
            total = total + w[i] * self.d1[i];
        }
        self.fitness = total;
    }
}

/// Weighted p-median objective of a valid solution.
pub fn evaluate<T: Scalar>(instance: &Instance<T>, solution: &Solution) -> Result<T> {
    solution.validate(instance)?;
    Ok(fitness_of(instance, solution.sites()))
}

/// Objective of an arbitrary non-empty site set, without validation.
pub fn fitness_of<T: Scalar>(instance: &Instance<T>, sites: &[usize]) -> T {
    let w = instance.weights();
    let mut total = T::zero();
    for i in 0..instance.n_customers() {
        let row = instance.distances().row(i);
        let d = sites.iter().map(|&s| row[s]).fold(T::infinity(), T::min);
        total = total + w[i] * d;
    }
    total
}

/// Average distance to the nearest open site, weighted by `report_weights`
/// (which need not be the optimisation weights).
pub fn mean_walk_distance<T: Scalar>(instance: &Instance<T>, solution: &[usize], report_weights: &[T]) -> Result<T> {
    if solution.is_empty() {
        return Err(Error::InvalidSolution("no open sites".into()));
    }
    check_distinct(solution, instance.n_sites())?;
    if report_weights.len() != instance.n_customers() {
        return Err(Error::InvalidArgument(format!(
            "{} report weights for {} customers",
            report_weights.len(),
            instance.n_customers()
        )));
    }
    let total: T = report_weights.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::InvalidArgument("report weights sum to zero".into()));
    }
    let mut acc = T::zero();
    for (i, &w) in report_weights.iter().enumerate() {
        let row = instance.distances().row(i);
        let d = solution.iter().map(|&s| row[s]).fold(T::infinity(), T::min);
        acc = acc + w * d;
    }
    Ok(acc / total)
}
