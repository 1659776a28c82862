//! Domain models (per-site lists of "close" sites) and the shake operators.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distances::Point;
use crate::error::{Error, Result};
use crate::evaluation::Solution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DomainKind {
    Near,
    Quad,
}

impl std::str::FromStr for DomainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NEAR" => Ok(DomainKind::Near),
            "QUAD" => Ok(DomainKind::Quad),
            other => Err(Error::InvalidArgument(format!("unknown domain model `{other}`"))),
        }
    }
}

impl std::fmt::Display for DomainKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DomainKind::Near => "NEAR",
            DomainKind::Quad => "QUAD",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShakeMode {
    Close,
    Rand,
    None,
}

impl std::str::FromStr for ShakeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CLOSE" => Ok(ShakeMode::Close),
            "RAND" => Ok(ShakeMode::Rand),
            "NONE" => Ok(ShakeMode::None),
            other => Err(Error::InvalidArgument(format!("unknown shake mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for ShakeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ShakeMode::Close => "CLOSE",
            ShakeMode::Rand => "RAND",
            ShakeMode::None => "NONE",
        })
    }
}

/// For every site, up to `d` other sites considered close to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainModel {
    kind: DomainKind,
    d: usize,
    lists: Vec<Vec<u32>>,
}

impl DomainModel {
    pub fn build(kind: DomainKind, sites: &[Point], d: usize) -> Result<Self> {
        match kind {
            DomainKind::Near => build_near(sites, d),
            DomainKind::Quad => build_quad(sites, d),
        }
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn list(&self, site: usize) -> &[u32] {
        &self.lists[site]
    }
}

#[inline]
fn key(owner: Point, other: Point, idx: usize) -> (f64, usize) {
    (owner.dist2(other), idx)
}

fn cmp_key(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `d` Euclidean-nearest other sites of every site, ascending; ties go
/// to the lower index.
pub fn build_near(sites: &[Point], d: usize) -> Result<DomainModel> {
    if d == 0 {
        return Err(Error::InvalidArgument("domain size d must be at least 1".into()));
    }
    let len = d.min(sites.len().saturating_sub(1));
    let lists = (0..sites.len())
        .into_par_iter()
        .map(|owner| {
            let o = sites[owner];
            let mut cand: Vec<(f64, usize)> = (0..sites.len())
                .filter(|&j| j != owner)
                .map(|j| key(o, sites[j], j))
                .collect();
            if len < cand.len() {
                cand.select_nth_unstable_by(len, cmp_key);
                cand.truncate(len);
            }
            cand.sort_unstable_by(cmp_key);
            cand.into_iter().map(|(_, j)| j as u32).collect()
        })
        .collect();
    Ok(DomainModel { kind: DomainKind::Near, d, lists })
}

/// Quadrant of `other` relative to `owner`: 0 = NE, 1 = NW, 2 = SW, 3 = SE.
/// Boundaries go clockwise from NE; a coincident point counts as NE.
pub fn quadrant(owner: Point, other: Point) -> usize {
    let dx = other.x - owner.x;
    let dy = other.y - owner.y;
    if dx == 0.0 && dy == 0.0 {
        0
    } else if dy >= 0.0 && dx > 0.0 {
        0
    } else if dy > 0.0 && dx <= 0.0 {
        1
    } else if dy <= 0.0 && dx < 0.0 {
        2
    } else {
        3
    }
}

/// Round-robin over the quadrants NE, NW, SW, SE taking each quadrant's
/// nearest unselected site, skipping exhausted quadrants, until `d` sites.
pub fn build_quad(sites: &[Point], d: usize) -> Result<DomainModel> {
    if d == 0 {
        return Err(Error::InvalidArgument("domain size d must be at least 1".into()));
    }
    let len = d.min(sites.len().saturating_sub(1));
    let lists = (0..sites.len())
        .into_par_iter()
        .map(|owner| {
            let o = sites[owner];
            let mut quads: [Vec<(f64, usize)>; 4] = Default::default();
            for (j, &s) in sites.iter().enumerate() {
                if j != owner {
                    quads[quadrant(o, s)].push(key(o, s, j));
                }
            }
            // Only the first `len` of each quadrant can ever be taken.
            for q in quads.iter_mut() {
                if len < q.len() {
                    q.select_nth_unstable_by(len, cmp_key);
                    q.truncate(len);
                }
                q.sort_unstable_by(cmp_key);
            }
            let mut next = [0usize; 4];
            let mut out = Vec::with_capacity(len);
            while out.len() < len {
                for q in 0..4 {
                    if out.len() == len {
                        break;
                    }
                    if let Some(&(_, j)) = quads[q].get(next[q]) {
                        out.push(j as u32);
                        next[q] += 1;
                    }
                }
            }
            out
        })
        .collect();
    Ok(DomainModel { kind: DomainKind::Quad, d, lists })
}

/// Domain models built once per `(kind, d)` and shared between runs.
#[derive(Debug, Default)]
pub struct DomainCache {
    models: Mutex<HashMap<(DomainKind, usize), Arc<DomainModel>>>,
}

impl DomainCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, kind: DomainKind, d: usize, sites: &[Point]) -> Result<Arc<DomainModel>> {
        if let Some(m) = self.models.lock().expect("domain cache poisoned").get(&(kind, d)) {
            return Ok(Arc::clone(m));
        }
        let model = Arc::new(DomainModel::build(kind, sites, d)?);
        let mut guard = self.models.lock().expect("domain cache poisoned");
        Ok(Arc::clone(guard.entry((kind, d)).or_insert(model)))
    }
}

/// Replace `min(k, p - fixed)` uniformly chosen movable sites.
///
/// CLOSE draws each replacement from the outgoing site's domain list (among
/// members not already open) and falls back to a uniform closed site when the
/// whole list is open. RAND draws a uniform closed site.
pub fn shake<R: Rng + ?Sized>(
    solution: &Solution,
    k: usize,
    mode: ShakeMode,
    domain: Option<&DomainModel>,
    n_sites: usize,
    rng: &mut R,
) -> Result<Solution> {
    if mode == ShakeMode::None || k == 0 {
        return Ok(solution.clone());
    }
    if mode == ShakeMode::Close && domain.is_none() {
        return Err(Error::Config {
            key: "domain".into(),
            message: "CLOSE shake needs a domain model".into(),
        });
    }
    let fixed = solution.fixed_prefix();
    let movable = solution.len() - fixed;
    let k = k.min(movable);
    if k == 0 || solution.len() == n_sites {
        return Ok(solution.clone());
    }
    let mut open = vec![false; n_sites];
    for &s in solution.sites() {
        open[s] = true;
    }
    let mut out = solution.clone();
    let mut positions = sample(rng, movable, k).into_vec();
    // Replace in position order so the random stream is consumed identically
    // regardless of how `sample` orders its output.
    positions.sort_unstable();
    for off in positions {
        let pos = fixed + off;
        let current = out.sites()[pos];
        let replacement = match mode {
            ShakeMode::Close => {
                let list = domain.expect("checked above").list(current);
                let free: Vec<u32> = list.iter().copied().filter(|&s| !open[s as usize]).collect();
                if free.is_empty() {
                    log::debug!("CLOSE shake: domain list of site {current} fully open, drawing uniformly");
                    random_closed(&open, rng)
                } else {
                    Some(free[rng.random_range(0..free.len())] as usize)
                }
            }
            ShakeMode::Rand => random_closed(&open, rng),
            ShakeMode::None => unreachable!(),
        };
        if let Some(r) = replacement {
            open[current] = false;
            open[r] = true;
            out.set(pos, r);
        }
    }
    Ok(out)
}

/// A uniformly drawn closed site, or `None` when every site is open.
pub fn random_closed<R: Rng + ?Sized>(open: &[bool], rng: &mut R) -> Option<usize> {
    let n_open = open.iter().filter(|&&o| o).count();
    let n_closed = open.len() - n_open;
    if n_closed == 0 {
        return None;
    }
    // Rejection sampling is cheap while few sites are open.
    if n_open * 2 <= open.len() {
        loop {
            let s = rng.random_range(0..open.len());
            if !open[s] {
                return Some(s);
            }
        }
    }
    let target = rng.random_range(0..n_closed);
    open.iter().enumerate().filter(|(_, &o)| !o).nth(target).map(|(s, _)| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(x: f64, y: f64) -> Point {
        Point { x, y }
    }

    #[test]
    fn near_breaks_ties_by_index() {
        let sites: Vec<Point> = (0..4).map(|i| pt(i as f64, 0.0)).collect();
        let m = build_near(&sites, 1).unwrap();
        assert_eq!(m.list(1), &[0]);
        assert_eq!(m.list(0), &[1]);
    }

    #[test]
    fn near_full_list_is_sorted() {
        let sites = vec![pt(0., 0.), pt(5., 0.), pt(1., 0.), pt(3., 0.)];
        let m = build_near(&sites, 3).unwrap();
        assert_eq!(m.list(0), &[2, 3, 1]);
        let m = build_near(&sites, 50).unwrap();
        assert_eq!(m.list(0).len(), 3);
        let three = build_near(&sites[..3], 2).unwrap();
        assert!(three.lists.iter().all(|l| l.len() == 2));
    }

    #[test]
    fn quad_one_per_quadrant() {
        // Owner at origin; N, E, S, W at unit distance.
        let sites = vec![pt(0., 0.), pt(0., 1.), pt(1., 0.), pt(0., -1.), pt(-1., 0.)];
        let m = build_quad(&sites, 4).unwrap();
        // N -> NW (dx = 0, dy > 0), E -> NE, S -> SE, W -> SW.
        assert_eq!(quadrant(sites[0], sites[1]), 1);
        assert_eq!(quadrant(sites[0], sites[2]), 0);
        assert_eq!(quadrant(sites[0], sites[3]), 3);
        assert_eq!(quadrant(sites[0], sites[4]), 2);
        assert_eq!(m.list(0), &[2, 1, 4, 3]);
    }

    #[test]
    fn quad_single_quadrant_takes_nearest() {
        let sites = vec![pt(0., 0.), pt(3., 3.), pt(1., 1.), pt(2., 2.), pt(4., 4.)];
        let m = build_quad(&sites, 3).unwrap();
        assert_eq!(m.list(0), &[2, 3, 1]);
    }

    #[test]
    fn quad_spreads_over_quadrants() {
        // Four close sites in NE, one far site in each other quadrant.
        let sites = vec![
            pt(0., 0.),
            pt(1., 1.),
            pt(1., 2.),
            pt(2., 1.),
            pt(2., 2.),
            pt(-10., 10.),
            pt(-10., -10.),
            pt(10., -10.),
        ];
        let near = build_near(&sites, 4).unwrap();
        assert_eq!(near.list(0), &[1, 2, 3, 4]);
        let quad = build_quad(&sites, 4).unwrap();
        assert_eq!(quad.list(0), &[1, 5, 6, 7]);
    }

    #[test]
    fn shake_noop_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = Solution::new(vec![0, 1, 2], 0);
        assert_eq!(shake(&s, 0, ShakeMode::Rand, None, 10, &mut rng).unwrap(), s);
        assert_eq!(shake(&s, 5, ShakeMode::None, None, 10, &mut rng).unwrap(), s);
        assert!(shake(&s, 1, ShakeMode::Close, None, 10, &mut rng).is_err());
    }

    #[test]
    fn close_falls_back_when_list_is_open() {
        let sites: Vec<Point> = (0..6).map(|i| pt(i as f64, 0.0)).collect();
        let m = build_near(&sites, 1).unwrap();
        // Site 0's only neighbour (1) is open.
        let s = Solution::new(vec![0, 1], 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = shake(&s, 1, ShakeMode::Close, Some(&m), 6, &mut rng).unwrap();
        assert_eq!(out.sites()[0], 0);
        assert!(out.sites()[1] == 2 || out.sites()[1] > 2);
    }

    #[test]
    fn rand_shake_validity_many() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10_000 {
            let n = rng.random_range(2..30);
            let p = rng.random_range(1..=n);
            let sites = sample(&mut rng, n, p).into_vec();
            let s = Solution::new(sites, 0);
            let k = rng.random_range(0..2 * p + 1);
            let out = shake(&s, k, ShakeMode::Rand, None, n, &mut rng).unwrap();
            let mut v = out.sorted();
            v.dedup();
            assert_eq!(v.len(), p);
            assert!(v.iter().all(|&x| x < n));
        }
    }

    proptest! {
        #[test]
        fn shake_keeps_fixed_prefix_and_validity(
            seed in 0u64..10_000,
            n in 3usize..25,
            k in 0usize..10,
            close in any::<bool>(),
            quad in any::<bool>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Point> = (0..n).map(|_| pt(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0))).collect();
            let kind = if quad { DomainKind::Quad } else { DomainKind::Near };
            let dm = DomainModel::build(kind, &pts, 1 + seed as usize % 5).unwrap();
            let p = rng.random_range(1..n);
            let fixed = rng.random_range(0..=p);
            let s = Solution::new(sample(&mut rng, n, p).into_vec(), fixed);
            let mode = if close { ShakeMode::Close } else { ShakeMode::Rand };
            let out = shake(&s, k, mode, Some(&dm), n, &mut rng).unwrap();
            prop_assert_eq!(&out.sites()[..fixed], &s.sites()[..fixed]);
            let mut v = out.sorted();
            v.dedup();
            prop_assert_eq!(v.len(), p);
        }

        #[test]
        fn domain_lists_well_formed(seed in 0u64..1000, n in 2usize..30, d in 1usize..40, quad in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Point> = (0..n).map(|_| pt(rng.random_range(0.0f64..10.0).round(), rng.random_range(0.0f64..10.0).round())).collect();
            let kind = if quad { DomainKind::Quad } else { DomainKind::Near };
            let m = DomainModel::build(kind, &pts, d).unwrap();
            for owner in 0..n {
                let l = m.list(owner);
                prop_assert_eq!(l.len(), d.min(n - 1));
                let mut u: Vec<u32> = l.to_vec();
                u.sort_unstable();
                u.dedup();
                prop_assert_eq!(u.len(), l.len());
                prop_assert!(!l.contains(&(owner as u32)));
                if !quad {
                    for w in l.windows(2) {
                        prop_assert!(pts[owner].dist2(pts[w[0] as usize]) <= pts[owner].dist2(pts[w[1] as usize]));
                    }
                } else {
                    let nonempty: std::collections::BTreeSet<usize> =
                        (0..n).filter(|&j| j != owner).map(|j| quadrant(pts[owner], pts[j])).collect();
                    if d >= nonempty.len() {
                        let covered: std::collections::BTreeSet<usize> =
                            l.iter().map(|&j| quadrant(pts[owner], pts[j as usize])).collect();
                        prop_assert_eq!(covered, nonempty);
                    }
                }
            }
        }
    }
}
