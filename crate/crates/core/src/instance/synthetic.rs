//! Deterministic synthetic city used in place of real open data.
//!
//! The street network is a jittered grid: a random spanning tree keeps it
//! connected and every other grid edge survives with probability
//! `graph_density`. Candidate sites sit at the midpoints of street segments,
//! customers at intersections drawn around the city centre with log-normal
//! populations. A central cluster of `p` sites serves as the incumbent
//! deployment, and the generator also emits a week of occupancy samples for it.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use super::{ActivityRow, CandidateSite, Customer, DistanceKind, InstanceData, Meta, StationActivityLog, WeightKind};
use crate::distances::{Point, Projection, EARTH_RADIUS_M};
use crate::error::{Error, Result};

/// 2018-10-07T00:00:00Z
const ACTIVITY_START: i64 = 1_538_870_400;
const ACTIVITY_STEP_S: i64 = 900;
const ACTIVITY_SAMPLES: i64 = 7 * 24 * 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    pub seed: u64,
    pub n_customers: usize,
    pub n_sites: usize,
    /// Probability of keeping each non-tree grid street, in (0, 1].
    pub graph_density: f64,
    pub p: usize,
    pub center: (f64, f64),
    /// Side length of the city square in meters.
    pub extent_m: f64,
}

impl SyntheticParams {
    pub fn new(seed: u64, n_customers: usize, n_sites: usize, graph_density: f64) -> Self {
        Self {
            seed,
            n_customers,
            n_sites,
            graph_density,
            p: 23.min(n_sites),
            center: (36.7213, -4.4214),
            extent_m: 8000.0,
        }
    }

    pub fn with_p(mut self, p: usize) -> Self {
        self.p = p;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_customers < 1 {
            return Err(Error::InvalidArgument("at least one customer is required".into()));
        }
        if !(self.graph_density > 0.0 && self.graph_density <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "graph density {} outside (0, 1]",
                self.graph_density
            )));
        }
        if self.p < 1 || self.p > self.n_sites {
            return Err(Error::InvalidArgument(format!("p = {} outside [1, n_sites]", self.p)));
        }
        if !(self.extent_m > 0.0) {
            return Err(Error::InvalidArgument("extent must be positive".into()));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<InstanceData> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);

        // Grid large enough that a spanning tree alone offers 1.5 edges per site
        // and every customer gets its own intersection.
        let cells = (1.5 * self.n_sites as f64).max(self.n_customers as f64);
        let side = (cells.sqrt().ceil() as usize + 1).max(2);
        let spacing = self.extent_m / side as f64;
        let n_grid = side * side;
        let half = (side as f64 - 1.0) / 2.0;
        let grid: Vec<Point> = (0..n_grid)
            .map(|k| {
                let (r, c) = (k / side, k % side);
                Point {
                    x: (c as f64 - half) * spacing + rng.random_range(-0.3..0.3) * spacing,
                    y: (r as f64 - half) * spacing + rng.random_range(-0.3..0.3) * spacing,
                }
            })
            .collect();

        // Grid streets, a random spanning tree over them, plus extra streets.
        let mut streets: Vec<(usize, usize)> = Vec::with_capacity(2 * n_grid);
        for r in 0..side {
            for c in 0..side {
                let k = r * side + c;
                if c + 1 < side {
                    streets.push((k, k + 1));
                }
                if r + 1 < side {
                    streets.push((k, k + side));
                }
            }
        }
        let keys: Vec<f64> = streets.iter().map(|_| rng.random::<f64>()).collect();
        let mut order: Vec<usize> = (0..streets.len()).collect();
        order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
        let mut uf = UnionFind::new(n_grid);
        let mut keep = vec![false; streets.len()];
        for &e in &order {
            let (a, b) = streets[e];
            if uf.union(a, b) {
                keep[e] = true;
            }
        }
        for k in keep.iter_mut() {
            let extra = rng.random::<f64>() < self.graph_density;
            *k = *k || extra;
        }
        let kept: Vec<usize> = (0..streets.len()).filter(|&e| keep[e]).collect();

        // Sites at midpoints of distinct segments.
        let mut chosen: Vec<usize> = sample(&mut rng, kept.len(), self.n_sites).into_vec();
        chosen.sort_unstable();
        let mut is_site_edge = vec![false; streets.len()];
        let mut site_points = Vec::with_capacity(self.n_sites);
        for &k in &chosen {
            let e = kept[k];
            is_site_edge[e] = true;
            let (a, b) = streets[e];
            site_points.push((e, Point {
                x: 0.5 * (grid[a].x + grid[b].x),
                y: 0.5 * (grid[a].y + grid[b].y),
            }));
        }

        // Customers at distinct intersections, clustered around the centre.
        let spread = Normal::new(0.0, self.extent_m / 5.0).expect("valid normal");
        let population = LogNormal::new(7.0, 1.0).expect("valid log-normal");
        let mut used = vec![false; n_grid];
        let mut customer_nodes = Vec::with_capacity(self.n_customers);
        let mut populations = Vec::with_capacity(self.n_customers);
        for _ in 0..self.n_customers {
            let target = Point {
                x: spread.sample(&mut rng),
                y: spread.sample(&mut rng),
            };
            let node = (0..n_grid)
                .filter(|&k| !used[k])
                .min_by(|&a, &b| grid[a].dist2(target).total_cmp(&grid[b].dist2(target)).then(a.cmp(&b)))
                .expect("grid has more intersections than customers");
            used[node] = true;
            customer_nodes.push(node);
            let size: f64 = population.sample(&mut rng);
            populations.push(size.round().max(0.0) as u64);
        }

        // Back to WGS84.
        let (lat0, lon0) = self.center;
        let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        let cos0 = lat0.to_radians().cos();
        let to_geo = |p: Point| (lat0 + p.y / k, lon0 + p.x / (k * cos0));
        let grid_geo: Vec<(f64, f64)> = grid.iter().map(|&p| to_geo(p)).collect();

        let grid_id = |k: usize| k as u64 + 1;
        let customers: Vec<Customer> = customer_nodes
            .iter()
            .zip(&populations)
            .enumerate()
            .map(|(i, (&node, &pop))| Customer {
                id: i as i64 + 1,
                lat: grid_geo[node].0,
                lon: grid_geo[node].1,
                population: pop,
                graph_node: Some(grid_id(node)),
            })
            .collect();
        let mut midpoint_node = vec![0u64; streets.len()];
        let sites: Vec<CandidateSite> = site_points
            .iter()
            .enumerate()
            .map(|(j, &(e, _))| {
                let (a, b) = streets[e];
                // Midpoint in degrees so both halves project to equal lengths.
                let lat = 0.5 * (grid_geo[a].0 + grid_geo[b].0);
                let lon = 0.5 * (grid_geo[a].1 + grid_geo[b].1);
                let node = n_grid as u64 + 1 + j as u64;
                midpoint_node[e] = node;
                CandidateSite {
                    id: j as i64 + 1,
                    lat,
                    lon,
                    graph_node: Some(node),
                }
            })
            .collect();

        // Edge lengths on the same projection the solver uses for Euclidean distances.
        let projection = Projection::for_instance(&customers, &sites);
        let geo_of = |node: u64| -> (f64, f64) {
            if node as usize <= n_grid {
                grid_geo[node as usize - 1]
            } else {
                let s = &sites[(node as usize) - n_grid - 1];
                (s.lat, s.lon)
            }
        };
        let mut edges = Vec::with_capacity(kept.len() + self.n_sites);
        for &e in &kept {
            let (a, b) = streets[e];
            let (u, v) = (grid_id(a), grid_id(b));
            let segments: Vec<(u64, u64)> = if is_site_edge[e] {
                vec![(u, midpoint_node[e]), (midpoint_node[e], v)]
            } else {
                vec![(u, v)]
            };
            for (x, y) in segments {
                let len = projection.distance(geo_of(x), geo_of(y));
                if len > 0.0 {
                    edges.push((x, y, len));
                }
            }
        }

        // Incumbent deployment: the p sites nearest a point just south of the centre.
        let anchor = Point {
            x: 0.0,
            y: -0.1 * self.extent_m,
        };
        let mut by_anchor: Vec<usize> = (0..site_points.len()).collect();
        by_anchor.sort_by(|&a, &b| {
            site_points[a]
                .1
                .dist2(anchor)
                .total_cmp(&site_points[b].1.dist2(anchor))
                .then(a.cmp(&b))
        });
        let mut baseline: Vec<i64> = by_anchor[..self.p].iter().map(|&j| sites[j].id).collect();
        baseline.sort_unstable();

        let mut rows = Vec::with_capacity(baseline.len() * ACTIVITY_SAMPLES as usize);
        let noise = Normal::new(0.0, 0.05).expect("valid normal");
        for &id in &baseline {
            let s = &sites[id as usize - 1];
            let slots: u32 = rng.random_range(15..=30);
            let level: f64 = rng.random_range(0.2..0.8);
            for t in 0..ACTIVITY_SAMPLES {
                let ts = ACTIVITY_START + t * ACTIVITY_STEP_S;
                let day_phase = (ts % 86_400) as f64 / 86_400.0 * std::f64::consts::TAU;
                let fill = level + 0.15 * day_phase.sin() + noise.sample(&mut rng);
                let occupied = (fill * slots as f64).round().clamp(0.0, slots as f64) as u32;
                rows.push(ActivityRow {
                    station_id: id,
                    lat: s.lat,
                    lon: s.lon,
                    timestamp: ts,
                    occupied,
                    slots,
                });
            }
        }

        Ok(InstanceData {
            customers: customers.into(),
            sites: sites.into(),
            edges: Some(edges),
            meta: Meta {
                p: self.p,
                distance: DistanceKind::Graph,
                weight: WeightKind::Citizens,
                fixed_sites: Vec::new(),
            },
            activity: Some(StationActivityLog::new(rows)?),
            baseline: Some(baseline),
            dir: None,
        })
    }
}

/// Generate a synthetic city with `p = min(23, n_sites)`.
pub fn generate_synthetic_city(
    seed: u64,
    n_customers: usize,
    n_sites: usize,
    graph_density: f64,
) -> Result<InstanceData> {
    SyntheticParams::new(seed, n_customers, n_sites, graph_density).generate()
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}
