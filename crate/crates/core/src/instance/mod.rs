//! Problem instances: customers (neighbourhood centres), candidate sites,
//! weight models and the files they are loaded from.

mod activity;
mod io;
mod synthetic;

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use crate::distances::DistanceKind;
use crate::distances::{DistanceMatrix, Point, Projection};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use activity::{
    derive_demand_weights, derive_demand_weights_with, station_activity, ActivityRow, StationActivityLog,
};
pub use io::{format_site_list, load_instance, read_site_list, InstanceData, Meta, DISTANCE_CACHE_FILE};
pub use synthetic::{generate_synthetic_city, SyntheticParams};

/// A demand point: the centre of a neighbourhood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    pub id: i64,
    pub lat: f64,
    pub lon: f64,
    pub population: u64,
    pub graph_node: Option<u64>,
}

/// A location where a station may be opened (a street segment).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSite {
    pub id: i64,
    pub lat: f64,
    pub lon: f64,
    pub graph_node: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    Uniform,
    Citizens,
    Demand,
}

impl WeightKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightKind::Uniform => "uniform",
            WeightKind::Citizens => "citizens",
            WeightKind::Demand => "demand",
        }
    }
}

impl std::str::FromStr for WeightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(WeightKind::Uniform),
            "citizens" => Ok(WeightKind::Citizens),
            "demand" => Ok(WeightKind::Demand),
            other => Err(Error::InvalidArgument(format!("unknown weight model `{other}`"))),
        }
    }
}

impl std::fmt::Display for WeightKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-customer weights `w_i` of the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightModel<T: Scalar = f64> {
    kind: WeightKind,
    weights: Vec<T>,
}

impl<T: Scalar> WeightModel<T> {
    pub fn uniform(n: usize) -> Self {
        Self {
            kind: WeightKind::Uniform,
            weights: vec![T::one(); n],
        }
    }

    pub fn citizens(customers: &[Customer]) -> Self {
        Self {
            kind: WeightKind::Citizens,
            weights: customers
                .iter()
                .map(|c| T::from_u64(c.population).unwrap_or_else(T::infinity))
                .collect(),
        }
    }

    /// Demand weights supplied directly (see [`derive_demand_weights`]).
    pub fn demand(weights: Vec<T>) -> Result<Self> {
        let model = Self {
            kind: WeightKind::Demand,
            weights,
        };
        model.check_values()?;
        Ok(model)
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> T {
        self.weights.iter().copied().sum()
    }

    fn check_values(&self) -> Result<()> {
        if let Some(i) = self.weights.iter().position(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::Validation(format!(
                "weight {i} is {} (must be finite and non-negative)",
                self.weights[i]
            )));
        }
        Ok(())
    }

    /// Check the kind-specific invariant against the customers it describes.
    pub fn validate(&self, customers: &[Customer]) -> Result<()> {
        if self.weights.len() != customers.len() {
            return Err(Error::Validation(format!(
                "{} weights for {} customers",
                self.weights.len(),
                customers.len()
            )));
        }
        self.check_values()?;
        match self.kind {
            WeightKind::Uniform => {
                if self.weights.iter().any(|w| *w != T::one()) {
                    return Err(Error::Validation("uniform weights must all equal 1".into()));
                }
            }
            WeightKind::Citizens => {
                let expected = Self::citizens(customers);
                if expected.weights != self.weights {
                    return Err(Error::Validation("citizen weights must equal populations".into()));
                }
            }
            WeightKind::Demand => {}
        }
        Ok(())
    }
}

/// A fully specified p-median instance.
///
/// Customers and sites are shared behind `Arc`s so that several scenarios
/// (distance x weight combinations) can be built over the same data cheaply.
/// An instance is immutable once built.
#[derive(Debug, Clone)]
pub struct Instance<T: Scalar = f64> {
    customers: Arc<Vec<Customer>>,
    sites: Arc<Vec<CandidateSite>>,
    p: usize,
    distances: Arc<DistanceMatrix<T>>,
    weights: WeightModel<T>,
    fixed_sites: Vec<usize>,
    projection: Projection,
    customer_points: Arc<Vec<Point>>,
    site_points: Arc<Vec<Point>>,
    site_index: Arc<HashMap<i64, usize>>,
}

impl<T: Scalar> Instance<T> {
    /// Build and validate an instance. `fixed_sites` are site indices.
    pub fn new(
        customers: impl Into<Arc<Vec<Customer>>>,
        sites: impl Into<Arc<Vec<CandidateSite>>>,
        p: usize,
        distances: impl Into<Arc<DistanceMatrix<T>>>,
        weights: WeightModel<T>,
        fixed_sites: Vec<usize>,
    ) -> Result<Self> {
        let customers = customers.into();
        let sites = sites.into();
        let distances = distances.into();

        let mut seen = HashSet::new();
        for c in customers.iter() {
            if !seen.insert(c.id) {
                return Err(Error::Validation(format!("duplicate customer id {}", c.id)));
            }
            check_coords("customer", c.id, c.lat, c.lon)?;
        }
        let mut site_index = HashMap::with_capacity(sites.len());
        for (j, s) in sites.iter().enumerate() {
            if site_index.insert(s.id, j).is_some() {
                return Err(Error::Validation(format!("duplicate site id {}", s.id)));
            }
            check_coords("site", s.id, s.lat, s.lon)?;
        }
        if customers.is_empty() {
            return Err(Error::Validation("instance has no customers".into()));
        }
        if p < 1 || p > sites.len() {
            return Err(Error::Validation(format!(
                "p = {p} outside [1, {}] (number of sites)",
                sites.len()
            )));
        }
        if fixed_sites.len() > p {
            return Err(Error::Validation(format!(
                "{} fixed sites exceed p = {p}",
                fixed_sites.len()
            )));
        }
        let mut fixed_seen = HashSet::new();
        for &f in &fixed_sites {
            if f >= sites.len() || !fixed_seen.insert(f) {
                return Err(Error::Validation(format!("invalid or duplicate fixed site index {f}")));
            }
        }
        if distances.rows() != customers.len() || distances.cols() != sites.len() {
            return Err(Error::Dimension {
                rows: customers.len(),
                cols: sites.len(),
                found_rows: distances.rows(),
                found_cols: distances.cols(),
            });
        }
        weights.validate(&customers)?;

        let projection = Projection::for_instance(&customers, &sites);
        let customer_points = customers.iter().map(|c| projection.project(c.lat, c.lon)).collect();
        let site_points = sites.iter().map(|s| projection.project(s.lat, s.lon)).collect();
        Ok(Self {
            customers,
            sites,
            p,
            distances,
            weights,
            fixed_sites,
            projection,
            customer_points: Arc::new(customer_points),
            site_points: Arc::new(site_points),
            site_index: Arc::new(site_index),
        })
    }

    /// Instance over explicit distances and weights, with placeholder
    /// coordinates laid out on a line. Handy for small hand-made examples.
    pub fn from_matrix(distances: DistanceMatrix<T>, weights: Vec<T>, p: usize) -> Result<Self> {
        let customers: Vec<Customer> = (0..distances.rows())
            .map(|i| Customer {
                id: i as i64,
                lat: 0.0,
                lon: i as f64 * 1e-4,
                population: 1,
                graph_node: None,
            })
            .collect();
        let sites: Vec<CandidateSite> = (0..distances.cols())
            .map(|j| CandidateSite {
                id: j as i64,
                lat: 1e-4,
                lon: j as f64 * 1e-4,
                graph_node: None,
            })
            .collect();
        let weights = WeightModel {
            kind: WeightKind::Demand,
            weights,
        };
        Self::new(customers, sites, p, distances, weights, Vec::new())
    }

    /// Same data with a different number of facilities and fixed prefix.
    pub fn with_p(&self, p: usize, fixed_sites: Vec<usize>) -> Result<Self> {
        Self::new(
            self.customers.clone(),
            self.sites.clone(),
            p,
            self.distances.clone(),
            self.weights.clone(),
            fixed_sites,
        )
    }

    pub fn with_weights(&self, weights: WeightModel<T>) -> Result<Self> {
        Self::new(
            self.customers.clone(),
            self.sites.clone(),
            self.p,
            self.distances.clone(),
            weights,
            self.fixed_sites.clone(),
        )
    }

    #[inline]
    pub fn n_customers(&self) -> usize {
        self.customers.len()
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn customers(&self) -> &[Customer] {
        &self.customers
    }

    pub fn sites(&self) -> &[CandidateSite] {
        &self.sites
    }

    #[inline]
    pub fn distances(&self) -> &DistanceMatrix<T> {
        &self.distances
    }

    pub fn distances_arc(&self) -> &Arc<DistanceMatrix<T>> {
        &self.distances
    }

    #[inline]
    pub fn distance(&self, customer: usize, site: usize) -> T {
        self.distances.get(customer, site)
    }

    pub fn distance_kind(&self) -> DistanceKind {
        self.distances.kind()
    }

    pub fn weight_model(&self) -> &WeightModel<T> {
        &self.weights
    }

    #[inline]
    pub fn weights(&self) -> &[T] {
        &self.weights.weights
    }

    /// Site indices every solution must start with.
    pub fn fixed_sites(&self) -> &[usize] {
        &self.fixed_sites
    }

    pub fn projection(&self) -> &Projection {
        &self.projection
    }

    pub fn customer_points(&self) -> &[Point] {
        &self.customer_points
    }

    pub fn site_points(&self) -> &[Point] {
        &self.site_points
    }

    pub fn site_index(&self, id: i64) -> Option<usize> {
        self.site_index.get(&id).copied()
    }

    /// Map site ids to indices, failing on the first unknown id.
    pub fn site_indices(&self, ids: &[i64]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|&id| {
                self.site_index(id)
                    .ok_or_else(|| Error::InvalidSolution(format!("unknown site id {id}")))
            })
            .collect()
    }
}

fn check_coords(what: &str, id: i64, lat: f64, lon: f64) -> Result<()> {
    if !(lat.is_finite() && lon.is_finite() && (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)) {
        return Err(Error::Validation(format!("{what} {id} has invalid coordinates ({lat}, {lon})")));
    }
    Ok(())
}
