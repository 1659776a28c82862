//! Directory-based instance format.
//!
//! ```text
//! customers.csv   id,lat,lon,population,graph_node
//! sites.csv       id,lat,lon,graph_node
//! graph.csv       u,v,length_m                      (optional)
//! meta.json       {"p", "distance", "weight", "fixed_sites"}
//! activity.csv    station_id,lat,lon,timestamp,occupied,slots  (optional)
//! baseline.txt    one site id per line               (optional)
//! distances.bin   cached distance matrix             (optional)
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    derive_demand_weights_with, ActivityRow, CandidateSite, Customer, DistanceKind, Instance, StationActivityLog,
    WeightKind, WeightModel,
};
use crate::distances::{euclidean_matrix_with, graph_matrix, load_matrix, DistanceMatrix, Projection, StreetGraph};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// File name the loader checks for a precomputed distance matrix.
pub const DISTANCE_CACHE_FILE: &str = "distances.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub p: usize,
    pub distance: DistanceKind,
    pub weight: WeightKind,
    #[serde(default)]
    pub fixed_sites: Vec<i64>,
}

#[derive(Debug, Deserialize)]
struct CustomerRecord {
    id: i64,
    lat: f64,
    lon: f64,
    population: i64,
    graph_node: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct EdgeRecord {
    u: u64,
    v: u64,
    length_m: f64,
}

/// Raw instance data as stored on disk, before a distance model and a weight
/// model have been chosen.
#[derive(Debug, Clone)]
pub struct InstanceData {
    pub customers: Arc<Vec<Customer>>,
    pub sites: Arc<Vec<CandidateSite>>,
    pub edges: Option<Vec<(u64, u64, f64)>>,
    pub meta: Meta,
    pub activity: Option<StationActivityLog>,
    pub baseline: Option<Vec<i64>>,
    pub dir: Option<PathBuf>,
}

fn read_csv<R: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<R>> {
    let name = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::parse(&name, format!("{other:?}")),
        })?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::parse(&name, e)))
        .collect()
}

fn check_header(path: &Path, expected: &[&str]) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: Vec<String> = text
        .lines()
        .next()
        .unwrap_or("")
        .trim_start_matches('\u{feff}')
        .split(',')
        .map(|h| h.trim().to_string())
        .collect();
    if header != expected {
        return Err(Error::parse(
            path.display().to_string(),
            format!("header is `{}`, expected `{}`", header.join(","), expected.join(",")),
        ));
    }
    Ok(())
}

impl InstanceData {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();

        let customers_path = dir.join("customers.csv");
        check_header(&customers_path, &["id", "lat", "lon", "population", "graph_node"])?;
        let mut customers = read_csv::<CustomerRecord>(&customers_path)?
            .into_iter()
            .map(|r| {
                if r.population < 0 {
                    return Err(Error::Validation(format!(
                        "customer {} has negative population {}",
                        r.id, r.population
                    )));
                }
                Ok(Customer {
                    id: r.id,
                    lat: r.lat,
                    lon: r.lon,
                    population: r.population as u64,
                    graph_node: r.graph_node,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let sites_path = dir.join("sites.csv");
        check_header(&sites_path, &["id", "lat", "lon", "graph_node"])?;
        let mut sites: Vec<CandidateSite> = read_csv(&sites_path)?;

        // Index order is id order throughout the solver.
        customers.sort_by_key(|c| c.id);
        sites.sort_by_key(|s| s.id);

        let meta_path = dir.join("meta.json");
        let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: Meta = serde_json::from_str(&meta_text).map_err(|e| Error::parse("meta.json", e))?;

        let graph_path = dir.join("graph.csv");
        let edges = if graph_path.exists() {
            check_header(&graph_path, &["u", "v", "length_m"])?;
            Some(
                read_csv::<EdgeRecord>(&graph_path)?
                    .into_iter()
                    .map(|e| (e.u, e.v, e.length_m))
                    .collect(),
            )
        } else {
            None
        };

        let activity_path = dir.join("activity.csv");
        let activity = if activity_path.exists() {
            check_header(
                &activity_path,
                &["station_id", "lat", "lon", "timestamp", "occupied", "slots"],
            )?;
            Some(StationActivityLog::new(read_csv::<ActivityRow>(&activity_path)?)?)
        } else {
            None
        };

        let baseline_path = dir.join("baseline.txt");
        let baseline = if baseline_path.exists() {
            Some(read_site_list(&baseline_path)?)
        } else {
            None
        };

        let data = Self {
            customers: Arc::new(customers),
            sites: Arc::new(sites),
            edges,
            meta,
            activity,
            baseline,
            dir: Some(dir.to_path_buf()),
        };
        data.validate()?;
        Ok(data)
    }

    fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for c in self.customers.iter() {
            if !ids.insert(c.id) {
                return Err(Error::Validation(format!("duplicate customer id {}", c.id)));
            }
        }
        let mut site_ids = HashSet::new();
        for s in self.sites.iter() {
            if !site_ids.insert(s.id) {
                return Err(Error::Validation(format!("duplicate site id {}", s.id)));
            }
        }
        if self.meta.p < 1 || self.meta.p > self.sites.len() {
            return Err(Error::Validation(format!(
                "p = {} outside [1, {}]",
                self.meta.p,
                self.sites.len()
            )));
        }
        if self.meta.fixed_sites.len() > self.meta.p {
            return Err(Error::Validation("more fixed sites than p".into()));
        }
        for list in [Some(&self.meta.fixed_sites), self.baseline.as_ref()].into_iter().flatten() {
            let mut seen = HashSet::new();
            for id in list {
                if !site_ids.contains(id) {
                    return Err(Error::Validation(format!("unknown site id {id}")));
                }
                if !seen.insert(id) {
                    return Err(Error::Validation(format!("site id {id} listed twice")));
                }
            }
        }
        Ok(())
    }

    pub fn projection(&self) -> Projection {
        Projection::for_instance(&self.customers, &self.sites)
    }

    pub fn graph(&self) -> Result<Option<StreetGraph>> {
        self.edges
            .as_ref()
            .map(|e| StreetGraph::from_edges(e.iter().copied()))
            .transpose()
    }

    fn cache_path(&self) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(DISTANCE_CACHE_FILE))
    }

    /// Compute the distance matrix of the requested kind, ignoring any cache.
    pub fn compute_distances<T: Scalar>(&self, kind: DistanceKind) -> Result<DistanceMatrix<T>> {
        match kind {
            DistanceKind::Euclidean => Ok(euclidean_matrix_with(&self.projection(), &self.customers, &self.sites)),
            DistanceKind::Graph => {
                let graph = self
                    .graph()?
                    .ok_or_else(|| Error::Validation("graph distances requested but graph.csv is missing".into()))?;
                graph_matrix(&graph, &self.customers, &self.sites)
            }
        }
    }

    /// Distance matrix of the requested kind, taken from `distances.bin` when
    /// the cache holds that kind, recomputed otherwise. A corrupt or
    /// mis-sized cache is an error rather than a silent recompute.
    pub fn distances<T: Scalar>(&self, kind: DistanceKind) -> Result<DistanceMatrix<T>> {
        if let Some(path) = self.cache_path().filter(|p| p.exists()) {
            let m: DistanceMatrix<T> = load_matrix(&path)?;
            if m.kind() == kind {
                if m.rows() != self.customers.len() || m.cols() != self.sites.len() {
                    return Err(Error::Dimension {
                        rows: self.customers.len(),
                        cols: self.sites.len(),
                        found_rows: m.rows(),
                        found_cols: m.cols(),
                    });
                }
                log::debug!("using cached {kind} distances from {}", path.display());
                return Ok(m);
            }
        }
        self.compute_distances(kind)
    }

    pub fn weight_model<T: Scalar>(&self, kind: WeightKind) -> Result<WeightModel<T>> {
        match kind {
            WeightKind::Uniform => Ok(WeightModel::uniform(self.customers.len())),
            WeightKind::Citizens => Ok(WeightModel::citizens(&self.customers)),
            WeightKind::Demand => {
                let log = self
                    .activity
                    .as_ref()
                    .ok_or_else(|| Error::Validation("demand weights require activity.csv".into()))?;
                derive_demand_weights_with(&self.projection(), &self.customers, log)
            }
        }
    }

    fn indices_of(&self, ids: &[i64]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| {
                self.sites
                    .binary_search_by_key(id, |s| s.id)
                    .map_err(|_| Error::Validation(format!("unknown site id {id}")))
            })
            .collect()
    }

    /// Build an instance over a shared distance matrix.
    pub fn instance_with<T: Scalar>(
        &self,
        distances: Arc<DistanceMatrix<T>>,
        weight: WeightKind,
    ) -> Result<Instance<T>> {
        let fixed = self.indices_of(&self.meta.fixed_sites)?;
        Instance::new(
            self.customers.clone(),
            self.sites.clone(),
            self.meta.p,
            distances,
            self.weight_model(weight)?,
            fixed,
        )
    }

    pub fn instance<T: Scalar>(&self, distance: DistanceKind, weight: WeightKind) -> Result<Instance<T>> {
        self.instance_with(Arc::new(self.distances(distance)?), weight)
    }

    /// Instance for the scenario named in `meta.json`.
    pub fn default_instance<T: Scalar>(&self) -> Result<Instance<T>> {
        self.instance(self.meta.distance, self.meta.weight)
    }

    /// Baseline deployment as site indices.
    pub fn baseline_indices(&self) -> Result<Option<Vec<usize>>> {
        self.baseline.as_deref().map(|b| self.indices_of(b)).transpose()
    }

    /// Write every file of the instance format into `dir` (created if needed).
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let opt = |n: Option<u64>| n.map(|v| v.to_string()).unwrap_or_default();

        let mut s = String::from("id,lat,lon,population,graph_node\n");
        for c in self.customers.iter() {
            let _ = writeln!(s, "{},{},{},{},{}", c.id, c.lat, c.lon, c.population, opt(c.graph_node));
        }
        write_file(&dir.join("customers.csv"), &s)?;

        let mut s = String::from("id,lat,lon,graph_node\n");
        for site in self.sites.iter() {
            let _ = writeln!(s, "{},{},{},{}", site.id, site.lat, site.lon, opt(site.graph_node));
        }
        write_file(&dir.join("sites.csv"), &s)?;

        if let Some(edges) = &self.edges {
            let mut s = String::from("u,v,length_m\n");
            for (u, v, l) in edges {
                let _ = writeln!(s, "{u},{v},{l}");
            }
            write_file(&dir.join("graph.csv"), &s)?;
        }

        let meta = serde_json::to_string_pretty(&self.meta).map_err(|e| Error::parse("meta.json", e))?;
        write_file(&dir.join("meta.json"), &(meta + "\n"))?;

        if let Some(log) = &self.activity {
            let mut s = String::from("station_id,lat,lon,timestamp,occupied,slots\n");
            for r in log.rows() {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    r.station_id, r.lat, r.lon, r.timestamp, r.occupied, r.slots
                );
            }
            write_file(&dir.join("activity.csv"), &s)?;
        }

        if let Some(baseline) = &self.baseline {
            write_file(&dir.join("baseline.txt"), &format_site_list(baseline))?;
        }
        Ok(())
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// One site id per line.
pub fn format_site_list(ids: &[i64]) -> String {
    let mut s = String::new();
    for id in ids {
        let _ = writeln!(s, "{id}");
    }
    s
}

/// Parse a file of site ids, one per line; blank lines and `#` comments are skipped.
pub fn read_site_list(path: &Path) -> Result<Vec<i64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<i64>()
                .map_err(|e| Error::parse(path.display().to_string(), format!("`{l}`: {e}")))
        })
        .collect()
}

/// Load the instance described by `meta.json` in `dir`.
pub fn load_instance<T: Scalar>(dir: impl AsRef<Path>) -> Result<Instance<T>> {
    InstanceData::load(dir)?.default_instance()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    fn minimal(dir: &Path, p: i64) {
        write(dir, "customers.csv", "id,lat,lon,population,graph_node\n1,36.7,-4.4,10,\n");
        write(dir, "sites.csv", "id,lat,lon,graph_node\n5,36.71,-4.4,\n");
        write(
            dir,
            "meta.json",
            &format!(r#"{{"p": {p}, "distance": "euclidean", "weight": "uniform", "fixed_sites": []}}"#),
        );
    }

    #[test]
    fn minimal_instance_loads() {
        let dir = tempfile::tempdir().unwrap();
        minimal(dir.path(), 1);
        let inst: Instance = load_instance(dir.path()).unwrap();
        assert_eq!(inst.n_customers(), 1);
        assert_eq!(inst.n_sites(), 1);
        assert_eq!(inst.p(), 1);
        assert!(inst.distance(0, 0) > 1000.0);
    }

    #[test]
    fn zero_p_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        minimal(dir.path(), 0);
        assert!(matches!(load_instance::<f64>(dir.path()), Err(Error::Validation(_))));
    }

    #[test]
    fn negative_population_and_duplicates_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        minimal(dir.path(), 1);
        write(dir.path(), "customers.csv", "id,lat,lon,population,graph_node\n1,36.7,-4.4,-3,\n");
        assert!(matches!(load_instance::<f64>(dir.path()), Err(Error::Validation(_))));
        write(
            dir.path(),
            "customers.csv",
            "id,lat,lon,population,graph_node\n1,36.7,-4.4,3,\n1,36.7,-4.3,3,\n",
        );
        assert!(matches!(load_instance::<f64>(dir.path()), Err(Error::Validation(_))));
    }

    #[test]
    fn malformed_files_are_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        minimal(dir.path(), 1);
        write(dir.path(), "sites.csv", "id,lat,lon,graph_node\nfive,36.71,-4.4,\n");
        assert!(matches!(load_instance::<f64>(dir.path()), Err(Error::Parse { .. })));
        write(dir.path(), "sites.csv", "id,latitude,lon,graph_node\n5,36.71,-4.4,\n");
        assert!(matches!(load_instance::<f64>(dir.path()), Err(Error::Parse { .. })));
    }

    #[test]
    fn graph_kind_without_graph_fails() {
        let dir = tempfile::tempdir().unwrap();
        minimal(dir.path(), 1);
        write(
            dir.path(),
            "meta.json",
            r#"{"p": 1, "distance": "graph", "weight": "uniform"}"#,
        );
        assert!(load_instance::<f64>(dir.path()).is_err());
    }
}
