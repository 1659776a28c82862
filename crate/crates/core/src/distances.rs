//! Customer x site distance matrices.
//!
//! Two models are supported: straight-line distance on a local equirectangular
//! projection, and shortest walking distance over an undirected street graph.
//! Both produce a dense row-major [`DistanceMatrix`] in meters, which can be
//! cached on disk with [`save_matrix`] / [`load_matrix`].

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{CandidateSite, Customer};
use crate::scalar::Scalar;

/// Mean Earth radius used by the local projection. One degree of latitude maps
/// to `EARTH_RADIUS_M * pi / 180` ~ 111,195 m.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Euclidean,
    Graph,
}

impl DistanceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DistanceKind::Euclidean => "euclidean",
            DistanceKind::Graph => "graph",
        }
    }

    fn code(self) -> u8 {
        match self {
            DistanceKind::Euclidean => 0,
            DistanceKind::Graph => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DistanceKind::Euclidean),
            1 => Some(DistanceKind::Graph),
            _ => None,
        }
    }
}

impl std::str::FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euclidean" | "eucl" => Ok(DistanceKind::Euclidean),
            "graph" | "real" => Ok(DistanceKind::Graph),
            other => Err(Error::InvalidArgument(format!("unknown distance kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    #[inline]
    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    #[inline]
    pub fn dist2(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Equirectangular projection around a reference latitude/longitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    lat0: f64,
    lon0: f64,
    cos_lat0: f64,
}

impl Projection {
    pub fn centered(lat0: f64, lon0: f64) -> Self {
        Self {
            lat0,
            lon0,
            cos_lat0: lat0.to_radians().cos(),
        }
    }

    /// Projection centered at the arithmetic mean of the given coordinates.
    /// An empty iterator yields a projection at (0, 0).
    pub fn centroid_of(coords: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let (mut lat, mut lon, mut n) = (0.0, 0.0, 0usize);
        for (a, b) in coords {
            lat += a;
            lon += b;
            n += 1;
        }
        if n == 0 {
            return Self::centered(0.0, 0.0);
        }
        Self::centered(lat / n as f64, lon / n as f64)
    }

    /// Projection centered at the joint centroid of customers and sites.
    pub fn for_instance(customers: &[Customer], sites: &[CandidateSite]) -> Self {
        Self::centroid_of(
            customers
                .iter()
                .map(|c| (c.lat, c.lon))
                .chain(sites.iter().map(|s| (s.lat, s.lon))),
        )
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.lat0, self.lon0)
    }

    #[inline]
    pub fn project(&self, lat: f64, lon: f64) -> Point {
        let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        Point {
            x: k * self.cos_lat0 * (lon - self.lon0),
            y: k * (lat - self.lat0),
        }
    }

    #[inline]
    pub fn distance(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        self.project(a.0, a.1).dist(self.project(b.0, b.1))
    }
}

/// Dense row-major matrix of customer x site distances in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<T: Scalar = f64> {
    rows: usize,
    cols: usize,
    kind: DistanceKind,
    values: Vec<T>,
}

impl<T: Scalar> DistanceMatrix<T> {
    pub fn from_values(rows: usize, cols: usize, kind: DistanceKind, values: Vec<T>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Validation(format!(
                "distance matrix has {} entries, expected {rows}x{cols}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::Validation(format!(
                "distance ({}, {}) is {} (must be finite and non-negative)",
                pos / cols.max(1),
                pos % cols.max(1),
                values[pos]
            )));
        }
        Ok(Self {
            rows,
            cols,
            kind,
            values,
        })
    }

    /// Convenience constructor from nested rows (mostly for tests).
    pub fn from_rows(kind: DistanceKind, rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Validation("ragged distance rows".into()));
        }
        let values = rows.iter().flatten().map(|&v| T::from_f64_lossy(v)).collect();
        Self::from_values(rows.len(), cols, kind, values)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    #[inline]
    pub fn get(&self, customer: usize, site: usize) -> T {
        self.values[customer * self.cols + site]
    }

    #[inline]
    pub fn row(&self, customer: usize) -> &[T] {
        &self.values[customer * self.cols..(customer + 1) * self.cols]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn cast<U: Scalar>(&self) -> DistanceMatrix<U> {
        DistanceMatrix {
            rows: self.rows,
            cols: self.cols,
            kind: self.kind,
            values: self.values.iter().map(|v| U::from_f64_lossy(v.to_f64_lossy())).collect(),
        }
    }
}

/// Straight-line distances on the equirectangular projection centered at the
/// joint centroid of `customers` and `sites`.
pub fn euclidean_matrix<T: Scalar>(customers: &[Customer], sites: &[CandidateSite]) -> DistanceMatrix<T> {
    euclidean_matrix_with(&Projection::for_instance(customers, sites), customers, sites)
}

pub fn euclidean_matrix_with<T: Scalar>(
    projection: &Projection,
    customers: &[Customer],
    sites: &[CandidateSite],
) -> DistanceMatrix<T> {
    let site_points: Vec<Point> = sites.iter().map(|s| projection.project(s.lat, s.lon)).collect();
    let mut values = Vec::with_capacity(customers.len() * sites.len());
    for c in customers {
        let cp = projection.project(c.lat, c.lon);
        values.extend(site_points.iter().map(|sp| T::from_f64_lossy(cp.dist(*sp))));
    }
    DistanceMatrix {
        rows: customers.len(),
        cols: sites.len(),
        kind: DistanceKind::Euclidean,
        values,
    }
}

/// Undirected street graph with positive edge lengths.
///
/// Nodes are indexed in ascending id order, so index order equals id order and
/// Dijkstra's node tie-break is a tie-break on node id.
#[derive(Debug, Clone)]
pub struct StreetGraph {
    ids: Vec<u64>,
    index: HashMap<u64, usize>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    lengths: Vec<f64>,
    edge_count: usize,
}

impl StreetGraph {
    pub fn from_edges(edges: impl IntoIterator<Item = (u64, u64, f64)>) -> Result<Self> {
        let edges: Vec<(u64, u64, f64)> = edges.into_iter().collect();
        let mut nodes: BTreeMap<u64, usize> = BTreeMap::new();
        for &(u, v, len) in &edges {
            if u == v {
                return Err(Error::Validation(format!("self-loop on node {u}")));
            }
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) has length {len}; lengths must be positive"
                )));
            }
            nodes.insert(u, 0);
            nodes.insert(v, 0);
        }
        let ids: Vec<u64> = nodes.keys().copied().collect();
        let index: HashMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

        let mut degree = vec![0usize; ids.len()];
        for &(u, v, _) in &edges {
            degree[index[&u]] += 1;
            degree[index[&v]] += 1;
        }
        let mut offsets = vec![0usize; ids.len() + 1];
        for i in 0..ids.len() {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0usize; offsets[ids.len()]];
        let mut lengths = vec![0.0; offsets[ids.len()]];
        for &(u, v, len) in &edges {
            let (a, b) = (index[&u], index[&v]);
            targets[fill[a]] = b;
            lengths[fill[a]] = len;
            fill[a] += 1;
            targets[fill[b]] = a;
            lengths[fill[b]] = len;
            fill[b] += 1;
        }
        // Sort each adjacency list so traversal does not depend on edge insertion order.
        for n in 0..ids.len() {
            let range = offsets[n]..offsets[n + 1];
            let mut adj: Vec<(usize, f64)> = range.clone().map(|k| (targets[k], lengths[k])).collect();
            adj.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
            for (k, (t, l)) in range.zip(adj) {
                targets[k] = t;
                lengths[k] = l;
            }
        }
        Ok(Self {
            ids,
            index,
            offsets,
            targets,
            lengths,
            edge_count: edges.len(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn contains(&self, node: u64) -> bool {
        self.index.contains_key(&node)
    }

    pub fn node_ids(&self) -> &[u64] {
        &self.ids
    }

    /// Single-source shortest path lengths from `source` to every node, indexed
    /// like [`node_ids`](Self::node_ids). Unreachable nodes are `+inf`.
    pub fn shortest_paths(&self, source: u64) -> Result<Vec<f64>> {
        let s = *self
            .index
            .get(&source)
            .ok_or_else(|| Error::Validation(format!("node {source} is not in the street graph")))?;
        Ok(self.dijkstra(s))
    }

    fn dijkstra(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.ids.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(HeapEntry { dist: 0.0, node: source });
        while let Some(HeapEntry { dist: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for k in self.offsets[node]..self.offsets[node + 1] {
                let next = self.targets[k];
                let nd = d + self.lengths[k];
                if nd < dist[next] {
                    dist[next] = nd;
                    heap.push(HeapEntry { dist: nd, node: next });
                }
            }
        }
        dist
    }
}

/// Min-heap entry ordered by distance, then by node index.
#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Shortest-path distances from each customer's anchor node to each site's
/// anchor node, one Dijkstra per distinct customer node.
pub fn graph_matrix<T: Scalar>(
    graph: &StreetGraph,
    customers: &[Customer],
    sites: &[CandidateSite],
) -> Result<DistanceMatrix<T>> {
    let anchor = |node: Option<u64>, what: &str, id: i64| -> Result<usize> {
        let node = node.ok_or_else(|| Error::Validation(format!("{what} {id} has no graph_node")))?;
        graph
            .index
            .get(&node)
            .copied()
            .ok_or_else(|| Error::Validation(format!("{what} {id} anchors to unknown node {node}")))
    };
    let customer_nodes = customers
        .iter()
        .map(|c| anchor(c.graph_node, "customer", c.id))
        .collect::<Result<Vec<_>>>()?;
    let site_nodes = sites
        .iter()
        .map(|s| anchor(s.graph_node, "site", s.id))
        .collect::<Result<Vec<_>>>()?;

    let mut sources = customer_nodes.clone();
    sources.sort_unstable();
    sources.dedup();
    let rows: HashMap<usize, Vec<f64>> = sources
        .par_iter()
        .map(|&src| {
            let all = graph.dijkstra(src);
            (src, site_nodes.iter().map(|&t| all[t]).collect())
        })
        .collect();

    let mut values = Vec::with_capacity(customers.len() * sites.len());
    for &src in &customer_nodes {
        let row = &rows[&src];
        for (j, &d) in row.iter().enumerate() {
            if !d.is_finite() {
                return Err(Error::Unreachable {
                    from: graph.ids[src],
                    to: graph.ids[site_nodes[j]],
                });
            }
            values.push(T::from_f64_lossy(d));
        }
    }
    Ok(DistanceMatrix {
        rows: customers.len(),
        cols: sites.len(),
        kind: DistanceKind::Graph,
        values,
    })
}

const MAGIC: &[u8; 4] = b"PMED";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 1 + 8 + 8;

/// Serialize a matrix to the cache format: `PMED`, u16 version, u8 kind,
/// u8 reserved, u64 rows, u64 cols, row-major f64 values, CRC32 of all
/// preceding bytes. All integers and floats little-endian.
pub fn encode_matrix<T: Scalar>(m: &DistanceMatrix<T>) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + m.values.len() * 8 + 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(m.kind.code());
    buf.push(0);
    buf.extend_from_slice(&(m.rows as u64).to_le_bytes());
    buf.extend_from_slice(&(m.cols as u64).to_le_bytes());
    for v in &m.values {
        buf.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

pub fn decode_matrix<T: Scalar>(bytes: &[u8]) -> Result<DistanceMatrix<T>> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::CacheFormat(format!("file is only {} bytes", bytes.len())));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4-byte tail"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    if &body[..4] != MAGIC {
        return Err(Error::CacheFormat("bad magic".into()));
    }
    let version = u16::from_le_bytes([body[4], body[5]]);
    if version != VERSION {
        return Err(Error::CacheFormat(format!("unsupported version {version}")));
    }
    let kind = DistanceKind::from_code(body[6])
        .ok_or_else(|| Error::CacheFormat(format!("unknown distance kind code {}", body[6])))?;
    let rows = u64::from_le_bytes(body[8..16].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(body[16..24].try_into().expect("8 bytes")) as usize;
    let payload = &body[HEADER_LEN..];
    if rows.checked_mul(cols).and_then(|n| n.checked_mul(8)) != Some(payload.len()) {
        return Err(Error::CacheFormat(format!(
            "payload of {} bytes does not hold {rows}x{cols} values",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| T::from_f64_lossy(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
        .collect();
    DistanceMatrix::from_values(rows, cols, kind, values)
}

pub fn save_matrix<T: Scalar>(m: &DistanceMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("tmp");
    let bytes = encode_matrix(m);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_matrix<T: Scalar>(path: impl AsRef<Path>) -> Result<DistanceMatrix<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&bytes)
}

/// Load a cached matrix and check it against the expected instance shape.
pub fn load_matrix_checked<T: Scalar>(
    path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
) -> Result<DistanceMatrix<T>> {
    let m = load_matrix(path)?;
    if m.rows != rows || m.cols != cols {
        return Err(Error::Dimension {
            rows,
            cols,
            found_rows: m.rows,
            found_cols: m.cols,
        });
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn customer(id: i64, lat: f64, lon: f64, node: Option<u64>) -> Customer {
        Customer {
            id,
            lat,
            lon,
            population: 1,
            graph_node: node,
        }
    }

    fn site(id: i64, lat: f64, lon: f64, node: Option<u64>) -> CandidateSite {
        CandidateSite {
            id,
            lat,
            lon,
            graph_node: node,
        }
    }

    #[test]
    fn coincident_points_are_zero() {
        let m: DistanceMatrix = euclidean_matrix(&[customer(0, 36.7, -4.4, None)], &[site(0, 36.7, -4.4, None)]);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn thousandth_degree_latitude() {
        let m: DistanceMatrix =
            euclidean_matrix(&[customer(0, 36.7200, -4.42, None)], &[site(0, 36.7210, -4.42, None)]);
        let expected = EARTH_RADIUS_M * std::f64::consts::PI / 180.0 * 0.001;
        assert!((m.get(0, 0) - expected).abs() < 1e-9);
        assert!((m.get(0, 0) - 111.2).abs() < 0.01);
    }

    #[test]
    fn euclidean_is_symmetric() {
        let pts = [(36.70, -4.40), (36.71, -4.43), (36.73, -4.41)];
        let cs: Vec<_> = pts.iter().enumerate().map(|(i, p)| customer(i as i64, p.0, p.1, None)).collect();
        let ss: Vec<_> = pts.iter().enumerate().map(|(i, p)| site(i as i64, p.0, p.1, None)).collect();
        let m: DistanceMatrix = euclidean_matrix(&cs, &ss);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
    }

    #[test]
    fn path_graph() {
        let g = StreetGraph::from_edges([(1, 2, 3.0), (2, 3, 4.0)]).unwrap();
        let m: DistanceMatrix =
            graph_matrix(&g, &[customer(0, 0.0, 0.0, Some(1))], &[site(0, 0.0, 0.0, Some(3)), site(1, 0.0, 0.0, Some(1))])
                .unwrap();
        assert_eq!(m.get(0, 0), 7.0);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn unreachable_pair_is_named() {
        let g = StreetGraph::from_edges([(1, 2, 3.0), (5, 6, 1.0)]).unwrap();
        let err = graph_matrix::<f64>(&g, &[customer(0, 0.0, 0.0, Some(1))], &[site(0, 0.0, 0.0, Some(6))])
            .unwrap_err();
        assert!(matches!(err, Error::Unreachable { from: 1, to: 6 }), "{err}");
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(StreetGraph::from_edges([(1, 1, 3.0)]).is_err());
        assert!(StreetGraph::from_edges([(1, 2, 0.0)]).is_err());
        assert!(StreetGraph::from_edges([(1, 2, -1.0)]).is_err());
    }

    #[test]
    fn missing_anchor_is_an_error() {
        let g = StreetGraph::from_edges([(1, 2, 3.0)]).unwrap();
        assert!(graph_matrix::<f64>(&g, &[customer(0, 0.0, 0.0, None)], &[site(0, 0.0, 0.0, Some(1))]).is_err());
        assert!(graph_matrix::<f64>(&g, &[customer(0, 0.0, 0.0, Some(9))], &[site(0, 0.0, 0.0, Some(1))]).is_err());
    }

    #[test]
    fn cache_round_trip_and_corruption() {
        let m = DistanceMatrix::<f64>::from_rows(DistanceKind::Graph, &[vec![1.5, 0.1], vec![3.0, 1e-300]]).unwrap();
        let bytes = encode_matrix(&m);
        let back: DistanceMatrix = decode_matrix(&bytes).unwrap();
        assert_eq!(back, m);

        let truncated = &bytes[..bytes.len() - 3];
        assert!(matches!(decode_matrix::<f64>(truncated), Err(Error::Checksum { .. })));

        let mut flipped = bytes.clone();
        flipped[HEADER_LEN + 2] ^= 0x40;
        assert!(matches!(decode_matrix::<f64>(&flipped), Err(Error::Checksum { .. })));
    }

    #[test]
    fn cache_dimension_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let m = DistanceMatrix::<f64>::from_rows(DistanceKind::Euclidean, &[vec![1.0, 2.0]]).unwrap();
        save_matrix(&m, &path).unwrap();
        assert!(load_matrix_checked::<f64>(&path, 1, 2).is_ok());
        assert!(matches!(load_matrix_checked::<f64>(&path, 2, 2), Err(Error::Dimension { .. })));
    }
}
