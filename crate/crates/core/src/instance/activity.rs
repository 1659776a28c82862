use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Customer, WeightKind, WeightModel};
use crate::distances::Projection;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One occupancy sample of a docking station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityRow {
    pub station_id: i64,
    pub lat: f64,
    pub lon: f64,
    pub timestamp: i64,
    pub occupied: u32,
    pub slots: u32,
}

/// Occupancy samples of the existing stations, used to estimate demand.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StationActivityLog {
    rows: Vec<ActivityRow>,
}

impl StationActivityLog {
    pub fn new(rows: Vec<ActivityRow>) -> Result<Self> {
        let mut coords: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
        for r in &rows {
            if r.slots == 0 {
                return Err(Error::Validation(format!(
                    "station {} has a sample with zero slots",
                    r.station_id
                )));
            }
            if r.occupied > r.slots {
                return Err(Error::Validation(format!(
                    "station {} reports {} occupied of {} slots",
                    r.station_id, r.occupied, r.slots
                )));
            }
            match coords.get(&r.station_id) {
                Some(&(lat, lon)) if lat != r.lat || lon != r.lon => {
                    return Err(Error::Validation(format!(
                        "station {} has inconsistent coordinates",
                        r.station_id
                    )));
                }
                Some(_) => {}
                None => {
                    coords.insert(r.station_id, (r.lat, r.lon));
                }
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[ActivityRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Station coordinates, keyed (and therefore ordered) by station id.
    pub fn stations(&self) -> BTreeMap<i64, (f64, f64)> {
        self.rows.iter().map(|r| (r.station_id, (r.lat, r.lon))).collect()
    }
}

/// `mean(occupied) / mean(slots)` over every sample of `station_id`.
pub fn station_activity(log: &StationActivityLog, station_id: i64) -> Result<f64> {
    let (mut occupied, mut slots, mut n) = (0u64, 0u64, 0u64);
    for r in log.rows.iter().filter(|r| r.station_id == station_id) {
        occupied += u64::from(r.occupied);
        slots += u64::from(r.slots);
        n += 1;
    }
    if n == 0 {
        return Err(Error::UnknownStation(station_id));
    }
    // Both means share the sample count.
    Ok(occupied as f64 / slots as f64)
}

/// Demand weights `population_i * activity(nearest station)` using a
/// projection centered on customers and stations together.
pub fn derive_demand_weights<T: Scalar>(customers: &[Customer], log: &StationActivityLog) -> Result<WeightModel<T>> {
    let stations = log.stations();
    let projection = Projection::centroid_of(
        customers
            .iter()
            .map(|c| (c.lat, c.lon))
            .chain(stations.values().copied()),
    );
    derive_demand_weights_with(&projection, customers, log)
}

/// As [`derive_demand_weights`] with an explicit projection. Equidistant
/// stations resolve to the lowest station id.
pub fn derive_demand_weights_with<T: Scalar>(
    projection: &Projection,
    customers: &[Customer],
    log: &StationActivityLog,
) -> Result<WeightModel<T>> {
    if log.is_empty() {
        return Err(Error::Empty("station activity log"));
    }
    // Stations in id order, so the first of equidistant stations has the lowest id.
    let stations = log.stations();
    let activity: Vec<f64> = stations
        .keys()
        .map(|&id| station_activity(log, id))
        .collect::<Result<_>>()?;
    let points: Vec<_> = stations
        .values()
        .map(|&(lat, lon)| projection.project(lat, lon))
        .collect();

    let weights = customers
        .iter()
        .map(|c| {
            let cp = projection.project(c.lat, c.lon);
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            // Strict comparison keeps the first (lowest id) of equidistant stations.
            for (k, sp) in points.iter().enumerate() {
                let d = cp.dist2(*sp);
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            T::from_f64_lossy(c.population as f64 * activity[best])
        })
        .collect();
    let model = WeightModel::demand(weights)?;
    debug_assert_eq!(model.kind(), WeightKind::Demand);
    Ok(model)
}
