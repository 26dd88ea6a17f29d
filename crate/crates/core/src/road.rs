//! Road model: a directed network with per-segment transportation cost and
//! travel time, plus the geometric fallback used when trips are given as GPS
//! points instead of junction ids.
//!
//! Routes between waypoints are always selected by minimum *cost*; the travel
//! time of the chosen route is what feasibility checks consume. Ties between
//! equal-cost routes break on the lexicographically smallest junction
//! sequence, which makes every query deterministic.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, BTreeMap};

use serde::{Deserialize, Serialize};

use crate::{Error, Result, EPS, MAX_COST};

/// Junction identifiers are opaque strings.
pub type JunctionId = String;

/// Routing objective for shortest-path queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathObjective {
    MinCost,
    MinTime,
}

/// Answer to a shortest-path query: the walk and its summed weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathResult {
    pub waypoints: Vec<JunctionId>,
    pub cost: f64,
    pub travel_time_s: f64,
}

/// One road segment of the directed network.
#[derive(Debug, Clone)]
struct Segment {
    to: usize,
    cost: f64,
    travel_time_s: f64,
}

/// Directed road network. Junctions are interned in ascending name order so
/// index comparisons coincide with identifier comparisons.
///
/// Read-only after construction; queries may run concurrently.
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    names: Vec<JunctionId>,
    index: BTreeMap<JunctionId, usize>,
    adjacency: Vec<Vec<Segment>>,
}

impl RoadNetwork {
    /// Build a network from `(from, to, cost, travel_time_s)` segments.
    /// Junctions are declared implicitly by the segment endpoints.
    ///
    /// Rejects negative costs, non-positive travel times, self-loop segments,
    /// and cost magnitudes beyond [`MAX_COST`]. Parallel segments are kept.
    pub fn from_segments<S: AsRef<str>>(segments: &[(S, S, f64, f64)]) -> Result<Self> {
        let mut index: BTreeMap<JunctionId, usize> = BTreeMap::new();
        for (from, to, _, _) in segments {
            index.insert(from.as_ref().to_string(), 0);
            index.insert(to.as_ref().to_string(), 0);
        }
        let names: Vec<JunctionId> = index.keys().cloned().collect();
        for (i, name) in names.iter().enumerate() {
            *index.get_mut(name).expect("interned") = i;
        }

        let mut adjacency = vec![Vec::new(); names.len()];
        for (from, to, cost, time) in segments {
            let (from, to) = (from.as_ref(), to.as_ref());
            if from == to {
                return Err(Error::input(format!("self-loop segment at junction {from}")));
            }
            if !cost.is_finite() || *cost < 0.0 || *cost > MAX_COST {
                return Err(Error::input(format!(
                    "segment {from} -> {to} has invalid cost {cost}"
                )));
            }
            if !time.is_finite() || *time <= 0.0 {
                return Err(Error::input(format!(
                    "segment {from} -> {to} has non-positive travel time {time}"
                )));
            }
            adjacency[index[from]].push(Segment {
                to: index[to],
                cost: *cost,
                travel_time_s: *time,
            });
        }
        Ok(RoadNetwork { names, index, adjacency })
    }

    pub fn junction_count(&self) -> usize {
        self.names.len()
    }

    pub fn contains(&self, junction: &str) -> bool {
        self.index.contains_key(junction)
    }

    fn resolve(&self, junction: &str) -> Result<usize> {
        self.index
            .get(junction)
            .copied()
            .ok_or_else(|| Error::input(format!("unknown junction identifier {junction:?}")))
    }

    /// Minimum-objective walk from `from` to `to`, or `None` if unreachable.
    ///
    /// `from == to` yields the empty walk with cost 0 and time 0. Equal-weight
    /// routes tie-break on the lexicographically smallest junction sequence.
    pub fn shortest_path(
        &self,
        from: &str,
        to: &str,
        objective: PathObjective,
    ) -> Result<Option<PathResult>> {
        let source = self.resolve(from)?;
        let target = self.resolve(to)?;
        let mut rows = self.dijkstra_by(source, objective);
        Ok(rows.swap_remove(target).map(|p| self.to_result(p)))
    }

    /// Shortest-path table over every ordered pair of `terminals`.
    /// Unreachable pairs are absent from the table.
    pub fn all_pairs_costs<S: AsRef<str>>(
        &self,
        terminals: &[S],
        objective: PathObjective,
    ) -> Result<BTreeMap<(JunctionId, JunctionId), PathResult>> {
        let mut ids = Vec::with_capacity(terminals.len());
        for t in terminals {
            ids.push(self.resolve(t.as_ref())?);
        }
        ids.sort_unstable();
        ids.dedup();

        let mut table = BTreeMap::new();
        for &source in &ids {
            let rows = self.dijkstra_by(source, objective);
            for &target in &ids {
                if let Some(path) = &rows[target] {
                    table.insert(
                        (self.names[source].clone(), self.names[target].clone()),
                        self.to_result(path.clone()),
                    );
                }
            }
        }
        Ok(table)
    }

    fn to_result(&self, path: SearchPath) -> PathResult {
        PathResult {
            waypoints: path.nodes.iter().map(|&n| self.names[n].clone()).collect(),
            cost: path.cost,
            travel_time_s: path.travel_time_s,
        }
    }

    /// Single-source search keyed on `(weight, junction sequence)` so the
    /// settled path per node is the lexicographically smallest one among
    /// equal-weight optima.
    fn dijkstra_by(&self, source: usize, objective: PathObjective) -> Vec<Option<SearchPath>> {
        let mut settled: Vec<Option<SearchPath>> = vec![None; self.names.len()];
        let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
        heap.push(HeapEntry {
            key: 0.0,
            path: SearchPath { nodes: vec![source], cost: 0.0, travel_time_s: 0.0 },
        });
        while let Some(HeapEntry { key, path }) = heap.pop() {
            let node = *path.nodes.last().expect("non-empty path");
            if settled[node].is_some() {
                continue;
            }
            settled[node] = Some(path.clone());
            for seg in &self.adjacency[node] {
                if settled[seg.to].is_some() {
                    continue;
                }
                let weight = match objective {
                    PathObjective::MinCost => seg.cost,
                    PathObjective::MinTime => seg.travel_time_s,
                };
                let mut nodes = path.nodes.clone();
                nodes.push(seg.to);
                heap.push(HeapEntry {
                    key: key + weight,
                    path: SearchPath {
                        nodes,
                        cost: path.cost + seg.cost,
                        travel_time_s: path.travel_time_s + seg.travel_time_s,
                    },
                });
            }
        }
        settled
    }
}

#[derive(Debug, Clone)]
struct SearchPath {
    nodes: Vec<usize>,
    cost: f64,
    travel_time_s: f64,
}

/// Min-heap entry ordered by `(key, node sequence)`.
struct HeapEntry {
    key: f64,
    path: SearchPath,
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
        // BinaryHeap is a max-heap; reverse for min-first extraction.
        self.key
            .total_cmp(&other.key)
            .then_with(|| self.path.nodes.cmp(&other.path.nodes))
            .reverse()
    }
}

/// Great-circle distance in kilometres (haversine).
pub fn great_circle_km(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> f64 {
    const EARTH_RADIUS_KM: f64 = 6371.0088;
    let (phi1, phi2) = (lat1.to_radians(), lat2.to_radians());
    let dphi = (lat2 - lat1).to_radians();
    let dlambda = (lon2 - lon1).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().atan2((1.0 - a).sqrt())
}

/// A point registered on the geometric plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

/// Fallback "network" for dataset mode: the complete graph over registered
/// trip endpoints, with `cost = fare_base + fare_per_km * great-circle km`
/// and `time = distance / mean_speed` on every hop. The fare base applies to
/// each traversed leg.
#[derive(Debug, Clone)]
pub struct GeometricPlane {
    pub fare_base: f64,
    pub fare_per_km: f64,
    pub mean_speed_kmh: f64,
    points: BTreeMap<JunctionId, GeoPoint>,
}

impl GeometricPlane {
    pub fn new(fare_base: f64, fare_per_km: f64, mean_speed_kmh: f64) -> Result<Self> {
        if !(fare_base.is_finite() && fare_base >= 0.0 && fare_per_km.is_finite() && fare_per_km >= 0.0)
        {
            return Err(Error::input("fares must be finite and non-negative"));
        }
        if !(mean_speed_kmh.is_finite() && mean_speed_kmh > 0.0) {
            return Err(Error::input("mean speed must be positive"));
        }
        Ok(GeometricPlane {
            fare_base,
            fare_per_km,
            mean_speed_kmh,
            points: BTreeMap::new(),
        })
    }

    pub fn add_point(&mut self, id: impl Into<JunctionId>, lon: f64, lat: f64) -> Result<()> {
        if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::input(format!("coordinates ({lon}, {lat}) out of range")));
        }
        self.points.insert(id.into(), GeoPoint { lon, lat });
        Ok(())
    }

    pub fn point(&self, id: &str) -> Result<GeoPoint> {
        self.points
            .get(id)
            .copied()
            .ok_or_else(|| Error::input(format!("unknown junction identifier {id:?}")))
    }

    pub fn distance_km(&self, from: &str, to: &str) -> Result<f64> {
        let (a, b) = (self.point(from)?, self.point(to)?);
        Ok(great_circle_km(a.lon, a.lat, b.lon, b.lat))
    }

    fn leg(&self, from: &str, to: &str) -> Result<RouteLeg> {
        let km = self.distance_km(from, to)?;
        Ok(RouteLeg {
            from: from.to_string(),
            to: to.to_string(),
            cost: self.fare_base + self.fare_per_km * km,
            travel_time_s: km / self.mean_speed_kmh * 3600.0,
            distance: km,
            via: vec![from.to_string(), to.to_string()],
        })
    }
}

/// One leg of a planned ride: the chosen min-cost route between two
/// consecutive waypoints.
///
/// `distance` is in kilometres on the geometric plane and in cost units on a
/// road network (segments carry no geometric length there).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteLeg {
    pub from: JunctionId,
    pub to: JunctionId,
    pub cost: f64,
    pub travel_time_s: f64,
    pub distance: f64,
    pub via: Vec<JunctionId>,
}

/// Routing substrate for ride planning: an explicit road network, or the
/// geometric fallback when trips come as GPS records.
#[derive(Debug, Clone)]
pub enum Landscape {
    Network(RoadNetwork),
    Plane(GeometricPlane),
}

impl Landscape {
    /// Min-cost route between two registered locations, or `None` when
    /// unreachable. `from == to` yields a zero-length, zero-cost leg.
    pub fn route(&self, from: &str, to: &str) -> Result<Option<RouteLeg>> {
        if from == to {
            // Validate the identifier even for the trivial leg.
            match self {
                Landscape::Network(net) => {
                    net.resolve(from)?;
                }
                Landscape::Plane(plane) => {
                    plane.point(from)?;
                }
            }
            return Ok(Some(RouteLeg {
                from: from.to_string(),
                to: to.to_string(),
                cost: 0.0,
                travel_time_s: 0.0,
                distance: 0.0,
                via: vec![from.to_string()],
            }));
        }
        match self {
            Landscape::Network(net) => {
                Ok(net.shortest_path(from, to, PathObjective::MinCost)?.map(|p| RouteLeg {
                    from: from.to_string(),
                    to: to.to_string(),
                    cost: p.cost,
                    travel_time_s: p.travel_time_s,
                    distance: p.cost,
                    via: p.waypoints,
                }))
            }
            Landscape::Plane(plane) => plane.leg(from, to).map(Some),
        }
    }

    /// Pickup separation between two locations: great-circle kilometres on
    /// the plane, the cheaper directed shortest-path cost on a network.
    /// `None` when neither direction is routable.
    pub fn separation(&self, a: &str, b: &str) -> Result<Option<f64>> {
        match self {
            Landscape::Plane(plane) => plane.distance_km(a, b).map(Some),
            Landscape::Network(net) => {
                let ab = net.shortest_path(a, b, PathObjective::MinCost)?.map(|p| p.cost);
                let ba = net.shortest_path(b, a, PathObjective::MinCost)?.map(|p| p.cost);
                Ok(match (ab, ba) {
                    (Some(x), Some(y)) => Some(x.min(y)),
                    (Some(x), None) | (None, Some(x)) => Some(x),
                    (None, None) => None,
                })
            }
        }
    }

    /// True when `cost` respects the ingestion magnitude cap.
    pub fn cost_in_range(cost: f64) -> bool {
        cost.is_finite() && cost.abs() <= MAX_COST + EPS
    }
}
