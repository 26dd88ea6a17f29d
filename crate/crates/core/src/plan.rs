//! Ride planning: feasible shared rides for commuter pairs, minimum-cost
//! ride selection, and the matching graph over commuters.
//!
//! A shared ride for a pair is one vehicle route containing all four of their
//! endpoints in one of exactly four waypoint orders. Writing `(a;b)` for the
//! order in which `a`'s trip nests inside or leads `b`'s:
//!
//! * `(a;b)`-hitchhiking — `s_b, s_a, d_a, d_b` (`a` rides embedded in `b`)
//! * `(b;a)`-hitchhiking — `s_a, s_b, d_b, d_a`
//! * `(a;b)`-combined — `s_a, s_b, d_a, d_b` (on-board intervals interleave)
//! * `(b;a)`-combined — `s_b, s_a, d_b, d_a`
//!
//! Legs between consecutive waypoints are independent min-cost routes. The
//! schedule is a forward pass: the vehicle departs the first pickup at that
//! rider's earliest departure, may wait at the second pickup until that
//! rider's earliest departure, and never waits at drop-offs. A plan is kept
//! only if both riders reach their drop-off by their latest arrival.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::road::{JunctionId, Landscape, RouteLeg};
use crate::trip::{CommuterId, TripRequest};
use crate::{Error, Result, EPS};

/// Who rides where in a plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RideTopology {
    /// Single commuter, no partner.
    Standalone { owner: CommuterId },
    /// `embedded`'s whole trip is nested inside `host`'s on-board interval.
    Hitchhiking { embedded: CommuterId, host: CommuterId },
    /// `first` boards first and exits first; the on-board intervals interleave.
    Combined { first: CommuterId, second: CommuterId },
}

impl RideTopology {
    /// Participants in ascending id order.
    pub fn participants(&self) -> Vec<&CommuterId> {
        let mut ids = match self {
            RideTopology::Standalone { owner } => vec![owner],
            RideTopology::Hitchhiking { embedded, host } => vec![embedded, host],
            RideTopology::Combined { first, second } => vec![first, second],
        };
        ids.sort();
        ids
    }

    pub fn is_pair(&self) -> bool {
        !matches!(self, RideTopology::Standalone { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event", content = "commuter", rename_all = "snake_case")]
pub enum StopEvent {
    Pickup(CommuterId),
    Dropoff(CommuterId),
}

impl StopEvent {
    pub fn commuter(&self) -> &CommuterId {
        match self {
            StopEvent::Pickup(c) | StopEvent::Dropoff(c) => c,
        }
    }
}

/// A scheduled stop of the vehicle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanStop {
    pub junction: JunctionId,
    /// Arrival time at this stop, epoch seconds. Waiting for a rider is
    /// folded into the arrival time of their pickup stop.
    pub arrival_s: f64,
    pub event: StopEvent,
}

/// A fully scheduled ride serving one or two commuters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharedRidePlan {
    pub topology: RideTopology,
    /// Pickup/drop-off stops in visiting order. Identical consecutive
    /// junctions are kept as explicit stops joined by a zero-length leg, so
    /// the stop order is strict even when arrival times tie.
    pub stops: Vec<PlanStop>,
    /// `legs[k]` is the chosen route from `stops[k]` to `stops[k+1]`.
    pub legs: Vec<RouteLeg>,
    pub total_cost: f64,
    /// Per-commuter on-board distance (km on the geometric plane, cost units
    /// on a road network).
    pub rider_distances: BTreeMap<CommuterId, f64>,
}

impl SharedRidePlan {
    pub fn segment_costs(&self) -> Vec<f64> {
        self.legs.iter().map(|l| l.cost).collect()
    }

    pub fn stop_arrival(&self, event: &StopEvent) -> Option<f64> {
        self.stops.iter().find(|s| &s.event == event).map(|s| s.arrival_s)
    }

    /// Independent feasibility check against the riders' requests: all four
    /// endpoints appear on the route, arrival times are monotone (strictly
    /// increasing over positive-travel legs), each rider's window brackets
    /// their on-board interval, and the total cost is the sum of leg costs.
    pub fn check_feasibility(&self, trips: &[&TripRequest]) -> Result<()> {
        let fail = |msg: String| Err(Error::internal(format!("infeasible plan: {msg}")));

        let sum: f64 = self.legs.iter().map(|l| l.cost).sum();
        if (sum - self.total_cost).abs() > EPS {
            return fail(format!("total cost {} != leg sum {}", self.total_cost, sum));
        }
        if self.legs.len() + 1 != self.stops.len() {
            return fail("leg/stop count mismatch".to_string());
        }
        for (k, leg) in self.legs.iter().enumerate() {
            let (a, b) = (&self.stops[k], &self.stops[k + 1]);
            if leg.from != a.junction || leg.to != b.junction {
                return fail(format!("leg {k} does not join its stops"));
            }
            if b.arrival_s < a.arrival_s - EPS {
                return fail(format!("arrival times decrease at stop {}", k + 1));
            }
            if leg.travel_time_s > EPS && b.arrival_s <= a.arrival_s {
                return fail(format!("no time progress over positive leg {k}"));
            }
        }
        for trip in trips {
            let pickup = StopEvent::Pickup(trip.commuter_id.clone());
            let dropoff = StopEvent::Dropoff(trip.commuter_id.clone());
            let (t_pick, t_drop) = match (self.stop_arrival(&pickup), self.stop_arrival(&dropoff)) {
                (Some(p), Some(d)) => (p, d),
                _ => return fail(format!("rider {} missing a stop", trip.commuter_id)),
            };
            let pick_stop = self.stops.iter().find(|s| s.event == pickup).expect("present");
            let drop_stop = self.stops.iter().find(|s| s.event == dropoff).expect("present");
            if pick_stop.junction != trip.source || drop_stop.junction != trip.destination {
                return fail(format!("rider {} stops at wrong junctions", trip.commuter_id));
            }
            if t_pick < trip.earliest_departure_s - EPS {
                return fail(format!("rider {} picked up before earliest departure", trip.commuter_id));
            }
            if t_drop > trip.latest_arrival_s + EPS {
                return fail(format!("rider {} dropped off after latest arrival", trip.commuter_id));
            }
        }
        Ok(())
    }
}

/// Standalone minimum-cost ride for one commuter, departing at their earliest
/// departure. `None` when the destination is unreachable or the arrival
/// would miss the latest-arrival deadline.
pub fn plan_standalone(land: &Landscape, trip: &TripRequest) -> Result<Option<SharedRidePlan>> {
    let leg = match land.route(&trip.source, &trip.destination)? {
        Some(leg) => leg,
        None => return Ok(None),
    };
    let depart = trip.earliest_departure_s;
    let arrive = depart + leg.travel_time_s;
    if arrive > trip.latest_arrival_s + EPS {
        return Ok(None);
    }
    let owner = trip.commuter_id.clone();
    Ok(Some(SharedRidePlan {
        topology: RideTopology::Standalone { owner: owner.clone() },
        stops: vec![
            PlanStop {
                junction: trip.source.clone(),
                arrival_s: depart,
                event: StopEvent::Pickup(owner.clone()),
            },
            PlanStop {
                junction: trip.destination.clone(),
                arrival_s: arrive,
                event: StopEvent::Dropoff(owner.clone()),
            },
        ],
        rider_distances: BTreeMap::from([(owner.clone(), leg.distance)]),
        total_cost: leg.cost,
        legs: vec![leg],
    }))
}

/// The four waypoint orderings for a pair, in the canonical tie-break order.
fn pair_orderings<'t>(
    a: &'t TripRequest,
    b: &'t TripRequest,
) -> [(RideTopology, [(&'t JunctionId, StopEvent); 4]); 4] {
    let (ai, bi) = (a.commuter_id.clone(), b.commuter_id.clone());
    let pick = |t: &TripRequest| StopEvent::Pickup(t.commuter_id.clone());
    let drop = |t: &TripRequest| StopEvent::Dropoff(t.commuter_id.clone());
    [
        (
            RideTopology::Hitchhiking { embedded: ai.clone(), host: bi.clone() },
            [
                (&b.source, pick(b)),
                (&a.source, pick(a)),
                (&a.destination, drop(a)),
                (&b.destination, drop(b)),
            ],
        ),
        (
            RideTopology::Hitchhiking { embedded: bi.clone(), host: ai.clone() },
            [
                (&a.source, pick(a)),
                (&b.source, pick(b)),
                (&b.destination, drop(b)),
                (&a.destination, drop(a)),
            ],
        ),
        (
            RideTopology::Combined { first: ai.clone(), second: bi.clone() },
            [
                (&a.source, pick(a)),
                (&b.source, pick(b)),
                (&a.destination, drop(a)),
                (&b.destination, drop(b)),
            ],
        ),
        (
            RideTopology::Combined { first: bi, second: ai },
            [
                (&b.source, pick(b)),
                (&a.source, pick(a)),
                (&b.destination, drop(b)),
                (&a.destination, drop(a)),
            ],
        ),
    ]
}

/// All time-feasible shared rides for the pair, one per feasible waypoint
/// ordering, in the canonical ordering sequence.
pub fn plan_pair_rides(
    land: &Landscape,
    a: &TripRequest,
    b: &TripRequest,
) -> Result<Vec<SharedRidePlan>> {
    if a.commuter_id == b.commuter_id {
        return Err(Error::input(format!(
            "cannot plan a shared ride of {} with itself",
            a.commuter_id
        )));
    }
    let by_id = |id: &CommuterId| -> &TripRequest {
        if *id == a.commuter_id {
            a
        } else {
            b
        }
    };

    let mut plans = Vec::new();
    'ordering: for (topology, waypoints) in pair_orderings(a, b) {
        let mut legs = Vec::with_capacity(3);
        let mut stops = Vec::with_capacity(4);
        let first_rider = by_id(waypoints[0].1.commuter());
        stops.push(PlanStop {
            junction: waypoints[0].0.clone(),
            arrival_s: first_rider.earliest_departure_s,
            event: waypoints[0].1.clone(),
        });
        for k in 1..4 {
            let leg = match land.route(waypoints[k - 1].0, waypoints[k].0)? {
                Some(leg) => leg,
                None => continue 'ordering,
            };
            let drive_arrival = stops[k - 1].arrival_s + leg.travel_time_s;
            let arrival = match &waypoints[k].1 {
                StopEvent::Pickup(id) => drive_arrival.max(by_id(id).earliest_departure_s),
                StopEvent::Dropoff(_) => drive_arrival,
            };
            legs.push(leg);
            stops.push(PlanStop {
                junction: waypoints[k].0.clone(),
                arrival_s: arrival,
                event: waypoints[k].1.clone(),
            });
        }
        for trip in [a, b] {
            let dropoff = StopEvent::Dropoff(trip.commuter_id.clone());
            let t_drop = stops
                .iter()
                .find(|s| s.event == dropoff)
                .map(|s| s.arrival_s)
                .expect("both riders are dropped off");
            if t_drop > trip.latest_arrival_s + EPS {
                continue 'ordering;
            }
        }

        let mut rider_distances = BTreeMap::new();
        for trip in [a, b] {
            let on = |ev: StopEvent| stops.iter().position(|s| s.event == ev).expect("present");
            let from = on(StopEvent::Pickup(trip.commuter_id.clone()));
            let to = on(StopEvent::Dropoff(trip.commuter_id.clone()));
            let dist: f64 = legs[from..to].iter().map(|l| l.distance).sum();
            rider_distances.insert(trip.commuter_id.clone(), dist);
        }
        plans.push(SharedRidePlan {
            topology,
            total_cost: legs.iter().map(|l| l.cost).sum(),
            stops,
            legs,
            rider_distances,
        });
    }
    Ok(plans)
}

/// Cheapest feasible shared ride for the pair, or `None` when no ordering is
/// feasible. Cost ties break on the canonical ordering sequence.
pub fn min_cost_sharable_ride(
    land: &Landscape,
    a: &TripRequest,
    b: &TripRequest,
) -> Result<Option<SharedRidePlan>> {
    let mut best: Option<SharedRidePlan> = None;
    for plan in plan_pair_rides(land, a, b)? {
        match &best {
            Some(cur) if plan.total_cost >= cur.total_cost => {}
            _ => best = Some(plan),
        }
    }
    Ok(best)
}

/// A pair edge of the matching graph: the minimum-cost shared ride and the
/// pickup separation between the two sources.
#[derive(Debug, Clone, Serialize)]
pub struct PairEdge {
    pub plan: SharedRidePlan,
    pub separation: Option<f64>,
}

/// A trip dropped at graph construction, with the reason.
#[derive(Debug, Clone, Serialize)]
pub struct TripRejection {
    pub commuter_id: CommuterId,
    pub reason: String,
}

/// The matching graph: self-loop standalone plans for every admitted
/// commuter, and pair edges holding the minimum-cost shared ride for every
/// pair that clears the departure-window filter and is time-feasible.
#[derive(Debug, Clone)]
pub struct MatchingGraph {
    trips: BTreeMap<CommuterId, TripRequest>,
    self_plans: BTreeMap<CommuterId, SharedRidePlan>,
    pair_edges: BTreeMap<(CommuterId, CommuterId), PairEdge>,
}

impl MatchingGraph {
    /// Assemble a graph directly from parts. Testing hook for synthetic
    /// instances; production graphs come from [`build_matching_graph`].
    #[cfg(test)]
    pub(crate) fn from_parts(
        trips: BTreeMap<CommuterId, TripRequest>,
        self_plans: BTreeMap<CommuterId, SharedRidePlan>,
        pair_edges: BTreeMap<(CommuterId, CommuterId), PairEdge>,
    ) -> Self {
        MatchingGraph { trips, self_plans, pair_edges }
    }

    pub fn commuter_ids(&self) -> impl Iterator<Item = &CommuterId> {
        self.trips.keys()
    }

    pub fn len(&self) -> usize {
        self.trips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trips.is_empty()
    }

    pub fn trip(&self, id: &CommuterId) -> Option<&TripRequest> {
        self.trips.get(id)
    }

    pub fn self_plan(&self, id: &CommuterId) -> Option<&SharedRidePlan> {
        self.self_plans.get(id)
    }

    /// Standalone cost `c_ii`.
    pub fn self_cost(&self, id: &CommuterId) -> Option<f64> {
        self.self_plans.get(id).map(|p| p.total_cost)
    }

    fn key(a: &CommuterId, b: &CommuterId) -> (CommuterId, CommuterId) {
        if a <= b {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        }
    }

    pub fn pair_edge(&self, a: &CommuterId, b: &CommuterId) -> Option<&PairEdge> {
        self.pair_edges.get(&Self::key(a, b))
    }

    /// Shared-ride cost `c_ij`.
    pub fn pair_cost(&self, a: &CommuterId, b: &CommuterId) -> Option<f64> {
        self.pair_edge(a, b).map(|e| e.plan.total_cost)
    }

    /// Pair edges in ascending `(i, j)` order.
    pub fn edges(&self) -> impl Iterator<Item = (&(CommuterId, CommuterId), &PairEdge)> {
        self.pair_edges.iter()
    }

    pub fn edge_count(&self) -> usize {
        self.pair_edges.len()
    }

    /// Partners of `id` in ascending order.
    pub fn neighbors(&self, id: &CommuterId) -> Vec<&CommuterId> {
        let mut out: Vec<&CommuterId> = self
            .pair_edges
            .keys()
            .filter_map(|(a, b)| {
                if a == id {
                    Some(b)
                } else if b == id {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort();
        out
    }

    /// Sum of all standalone costs, in ascending commuter order.
    pub fn total_standalone_cost(&self) -> f64 {
        self.self_plans.values().map(|p| p.total_cost).sum()
    }
}

/// Result of building a matching graph: the graph over admitted commuters
/// plus per-trip diagnostics for rejected ones.
#[derive(Debug, Clone)]
pub struct GraphBuild {
    pub graph: MatchingGraph,
    pub rejections: Vec<TripRejection>,
}

/// Build the matching graph for `trips`. Pair edges are only attempted for
/// pairs whose earliest departures differ by at most `pairing_window_s`.
///
/// Trips that cannot be routed standalone (or whose standalone ride misses
/// the deadline, or whose standalone cost exceeds the magnitude cap) are
/// rejected with a diagnostic instead of failing the build.
pub fn build_matching_graph(
    land: &Landscape,
    trips: &[TripRequest],
    pairing_window_s: f64,
) -> Result<GraphBuild> {
    if pairing_window_s.is_nan() || pairing_window_s < 0.0 {
        return Err(Error::input("pairing window must be non-negative"));
    }

    let mut admitted: BTreeMap<CommuterId, TripRequest> = BTreeMap::new();
    let mut self_plans = BTreeMap::new();
    let mut rejections = Vec::new();
    for trip in trips {
        trip.validate()?;
        if admitted.contains_key(&trip.commuter_id) {
            return Err(Error::input(format!("duplicate commuter id {}", trip.commuter_id)));
        }
        match plan_standalone(land, trip)? {
            Some(plan) if Landscape::cost_in_range(plan.total_cost) => {
                self_plans.insert(trip.commuter_id.clone(), plan);
                admitted.insert(trip.commuter_id.clone(), trip.clone());
            }
            Some(plan) => rejections.push(TripRejection {
                commuter_id: trip.commuter_id.clone(),
                reason: format!("standalone cost {} exceeds magnitude cap", plan.total_cost),
            }),
            None => {
                let reason = if land.route(&trip.source, &trip.destination)?.is_none() {
                    format!("no route from {} to {}", trip.source, trip.destination)
                } else {
                    "standalone ride cannot meet the latest-arrival deadline".to_string()
                };
                rejections.push(TripRejection { commuter_id: trip.commuter_id.clone(), reason });
            }
        }
    }

    let ids: Vec<CommuterId> = admitted.keys().cloned().collect();
    let mut pair_edges = BTreeMap::new();
    for (i, a_id) in ids.iter().enumerate() {
        for b_id in ids.iter().skip(i + 1) {
            let (a, b) = (&admitted[a_id], &admitted[b_id]);
            if (a.earliest_departure_s - b.earliest_departure_s).abs() > pairing_window_s {
                continue;
            }
            if let Some(plan) = min_cost_sharable_ride(land, a, b)? {
                let floor = self_plans[a_id].total_cost.max(self_plans[b_id].total_cost);
                if plan.total_cost < floor - EPS {
                    return Err(Error::internal(format!(
                        "shared ride for ({a_id}, {b_id}) costs {} below standalone floor {floor}",
                        plan.total_cost
                    )));
                }
                if !Landscape::cost_in_range(plan.total_cost) {
                    continue;
                }
                let separation = land.separation(&a.source, &b.source)?;
                pair_edges.insert((a_id.clone(), b_id.clone()), PairEdge { plan, separation });
            }
        }
    }

    Ok(GraphBuild {
        graph: MatchingGraph { trips: admitted, self_plans, pair_edges },
        rejections,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::road::{GeometricPlane, RoadNetwork};

    fn line_land() -> Landscape {
        Landscape::Network(
            RoadNetwork::from_segments(&[("A", "B", 2.0, 120.0), ("B", "C", 3.0, 180.0)]).unwrap(),
        )
    }

    pub(crate) fn fig_network() -> Landscape {
        Landscape::Network(
            RoadNetwork::from_segments(&[
                ("si", "di", 4.0, 2400.0),
                ("sj", "dj", 4.0, 2400.0),
                ("sk", "dk", 4.9, 2940.0),
                ("sl", "dl", 4.9, 2940.0),
                ("si", "sj", 1.25, 750.0),
                ("sj", "di", 4.0, 2400.0),
                ("di", "dj", 1.25, 750.0),
                ("sk", "si", 1.5, 900.0),
                ("di", "dk", 1.5, 900.0),
                ("sl", "sj", 1.5, 900.0),
                ("dj", "dl", 1.5, 900.0),
            ])
            .unwrap(),
        )
    }

    pub(crate) fn fig_trips() -> Vec<TripRequest> {
        vec![
            TripRequest::new("i", "si", "di", 0.0, 100_000.0).unwrap(),
            TripRequest::new("j", "sj", "dj", 0.0, 100_000.0).unwrap(),
            TripRequest::new("k", "sk", "dk", 0.0, 100_000.0).unwrap(),
            TripRequest::new("l", "sl", "dl", 0.0, 100_000.0).unwrap(),
        ]
    }

    #[test]
    fn standalone_on_line() {
        let land = line_land();
        let trip = TripRequest::new("x", "A", "C", 0.0, 400.0).unwrap();
        let plan = plan_standalone(&land, &trip).unwrap().unwrap();
        assert_eq!(plan.total_cost, 5.0);
        assert_eq!(plan.stops[1].arrival_s, 300.0);
        plan.check_feasibility(&[&trip]).unwrap();
    }

    #[test]
    fn standalone_misses_deadline() {
        let land = line_land();
        let trip = TripRequest::new("x", "A", "C", 0.0, 299.0).unwrap();
        assert!(plan_standalone(&land, &trip).unwrap().is_none());
    }

    #[test]
    fn standalone_unreachable() {
        let land = line_land();
        let trip = TripRequest::new("x", "C", "A", 0.0, 400.0).unwrap();
        assert!(plan_standalone(&land, &trip).unwrap().is_none());
    }

    #[test]
    fn fig_standalone_costs() {
        let land = fig_network();
        let trips = fig_trips();
        let costs: Vec<f64> = trips
            .iter()
            .map(|t| plan_standalone(&land, t).unwrap().unwrap().total_cost)
            .collect();
        assert_eq!(costs, vec![4.0, 4.0, 4.9, 4.9]);
    }

    #[test]
    fn fig_pair_ij_is_combined_at_6_5() {
        let land = fig_network();
        let trips = fig_trips();
        let plan = min_cost_sharable_ride(&land, &trips[0], &trips[1]).unwrap().unwrap();
        assert!((plan.total_cost - 6.5).abs() < EPS);
        assert_eq!(
            plan.topology,
            RideTopology::Combined { first: "i".into(), second: "j".into() }
        );
        assert_eq!(plan.segment_costs(), vec![1.25, 4.0, 1.25]);
        plan.check_feasibility(&[&trips[0], &trips[1]]).unwrap();
    }

    #[test]
    fn fig_pair_ik_is_hitchhiking_at_7() {
        let land = fig_network();
        let trips = fig_trips();
        let plan = min_cost_sharable_ride(&land, &trips[0], &trips[2]).unwrap().unwrap();
        assert!((plan.total_cost - 7.0).abs() < EPS);
        assert_eq!(
            plan.topology,
            RideTopology::Hitchhiking { embedded: "i".into(), host: "k".into() }
        );
        // The embedded rider's own on-board leg costs 4.
        assert_eq!(plan.segment_costs(), vec![1.5, 4.0, 1.5]);
        // Swapping arguments yields the same cost.
        let swapped = min_cost_sharable_ride(&land, &trips[2], &trips[0]).unwrap().unwrap();
        assert!((swapped.total_cost - plan.total_cost).abs() < EPS);
    }

    #[test]
    fn identical_trips_share_at_standalone_cost() {
        let land = line_land();
        let a = TripRequest::new("a", "A", "C", 0.0, 400.0).unwrap();
        let b = TripRequest::new("b", "A", "C", 0.0, 400.0).unwrap();
        let plan = min_cost_sharable_ride(&land, &a, &b).unwrap().unwrap();
        assert_eq!(plan.total_cost, 5.0);
        plan.check_feasibility(&[&a, &b]).unwrap();
        // Zero-length legs keep the stop order strict even with tied times.
        assert_eq!(plan.stops.len(), 4);
    }

    #[test]
    fn disjoint_windows_yield_no_plans() {
        let land = line_land();
        // b's deadline passes before a may depart, and vice versa leaves no slack.
        let a = TripRequest::new("a", "A", "C", 1000.0, 1300.0).unwrap();
        let b = TripRequest::new("b", "A", "C", 0.0, 300.0).unwrap();
        assert!(plan_pair_rides(&land, &a, &b).unwrap().is_empty());
    }

    #[test]
    fn hitchhiking_respects_nested_stop_order() {
        let land = fig_network();
        let trips = fig_trips();
        let plan = min_cost_sharable_ride(&land, &trips[0], &trips[2]).unwrap().unwrap();
        let order: Vec<StopEvent> = plan.stops.iter().map(|s| s.event.clone()).collect();
        assert_eq!(
            order,
            vec![
                StopEvent::Pickup("k".into()),
                StopEvent::Pickup("i".into()),
                StopEvent::Dropoff("i".into()),
                StopEvent::Dropoff("k".into()),
            ]
        );
        let times: Vec<f64> = plan.stops.iter().map(|s| s.arrival_s).collect();
        assert!(times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn pickup_waits_for_later_rider() {
        let land = line_land();
        let a = TripRequest::new("a", "A", "C", 0.0, 2000.0).unwrap();
        // b cannot depart before t=500; the vehicle reaches B at t=120 and waits.
        let b = TripRequest::new("b", "B", "C", 500.0, 2000.0).unwrap();
        let plans = plan_pair_rides(&land, &a, &b).unwrap();
        let hitch = plans
            .iter()
            .find(|p| {
                p.topology
                    == RideTopology::Hitchhiking { embedded: "b".into(), host: "a".into() }
            })
            .unwrap();
        assert_eq!(hitch.stop_arrival(&StopEvent::Pickup("b".into())).unwrap(), 500.0);
        assert_eq!(hitch.stop_arrival(&StopEvent::Dropoff("b".into())).unwrap(), 680.0);
        hitch.check_feasibility(&[&a, &b]).unwrap();
    }

    #[test]
    fn fig_matching_graph_edges() {
        let land = fig_network();
        let build = build_matching_graph(&land, &fig_trips(), f64::INFINITY).unwrap();
        assert!(build.rejections.is_empty());
        let g = &build.graph;
        assert_eq!(g.len(), 4);
        let keys: Vec<(String, String)> = g
            .edges()
            .map(|((a, b), _)| (a.0.clone(), b.0.clone()))
            .collect();
        assert_eq!(
            keys,
            vec![
                ("i".to_string(), "j".to_string()),
                ("i".to_string(), "k".to_string()),
                ("j".to_string(), "l".to_string()),
            ]
        );
        assert!((g.pair_cost(&"i".into(), &"j".into()).unwrap() - 6.5).abs() < EPS);
        assert!((g.pair_cost(&"i".into(), &"k".into()).unwrap() - 7.0).abs() < EPS);
        assert!((g.pair_cost(&"j".into(), &"l".into()).unwrap() - 7.0).abs() < EPS);
    }

    #[test]
    fn zero_window_with_distinct_departures_has_no_edges() {
        let land = line_land();
        let a = TripRequest::new("a", "A", "C", 0.0, 4000.0).unwrap();
        let b = TripRequest::new("b", "A", "C", 1.0, 4000.0).unwrap();
        let build = build_matching_graph(&land, &[a, b], 0.0).unwrap();
        assert_eq!(build.graph.edge_count(), 0);
        assert_eq!(build.graph.len(), 2);
    }

    #[test]
    fn single_commuter_graph() {
        let land = line_land();
        let a = TripRequest::new("a", "A", "C", 0.0, 4000.0).unwrap();
        let build = build_matching_graph(&land, &[a], 180.0).unwrap();
        assert_eq!(build.graph.len(), 1);
        assert_eq!(build.graph.edge_count(), 0);
        assert_eq!(build.graph.self_cost(&"a".into()).unwrap(), 5.0);
    }

    #[test]
    fn unroutable_trip_is_rejected_with_diagnostic() {
        let land = line_land();
        let good = TripRequest::new("a", "A", "C", 0.0, 4000.0).unwrap();
        let bad = TripRequest::new("b", "C", "A", 0.0, 4000.0).unwrap();
        let build = build_matching_graph(&land, &[good, bad], 180.0).unwrap();
        assert_eq!(build.graph.len(), 1);
        assert_eq!(build.rejections.len(), 1);
        assert_eq!(build.rejections[0].commuter_id, "b".into());
        assert!(build.rejections[0].reason.contains("no route"));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn plane_instance(seed: (f64, f64, f64, f64, f64, f64, f64, f64)) -> (Landscape, Vec<TripRequest>) {
            let (alon, alat, blon, blat, clon, clat, dlon, dlat) = seed;
            let mut plane = GeometricPlane::new(2.0, 1.5, 30.0).unwrap();
            plane.add_point("as", alon, alat).unwrap();
            plane.add_point("ad", blon, blat).unwrap();
            plane.add_point("bs", clon, clat).unwrap();
            plane.add_point("bd", dlon, dlat).unwrap();
            let trips = vec![
                TripRequest::new("a", "as", "ad", 0.0, 1e7).unwrap(),
                TripRequest::new("b", "bs", "bd", 0.0, 1e7).unwrap(),
            ];
            (Landscape::Plane(plane), trips)
        }

        proptest! {
            /// Shared cost never undercuts either standalone cost, and the
            /// argument order of the query never changes the cost.
            #[test]
            fn pair_cost_dominates_standalone(
                coords in (
                    -74.05f64..-73.90, 40.60f64..40.90, -74.05f64..-73.90, 40.60f64..40.90,
                    -74.05f64..-73.90, 40.60f64..40.90, -74.05f64..-73.90, 40.60f64..40.90,
                )
            ) {
                let (land, trips) = plane_instance(coords);
                prop_assume!(trips.iter().all(|t| t.source != t.destination));
                let ca = plan_standalone(&land, &trips[0]).unwrap().unwrap().total_cost;
                let cb = plan_standalone(&land, &trips[1]).unwrap().unwrap().total_cost;
                if let Some(plan) = min_cost_sharable_ride(&land, &trips[0], &trips[1]).unwrap() {
                    prop_assert!(plan.total_cost >= ca.max(cb) - EPS);
                    plan.check_feasibility(&[&trips[0], &trips[1]]).unwrap();
                    let swapped = min_cost_sharable_ride(&land, &trips[1], &trips[0]).unwrap().unwrap();
                    prop_assert!((swapped.total_cost - plan.total_cost).abs() <= EPS);
                }
            }
        }
    }
}
