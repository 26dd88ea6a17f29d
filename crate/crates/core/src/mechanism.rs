//! The four budget-balanced cost-sharing mechanisms, utilities, and
//! payment-ranked preference orders.
//!
//! For a shared ride `r` of cost `c(r)` between commuters with standalone
//! costs `c_i`, `c_j`:
//!
//! * equal — `p_i = c(r) / 2`
//! * egalitarian — `p_i = (c(r) + c_i - c_j) / 2`, equalizing utilities
//! * proportional — `p_i = c_i * c(r) / (c_i + c_j)`
//! * segment-based — each rider pays their exclusive legs in full and half
//!   of the leg shared with the partner
//!
//! All four satisfy `p_i + p_j = c(r)` exactly (budget balance).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::plan::{MatchingGraph, RideTopology, SharedRidePlan};
use crate::trip::CommuterId;
use crate::{Error, Result, EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Equal,
    Egalitarian,
    Proportional,
    SegmentBased,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] = [
        Mechanism::Equal,
        Mechanism::Egalitarian,
        Mechanism::Proportional,
        Mechanism::SegmentBased,
    ];

    /// Short code used on the CLI and in reports.
    pub fn code(&self) -> &'static str {
        match self {
            Mechanism::Equal => "eq",
            Mechanism::Egalitarian => "ega",
            Mechanism::Proportional => "pp",
            Mechanism::SegmentBased => "sb",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eq" => Ok(Mechanism::Equal),
            "ega" => Ok(Mechanism::Egalitarian),
            "pp" => Ok(Mechanism::Proportional),
            "sb" => Ok(Mechanism::SegmentBased),
            other => Err(Error::input(format!(
                "unknown mechanism {other:?} (expected eq, ega, pp or sb)"
            ))),
        }
    }
}

/// Payments and utilities of the two participants of one shared ride,
/// reported in ascending commuter-id order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaymentProfile {
    pub pair: (CommuterId, CommuterId),
    pub payment_a: f64,
    pub payment_b: f64,
    pub utility_a: f64,
    pub utility_b: f64,
}

impl PaymentProfile {
    pub fn payment_of(&self, id: &CommuterId) -> Option<f64> {
        if *id == self.pair.0 {
            Some(self.payment_a)
        } else if *id == self.pair.1 {
            Some(self.payment_b)
        } else {
            None
        }
    }

    pub fn utility_of(&self, id: &CommuterId) -> Option<f64> {
        if *id == self.pair.0 {
            Some(self.utility_a)
        } else if *id == self.pair.1 {
            Some(self.utility_b)
        } else {
            None
        }
    }
}

/// Split `plan`'s cost under `mech`. `c_self_a`/`c_self_b` are the standalone
/// costs of the plan's participants in ascending id order, and both must be
/// positive.
pub fn payments(
    mech: Mechanism,
    plan: &SharedRidePlan,
    c_self_a: f64,
    c_self_b: f64,
) -> Result<PaymentProfile> {
    let ids = plan.topology.participants();
    if ids.len() != 2 {
        return Err(Error::internal("payments require a pair plan"));
    }
    let (a, b) = (ids[0].clone(), ids[1].clone());
    if !(c_self_a > 0.0 && c_self_b > 0.0) {
        return Err(Error::input("standalone costs must be positive"));
    }
    let cost = plan.total_cost;
    let (pa, pb) = match mech {
        Mechanism::Equal => (cost / 2.0, cost / 2.0),
        Mechanism::Egalitarian => {
            ((cost + c_self_a - c_self_b) / 2.0, (cost + c_self_b - c_self_a) / 2.0)
        }
        Mechanism::Proportional => {
            let denom = c_self_a + c_self_b;
            (c_self_a * cost / denom, c_self_b * cost / denom)
        }
        Mechanism::SegmentBased => {
            let legs = plan.segment_costs();
            if legs.len() != 3 {
                return Err(Error::internal("pair plan lacks its three segment costs"));
            }
            let (lead_in, shared, tail_out) = (legs[0], legs[1], legs[2]);
            // The rider on board for the whole route pays both exclusive
            // legs; the middle leg is shared half/half. In a combined ride
            // each rider has one exclusive leg.
            let role_payments = match &plan.topology {
                RideTopology::Hitchhiking { embedded, host } => {
                    let p_embedded = shared / 2.0;
                    let p_host = lead_in + shared / 2.0 + tail_out;
                    [(embedded.clone(), p_embedded), (host.clone(), p_host)]
                }
                RideTopology::Combined { first, second } => {
                    let p_first = lead_in + shared / 2.0;
                    let p_second = shared / 2.0 + tail_out;
                    [(first.clone(), p_first), (second.clone(), p_second)]
                }
                RideTopology::Standalone { .. } => unreachable!("pair plan checked above"),
            };
            let of = |id: &CommuterId| {
                role_payments
                    .iter()
                    .find(|(rid, _)| rid == id)
                    .map(|(_, p)| *p)
                    .expect("participant has a role payment")
            };
            (of(&a), of(&b))
        }
    };
    Ok(PaymentProfile {
        pair: (a, b),
        payment_a: pa,
        payment_b: pb,
        utility_a: c_self_a - pa,
        utility_b: c_self_b - pb,
    })
}

/// One ride-sharing option in a commuter's preference order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedOption {
    pub partner: CommuterId,
    pub payment: f64,
}

/// A commuter's preference order over ride-sharing options.
///
/// `ranked_options` is sorted by ascending payment, ties broken by ascending
/// partner id. The standalone ride sits implicitly at `standalone_rank`:
/// options before it are strictly cheaper than riding alone; options at or
/// after it cost exactly the standalone fare (within tolerance) and are kept
/// but never preferred over standalone. Options costing more than standalone
/// are removed entirely.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreferenceOrder {
    pub owner: CommuterId,
    pub standalone_cost: f64,
    pub ranked_options: Vec<RankedOption>,
    pub standalone_rank: usize,
}

impl PreferenceOrder {
    /// Options strictly preferred over the standalone ride.
    pub fn active_options(&self) -> &[RankedOption] {
        &self.ranked_options[..self.standalone_rank]
    }

    /// Payment for sharing with `partner`, if that option is listed.
    pub fn payment_for(&self, partner: &CommuterId) -> Option<f64> {
        self.ranked_options.iter().find(|o| &o.partner == partner).map(|o| o.payment)
    }
}

/// Build every commuter's preference order under `mech`.
///
/// Options are sorted by ascending payment with exact float comparison; ties
/// break on ascending partner id, the same rule for every commuter. Options
/// whose payment exceeds the standalone cost by more than the tolerance are
/// dropped; options equal to it (within tolerance) rank below standalone.
pub fn build_preferences(
    mech: Mechanism,
    g: &MatchingGraph,
) -> Result<BTreeMap<CommuterId, PreferenceOrder>> {
    let mut orders = BTreeMap::new();
    for id in g.commuter_ids() {
        let c_self = g.self_cost(id).ok_or_else(|| {
            Error::internal(format!("commuter {id} has no standalone plan"))
        })?;
        let mut better: Vec<RankedOption> = Vec::new();
        let mut at_par: Vec<RankedOption> = Vec::new();
        for partner in g.neighbors(id) {
            let edge = g.pair_edge(id, partner).expect("neighbor edge exists");
            let ca = g.self_cost(edge.plan.topology.participants()[0]).expect("plan participant");
            let cb = g.self_cost(edge.plan.topology.participants()[1]).expect("plan participant");
            let profile = payments(mech, &edge.plan, ca, cb)?;
            let payment = profile
                .payment_of(id)
                .ok_or_else(|| Error::internal(format!("{id} absent from own pair profile")))?;
            let option = RankedOption { partner: partner.clone(), payment };
            if payment < c_self - EPS {
                better.push(option);
            } else if payment <= c_self + EPS {
                at_par.push(option);
            }
        }
        let by_payment = |x: &RankedOption, y: &RankedOption| {
            x.payment.total_cmp(&y.payment).then_with(|| x.partner.cmp(&y.partner))
        };
        better.sort_by(by_payment);
        at_par.sort_by(by_payment);
        let standalone_rank = better.len();
        better.extend(at_par);
        orders.insert(
            id.clone(),
            PreferenceOrder {
                owner: id.clone(),
                standalone_cost: c_self,
                ranked_options: better,
                standalone_rank,
            },
        );
    }
    Ok(orders)
}

/// A pair-edge side whose utility under the mechanism is negative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativeUtility {
    pub pair: (CommuterId, CommuterId),
    pub commuter: CommuterId,
    pub utility: f64,
}

/// Every `(pair edge, side)` where the mechanism yields utility below
/// `-EPS`, in ascending `(pair, commuter)` order.
pub fn negative_utility_flags(mech: Mechanism, g: &MatchingGraph) -> Result<Vec<NegativeUtility>> {
    let mut flags = Vec::new();
    for ((a, b), edge) in g.edges() {
        let ca = g.self_cost(a).expect("self cost");
        let cb = g.self_cost(b).expect("self cost");
        let profile = payments(mech, &edge.plan, ca, cb)?;
        for (id, utility) in [(a, profile.utility_a), (b, profile.utility_b)] {
            if utility < -EPS {
                flags.push(NegativeUtility {
                    pair: (a.clone(), b.clone()),
                    commuter: id.clone(),
                    utility,
                });
            }
        }
    }
    Ok(flags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::tests::{fig_network, fig_trips};
    use crate::plan::{build_matching_graph, min_cost_sharable_ride};

    fn fig_graph() -> MatchingGraph {
        build_matching_graph(&fig_network(), &fig_trips(), f64::INFINITY).unwrap().graph
    }

    #[test]
    fn pair_ij_pays_3_25_under_every_mechanism() {
        let g = fig_graph();
        let plan = &g.pair_edge(&"i".into(), &"j".into()).unwrap().plan;
        for mech in Mechanism::ALL {
            let p = payments(mech, plan, 4.0, 4.0).unwrap();
            assert!((p.payment_a - 3.25).abs() < EPS, "{mech}: {}", p.payment_a);
            assert!((p.payment_b - 3.25).abs() < EPS, "{mech}: {}", p.payment_b);
        }
    }

    #[test]
    fn pair_ik_segment_based_pays_2_and_5() {
        let g = fig_graph();
        let plan = &g.pair_edge(&"i".into(), &"k".into()).unwrap().plan;
        let p = payments(Mechanism::SegmentBased, plan, 4.0, 4.9).unwrap();
        assert!((p.payment_a - 2.0).abs() < EPS);
        assert!((p.payment_b - 5.0).abs() < EPS);
    }

    #[test]
    fn pair_ik_egalitarian_equalizes_utilities() {
        let g = fig_graph();
        let plan = &g.pair_edge(&"i".into(), &"k".into()).unwrap().plan;
        let p = payments(Mechanism::Egalitarian, plan, 4.0, 4.9).unwrap();
        assert!((p.payment_a - 3.05).abs() < EPS);
        assert!((p.payment_b - 3.95).abs() < EPS);
        assert!((p.utility_a - 0.95).abs() < EPS);
        assert!((p.utility_b - 0.95).abs() < EPS);
    }

    #[test]
    fn pair_ik_proportional_follows_standalone_ratio() {
        let g = fig_graph();
        let plan = &g.pair_edge(&"i".into(), &"k".into()).unwrap().plan;
        let p = payments(Mechanism::Proportional, plan, 4.0, 4.9).unwrap();
        assert!((p.payment_a - 28.0 / 8.9).abs() < EPS);
        assert!((p.payment_b - 34.3 / 8.9).abs() < EPS);
    }

    #[test]
    fn combined_segment_payments_split_shared_leg() {
        let land = fig_network();
        let trips = fig_trips();
        let plan = min_cost_sharable_ride(&land, &trips[0], &trips[1]).unwrap().unwrap();
        let p = payments(Mechanism::SegmentBased, &plan, 4.0, 4.0).unwrap();
        // legs 1.25 / 4.0 / 1.25: each side pays its exclusive leg plus 2.0.
        assert!((p.payment_a - 3.25).abs() < EPS);
        assert!((p.payment_b - 3.25).abs() < EPS);
    }

    #[test]
    fn standalone_plan_is_rejected() {
        let land = fig_network();
        let trips = fig_trips();
        let plan = crate::plan::plan_standalone(&land, &trips[0]).unwrap().unwrap();
        assert!(payments(Mechanism::Equal, &plan, 4.0, 4.0).is_err());
    }

    #[test]
    fn preferences_under_equal_rank_j_then_k_for_i() {
        let g = fig_graph();
        let prefs = build_preferences(Mechanism::Equal, &g).unwrap();
        let i = &prefs[&"i".into()];
        assert_eq!(i.standalone_rank, 2);
        assert_eq!(i.ranked_options[0].partner, "j".into());
        assert!((i.ranked_options[0].payment - 3.25).abs() < EPS);
        assert_eq!(i.ranked_options[1].partner, "k".into());
        assert!((i.ranked_options[1].payment - 3.5).abs() < EPS);
        assert!(i.standalone_cost == 4.0);
    }

    #[test]
    fn preferences_under_segment_based_leave_k_standalone() {
        let g = fig_graph();
        let prefs = build_preferences(Mechanism::SegmentBased, &g).unwrap();
        let k = &prefs[&"k".into()];
        // p_k = 5 > c_k = 4.9: the option is dropped entirely.
        assert!(k.ranked_options.is_empty());
        assert_eq!(k.standalone_rank, 0);
        let i = &prefs[&"i".into()];
        assert_eq!(i.ranked_options[0].partner, "k".into());
        assert!((i.ranked_options[0].payment - 2.0).abs() < EPS);
    }

    #[test]
    fn no_edges_means_empty_order() {
        let land = fig_network();
        let trips = vec![fig_trips()[0].clone()];
        let g = build_matching_graph(&land, &trips, 180.0).unwrap().graph;
        let prefs = build_preferences(Mechanism::Equal, &g).unwrap();
        assert!(prefs[&"i".into()].ranked_options.is_empty());
    }

    #[test]
    fn payment_equal_to_standalone_ranks_below_standalone() {
        // Shared ride costs exactly c_a + c_b, so the equal split matches
        // each standalone fare: the option is kept but never preferred over
        // riding alone.
        let land = Landscape::Network(
            crate::road::RoadNetwork::from_segments(&[
                ("A", "B", 4.0, 240.0),
                ("C", "D", 4.0, 240.0),
                ("C", "A", 2.0, 120.0),
                ("B", "D", 2.0, 120.0),
            ])
            .unwrap(),
        );
        let trips = vec![
            crate::trip::TripRequest::new("a", "A", "B", 0.0, 1e6).unwrap(),
            crate::trip::TripRequest::new("b", "C", "D", 0.0, 1e6).unwrap(),
        ];
        let g = build_matching_graph(&land, &trips, f64::INFINITY).unwrap().graph;
        assert!((g.pair_cost(&"a".into(), &"b".into()).unwrap() - 8.0).abs() < EPS);
        let prefs = build_preferences(Mechanism::Equal, &g).unwrap();
        let a = &prefs[&"a".into()];
        assert_eq!(a.standalone_rank, 0);
        assert_eq!(a.ranked_options.len(), 1);
        assert!(a.active_options().is_empty());
        assert!((a.payment_for(&"b".into()).unwrap() - 4.0).abs() < EPS);
    }

    use crate::road::Landscape;

    #[test]
    fn equal_flags_negative_utility_side() {
        // c(r) = 10 with standalone costs 4 and 8: the cheap side pays 5 > 4.
        let land = Landscape::Network(
            crate::road::RoadNetwork::from_segments(&[
                ("sa", "da", 4.0, 240.0),
                ("sb", "db", 8.0, 480.0),
                ("sa", "sb", 1.0, 60.0),
                ("sb", "da", 8.0, 480.0),
                ("da", "db", 1.0, 60.0),
            ])
            .unwrap(),
        );
        let trips = vec![
            crate::trip::TripRequest::new("a", "sa", "da", 0.0, 1e6).unwrap(),
            crate::trip::TripRequest::new("b", "sb", "db", 0.0, 1e6).unwrap(),
        ];
        let g = build_matching_graph(&land, &trips, f64::INFINITY).unwrap().graph;
        assert!((g.pair_cost(&"a".into(), &"b".into()).unwrap() - 10.0).abs() < EPS);
        let flags = negative_utility_flags(Mechanism::Equal, &g).unwrap();
        assert_eq!(flags.len(), 1);
        assert_eq!(flags[0].commuter, "a".into());
        assert!((flags[0].utility - (-1.0)).abs() < EPS);
        // Egalitarian and proportional never go negative here.
        assert!(negative_utility_flags(Mechanism::Egalitarian, &g).unwrap().is_empty());
        assert!(negative_utility_flags(Mechanism::Proportional, &g).unwrap().is_empty());
    }

    mod properties {
        use super::*;
        use crate::plan::{PlanStop, StopEvent};
        use proptest::prelude::*;
        use std::collections::BTreeMap;

        /// Fabricate a pair plan with the given topology and leg costs.
        fn synth_pair_plan(topology: RideTopology, legs: [f64; 3]) -> SharedRidePlan {
            let (events, distances): (Vec<StopEvent>, BTreeMap<CommuterId, f64>) = match &topology {
                RideTopology::Hitchhiking { embedded, host } => (
                    vec![
                        StopEvent::Pickup(host.clone()),
                        StopEvent::Pickup(embedded.clone()),
                        StopEvent::Dropoff(embedded.clone()),
                        StopEvent::Dropoff(host.clone()),
                    ],
                    BTreeMap::from([
                        (embedded.clone(), legs[1]),
                        (host.clone(), legs.iter().sum()),
                    ]),
                ),
                RideTopology::Combined { first, second } => (
                    vec![
                        StopEvent::Pickup(first.clone()),
                        StopEvent::Pickup(second.clone()),
                        StopEvent::Dropoff(first.clone()),
                        StopEvent::Dropoff(second.clone()),
                    ],
                    BTreeMap::from([
                        (first.clone(), legs[0] + legs[1]),
                        (second.clone(), legs[1] + legs[2]),
                    ]),
                ),
                RideTopology::Standalone { .. } => unreachable!("pair topologies only"),
            };
            let mk = |from: &str, to: &str, cost: f64| crate::road::RouteLeg {
                from: from.into(),
                to: to.into(),
                cost,
                travel_time_s: 1.0,
                distance: cost,
                via: vec![from.into(), to.into()],
            };
            SharedRidePlan {
                topology,
                stops: events
                    .into_iter()
                    .enumerate()
                    .map(|(k, event)| PlanStop {
                        junction: format!("w{k}"),
                        arrival_s: k as f64,
                        event,
                    })
                    .collect(),
                legs: vec![mk("w0", "w1", legs[0]), mk("w1", "w2", legs[1]), mk("w2", "w3", legs[2])],
                total_cost: legs.iter().sum(),
                rider_distances: distances,
            }
        }

        proptest! {
            /// Budget balance and the per-mechanism algebraic identities.
            #[test]
            fn payment_algebra(
                legs in [0.0f64..50.0, 0.01f64..50.0, 0.0f64..50.0],
                ca in 0.1f64..60.0,
                cb in 0.1f64..60.0,
                hitch in proptest::bool::ANY,
            ) {
                let topology = if hitch {
                    RideTopology::Hitchhiking { embedded: "a".into(), host: "b".into() }
                } else {
                    RideTopology::Combined { first: "a".into(), second: "b".into() }
                };
                let plan = synth_pair_plan(topology, legs);
                let cost = plan.total_cost;
                for mech in Mechanism::ALL {
                    let p = payments(mech, &plan, ca, cb).unwrap();
                    prop_assert!((p.payment_a + p.payment_b - cost).abs() <= EPS * (1.0 + cost.abs()));
                    prop_assert!((p.utility_a - (ca - p.payment_a)).abs() <= EPS);
                    prop_assert!((p.utility_b - (cb - p.payment_b)).abs() <= EPS);
                }
                let ega = payments(Mechanism::Egalitarian, &plan, ca, cb).unwrap();
                prop_assert!((ega.utility_a - ega.utility_b).abs() <= EPS);
                let pp = payments(Mechanism::Proportional, &plan, ca, cb).unwrap();
                prop_assert!((pp.payment_a * cb - pp.payment_b * ca).abs() <= 1e-9 * (1.0 + cost) * (ca + cb));
                if hitch {
                    let sb = payments(Mechanism::SegmentBased, &plan, ca, cb).unwrap();
                    prop_assert!((sb.payment_a - legs[1] / 2.0).abs() <= EPS);
                    prop_assert!(sb.payment_b >= cost / 2.0 - EPS);
                }
            }
        }
    }
}
