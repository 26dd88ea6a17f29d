//! Quantitative measures over assignments: social optimality ratio, social
//! utility, and per-commuter/per-pair distributions.

use serde::Serialize;

use crate::matching::Assignment;
use crate::mechanism::{payments, Mechanism};
use crate::plan::MatchingGraph;
use crate::{Error, Result, EPS};

/// Full per-mechanism report for one assignment.
///
/// Distribution arrays cover matched commuters (or matched pairs) only;
/// singletons contribute nothing to them. `matched_fraction` counts
/// commuters; `matched_pairs` is also reported so either reading of "how
/// many matched" is reproducible.
#[derive(Debug, Clone, Serialize)]
pub struct MechanismReport {
    pub mechanism: Mechanism,
    pub social_cost: f64,
    pub optimal_cost: f64,
    /// `social_cost / optimal_cost`, at least 1 up to tolerance.
    pub optimality_ratio: f64,
    /// Total savings over standalone rides, `sum_i (c_ii - p_i)`.
    pub social_utility: f64,
    pub total_commuters: usize,
    pub matched_commuters: usize,
    pub matched_pairs: usize,
    /// `2 * matched_pairs / total_commuters`.
    pub matched_fraction: f64,
    /// Per matched commuter: `(c_i - p_i) / c_i`.
    pub normalized_utilities: Vec<f64>,
    /// Per matched pair: `min(c_i, c_j) / max(c_i, c_j)`.
    pub standalone_cost_ratios: Vec<f64>,
    /// Per matched pair: `max(d_shared_i / d_i, d_shared_j / d_j)`.
    pub delay_ratios: Vec<f64>,
    /// Per matched pair: pickup separation (km on the geometric plane, cost
    /// units on a road network).
    pub separation_distances_km: Vec<f64>,
}

/// Ratio of a stable assignment's cost to the optimum's cost. Both
/// assignments must cover the same commuter set and the optimum must have
/// positive cost.
pub fn optimality_ratio(stable: &Assignment, optimum: &Assignment) -> Result<f64> {
    if stable.commuters() != optimum.commuters() {
        return Err(Error::input("assignments cover different commuter sets"));
    }
    if optimum.social_cost <= EPS {
        return Err(Error::input(format!(
            "optimal social cost {} is not positive",
            optimum.social_cost
        )));
    }
    Ok(stable.social_cost / optimum.social_cost)
}

/// Build the full [`MechanismReport`] for `a` against the social `optimum`.
pub fn mechanism_report(
    mech: Mechanism,
    a: &Assignment,
    g: &MatchingGraph,
    optimum: &Assignment,
) -> Result<MechanismReport> {
    let total = g.len();
    let ratio = if total == 0 { 1.0 } else { optimality_ratio(a, optimum)? };

    let mut social_utility = 0.0;
    let mut normalized_utilities = Vec::new();
    let mut standalone_cost_ratios = Vec::new();
    let mut delay_ratios = Vec::new();
    let mut separation_distances_km = Vec::new();

    for (i, j) in &a.pairs {
        let edge = g
            .pair_edge(i, j)
            .ok_or_else(|| Error::input(format!("assignment pair ({i}, {j}) has no edge")))?;
        let (ci, cj) = (
            g.self_cost(i).ok_or_else(|| Error::input(format!("unknown commuter {i}")))?,
            g.self_cost(j).ok_or_else(|| Error::input(format!("unknown commuter {j}")))?,
        );
        let profile = payments(mech, &edge.plan, ci, cj)?;
        social_utility += profile.utility_a + profile.utility_b;
        normalized_utilities.push(profile.utility_a / ci);
        normalized_utilities.push(profile.utility_b / cj);
        standalone_cost_ratios.push(ci.min(cj) / ci.max(cj));

        let mut worst: Option<f64> = None;
        for id in [i, j] {
            let own = g.self_plan(id).expect("standalone plan").rider_distances[id];
            if own <= 1e-12 {
                continue; // zero-length standalone route, ratio undefined
            }
            let shared = edge.plan.rider_distances[id];
            let r = shared / own;
            worst = Some(worst.map_or(r, |w: f64| w.max(r)));
        }
        if let Some(r) = worst {
            delay_ratios.push(r);
        }
        if let Some(sep) = edge.separation {
            separation_distances_km.push(sep);
        }
    }

    let matched_pairs = a.pairs.len();
    Ok(MechanismReport {
        mechanism: mech,
        social_cost: a.social_cost,
        optimal_cost: optimum.social_cost,
        optimality_ratio: ratio,
        social_utility,
        total_commuters: total,
        matched_commuters: 2 * matched_pairs,
        matched_pairs,
        matched_fraction: if total == 0 { 0.0 } else { 2.0 * matched_pairs as f64 / total as f64 },
        normalized_utilities,
        standalone_cost_ratios,
        delay_ratios,
        separation_distances_km,
    })
}
