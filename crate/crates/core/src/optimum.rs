//! Exact social optimum: the feasible assignment minimizing total cost.
//!
//! Choosing pairs to minimize `sum c_ij + sum c_ii` over a partition is the
//! same as choosing a matching that maximizes total *savings*
//! `c_ii + c_jj - c_ij`, since every unmatched commuter pays their
//! standalone cost. Edges with non-positive savings never help (a pair edge
//! always costs at least each member's standalone ride), so the optimum is a
//! maximum-weight matching over the positive-savings edges, solved exactly
//! with integer-scaled weights.
//!
//! Among cost-equal optima the result is canonicalized to the
//! lexicographically smallest sorted pair list: edges are tried in ascending
//! order and kept iff some optimal matching extends the kept set, certified
//! by re-solving the residual. The solver's vertex duals prune almost every
//! candidate (an edge with positive dual slack is in no optimal matching),
//! so the pass is cheap unless the instance is heavily tied.

use serde::Serialize;

use crate::blossom;
use crate::matching::Assignment;
use crate::plan::MatchingGraph;
use crate::trip::CommuterId;
use crate::{Error, Result, EPS};

/// Fixed-point scale for savings weights: 2^48 keeps the rounding error per
/// edge near the f64 noise floor while leaving ample i128 headroom for the
/// 1e12 cost-magnitude cap.
const WEIGHT_SCALE: f64 = (1u64 << 48) as f64;

fn scale_weight(savings: f64) -> i128 {
    (savings * WEIGHT_SCALE).round() as i128
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SavingsEdge {
    pub a: usize,
    pub b: usize,
    pub savings: f64,
}

/// The savings graph derived from a matching graph: one node per commuter,
/// one edge per pair edge, weighted by `c_ii + c_jj - c_ij`.
#[derive(Debug, Clone, Serialize)]
pub struct SavingsGraph {
    /// Commuter ids in ascending order; edge endpoints index this list.
    pub nodes: Vec<CommuterId>,
    /// Edges in ascending `(a, b)` order.
    pub edges: Vec<SavingsEdge>,
}

impl SavingsGraph {
    pub fn from_matching_graph(g: &MatchingGraph) -> Self {
        let nodes: Vec<CommuterId> = g.commuter_ids().cloned().collect();
        let index: std::collections::BTreeMap<&CommuterId, usize> =
            nodes.iter().enumerate().map(|(k, v)| (v, k)).collect();
        let edges = g
            .edges()
            .map(|((i, j), edge)| {
                let savings = g.self_cost(i).expect("self cost") + g.self_cost(j).expect("self cost")
                    - edge.plan.total_cost;
                debug_assert!(
                    savings
                        <= g.self_cost(i).unwrap().min(g.self_cost(j).unwrap()) + EPS,
                    "savings cannot exceed either standalone cost"
                );
                SavingsEdge { a: index[i], b: index[j], savings }
            })
            .collect();
        SavingsGraph { nodes, edges }
    }
}

/// Exact minimum-cost feasible assignment.
///
/// Deterministic: among cost-equal optima, returns the lexicographically
/// smallest sorted pair list.
pub fn social_optimum(g: &MatchingGraph) -> Result<Assignment> {
    let sg = SavingsGraph::from_matching_graph(g);
    let scaled: Vec<(usize, usize, i128)> = sg
        .edges
        .iter()
        .filter(|e| e.savings > EPS)
        .map(|e| (e.a, e.b, scale_weight(e.savings)))
        .collect();
    let solution = blossom::max_weight_matching(sg.nodes.len(), &scaled)?;
    let matched = canonical_optimal_matching(sg.nodes.len(), &scaled, &solution)?;
    let pairs = matched
        .into_iter()
        .map(|(a, b)| (sg.nodes[a].clone(), sg.nodes[b].clone()))
        .collect();
    let assignment = Assignment::from_pairs(pairs, g)?;
    debug_assert!(
        reduction_identity_gap(&assignment, g) <= EPS * (1.0 + assignment.social_cost.abs()),
        "assignment cost disagrees with standalone-total minus savings"
    );
    Ok(assignment)
}

/// `|c(M) - (sum c_ii - sum savings over matched pairs)|`: the algebraic
/// restatement of the objective, which must vanish for any feasible
/// assignment.
pub fn reduction_identity_gap(a: &Assignment, g: &MatchingGraph) -> f64 {
    let standalone_total = g.total_standalone_cost();
    let saved: f64 = a
        .pairs
        .iter()
        .map(|(i, j)| {
            g.self_cost(i).expect("self cost") + g.self_cost(j).expect("self cost")
                - g.pair_cost(i, j).expect("pair cost")
        })
        .sum();
    (a.social_cost - (standalone_total - saved)).abs()
}

/// Greedy lexicographic canonicalization over the optimum's tie class.
///
/// Scans edges in ascending `(a, b)` order, keeping an edge iff some
/// maximum-weight matching contains all kept edges plus it. The invariant
/// "the current matching is optimal and extends the kept set" holds
/// throughout, so the kept set itself is optimal at the end.
fn canonical_optimal_matching(
    n: usize,
    edges: &[(usize, usize, i128)],
    solution: &blossom::Solution,
) -> Result<Vec<(usize, usize)>> {
    let target = solution.weight;
    let mut current = solution.mate.clone();
    let mut used = vec![false; n];
    let mut kept: Vec<(usize, usize)> = Vec::new();
    let mut kept_weight: i128 = 0;

    for &(u, v, w) in edges {
        if used[u] || used[v] {
            continue;
        }
        // Complementary slackness: positive vertex-dual slack puts the edge
        // outside every optimal matching.
        if solution.dual[u] + solution.dual[v] > 2 * w {
            continue;
        }
        if current[u] == Some(v) {
            kept.push((u, v));
            kept_weight += w;
            used[u] = true;
            used[v] = true;
            continue;
        }
        let residual: Vec<(usize, usize, i128)> = edges
            .iter()
            .copied()
            .filter(|&(x, y, _)| {
                !used[x] && !used[y] && x != u && x != v && y != u && y != v
            })
            .collect();
        let rest = blossom::max_weight_matching(n, &residual)?;
        if kept_weight + w + rest.weight == target {
            kept.push((u, v));
            kept_weight += w;
            used[u] = true;
            used[v] = true;
            current = rest.mate;
        }
    }

    if kept_weight != target {
        return Err(Error::internal(format!(
            "canonicalized matching weight {kept_weight} lost optimality (target {target})"
        )));
    }
    Ok(kept)
}

/// Exhaustive oracle: enumerate every partition of the commuters into
/// edge-backed pairs and singletons and return the cheapest, with the same
/// lexicographic tie-break as [`social_optimum`]. Rejects instances with
/// more than 12 commuters.
pub fn brute_force_optimum(g: &MatchingGraph) -> Result<Assignment> {
    const MAX_N: usize = 12;
    let ids: Vec<CommuterId> = g.commuter_ids().cloned().collect();
    if ids.len() > MAX_N {
        return Err(Error::input(format!(
            "brute-force oracle limited to {MAX_N} commuters (got {})",
            ids.len()
        )));
    }
    let n = ids.len();
    let mut forward: Vec<Vec<usize>> = vec![Vec::new(); n.max(1)];
    for ((a, b), _) in g.edges() {
        let ai = ids.binary_search(a).expect("node present");
        let bi = ids.binary_search(b).expect("node present");
        forward[ai.min(bi)].push(ai.max(bi));
    }

    struct Search<'g> {
        g: &'g MatchingGraph,
        ids: &'g [CommuterId],
        forward: &'g [Vec<usize>],
        used: Vec<bool>,
        pairs: Vec<(usize, usize)>,
        best: Option<(f64, Vec<(usize, usize)>)>,
    }

    impl Search<'_> {
        fn leaf(&mut self) {
            // Canonical cost: pairs in ascending order, then singletons.
            let mut in_pair = vec![false; self.used.len()];
            let mut cost = 0.0;
            for &(a, b) in &self.pairs {
                cost += self.g.pair_cost(&self.ids[a], &self.ids[b]).expect("edge");
                in_pair[a] = true;
                in_pair[b] = true;
            }
            for (k, paired) in in_pair.iter().enumerate() {
                if !paired {
                    cost += self.g.self_cost(&self.ids[k]).expect("self cost");
                }
            }
            let better = match &self.best {
                None => true,
                Some((c, p)) => cost < *c || (cost == *c && self.pairs < *p),
            };
            if better {
                self.best = Some((cost, self.pairs.clone()));
            }
        }

        fn recurse(&mut self, from: usize) {
            let Some(first) = (from..self.used.len()).find(|&k| !self.used[k]) else {
                self.leaf();
                return;
            };
            // Option 1: first rides alone (remains unused at the leaf).
            self.used[first] = true;
            self.recurse(first + 1);
            // Option 2: pair first with any free partner along an edge.
            for k in 0..self.forward[first].len() {
                let j = self.forward[first][k];
                if self.used[j] {
                    continue;
                }
                self.used[j] = true;
                self.pairs.push((first, j));
                self.recurse(first + 1);
                self.pairs.pop();
                self.used[j] = false;
            }
            self.used[first] = false;
        }
    }

    let mut search = Search { g, ids: &ids, forward: &forward, used: vec![false; n], pairs: Vec::new(), best: None };
    if n == 0 {
        return Assignment::from_pairs(vec![], g);
    }
    search.recurse(0);
    let (_, pairs) = search.best.expect("at least the all-singleton assignment");
    Assignment::from_pairs(
        pairs.into_iter().map(|(a, b)| (ids[a].clone(), ids[b].clone())).collect(),
        g,
    )
}
