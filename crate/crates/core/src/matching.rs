//! Stable matching over the matching graph: the propose/suspend algorithm
//! extended with standalone rides, blocking-pair verification, and
//! cyclic-preference detection.
//!
//! Every unsuspended commuter proposes down their truncated preference list,
//! never re-proposing, and only to partners they prefer over their current
//! provisional match. A proposee keeps the best offer seen, displacing (and
//! unsuspending) a worse provisional partner. Commuters left unmatched when
//! the queue drains take their standalone ride.
//!
//! The result is verified stable before it is returned. When verification
//! finds a blocking pair the preference relation must contain a cycle
//! (possible only under segment-based sharing); the detected cycle is
//! returned as evidence instead of an assignment.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::Serialize;

use crate::mechanism::{payments, Mechanism, PreferenceOrder};
use crate::plan::MatchingGraph;
use crate::trip::CommuterId;
use crate::{Error, Result, EPS};

/// A feasible ride-sharing assignment: matched pairs plus singletons that
/// partition the commuter set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    /// Matched pairs, each ordered ascending, list sorted ascending.
    pub pairs: Vec<(CommuterId, CommuterId)>,
    /// Commuters riding alone, sorted ascending.
    pub singletons: Vec<CommuterId>,
    /// Sum of pair-edge costs plus standalone costs of singletons.
    pub social_cost: f64,
}

impl Assignment {
    /// Build an assignment from matched pairs, deriving singletons from the
    /// graph's commuter set and computing the social cost canonically
    /// (pairs in ascending order, then singletons in ascending order).
    pub fn from_pairs(pairs: Vec<(CommuterId, CommuterId)>, g: &MatchingGraph) -> Result<Self> {
        let mut norm: Vec<(CommuterId, CommuterId)> = pairs
            .into_iter()
            .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        norm.sort();
        let mut covered = BTreeSet::new();
        for (a, b) in &norm {
            if a == b {
                return Err(Error::internal(format!("degenerate pair ({a}, {b})")));
            }
            for id in [a, b] {
                if !covered.insert(id.clone()) {
                    return Err(Error::internal(format!("commuter {id} appears in two pairs")));
                }
                if g.trip(id).is_none() {
                    return Err(Error::input(format!("commuter {id} is not in the graph")));
                }
            }
        }
        let singletons: Vec<CommuterId> =
            g.commuter_ids().filter(|id| !covered.contains(*id)).cloned().collect();
        let mut cost = 0.0;
        for (a, b) in &norm {
            cost += g
                .pair_cost(a, b)
                .ok_or_else(|| Error::internal(format!("no pair edge for ({a}, {b})")))?;
        }
        for id in &singletons {
            cost += g
                .self_cost(id)
                .ok_or_else(|| Error::internal(format!("no standalone cost for {id}")))?;
        }
        Ok(Assignment { pairs: norm, singletons, social_cost: cost })
    }

    /// All covered commuters in ascending order.
    pub fn commuters(&self) -> Vec<CommuterId> {
        let mut ids: Vec<CommuterId> = self
            .pairs
            .iter()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .chain(self.singletons.iter().cloned())
            .collect();
        ids.sort();
        ids
    }

    /// Partner of `id`, if matched.
    pub fn partner_of(&self, id: &CommuterId) -> Option<&CommuterId> {
        self.pairs.iter().find_map(|(a, b)| {
            if a == id {
                Some(b)
            } else if b == id {
                Some(a)
            } else {
                None
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ProposalOutcome {
    /// Proposee was unmatched and accepted.
    Accepted,
    /// Proposee preferred its current partner.
    Rejected,
    /// Proposee accepted, displacing its previous partner.
    Displaced { previous: CommuterId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProposalEvent {
    pub proposer: CommuterId,
    pub proposee: CommuterId,
    #[serde(flatten)]
    pub outcome: ProposalOutcome,
}

/// Full proposal log of one run; replaying it from the initial state
/// reproduces the final assignment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MatchTrace {
    pub events: Vec<ProposalEvent>,
}

/// Result of a stable-matching run.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MatchOutcome {
    /// Verified stable assignment.
    Stable { assignment: Assignment, trace: MatchTrace },
    /// The proposal process terminated on an unstable configuration and a
    /// preference cycle certifies why; no assignment is produced.
    Cyclic {
        cycle: Vec<CommuterId>,
        blocking_pair: (CommuterId, CommuterId),
        trace: MatchTrace,
    },
}

/// Run the propose/suspend algorithm on `prefs` over `g`.
///
/// Proposals only travel along pairs present in *both* parties' truncated
/// lists; the proposal order processes unsuspended commuters from a queue in
/// ascending id order, re-enqueueing displaced or abandoned commuters at the
/// tail. The output is verified with a blocking-pair scan before returning.
pub fn stable_match(
    prefs: &BTreeMap<CommuterId, PreferenceOrder>,
    g: &MatchingGraph,
) -> Result<MatchOutcome> {
    let ids: Vec<CommuterId> = g.commuter_ids().cloned().collect();
    if prefs.len() != ids.len() || !ids.iter().all(|id| prefs.contains_key(id)) {
        return Err(Error::input("preference orders do not cover the commuter set"));
    }
    let index: HashMap<&CommuterId, usize> = ids.iter().enumerate().map(|(k, v)| (v, k)).collect();
    let n = ids.len();

    // Raw active options per commuter (strictly better than standalone).
    let raw: Vec<Vec<usize>> = ids
        .iter()
        .map(|id| {
            prefs[id]
                .active_options()
                .iter()
                .filter_map(|o| index.get(&o.partner).copied())
                .collect()
        })
        .collect();
    let raw_sets: Vec<BTreeSet<usize>> =
        raw.iter().map(|l| l.iter().copied().collect()).collect();
    // Mutual-consistency guard: keep an option only when both sides list it.
    let lists: Vec<Vec<usize>> = raw
        .iter()
        .enumerate()
        .map(|(i, l)| l.iter().copied().filter(|&j| raw_sets[j].contains(&i)).collect())
        .collect();
    let ranks: Vec<HashMap<usize, usize>> = lists
        .iter()
        .map(|l| l.iter().enumerate().map(|(r, &j)| (j, r)).collect())
        .collect();

    let max_len = lists.iter().map(Vec::len).max().unwrap_or(0);
    let budget = n * n * (1 + max_len);

    let mut partner: Vec<Option<usize>> = vec![None; n];
    let mut pointer: Vec<usize> = vec![0; n];
    let mut queue: VecDeque<usize> = (0..n).collect();
    let mut queued: Vec<bool> = vec![true; n];
    let mut trace = MatchTrace::default();
    let mut proposals = 0usize;
    let mut exhausted_budget = false;

    'outer: while let Some(i) = queue.pop_front() {
        queued[i] = false;
        loop {
            let current_rank = partner[i].map(|k| ranks[i][&k]);
            let Some(&j) = lists[i].get(pointer[i]) else { break };
            if current_rank.is_some_and(|r| pointer[i] >= r) {
                // Nothing unproposed beats the current partner.
                break;
            }
            pointer[i] += 1;
            proposals += 1;
            if proposals > budget {
                exhausted_budget = true;
                break 'outer;
            }
            let accepts = match partner[j] {
                None => true,
                Some(l) => ranks[j][&i] < ranks[j][&l],
            };
            if !accepts {
                trace.events.push(ProposalEvent {
                    proposer: ids[i].clone(),
                    proposee: ids[j].clone(),
                    outcome: ProposalOutcome::Rejected,
                });
                continue;
            }
            let outcome = match partner[j] {
                None => ProposalOutcome::Accepted,
                Some(l) => ProposalOutcome::Displaced { previous: ids[l].clone() },
            };
            trace.events.push(ProposalEvent {
                proposer: ids[i].clone(),
                proposee: ids[j].clone(),
                outcome,
            });
            // Dissolve both parties' previous matches; the abandoned
            // commuters resume proposing from their pointers.
            for old in [partner[i], partner[j]].into_iter().flatten() {
                partner[old] = None;
                if !queued[old] {
                    queue.push_back(old);
                    queued[old] = true;
                }
            }
            partner[i] = Some(j);
            partner[j] = Some(i);
            break; // proposer is suspended
        }
    }

    debug_assert!(
        exhausted_budget || proposals <= lists.iter().map(Vec::len).sum::<usize>(),
        "proposal count exceeded the sum of list lengths"
    );

    let mut pairs = Vec::new();
    for i in 0..n {
        if let Some(j) = partner[i] {
            if i < j {
                pairs.push((ids[i].clone(), ids[j].clone()));
            }
        }
    }
    let assignment = Assignment::from_pairs(pairs, g)?;

    let blocking = if exhausted_budget {
        Some((CommuterId::new("<budget>"), CommuterId::new("<budget>")))
    } else {
        blocking_pair_from_prefs(prefs, g, &assignment)
    };
    match blocking {
        None => Ok(MatchOutcome::Stable { assignment, trace }),
        Some(pair) => match find_first_cycle(prefs) {
            Some(cycle) => Ok(MatchOutcome::Cyclic { cycle, blocking_pair: pair, trace }),
            None => Err(Error::internal(format!(
                "unstable outcome without a cyclic preference (pair {} / {})",
                pair.0, pair.1
            ))),
        },
    }
}

/// Blocking-pair scan using the payments recorded in the preference orders.
fn blocking_pair_from_prefs(
    prefs: &BTreeMap<CommuterId, PreferenceOrder>,
    g: &MatchingGraph,
    a: &Assignment,
) -> Option<(CommuterId, CommuterId)> {
    let current = current_payments_from_prefs(prefs, a);
    for ((x, y), _) in g.edges() {
        let (Some(px), Some(py)) = (prefs[x].payment_for(y), prefs[y].payment_for(x)) else {
            continue;
        };
        if px < current[x] - EPS && py < current[y] - EPS {
            return Some((x.clone(), y.clone()));
        }
    }
    None
}

fn current_payments_from_prefs(
    prefs: &BTreeMap<CommuterId, PreferenceOrder>,
    a: &Assignment,
) -> BTreeMap<CommuterId, f64> {
    let mut out = BTreeMap::new();
    for id in a.commuters() {
        let payment = match a.partner_of(&id) {
            Some(p) => prefs[&id]
                .payment_for(p)
                .expect("matched partner is listed in the preference order"),
            None => prefs[&id].standalone_cost,
        };
        out.insert(id, payment);
    }
    out
}

/// First pair `(i, j)` with an edge in `g` where both sides would pay
/// strictly less under `mech` than in their current rides (a singleton's
/// current payment is its standalone cost). Scans edges in ascending order.
pub fn find_blocking_pair(
    a: &Assignment,
    mech: Mechanism,
    g: &MatchingGraph,
) -> Result<Option<(CommuterId, CommuterId)>> {
    let mut current: BTreeMap<CommuterId, f64> = BTreeMap::new();
    for id in a.commuters() {
        if g.trip(&id).is_none() {
            return Err(Error::input(format!("assignment covers unknown commuter {id}")));
        }
    }
    for (x, y) in &a.pairs {
        let edge = g
            .pair_edge(x, y)
            .ok_or_else(|| Error::input(format!("assignment pair ({x}, {y}) has no edge")))?;
        let profile = payments(
            mech,
            &edge.plan,
            g.self_cost(x).expect("self cost"),
            g.self_cost(y).expect("self cost"),
        )?;
        current.insert(x.clone(), profile.payment_of(x).expect("member"));
        current.insert(y.clone(), profile.payment_of(y).expect("member"));
    }
    for id in &a.singletons {
        current.insert(id.clone(), g.self_cost(id).expect("self cost"));
    }
    for ((x, y), edge) in g.edges() {
        let profile = payments(
            mech,
            &edge.plan,
            g.self_cost(x).expect("self cost"),
            g.self_cost(y).expect("self cost"),
        )?;
        let px = profile.payment_of(x).expect("member");
        let py = profile.payment_of(y).expect("member");
        if px < current[x] - EPS && py < current[y] - EPS {
            return Ok(Some((x.clone(), y.clone())));
        }
    }
    Ok(None)
}

/// Nodes of the prefers-over relation: `(prev, cur)` means the option pair
/// `{prev, cur}` with `cur` making the next comparison. An arc
/// `(prev, cur) -> (cur, next)` exists when `cur` strictly prefers sharing
/// with `prev` over sharing with `next`. Cycles in this relation are exactly
/// the cyclic preferences that can make the proposal process unstable.
struct PreferenceRelation {
    nodes: Vec<(CommuterId, CommuterId)>,
    node_index: BTreeMap<(CommuterId, CommuterId), usize>,
    /// Owner's active list per owner id, used to enumerate arcs lazily.
    active: BTreeMap<CommuterId, Vec<CommuterId>>,
}

impl PreferenceRelation {
    fn build(prefs: &BTreeMap<CommuterId, PreferenceOrder>) -> Self {
        let mut nodes = Vec::new();
        let mut node_index = BTreeMap::new();
        let mut active = BTreeMap::new();
        for (owner, order) in prefs {
            let options: Vec<CommuterId> =
                order.active_options().iter().map(|o| o.partner.clone()).collect();
            for partner in &options {
                let key = (partner.clone(), owner.clone());
                if !node_index.contains_key(&key) {
                    node_index.insert(key.clone(), nodes.len());
                    nodes.push(key);
                }
            }
            active.insert(owner.clone(), options);
        }
        PreferenceRelation { nodes, node_index, active }
    }

    /// Out-neighbors of node `(prev, cur)`: nodes `(cur, next)` for every
    /// `next` ranked strictly below `prev` by `cur`.
    fn neighbors(&self, node: usize) -> Vec<usize> {
        let (prev, cur) = &self.nodes[node];
        let list = &self.active[cur];
        let pos = list.iter().position(|p| p == prev).expect("prev is ranked by cur");
        list[pos + 1..]
            .iter()
            .filter_map(|next| self.node_index.get(&(cur.clone(), next.clone())).copied())
            .collect()
    }

    /// Map a node cycle to the commuter sequence, rotated so the smallest
    /// commuter leads.
    fn to_commuters(&self, cycle: &[usize]) -> Vec<CommuterId> {
        let seq: Vec<CommuterId> = cycle.iter().map(|&n| self.nodes[n].1.clone()).collect();
        let min_pos = seq
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.cmp(b.1))
            .map(|(p, _)| p)
            .unwrap_or(0);
        let mut rotated = seq[min_pos..].to_vec();
        rotated.extend_from_slice(&seq[..min_pos]);
        rotated
    }
}

/// First cycle of the prefers-over relation, if any, via depth-first search.
fn find_first_cycle(prefs: &BTreeMap<CommuterId, PreferenceOrder>) -> Option<Vec<CommuterId>> {
    let rel = PreferenceRelation::build(prefs);
    let n = rel.nodes.len();
    let mut color = vec![0u8; n]; // 0 white, 1 on stack, 2 done
    let mut depth_of = vec![usize::MAX; n];
    for start in 0..n {
        if color[start] != 0 {
            continue;
        }
        let mut stack: Vec<(usize, Vec<usize>, usize)> = Vec::new();
        let neighbors = rel.neighbors(start);
        color[start] = 1;
        depth_of[start] = 0;
        stack.push((start, neighbors, 0));
        while let Some((node, neigh, cursor)) = stack.last_mut() {
            if *cursor >= neigh.len() {
                color[*node] = 2;
                depth_of[*node] = usize::MAX;
                stack.pop();
                continue;
            }
            let next = neigh[*cursor];
            *cursor += 1;
            match color[next] {
                0 => {
                    color[next] = 1;
                    depth_of[next] = stack.len();
                    let nn = rel.neighbors(next);
                    stack.push((next, nn, 0));
                }
                1 => {
                    let from = depth_of[next];
                    let cycle: Vec<usize> = stack[from..].iter().map(|(v, _, _)| *v).collect();
                    return Some(rel.to_commuters(&cycle));
                }
                _ => {}
            }
        }
    }
    None
}

/// All elementary cycles of the prefers-over relation (length >= 3 always,
/// by construction of the relation), as commuter sequences. Empty when the
/// relation is acyclic, which is guaranteed for the equal, egalitarian and
/// proportional mechanisms. Options ranked at or below standalone cannot
/// participate and are excluded.
pub fn detect_cycles(prefs: &BTreeMap<CommuterId, PreferenceOrder>) -> Vec<Vec<CommuterId>> {
    let rel = PreferenceRelation::build(prefs);
    let n = rel.nodes.len();
    let adjacency: Vec<Vec<usize>> = (0..n).map(|v| rel.neighbors(v)).collect();
    let cycles = johnson_elementary_cycles(&adjacency);
    cycles
        .iter()
        .map(|c| {
            debug_assert!(c.len() >= 3, "prefers-over relation admits no 1- or 2-cycles");
            rel.to_commuters(c)
        })
        .collect()
}

/// Johnson's algorithm for all elementary circuits of a digraph.
fn johnson_elementary_cycles(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct State<'a> {
        adjacency: &'a [Vec<usize>],
        start: usize,
        allowed: Vec<bool>,
        blocked: Vec<bool>,
        block_list: Vec<Vec<usize>>,
        stack: Vec<usize>,
        cycles: Vec<Vec<usize>>,
    }

    impl State<'_> {
        fn unblock(&mut self, v: usize) {
            self.blocked[v] = false;
            let pending = std::mem::take(&mut self.block_list[v]);
            for w in pending {
                if self.blocked[w] {
                    self.unblock(w);
                }
            }
        }

        fn circuit(&mut self, v: usize) -> bool {
            let mut found = false;
            self.stack.push(v);
            self.blocked[v] = true;
            for &w in &self.adjacency[v].to_vec() {
                if !self.allowed[w] {
                    continue;
                }
                if w == self.start {
                    self.cycles.push(self.stack.clone());
                    found = true;
                } else if !self.blocked[w] && self.circuit(w) {
                    found = true;
                }
            }
            if found {
                self.unblock(v);
            } else {
                for &w in &self.adjacency[v].to_vec() {
                    if self.allowed[w] && !self.block_list[w].contains(&v) {
                        self.block_list[w].push(v);
                    }
                }
            }
            self.stack.pop();
            found
        }
    }

    let n = adjacency.len();
    let mut all_cycles = Vec::new();
    for start in 0..n {
        // Restrict to vertices >= start; cycles through smaller vertices
        // were already enumerated.
        let allowed: Vec<bool> = (0..n).map(|v| v >= start).collect();
        let component = scc_of(adjacency, &allowed, start);
        if component.iter().filter(|&&b| b).count() < 2 {
            continue;
        }
        let mut state = State {
            adjacency,
            start,
            allowed: component,
            blocked: vec![false; n],
            block_list: vec![Vec::new(); n],
            stack: Vec::new(),
            cycles: Vec::new(),
        };
        state.circuit(start);
        all_cycles.extend(state.cycles);
    }
    all_cycles
}

/// Membership mask of the strongly connected component containing `start`
/// within the `allowed` sub-digraph (Tarjan).
fn scc_of(adjacency: &[Vec<usize>], allowed: &[bool], start: usize) -> Vec<bool> {
    let n = adjacency.len();
    let mut index = vec![usize::MAX; n];
    let mut lowlink = vec![usize::MAX; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next_index = 0usize;
    let mut result = vec![false; n];

    // Iterative Tarjan rooted at `start` only: any SCC containing `start`
    // is reachable from it.
    enum Frame {
        Enter(usize),
        Resume(usize, usize),
    }
    let mut work = vec![Frame::Enter(start)];
    let mut parents: Vec<(usize, usize)> = Vec::new();
    while let Some(frame) = work.pop() {
        match frame {
            Frame::Enter(v) => {
                if index[v] != usize::MAX {
                    continue;
                }
                index[v] = next_index;
                lowlink[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
                work.push(Frame::Resume(v, 0));
            }
            Frame::Resume(v, mut cursor) => {
                let mut descended = false;
                while cursor < adjacency[v].len() {
                    let w = adjacency[v][cursor];
                    cursor += 1;
                    if !allowed[w] {
                        continue;
                    }
                    if index[w] == usize::MAX {
                        work.push(Frame::Resume(v, cursor));
                        work.push(Frame::Enter(w));
                        parents.push((v, w));
                        descended = true;
                        break;
                    } else if on_stack[w] {
                        lowlink[v] = lowlink[v].min(index[w]);
                    }
                }
                if descended {
                    continue;
                }
                // All neighbors processed: close the SCC if v is a root.
                if lowlink[v] == index[v] {
                    let mut members = Vec::new();
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        members.push(w);
                        if w == v {
                            break;
                        }
                    }
                    if members.contains(&start) {
                        for w in members {
                            result[w] = true;
                        }
                    }
                }
                if let Some(&(p, c)) = parents.last() {
                    if c == v {
                        lowlink[p] = lowlink[p].min(lowlink[v]);
                        parents.pop();
                    }
                }
            }
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{build_preferences, RankedOption};
    use crate::plan::tests::{fig_network, fig_trips};
    use crate::plan::{build_matching_graph, PairEdge, PlanStop, SharedRidePlan, StopEvent};
    use crate::plan::RideTopology;
    use crate::road::RouteLeg;
    use crate::trip::TripRequest;

    fn fig_graph() -> MatchingGraph {
        build_matching_graph(&fig_network(), &fig_trips(), f64::INFINITY).unwrap().graph
    }

    fn run(mech: Mechanism, g: &MatchingGraph) -> MatchOutcome {
        let prefs = build_preferences(mech, g).unwrap();
        stable_match(&prefs, g).unwrap()
    }

    fn expect_stable(outcome: MatchOutcome) -> (Assignment, MatchTrace) {
        match outcome {
            MatchOutcome::Stable { assignment, trace } => (assignment, trace),
            MatchOutcome::Cyclic { cycle, .. } => panic!("unexpected cycle {cycle:?}"),
        }
    }

    #[test]
    fn fig_equal_matches_i_with_j() {
        let g = fig_graph();
        let (a, _) = expect_stable(run(Mechanism::Equal, &g));
        assert_eq!(a.pairs, vec![("i".into(), "j".into())]);
        assert_eq!(a.singletons, vec!["k".into(), "l".into()]);
        assert!((a.social_cost - 16.3).abs() < EPS);
        assert!(find_blocking_pair(&a, Mechanism::Equal, &g).unwrap().is_none());
    }

    #[test]
    fn fig_egalitarian_reaches_social_optimum() {
        let g = fig_graph();
        let (a, _) = expect_stable(run(Mechanism::Egalitarian, &g));
        assert_eq!(a.pairs, vec![("i".into(), "k".into()), ("j".into(), "l".into())]);
        assert!(a.singletons.is_empty());
        assert!((a.social_cost - 14.0).abs() < EPS);
    }

    #[test]
    fn fig_proportional_reaches_social_optimum() {
        let g = fig_graph();
        let (a, _) = expect_stable(run(Mechanism::Proportional, &g));
        assert_eq!(a.pairs, vec![("i".into(), "k".into()), ("j".into(), "l".into())]);
        assert!((a.social_cost - 14.0).abs() < EPS);
    }

    #[test]
    fn fig_segment_based_matches_i_with_j() {
        let g = fig_graph();
        let (a, _) = expect_stable(run(Mechanism::SegmentBased, &g));
        assert_eq!(a.pairs, vec![("i".into(), "j".into())]);
        assert!((a.social_cost - 16.3).abs() < EPS);
    }

    #[test]
    fn fig_outputs_are_stable_under_every_mechanism() {
        let g = fig_graph();
        for mech in Mechanism::ALL {
            let (a, _) = expect_stable(run(mech, &g));
            assert!(find_blocking_pair(&a, mech, &g).unwrap().is_none(), "{mech}");
        }
    }

    #[test]
    fn single_commuter_is_a_singleton() {
        let land = fig_network();
        let trips = vec![fig_trips()[0].clone()];
        let g = build_matching_graph(&land, &trips, 180.0).unwrap().graph;
        let (a, trace) = expect_stable(run(Mechanism::Equal, &g));
        assert!(a.pairs.is_empty());
        assert_eq!(a.singletons, vec!["i".into()]);
        assert!((a.social_cost - 4.0).abs() < EPS);
        assert!(trace.events.is_empty());
    }

    #[test]
    fn all_singletons_blocked_by_cheapest_pair() {
        let g = fig_graph();
        let a = Assignment::from_pairs(vec![], &g).unwrap();
        let bp = find_blocking_pair(&a, Mechanism::Equal, &g).unwrap();
        assert_eq!(bp, Some(("i".into(), "j".into())));
    }

    #[test]
    fn no_edges_has_no_blocking_pair() {
        let land = fig_network();
        let trips = vec![fig_trips()[0].clone(), fig_trips()[2].clone()];
        let g = build_matching_graph(&land, &trips, 0.0).unwrap().graph;
        // 0-second window with equal departures still pairs them; use
        // distinct departures instead.
        let mut t2 = fig_trips()[2].clone();
        t2.earliest_departure_s = 10.0;
        let g2 = build_matching_graph(&land, &[trips[0].clone(), t2], 0.0).unwrap().graph;
        assert_eq!(g2.edge_count(), 0);
        let a = Assignment::from_pairs(vec![], &g2).unwrap();
        assert!(find_blocking_pair(&a, Mechanism::Equal, &g2).unwrap().is_none());
        let _ = g;
    }

    #[test]
    fn trace_replay_reproduces_assignment() {
        let g = fig_graph();
        for mech in Mechanism::ALL {
            let (a, trace) = expect_stable(run(mech, &g));
            let mut partner: BTreeMap<CommuterId, CommuterId> = BTreeMap::new();
            for ev in &trace.events {
                match &ev.outcome {
                    ProposalOutcome::Rejected => {}
                    ProposalOutcome::Accepted | ProposalOutcome::Displaced { .. } => {
                        if let Some(old) = partner.remove(&ev.proposer) {
                            partner.remove(&old);
                        }
                        if let Some(old) = partner.remove(&ev.proposee) {
                            partner.remove(&old);
                        }
                        partner.insert(ev.proposer.clone(), ev.proposee.clone());
                        partner.insert(ev.proposee.clone(), ev.proposer.clone());
                    }
                }
            }
            let mut replayed: Vec<(CommuterId, CommuterId)> = partner
                .iter()
                .filter(|(x, y)| x < y)
                .map(|(x, y)| (x.clone(), y.clone()))
                .collect();
            replayed.sort();
            assert_eq!(replayed, a.pairs, "{mech}");
        }
    }

    /// Synthetic three-commuter instance with rock-paper-scissors segment
    /// payments: a prefers b, b prefers c, c prefers a.
    fn cyclic_graph() -> (MatchingGraph, BTreeMap<CommuterId, PreferenceOrder>) {
        fn pair_plan(embedded: &str, host: &str) -> SharedRidePlan {
            let legs = [0.5f64, 4.0, 0.5];
            let mk = |k: usize, cost: f64| RouteLeg {
                from: format!("w{k}"),
                to: format!("w{}", k + 1),
                cost,
                travel_time_s: 60.0,
                distance: cost,
                via: vec![format!("w{k}"), format!("w{}", k + 1)],
            };
            SharedRidePlan {
                topology: RideTopology::Hitchhiking {
                    embedded: embedded.into(),
                    host: host.into(),
                },
                stops: vec![
                    PlanStop { junction: "w0".into(), arrival_s: 0.0, event: StopEvent::Pickup(host.into()) },
                    PlanStop { junction: "w1".into(), arrival_s: 60.0, event: StopEvent::Pickup(embedded.into()) },
                    PlanStop { junction: "w2".into(), arrival_s: 120.0, event: StopEvent::Dropoff(embedded.into()) },
                    PlanStop { junction: "w3".into(), arrival_s: 180.0, event: StopEvent::Dropoff(host.into()) },
                ],
                legs: vec![mk(0, legs[0]), mk(1, legs[1]), mk(2, legs[2])],
                total_cost: 5.0,
                rider_distances: BTreeMap::from([
                    (CommuterId::new(embedded), 4.0),
                    (CommuterId::new(host), 5.0),
                ]),
            }
        }
        fn self_plan(owner: &str) -> SharedRidePlan {
            SharedRidePlan {
                topology: RideTopology::Standalone { owner: owner.into() },
                stops: vec![
                    PlanStop { junction: format!("{owner}s"), arrival_s: 0.0, event: StopEvent::Pickup(owner.into()) },
                    PlanStop { junction: format!("{owner}d"), arrival_s: 60.0, event: StopEvent::Dropoff(owner.into()) },
                ],
                legs: vec![RouteLeg {
                    from: format!("{owner}s"),
                    to: format!("{owner}d"),
                    cost: 3.5,
                    travel_time_s: 60.0,
                    distance: 3.5,
                    via: vec![format!("{owner}s"), format!("{owner}d")],
                }],
                total_cost: 3.5,
                rider_distances: BTreeMap::from([(CommuterId::new(owner), 3.5)]),
            }
        }
        let trips: BTreeMap<CommuterId, TripRequest> = ["a", "b", "c"]
            .into_iter()
            .map(|o| {
                (
                    CommuterId::new(o),
                    TripRequest::new(o, format!("{o}s"), format!("{o}d"), 0.0, 1e6).unwrap(),
                )
            })
            .collect();
        let self_plans: BTreeMap<CommuterId, SharedRidePlan> =
            ["a", "b", "c"].into_iter().map(|o| (CommuterId::new(o), self_plan(o))).collect();
        // Embedded rider pays 2, host pays 3; both beat standalone 3.5.
        // (a,b): a embedded -> a pays 2 with b; b pays 3 with a.
        // (b,c): b embedded -> b pays 2 with c; c pays 3 with b.
        // (a,c): c embedded -> c pays 2 with a; a pays 3 with c.
        let pair_edges = BTreeMap::from([
            (
                (CommuterId::new("a"), CommuterId::new("b")),
                PairEdge { plan: pair_plan("a", "b"), separation: None },
            ),
            (
                (CommuterId::new("b"), CommuterId::new("c")),
                PairEdge { plan: pair_plan("b", "c"), separation: None },
            ),
            (
                (CommuterId::new("a"), CommuterId::new("c")),
                PairEdge { plan: pair_plan("c", "a"), separation: None },
            ),
        ]);
        let g = MatchingGraph::from_parts(trips, self_plans, pair_edges);
        let prefs = build_preferences(Mechanism::SegmentBased, &g).unwrap();
        (g, prefs)
    }

    #[test]
    fn rock_paper_scissors_payments_yield_one_cycle() {
        let (_, prefs) = cyclic_graph();
        let cycles = detect_cycles(&prefs);
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].len(), 3);
        assert_eq!(cycles[0][0], "a".into());
    }

    #[test]
    fn rock_paper_scissors_match_reports_cyclic_failure() {
        let (g, prefs) = cyclic_graph();
        match stable_match(&prefs, &g).unwrap() {
            MatchOutcome::Cyclic { cycle, blocking_pair, .. } => {
                assert!(cycle.len() >= 3);
                let cycles = detect_cycles(&prefs);
                assert!(cycles.contains(&cycle), "{cycle:?} not confirmed by {cycles:?}");
                assert!(g.pair_edge(&blocking_pair.0, &blocking_pair.1).is_some());
            }
            MatchOutcome::Stable { assignment, .. } => {
                panic!("expected cyclic failure, got {assignment:?}")
            }
        }
    }

    #[test]
    fn acyclic_mechanisms_have_no_cycles_on_fig() {
        let g = fig_graph();
        for mech in [Mechanism::Equal, Mechanism::Egalitarian, Mechanism::Proportional] {
            let prefs = build_preferences(mech, &g).unwrap();
            assert!(detect_cycles(&prefs).is_empty(), "{mech}");
        }
    }

    #[test]
    fn empty_preferences_have_no_cycles() {
        let prefs: BTreeMap<CommuterId, PreferenceOrder> = [("a", 4.0), ("b", 5.0)]
            .into_iter()
            .map(|(o, c)| {
                (
                    CommuterId::new(o),
                    PreferenceOrder {
                        owner: o.into(),
                        standalone_cost: c,
                        ranked_options: vec![],
                        standalone_rank: 0,
                    },
                )
            })
            .collect();
        assert!(detect_cycles(&prefs).is_empty());
    }

    #[test]
    fn hand_built_cycle_is_detected_from_orders_alone() {
        // a ranks (c, b), b ranks (a, c), c ranks (b, a): one 3-cycle.
        let mk = |owner: &str, first: &str, second: &str| {
            (
                CommuterId::new(owner),
                PreferenceOrder {
                    owner: owner.into(),
                    standalone_cost: 10.0,
                    ranked_options: vec![
                        RankedOption { partner: first.into(), payment: 1.0 },
                        RankedOption { partner: second.into(), payment: 2.0 },
                    ],
                    standalone_rank: 2,
                },
            )
        };
        let prefs: BTreeMap<_, _> =
            [mk("a", "c", "b"), mk("b", "a", "c"), mk("c", "b", "a")].into_iter().collect();
        let cycles = detect_cycles(&prefs);
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].len(), 3);
        assert!(find_first_cycle(&prefs).is_some());
    }
}
