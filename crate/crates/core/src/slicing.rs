//! Slice validity, enumeration, scoring and ranking.
//!
//! A slice is a set of function nodes that together cover every directive,
//! contains no ancestor/descendant pair, and whose shared directives can be
//! resolved to exactly one owner (members must enter a shared directive
//! through different immediate parents). After resolution every member must
//! own at least one directive.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::{Duration, Instant};

use fixedbitset::FixedBitSet;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{DotAnnotations, FdGraph, NodeId, NodeKind};
use crate::metrics::{self, MembershipMap};
use crate::ratio::{self, Rational};

/// Default cap on function nodes for enumeration workflows.
pub const DEFAULT_NODE_CAP: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Slice {
    members: BTreeSet<NodeId>,
    membership: MembershipMap,
}

impl Slice {
    /// Checks `members` against the graph and resolves membership.
    pub fn new<'a>(graph: &FdGraph, members: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let members: Vec<&str> = members.into_iter().collect();
        let check = is_valid_slice(graph, members.iter().copied());
        if !check.valid {
            let detail: Vec<String> = check.violations.iter().map(ToString::to_string).collect();
            return Err(Error::InvalidSlice(detail.join("; ")));
        }
        let ids: Vec<NodeId> = members.iter().map(|m| NodeId::from(*m)).collect();
        let membership = metrics::resolve_membership(graph, &ids)?;
        Ok(Slice {
            members: ids.into_iter().collect(),
            membership,
        })
    }

    pub fn members(&self) -> &BTreeSet<NodeId> {
        &self.members
    }

    pub fn membership(&self) -> &MembershipMap {
        &self.membership
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.members.contains(id)
    }

    /// Members joined with commas, e.g. `n_1,n_3,n_7`.
    pub fn key(&self) -> String {
        self.members
            .iter()
            .map(NodeId::as_str)
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl PartialOrd for Slice {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Slice {
    /// Canonical order: lexicographic over sorted member ids.
    fn cmp(&self, other: &Self) -> Ordering {
        self.members.cmp(&other.members)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SliceViolation {
    Empty,
    UnknownNode { node: NodeId },
    GraphCyclic,
    ContainsMission { node: NodeId },
    ContainsDirective { node: NodeId },
    AncestorPair { ancestor: NodeId, descendant: NodeId },
    Uncovered { directive: NodeId },
    UnresolvableSharing { directive: NodeId, parent: NodeId, first: NodeId, second: NodeId },
    EmptyMember { node: NodeId },
}

impl fmt::Display for SliceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SliceViolation::Empty => write!(f, "slice is empty"),
            SliceViolation::UnknownNode { node } => write!(f, "unknown node {node}"),
            SliceViolation::GraphCyclic => write!(f, "graph is cyclic"),
            SliceViolation::ContainsMission { node } => {
                write!(f, "mission {node} cannot be a capability")
            }
            SliceViolation::ContainsDirective { node } => {
                write!(f, "directive {node} cannot be a capability")
            }
            SliceViolation::AncestorPair { ancestor, descendant } => {
                write!(f, "{ancestor} is an ancestor of {descendant}")
            }
            SliceViolation::Uncovered { directive } => write!(f, "directive {directive} is not covered"),
            SliceViolation::UnresolvableSharing { directive, parent, first, second } => write!(
                f,
                "{first} and {second} both reach {directive} through {parent}"
            ),
            SliceViolation::EmptyMember { node } => {
                write!(f, "{node} owns no directive after resolution")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SliceCheck {
    pub valid: bool,
    pub violations: Vec<SliceViolation>,
}

/// Checks every slice constraint and reports all violations found.
pub fn is_valid_slice<'a>(
    graph: &FdGraph,
    candidate: impl IntoIterator<Item = &'a str>,
) -> SliceCheck {
    let mut violations = Vec::new();
    let mut members = BTreeSet::new();
    for id in candidate {
        match graph.ix(id) {
            Ok(i) => {
                members.insert(i);
            }
            Err(_) => violations.push(SliceViolation::UnknownNode { node: id.into() }),
        }
    }
    let done = |violations: Vec<SliceViolation>| SliceCheck {
        valid: violations.is_empty(),
        violations,
    };
    if members.is_empty() {
        violations.push(SliceViolation::Empty);
        return done(violations);
    }
    let Ok(reach) = graph.reach() else {
        violations.push(SliceViolation::GraphCyclic);
        return done(violations);
    };
    let mut members: Vec<usize> = members.into_iter().collect();
    members.sort_by(|a, b| graph.id_at(*a).cmp(graph.id_at(*b)));

    for &m in &members {
        match graph.node_at(m).kind {
            NodeKind::Mission => violations.push(SliceViolation::ContainsMission {
                node: graph.id_at(m).clone(),
            }),
            NodeKind::Directive => violations.push(SliceViolation::ContainsDirective {
                node: graph.id_at(m).clone(),
            }),
            NodeKind::Function => {}
        }
    }

    let mut related = BTreeSet::new();
    for (i, &a) in members.iter().enumerate() {
        for &b in &members[i + 1..] {
            let pair = if reach.descendants[a].contains(b) {
                Some((a, b))
            } else if reach.descendants[b].contains(a) {
                Some((b, a))
            } else {
                None
            };
            if let Some((anc, desc)) = pair {
                related.insert((a.min(b), a.max(b)));
                violations.push(SliceViolation::AncestorPair {
                    ancestor: graph.id_at(anc).clone(),
                    descendant: graph.id_at(desc).clone(),
                });
            }
        }
    }

    let mut covered = FixedBitSet::with_capacity(graph.directive_count());
    for &m in &members {
        covered.union_with(&reach.leaves[m]);
    }
    for pos in 0..graph.directive_count() {
        if !covered.contains(pos) {
            violations.push(SliceViolation::Uncovered {
                directive: graph.id_at(graph.directive_ix(pos)).clone(),
            });
        }
    }

    for pos in 0..graph.directive_count() {
        let d = graph.directive_ix(pos);
        let reaching: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&m| reach.leaves[m].contains(pos))
            .collect();
        if reaching.len() < 2 {
            continue;
        }
        let entries: Vec<Vec<usize>> = reaching
            .iter()
            .map(|&m| metrics::entry_parents(graph, m, d).unwrap_or_default())
            .collect();
        for i in 0..reaching.len() {
            for j in i + 1..reaching.len() {
                let (a, b) = (reaching[i], reaching[j]);
                if related.contains(&(a.min(b), a.max(b))) {
                    continue;
                }
                if let Some(&p) = entries[i].iter().find(|p| entries[j].contains(p)) {
                    violations.push(SliceViolation::UnresolvableSharing {
                        directive: graph.id_at(d).clone(),
                        parent: graph.id_at(p).clone(),
                        first: graph.id_at(a).clone(),
                        second: graph.id_at(b).clone(),
                    });
                }
            }
        }
    }

    if violations.is_empty() {
        if let Ok(resolution) = metrics::resolve(graph, &members) {
            for &m in &members {
                if !resolution.owner.contains(&Some(m)) {
                    violations.push(SliceViolation::EmptyMember {
                        node: graph.id_at(m).clone(),
                    });
                }
            }
        }
    }
    done(violations)
}

#[derive(Clone, Debug)]
pub struct EnumerationLimits {
    pub max_slices: Option<usize>,
    pub time_budget: Option<Duration>,
    pub node_cap: usize,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        EnumerationLimits {
            max_slices: None,
            time_budget: None,
            node_cap: DEFAULT_NODE_CAP,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Enumeration {
    /// Slices in canonical order.
    pub slices: Vec<Slice>,
    /// `false` when a limit cut the search short.
    pub complete: bool,
}

/// Search tables over function positions (functions sorted by id).
struct SearchSpace<'g> {
    graph: &'g FdGraph,
    funcs: Vec<usize>,
    leaves: Vec<FixedBitSet>,
    conflicts: Vec<FixedBitSet>,
    /// Per directive position, function positions that reach it.
    covering: Vec<Vec<usize>>,
}

impl<'g> SearchSpace<'g> {
    fn build(graph: &'g FdGraph) -> Result<Self> {
        let reach = graph.reach()?;
        let mut funcs: Vec<usize> = (0..graph.node_count())
            .filter(|&i| graph.node_at(i).kind == NodeKind::Function)
            .collect();
        funcs.sort_by(|a, b| graph.id_at(*a).cmp(graph.id_at(*b)));
        let k = funcs.len();
        let mut pos_of = vec![usize::MAX; graph.node_count()];
        for (p, &f) in funcs.iter().enumerate() {
            pos_of[f] = p;
        }
        let leaves: Vec<FixedBitSet> = funcs.iter().map(|&f| reach.leaves[f].clone()).collect();

        let mut covering = vec![Vec::new(); graph.directive_count()];
        for (p, set) in leaves.iter().enumerate() {
            for d in set.ones() {
                covering[d].push(p);
            }
        }

        let mut conflicts = vec![FixedBitSet::with_capacity(k); k];
        for (p, &f) in funcs.iter().enumerate() {
            for other in reach.descendants[f].ones().chain(reach.ancestors[f].ones()) {
                if pos_of[other] != usize::MAX {
                    conflicts[p].insert(pos_of[other]);
                }
            }
        }
        for (pos, cover) in covering.iter().enumerate() {
            if cover.len() < 2 {
                continue;
            }
            let d = graph.directive_ix(pos);
            let entries: Vec<Vec<usize>> = cover
                .iter()
                .map(|&p| metrics::entry_parents(graph, funcs[p], d))
                .collect::<Result<_>>()?;
            for i in 0..cover.len() {
                for j in i + 1..cover.len() {
                    if entries[i].iter().any(|e| entries[j].contains(e)) {
                        conflicts[cover[i]].insert(cover[j]);
                        conflicts[cover[j]].insert(cover[i]);
                    }
                }
            }
        }
        Ok(SearchSpace {
            graph,
            funcs,
            leaves,
            conflicts,
            covering,
        })
    }
}

struct Search<'s, 'g> {
    space: &'s SearchSpace<'g>,
    limits: &'s EnumerationLimits,
    started: Instant,
    visited: u64,
    found: Vec<Slice>,
    truncated: bool,
}

impl Search<'_, '_> {
    fn out_of_budget(&mut self) -> bool {
        if self.truncated {
            return true;
        }
        self.visited += 1;
        if let Some(budget) = self.limits.time_budget {
            if self.visited % 256 == 0 && self.started.elapsed() > budget {
                self.truncated = true;
            }
        }
        self.truncated
    }

    fn cover(&mut self, chosen: &mut Vec<usize>, covered: &FixedBitSet, blocked: &FixedBitSet) {
        if self.out_of_budget() {
            return;
        }
        if covered.is_full() {
            let available: Vec<usize> = blocked.zeroes().collect();
            self.extend(chosen, blocked, &available, 0);
            return;
        }
        // most constrained uncovered directive first
        let mut pick: Option<(usize, usize)> = None;
        for d in covered.zeroes() {
            let count = self.space.covering[d]
                .iter()
                .filter(|&&p| !blocked.contains(p))
                .count();
            if pick.is_none_or(|(_, best)| count < best) {
                pick = Some((d, count));
                if count == 0 {
                    return;
                }
            }
        }
        let (d, _) = pick.expect("some directive is uncovered");
        let mut excluded = blocked.clone();
        for &c in &self.space.covering[d] {
            if blocked.contains(c) {
                continue;
            }
            let mut next_blocked = excluded.clone();
            next_blocked.union_with(&self.space.conflicts[c]);
            next_blocked.insert(c);
            let mut next_covered = covered.clone();
            next_covered.union_with(&self.space.leaves[c]);
            chosen.push(c);
            self.cover(chosen, &next_covered, &next_blocked);
            chosen.pop();
            if self.truncated {
                return;
            }
            excluded.insert(c);
        }
    }

    /// All directives covered: emit `chosen` plus every compatible subset of
    /// the remaining available functions.
    fn extend(&mut self, chosen: &mut Vec<usize>, blocked: &FixedBitSet, available: &[usize], start: usize) {
        self.emit(chosen);
        for i in start..available.len() {
            if self.truncated {
                return;
            }
            let c = available[i];
            if blocked.contains(c) {
                continue;
            }
            let mut next_blocked = blocked.clone();
            next_blocked.union_with(&self.space.conflicts[c]);
            next_blocked.insert(c);
            chosen.push(c);
            self.extend(chosen, &next_blocked, available, i + 1);
            chosen.pop();
        }
    }

    fn emit(&mut self, chosen: &[usize]) {
        let graph = self.space.graph;
        let members: Vec<usize> = chosen.iter().map(|&p| self.space.funcs[p]).collect();
        let Ok(resolution) = metrics::resolve(graph, &members) else {
            return;
        };
        if members.iter().any(|m| !resolution.owner.contains(&Some(*m))) {
            return;
        }
        if self.limits.max_slices.is_some_and(|max| self.found.len() >= max) {
            self.truncated = true;
            return;
        }
        let membership = resolution.into_map(graph, &members);
        self.found.push(Slice {
            members: membership.members().clone(),
            membership,
        });
        if self.found.len() % 10_000 == 0 {
            log::info!("{} slices found so far", self.found.len());
        }
    }
}

fn require_valid(graph: &FdGraph) -> Result<()> {
    let report = graph.validate();
    if report.ok {
        return Ok(());
    }
    let detail: Vec<String> = report.violations.iter().take(5).map(ToString::to_string).collect();
    Err(Error::InvalidGraph(detail.join("; ")))
}

/// Enumerates valid slices as a cover search over the directive universe.
///
/// Branches on the uncovered directive with the fewest remaining covering
/// functions; a function is blocked once it conflicts with a chosen member
/// (ancestor, descendant or same-parent sharing) or was tried by an earlier
/// sibling branch, so each slice is produced exactly once.
pub fn enumerate_slices(graph: &FdGraph, limits: &EnumerationLimits) -> Result<Enumeration> {
    require_valid(graph)?;
    let internal = graph.internal_nodes().len();
    if internal > limits.node_cap {
        return Err(Error::NodeCapExceeded {
            count: internal,
            cap: limits.node_cap,
        });
    }
    let space = SearchSpace::build(graph)?;
    let mut search = Search {
        space: &space,
        limits,
        started: Instant::now(),
        visited: 0,
        found: Vec::new(),
        truncated: false,
    };
    let k = space.funcs.len();
    let covered = FixedBitSet::with_capacity(graph.directive_count());
    let blocked = FixedBitSet::with_capacity(k);
    if graph.directive_count() > 0 {
        search.cover(&mut Vec::new(), &covered, &blocked);
    }
    let mut slices = search.found;
    slices.sort();
    Ok(Enumeration {
        slices,
        complete: !search.truncated,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceMetrics {
    pub per_node_cohesion: BTreeMap<NodeId, Rational>,
    /// `Cp(p, q)` for every ordered pair of distinct members.
    pub coupling: BTreeMap<(NodeId, NodeId), Rational>,
    pub mean_cohesion: Rational,
    pub mean_coupling: Rational,
    pub lambda: Rational,
    /// `mean_cohesion - lambda * mean_coupling`.
    pub aggregate: Rational,
}

impl SliceMetrics {
    pub fn dot_annotations(&self) -> DotAnnotations {
        let mut ann = DotAnnotations {
            highlight: self.per_node_cohesion.keys().cloned().collect(),
            ..DotAnnotations::default()
        };
        for (id, ch) in &self.per_node_cohesion {
            ann.node_notes.insert(id.clone(), format!("Ch={}", ratio::fmt4(ch)));
        }
        ann.caption.push(format!("f={}", ratio::fmt4(&self.aggregate)));
        for ((p, q), cp) in &self.coupling {
            ann.caption.push(format!("Cp({p},{q})={}", ratio::fmt4(cp)));
        }
        ann
    }
}

/// Scores one slice: `f = mean Ch - lambda * mean Cp`, with the coupling
/// mean taken over ordered member pairs (zero for a single member).
pub fn slice_objective(graph: &FdGraph, slice: &Slice, lambda: &Rational) -> Result<SliceMetrics> {
    let per_node_cohesion: BTreeMap<NodeId, Rational> = slice
        .members()
        .iter()
        .map(|m| Ok((m.clone(), metrics::cohesion(graph, m.as_str())?)))
        .collect::<Result<_>>()?;
    let coupling = metrics::coupling_matrix(graph, slice.membership())?;
    let mean_cohesion = ratio::mean(per_node_cohesion.values());
    let mean_coupling = ratio::mean(coupling.values());
    let aggregate = &mean_cohesion - lambda * &mean_coupling;
    Ok(SliceMetrics {
        per_node_cohesion,
        coupling,
        mean_cohesion,
        mean_coupling,
        lambda: lambda.clone(),
        aggregate,
    })
}

/// Scores many slices in parallel; output order follows input order.
pub fn score_slices(graph: &FdGraph, slices: &[Slice], lambda: &Rational) -> Result<Vec<SliceMetrics>> {
    slices
        .par_iter()
        .map(|s| slice_objective(graph, s, lambda))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedSlice {
    pub slice: Slice,
    pub metrics: SliceMetrics,
    /// Aggregate strictly above the mean (or all aggregates equal).
    pub initial: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ranking {
    pub entries: Vec<RankedSlice>,
    pub mean_aggregate: Rational,
}

impl Ranking {
    pub fn initial_sets(&self) -> impl Iterator<Item = &RankedSlice> + '_ {
        self.entries.iter().filter(|e| e.initial)
    }

    pub fn top(&self) -> &RankedSlice {
        &self.entries[0]
    }
}

/// Sorts by aggregate, descending, ties in canonical slice order, and marks
/// the above-average slices as initial capability sets.
pub fn rank_slices(slices: Vec<Slice>, metrics: Vec<SliceMetrics>) -> Result<Ranking> {
    if slices.len() != metrics.len() {
        return Err(Error::RankingLengthMismatch {
            slices: slices.len(),
            metrics: metrics.len(),
        });
    }
    if slices.is_empty() {
        return Err(Error::EmptyRanking);
    }
    let mean_aggregate = ratio::mean(metrics.iter().map(|m| &m.aggregate));
    let all_equal = metrics.iter().all(|m| m.aggregate == metrics[0].aggregate);
    let mut entries: Vec<RankedSlice> = slices
        .into_iter()
        .zip(metrics)
        .map(|(slice, metrics)| {
            let initial = all_equal || metrics.aggregate > mean_aggregate;
            RankedSlice {
                slice,
                metrics,
                initial,
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        b.metrics
            .aggregate
            .cmp(&a.metrics.aggregate)
            .then_with(|| a.slice.cmp(&b.slice))
    });
    Ok(Ranking {
        entries,
        mean_aggregate,
    })
}

/// Convenience: enumerate, score and rank in one call.
pub fn rank_all(
    graph: &FdGraph,
    limits: &EnumerationLimits,
    lambda: &Rational,
) -> Result<(Ranking, bool)> {
    let enumeration = enumerate_slices(graph, limits)?;
    if enumeration.slices.is_empty() {
        return Err(Error::EmptyRanking);
    }
    let metrics = score_slices(graph, &enumeration.slices, lambda)?;
    Ok((rank_slices(enumeration.slices, metrics)?, enumeration.complete))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Node};
    use num_traits::Zero;
    use crate::ratio::ratio;

    fn synthetic(id: &str, cohesion: Rational, aggregate: Rational) -> SliceMetrics {
        SliceMetrics {
            per_node_cohesion: BTreeMap::from([(NodeId::from(id), cohesion.clone())]),
            coupling: BTreeMap::new(),
            mean_cohesion: cohesion,
            mean_coupling: Rational::zero(),
            lambda: Rational::zero(),
            aggregate,
        }
    }

    fn chain() -> FdGraph {
        FdGraph::new(
            vec![
                Node::new("m", NodeKind::Mission, ""),
                Node::new("a", NodeKind::Function, ""),
                Node::new("d1", NodeKind::Directive, ""),
                Node::new("d2", NodeKind::Directive, ""),
            ],
            vec![
                Edge::new("m", "a"),
                Edge::new("a", "d1").with_relevance(ratio(7, 10)),
                Edge::new("a", "d2").with_relevance(ratio(1, 10)),
            ],
        )
        .unwrap()
    }

    /// Two functions over the same two intersection directives.
    fn twins() -> FdGraph {
        let r = || ratio(7, 10);
        FdGraph::new(
            vec![
                Node::new("m", NodeKind::Mission, ""),
                Node::new("x", NodeKind::Function, ""),
                Node::new("y", NodeKind::Function, ""),
                Node::new("a", NodeKind::Directive, ""),
                Node::new("b", NodeKind::Directive, ""),
            ],
            vec![
                Edge::new("m", "x"),
                Edge::new("m", "y"),
                Edge::new("x", "a").with_relevance(ratio(1, 1)),
                Edge::new("x", "b").with_relevance(r()),
                Edge::new("y", "a").with_relevance(r()),
                Edge::new("y", "b").with_relevance(ratio(1, 1)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn chain_has_exactly_one_slice() {
        let g = chain();
        let e = enumerate_slices(&g, &EnumerationLimits::default()).unwrap();
        assert!(e.complete);
        assert_eq!(e.slices.len(), 1);
        assert_eq!(e.slices[0].key(), "a");
    }

    #[test]
    fn redundant_covering_members_are_enumerated() {
        let g = twins();
        let e = enumerate_slices(&g, &EnumerationLimits::default()).unwrap();
        let keys: Vec<String> = e.slices.iter().map(Slice::key).collect();
        assert_eq!(keys, vec!["x", "x,y", "y"]);
        let both = &e.slices[1];
        assert_eq!(both.membership().owner_of("a").unwrap().as_str(), "x");
        assert_eq!(both.membership().owner_of("b").unwrap().as_str(), "y");
    }

    #[test]
    fn empty_member_after_resolution_is_invalid() {
        // same twins but x wins both directives
        let r = || ratio(7, 10);
        let g = FdGraph::new(
            vec![
                Node::new("m", NodeKind::Mission, ""),
                Node::new("x", NodeKind::Function, ""),
                Node::new("y", NodeKind::Function, ""),
                Node::new("a", NodeKind::Directive, ""),
                Node::new("b", NodeKind::Directive, ""),
            ],
            vec![
                Edge::new("m", "x"),
                Edge::new("m", "y"),
                Edge::new("x", "a").with_relevance(r()),
                Edge::new("x", "b").with_relevance(r()),
                Edge::new("y", "a").with_relevance(r()),
                Edge::new("y", "b").with_relevance(r()),
            ],
        )
        .unwrap();
        let check = is_valid_slice(&g, ["x", "y"]);
        assert_eq!(
            check.violations,
            vec![SliceViolation::EmptyMember { node: "y".into() }]
        );
        let e = enumerate_slices(&g, &EnumerationLimits::default()).unwrap();
        assert_eq!(e.slices.len(), 2);
    }

    #[test]
    fn truncation_is_flagged() {
        let g = twins();
        let limits = EnumerationLimits {
            max_slices: Some(1),
            ..EnumerationLimits::default()
        };
        let e = enumerate_slices(&g, &limits).unwrap();
        assert!(!e.complete);
        assert_eq!(e.slices.len(), 1);
    }

    #[test]
    fn node_cap_is_enforced() {
        let limits = EnumerationLimits {
            node_cap: 1,
            ..EnumerationLimits::default()
        };
        assert!(enumerate_slices(&twins(), &limits).is_err());
    }

    #[test]
    fn invalid_candidates() {
        let g = chain();
        assert_eq!(
            is_valid_slice(&g, std::iter::empty()).violations,
            vec![SliceViolation::Empty]
        );
        let check = is_valid_slice(&g, ["zz", "a"]);
        assert_eq!(check.violations, vec![SliceViolation::UnknownNode { node: "zz".into() }]);
        let check = is_valid_slice(&g, ["a", "d1"]);
        assert!(check
            .violations
            .contains(&SliceViolation::ContainsDirective { node: "d1".into() }));
        assert!(check.violations.contains(&SliceViolation::AncestorPair {
            ancestor: "a".into(),
            descendant: "d1".into()
        }));
    }

    #[test]
    fn single_member_objective_is_its_cohesion() {
        let g = chain();
        let s = Slice::new(&g, ["a"]).unwrap();
        let m = slice_objective(&g, &s, &ratio(1, 1)).unwrap();
        assert_eq!(m.aggregate, ratio(2, 5));
        assert_eq!(m.mean_coupling, Rational::zero());
    }

    #[test]
    fn ranking_rules() {
        let g = chain();
        let s = Slice::new(&g, ["a"]).unwrap();
        let metrics: Vec<SliceMetrics> = [ratio(9, 10), ratio(1, 2), ratio(1, 10)]
            .into_iter()
            .map(|f| synthetic("a", f.clone(), f))
            .collect();
        let ranking = rank_slices(vec![s.clone(), s.clone(), s.clone()], metrics).unwrap();
        assert_eq!(ranking.mean_aggregate, ratio(1, 2));
        let initial: Vec<_> = ranking.initial_sets().map(|e| e.metrics.aggregate.clone()).collect();
        assert_eq!(initial, vec![ratio(9, 10)]);

        let equal: Vec<SliceMetrics> = (0..3)
            .map(|_| synthetic("a", ratio(1, 2), ratio(1, 2)))
            .collect();
        let ranking = rank_slices(vec![s.clone(), s.clone(), s.clone()], equal).unwrap();
        assert_eq!(ranking.initial_sets().count(), 3);

        assert_eq!(rank_slices(vec![], vec![]).unwrap_err(), Error::EmptyRanking);
        assert!(matches!(
            rank_slices(vec![s], vec![]),
            Err(Error::RankingLengthMismatch { .. })
        ));
    }
}
