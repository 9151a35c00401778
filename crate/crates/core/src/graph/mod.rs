//! Function decomposition graphs.
//!
//! An [`FdGraph`] holds one mission root, function nodes and directive
//! leaves, joined by decomposition, refinement and intersection edges.
//! Parent-to-directive edges carry a relevance value in `[0, 1]`.
//!
//! The graph is immutable once built. Reachability, leaf sets and distances
//! are computed lazily and memoized behind `OnceLock`, so a shared `&FdGraph`
//! can be queried from many threads.

mod dot;
mod format;
mod validate;

use std::borrow::Borrow;
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::sync::OnceLock;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratio::{self, Rational};

pub use dot::DotAnnotations;
pub use format::RelevanceValue;
pub use validate::{ValidationReport, Violation, ViolationCode};

/// Opaque node identifier, unique within one graph.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for NodeId {
    fn from(value: &str) -> Self {
        NodeId(value.to_string())
    }
}

impl From<String> for NodeId {
    fn from(value: String) -> Self {
        NodeId(value)
    }
}

/// Set of directive ids, ordered by id.
pub type DirectiveSet = BTreeSet<NodeId>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Mission,
    Function,
    Directive,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Mission => "mission",
            NodeKind::Function => "function",
            NodeKind::Directive => "directive",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Decomposition,
    Refinement,
    Intersection,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Decomposition => "decomposition",
            EdgeKind::Refinement => "refinement",
            EdgeKind::Intersection => "intersection",
        })
    }
}

/// Risk-impact categories used to assign directive relevance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImpactCategory {
    /// Task failure.
    Catastrophic,
    /// Task success questionable.
    Critical,
    /// Reduction in technical performance.
    Marginal,
    /// Inconvenience or non-operational impact.
    Negligible,
}

impl ImpactCategory {
    pub const ALL: [ImpactCategory; 4] = [
        ImpactCategory::Catastrophic,
        ImpactCategory::Critical,
        ImpactCategory::Marginal,
        ImpactCategory::Negligible,
    ];

    pub fn relevance(self) -> Rational {
        match self {
            ImpactCategory::Catastrophic => ratio::int(1),
            ImpactCategory::Critical => ratio::ratio(7, 10),
            ImpactCategory::Marginal => ratio::ratio(3, 10),
            ImpactCategory::Negligible => ratio::ratio(1, 10),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ImpactCategory::Catastrophic => "catastrophic",
            ImpactCategory::Critical => "critical",
            ImpactCategory::Marginal => "marginal",
            ImpactCategory::Negligible => "negligible",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(name.trim()))
    }

    /// Category whose table value equals `relevance` exactly, if any.
    pub fn matching(relevance: &Rational) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.relevance() == *relevance)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub label: String,
}

impl Node {
    pub fn new(id: impl Into<NodeId>, kind: NodeKind, label: impl Into<String>) -> Self {
        Node {
            id: id.into(),
            kind,
            label: label.into(),
        }
    }
}

/// An edge as authored. `declared_kind` is `None` when the kind is left to
/// inference from node degrees.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub declared_kind: Option<EdgeKind>,
    pub relevance: Option<Rational>,
}

impl Edge {
    pub fn new(from: impl Into<NodeId>, to: impl Into<NodeId>) -> Self {
        Edge {
            from: from.into(),
            to: to.into(),
            declared_kind: None,
            relevance: None,
        }
    }

    pub fn with_relevance(mut self, relevance: Rational) -> Self {
        self.relevance = Some(relevance);
        self
    }

    pub fn with_kind(mut self, kind: EdgeKind) -> Self {
        self.declared_kind = Some(kind);
        self
    }
}

pub(crate) struct Reach {
    /// Per node, bitset over node indices of strict descendants.
    pub descendants: Vec<FixedBitSet>,
    /// Per node, bitset over node indices of strict ancestors.
    pub ancestors: Vec<FixedBitSet>,
    /// Per node, bitset over directive positions of reachable directives
    /// (a directive reaches itself).
    pub leaves: Vec<FixedBitSet>,
}

#[derive(Default)]
struct Cache {
    topo: OnceLock<Option<Vec<usize>>>,
    reach: OnceLock<Reach>,
    distances: Vec<OnceLock<Vec<u32>>>,
    cohesion: OnceLock<Vec<Option<Rational>>>,
}

pub struct FdGraph {
    nodes: Vec<Node>,
    index: HashMap<NodeId, usize>,
    edges: Vec<Edge>,
    edge_index: HashMap<(usize, usize), usize>,
    children: Vec<Vec<usize>>,
    parents: Vec<Vec<usize>>,
    directives: Vec<usize>,
    directive_pos: Vec<Option<usize>>,
    cache: Cache,
}

impl Clone for FdGraph {
    fn clone(&self) -> Self {
        FdGraph::new(self.nodes.clone(), self.edges.clone())
            .expect("cloning an already-constructed graph")
    }
}

impl fmt::Debug for FdGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FdGraph")
            .field("nodes", &self.nodes)
            .field("edges", &self.edges)
            .finish()
    }
}

impl FdGraph {
    /// Builds a graph from nodes and edges, checking structure that the
    /// file format already rules out: unique non-empty ids, known edge
    /// endpoints, relevance only on directive edges and within `[0, 1]`.
    ///
    /// Degree, acyclicity and reachability rules are left to
    /// [`FdGraph::validate`], which reports every violation at once.
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if node.id.as_str().is_empty() {
                return Err(Error::EmptyNodeId);
            }
            if index.insert(node.id.clone(), i).is_some() {
                return Err(Error::DuplicateNode(node.id.clone()));
            }
        }

        let mut children = vec![Vec::new(); nodes.len()];
        let mut parents = vec![Vec::new(); nodes.len()];
        let mut edge_index = HashMap::with_capacity(edges.len());
        for (e, edge) in edges.iter().enumerate() {
            let from = *index
                .get(&edge.from)
                .ok_or_else(|| Error::UnknownNode(edge.from.clone()))?;
            let to = *index
                .get(&edge.to)
                .ok_or_else(|| Error::UnknownNode(edge.to.clone()))?;
            if let Some(rel) = &edge.relevance {
                if nodes[to].kind != NodeKind::Directive {
                    return Err(Error::RelevanceOnNonDirective {
                        from: edge.from.clone(),
                        to: edge.to.clone(),
                    });
                }
                if !ratio::is_unit_interval(rel) {
                    return Err(Error::RelevanceOutOfRange {
                        from: edge.from.clone(),
                        to: edge.to.clone(),
                        value: ratio::to_f64(rel).to_string(),
                    });
                }
            }
            if edge_index.insert((from, to), e).is_some() {
                return Err(Error::DuplicateEdge {
                    from: edge.from.clone(),
                    to: edge.to.clone(),
                });
            }
            children[from].push(to);
            parents[to].push(from);
        }
        for list in children.iter_mut().chain(parents.iter_mut()) {
            list.sort_by(|a, b| nodes[*a].id.cmp(&nodes[*b].id));
        }

        let mut directives: Vec<usize> = (0..nodes.len())
            .filter(|&i| nodes[i].kind == NodeKind::Directive)
            .collect();
        directives.sort_by(|a, b| nodes[*a].id.cmp(&nodes[*b].id));
        let mut directive_pos = vec![None; nodes.len()];
        for (pos, &ix) in directives.iter().enumerate() {
            directive_pos[ix] = Some(pos);
        }

        let cache = Cache {
            distances: (0..nodes.len()).map(|_| OnceLock::new()).collect(),
            ..Cache::default()
        };

        Ok(FdGraph {
            nodes,
            index,
            edges,
            edge_index,
            children,
            parents,
            directives,
            directive_pos,
            cache,
        })
    }

    /// Parses the JSON graph document.
    pub fn parse(text: &str) -> Result<Self> {
        format::parse(text)
    }

    /// Serializes back to the JSON graph document.
    pub fn to_document(&self) -> String {
        format::serialize(self)
    }

    pub fn validate(&self) -> ValidationReport {
        validate::validate(self)
    }

    pub fn export_dot(&self, annotations: Option<&DotAnnotations>) -> String {
        dot::export(self, annotations)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn kind(&self, id: &str) -> Result<NodeKind> {
        Ok(self.nodes[self.ix(id)?].kind)
    }

    /// The mission node, when exactly one exists.
    pub fn mission(&self) -> Option<&NodeId> {
        let mut missions = self.nodes.iter().filter(|n| n.kind == NodeKind::Mission);
        match (missions.next(), missions.next()) {
            (Some(m), None) => Some(&m.id),
            _ => None,
        }
    }

    /// All directive ids in id order.
    pub fn directives(&self) -> impl Iterator<Item = &NodeId> + '_ {
        self.directives.iter().map(|&i| &self.nodes[i].id)
    }

    pub fn directive_count(&self) -> usize {
        self.directives.len()
    }

    /// Function nodes (the only slice candidates), in id order.
    pub fn internal_nodes(&self) -> Vec<&NodeId> {
        let mut ids: Vec<&NodeId> = self
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Function)
            .map(|n| &n.id)
            .collect();
        ids.sort();
        ids
    }

    pub fn children(&self, id: &str) -> Result<Vec<&NodeId>> {
        let i = self.ix(id)?;
        Ok(self.children[i].iter().map(|&c| &self.nodes[c].id).collect())
    }

    pub fn parents(&self, id: &str) -> Result<Vec<&NodeId>> {
        let i = self.ix(id)?;
        Ok(self.parents[i].iter().map(|&p| &self.nodes[p].id).collect())
    }

    pub fn outdegree(&self, id: &str) -> Result<usize> {
        Ok(self.children[self.ix(id)?].len())
    }

    pub fn indegree(&self, id: &str) -> Result<usize> {
        Ok(self.parents[self.ix(id)?].len())
    }

    /// `Rel(directive, parent)` if the edge exists and carries a value.
    pub fn relevance(&self, directive: &str, parent: &str) -> Option<&Rational> {
        let d = *self.index.get(directive)?;
        let p = *self.index.get(parent)?;
        self.edge_between(p, d)?.relevance.as_ref()
    }

    pub fn edge(&self, from: &str, to: &str) -> Option<&Edge> {
        let f = *self.index.get(from)?;
        let t = *self.index.get(to)?;
        self.edge_between(f, t)
    }

    /// Kind of the edge: the declared kind when present, else the inferred one.
    pub fn edge_kind(&self, from: &str, to: &str) -> Option<EdgeKind> {
        let f = *self.index.get(from)?;
        let t = *self.index.get(to)?;
        let edge = self.edge_between(f, t)?;
        Some(edge.declared_kind.unwrap_or_else(|| self.inferred_kind(f, t)))
    }

    /// Kind implied purely by degrees: a lone child is a refinement, a child
    /// with several parents is an intersection, anything else decomposition.
    pub fn inferred_edge_kind(&self, from: &str, to: &str) -> Option<EdgeKind> {
        let f = *self.index.get(from)?;
        let t = *self.index.get(to)?;
        self.edge_between(f, t)?;
        Some(self.inferred_kind(f, t))
    }

    /// Directives reachable from `id` along directed edges. A directive's
    /// leaf set is itself.
    pub fn leaves_of(&self, id: &str) -> Result<DirectiveSet> {
        let i = self.ix(id)?;
        let reach = self.reach()?;
        Ok(reach.leaves[i]
            .ones()
            .map(|pos| self.nodes[self.directives[pos]].id.clone())
            .collect())
    }

    pub fn descendants(&self, id: &str) -> Result<BTreeSet<NodeId>> {
        let i = self.ix(id)?;
        let reach = self.reach()?;
        Ok(self.ids_of(&reach.descendants[i]))
    }

    pub fn ancestors(&self, id: &str) -> Result<BTreeSet<NodeId>> {
        let i = self.ix(id)?;
        let reach = self.reach()?;
        Ok(self.ids_of(&reach.ancestors[i]))
    }

    /// Shortest path length between `u` and `v` ignoring edge direction.
    /// Returns `None` when no undirected path exists.
    pub fn undirected_distance(&self, u: &str, v: &str) -> Result<Option<usize>> {
        let a = self.ix(u)?;
        let b = self.ix(v)?;
        let d = self.distances_from(a)[b];
        Ok((d != u32::MAX).then_some(d as usize))
    }

    /// A topological order of node ids, or `None` for a cyclic graph.
    pub fn topological_order(&self) -> Option<Vec<&NodeId>> {
        self.topo()
            .map(|order| order.iter().map(|&i| &self.nodes[i].id).collect())
    }

    pub fn is_acyclic(&self) -> bool {
        self.topo().is_some()
    }

    // ---- index-level access for the analysis modules ----

    pub(crate) fn ix(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownNode(NodeId::new(id)))
    }

    pub(crate) fn node_at(&self, ix: usize) -> &Node {
        &self.nodes[ix]
    }

    pub(crate) fn id_at(&self, ix: usize) -> &NodeId {
        &self.nodes[ix].id
    }

    pub(crate) fn children_ix(&self, ix: usize) -> &[usize] {
        &self.children[ix]
    }

    pub(crate) fn parents_ix(&self, ix: usize) -> &[usize] {
        &self.parents[ix]
    }

    pub(crate) fn directive_ix(&self, pos: usize) -> usize {
        self.directives[pos]
    }

    pub(crate) fn directive_pos(&self, ix: usize) -> Option<usize> {
        self.directive_pos[ix]
    }

    pub(crate) fn relevance_ix(&self, directive: usize, parent: usize) -> Option<&Rational> {
        self.edge_between(parent, directive)?.relevance.as_ref()
    }

    pub(crate) fn edge_between(&self, from: usize, to: usize) -> Option<&Edge> {
        self.edge_index.get(&(from, to)).map(|&e| &self.edges[e])
    }

    pub(crate) fn inferred_kind(&self, from: usize, to: usize) -> EdgeKind {
        if self.children[from].len() == 1 {
            EdgeKind::Refinement
        } else if self.parents[to].len() >= 2 {
            EdgeKind::Intersection
        } else {
            EdgeKind::Decomposition
        }
    }

    pub(crate) fn ids_of(&self, set: &FixedBitSet) -> BTreeSet<NodeId> {
        set.ones().map(|i| self.nodes[i].id.clone()).collect()
    }

    pub(crate) fn topo(&self) -> Option<&Vec<usize>> {
        self.cache
            .topo
            .get_or_init(|| {
                let n = self.nodes.len();
                let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
                let mut queue: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
                let mut order = Vec::with_capacity(n);
                while let Some(u) = queue.pop_front() {
                    order.push(u);
                    for &c in &self.children[u] {
                        indeg[c] -= 1;
                        if indeg[c] == 0 {
                            queue.push_back(c);
                        }
                    }
                }
                (order.len() == n).then_some(order)
            })
            .as_ref()
    }

    pub(crate) fn reach(&self) -> Result<&Reach> {
        let order = self.topo().ok_or(Error::Cyclic)?;
        Ok(self.cache.reach.get_or_init(|| {
            let n = self.nodes.len();
            let nd = self.directives.len();
            let mut descendants = vec![FixedBitSet::with_capacity(n); n];
            let mut leaves = vec![FixedBitSet::with_capacity(nd); n];
            for &u in order.iter().rev() {
                if let Some(pos) = self.directive_pos[u] {
                    leaves[u].insert(pos);
                }
                for &c in &self.children[u] {
                    let (desc_c, leaves_c) = (descendants[c].clone(), leaves[c].clone());
                    descendants[u].insert(c);
                    descendants[u].union_with(&desc_c);
                    leaves[u].union_with(&leaves_c);
                }
            }
            let mut ancestors = vec![FixedBitSet::with_capacity(n); n];
            for &u in order {
                for &p in &self.parents[u] {
                    let anc_p = ancestors[p].clone();
                    ancestors[u].insert(p);
                    ancestors[u].union_with(&anc_p);
                }
            }
            Reach {
                descendants,
                ancestors,
                leaves,
            }
        }))
    }

    /// BFS distances on the undirected graph from `src`; `u32::MAX` marks
    /// unreachable nodes.
    pub(crate) fn distances_from(&self, src: usize) -> &[u32] {
        self.cache.distances[src].get_or_init(|| {
            let mut dist = vec![u32::MAX; self.nodes.len()];
            dist[src] = 0;
            let mut queue = VecDeque::from([src]);
            while let Some(u) = queue.pop_front() {
                let next = dist[u] + 1;
                for &w in self.children[u].iter().chain(&self.parents[u]) {
                    if dist[w] == u32::MAX {
                        dist[w] = next;
                        queue.push_back(w);
                    }
                }
            }
            dist
        })
    }

    pub(crate) fn cohesion_cache(
        &self,
        init: impl FnOnce() -> Vec<Option<Rational>>,
    ) -> &[Option<Rational>] {
        self.cache.cohesion.get_or_init(init)
    }
}
