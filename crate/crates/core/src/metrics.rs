//! Cohesion, size, coupling and shared-directive membership.
//!
//! Cohesion of a non-directive node `n` is a weighted mean over its
//! children: a directive child contributes `Rel(c, n)` with weight 1, a
//! function child contributes its own cohesion weighted by its size. With
//! only directive children this is the arithmetic mean of relevance values;
//! with only function children it is the size-weighted mean; with one child
//! it passes the child's value through.
//!
//! Directive coupling `Cp(u, v) = P(v) / dist(u, v)` uses a uniform change
//! probability over the owning capability's resolved directives and the
//! shortest path on the undirected graph. Capability coupling `Cp(p, q)` is
//! the mean of directive coupling over all pairs in `D_p x D_q`.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{DirectiveSet, FdGraph, NodeId, NodeKind};
use crate::ratio::{int, Rational};

/// Number of distinct directives under `id` (1 for a directive).
pub fn size_of(graph: &FdGraph, id: &str) -> Result<usize> {
    let i = graph.ix(id)?;
    Ok(graph.reach()?.leaves[i].count_ones(..))
}

fn cohesion_table(graph: &FdGraph) -> Result<&[Option<Rational>]> {
    let order = graph.topo().ok_or(Error::Cyclic)?;
    let reach = graph.reach()?;
    Ok(graph.cohesion_cache(|| {
        let mut table: Vec<Option<Rational>> = vec![None; graph.node_count()];
        for &u in order.iter().rev() {
            if graph.node_at(u).kind == NodeKind::Directive || graph.children_ix(u).is_empty() {
                continue;
            }
            let mut weighted = Rational::zero();
            let mut total = 0i64;
            let mut defined = true;
            for &c in graph.children_ix(u) {
                let contribution = if graph.node_at(c).kind == NodeKind::Directive {
                    graph.relevance_ix(c, u).cloned().map(|rel| (rel, 1))
                } else {
                    let size = reach.leaves[c].count_ones(..) as i64;
                    table[c].as_ref().map(|ch| (ch * int(size), size))
                };
                match contribution {
                    Some((value, weight)) => {
                        weighted += value;
                        total += weight;
                    }
                    None => {
                        defined = false;
                        break;
                    }
                }
            }
            if defined && total > 0 {
                table[u] = Some(weighted / int(total));
            }
        }
        table
    }))
}

/// `Ch(n)` for a mission or function node.
pub fn cohesion(graph: &FdGraph, id: &str) -> Result<Rational> {
    let i = graph.ix(id)?;
    if graph.node_at(i).kind == NodeKind::Directive {
        return Err(Error::CohesionOfDirective(graph.id_at(i).clone()));
    }
    cohesion_table(graph)?[i]
        .clone()
        .ok_or_else(|| Error::CohesionUndefined(graph.id_at(i).clone()))
}

/// Size and cohesion of every function node, in id order.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeMetrics {
    pub id: NodeId,
    pub size: usize,
    pub cohesion: Rational,
    /// Outdegree 1: metrics pass through to the single child.
    pub refinement: bool,
}

pub fn node_metrics(graph: &FdGraph) -> Result<Vec<NodeMetrics>> {
    graph
        .internal_nodes()
        .into_iter()
        .map(|id| {
            Ok(NodeMetrics {
                id: id.clone(),
                size: size_of(graph, id.as_str())?,
                cohesion: cohesion(graph, id.as_str())?,
                refinement: graph.outdegree(id.as_str())? == 1,
            })
        })
        .collect()
}

/// Assignment of every covered directive to exactly one owning node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MembershipMap {
    members: BTreeSet<NodeId>,
    owners: BTreeMap<NodeId, NodeId>,
}

impl MembershipMap {
    pub fn members(&self) -> &BTreeSet<NodeId> {
        &self.members
    }

    pub fn owner_of(&self, directive: &str) -> Option<&NodeId> {
        self.owners.get(directive)
    }

    /// `(directive, owner)` pairs in directive order.
    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &NodeId)> + '_ {
        self.owners.iter()
    }

    pub fn len(&self) -> usize {
        self.owners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owners.is_empty()
    }

    /// Resolved directive set `D_member`.
    pub fn resolved_set(&self, member: &str) -> Result<DirectiveSet> {
        if !self.members.contains(member) {
            return Err(Error::NotAMember(NodeId::new(member)));
        }
        Ok(self
            .owners
            .iter()
            .filter(|(_, owner)| owner.as_str() == member)
            .map(|(d, _)| d.clone())
            .collect())
    }

    /// Every member with its resolved set, empty sets included.
    pub fn resolved_sets(&self) -> BTreeMap<NodeId, DirectiveSet> {
        let mut sets: BTreeMap<NodeId, DirectiveSet> = self
            .members
            .iter()
            .map(|m| (m.clone(), DirectiveSet::new()))
            .collect();
        for (d, owner) in &self.owners {
            sets.entry(owner.clone()).or_default().insert(d.clone());
        }
        sets
    }

    /// Membership for nodes whose raw leaf sets are already pairwise
    /// disjoint. Coverage of the whole graph is not required.
    pub fn from_disjoint(graph: &FdGraph, nodes: &[&str]) -> Result<Self> {
        let mut owners = BTreeMap::new();
        let mut members = BTreeSet::new();
        for &node in nodes {
            let id = graph.node(node).ok_or_else(|| Error::UnknownNode(node.into()))?.id.clone();
            for d in graph.leaves_of(node)? {
                if let Some(previous) = owners.insert(d.clone(), id.clone()) {
                    return Err(Error::InvalidSlice(format!(
                        "`{previous}` and `{id}` both reach `{d}`"
                    )));
                }
            }
            members.insert(id);
        }
        Ok(MembershipMap { members, owners })
    }
}

/// Index-level result of resolving a node set against the graph.
pub(crate) struct Resolution {
    /// Per directive position, the owning member's node index.
    pub owner: Vec<Option<usize>>,
    /// Per directive position, the immediate parent the owner reaches it through.
    pub via: Vec<Option<usize>>,
}

impl Resolution {
    pub(crate) fn into_map(self, graph: &FdGraph, members: &[usize]) -> MembershipMap {
        let owners = self
            .owner
            .iter()
            .enumerate()
            .filter_map(|(pos, owner)| {
                owner.map(|o| (graph.id_at(graph.directive_ix(pos)).clone(), graph.id_at(o).clone()))
            })
            .collect();
        MembershipMap {
            members: members.iter().map(|&m| graph.id_at(m).clone()).collect(),
            owners,
        }
    }
}

/// Immediate parents of directive `d` through which `member` reaches it.
pub(crate) fn entry_parents(graph: &FdGraph, member: usize, d: usize) -> Result<Vec<usize>> {
    let reach = graph.reach()?;
    Ok(graph
        .parents_ix(d)
        .iter()
        .copied()
        .filter(|&p| p == member || reach.descendants[member].contains(p))
        .collect())
}

/// Resolves ownership for `members`; directives reached by none stay unowned.
///
/// A directive reached by several members goes to the member whose entry
/// parent has the highest relevance, ties to the smallest member id. Two
/// members entering through the same parent make the set unresolvable.
pub(crate) fn resolve(graph: &FdGraph, members: &[usize]) -> Result<Resolution> {
    let reach = graph.reach()?;
    let nd = graph.directive_count();
    let mut owner = vec![None; nd];
    let mut via = vec![None; nd];
    let zero = Rational::zero();
    for pos in 0..nd {
        let d = graph.directive_ix(pos);
        let mut reaching: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&m| reach.leaves[m].contains(pos))
            .collect();
        if reaching.is_empty() {
            continue;
        }
        reaching.sort_by(|a, b| graph.id_at(*a).cmp(graph.id_at(*b)));
        let entries: Vec<Vec<usize>> = reaching
            .iter()
            .map(|&m| entry_parents(graph, m, d))
            .collect::<Result<_>>()?;
        for i in 0..reaching.len() {
            for j in i + 1..reaching.len() {
                if let Some(&p) = entries[i].iter().find(|p| entries[j].contains(p)) {
                    return Err(Error::UnresolvableSharing {
                        directive: graph.id_at(d).clone(),
                        parent: graph.id_at(p).clone(),
                        first: graph.id_at(reaching[i]).clone(),
                        second: graph.id_at(reaching[j]).clone(),
                    });
                }
            }
        }
        let mut best: Option<(&Rational, usize, usize)> = None;
        for (k, &m) in reaching.iter().enumerate() {
            for &p in &entries[k] {
                let rel = graph.relevance_ix(d, p).unwrap_or(&zero);
                // strict: earlier (smaller id) members win ties
                if best.is_none_or(|(b, _, _)| rel > b) {
                    best = Some((rel, m, p));
                }
            }
        }
        if let Some((_, m, p)) = best {
            owner[pos] = Some(m);
            via[pos] = Some(p);
        }
    }
    Ok(Resolution { owner, via })
}

/// Assigns every directive to exactly one node of `slice_nodes`.
pub fn resolve_membership<'a>(
    graph: &FdGraph,
    slice_nodes: impl IntoIterator<Item = &'a NodeId>,
) -> Result<MembershipMap> {
    let members: Vec<usize> = slice_nodes
        .into_iter()
        .map(|id| graph.ix(id.as_str()))
        .collect::<Result<BTreeSet<_>>>()?
        .into_iter()
        .collect();
    let resolution = resolve(graph, &members)?;
    if let Some(pos) = resolution.owner.iter().position(Option::is_none) {
        return Err(Error::Uncovered(graph.id_at(graph.directive_ix(pos)).clone()));
    }
    Ok(resolution.into_map(graph, &members))
}

/// Like [`resolve_membership`], but directives no node reaches stay
/// unowned instead of raising an error.
pub fn resolve_partial<'a>(
    graph: &FdGraph,
    nodes: impl IntoIterator<Item = &'a NodeId>,
) -> Result<MembershipMap> {
    let members: Vec<usize> = nodes
        .into_iter()
        .map(|id| graph.ix(id.as_str()))
        .collect::<Result<BTreeSet<_>>>()?
        .into_iter()
        .collect();
    Ok(resolve(graph, &members)?.into_map(graph, &members))
}

/// Distance between two directive indices; errors if disconnected.
pub(crate) fn directive_distance(graph: &FdGraph, u: usize, v: usize) -> Result<u32> {
    let d = graph.distances_from(u)[v];
    if d == u32::MAX {
        return Err(Error::Disconnected(graph.id_at(u).clone(), graph.id_at(v).clone()));
    }
    Ok(d)
}

fn directive_index(graph: &FdGraph, id: &str) -> Result<usize> {
    let i = graph.ix(id)?;
    if graph.node_at(i).kind != NodeKind::Directive {
        return Err(Error::NotDirective(graph.id_at(i).clone()));
    }
    Ok(i)
}

/// `Cp(u, v)`: how strongly `u` is affected when `v` changes, where `v`
/// belongs to the capability whose resolved set is `owner_of_v`.
pub fn directive_coupling(
    graph: &FdGraph,
    u: &str,
    v: &str,
    owner_of_v: &DirectiveSet,
) -> Result<Rational> {
    let ui = directive_index(graph, u)?;
    let vi = directive_index(graph, v)?;
    if ui == vi {
        return Err(Error::SameNode(graph.id_at(ui).clone()));
    }
    if !owner_of_v.contains(v) {
        return Err(Error::NotInOwnerSet {
            directive: graph.id_at(vi).clone(),
        });
    }
    let dist = directive_distance(graph, ui, vi)?;
    Ok(Rational::new(1.into(), (owner_of_v.len() as u64 * dist as u64).into()))
}

/// Capability coupling over directive index sets. Pairs are grouped by
/// distance so each ordered pair costs one integer increment.
pub(crate) fn coupling_ix(graph: &FdGraph, dp: &[usize], dq: &[usize]) -> Result<Rational> {
    let mut by_distance: BTreeMap<u32, u64> = BTreeMap::new();
    for &di in dp {
        let dist = graph.distances_from(di);
        for &dj in dq {
            let d = dist[dj];
            if d == u32::MAX {
                return Err(Error::Disconnected(graph.id_at(di).clone(), graph.id_at(dj).clone()));
            }
            *by_distance.entry(d).or_default() += 1;
        }
    }
    let mut sum = Rational::zero();
    for (d, count) in by_distance {
        sum += Rational::new(count.into(), d.into());
    }
    let q = dq.len() as u64;
    Ok(sum / Rational::from_integer((dp.len() as u64 * q * q).into()))
}

fn resolved_indices(graph: &FdGraph, membership: &MembershipMap, member: &str) -> Result<Vec<usize>> {
    membership
        .resolved_set(member)?
        .iter()
        .map(|d| graph.ix(d.as_str()))
        .collect()
}

/// `Cp(p, q)`: how strongly capability `p` is affected when `q` changes.
pub fn capability_coupling(
    graph: &FdGraph,
    p: &str,
    q: &str,
    membership: &MembershipMap,
) -> Result<Rational> {
    if p == q {
        return Err(Error::SameNode(NodeId::new(p)));
    }
    let dp = resolved_indices(graph, membership, p)?;
    let dq = resolved_indices(graph, membership, q)?;
    if dp.is_empty() {
        return Err(Error::EmptyResolvedSet(NodeId::new(p)));
    }
    if dq.is_empty() {
        return Err(Error::EmptyResolvedSet(NodeId::new(q)));
    }
    coupling_ix(graph, &dp, &dq)
}

/// `Cp(p, q)` for every ordered pair of distinct members.
pub fn coupling_matrix(
    graph: &FdGraph,
    membership: &MembershipMap,
) -> Result<BTreeMap<(NodeId, NodeId), Rational>> {
    let sets: BTreeMap<NodeId, Vec<usize>> = membership
        .members()
        .iter()
        .map(|m| Ok((m.clone(), resolved_indices(graph, membership, m.as_str())?)))
        .collect::<Result<_>>()?;
    if let Some((m, _)) = sets.iter().find(|(_, s)| s.is_empty()) {
        return Err(Error::EmptyResolvedSet(m.clone()));
    }
    let mut matrix = BTreeMap::new();
    for (p, dp) in &sets {
        for (q, dq) in &sets {
            if p != q {
                matrix.insert((p.clone(), q.clone()), coupling_ix(graph, dp, dq)?);
            }
        }
    }
    Ok(matrix)
}
