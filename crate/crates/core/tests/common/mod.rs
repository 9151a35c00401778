//! Random graph generation and from-scratch oracles shared by the
//! integration tests. Oracles read only the raw node/edge lists and never
//! call the crate's metric or slicing code.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use capslice::change::{ChangeScenario, NewDirective, Payload, ScenarioKind};
use capslice::graph::{Edge, FdGraph, Node, NodeId, NodeKind, RelevanceValue};
use capslice::ratio::{ratio, Rational};
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FIG2: &str = include_str!("../../fixtures/fig2.json");

pub fn fig2() -> FdGraph {
    FdGraph::parse(FIG2).expect("fixture parses")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const LEVELS: [(i64, i64); 4] = [(1, 1), (7, 10), (3, 10), (1, 10)];

fn random_relevance(rng: &mut ChaCha8Rng) -> Rational {
    if rng.gen_bool(0.8) {
        let (n, d) = LEVELS[rng.gen_range(0..LEVELS.len())];
        ratio(n, d)
    } else {
        ratio(rng.gen_range(0..=20), 20)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_functions: usize,
    pub max_directives: usize,
    /// Chance that a node gets a second parent.
    pub share: f64,
}

impl Shape {
    pub const SMALL: Shape = Shape {
        max_functions: 16,
        max_directives: 24,
        share: 0.25,
    };
    pub const MEDIUM: Shape = Shape {
        max_functions: 20,
        max_directives: 50,
        share: 0.25,
    };
}

/// A random graph that passes validation. Function `f{i}` only takes
/// parents among `m` and `f{j}`, `j < i`, so the result is acyclic.
pub fn random_graph(rng: &mut ChaCha8Rng, shape: Shape) -> FdGraph {
    let k = rng.gen_range(1..=shape.max_functions);
    let fid = |i: usize| format!("f{i:02}");
    let mut nodes = vec![Node::new("m", NodeKind::Mission, "")];
    let mut edges: Vec<Edge> = Vec::new();
    let mut has_child = vec![false; k];

    for i in 0..k {
        nodes.push(Node::new(fid(i), NodeKind::Function, ""));
        // index i in 0..=i means "m" for 0 and f{j-1} otherwise
        let first = rng.gen_range(0..=i);
        let mut parents = vec![first];
        if i > 0 && rng.gen_bool(shape.share) {
            let second = rng.gen_range(0..=i);
            if second != first {
                parents.push(second);
            }
        }
        for p in parents {
            let from = if p == 0 { "m".to_string() } else { fid(p - 1) };
            if p > 0 {
                has_child[p - 1] = true;
            }
            edges.push(Edge::new(from, fid(i)));
        }
    }

    let childless: Vec<usize> = (0..k).filter(|&i| !has_child[i]).collect();
    let total = rng.gen_range(childless.len().max(1)..=shape.max_directives.max(childless.len()));
    for j in 0..total {
        let id = format!("d{j:02}");
        nodes.push(Node::new(id.clone(), NodeKind::Directive, ""));
        let first = if j < childless.len() {
            childless[j]
        } else {
            rng.gen_range(0..k)
        };
        let mut parents = vec![fid(first)];
        if rng.gen_bool(shape.share) {
            let second = fid(rng.gen_range(0..k));
            if second != parents[0] {
                parents.push(second);
            }
        }
        for p in parents {
            edges.push(Edge::new(p, id.clone()).with_relevance(random_relevance(rng)));
        }
    }

    let graph = FdGraph::new(nodes, edges).expect("generated graph is well-formed");
    let report = graph.validate();
    assert!(report.ok, "generator produced an invalid graph: {:?}", report.violations);
    graph
}

/// Plain adjacency view built from the raw edge list.
pub struct Raw {
    pub ids: Vec<NodeId>,
    pub kind: Vec<NodeKind>,
    pub index: BTreeMap<NodeId, usize>,
    pub children: Vec<Vec<usize>>,
    pub parents: Vec<Vec<usize>>,
    pub rel: BTreeMap<(usize, usize), Rational>,
}

impl Raw {
    pub fn of(graph: &FdGraph) -> Raw {
        let ids: Vec<NodeId> = graph.nodes().iter().map(|n| n.id.clone()).collect();
        let kind = graph.nodes().iter().map(|n| n.kind).collect();
        let index: BTreeMap<NodeId, usize> = ids.iter().cloned().enumerate().map(|(i, id)| (id, i)).collect();
        let mut children = vec![Vec::new(); ids.len()];
        let mut parents = vec![Vec::new(); ids.len()];
        let mut rel = BTreeMap::new();
        for e in graph.edges() {
            let (u, v) = (index[&e.from], index[&e.to]);
            children[u].push(v);
            parents[v].push(u);
            if let Some(r) = &e.relevance {
                rel.insert((v, u), r.clone());
            }
        }
        Raw {
            ids,
            kind,
            index,
            children,
            parents,
            rel,
        }
    }

    pub fn ix(&self, id: &str) -> usize {
        self.index[id]
    }

    pub fn functions(&self) -> Vec<usize> {
        let mut f: Vec<usize> = (0..self.ids.len())
            .filter(|&i| self.kind[i] == NodeKind::Function)
            .collect();
        f.sort_by(|a, b| self.ids[*a].cmp(&self.ids[*b]));
        f
    }

    pub fn directives(&self) -> Vec<usize> {
        let mut d: Vec<usize> = (0..self.ids.len())
            .filter(|&i| self.kind[i] == NodeKind::Directive)
            .collect();
        d.sort_by(|a, b| self.ids[*a].cmp(&self.ids[*b]));
        d
    }

    /// Strict descendants by depth-first search.
    pub fn descendants(&self, u: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = self.children[u].clone();
        while let Some(x) = stack.pop() {
            if seen.insert(x) {
                stack.extend(&self.children[x]);
            }
        }
        seen
    }

    pub fn leaves(&self, u: usize) -> BTreeSet<usize> {
        if self.kind[u] == NodeKind::Directive {
            return BTreeSet::from([u]);
        }
        self.descendants(u)
            .into_iter()
            .filter(|&x| self.kind[x] == NodeKind::Directive)
            .collect()
    }

    pub fn size(&self, u: usize) -> usize {
        self.leaves(u).len()
    }

    /// Cohesion evaluated straight from the definitions: leaf children
    /// contribute their relevance with weight 1, function children their
    /// cohesion weighted by size.
    pub fn cohesion(&self, u: usize) -> Rational {
        let mut num = Rational::zero();
        let mut den = Rational::zero();
        for &c in &self.children[u] {
            if self.kind[c] == NodeKind::Directive {
                num += &self.rel[&(c, u)];
                den += Rational::one();
            } else {
                let w = Rational::from_integer((self.size(c) as i64).into());
                num += &w * self.cohesion(c);
                den += w;
            }
        }
        num / den
    }

    pub fn bfs(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.ids.len()];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            for &v in self.children[u].iter().chain(&self.parents[u]) {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Owner per directive for `members`, or `None` when two members enter
    /// a directive through the same parent. Unreached directives are absent.
    pub fn resolve(&self, members: &[usize]) -> Option<BTreeMap<usize, usize>> {
        let below: Vec<BTreeSet<usize>> = members.iter().map(|&m| self.descendants(m)).collect();
        let mut owners = BTreeMap::new();
        for d in self.directives() {
            let mut best: Option<(Rational, &NodeId, usize)> = None;
            let mut used_parents: BTreeSet<usize> = BTreeSet::new();
            for (k, &m) in members.iter().enumerate() {
                if !below[k].contains(&d) {
                    continue;
                }
                let entries: Vec<usize> = self.parents[d]
                    .iter()
                    .copied()
                    .filter(|&p| p == m || below[k].contains(&p))
                    .collect();
                for &p in &entries {
                    if !used_parents.insert(p) {
                        return None;
                    }
                }
                for p in entries {
                    let r = self.rel[&(d, p)].clone();
                    let better = match &best {
                        None => true,
                        Some((br, bid, _)) => r > *br || (r == *br && self.ids[m] < **bid),
                    };
                    if better {
                        best = Some((r, &self.ids[m], m));
                    }
                }
            }
            if let Some((_, _, m)) = best {
                owners.insert(d, m);
            }
        }
        Some(owners)
    }

    /// `Cp(p, q)` as the literal double sum over resolved directive sets.
    pub fn coupling(&self, dp: &[usize], dq: &[usize]) -> Rational {
        let p_of_v = Rational::new(1.into(), (dq.len() as i64).into());
        let mut sum = Rational::zero();
        for &u in dp {
            let dist = self.bfs(u);
            for &v in dq {
                let d = dist[v].expect("connected");
                sum += &p_of_v / Rational::from_integer((d as i64).into());
            }
        }
        sum / Rational::from_integer(((dp.len() * dq.len()) as i64).into())
    }
}

/// Brute-force slice filter over every subset of function nodes.
/// Returns member id lists, each sorted, in sorted order.
pub fn brute_force_slices(graph: &FdGraph) -> Vec<Vec<String>> {
    let raw = Raw::of(graph);
    let funcs = raw.functions();
    let dirs = raw.directives();
    let dpos: BTreeMap<usize, usize> = dirs.iter().enumerate().map(|(i, &d)| (d, i)).collect();
    let k = funcs.len();
    assert!(k <= 20 && dirs.len() <= 64);
    let desc: Vec<BTreeSet<usize>> = funcs.iter().map(|&f| raw.descendants(f)).collect();
    let leaf_mask: Vec<u64> = funcs
        .iter()
        .map(|&f| raw.leaves(f).iter().fold(0u64, |m, d| m | 1 << dpos[d]))
        .collect();
    let related: Vec<u32> = (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i && (desc[i].contains(&funcs[j]) || desc[j].contains(&funcs[i])))
                .fold(0u32, |m, j| m | 1 << j)
        })
        .collect();
    let full = if dirs.len() == 64 { u64::MAX } else { (1u64 << dirs.len()) - 1 };

    let mut out = Vec::new();
    for subset in 1u32..(1u32 << k) {
        let members: Vec<usize> = (0..k).filter(|&i| subset & (1 << i) != 0).collect();
        if members.iter().any(|&i| related[i] & subset != 0) {
            continue;
        }
        if members.iter().fold(0u64, |m, &i| m | leaf_mask[i]) != full {
            continue;
        }
        let ixs: Vec<usize> = members.iter().map(|&i| funcs[i]).collect();
        let Some(owners) = raw.resolve(&ixs) else {
            continue;
        };
        let owning: BTreeSet<usize> = owners.values().copied().collect();
        if ixs.iter().any(|m| !owning.contains(m)) {
            continue;
        }
        let mut ids: Vec<String> = ixs.iter().map(|&i| raw.ids[i].to_string()).collect();
        ids.sort();
        out.push(ids);
    }
    out.sort();
    out
}

pub fn slice_ids(slices: &[capslice::Slice]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = slices
        .iter()
        .map(|s| s.members().iter().map(ToString::to_string).collect())
        .collect();
    out.sort();
    out
}

fn relevance_value(rng: &mut ChaCha8Rng) -> RelevanceValue {
    if rng.gen_bool(0.5) {
        let names = ["catastrophic", "critical", "marginal", "negligible"];
        RelevanceValue::Category(names.choose(rng).unwrap().to_string())
    } else {
        RelevanceValue::Number(rng.gen_range(0..=10) as f64 / 10.0)
    }
}

/// A scenario of random kind aimed at an existing node of fitting kind.
/// It may still be rejected by `apply_change` (for example, deleting the
/// only subtree under the mission).
pub fn random_scenario(rng: &mut ChaCha8Rng, graph: &FdGraph, serial: usize) -> ChangeScenario {
    let raw = Raw::of(graph);
    let funcs = raw.functions();
    let dirs = raw.directives();
    let parents_pool: Vec<usize> = funcs.clone();
    let pick = |rng: &mut ChaCha8Rng, pool: &[usize]| raw.ids[*pool.choose(rng).unwrap()].clone();
    match rng.gen_range(0..5) {
        0 => {
            let d = *dirs.choose(rng).unwrap();
            let parent = raw.ids[*raw.parents[d].choose(rng).unwrap()].clone();
            ChangeScenario::new(ScenarioKind::ModifyDirective, raw.ids[d].clone()).with_payload(Payload {
                relevance: Some(relevance_value(rng)),
                parent: Some(parent),
                ..Payload::default()
            })
        }
        1 => ChangeScenario::new(ScenarioKind::DeleteDirective, pick(rng, &dirs)),
        2 => ChangeScenario::new(ScenarioKind::AddDirective, pick(rng, &parents_pool)).with_payload(Payload {
            id: Some(format!("new{serial}").into()),
            relevance: Some(relevance_value(rng)),
            ..Payload::default()
        }),
        3 => ChangeScenario::new(ScenarioKind::DeleteFunctionSubtree, pick(rng, &funcs)),
        _ => {
            let target = *parents_pool.choose(rng).unwrap();
            let adopt: Vec<NodeId> = raw.children[target]
                .iter()
                .filter(|_| rng.gen_bool(0.5))
                .map(|&c| raw.ids[c].clone())
                .collect();
            let count = rng.gen_range(0..=2);
            let directives = (0..count)
                .map(|i| NewDirective {
                    id: format!("new{serial}_{i}").into(),
                    label: String::new(),
                    relevance: relevance_value(rng),
                })
                .collect();
            ChangeScenario::new(ScenarioKind::AddFunction, raw.ids[target].clone()).with_payload(Payload {
                id: Some(format!("fn{serial}").into()),
                adopt,
                directives,
                ..Payload::default()
            })
        }
    }
}
