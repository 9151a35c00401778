use std::collections::VecDeque;
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use super::{FdGraph, NodeKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    Cycle,
    MissionCount,
    MissionDegree,
    FunctionDegree,
    DirectiveDegree,
    Unreachable,
    EdgeKind,
    RelevanceMissing,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::Cycle => "CYCLE",
            ViolationCode::MissionCount => "MISSION_COUNT",
            ViolationCode::MissionDegree => "MISSION_DEGREE",
            ViolationCode::FunctionDegree => "FUNCTION_DEGREE",
            ViolationCode::DirectiveDegree => "DIRECTIVE_DEGREE",
            ViolationCode::Unreachable => "UNREACHABLE",
            ViolationCode::EdgeKind => "EDGE_KIND",
            ViolationCode::RelevanceMissing => "RELEVANCE_MISSING",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// Node id, or `from->to` for edge violations.
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.code, self.subject, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub fn codes(&self) -> Vec<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, code: ViolationCode, subject: impl ToString, message: impl Into<String>) {
        self.0.push(Violation {
            code,
            subject: subject.to_string(),
            message: message.into(),
        });
    }
}

pub(super) fn validate(graph: &FdGraph) -> ValidationReport {
    let mut out = Collector(Vec::new());
    let n = graph.node_count();

    if graph.topo().is_none() {
        let mut pg = DiGraph::<usize, ()>::with_capacity(n, graph.edges().len());
        let handles: Vec<_> = (0..n).map(|i| pg.add_node(i)).collect();
        for u in 0..n {
            for &c in graph.children_ix(u) {
                pg.add_edge(handles[u], handles[c], ());
            }
        }
        let mut cycles: Vec<Vec<String>> = tarjan_scc(&pg)
            .into_iter()
            .filter(|scc| scc.len() > 1)
            .map(|scc| {
                let mut ids: Vec<String> =
                    scc.iter().map(|h| graph.id_at(pg[*h]).to_string()).collect();
                ids.sort();
                ids
            })
            .collect();
        cycles.sort();
        for ids in cycles {
            out.push(
                ViolationCode::Cycle,
                &ids[0],
                format!("nodes {{{}}} form a directed cycle", ids.join(", ")),
            );
        }
    }

    let missions: Vec<usize> = (0..n)
        .filter(|&i| graph.node_at(i).kind == NodeKind::Mission)
        .collect();
    if missions.len() != 1 {
        out.push(
            ViolationCode::MissionCount,
            "graph",
            format!("expected exactly one mission node, found {}", missions.len()),
        );
    }

    for i in 0..n {
        let node = graph.node_at(i);
        let indeg = graph.parents_ix(i).len();
        let outdeg = graph.children_ix(i).len();
        match node.kind {
            NodeKind::Mission => {
                if indeg != 0 {
                    out.push(ViolationCode::MissionDegree, &node.id, "mission has incoming edges");
                }
                if outdeg == 0 {
                    out.push(
                        ViolationCode::MissionDegree,
                        &node.id,
                        "mission has no children, nothing is decomposed",
                    );
                }
            }
            NodeKind::Function => {
                if indeg == 0 {
                    out.push(ViolationCode::FunctionDegree, &node.id, "function has no parent");
                }
                if outdeg == 0 {
                    out.push(ViolationCode::FunctionDegree, &node.id, "function has no children");
                }
            }
            NodeKind::Directive => {
                if outdeg != 0 {
                    out.push(ViolationCode::DirectiveDegree, &node.id, "directive has children");
                }
                if indeg == 0 {
                    out.push(ViolationCode::DirectiveDegree, &node.id, "directive has no parent");
                }
            }
        }
    }

    if !missions.is_empty() {
        let mut seen = vec![false; n];
        let mut queue: VecDeque<usize> = missions.iter().copied().collect();
        for &m in &missions {
            seen[m] = true;
        }
        while let Some(u) = queue.pop_front() {
            for &c in graph.children_ix(u) {
                if !seen[c] {
                    seen[c] = true;
                    queue.push_back(c);
                }
            }
        }
        for (i, reached) in seen.iter().enumerate() {
            if !reached {
                out.push(
                    ViolationCode::Unreachable,
                    graph.id_at(i),
                    "not reachable from the mission",
                );
            }
        }
    }

    for edge in graph.edges() {
        let from = graph.ix(edge.from.as_str()).expect("edge endpoints exist");
        let to = graph.ix(edge.to.as_str()).expect("edge endpoints exist");
        let subject = format!("{}->{}", edge.from, edge.to);
        let expected = graph.inferred_kind(from, to);
        if let Some(declared) = edge.declared_kind {
            if declared != expected {
                out.push(
                    ViolationCode::EdgeKind,
                    &subject,
                    format!(
                        "declared {declared} but degrees require {expected} (parent outdegree {}, child indegree {})",
                        graph.children_ix(from).len(),
                        graph.parents_ix(to).len()
                    ),
                );
            }
        }
        if graph.node_at(to).kind == NodeKind::Directive && edge.relevance.is_none() {
            out.push(
                ViolationCode::RelevanceMissing,
                &subject,
                "edge into a directive needs a relevance value",
            );
        }
    }

    ValidationReport {
        ok: out.0.is_empty(),
        violations: out.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, EdgeKind, Node};
    use crate::ratio;

    fn build(edges: Vec<Edge>, extra: Vec<Node>) -> FdGraph {
        let mut nodes = vec![
            Node::new("m", NodeKind::Mission, ""),
            Node::new("a", NodeKind::Function, ""),
            Node::new("b", NodeKind::Function, ""),
            Node::new("d1", NodeKind::Directive, ""),
            Node::new("d2", NodeKind::Directive, ""),
        ];
        nodes.extend(extra);
        FdGraph::new(nodes, edges).unwrap()
    }

    fn base_edges() -> Vec<Edge> {
        let r = || ratio::ratio(7, 10);
        vec![
            Edge::new("m", "a"),
            Edge::new("m", "b"),
            Edge::new("a", "d1").with_relevance(r()),
            Edge::new("a", "d2").with_relevance(r()),
            Edge::new("b", "d1").with_relevance(r()),
            Edge::new("b", "d2").with_relevance(r()),
        ]
    }

    #[test]
    fn well_formed_graph_passes() {
        let report = build(base_edges(), vec![]).validate();
        assert!(report.ok, "{:?}", report.violations);
    }

    #[test]
    fn reports_every_violation() {
        let mut edges = base_edges();
        edges.push(Edge::new("d1", "a"));
        edges[0].declared_kind = Some(EdgeKind::Refinement);
        edges.retain(|e| !(e.from.as_str() == "b" && e.to.as_str() == "d2"));
        edges[2].relevance = None;
        let g = build(
            edges,
            vec![
                Node::new("m2", NodeKind::Mission, ""),
                Node::new("orphan", NodeKind::Function, ""),
            ],
        );
        let report = g.validate();
        assert!(!report.ok);
        for code in [
            ViolationCode::Cycle,
            ViolationCode::MissionCount,
            ViolationCode::MissionDegree,
            ViolationCode::FunctionDegree,
            ViolationCode::DirectiveDegree,
            ViolationCode::EdgeKind,
            ViolationCode::RelevanceMissing,
        ] {
            assert!(report.has(code), "missing {code}: {:?}", report.violations);
        }
    }

    #[test]
    fn unreachable_function_is_flagged() {
        let mut edges = base_edges();
        edges.push(Edge::new("x", "d1").with_relevance(ratio::int(1)));
        let g = build(edges, vec![Node::new("x", NodeKind::Function, "")]);
        let report = g.validate();
        assert!(report.has(ViolationCode::Unreachable));
        assert!(report.has(ViolationCode::FunctionDegree));
    }

    #[test]
    fn empty_graph_has_no_mission() {
        let g = FdGraph::new(vec![], vec![]).unwrap();
        assert_eq!(g.validate().codes(), vec![ViolationCode::MissionCount]);
    }
}
