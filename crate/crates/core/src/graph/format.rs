//! JSON graph document: `{"nodes": [...], "edges": [...]}`.

use serde::{Deserialize, Serialize};

use super::{Edge, EdgeKind, FdGraph, ImpactCategory, Node, NodeKind};
use crate::error::{Error, Result};
use crate::ratio::{self, Rational};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDocument {
    nodes: Vec<NodeRecord>,
    #[serde(default)]
    edges: Vec<EdgeRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: String,
    kind: NodeKind,
    #[serde(default)]
    label: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    from: String,
    to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<EdgeKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    relevance: Option<RelevanceValue>,
}

/// Relevance as written in documents: a number or a category name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RelevanceValue {
    Number(f64),
    Category(String),
}

impl RelevanceValue {
    pub fn to_rational(&self) -> Result<Rational> {
        match self {
            RelevanceValue::Number(v) => {
                ratio::from_f64(*v).ok_or_else(|| Error::InvalidRelevance(v.to_string()))
            }
            RelevanceValue::Category(name) => ImpactCategory::from_name(name)
                .map(ImpactCategory::relevance)
                .ok_or_else(|| Error::InvalidRelevance(name.clone())),
        }
    }
}

pub(super) fn parse(text: &str) -> Result<FdGraph> {
    let doc: GraphDocument = serde_json::from_str(text).map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let nodes = doc
        .nodes
        .into_iter()
        .map(|n| Node::new(n.id, n.kind, n.label))
        .collect();
    let edges = doc
        .edges
        .into_iter()
        .map(|e| {
            let relevance = e.relevance.as_ref().map(RelevanceValue::to_rational).transpose()?;
            Ok(Edge {
                from: e.from.into(),
                to: e.to.into(),
                declared_kind: e.kind,
                relevance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FdGraph::new(nodes, edges)
}

pub(super) fn serialize(graph: &FdGraph) -> String {
    let doc = GraphDocument {
        nodes: graph
            .nodes()
            .iter()
            .map(|n| NodeRecord {
                id: n.id.to_string(),
                kind: n.kind,
                label: n.label.clone(),
            })
            .collect(),
        edges: graph
            .edges()
            .iter()
            .map(|e| EdgeRecord {
                from: e.from.to_string(),
                to: e.to.to_string(),
                kind: e.declared_kind,
                relevance: e.relevance.as_ref().map(|r| {
                    let text = ratio::to_exact_decimal(r)
                        .unwrap_or_else(|| ratio::to_f64(r).to_string());
                    RelevanceValue::Number(text.parse().unwrap_or(f64::NAN))
                }),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("graph document serializes")
}
