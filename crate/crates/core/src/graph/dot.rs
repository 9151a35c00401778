//! Graphviz rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use super::{EdgeKind, FdGraph, NodeId, NodeKind};

/// Optional overlay for [`FdGraph::export_dot`]: highlighted nodes, extra
/// per-node label lines and a caption.
#[derive(Clone, Debug, Default)]
pub struct DotAnnotations {
    pub highlight: BTreeSet<NodeId>,
    pub node_notes: BTreeMap<NodeId, String>,
    pub caption: Vec<String>,
}

fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for ch in text.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            _ => out.push(ch),
        }
    }
    out.push('"');
    out
}

pub(super) fn export(graph: &FdGraph, annotations: Option<&DotAnnotations>) -> String {
    let mut out = String::new();
    out.push_str("digraph fd {\n");
    out.push_str("  rankdir=TB;\n");
    if let Some(caption) = annotations.filter(|a| !a.caption.is_empty()) {
        let _ = writeln!(out, "  labelloc=b;\n  label={};", quote(&caption.caption.join("\n")));
    }

    for node in graph.nodes() {
        let shape = match node.kind {
            NodeKind::Mission => "doubleoctagon",
            NodeKind::Function => "box",
            NodeKind::Directive => "ellipse",
        };
        let mut label = node.id.to_string();
        if !node.label.is_empty() {
            label.push('\n');
            label.push_str(&node.label);
        }
        let mut attrs = format!("shape={shape}");
        if let Some(ann) = annotations {
            if let Some(note) = ann.node_notes.get(&node.id) {
                label.push('\n');
                label.push_str(note);
            }
            if ann.highlight.contains(&node.id) {
                attrs.push_str(", style=filled, fillcolor=\"#ffd966\", penwidth=2");
            }
        }
        let _ = writeln!(out, "  {} [{attrs}, label={}];", quote(node.id.as_str()), quote(&label));
    }

    for edge in graph.edges() {
        let kind = graph
            .edge_kind(edge.from.as_str(), edge.to.as_str())
            .expect("edge exists");
        let style = match kind {
            EdgeKind::Decomposition => "solid",
            EdgeKind::Refinement => "dashed",
            EdgeKind::Intersection => "bold",
        };
        let mut attrs = format!("style={style}");
        if let Some(rel) = &edge.relevance {
            let _ = write!(attrs, ", label={}", quote(&crate::ratio::to_decimal(rel, 2)));
        }
        let _ = writeln!(
            out,
            "  {} -> {} [{attrs}];",
            quote(edge.from.as_str()),
            quote(edge.to.as_str())
        );
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Node;

    #[test]
    fn single_node_graph_renders() {
        let g = FdGraph::new(vec![Node::new("m", NodeKind::Mission, "the \"goal\"")], vec![]).unwrap();
        let text = g.export_dot(Some(&DotAnnotations::default()));
        assert!(text.starts_with("digraph fd {"));
        assert!(text.trim_end().ends_with('}'));
        assert_eq!(text.matches("shape=").count(), 1);
        assert!(text.contains("\\\"goal\\\""));
    }
}
