//! Change scenarios and ripple impact.
//!
//! A scenario edits a copy of the graph; the base graph is never touched.
//! Impact is single-hop: a directive is affected when its coupling to an
//! edited directive reaches the threshold.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DirectiveSet, Edge, FdGraph, Node, NodeId, NodeKind, RelevanceValue};
use crate::metrics::{self, MembershipMap};
use crate::ratio::{self, ratio, Rational};
use crate::slicing::Slice;

/// Coupling of two directives two hops apart under an owner of size four.
pub fn default_threshold() -> Rational {
    ratio(1, 8)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    #[serde(alias = "ModifyDirective")]
    ModifyDirective,
    #[serde(alias = "DeleteDirective")]
    DeleteDirective,
    #[serde(alias = "AddDirective")]
    AddDirective,
    #[serde(alias = "DeleteFunctionSubtree")]
    DeleteFunctionSubtree,
    #[serde(alias = "AddFunction")]
    AddFunction,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::ModifyDirective => "modify_directive",
            ScenarioKind::DeleteDirective => "delete_directive",
            ScenarioKind::AddDirective => "add_directive",
            ScenarioKind::DeleteFunctionSubtree => "delete_function_subtree",
            ScenarioKind::AddFunction => "add_function",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewDirective {
    pub id: NodeId,
    #[serde(default)]
    pub label: String,
    pub relevance: RelevanceValue,
}

/// Scenario data. Which fields apply depends on the kind:
///
/// * modify: `relevance` and/or `label`; `parent` picks the edge when the
///   directive has several parents.
/// * add directive: `id`, `label`, `relevance`.
/// * add function: `id`, `label`, `adopt` (children of the target moved
///   under the new node) and `directives` (new leaves under it).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Payload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevance: Option<RelevanceValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub adopt: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub directives: Vec<NewDirective>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangeScenario {
    pub kind: ScenarioKind,
    /// The edited node, or the parent for additions.
    pub target: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Payload>,
}

impl ChangeScenario {
    pub fn new(kind: ScenarioKind, target: impl Into<NodeId>) -> Self {
        ChangeScenario {
            kind,
            target: target.into(),
            payload: None,
        }
    }

    pub fn with_payload(mut self, payload: Payload) -> Self {
        self.payload = Some(payload);
        self
    }

    fn payload(&self) -> Result<&Payload> {
        self.payload
            .as_ref()
            .ok_or_else(|| Error::Scenario(format!("{} on `{}` needs a payload", self.kind, self.target)))
    }
}

impl fmt::Display for ChangeScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind, self.target)
    }
}

/// Parses a scenario file: a JSON list of `{kind, target, payload?}`.
pub fn parse_scenarios(text: &str) -> Result<Vec<ChangeScenario>> {
    serde_json::from_str(text).map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Editable copy of a graph. Declared edge kinds are dropped so that kinds
/// are re-inferred from the edited structure.
struct Draft {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl Draft {
    fn of(graph: &FdGraph) -> Self {
        Draft {
            nodes: graph.nodes().to_vec(),
            edges: graph
                .edges()
                .iter()
                .map(|e| Edge {
                    declared_kind: None,
                    ..e.clone()
                })
                .collect(),
        }
    }

    fn remove(&mut self, gone: &BTreeSet<NodeId>) {
        self.nodes.retain(|n| !gone.contains(&n.id));
        self.edges.retain(|e| !gone.contains(&e.from) && !gone.contains(&e.to));
    }

    fn build(self) -> Result<FdGraph> {
        let graph = FdGraph::new(self.nodes, self.edges).map_err(|e| Error::InvalidEdit(e.to_string()))?;
        let report = graph.validate();
        if !report.ok {
            let detail: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
            return Err(Error::InvalidEdit(detail.join("; ")));
        }
        Ok(graph)
    }
}

fn expect_kind(graph: &FdGraph, id: &NodeId, wanted: &[NodeKind]) -> Result<NodeKind> {
    let kind = graph.kind(id.as_str())?;
    if !wanted.contains(&kind) {
        return Err(match wanted {
            [NodeKind::Directive] => Error::NotDirective(id.clone()),
            _ => Error::NotFunction(id.clone()),
        });
    }
    Ok(kind)
}

fn fresh_id(graph: &FdGraph, id: &NodeId, taken: &BTreeSet<NodeId>) -> Result<()> {
    if id.as_str().is_empty() {
        return Err(Error::EmptyNodeId);
    }
    if graph.contains(id.as_str()) || taken.contains(id) {
        return Err(Error::DuplicateNode(id.clone()));
    }
    Ok(())
}

/// Ancestors left without children once `gone` is removed, repeatedly.
fn cascade_up(graph: &FdGraph, gone: &mut BTreeSet<NodeId>) {
    let mut frontier: Vec<NodeId> = gone.iter().cloned().collect();
    while let Some(id) = frontier.pop() {
        for p in graph.parents(id.as_str()).unwrap_or_default() {
            if gone.contains(p) {
                continue;
            }
            let children = graph.children(p.as_str()).unwrap_or_default();
            if children.iter().all(|c| gone.contains(*c)) {
                gone.insert(p.clone());
                frontier.push(p.clone());
            }
        }
    }
}

/// Nodes removed by deleting the subtree at `target`: the target, every
/// descendant whose parents are all removed, then any ancestor left empty.
fn subtree_removal(graph: &FdGraph, target: &NodeId) -> Result<BTreeSet<NodeId>> {
    let below = graph.descendants(target.as_str())?;
    let order = graph.topological_order().ok_or(Error::Cyclic)?;
    let mut gone = BTreeSet::from([target.clone()]);
    for id in order {
        if below.contains(id) && graph.parents(id.as_str())?.iter().all(|p| gone.contains(*p)) {
            gone.insert(id.clone());
        }
    }
    cascade_up(graph, &mut gone);
    Ok(gone)
}

fn relevance_of(value: &RelevanceValue) -> Result<Rational> {
    value.to_rational()
}

/// Applies `scenario` to a copy of `graph`. The result must validate.
pub fn apply_change(graph: &FdGraph, scenario: &ChangeScenario) -> Result<FdGraph> {
    let target = &scenario.target;
    if !graph.contains(target.as_str()) {
        return Err(Error::UnknownNode(target.clone()));
    }
    let mut draft = Draft::of(graph);
    match scenario.kind {
        ScenarioKind::ModifyDirective => {
            expect_kind(graph, target, &[NodeKind::Directive])?;
            let payload = scenario.payload()?;
            if payload.relevance.is_none() && payload.label.is_none() {
                return Err(Error::Scenario(format!("{scenario} changes nothing")));
            }
            if let Some(label) = &payload.label {
                let node = draft.nodes.iter_mut().find(|n| &n.id == target).expect("target exists");
                node.label = label.clone();
            }
            if let Some(value) = &payload.relevance {
                let relevance = relevance_of(value)?;
                let parents = graph.parents(target.as_str())?;
                let parent = match &payload.parent {
                    Some(p) if parents.contains(&p) => p.clone(),
                    Some(p) => {
                        return Err(Error::Scenario(format!("`{p}` is not a parent of `{target}`")));
                    }
                    None if parents.len() == 1 => parents[0].clone(),
                    None => {
                        return Err(Error::Scenario(format!(
                            "`{target}` has {} parents; name one in `parent`",
                            parents.len()
                        )));
                    }
                };
                let edge = draft
                    .edges
                    .iter_mut()
                    .find(|e| e.from == parent && &e.to == target)
                    .expect("parent edge exists");
                edge.relevance = Some(relevance);
            }
        }
        ScenarioKind::DeleteDirective => {
            expect_kind(graph, target, &[NodeKind::Directive])?;
            let mut gone = BTreeSet::from([target.clone()]);
            cascade_up(graph, &mut gone);
            draft.remove(&gone);
        }
        ScenarioKind::DeleteFunctionSubtree => {
            expect_kind(graph, target, &[NodeKind::Function])?;
            let gone = subtree_removal(graph, target)?;
            draft.remove(&gone);
        }
        ScenarioKind::AddDirective => {
            expect_kind(graph, target, &[NodeKind::Mission, NodeKind::Function])?;
            let payload = scenario.payload()?;
            let id = payload
                .id
                .clone()
                .ok_or_else(|| Error::Scenario(format!("{scenario} needs `id`")))?;
            let value = payload
                .relevance
                .as_ref()
                .ok_or_else(|| Error::Scenario(format!("{scenario} needs `relevance`")))?;
            fresh_id(graph, &id, &BTreeSet::new())?;
            draft.nodes.push(Node::new(
                id.clone(),
                NodeKind::Directive,
                payload.label.clone().unwrap_or_default(),
            ));
            draft.edges.push(Edge::new(target.clone(), id).with_relevance(relevance_of(value)?));
        }
        ScenarioKind::AddFunction => {
            expect_kind(graph, target, &[NodeKind::Mission, NodeKind::Function])?;
            let payload = scenario.payload()?;
            let id = payload
                .id
                .clone()
                .ok_or_else(|| Error::Scenario(format!("{scenario} needs `id`")))?;
            fresh_id(graph, &id, &BTreeSet::new())?;
            let children = graph.children(target.as_str())?;
            let mut taken = BTreeSet::from([id.clone()]);
            for a in &payload.adopt {
                if !children.contains(&a) {
                    return Err(Error::Scenario(format!("`{a}` is not a child of `{target}`")));
                }
            }
            draft.nodes.push(Node::new(
                id.clone(),
                NodeKind::Function,
                payload.label.clone().unwrap_or_default(),
            ));
            for edge in draft.edges.iter_mut() {
                if &edge.from == target && payload.adopt.contains(&edge.to) {
                    edge.from = id.clone();
                }
            }
            draft.edges.push(Edge::new(target.clone(), id.clone()));
            for d in &payload.directives {
                fresh_id(graph, &d.id, &taken)?;
                taken.insert(d.id.clone());
                draft.nodes.push(Node::new(d.id.clone(), NodeKind::Directive, d.label.clone()));
                draft
                    .edges
                    .push(Edge::new(id.clone(), d.id.clone()).with_relevance(relevance_of(&d.relevance)?));
            }
        }
    }
    draft.build()
}

/// One propagation step: `directive` is affected because its coupling to
/// the edited `source` is at least the threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct ImpactLink {
    pub directive: NodeId,
    pub source: NodeId,
    pub coupling: Rational,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImpactReport {
    pub scenario: ChangeScenario,
    pub slice: BTreeSet<NodeId>,
    pub seed: DirectiveSet,
    pub affected_directives: DirectiveSet,
    pub affected_capabilities: BTreeSet<NodeId>,
    pub links: Vec<ImpactLink>,
    pub impact_count: usize,
    pub threshold: Rational,
}

fn check_threshold(threshold: &Rational) -> Result<()> {
    if ratio::is_unit_interval(threshold) && *threshold > ratio(0, 1) {
        Ok(())
    } else {
        Err(Error::ThresholdOutOfRange(ratio::fmt4(threshold)))
    }
}

/// Graph and membership in which the edited directives are looked up.
///
/// Edits and deletions are measured before the change, where the seed
/// still exists. Additions are measured after it, with the slice's
/// membership re-resolved; a new directive no member reaches has no owner
/// and only counts itself.
fn impact_context(
    graph: &FdGraph,
    slice: &Slice,
    scenario: &ChangeScenario,
    edited: FdGraph,
) -> Result<(Option<FdGraph>, Option<MembershipMap>, DirectiveSet)> {
    Ok(match scenario.kind {
        ScenarioKind::ModifyDirective | ScenarioKind::DeleteDirective => {
            (None, None, DirectiveSet::from([scenario.target.clone()]))
        }
        ScenarioKind::DeleteFunctionSubtree => {
            let gone = subtree_removal(graph, &scenario.target)?;
            let seed = gone
                .into_iter()
                .filter(|id| graph.kind(id.as_str()).ok() == Some(NodeKind::Directive))
                .collect();
            (None, None, seed)
        }
        ScenarioKind::AddDirective | ScenarioKind::AddFunction => {
            let payload = scenario.payload()?;
            let mut seed = DirectiveSet::new();
            if scenario.kind == ScenarioKind::AddDirective {
                seed.extend(payload.id.clone());
            } else {
                seed.extend(payload.directives.iter().map(|d| d.id.clone()));
                seed.extend(
                    payload
                        .adopt
                        .iter()
                        .filter(|a| graph.kind(a.as_str()).ok() == Some(NodeKind::Directive))
                        .cloned(),
                );
            }
            let members: Vec<usize> = slice
                .members()
                .iter()
                .map(|m| edited.ix(m.as_str()))
                .collect::<Result<_>>()?;
            let membership = metrics::resolve(&edited, &members)?.into_map(&edited, &members);
            (Some(edited), Some(membership), seed)
        }
    })
}

/// Entities affected by `scenario` under `slice`.
pub fn impact_set(
    graph: &FdGraph,
    slice: &Slice,
    scenario: &ChangeScenario,
    threshold: &Rational,
) -> Result<ImpactReport> {
    check_threshold(threshold)?;
    let edited = apply_change(graph, scenario)?;
    let (after, membership_after, seed) = impact_context(graph, slice, scenario, edited)?;
    let ctx = after.as_ref().unwrap_or(graph);
    let membership = membership_after.as_ref().unwrap_or(slice.membership());

    let mut affected = seed.clone();
    let mut links = Vec::new();
    for s in &seed {
        let Some(owner) = membership.owner_of(s.as_str()) else {
            continue;
        };
        let owner_set = membership.resolved_set(owner.as_str())?;
        for d in ctx.directives() {
            if d == s || seed.contains(d) {
                continue;
            }
            let coupling = match metrics::directive_coupling(ctx, d.as_str(), s.as_str(), &owner_set) {
                Ok(c) => c,
                Err(Error::Disconnected(..)) => continue,
                Err(e) => return Err(e),
            };
            if coupling >= *threshold {
                affected.insert(d.clone());
                links.push(ImpactLink {
                    directive: d.clone(),
                    source: s.clone(),
                    coupling,
                });
            }
        }
    }
    let affected_capabilities: BTreeSet<NodeId> = affected
        .iter()
        .filter_map(|d| membership.owner_of(d.as_str()).cloned())
        .collect();
    Ok(ImpactReport {
        scenario: scenario.clone(),
        slice: slice.members().clone(),
        impact_count: affected.len() + affected_capabilities.len(),
        seed,
        affected_directives: affected,
        affected_capabilities,
        links,
        threshold: threshold.clone(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub slices: Vec<BTreeSet<NodeId>>,
    pub scenarios: Vec<ChangeScenario>,
    /// `reports[i][j]`: slice `i` under scenario `j`.
    pub reports: Vec<Vec<ImpactReport>>,
    pub totals: Vec<usize>,
    /// Per scenario, the indices of the slices with the smallest impact.
    pub winners: Vec<Vec<usize>>,
}

impl Comparison {
    pub fn count(&self, slice: usize, scenario: usize) -> usize {
        self.reports[slice][scenario].impact_count
    }
}

pub fn compare_slices(
    graph: &FdGraph,
    slices: &[Slice],
    scenarios: &[ChangeScenario],
    threshold: &Rational,
) -> Result<Comparison> {
    check_threshold(threshold)?;
    let reports: Vec<Vec<ImpactReport>> = slices
        .par_iter()
        .map(|slice| {
            scenarios
                .iter()
                .map(|sc| impact_set(graph, slice, sc, threshold))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let totals = reports
        .iter()
        .map(|row| row.iter().map(|r| r.impact_count).sum())
        .collect();
    let winners = (0..scenarios.len())
        .map(|j| {
            let best = reports.iter().map(|row| row[j].impact_count).min().unwrap_or(0);
            (0..reports.len()).filter(|&i| reports[i][j].impact_count == best).collect()
        })
        .collect();
    Ok(Comparison {
        slices: slices.iter().map(|s| s.members().clone()).collect(),
        scenarios: scenarios.to_vec(),
        reports,
        totals,
        winners,
    })
}
