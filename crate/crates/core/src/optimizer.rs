//! Constrained selection among initial capability sets.
//!
//! Each candidate slice is scored on three criteria: the cohesion-coupling
//! aggregate `f`, technology feasibility `tf` (weakest member) and a
//! sequential schedule (makespan plus an order cost). Candidates outside
//! `tf >= tf_min`, `makespan <= sched_max`, `f >= f_min` are reported with
//! the constraints they break; among the rest the scalarized objective `z`
//! picks a winner and a Pareto front over `(f, tf, -makespan)` is returned.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FdGraph, ImpactCategory, NodeId};
use crate::metrics;
use crate::ratio::{self, int, ratio, Rational};
use crate::slicing::{self, Slice};

/// Slices up to this size are ordered exactly; larger ones greedily.
pub const EXHAUSTIVE_ORDER_LIMIT: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct TechFeasibility {
    pub per_node: BTreeMap<NodeId, Rational>,
    pub default: Rational,
}

impl Default for TechFeasibility {
    fn default() -> Self {
        TechFeasibility {
            per_node: BTreeMap::new(),
            default: Rational::one(),
        }
    }
}

impl TechFeasibility {
    pub fn new(per_node: BTreeMap<NodeId, Rational>, default: Rational) -> Result<Self> {
        if let Some((id, v)) = per_node.iter().find(|(_, v)| !ratio::is_unit_interval(v)) {
            return Err(Error::Config(format!(
                "feasibility of `{id}` is {}, outside [0, 1]",
                ratio::fmt4(v)
            )));
        }
        if !ratio::is_unit_interval(&default) {
            return Err(Error::Config("default feasibility outside [0, 1]".into()));
        }
        Ok(TechFeasibility { per_node, default })
    }

    pub fn of(&self, id: &str) -> &Rational {
        self.per_node.get(id).unwrap_or(&self.default)
    }
}

/// Weakest-link feasibility of a slice.
pub fn slice_feasibility(slice: &Slice, tf: &TechFeasibility) -> Rational {
    slice
        .members()
        .iter()
        .map(|m| tf.of(m.as_str()))
        .min()
        .cloned()
        .unwrap_or_else(|| tf.default.clone())
}

/// Per-node development time overrides; nodes without one take their size.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeModel {
    pub overrides: BTreeMap<NodeId, Rational>,
}

impl TimeModel {
    pub fn time_of(&self, graph: &FdGraph, id: &str) -> Result<Rational> {
        let time = match self.overrides.get(id) {
            Some(t) => t.clone(),
            None => int(metrics::size_of(graph, id)? as i64),
        };
        if !time.is_positive() {
            return Err(Error::NonPositiveTime(NodeId::new(id)));
        }
        Ok(time)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleModel {
    pub per_node_time: BTreeMap<NodeId, Rational>,
    pub order: Vec<NodeId>,
    pub makespan: Rational,
    /// Sum of `Cp(earlier, later)` over all position pairs.
    pub order_cost: Rational,
    /// `true` when the order came from greedy insertion rather than exact search.
    pub heuristic: bool,
}

pub type CouplingMatrix = BTreeMap<(NodeId, NodeId), Rational>;

fn cp<'a>(matrix: &'a CouplingMatrix, p: &NodeId, q: &NodeId) -> &'a Rational {
    matrix
        .get(&(p.clone(), q.clone()))
        .expect("coupling matrix covers every ordered member pair")
}

/// `sum_{i<j} Cp(order[i], order[j])`.
pub fn order_cost(order: &[NodeId], coupling: &CouplingMatrix) -> Rational {
    let mut cost = Rational::zero();
    for (i, p) in order.iter().enumerate() {
        for q in &order[i + 1..] {
            cost += cp(coupling, p, q);
        }
    }
    cost
}

/// Development order minimizing forward coupling.
///
/// Up to [`EXHAUSTIVE_ORDER_LIMIT`] members this is exact: a subset dynamic
/// program over "remaining members" where placing `x` first among the
/// remaining set `R` costs `sum_{r in R, r != x} Cp(x, r)`. The reported
/// order is the lexicographically smallest optimal one. Larger slices use
/// greedy insertion and are flagged heuristic.
pub fn order_by_coupling(members: &[NodeId], coupling: &CouplingMatrix) -> (Vec<NodeId>, Rational, bool) {
    let mut members = members.to_vec();
    members.sort();
    members.dedup();
    let n = members.len();
    if n <= 1 {
        return (members, Rational::zero(), false);
    }

    // forward[x][mask] = sum of Cp(x, r) for r in mask
    let first_cost = |x: usize, rest: usize| -> Rational {
        let mut sum = Rational::zero();
        for r in 0..n {
            if rest & (1 << r) != 0 {
                sum += cp(coupling, &members[x], &members[r]);
            }
        }
        sum
    };

    if n <= EXHAUSTIVE_ORDER_LIMIT {
        let full = (1usize << n) - 1;
        let mut best: Vec<Rational> = vec![Rational::zero(); full + 1];
        for mask in 1..=full {
            let mut value: Option<Rational> = None;
            for x in 0..n {
                if mask & (1 << x) == 0 {
                    continue;
                }
                let rest = mask & !(1 << x);
                let candidate = first_cost(x, rest) + &best[rest];
                if value.as_ref().is_none_or(|v| candidate < *v) {
                    value = Some(candidate);
                }
            }
            best[mask] = value.expect("mask is non-empty");
        }
        let mut order = Vec::with_capacity(n);
        let mut mask = full;
        while mask != 0 {
            for x in 0..n {
                if mask & (1 << x) == 0 {
                    continue;
                }
                let rest = mask & !(1 << x);
                if first_cost(x, rest) + &best[rest] == best[mask] {
                    order.push(members[x].clone());
                    mask = rest;
                    break;
                }
            }
        }
        return (order, best[full].clone(), false);
    }

    let mut remaining: BTreeSet<usize> = (0..n).collect();
    let mut order = Vec::with_capacity(n);
    let mut total = Rational::zero();
    while !remaining.is_empty() {
        let rest_mask = |x: usize| remaining.iter().filter(|&&r| r != x).fold(0u128, |m, &r| m | (1 << r));
        let mut pick: Option<(usize, Rational)> = None;
        for &x in &remaining {
            let mask = rest_mask(x);
            let mut cost = Rational::zero();
            for r in 0..n {
                if mask & (1 << r) != 0 {
                    cost += cp(coupling, &members[x], &members[r]);
                }
            }
            if pick.as_ref().is_none_or(|(_, c)| cost < *c) {
                pick = Some((x, cost));
            }
        }
        let (x, cost) = pick.expect("remaining is non-empty");
        total += cost;
        remaining.remove(&x);
        order.push(members[x].clone());
    }
    (order, total, true)
}

pub fn schedule_slice(graph: &FdGraph, slice: &Slice, times: &TimeModel) -> Result<ScheduleModel> {
    let per_node_time: BTreeMap<NodeId, Rational> = slice
        .members()
        .iter()
        .map(|m| Ok((m.clone(), times.time_of(graph, m.as_str())?)))
        .collect::<Result<_>>()?;
    let makespan = per_node_time.values().fold(Rational::zero(), |acc, t| acc + t);
    let coupling = metrics::coupling_matrix(graph, slice.membership())?;
    let members: Vec<NodeId> = slice.members().iter().cloned().collect();
    let (order, order_cost, heuristic) = order_by_coupling(&members, &coupling);
    Ok(ScheduleModel {
        per_node_time,
        order,
        makespan,
        order_cost,
        heuristic,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    pub f: Rational,
    pub tf: Rational,
    pub sched: Rational,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            f: ratio(1, 2),
            tf: ratio(3, 10),
            sched: ratio(1, 5),
        }
    }
}

impl Weights {
    /// Scales the weights to sum to one.
    pub fn normalized(f: Rational, tf: Rational, sched: Rational) -> Result<Self> {
        if f.is_negative() || tf.is_negative() || sched.is_negative() {
            return Err(Error::Config("weights must be nonnegative".into()));
        }
        let sum = &f + &tf + &sched;
        if sum.is_zero() {
            return Err(Error::Config("weights must not all be zero".into()));
        }
        Ok(Weights {
            f: f / &sum,
            tf: tf / &sum,
            sched: sched / &sum,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationConfig {
    pub tf_min: Rational,
    /// `None` leaves the schedule unconstrained.
    pub sched_max: Option<Rational>,
    /// `None` leaves `f` unconstrained.
    pub f_min: Option<Rational>,
    pub weights: Weights,
    pub lambda: Rational,
    pub tf: TechFeasibility,
    pub times: TimeModel,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        OptimizationConfig {
            tf_min: Rational::zero(),
            sched_max: None,
            f_min: None,
            weights: Weights::default(),
            lambda: Rational::one(),
            tf: TechFeasibility::default(),
            times: TimeModel::default(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    tf_min: Option<f64>,
    sched_max: Option<f64>,
    f_min: Option<f64>,
    lambda: Option<f64>,
    weights: Option<WeightsFile>,
    tf_default: Option<f64>,
    #[serde(default)]
    tf_overrides: BTreeMap<String, f64>,
    #[serde(default)]
    time_overrides: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsFile {
    f: f64,
    tf: f64,
    sched: f64,
}

fn exact(name: &str, value: f64) -> Result<Rational> {
    ratio::from_f64(value).ok_or_else(|| Error::Config(format!("`{name}` is not a finite number")))
}

impl OptimizationConfig {
    /// Parses the JSON optimization config. Absent keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let file: ConfigFile = serde_json::from_str(text).map_err(|e| Error::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let mut config = OptimizationConfig::default();
        if let Some(v) = file.tf_min {
            config.tf_min = exact("tf_min", v)?;
        }
        if let Some(v) = file.sched_max {
            let v = exact("sched_max", v)?;
            if !v.is_positive() {
                return Err(Error::Config("`sched_max` must be positive".into()));
            }
            config.sched_max = Some(v);
        }
        if let Some(v) = file.f_min {
            config.f_min = Some(exact("f_min", v)?);
        }
        if let Some(v) = file.lambda {
            let v = exact("lambda", v)?;
            if v.is_negative() {
                return Err(Error::Config("`lambda` must be nonnegative".into()));
            }
            config.lambda = v;
        }
        if let Some(w) = file.weights {
            config.weights =
                Weights::normalized(exact("weights.f", w.f)?, exact("weights.tf", w.tf)?, exact("weights.sched", w.sched)?)?;
        }
        let default_tf = match file.tf_default {
            Some(v) => exact("tf_default", v)?,
            None => Rational::one(),
        };
        let per_node = file
            .tf_overrides
            .into_iter()
            .map(|(k, v)| Ok((NodeId::from(k.clone()), exact(&k, v)?)))
            .collect::<Result<_>>()?;
        config.tf = TechFeasibility::new(per_node, default_tf)?;
        config.times.overrides = file
            .time_overrides
            .into_iter()
            .map(|(k, v)| {
                let t = exact(&k, v)?;
                if !t.is_positive() {
                    return Err(Error::NonPositiveTime(NodeId::from(k)));
                }
                Ok((NodeId::from(k), t))
            })
            .collect::<Result<_>>()?;
        Ok(config)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Criteria {
    pub f: Rational,
    pub tf: Rational,
    pub makespan: Rational,
    pub order_cost: Rational,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Range {
    pub min: Rational,
    pub max: Rational,
}

impl Range {
    fn over<'a>(values: impl Iterator<Item = &'a Rational>) -> Option<Self> {
        let mut range: Option<Range> = None;
        for v in values {
            range = Some(match range {
                None => Range { min: v.clone(), max: v.clone() },
                Some(r) => Range {
                    min: r.min.min(v.clone()),
                    max: r.max.max(v.clone()),
                },
            });
        }
        range
    }

    /// Maps `[min, max]` onto `[0, 1]`; a constant criterion maps to 1/2.
    pub fn normalize(&self, value: &Rational) -> Rational {
        if self.max == self.min {
            ratio(1, 2)
        } else {
            (value - &self.min) / (&self.max - &self.min)
        }
    }
}

/// Observed criterion ranges over a candidate pool.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizers {
    pub f: Range,
    pub makespan: Range,
    pub order_cost: Range,
}

impl Normalizers {
    pub fn from_pool(pool: &[Criteria]) -> Option<Self> {
        Some(Normalizers {
            f: Range::over(pool.iter().map(|c| &c.f))?,
            makespan: Range::over(pool.iter().map(|c| &c.makespan))?,
            order_cost: Range::over(pool.iter().map(|c| &c.order_cost))?,
        })
    }
}

/// `z = w_f * norm(f) + w_tf * tf - w_s * (norm(makespan) + norm(order_cost)) / 2`.
///
/// Makespan and order cost are normalized separately so that rescaling all
/// node times leaves the ordering of candidates unchanged.
pub fn objective_z(criteria: &Criteria, weights: &Weights, normalizers: &Normalizers) -> Rational {
    let sched = (normalizers.makespan.normalize(&criteria.makespan)
        + normalizers.order_cost.normalize(&criteria.order_cost))
        / int(2);
    &weights.f * normalizers.f.normalize(&criteria.f) + &weights.tf * &criteria.tf - &weights.sched * sched
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constraint {
    Tf,
    Sched,
    F,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::Tf => "tf",
            Constraint::Sched => "sched",
            Constraint::F => "f",
        })
    }
}

/// Constraints the criteria break under `config`.
pub fn violated_constraints(criteria: &Criteria, config: &OptimizationConfig) -> Vec<Constraint> {
    let mut out = Vec::new();
    if criteria.tf < config.tf_min {
        out.push(Constraint::Tf);
    }
    if config.sched_max.as_ref().is_some_and(|max| criteria.makespan > *max) {
        out.push(Constraint::Sched);
    }
    if config.f_min.as_ref().is_some_and(|min| criteria.f < *min) {
        out.push(Constraint::F);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub slice: Slice,
    pub criteria: Criteria,
    pub schedule: ScheduleModel,
    pub z: Rational,
    pub violations: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult {
    pub best: Option<Candidate>,
    pub pareto: Vec<Candidate>,
    pub infeasible: Vec<Candidate>,
    pub normalizers: Normalizers,
    /// `false` when the input slice list came from a truncated enumeration.
    pub globally_optimal: bool,
}

fn dominates(a: &[Rational; 3], b: &[Rational; 3]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

/// Indices of the non-dominated points (all objectives maximized), in
/// input order.
pub fn pareto_front(points: &[[Rational; 3]]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    // a dominator always sorts lexicographically before what it dominates
    order.sort_by(|&a, &b| points[b].cmp(&points[a]).then(a.cmp(&b)));
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        if !front.iter().any(|&j| dominates(&points[j], &points[i])) {
            front.push(i);
        }
    }
    front.sort_unstable();
    front
}

/// Scores candidates and selects among the feasible ones.
///
/// `complete` states whether `slices` came from a complete enumeration;
/// global optimality is only claimed when it did.
pub fn optimize(
    graph: &FdGraph,
    slices: &[Slice],
    config: &OptimizationConfig,
    complete: bool,
) -> Result<OptimizationResult> {
    if slices.is_empty() {
        return Err(Error::NoCandidates);
    }
    let scored: Vec<(Criteria, ScheduleModel)> = slices
        .par_iter()
        .map(|slice| {
            let f = slicing::slice_objective(graph, slice, &config.lambda)?.aggregate;
            let tf = slice_feasibility(slice, &config.tf);
            let schedule = schedule_slice(graph, slice, &config.times)?;
            let criteria = Criteria {
                f,
                tf,
                makespan: schedule.makespan.clone(),
                order_cost: schedule.order_cost.clone(),
            };
            Ok((criteria, schedule))
        })
        .collect::<Result<_>>()?;
    let pool: Vec<Criteria> = scored.iter().map(|(c, _)| c.clone()).collect();
    let normalizers = Normalizers::from_pool(&pool).expect("pool is non-empty");

    let mut candidates: Vec<Candidate> = slices
        .iter()
        .zip(scored)
        .map(|(slice, (criteria, schedule))| Candidate {
            z: objective_z(&criteria, &config.weights, &normalizers),
            violations: violated_constraints(&criteria, config),
            slice: slice.clone(),
            criteria,
            schedule,
        })
        .collect();
    candidates.sort_by(|a, b| a.slice.cmp(&b.slice));

    let (feasible, infeasible): (Vec<Candidate>, Vec<Candidate>) =
        candidates.into_iter().partition(|c| c.violations.is_empty());

    let best = feasible
        .iter()
        .fold(None::<&Candidate>, |best, c| match best {
            Some(b) if b.z >= c.z => Some(b),
            _ => Some(c),
        })
        .cloned();

    let points: Vec<[Rational; 3]> = feasible
        .iter()
        .map(|c| [c.criteria.f.clone(), c.criteria.tf.clone(), -c.criteria.makespan.clone()])
        .collect();
    let pareto = pareto_front(&points)
        .into_iter()
        .map(|i| feasible[i].clone())
        .collect();

    Ok(OptimizationResult {
        globally_optimal: complete && best.is_some(),
        best,
        pareto,
        infeasible,
        normalizers,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestDirective {
    pub id: NodeId,
    pub label: String,
    /// Relevance to the parent the capability reaches the directive through.
    pub relevance: f64,
    pub parent: NodeId,
    pub category: Option<ImpactCategory>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapabilityEntry {
    pub id: NodeId,
    pub label: String,
    /// 1-based suggested development position.
    pub position: usize,
    pub cohesion: f64,
    pub directives: Vec<ManifestDirective>,
    /// `Cp(self, other)`.
    pub coupling_to: BTreeMap<NodeId, f64>,
    /// `Cp(other, self)`.
    pub coupling_from: BTreeMap<NodeId, f64>,
}

/// Per-capability directive lists: the input to requirement mapping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapabilityManifest {
    pub slice: Vec<NodeId>,
    pub order_heuristic: bool,
    pub directive_count: usize,
    pub capabilities: Vec<CapabilityEntry>,
}

impl CapabilityManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// Structural check against the graph: known capabilities, every
    /// directive listed exactly once, positions a permutation.
    pub fn check(&self, graph: &FdGraph) -> Result<()> {
        let mut seen = BTreeSet::new();
        for cap in &self.capabilities {
            if graph.node(cap.id.as_str()).is_none() {
                return Err(Error::UnknownNode(cap.id.clone()));
            }
            for d in &cap.directives {
                if graph.kind(d.id.as_str())? != crate::graph::NodeKind::Directive {
                    return Err(Error::NotDirective(d.id.clone()));
                }
                if !seen.insert(d.id.clone()) {
                    return Err(Error::InvalidSlice(format!("directive `{}` listed twice", d.id)));
                }
            }
        }
        if let Some(missing) = graph.directives().find(|d| !seen.contains(*d)) {
            return Err(Error::Uncovered(missing.clone()));
        }
        let mut positions: Vec<usize> = self.capabilities.iter().map(|c| c.position).collect();
        positions.sort_unstable();
        if positions != (1..=self.capabilities.len()).collect::<Vec<_>>() {
            return Err(Error::InvalidSlice("positions are not a permutation".into()));
        }
        if self.directive_count != seen.len() {
            return Err(Error::InvalidSlice("directive count mismatch".into()));
        }
        Ok(())
    }
}

pub fn export_capabilities(graph: &FdGraph, slice: &Slice, times: &TimeModel) -> Result<CapabilityManifest> {
    let schedule = schedule_slice(graph, slice, times)?;
    let coupling = metrics::coupling_matrix(graph, slice.membership())?;
    let sets = slice.membership().resolved_sets();
    let member_ix: Vec<usize> = slice
        .members()
        .iter()
        .map(|m| graph.ix(m.as_str()))
        .collect::<Result<_>>()?;
    let resolution = metrics::resolve(graph, &member_ix)?;
    let mut capabilities = Vec::with_capacity(slice.len());
    for (position, id) in schedule.order.iter().enumerate() {
        let node = graph.node(id.as_str()).ok_or_else(|| Error::UnknownNode(id.clone()))?;
        let mut directives = Vec::new();
        for d in &sets[id] {
            let di = graph.ix(d.as_str())?;
            let parent = graph
                .directive_pos(di)
                .and_then(|pos| resolution.via[pos])
                .ok_or_else(|| Error::Uncovered(d.clone()))?;
            let relevance = graph.relevance_ix(di, parent).cloned().unwrap_or_else(Rational::zero);
            directives.push(ManifestDirective {
                id: d.clone(),
                label: graph.node(d.as_str()).map(|n| n.label.clone()).unwrap_or_default(),
                relevance: ratio::round4(&relevance),
                parent: graph.id_at(parent).clone(),
                category: ImpactCategory::matching(&relevance),
            });
        }
        let coupling_to = coupling
            .iter()
            .filter(|((p, _), _)| p == id)
            .map(|((_, q), v)| (q.clone(), ratio::round4(v)))
            .collect();
        let coupling_from = coupling
            .iter()
            .filter(|((_, q), _)| q == id)
            .map(|((p, _), v)| (p.clone(), ratio::round4(v)))
            .collect();
        capabilities.push(CapabilityEntry {
            id: id.clone(),
            label: node.label.clone(),
            position: position + 1,
            cohesion: ratio::round4(&metrics::cohesion(graph, id.as_str())?),
            directives,
            coupling_to,
            coupling_from,
        });
    }
    Ok(CapabilityManifest {
        slice: slice.members().iter().cloned().collect(),
        order_heuristic: schedule.heuristic,
        directive_count: sets.values().map(|s| s.len()).sum(),
        capabilities,
    })
}
