//! The `capslice` command line.
//!
//! Exit codes: 0 success, 1 domain violation (invalid graph, infeasible
//! request), 2 usage or parse error. Machine output is JSON with keys in
//! sorted order and numbers rounded to four decimals.

use std::fs;
use std::io::{self, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::{json, Value};

use crate::change::{self, Comparison};
use crate::error::Error;
use crate::graph::{FdGraph, NodeId, NodeKind};
use crate::metrics;
use crate::optimizer::{self, Candidate, OptimizationConfig, OptimizationResult};
use crate::ratio::{self, Rational};
use crate::slicing::{self, EnumerationLimits, Ranking, Slice};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Machine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Dot,
    Manifest,
}

fn parse_rational(text: &str) -> Result<Rational, String> {
    ratio::parse_decimal(text).ok_or_else(|| format!("`{text}` is not a decimal number"))
}

fn parse_seconds(text: &str) -> Result<Duration, String> {
    let secs: f64 = text.parse().map_err(|_| format!("`{text}` is not a number of seconds"))?;
    Duration::try_from_secs_f64(secs).map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "capslice", version, about = "Capability slicing for function decomposition graphs")]
pub struct Cli {
    /// Output format; defaults to text on a terminal, machine otherwise.
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,

    /// Worker threads for parallel scoring.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Reserved. Every algorithm is deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Coupling weight in the slice objective (default 1).
    #[arg(long, global = true, value_parser = parse_rational)]
    pub lambda: Option<Rational>,

    /// Change-propagation threshold in (0, 1] (default 0.125).
    #[arg(long, global = true, value_parser = parse_rational)]
    pub threshold: Option<Rational>,

    /// Stop enumeration after this many slices.
    #[arg(long, global = true)]
    pub max_slices: Option<usize>,

    /// Stop enumeration after this many seconds.
    #[arg(long, global = true, value_parser = parse_seconds)]
    pub time_budget: Option<Duration>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a graph file against the structural rules.
    Validate { graph: PathBuf },
    /// Size and cohesion per function node, optionally pairwise coupling.
    Metrics {
        graph: PathBuf,
        /// Nodes whose pairwise coupling to print.
        #[arg(long, value_delimiter = ',')]
        pairs: Vec<String>,
        /// Membership context for `--pairs` (defaults to the pair nodes).
        #[arg(long, value_delimiter = ',')]
        slice: Vec<String>,
    },
    /// Enumerate and rank valid slices.
    Slices {
        graph: PathBuf,
        /// Only slices scoring above the mean.
        #[arg(long)]
        initial_only: bool,
    },
    /// Pick the best initial slice under feasibility and schedule limits.
    Optimize {
        graph: PathBuf,
        #[arg(long, env = "CAPSLICE_CONFIG")]
        config: Option<PathBuf>,
    },
    /// Compare slices under a list of change scenarios.
    Simulate {
        graph: PathBuf,
        scenarios: PathBuf,
        /// Comma-separated members; repeat for each slice.
        #[arg(long = "slice", required = true)]
        slices: Vec<String>,
    },
    /// Render Graphviz DOT or a capability manifest.
    Export {
        graph: PathBuf,
        #[arg(long, value_enum, default_value = "dot")]
        to: ExportFormat,
        /// Slice to annotate (DOT) or describe (manifest).
        #[arg(long, value_delimiter = ',')]
        slice: Vec<String>,
    },
}

#[derive(Debug)]
pub enum Failure {
    /// Exit 2.
    Usage(String),
    /// Exit 1.
    Domain(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Domain(_) => 1,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Syntax { .. }
            | Error::EmptyNodeId
            | Error::DuplicateNode(_)
            | Error::DuplicateEdge { .. }
            | Error::UnknownNode(_)
            | Error::RelevanceOutOfRange { .. }
            | Error::RelevanceOnNonDirective { .. }
            | Error::InvalidRelevance(_)
            | Error::NotDirective(_)
            | Error::NotFunction(_)
            | Error::SameNode(_)
            | Error::Config(_)
            | Error::Scenario(_)
            | Error::ThresholdOutOfRange(_) => Failure::Usage(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

type CmdResult = Result<Output, Failure>;

/// What a command produced: the text to print and its exit code.
pub struct Output {
    pub text: String,
    pub code: u8,
}

impl Output {
    fn ok(text: String) -> Self {
        Output { text, code: 0 }
    }
}

fn num(v: &Rational) -> Value {
    json!(ratio::round4(v))
}

fn ids<'a>(it: impl IntoIterator<Item = &'a NodeId>) -> Value {
    Value::Array(it.into_iter().map(|id| json!(id.as_str())).collect())
}

fn machine(value: &Value) -> String {
    let mut s = serde_json::to_string(value).expect("JSON values serialize");
    s.push('\n');
    s
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<FdGraph, Failure> {
    Ok(FdGraph::parse(&read(path)?)?)
}

fn load_valid_graph(path: &Path) -> Result<FdGraph, Failure> {
    let graph = load_graph(path)?;
    let report = graph.validate();
    if !report.ok {
        let lines: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
        return Err(Failure::Domain(format!("graph is invalid:\n{}", lines.join("\n"))));
    }
    Ok(graph)
}

fn split_members(spec: &str) -> Vec<&str> {
    spec.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

const TRUNCATED: &str = "TRUNCATED: enumeration stopped at a limit; results are partial\n";

pub struct Runner {
    pub format: Format,
    pub lambda: Rational,
    pub threshold: Rational,
    pub limits: EnumerationLimits,
}

impl Runner {
    pub fn from_cli(cli: &Cli) -> Self {
        Runner {
            format: cli.format.unwrap_or(if io::stdout().is_terminal() {
                Format::Text
            } else {
                Format::Machine
            }),
            lambda: cli.lambda.clone().unwrap_or_else(|| ratio::int(1)),
            threshold: cli.threshold.clone().unwrap_or_else(change::default_threshold),
            limits: EnumerationLimits {
                max_slices: cli.max_slices,
                time_budget: cli.time_budget,
                ..EnumerationLimits::default()
            },
        }
    }

    pub fn run(&self, command: &Command, lambda_flag: Option<&Rational>) -> CmdResult {
        match command {
            Command::Validate { graph } => self.validate(graph),
            Command::Metrics { graph, pairs, slice } => self.metrics(graph, pairs, slice),
            Command::Slices { graph, initial_only } => self.slices(graph, *initial_only),
            Command::Optimize { graph, config } => self.optimize(graph, config.as_deref(), lambda_flag),
            Command::Simulate {
                graph,
                scenarios,
                slices,
            } => self.simulate(graph, scenarios, slices),
            Command::Export { graph, to, slice } => self.export(graph, *to, slice),
        }
    }

    fn validate(&self, path: &Path) -> CmdResult {
        let graph = load_graph(path)?;
        let report = graph.validate();
        let text = match self.format {
            Format::Machine => machine(&serde_json::to_value(&report).expect("report serializes")),
            Format::Text if report.ok => format!(
                "ok: {} nodes, {} directives\n",
                graph.node_count(),
                graph.directive_count()
            ),
            Format::Text => report.violations.iter().map(|v| format!("{v}\n")).collect(),
        };
        Ok(Output {
            text,
            code: if report.ok { 0 } else { 1 },
        })
    }

    fn metrics(&self, path: &Path, pairs: &[String], slice: &[String]) -> CmdResult {
        let graph = load_valid_graph(path)?;
        let rows = metrics::node_metrics(&graph)?;

        let mut matrix = Vec::new();
        if !pairs.is_empty() {
            for p in pairs {
                match graph.kind(p) {
                    Ok(NodeKind::Function) => {}
                    Ok(kind) => {
                        return Err(Failure::Usage(format!("`{p}` is a {kind}, not a function node")));
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            let context: Vec<NodeId> = if slice.is_empty() { pairs } else { slice }
                .iter()
                .map(|s| NodeId::from(s.as_str()))
                .collect();
            if let Some(p) = pairs.iter().find(|p| !context.iter().any(|c| c.as_str() == p.as_str())) {
                return Err(Failure::Usage(format!("`{p}` is not in the --slice context")));
            }
            let membership = metrics::resolve_partial(&graph, &context)?;
            for p in pairs {
                for q in pairs {
                    if p != q {
                        let cp = metrics::capability_coupling(&graph, p, q, &membership)?;
                        matrix.push((p.clone(), q.clone(), cp));
                    }
                }
            }
        }

        Ok(Output::ok(match self.format {
            Format::Machine => {
                let nodes: Vec<Value> = rows
                    .iter()
                    .map(|r| {
                        json!({
                            "id": r.id.as_str(),
                            "size": r.size,
                            "cohesion": num(&r.cohesion),
                            "refinement": r.refinement,
                        })
                    })
                    .collect();
                let mut doc = json!({ "nodes": nodes });
                if !pairs.is_empty() {
                    doc["coupling"] = matrix
                        .iter()
                        .map(|(p, q, cp)| json!({ "from": p, "to": q, "coupling": num(cp) }))
                        .collect();
                }
                machine(&doc)
            }
            Format::Text => {
                let body: Vec<Vec<String>> = rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.id.to_string(),
                            r.size.to_string(),
                            ratio::fmt4(&r.cohesion),
                            if r.refinement { "refinement".into() } else { String::new() },
                        ]
                    })
                    .collect();
                let mut out = table(&["node", "size", "cohesion", ""], &body);
                if !matrix.is_empty() {
                    out.push('\n');
                    let body: Vec<Vec<String>> = matrix
                        .iter()
                        .map(|(p, q, cp)| vec![format!("Cp({p},{q})"), ratio::fmt4(cp)])
                        .collect();
                    out.push_str(&table(&["pair", "coupling"], &body));
                }
                out
            }
        }))
    }

    fn ranking(&self, graph: &FdGraph, lambda: &Rational) -> Result<(Ranking, bool), Failure> {
        info!("enumerating slices");
        let (ranking, complete) = slicing::rank_all(graph, &self.limits, lambda)?;
        info!("ranked {} slices (complete: {complete})", ranking.entries.len());
        Ok((ranking, complete))
    }

    fn slices(&self, path: &Path, initial_only: bool) -> CmdResult {
        let graph = load_valid_graph(path)?;
        let (ranking, complete) = self.ranking(&graph, &self.lambda)?;
        let entries: Vec<(usize, &slicing::RankedSlice)> = ranking
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| !initial_only || e.initial)
            .collect();
        let initial_count = ranking.initial_sets().count();

        Ok(Output::ok(match self.format {
            Format::Machine => {
                let mut out = String::new();
                for (rank, e) in &entries {
                    let owners: serde_json::Map<String, Value> = e
                        .slice
                        .membership()
                        .iter()
                        .map(|(d, o)| (d.to_string(), json!(o.as_str())))
                        .collect();
                    out.push_str(&machine(&json!({
                        "record": "slice",
                        "rank": rank + 1,
                        "members": ids(e.slice.members()),
                        "aggregate": num(&e.metrics.aggregate),
                        "mean_cohesion": num(&e.metrics.mean_cohesion),
                        "mean_coupling": num(&e.metrics.mean_coupling),
                        "initial": e.initial,
                        "owners": owners,
                    })));
                }
                out.push_str(&machine(&json!({
                    "record": "summary",
                    "slices": ranking.entries.len(),
                    "reported": entries.len(),
                    "initial": initial_count,
                    "mean_aggregate": num(&ranking.mean_aggregate),
                    "lambda": num(&self.lambda),
                    "complete": complete,
                })));
                out
            }
            Format::Text => {
                let mut out = String::new();
                if !complete {
                    out.push_str(TRUNCATED);
                }
                let body: Vec<Vec<String>> = entries
                    .iter()
                    .map(|(rank, e)| {
                        vec![
                            (rank + 1).to_string(),
                            ratio::fmt4(&e.metrics.aggregate),
                            ratio::fmt4(&e.metrics.mean_cohesion),
                            ratio::fmt4(&e.metrics.mean_coupling),
                            if e.initial { "*".into() } else { String::new() },
                            format!("{{{}}}", e.slice.key()),
                        ]
                    })
                    .collect();
                out.push_str(&table(&["rank", "f", "mean Ch", "mean Cp", "init", "slice"], &body));
                out.push_str(&format!(
                    "{} slices, {} initial, mean f {}\n",
                    ranking.entries.len(),
                    initial_count,
                    ratio::fmt4(&ranking.mean_aggregate)
                ));
                out
            }
        }))
    }

    fn optimize(&self, path: &Path, config: Option<&Path>, lambda_flag: Option<&Rational>) -> CmdResult {
        let graph = load_valid_graph(path)?;
        let mut cfg = match config {
            Some(p) => OptimizationConfig::parse(&read(p)?)?,
            None => OptimizationConfig::default(),
        };
        if let Some(l) = lambda_flag {
            cfg.lambda = l.clone();
        }
        let (ranking, complete) = self.ranking(&graph, &cfg.lambda)?;
        let pool: Vec<Slice> = ranking.initial_sets().map(|e| e.slice.clone()).collect();
        info!("optimizing over {} initial sets", pool.len());
        let result = optimizer::optimize(&graph, &pool, &cfg, complete)?;
        let code = if result.best.is_some() { 0 } else { 1 };
        let text = match self.format {
            Format::Machine => machine(&optimization_json(&result, complete)),
            Format::Text => optimization_text(&result, complete),
        };
        Ok(Output { text, code })
    }

    fn simulate(&self, path: &Path, scenario_path: &Path, specs: &[String]) -> CmdResult {
        let graph = load_valid_graph(path)?;
        let scenarios = change::parse_scenarios(&read(scenario_path)?)?;
        let slices: Vec<Slice> = specs
            .iter()
            .map(|s| Slice::new(&graph, split_members(s)))
            .collect::<Result<_, _>>()?;
        let comparison = change::compare_slices(&graph, &slices, &scenarios, &self.threshold)?;
        Ok(Output::ok(match self.format {
            Format::Machine => machine(&comparison_json(&comparison, &self.threshold)),
            Format::Text => comparison_text(&comparison),
        }))
    }

    fn export(&self, path: &Path, to: ExportFormat, members: &[String]) -> CmdResult {
        let graph = load_valid_graph(path)?;
        let slice = if members.is_empty() {
            None
        } else {
            Some(Slice::new(&graph, members.iter().map(String::as_str))?)
        };
        match to {
            ExportFormat::Dot => {
                let annotations = match &slice {
                    Some(s) => Some(slicing::slice_objective(&graph, s, &self.lambda)?.dot_annotations()),
                    None => None,
                };
                Ok(Output::ok(graph.export_dot(annotations.as_ref())))
            }
            ExportFormat::Manifest => {
                let slice = match slice {
                    Some(s) => s,
                    None => self.ranking(&graph, &self.lambda)?.0.top().slice.clone(),
                };
                let manifest = optimizer::export_capabilities(&graph, &slice, &optimizer::TimeModel::default())?;
                let text = match self.format {
                    Format::Machine => machine(&serde_json::to_value(&manifest).expect("manifest serializes")),
                    Format::Text => serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
                };
                Ok(Output::ok(text))
            }
        }
    }
}

fn candidate_json(c: &Candidate) -> Value {
    json!({
        "members": ids(c.slice.members()),
        "f": num(&c.criteria.f),
        "tf": num(&c.criteria.tf),
        "makespan": num(&c.criteria.makespan),
        "order_cost": num(&c.criteria.order_cost),
        "order": ids(&c.schedule.order),
        "order_heuristic": c.schedule.heuristic,
        "z": num(&c.z),
        "violations": c.violations.iter().map(ToString::to_string).collect::<Vec<_>>(),
    })
}

pub fn optimization_json(result: &OptimizationResult, complete: bool) -> Value {
    json!({
        "best": result.best.as_ref().map(candidate_json),
        "pareto": result.pareto.iter().map(candidate_json).collect::<Vec<_>>(),
        "infeasible": result.infeasible.iter().map(candidate_json).collect::<Vec<_>>(),
        "globally_optimal": result.globally_optimal,
        "complete": complete,
    })
}

fn optimization_text(result: &OptimizationResult, complete: bool) -> String {
    let mut out = String::new();
    if !complete {
        out.push_str(TRUNCATED);
    }
    let row = |c: &Candidate| {
        vec![
            format!("{{{}}}", c.slice.key()),
            ratio::fmt4(&c.z),
            ratio::fmt4(&c.criteria.f),
            ratio::fmt4(&c.criteria.tf),
            ratio::fmt4(&c.criteria.makespan),
            ratio::fmt4(&c.criteria.order_cost),
            c.violations.iter().map(ToString::to_string).collect::<Vec<_>>().join(","),
        ]
    };
    let header = ["slice", "z", "f", "tf", "makespan", "order cost", "violated"];
    match &result.best {
        Some(best) => {
            let order: Vec<&str> = best.schedule.order.iter().map(NodeId::as_str).collect();
            out.push_str(&format!("best: {{{}}}  z={}\n", best.slice.key(), ratio::fmt4(&best.z)));
            out.push_str(&format!(
                "order: {}{}\n",
                order.join(" -> "),
                if best.schedule.heuristic { " (heuristic)" } else { "" }
            ));
        }
        None => out.push_str("no feasible slice\n"),
    }
    if !result.globally_optimal && result.best.is_some() {
        out.push_str("best among enumerated slices only\n");
    }
    out.push_str("\npareto front\n");
    out.push_str(&table(&header, &result.pareto.iter().map(row).collect::<Vec<_>>()));
    if !result.infeasible.is_empty() {
        out.push_str("\ninfeasible\n");
        out.push_str(&table(&header, &result.infeasible.iter().map(row).collect::<Vec<_>>()));
    }
    out
}

pub fn comparison_json(c: &Comparison, threshold: &Rational) -> Value {
    let mut cells = Vec::new();
    for (i, row) in c.reports.iter().enumerate() {
        for (j, r) in row.iter().enumerate() {
            cells.push(json!({
                "slice": i,
                "scenario": j,
                "impact_count": r.impact_count,
                "affected_directives": ids(&r.affected_directives),
                "affected_capabilities": ids(&r.affected_capabilities),
            }));
        }
    }
    json!({
        "threshold": num(threshold),
        "slices": c.slices.iter().map(|s| ids(s)).collect::<Vec<_>>(),
        "scenarios": serde_json::to_value(&c.scenarios).expect("scenarios serialize"),
        "cells": cells,
        "totals": c.totals,
        "winners": c.winners,
    })
}

fn comparison_text(c: &Comparison) -> String {
    let mut header: Vec<String> = vec!["slice".into()];
    header.extend(c.scenarios.iter().map(ToString::to_string));
    header.push("total".into());
    let body: Vec<Vec<String>> = c
        .slices
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut row = vec![format!(
                "{{{}}}",
                s.iter().map(NodeId::as_str).collect::<Vec<_>>().join(",")
            )];
            row.extend((0..c.scenarios.len()).map(|j| c.count(i, j).to_string()));
            row.push(c.totals[i].to_string());
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = table(&header, &body);
    for (j, w) in c.winners.iter().enumerate() {
        let names: Vec<String> = w.iter().map(|i| format!("#{}", i + 1)).collect();
        out.push_str(&format!("{}: least impact {}\n", c.scenarios[j], names.join(" ")));
    }
    out
}

/// Parses arguments, runs the command and prints its output.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let runner = Runner::from_cli(&cli);
    match runner.run(&cli.command, cli.lambda.as_ref()) {
        Ok(out) => {
            let mut stdout = io::stdout().lock();
            let _ = stdout.write_all(out.text.as_bytes());
            ExitCode::from(out.code)
        }
        Err(failure) => {
            let (Failure::Usage(msg) | Failure::Domain(msg)) = &failure;
            eprintln!("error: {msg}");
            ExitCode::from(failure.code())
        }
    }
}
