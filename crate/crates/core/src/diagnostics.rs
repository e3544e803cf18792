//! Log-level diagnostics: mean token transfers per arc, mean jumps per jump
//! edge, and a local conformance measure per transition, rendered onto the
//! net as a DOT graph.
//!
//! The local measure of a transition is the share of its consumed tokens that
//! reached the input place through the model, i.e. did not jump there for the
//! event being replayed. Jumps to sinks after the last event are accounted to
//! a separate termination measure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::net::{Cpn, Node};
use crate::replay::{DeviationKind, ReplayResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcStat {
    pub from: String,
    pub to: String,
    pub expression: String,
    pub total: u64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpEdgeStat {
    pub from: String,
    pub to: String,
    pub total: u64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMeasure {
    pub conforming: u64,
    pub total: u64,
    pub measure: f64,
}

impl LocalMeasure {
    fn new(conforming: u64, total: u64) -> Self {
        let measure = if total == 0 {
            1.0
        } else {
            conforming as f64 / total as f64
        };
        LocalMeasure {
            conforming,
            total,
            measure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMeasure {
    pub id: String,
    pub activity: String,
    #[serde(flatten)]
    pub local: LocalMeasure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub traces: usize,
    pub arcs: Vec<ArcStat>,
    pub jump_edges: Vec<JumpEdgeStat>,
    pub transitions: Vec<TransitionMeasure>,
    pub termination: LocalMeasure,
    /// Deviation totals keyed by kind code (CF, RV, RC, NT).
    pub deviations: BTreeMap<String, u64>,
    pub jumps: u64,
    pub transfers: u64,
    pub fitness: f64,
}

impl DiagnosticsSummary {
    pub fn measure(&self, activity: &str) -> Option<f64> {
        self.transitions
            .iter()
            .find(|t| t.activity == activity)
            .map(|t| t.local.measure)
    }

    pub fn jump_edge(&self, from: &str, to: &str) -> Option<&JumpEdgeStat> {
        self.jump_edges
            .iter()
            .find(|e| e.from == from && e.to == to)
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// Integer sums over replay results; merging is associative and commutative.
#[derive(Debug, Clone, Default)]
struct Totals {
    traces: usize,
    arcs: Vec<u64>,
    jump_edges: BTreeMap<(usize, usize), u64>,
    via_model: Vec<u64>,
    via_jump: Vec<u64>,
    objects: u64,
    terminated: u64,
    kinds: BTreeMap<DeviationKind, u64>,
    jumps: u64,
    transfers: u64,
}

impl Totals {
    fn new(cpn: &Cpn) -> Self {
        Totals {
            arcs: vec![0; cpn.arcs.len()],
            via_model: vec![0; cpn.transitions.len()],
            via_jump: vec![0; cpn.transitions.len()],
            ..Totals::default()
        }
    }

    fn add(mut self, r: &ReplayResult) -> Self {
        self.traces += 1;
        for (a, n) in self.arcs.iter_mut().zip(&r.arc_transfers) {
            *a += n;
        }
        for (edge, n) in &r.jump_edges {
            *self.jump_edges.entry(*edge).or_default() += n;
        }
        for (i, s) in r.transitions.iter().enumerate() {
            self.via_model[i] += s.via_model;
            self.via_jump[i] += s.via_jump;
        }
        self.objects += r.objects;
        self.terminated += r.terminated_properly;
        for d in &r.deviations {
            *self.kinds.entry(d.kind()).or_default() += 1;
        }
        self.jumps += r.counters.jumps;
        self.transfers += r.counters.transfers;
        self
    }

    #[cfg_attr(not(feature = "parallel"), allow(dead_code))]
    fn merge(mut self, o: Totals) -> Self {
        self.traces += o.traces;
        let zip_add = |a: &mut Vec<u64>, b: &[u64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        zip_add(&mut self.arcs, &o.arcs);
        zip_add(&mut self.via_model, &o.via_model);
        zip_add(&mut self.via_jump, &o.via_jump);
        for (k, v) in o.jump_edges {
            *self.jump_edges.entry(k).or_default() += v;
        }
        for (k, v) in o.kinds {
            *self.kinds.entry(k).or_default() += v;
        }
        self.objects += o.objects;
        self.terminated += o.terminated;
        self.jumps += o.jumps;
        self.transfers += o.transfers;
        self
    }
}

/// Aggregates replay results of one log. All results must come from `cpn`.
pub fn aggregate(results: &[ReplayResult], cpn: &Cpn) -> DiagnosticsSummary {
    #[cfg(feature = "parallel")]
    let totals = {
        use rayon::prelude::*;
        results
            .par_iter()
            .fold(|| Totals::new(cpn), Totals::add)
            .reduce(|| Totals::new(cpn), Totals::merge)
    };
    #[cfg(not(feature = "parallel"))]
    let totals = results.iter().fold(Totals::new(cpn), Totals::add);

    let n = totals.traces;
    let mean = |total: u64| if n == 0 { 0.0 } else { total as f64 / n as f64 };
    let arcs = cpn
        .arcs
        .iter()
        .zip(&totals.arcs)
        .map(|(arc, &total)| ArcStat {
            from: cpn.node_name(arc.from).to_owned(),
            to: cpn.node_name(arc.to).to_owned(),
            expression: arc.expression.to_string(),
            total,
            mean: mean(total),
        })
        .collect();
    let jump_edges = totals
        .jump_edges
        .iter()
        .map(|(&(from, to), &total)| JumpEdgeStat {
            from: cpn.places[from].id.clone(),
            to: cpn.places[to].id.clone(),
            total,
            mean: mean(total),
        })
        .collect();
    let transitions = cpn
        .transitions
        .iter()
        .enumerate()
        .map(|(i, t)| TransitionMeasure {
            id: t.id.clone(),
            activity: t.activity.clone(),
            local: LocalMeasure::new(
                totals.via_model[i],
                totals.via_model[i] + totals.via_jump[i],
            ),
        })
        .collect();
    let deviations = DeviationKind::ALL
        .iter()
        .map(|k| {
            (
                k.code().to_owned(),
                totals.kinds.get(k).copied().unwrap_or(0),
            )
        })
        .collect();
    let fitness = if totals.transfers == 0 {
        1.0
    } else {
        (1.0 - totals.jumps as f64 / totals.transfers as f64).clamp(0.0, 1.0)
    };
    DiagnosticsSummary {
        traces: n,
        arcs,
        jump_edges,
        transitions,
        termination: LocalMeasure::new(totals.terminated, totals.objects),
        deviations,
        jumps: totals.jumps,
        transfers: totals.transfers,
        fitness,
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// DOT rendering of `cpn` annotated with `summary`: places as circles,
/// transitions as boxes labelled with their local measure, solid arcs with
/// the rounded mean of transferred tokens, dotted edges for jumps with the
/// rounded mean of jumped tokens.
pub fn render_dot(cpn: &Cpn, summary: &DiagnosticsSummary) -> String {
    let mut out = String::new();
    out.push_str("digraph cpn {\n  rankdir=LR;\n");
    for p in &cpn.places {
        let label = format!("{}\\n{}", p.id, cpn.colors[p.color].name);
        let _ = writeln!(
            out,
            "  {} [shape=circle, label={}];",
            quote(&p.id),
            quote(&label)
        );
    }
    for (t, tr) in cpn.transitions.iter().enumerate() {
        let m = summary
            .transitions
            .get(t)
            .map(|m| m.local.measure)
            .unwrap_or(1.0);
        let label = format!("{}\\n{}\\nm = {:.2}", tr.id, tr.activity, m);
        let _ = writeln!(
            out,
            "  {} [shape=box, label={}];",
            quote(&tr.id),
            quote(&label)
        );
    }
    for (i, arc) in cpn.arcs.iter().enumerate() {
        let mean = summary.arcs.get(i).map(|a| a.mean).unwrap_or(0.0);
        let label = format!("{} | {}", arc.expression, mean.round() as u64);
        let (from, to) = (node_id(cpn, arc.from), node_id(cpn, arc.to));
        let _ = writeln!(
            out,
            "  {} -> {} [label={}];",
            quote(from),
            quote(to),
            quote(&label)
        );
    }
    for e in &summary.jump_edges {
        let _ = writeln!(
            out,
            "  {} -> {} [style=dotted, constraint=false, label={}];",
            quote(&e.from),
            quote(&e.to),
            quote(&(e.mean.round() as u64).to_string())
        );
    }
    out.push_str("}\n");
    out
}

fn node_id(cpn: &Cpn, n: Node) -> &str {
    cpn.node_name(n)
}

pub fn export_enhanced_model(
    cpn: &Cpn,
    summary: &DiagnosticsSummary,
    path: impl AsRef<Path>,
) -> std::io::Result<()> {
    std::fs::write(path, render_dot(cpn, summary))
}
