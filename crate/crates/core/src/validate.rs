//! Structural validation of colored Petri nets.
//!
//! [`validate_syntax`] checks net well-formedness: arcs join a place and a
//! transition, arc expressions match the adjacent place's color, and activity
//! labels are unique. [`validate_conservative_workflow`] checks the four
//! conservative-workflow conditions:
//!
//! 1. every input arc of a transition is paired with exactly one output arc
//!    carrying the same identifier variable, and vice versa;
//! 2. initial-marking identifiers are pairwise distinct;
//! 3. each color has exactly one source and one sink place, joined by a
//!    monochrome path;
//! 4. input places of a transition have pairwise distinct colors, and so do
//!    its output places.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::expr::{Arith, Term};
use crate::net::{ColorId, Cpn, DomainId, Node, PlaceRole, TransitionId};
use crate::value::DomainKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    DuplicateName,
    DuplicateActivity,
    ArcEndpoints,
    ExpressionColor,
    VariableType,
    IdentifierDomain,
    PriorityRule,
    InitialMarking,
    /// A conservative-workflow condition (1 to 4) does not hold.
    Condition(u8),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ViolationKind::Condition(n) => write!(f, "condition {n} violated: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

/// Violations found by a validator; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, message: impl Into<String>) {
        self.violations.push(Violation {
            kind,
            message: message.into(),
        });
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

fn duplicates<'a>(names: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = HashSet::new();
    let mut dup = Vec::new();
    for n in names {
        if !seen.insert(n) && !dup.contains(&n) {
            dup.push(n);
        }
    }
    dup
}

/// Infers a domain for every plain variable on the arcs adjacent to `t`.
/// Conflicting positions are reported and the first domain kept.
fn variable_types(
    cpn: &Cpn,
    t: TransitionId,
    report: &mut ValidationReport,
) -> HashMap<String, DomainId> {
    let mut types: HashMap<String, DomainId> = HashMap::new();
    for &a in cpn.input_arcs(t).iter().chain(cpn.output_arcs(t)) {
        let color = cpn.place_color(cpn.arc_place(a));
        let expr = &cpn.arcs[a].expression;
        if expr.arity() != color.arity() {
            continue;
        }
        for (term, &dom) in expr.terms.iter().zip(&color.domains) {
            if let Some(v) = term.as_var() {
                match types.get(v) {
                    Some(&prev) if prev != dom => report.push(
                        ViolationKind::VariableType,
                        format!(
                            "transition {}: variable `{v}` used with domains {} and {}",
                            cpn.transitions[t].id, cpn.domains[prev].name, cpn.domains[dom].name
                        ),
                    ),
                    Some(_) => {}
                    None => {
                        types.insert(v.to_owned(), dom);
                    }
                }
            }
        }
    }
    types
}

fn arith_vars(a: &Arith, out: &mut Vec<String>) {
    match a {
        Arith::Var(v) => out.push(v.clone()),
        Arith::Lit(_) => {}
        Arith::Bin(_, l, r) => {
            arith_vars(l, out);
            arith_vars(r, out);
        }
    }
}

/// Checks net well-formedness.
pub fn validate_syntax(cpn: &Cpn) -> ValidationReport {
    let mut report = ValidationReport::default();

    for d in duplicates(cpn.domains.iter().map(|d| d.name.as_str())) {
        report.push(
            ViolationKind::DuplicateName,
            format!("duplicate domain name {d}"),
        );
    }
    for c in duplicates(cpn.colors.iter().map(|c| c.name.as_str())) {
        report.push(
            ViolationKind::DuplicateName,
            format!("duplicate color name {c}"),
        );
    }
    for n in duplicates(
        cpn.places
            .iter()
            .map(|p| p.id.as_str())
            .chain(cpn.transitions.iter().map(|t| t.id.as_str())),
    ) {
        report.push(
            ViolationKind::DuplicateName,
            format!("duplicate node id {n}"),
        );
    }
    for a in duplicates(cpn.transitions.iter().map(|t| t.activity.as_str())) {
        report.push(
            ViolationKind::DuplicateActivity,
            format!("duplicate activity label `{a}`"),
        );
    }

    for color in &cpn.colors {
        if color.domains.is_empty() {
            report.push(
                ViolationKind::IdentifierDomain,
                format!("color {} has no components", color.name),
            );
        } else if cpn.domains[color.domains[0]].kind != DomainKind::Identifier {
            report.push(
                ViolationKind::IdentifierDomain,
                format!(
                    "color {}: first component is not an identifier domain",
                    color.name
                ),
            );
        }
        for a in duplicates(color.attributes.iter().map(String::as_str)) {
            report.push(
                ViolationKind::DuplicateName,
                format!("color {}: duplicate attribute name {a}", color.name),
            );
        }
    }

    for arc in &cpn.arcs {
        if arc.endpoints().is_none() {
            report.push(
                ViolationKind::ArcEndpoints,
                format!(
                    "arc {} -> {} must join a place and a transition",
                    cpn.node_name(arc.from),
                    cpn.node_name(arc.to)
                ),
            );
        }
    }

    for t in 0..cpn.transitions.len() {
        let types = variable_types(cpn, t, &mut report);
        for &a in cpn.input_arcs(t).iter().chain(cpn.output_arcs(t)) {
            check_arc_color(cpn, a, &types, &mut report);
        }
        let inputs: Vec<_> = cpn
            .input_arcs(t)
            .iter()
            .map(|&a| cpn.arc_place(a))
            .collect();
        for (&p, rule) in &cpn.transitions[t].priority.local {
            let tid = &cpn.transitions[t].id;
            if !inputs.contains(&p) {
                report.push(
                    ViolationKind::PriorityRule,
                    format!(
                        "transition {tid}: priority rule on {} which is not an input place",
                        cpn.places[p].id
                    ),
                );
            }
            if let Err(e) = rule.resolve(cpn.place_color(p)) {
                report.push(
                    ViolationKind::PriorityRule,
                    format!("transition {tid}: {e}"),
                );
            }
        }
    }

    report
}

fn check_arc_color(
    cpn: &Cpn,
    a: usize,
    types: &HashMap<String, DomainId>,
    report: &mut ValidationReport,
) {
    let arc = &cpn.arcs[a];
    let place = cpn.arc_place(a);
    let color = cpn.place_color(place);
    let label = format!(
        "arc {} -> {} {}",
        cpn.node_name(arc.from),
        cpn.node_name(arc.to),
        arc.expression
    );
    if arc.expression.arity() != color.arity() {
        report.push(
            ViolationKind::ExpressionColor,
            format!(
                "{label}: expression color mismatch ({} terms, color {} has {} components)",
                arc.expression.arity(),
                color.name,
                color.arity()
            ),
        );
        return;
    }
    if arc.expression.first_var().is_none() {
        report.push(
            ViolationKind::ExpressionColor,
            format!("{label}: first term must be a variable carrying the identifier"),
        );
    }
    for (i, (term, &dom)) in arc.expression.terms.iter().zip(&color.domains).enumerate() {
        let kind = cpn.domains[dom].kind;
        match term {
            Term::Var(v) => {
                if types.get(v).is_some_and(|&d| d != dom) {
                    report.push(
                        ViolationKind::ExpressionColor,
                        format!("{label}: expression color mismatch at component {}", i + 1),
                    );
                }
            }
            Term::Const(lit) => {
                let value = match lit {
                    crate::expr::Literal::Int(n) => crate::value::Value::Nat(*n),
                    crate::expr::Literal::Real(r) => crate::value::Value::Real(*r),
                };
                if kind.admit(&value).is_none() {
                    report.push(
                        ViolationKind::ExpressionColor,
                        format!(
                            "{label}: constant {lit} is not in domain {}",
                            cpn.domains[dom].name
                        ),
                    );
                }
            }
            Term::Func(f) => {
                if !kind.is_numeric() {
                    report.push(
                        ViolationKind::ExpressionColor,
                        format!(
                            "{label}: arithmetic term into non-numeric domain {}",
                            cpn.domains[dom].name
                        ),
                    );
                }
                let mut vars = Vec::new();
                arith_vars(f, &mut vars);
                for v in vars {
                    match types.get(&v) {
                        Some(&d) if cpn.domains[d].kind.is_numeric() => {}
                        Some(_) => report.push(
                            ViolationKind::VariableType,
                            format!("{label}: variable `{v}` in arithmetic term is not numeric"),
                        ),
                        None => report.push(
                            ViolationKind::VariableType,
                            format!("{label}: variable `{v}` in arithmetic term has no type"),
                        ),
                    }
                }
            }
        }
    }
}

/// Checks the conservative-workflow conditions. Assumes [`validate_syntax`] passed.
pub fn validate_conservative_workflow(cpn: &Cpn) -> ValidationReport {
    let mut report = ValidationReport::default();

    // 1: identifier-preserving bijection between input and output arcs
    for (t, tr) in cpn.transitions.iter().enumerate() {
        let first = |a: usize| cpn.arcs[a].expression.first_var();
        let ins: Vec<_> = cpn.input_arcs(t).to_vec();
        let outs: Vec<_> = cpn.output_arcs(t).to_vec();
        for &a in ins.iter().chain(&outs) {
            if first(a).is_none() {
                report.push(
                    ViolationKind::Condition(1),
                    format!(
                        "transition {}: arc {} -> {} does not start with an identifier variable",
                        tr.id,
                        cpn.node_name(cpn.arcs[a].from),
                        cpn.node_name(cpn.arcs[a].to)
                    ),
                );
            }
        }
        for (side, from, to) in [("input", &ins, &outs), ("output", &outs, &ins)] {
            for &a in from {
                let Some(v) = first(a) else { continue };
                let matches = to.iter().filter(|&&b| first(b) == Some(v)).count();
                if matches != 1 {
                    report.push(
                        ViolationKind::Condition(1),
                        format!(
                            "transition {}: {side} arc with identifier `{v}` ({}) has {matches} counterparts, expected exactly 1",
                            tr.id,
                            cpn.places[cpn.arc_place(a)].id
                        ),
                    );
                }
            }
        }
    }

    // 2: distinct identifiers in the initial marking
    let ids = cpn.initial_marking.identifiers();
    for w in ids.windows(2) {
        if w[0] == w[1] {
            report.push(
                ViolationKind::Condition(2),
                format!(
                    "identifier {} occurs more than once in the initial marking",
                    w[0]
                ),
            );
        }
    }

    // 3: one source and one sink per color, joined by a monochrome path
    for (c, color) in cpn.colors.iter().enumerate() {
        let of_role = |role: PlaceRole| -> Vec<usize> {
            (0..cpn.places.len())
                .filter(|&p| cpn.places[p].color == c && cpn.places[p].role == role)
                .collect()
        };
        let (sources, sinks) = (of_role(PlaceRole::Source), of_role(PlaceRole::Sink));
        if sources.len() != 1 {
            report.push(
                ViolationKind::Condition(3),
                format!(
                    "color {} has {} source places, expected 1",
                    color.name,
                    sources.len()
                ),
            );
        }
        if sinks.len() != 1 {
            report.push(
                ViolationKind::Condition(3),
                format!(
                    "color {} has {} sink places, expected 1",
                    color.name,
                    sinks.len()
                ),
            );
        }
        if let ([src], [snk]) = (sources.as_slice(), sinks.as_slice()) {
            if !monochrome_path(cpn, c, *src, *snk) {
                report.push(
                    ViolationKind::Condition(3),
                    format!(
                        "no path of {} places from source {} to sink {}",
                        color.name, cpn.places[*src].id, cpn.places[*snk].id
                    ),
                );
            }
        }
    }

    // 4: pairwise distinct colors among input places and among output places
    for (t, tr) in cpn.transitions.iter().enumerate() {
        for (side, arcs) in [("input", cpn.input_arcs(t)), ("output", cpn.output_arcs(t))] {
            let mut seen: HashMap<ColorId, usize> = HashMap::new();
            for &a in arcs {
                let p = cpn.arc_place(a);
                let c = cpn.places[p].color;
                match seen.get(&c) {
                    Some(&q) if q != p => report.push(
                        ViolationKind::Condition(4),
                        format!(
                            "transition {}: {side} places {} and {} share color {}",
                            tr.id, cpn.places[q].id, cpn.places[p].id, cpn.colors[c].name
                        ),
                    ),
                    Some(_) => {}
                    None => {
                        seen.insert(c, p);
                    }
                }
            }
        }
    }

    report
}

fn monochrome_path(cpn: &Cpn, color: ColorId, src: usize, snk: usize) -> bool {
    let mut seen = vec![false; cpn.places.len()];
    let mut queue = VecDeque::from([src]);
    seen[src] = true;
    while let Some(p) = queue.pop_front() {
        if p == snk {
            return true;
        }
        for arc in &cpn.arcs {
            let (Node::Place(from), Node::Transition(t)) = (arc.from, arc.to) else {
                continue;
            };
            if from != p {
                continue;
            }
            for &o in cpn.output_arcs(t) {
                let q = cpn.arc_place(o);
                if cpn.places[q].color == color && !seen[q] {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
    }
    false
}

/// Both validators; the conservative-workflow check runs only on
/// syntactically valid nets.
pub fn validate_all(cpn: &Cpn) -> ValidationReport {
    let mut report = validate_syntax(cpn);
    if report.is_valid() {
        report.extend(validate_conservative_workflow(cpn));
    }
    report
}
