//! Object-centric token replay.
//!
//! Each trace is replayed on an empty conservative-workflow net. Source places
//! are populated with the trace's objects (first-occurrence values), then every
//! event fires the transition carrying its activity label. Deviations are
//! registered along the way:
//!
//! * control flow: an event object's token is not in the transition's input
//!   place of its color; the token jumps there;
//! * rule violation: the token about to be consumed is strictly preceded by
//!   another token under the place's priority rule;
//! * resource corruption: after firing, a produced token differs from the
//!   event's post-state object; one record per differing attribute, and the
//!   token takes the observed values;
//! * non-proper termination: after the last event an object is not in its
//!   sink; the token jumps there.
//!
//! `j` counts jumps, `k` counts consumed/produced tokens (event objects plus
//! the final sink consumption), and fitness is `1 - j/k`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::eventlog::{check_trace, EventLog, EventRecord, LogViolation, Trace};
use crate::expr::{Binding, EvalError};
use crate::net::{
    ArcId, ColorId, Cpn, FireError, Marking, PlaceId, PlaceRole, Token, TransitionId,
};
use crate::priority::{Comparator, RuleError};
use crate::validate::{validate_all, ValidationReport};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DeviationKind {
    ControlFlow,
    RuleViolation,
    ResourceCorrupted,
    NonproperTermination,
}

impl DeviationKind {
    pub const ALL: [DeviationKind; 4] = [
        DeviationKind::ControlFlow,
        DeviationKind::RuleViolation,
        DeviationKind::ResourceCorrupted,
        DeviationKind::NonproperTermination,
    ];

    /// Short code used in deviation reports.
    pub fn code(self) -> &'static str {
        match self {
            DeviationKind::ControlFlow => "CF",
            DeviationKind::RuleViolation => "RV",
            DeviationKind::ResourceCorrupted => "RC",
            DeviationKind::NonproperTermination => "NT",
        }
    }
}

impl fmt::Display for DeviationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Kind-specific payload of a deviation.
#[derive(Debug, Clone, PartialEq)]
pub enum DeviationDetail {
    ControlFlow {
        from: String,
        to: String,
    },
    RuleViolation {
        place: String,
        preceding: String,
    },
    ResourceCorrupted {
        attribute: String,
        expected: Value,
        observed: Value,
    },
    NonproperTermination {
        resting: String,
        sink: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationRecord {
    pub trace_id: String,
    /// `None` for non-proper termination.
    pub event_seq: Option<u64>,
    pub timestamp: Option<String>,
    pub activity: Option<String>,
    pub object_id: String,
    pub description: String,
    pub detail: DeviationDetail,
}

impl DeviationRecord {
    pub fn kind(&self) -> DeviationKind {
        match self.detail {
            DeviationDetail::ControlFlow { .. } => DeviationKind::ControlFlow,
            DeviationDetail::RuleViolation { .. } => DeviationKind::RuleViolation,
            DeviationDetail::ResourceCorrupted { .. } => DeviationKind::ResourceCorrupted,
            DeviationDetail::NonproperTermination { .. } => DeviationKind::NonproperTermination,
        }
    }
}

/// Token jumps (`j`) and consumed/produced tokens (`k`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ReplayCounters {
    pub jumps: u64,
    pub transfers: u64,
}

/// `1 - j/k`, or 1 when nothing was transferred. Clamped to `[0, 1]`.
pub fn fitness(counters: ReplayCounters) -> f64 {
    ratio_fitness(counters.jumps, counters.transfers)
}

fn ratio_fitness(jumps: u64, transfers: u64) -> f64 {
    if transfers == 0 {
        return 1.0;
    }
    let f = 1.0 - jumps as f64 / transfers as f64;
    if !(0.0..=1.0).contains(&f) {
        log::warn!("fitness {f} outside [0, 1] (j = {jumps}, k = {transfers}); clamping");
    }
    f.clamp(0.0, 1.0)
}

/// Log-level fitness `1 - Σj / Σk`.
pub fn aggregate_fitness<'a>(results: impl IntoIterator<Item = &'a ReplayResult>) -> f64 {
    let (j, k) = results.into_iter().fold((0, 0), |(j, k), r| {
        (j + r.counters.jumps, k + r.counters.transfers)
    });
    ratio_fitness(j, k)
}

/// Per-transition consumption counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TransitionStats {
    /// Tokens consumed that arrived through the model.
    pub via_model: u64,
    /// Tokens consumed right after jumping into the input place.
    pub via_jump: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayResult {
    pub trace_id: String,
    pub deviations: Vec<DeviationRecord>,
    pub counters: ReplayCounters,
    pub fitness: f64,
    /// Jumps per (from place, to place).
    pub jump_edges: BTreeMap<(PlaceId, PlaceId), u64>,
    /// Tokens moved along each arc, indexed like `Cpn::arcs`.
    pub arc_transfers: Vec<u64>,
    /// Indexed like `Cpn::transitions`.
    pub transitions: Vec<TransitionStats>,
    /// Number of distinct objects in the trace.
    pub objects: u64,
    /// Objects found in their sink after the last event.
    pub terminated_properly: u64,
    pub events: u64,
    pub last_timestamp: Option<String>,
}

impl ReplayResult {
    pub fn count(&self, kind: DeviationKind) -> usize {
        self.deviations.iter().filter(|d| d.kind() == kind).count()
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("model is not a valid conservative-workflow net:\n{0}")]
    InvalidModel(ValidationReport),
    #[error("replay requires an empty initial marking")]
    NonEmptyInitialMarking,
    #[error("transition {transition}: output variable `{variable}` is not bound by any input arc")]
    UnboundOutputVariable {
        transition: String,
        variable: String,
    },
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("trace {trace} is not syntactically correct: {}", .violations.first().map(|v| v.to_string()).unwrap_or_default())]
    Syntax {
        trace: String,
        violations: Vec<LogViolation>,
    },
    #[error("trace {trace} event {seq}: {source}")]
    Fire {
        trace: String,
        seq: u64,
        #[source]
        source: FireError,
    },
    #[error(
        "trace {trace} event {seq}: identifier variables of {transition} bind inconsistent values"
    )]
    Binding {
        trace: String,
        seq: u64,
        transition: String,
    },
    #[error("trace {trace}: object {object} cannot move from {from} to {to} (color differs)")]
    JumpColor {
        trace: String,
        object: String,
        from: String,
        to: String,
    },
    #[error("trace {trace}: object {object}: {message}")]
    Object {
        trace: String,
        object: String,
        message: String,
    },
}

/// Moves the token with identifier `id` to `target`, returning the place it
/// came from.
///
/// # Panics
///
/// If no token carries `id`; in a conservative net every object of the trace
/// has exactly one token.
pub fn jump(marking: &mut Marking, id: &str, target: PlaceId) -> PlaceId {
    let (from, i) = marking
        .locate(id)
        .unwrap_or_else(|| panic!("token {id} vanished from the marking"));
    let tok = marking.tokens_mut(from).remove(i);
    marking.add(target, tok);
    from
}

/// A net prepared for replay: validated, with per-color source/sink places and
/// per-transition place lookups resolved.
#[derive(Debug)]
pub struct Replayer<'a> {
    cpn: &'a Cpn,
    source: Vec<PlaceId>,
    sink: Vec<PlaceId>,
    inputs: Vec<HashMap<ColorId, (ArcId, PlaceId)>>,
    rules: Vec<HashMap<PlaceId, Comparator>>,
}

impl<'a> Replayer<'a> {
    pub fn new(cpn: &'a Cpn) -> Result<Self, ReplayError> {
        let report = validate_all(cpn);
        if !report.is_valid() {
            return Err(ReplayError::InvalidModel(report));
        }
        if !cpn.initial_marking.is_empty() {
            return Err(ReplayError::NonEmptyInitialMarking);
        }
        let role_place = |c: ColorId, role: PlaceRole| {
            (0..cpn.places.len())
                .find(|&p| cpn.places[p].color == c && cpn.places[p].role == role)
                .expect("validated: one source and one sink per color")
        };
        let source = (0..cpn.colors.len())
            .map(|c| role_place(c, PlaceRole::Source))
            .collect();
        let sink = (0..cpn.colors.len())
            .map(|c| role_place(c, PlaceRole::Sink))
            .collect();

        let mut inputs = Vec::with_capacity(cpn.transitions.len());
        let mut rules = Vec::with_capacity(cpn.transitions.len());
        for (t, tr) in cpn.transitions.iter().enumerate() {
            let mut by_color = HashMap::new();
            let mut bound = std::collections::HashSet::new();
            for &a in cpn.input_arcs(t) {
                let p = cpn.arc_place(a);
                by_color.insert(cpn.places[p].color, (a, p));
                bound.extend(
                    cpn.arcs[a]
                        .expression
                        .terms
                        .iter()
                        .filter_map(|x| x.as_var()),
                );
            }
            for &a in cpn.output_arcs(t) {
                if let Some(v) = cpn.arcs[a]
                    .expression
                    .variables()
                    .into_iter()
                    .find(|v| !bound.contains(v))
                {
                    return Err(ReplayError::UnboundOutputVariable {
                        transition: tr.id.clone(),
                        variable: v.to_owned(),
                    });
                }
            }
            inputs.push(by_color);
            let mut cmps = HashMap::new();
            for (&p, rule) in &tr.priority.local {
                cmps.insert(p, rule.resolve(cpn.place_color(p))?);
            }
            rules.push(cmps);
        }
        Ok(Replayer {
            cpn,
            source,
            sink,
            inputs,
            rules,
        })
    }

    pub fn cpn(&self) -> &'a Cpn {
        self.cpn
    }

    /// Puts every distinct object of `trace` into the source place of its color.
    pub fn populate_source_places(&self, trace: &Trace) -> Result<Marking, ReplayError> {
        let cpn = self.cpn;
        let mut marking = cpn.empty_marking();
        let objects = trace.distinct_objects().map_err(|e| ReplayError::Syntax {
            trace: trace.id.clone(),
            violations: vec![LogViolation {
                trace: trace.id.clone(),
                seq: None,
                kind: crate::eventlog::LogViolationKind::ConflictingColor,
                message: e.to_string(),
            }],
        })?;
        for (id, obj) in objects {
            let object_err = |message: String| ReplayError::Object {
                trace: trace.id.clone(),
                object: id.clone(),
                message,
            };
            let c = cpn
                .color_by_name(&obj.color)
                .ok_or_else(|| object_err(format!("no source place for color {}", obj.color)))?;
            let tok = cpn
                .make_token(c, &obj.values)
                .map_err(|e| object_err(e.to_string()))?;
            marking.add(self.source[c], tok);
        }
        Ok(marking)
    }

    pub fn replay_trace(&self, trace: &Trace) -> Result<ReplayResult, ReplayError> {
        let violations = check_trace(trace, self.cpn);
        if !violations.is_empty() {
            return Err(ReplayError::Syntax {
                trace: trace.id.clone(),
                violations,
            });
        }
        ReplayRun::new(self, trace)?.run()
    }

    /// Replays every trace independently; results keep trace order.
    pub fn replay_log(&self, log: &EventLog) -> Vec<Result<ReplayResult, ReplayError>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            log.traces
                .par_iter()
                .map(|t| self.replay_trace(t))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.replay_log_sequential(log)
        }
    }

    pub fn replay_log_sequential(&self, log: &EventLog) -> Vec<Result<ReplayResult, ReplayError>> {
        log.traces.iter().map(|t| self.replay_trace(t)).collect()
    }
}

/// Replays one trace on `cpn`. Validates the net on every call; use a
/// [`Replayer`] to replay many traces.
pub fn replay_trace(cpn: &Cpn, trace: &Trace) -> Result<ReplayResult, ReplayError> {
    Replayer::new(cpn)?.replay_trace(trace)
}

struct ReplayRun<'r, 'a> {
    rp: &'r Replayer<'a>,
    trace: &'r Trace,
    marking: Marking,
    result: ReplayResult,
}

impl<'r, 'a> ReplayRun<'r, 'a> {
    fn new(rp: &'r Replayer<'a>, trace: &'r Trace) -> Result<Self, ReplayError> {
        let cpn = rp.cpn;
        let marking = rp.populate_source_places(trace)?;
        let objects = marking.token_count() as u64;
        Ok(ReplayRun {
            rp,
            trace,
            marking,
            result: ReplayResult {
                trace_id: trace.id.clone(),
                deviations: Vec::new(),
                counters: ReplayCounters::default(),
                fitness: 1.0,
                jump_edges: BTreeMap::new(),
                arc_transfers: vec![0; cpn.arcs.len()],
                transitions: vec![TransitionStats::default(); cpn.transitions.len()],
                objects,
                terminated_properly: 0,
                events: trace.events.len() as u64,
                last_timestamp: trace.last_timestamp().map(str::to_owned),
            },
        })
    }

    fn place_name(&self, p: PlaceId) -> String {
        self.rp.cpn.places[p].id.clone()
    }

    fn jump_to(&mut self, id: &str, target: PlaceId) -> Result<PlaceId, ReplayError> {
        let cpn = self.rp.cpn;
        let (from, _) = self
            .marking
            .locate(id)
            .unwrap_or_else(|| panic!("token {id} vanished from the marking"));
        if cpn.places[from].color != cpn.places[target].color {
            return Err(ReplayError::JumpColor {
                trace: self.trace.id.clone(),
                object: id.to_owned(),
                from: self.place_name(from),
                to: self.place_name(target),
            });
        }
        jump(&mut self.marking, id, target);
        self.result.counters.jumps += 1;
        *self.result.jump_edges.entry((from, target)).or_default() += 1;
        Ok(from)
    }

    /// Fires `t` like [`Cpn::fire_in_place`], except that an output component
    /// the model computes outside its domain (a negative quantity, say) takes
    /// the event's value instead. Such components are returned per object id
    /// with the raw model value, to be reported as corruptions.
    fn fire(
        &mut self,
        t: TransitionId,
        binding: &Binding,
        event: &EventRecord,
    ) -> Result<HashMap<String, Vec<(usize, Value)>>, ReplayError> {
        let cpn = self.rp.cpn;
        let trace = self.trace;
        let fire_err = |source| ReplayError::Fire {
            trace: trace.id.clone(),
            seq: event.seq,
            source,
        };
        let eval_err = |a: ArcId, source| {
            fire_err(FireError::Eval {
                from: cpn.node_name(cpn.arcs[a].from).to_owned(),
                to: cpn.node_name(cpn.arcs[a].to).to_owned(),
                source,
            })
        };
        // input places have pairwise distinct colors and tokens distinct ids,
        // so membership of each consumed token is enabledness
        let mut consumed = Vec::new();
        for &a in cpn.input_arcs(t) {
            let p = cpn.arc_place(a);
            let kinds = cpn.domain_kinds(cpn.places[p].color);
            let tok = Token::new(
                cpn.arcs[a]
                    .expression
                    .eval(binding, kinds)
                    .map_err(|e| eval_err(a, e))?,
            );
            if !self.marking.contains(p, &tok) {
                return Err(fire_err(FireError::NotEnabled(
                    cpn.transitions[t].id.clone(),
                )));
            }
            consumed.push((p, tok));
        }
        let mut produced = Vec::new();
        let mut unrepresentable = HashMap::new();
        for &a in cpn.output_arcs(t) {
            let p = cpn.arc_place(a);
            let kinds = cpn.domain_kinds(cpn.places[p].color);
            let mut values = Vec::with_capacity(kinds.len());
            let mut raw = Vec::new();
            for (i, (term, kind)) in cpn.arcs[a].expression.terms.iter().zip(kinds).enumerate() {
                match term.eval(binding, *kind) {
                    Ok(v) => values.push(v),
                    Err(EvalError::OutOfDomain { value, .. }) if i > 0 => {
                        raw.push((i, value));
                        values.push(Value::Nat(0));
                    }
                    Err(e) => return Err(eval_err(a, e)),
                }
            }
            if !raw.is_empty() {
                let id = values[0].as_str().expect("identifier component").to_owned();
                let obj = event
                    .objects
                    .iter()
                    .find(|o| o.id() == id.as_str())
                    .expect("every produced identifier is an event object");
                for (i, _) in &raw {
                    values[*i] = kinds[*i]
                        .admit(&obj.values[*i])
                        .expect("syntactically correct: event values are in domain");
                }
                unrepresentable.insert(id, raw);
            }
            produced.push((p, Token::new(values)));
        }
        for (p, tok) in &consumed {
            self.marking.remove(*p, tok);
        }
        for (p, tok) in produced {
            self.marking.add(p, tok);
        }
        Ok(unrepresentable)
    }

    fn run(mut self) -> Result<ReplayResult, ReplayError> {
        let cpn = self.rp.cpn;
        let trace = self.trace;
        for event in &trace.events {
            let t = cpn
                .transition_by_activity(&event.activity)
                .expect("syntactically correct: activity has a transition");
            let record =
                |object_id: &str, description: String, detail: DeviationDetail| DeviationRecord {
                    trace_id: trace.id.clone(),
                    event_seq: Some(event.seq),
                    timestamp: event.timestamp.clone(),
                    activity: Some(event.activity.clone()),
                    object_id: object_id.to_owned(),
                    description,
                    detail,
                };

            let mut jumped = 0u64;
            let mut consumed_from: HashMap<PlaceId, &str> = HashMap::new();
            for obj in &event.objects {
                let id = obj.id();
                let c = cpn
                    .color_by_name(&obj.color)
                    .expect("syntactically correct: known color");
                let (_, p) = self.rp.inputs[t][&c];
                consumed_from.insert(p, id);
                if self.marking.find_in(p, id).is_none() {
                    let from = self.jump_to(id, p)?;
                    jumped += 1;
                    let (fname, tname) = (self.place_name(from), self.place_name(p));
                    self.result.deviations.push(record(
                        id,
                        format!(
                            "{id} not in {tname}; jumped from {fname} to execute {}",
                            event.activity
                        ),
                        DeviationDetail::ControlFlow {
                            from: fname,
                            to: tname,
                        },
                    ));
                }
                if let Some(cmp) = self.rp.rules[t].get(&p) {
                    let candidate = self
                        .marking
                        .find_in(p, id)
                        .expect("token is in its input place");
                    if let Some(prec) = cmp.first_preceding(self.marking.tokens(p), candidate) {
                        let (place, preceding) = (self.place_name(p), prec.id().to_owned());
                        self.result.deviations.push(record(
                            id,
                            format!(
                                "{id} consumed from {place} before {preceding}, which has priority"
                            ),
                            DeviationDetail::RuleViolation { place, preceding },
                        ));
                    }
                }
            }

            let tokens: Vec<&Token> = cpn
                .input_arcs(t)
                .iter()
                .map(|&a| {
                    let p = cpn.arc_place(a);
                    self.marking
                        .find_in(p, consumed_from[&p])
                        .expect("token is in its input place")
                })
                .collect();
            let binding = cpn
                .bind_inputs(t, &tokens)
                .ok_or_else(|| ReplayError::Binding {
                    trace: trace.id.clone(),
                    seq: event.seq,
                    transition: cpn.transitions[t].id.clone(),
                })?;
            let mut unrepresentable = self.fire(t, &binding, event)?;
            self.result.counters.transfers += event.objects.len() as u64;
            for &a in cpn.input_arcs(t).iter().chain(cpn.output_arcs(t)) {
                self.result.arc_transfers[a] += 1;
            }
            let stats = &mut self.result.transitions[t];
            stats.via_jump += jumped;
            stats.via_model += event.objects.len() as u64 - jumped;

            for obj in &event.objects {
                let id = obj.id();
                let Some(p_out) = cpn
                    .output_arcs(t)
                    .iter()
                    .map(|&a| cpn.arc_place(a))
                    .find(|&p| self.marking.find_in(p, id).is_some())
                else {
                    panic!(
                        "token {id} was not transferred by {}",
                        cpn.transitions[t].id
                    );
                };
                let color = cpn.places[p_out].color;
                let observed =
                    cpn.make_token(color, &obj.values)
                        .map_err(|e| ReplayError::Object {
                            trace: trace.id.clone(),
                            object: id.to_owned(),
                            message: e.to_string(),
                        })?;
                let attrs = &cpn.colors[color].attributes;
                let slot = self
                    .marking
                    .tokens_mut(p_out)
                    .iter_mut()
                    .find(|tok| tok.id() == id)
                    .expect("token located above");
                let mut differing = unrepresentable.remove(id).unwrap_or_default();
                for (i, (exp, obs)) in slot.values.iter().zip(&observed.values).enumerate() {
                    if exp != obs {
                        differing.push((i, exp.clone()));
                    }
                }
                if differing.is_empty() {
                    continue;
                }
                differing.sort_by_key(|(i, _)| *i);
                let found: Vec<_> = differing
                    .into_iter()
                    .map(|(i, exp)| (attrs[i].clone(), exp, observed.values[i].clone()))
                    .collect();
                *slot = observed;
                for (attribute, expected, observed) in found {
                    self.result.deviations.push(record(
                        id,
                        format!("{attribute} of {id} is {observed}, model expects {expected}"),
                        DeviationDetail::ResourceCorrupted {
                            attribute,
                            expected,
                            observed,
                        },
                    ));
                }
            }
        }

        let objects = trace.distinct_objects().expect("checked before replay");
        for (id, _) in &objects {
            let (at, _) = self
                .marking
                .locate(id)
                .unwrap_or_else(|| panic!("token {id} vanished from the marking"));
            let sink = self.rp.sink[cpn.places[at].color];
            if at == sink {
                self.result.terminated_properly += 1;
                continue;
            }
            self.jump_to(id, sink)?;
            let (resting, sink) = (self.place_name(at), self.place_name(sink));
            self.result.deviations.push(DeviationRecord {
                trace_id: trace.id.clone(),
                event_seq: None,
                timestamp: None,
                activity: None,
                object_id: id.clone(),
                description: format!("{id} rests in {resting}, not in sink {sink}"),
                detail: DeviationDetail::NonproperTermination { resting, sink },
            });
        }
        debug_assert_eq!(self.marking.token_count(), objects.len());
        self.marking.clear();
        self.result.counters.transfers += objects.len() as u64;
        self.result.fitness = fitness(self.result.counters);
        Ok(self.result)
    }
}
