//! Colored Petri net structure, markings, enabling and firing.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Binding, EvalError, Expression};
use crate::priority::PriorityRule;
use crate::value::{DataDomain, DomainKind, Value};

pub type DomainId = usize;
pub type ColorId = usize;
pub type PlaceId = usize;
pub type TransitionId = usize;
pub type ArcId = usize;

/// A color: an ordered product of domains, with one attribute name per component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Color {
    pub name: String,
    pub domains: Vec<DomainId>,
    /// Attribute names; `attributes[0]` names the identifier.
    pub attributes: Vec<String>,
}

impl Color {
    pub fn arity(&self) -> usize {
        self.domains.len()
    }

    /// Member access: index of the named attribute.
    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaceRole {
    Source,
    Sink,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Place {
    pub id: String,
    pub color: ColorId,
    pub role: PlaceRole,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub id: String,
    pub activity: String,
    pub priority: PriorityRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Place(PlaceId),
    Transition(TransitionId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub from: Node,
    pub to: Node,
    pub expression: Expression,
}

impl Arc {
    /// `(place, transition, is_input)` when the arc joins a place and a transition.
    pub fn endpoints(&self) -> Option<(PlaceId, TransitionId, bool)> {
        match (self.from, self.to) {
            (Node::Place(p), Node::Transition(t)) => Some((p, t, true)),
            (Node::Transition(t), Node::Place(p)) => Some((p, t, false)),
            _ => None,
        }
    }
}

/// A token: a value tuple whose first component is its identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub values: Vec<Value>,
}

impl Token {
    pub fn new(values: Vec<Value>) -> Self {
        Token { values }
    }

    /// The identifier component. Empty when the first component is not a string.
    pub fn id(&self) -> &str {
        self.values.first().and_then(Value::as_str).unwrap_or("")
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// Per-place token multisets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Marking {
    places: Vec<Vec<Token>>,
}

impl Marking {
    pub fn empty(place_count: usize) -> Self {
        Marking {
            places: vec![Vec::new(); place_count],
        }
    }

    pub fn tokens(&self, place: PlaceId) -> &[Token] {
        &self.places[place]
    }

    pub fn tokens_mut(&mut self, place: PlaceId) -> &mut Vec<Token> {
        &mut self.places[place]
    }

    pub fn add(&mut self, place: PlaceId, token: Token) {
        self.places[place].push(token);
    }

    /// Removes one occurrence of `token` from `place`.
    pub fn remove(&mut self, place: PlaceId, token: &Token) -> bool {
        match self.places[place].iter().position(|t| t == token) {
            Some(i) => {
                self.places[place].remove(i);
                true
            }
            None => false,
        }
    }

    pub fn contains(&self, place: PlaceId, token: &Token) -> bool {
        self.places[place].contains(token)
    }

    /// Token with identifier `id` in `place`.
    pub fn find_in(&self, place: PlaceId, id: &str) -> Option<&Token> {
        self.places[place].iter().find(|t| t.id() == id)
    }

    /// Place and position of the first token with identifier `id`.
    pub fn locate(&self, id: &str) -> Option<(PlaceId, usize)> {
        self.places
            .iter()
            .enumerate()
            .find_map(|(p, toks)| toks.iter().position(|t| t.id() == id).map(|i| (p, i)))
    }

    pub fn place_count(&self) -> usize {
        self.places.len()
    }

    pub fn token_count(&self) -> usize {
        self.places.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.places.iter().all(Vec::is_empty)
    }

    /// All identifiers in the marking, sorted (multiset).
    pub fn identifiers(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .places
            .iter()
            .flatten()
            .map(|t| t.id().to_owned())
            .collect();
        ids.sort();
        ids
    }

    pub fn clear(&mut self) {
        self.places.iter_mut().for_each(Vec::clear);
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FireError {
    #[error("transition {0} is not enabled under the given binding")]
    NotEnabled(String),
    #[error("evaluating arc {from} -> {to}: {source}")]
    Eval {
        from: String,
        to: String,
        #[source]
        source: EvalError,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("values {values} do not fit color {color}")]
pub struct TokenError {
    pub color: String,
    pub values: String,
}

/// A colored Petri net together with its initial marking.
///
/// Built from a [`crate::model::ModelFile`]; structural rules are checked
/// separately by [`crate::validate`].
#[derive(Debug, Clone)]
pub struct Cpn {
    pub domains: Vec<DataDomain>,
    pub colors: Vec<Color>,
    pub places: Vec<Place>,
    pub transitions: Vec<Transition>,
    pub arcs: Vec<Arc>,
    pub initial_marking: Marking,
    inputs: Vec<Vec<ArcId>>,
    outputs: Vec<Vec<ArcId>>,
    place_index: HashMap<String, PlaceId>,
    activity_index: HashMap<String, TransitionId>,
    kinds: Vec<Vec<DomainKind>>,
}

impl Cpn {
    pub(crate) fn assemble(
        domains: Vec<DataDomain>,
        colors: Vec<Color>,
        places: Vec<Place>,
        transitions: Vec<Transition>,
        arcs: Vec<Arc>,
        initial_marking: Marking,
    ) -> Cpn {
        let mut inputs = vec![Vec::new(); transitions.len()];
        let mut outputs = vec![Vec::new(); transitions.len()];
        for (i, arc) in arcs.iter().enumerate() {
            match arc.endpoints() {
                Some((_, t, true)) => inputs[t].push(i),
                Some((_, t, false)) => outputs[t].push(i),
                None => {}
            }
        }
        let mut place_index = HashMap::new();
        for (i, p) in places.iter().enumerate() {
            place_index.entry(p.id.clone()).or_insert(i);
        }
        let mut activity_index = HashMap::new();
        for (i, t) in transitions.iter().enumerate() {
            activity_index.entry(t.activity.clone()).or_insert(i);
        }
        let kinds = colors
            .iter()
            .map(|c| c.domains.iter().map(|&d| domains[d].kind).collect())
            .collect();
        Cpn {
            kinds,
            domains,
            colors,
            places,
            transitions,
            arcs,
            initial_marking,
            inputs,
            outputs,
            place_index,
            activity_index,
        }
    }

    pub fn place(&self, id: &str) -> Option<PlaceId> {
        self.place_index.get(id).copied()
    }

    pub fn transition_by_activity(&self, activity: &str) -> Option<TransitionId> {
        self.activity_index.get(activity).copied()
    }

    pub fn transition_by_id(&self, id: &str) -> Option<TransitionId> {
        self.transitions.iter().position(|t| t.id == id)
    }

    pub fn color_by_name(&self, name: &str) -> Option<ColorId> {
        self.colors.iter().position(|c| c.name == name)
    }

    pub fn place_color(&self, place: PlaceId) -> &Color {
        &self.colors[self.places[place].color]
    }

    pub fn domain_kinds(&self, color: ColorId) -> &[DomainKind] {
        &self.kinds[color]
    }

    /// Input arcs of `t` (place -> t).
    pub fn input_arcs(&self, t: TransitionId) -> &[ArcId] {
        &self.inputs[t]
    }

    /// Output arcs of `t` (t -> place).
    pub fn output_arcs(&self, t: TransitionId) -> &[ArcId] {
        &self.outputs[t]
    }

    /// The place adjacent to arc `a`. Panics on place-place or transition-transition arcs.
    pub fn arc_place(&self, a: ArcId) -> PlaceId {
        self.arcs[a]
            .endpoints()
            .expect("arc joins a place and a transition")
            .0
    }

    pub fn node_name(&self, node: Node) -> &str {
        match node {
            Node::Place(p) => &self.places[p].id,
            Node::Transition(t) => &self.transitions[t].id,
        }
    }

    /// Coerces `values` into a token of `color`.
    pub fn make_token(&self, color: ColorId, values: &[Value]) -> Result<Token, TokenError> {
        let kinds = self.domain_kinds(color);
        let err = || TokenError {
            color: self.colors[color].name.clone(),
            values: Token::new(values.to_vec()).to_string(),
        };
        if kinds.len() != values.len() {
            return Err(err());
        }
        values
            .iter()
            .zip(kinds)
            .map(|(v, k)| k.admit(v))
            .collect::<Option<Vec<_>>>()
            .map(Token::new)
            .ok_or_else(err)
    }

    pub fn empty_marking(&self) -> Marking {
        Marking::empty(self.places.len())
    }

    fn eval_arc(&self, a: ArcId, binding: &Binding) -> Result<Token, FireError> {
        let arc = &self.arcs[a];
        let color = self.places[self.arc_place(a)].color;
        arc.expression
            .eval(binding, self.domain_kinds(color))
            .map(Token::new)
            .map_err(|source| FireError::Eval {
                from: self.node_name(arc.from).to_owned(),
                to: self.node_name(arc.to).to_owned(),
                source,
            })
    }

    /// Whether `t` is enabled in `marking` under `binding`: every input-arc
    /// expression evaluates to a token present in its place.
    pub fn enabled(
        &self,
        marking: &Marking,
        t: TransitionId,
        binding: &Binding,
    ) -> Result<bool, FireError> {
        let mut taken: Vec<(PlaceId, Token)> = Vec::new();
        for &a in self.input_arcs(t) {
            let p = self.arc_place(a);
            let tok = self.eval_arc(a, binding)?;
            let available = marking.tokens(p).iter().filter(|x| **x == tok).count();
            let already = taken.iter().filter(|(q, x)| *q == p && *x == tok).count();
            if available <= already {
                return Ok(false);
            }
            taken.push((p, tok));
        }
        Ok(true)
    }

    /// Fires `t` under `binding`, returning the successor marking.
    pub fn fire(
        &self,
        marking: &Marking,
        t: TransitionId,
        binding: &Binding,
    ) -> Result<Marking, FireError> {
        let mut next = marking.clone();
        self.fire_in_place(&mut next, t, binding)?;
        Ok(next)
    }

    /// Fires `t` in place. On error the marking is left unchanged.
    pub fn fire_in_place(
        &self,
        marking: &mut Marking,
        t: TransitionId,
        binding: &Binding,
    ) -> Result<(), FireError> {
        if !self.enabled(marking, t, binding)? {
            return Err(FireError::NotEnabled(self.transitions[t].id.clone()));
        }
        let consumed = self
            .input_arcs(t)
            .iter()
            .map(|&a| Ok((self.arc_place(a), self.eval_arc(a, binding)?)))
            .collect::<Result<Vec<_>, FireError>>()?;
        let produced = self
            .output_arcs(t)
            .iter()
            .map(|&a| Ok((self.arc_place(a), self.eval_arc(a, binding)?)))
            .collect::<Result<Vec<_>, FireError>>()?;
        for (p, tok) in &consumed {
            marking.remove(*p, tok);
        }
        for (p, tok) in produced {
            marking.add(p, tok);
        }
        Ok(())
    }

    /// Binds the plain-variable terms of `t`'s input arcs from the given
    /// tokens, one token per input arc in [`Cpn::input_arcs`] order.
    ///
    /// Returns `None` if a variable would be bound to two different values.
    pub fn bind_inputs(&self, t: TransitionId, tokens: &[&Token]) -> Option<Binding> {
        let mut binding = Binding::new();
        for (&a, tok) in self.input_arcs(t).iter().zip(tokens) {
            for (term, value) in self.arcs[a].expression.terms.iter().zip(&tok.values) {
                if let Some(var) = term.as_var() {
                    match binding.get(var) {
                        Some(v) if v != value => return None,
                        Some(_) => {}
                        None => {
                            binding.insert(var.to_owned(), value.clone());
                        }
                    }
                }
            }
        }
        Some(binding)
    }
}
