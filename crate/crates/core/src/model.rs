//! JSON model-definition files.
//!
//! ```json
//! {
//!   "domains": [{"name": "O_B", "kind": "identifier"}, {"name": "N", "kind": "natural"}],
//!   "colors": [{"name": "OB", "domains": ["O_B", "N"], "attributes": ["id", "qty"]}],
//!   "places": [{"id": "p1", "color": "OB", "role": "source"}],
//!   "transitions": [{"id": "t1", "activity": "submit", "priority": {"p1": "price-time-buy"}}],
//!   "arcs": [{"from": "p1", "to": "t1", "expr": "(b,q)"}],
//!   "initial_marking": {"p1": [["b1", 5]]}
//! }
//! ```
//!
//! A priority entry is either a built-in rule name or an inline comparator
//! `{"order": [{"attribute": "price", "direction": "desc"}, ...]}`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expression, ParseError};
use crate::net::{Arc, Color, Cpn, Marking, Node, Place, PlaceRole, Transition};
use crate::priority::{LocalRule, PriorityRule, SortKey};
use crate::value::{DataDomain, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub domains: Vec<DataDomain>,
    pub colors: Vec<ColorDef>,
    pub places: Vec<PlaceDef>,
    pub transitions: Vec<TransitionDef>,
    pub arcs: Vec<ArcDef>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub initial_marking: BTreeMap<String, Vec<Vec<Value>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColorDef {
    pub name: String,
    pub domains: Vec<String>,
    pub attributes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaceDef {
    pub id: String,
    pub color: String,
    #[serde(default = "internal_role")]
    pub role: PlaceRole,
}

fn internal_role() -> PlaceRole {
    PlaceRole::Internal
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionDef {
    pub id: String,
    pub activity: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub priority: BTreeMap<String, RuleDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RuleDef {
    Builtin(String),
    Inline { order: Vec<SortKey> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcDef {
    pub from: String,
    pub to: String,
    pub expr: String,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model JSON error at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("color {color}: unknown domain `{domain}`")]
    UnknownDomain { color: String, domain: String },
    #[error("color {color}: {attributes} attribute names for {domains} domains")]
    AttributeCount {
        color: String,
        attributes: usize,
        domains: usize,
    },
    #[error("place {place}: unknown color `{color}`")]
    UnknownColor { place: String, color: String },
    #[error("arc {index} ({from} -> {to}): unknown node `{node}`")]
    UnknownNode {
        index: usize,
        from: String,
        to: String,
        node: String,
    },
    #[error("arc {index} ({from} -> {to}): {source}")]
    Expression {
        index: usize,
        from: String,
        to: String,
        #[source]
        source: ParseError,
    },
    #[error("transition {transition}: unknown priority rule `{rule}`")]
    UnknownRule { transition: String, rule: String },
    #[error("transition {transition}: priority rule on unknown place `{place}`")]
    RulePlace { transition: String, place: String },
    #[error("initial marking: unknown place `{0}`")]
    MarkingPlace(String),
    #[error("initial marking of {place}: {message}")]
    MarkingToken { place: String, message: String },
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<ModelFile, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<ModelFile, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    /// Resolves names and parses arc expressions. Structural rules (arc
    /// endpoint kinds, expression colors, duplicate labels, the
    /// conservative-workflow conditions) are left to [`crate::validate`].
    pub fn build(&self) -> Result<Cpn, ModelError> {
        let domain_ix = |name: &str| self.domains.iter().position(|d| d.name == name);

        let mut colors = Vec::with_capacity(self.colors.len());
        for c in &self.colors {
            if c.attributes.len() != c.domains.len() {
                return Err(ModelError::AttributeCount {
                    color: c.name.clone(),
                    attributes: c.attributes.len(),
                    domains: c.domains.len(),
                });
            }
            let domains = c
                .domains
                .iter()
                .map(|d| {
                    domain_ix(d).ok_or_else(|| ModelError::UnknownDomain {
                        color: c.name.clone(),
                        domain: d.clone(),
                    })
                })
                .collect::<Result<_, _>>()?;
            colors.push(Color {
                name: c.name.clone(),
                domains,
                attributes: c.attributes.clone(),
            });
        }
        let color_ix = |name: &str| colors.iter().position(|c| c.name == name);

        let places = self
            .places
            .iter()
            .map(|p| {
                let color = color_ix(&p.color).ok_or_else(|| ModelError::UnknownColor {
                    place: p.id.clone(),
                    color: p.color.clone(),
                })?;
                Ok(Place {
                    id: p.id.clone(),
                    color,
                    role: p.role,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        let place_ix = |name: &str| places.iter().position(|p| p.id == name);

        let mut transitions = Vec::with_capacity(self.transitions.len());
        for t in &self.transitions {
            let mut priority = PriorityRule::default();
            for (place, def) in &t.priority {
                let p = place_ix(place).ok_or_else(|| ModelError::RulePlace {
                    transition: t.id.clone(),
                    place: place.clone(),
                })?;
                let rule = match def {
                    RuleDef::Builtin(name) => {
                        LocalRule::builtin(name).ok_or_else(|| ModelError::UnknownRule {
                            transition: t.id.clone(),
                            rule: name.clone(),
                        })?
                    }
                    RuleDef::Inline { order } => LocalRule::new(order.clone()),
                };
                priority.local.insert(p, rule);
            }
            transitions.push(Transition {
                id: t.id.clone(),
                activity: t.activity.clone(),
                priority,
            });
        }

        let node = |name: &str| {
            place_ix(name).map(Node::Place).or_else(|| {
                transitions
                    .iter()
                    .position(|t| t.id == name)
                    .map(Node::Transition)
            })
        };
        let mut arcs = Vec::with_capacity(self.arcs.len());
        for (index, a) in self.arcs.iter().enumerate() {
            let resolve = |n: &str| {
                node(n).ok_or_else(|| ModelError::UnknownNode {
                    index,
                    from: a.from.clone(),
                    to: a.to.clone(),
                    node: n.to_owned(),
                })
            };
            let (from, to) = (resolve(&a.from)?, resolve(&a.to)?);
            let expression =
                Expression::parse(&a.expr).map_err(|source| ModelError::Expression {
                    index,
                    from: a.from.clone(),
                    to: a.to.clone(),
                    source,
                })?;
            arcs.push(Arc {
                from,
                to,
                expression,
            });
        }

        let mut cpn = Cpn::assemble(
            self.domains.clone(),
            colors,
            places,
            transitions,
            arcs,
            Marking::default(),
        );
        let mut marking = cpn.empty_marking();
        for (place, tokens) in &self.initial_marking {
            let p = cpn
                .place(place)
                .ok_or_else(|| ModelError::MarkingPlace(place.clone()))?;
            for values in tokens {
                let tok = cpn.make_token(cpn.places[p].color, values).map_err(|e| {
                    ModelError::MarkingToken {
                        place: place.clone(),
                        message: e.to_string(),
                    }
                })?;
                marking.add(p, tok);
            }
        }
        cpn.initial_marking = marking;
        Ok(cpn)
    }
}

/// Reads and builds a model file.
pub fn load_model(path: impl AsRef<Path>) -> Result<Cpn, ModelError> {
    ModelFile::read(path)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
        "domains": [{"name": "I", "kind": "identifier"}, {"name": "N", "kind": "natural"}],
        "colors": [{"name": "C", "domains": ["I", "N"], "attributes": ["id", "n"]}],
        "places": [{"id": "a", "color": "C", "role": "source"}, {"id": "b", "color": "C", "role": "sink"}],
        "transitions": [{"id": "t", "activity": "go", "priority": {"a": {"order": [{"attribute": "n", "direction": "desc"}]}}}],
        "arcs": [{"from": "a", "to": "t", "expr": "(x,n)"}, {"from": "t", "to": "b", "expr": "(x,n+1)"}],
        "initial_marking": {"a": [["k1", 3]]}
    }"#;

    #[test]
    fn builds_small_model() {
        let cpn = ModelFile::from_json(SMALL).unwrap().build().unwrap();
        assert_eq!(cpn.places.len(), 2);
        assert_eq!(cpn.input_arcs(0), &[0]);
        assert_eq!(cpn.output_arcs(0), &[1]);
        assert_eq!(cpn.initial_marking.tokens(0).len(), 1);
        assert!(cpn.transitions[0].priority.for_place(0).is_some());
    }

    #[test]
    fn json_round_trip() {
        let m = ModelFile::from_json(SMALL).unwrap();
        let back = ModelFile::from_json(&m.to_json_pretty()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn malformed_expression_is_load_error() {
        let text = SMALL.replace("(x,n+1)", "(b,ts,,q)");
        match ModelFile::from_json(&text).unwrap().build() {
            Err(ModelError::Expression { source, .. }) => assert_eq!(source.term, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_references_are_load_errors() {
        let text = SMALL.replace(r#""to": "b""#, r#""to": "zz""#);
        assert!(matches!(
            ModelFile::from_json(&text).unwrap().build(),
            Err(ModelError::UnknownNode { .. })
        ));
        let text = SMALL.replace(r#""a": {"order""#, r#""zz": {"order""#);
        assert!(matches!(
            ModelFile::from_json(&text).unwrap().build(),
            Err(ModelError::RulePlace { .. })
        ));
        let text = SMALL.replace(r#"["k1", 3]"#, r#"["k1", -3]"#);
        assert!(matches!(
            ModelFile::from_json(&text).unwrap().build(),
            Err(ModelError::MarkingToken { .. })
        ));
    }

    #[test]
    fn json_errors_carry_location() {
        match ModelFile::from_json("{\n  \"domains\": [,]\n}") {
            Err(ModelError::Json { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
