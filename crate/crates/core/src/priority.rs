//! Priority rules over the tokens of a place.
//!
//! A local rule orders the tokens of one place by a lexicographic list of
//! attribute keys. The candidate token violates the rule when some other token
//! (with a different identifier) strictly precedes it. Tokens that compare
//! equal on every key do not precede each other.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{Color, PlaceId, Token};

pub const PRICE_TIME_BUY: &str = "price-time-buy";
pub const PRICE_TIME_SELL: &str = "price-time-sell";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortKey {
    pub attribute: String,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalRule {
    /// Registry name for built-in rules, `None` for inline comparators.
    pub name: Option<String>,
    pub keys: Vec<SortKey>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("priority rule refers to attribute `{attribute}` absent from color {color}")]
    UnknownAttribute { attribute: String, color: String },
}

impl LocalRule {
    pub fn new(keys: Vec<SortKey>) -> Self {
        LocalRule { name: None, keys }
    }

    /// Higher price first, then earlier submission.
    pub fn price_time_buy() -> Self {
        LocalRule {
            name: Some(PRICE_TIME_BUY.into()),
            keys: vec![key("price", Direction::Desc), key("tsub", Direction::Asc)],
        }
    }

    /// Lower price first, then earlier submission.
    pub fn price_time_sell() -> Self {
        LocalRule {
            name: Some(PRICE_TIME_SELL.into()),
            keys: vec![key("price", Direction::Asc), key("tsub", Direction::Asc)],
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            PRICE_TIME_BUY => Some(Self::price_time_buy()),
            PRICE_TIME_SELL => Some(Self::price_time_sell()),
            _ => None,
        }
    }

    /// Resolves attribute names to component indices of `color`.
    pub fn resolve(&self, color: &Color) -> Result<Comparator, RuleError> {
        let keys = self
            .keys
            .iter()
            .map(|k| {
                color
                    .attribute_index(&k.attribute)
                    .map(|i| (i, k.direction))
                    .ok_or_else(|| RuleError::UnknownAttribute {
                        attribute: k.attribute.clone(),
                        color: color.name.clone(),
                    })
            })
            .collect::<Result<_, _>>()?;
        Ok(Comparator { keys })
    }
}

fn key(attribute: &str, direction: Direction) -> SortKey {
    SortKey {
        attribute: attribute.into(),
        direction,
    }
}

/// A local rule bound to component indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparator {
    keys: Vec<(usize, Direction)>,
}

impl Comparator {
    /// `Less` means `a` must be served before `b`.
    pub fn compare(&self, a: &Token, b: &Token) -> Ordering {
        for &(i, dir) in &self.keys {
            let ord = a.values[i].total_cmp(&b.values[i]);
            let ord = match dir {
                Direction::Asc => ord,
                Direction::Desc => ord.reverse(),
            };
            if ord != Ordering::Equal {
                return ord;
            }
        }
        Ordering::Equal
    }

    /// The highest-priority token among those that strictly precede
    /// `candidate`, if any. The first such token in place order wins ties.
    pub fn first_preceding<'a>(&self, tokens: &'a [Token], candidate: &Token) -> Option<&'a Token> {
        let mut best: Option<&Token> = None;
        for tok in tokens {
            if tok.id() == candidate.id() || self.compare(tok, candidate) != Ordering::Less {
                continue;
            }
            if best.is_none_or(|b| self.compare(tok, b) == Ordering::Less) {
                best = Some(tok);
            }
        }
        best
    }
}

/// Conjunction of local rules over some input places of a transition.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PriorityRule {
    pub local: BTreeMap<PlaceId, LocalRule>,
}

impl PriorityRule {
    pub fn is_empty(&self) -> bool {
        self.local.is_empty()
    }

    pub fn for_place(&self, place: PlaceId) -> Option<&LocalRule> {
        self.local.get(&place)
    }
}

/// Returns `true` when consuming `candidate` from `place` violates `rule`.
///
/// Places the rule does not cover never violate.
pub fn check_priority(
    rule: &PriorityRule,
    place: PlaceId,
    color: &Color,
    tokens: &[Token],
    candidate: &Token,
) -> Result<bool, RuleError> {
    let Some(local) = rule.for_place(place) else {
        return Ok(false);
    };
    let cmp = local.resolve(color)?;
    Ok(cmp.first_preceding(tokens, candidate).is_some())
}
