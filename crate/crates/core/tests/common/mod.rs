#![allow(dead_code)]

use std::collections::BTreeMap;

use cpnconf::eventlog::{EventRecord, ObjectState, Trace};
use cpnconf::model::{ArcDef, ColorDef, ModelFile, PlaceDef, TransitionDef};
use cpnconf::net::{Cpn, Marking, PlaceRole, Token};
use cpnconf::trading::*;
use cpnconf::value::{DataDomain, DomainKind, Value};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn order(color: &str, id: &str, tsub: u64, price: f64, qty: u64) -> ObjectState {
    ObjectState::new(
        color,
        vec![
            Value::from(id),
            Value::Nat(tsub),
            Value::Real(price),
            Value::Nat(qty),
        ],
    )
}

pub fn buy(id: &str, tsub: u64, price: f64, qty: u64) -> ObjectState {
    order(BUY_COLOR, id, tsub, price, qty)
}

pub fn sell(id: &str, tsub: u64, price: f64, qty: u64) -> ObjectState {
    order(SELL_COLOR, id, tsub, price, qty)
}

/// The six-event order-book trace with one skipped submission, a priority
/// violation and a corrupted quantity. `b1_after_trade` is the quantity of b1
/// recorded by the trade event (4 in the original, 3 is model-consistent).
pub fn sample_trace_with(b1_after_trade: u64) -> Trace {
    let b1 = buy("b1", 1, 22.0, 5);
    let s1 = sell("s1", 2, 21.0, 2);
    let s2 = sell("s2", 3, 19.0, 1);
    Trace::new(
        "sigma",
        vec![
            EventRecord::new(1, SUBMIT_BUY, vec![b1.clone()]),
            EventRecord::new(2, NEW_BUY, vec![b1.clone()]),
            EventRecord::new(3, SUBMIT_SELL, vec![s1.clone()]),
            EventRecord::new(4, NEW_SELL, vec![s1.clone()]),
            EventRecord::new(5, NEW_SELL, vec![s2]),
            EventRecord::new(
                6,
                TRADE2,
                vec![buy("b1", 1, 22.0, b1_after_trade), sell("s1", 2, 21.0, 0)],
            ),
        ],
    )
}

pub fn sample_trace() -> Trace {
    sample_trace_with(4)
}

pub fn order_token(id: &str, tsub: u64, price: f64, qty: u64) -> Token {
    Token::new(vec![
        Value::from(id),
        Value::Nat(tsub),
        Value::Real(price),
        Value::Nat(qty),
    ])
}

/// Written independently of the comparator: does any other order in `place`
/// have to be served before `candidate` under price-time priority?
pub fn oracle_violates(place: &[Token], candidate: &Token, buy_side: bool) -> bool {
    let price = |t: &Token| match t.values[2] {
        Value::Real(p) => p,
        Value::Nat(p) => p as f64,
        _ => panic!("price is numeric"),
    };
    let tsub = |t: &Token| match t.values[1] {
        Value::Nat(n) => n,
        _ => panic!("tsub is natural"),
    };
    place.iter().any(|u| {
        if u.id() == candidate.id() {
            return false;
        }
        let better_price = if buy_side {
            price(u) > price(candidate)
        } else {
            price(u) < price(candidate)
        };
        better_price || (price(u) == price(candidate) && tsub(u) < tsub(candidate))
    })
}

/// A random order book place: distinct ids, prices on a coarse grid and
/// small tsub range so that ties on both keys happen.
pub fn random_book(rng: &mut impl Rng) -> Vec<Token> {
    let n = rng.gen_range(1..=20);
    (0..n)
        .map(|i| {
            order_token(
                &format!("o{i}"),
                rng.gen_range(1..=4),
                18.0 + 0.5 * rng.gen_range(0..=4) as f64,
                rng.gen_range(1..=5),
            )
        })
        .collect()
}

/// A random net satisfying all conservative-workflow conditions. Each colour
/// has a chain of places from its source to its sink; chain steps are grouped
/// into transitions that synchronise several colours, and some transitions
/// skip ahead on a chain. Sources hold `tokens_per_source` tokens.
pub fn random_valid_model(rng: &mut impl Rng, tokens_per_source: usize) -> ModelFile {
    let ncolors = rng.gen_range(1..=3);
    let mut m = ModelFile {
        name: None,
        domains: vec![DataDomain {
            name: "N".into(),
            kind: DomainKind::Natural,
        }],
        colors: Vec::new(),
        places: Vec::new(),
        transitions: Vec::new(),
        arcs: Vec::new(),
        initial_marking: BTreeMap::new(),
    };
    // (colour, from index, to index) per step
    let mut steps = Vec::new();
    for c in 0..ncolors {
        m.domains.push(DataDomain {
            name: format!("ID{c}"),
            kind: DomainKind::Identifier,
        });
        m.colors.push(ColorDef {
            name: format!("C{c}"),
            domains: vec![format!("ID{c}"), "N".into()],
            attributes: vec!["id".into(), "n".into()],
        });
        let len = rng.gen_range(1..=4);
        for i in 0..=len {
            let role = if i == 0 {
                PlaceRole::Source
            } else if i == len {
                PlaceRole::Sink
            } else {
                PlaceRole::Internal
            };
            m.places.push(PlaceDef {
                id: format!("c{c}p{i}"),
                color: format!("C{c}"),
                role,
            });
        }
        for i in 0..len {
            steps.push((c, i, i + 1));
        }
        if len >= 2 && rng.gen_bool(0.5) {
            let from = rng.gen_range(0..len - 1);
            steps.push((c, from, rng.gen_range(from + 2..=len)));
        }
        let tokens = (0..tokens_per_source)
            .map(|k| {
                vec![
                    Value::Str(format!("c{c}o{k}")),
                    Value::Nat(rng.gen_range(0..10)),
                ]
            })
            .collect();
        m.initial_marking.insert(format!("c{c}p0"), tokens);
    }
    steps.shuffle(rng);
    let mut groups: Vec<Vec<(usize, usize, usize)>> = Vec::new();
    for step in steps {
        let join = groups
            .iter()
            .position(|g| g.iter().all(|s| s.0 != step.0))
            .filter(|_| rng.gen_bool(0.4));
        match join {
            Some(g) => groups[g].push(step),
            None => groups.push(vec![step]),
        }
    }
    for (t, group) in groups.iter().enumerate() {
        let tid = format!("t{t}");
        m.transitions.push(TransitionDef {
            id: tid.clone(),
            activity: format!("a{t}"),
            priority: BTreeMap::new(),
        });
        for &(c, from, to) in group {
            m.arcs.push(ArcDef {
                from: format!("c{c}p{from}"),
                to: tid.clone(),
                expr: format!("(x{c},n{c})"),
            });
            let out = if rng.gen_bool(0.5) {
                format!("(x{c},n{c}+1)")
            } else {
                format!("(x{c},n{c})")
            };
            m.arcs.push(ArcDef {
                from: tid.clone(),
                to: format!("c{c}p{to}"),
                expr: out,
            });
        }
    }
    m
}

/// Fires up to `steps` randomly chosen enabled transitions starting from the
/// initial marking, returning every marking visited.
pub fn random_firing_sequence(cpn: &Cpn, rng: &mut impl Rng, steps: usize) -> Vec<Marking> {
    let mut marking = cpn.initial_marking.clone();
    let mut seen = vec![marking.clone()];
    for _ in 0..steps {
        let mut options = Vec::new();
        for t in 0..cpn.transitions.len() {
            let mut chosen = Vec::new();
            for &a in cpn.input_arcs(t) {
                let toks = marking.tokens(cpn.arc_place(a));
                if toks.is_empty() {
                    break;
                }
                chosen.push(toks[rng.gen_range(0..toks.len())].clone());
            }
            if chosen.len() != cpn.input_arcs(t).len() {
                continue;
            }
            let refs: Vec<&Token> = chosen.iter().collect();
            if let Some(binding) = cpn.bind_inputs(t, &refs) {
                if cpn.enabled(&marking, t, &binding).unwrap() {
                    options.push((t, binding));
                }
            }
        }
        let Some((t, binding)) = options.choose(rng) else {
            break;
        };
        cpn.fire_in_place(&mut marking, *t, binding).unwrap();
        seen.push(marking.clone());
    }
    seen
}

/// Reference model variants, each breaking exactly one workflow condition.
pub fn mutant_models() -> Vec<(u8, ModelFile)> {
    let base = reference_model_file();
    let arc_index = |m: &ModelFile, from: &str, to: &str| {
        m.arcs
            .iter()
            .position(|a| a.from == from && a.to == to)
            .expect("arc exists")
    };

    // 1: cancel sell consumes an order without producing it anywhere
    let mut c1 = base.clone();
    let i = arc_index(&c1, "t9", "p8");
    c1.arcs.remove(i);

    // 2: two initial tokens share an id
    let mut c2 = base.clone();
    let tok = vec![
        Value::from("b1"),
        Value::Nat(1),
        Value::Real(20.0),
        Value::Nat(1),
    ];
    c2.initial_marking
        .insert("p1".into(), vec![tok.clone(), tok]);

    // 3: a second buy sink
    let mut c3 = base.clone();
    c3.places.push(PlaceDef {
        id: "p9".into(),
        color: BUY_COLOR.into(),
        role: PlaceRole::Sink,
    });

    // 4: cancel sell consumes two sell places
    let mut c4 = base.clone();
    c4.arcs.push(ArcDef {
        from: "p4".into(),
        to: "t9".into(),
        expr: "(s2,ts2,pr2,q2)".into(),
    });
    c4.arcs.push(ArcDef {
        from: "t9".into(),
        to: "p8".into(),
        expr: "(s2,ts2,pr2,q2)".into(),
    });

    vec![(1, c1), (2, c2), (3, c3), (4, c4)]
}
