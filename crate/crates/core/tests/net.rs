mod common;

use common::*;
use cpnconf::expr::Binding;
use cpnconf::model::{ArcDef, ModelFile, TransitionDef};
use cpnconf::net::{Cpn, FireError, Marking};
use cpnconf::trading::*;
use cpnconf::validate::{
    validate_all, validate_conservative_workflow, validate_syntax, ViolationKind,
};
use cpnconf::value::Value;

fn bind(pairs: &[(&str, Value)]) -> Binding {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn trade_binding(buy: (&str, u64, f64, u64), sell: (&str, u64, f64, u64)) -> Binding {
    bind(&[
        ("b", Value::from(buy.0)),
        ("ts1", Value::Nat(buy.1)),
        ("pr1", Value::Real(buy.2)),
        ("q1", Value::Nat(buy.3)),
        ("s", Value::from(sell.0)),
        ("ts2", Value::Nat(sell.1)),
        ("pr2", Value::Real(sell.2)),
        ("q2", Value::Nat(sell.3)),
    ])
}

fn place(cpn: &Cpn, id: &str) -> usize {
    cpn.place(id).unwrap()
}

fn book_after_e4(cpn: &Cpn) -> Marking {
    let mut m = cpn.empty_marking();
    m.add(place(cpn, "p5"), order_token("b1", 1, 22.0, 5));
    m.add(place(cpn, "p6"), order_token("s1", 2, 21.0, 2));
    m
}

#[test]
fn reference_model_is_valid() {
    let cpn = build_reference_model();
    let r = validate_all(&cpn);
    assert!(r.is_valid(), "{r}");
}

#[test]
fn trade2_enabled_and_fired() {
    let cpn = build_reference_model();
    let t6 = cpn.transition_by_activity(TRADE2).unwrap();
    let m = book_after_e4(&cpn);
    let b = trade_binding(("b1", 1, 22.0, 5), ("s1", 2, 21.0, 2));
    assert!(cpn.enabled(&m, t6, &b).unwrap());

    let next = cpn.fire(&m, t6, &b).unwrap();
    assert_eq!(
        next.tokens(place(&cpn, "p5")),
        &[order_token("b1", 1, 22.0, 3)]
    );
    assert_eq!(
        next.tokens(place(&cpn, "p8")),
        &[order_token("s1", 2, 21.0, 0)]
    );
    assert!(next.tokens(place(&cpn, "p6")).is_empty());
    assert_eq!(next.identifiers(), m.identifiers());
}

#[test]
fn empty_input_place_disables() {
    let cpn = build_reference_model();
    let t6 = cpn.transition_by_activity(TRADE2).unwrap();
    let mut m = book_after_e4(&cpn);
    m.tokens_mut(place(&cpn, "p6")).clear();
    let b = trade_binding(("b1", 1, 22.0, 5), ("s1", 2, 21.0, 2));
    assert!(!cpn.enabled(&m, t6, &b).unwrap());
    assert!(matches!(
        cpn.fire(&m, t6, &b),
        Err(FireError::NotEnabled { .. })
    ));
}

#[test]
fn binding_to_absent_token_disables() {
    let cpn = build_reference_model();
    let t1 = cpn.transition_by_activity(SUBMIT_BUY).unwrap();
    let mut m = cpn.empty_marking();
    m.add(place(&cpn, "p1"), order_token("b1", 1, 22.0, 5));
    let b = bind(&[
        ("b", Value::from("b1")),
        ("ts", Value::Nat(1)),
        ("pr", Value::Real(22.0)),
        ("q", Value::Nat(4)),
    ]);
    assert!(!cpn.enabled(&m, t1, &b).unwrap());
}

#[test]
fn unbound_variable_is_an_error() {
    let cpn = build_reference_model();
    let t1 = cpn.transition_by_activity(SUBMIT_BUY).unwrap();
    let m = cpn.empty_marking();
    let b = bind(&[("b", Value::from("b1"))]);
    assert!(cpn.enabled(&m, t1, &b).is_err());
}

#[test]
fn identity_transfer() {
    let cpn = build_reference_model();
    let t1 = cpn.transition_by_activity(SUBMIT_BUY).unwrap();
    let mut m = cpn.empty_marking();
    let tok = order_token("b1", 1, 22.0, 5);
    m.add(place(&cpn, "p1"), tok.clone());
    let b = bind(&[
        ("b", Value::from("b1")),
        ("ts", Value::Nat(1)),
        ("pr", Value::Real(22.0)),
        ("q", Value::Nat(5)),
    ]);
    let next = cpn.fire(&m, t1, &b).unwrap();
    assert_eq!(next.tokens(place(&cpn, "p3")), &[tok]);
    assert!(next.tokens(place(&cpn, "p1")).is_empty());
}

#[test]
fn trade1_moves_both_to_sinks() {
    let cpn = build_reference_model();
    let t5 = cpn.transition_by_activity(TRADE1).unwrap();
    let mut m = cpn.empty_marking();
    m.add(place(&cpn, "p5"), order_token("b", 1, 10.0, 2));
    m.add(place(&cpn, "p6"), order_token("s", 2, 10.0, 2));
    let b = trade_binding(("b", 1, 10.0, 2), ("s", 2, 10.0, 2));
    let next = cpn.fire(&m, t5, &b).unwrap();
    assert_eq!(
        next.tokens(place(&cpn, "p7")),
        &[order_token("b", 1, 10.0, 0)]
    );
    assert_eq!(
        next.tokens(place(&cpn, "p8")),
        &[order_token("s", 2, 10.0, 0)]
    );
}

#[test]
fn negative_quantity_is_a_domain_error() {
    // trade2 with the sell larger than the buy
    let cpn = build_reference_model();
    let t6 = cpn.transition_by_activity(TRADE2).unwrap();
    let mut m = cpn.empty_marking();
    m.add(place(&cpn, "p5"), order_token("b1", 1, 22.0, 1));
    m.add(place(&cpn, "p6"), order_token("s1", 2, 21.0, 2));
    let b = trade_binding(("b1", 1, 22.0, 1), ("s1", 2, 21.0, 2));
    assert!(cpn.enabled(&m, t6, &b).unwrap());
    let err = cpn.fire(&m, t6, &b).unwrap_err();
    assert!(matches!(err, FireError::Eval { .. }), "{err}");
}

#[test]
fn duplicate_activity_label() {
    let mut file = reference_model_file();
    file.transitions.push(TransitionDef {
        id: "t10".into(),
        activity: TRADE1.into(),
        priority: Default::default(),
    });
    let cpn = file.build().unwrap();
    let r = validate_syntax(&cpn);
    assert!(r.has(ViolationKind::DuplicateActivity));
    assert!(r.to_string().contains("duplicate activity label"));
}

#[test]
fn short_expression_into_four_component_color() {
    let mut file = reference_model_file();
    file.arcs[0].expr = "(b,ts,pr)".into();
    let cpn = file.build().unwrap();
    let r = validate_syntax(&cpn);
    assert!(r.has(ViolationKind::ExpressionColor));
    assert!(r.to_string().contains("expression color mismatch"));
}

#[test]
fn each_mutant_breaks_exactly_its_condition() {
    for (condition, file) in mutant_models() {
        let cpn = file.build().unwrap();
        assert!(
            validate_syntax(&cpn).is_valid(),
            "mutant {condition}: {}",
            validate_syntax(&cpn)
        );
        let r = validate_conservative_workflow(&cpn);
        assert!(
            r.has(ViolationKind::Condition(condition)),
            "mutant {condition}: {r}"
        );
        for other in (1..=4).filter(|&c| c != condition) {
            assert!(
                !r.has(ViolationKind::Condition(other)),
                "mutant {condition} also breaks {other}: {r}"
            );
        }
        assert!(r
            .to_string()
            .contains(&format!("condition {condition} violated")));
    }
}

#[test]
fn unreachable_sink_breaks_condition_3() {
    // cancel buy no longer leads to p7, and trade outputs go elsewhere
    let mut file = reference_model_file();
    file.arcs.retain(|a| a.to != "p7");
    file.arcs.push(ArcDef {
        from: "t8".into(),
        to: "p3".into(),
        expr: "(b,ts,pr,q)".into(),
    });
    for t in ["t5", "t7"] {
        file.arcs.push(ArcDef {
            from: t.into(),
            to: "p3".into(),
            expr: "(b,ts1,pr1,0)".into(),
        });
    }
    let cpn = file.build().unwrap();
    let r = validate_conservative_workflow(&cpn);
    assert!(r.has(ViolationKind::Condition(3)), "{r}");
    assert!(r.to_string().contains("no path of OB places"));
}

#[test]
fn model_json_round_trip() {
    let file = reference_model_file();
    let text = file.to_json_pretty();
    assert_eq!(ModelFile::from_json(&text).unwrap(), file);
}

#[test]
fn bundled_model_matches_builtin() {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../models/reference_model.json"
    );
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text, reference_model_file().to_json_pretty());
}

#[test]
fn model_json_errors_carry_location() {
    let err = ModelFile::from_json("{\n  \"domains\": [,]\n}").unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("line 2"), "{msg}");
}
