mod common;

use common::*;
use cpnconf::eventlog::{check_trace, EventRecord, LogViolationKind, Trace};
use cpnconf::replay::{DeviationDetail, DeviationKind, ReplayError, Replayer};
use cpnconf::trading::*;
use cpnconf::value::Value;

#[test]
fn worked_example_deviations_in_order() {
    let cpn = build_reference_model();
    let r = Replayer::new(&cpn)
        .unwrap()
        .replay_trace(&sample_trace())
        .unwrap();

    let got: Vec<_> = r
        .deviations
        .iter()
        .map(|d| (d.kind(), d.event_seq, d.object_id.as_str()))
        .collect();
    assert_eq!(
        got,
        vec![
            (DeviationKind::ControlFlow, Some(5), "s2"),
            (DeviationKind::RuleViolation, Some(6), "s1"),
            (DeviationKind::ResourceCorrupted, Some(6), "b1"),
            (DeviationKind::NonproperTermination, None, "b1"),
            (DeviationKind::NonproperTermination, None, "s2"),
        ]
    );
    assert_eq!(
        r.deviations[0].detail,
        DeviationDetail::ControlFlow {
            from: "p2".into(),
            to: "p4".into()
        }
    );
    assert_eq!(
        r.deviations[1].detail,
        DeviationDetail::RuleViolation {
            place: "p6".into(),
            preceding: "s2".into()
        }
    );
    assert_eq!(
        r.deviations[2].detail,
        DeviationDetail::ResourceCorrupted {
            attribute: "qty".into(),
            expected: Value::Nat(3),
            observed: Value::Nat(4)
        }
    );
    assert_eq!(
        r.deviations[3].detail,
        DeviationDetail::NonproperTermination {
            resting: "p5".into(),
            sink: "p7".into()
        }
    );
    assert_eq!(
        r.deviations[4].detail,
        DeviationDetail::NonproperTermination {
            resting: "p6".into(),
            sink: "p8".into()
        }
    );
    assert_eq!((r.counters.jumps, r.counters.transfers), (3, 10));
    assert_eq!(r.fitness, 0.7);
}

#[test]
fn worked_example_descriptions() {
    let cpn = build_reference_model();
    let r = Replayer::new(&cpn)
        .unwrap()
        .replay_trace(&sample_trace())
        .unwrap();
    let text: Vec<_> = r
        .deviations
        .iter()
        .map(|d| d.description.as_str())
        .collect();
    assert_eq!(
        text[0],
        "s2 not in p4; jumped from p2 to execute new sell order"
    );
    assert_eq!(text[1], "s1 consumed from p6 before s2, which has priority");
    assert_eq!(text[2], "qty of b1 is 4, model expects 3");
    assert_eq!(text[3], "b1 rests in p5, not in sink p7");
}

#[test]
fn consistent_trade_quantity_removes_only_the_corruption() {
    let cpn = build_reference_model();
    let r = Replayer::new(&cpn)
        .unwrap()
        .replay_trace(&sample_trace_with(3))
        .unwrap();
    assert_eq!(r.count(DeviationKind::ResourceCorrupted), 0);
    assert_eq!(r.count(DeviationKind::ControlFlow), 1);
    assert_eq!(r.count(DeviationKind::RuleViolation), 1);
    assert_eq!(r.count(DeviationKind::NonproperTermination), 2);
    // corruption does not jump, so counters are unchanged
    assert_eq!((r.counters.jumps, r.counters.transfers), (3, 10));
}

#[test]
fn corrupted_value_is_carried_forward() {
    // after the trade b1 rests with qty 4 (observed), so cancelling it with
    // qty 4 is not another corruption
    let mut trace = sample_trace();
    trace
        .events
        .push(EventRecord::new(7, CANCEL_BUY, vec![buy("b1", 1, 22.0, 4)]));
    let cpn = build_reference_model();
    let r = Replayer::new(&cpn).unwrap().replay_trace(&trace).unwrap();
    assert_eq!(r.count(DeviationKind::ResourceCorrupted), 1);
    assert_eq!(r.count(DeviationKind::NonproperTermination), 1);
    assert_eq!((r.counters.jumps, r.counters.transfers), (2, 11));
}

#[test]
fn conforming_trace_is_fit() {
    let b1 = buy("b1", 1, 20.0, 2);
    let s1 = sell("s1", 2, 19.5, 2);
    let trace = Trace::new(
        "ok",
        vec![
            EventRecord::new(1, SUBMIT_BUY, vec![b1.clone()]),
            EventRecord::new(2, NEW_BUY, vec![b1]),
            EventRecord::new(3, SUBMIT_SELL, vec![s1.clone()]),
            EventRecord::new(4, NEW_SELL, vec![s1]),
            EventRecord::new(
                5,
                TRADE1,
                vec![buy("b1", 1, 20.0, 0), sell("s1", 2, 19.5, 0)],
            ),
        ],
    );
    let cpn = build_reference_model();
    let r = Replayer::new(&cpn).unwrap().replay_trace(&trace).unwrap();
    assert!(r.deviations.is_empty(), "{:?}", r.deviations);
    assert_eq!((r.counters.jumps, r.counters.transfers), (0, 8));
    assert_eq!(r.fitness, 1.0);
    assert_eq!(r.terminated_properly, 2);
}

#[test]
fn control_flow_precedes_rule_check_on_same_object() {
    // s2 skips both submission and new; its jump into p6 makes it the
    // consumed token, and s1 (better price) then precedes it
    let b1 = buy("b1", 1, 22.0, 1);
    let s1 = sell("s1", 2, 19.0, 1);
    let trace = Trace::new(
        "skip",
        vec![
            EventRecord::new(1, SUBMIT_BUY, vec![b1.clone()]),
            EventRecord::new(2, NEW_BUY, vec![b1]),
            EventRecord::new(3, SUBMIT_SELL, vec![s1.clone()]),
            EventRecord::new(4, NEW_SELL, vec![s1]),
            EventRecord::new(
                5,
                TRADE1,
                vec![buy("b1", 1, 22.0, 0), sell("s2", 3, 21.0, 0)],
            ),
        ],
    );
    let cpn = build_reference_model();
    let r = Replayer::new(&cpn).unwrap().replay_trace(&trace).unwrap();
    let kinds: Vec<_> = r
        .deviations
        .iter()
        .map(|d| (d.kind(), d.object_id.as_str()))
        .collect();
    assert_eq!(
        kinds,
        vec![
            (DeviationKind::ControlFlow, "s2"),
            (DeviationKind::RuleViolation, "s2"),
            (DeviationKind::NonproperTermination, "s1"),
        ]
    );
    assert_eq!(
        r.deviations[0].detail,
        DeviationDetail::ControlFlow {
            from: "p2".into(),
            to: "p6".into()
        }
    );
}

#[test]
fn unknown_activity_is_rejected_before_replay() {
    let mut trace = sample_trace();
    trace.events[2].activity = "amend sell order".into();
    let cpn = build_reference_model();
    let v = check_trace(&trace, &cpn);
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].kind, LogViolationKind::UnknownActivity);
    match Replayer::new(&cpn).unwrap().replay_trace(&trace) {
        Err(ReplayError::Syntax { violations, .. }) => assert_eq!(violations, v),
        other => panic!("expected a syntax error, got {other:?}"),
    }
}

#[test]
fn empty_trace_has_fitness_one() {
    let cpn = build_reference_model();
    let r = Replayer::new(&cpn)
        .unwrap()
        .replay_trace(&Trace::new("e", vec![]))
        .unwrap();
    assert_eq!(r.fitness, 1.0);
    assert_eq!(r.counters.transfers, 0);
}

#[test]
fn free_function_matches_replayer() {
    let cpn = build_reference_model();
    let a = cpnconf::replay_trace(&cpn, &sample_trace()).unwrap();
    let b = Replayer::new(&cpn)
        .unwrap()
        .replay_trace(&sample_trace())
        .unwrap();
    assert_eq!(a, b);
}

#[test]
fn quantity_the_model_cannot_represent_is_a_corruption() {
    // trade2 says the buy is larger, but the model holds a smaller buy:
    // q1 - q2 is negative, so the event's quantity is taken instead
    let b1 = buy("b1", 1, 22.0, 1);
    let s1 = sell("s1", 2, 21.0, 2);
    let trace = Trace::new(
        "neg",
        vec![
            EventRecord::new(1, SUBMIT_BUY, vec![b1.clone()]),
            EventRecord::new(2, NEW_BUY, vec![b1]),
            EventRecord::new(3, SUBMIT_SELL, vec![s1.clone()]),
            EventRecord::new(4, NEW_SELL, vec![s1]),
            EventRecord::new(
                5,
                TRADE2,
                vec![buy("b1", 1, 22.0, 0), sell("s1", 2, 21.0, 0)],
            ),
            EventRecord::new(6, CANCEL_BUY, vec![buy("b1", 1, 22.0, 0)]),
        ],
    );
    let cpn = build_reference_model();
    let r = Replayer::new(&cpn).unwrap().replay_trace(&trace).unwrap();
    assert_eq!(r.deviations.len(), 1, "{:?}", r.deviations);
    assert_eq!(
        r.deviations[0].detail,
        DeviationDetail::ResourceCorrupted {
            attribute: "qty".into(),
            expected: Value::Real(-1.0),
            observed: Value::Nat(0)
        }
    );
    assert_eq!(r.fitness, 1.0);
}
