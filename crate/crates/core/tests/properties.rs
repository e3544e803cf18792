mod common;

use common::*;
use cpnconf::eventlog::Trace;
use cpnconf::net::FireError;
use cpnconf::priority::{check_priority, LocalRule, PriorityRule};
use cpnconf::replay::{ReplayError, Replayer};
use cpnconf::trading::*;
use cpnconf::validate::validate_all;
use cpnconf::value::Value;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_nets_are_valid_and_conserve_identifiers(seed in any::<u64>()) {
        let mut r = rng(seed);
        let file = random_valid_model(&mut r, 3);
        let cpn = file.build().unwrap();
        let report = validate_all(&cpn);
        prop_assert!(report.is_valid(), "{}", report);
        let ids = cpn.initial_marking.identifiers();
        for m in random_firing_sequence(&cpn, &mut r, 40) {
            prop_assert_eq!(m.identifiers(), ids.clone());
        }
    }

    #[test]
    fn firing_a_disabled_transition_fails(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cpn = random_valid_model(&mut r, 2).build().unwrap();
        let m = cpn.initial_marking.clone();
        for t in 0..cpn.transitions.len() {
            let toks: Vec<_> = cpn
                .input_arcs(t)
                .iter()
                .filter_map(|&a| m.tokens(cpn.arc_place(a)).first())
                .collect();
            if toks.len() != cpn.input_arcs(t).len() {
                continue;
            }
            let mut b = cpn.bind_inputs(t, &toks).unwrap();
            // shift one numeric attribute so no token matches
            let var = b.keys().find(|k| k.starts_with('n')).cloned().unwrap();
            let Value::Nat(n) = b[&var] else { unreachable!() };
            b.insert(var, Value::Nat(n + 1000));
            prop_assert!(!cpn.enabled(&m, t, &b).unwrap());
            let disabled = matches!(cpn.fire(&m, t, &b), Err(FireError::NotEnabled { .. }));
            prop_assert!(disabled);
        }
    }

    #[test]
    fn comparator_agrees_with_brute_force(seed in any::<u64>(), buy_side in any::<bool>()) {
        let mut r = rng(seed);
        let cpn = build_reference_model();
        let (place, color) = if buy_side { ("p5", BUY_COLOR) } else { ("p6", SELL_COLOR) };
        let p = cpn.place(place).unwrap();
        let color = &cpn.colors[cpn.color_by_name(color).unwrap()];
        let rule = PriorityRule {
            local: [(p, if buy_side { LocalRule::price_time_buy() } else { LocalRule::price_time_sell() })]
                .into_iter()
                .collect(),
        };
        let book = random_book(&mut r);
        let candidate = &book[r.gen_range(0..book.len())];
        let got = check_priority(&rule, p, color, &book, candidate).unwrap();
        prop_assert_eq!(got, oracle_violates(&book, candidate, buy_side));
    }

    #[test]
    fn fitness_stays_in_unit_interval_on_fuzzed_traces(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cfg = SimConfig { traces: 1, seed, ..SimConfig::default() };
        let (trace, _) = generate_trace(&cfg, 0);
        let fuzzed = fuzz(trace, &mut r);
        let cpn = build_reference_model();
        match Replayer::new(&cpn).unwrap().replay_trace(&fuzzed) {
            Ok(res) => {
                prop_assert!((0.0..=1.0).contains(&res.fitness));
                prop_assert!(res.counters.jumps <= res.counters.transfers);
            }
            Err(ReplayError::Syntax { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected error {}", e),
        }
    }
}

/// Drops, duplicates and reorders events and perturbs quantities, keeping
/// sequence numbers increasing.
fn fuzz(mut trace: Trace, r: &mut impl Rng) -> Trace {
    let n = trace.events.len();
    for _ in 0..r.gen_range(0..=n / 2) {
        if trace.events.is_empty() {
            break;
        }
        let i = r.gen_range(0..trace.events.len());
        match r.gen_range(0..4) {
            0 => {
                trace.events.remove(i);
            }
            1 => {
                let e = trace.events[i].clone();
                trace.events.insert(i, e);
            }
            2 => {
                let j = r.gen_range(0..trace.events.len());
                trace.events.swap(i, j);
            }
            _ => {
                let obj = &mut trace.events[i].objects[0];
                obj.values[3] = Value::Nat(r.gen_range(0..6));
            }
        }
    }
    for (k, e) in trace.events.iter_mut().enumerate() {
        e.seq = k as u64 + 1;
    }
    trace
}
