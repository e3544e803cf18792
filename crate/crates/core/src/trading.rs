//! Reference order-book net and a price-time-priority matching engine that
//! generates event logs for it, optionally with injected faults.
//!
//! Places: `p1`/`p2` buy/sell sources, `p3`/`p4` submitted orders, `p5`/`p6`
//! the two book sides, `p7`/`p8` buy/sell sinks. Transitions:
//!
//! | id | activity          | effect                                   |
//! |----|-------------------|------------------------------------------|
//! | t1 | submit buy order  | p1 -> p3                                 |
//! | t2 | submit sell order | p2 -> p4                                 |
//! | t3 | new buy order     | p3 -> p5                                 |
//! | t4 | new sell order    | p4 -> p6                                 |
//! | t5 | trade1            | both orders filled: p5,p6 -> p7,p8       |
//! | t6 | trade2            | sell filled, buy rests with q1-q2        |
//! | t7 | trade3            | buy filled, sell rests with q2-q1        |
//! | t8 | cancel buy order  | p5 -> p7                                 |
//! | t9 | cancel sell order | p6 -> p8                                 |
//!
//! Trades carry price-time priority on both book sides.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventlog::{EventLog, EventRecord, ObjectState, Trace};
use crate::model::{ArcDef, ColorDef, ModelFile, PlaceDef, RuleDef, TransitionDef};
use crate::net::{Cpn, PlaceRole};
use crate::priority::{PRICE_TIME_BUY, PRICE_TIME_SELL};
use crate::value::{DataDomain, DomainKind, Value};

pub const SUBMIT_BUY: &str = "submit buy order";
pub const SUBMIT_SELL: &str = "submit sell order";
pub const NEW_BUY: &str = "new buy order";
pub const NEW_SELL: &str = "new sell order";
pub const TRADE1: &str = "trade1";
pub const TRADE2: &str = "trade2";
pub const TRADE3: &str = "trade3";
pub const CANCEL_BUY: &str = "cancel buy order";
pub const CANCEL_SELL: &str = "cancel sell order";

pub const BUY_COLOR: &str = "OB";
pub const SELL_COLOR: &str = "OS";

/// Definition of the reference order-book net.
pub fn reference_model_file() -> ModelFile {
    let domain = |name: &str, kind| DataDomain {
        name: name.into(),
        kind,
    };
    let color = |name: &str, id_domain: &str| ColorDef {
        name: name.into(),
        domains: vec![id_domain.into(), "N".into(), "R+".into(), "N".into()],
        attributes: ["id", "tsub", "price", "qty"].map(String::from).to_vec(),
    };
    let place = |id: &str, color: &str, role| PlaceDef {
        id: id.into(),
        color: color.into(),
        role,
    };
    let book_rules: BTreeMap<String, RuleDef> = [
        ("p5".to_string(), RuleDef::Builtin(PRICE_TIME_BUY.into())),
        ("p6".to_string(), RuleDef::Builtin(PRICE_TIME_SELL.into())),
    ]
    .into_iter()
    .collect();
    let transition = |id: &str, activity: &str, rules: bool| TransitionDef {
        id: id.into(),
        activity: activity.into(),
        priority: if rules {
            book_rules.clone()
        } else {
            BTreeMap::new()
        },
    };
    let arc = |from: &str, to: &str, expr: &str| ArcDef {
        from: from.into(),
        to: to.into(),
        expr: expr.into(),
    };
    const BUY: &str = "(b,ts,pr,q)";
    const SELL: &str = "(s,ts,pr,q)";
    const BUY_IN: &str = "(b,ts1,pr1,q1)";
    const SELL_IN: &str = "(s,ts2,pr2,q2)";

    ModelFile {
        name: Some("order book".into()),
        domains: vec![
            domain("O_B", DomainKind::Identifier),
            domain("O_S", DomainKind::Identifier),
            domain("N", DomainKind::Natural),
            domain("R+", DomainKind::PositiveReal),
        ],
        colors: vec![color(BUY_COLOR, "O_B"), color(SELL_COLOR, "O_S")],
        places: vec![
            place("p1", BUY_COLOR, PlaceRole::Source),
            place("p2", SELL_COLOR, PlaceRole::Source),
            place("p3", BUY_COLOR, PlaceRole::Internal),
            place("p4", SELL_COLOR, PlaceRole::Internal),
            place("p5", BUY_COLOR, PlaceRole::Internal),
            place("p6", SELL_COLOR, PlaceRole::Internal),
            place("p7", BUY_COLOR, PlaceRole::Sink),
            place("p8", SELL_COLOR, PlaceRole::Sink),
        ],
        transitions: vec![
            transition("t1", SUBMIT_BUY, false),
            transition("t2", SUBMIT_SELL, false),
            transition("t3", NEW_BUY, false),
            transition("t4", NEW_SELL, false),
            transition("t5", TRADE1, true),
            transition("t6", TRADE2, true),
            transition("t7", TRADE3, true),
            transition("t8", CANCEL_BUY, false),
            transition("t9", CANCEL_SELL, false),
        ],
        arcs: vec![
            arc("p1", "t1", BUY),
            arc("t1", "p3", BUY),
            arc("p2", "t2", SELL),
            arc("t2", "p4", SELL),
            arc("p3", "t3", BUY),
            arc("t3", "p5", BUY),
            arc("p4", "t4", SELL),
            arc("t4", "p6", SELL),
            arc("p5", "t5", BUY_IN),
            arc("p6", "t5", SELL_IN),
            arc("t5", "p7", "(b,ts1,pr1,0)"),
            arc("t5", "p8", "(s,ts2,pr2,0)"),
            arc("p5", "t6", BUY_IN),
            arc("p6", "t6", SELL_IN),
            arc("t6", "p5", "(b,ts1,pr1,q1-q2)"),
            arc("t6", "p8", "(s,ts2,pr2,0)"),
            arc("p5", "t7", BUY_IN),
            arc("p6", "t7", SELL_IN),
            arc("t7", "p7", "(b,ts1,pr1,0)"),
            arc("t7", "p6", "(s,ts2,pr2,q2-q1)"),
            arc("p5", "t8", BUY),
            arc("t8", "p7", BUY),
            arc("p6", "t9", SELL),
            arc("t9", "p8", SELL),
        ],
        initial_marking: BTreeMap::new(),
    }
}

/// The reference order-book net.
pub fn build_reference_model() -> Cpn {
    reference_model_file()
        .build()
        .expect("reference model definition is well-formed")
}

/// Per-side probability.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideRates {
    #[serde(default)]
    pub buy: f64,
    #[serde(default)]
    pub sell: f64,
}

/// Log generator settings. `Default` is the faulty-system setup: half of the
/// orders on each side skip submission and a fifth of the new sell orders
/// get stuck.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub traces: usize,
    pub buy_orders_per_trace: usize,
    pub sell_orders_per_trace: usize,
    /// Inclusive price bounds; prices are drawn uniformly on the tick grid.
    pub price_min: f64,
    pub price_max: f64,
    pub price_tick: f64,
    /// Inclusive quantity bounds.
    pub qty_min: u64,
    pub qty_max: u64,
    pub seed: u64,
    /// Orders that enter the book without a submission event.
    pub skip_submission_rate: SideRates,
    /// Sell orders that stop after entering the book.
    pub sell_deadlock_rate: f64,
    /// Trade events whose emitted objects carry a perturbed price.
    pub corruption_rate: f64,
    /// Trades that take a crossing order other than the best one.
    pub rule_violation_rate: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            traces: 100,
            buy_orders_per_trace: 10,
            sell_orders_per_trace: 10,
            price_min: 18.0,
            price_max: 22.0,
            price_tick: 0.5,
            qty_min: 1,
            qty_max: 3,
            seed: 42,
            skip_submission_rate: SideRates {
                buy: 0.5,
                sell: 0.5,
            },
            sell_deadlock_rate: 0.2,
            corruption_rate: 0.0,
            rule_violation_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{name} = {value} is not a probability in [0, 1]")]
    Rate { name: &'static str, value: f64 },
    #[error("invalid price grid: min {min}, max {max}, tick {tick}")]
    PriceGrid { min: f64, max: f64, tick: f64 },
    #[error("invalid quantity range {min}..={max} (minimum must be at least 1)")]
    QtyRange { min: u64, max: u64 },
}

impl SimConfig {
    /// Same volumes and value ranges with every fault rate at zero.
    pub fn faithful() -> Self {
        SimConfig {
            skip_submission_rate: SideRates::default(),
            sell_deadlock_rate: 0.0,
            corruption_rate: 0.0,
            rule_violation_rate: 0.0,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [
            ("skip_submission_rate.buy", self.skip_submission_rate.buy),
            ("skip_submission_rate.sell", self.skip_submission_rate.sell),
            ("sell_deadlock_rate", self.sell_deadlock_rate),
            ("corruption_rate", self.corruption_rate),
            ("rule_violation_rate", self.rule_violation_rate),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::Rate { name, value });
            }
        }
        let grid_ok = self.price_tick > 0.0
            && self.price_min > 0.0
            && self.price_max >= self.price_min
            && self.price_tick.is_finite()
            && self.price_max.is_finite();
        if !grid_ok {
            return Err(ConfigError::PriceGrid {
                min: self.price_min,
                max: self.price_max,
                tick: self.price_tick,
            });
        }
        if self.qty_min == 0 || self.qty_max < self.qty_min {
            return Err(ConfigError::QtyRange {
                min: self.qty_min,
                max: self.qty_max,
            });
        }
        Ok(())
    }

    fn header(&self) -> String {
        format!(
            "generator seed={} config={}",
            self.seed,
            serde_json::to_string(self).expect("config serializes")
        )
    }
}

/// Counts of faults injected while generating.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injections {
    pub skipped_submissions_buy: u64,
    pub skipped_submissions_sell: u64,
    pub deadlocks: u64,
    pub corruptions: u64,
    pub rule_violations: u64,
}

impl Injections {
    pub fn skipped_submissions(&self) -> u64 {
        self.skipped_submissions_buy + self.skipped_submissions_sell
    }

    fn merge(mut self, o: Injections) -> Injections {
        self.skipped_submissions_buy += o.skipped_submissions_buy;
        self.skipped_submissions_sell += o.skipped_submissions_sell;
        self.deadlocks += o.deadlocks;
        self.corruptions += o.corruptions;
        self.rule_violations += o.rule_violations;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Buy,
    Sell,
}

#[derive(Debug, Clone)]
struct Order {
    id: String,
    side: Side,
    tsub: u64,
    /// Price in ticks; the emitted price is `ticks * tick`.
    ticks: u64,
    qty: u64,
}

impl Order {
    fn object(&self, tick: f64) -> ObjectState {
        self.object_with_ticks(self.ticks, tick)
    }

    fn object_with_ticks(&self, ticks: u64, tick: f64) -> ObjectState {
        let color = match self.side {
            Side::Buy => BUY_COLOR,
            Side::Sell => SELL_COLOR,
        };
        ObjectState::new(
            color,
            vec![
                Value::Str(self.id.clone()),
                Value::Nat(self.tsub),
                Value::Real(ticks as f64 * tick),
                Value::Nat(self.qty),
            ],
        )
    }

    /// Price-time priority: `true` if `self` is served before `other`.
    fn precedes(&self, other: &Order) -> bool {
        let better_price = match self.side {
            Side::Buy => self.ticks > other.ticks,
            Side::Sell => self.ticks < other.ticks,
        };
        better_price || (self.ticks == other.ticks && self.tsub < other.tsub)
    }
}

struct Engine<'c> {
    cfg: &'c SimConfig,
    rng: ChaCha8Rng,
    events: Vec<EventRecord>,
    buys: Vec<Order>,
    sells: Vec<Order>,
    inj: Injections,
}

impl Engine<'_> {
    fn emit(&mut self, activity: &str, objects: Vec<ObjectState>) {
        let seq = self.events.len() as u64 + 1;
        let secs = 9 * 3600 + 30 * 60 + seq;
        let ts = format!("{:02}:{:02}:{:02}", secs / 3600, secs / 60 % 60, secs % 60);
        self.events
            .push(EventRecord::new(seq, activity, objects).with_timestamp(ts));
    }

    fn best(book: &[Order]) -> Option<usize> {
        (0..book.len()).reduce(|a, b| if book[b].precedes(&book[a]) { b } else { a })
    }

    fn arrive(&mut self, order: Order) {
        let tick = self.cfg.price_tick;
        let (skip_rate, submit, new) = match order.side {
            Side::Buy => (self.cfg.skip_submission_rate.buy, SUBMIT_BUY, NEW_BUY),
            Side::Sell => (self.cfg.skip_submission_rate.sell, SUBMIT_SELL, NEW_SELL),
        };
        if self.rng.gen_bool(skip_rate) {
            match order.side {
                Side::Buy => self.inj.skipped_submissions_buy += 1,
                Side::Sell => self.inj.skipped_submissions_sell += 1,
            }
        } else {
            self.emit(submit, vec![order.object(tick)]);
        }
        self.emit(new, vec![order.object(tick)]);
        if order.side == Side::Sell && self.rng.gen_bool(self.cfg.sell_deadlock_rate) {
            self.inj.deadlocks += 1;
            return;
        }
        match order.side {
            Side::Buy => self.buys.push(order),
            Side::Sell => self.sells.push(order),
        }
        self.match_book();
    }

    /// Picks the order to trade from one side: the best one, or with the
    /// configured rate another order that also crosses a counterparty priced
    /// at `counter_ticks`.
    fn pick(&mut self, side: Side, counter_ticks: u64, best: usize) -> usize {
        let book = match side {
            Side::Buy => &self.buys,
            Side::Sell => &self.sells,
        };
        let alternatives: Vec<usize> = (0..book.len())
            .filter(|&i| i != best)
            .filter(|&i| match side {
                Side::Buy => book[i].ticks >= counter_ticks,
                Side::Sell => book[i].ticks <= counter_ticks,
            })
            .filter(|&i| book[best].precedes(&book[i]))
            .collect();
        if alternatives.is_empty() || !self.rng.gen_bool(self.cfg.rule_violation_rate) {
            return best;
        }
        self.inj.rule_violations += 1;
        *alternatives.choose(&mut self.rng).expect("non-empty")
    }

    fn match_book(&mut self) {
        let tick = self.cfg.price_tick;
        loop {
            let (Some(bb), Some(bs)) = (Self::best(&self.buys), Self::best(&self.sells)) else {
                return;
            };
            if self.buys[bb].ticks < self.sells[bs].ticks {
                return;
            }
            let (bi, si) = if self.rng.gen_bool(0.5) {
                let bi = self.pick(Side::Buy, self.sells[bs].ticks, bb);
                (bi, self.pick(Side::Sell, self.buys[bi].ticks, bs))
            } else {
                let si = self.pick(Side::Sell, self.buys[bb].ticks, bs);
                (self.pick(Side::Buy, self.sells[si].ticks, bb), si)
            };
            let filled = self.buys[bi].qty.min(self.sells[si].qty);
            self.buys[bi].qty -= filled;
            self.sells[si].qty -= filled;
            let (buy_done, sell_done) = (self.buys[bi].qty == 0, self.sells[si].qty == 0);
            let activity = match (buy_done, sell_done) {
                (true, true) => TRADE1,
                (false, true) => TRADE2,
                (true, false) => TRADE3,
                (false, false) => unreachable!("a trade fills at least one order"),
            };
            let mut objects = vec![self.buys[bi].object(tick), self.sells[si].object(tick)];
            if self.rng.gen_bool(self.cfg.corruption_rate) {
                self.inj.corruptions += 1;
                let which = self.rng.gen_range(0..2);
                let order = if which == 0 {
                    &self.buys[bi]
                } else {
                    &self.sells[si]
                };
                objects[which] = order.object_with_ticks(order.ticks + 1, tick);
            }
            self.emit(activity, objects);
            if sell_done {
                self.sells.remove(si);
            }
            if buy_done {
                self.buys.remove(bi);
            }
        }
    }

    fn close(&mut self) {
        let tick = self.cfg.price_tick;
        let mut buys = std::mem::take(&mut self.buys);
        buys.sort_by_key(|o| o.tsub);
        for o in buys {
            self.emit(CANCEL_BUY, vec![o.object(tick)]);
        }
        let mut sells = std::mem::take(&mut self.sells);
        sells.sort_by_key(|o| o.tsub);
        for o in sells {
            self.emit(CANCEL_SELL, vec![o.object(tick)]);
        }
    }
}

fn trace_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Generates one trace (one order book for one day).
pub fn generate_trace(cfg: &SimConfig, index: usize) -> (Trace, Injections) {
    let mut rng = trace_rng(cfg.seed, index);
    let mut sides: Vec<Side> = std::iter::repeat_n(Side::Buy, cfg.buy_orders_per_trace)
        .chain(std::iter::repeat_n(Side::Sell, cfg.sell_orders_per_trace))
        .collect();
    sides.shuffle(&mut rng);
    let lo = (cfg.price_min / cfg.price_tick).round() as u64;
    let hi = ((cfg.price_max / cfg.price_tick).round() as u64).max(lo);
    let (mut nb, mut ns) = (0, 0);
    let orders: Vec<Order> = sides
        .into_iter()
        .enumerate()
        .map(|(i, side)| {
            let id = match side {
                Side::Buy => {
                    nb += 1;
                    format!("b{nb}")
                }
                Side::Sell => {
                    ns += 1;
                    format!("s{ns}")
                }
            };
            Order {
                id,
                side,
                tsub: i as u64 + 1,
                ticks: rng.gen_range(lo..=hi),
                qty: rng.gen_range(cfg.qty_min..=cfg.qty_max),
            }
        })
        .collect();
    let mut engine = Engine {
        cfg,
        rng,
        events: Vec::new(),
        buys: Vec::new(),
        sells: Vec::new(),
        inj: Injections::default(),
    };
    for o in orders {
        engine.arrive(o);
    }
    engine.close();
    (
        Trace::new(format!("ob{:03}", index + 1), engine.events),
        engine.inj,
    )
}

/// Generates a log and the counts of injected faults. Deterministic per seed
/// regardless of thread count.
pub fn generate(cfg: &SimConfig) -> Result<(EventLog, Injections), ConfigError> {
    cfg.validate()?;
    #[cfg(feature = "parallel")]
    let traces: Vec<(Trace, Injections)> = {
        use rayon::prelude::*;
        (0..cfg.traces)
            .into_par_iter()
            .map(|i| generate_trace(cfg, i))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let traces: Vec<(Trace, Injections)> =
        (0..cfg.traces).map(|i| generate_trace(cfg, i)).collect();
    Ok(assemble(cfg, traces))
}

/// Single-threaded [`generate`].
pub fn generate_sequential(cfg: &SimConfig) -> Result<(EventLog, Injections), ConfigError> {
    cfg.validate()?;
    let traces = (0..cfg.traces).map(|i| generate_trace(cfg, i)).collect();
    Ok(assemble(cfg, traces))
}

fn assemble(cfg: &SimConfig, traces: Vec<(Trace, Injections)>) -> (EventLog, Injections) {
    let mut inj = Injections::default();
    let mut log = EventLog {
        comments: vec![cfg.header()],
        traces: Vec::with_capacity(traces.len()),
    };
    for (t, i) in traces {
        inj = inj.merge(i);
        if !t.events.is_empty() {
            log.traces.push(t);
        }
    }
    (log, inj)
}

pub fn generate_log(cfg: &SimConfig) -> Result<EventLog, ConfigError> {
    generate(cfg).map(|(log, _)| log)
}
