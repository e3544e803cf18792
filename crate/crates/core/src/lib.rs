//! Conformance checking of object-centric event logs against
//! conservative-workflow colored Petri nets.
//!
//! The pipeline: load a net ([`model`]), validate it ([`validate`]), read a
//! log ([`eventlog`]), replay each trace ([`replay`]) and aggregate the
//! results into model diagnostics ([`diagnostics`]). [`trading`] provides a
//! reference order-book net and a log generator for it.

pub mod diagnostics;
pub mod eventlog;
pub mod expr;
pub mod model;
pub mod net;
pub mod priority;
pub mod replay;
pub mod report;
pub mod trading;
pub mod validate;
pub mod value;

pub use eventlog::{EventLog, EventRecord, ObjectState, Trace};
pub use model::{load_model, ModelFile};
pub use net::{Cpn, Marking, Token};
pub use replay::{replay_trace, DeviationKind, DeviationRecord, ReplayResult, Replayer};
pub use value::Value;
