//! Hybrid Petri net engine for entity-transfer networks.
//!
//! The crate covers the net model ([`net`]), the instantaneous speed solver
//! ([`solver`]), the event-driven piecewise-linear simulator
//! ([`simulator`]), the decision loop that searches priority
//! configurations against a delivery deadline ([`dss`]), and a small
//! directory-backed repository for models, scenarios and reports.

pub mod compose;
pub mod document;
pub mod dss;
pub mod fixtures;
pub mod net;
pub mod oracle;
pub mod repository;
pub mod scalar;
pub mod scenario;
pub mod simulator;
pub mod solver;
mod structure;

pub use compose::{compose, ComposeError, ElementRef, Fusion};
pub use document::SchemaError;
pub use net::{
    validate, ArcDef, ConflictPolicy, HybridMarking, HybridNet, Id, MaxSpeed, PlaceDef, PlaceKind,
    PolicyMode, ShareEntry, TransitionDef, TransitionKind, Validation, Valuation, Violation,
    ViolationKind,
};
pub use scalar::{Exact, Scalar};
pub use scenario::{ScenarioConfig, ScenarioError, SpeedSchedule, Target};
pub use simulator::{
    marking_at, next_event, simulate, trace_csv, Event, EventContext, EventKind, Outcome, Phase,
    SimulationError, Trace,
};
pub use solver::{balances, enabling, solve_speeds, BalanceVector, Enabling, EnablingState, SolveError, SpeedVector};
