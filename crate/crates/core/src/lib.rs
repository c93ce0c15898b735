//! Gate-level simulation and cycle-time analysis of dual-rail,
//! quasi-delay-insensitive ripple-carry adders.
//!
//! The crate is layered bottom-up:
//!
//! * [`dualrail`] – 1-of-2 encoding of bits and words
//! * [`netlist`] – typed gate graphs and their text format
//! * [`cells`] – gate semantics and delay tables
//! * [`sim`] – deterministic discrete-event engine
//! * [`adders`] – full-adder templates and ripple-carry cascades
//! * [`stage`] – register/completion-detector/synchronizer stages
//! * [`analysis`] – carry-chain stimuli, closed-form timing models, sweeps
//!   and indication classification

pub mod adders;
pub mod analysis;
pub mod cells;
pub mod dualrail;
pub mod netlist;
pub mod sim;
pub mod stage;

pub use adders::{build_full_adder, build_rca, AdderVariant, RcaDescriptor};
pub use cells::{default_delay_table, derive_pinned_delays, DelayTable, PinnedDelays};
pub use dualrail::{DualRailValue, DualRailWord, PairClass};
pub use netlist::{GateKind, Netlist};
pub use sim::{Circuit, EventTrace, Phase, Simulator};
pub use stage::{build_stage, Architecture, StageDescriptor, TransactionRecord};
