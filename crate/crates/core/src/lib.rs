//! Synthesis, error-correction scheduling, mapping and evaluation of
//! fault-tolerant quantum circuits on an abstract ion-trap substrate.
//!
//! The flow is `circuit` → `qec` (selective correction placement) →
//! `mapper` (datapath layout and scheduling) → `errorsim` (Monte Carlo) →
//! `metrics`. `adders` and `shor` generate the benchmark circuits and the
//! factoring resource estimate.

pub mod circuit;
mod par;
pub mod qec;
pub mod tech;
pub use circuit::{Circuit, CircuitBuilder, Gate, GateKind, Qubit, QubitId, QubitKind};
pub mod adders;
pub mod datapath;
pub mod errorsim;
pub mod graph;
pub mod mapper;
pub mod metrics;
pub mod pipeline;
pub mod randgen;
pub mod shor;
