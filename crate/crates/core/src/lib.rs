//! Idle-window error mitigation tuned against a variational objective.
//!
//! Circuits are scheduled ALAP in integer cycles. Each idle window can hold
//! dynamical decoupling or a moved boundary gate, and the setting per window
//! is picked by sweeping the noisy energy on a density-matrix simulator.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod circuit;
pub mod error;
pub mod experiment;
pub mod harness;
pub mod linalg;
pub mod mitigation;
pub mod noise;
pub mod observables;
pub mod pauli;
pub mod qasm;
pub mod sim;
pub mod tuner;

pub use circuit::{Cycles, Gate, GateKind, IdleWindow, TimedCircuit};
pub use error::{Error, Result};
pub use noise::NoiseModel;
