//! Single-qubit micro-benchmarks for gate positioning and DD round sweeps.

use serde::{Deserialize, Serialize};

use crate::circuit::{
    extract_idle_windows, schedule_alap, shift_boundary_gate, Cycles, DurationTable, Gate, GateKind, IdleWindow,
    TimedCircuit,
};
use crate::error::{Error, Result};
use crate::mitigation::{insert_dd, max_rounds, DDKind};
use crate::noise::NoiseModel;
use crate::sim::{evolve, hellinger_fidelity, ideal_distribution, measure_distribution};
use crate::tuner::fraction_grid;

/// Idle cycles between the first H and the X of the spin-echo benchmark.
pub const SPIN_ECHO_DELAY: Cycles = 799;

/// Window length of the DD round-sweep benchmark.
pub const DD_WINDOW: Cycles = 300;

/// H, 799 idle cycles, X, H, MEASURE on one qubit. Ideally reads 0.
pub fn spin_echo_circuit(durations: &DurationTable) -> Result<TimedCircuit> {
    let gates = [
        Gate::one(GateKind::H, 0),
        Gate::one(GateKind::Delay(SPIN_ECHO_DELAY), 0),
        Gate::one(GateKind::X, 0),
        Gate::one(GateKind::H, 0),
        Gate::one(GateKind::Measure, 0),
    ];
    schedule_alap(1, &gates, vec![], durations)
}

/// H, `window` idle cycles, H, MEASURE on one qubit. Ideally reads 0.
pub fn dd_circuit(durations: &DurationTable, window: Cycles) -> Result<TimedCircuit> {
    let gates = [
        Gate::one(GateKind::H, 0),
        Gate::one(GateKind::Delay(window), 0),
        Gate::one(GateKind::H, 0),
        Gate::one(GateKind::Measure, 0),
    ];
    schedule_alap(1, &gates, vec![], durations)
}

fn only_window(tc: &TimedCircuit) -> Result<IdleWindow> {
    extract_idle_windows(tc, 1)
        .into_iter()
        .next()
        .ok_or_else(|| Error::InvalidCircuit("benchmark circuit has no idle window".into()))
}

/// Hellinger fidelity of the noisy output of `tc` against its ideal output.
pub fn output_fidelity(tc: &TimedCircuit, noise: &NoiseModel, realizations: usize, seed: u64) -> Result<f64> {
    let ideal = ideal_distribution(tc, &[])?;
    let rho = evolve(tc, &[], noise, realizations, seed)?;
    Ok(hellinger_fidelity(&measure_distribution(&rho, noise), &ideal))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionPoint {
    pub fraction: f64,
    /// Idle cycles before the moved gate.
    pub offset: Cycles,
    pub fidelity: f64,
}

/// Moves the X of the spin-echo circuit across its window.
pub fn spin_echo_sweep(noise: &NoiseModel, positions: usize, realizations: usize, seed: u64) -> Result<Vec<PositionPoint>> {
    let tc = spin_echo_circuit(&noise.durations)?;
    let w = only_window(&tc)?;
    fraction_grid(positions)
        .into_iter()
        .map(|f| {
            let moved = shift_boundary_gate(&tc, &w, f)?;
            let x = moved
                .gates
                .iter()
                .find(|g| g.kind == GateKind::X)
                .expect("echo pulse present");
            Ok(PositionPoint {
                fraction: f,
                offset: x.start - w.start,
                fidelity: output_fidelity(&moved, noise, realizations, seed)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundsPoint {
    pub rounds: usize,
    pub fidelity: f64,
}

/// Fills the DD benchmark window with 0..=max rounds of `kind`.
pub fn dd_sweep(noise: &NoiseModel, kind: DDKind, window: Cycles, realizations: usize, seed: u64) -> Result<Vec<RoundsPoint>> {
    let tc = dd_circuit(&noise.durations, window)?;
    let w = only_window(&tc)?;
    (0..=max_rounds(&tc, &w, kind))
        .map(|r| {
            let circuit = if r == 0 { tc.clone() } else { insert_dd(&tc, &w, kind, r)? };
            Ok(RoundsPoint {
                rounds: r,
                fidelity: output_fidelity(&circuit, noise, realizations, seed)?,
            })
        })
        .collect()
}
