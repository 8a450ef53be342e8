#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use slacktune_core::circuit::{Angle, Cycles, Gate, GateKind, IdleWindow, TimedCircuit};
use slacktune_core::mitigation::{apply_config, max_rounds, DDKind, MitigationConfig, WindowSetting};
use slacktune_core::noise::{DetuningMode, GateErrors, NoiseModel, QubitNoise};

/// A random dependency-ordered gate list. With `n_params > 0` some
/// rotations refer to parameter slots.
pub fn random_gates(rng: &mut ChaCha8Rng, n: usize, len: usize, n_params: usize, measure: bool) -> Vec<Gate> {
    let mut gates = Vec::with_capacity(len + n);
    for _ in 0..len {
        let q = rng.random_range(0..n);
        let angle = |rng: &mut ChaCha8Rng| {
            if n_params > 0 && rng.random_bool(0.5) {
                Angle::Param(rng.random_range(0..n_params))
            } else {
                Angle::Value(rng.random_range(-PI..PI))
            }
        };
        let kind = match rng.random_range(0..10) {
            0 => GateKind::H,
            1 => GateKind::X,
            2 => GateKind::Y,
            3 => GateKind::Z,
            4 => GateKind::Rx(angle(rng)),
            5 => GateKind::Ry(angle(rng)),
            6 => GateKind::Rz(angle(rng)),
            7 => GateKind::Delay(rng.random_range(1..30)),
            _ if n > 1 => {
                let mut t = rng.random_range(0..n - 1);
                if t >= q {
                    t += 1;
                }
                gates.push(Gate::cx(q, t));
                continue;
            }
            _ => GateKind::H,
        };
        gates.push(Gate::one(kind, q));
    }
    if measure {
        gates.extend((0..n).map(|q| Gate::one(GateKind::Measure, q)));
    }
    gates
}

pub fn random_qubit_noise(rng: &mut ChaCha8Rng) -> QubitNoise {
    let t1 = rng.random_range(20e-6..200e-6);
    QubitNoise {
        t1,
        t2: rng.random_range(0.2..2.0) * t1,
        detuning: match rng.random_range(0..3) {
            0 => DetuningMode::None,
            1 => DetuningMode::Systematic,
            _ => DetuningMode::QuasiStatic,
        },
        omega: rng.random_range(-2.0 * PI * 20e3..2.0 * PI * 20e3),
        sigma: rng.random_range(0.0..2.0 * PI * 10e3),
        p01: rng.random_range(0.0..0.05),
        p10: rng.random_range(0.0..0.05),
    }
}

pub fn random_noise(rng: &mut ChaCha8Rng, n: usize) -> NoiseModel {
    let qubits = (0..n).map(|_| random_qubit_noise(rng)).collect();
    NoiseModel {
        qubits,
        gate_error: GateErrors {
            one_qubit: rng.random_range(0.0..0.01),
            two_qubit: rng.random_range(0.0..0.05),
            per_kind: Default::default(),
        },
        ..NoiseModel::default()
    }
}

/// A random per-window setting for every window; settings that cannot be
/// placed fall back to baseline so the result always applies.
pub fn random_config(rng: &mut ChaCha8Rng, tc: &TimedCircuit, windows: &[IdleWindow]) -> MitigationConfig {
    let mut cfg = MitigationConfig::baseline(windows);
    for (i, w) in windows.iter().enumerate() {
        let kind = DDKind::ALL[rng.random_range(0..3)];
        let fraction = if rng.random_bool(0.5) {
            rng.random_range(0..=8) as f64 / 8.0
        } else {
            1.0
        };
        let max = max_rounds(tc, w, kind);
        let rounds = if max > 0 && rng.random_bool(0.7) {
            rng.random_range(1..=max)
        } else {
            0
        };
        let s = WindowSetting::baseline(w).with_fraction(fraction);
        let s = if rounds > 0 { s.with_dd(kind, rounds) } else { s };
        let mut trial = cfg.clone();
        trial.windows[i] = s;
        if apply_config(tc, windows, &trial).is_ok() {
            cfg = trial;
        } else {
            let mut dd_only = cfg.clone();
            dd_only.windows[i] = WindowSetting::baseline(w).with_dd(kind, rounds);
            if rounds > 0 && apply_config(tc, windows, &dd_only).is_ok() {
                cfg = dd_only;
            }
        }
    }
    cfg
}

pub fn random_params(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-PI..=PI)).collect()
}

/// Per-qubit idle runs found by scanning every cycle of the timeline.
pub fn brute_force_windows(tc: &TimedCircuit, min_len: Cycles) -> Vec<(usize, Cycles, Cycles)> {
    let horizon = tc.makespan();
    let mut out = Vec::new();
    for q in 0..tc.n_qubits {
        let busy: Vec<bool> = (0..horizon)
            .map(|t| {
                tc.gates
                    .iter()
                    .any(|g| g.acts_on(q) && !g.kind.is_delay() && g.start <= t && t < g.end())
            })
            .collect();
        let first = busy.iter().position(|&b| b);
        let last = busy.iter().rposition(|&b| b);
        let (Some(first), Some(last)) = (first, last) else {
            continue;
        };
        let mut t = first;
        while t <= last {
            if busy[t] {
                t += 1;
                continue;
            }
            let s = t;
            while !busy[t] {
                t += 1;
            }
            if (t - s) as Cycles >= min_len.max(1) {
                out.push((q, s as Cycles, t as Cycles));
            }
        }
    }
    out
}
