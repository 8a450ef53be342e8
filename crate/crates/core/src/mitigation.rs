//! Dynamical-decoupling insertion, boundary-gate repositioning and
//! measurement error mitigation.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    insert_in_window, movable_gate, schedule_alap, shift_boundary_gate, shifted_offset, Cycles,
    Gate, GateKind, IdleWindow, TimedCircuit,
};
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::observables::SimOptions;
use crate::sim::{evolve, measure_distribution, CountsDistribution};

/// Largest register calibrated with the full `2^n` matrix.
pub const MAX_FULL_MEM_QUBITS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DDKind {
    XX,
    YY,
    XY4,
}

impl DDKind {
    pub const ALL: [DDKind; 3] = [DDKind::XX, DDKind::YY, DDKind::XY4];

    pub fn pulses(self) -> &'static [GateKind] {
        match self {
            DDKind::XX => &[GateKind::X, GateKind::X],
            DDKind::YY => &[GateKind::Y, GateKind::Y],
            DDKind::XY4 => &[GateKind::X, GateKind::Y, GateKind::X, GateKind::Y],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DDKind::XX => "xx",
            DDKind::YY => "yy",
            DDKind::XY4 => "xy4",
        }
    }
}

impl fmt::Display for DDKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DDKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xx" => Ok(DDKind::XX),
            "yy" => Ok(DDKind::YY),
            "xy4" => Ok(DDKind::XY4),
            _ => Err(Error::Config(format!("unknown DD sequence {s:?}"))),
        }
    }
}

/// Whole sequences of `kind` that fit in `len` cycles.
pub fn max_rounds_in(len: Cycles, kind: DDKind, pulse_duration: Cycles) -> usize {
    (len / (kind.pulses().len() as Cycles * pulse_duration)) as usize
}

pub fn max_rounds(tc: &TimedCircuit, w: &IdleWindow, kind: DDKind) -> usize {
    max_rounds_in(w.len(), kind, tc.durations.single_qubit)
}

/// Start offsets of `m` pulses of length `d` spread over `len` cycles so all
/// `m + 1` gaps are as equal as integer cycles allow. Pulse `k` (1-based) goes
/// to `round(k·free/(m+1)) + (k−1)·d`, `free = len − m·d`.
pub fn dd_offsets(len: Cycles, m: usize, d: Cycles) -> Vec<Cycles> {
    let m = m as Cycles;
    let free = len - m * d;
    (1..=m)
        .map(|k| (2 * k * free + m + 1) / (2 * (m + 1)) + (k - 1) * d)
        .collect()
}

fn interval(qubit: usize, start: Cycles, end: Cycles) -> IdleWindow {
    IdleWindow {
        qubit,
        start,
        end,
        preceding: 0,
        following: 0,
    }
}

fn insert_rounds(tc: &TimedCircuit, w: &IdleWindow, kind: DDKind, rounds: usize) -> Result<TimedCircuit> {
    if rounds == 0 {
        return Ok(tc.clone());
    }
    let d = tc.durations.single_qubit;
    let pulses: Vec<GateKind> = kind.pulses().iter().copied().cycle().take(rounds * kind.pulses().len()).collect();
    let placed: Vec<(GateKind, Cycles)> = pulses
        .iter()
        .copied()
        .zip(dd_offsets(w.len(), pulses.len(), d))
        .collect();
    insert_in_window(tc, w, &placed)
}

/// Inserts `rounds` periodic repetitions of `kind` into `w`.
pub fn insert_dd(tc: &TimedCircuit, w: &IdleWindow, kind: DDKind, rounds: usize) -> Result<TimedCircuit> {
    let max = max_rounds(tc, w, kind);
    if rounds == 0 || rounds > max {
        return Err(Error::RoundsOutOfRange {
            kind: kind.to_string(),
            rounds,
            qubit: w.qubit,
            start: w.start,
            end: w.end,
        });
    }
    insert_rounds(tc, w, kind, rounds)
}

/// Mitigation applied to one idle window, keyed by its position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSetting {
    pub qubit: usize,
    pub start: Cycles,
    pub end: Cycles,
    pub kind: Option<DDKind>,
    pub rounds: usize,
    /// Position of the following gate inside the window; 1 is ALAP.
    pub fraction: f64,
}

impl WindowSetting {
    pub fn baseline(w: &IdleWindow) -> Self {
        Self {
            qubit: w.qubit,
            start: w.start,
            end: w.end,
            kind: None,
            rounds: 0,
            fraction: 1.0,
        }
    }

    pub fn is_baseline(&self) -> bool {
        (self.kind.is_none() || self.rounds == 0) && self.fraction == 1.0
    }

    pub fn matches(&self, w: &IdleWindow) -> bool {
        (self.qubit, self.start, self.end) == (w.qubit, w.start, w.end)
    }

    pub fn with_dd(mut self, kind: DDKind, rounds: usize) -> Self {
        self.kind = Some(kind);
        self.rounds = rounds;
        self
    }

    pub fn with_fraction(mut self, fraction: f64) -> Self {
        self.fraction = fraction;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MitigationConfig {
    pub windows: Vec<WindowSetting>,
}

impl MitigationConfig {
    pub fn baseline(windows: &[IdleWindow]) -> Self {
        Self {
            windows: windows.iter().map(WindowSetting::baseline).collect(),
        }
    }

    /// The same DD sequence and round count in every window, clamped to
    /// what each window holds.
    pub fn uniform_dd(tc: &TimedCircuit, windows: &[IdleWindow], kind: DDKind, rounds: usize) -> Self {
        Self {
            windows: windows
                .iter()
                .map(|w| {
                    let r = rounds.min(max_rounds(tc, w, kind));
                    WindowSetting::baseline(w).with_dd(kind, r)
                })
                .collect(),
        }
    }

    pub fn get(&self, w: &IdleWindow) -> Option<&WindowSetting> {
        self.windows.iter().find(|s| s.matches(w))
    }
}

fn conflict(s: &WindowSetting, reason: String) -> Error {
    Error::ConflictingPlacement {
        qubit: s.qubit,
        start: s.start,
        end: s.end,
        reason,
    }
}

/// Splits `rounds` over two intervals in proportion to their lengths,
/// respecting what each interval holds.
fn split_rounds(rounds: usize, len1: Cycles, len2: Cycles, max1: usize, max2: usize) -> Option<(usize, usize)> {
    let total = len1 + len2;
    let mut r1 = if total == 0 {
        0
    } else {
        ((rounds as u128 * len1 as u128 * 2 + total as u128) / (2 * total as u128)) as usize
    };
    r1 = r1.min(max1).min(rounds);
    let mut r2 = rounds - r1;
    if r2 > max2 {
        r2 = max2;
        r1 = (rounds - r2).min(max1);
    }
    (r1 + r2 == rounds).then_some((r1, r2))
}

/// Applies every window setting: the boundary gate is moved first, then the
/// DD rounds fill the slack on either side of it.
pub fn apply_config(tc: &TimedCircuit, windows: &[IdleWindow], config: &MitigationConfig) -> Result<TimedCircuit> {
    let mut out = tc.clone();
    for s in &config.windows {
        let w = windows
            .iter()
            .find(|w| s.matches(w))
            .ok_or_else(|| conflict(s, "no such idle window in the circuit".into()))?;
        if !(0.0..=1.0).contains(&s.fraction) {
            return Err(Error::FractionOutOfRange(s.fraction));
        }
        let kind = s.kind.filter(|_| s.rounds > 0);
        if let Some(kind) = kind {
            if s.rounds > max_rounds(tc, w, kind) {
                return Err(Error::RoundsOutOfRange {
                    kind: kind.to_string(),
                    rounds: s.rounds,
                    qubit: w.qubit,
                    start: w.start,
                    end: w.end,
                });
            }
        }
        let here = interval(w.qubit, w.start, w.end);
        let mut regions = vec![here];
        if s.fraction != 1.0 {
            let idx = movable_gate(&out, &here).ok_or(Error::NoMovableGate {
                qubit: w.qubit,
                start: w.start,
                end: w.end,
            })?;
            let d = out.gates[idx].duration;
            out = shift_boundary_gate(&out, &here, s.fraction)?;
            let at = w.start + shifted_offset(w.len(), s.fraction);
            regions = vec![interval(w.qubit, w.start, at)];
            if at + d < w.end {
                regions.push(interval(w.qubit, at + d, w.end));
            }
        }
        let Some(kind) = kind else { continue };
        let pd = tc.durations.single_qubit;
        let rounds = match regions.as_slice() {
            [only] => vec![s.rounds.min(max_rounds_in(only.len(), kind, pd))],
            [a, b] => {
                let (r1, r2) = split_rounds(
                    s.rounds,
                    a.len(),
                    b.len(),
                    max_rounds_in(a.len(), kind, pd),
                    max_rounds_in(b.len(), kind, pd),
                )
                .ok_or_else(|| {
                    conflict(s, format!("{} {kind} rounds do not fit around the moved gate", s.rounds))
                })?;
                vec![r1, r2]
            }
            _ => unreachable!("at most two regions"),
        };
        if rounds.iter().sum::<usize>() != s.rounds {
            return Err(conflict(s, format!("{} {kind} rounds do not fit", s.rounds)));
        }
        for (region, r) in regions.iter().zip(rounds) {
            if r > 0 && !region.is_empty() {
                out = insert_rounds(&out, region, kind, r).map_err(|e| conflict(s, e.to_string()))?;
            }
        }
    }
    out.validate()?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemMode {
    /// One calibration circuit per basis state.
    #[default]
    Full,
    /// Independent single-qubit calibrations combined by Kronecker product.
    Tensored,
}

/// A readout calibration: `A[read][prepared]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadoutCalibration {
    Full(Vec<Vec<f64>>),
    Tensored(Vec<[[f64; 2]; 2]>),
}

impl ReadoutCalibration {
    pub fn n_qubits(&self) -> usize {
        match self {
            ReadoutCalibration::Full(a) => a.len().trailing_zeros() as usize,
            ReadoutCalibration::Tensored(qs) => qs.len(),
        }
    }

    /// The dense confusion matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        match self {
            ReadoutCalibration::Full(a) => DMatrix::from_fn(a.len(), a.len(), |r, c| a[r][c]),
            ReadoutCalibration::Tensored(qs) => {
                let dim = 1usize << qs.len();
                DMatrix::from_fn(dim, dim, |r, c| {
                    qs.iter()
                        .enumerate()
                        .map(|(q, m)| m[r >> q & 1][c >> q & 1])
                        .product()
                })
            }
        }
    }
}

fn prep_circuit(n: usize, state: usize, noise: &NoiseModel) -> Result<TimedCircuit> {
    let mut gates: Vec<Gate> = (0..n)
        .filter(|q| state >> q & 1 == 1)
        .map(|q| Gate::one(GateKind::X, q))
        .collect();
    gates.extend((0..n).map(|q| Gate::one(GateKind::Measure, q)));
    schedule_alap(n, &gates, vec![], &noise.durations)
}

fn calibration_column(n: usize, state: usize, noise: &NoiseModel, opts: &SimOptions) -> Result<Vec<f64>> {
    let tc = prep_circuit(n, state, noise)?;
    let rho = evolve(&tc, &[], noise, opts.realizations, opts.seed)?;
    let mut dist = measure_distribution(&rho, noise);
    if let Some(shots) = opts.shots {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(state as u64);
        dist = dist.sample(shots, &mut rng);
    }
    Ok(dist.probs)
}

/// Prepares each calibration state with X gates, runs it through the noisy
/// simulator and records the measured distribution.
pub fn mem_calibrate(n: usize, noise: &NoiseModel, opts: &SimOptions, mode: MemMode) -> Result<ReadoutCalibration> {
    match mode {
        MemMode::Full => {
            if n > MAX_FULL_MEM_QUBITS {
                return Err(Error::DimensionOverflow {
                    what: "full readout calibration",
                    n_qubits: n,
                    limit: MAX_FULL_MEM_QUBITS,
                });
            }
            let dim = 1usize << n;
            let cols: Vec<Vec<f64>> = (0..dim)
                .into_par_iter()
                .map(|j| calibration_column(n, j, noise, opts))
                .collect::<Result<_>>()?;
            Ok(ReadoutCalibration::Full(
                (0..dim).map(|r| cols.iter().map(|c| c[r]).collect()).collect(),
            ))
        }
        MemMode::Tensored => {
            let zero = calibration_column(n, 0, noise, opts)?;
            let ones = calibration_column(n, (1 << n) - 1, noise, opts)?;
            let marginal = |probs: &[f64], q: usize| -> [f64; 2] {
                let one: f64 = probs
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i >> q & 1 == 1)
                    .map(|(_, p)| p)
                    .sum();
                [1.0 - one, one]
            };
            Ok(ReadoutCalibration::Tensored(
                (0..n)
                    .map(|q| {
                        let (c0, c1) = (marginal(&zero, q), marginal(&ones, q));
                        [[c0[0], c1[0]], [c0[1], c1[1]]]
                    })
                    .collect(),
            ))
        }
    }
}

/// Relative singular-value cutoff below which a calibration is treated as
/// singular.
const SINGULAR_RTOL: f64 = 1e-12;

fn solve(a: DMatrix<f64>, b: DVector<f64>) -> DVector<f64> {
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= SINGULAR_RTOL * smax {
        log::warn!("readout calibration is singular, using least squares");
    }
    svd.solve(&b, SINGULAR_RTOL * smax)
        .expect("SVD computed with both factors")
}

/// Inverts the calibration on `raw`, then clips negative entries and
/// renormalizes.
pub fn mem_correct(raw: &CountsDistribution, cal: &ReadoutCalibration) -> CountsDistribution {
    assert_eq!(raw.n_qubits, cal.n_qubits(), "calibration size mismatch");
    let x: Vec<f64> = match cal {
        ReadoutCalibration::Full(_) => {
            solve(cal.matrix(), DVector::from_column_slice(&raw.probs)).iter().copied().collect()
        }
        ReadoutCalibration::Tensored(qs) => {
            let mut v = raw.probs.clone();
            for (q, m) in qs.iter().enumerate() {
                let inv = solve(
                    DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]]),
                    DVector::from_column_slice(&[1.0, 0.0]),
                );
                let inv1 = solve(
                    DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]]),
                    DVector::from_column_slice(&[0.0, 1.0]),
                );
                // columns of the inverse
                let mi = [[inv[0], inv1[0]], [inv[1], inv1[1]]];
                let bit = 1usize << q;
                for i0 in (0..v.len()).filter(|i| i & bit == 0) {
                    let (a, b) = (v[i0], v[i0 | bit]);
                    v[i0] = mi[0][0] * a + mi[0][1] * b;
                    v[i0 | bit] = mi[1][0] * a + mi[1][1] * b;
                }
            }
            v
        }
    };
    let clipped: Vec<f64> = x.iter().map(|&p| p.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let probs = if total > 0.0 {
        clipped.iter().map(|p| p / total).collect()
    } else {
        raw.probs.clone()
    };
    CountsDistribution {
        n_qubits: raw.n_qubits,
        probs,
        shots: raw.shots,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::spin_echo_circuit;
    use crate::circuit::{extract_idle_windows, trace_fidelity, unitary_of, DurationTable};
    use crate::noise::{GateErrors, QubitNoise};

    fn flips(p: f64) -> NoiseModel {
        NoiseModel::uniform(
            QubitNoise {
                p01: p,
                p10: p,
                ..QubitNoise::ideal()
            },
            GateErrors::none(),
        )
    }

    #[test]
    fn max_rounds_examples() {
        assert_eq!(max_rounds_in(8, DDKind::XY4, 1), 2);
        assert_eq!(max_rounds_in(1, DDKind::XX, 1), 0);
        assert_eq!(max_rounds_in(799, DDKind::XX, 1), 399);
    }

    #[test]
    fn offsets_round_to_nearest() {
        assert_eq!(dd_offsets(4, 2, 1), vec![1, 2]);
        assert_eq!(dd_offsets(8, 2, 1), vec![2, 5]);
        // a full window leaves no gaps
        assert_eq!(dd_offsets(4, 4, 1), vec![0, 1, 2, 3]);
    }

    #[test]
    fn dd_preserves_semantics() {
        let tc = spin_echo_circuit(&DurationTable::default()).unwrap();
        let w = extract_idle_windows(&tc, 2)[0];
        let u = unitary_of(&tc, &[]).unwrap();
        for kind in DDKind::ALL {
            for rounds in [1, 7, max_rounds(&tc, &w, kind)] {
                let out = insert_dd(&tc, &w, kind, rounds).unwrap();
                out.validate().unwrap();
                let f = trace_fidelity(&u, &unitary_of(&out, &[]).unwrap());
                assert!((f - 1.0).abs() < 1e-10);
                assert_eq!(out.count_kind("delay"), 0);
            }
        }
        let out = insert_dd(&tc, &w, DDKind::XY4, 1).unwrap();
        assert_eq!(out.gates.len(), tc.gates.len() - 1 + 4);
        assert!(matches!(
            insert_dd(&tc, &w, DDKind::XX, 400),
            Err(Error::RoundsOutOfRange { .. })
        ));
    }

    #[test]
    fn full_window_leaves_only_rounding_slack() {
        let tc = spin_echo_circuit(&DurationTable::default()).unwrap();
        let w = extract_idle_windows(&tc, 2)[0];
        let out = insert_dd(&tc, &w, DDKind::XX, 399).unwrap();
        let ws = extract_idle_windows(&out, 1);
        let slack: Cycles = ws.iter().map(IdleWindow::len).sum();
        assert!(slack < 799);
        assert!(slack <= 1);
    }

    #[test]
    fn config_examples() {
        let tc = spin_echo_circuit(&DurationTable::default()).unwrap();
        let windows = extract_idle_windows(&tc, 2);
        assert_eq!(apply_config(&tc, &windows, &MitigationConfig::default()).unwrap(), tc);
        assert_eq!(
            apply_config(&tc, &windows, &MitigationConfig::baseline(&windows)).unwrap(),
            tc
        );
        let both = MitigationConfig {
            windows: vec![WindowSetting::baseline(&windows[0])
                .with_fraction(0.5)
                .with_dd(DDKind::XY4, 10)],
        };
        let out = apply_config(&tc, &windows, &both).unwrap();
        assert_eq!(out.count_kind("y"), 20);
        assert!(out.gate_at(0, windows[0].end).is_none());
        let moved = out.gate_at(0, windows[0].start + 400).unwrap();
        assert_eq!(out.gates[moved].kind, GateKind::X);
        let f = trace_fidelity(&unitary_of(&tc, &[]).unwrap(), &unitary_of(&out, &[]).unwrap());
        assert!((f - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rounds_split_around_moved_gate() {
        assert_eq!(split_rounds(10, 300, 100, 100, 100), Some((8, 2)));
        assert_eq!(split_rounds(10, 300, 100, 5, 100), Some((5, 5)));
        assert_eq!(split_rounds(10, 3, 3, 1, 1), None);
        assert_eq!(split_rounds(3, 0, 50, 0, 10), Some((0, 3)));
    }

    #[test]
    fn calibration_examples() {
        let opts = SimOptions::exact(1, 0);
        let ideal = mem_calibrate(2, &NoiseModel::ideal(), &opts, MemMode::Full).unwrap();
        assert_eq!(ideal.matrix(), DMatrix::identity(4, 4));

        let one = mem_calibrate(1, &flips(0.02), &opts, MemMode::Full).unwrap();
        let a = one.matrix();
        let expected = DMatrix::from_row_slice(2, 2, &[0.98, 0.02, 0.02, 0.98]);
        assert!((a - &expected).abs().max() < 1e-15);

        let two = mem_calibrate(2, &flips(0.02), &opts, MemMode::Full).unwrap();
        let kron = expected.kronecker(&expected);
        assert!((two.matrix() - &kron).abs().max() < 1e-15);

        let tens = mem_calibrate(2, &flips(0.02), &opts, MemMode::Tensored).unwrap();
        assert!((tens.matrix() - kron).abs().max() < 1e-15);
    }

    #[test]
    fn correction_inverts_exactly() {
        let opts = SimOptions::exact(1, 0);
        let cal = mem_calibrate(2, &flips(0.02), &opts, MemMode::Full).unwrap();
        let p = CountsDistribution::exact(2, vec![0.1, 0.2, 0.3, 0.4]);
        let raw = crate::sim::apply_readout(&p.probs, 2, &flips(0.02));
        let fixed = mem_correct(&CountsDistribution::exact(2, raw), &cal);
        assert!(fixed.total_variation(&p) < 1e-12);

        let identity = ReadoutCalibration::Full(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let d = CountsDistribution::exact(1, vec![0.25, 0.75]);
        assert_eq!(mem_correct(&d, &identity), d);
    }

    #[test]
    fn singular_calibration_falls_back() {
        let cal = ReadoutCalibration::Full(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let d = CountsDistribution::exact(1, vec![0.5, 0.5]);
        let out = mem_correct(&d, &cal);
        assert!((out.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(out.probs.iter().all(|p| p.is_finite() && *p >= 0.0));
    }
}
