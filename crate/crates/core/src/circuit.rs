//! Gate-level circuit representation, ALAP scheduling and idle-window edits.
//!
//! Time is measured in integer device cycles. A [`TimedCircuit`] is an
//! immutable value: every transform returns a new circuit and leaves its
//! input untouched.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat2};

pub type Cycles = u64;

/// Duration of one device cycle (one identity gate) in seconds.
pub const CYCLE_SECONDS: f64 = 35.56e-9;

/// Largest register `unitary_of` will build densely.
pub const MAX_UNITARY_QUBITS: usize = 10;

/// A rotation angle, either bound to a value or referring to a parameter slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Angle {
    Value(f64),
    Param(usize),
}

impl Angle {
    pub fn resolve(self, params: &[f64]) -> f64 {
        match self {
            Angle::Value(v) => v,
            Angle::Param(slot) => params[slot],
        }
    }
}

impl From<f64> for Angle {
    fn from(v: f64) -> Self {
        Angle::Value(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateKind {
    I,
    X,
    Y,
    Z,
    H,
    Rx(Angle),
    Ry(Angle),
    Rz(Angle),
    Cx,
    Delay(Cycles),
    Measure,
}

impl GateKind {
    /// Lower-case mnemonic, shared with the QASM dialect and the noise-model keys.
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::I => "id",
            GateKind::X => "x",
            GateKind::Y => "y",
            GateKind::Z => "z",
            GateKind::H => "h",
            GateKind::Rx(_) => "rx",
            GateKind::Ry(_) => "ry",
            GateKind::Rz(_) => "rz",
            GateKind::Cx => "cx",
            GateKind::Delay(_) => "delay",
            GateKind::Measure => "measure",
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            GateKind::Cx => 2,
            _ => 1,
        }
    }

    pub fn angle(&self) -> Option<Angle> {
        match *self {
            GateKind::Rx(a) | GateKind::Ry(a) | GateKind::Rz(a) => Some(a),
            _ => None,
        }
    }

    pub fn is_delay(&self) -> bool {
        matches!(self, GateKind::Delay(_))
    }

    /// 2x2 unitary of a single-qubit gate. `None` for CX and MEASURE.
    pub fn matrix_1q(&self, params: &[f64]) -> Option<Mat2> {
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let m = match *self {
            GateKind::I | GateKind::Delay(_) => [[one, zero], [zero, one]],
            GateKind::X => [[zero, one], [one, zero]],
            GateKind::Y => [[zero, -i], [i, zero]],
            GateKind::Z => [[one, zero], [zero, -one]],
            GateKind::H => {
                let h = C64::new(FRAC_1_SQRT_2, 0.0);
                [[h, h], [h, -h]]
            }
            GateKind::Rx(a) => {
                let t = a.resolve(params) / 2.0;
                let (c, s) = (C64::new(t.cos(), 0.0), C64::new(0.0, -t.sin()));
                [[c, s], [s, c]]
            }
            GateKind::Ry(a) => {
                let t = a.resolve(params) / 2.0;
                let (c, s) = (C64::new(t.cos(), 0.0), C64::new(t.sin(), 0.0));
                [[c, -s], [s, c]]
            }
            GateKind::Rz(a) => linalg::rz(a.resolve(params)),
            GateKind::Cx | GateKind::Measure => return None,
        };
        Some(m)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.angle() {
            Some(Angle::Value(v)) => write!(f, "{}({v})", self.name()),
            Some(Angle::Param(p)) => write!(f, "{}(p{p})", self.name()),
            None => match self {
                GateKind::Delay(d) => write!(f, "delay[{d}]"),
                _ => f.write_str(self.name()),
            },
        }
    }
}

/// Gate durations in device cycles. DELAY(d) always lasts `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DurationTable {
    pub single_qubit: Cycles,
    pub cx: Cycles,
    pub measure: Cycles,
}

impl Default for DurationTable {
    fn default() -> Self {
        Self {
            single_qubit: 1,
            cx: 10,
            measure: 100,
        }
    }
}

impl DurationTable {
    pub fn of(&self, kind: &GateKind) -> Cycles {
        match kind {
            GateKind::Cx => self.cx,
            GateKind::Measure => self.measure,
            GateKind::Delay(d) => *d,
            _ => self.single_qubit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.single_qubit == 0 || self.cx == 0 || self.measure == 0 {
            return Err(Error::InvalidNoise(
                "gate durations must be at least one cycle".into(),
            ));
        }
        Ok(())
    }
}

/// An unscheduled gate application.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
}

impl Gate {
    pub fn new(kind: GateKind, qubits: &[usize]) -> Self {
        Self {
            kind,
            qubits: qubits.to_vec(),
        }
    }

    pub fn one(kind: GateKind, qubit: usize) -> Self {
        Self::new(kind, &[qubit])
    }

    pub fn cx(control: usize, target: usize) -> Self {
        Self::new(GateKind::Cx, &[control, target])
    }

    fn check(&self, index: usize, n_qubits: usize, n_params: usize) -> Result<()> {
        let malformed = |reason: String| Error::MalformedGate {
            index,
            gate: self.kind.to_string(),
            reason,
        };
        if self.qubits.len() != self.kind.arity() {
            return Err(malformed(format!(
                "expects {} qubit(s), got {}",
                self.kind.arity(),
                self.qubits.len()
            )));
        }
        if self.qubits.len() == 2 && self.qubits[0] == self.qubits[1] {
            return Err(malformed("qubits must be distinct".into()));
        }
        if let Some(&qubit) = self.qubits.iter().find(|&&q| q >= n_qubits) {
            return Err(Error::QubitOutOfRange {
                index,
                qubit,
                n_qubits,
            });
        }
        match self.kind.angle() {
            Some(Angle::Value(v)) if !v.is_finite() => {
                Err(malformed("angle is not finite".into()))
            }
            Some(Angle::Param(p)) if p >= n_params => Err(malformed(format!(
                "parameter slot {p} is not declared"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedGate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub start: Cycles,
    pub duration: Cycles,
}

impl TimedGate {
    pub fn end(&self) -> Cycles {
        self.start + self.duration
    }

    pub fn acts_on(&self, qubit: usize) -> bool {
        self.qubits.contains(&qubit)
    }

    fn overlaps(&self, start: Cycles, end: Cycles) -> bool {
        self.start < end && start < self.end()
    }
}

/// A scheduled circuit. Gates are kept sorted by `(start, first qubit)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedCircuit {
    pub n_qubits: usize,
    pub gates: Vec<TimedGate>,
    pub parameters: Vec<String>,
    pub durations: DurationTable,
}

/// A maximal per-qubit interval with no operation, bounded by two gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IdleWindow {
    pub qubit: usize,
    pub start: Cycles,
    pub end: Cycles,
    /// Index of the gate that ends at `start`.
    pub preceding: usize,
    /// Index of the gate that begins at `end`.
    pub following: usize,
}

impl IdleWindow {
    pub fn len(&self) -> Cycles {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

impl TimedCircuit {
    pub fn empty(n_qubits: usize, durations: DurationTable) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
            parameters: Vec::new(),
            durations,
        }
    }

    /// Time at which the last gate finishes.
    pub fn makespan(&self) -> Cycles {
        self.gates.iter().map(TimedGate::end).max().unwrap_or(0)
    }

    /// Gates in time order, stripped of their timing.
    pub fn gate_list(&self) -> Vec<Gate> {
        self.gates
            .iter()
            .map(|g| Gate::new(g.kind, &g.qubits))
            .collect()
    }

    /// Indices of the non-DELAY gates acting on `qubit`, in time order.
    pub fn qubit_ops(&self, qubit: usize) -> Vec<usize> {
        self.gates
            .iter()
            .enumerate()
            .filter(|(_, g)| g.acts_on(qubit) && !g.kind.is_delay())
            .map(|(i, _)| i)
            .collect()
    }

    /// Index of the non-DELAY gate on `qubit` starting at `start`.
    pub fn gate_at(&self, qubit: usize, start: Cycles) -> Option<usize> {
        self.gates
            .iter()
            .position(|g| g.start == start && g.acts_on(qubit) && !g.kind.is_delay())
    }

    pub fn count_kind(&self, name: &str) -> usize {
        self.gates.iter().filter(|g| g.kind.name() == name).count()
    }

    fn sort(&mut self) {
        self.gates.sort_by_key(|g| (g.start, g.qubits[0]));
    }

    /// Checks gate well-formedness, per-qubit non-overlap and that MEASURE
    /// is the last operation on its qubit.
    pub fn validate(&self) -> Result<()> {
        for (i, g) in self.gates.iter().enumerate() {
            Gate::new(g.kind, &g.qubits).check(i, self.n_qubits, self.parameters.len())?;
            if g.duration != self.durations.of(&g.kind) {
                return Err(Error::InvalidCircuit(format!(
                    "gate {i} ({}) lasts {} cycles, table says {}",
                    g.kind,
                    g.duration,
                    self.durations.of(&g.kind)
                )));
            }
        }
        for q in 0..self.n_qubits {
            let mut on_q: Vec<&TimedGate> = self
                .gates
                .iter()
                .filter(|g| g.acts_on(q) && g.duration > 0)
                .collect();
            on_q.sort_by_key(|g| g.start);
            for pair in on_q.windows(2) {
                if pair[1].start < pair[0].end() {
                    return Err(Error::InvalidCircuit(format!(
                        "{} and {} overlap on qubit {q}",
                        pair[0].kind, pair[1].kind
                    )));
                }
                if pair[0].kind == GateKind::Measure {
                    return Err(Error::InvalidCircuit(format!(
                        "{} follows a measurement on qubit {q}",
                        pair[1].kind
                    )));
                }
            }
        }
        Ok(())
    }

    /// Builds a circuit from already-timed gates, sorting and validating them.
    pub fn from_timed(
        n_qubits: usize,
        gates: Vec<TimedGate>,
        parameters: Vec<String>,
        durations: DurationTable,
    ) -> Result<Self> {
        let mut tc = Self {
            n_qubits,
            gates,
            parameters,
            durations,
        };
        tc.sort();
        tc.validate()?;
        Ok(tc)
    }

    fn check_window(&self, w: &IdleWindow) -> Result<()> {
        if w.qubit >= self.n_qubits || w.is_empty() {
            return Err(Error::InvalidCircuit(format!("invalid window {w:?}")));
        }
        let blocked = self
            .gates
            .iter()
            .any(|g| g.acts_on(w.qubit) && !g.kind.is_delay() && g.overlaps(w.start, w.end));
        if blocked {
            return Err(Error::InvalidCircuit(format!(
                "window on qubit {} [{}, {}) is not idle in this circuit",
                w.qubit, w.start, w.end
            )));
        }
        Ok(())
    }

    /// DELAY gates are explicit idling; editing a window dissolves the ones inside it.
    fn drop_delays_in(&mut self, qubit: usize, start: Cycles, end: Cycles) {
        self.gates.retain(|g| {
            !(g.kind.is_delay() && g.acts_on(qubit) && g.start >= start && g.end() <= end)
        });
    }
}

fn check_gates(n_qubits: usize, gates: &[Gate], n_params: usize) -> Result<()> {
    gates
        .iter()
        .enumerate()
        .try_for_each(|(i, g)| g.check(i, n_qubits, n_params))
}

/// Schedules a dependency-ordered gate list as late as possible.
///
/// The total duration is fixed by the critical path; every gate then ends
/// exactly when the next gate on any of its qubits begins, or at the circuit
/// end if it has no successor. Measurements therefore all finish together.
pub fn schedule_alap(
    n_qubits: usize,
    gates: &[Gate],
    parameters: Vec<String>,
    durations: &DurationTable,
) -> Result<TimedCircuit> {
    durations.validate()?;
    check_gates(n_qubits, gates, parameters.len())?;

    let mut ready = vec![0; n_qubits];
    for g in gates {
        let start = g.qubits.iter().map(|&q| ready[q]).max().unwrap_or(0);
        let end = start + durations.of(&g.kind);
        for &q in &g.qubits {
            ready[q] = end;
        }
    }
    let total = ready.iter().copied().max().unwrap_or(0);

    let mut latest = vec![total; n_qubits];
    let mut timed: Vec<TimedGate> = Vec::with_capacity(gates.len());
    for g in gates.iter().rev() {
        let duration = durations.of(&g.kind);
        let end = g.qubits.iter().map(|&q| latest[q]).min().unwrap_or(total);
        let start = end - duration;
        for &q in &g.qubits {
            latest[q] = start;
        }
        timed.push(TimedGate {
            kind: g.kind,
            qubits: g.qubits.clone(),
            start,
            duration,
        });
    }
    timed.reverse();

    let mut tc = TimedCircuit {
        n_qubits,
        gates: timed,
        parameters,
        durations: *durations,
    };
    tc.sort();
    Ok(tc)
}

/// Re-schedules an existing circuit's gate order as late as possible.
pub fn reschedule_alap(tc: &TimedCircuit) -> Result<TimedCircuit> {
    schedule_alap(
        tc.n_qubits,
        &tc.gate_list(),
        tc.parameters.clone(),
        &tc.durations,
    )
}

/// Every maximal per-qubit gap of at least `min_len` cycles between two
/// consecutive operations, sorted by `(qubit, start)`.
///
/// DELAY gates count as idle time. Time before a qubit's first operation is
/// never a window: the qubit still sits in |0⟩ there.
pub fn extract_idle_windows(tc: &TimedCircuit, min_len: Cycles) -> Vec<IdleWindow> {
    let min_len = min_len.max(1);
    let mut out = Vec::new();
    for q in 0..tc.n_qubits {
        let ops = tc.qubit_ops(q);
        for pair in ops.windows(2) {
            let (a, b) = (&tc.gates[pair[0]], &tc.gates[pair[1]]);
            if b.start >= a.end() + min_len {
                out.push(IdleWindow {
                    qubit: q,
                    start: a.end(),
                    end: b.start,
                    preceding: pair[0],
                    following: pair[1],
                });
            }
        }
    }
    out
}

/// Places single-qubit gates at the given offsets inside `w`.
///
/// Offsets are relative to `w.start`. Every original gate keeps its timing;
/// DELAY gates inside the window are dropped.
pub fn insert_in_window(
    tc: &TimedCircuit,
    w: &IdleWindow,
    gates: &[(GateKind, Cycles)],
) -> Result<TimedCircuit> {
    tc.check_window(w)?;
    let mut placed: Vec<TimedGate> = Vec::with_capacity(gates.len());
    for (index, &(kind, offset)) in gates.iter().enumerate() {
        let reject = |reason: String| Error::Placement { index, reason };
        if kind.arity() != 1 || matches!(kind, GateKind::Measure) {
            return Err(reject(format!("{kind} cannot be inserted into an idle window")));
        }
        Gate::one(kind, w.qubit)
            .check(index, tc.n_qubits, tc.parameters.len())
            .map_err(|e| reject(e.to_string()))?;
        let duration = tc.durations.of(&kind);
        let start = w.start + offset;
        if start + duration > w.end {
            return Err(reject(format!(
                "{kind} at offset {offset} ends at {} past the window end {}",
                start + duration,
                w.end
            )));
        }
        if let Some(other) = placed.iter().find(|g| g.overlaps(start, start + duration)) {
            return Err(reject(format!(
                "{kind} at offset {offset} overlaps {} at {}",
                other.kind, other.start
            )));
        }
        placed.push(TimedGate {
            kind,
            qubits: vec![w.qubit],
            start,
            duration,
        });
    }
    let mut out = tc.clone();
    if !placed.is_empty() {
        out.drop_delays_in(w.qubit, w.start, w.end);
        out.gates.extend(placed);
        out.sort();
    }
    Ok(out)
}

/// The gate following `w`, if it can be moved into the window.
pub fn movable_gate(tc: &TimedCircuit, w: &IdleWindow) -> Option<usize> {
    let idx = tc.gate_at(w.qubit, w.end)?;
    let g = &tc.gates[idx];
    let movable = g.qubits.len() == 1
        && !matches!(g.kind, GateKind::Measure | GateKind::Cx | GateKind::Delay(_));
    movable.then_some(idx)
}

/// Moves the gate that follows `w` to `w.start + round(f * len(w))`.
///
/// `f = 1` leaves the ALAP position untouched and `f = 0` places the gate
/// right after the preceding operation.
pub fn shift_boundary_gate(tc: &TimedCircuit, w: &IdleWindow, f: f64) -> Result<TimedCircuit> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::FractionOutOfRange(f));
    }
    tc.check_window(w)?;
    let idx = movable_gate(tc, w).ok_or(Error::NoMovableGate {
        qubit: w.qubit,
        start: w.start,
        end: w.end,
    })?;
    let new_start = w.start + shifted_offset(w.len(), f);
    if new_start == tc.gates[idx].start {
        return Ok(tc.clone());
    }
    let mut out = tc.clone();
    out.gates[idx].start = new_start;
    out.drop_delays_in(w.qubit, w.start, w.end);
    out.sort();
    Ok(out)
}

pub(crate) fn shifted_offset(len: Cycles, f: f64) -> Cycles {
    ((f * len as f64).round() as Cycles).min(len)
}

/// Noiseless unitary of the circuit, gates applied in time order.
/// MEASURE is ignored.
pub fn unitary_of(tc: &TimedCircuit, params: &[f64]) -> Result<DMatrix<C64>> {
    if tc.n_qubits > MAX_UNITARY_QUBITS {
        return Err(Error::DimensionOverflow {
            what: "unitary_of",
            n_qubits: tc.n_qubits,
            limit: MAX_UNITARY_QUBITS,
        });
    }
    if params.len() != tc.parameters.len() {
        return Err(Error::ParameterCount {
            expected: tc.parameters.len(),
            got: params.len(),
        });
    }
    let dim = 1usize << tc.n_qubits;
    let mut u = DMatrix::<C64>::identity(dim, dim);
    for g in &tc.gates {
        match g.kind {
            GateKind::Measure | GateKind::Delay(_) | GateKind::I => {}
            GateKind::Cx => linalg::cx_rows(&mut u, g.qubits[0], g.qubits[1]),
            kind => {
                let m = kind.matrix_1q(params).expect("single-qubit gate");
                linalg::apply_1q_rows(&mut u, &m, g.qubits[0]);
            }
        }
    }
    Ok(u)
}

/// `|Tr(U†V)| / dim`, equal to 1 iff U and V agree up to global phase.
pub fn trace_fidelity(u: &DMatrix<C64>, v: &DMatrix<C64>) -> f64 {
    let dim = u.nrows() as f64;
    (u.adjoint() * v).trace().norm() / dim
}

/// Number of gates per kind name, handy for structural checks.
pub fn gate_histogram(tc: &TimedCircuit) -> BTreeMap<&'static str, usize> {
    let mut h = BTreeMap::new();
    for g in &tc.gates {
        *h.entry(g.kind.name()).or_insert(0) += 1;
    }
    h
}
