//! Dense density-matrix simulation of timed circuits.
//!
//! Idle noise on a qubit is accumulated lazily: when the next gate on that
//! qubit is reached in the time-ordered sweep, the gap since its previous
//! operation is applied as one idle channel. Channels on different qubits
//! commute, so the order among simultaneous gates does not matter.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Cycles, GateKind, TimedCircuit, TimedGate};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat2};
use crate::noise::{DetuningMode, NoiseModel};
use crate::pauli::PauliString;

/// Largest register simulated with a dense density matrix.
pub const MAX_DENSITY_QUBITS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    /// Row-major `dim x dim`.
    data: Vec<C64>,
}

impl DensityMatrix {
    /// |0…0⟩⟨0…0|
    pub fn zero_state(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        data[0] = C64::new(1.0, 0.0);
        Self { n_qubits, data }
    }

    pub fn from_state_vector(psi: &[C64]) -> Self {
        let dim = psi.len();
        assert!(dim.is_power_of_two(), "state length must be a power of two");
        let mut data = Vec::with_capacity(dim * dim);
        for a in psi {
            for b in psi {
                data.push(a * b.conj());
            }
        }
        Self {
            n_qubits: dim.trailing_zeros() as usize,
            data,
        }
    }

    pub fn from_matrix(m: &DMatrix<C64>) -> Self {
        let dim = m.nrows();
        assert!(dim.is_power_of_two() && m.ncols() == dim);
        let data = (0..dim * dim).map(|i| m[(i / dim, i % dim)]).collect();
        Self {
            n_qubits: dim.trailing_zeros() as usize,
            data,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim() + c]
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        let dim = self.dim();
        DMatrix::from_fn(dim, dim, |r, c| self.data[r * dim + c])
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for r in 0..dim {
            for c in r..dim {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = self.to_matrix();
        let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().copied().collect()
    }

    /// Hermitian to 1e-10, unit trace to 1e-10, eigenvalues ≥ −1e-9.
    pub fn is_valid(&self) -> bool {
        self.hermiticity_error() < 1e-10
            && (self.trace() - C64::new(1.0, 0.0)).norm() < 1e-10
            && self.eigenvalues().iter().all(|&l| l >= -1e-9)
    }

    /// ½ Σ |λ_i(ρ − σ)|
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = self.to_matrix() - other.to_matrix();
        let herm = (&diff + diff.adjoint()) * C64::new(0.5, 0.0);
        0.5 * herm.symmetric_eigenvalues().iter().map(|l| l.abs()).sum::<f64>()
    }

    /// ⟨i|ρ|i⟩ for every basis state.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i).re).collect()
    }

    /// Tr[Pρ].
    pub fn pauli_expectation(&self, p: &PauliString) -> f64 {
        assert_eq!(p.len(), self.n_qubits, "Pauli string length must match");
        let (x, z, phase) = (p.x_mask(), p.z_mask(), p.y_phase());
        let sum: C64 = (0..self.dim())
            .map(|k| {
                let v = self.get(k, k ^ x);
                if (k & z).count_ones() % 2 == 0 {
                    v
                } else {
                    -v
                }
            })
            .sum();
        (phase * sum).re
    }

    /// ρ ← UρU† for a single-qubit gate.
    pub fn apply_1q(&mut self, u: &Mat2, qubit: usize) {
        let dim = self.dim();
        let bit = 1usize << qubit;
        let d = &mut self.data;
        for c in 0..dim {
            for r0 in (0..dim).filter(|r| r & bit == 0) {
                let r1 = r0 | bit;
                let (a, b) = (d[r0 * dim + c], d[r1 * dim + c]);
                d[r0 * dim + c] = u[0][0] * a + u[0][1] * b;
                d[r1 * dim + c] = u[1][0] * a + u[1][1] * b;
            }
        }
        let uc = [
            [u[0][0].conj(), u[0][1].conj()],
            [u[1][0].conj(), u[1][1].conj()],
        ];
        for r in 0..dim {
            let row = &mut d[r * dim..(r + 1) * dim];
            for c0 in (0..dim).filter(|c| c & bit == 0) {
                let c1 = c0 | bit;
                let (a, b) = (row[c0], row[c1]);
                row[c0] = a * uc[0][0] + b * uc[0][1];
                row[c1] = a * uc[1][0] + b * uc[1][1];
            }
        }
    }

    pub fn apply_cx(&mut self, control: usize, target: usize) {
        let dim = self.dim();
        let (cb, tb) = (1usize << control, 1usize << target);
        let perm = |i: usize| if i & cb != 0 { i ^ tb } else { i };
        let old = self.data.clone();
        for r in 0..dim {
            let pr = perm(r);
            for c in 0..dim {
                self.data[r * dim + c] = old[pr * dim + perm(c)];
            }
        }
    }

    /// ρ ← (1−p)ρ + p · (I/d ⊗ Tr_S ρ) on the qubit set S.
    pub fn depolarize(&mut self, qubits: &[usize], p: f64) {
        if p == 0.0 {
            return;
        }
        let dim = self.dim();
        let mask = qubits.iter().fold(0usize, |m, &q| m | (1 << q));
        let subsets = subset_offsets(qubits);
        let d_sub = subsets.len() as f64;
        let keep = C64::new(1.0 - p, 0.0);
        for r in (0..dim).filter(|r| r & mask == 0) {
            for c in (0..dim).filter(|c| c & mask == 0) {
                let tr: C64 = subsets
                    .iter()
                    .map(|&s| self.data[(r | s) * dim + (c | s)])
                    .sum();
                let mixed = tr * (p / d_sub);
                for &s1 in &subsets {
                    for &s2 in &subsets {
                        let idx = (r | s1) * dim + (c | s2);
                        self.data[idx] *= keep;
                        if s1 == s2 {
                            self.data[idx] += mixed;
                        }
                    }
                }
            }
        }
    }

    /// Amplitude damping with decay probability `gamma`.
    pub fn amplitude_damp(&mut self, qubit: usize, gamma: f64) {
        if gamma == 0.0 {
            return;
        }
        let dim = self.dim();
        let bit = 1usize << qubit;
        let s = (1.0 - gamma).sqrt();
        for r0 in (0..dim).filter(|r| r & bit == 0) {
            let r1 = r0 | bit;
            for c0 in (0..dim).filter(|c| c & bit == 0) {
                let c1 = c0 | bit;
                let p11 = self.data[r1 * dim + c1];
                self.data[r0 * dim + c0] += p11 * gamma;
                self.data[r1 * dim + c1] = p11 * (1.0 - gamma);
                self.data[r0 * dim + c1] *= s;
                self.data[r1 * dim + c0] *= s;
            }
        }
    }

    /// Pure dephasing: coherences in `qubit` shrink by `1 − lambda`.
    pub fn dephase(&mut self, qubit: usize, lambda: f64) {
        if lambda == 0.0 {
            return;
        }
        let dim = self.dim();
        let bit = 1usize << qubit;
        let keep = 1.0 - lambda;
        for r in 0..dim {
            for c in 0..dim {
                if (r ^ c) & bit != 0 {
                    self.data[r * dim + c] *= keep;
                }
            }
        }
    }

    fn add_scaled(&mut self, other: &DensityMatrix, w: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * w;
        }
    }

    fn scale(&mut self, w: f64) {
        self.data.iter_mut().for_each(|a| *a *= w);
    }
}

fn subset_offsets(qubits: &[usize]) -> Vec<usize> {
    (0..1usize << qubits.len())
        .map(|s| {
            qubits
                .iter()
                .enumerate()
                .filter(|(i, _)| s >> i & 1 == 1)
                .fold(0, |m, (_, &q)| m | (1 << q))
        })
        .collect()
}

/// Idle evolution of `qubit` for `t` seconds: coherent RZ(ω·t), then
/// amplitude damping γ = 1 − e^(−t/T1), then dephasing λ = 1 − e^(−t/Tφ).
pub fn apply_idle(rho: &mut DensityMatrix, qubit: usize, t: f64, noise: &NoiseModel, omega: f64) {
    if t <= 0.0 {
        return;
    }
    let params = noise.qubit(qubit);
    if omega != 0.0 {
        rho.apply_1q(&linalg::rz(omega * t), qubit);
    }
    rho.amplitude_damp(qubit, 1.0 - (-t / params.t1).exp());
    rho.dephase(qubit, 1.0 - (-t * params.dephasing_rate()).exp());
}

/// Ideal gate, depolarizing error on the acted qubits, then idle noise for
/// the gate's duration. DELAY and MEASURE are no-ops here.
pub fn apply_gate(
    rho: &mut DensityMatrix,
    g: &TimedGate,
    params: &[f64],
    noise: &NoiseModel,
    omegas: &[f64],
) {
    match g.kind {
        GateKind::Delay(_) | GateKind::Measure => return,
        GateKind::Cx => rho.apply_cx(g.qubits[0], g.qubits[1]),
        kind => {
            let u = kind.matrix_1q(params).expect("single-qubit gate");
            rho.apply_1q(&u, g.qubits[0]);
        }
    }
    rho.depolarize(&g.qubits, noise.gate_error(&g.kind));
    let t = g.duration as f64 * noise.cycle_seconds;
    for &q in &g.qubits {
        apply_idle(rho, q, t, noise, omegas[q]);
    }
}

/// Detuning of every qubit for one realization.
pub fn realize_detuning(noise: &NoiseModel, n_qubits: usize, seed: u64, realization: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(realization);
    (0..n_qubits)
        .map(|q| {
            let p = noise.qubit(q);
            match p.detuning {
                DetuningMode::None => 0.0,
                DetuningMode::Systematic => p.omega,
                DetuningMode::QuasiStatic if p.sigma == 0.0 => p.omega,
                DetuningMode::QuasiStatic => Normal::new(p.omega, p.sigma)
                    .expect("validated sigma")
                    .sample(&mut rng),
            }
        })
        .collect()
}

fn evolve_once(tc: &TimedCircuit, params: &[f64], noise: &NoiseModel, omegas: &[f64]) -> DensityMatrix {
    let n = tc.n_qubits;
    let mut rho = DensityMatrix::zero_state(n);
    let mut last: Vec<Option<Cycles>> = vec![None; n];
    let gap = |rho: &mut DensityMatrix, q: usize, from: Cycles, to: Cycles| {
        if to > from {
            let t = (to - from) as f64 * noise.cycle_seconds;
            apply_idle(rho, q, t, noise, omegas[q]);
        }
    };
    for g in &tc.gates {
        if matches!(g.kind, GateKind::Delay(_) | GateKind::Measure) {
            continue;
        }
        for &q in &g.qubits {
            if let Some(t) = last[q] {
                gap(&mut rho, q, t, g.start);
            }
            last[q] = Some(g.end());
        }
        apply_gate(&mut rho, g, params, noise, omegas);
    }
    let horizon = tc
        .gates
        .iter()
        .filter(|g| !matches!(g.kind, GateKind::Measure | GateKind::Delay(_)))
        .map(TimedGate::end)
        .max()
        .unwrap_or(0);
    for (q, t) in last.iter().enumerate() {
        if let Some(t) = *t {
            let until = tc
                .gates
                .iter()
                .find(|g| g.kind == GateKind::Measure && g.qubits[0] == q)
                .map_or(horizon, |m| m.start);
            gap(&mut rho, q, t, until);
        }
    }
    rho
}

/// Noisy final state of `tc`, averaged over detuning realizations.
///
/// Realization `r` draws its detunings from stream `r` of a generator seeded
/// with `seed`, so results are reproducible regardless of thread count.
/// Models without quasi-static detuning use a single realization.
pub fn evolve(
    tc: &TimedCircuit,
    params: &[f64],
    noise: &NoiseModel,
    realizations: usize,
    seed: u64,
) -> Result<DensityMatrix> {
    if tc.n_qubits > MAX_DENSITY_QUBITS {
        return Err(Error::DimensionOverflow {
            what: "density-matrix simulation",
            n_qubits: tc.n_qubits,
            limit: MAX_DENSITY_QUBITS,
        });
    }
    if realizations == 0 {
        return Err(Error::ZeroRealizations);
    }
    if params.len() != tc.parameters.len() {
        return Err(Error::ParameterCount {
            expected: tc.parameters.len(),
            got: params.len(),
        });
    }
    noise.check_qubits(tc.n_qubits)?;
    let runs = if noise.is_stochastic() { realizations } else { 1 };
    let run = |r: usize| {
        let omegas = realize_detuning(noise, tc.n_qubits, seed, r as u64);
        evolve_once(tc, params, noise, &omegas)
    };
    if runs == 1 {
        return Ok(run(0));
    }
    // fixed-order reduction over parallel chunks
    let chunk = rayon::current_num_threads().max(1) * 2;
    let mut acc: Option<DensityMatrix> = None;
    for base in (0..runs).step_by(chunk) {
        let part: Vec<DensityMatrix> = (base..(base + chunk).min(runs))
            .into_par_iter()
            .map(run)
            .collect();
        for rho in part {
            match acc.as_mut() {
                None => acc = Some(rho),
                Some(a) => a.add_scaled(&rho, 1.0),
            }
        }
    }
    let mut rho = acc.expect("at least one realization");
    rho.scale(1.0 / runs as f64);
    Ok(rho)
}

/// An outcome distribution over `n`-bit strings. Character `k` of a
/// bitstring is the outcome of qubit `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsDistribution {
    pub n_qubits: usize,
    /// Indexed by basis state (qubit `k` is bit `k`).
    pub probs: Vec<f64>,
    /// Shot count when the distribution was sampled.
    pub shots: Option<u64>,
}

pub fn bitstring(index: usize, n_qubits: usize) -> String {
    (0..n_qubits)
        .map(|k| if index >> k & 1 == 1 { '1' } else { '0' })
        .collect()
}

impl CountsDistribution {
    pub fn exact(n_qubits: usize, probs: Vec<f64>) -> Self {
        assert_eq!(probs.len(), 1 << n_qubits);
        Self {
            n_qubits,
            probs,
            shots: None,
        }
    }

    pub fn point_mass(n_qubits: usize, index: usize) -> Self {
        let mut probs = vec![0.0; 1 << n_qubits];
        probs[index] = 1.0;
        Self::exact(n_qubits, probs)
    }

    pub fn prob(&self, bits: &str) -> f64 {
        let index = bits
            .chars()
            .enumerate()
            .fold(0, |m, (k, c)| if c == '1' { m | (1 << k) } else { m });
        self.probs[index]
    }

    /// Non-zero entries keyed by bitstring.
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(|(i, &p)| (bitstring(i, self.n_qubits), p))
            .collect()
    }

    /// Draws `shots` outcomes and returns their empirical frequencies.
    pub fn sample<R: Rng>(&self, shots: u64, rng: &mut R) -> CountsDistribution {
        let mut cumulative = Vec::with_capacity(self.probs.len());
        let mut total = 0.0;
        for &p in &self.probs {
            total += p.max(0.0);
            cumulative.push(total);
        }
        let mut counts = vec![0u64; self.probs.len()];
        for _ in 0..shots {
            let u: f64 = rng.random::<f64>() * total;
            let idx = cumulative
                .partition_point(|&c| c <= u)
                .min(counts.len() - 1);
            counts[idx] += 1;
        }
        CountsDistribution {
            n_qubits: self.n_qubits,
            probs: counts.iter().map(|&c| c as f64 / shots as f64).collect(),
            shots: Some(shots),
        }
    }

    /// Expectation of a Z-type parity over the qubits in `mask`.
    pub fn parity_expectation(&self, mask: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, &p)| if (i & mask).count_ones().is_multiple_of(2) { p } else { -p })
            .sum()
    }

    pub fn total_variation(&self, other: &CountsDistribution) -> f64 {
        assert_eq!(self.n_qubits, other.n_qubits);
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

#[derive(Serialize, Deserialize)]
struct CountsRepr {
    n_qubits: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shots: Option<u64>,
    probabilities: BTreeMap<String, f64>,
}

impl Serialize for CountsDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CountsRepr {
            n_qubits: self.n_qubits,
            shots: self.shots,
            probabilities: self.to_map(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CountsDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = CountsRepr::deserialize(d)?;
        let mut probs = vec![0.0; 1 << repr.n_qubits];
        for (bits, p) in repr.probabilities {
            if bits.len() != repr.n_qubits || bits.chars().any(|c| c != '0' && c != '1') {
                return Err(serde::de::Error::custom(format!("bad bitstring {bits:?}")));
            }
            let idx = bits
                .chars()
                .enumerate()
                .fold(0, |m, (k, c)| if c == '1' { m | (1 << k) } else { m });
            probs[idx] = p;
        }
        Ok(CountsDistribution {
            n_qubits: repr.n_qubits,
            probs,
            shots: repr.shots,
        })
    }
}

/// Applies the model's readout confusion to ideal outcome probabilities.
pub fn apply_readout(probs: &[f64], n_qubits: usize, noise: &NoiseModel) -> Vec<f64> {
    if let Some(a) = &noise.confusion {
        return a
            .iter()
            .map(|row| row.iter().zip(probs).map(|(x, p)| x * p).sum())
            .collect();
    }
    let mut out = probs.to_vec();
    for q in 0..n_qubits {
        let (p01, p10) = (noise.qubit(q).p01, noise.qubit(q).p10);
        if p01 == 0.0 && p10 == 0.0 {
            continue;
        }
        let bit = 1usize << q;
        for i0 in (0..out.len()).filter(|i| i & bit == 0) {
            let (a, b) = (out[i0], out[i0 | bit]);
            out[i0] = (1.0 - p01) * a + p10 * b;
            out[i0 | bit] = p01 * a + (1.0 - p10) * b;
        }
    }
    out
}

/// Infinite-shot outcome distribution of `rho` including readout error.
pub fn measure_distribution(rho: &DensityMatrix, noise: &NoiseModel) -> CountsDistribution {
    let ideal: Vec<f64> = rho.probabilities().iter().map(|p| p.max(0.0)).collect();
    let total: f64 = ideal.iter().sum();
    let ideal: Vec<f64> = ideal.iter().map(|p| p / total).collect();
    CountsDistribution::exact(rho.n_qubits(), apply_readout(&ideal, rho.n_qubits(), noise))
}

/// Sampled variant of [`measure_distribution`].
pub fn measure_sampled(
    rho: &DensityMatrix,
    noise: &NoiseModel,
    shots: u64,
    seed: u64,
) -> CountsDistribution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    measure_distribution(rho, noise).sample(shots, &mut rng)
}

/// (Σ_i √(p_i q_i))²
pub fn hellinger_fidelity(p: &CountsDistribution, q: &CountsDistribution) -> f64 {
    assert_eq!(p.n_qubits, q.n_qubits, "distributions over different registers");
    let bc: f64 = p
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(a, b)| (a.max(0.0) * b.max(0.0)).sqrt())
        .sum();
    (bc * bc).min(1.0)
}

/// Noiseless outcome distribution of `tc`.
pub fn ideal_distribution(tc: &TimedCircuit, params: &[f64]) -> Result<CountsDistribution> {
    let rho = evolve(tc, params, &NoiseModel::ideal(), 1, 0)?;
    Ok(measure_distribution(&rho, &NoiseModel::ideal()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{schedule_alap, DurationTable, Gate};
    use crate::noise::{GateErrors, QubitNoise};

    fn one_gate(kind: GateKind) -> TimedGate {
        TimedGate {
            kind,
            qubits: vec![0],
            start: 0,
            duration: 1,
        }
    }

    fn depolarizing_only(p: f64) -> NoiseModel {
        NoiseModel::uniform(
            QubitNoise::ideal(),
            GateErrors {
                one_qubit: p,
                ..GateErrors::none()
            },
        )
    }

    /// Kraus sum {√(1−3p/4) I, √(p/4) X, √(p/4) Y, √(p/4) Z} equals D_p.
    fn kraus_depolarize(rho: &DMatrix<C64>, p: f64) -> DMatrix<C64> {
        let paulis = ["I", "X", "Y", "Z"].map(|s| s.parse::<PauliString>().unwrap().matrix());
        let weights = [1.0 - 0.75 * p, p / 4.0, p / 4.0, p / 4.0];
        paulis
            .iter()
            .zip(weights)
            .map(|(k, w)| k * rho * k.adjoint() * C64::new(w, 0.0))
            .fold(DMatrix::zeros(2, 2), |a, b| a + b)
    }

    #[test]
    fn x_flips_zero_state() {
        let mut rho = DensityMatrix::zero_state(1);
        apply_gate(&mut rho, &one_gate(GateKind::X), &[], &NoiseModel::ideal(), &[0.0]);
        assert_eq!(rho.get(1, 1), C64::new(1.0, 0.0));
        assert_eq!(rho.get(0, 0), C64::new(0.0, 0.0));
    }

    #[test]
    fn full_depolarizing_mixes_completely() {
        let mut rho = DensityMatrix::from_state_vector(&[
            C64::new(0.6, 0.0),
            C64::new(0.0, 0.8),
        ]);
        apply_gate(&mut rho, &one_gate(GateKind::H), &[], &depolarizing_only(1.0), &[0.0]);
        assert!((rho.get(0, 0).re - 0.5).abs() < 1e-15);
        assert!((rho.get(1, 1).re - 0.5).abs() < 1e-15);
        assert!(rho.get(0, 1).norm() < 1e-15);
    }

    #[test]
    fn partial_depolarizing_matches_kraus() {
        let mut rho = DensityMatrix::zero_state(1);
        apply_gate(&mut rho, &one_gate(GateKind::X), &[], &depolarizing_only(0.1), &[0.0]);
        assert!((rho.get(1, 1).re - 0.95).abs() < 1e-15);

        let mut x_state = DMatrix::<C64>::zeros(2, 2);
        x_state[(1, 1)] = C64::new(1.0, 0.0);
        let oracle = kraus_depolarize(&x_state, 0.1);
        assert!((rho.to_matrix() - oracle).norm() < 1e-15);
    }

    #[test]
    fn two_qubit_depolarizing_keeps_trace() {
        let bell = [
            C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        ];
        let mut rho = DensityMatrix::from_state_vector(&bell);
        rho.depolarize(&[0, 1], 1.0);
        for i in 0..4 {
            assert!((rho.get(i, i).re - 0.25).abs() < 1e-15);
        }
        assert!(rho.get(0, 3).norm() < 1e-15);
    }

    #[test]
    fn idle_zero_time_is_identity() {
        let mut rho = DensityMatrix::from_state_vector(&[C64::new(0.6, 0.0), C64::new(0.8, 0.0)]);
        let before = rho.clone();
        apply_idle(&mut rho, 0, 0.0, &NoiseModel::default(), 1e5);
        assert_eq!(rho, before);
    }

    #[test]
    fn t1_half_life() {
        let t1 = 50e-6;
        let noise = NoiseModel::uniform(
            QubitNoise {
                t1,
                t2: 2.0 * t1,
                ..QubitNoise::ideal()
            },
            GateErrors::none(),
        );
        let mut rho = DensityMatrix::from_state_vector(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        apply_idle(&mut rho, 0, t1 * std::f64::consts::LN_2, &noise, 0.0);
        assert!((rho.get(1, 1).re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dephasing_decays_coherence_by_e() {
        let t2 = 40e-6;
        let noise = NoiseModel::uniform(
            QubitNoise {
                t2,
                ..QubitNoise::ideal()
            },
            GateErrors::none(),
        );
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut rho = DensityMatrix::from_state_vector(&[C64::new(h, 0.0), C64::new(h, 0.0)]);
        apply_idle(&mut rho, 0, t2, &noise, 0.0);
        // Bloch-vector oracle: |r_x| = e^{-t/T2}, coherence = |r_x| / 2
        let bloch = (-1.0f64).exp();
        assert!((rho.get(0, 1).norm() - bloch / 2.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_h_gives_plus() {
        let tc = schedule_alap(1, &[Gate::one(GateKind::H, 0)], vec![], &DurationTable::default())
            .unwrap();
        let rho = evolve(&tc, &[], &NoiseModel::ideal(), 1, 0).unwrap();
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert!((rho.get(r, c).re - 0.5).abs() < 1e-15);
        }
        assert!((rho.pauli_expectation(&"X".parse().unwrap()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evolve_rejects_zero_realizations() {
        let tc = TimedCircuit::empty(1, DurationTable::default());
        assert!(matches!(
            evolve(&tc, &[], &NoiseModel::default(), 0, 1),
            Err(Error::ZeroRealizations)
        ));
        let big = TimedCircuit::empty(11, DurationTable::default());
        assert!(matches!(
            evolve(&big, &[], &NoiseModel::ideal(), 1, 1),
            Err(Error::DimensionOverflow { .. })
        ));
    }

    #[test]
    fn measure_examples() {
        let ideal = NoiseModel::ideal();
        let zero = measure_distribution(&DensityMatrix::zero_state(2), &ideal);
        assert_eq!(zero.probs, vec![1.0, 0.0, 0.0, 0.0]);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = DensityMatrix::from_state_vector(&[C64::new(h, 0.0), C64::new(h, 0.0)]);
        let d = measure_distribution(&plus, &ideal);
        assert!((d.prob("0") - 0.5).abs() < 1e-15 && (d.prob("1") - 0.5).abs() < 1e-15);

        let flips = NoiseModel::uniform(
            QubitNoise {
                p01: 0.02,
                ..QubitNoise::ideal()
            },
            GateErrors::none(),
        );
        let d = measure_distribution(&DensityMatrix::zero_state(1), &flips);
        assert!((d.prob("0") - 0.98).abs() < 1e-15);
        assert!((d.prob("1") - 0.02).abs() < 1e-15);
    }

    #[test]
    fn bell_state_correlations() {
        let tc = schedule_alap(
            2,
            &[Gate::one(GateKind::H, 0), Gate::cx(0, 1)],
            vec![],
            &DurationTable::default(),
        )
        .unwrap();
        let rho = evolve(&tc, &[], &NoiseModel::ideal(), 1, 0).unwrap();
        assert!((rho.pauli_expectation(&"ZZ".parse().unwrap()) - 1.0).abs() < 1e-12);
        assert!(rho.pauli_expectation(&"ZI".parse().unwrap()).abs() < 1e-12);
        assert!((rho.pauli_expectation(&"XX".parse().unwrap()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hellinger_examples() {
        let p = CountsDistribution::point_mass(1, 0);
        assert_eq!(hellinger_fidelity(&p, &p), 1.0);
        let q = CountsDistribution::point_mass(1, 1);
        assert_eq!(hellinger_fidelity(&p, &q), 0.0);
        let half = CountsDistribution::exact(1, vec![0.5, 0.5]);
        assert!((hellinger_fidelity(&p, &half) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_deterministic() {
        let half = CountsDistribution::exact(2, vec![0.1, 0.2, 0.3, 0.4]);
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        let sa = half.sample(1000, &mut a);
        assert_eq!(sa, half.sample(1000, &mut b));
        assert!((sa.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn counts_serialize_as_bitstrings() {
        let d = CountsDistribution::exact(2, vec![0.25, 0.75, 0.0, 0.0]);
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"{"n_qubits":2,"probabilities":{"00":0.25,"10":0.75}}"#);
        let back: CountsDistribution = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }
}
