//! Pauli-sum Hamiltonians, the transverse-field Ising builder, the SU2 ansatz
//! family and energy estimation.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{schedule_alap, Angle, DurationTable, Gate, GateKind, TimedCircuit};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mitigation::{mem_correct, ReadoutCalibration};
use crate::noise::NoiseModel;
use crate::pauli::{Pauli, PauliString};
use crate::sim::{apply_readout, evolve, CountsDistribution, DensityMatrix};

/// Coefficients below this magnitude are dropped on construction.
pub const COEFF_EPS: f64 = 1e-12;

/// Largest register handled by [`exact_ground_energy`].
pub const MAX_EXACT_QUBITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct PauliHamiltonian {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliHamiltonian {
    /// Merges duplicate strings, drops near-zero coefficients and sorts terms
    /// by string.
    pub fn new(n_qubits: usize, terms: Vec<(f64, PauliString)>) -> Result<Self> {
        let mut merged: BTreeMap<PauliString, f64> = BTreeMap::new();
        for (c, p) in terms {
            if p.len() != n_qubits {
                return Err(Error::InvalidPauli(format!(
                    "{p} has length {}, expected {n_qubits}",
                    p.len()
                )));
            }
            if !c.is_finite() {
                return Err(Error::InvalidPauli(format!("coefficient of {p} is not finite")));
            }
            *merged.entry(p).or_insert(0.0) += c;
        }
        let terms = merged
            .into_iter()
            .filter(|(p, c)| {
                let keep = c.abs() >= COEFF_EPS;
                if !keep {
                    log::warn!("dropping negligible term {c:e} {p}");
                }
                keep
            })
            .map(|(p, c)| (c, p))
            .collect();
        Ok(Self { n_qubits, terms })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    /// Dense `Σ c_k P_k`.
    pub fn matrix(&self) -> DMatrix<C64> {
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for (c, p) in &self.terms {
            m += p.matrix() * C64::new(*c, 0.0);
        }
        m
    }

    /// Tr[Hρ]
    pub fn expectation(&self, rho: &DensityMatrix) -> f64 {
        self.terms
            .iter()
            .map(|(c, p)| c * rho.pauli_expectation(p))
            .sum()
    }

    /// Text form accepted by [`PauliHamiltonian::parse`].
    pub fn to_text(&self) -> String {
        self.terms
            .iter()
            .map(|(c, p)| format!("{c} {p}\n"))
            .collect()
    }

    /// One `coefficient pauli_string` per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut n = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |reason: String| Error::HamiltonianParse {
                line: line_no,
                reason,
            };
            let mut parts = line.split_whitespace();
            let (coeff, pauli) = match (parts.next(), parts.next(), parts.next()) {
                (Some(c), Some(p), None) => (c, p),
                _ => return Err(bad("expected `coefficient pauli_string`".into())),
            };
            // accept the unicode minus sign as well
            let coeff: f64 = coeff
                .replace('\u{2212}', "-")
                .parse()
                .map_err(|_| bad(format!("bad coefficient {coeff:?}")))?;
            let pauli: PauliString = pauli
                .parse()
                .map_err(|_| bad(format!("bad Pauli string {pauli:?}")))?;
            match n {
                None => n = Some(pauli.len()),
                Some(n) if n != pauli.len() => {
                    return Err(bad(format!(
                        "string {pauli} has length {}, earlier terms have {n}",
                        pauli.len()
                    )))
                }
                _ => {}
            }
            terms.push((coeff, pauli));
        }
        let n = n.ok_or(Error::HamiltonianParse {
            line: 0,
            reason: "no terms".into(),
        })?;
        Self::new(n, terms)
    }
}

pub fn load_hamiltonian(path: impl AsRef<Path>) -> Result<PauliHamiltonian> {
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    PauliHamiltonian::parse(&text)
}

/// Open-chain transverse-field Ising model `−J Σ Z_i Z_{i+1} − g Σ X_i`.
pub fn tfim_hamiltonian(n: usize, j: f64, g: f64) -> Result<PauliHamiltonian> {
    if n < 2 {
        return Err(Error::InvalidPauli(format!("TFIM needs at least 2 sites, got {n}")));
    }
    let mut terms = Vec::new();
    for i in 0..n - 1 {
        let mut ops = vec![Pauli::I; n];
        ops[i] = Pauli::Z;
        ops[i + 1] = Pauli::Z;
        terms.push((-j, PauliString::new(ops)));
    }
    for i in 0..n {
        terms.push((-g, PauliString::single(n, i, Pauli::X)));
    }
    PauliHamiltonian::new(n, terms)
}

/// Smallest eigenvalue of the dense Hamiltonian and a matching eigenvector.
pub fn exact_ground_energy(h: &PauliHamiltonian) -> Result<(f64, Vec<C64>)> {
    if h.n_qubits > MAX_EXACT_QUBITS {
        return Err(Error::DimensionOverflow {
            what: "exact diagonalization",
            n_qubits: h.n_qubits,
            limit: MAX_EXACT_QUBITS,
        });
    }
    let real = h.terms.iter().all(|(_, p)| p.y_count() % 2 == 0);
    if real {
        let m = h.matrix().map(|z| z.re);
        let eig = SymmetricEigen::new(m);
        let k = argmin(eig.eigenvalues.as_slice());
        let v = eig.eigenvectors.column(k).iter().map(|&x| C64::new(x, 0.0)).collect();
        Ok((eig.eigenvalues[k], v))
    } else {
        let eig = SymmetricEigen::new(h.matrix());
        let k = argmin(eig.eigenvalues.as_slice());
        Ok((eig.eigenvalues[k], eig.eigenvectors.column(k).iter().copied().collect()))
    }
}

fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty spectrum")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Entanglement {
    Full,
    Circular,
}

impl Entanglement {
    /// CX pairs of one entangling layer.
    pub fn pairs(self, n: usize) -> Vec<(usize, usize)> {
        match self {
            Entanglement::Full => (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
            Entanglement::Circular if n == 2 => vec![(0, 1)],
            Entanglement::Circular if n < 2 => vec![],
            Entanglement::Circular => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzSpec {
    pub n_qubits: usize,
    pub reps: usize,
    pub entanglement: Entanglement,
}

impl AnsatzSpec {
    pub fn n_params(&self) -> usize {
        2 * self.n_qubits * (self.reps + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 || self.n_qubits == 0 {
            return Err(Error::Config(
                "ansatz needs at least one qubit and one repetition".into(),
            ));
        }
        Ok(())
    }
}

/// `reps` blocks of RY+RZ on every qubit and a CX layer, then a final
/// rotation layer. Slot `2·(layer·n + q)` is the RY angle of qubit `q`,
/// the next slot its RZ angle.
pub fn su2_ansatz(spec: &AnsatzSpec) -> Result<(Vec<Gate>, Vec<String>)> {
    spec.validate()?;
    let n = spec.n_qubits;
    let mut gates = Vec::new();
    let mut slot = 0;
    for layer in 0..=spec.reps {
        for q in 0..n {
            gates.push(Gate::one(GateKind::Ry(Angle::Param(slot)), q));
            gates.push(Gate::one(GateKind::Rz(Angle::Param(slot + 1)), q));
            slot += 2;
        }
        if layer < spec.reps {
            gates.extend(spec.entanglement.pairs(n).into_iter().map(|(c, t)| Gate::cx(c, t)));
        }
    }
    let names = (0..slot).map(|k| format!("theta{k}")).collect();
    Ok((gates, names))
}

/// The ansatz followed by a measurement of every qubit, scheduled ALAP.
pub fn ansatz_circuit(spec: &AnsatzSpec, durations: &DurationTable) -> Result<TimedCircuit> {
    let (mut gates, names) = su2_ansatz(spec)?;
    gates.extend((0..spec.n_qubits).map(|q| Gate::one(GateKind::Measure, q)));
    schedule_alap(spec.n_qubits, &gates, names, durations)
}

/// Terms sharing one qubit-wise measurement basis.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementGroup {
    /// Per-qubit basis; `I` where no term in the group acts.
    pub basis: Vec<Pauli>,
    /// Indices into the Hamiltonian's term list.
    pub terms: Vec<usize>,
}

/// Greedy first-fit grouping of the non-identity terms by qubit-wise
/// commutation.
pub fn group_terms(h: &PauliHamiltonian) -> Vec<MeasurementGroup> {
    let mut groups: Vec<MeasurementGroup> = Vec::new();
    for (k, (_, p)) in h.terms.iter().enumerate() {
        if p.support() == 0 {
            continue;
        }
        let fits = |g: &MeasurementGroup| {
            g.basis
                .iter()
                .zip(p.ops())
                .all(|(&b, &o)| b == Pauli::I || o == Pauli::I || b == o)
        };
        match groups.iter_mut().find(|g| fits(g)) {
            Some(g) => {
                for (b, &o) in g.basis.iter_mut().zip(p.ops()) {
                    if o != Pauli::I {
                        *b = o;
                    }
                }
                g.terms.push(k);
            }
            None => groups.push(MeasurementGroup {
                basis: p.ops().to_vec(),
                terms: vec![k],
            }),
        }
    }
    groups
}

/// Rotates `rho` so a Z-basis measurement reads out `basis`:
/// X → H, Y → RZ(−π/2) then H.
pub fn rotate_to_basis(rho: &DensityMatrix, basis: &[Pauli]) -> DensityMatrix {
    let h = GateKind::H.matrix_1q(&[]).expect("1q");
    let sdg = linalg::rz(-FRAC_PI_2);
    let mut out = rho.clone();
    for (q, b) in basis.iter().enumerate() {
        match b {
            Pauli::X => out.apply_1q(&h, q),
            Pauli::Y => {
                out.apply_1q(&sdg, q);
                out.apply_1q(&h, q);
            }
            _ => {}
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Tr[Hρ] directly.
    Exact,
    /// Per-basis outcome distributions, readout error and optional MEM.
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub realizations: usize,
    pub seed: u64,
    pub estimator: Estimator,
    /// `None` uses the infinite-shot distribution.
    pub shots: Option<u64>,
    /// Apply the model's readout error in sampled mode.
    pub readout: bool,
    /// Calibration used to correct sampled distributions.
    pub mem: Option<ReadoutCalibration>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            realizations: 32,
            seed: 0,
            estimator: Estimator::Exact,
            shots: None,
            readout: true,
            mem: None,
        }
    }
}

impl SimOptions {
    pub fn exact(realizations: usize, seed: u64) -> Self {
        Self {
            realizations,
            seed,
            ..Self::default()
        }
    }
}

/// Shot samplers use the upper half of the stream space; detuning
/// realizations use the lower half.
const SHOT_STREAMS: u64 = 1 << 63;

/// Energy estimate of `tc` at `params` under `noise`.
pub fn objective(
    tc: &TimedCircuit,
    params: &[f64],
    h: &PauliHamiltonian,
    noise: &NoiseModel,
    opts: &SimOptions,
) -> Result<f64> {
    if h.n_qubits != tc.n_qubits {
        return Err(Error::DimensionMismatch(format!(
            "Hamiltonian acts on {} qubits, circuit has {}",
            h.n_qubits, tc.n_qubits
        )));
    }
    let rho = evolve(tc, params, noise, opts.realizations, opts.seed)?;
    match opts.estimator {
        Estimator::Exact => Ok(h.expectation(&rho)),
        Estimator::Sampled => sampled_energy(&rho, h, noise, opts),
    }
}

/// Sampled-mode energy of a final state.
pub fn sampled_energy(
    rho: &DensityMatrix,
    h: &PauliHamiltonian,
    noise: &NoiseModel,
    opts: &SimOptions,
) -> Result<f64> {
    let n = rho.n_qubits();
    if let Some(cal) = &opts.mem {
        if cal.n_qubits() != n {
            return Err(Error::DimensionMismatch(format!(
                "calibration covers {} qubits, circuit has {n}",
                cal.n_qubits()
            )));
        }
    }
    let mut energy: f64 = h
        .terms
        .iter()
        .filter(|(_, p)| p.support() == 0)
        .map(|(c, _)| c)
        .sum();
    for (gi, group) in group_terms(h).iter().enumerate() {
        let rotated = rotate_to_basis(rho, &group.basis);
        let ideal: Vec<f64> = rotated.probabilities().iter().map(|p| p.max(0.0)).collect();
        let total: f64 = ideal.iter().sum();
        let ideal: Vec<f64> = ideal.iter().map(|p| p / total).collect();
        let probs = if opts.readout {
            apply_readout(&ideal, n, noise)
        } else {
            ideal
        };
        let mut dist = CountsDistribution::exact(n, probs);
        if let Some(shots) = opts.shots {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(SHOT_STREAMS + gi as u64);
            dist = dist.sample(shots, &mut rng);
        }
        if let Some(cal) = &opts.mem {
            dist = mem_correct(&dist, cal);
        }
        for &k in &group.terms {
            let (c, p) = &h.terms[k];
            energy += c * dist.parity_expectation(p.support());
        }
    }
    Ok(energy)
}
