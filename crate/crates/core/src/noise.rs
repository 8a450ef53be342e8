//! Noise model: per-qubit decoherence and detuning, per-gate depolarizing
//! error, readout confusion, and the gate duration table.
//!
//! The on-disk form is TOML with per-qubit arrays. An array of length one is
//! broadcast to every qubit.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::{DurationTable, GateKind, CYCLE_SECONDS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetuningMode {
    None,
    /// Fixed detuning `omega` on every run.
    Systematic,
    /// Detuning drawn once per realization from N(omega, sigma²).
    QuasiStatic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitNoise {
    /// Amplitude-damping time in seconds (`f64::INFINITY` disables it).
    pub t1: f64,
    /// Coherence time in seconds.
    pub t2: f64,
    pub detuning: DetuningMode,
    /// Mean detuning in rad/s.
    pub omega: f64,
    /// Detuning spread in rad/s (quasi-static only).
    pub sigma: f64,
    /// Probability of reading 1 when the qubit is in |0⟩.
    pub p01: f64,
    /// Probability of reading 0 when the qubit is in |1⟩.
    pub p10: f64,
}

impl QubitNoise {
    pub fn ideal() -> Self {
        Self {
            t1: f64::INFINITY,
            t2: f64::INFINITY,
            detuning: DetuningMode::None,
            omega: 0.0,
            sigma: 0.0,
            p01: 0.0,
            p10: 0.0,
        }
    }

    /// Pure-dephasing rate 1/T2 − 1/(2·T1), clamped at zero.
    pub fn dephasing_rate(&self) -> f64 {
        (1.0 / self.t2 - 0.5 / self.t1).max(0.0)
    }

    fn validate(&self, q: usize) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidNoise(format!("qubit {q}: {what}")));
        if !(self.t1 > 0.0) || !(self.t2 > 0.0) {
            return bad("T1 and T2 must be positive".into());
        }
        if self.t2 > 2.0 * self.t1 * (1.0 + 1e-12) {
            return bad(format!("T2 = {} exceeds 2·T1 = {}", self.t2, 2.0 * self.t1));
        }
        if !self.omega.is_finite() || !self.sigma.is_finite() || self.sigma < 0.0 {
            return bad("detuning omega must be finite and sigma finite and non-negative".into());
        }
        for (name, p) in [("p01", self.p01), ("p10", self.p10)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateErrors {
    pub one_qubit: f64,
    pub two_qubit: f64,
    /// Overrides keyed by gate mnemonic (`x`, `rz`, `cx`, ...).
    pub per_kind: BTreeMap<String, f64>,
}

impl Default for GateErrors {
    fn default() -> Self {
        Self {
            one_qubit: 3e-4,
            two_qubit: 1e-2,
            per_kind: BTreeMap::new(),
        }
    }
}

impl GateErrors {
    pub fn none() -> Self {
        Self {
            one_qubit: 0.0,
            two_qubit: 0.0,
            per_kind: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseFile", into = "NoiseFile")]
pub struct NoiseModel {
    pub cycle_seconds: f64,
    pub durations: DurationTable,
    pub gate_error: GateErrors,
    /// One entry per qubit, or a single entry shared by all qubits.
    pub qubits: Vec<QubitNoise>,
    /// Full column-stochastic confusion matrix `A[read][true]`; overrides the
    /// per-qubit flip probabilities when present.
    pub confusion: Option<Vec<Vec<f64>>>,
}

impl Default for NoiseModel {
    /// T1 = 100 µs, T2 = 80 µs, quasi-static detuning with σ = 2π·5 kHz,
    /// p_1q = 3e-4, p_cx = 1e-2, symmetric 2% readout flips.
    fn default() -> Self {
        Self {
            cycle_seconds: CYCLE_SECONDS,
            durations: DurationTable::default(),
            gate_error: GateErrors::default(),
            qubits: vec![QubitNoise {
                t1: 100e-6,
                t2: 80e-6,
                detuning: DetuningMode::QuasiStatic,
                omega: 0.0,
                sigma: 2.0 * PI * 5e3,
                p01: 0.02,
                p10: 0.02,
            }],
            confusion: None,
        }
    }
}

impl NoiseModel {
    pub fn ideal() -> Self {
        Self {
            cycle_seconds: CYCLE_SECONDS,
            durations: DurationTable::default(),
            gate_error: GateErrors::none(),
            qubits: vec![QubitNoise::ideal()],
            confusion: None,
        }
    }

    /// Same parameters on every qubit.
    pub fn uniform(qubit: QubitNoise, gate_error: GateErrors) -> Self {
        Self {
            qubits: vec![qubit],
            gate_error,
            ..Self::ideal()
        }
    }

    pub fn qubit(&self, q: usize) -> &QubitNoise {
        if self.qubits.len() == 1 {
            &self.qubits[0]
        } else {
            &self.qubits[q]
        }
    }

    pub fn map_qubits(mut self, f: impl Fn(&mut QubitNoise)) -> Self {
        self.qubits.iter_mut().for_each(f);
        self
    }

    pub fn gate_error(&self, kind: &GateKind) -> f64 {
        match kind {
            GateKind::Delay(_) | GateKind::Measure => 0.0,
            _ => self
                .gate_error
                .per_kind
                .get(kind.name())
                .copied()
                .unwrap_or(if kind.arity() == 2 {
                    self.gate_error.two_qubit
                } else {
                    self.gate_error.one_qubit
                }),
        }
    }

    /// True when some qubit needs more than one detuning realization.
    pub fn is_stochastic(&self) -> bool {
        self.qubits
            .iter()
            .any(|q| q.detuning == DetuningMode::QuasiStatic && q.sigma > 0.0)
    }

    pub fn has_readout_error(&self) -> bool {
        self.confusion.is_some() || self.qubits.iter().any(|q| q.p01 > 0.0 || q.p10 > 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cycle_seconds > 0.0) {
            return Err(Error::InvalidNoise("cycle_seconds must be positive".into()));
        }
        self.durations.validate()?;
        if self.qubits.is_empty() {
            return Err(Error::InvalidNoise("no qubit parameters given".into()));
        }
        for (q, params) in self.qubits.iter().enumerate() {
            params.validate(q)?;
        }
        let probs = std::iter::once(("one_qubit", self.gate_error.one_qubit))
            .chain(std::iter::once(("two_qubit", self.gate_error.two_qubit)))
            .chain(self.gate_error.per_kind.iter().map(|(k, v)| (k.as_str(), *v)));
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidNoise(format!(
                    "gate error {name} = {p} is not a probability"
                )));
            }
        }
        if let Some(a) = &self.confusion {
            let dim = a.len();
            if !dim.is_power_of_two() || a.iter().any(|row| row.len() != dim) {
                return Err(Error::InvalidNoise(
                    "confusion matrix must be square with a power-of-two size".into(),
                ));
            }
            for j in 0..dim {
                let col: f64 = a.iter().map(|row| row[j]).sum();
                if (col - 1.0).abs() > 1e-9 || a.iter().any(|row| !(0.0..=1.0).contains(&row[j])) {
                    return Err(Error::InvalidNoise(format!(
                        "confusion column {j} is not a probability vector"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks that the model covers an `n`-qubit register.
    pub fn check_qubits(&self, n: usize) -> Result<()> {
        if self.qubits.len() != 1 && self.qubits.len() < n {
            return Err(Error::InvalidNoise(format!(
                "model lists {} qubits, circuit has {n}",
                self.qubits.len()
            )));
        }
        if let Some(a) = &self.confusion {
            if a.len() != 1 << n {
                return Err(Error::InvalidNoise(format!(
                    "confusion matrix is {0}x{0}, circuit needs {1}x{1}",
                    a.len(),
                    1usize << n
                )));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidNoise(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("noise model serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::InvalidNoise(msg) => {
                Error::InvalidNoise(format!("{}: {msg}", path.as_ref().display()))
            }
            other => other,
        })
    }
}

/// On-disk layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseFile {
    #[serde(default = "default_cycle")]
    cycle_seconds: f64,
    #[serde(default)]
    durations: DurationTable,
    #[serde(default)]
    gate_error: GateErrors,
    qubits: QubitArrays,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    readout: Option<ReadoutFile>,
}

fn default_cycle() -> f64 {
    CYCLE_SECONDS
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReadoutFile {
    confusion: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QubitArrays {
    #[serde(with = "seconds")]
    t1: Vec<f64>,
    #[serde(with = "seconds")]
    t2: Vec<f64>,
    #[serde(default)]
    detuning_mode: Vec<DetuningMode>,
    #[serde(default)]
    detuning_omega: Vec<f64>,
    #[serde(default)]
    detuning_sigma: Vec<f64>,
    #[serde(default)]
    p01: Vec<f64>,
    #[serde(default)]
    p10: Vec<f64>,
}

impl TryFrom<NoiseFile> for NoiseModel {
    type Error = Error;

    fn try_from(file: NoiseFile) -> Result<Self> {
        let a = &file.qubits;
        let lens = [
            a.t1.len(),
            a.t2.len(),
            a.detuning_mode.len(),
            a.detuning_omega.len(),
            a.detuning_sigma.len(),
            a.p01.len(),
            a.p10.len(),
        ];
        let n = lens.iter().copied().max().unwrap_or(0);
        if n == 0 {
            return Err(Error::InvalidNoise("qubits.t1 and qubits.t2 are required".into()));
        }
        if let Some(bad) = lens.iter().find(|&&l| l > 1 && l != n) {
            return Err(Error::InvalidNoise(format!(
                "per-qubit arrays disagree in length ({bad} vs {n})"
            )));
        }
        let pick = |v: &[f64], q: usize, default: f64| match v.len() {
            0 => default,
            1 => v[0],
            _ => v[q],
        };
        let qubits = (0..n)
            .map(|q| QubitNoise {
                t1: pick(&a.t1, q, f64::INFINITY),
                t2: pick(&a.t2, q, f64::INFINITY),
                detuning: match a.detuning_mode.len() {
                    0 => DetuningMode::None,
                    1 => a.detuning_mode[0],
                    _ => a.detuning_mode[q],
                },
                omega: pick(&a.detuning_omega, q, 0.0),
                sigma: pick(&a.detuning_sigma, q, 0.0),
                p01: pick(&a.p01, q, 0.0),
                p10: pick(&a.p10, q, 0.0),
            })
            .collect();
        let model = NoiseModel {
            cycle_seconds: file.cycle_seconds,
            durations: file.durations,
            gate_error: file.gate_error,
            qubits,
            confusion: file.readout.map(|r| r.confusion),
        };
        model.validate()?;
        Ok(model)
    }
}

impl From<NoiseModel> for NoiseFile {
    fn from(m: NoiseModel) -> Self {
        let col = |f: fn(&QubitNoise) -> f64| m.qubits.iter().map(f).collect::<Vec<_>>();
        NoiseFile {
            cycle_seconds: m.cycle_seconds,
            durations: m.durations,
            gate_error: m.gate_error.clone(),
            qubits: QubitArrays {
                t1: col(|q| q.t1),
                t2: col(|q| q.t2),
                detuning_mode: m.qubits.iter().map(|q| q.detuning).collect(),
                detuning_omega: col(|q| q.omega),
                detuning_sigma: col(|q| q.sigma),
                p01: col(|q| q.p01),
                p10: col(|q| q.p10),
            },
            readout: m.confusion.clone().map(|confusion| ReadoutFile { confusion }),
        }
    }
}

/// Times that may be infinite. Written as the string `"inf"` so the value
/// survives JSON; TOML's native `inf` is accepted on input.
mod seconds {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|&x| {
                if x.is_infinite() {
                    Repr::Text("inf".into())
                } else {
                    Repr::Num(x)
                }
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?
            .into_iter()
            .map(|r| match r {
                Repr::Num(x) => Ok(x),
                Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
                Repr::Text(t) => Err(serde::de::Error::custom(format!("bad time {t:?}"))),
            })
            .collect()
    }
}
