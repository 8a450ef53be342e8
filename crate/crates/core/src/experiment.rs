//! Experiment configuration and the two-stage tuning flow: SPSA over the
//! ansatz angles, then the per-window mitigation sweeps, then the
//! evaluation ladder.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::{extract_idle_windows, Cycles, IdleWindow};
use crate::error::{Error, Result};
use crate::mitigation::{apply_config, mem_calibrate, DDKind, MemMode, MitigationConfig, ReadoutCalibration};
use crate::noise::NoiseModel;
use crate::observables::{
    ansatz_circuit, exact_ground_energy, objective, tfim_hamiltonian, AnsatzSpec, Entanglement, Estimator,
    PauliHamiltonian, SimOptions, MAX_EXACT_QUBITS,
};
use crate::pauli::PauliString;
use crate::tuner::{spsa_minimize, tune_windows, Features, SpsaSettings, SweepGrid, TuneTrace, WindowSweep};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum HamiltonianSpec {
    /// Open-chain TFIM on the ansatz register.
    Tfim {
        #[serde(rename = "J", alias = "j")]
        j: f64,
        g: f64,
    },
    /// A file of `coefficient pauli_string` lines.
    File { path: PathBuf },
    /// Terms given inline.
    Terms { terms: Vec<(f64, String)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoisePreset {
    Default,
    Ideal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseSpec {
    Preset(NoisePreset),
    File(PathBuf),
    Inline(NoiseModel),
}

impl NoiseSpec {
    pub fn resolve(&self, base: &Path) -> Result<NoiseModel> {
        match self {
            NoiseSpec::Preset(NoisePreset::Default) => Ok(NoiseModel::default()),
            NoiseSpec::Preset(NoisePreset::Ideal) => Ok(NoiseModel::ideal()),
            NoiseSpec::File(p) => NoiseModel::load(base.join(p)),
            NoiseSpec::Inline(m) => {
                m.validate()?;
                Ok(m.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    pub realizations: usize,
    pub estimator: Estimator,
    pub shots: Option<u64>,
    pub readout: bool,
    pub mem: bool,
    pub mem_mode: MemMode,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            realizations: 32,
            estimator: Estimator::Sampled,
            shots: None,
            readout: true,
            mem: true,
            mem_mode: MemMode::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderEntry {
    /// Raw readout, no mitigation.
    NoEm,
    /// MEM only.
    BaselineMem,
    DdXx1,
    DdXy41,
    TunedDd,
    TunedGs,
    TunedGsXy4,
}

impl LadderEntry {
    pub const ALL: [LadderEntry; 7] = [
        LadderEntry::NoEm,
        LadderEntry::BaselineMem,
        LadderEntry::DdXx1,
        LadderEntry::DdXy41,
        LadderEntry::TunedDd,
        LadderEntry::TunedGs,
        LadderEntry::TunedGsXy4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LadderEntry::NoEm => "no_em",
            LadderEntry::BaselineMem => "baseline_mem",
            LadderEntry::DdXx1 => "dd_xx_1",
            LadderEntry::DdXy41 => "dd_xy4_1",
            LadderEntry::TunedDd => "tuned_dd",
            LadderEntry::TunedGs => "tuned_gs",
            LadderEntry::TunedGsXy4 => "tuned_gs_xy4",
        }
    }
}

impl std::str::FromStr for LadderEntry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LadderEntry::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown ladder entry {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub ansatz: AnsatzSpec,
    pub hamiltonian: HamiltonianSpec,
    #[serde(default = "default_noise")]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub simulation: SimulationSettings,
    #[serde(default)]
    pub spsa: SpsaSettings,
    /// Tune angles against the noiseless simulator.
    #[serde(default)]
    pub noiseless_stage1: bool,
    /// Starting angles; drawn uniformly from [−π, π] when absent.
    #[serde(default)]
    pub initial_params: Option<Vec<f64>>,
    #[serde(default)]
    pub sweep: SweepGrid,
    /// DD kinds explored by the DD-only sweep.
    #[serde(default = "default_dd_kinds")]
    pub dd_kinds: Vec<DDKind>,
    /// Shortest window that is tuned.
    #[serde(default = "default_min_window")]
    pub min_window: Cycles,
    #[serde(default = "default_ladder")]
    pub ladder: Vec<LadderEntry>,
}

fn default_noise() -> NoiseSpec {
    NoiseSpec::Preset(NoisePreset::Default)
}

fn default_dd_kinds() -> Vec<DDKind> {
    vec![DDKind::XX, DDKind::XY4]
}

fn default_min_window() -> Cycles {
    2
}

fn default_ladder() -> Vec<LadderEntry> {
    LadderEntry::ALL.to_vec()
}

impl ExperimentConfig {
    /// A TFIM problem on the SU2 ansatz with every other setting at its default.
    pub fn tfim(n: usize, reps: usize, entanglement: Entanglement) -> Self {
        Self {
            seed: 0,
            ansatz: AnsatzSpec {
                n_qubits: n,
                reps,
                entanglement,
            },
            hamiltonian: HamiltonianSpec::Tfim { j: 1.0, g: 1.0 },
            noise: default_noise(),
            simulation: SimulationSettings::default(),
            spsa: SpsaSettings::default(),
            noiseless_stage1: false,
            initial_params: None,
            sweep: SweepGrid::default(),
            dd_kinds: default_dd_kinds(),
            min_window: default_min_window(),
            ladder: default_ladder(),
        }
    }

    /// TOML, or JSON when the file name ends in `.json`.
    pub fn from_str_for(path: &Path, text: &str) -> Result<Self> {
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_str_for(path, &text)
    }

    pub fn validate(&self) -> Result<()> {
        self.ansatz.validate()?;
        self.spsa.validate()?;
        self.sweep.validate()?;
        if self.simulation.realizations == 0 {
            return Err(Error::Config("simulation.realizations must be at least 1".into()));
        }
        if let Some(p) = &self.initial_params {
            if p.len() != self.ansatz.n_params() {
                return Err(Error::Config(format!(
                    "initial_params has {} entries, the ansatz has {} parameters",
                    p.len(),
                    self.ansatz.n_params()
                )));
            }
        }
        if self.ladder.is_empty() {
            return Err(Error::Config("ladder selection is empty".into()));
        }
        Ok(())
    }

    /// Loads every referenced file and returns a self-contained copy of the
    /// config together with the problem it describes.
    pub fn resolve(&self, base: &Path) -> Result<Resolved> {
        self.validate()?;
        let n = self.ansatz.n_qubits;
        let h = match &self.hamiltonian {
            HamiltonianSpec::Tfim { j, g } => tfim_hamiltonian(n, *j, *g)?,
            HamiltonianSpec::File { path } => crate::observables::load_hamiltonian(base.join(path))?,
            HamiltonianSpec::Terms { terms } => {
                let parsed = terms
                    .iter()
                    .map(|(c, s)| Ok((*c, s.parse::<PauliString>()?)))
                    .collect::<Result<Vec<_>>>()?;
                PauliHamiltonian::new(n, parsed)?
            }
        };
        if h.n_qubits() != n {
            return Err(Error::Config(format!(
                "Hamiltonian acts on {} qubits, ansatz has {n}",
                h.n_qubits()
            )));
        }
        let noise = self.noise.resolve(base)?;
        noise.check_qubits(n).map_err(|e| Error::Config(e.to_string()))?;
        let mut echo = self.clone();
        echo.noise = NoiseSpec::Inline(noise.clone());
        echo.hamiltonian = match &self.hamiltonian {
            HamiltonianSpec::File { .. } => HamiltonianSpec::Terms {
                terms: h.terms().iter().map(|(c, p)| (*c, p.to_string())).collect(),
            },
            other => other.clone(),
        };
        Ok(Resolved {
            config: echo,
            hamiltonian: h,
            noise,
        })
    }
}

pub struct Resolved {
    /// Self-contained copy of the config.
    pub config: ExperimentConfig,
    pub hamiltonian: PauliHamiltonian,
    pub noise: NoiseModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderResult {
    pub name: LadderEntry,
    pub objective: f64,
    /// `(baseline − objective) / |baseline − E0|`, against `baseline_mem`.
    pub improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub calibration_s: f64,
    pub stage1_s: f64,
    pub stage2_s: f64,
    pub ladder_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    /// SHA-256 over the canonical JSON of the resolved config.
    pub input_hash: String,
    pub e0: Option<f64>,
    pub theta_star: Vec<f64>,
    pub stage1: TuneTrace,
    pub calibration: Option<ReadoutCalibration>,
    pub windows: Vec<IdleWindow>,
    pub sweeps: Vec<(LadderEntry, WindowSweep)>,
    pub ladder: Vec<LadderResult>,
    /// Wall-clock seconds; the only field that differs between identical runs.
    pub timings: Timings,
}

impl ExperimentResult {
    pub fn objective(&self, entry: LadderEntry) -> Option<f64> {
        self.ladder.iter().find(|l| l.name == entry).map(|l| l.objective)
    }

    pub fn sweep(&self, entry: LadderEntry) -> Option<&WindowSweep> {
        self.sweeps.iter().find(|(e, _)| *e == entry).map(|(_, s)| s)
    }

    /// Checks the invariants a result file must satisfy.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("result: {m}")));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema version {}", self.schema_version));
        }
        let best = self
            .stage1
            .iterations
            .iter()
            .map(|r| r.objective)
            .fold(f64::INFINITY, f64::min);
        if best != self.stage1.best_objective {
            return bad("best objective is not the minimum of the trace".into());
        }
        let base = self.objective(LadderEntry::BaselineMem);
        for l in &self.ladder {
            let expected = match (base, self.e0) {
                (Some(b), Some(e0)) if (b - e0).abs() > 0.0 => Some((b - l.objective) / (b - e0).abs()),
                _ => None,
            };
            let same = match (expected, l.improvement) {
                (Some(a), Some(b)) => (a - b).abs() <= 1e-12 * a.abs().max(1.0),
                (None, None) => true,
                _ => false,
            };
            if !same {
                return bad(format!("improvement of {} is inconsistent", l.name.name()));
            }
        }
        Ok(())
    }
}

pub fn input_hash(config: &ExperimentConfig) -> String {
    let text = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(format!("blob {}\0{text}", text.len()).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Draws starting angles uniformly from [−π, π].
pub fn random_params(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| rng.random_range(-std::f64::consts::PI..=std::f64::consts::PI))
        .collect()
}

/// Runs the whole flow on an already-resolved experiment.
pub fn run_resolved(r: &Resolved) -> Result<ExperimentResult> {
    let cfg = &r.config;
    let (h, noise) = (&r.hamiltonian, &r.noise);
    let n = cfg.ansatz.n_qubits;
    let tc = ansatz_circuit(&cfg.ansatz, &noise.durations)?;
    let sim = &cfg.simulation;
    let sampled = sim.estimator == Estimator::Sampled;

    let clock = Instant::now();
    let raw_opts = SimOptions {
        realizations: sim.realizations,
        seed: cfg.seed,
        estimator: sim.estimator,
        shots: sim.shots,
        readout: sim.readout,
        mem: None,
    };
    let calibration = if sampled && sim.mem && sim.readout {
        Some(mem_calibrate(n, noise, &raw_opts, sim.mem_mode)?)
    } else {
        None
    };
    let opts = SimOptions {
        mem: calibration.clone(),
        ..raw_opts.clone()
    };
    let calibration_s = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let theta0 = cfg
        .initial_params
        .clone()
        .unwrap_or_else(|| random_params(cfg.ansatz.n_params(), cfg.seed));
    let spsa = SpsaSettings {
        seed: cfg.seed,
        ..cfg.spsa.clone()
    };
    let stage1 = if cfg.noiseless_stage1 {
        let ideal = NoiseModel::ideal();
        let exact = SimOptions::exact(1, cfg.seed);
        spsa_minimize(|t| objective(&tc, t, h, &ideal, &exact), &theta0, &spsa)?
    } else {
        spsa_minimize(|t| objective(&tc, t, h, noise, &opts), &theta0, &spsa)?
    };
    let theta = stage1.best_params.clone();
    let stage1_s = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let windows = extract_idle_windows(&tc, cfg.min_window);
    let mut sweeps = Vec::new();
    let wanted = |e: LadderEntry| cfg.ladder.contains(&e);
    let sweep_for = |features: Features| {
        tune_windows(&tc, &theta, h, &windows, noise, &opts, &features, &cfg.sweep)
    };
    if wanted(LadderEntry::TunedDd) {
        sweeps.push((LadderEntry::TunedDd, sweep_for(Features::dd_only(&cfg.dd_kinds))?));
    }
    if wanted(LadderEntry::TunedGs) {
        sweeps.push((LadderEntry::TunedGs, sweep_for(Features::shift_only())?));
    }
    if wanted(LadderEntry::TunedGsXy4) {
        sweeps.push((LadderEntry::TunedGsXy4, sweep_for(Features::shift_and(DDKind::XY4))?));
    }
    let stage2_s = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let e0 = (n <= MAX_EXACT_QUBITS)
        .then(|| exact_ground_energy(h).map(|(e, _)| e))
        .transpose()?;
    let mut values = Vec::new();
    for &entry in &cfg.ladder {
        let config = match entry {
            LadderEntry::NoEm | LadderEntry::BaselineMem => MitigationConfig::default(),
            LadderEntry::DdXx1 => MitigationConfig::uniform_dd(&tc, &windows, DDKind::XX, 1),
            LadderEntry::DdXy41 => MitigationConfig::uniform_dd(&tc, &windows, DDKind::XY4, 1),
            _ => sweeps
                .iter()
                .find(|(e, _)| *e == entry)
                .map(|(_, s)| s.config.clone())
                .expect("sweep ran for every selected tuned entry"),
        };
        let circuit = apply_config(&tc, &windows, &config)?;
        let o = if entry == LadderEntry::NoEm { &raw_opts } else { &opts };
        values.push((entry, objective(&circuit, &theta, h, noise, o)?));
    }
    let base = values
        .iter()
        .find(|(e, _)| *e == LadderEntry::BaselineMem)
        .map(|(_, v)| *v);
    let ladder = values
        .into_iter()
        .map(|(name, objective)| LadderResult {
            name,
            objective,
            improvement: match (base, e0) {
                (Some(b), Some(e0)) if (b - e0).abs() > 0.0 => Some((b - objective) / (b - e0).abs()),
                _ => None,
            },
        })
        .collect();
    let ladder_s = clock.elapsed().as_secs_f64();

    Ok(ExperimentResult {
        schema_version: SCHEMA_VERSION,
        input_hash: input_hash(cfg),
        config: cfg.clone(),
        e0,
        theta_star: theta,
        stage1,
        calibration,
        windows,
        sweeps,
        ladder,
        timings: Timings {
            calibration_s,
            stage1_s,
            stage2_s,
            ladder_s,
        },
    })
}

/// Resolves `cfg` against `base` and runs it.
pub fn run_experiment(cfg: &ExperimentConfig, base: &Path) -> Result<ExperimentResult> {
    run_resolved(&cfg.resolve(base)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_config_parses() {
        let text = r#"
            seed = 5
            ladder = ["no_em", "tuned_gs"]
            [ansatz]
            n_qubits = 2
            reps = 1
            entanglement = "full"
            [hamiltonian]
            kind = "tfim"
            J = 1.0
            g = 0.5
            [noise]
            preset = "ideal"
            [spsa]
            max_iters = 10
            [sweep]
            positions = 5
        "#;
        let cfg = ExperimentConfig::from_str_for(Path::new("x.toml"), text).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.ladder, vec![LadderEntry::NoEm, LadderEntry::TunedGs]);
        assert_eq!(cfg.hamiltonian, HamiltonianSpec::Tfim { j: 1.0, g: 0.5 });
        assert_eq!(cfg.sweep.rounds, 16);
        assert_eq!(cfg.spsa.alpha, 0.602);
        let r = cfg.resolve(Path::new(".")).unwrap();
        assert_eq!(r.noise, NoiseModel::ideal());
    }

    #[test]
    fn echo_round_trips_through_json() {
        let cfg = ExperimentConfig::tfim(2, 1, Entanglement::Circular);
        let r = cfg.resolve(Path::new(".")).unwrap();
        let json = serde_json::to_string(&r.config).unwrap();
        let back = ExperimentConfig::from_str_for(Path::new("echo.json"), &json).unwrap();
        assert_eq!(back, r.config);
        assert_eq!(input_hash(&back), input_hash(&r.config));
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let text = "[ansatz]\nn_qubits = 2\nreps = 1\nentanglement = \"ring\"\n[hamiltonian]\nkind = \"tfim\"\nJ = 1\ng = 1\n";
        assert!(matches!(
            ExperimentConfig::from_str_for(Path::new("c.toml"), text),
            Err(Error::Config(_))
        ));
    }
}
