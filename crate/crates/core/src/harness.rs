//! Command implementations behind the `slacktune` binary. Each command
//! writes one JSON document and maps failures onto exit codes.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{dd_sweep, spin_echo_sweep, PositionPoint, RoundsPoint, DD_WINDOW, SPIN_ECHO_DELAY};
use crate::circuit::Cycles;
use crate::error::Error;
use crate::experiment::{run_resolved, ExperimentConfig, ExperimentResult, LadderEntry, NoiseSpec, SCHEMA_VERSION};
use crate::mitigation::{mem_calibrate, mem_correct, DDKind, MemMode};
use crate::noise::NoiseModel;
use crate::observables::SimOptions;
use crate::sim::{apply_readout, CountsDistribution};
use crate::tuner::SweepGrid;

/// Realizations used by the micro-benchmarks.
pub const BENCH_REALIZATIONS: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Bad or unreadable input.
    #[error("{0}")]
    Input(Error),
    /// Failure while running or writing results.
    #[error("{0}")]
    Runtime(Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Input(_) => 2,
            HarnessError::Runtime(_) => 3,
        }
    }
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;

fn runtime(e: Error) -> HarnessError {
    HarnessError::Runtime(e)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(out: &Path, value: &T) -> HarnessResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("result serializes");
    text.push('\n');
    std::fs::write(out, text).map_err(|e| runtime(Error::io(out, e)))
}

/// The default model when no path is given.
pub fn load_noise(path: Option<&Path>) -> HarnessResult<NoiseModel> {
    match path {
        Some(p) => NoiseModel::load(p).map_err(HarnessError::Input),
        None => Ok(NoiseModel::default()),
    }
}

/// Command-line overrides applied on top of an experiment config.
#[derive(Debug, Clone, Default)]
pub struct VqeOverrides {
    pub seed: Option<u64>,
    pub noise: Option<PathBuf>,
    pub ladder: Option<Vec<LadderEntry>>,
    pub grid: Option<SweepGrid>,
}

pub fn cmd_vqe(config: &Path, out: &Path, overrides: &VqeOverrides) -> HarnessResult<ExperimentResult> {
    let mut cfg = ExperimentConfig::load(config).map_err(HarnessError::Input)?;
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(p) = &overrides.noise {
        cfg.noise = NoiseSpec::File(std::env::current_dir().map(|d| d.join(p)).unwrap_or(p.clone()));
    }
    if let Some(l) = &overrides.ladder {
        cfg.ladder = l.clone();
    }
    if let Some(g) = &overrides.grid {
        cfg.sweep = g.clone();
    }
    let base = config.parent().unwrap_or(Path::new("."));
    let resolved = cfg.resolve(base).map_err(HarnessError::Input)?;
    let result = run_resolved(&resolved).map_err(runtime)?;
    write_json(out, &result)?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinEchoReport {
    pub schema_version: u32,
    pub seed: u64,
    pub realizations: usize,
    pub window: Cycles,
    pub noise: NoiseModel,
    pub points: Vec<PositionPoint>,
    /// Index of the best position.
    pub argmax: usize,
}

pub fn cmd_spin_echo(noise: Option<&Path>, positions: usize, out: &Path, seed: u64) -> HarnessResult<SpinEchoReport> {
    let noise = load_noise(noise)?;
    if positions < 2 {
        return Err(HarnessError::Input(Error::Config("positions must be at least 2".into())));
    }
    let points = spin_echo_sweep(&noise, positions, BENCH_REALIZATIONS, seed).map_err(runtime)?;
    let report = SpinEchoReport {
        schema_version: SCHEMA_VERSION,
        seed,
        realizations: BENCH_REALIZATIONS,
        window: SPIN_ECHO_DELAY,
        noise,
        argmax: argmax(points.iter().map(|p| p.fidelity)),
        points,
    };
    write_json(out, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdSweepReport {
    pub schema_version: u32,
    pub seed: u64,
    pub realizations: usize,
    pub kind: DDKind,
    pub window: Cycles,
    pub noise: NoiseModel,
    pub points: Vec<RoundsPoint>,
    /// Round count with the highest fidelity; the smallest on ties.
    pub argmax: usize,
}

pub fn cmd_dd_sweep(
    noise: Option<&Path>,
    kind: DDKind,
    window: Option<Cycles>,
    out: &Path,
    seed: u64,
) -> HarnessResult<DdSweepReport> {
    let noise = load_noise(noise)?;
    let window = window.unwrap_or(DD_WINDOW);
    if window == 0 {
        return Err(HarnessError::Input(Error::Config("window must be at least 1 cycle".into())));
    }
    let points = dd_sweep(&noise, kind, window, BENCH_REALIZATIONS, seed).map_err(runtime)?;
    let report = DdSweepReport {
        schema_version: SCHEMA_VERSION,
        seed,
        realizations: BENCH_REALIZATIONS,
        kind,
        window,
        noise,
        argmax: points[argmax(points.iter().map(|p| p.fidelity))].rounds,
        points,
    };
    write_json(out, &report)?;
    Ok(report)
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemCheckReport {
    pub schema_version: u32,
    pub n_qubits: usize,
    pub seed: u64,
    pub shots: Option<u64>,
    pub mode: MemMode,
    pub tv_before: f64,
    pub tv_after: f64,
}

/// Test distribution with `p_i ∝ i + 1`.
pub fn mem_test_distribution(n: usize) -> CountsDistribution {
    let dim = 1usize << n;
    let total = (dim * (dim + 1) / 2) as f64;
    CountsDistribution::exact(n, (0..dim).map(|i| (i + 1) as f64 / total).collect())
}

/// Calibrates readout, pushes the test distribution through the readout
/// channel (sampled when `shots` is set) and corrects it.
pub fn cmd_mem_check(
    n: usize,
    noise: Option<&Path>,
    shots: Option<u64>,
    mode: MemMode,
    seed: u64,
    out: Option<&Path>,
) -> HarnessResult<MemCheckReport> {
    let noise = load_noise(noise)?;
    if n == 0 {
        return Err(HarnessError::Input(Error::Config("n must be at least 1".into())));
    }
    noise.check_qubits(n).map_err(HarnessError::Input)?;
    if shots == Some(0) {
        return Err(HarnessError::Input(Error::Config("shots must be at least 1".into())));
    }
    let opts = SimOptions {
        realizations: 1,
        shots,
        ..SimOptions::exact(1, seed)
    };
    let cal = mem_calibrate(n, &noise, &opts, mode).map_err(runtime)?;
    let truth = mem_test_distribution(n);
    let mut raw = CountsDistribution::exact(n, apply_readout(&truth.probs, n, &noise));
    if let Some(s) = shots {
        // separate stream from the calibration columns
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        raw = raw.sample(s, &mut rng);
    }
    let corrected = mem_correct(&raw, &cal);
    let report = MemCheckReport {
        schema_version: SCHEMA_VERSION,
        n_qubits: n,
        seed,
        shots,
        mode,
        tv_before: raw.total_variation(&truth),
        tv_after: corrected.total_variation(&truth),
    };
    if let Some(out) = out {
        write_json(out, &report)?;
    }
    Ok(report)
}
