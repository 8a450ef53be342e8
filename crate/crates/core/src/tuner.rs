//! SPSA over ansatz angles and the per-window mitigation sweep.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::{movable_gate, IdleWindow, TimedCircuit};
use crate::error::{Error, Result};
use crate::mitigation::{apply_config, max_rounds, DDKind, MitigationConfig, WindowSetting};
use crate::noise::NoiseModel;
use crate::observables::{objective, PauliHamiltonian, SimOptions};

/// Objectives closer than this are treated as equal when picking a winner.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpsaSettings {
    /// Step gain; calibrated from the first gradient estimates when absent.
    pub a: Option<f64>,
    pub c: f64,
    /// Stability offset; `0.1 · max_iters` when absent.
    #[serde(rename = "A")]
    pub big_a: Option<f64>,
    pub alpha: f64,
    pub gamma: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Size in radians of the first step of each component when `a` is
    /// calibrated.
    pub target_step: f64,
    /// Gradient samples used to calibrate `a`.
    pub calibration_samples: usize,
}

impl Default for SpsaSettings {
    fn default() -> Self {
        Self {
            a: None,
            c: 0.1,
            big_a: None,
            alpha: 0.602,
            gamma: 0.101,
            max_iters: 200,
            seed: 0,
            target_step: 0.1,
            calibration_samples: 25,
        }
    }
}

impl SpsaSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("spsa: {m}")));
        if self.a.is_some_and(|a| !(a > 0.0)) || !(self.c > 0.0) {
            return bad("a and c must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) || !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("alpha and gamma must lie in (0, 1]");
        }
        if self.big_a.is_some_and(|a| !(a >= 0.0)) {
            return bad("A must be non-negative");
        }
        if self.a.is_none() && (self.calibration_samples == 0 || !(self.target_step > 0.0)) {
            return bad("calibrating a needs samples and a positive target step");
        }
        Ok(())
    }

    pub fn stability(&self) -> f64 {
        self.big_a.unwrap_or(0.1 * self.max_iters as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub objective: f64,
    /// First 16 hex digits of the SHA-256 of the parameter vector.
    pub params_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneTrace {
    /// Entry 0 is the starting point; entry `k` follows update `k`.
    pub iterations: Vec<IterationRecord>,
    pub best_params: Vec<f64>,
    pub best_objective: f64,
    pub evaluations: usize,
    /// Step gain actually used.
    pub a: f64,
}

pub fn params_hash(theta: &[f64]) -> String {
    let mut h = Sha256::new();
    for x in theta {
        h.update(x.to_le_bytes());
    }
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Maps an angle into (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let y = x - 2.0 * PI * ((x - PI) / (2.0 * PI)).ceil();
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

struct Recorder {
    trace: TuneTrace,
}

impl Recorder {
    fn record(&mut self, theta: &[f64], value: f64) {
        self.trace.iterations.push(IterationRecord {
            objective: value,
            params_hash: params_hash(theta),
        });
        if value < self.trace.best_objective {
            self.trace.best_objective = value;
            self.trace.best_params = theta.to_vec();
        }
    }

    fn check(&self, iteration: usize, values: &[f64]) -> Result<()> {
        if values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFiniteObjective {
                iteration,
                trace: Box::new(self.trace.clone()),
            })
        }
    }
}

fn rademacher(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

fn offset(theta: &[f64], delta: &[f64], scale: f64) -> Vec<f64> {
    theta.iter().zip(delta).map(|(t, d)| t + scale * d).collect()
}

/// Simultaneous-perturbation stochastic approximation.
///
/// Each step evaluates `f` at `θ ± c_k Δ` for a Rademacher vector `Δ`,
/// moves against the resulting gradient estimate with gain `a_k` and wraps
/// the angles. Returns the best parameters seen, not the last ones.
pub fn spsa_minimize<F>(f: F, theta0: &[f64], s: &SpsaSettings) -> Result<TuneTrace>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    s.validate()?;
    if theta0.iter().any(|t| !t.is_finite()) {
        return Err(Error::Config("initial parameters must be finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let big_a = s.stability();
    let d = theta0.len();
    let mut theta: Vec<f64> = theta0.iter().copied().map(wrap_angle).collect();

    let f0 = f(&theta)?;
    let mut rec = Recorder {
        trace: TuneTrace {
            iterations: Vec::new(),
            best_params: theta.clone(),
            best_objective: f64::INFINITY,
            evaluations: 1,
            a: s.a.unwrap_or(0.0),
        },
    };
    rec.check(0, &[f0])?;
    rec.record(&theta, f0);

    let a = match s.a {
        Some(a) => a,
        None => {
            let mut total = 0.0;
            for _ in 0..s.calibration_samples {
                let delta = rademacher(&mut rng, d);
                let (fp, fm) = rayon::join(
                    || f(&offset(&theta, &delta, s.c)),
                    || f(&offset(&theta, &delta, -s.c)),
                );
                let (fp, fm) = (fp?, fm?);
                rec.trace.evaluations += 2;
                rec.check(0, &[fp, fm])?;
                total += (fp - fm).abs() / (2.0 * s.c);
            }
            let mean = total / s.calibration_samples as f64;
            let scale = s.target_step * (big_a + 1.0).powf(s.alpha);
            if mean > 0.0 {
                scale / mean
            } else {
                scale
            }
        }
    };
    rec.trace.a = a;

    for k in 0..s.max_iters {
        let ak = a / (k as f64 + 1.0 + big_a).powf(s.alpha);
        let ck = s.c / (k as f64 + 1.0).powf(s.gamma);
        let delta = rademacher(&mut rng, d);
        let (fp, fm) = rayon::join(
            || f(&offset(&theta, &delta, ck)),
            || f(&offset(&theta, &delta, -ck)),
        );
        let (fp, fm) = (fp?, fm?);
        rec.trace.evaluations += 2;
        rec.check(k + 1, &[fp, fm])?;
        let slope = (fp - fm) / (2.0 * ck);
        for (t, dl) in theta.iter_mut().zip(&delta) {
            // Δ_i = ±1, so dividing by it is multiplying by it
            *t = wrap_angle(*t - ak * slope * dl);
        }
        let v = f(&theta)?;
        rec.trace.evaluations += 1;
        rec.check(k + 1, &[v])?;
        rec.record(&theta, v);
    }
    Ok(rec.trace)
}

/// Which features a window sweep explores and how finely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    /// Gate positions per window, spread evenly over [0, 1].
    pub positions: usize,
    /// Round counts per DD kind, including 0, 1 and the maximum.
    pub rounds: usize,
    /// Cap on joint (position, rounds) points per window.
    pub max_points: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            positions: 9,
            rounds: 16,
            max_points: 64,
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.positions == 0 || self.rounds < 2 || self.max_points == 0 {
            return Err(Error::Config(
                "grid needs at least 1 position, 2 round counts and 1 point".into(),
            ));
        }
        Ok(())
    }
}

/// The mitigation features a sweep may use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Features {
    pub shift: bool,
    pub dd: Vec<DDKind>,
}

impl Features {
    pub fn dd_only(kinds: &[DDKind]) -> Self {
        Self {
            shift: false,
            dd: kinds.to_vec(),
        }
    }

    pub fn shift_only() -> Self {
        Self {
            shift: true,
            dd: vec![],
        }
    }

    pub fn shift_and(kind: DDKind) -> Self {
        Self {
            shift: true,
            dd: vec![kind],
        }
    }
}

/// `count` evenly spaced points of [0, 1], always including 1.
pub fn fraction_grid(count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![1.0];
    }
    (0..count).map(|i| i as f64 / (count - 1) as f64).collect()
}

/// Round counts 0..=max thinned to at most `points` values; 0, 1 and `max`
/// are always kept.
pub fn round_grid(max: usize, points: usize) -> Vec<usize> {
    if max < points || points < 3 {
        let mut all: Vec<usize> = (0..=max).collect();
        if points < 3 && max >= 2 {
            all = vec![0, 1, max];
        }
        return all;
    }
    let mut out = vec![0];
    let steps = points - 2;
    for i in 0..=steps {
        let r = 1 + ((i * (max - 1)) as f64 / steps as f64).round() as usize;
        if out.last() != Some(&r) {
            out.push(r);
        }
    }
    out
}

/// Candidate settings for one window.
pub fn window_candidates(
    tc: &TimedCircuit,
    w: &IdleWindow,
    features: &Features,
    grid: &SweepGrid,
) -> Vec<WindowSetting> {
    let base = WindowSetting::baseline(w);
    let fractions = if features.shift && movable_gate(tc, w).is_some() {
        fraction_grid(grid.positions)
    } else {
        vec![1.0]
    };
    let kinds: Vec<(DDKind, usize)> = features
        .dd
        .iter()
        .map(|&k| (k, max_rounds(tc, w, k)))
        .filter(|&(_, m)| m > 0)
        .collect();
    let mut out: Vec<WindowSetting> = fractions.iter().map(|&f| base.with_fraction(f)).collect();
    if kinds.is_empty() {
        return out;
    }
    // joint points per kind, excluding the shared rounds = 0 column
    let budget = grid.max_points.saturating_sub(fractions.len()) / kinds.len();
    let per_fraction = (budget / fractions.len()).max(1);
    for (kind, max) in kinds {
        let rounds = round_grid(max, (per_fraction + 1).min(grid.rounds));
        for &f in &fractions {
            for &r in rounds.iter().filter(|&&r| r > 0) {
                out.push(base.with_fraction(f).with_dd(kind, r));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowTuning {
    pub window: IdleWindow,
    pub chosen: WindowSetting,
    /// Objective with only this window modified.
    pub objective: f64,
    /// Objective of the untouched circuit.
    pub baseline_objective: f64,
    pub candidates: usize,
    /// Candidates that could not be placed and were skipped.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSweep {
    pub config: MitigationConfig,
    pub windows: Vec<WindowTuning>,
}

/// Closer to baseline: fewer rounds, then a fraction nearer 1.
fn intervention(s: &WindowSetting) -> (usize, f64) {
    let rounds = if s.kind.is_some() { s.rounds } else { 0 };
    (rounds, 1.0 - s.fraction)
}

fn pick(cands: &[(WindowSetting, f64)]) -> (WindowSetting, f64) {
    let mut best = cands[0];
    for &(s, v) in &cands[1..] {
        let better = v < best.1 - TIE_TOL
            || ((v - best.1).abs() <= TIE_TOL && intervention(&s) < intervention(&best.0));
        if better {
            best = (s, v);
        }
    }
    best
}

/// Tunes each window on its own with every other window at baseline and
/// combines the per-window winners.
#[allow(clippy::too_many_arguments)]
pub fn tune_windows(
    tc: &TimedCircuit,
    theta: &[f64],
    h: &PauliHamiltonian,
    windows: &[IdleWindow],
    noise: &NoiseModel,
    opts: &SimOptions,
    features: &Features,
    grid: &SweepGrid,
) -> Result<WindowSweep> {
    grid.validate()?;
    let baseline = objective(tc, theta, h, noise, opts)?;
    let mut tunings = Vec::with_capacity(windows.len());
    for w in windows {
        let cands = window_candidates(tc, w, features, grid);
        let evaluated: Vec<Option<(WindowSetting, f64)>> = cands
            .par_iter()
            .map(|s| {
                if s.is_baseline() {
                    return Ok(Some((*s, baseline)));
                }
                let config = MitigationConfig { windows: vec![*s] };
                match apply_config(tc, windows, &config) {
                    Ok(circuit) => Ok(Some((*s, objective(&circuit, theta, h, noise, opts)?))),
                    Err(e) => {
                        log::debug!("skipping {s:?}: {e}");
                        Ok(None)
                    }
                }
            })
            .collect::<Result<_>>()?;
        let ok: Vec<(WindowSetting, f64)> = evaluated.iter().flatten().copied().collect();
        let (chosen, value) = pick(&ok);
        tunings.push(WindowTuning {
            window: *w,
            chosen,
            objective: value,
            baseline_objective: baseline,
            candidates: cands.len(),
            skipped: cands.len() - ok.len(),
        });
    }
    Ok(WindowSweep {
        config: MitigationConfig {
            windows: tunings.iter().map(|t| t.chosen).collect(),
        },
        windows: tunings,
    })
}
