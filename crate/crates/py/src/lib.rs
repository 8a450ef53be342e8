//! Python bindings for slacktune.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use slacktune_core::circuit::{extract_idle_windows, schedule_alap, IdleWindow};
use slacktune_core::mitigation::{apply_config, DDKind, MitigationConfig};
use slacktune_core::observables::{
    ansatz_circuit, exact_ground_energy, objective, tfim_hamiltonian, AnsatzSpec, Entanglement, PauliHamiltonian,
    SimOptions,
};
use slacktune_core::sim::{evolve, measure_distribution};
use slacktune_core::{benchmarks, experiment, qasm, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Qasm(_) | Error::Io { .. } | Error::HamiltonianParse { .. } | Error::InvalidNoise(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Per-qubit noise, gate errors, readout and gate durations.
#[pyclass(name = "NoiseModel", from_py_object)]
#[derive(Clone)]
struct PyNoiseModel {
    inner: slacktune_core::NoiseModel,
}

#[pymethods]
impl PyNoiseModel {
    #[new]
    fn new() -> Self {
        Self {
            inner: Default::default(),
        }
    }

    #[staticmethod]
    fn ideal() -> Self {
        Self {
            inner: slacktune_core::NoiseModel::ideal(),
        }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: slacktune_core::NoiseModel::from_toml_str(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: slacktune_core::NoiseModel::load(path).map_err(to_py)?,
        })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }
}

/// One idle window: qubit and the half-open cycle range [start, end).
#[pyclass(name = "IdleWindow", frozen, from_py_object)]
#[derive(Clone)]
struct PyIdleWindow {
    inner: IdleWindow,
}

#[pymethods]
impl PyIdleWindow {
    #[getter]
    fn qubit(&self) -> usize {
        self.inner.qubit
    }

    #[getter]
    fn start(&self) -> u64 {
        self.inner.start
    }

    #[getter]
    fn end(&self) -> u64 {
        self.inner.end
    }

    fn __repr__(&self) -> String {
        format!("IdleWindow(qubit={}, start={}, end={})", self.inner.qubit, self.inner.start, self.inner.end)
    }
}

/// An ALAP-scheduled circuit.
#[pyclass(name = "Circuit", from_py_object)]
#[derive(Clone)]
struct PyCircuit {
    inner: slacktune_core::TimedCircuit,
}

#[pymethods]
impl PyCircuit {
    /// Parses OpenQASM 2 text and schedules it ALAP with the given model's durations.
    #[staticmethod]
    #[pyo3(signature = (text, noise=None))]
    fn from_qasm(text: &str, noise: Option<&PyNoiseModel>) -> PyResult<Self> {
        let program = qasm::parse(text).map_err(|e| to_py(e.into()))?;
        let durations = noise.map(|n| n.inner.durations).unwrap_or_default();
        let inner = schedule_alap(program.n_qubits, &program.gates, program.parameters, &durations).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// SU2 ansatz with a final measurement on every qubit.
    #[staticmethod]
    #[pyo3(signature = (n_qubits, reps, entanglement="circular"))]
    fn su2(n_qubits: usize, reps: usize, entanglement: &str) -> PyResult<Self> {
        let entanglement = match entanglement {
            "full" => Entanglement::Full,
            "circular" => Entanglement::Circular,
            other => return Err(PyValueError::new_err(format!("unknown entanglement {other:?}"))),
        };
        let spec = AnsatzSpec {
            n_qubits,
            reps,
            entanglement,
        };
        let inner = ansatz_circuit(&spec, &Default::default()).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.inner.n_qubits
    }

    #[getter]
    fn parameters(&self) -> Vec<String> {
        self.inner.parameters.clone()
    }

    fn makespan(&self) -> u64 {
        self.inner.makespan()
    }

    /// Gates as (name, qubits, start, duration) tuples.
    fn gates(&self) -> Vec<(String, Vec<usize>, u64, u64)> {
        self.inner
            .gates
            .iter()
            .map(|g| (g.kind.name().to_string(), g.qubits.clone(), g.start, g.duration))
            .collect()
    }

    #[pyo3(signature = (min_len=1))]
    fn idle_windows(&self, min_len: u64) -> Vec<PyIdleWindow> {
        extract_idle_windows(&self.inner, min_len)
            .into_iter()
            .map(|inner| PyIdleWindow { inner })
            .collect()
    }

    /// Fills every window of at least `min_len` cycles with `rounds` of `kind`.
    #[pyo3(signature = (kind, rounds=1, min_len=2))]
    fn with_dd(&self, kind: &str, rounds: usize, min_len: u64) -> PyResult<Self> {
        let kind: DDKind = kind.parse().map_err(to_py)?;
        let windows = extract_idle_windows(&self.inner, min_len);
        let config = MitigationConfig::uniform_dd(&self.inner, &windows, kind, rounds);
        let inner = apply_config(&self.inner, &windows, &config).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn to_qasm(&self) -> String {
        qasm::emit_timed(&self.inner)
    }

    /// Outcome probabilities keyed by bitstring (qubit k is character k).
    #[pyo3(signature = (params, noise, realizations=32, seed=0))]
    fn distribution(
        &self,
        params: Vec<f64>,
        noise: &PyNoiseModel,
        realizations: usize,
        seed: u64,
    ) -> PyResult<std::collections::BTreeMap<String, f64>> {
        let rho = evolve(&self.inner, &params, &noise.inner, realizations, seed).map_err(to_py)?;
        Ok(measure_distribution(&rho, &noise.inner).to_map())
    }
}

/// A real-weighted sum of Pauli strings.
#[pyclass(name = "Hamiltonian", from_py_object)]
#[derive(Clone)]
struct PyHamiltonian {
    inner: PauliHamiltonian,
}

#[pymethods]
impl PyHamiltonian {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: PauliHamiltonian::parse(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (n, j=1.0, g=1.0))]
    fn tfim(n: usize, j: f64, g: f64) -> PyResult<Self> {
        Ok(Self {
            inner: tfim_hamiltonian(n, j, g).map_err(to_py)?,
        })
    }

    fn terms(&self) -> Vec<(f64, String)> {
        self.inner.terms().iter().map(|(c, p)| (*c, p.to_string())).collect()
    }

    fn ground_energy(&self) -> PyResult<f64> {
        Ok(exact_ground_energy(&self.inner).map_err(to_py)?.0)
    }

    /// Tr[Hρ] of the circuit's noisy final state.
    #[pyo3(signature = (circuit, params, noise, realizations=32, seed=0))]
    fn energy(
        &self,
        circuit: &PyCircuit,
        params: Vec<f64>,
        noise: &PyNoiseModel,
        realizations: usize,
        seed: u64,
    ) -> PyResult<f64> {
        objective(
            &circuit.inner,
            &params,
            &self.inner,
            &noise.inner,
            &SimOptions::exact(realizations, seed),
        )
        .map_err(to_py)
    }
}

/// Fidelity of the spin-echo circuit for `positions` placements of the X pulse.
#[pyfunction]
#[pyo3(signature = (noise, positions=9, realizations=256, seed=0))]
fn spin_echo_sweep(noise: &PyNoiseModel, positions: usize, realizations: usize, seed: u64) -> PyResult<Vec<(f64, f64)>> {
    let points = benchmarks::spin_echo_sweep(&noise.inner, positions, realizations, seed).map_err(to_py)?;
    Ok(points.into_iter().map(|p| (p.fraction, p.fidelity)).collect())
}

/// Fidelity against DD round count in one window.
#[pyfunction]
#[pyo3(signature = (noise, kind="xy4", window=benchmarks::DD_WINDOW, realizations=256, seed=0))]
fn dd_sweep(noise: &PyNoiseModel, kind: &str, window: u64, realizations: usize, seed: u64) -> PyResult<Vec<(usize, f64)>> {
    let kind: DDKind = kind.parse().map_err(to_py)?;
    let points = benchmarks::dd_sweep(&noise.inner, kind, window, realizations, seed).map_err(to_py)?;
    Ok(points.into_iter().map(|p| (p.rounds, p.fidelity)).collect())
}

/// Runs an experiment config file and returns the result document as JSON.
#[pyfunction]
fn run_experiment(config: PathBuf) -> PyResult<String> {
    let cfg = experiment::ExperimentConfig::load(&config).map_err(to_py)?;
    let base = config.parent().map(PathBuf::from).unwrap_or_default();
    let result = experiment::run_experiment(&cfg, &base).map_err(to_py)?;
    serde_json::to_string(&result).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn slacktune(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNoiseModel>()?;
    m.add_class::<PyIdleWindow>()?;
    m.add_class::<PyCircuit>()?;
    m.add_class::<PyHamiltonian>()?;
    m.add_function(wrap_pyfunction!(spin_echo_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(dd_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
