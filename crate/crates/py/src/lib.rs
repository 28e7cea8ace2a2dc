use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use explore_core::config::ExperimentConfig;
use explore_core::envs::Task;
use explore_core::labeler::{LabelerConfig, UcbLabeler};
use explore_core::mdp::{Environment, Transition};
use explore_core::metrics::{read_metrics, MetricRow};
use explore_core::runner::{self, run_experiment, run_sweep};
use explore_core::strategy::StrategyKind;
use explore_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Usage(_) | Error::Format { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn strategy(name: &str) -> PyResult<StrategyKind> {
    name.parse().map_err(to_py)
}

fn row_dict<'py>(py: Python<'py>, r: &MetricRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("step", r.step)?;
    d.set_item("success", r.success)?;
    d.set_item("coverage", r.coverage)?;
    d.set_item("mean_bonus", r.mean_bonus)?;
    d.set_item("reward_mse", r.reward_mse)?;
    d.set_item("seconds", r.seconds)?;
    Ok(d)
}

/// Validated experiment configuration.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (env, strategy = "Ours", budget = 10_000))]
    fn new(env: &str, strategy: &str, budget: u64) -> PyResult<Self> {
        let inner = ExperimentConfig::new(env, self::strategy(strategy)?, budget);
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ExperimentConfig::parse(text, None).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: ExperimentConfig::from_path(&path).map_err(to_py)?,
        })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    #[getter]
    fn budget(&self) -> u64 {
        self.inner.budget
    }

    #[getter]
    fn strategy(&self) -> &'static str {
        self.inner.strategy.name()
    }

    #[getter]
    fn seeds(&self) -> Vec<u64> {
        self.inner.seeds.clone()
    }

    #[getter]
    fn env(&self) -> String {
        self.inner.env.name.clone()
    }
}

/// A built task with its own reset RNG.
#[pyclass(name = "Env", unsendable)]
struct PyEnv {
    task: Task,
    rng: ChaCha8Rng,
}

#[pymethods]
impl PyEnv {
    #[new]
    #[pyo3(signature = (name, seed = 0))]
    fn new(name: &str, seed: u64) -> PyResult<Self> {
        let cfg = ExperimentConfig::new(name, StrategyKind::Online, 0);
        Ok(Self {
            task: cfg.env.build().map_err(to_py)?,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.task.spec().state_dim
    }

    #[getter]
    fn action_dim(&self) -> usize {
        self.task.spec().action_dim
    }

    fn reset(&mut self) -> Vec<f64> {
        self.task.reset(&mut self.rng)
    }

    /// Returns `(next_state, reward, terminal, truncated)`.
    fn step(&mut self, action: Vec<f64>) -> PyResult<(Vec<f64>, f64, bool, bool)> {
        let o = self.task.step(&action).map_err(to_py)?;
        Ok((o.next_state, o.reward, o.terminal, o.truncated))
    }
}

/// Reward model, termination head and RND bonus behind the UCB labels.
#[pyclass(name = "Labeler", unsendable)]
struct PyLabeler {
    inner: UcbLabeler,
    step: u32,
}

#[pymethods]
impl PyLabeler {
    #[new]
    #[pyo3(signature = (state_dim, action_dim, seed = 0, bonus_scale = 1.0, hidden = vec![64, 64]))]
    fn new(state_dim: usize, action_dim: usize, seed: u64, bonus_scale: f64, hidden: Vec<usize>) -> PyResult<Self> {
        let config = LabelerConfig {
            hidden,
            bonus_scale,
            ..Default::default()
        };
        Ok(Self {
            inner: UcbLabeler::new(config, state_dim, action_dim, seed).map_err(to_py)?,
            step: 0,
        })
    }

    /// Trains the reward, termination and RND nets on one online transition.
    fn update(&mut self, state: Vec<f64>, action: Vec<f64>, next_state: Vec<f64>, reward: f64, terminal: bool) -> PyResult<()> {
        let t = Transition::online(state, action, next_state, reward, terminal, self.step);
        self.step += 1;
        self.inner.rnd_update(&t).map_err(to_py)?;
        self.inner.reward_update(&[&t]).map_err(to_py)?;
        self.inner.termination_update(&[&t]).map_err(to_py)?;
        Ok(())
    }

    fn bonus(&self, state: Vec<f64>, action: Vec<f64>) -> PyResult<f64> {
        self.inner.bonus(&state, &action).map_err(to_py)
    }

    /// Returns `(reward, termination_probability)` of the optimistic label.
    fn label(&self, state: Vec<f64>, action: Vec<f64>) -> PyResult<(f64, f64)> {
        let l = self.inner.ucb_label(&state, &action).map_err(to_py)?;
        Ok((l.reward, l.terminal))
    }
}

/// One training run advanced a step at a time.
#[pyclass(name = "Experiment", unsendable)]
struct PyExperiment {
    inner: runner::Experiment,
}

#[pymethods]
impl PyExperiment {
    #[new]
    #[pyo3(signature = (config, seed = 0, strategy = None))]
    fn new(config: &PyConfig, seed: u64, strategy: Option<&str>) -> PyResult<Self> {
        let kind = match strategy {
            Some(s) => self::strategy(s)?,
            None => config.inner.strategy,
        };
        Ok(Self {
            inner: runner::Experiment::new(&config.inner, kind, seed).map_err(to_py)?,
        })
    }

    #[pyo3(signature = (n = 1))]
    fn step(&mut self, n: u64) -> PyResult<()> {
        for _ in 0..n {
            if self.inner.is_finished() {
                break;
            }
            self.inner.step().map_err(to_py)?;
        }
        Ok(())
    }

    #[getter]
    fn steps(&self) -> u64 {
        self.inner.steps()
    }

    #[getter]
    fn finished(&self) -> bool {
        self.inner.is_finished()
    }

    #[getter]
    fn coverage(&self) -> f64 {
        self.inner.coverage()
    }

    fn q_values(&self, state: Vec<f64>, action: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.agent().q_values(&state, &action).map_err(to_py)
    }

    fn act(&self, state: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.agent().act_deterministic(&state).map_err(to_py)
    }

    /// Evaluates the current policy; returns one metrics row as a dict.
    fn evaluate<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let row = self.inner.metrics(0.0).map_err(to_py)?;
        row_dict(py, &row)
    }
}

/// Runs one (strategy, seed) pair to completion; returns the metrics CSV path.
#[pyfunction]
#[pyo3(signature = (config, seed = 0, strategy = None, out_dir = None))]
fn run(config: &PyConfig, seed: u64, strategy: Option<&str>, out_dir: Option<PathBuf>) -> PyResult<PathBuf> {
    let kind = match strategy {
        Some(s) => self::strategy(s)?,
        None => config.inner.strategy,
    };
    let out = out_dir.unwrap_or_else(|| config.inner.output_dir());
    let artifacts = run_experiment(&config.inner, kind, seed, &out).map_err(to_py)?;
    Ok(artifacts.metrics)
}

/// Runs every (strategy, seed) pair; returns the summary CSV path.
#[pyfunction]
#[pyo3(signature = (config, out_dir = None, threads = 1))]
fn sweep(py: Python<'_>, config: &PyConfig, out_dir: Option<PathBuf>, threads: usize) -> PyResult<PathBuf> {
    let out = out_dir.unwrap_or_else(|| config.inner.output_dir());
    let cfg = config.inner.clone();
    let outcome = py.detach(|| run_sweep(&cfg, &out, threads)).map_err(to_py)?;
    if outcome.failures() > 0 {
        return Err(PyRuntimeError::new_err(format!(
            "{} of {} runs failed",
            outcome.failures(),
            outcome.runs.len()
        )));
    }
    Ok(outcome.summary)
}

#[pyfunction]
fn read_csv<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let rows = read_metrics(&path).map_err(to_py)?;
    rows.iter().map(|r| row_dict(py, r)).collect()
}

#[pyfunction]
fn strategies() -> Vec<&'static str> {
    StrategyKind::ALL.iter().map(|k| k.name()).collect()
}

#[pymodule]
fn explore_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyEnv>()?;
    m.add_class::<PyLabeler>()?;
    m.add_class::<PyExperiment>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(read_csv, m)?)?;
    m.add_function(wrap_pyfunction!(strategies, m)?)?;
    Ok(())
}
