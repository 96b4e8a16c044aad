//! Python bindings for `duet-core`.
//!
//! Values cross the boundary as JSON: the `api` module does the work on
//! strings, and the Python layer converts with the standard `json` module.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyAny;

pub mod api {
    use serde::de::DeserializeOwned;
    use serde::Serialize;
    use serde_json::{json, Value};

    use duet_core::env::Environment;
    use duet_core::evaluation::{check_env_assertions, compute_reward, pass_hat_k, EvalOptions};
    use duet_core::orchestrator::{run_trials, Mode, PolicyPair, RunConfig};
    use duet_core::policies::{oracle_agent, oracle_user};
    use duet_core::tasks::verify::task_solved;
    use duet_core::tasks::{assign_personas, default_quotas, sample_balanced, verify_task, CompositeTask};
    use duet_core::telecom::catalog::catalog;
    use duet_core::telecom::Telecom;
    use duet_core::world::{Action, PlayerId};

    pub type Result<T> = std::result::Result<T, String>;

    fn parse<T: DeserializeOwned>(what: &str, text: &str) -> Result<T> {
        serde_json::from_str(text).map_err(|e| format!("invalid {what}: {e}"))
    }

    fn dump(v: &impl Serialize) -> String {
        serde_json::to_string(v).expect("core types serialize")
    }

    fn err(e: impl std::fmt::Display) -> String {
        e.to_string()
    }

    pub fn compose_tasks() -> Result<String> {
        Ok(dump(&catalog().compose(None).map_err(err)?))
    }

    pub fn sample_suite(seed: u64) -> Result<String> {
        let all = catalog().compose(None).map_err(err)?;
        let mut tasks = sample_balanced(&all, &default_quotas(), seed).map_err(err)?;
        assign_personas(&mut tasks, seed);
        Ok(dump(&tasks))
    }

    pub fn verify(task: &str) -> Result<String> {
        let task: CompositeTask = parse("task", task)?;
        Ok(dump(&verify_task(&task, Telecom::shared()).map_err(err)?))
    }

    /// Oracle trials of one task, each with its trajectory and score.
    pub fn run_oracle(task: &str, mode: &str, trials: usize, seed: u64) -> Result<String> {
        let task: CompositeTask = parse("task", task)?;
        let mode: Mode = mode.parse()?;
        let config = RunConfig {
            mode,
            trials_per_task: trials,
            seed,
            ..RunConfig::default()
        };
        let factory = |t: &CompositeTask, _trial: usize, _seed: u64| PolicyPair {
            agent: Box::new(oracle_agent(t)),
            user: (mode != Mode::NoUser).then(|| Box::new(oracle_user(t)) as _),
        };
        let mut out = Vec::new();
        for (traj, env) in run_trials(Telecom::shared(), &task, &factory, &config).map_err(err)? {
            let record = compute_reward(&task, &traj, &env, None, EvalOptions::default()).map_err(err)?;
            out.push(json!({ "trajectory": traj, "record": record }));
        }
        Ok(dump(&out))
    }

    pub fn pass_hat(counts: &[(usize, usize)], k: usize) -> Result<f64> {
        pass_hat_k(counts, k).map_err(err)
    }

    /// The initialised two-sided environment of one task, stepped by hand.
    pub struct Env {
        task: CompositeTask,
        env: Environment<Telecom>,
    }

    impl Env {
        pub fn new(task: &str) -> Result<Self> {
            let task: CompositeTask = parse("task", task)?;
            let mut env = Environment::new(Telecom::shared());
            env.apply_init(task.init_actions()).map_err(err)?;
            Ok(Env { task, env })
        }

        pub fn task_id(&self) -> &str {
            &self.task.id
        }

        pub fn tools(&self, role: &str) -> Result<String> {
            let role = parse_role(role)?;
            Ok(dump(&self.env.tool_specs_for(role)))
        }

        pub fn step(&mut self, role: &str, action: &str) -> Result<String> {
            let role = parse_role(role)?;
            let action: Action = parse("action", action)?;
            Ok(dump(&self.env.step(role, action)))
        }

        pub fn assertions(&self) -> Result<String> {
            let results = check_env_assertions(&self.env, &self.task.evaluation.env_assertions).map_err(err)?;
            Ok(dump(&results))
        }

        pub fn solved(&self) -> Result<bool> {
            task_solved(&self.task, &self.env).map_err(err)
        }

        pub fn hashes(&self) -> Result<String> {
            Ok(dump(&self.env.hashes().map_err(err)?))
        }

        pub fn history(&self) -> String {
            dump(&self.env.history())
        }
    }

    fn parse_role(role: &str) -> Result<PlayerId> {
        serde_json::from_value(Value::String(role.to_string())).map_err(|_| format!("unknown role '{role}'"))
    }
}

fn value_error(e: String) -> PyErr {
    PyValueError::new_err(e)
}

fn loads<'py>(py: Python<'py>, text: String) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn dumps(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()
}

#[pyfunction]
fn compose_tasks(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    loads(py, api::compose_tasks().map_err(value_error)?)
}

#[pyfunction]
#[pyo3(signature = (seed = 42))]
fn sample_suite(py: Python<'_>, seed: u64) -> PyResult<Bound<'_, PyAny>> {
    loads(py, api::sample_suite(seed).map_err(value_error)?)
}

#[pyfunction]
fn verify_task<'py>(task: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    loads(task.py(), api::verify(&dumps(task)?).map_err(value_error)?)
}

#[pyfunction]
#[pyo3(signature = (task, mode = "default", trials = 1, seed = 0))]
fn run_oracle<'py>(task: &Bound<'py, PyAny>, mode: &str, trials: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    loads(task.py(), api::run_oracle(&dumps(task)?, mode, trials, seed).map_err(value_error)?)
}

/// pass^k from per-task `(successes, trials)` pairs.
#[pyfunction]
fn pass_hat_k(counts: Vec<(usize, usize)>, k: usize) -> PyResult<f64> {
    api::pass_hat(&counts, k).map_err(value_error)
}

#[pyclass(name = "TelecomEnv", unsendable)]
struct PyEnv {
    inner: api::Env,
}

#[pymethods]
impl PyEnv {
    #[new]
    fn new(task: &Bound<'_, PyAny>) -> PyResult<Self> {
        Ok(PyEnv {
            inner: api::Env::new(&dumps(task)?).map_err(value_error)?,
        })
    }

    #[getter]
    fn task_id(&self) -> &str {
        self.inner.task_id()
    }

    fn tools<'py>(&self, py: Python<'py>, role: &str) -> PyResult<Bound<'py, PyAny>> {
        loads(py, self.inner.tools(role).map_err(value_error)?)
    }

    /// Apply one action for `role` and return the observation.
    fn step<'py>(&mut self, role: &str, action: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
        let obs = self.inner.step(role, &dumps(action)?).map_err(value_error)?;
        loads(action.py(), obs)
    }

    fn assertions<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        loads(py, self.inner.assertions().map_err(value_error)?)
    }

    fn solved(&self) -> PyResult<bool> {
        self.inner.solved().map_err(value_error)
    }

    fn hashes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        loads(py, self.inner.hashes().map_err(value_error)?)
    }

    fn history<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        loads(py, self.inner.history())
    }
}

#[pymodule]
fn duet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(compose_tasks, m)?)?;
    m.add_function(wrap_pyfunction!(sample_suite, m)?)?;
    m.add_function(wrap_pyfunction!(verify_task, m)?)?;
    m.add_function(wrap_pyfunction!(run_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(pass_hat_k, m)?)?;
    m.add_class::<PyEnv>()?;
    Ok(())
}
