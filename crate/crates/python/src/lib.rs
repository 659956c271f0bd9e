//! Python bindings: scenario models, the exact solver, the belief filter and
//! single-trial simulation.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use eh_access::config::Scenario;
use eh_access::flat::{export_flat_pomdp, save_policy};
use eh_access::model::{self, EhModel, SolarModel};
use eh_access::policies::{Planner, PolicyKind};
use eh_access::sim::{run_trial as sim_run_trial, SimConfig};
use eh_access::solver::{self, best_action, value_iterate, Belief, PolicySet};
use eh_access::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::Internal(m) => PyRuntimeError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// A scenario together with its tabular POMDP.
#[pyclass(module = "eh_access", frozen)]
struct Model {
    scenario: Scenario,
    model: EhModel,
}

impl Model {
    fn wrap(scenario: Scenario) -> PyResult<Self> {
        scenario.validate().map_err(py_err)?;
        let model = scenario.build_model().map_err(py_err)?;
        Ok(Self { scenario, model })
    }
}

#[pymethods]
impl Model {
    /// Parses a TOML scenario; `overrides` are `key=value` strings.
    #[staticmethod]
    #[pyo3(signature = (text, overrides = Vec::new()))]
    fn from_toml(text: &str, overrides: Vec<String>) -> PyResult<Self> {
        Self::wrap(Scenario::from_toml_with_overrides(text, &overrides).map_err(py_err)?)
    }

    /// One BS, users 0-3, eight battery levels.
    #[staticmethod]
    #[pyo3(signature = (lam = 0.4, mu_s = 1.0))]
    fn single_bs(lam: f64, mu_s: f64) -> PyResult<Self> {
        Self::wrap(Scenario::single_bs(lam, mu_s))
    }

    /// Two BSs, users 0-1, three battery levels each.
    #[staticmethod]
    #[pyo3(signature = (lam = 0.6, mu_s = 1.0))]
    fn two_bs(lam: f64, mu_s: f64) -> PyResult<Self> {
        Self::wrap(Scenario::two_bs(lam, mu_s))
    }

    #[getter]
    fn n_states(&self) -> usize {
        self.model.n_states()
    }

    #[getter]
    fn n_actions(&self) -> usize {
        self.model.tables().n_actions()
    }

    #[getter]
    fn n_observations(&self) -> usize {
        self.model.tables().n_observations()
    }

    #[getter]
    fn state_labels(&self) -> Vec<String> {
        self.model.tables().state_labels.clone()
    }

    #[getter]
    fn action_labels(&self) -> Vec<String> {
        self.model.tables().action_labels.clone()
    }

    fn config_hash(&self) -> String {
        self.scenario.hash()
    }

    fn to_toml(&self) -> String {
        self.scenario.to_toml()
    }

    /// `T[s][s']` for action ordinal `a`.
    fn transition(&self, a: usize) -> PyResult<Vec<Vec<f64>>> {
        let t = self.model.tables();
        if a >= t.n_actions() {
            return Err(PyValueError::new_err(format!("action {a} outside 0..{}", t.n_actions())));
        }
        Ok((0..t.n_states()).map(|s| t.transition_row(a, s).to_vec()).collect())
    }

    /// Bayes filter step; returns the posterior.
    fn belief_update(&self, belief: Vec<f64>, action: usize, observation: usize) -> PyResult<Vec<f64>> {
        let t = self.model.tables();
        if belief.len() != t.n_states() || action >= t.n_actions() || observation >= t.n_observations() {
            return Err(PyValueError::new_err("belief length, action or observation out of range"));
        }
        let b = Belief::new(belief).map_err(py_err)?;
        Ok(solver::belief_update(&b, action, observation, t).map_err(py_err)?.probs)
    }

    /// Model as a flat POMDP file.
    #[pyo3(signature = (gamma = None))]
    fn export(&self, gamma: Option<f64>) -> String {
        export_flat_pomdp(self.model.tables(), gamma.unwrap_or(self.scenario.solver.gamma))
    }

    /// Exact value iteration with the scenario's solver settings.
    fn solve(&self, py: Python<'_>) -> PyResult<Policy> {
        let cfg = self.scenario.solver_config();
        let vi = py
            .detach(|| value_iterate(self.model.tables(), &cfg))
            .map_err(py_err)?;
        Ok(Policy {
            model_hash: self.model.tables().fingerprint(cfg.gamma),
            residuals: vi.log.iter().map(|r| r.residual).collect(),
            converged: vi.converged,
            policy: vi.policy,
        })
    }

    /// Runs one trial of `policy` and returns its summary.
    #[pyo3(signature = (policy, trial = 0, n_t = None, seed = None))]
    fn run_trial<'py>(
        &self,
        py: Python<'py>,
        policy: &str,
        trial: u64,
        n_t: Option<u64>,
        seed: Option<u64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let kind: PolicyKind = policy.parse().map_err(py_err)?;
        let base = self.scenario.sim_config();
        let sim = SimConfig {
            n_t: n_t.unwrap_or(base.n_t),
            seed: seed.unwrap_or(base.seed),
            ..base
        };
        let solver = self.scenario.solver_config();
        let r = py
            .detach(|| {
                let planner = Planner::prepare(kind, &self.model, &solver)?.planner;
                sim_run_trial(&self.model, &planner, &sim, trial)
            })
            .map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("n_slots", r.n_slots)?;
        d.set_item("n_success", r.n_success)?;
        d.set_item("eta_a", r.eta_a)?;
        d.set_item("feasible_slots", r.feasible_slots)?;
        d.set_item("filter_resets", r.filter_resets)?;
        Ok(d)
    }
}

/// A solved alpha-vector policy.
#[pyclass(module = "eh_access", frozen)]
struct Policy {
    policy: PolicySet,
    model_hash: String,
    #[pyo3(get)]
    residuals: Vec<f64>,
    #[pyo3(get)]
    converged: bool,
}

#[pymethods]
impl Policy {
    fn __len__(&self) -> usize {
        self.policy.len()
    }

    /// `(action ordinal, values)` for every alpha vector.
    #[getter]
    fn alphas(&self) -> Vec<(usize, Vec<f64>)> {
        self.policy.alphas.iter().map(|a| (a.action, a.values.clone())).collect()
    }

    fn value(&self, belief: Vec<f64>) -> PyResult<f64> {
        self.check(&belief)?;
        Ok(self.policy.value(&belief))
    }

    fn best_action(&self, belief: Vec<f64>) -> PyResult<usize> {
        self.check(&belief)?;
        Ok(best_action(&belief, &self.policy))
    }

    fn save(&self) -> String {
        save_policy(&self.policy, &self.model_hash)
    }
}

impl Policy {
    fn check(&self, belief: &[f64]) -> PyResult<()> {
        let n = self.policy.alphas.first().map_or(0, |a| a.values.len());
        if belief.len() != n {
            return Err(PyValueError::new_err(format!("belief has {} entries, expected {n}", belief.len())));
        }
        Ok(())
    }
}

/// Mean and standard deviation of the per-slot harvest in joules for the
/// reference harvesting device.
#[pyfunction]
fn harvest_moments(mu_s: f64, sigma_s: f64) -> PyResult<(f64, f64)> {
    let solar = SolarModel::reference(mu_s, sigma_s);
    solar.validate().map_err(py_err)?;
    let h = model::harvest_moments(&solar);
    Ok((h.mean, h.std))
}

/// Level-delta law `(min_delta, probs)` when `e_t_levels` quanta are spent,
/// for a BS of the single-BS scenario under the given sun.
#[pyfunction]
#[pyo3(signature = (e_t_levels, mu_s = 1.0, sigma_s = 0.5))]
fn battery_delta_dist(e_t_levels: usize, mu_s: f64, sigma_s: f64) -> PyResult<(i64, Vec<f64>)> {
    let cfg = Scenario::single_bs(0.4, mu_s).bs_configs().remove(0);
    let cfg = model::BsConfig {
        solar: SolarModel::reference(mu_s, sigma_s),
        ..cfg
    };
    cfg.validate().map_err(py_err)?;
    let d = model::battery_delta_dist(e_t_levels, &cfg).map_err(py_err)?;
    Ok((d.min_delta, d.probs))
}

#[pymodule]
#[pyo3(name = "eh_access")]
fn eh_access_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<Policy>()?;
    m.add_function(wrap_pyfunction!(harvest_moments, m)?)?;
    m.add_function(wrap_pyfunction!(battery_delta_dist, m)?)?;
    Ok(())
}
