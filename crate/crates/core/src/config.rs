//! Scenario files: TOML with `[solar]`, one `[[bs]]` table per base
//! station, `[solver]` and `[sim]`. Dotted-key overrides are applied to the
//! raw document before it is checked against the schema.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{BsConfig, EhModel, SolarModel};
use crate::policies::PolicyKind;
use crate::sim::SimConfig;
use crate::solver::SolverConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolarSection {
    pub mu_s: f64,
    pub sigma_s: f64,
    #[serde(default = "defaults::p_h")]
    pub p_h_watts: f64,
    #[serde(default = "defaults::omega_s")]
    pub omega_s: u32,
    #[serde(default = "defaults::eta")]
    pub eta: f64,
    #[serde(default = "defaults::t_l")]
    pub t_l_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BsSection {
    pub n_u: usize,
    pub n_b: usize,
    #[serde(default = "defaults::p_t")]
    pub p_t_watts: f64,
    pub lambda: f64,
    pub mu: f64,
    #[serde(default = "defaults::reserve")]
    pub reserve_levels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub gamma: f64,
    pub bellman_eps: f64,
    pub max_iters: usize,
    pub prune_eps: f64,
    pub max_states: usize,
    pub max_vectors: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            gamma: d.gamma,
            bellman_eps: d.bellman_eps,
            max_iters: d.max_iters,
            prune_eps: d.prune_eps,
            max_states: d.max_states,
            max_vectors: d.max_vectors,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub n_t: u64,
    pub trials: usize,
    pub seed: u64,
    pub policies: Vec<String>,
    /// Abort a trial when the agent sees an observation its model rules out.
    pub strict_filter: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            n_t: 10_000,
            trials: 20,
            seed: 0,
            policies: PolicyKind::ALL.iter().map(|k| k.name().to_string()).collect(),
            strict_filter: false,
        }
    }
}

mod defaults {
    pub fn p_h() -> f64 {
        1.32e-3
    }
    pub fn omega_s() -> u32 {
        40
    }
    pub fn eta() -> f64 {
        0.75
    }
    pub fn t_l() -> f64 {
        0.2
    }
    pub fn p_t() -> f64 {
        0.04
    }
    pub fn reserve() -> usize {
        1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub solar: SolarSection,
    pub bs: Vec<BsSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sim: SimSection,
}

/// Sweepable scenario parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    /// User arrival rate, applied to every BS.
    Lambda,
    /// Mean solar intensity.
    MuS,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Lambda => "lambda",
            SweepParam::MuS => "mu_s",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(SweepParam::Lambda),
            "mu_s" => Ok(SweepParam::MuS),
            _ => Err(Error::Config(format!(
                "cannot sweep '{s}' (expected lambda or mu_s)"
            ))),
        }
    }
}

impl Scenario {
    /// One BS with users 0–3 and eight battery levels.
    pub fn single_bs(lambda: f64, mu_s: f64) -> Self {
        Self {
            solar: SolarSection {
                mu_s,
                sigma_s: 0.5,
                p_h_watts: defaults::p_h(),
                omega_s: defaults::omega_s(),
                eta: defaults::eta(),
                t_l_seconds: defaults::t_l(),
            },
            bs: vec![BsSection {
                n_u: 4,
                n_b: 8,
                p_t_watts: defaults::p_t(),
                lambda,
                mu: 0.05,
                reserve_levels: defaults::reserve(),
            }],
            solver: SolverSection::default(),
            sim: SimSection::default(),
        }
    }

    /// Two identical BSs with users 0–1 and three battery levels.
    pub fn two_bs(lambda: f64, mu_s: f64) -> Self {
        let mut s = Self::single_bs(lambda, mu_s);
        s.bs[0].n_u = 2;
        s.bs[0].n_b = 3;
        s.bs.push(s.bs[0].clone());
        s
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[])
    }

    /// Parses `text`, applies `key=value` overrides, then validates.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let scenario: Scenario = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("scenario: {e}")))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_with_overrides(&text, overrides)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), strip_config(e))))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.bs.is_empty() {
            return Err(Error::Config("bs: at least one base station is required".into()));
        }
        for (i, cfg) in self.bs_configs().iter().enumerate() {
            cfg.validate()
                .map_err(|e| Error::Config(format!("bs[{i}]: {}", strip_config(e))))?;
        }
        self.solver_config().validate()?;
        if self.sim.n_t < 1 || self.sim.trials < 1 {
            return Err(Error::Config("sim: n_t and trials must be >= 1".into()));
        }
        self.policies()?;
        Ok(())
    }

    pub fn solar_model(&self) -> SolarModel {
        let s = &self.solar;
        SolarModel {
            mu_s: s.mu_s,
            sigma_s: s.sigma_s,
            p_h: s.p_h_watts,
            omega_s: s.omega_s,
            eta_h: s.eta,
            t_l: s.t_l_seconds,
        }
    }

    pub fn bs_configs(&self) -> Vec<BsConfig> {
        let solar = self.solar_model();
        self.bs
            .iter()
            .map(|b| BsConfig {
                n_u: b.n_u,
                n_b: b.n_b,
                p_t: b.p_t_watts,
                lambda: b.lambda,
                mu: b.mu,
                solar: solar.clone(),
                reserve_levels: b.reserve_levels,
            })
            .collect()
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            gamma: s.gamma,
            bellman_eps: s.bellman_eps,
            max_iters: s.max_iters,
            prune_eps: s.prune_eps,
            max_states: s.max_states,
            max_vectors: s.max_vectors,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            n_t: self.sim.n_t,
            trials: self.sim.trials,
            seed: self.sim.seed,
            trace: false,
            strict_filter: self.sim.strict_filter,
        }
    }

    pub fn policies(&self) -> Result<Vec<PolicyKind>> {
        self.sim.policies.iter().map(|p| p.parse()).collect()
    }

    pub fn build_model(&self) -> Result<EhModel> {
        EhModel::build(self.bs_configs())
    }

    /// Copy with `param` set to `value`.
    pub fn with_param(&self, param: SweepParam, value: f64) -> Self {
        let mut s = self.clone();
        match param {
            SweepParam::Lambda => s.bs.iter_mut().for_each(|b| b.lambda = value),
            SweepParam::MuS => s.solar.mu_s = value,
        }
        s
    }

    /// SHA-256 over the canonical serialization, as lowercase hex.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn strip_config(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

/// Applies `path=value` to a raw TOML document. Path segments are table
/// keys, array indices, or `*` for every array element.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
    let path: Vec<&str> = path.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override '{assignment}' has an empty key")));
    }
    let value = parse_value(raw.trim());
    let mut root = toml::Value::Table(std::mem::take(doc));
    let result = set_path(&mut root, &path, &value, assignment);
    if let toml::Value::Table(t) = root {
        *doc = t;
    }
    result
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(node: &mut toml::Value, path: &[&str], value: &toml::Value, full: &str) -> Result<()> {
    let bad = |msg: &str| Err(Error::Config(format!("override '{full}': {msg}")));
    let (head, rest) = path.split_first().expect("nonempty path");
    match node {
        toml::Value::Table(t) => {
            if rest.is_empty() {
                t.insert(head.to_string(), value.clone());
                return Ok(());
            }
            let child = t
                .entry(head.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            set_path(child, rest, value, full)
        }
        toml::Value::Array(items) => {
            let targets: Vec<usize> = if *head == "*" {
                (0..items.len()).collect()
            } else {
                match head.parse::<usize>() {
                    Ok(i) if i < items.len() => vec![i],
                    Ok(i) => return bad(&format!("index {i} out of range")),
                    Err(_) => return bad(&format!("'{head}' is not an array index")),
                }
            };
            for i in targets {
                if rest.is_empty() {
                    items[i] = value.clone();
                } else {
                    set_path(&mut items[i], rest, value, full)?;
                }
            }
            Ok(())
        }
        _ => bad(&format!("'{head}' indexes into a scalar")),
    }
}
