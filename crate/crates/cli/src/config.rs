//! Flat TOML run configuration and override handling.

use std::path::Path;

use serde::{Deserialize, Serialize};

use kinopt::ga::{GAParams, Retention, SelectionKind};
use kinopt::pso::{HeavisideForm, PsoClassicParams, PsoParams};
use kinopt::sa::{ProposalScale, SaParams};
use kinopt::schedule::Schedule;

use crate::CliError;

pub const SEED_ENV: &str = "KINOPT_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Sa,
    Ga,
    Pso,
    Cbo,
    CboMemory,
    Enkf,
    Eki,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cooling {
    #[default]
    Log,
    Geometric,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    Boltzmann,
    Wheel,
    Rank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsoVariant {
    /// Generalized stochastic dynamics with inertia, friction and memory.
    #[default]
    Sde,
    /// Original velocity/position update with `c1`, `c2`.
    Classic,
}

/// Every knob of every algorithm. Shared names (`alpha`, `sigma`, `nu`,
/// `dt`) mean the same thing across algorithms; unset ones take the
/// algorithm's default in [`RunConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    #[serde(default)]
    pub objective: Option<String>,
    #[serde(default = "one")]
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_steps")]
    pub steps: u64,
    /// Ensemble size (ignored by `sa`, which runs one chain).
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_init_mean")]
    pub init_mean: f64,
    #[serde(default = "one_f")]
    pub init_std: f64,
    /// Record every k-th step in the trace.
    #[serde(default = "one_u")]
    pub record_every: u64,

    // annealing
    #[serde(default)]
    pub cooling: Cooling,
    #[serde(default = "one_f")]
    pub t0: f64,
    #[serde(default = "default_ratio")]
    pub cooling_ratio: f64,
    #[serde(default = "one_f")]
    pub proposal_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal_sigma: Option<f64>,

    // shared
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,

    // genetic
    #[serde(default)]
    pub selection: Selection,
    #[serde(default)]
    pub retention: Retention,

    // swarm
    #[serde(default)]
    pub pso_variant: PsoVariant,
    #[serde(default = "two")]
    pub c1: f64,
    #[serde(default = "two")]
    pub c2: f64,
    #[serde(default = "one_f")]
    pub lambda1: f64,
    #[serde(default = "one_f")]
    pub lambda2: f64,
    #[serde(default = "default_sigma_pso")]
    pub sigma1: f64,
    #[serde(default = "default_sigma_pso")]
    pub sigma2: f64,
    #[serde(default = "half")]
    pub inertia: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub heaviside: HeavisideForm,

    // consensus
    #[serde(default = "one_f")]
    pub lambda: f64,

    // inversion: F = identity on R^dim, Gamma = gamma * I
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Vec<f64>>,
    #[serde(default = "one_f")]
    pub gamma: f64,
    #[serde(default)]
    pub method: kinopt::enkf::OdeMethod,
}

fn one() -> usize {
    1
}
fn one_u() -> u64 {
    1
}
fn one_f() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn half() -> f64 {
    0.5
}
fn default_steps() -> u64 {
    1000
}
fn default_particles() -> usize {
    100
}
fn default_init_mean() -> f64 {
    2.0
}
fn default_ratio() -> f64 {
    0.999
}
fn default_sigma_pso() -> f64 {
    0.7
}
fn default_beta() -> f64 {
    30.0
}

impl RunConfig {
    /// Fills algorithm-dependent defaults and checks every field against
    /// the owning module's preconditions.
    pub fn resolve(mut self, seed: u64) -> Result<Self, CliError> {
        self.seed = Some(seed);
        let inversion = matches!(self.algorithm, Algorithm::Enkf | Algorithm::Eki);
        match (&self.objective, inversion) {
            (None, true) => self.objective = Some("linear".into()),
            (None, false) => self.objective = Some("quadratic".into()),
            (Some(o), true) if o != "linear" => {
                return Err(CliError::usage("enkf and eki run on the `linear` problem (F = identity)"))
            }
            _ => {}
        }
        let (alpha, sigma, nu, dt) = match self.algorithm {
            Algorithm::Sa => (None, None, None, None),
            Algorithm::Ga => (Some(50.0), Some(0.1), Some(0.5), None),
            Algorithm::Pso | Algorithm::CboMemory => (Some(50.0), None, Some(1.0), Some(0.01)),
            Algorithm::Cbo => (Some(50.0), Some(0.7), None, Some(0.01)),
            Algorithm::Enkf => (None, None, None, Some(1.0)),
            Algorithm::Eki => (None, None, None, Some(0.01)),
        };
        self.alpha = self.alpha.or(alpha);
        self.sigma = self.sigma.or(sigma);
        self.nu = self.nu.or(nu);
        self.dt = self.dt.or(dt);
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::usage(m));
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if self.steps == 0 {
            return bad("steps must be >= 1");
        }
        if self.record_every == 0 {
            return bad("record_every must be >= 1");
        }
        if self.algorithm != Algorithm::Sa && self.particles < 2 {
            return bad("particles must be >= 2");
        }
        if !self.init_mean.is_finite() || !(self.init_std >= 0.0) || !self.init_std.is_finite() {
            return bad("init_mean must be finite and init_std >= 0");
        }
        if self.algorithm != Algorithm::Enkf && self.algorithm != Algorithm::Eki {
            kinopt::make_benchmark::<f64>(self.objective(), self.dim)?;
        }
        match self.algorithm {
            Algorithm::Sa => self.sa_params().validate()?,
            Algorithm::Ga => self.ga_params().validate()?,
            Algorithm::Pso => match self.pso_variant {
                PsoVariant::Sde => self.pso_params().validate()?,
                PsoVariant::Classic => {
                    if !(self.c1 >= 0.0 && self.c2 >= 0.0) {
                        return bad("c1 and c2 must be >= 0");
                    }
                }
            },
            Algorithm::CboMemory => self.pso_params().validate()?,
            Algorithm::Cbo => {
                if !(self.lambda >= 0.0) || !(self.sigma() >= 0.0) || !(self.dt() > 0.0) || !(self.alpha() >= 0.0) {
                    return bad("cbo needs lambda >= 0, sigma >= 0, alpha >= 0, dt > 0");
                }
            }
            Algorithm::Enkf | Algorithm::Eki => {
                if !(self.gamma > 0.0) || !(self.dt() > 0.0) {
                    return bad("gamma and dt must be positive");
                }
                if let Some(y) = &self.data {
                    if y.len() != self.dim {
                        return bad("data must have dim entries");
                    }
                }
            }
        }
        Ok(())
    }

    pub fn objective(&self) -> &str {
        self.objective.as_deref().unwrap_or("quadratic")
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(0.0)
    }

    pub fn nu(&self) -> f64 {
        self.nu.unwrap_or(1.0)
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(0.01)
    }

    pub fn sa_params(&self) -> SaParams {
        let schedule = match self.cooling {
            Cooling::Log => Schedule::Logarithmic { c: self.t0 },
            Cooling::Geometric => Schedule::Geometric { initial: self.t0, ratio: self.cooling_ratio },
            Cooling::Constant => Schedule::Constant { value: self.t0 },
        };
        let proposal = match self.proposal_sigma {
            Some(sigma) => ProposalScale::Fixed { sigma },
            None => ProposalScale::SqrtTwoT { factor: self.proposal_factor },
        };
        SaParams { schedule, proposal }
    }

    pub fn ga_params(&self) -> GAParams {
        let selection = match self.selection {
            Selection::Boltzmann => SelectionKind::BoltzmannGibbs { alpha: self.alpha() },
            Selection::Wheel => SelectionKind::RandomWheel,
            Selection::Rank => SelectionKind::RankBased,
        };
        GAParams { sigma: self.sigma(), nu: self.nu(), selection, retention: self.retention }
    }

    pub fn pso_params(&self) -> PsoParams {
        PsoParams {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            sigma1: self.sigma1,
            sigma2: self.sigma2,
            inertia: self.inertia,
            nu: self.nu(),
            beta: self.beta,
            alpha: self.alpha(),
            dt: self.dt(),
            heaviside: self.heaviside,
        }
    }

    pub fn classic_params(&self) -> PsoClassicParams {
        PsoClassicParams { c1: self.c1, c2: self.c2 }
    }

    /// One-line JSON of the resolved configuration.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Reads a TOML file (if any) into a table and applies `key=value`
/// overrides; values parse as TOML and fall back to plain strings.
pub fn load_table(path: Option<&Path>, overrides: &[String]) -> Result<toml::Table, CliError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", p.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| CliError::usage(format!("cannot parse {}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("override `{o}` is not key=value")))?;
        let value = format!("v = {}", v.trim())
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(v.trim().to_string()));
        table.insert(k.trim().to_string(), value);
    }
    Ok(table)
}

pub fn from_table<T: serde::de::DeserializeOwned>(table: toml::Table) -> Result<T, CliError> {
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| CliError::usage(format!("invalid configuration: {e}")))
}

/// Command-line seed, then the configuration file, then `KINOPT_SEED`,
/// then 0.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}
