//! JSON run configurations for the Monte Carlo engines.

use serde::{Deserialize, Serialize};

use super::{fk_two_point, fk_two_point_occupation, spde_estimate_two_point, InitialFunction, McConfig, Rho, SimOutcome, SpdeGrid};
use crate::error::{Error, Result};
use crate::kernels::TwoPointQuery;
use crate::measure::MeasureSpec;

/// Evaluation points `E[u(t, x1) u(t, x2)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
}

impl Target {
    pub fn query(&self) -> Result<TwoPointQuery> {
        TwoPointQuery::new(self.t, self.x1, self.x2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpdeConfig {
    pub target: Target,
    pub nu: f64,
    pub measure: MeasureSpec,
    pub rho: Rho,
    pub grid: SpdeGrid,
    pub mc: McConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FkConfig {
    pub target: Target,
    pub nu: f64,
    pub lambda: f64,
    pub u0: InitialFunction,
    pub mc: McConfig,
    /// Mollifier variance, used by the occupation engine only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Spde,
    Fk,
    FkOccupation,
}

impl std::str::FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "spde" => Ok(Engine::Spde),
            "fk" => Ok(Engine::Fk),
            "fk-occupation" => Ok(Engine::FkOccupation),
            other => Err(format!("unknown engine '{other}' (spde, fk, fk-occupation)")),
        }
    }
}

/// A complete, rerunnable simulation request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "kebab-case")]
pub enum RunConfig {
    Spde(SpdeConfig),
    Fk(FkConfig),
    FkOccupation(FkConfig),
}

impl RunConfig {
    /// Parses an engine-specific config body (no `engine` key).
    pub fn from_json(engine: Engine, text: &str) -> Result<Self> {
        let err = |e: serde_json::Error| Error::Config(format!("{engine:?} config: {e}"));
        Ok(match engine {
            Engine::Spde => RunConfig::Spde(serde_json::from_str(text).map_err(err)?),
            Engine::Fk => RunConfig::Fk(serde_json::from_str(text).map_err(err)?),
            Engine::FkOccupation => RunConfig::FkOccupation(serde_json::from_str(text).map_err(err)?),
        })
    }

    pub fn engine(&self) -> Engine {
        match self {
            RunConfig::Spde(_) => Engine::Spde,
            RunConfig::Fk(_) => Engine::Fk,
            RunConfig::FkOccupation(_) => Engine::FkOccupation,
        }
    }

    pub fn mc(&self) -> &McConfig {
        match self {
            RunConfig::Spde(c) => &c.mc,
            RunConfig::Fk(c) | RunConfig::FkOccupation(c) => &c.mc,
        }
    }

    pub fn mc_mut(&mut self) -> &mut McConfig {
        match self {
            RunConfig::Spde(c) => &mut c.mc,
            RunConfig::Fk(c) | RunConfig::FkOccupation(c) => &mut c.mc,
        }
    }

    pub fn target(&self) -> &Target {
        match self {
            RunConfig::Spde(c) => &c.target,
            RunConfig::Fk(c) | RunConfig::FkOccupation(c) => &c.target,
        }
    }

    pub fn run(&self) -> Result<SimOutcome> {
        match self {
            RunConfig::Spde(c) => {
                let mu = c.measure.to_measure()?;
                spde_estimate_two_point(&c.target.query()?, &mu, &c.rho, c.nu, &c.grid, &c.mc)
            }
            RunConfig::Fk(c) => fk_two_point(&c.target.query()?, &c.u0, c.nu, c.lambda, &c.mc),
            RunConfig::FkOccupation(c) => {
                let eps = c.eps.ok_or_else(|| Error::Config("fk-occupation needs eps".into()))?;
                let n_steps = c.n_steps.ok_or_else(|| Error::Config("fk-occupation needs n_steps".into()))?;
                fk_two_point_occupation(&c.target.query()?, &c.u0, c.nu, c.lambda, &c.mc, eps, n_steps)
            }
        }
    }
}
