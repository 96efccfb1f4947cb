//! JSON run configuration. Strict parse (unknown keys rejected), every field
//! defaulted, one file drives all subcommands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nse::{InitialCondition, NseConfig};
use crate::projection::{InitStrategy, ProjectionOptions};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectionConfig {
    /// penalty weight as a multiple of the gradient weight `a`
    pub rho_factor: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub tol_det: f64,
    pub tol_opt: f64,
    pub det_guard: f64,
    /// "reference-point" | "identity" | "data"
    pub init: String,
    pub flow_steps: usize,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        let o = ProjectionOptions::default();
        ProjectionConfig {
            rho_factor: o.rho_factor,
            max_outer: o.max_outer,
            max_inner: o.max_inner,
            tol_det: o.tol_det,
            tol_opt: o.tol_opt,
            det_guard: o.det_guard,
            init: "reference-point".into(),
            flow_steps: o.flow_steps,
        }
    }
}

impl ProjectionConfig {
    pub fn to_options(&self) -> Result<ProjectionOptions> {
        let init = match self.init.as_str() {
            "reference-point" => InitStrategy::ReferencePoint,
            "identity" => InitStrategy::Identity,
            "data" => InitStrategy::Data,
            other => {
                return Err(Error::Config(format!(
                    "unknown projection init {other:?} (expected reference-point, identity, data)"
                )))
            }
        };
        if self.tol_det <= 0.0 || self.tol_opt <= 0.0 || self.rho_factor <= 0.0 {
            return Err(Error::Config("projection tolerances must be positive".into()));
        }
        Ok(ProjectionOptions {
            rho_factor: self.rho_factor,
            max_outer: self.max_outer,
            max_inner: self.max_inner,
            tol_det: self.tol_det,
            tol_opt: self.tol_opt,
            det_guard: self.det_guard,
            init,
            flow_steps: self.flow_steps,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dim: usize,
    pub n: usize,
    pub tau: f64,
    pub t_final: f64,
    pub mu: f64,
    /// integrability exponent of the transported-norm diagnostics; must
    /// exceed the dimension
    pub r: f64,
    pub amplitude: f64,
    /// "vortex-pair" | "bump-swirl" | "zero"
    pub initial: String,
    pub semigroup_substeps: usize,
    pub duhamel_every: usize,
    pub doubling_guard: bool,
    /// gradient weight for the standalone project command; the scheme always
    /// uses mu * tau
    pub a: f64,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub projection: ProjectionConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dim: 2,
            n: 64,
            tau: 1.0 / 64.0,
            t_final: 0.25,
            mu: 0.05,
            r: 4.0,
            amplitude: 0.01,
            initial: "vortex-pair".into(),
            semigroup_substeps: 4,
            duhamel_every: 0,
            doubling_guard: true,
            a: 0.05,
            seed: None,
            threads: None,
            projection: ProjectionConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn initial_condition(&self) -> Result<InitialCondition> {
        match self.initial.as_str() {
            "vortex-pair" => Ok(InitialCondition::VortexPair),
            "bump-swirl" => Ok(InitialCondition::BumpSwirl),
            "zero" => Ok(InitialCondition::Zero),
            other => Err(Error::Config(format!(
                "unknown initial condition {other:?} (expected vortex-pair, bump-swirl, zero)"
            ))),
        }
    }

    pub fn to_nse_config(&self) -> Result<NseConfig> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::Config(format!("dim must be 2 or 3, got {}", self.dim)));
        }
        if self.r <= self.dim as f64 {
            return Err(Error::Config(format!(
                "need r > dim, got r = {} with dim = {}",
                self.r, self.dim
            )));
        }
        if self.tau <= 0.0 || self.t_final < self.tau || self.mu <= 0.0 {
            return Err(Error::Config(
                "need tau > 0, t_final >= tau, mu > 0".into(),
            ));
        }
        Ok(NseConfig {
            dim: self.dim,
            n: self.n,
            tau: self.tau,
            t_final: self.t_final,
            mu: self.mu,
            r: self.r,
            amplitude: self.amplitude,
            initial: self.initial_condition()?,
            semigroup_substeps: self.semigroup_substeps.max(1),
            projection: self.projection.to_options()?,
            duhamel_every: self.duhamel_every,
            doubling_guard: self.doubling_guard,
        })
    }

    /// Write the resolved configuration next to a command's artifacts.
    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(dir.join("config.resolved.json"), text + "\n")?;
        Ok(())
    }
}
