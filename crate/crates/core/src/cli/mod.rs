//! Run configuration documents, trace files and the `lmpen` subcommands.

mod commands;
mod trace_csv;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calculus::{PenaltyFn, ProxableFn, SmoothKind};
use crate::diagnostics::TolProfile;
use crate::error::{Error, Result};
use crate::iterate::DiscreteRunConfig;
use crate::ode::IntegratorOptions;
use crate::problem::{assemble, ProblemConfig, ProblemInstance};
use crate::schedules::{BetaSchedule, LambdaSchedule};

pub use commands::{cmd_check, cmd_compare, cmd_run, cmd_verify, CompareOutcome, Mode};
pub use trace_csv::{read_trace_csv, trace_header, write_trace_csv, TraceRow};

pub const DEFAULT_HORIZON: f64 = 200.0;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const VALIDATION: u8 = 2;
    pub const NUMERIC: u8 = 3;
    pub const CHECK_FAILED: u8 = 4;
    pub const ORACLE: u8 = 5;
    pub const HYPOTHESIS: u8 = 6;
}

/// Exit code for an error raised while running a command.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Numeric { .. } | Error::Divergence { .. } => exit::NUMERIC,
        Error::Oracle(_) => exit::ORACLE,
        _ => exit::VALIDATION,
    }
}

fn default_horizon() -> f64 {
    DEFAULT_HORIZON
}

/// On-disk run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    pub phi: ProxableFn,
    pub theta: SmoothKind,
    pub psi: PenaltyFn,
    pub lambda: LambdaSchedule,
    pub beta: BetaSchedule,
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<Vec<f64>>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub integrator: IntegratorOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrete: Option<DiscreteRunConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: TolProfile,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn problem_config(&self) -> ProblemConfig {
        ProblemConfig {
            dimension: self.dimension,
            phi: self.phi.clone(),
            theta: self.theta.clone(),
            psi: self.psi.clone(),
            lambda: self.lambda,
            beta: self.beta,
            x0: self.x0.clone(),
            v0: self.v0.clone(),
            seed: self.seed,
        }
    }

    /// Validates every section and assembles the instance.
    pub fn instance(&self) -> Result<ProblemInstance> {
        let prob = assemble(&self.problem_config())?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Validation(format!("horizon must be positive, got {}", self.horizon)));
        }
        self.integrator.validate()?;
        self.tolerances.validate()?;
        if let Some(d) = &self.discrete {
            d.validate()?;
            if !self.lambda.is_constant() {
                return Err(Error::Validation(
                    "the discrete scheme uses a constant mu and needs a constant lambda schedule".into(),
                ));
            }
        }
        Ok(prob)
    }
}
