//! Experiment configuration files (TOML).
//!
//! Parsing is strict: unknown keys are rejected, syntax errors carry a line
//! and column, and semantic checks report every violation at once.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result, Violation};
use crate::game::{GameSpec, Team};
use crate::riccati::{SolverConfig, TimeGrid};
use crate::sde::PathConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Number of midpoint cells discretizing `[0, 1]`.
    pub grid_n: usize,
    pub game: GameSpec,
    pub solver: SolverConfig,
    pub simulation: PathConfig,
    pub outputs: OutputConfig,
    pub studies: Studies,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid_n: 16,
            game: GameSpec::default(),
            solver: SolverConfig::default(),
            simulation: PathConfig::default(),
            outputs: OutputConfig::default(),
            studies: Studies::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Append every entry of `Π¹` and `Π²` to the solution table.
    pub export_pi: bool,
    /// Write one row per simulated path.
    pub per_path_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            export_pi: false,
            per_path_csv: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Studies {
    pub bounds: BoundsStudy,
    pub continuation: ContinuationStudy,
    pub verify: VerifyStudy,
    pub convergence: ConvergenceStudy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsStudy {
    pub alphas: Vec<f64>,
}

impl Default for BoundsStudy {
    fn default() -> Self {
        Self {
            alphas: vec![0.25, 0.5, 0.9],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationStudy {
    /// Final coupling; the game's `epsilon` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    pub steps: usize,
}

impl Default for ContinuationStudy {
    fn default() -> Self {
        Self {
            target: None,
            steps: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyStudy {
    /// Gain multipliers tried for each team.
    pub scalings: Vec<f64>,
    /// Constant control offsets along these noise modes (zero based).
    pub offset_modes: Vec<usize>,
    pub offset_magnitude: f64,
    /// Relative best-response residual accepted as a fixed point.
    pub residual_tol: f64,
    /// Number of standard errors a deviation may undercut the equilibrium.
    pub sigma_tol: f64,
    /// Compare Monte Carlo costs with the value formula.
    pub value_check: bool,
}

impl Default for VerifyStudy {
    fn default() -> Self {
        Self {
            scalings: vec![0.5, 0.9, 1.1, 1.5],
            offset_modes: vec![0],
            offset_magnitude: 0.5,
            residual_tol: 1e-6,
            sigma_tol: 3.0,
            value_check: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceStudy {
    pub grid_n: Vec<usize>,
    pub dt: Vec<f64>,
    pub dt_sim: Vec<f64>,
    pub num_paths: Vec<usize>,
}

impl Default for ConvergenceStudy {
    fn default() -> Self {
        Self {
            grid_n: vec![16, 32, 64],
            dt: vec![4e-2, 2e-2, 1e-2, 5e-3],
            dt_sim: vec![8e-3, 4e-3, 2e-3],
            num_paths: vec![250, 1000, 4000],
        }
    }
}

/// Shipped instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    /// One cell, constant graphons.
    Scalar,
    /// Two-block step graphons.
    TwoBlock,
    /// Cosine-difference and min kernels with sixteen noise modes.
    Cosine,
}

impl Reference {
    pub const ALL: [Reference; 3] = [Reference::Scalar, Reference::TwoBlock, Reference::Cosine];

    pub fn name(self) -> &'static str {
        match self {
            Reference::Scalar => "scalar",
            Reference::TwoBlock => "two_block",
            Reference::Cosine => "cosine",
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            Reference::Scalar => include_str!("../configs/scalar.toml"),
            Reference::TwoBlock => include_str!("../configs/two_block.toml"),
            Reference::Cosine => include_str!("../configs/cosine.toml"),
        }
    }

    pub fn config(self) -> ExperimentConfig {
        parse_config(self.text()).expect("shipped configs are valid")
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name() == name)
    }
}

/// 1-based line and column of a byte offset.
fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| position(text, s.start));
        Error::Syntax {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    check(cfg.validate())?;
    Ok(cfg)
}

pub fn to_toml(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Inconsistent(format!("config serialization: {e}")))
}

fn dt_divides(horizon: f64, dt: f64) -> bool {
    TimeGrid::new(horizon, dt).is_ok()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let horizon = self.game.horizon;
        let game = self.game.validate();
        let game_ok = game.is_empty();
        out.extend(game.into_iter().map(|v| v.nested("game")));
        if self.grid_n == 0 {
            out.push(Violation::new("grid_n", "must be at least 1"));
        } else {
            out.extend(
                self.game
                    .validate_for_grid(self.grid_n)
                    .into_iter()
                    .map(|v| v.nested("game")),
            );
        }
        out.extend(self.solver.validate().into_iter().map(|v| v.nested("solver")));
        out.extend(self.simulation.validate().into_iter().map(|v| v.nested("simulation")));
        if game_ok {
            if self.solver.dt > 0.0 && !dt_divides(horizon, self.solver.dt) {
                out.push(Violation::new(
                    "solver.dt",
                    format!("{} does not divide the horizon {horizon}", self.solver.dt),
                ));
            }
            if self.simulation.dt_sim > 0.0 && !dt_divides(horizon, self.simulation.dt_sim) {
                out.push(Violation::new(
                    "simulation.dt_sim",
                    format!("{} does not divide the horizon {horizon}", self.simulation.dt_sim),
                ));
            }
        }
        let min_modes = Team::BOTH
            .iter()
            .map(|&t| self.game.team(t).noise.modes)
            .min()
            .unwrap_or(0);
        if let Some(m) = self.simulation.modes_used {
            if m > min_modes {
                out.push(Violation::new(
                    "simulation.modes_used",
                    format!("{m} exceeds the truncation level {min_modes}"),
                ));
            }
        }
        out.extend(self.studies.validate(&self.game, min_modes).into_iter().map(|v| v.nested("studies")));
        out
    }
}

impl Studies {
    fn validate(&self, game: &GameSpec, modes: usize) -> Vec<Violation> {
        let mut out = Vec::new();
        for a in &self.bounds.alphas {
            if !(*a > 0.0 && *a < 1.0) {
                out.push(Violation::new("bounds.alphas", format!("{a} is outside (0, 1)")));
            }
        }
        if self.continuation.steps == 0 {
            out.push(Violation::new("continuation.steps", "must be at least 1"));
        }
        if let Some(t) = self.continuation.target {
            if !t.is_finite() {
                out.push(Violation::new("continuation.target", "must be finite"));
            }
        }
        let v = &self.verify;
        if v.scalings.iter().any(|s| !s.is_finite()) {
            out.push(Violation::new("verify.scalings", "must be finite"));
        }
        if let Some(m) = v.offset_modes.iter().find(|m| **m >= modes.max(1)) {
            out.push(Violation::new(
                "verify.offset_modes",
                format!("mode {m} is not below the truncation level {modes}"),
            ));
        }
        if !v.offset_magnitude.is_finite() {
            out.push(Violation::new("verify.offset_magnitude", "must be finite"));
        }
        if !(v.residual_tol > 0.0) {
            out.push(Violation::new("verify.residual_tol", "must be > 0"));
        }
        if !(v.sigma_tol >= 0.0) {
            out.push(Violation::new("verify.sigma_tol", "must be >= 0"));
        }
        let c = &self.convergence;
        for &n in &c.grid_n {
            if n == 0 || n < modes {
                out.push(Violation::new(
                    "convergence.grid_n",
                    format!("{n} is below the noise truncation level {modes}"),
                ));
            }
        }
        if game.horizon > 0.0 {
            for (field, list) in [("convergence.dt", &c.dt), ("convergence.dt_sim", &c.dt_sim)] {
                for &dt in list.iter() {
                    if !(dt > 0.0) || !dt_divides(game.horizon, dt) {
                        out.push(Violation::new(field, format!("{dt} does not divide the horizon")));
                    }
                }
            }
        }
        if c.num_paths.contains(&0) {
            out.push(Violation::new("convergence.num_paths", "entries must be at least 1"));
        }
        out
    }
}
