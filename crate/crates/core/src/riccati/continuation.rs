use serde::{Deserialize, Serialize};

use super::{
    solve_coupled, solve_decoupled, sup_distance, trajectory_relative_error, RiccatiSolution,
    SolveStatus, SolverConfig,
};
use crate::error::{Error, Result};
use crate::game::{AssembledGame, Team};
use crate::scalar::Real;

/// Agreement required between the `ε = 0` coupled solve and the embedded
/// standalone team solves.
const DECOUPLING_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationStep {
    pub epsilon: f64,
    #[serde(flatten)]
    pub status: SolveStatus,
    /// `sup_t ‖Π_ε(t) − Π_0(t)‖` for complete solves.
    pub sup_deviation: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Continuation<T: Real> {
    pub steps: Vec<ContinuationStep>,
    /// Last complete solution along the path.
    pub solution: RiccatiSolution<T>,
    pub achieved_epsilon: f64,
    /// Relative gap between the `ε = 0` solve and the standalone team solves.
    pub decoupling_error: f64,
    pub base: RiccatiSolution<T>,
}

impl<T: Real> Continuation<T> {
    pub fn reached_target(&self, target: f64) -> bool {
        self.achieved_epsilon == target && self.steps.iter().all(|s| s.status.is_complete())
    }
}

/// Tracks the solution from the decoupled game at `ε = 0` to `ε_target` in
/// uniform steps, stopping at the first coupling whose flow escapes before
/// `t = 0`. Every step is an independent solve.
pub fn epsilon_continuation<T: Real>(
    asm: &AssembledGame<T>,
    cfg: &SolverConfig,
    target: f64,
    steps: usize,
) -> Result<Continuation<T>> {
    if steps == 0 {
        return Err(Error::Domain("continuation needs at least one step".into()));
    }
    let base_game = asm.with_epsilon(0.0);
    let base = solve_coupled(&base_game, cfg)?;
    if !base.is_complete() {
        return Err(Error::Inconsistent(format!(
            "the decoupled game escaped ({:?})",
            base.status
        )));
    }
    let mut decoupling_error = 0.0f64;
    for team in Team::BOTH {
        let single = solve_decoupled(&base_game, cfg, team)?;
        decoupling_error =
            decoupling_error.max(trajectory_relative_error(base.pi(team), &single.embedded()));
    }
    if decoupling_error > DECOUPLING_TOL {
        return Err(Error::Inconsistent(format!(
            "coupled solve at eps = 0 differs from the standalone solves by {decoupling_error:e}"
        )));
    }

    let mut out_steps = vec![ContinuationStep {
        epsilon: 0.0,
        status: SolveStatus::Complete,
        sup_deviation: Some(0.0),
    }];
    let mut solution = base.clone();
    let mut achieved = 0.0;
    for j in 1..=steps {
        let eps = target * j as f64 / steps as f64;
        let sol = solve_coupled(&asm.with_epsilon(eps), cfg)?;
        let complete = sol.is_complete();
        out_steps.push(ContinuationStep {
            epsilon: eps,
            status: sol.status,
            sup_deviation: complete.then(|| sup_distance(&sol, &base)),
        });
        if !complete {
            break;
        }
        achieved = eps;
        solution = sol;
    }
    Ok(Continuation {
        steps: out_steps,
        solution,
        achieved_epsilon: achieved,
        decoupling_error,
        base,
    })
}
