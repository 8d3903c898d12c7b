use nalgebra::DMatrix;

use super::march::march_backward;
use super::{SolveStatus, SolverConfig, TimeGrid};
use crate::error::Result;
use crate::game::{AssembledGame, Team};
use crate::scalar::Real;

/// Solution of one team's standalone Riccati equation on `H`.
#[derive(Debug, Clone)]
pub struct DecoupledSolution<T: Real> {
    pub team: Team,
    pub times: Vec<f64>,
    pub pi: Vec<DMatrix<T>>,
    pub status: SolveStatus,
}

impl<T: Real> DecoupledSolution<T> {
    /// Embeds every node into `H²` on the team's own block.
    pub fn embedded(&self) -> Vec<DMatrix<T>> {
        let n = self.pi.first().map_or(0, |p| p.nrows());
        let start = self.team.block(n).start;
        self.pi
            .iter()
            .map(|p| {
                let mut e = DMatrix::zeros(2 * n, 2 * n);
                e.view_mut((start, start), (n, n)).copy_from(p);
                e
            })
            .collect()
    }
}

/// The `ε = 0` equation of one team:
/// `−dΠ/dt = ΠĀ + ĀΠ − (2Bᵢ²/Rᵢᵢ)Π² + ½Q̄ᵢ(I−ΓᵢMᵢ)²`, `Π(T) = ½Q̄ᵢf I`,
/// with `Ā = AᵢI + DᵢMᵢ`.
pub fn solve_decoupled<T: Real>(
    asm: &AssembledGame<T>,
    cfg: &SolverConfig,
    team: Team,
) -> Result<DecoupledSolution<T>> {
    let n = asm.n();
    let grid = TimeGrid::new(asm.horizon, cfg.dt)?;
    let start = team.block(n).start;
    let drift: DMatrix<T> = asm.drift_decoupled.view((start, start), (n, n)).into_owned();
    let cost: DMatrix<T> = asm.costs.running[team.index()]
        .view((start, start), (n, n))
        .into_owned();
    let terminal: DMatrix<T> = asm.costs.terminal[team.index()]
        .view((start, start), (n, n))
        .into_owned();
    let weight = asm.feedback_weight(team);

    let mut times = Vec::new();
    let mut pi = Vec::new();
    let status = march_backward(
        terminal,
        &grid,
        cfg,
        |_, p: &DMatrix<T>| p * &drift + &drift * p - (p * p) * weight + &cost,
        |k, p| {
            times.push(grid.time(k));
            pi.push(p.clone());
        },
    );
    times.reverse();
    pi.reverse();
    Ok(DecoupledSolution {
        team,
        times,
        pi,
        status,
    })
}
