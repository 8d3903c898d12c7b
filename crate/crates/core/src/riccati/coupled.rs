use nalgebra::DMatrix;

use super::march::march_backward;
use super::{RiccatiSolution, SolveStatus, SolverConfig, TimeGrid};
use crate::error::Result;
use crate::game::{AssembledGame, Team};
use crate::scalar::Real;

/// `Π B̂ B̂* Π` restricted to a team block: `P[:, b] · P[b, :]`, symmetrized.
pub(super) fn block_square<T: Real>(p: &DMatrix<T>, start: usize, n: usize) -> DMatrix<T> {
    let mut x = p.columns(start, n) * p.rows(start, n);
    crate::linalg::symmetrize(&mut x);
    x
}

/// Right-hand side of the coupled system in the symmetrized form
/// `ΠA + (ΠA)ᵀ`, which agrees with `ΠA + A*Π` for symmetric `Π`.
pub(super) struct CoupledRhs<'a, T: Real> {
    asm: &'a AssembledGame<T>,
    weight: [T; 2],
    source: [T; 2],
}

impl<'a, T: Real> CoupledRhs<'a, T> {
    pub(super) fn new(asm: &'a AssembledGame<T>) -> Self {
        Self {
            asm,
            weight: [asm.feedback_weight(Team::One), asm.feedback_weight(Team::Two)],
            source: [
                asm.epsilon * asm.spillover_weight(Team::One),
                asm.epsilon * asm.spillover_weight(Team::Two),
            ],
        }
    }

    pub(super) fn eval(&self, p: &[DMatrix<T>; 2]) -> [DMatrix<T>; 2] {
        let n = self.asm.n();
        let sq = [
            block_square(&p[0], 0, n),
            block_square(&p[1], n, n),
        ];
        let out = |team: Team| {
            let i = team.index();
            let j = team.other().index();
            let bj = team.other().block(n).start;
            let pa = &p[i] * &self.asm.drift;
            let mut d = &pa + pa.transpose();
            let cross = p[i].columns(bj, n) * p[j].rows(bj, n);
            d -= (&cross + cross.transpose()) * self.weight[j];
            d -= &sq[i] * self.weight[i];
            d += &sq[j] * self.source[i];
            d += &self.asm.costs.running[i];
            d
        };
        [out(Team::One), out(Team::Two)]
    }
}

/// Streams `(k, t_k, Π¹, Π²)` from `t = T` backward without storing the path.
pub fn solve_coupled_streaming<T, O>(
    asm: &AssembledGame<T>,
    cfg: &SolverConfig,
    mut observe: O,
) -> Result<SolveStatus>
where
    T: Real,
    O: FnMut(usize, f64, &DMatrix<T>, &DMatrix<T>),
{
    let grid = TimeGrid::new(asm.horizon, cfg.dt)?;
    let rhs = CoupledRhs::new(asm);
    let terminal = [asm.costs.terminal[0].clone(), asm.costs.terminal[1].clone()];
    Ok(march_backward(
        terminal,
        &grid,
        cfg,
        |_, p: &[DMatrix<T>; 2]| rhs.eval(p),
        |k, p| observe(k, grid.time(k), &p[0], &p[1]),
    ))
}

/// Backward RK4 solve of the coupled system, storing every node.
pub fn solve_coupled<T: Real>(asm: &AssembledGame<T>, cfg: &SolverConfig) -> Result<RiccatiSolution<T>> {
    let mut times = Vec::new();
    let mut pi1 = Vec::new();
    let mut pi2 = Vec::new();
    let status = solve_coupled_streaming(asm, cfg, |_, t, p1, p2| {
        times.push(t);
        pi1.push(p1.clone());
        pi2.push(p2.clone());
    })?;
    Ok(RiccatiSolution::from_backward(asm, times, pi1, pi2, status))
}
