use nalgebra::DMatrix;

use super::march::march_backward;
use super::{RiccatiSolution, SolverConfig, TimeGrid};
use crate::error::{Error, Result};
use crate::game::{swap_cols, swap_rows, AssembledGame};
use crate::scalar::Real;

/// Off-block-diagonal tolerance for the `H⁴` flow.
const OFF_BLOCK_TOL: f64 = 1e-10;

fn off_block_norm<T: Real>(p: &DMatrix<T>) -> f64 {
    let h = p.nrows() / 2;
    let upper = p.view((0, h), (h, h)).norm();
    let lower = p.view((h, 0), (h, h)).norm();
    upper.max(lower).as_f64()
}

/// Integrates the single `4n × 4n` equation
///
/// `−dΠ/dt = ΠK + K*Π − ΠSΠ − ΠJSΠJ − JΠSJΠ + εJΠJS₀JΠJ + Q̄`, `Π(T) = G`
///
/// term by term, and returns its two diagonal `2n` blocks. The flow must stay
/// in the block-diagonal subspace; leaving it is reported as an
/// internal-consistency error.
pub fn solve_block_h4<T: Real>(asm: &AssembledGame<T>, cfg: &SolverConfig) -> Result<RiccatiSolution<T>> {
    let grid = TimeGrid::new(asm.horizon, cfg.dt)?;
    let ops = asm.h4_operators();
    let kt = ops.k.transpose();
    let eps = asm.epsilon;
    let dim = asm.dim();

    let rhs = |_: f64, p: &DMatrix<T>| {
        let sp = &ops.s * p;
        let ps = p * &ops.s;
        let jpj = swap_cols(&swap_rows(p));
        let mut d = p * &ops.k + &kt * p;
        d -= p * &sp;
        d -= p * swap_cols(&swap_rows(&sp));
        d -= swap_cols(&swap_rows(&ps)) * p;
        d += (&jpj * &ops.s0 * &jpj) * eps;
        d += &ops.qbar;
        d
    };

    let mut times = Vec::new();
    let mut pi1 = Vec::new();
    let mut pi2 = Vec::new();
    let mut worst = 0.0f64;
    let status = march_backward(ops.g.clone(), &grid, cfg, rhs, |k, p| {
        worst = worst.max(off_block_norm(p));
        times.push(grid.time(k));
        pi1.push(p.view((0, 0), (dim, dim)).into_owned());
        pi2.push(p.view((dim, dim), (dim, dim)).into_owned());
    });
    if worst > OFF_BLOCK_TOL {
        return Err(Error::Inconsistent(format!(
            "H4 flow left the block-diagonal subspace (off-block norm {worst:e})"
        )));
    }
    Ok(RiccatiSolution::from_backward(asm, times, pi1, pi2, status))
}
