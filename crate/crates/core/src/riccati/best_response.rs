use nalgebra::DMatrix;

use super::coupled::block_square;
use super::march::march_backward;
use super::{SolveStatus, SolverConfig, TimeGrid};
use crate::error::{Error, Result};
use crate::game::{AssembledGame, Team};
use crate::scalar::Real;

/// A matrix trajectory on a uniform time grid, evaluated between nodes by
/// cubic Lagrange interpolation on the four nearest nodes.
#[derive(Debug, Clone, Copy)]
pub struct Trajectory<'a, T: Real> {
    times: &'a [f64],
    values: &'a [DMatrix<T>],
}

impl<'a, T: Real> Trajectory<'a, T> {
    pub fn new(times: &'a [f64], values: &'a [DMatrix<T>]) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(Error::Shape {
                expected: times.len(),
                found: values.len(),
            });
        }
        Ok(Self { times, values })
    }

    pub fn at(&self, t: f64) -> DMatrix<T> {
        let nodes = self.times.len();
        if nodes == 1 {
            return self.values[0].clone();
        }
        let t0 = self.times[0];
        let h = (self.times[nodes - 1] - t0) / (nodes - 1) as f64;
        let u = (t - t0) / h;
        let nearest = u.round();
        if (u - nearest).abs() < 1e-9 && nearest >= 0.0 && (nearest as usize) < nodes {
            return self.values[nearest as usize].clone();
        }
        if nodes < 4 {
            let k = (u.floor().max(0.0) as usize).min(nodes - 2);
            let w = T::lit(u - k as f64);
            return &self.values[k] * (T::one() - w) + &self.values[k + 1] * w;
        }
        let base = (u.floor() as isize - 1).clamp(0, nodes as isize - 4) as usize;
        let mut out = DMatrix::zeros(self.values[0].nrows(), self.values[0].ncols());
        for a in 0..4 {
            let xa = (base + a) as f64;
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    let xb = (base + b) as f64;
                    w *= (u - xb) / (xa - xb);
                }
            }
            if w != 0.0 {
                out += &self.values[base + a] * T::lit(w);
            }
        }
        out
    }
}

/// Value matrix of one team's optimal response to a fixed opponent.
#[derive(Debug, Clone)]
pub struct BestResponse<T: Real> {
    pub team: Team,
    pub times: Vec<f64>,
    pub p: Vec<DMatrix<T>>,
    pub status: SolveStatus,
}

/// Standard single-controller Riccati equation of team `team` when the
/// opponent plays its feedback `ūʲ = −(2/Rⱼⱼ)Bⱼ*Πʲ(t)x`:
///
/// `−dP/dt = PÃ + Ã*P − (2/Rᵢᵢ)PBᵢBᵢ*P + Q̃`, `P(T) = Gⁱ`, where
/// `Ã = A_ε − (2/Rⱼⱼ)BⱼBⱼ*Πʲ` and `Q̃ = Q̄ⁱ + ε(2Rᵢⱼ/Rⱼⱼ²)ΠʲBⱼBⱼ*Πʲ`.
///
/// At a Nash equilibrium `P` coincides with the team's own `Πⁱ`.
pub fn best_response<T: Real>(
    asm: &AssembledGame<T>,
    cfg: &SolverConfig,
    opponent: Trajectory<'_, T>,
    team: Team,
) -> Result<BestResponse<T>> {
    let grid = TimeGrid::new(asm.horizon, cfg.dt)?;
    if opponent.times.len() != grid.steps() + 1
        || opponent
            .times
            .iter()
            .enumerate()
            .any(|(k, &t)| (t - grid.time(k)).abs() > 1e-12 * asm.horizon.max(1.0))
    {
        return Err(Error::Domain(
            "opponent trajectory must cover [0, T] on the solver's time grid".into(),
        ));
    }

    let n = asm.n();
    let i = team.index();
    let opp = team.other();
    let bi = team.block(n).start;
    let bj = opp.block(n).start;
    let own_weight = asm.feedback_weight(team);
    let opp_weight = asm.feedback_weight(opp);
    let source = asm.epsilon * asm.spillover_weight(team);

    let rhs = |t: f64, p: &DMatrix<T>| {
        let pj = opponent.at(t);
        let mut closed = asm.drift.clone();
        let mut rows = closed.rows_mut(bj, n);
        rows -= pj.rows(bj, n) * opp_weight;
        let pa = p * &closed;
        let mut d = &pa + closed.transpose() * p;
        d -= block_square(p, bi, n) * own_weight;
        d += block_square(&pj, bj, n) * source;
        d += &asm.costs.running[i];
        d
    };

    let mut times = Vec::new();
    let mut p = Vec::new();
    let status = march_backward(asm.costs.terminal[i].clone(), &grid, cfg, rhs, |k, m| {
        times.push(grid.time(k));
        p.push(m.clone());
    });
    times.reverse();
    p.reverse();
    Ok(BestResponse {
        team,
        times,
        p,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_interpolation_reproduces_cubics() {
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t - 3.0 * t * t * t;
        let values: Vec<DMatrix<f64>> = times
            .iter()
            .map(|&t| DMatrix::from_element(1, 1, f(t)))
            .collect();
        let tr = Trajectory::new(&times, &values).unwrap();
        for t in [0.0, 0.03, 0.15, 0.5, 0.77, 0.95, 1.0] {
            assert!((tr.at(t)[(0, 0)] - f(t)).abs() < 1e-13, "t = {t}");
        }
        assert_eq!(tr.at(0.3), values[3]);
    }
}
