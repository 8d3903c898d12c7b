//! Batched Euler–Maruyama over chunks of paths.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::noise::{active_modes, path_rng};
use super::{PathConfig, PerturbationKind, StrategyPerturbation};
use crate::error::{Error, Result};
use crate::game::{AssembledGame, Team};
use crate::riccati::{RiccatiSolution, TimeGrid};
use crate::scalar::Real;

/// Paths advanced together; fixed so results never depend on scheduling.
const CHUNK: usize = 32;

/// Costs and terminal state of one path.
#[derive(Debug, Clone)]
pub struct PathOutcome<T: Real> {
    pub cost: [f64; 2],
    pub terminal: DVector<T>,
    pub finite: bool,
}

/// One simulated scheme on the shared noise: Euler steps of `stride` fine
/// steps, optionally with a deviating team.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Variant<'a> {
    pub stride: usize,
    pub perturbation: Option<&'a StrategyPerturbation>,
}

pub(crate) struct Engine<'a, T: Real> {
    asm: &'a AssembledGame<T>,
    steps: usize,
    h: f64,
    /// Columns `σ √λ_k ê_k`, so that `Σ ΔW = noise · ξ · √h`.
    noise: DMatrix<T>,
    gains: Vec<[DMatrix<T>; 2]>,
    seed: u64,
    num_paths: usize,
}

impl<'a, T: Real> Engine<'a, T> {
    pub(crate) fn new(
        asm: &'a AssembledGame<T>,
        sol: &RiccatiSolution<T>,
        cfg: &PathConfig,
        max_stride: usize,
    ) -> Result<Self> {
        if let crate::riccati::SolveStatus::Escaped { time } = sol.status {
            return Err(Error::Escaped { time });
        }
        let mut violations = cfg.validate();
        if !violations.is_empty() {
            return Err(Error::Invalid(std::mem::take(&mut violations)));
        }
        if let Some(m) = cfg.modes_used {
            for team in Team::BOTH {
                let k = asm.noise[team.index()].len();
                if m > k {
                    return Err(Error::invalid(
                        "simulation.modes_used",
                        format!("{m} exceeds the {k} modes of team {}", team.number()),
                    ));
                }
            }
        }
        let grid = TimeGrid::new(asm.horizon, cfg.dt_sim)?;
        let steps = grid.steps();
        if steps % max_stride != 0 {
            return Err(Error::invalid(
                "simulation.dt_sim",
                format!("{steps} steps are not divisible by {max_stride}"),
            ));
        }
        let n = asm.n();
        let mut cols = Vec::new();
        for team in Team::BOTH {
            let modes = &asm.noise[team.index()];
            let sigma = asm.team(team).sigma;
            let start = team.block(n).start;
            for k in 0..active_modes(asm, team, cfg.modes_used) {
                let mut e = DVector::zeros(2 * n);
                e.rows_mut(start, n)
                    .copy_from(&(modes.functions.column(k) * (sigma * modes.eigenvalues[k].sqrt())));
                cols.push(e);
            }
        }
        let noise = if cols.is_empty() {
            DMatrix::zeros(2 * n, 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        let gains = (0..steps)
            .map(|j| sol.feedback_gain(asm, grid.time(j)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            asm,
            steps,
            h: grid.dt(),
            noise,
            gains,
            seed: cfg.seed,
            num_paths: cfg.num_paths,
        })
    }

    /// Per-variant outcomes, each ordered by path index.
    pub(crate) fn run(&self, variants: &[Variant<'_>]) -> Result<Vec<Vec<PathOutcome<T>>>> {
        for v in variants {
            if v.stride == 0 || self.steps % v.stride != 0 {
                return Err(Error::invalid("stride", "must divide the number of steps"));
            }
        }
        let chunks: Vec<usize> = (0..self.num_paths).step_by(CHUNK).collect();
        let results: Vec<Vec<Vec<PathOutcome<T>>>> = chunks
            .par_iter()
            .map(|&start| {
                let len = CHUNK.min(self.num_paths - start);
                self.run_chunk(start, len, variants)
            })
            .collect();
        let mut out: Vec<Vec<PathOutcome<T>>> = vec![Vec::with_capacity(self.num_paths); variants.len()];
        for chunk in results {
            for (v, paths) in chunk.into_iter().enumerate() {
                out[v].extend(paths);
            }
        }
        Ok(out)
    }

    fn run_chunk(&self, start: usize, len: usize, variants: &[Variant<'_>]) -> Vec<Vec<PathOutcome<T>>> {
        let asm = self.asm;
        let n = asm.n();
        let kt = self.noise.ncols();
        let half = T::lit(0.5);
        let inv_n = T::lit(1.0 / n as f64);
        let eps = asm.epsilon;
        let c = [asm.team(Team::One), asm.team(Team::Two)];
        let b = [c[0].b, c[1].b];
        let tracking = &asm.costs.tracking;
        let sqrt_h = T::lit(self.h.sqrt());

        let mut rngs: Vec<_> = (start..start + len)
            .map(|p| path_rng(self.seed, p as u64))
            .collect();
        let x0 = DMatrix::from_fn(2 * n, len, |i, _| asm.x0[i]);
        let mut states: Vec<DMatrix<T>> = variants.iter().map(|_| x0.clone()).collect();
        let mut costs: Vec<[Vec<T>; 2]> = variants
            .iter()
            .map(|_| [vec![T::zero(); len], vec![T::zero(); len]])
            .collect();
        let mut xi = DMatrix::<T>::zeros(kt, len);

        for j in 0..self.steps {
            for (col, rng) in rngs.iter_mut().enumerate() {
                for r in 0..kt {
                    let z: f64 = rng.sample(StandardNormal);
                    xi[(r, col)] = T::lit(z);
                }
            }
            let dw = if kt > 0 {
                &self.noise * &xi * sqrt_h
            } else {
                DMatrix::zeros(2 * n, len)
            };

            for (v, variant) in variants.iter().enumerate() {
                let x = &mut states[v];
                if j % variant.stride == 0 {
                    let dt = T::lit(self.h * variant.stride as f64);
                    let [k1, k2] = &self.gains[j];
                    let mut u = [k1 * &*x, k2 * &*x];
                    if let Some(p) = variant.perturbation {
                        let ui = &mut u[p.team.index()];
                        match &p.kind {
                            PerturbationKind::Scale { factor } => *ui *= T::lit(*factor),
                            PerturbationKind::Offset {
                                direction,
                                magnitude,
                            } => {
                                let offset = DVector::from_iterator(
                                    n,
                                    direction.iter().map(|d| T::lit(d * magnitude)),
                                );
                                for mut colv in ui.column_iter_mut() {
                                    colv += &offset;
                                }
                            }
                        }
                    }
                    let y = [
                        &tracking[0] * x.rows(0, n),
                        &tracking[1] * x.rows(n, n),
                    ];
                    for col in 0..len {
                        let sq = |m: &DMatrix<T>| m.column(col).norm_squared() * inv_n;
                        let (y1, y2) = (sq(&y[0]), sq(&y[1]));
                        let (u1, u2) = (sq(&u[0]), sq(&u[1]));
                        costs[v][0][col] +=
                            half * dt * (c[0].q * y1 + c[0].r_own * u1 + eps * c[0].r_cross * u2);
                        costs[v][1][col] +=
                            half * dt * (c[1].q * y2 + c[1].r_own * u2 + eps * c[1].r_cross * u1);
                    }
                    let mut drift = &asm.drift * &*x;
                    {
                        let mut top = drift.rows_mut(0, n);
                        top += &u[0] * b[0];
                    }
                    {
                        let mut bottom = drift.rows_mut(n, n);
                        bottom += &u[1] * b[1];
                    }
                    *x += drift * dt;
                }
                *x += &dw;
            }
        }

        variants
            .iter()
            .enumerate()
            .map(|(v, _)| {
                let x = &states[v];
                (0..len)
                    .map(|col| {
                        let xc = x.column(col);
                        let t1 = xc.rows(0, n).norm_squared() * inv_n;
                        let t2 = xc.rows(n, n).norm_squared() * inv_n;
                        let cost = [
                            (costs[v][0][col] + half * c[0].qf * t1).as_f64(),
                            (costs[v][1][col] + half * c[1].qf * t2).as_f64(),
                        ];
                        let terminal = xc.into_owned();
                        let finite = cost.iter().all(|x| x.is_finite())
                            && terminal.iter().all(|x| x.as_f64().is_finite());
                        PathOutcome {
                            cost,
                            terminal,
                            finite,
                        }
                    })
                    .collect()
            })
            .collect()
    }
}
