//! Backward integration of the coupled Riccati system and everything built
//! on it: the trace corrections `q^i`, equilibrium feedback gains, the value
//! formula, the `H⁴` block form, best-response certification, the local
//! existence bound and continuation in `ε`.
//!
//! For team `i` with opponent `j` the solver integrates
//!
//! ```text
//! −dΠⁱ/dt = ΠⁱA_ε + A_ε*Πⁱ − (2/Rᵢᵢ)ΠⁱBᵢBᵢ*Πⁱ − (2/Rⱼⱼ)(ΠⁱBⱼBⱼ*Πʲ + ΠʲBⱼBⱼ*Πⁱ)
//!           + ε(2Rᵢⱼ/Rⱼⱼ²)ΠʲBⱼBⱼ*Πʲ + Q̄ⁱ,          Πⁱ(T) = Gⁱ
//! ```
//!
//! with classical RK4 at a fixed step.

mod best_response;
mod block;
mod bound;
mod continuation;
mod coupled;
mod decoupled;
mod march;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{AssembledGame, Team};
use crate::linalg;
use crate::scalar::Real;

pub use best_response::{best_response, BestResponse, Trajectory};
pub use block::solve_block_h4;
pub use bound::{certified_window_norm, existence_bound, ExistenceBound};
pub use continuation::{epsilon_continuation, Continuation, ContinuationStep};
pub use coupled::{solve_coupled, solve_coupled_streaming};
pub use decoupled::{solve_decoupled, DecoupledSolution};

/// Uniform backward step and blow-up policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub dt: f64,
    /// Project onto the symmetric part after every step.
    pub symmetrize: bool,
    /// Spectral norm above which the flow is reported as escaped.
    pub blowup_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            symmetrize: true,
            blowup_threshold: 1e8,
        }
    }
}

impl SolverConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Vec<crate::Violation> {
        let mut out = Vec::new();
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            out.push(crate::Violation::new("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.blowup_threshold > 0.0) {
            out.push(crate::Violation::new("blowup_threshold", "must be > 0"));
        }
        out
    }
}

/// `N` uniform steps covering `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    /// Requires `dt` to divide `T` up to rounding.
    pub fn new(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !(horizon > 0.0) {
            return Err(Error::Domain(format!("dt = {dt}, T = {horizon}")));
        }
        let steps = (horizon / dt).round();
        if steps < 1.0 || (steps * dt - horizon).abs() > 1e-9 * horizon {
            return Err(Error::invalid(
                "dt",
                format!("{dt} does not divide the horizon {horizon}"),
            ));
        }
        Ok(Self {
            horizon,
            steps: steps as usize,
        })
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            self.horizon * k as f64 / self.steps as f64
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SolveStatus {
    Complete,
    /// The norm left the admissible range at `time`; nodes after it are kept.
    Escaped { time: f64 },
}

impl SolveStatus {
    pub fn is_complete(&self) -> bool {
        matches!(self, SolveStatus::Complete)
    }
}

/// `Π¹, Π², q¹, q²` on the solver's time nodes (ascending).
#[derive(Debug, Clone)]
pub struct RiccatiSolution<T: Real> {
    pub times: Vec<f64>,
    pub pi: [Vec<DMatrix<T>>; 2],
    pub q: [Vec<T>; 2],
    pub status: SolveStatus,
}

impl<T: Real> RiccatiSolution<T> {
    /// Assembles a solution from nodes collected in descending time order.
    pub(crate) fn from_backward(
        asm: &AssembledGame<T>,
        mut times: Vec<f64>,
        mut pi1: Vec<DMatrix<T>>,
        mut pi2: Vec<DMatrix<T>>,
        status: SolveStatus,
    ) -> Self {
        times.reverse();
        pi1.reverse();
        pi2.reverse();
        let q1 = compute_q(&times, &pi1, asm);
        let q2 = compute_q(&times, &pi2, asm);
        Self {
            times,
            pi: [pi1, pi2],
            q: [q1, q2],
            status,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.status.is_complete()
    }

    pub fn pi(&self, team: Team) -> &[DMatrix<T>] {
        &self.pi[team.index()]
    }

    pub fn q(&self, team: Team) -> &[T] {
        &self.q[team.index()]
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("solutions hold at least the terminal node")
    }

    /// Linear interpolation of `Πⁱ` at `t` within the stored nodes.
    pub fn pi_at(&self, team: Team, t: f64) -> Result<DMatrix<T>> {
        let first = self.times[0];
        let last = self.horizon();
        if !(first..=last).contains(&t) {
            return Err(Error::Domain(format!("t = {t} outside [{first}, {last}]")));
        }
        let nodes = self.times.len();
        let pis = self.pi(team);
        if nodes == 1 {
            return Ok(pis[0].clone());
        }
        let h = (last - first) / (nodes - 1) as f64;
        let u = (t - first) / h;
        let k = (u.floor() as usize).min(nodes - 2);
        let w = T::lit(u - k as f64);
        Ok(&pis[k] * (T::one() - w) + &pis[k + 1] * w)
    }

    /// Equilibrium gains `Kⁱ(t) = −(2/Rᵢᵢ) Bᵢ* Πⁱ(t)`, each `n × 2n`.
    pub fn feedback_gain(&self, asm: &AssembledGame<T>, t: f64) -> Result<[DMatrix<T>; 2]> {
        Ok([
            gain_from_pi(asm, Team::One, &self.pi_at(Team::One, t)?),
            gain_from_pi(asm, Team::Two, &self.pi_at(Team::Two, t)?),
        ])
    }

    /// `Jⁱ = <Πⁱ(0) x₀, x₀> + qⁱ(0)` under the weighted inner product.
    pub fn value_at(&self, x0: &DVector<T>) -> Result<[T; 2]> {
        if let SolveStatus::Escaped { time } = self.status {
            return Err(Error::Escaped { time });
        }
        let dim = self.pi[0][0].nrows();
        if x0.len() != dim {
            return Err(Error::Shape {
                expected: dim,
                found: x0.len(),
            });
        }
        let n = dim / 2;
        let value = |team: Team| {
            let p = &self.pi(team)[0];
            linalg::weighted_dot(&(p * x0), x0, n) + self.q(team)[0]
        };
        Ok([value(Team::One), value(Team::Two)])
    }

    /// Spectral norm of `Πⁱ` at every node.
    pub fn norms(&self, team: Team) -> Vec<f64> {
        self.pi(team)
            .iter()
            .map(|p| linalg::spectral_norm_sym(p).as_f64())
            .collect()
    }

    /// Smallest eigenvalue of `Πⁱ` at every node (recorded, not asserted).
    pub fn min_eigenvalues(&self, team: Team) -> Vec<f64> {
        self.pi(team)
            .iter()
            .map(|p| linalg::min_eigenvalue(p).as_f64())
            .collect()
    }

    /// Largest relative asymmetry over both teams and all nodes.
    pub fn max_asymmetry(&self) -> f64 {
        self.pi
            .iter()
            .flatten()
            .map(linalg::relative_asymmetry)
            .fold(0.0, f64::max)
    }
}

pub(crate) fn gain_from_pi<T: Real>(asm: &AssembledGame<T>, team: Team, pi: &DMatrix<T>) -> DMatrix<T> {
    let c = asm.team(team);
    let scale = -T::lit(2.0) / c.r_own;
    asm.control_maps[team.index()].transpose() * pi * scale
}

/// `tr[Π ΣQΣ*] = Σ_k λ_k <ΠΣê_k, Σê_k>` over the embedded noise modes.
pub fn trace_term<T: Real>(pi: &DMatrix<T>, asm: &AssembledGame<T>) -> T {
    let n = asm.n();
    let mut acc = T::zero();
    for (lambda, e) in asm.embedded_modes() {
        let se = e.component_mul(&asm.noise_gain);
        acc += lambda * linalg::weighted_dot(&(pi * &se), &se, n);
    }
    acc
}

/// `q(t) = ∫_t^T tr[Π(s)ΣQΣ*] ds` by the trapezoid rule on the given nodes.
pub fn compute_q<T: Real>(times: &[f64], pis: &[DMatrix<T>], asm: &AssembledGame<T>) -> Vec<T> {
    let traces: Vec<T> = pis.iter().map(|p| trace_term(p, asm)).collect();
    let mut q = vec![T::zero(); times.len()];
    let half = T::lit(0.5);
    for k in (0..times.len().saturating_sub(1)).rev() {
        let h = T::lit(times[k + 1] - times[k]);
        q[k] = q[k + 1] + half * h * (traces[k] + traces[k + 1]);
    }
    q
}

/// `max_k ‖a_k − b_k‖_F / max_k ‖b_k‖_F`.
pub fn trajectory_relative_error<T: Real>(a: &[DMatrix<T>], b: &[DMatrix<T>]) -> f64 {
    assert_eq!(a.len(), b.len(), "trajectories must share the time grid");
    let scale = b.iter().map(|m| m.norm().as_f64()).fold(0.0, f64::max);
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| linalg::distance(x, y).as_f64())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// `sup_k max_i ‖Πⁱ_a(t_k) − Πⁱ_b(t_k)‖` in the operator norm.
pub fn sup_distance<T: Real>(a: &RiccatiSolution<T>, b: &RiccatiSolution<T>) -> f64 {
    let mut sup = 0.0f64;
    for team in Team::BOTH {
        for (x, y) in a.pi(team).iter().zip(b.pi(team)) {
            sup = sup.max(linalg::spectral_norm_sym(&(x - y)).as_f64());
        }
    }
    sup
}
