//! Fixed-step classical RK4 marching backward from the terminal time.

use nalgebra::DMatrix;

use super::{SolveStatus, SolverConfig, TimeGrid};
use crate::linalg;
use crate::scalar::Real;

/// State of a matrix Riccati flow: one matrix or a pair of them.
pub(crate) trait FlowState<T: Real>: Clone {
    /// `self + h·k`
    fn axpy(&self, h: T, k: &Self) -> Self;
    /// `self + h/6 (k1 + 2k2 + 2k3 + k4)`
    fn rk4(&self, h: T, k: [&Self; 4]) -> Self;
    fn symmetrize(&mut self);
    /// Cheap upper bound of the spectral norm.
    fn frobenius(&self) -> T;
    fn spectral_norm(&self) -> T;
    fn is_finite(&self) -> bool;
}

fn rk4_mat<T: Real>(x: &DMatrix<T>, h: T, k: [&DMatrix<T>; 4]) -> DMatrix<T> {
    let two = T::lit(2.0);
    let sixth = h / T::lit(6.0);
    let mut out = x.clone();
    out.zip_zip_apply(k[0], k[1], |o, a, b| *o += sixth * (a + two * b));
    out.zip_zip_apply(k[2], k[3], |o, c, d| *o += sixth * (two * c + d));
    out
}

impl<T: Real> FlowState<T> for DMatrix<T> {
    fn axpy(&self, h: T, k: &Self) -> Self {
        self + k * h
    }

    fn rk4(&self, h: T, k: [&Self; 4]) -> Self {
        rk4_mat(self, h, k)
    }

    fn symmetrize(&mut self) {
        linalg::symmetrize(self);
    }

    fn frobenius(&self) -> T {
        self.norm()
    }

    fn spectral_norm(&self) -> T {
        linalg::spectral_norm_sym(self)
    }

    fn is_finite(&self) -> bool {
        linalg::all_finite(self)
    }
}

impl<T: Real> FlowState<T> for [DMatrix<T>; 2] {
    fn axpy(&self, h: T, k: &Self) -> Self {
        [&self[0] + &k[0] * h, &self[1] + &k[1] * h]
    }

    fn rk4(&self, h: T, k: [&Self; 4]) -> Self {
        [
            rk4_mat(&self[0], h, [&k[0][0], &k[1][0], &k[2][0], &k[3][0]]),
            rk4_mat(&self[1], h, [&k[0][1], &k[1][1], &k[2][1], &k[3][1]]),
        ]
    }

    fn symmetrize(&mut self) {
        linalg::symmetrize(&mut self[0]);
        linalg::symmetrize(&mut self[1]);
    }

    fn frobenius(&self) -> T {
        self[0].norm().max(self[1].norm())
    }

    fn spectral_norm(&self) -> T {
        linalg::spectral_norm_sym(&self[0]).max(linalg::spectral_norm_sym(&self[1]))
    }

    fn is_finite(&self) -> bool {
        linalg::all_finite(&self[0]) && linalg::all_finite(&self[1])
    }
}

/// Integrates `dΠ/dτ = rhs(t, Π)` in reversed time `τ = T − t` from `Π(T)`.
///
/// `rhs` receives the physical time of each stage. `observe(k, Π)` is called
/// at node `k` (ascending index, `t_k = k·T/N`) starting from `k = N`. The
/// march stops at the first node whose spectral norm exceeds the threshold
/// or that is not finite; that node is not observed.
pub(crate) fn march_backward<T, S, F, O>(
    terminal: S,
    grid: &TimeGrid,
    cfg: &SolverConfig,
    mut rhs: F,
    mut observe: O,
) -> SolveStatus
where
    T: Real,
    S: FlowState<T>,
    F: FnMut(f64, &S) -> S,
    O: FnMut(usize, &S),
{
    let n = grid.steps();
    let h = grid.dt();
    let ht = T::lit(h);
    let half = T::lit(0.5 * h);
    let threshold = T::lit(cfg.blowup_threshold);

    let mut state = terminal;
    observe(n, &state);
    for k in (0..n).rev() {
        let t = grid.time(k + 1);
        let k1 = rhs(t, &state);
        let k2 = rhs(t - 0.5 * h, &state.axpy(half, &k1));
        let k3 = rhs(t - 0.5 * h, &state.axpy(half, &k2));
        let k4 = rhs(grid.time(k), &state.axpy(ht, &k3));
        let mut next = state.rk4(ht, [&k1, &k2, &k3, &k4]);
        if cfg.symmetrize {
            next.symmetrize();
        }
        let escaped = !next.is_finite()
            || (next.frobenius() > threshold && next.spectral_norm() > threshold);
        if escaped {
            return SolveStatus::Escaped { time: grid.time(k) };
        }
        state = next;
        observe(k, &state);
    }
    SolveStatus::Complete
}
