use serde::{Deserialize, Serialize};

use super::RiccatiSolution;
use crate::error::{Error, Result};
use crate::game::{h4_norms, AssembledGame, H4Norms, Team};
use crate::linalg;
use crate::scalar::Real;

/// Radius and length of a window `[T − τ, T]` on which the `H⁴` flow has a
/// unique solution inside the ball of radius `r = 2‖G‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExistenceBound {
    pub r: f64,
    pub alpha: f64,
    /// `+∞` when the data vanish identically (see `degenerate`).
    pub tau: f64,
    pub c1: f64,
    pub c2: f64,
    /// `G = 0` and `Q̄ = 0`: the zero solution exists on any window.
    pub degenerate: bool,
    pub norms: H4Norms,
}

impl ExistenceBound {
    pub fn has_window(&self) -> bool {
        self.tau > 0.0
    }
}

/// Largest `τ` satisfying both contraction inequalities:
///
/// ```text
/// τ (2r‖K‖ + r²‖S‖ + 2r²‖J‖²‖S‖ + r²‖J‖⁴‖S₀‖ + ‖Q̄‖) ≤ ‖G‖
/// τ (2‖K‖ + 2r‖S‖ + 4r‖J‖²‖S‖ + 2r‖J‖⁴‖S₀‖)        ≤ α
/// ```
///
/// `‖K‖` is taken at the game's own `ε`, and `‖S₀‖` is scaled by
/// `max(1, |ε|)` so the bound stays valid for couplings above one.
pub fn existence_bound<T: Real>(asm: &AssembledGame<T>, alpha: f64) -> Result<ExistenceBound> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    let norms = h4_norms(asm);
    Ok(bound_from_norms(norms, asm.epsilon.as_f64(), alpha))
}

pub(crate) fn bound_from_norms(norms: H4Norms, epsilon: f64, alpha: f64) -> ExistenceBound {
    let H4Norms { k, s, s0, j, q, g } = norms;
    let s0 = s0 * epsilon.abs().max(1.0);
    let r = 2.0 * g;
    let j2 = j * j;
    let j4 = j2 * j2;
    let c1 = 2.0 * r * k + r * r * s + 2.0 * r * r * j2 * s + r * r * j4 * s0 + q;
    let c2 = 2.0 * k + 2.0 * r * s + 4.0 * r * j2 * s + 2.0 * r * j4 * s0;
    let degenerate = g == 0.0 && q == 0.0;
    let tau = if degenerate {
        f64::INFINITY
    } else {
        let t1 = if c1 > 0.0 { g / c1 } else { f64::INFINITY };
        let t2 = if c2 > 0.0 { alpha / c2 } else { f64::INFINITY };
        t1.min(t2)
    };
    ExistenceBound {
        r,
        alpha,
        tau,
        c1,
        c2,
        degenerate,
        norms,
    }
}

/// `sup` over nodes in `[T − τ, T]` of `‖Π¹ ⊕ Π²‖ = max(‖Π¹‖, ‖Π²‖)`.
pub fn certified_window_norm<T: Real>(sol: &RiccatiSolution<T>, tau: f64) -> f64 {
    let horizon = sol.horizon();
    let start = horizon - tau;
    let mut sup = 0.0f64;
    for (k, &t) in sol.times.iter().enumerate() {
        if t + 1e-12 * horizon.max(1.0) >= start {
            for team in Team::BOTH {
                sup = sup.max(linalg::spectral_norm_sym(&sol.pi(team)[k]).as_f64());
            }
        }
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norms(k: f64, s: f64, s0: f64, q: f64, g: f64) -> H4Norms {
        H4Norms { k, s, s0, j: 1.0, q, g }
    }

    #[test]
    fn hand_arithmetic_example() {
        let b = bound_from_norms(norms(1.0, 1.0, 0.0, 1.0, 1.0), 1.0, 0.5);
        assert_eq!(b.r, 2.0);
        assert_eq!(b.c1, 17.0);
        assert_eq!(b.c2, 14.0);
        assert!((b.tau - 1.0 / 28.0).abs() < 1e-15);
        assert!(b.tau * b.c1 <= 1.0 && b.tau * b.c2 <= 0.5 + 1e-15);
    }

    #[test]
    fn zero_terminal_cost_gives_no_window() {
        let b = bound_from_norms(norms(1.0, 1.0, 0.0, 1.0, 0.0), 0.0, 0.5);
        assert_eq!(b.tau, 0.0);
        assert!(!b.has_window());
        assert!(!b.degenerate);
    }

    #[test]
    fn zero_data_is_degenerate() {
        let b = bound_from_norms(norms(1.0, 1.0, 1.0, 0.0, 0.0), 0.0, 0.5);
        assert!(b.degenerate);
        assert!(b.tau.is_infinite());
    }
}
