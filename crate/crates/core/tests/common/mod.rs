//! Oracles shared by the integration tests. None of them call the solver
//! code they check.
#![allow(dead_code)]

use graphon_nash::config::{ExperimentConfig, Reference};
use graphon_nash::game::{assemble, AssembledGame};
use graphon_nash::{GameSpec, Grid};

pub fn reference(r: Reference) -> ExperimentConfig {
    r.config()
}

pub fn assemble_at(spec: &GameSpec, n: usize) -> AssembledGame<f64> {
    assemble::<f64>(spec, Grid::new(n).unwrap()).unwrap()
}

/// Closed form of the scalar equation `dp/dτ = 2a p − s p² + q`, `p(0) = g`
/// in backward time `τ = T − t`, with `s > 0` and `a² + s q > 0`.
#[derive(Debug, Clone, Copy)]
pub struct ScalarRiccati {
    pub a: f64,
    pub s: f64,
    pub q: f64,
    pub g: f64,
}

impl ScalarRiccati {
    fn roots(&self) -> (f64, f64, f64) {
        let delta = (self.a * self.a + self.s * self.q).sqrt();
        ((self.a + delta) / self.s, (self.a - delta) / self.s, delta)
    }

    /// `p` after backward time `tau`.
    pub fn at(&self, tau: f64) -> f64 {
        let (plus, minus, delta) = self.roots();
        let c = (self.g - plus) / (self.g - minus);
        let e = c * (-2.0 * delta * tau).exp();
        (plus - e * minus) / (1.0 - e)
    }

    /// `∫₀^τ p`.
    pub fn integral(&self, tau: f64) -> f64 {
        let (plus, minus, delta) = self.roots();
        let c = (self.g - plus) / (self.g - minus);
        plus * tau + (plus - minus) / (2.0 * delta) * ((1.0 - c * (-2.0 * delta * tau).exp()) / (1.0 - c)).ln()
    }
}

pub type M2 = [[f64; 2]; 2];

fn mul(a: &M2, b: &M2) -> M2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn transpose(a: &M2) -> M2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

fn add(a: &M2, b: &M2, s: f64) -> M2 {
    [
        [a[0][0] + s * b[0][0], a[0][1] + s * b[0][1]],
        [a[1][0] + s * b[1][0], a[1][1] + s * b[1][1]],
    ]
}

/// The coupled two-team system with one state coordinate per team,
/// written straight from the equations:
///
/// ```text
/// −dΠⁱ/dt = ΠⁱA + AᵀΠⁱ − ΠⁱSᵢΠⁱ − (ΠⁱSⱼΠʲ + ΠʲSⱼΠⁱ) + ε ρᵢ ΠʲEⱼΠʲ + Q̄ⁱ
/// ```
///
/// with `Sᵢ = (2/Rᵢᵢ)bᵢbᵢᵀ`, `Eⱼ = bⱼbⱼᵀ`, `ρᵢ = 2Rᵢⱼ/Rⱼⱼ²`, and the trace
/// term `Σ_teams σ² λ Π[k][k]` integrated alongside for `q`.
#[derive(Debug, Clone, Copy)]
pub struct PairSystem {
    pub a: M2,
    pub b: [f64; 2],
    pub r_own: [f64; 2],
    pub r_cross: [f64; 2],
    pub epsilon: f64,
    /// Diagonal of `Q̄ⁱ` on the own coordinate.
    pub qbar: [f64; 2],
    /// Diagonal of `Gⁱ` on the own coordinate.
    pub g: [f64; 2],
    /// `σ_k² λ_k` of the single noise mode of each team.
    pub noise: [f64; 2],
}

#[derive(Debug, Clone, Copy)]
pub struct PairState {
    pub pi: [M2; 2],
    pub q: [f64; 2],
}

impl PairSystem {
    /// Data of team-symmetric one-cell games read off a spec whose graphons
    /// act as the multipliers `m` and mean-field coupling as `mbar`.
    pub fn from_spec(spec: &GameSpec, m: [f64; 2], mbar: f64, lambda: [f64; 2]) -> Self {
        let t = [&spec.team1, &spec.team2];
        let e = spec.epsilon;
        Self {
            a: [
                [t[0].a + t[0].d * m[0], e * t[0].f * mbar],
                [e * t[1].f * mbar, t[1].a + t[1].d * m[1]],
            ],
            b: [t[0].b, t[1].b],
            r_own: [t[0].r_own, t[1].r_own],
            r_cross: [t[0].r_cross, t[1].r_cross],
            epsilon: e,
            qbar: [
                0.5 * t[0].q * (1.0 - t[0].gamma * m[0]).powi(2),
                0.5 * t[1].q * (1.0 - t[1].gamma * m[1]).powi(2),
            ],
            g: [0.5 * t[0].qf, 0.5 * t[1].qf],
            noise: [
                t[0].sigma * t[0].sigma * lambda[0],
                t[1].sigma * t[1].sigma * lambda[1],
            ],
        }
    }

    fn bb(&self, team: usize) -> M2 {
        let mut m = [[0.0; 2]; 2];
        m[team][team] = self.b[team] * self.b[team];
        m
    }

    fn rhs(&self, p: &[M2; 2]) -> ([M2; 2], [f64; 2]) {
        let mut out = [[[0.0; 2]; 2]; 2];
        let mut dq = [0.0; 2];
        for i in 0..2 {
            let j = 1 - i;
            let si = 2.0 / self.r_own[i];
            let sj = 2.0 / self.r_own[j];
            let rho = 2.0 * self.r_cross[i] / (self.r_own[j] * self.r_own[j]);
            let pa = mul(&p[i], &self.a);
            let mut d = add(&pa, &transpose(&pa), 1.0);
            d = add(&d, &mul(&mul(&p[i], &self.bb(i)), &p[i]), -si);
            let cross = mul(&mul(&p[i], &self.bb(j)), &p[j]);
            d = add(&d, &cross, -sj);
            d = add(&d, &transpose(&cross), -sj);
            d = add(&d, &mul(&mul(&p[j], &self.bb(j)), &p[j]), self.epsilon * rho);
            d[i][i] += self.qbar[i];
            out[i] = d;
            dq[i] = self.noise[0] * p[i][0][0] + self.noise[1] * p[i][1][1];
        }
        (out, dq)
    }

    fn axpy(s: &PairState, k: &([M2; 2], [f64; 2]), h: f64) -> PairState {
        PairState {
            pi: [add(&s.pi[0], &k.0[0], h), add(&s.pi[1], &k.0[1], h)],
            q: [s.q[0] + h * k.1[0], s.q[1] + h * k.1[1]],
        }
    }

    /// State at backward time `tau` from plain RK4 with `steps` steps.
    pub fn integrate(&self, tau: f64, steps: usize) -> PairState {
        let mut s = PairState {
            pi: [
                [[self.g[0], 0.0], [0.0, 0.0]],
                [[0.0, 0.0], [0.0, self.g[1]]],
            ],
            q: [0.0; 2],
        };
        let h = tau / steps as f64;
        for _ in 0..steps {
            let k1 = self.rhs(&s.pi);
            let k2 = self.rhs(&Self::axpy(&s, &k1, h / 2.0).pi);
            let k3 = self.rhs(&Self::axpy(&s, &k2, h / 2.0).pi);
            let k4 = self.rhs(&Self::axpy(&s, &k3, h).pi);
            let mut next = s;
            for (k, w) in [(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)] {
                next = Self::axpy(&next, k, h * w / 6.0);
            }
            s = next;
        }
        s
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
