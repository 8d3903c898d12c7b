//! Game specification and the block operators of the joint evolution on
//! `H² = H ⊕ H` (team 1 state stacked over team 2 state) and `H⁴ = H² ⊕ H²`.

use std::f64::consts::{PI, SQRT_2};
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result, Violation};
use crate::graphon::{discretize, DiscretizedOperator, GraphonSpec, Grid};
use crate::linalg;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Team {
    One,
    Two,
}

impl Team {
    pub const BOTH: [Team; 2] = [Team::One, Team::Two];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Team::One => 0,
            Team::Two => 1,
        }
    }

    #[inline]
    pub fn other(self) -> Team {
        match self {
            Team::One => Team::Two,
            Team::Two => Team::One,
        }
    }

    /// Coordinates of this team's state inside a stacked `2n` vector.
    #[inline]
    pub fn block(self, n: usize) -> Range<usize> {
        match self {
            Team::One => 0..n,
            Team::Two => n..2 * n,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }
}

/// Spectrum of one team's Q-Wiener noise over the cosine basis
/// `e_1 = 1, e_k = √2 cos((k−1)πα)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    /// Truncation level `K`.
    pub modes: usize,
    /// Leading eigenvalue; the default spectrum halves at every mode.
    pub lambda0: f64,
    /// Explicit eigenvalues overriding the geometric default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            modes: 16,
            lambda0: 1.0,
            eigenvalues: None,
        }
    }
}

impl NoiseSpec {
    pub fn eigenvalues(&self) -> Vec<f64> {
        match &self.eigenvalues {
            Some(ev) => ev.clone(),
            None => (0..self.modes)
                .map(|k| self.lambda0 * 0.5f64.powi(k as i32))
                .collect(),
        }
    }

    /// Mode `k` (zero based) of the cosine basis at `α`.
    pub fn eigenfunction(k: usize, alpha: f64) -> f64 {
        if k == 0 {
            1.0
        } else {
            SQRT_2 * (k as f64 * PI * alpha).cos()
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !self.lambda0.is_finite() || self.lambda0 < 0.0 {
            out.push(Violation::new("lambda0", "must be finite and >= 0"));
        }
        if let Some(ev) = &self.eigenvalues {
            if ev.len() != self.modes {
                out.push(Violation::new(
                    "eigenvalues",
                    format!("has {} entries but modes = {}", ev.len(), self.modes),
                ));
            }
            if ev.iter().any(|l| !l.is_finite() || *l < 0.0) {
                out.push(Violation::new("eigenvalues", "must be finite and >= 0"));
            }
            if ev.windows(2).any(|w| w[1] > w[0]) {
                out.push(Violation::new("eigenvalues", "must be nonincreasing"));
            }
        }
        out
    }
}

/// Deterministic initial state of one team.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    Constant { value: f64 },
    /// `amplitude · cos(mode · π α)`
    Cosine { amplitude: f64, mode: u32 },
    Linear { intercept: f64, slope: f64 },
    Step { partition: Vec<f64>, values: Vec<f64> },
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Constant { value: 1.0 }
    }
}

impl InitialState {
    pub fn value(&self, alpha: f64) -> f64 {
        match self {
            InitialState::Constant { value } => *value,
            InitialState::Cosine { amplitude, mode } => {
                amplitude * (*mode as f64 * PI * alpha).cos()
            }
            InitialState::Linear { intercept, slope } => intercept + slope * alpha,
            InitialState::Step { partition, values } => {
                let cells = partition.len() - 1;
                let idx = partition[1..cells].iter().take_while(|&&b| b <= alpha).count();
                values[idx]
            }
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let finite = |x: f64| x.is_finite();
        match self {
            InitialState::Constant { value } if !finite(*value) => {
                out.push(Violation::new("value", "must be finite"));
            }
            InitialState::Cosine { amplitude, .. } if !finite(*amplitude) => {
                out.push(Violation::new("amplitude", "must be finite"));
            }
            InitialState::Linear { intercept, slope } if !finite(*intercept) || !finite(*slope) => {
                out.push(Violation::new("", "intercept and slope must be finite"));
            }
            InitialState::Step { partition, values } => {
                if partition.len() < 2
                    || partition[0] != 0.0
                    || partition[partition.len() - 1] != 1.0
                    || partition.windows(2).any(|w| !(w[1] > w[0]))
                {
                    out.push(Violation::new(
                        "partition",
                        "must increase strictly from 0 to 1",
                    ));
                } else if values.len() != partition.len() - 1 {
                    out.push(Violation::new("values", "needs one value per cell"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    out.push(Violation::new("values", "must be finite"));
                }
            }
            _ => {}
        }
        out
    }
}

/// Coefficients, graphon, noise and initial state of one team.
///
/// `r_own` weighs the team's own control (`R₁₁` or `R₂₂`); `r_cross` weighs
/// the opponent's control in this team's cost (`R₁₂` or `R₂₁`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TeamSpec {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub f: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub q: f64,
    pub qf: f64,
    pub r_own: f64,
    pub r_cross: f64,
    pub graphon: GraphonSpec,
    pub noise: NoiseSpec,
    pub x0: InitialState,
}

impl Default for TeamSpec {
    fn default() -> Self {
        Self {
            a: 0.0,
            b: 1.0,
            d: 0.0,
            f: 0.0,
            sigma: 0.0,
            gamma: 0.0,
            q: 1.0,
            qf: 1.0,
            r_own: 1.0,
            r_cross: 0.0,
            graphon: GraphonSpec::Constant { c: 0.0 },
            noise: NoiseSpec::default(),
            x0: InitialState::default(),
        }
    }
}

impl TeamSpec {
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let scalars = [
            ("a", self.a),
            ("b", self.b),
            ("d", self.d),
            ("f", self.f),
            ("sigma", self.sigma),
            ("gamma", self.gamma),
            ("q", self.q),
            ("qf", self.qf),
            ("r_own", self.r_own),
            ("r_cross", self.r_cross),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                out.push(Violation::new(name, "must be finite"));
            }
        }
        if self.q < 0.0 {
            out.push(Violation::new("q", format!("state weight must be >= 0, got {}", self.q)));
        }
        if self.qf < 0.0 {
            out.push(Violation::new(
                "qf",
                format!("terminal weight must be >= 0, got {}", self.qf),
            ));
        }
        if !(self.r_own > 0.0) {
            out.push(Violation::new(
                "r_own",
                format!("control weight must be > 0, got {}", self.r_own),
            ));
        }
        out.extend(self.graphon.validate().into_iter().map(|v| v.nested("graphon")));
        out.extend(self.noise.validate().into_iter().map(|v| v.nested("noise")));
        out.extend(self.x0.validate().into_iter().map(|v| v.nested("x0")));
        out
    }
}

/// Every model constant of the two-team game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameSpec {
    pub epsilon: f64,
    pub horizon: f64,
    pub team1: TeamSpec,
    pub team2: TeamSpec,
}

impl Default for GameSpec {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            horizon: 1.0,
            team1: TeamSpec::default(),
            team2: TeamSpec::default(),
        }
    }
}

impl GameSpec {
    pub fn team(&self, team: Team) -> &TeamSpec {
        match team {
            Team::One => &self.team1,
            Team::Two => &self.team2,
        }
    }

    pub fn team_mut(&mut self, team: Team) -> &mut TeamSpec {
        match team {
            Team::One => &mut self.team1,
            Team::Two => &mut self.team2,
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !self.epsilon.is_finite() {
            out.push(Violation::new("epsilon", "must be finite"));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            out.push(Violation::new(
                "horizon",
                format!("must be finite and > 0, got {}", self.horizon),
            ));
        }
        out.extend(self.team1.validate().into_iter().map(|v| v.nested("team1")));
        out.extend(self.team2.validate().into_iter().map(|v| v.nested("team2")));
        out
    }

    /// Checks that only depend on the grid resolution.
    pub fn validate_for_grid(&self, n: usize) -> Vec<Violation> {
        let mut out = Vec::new();
        for team in Team::BOTH {
            let k = self.team(team).noise.modes;
            if k > n {
                out.push(Violation::new(
                    format!("team{}.noise.modes", team.number()),
                    format!(
                        "{k} modes exceed the grid resolution {n}; \
                         cosine modes are only orthonormal on the grid for K <= n"
                    ),
                ));
            }
        }
        out
    }
}

/// Discretized noise modes of one team: eigenvalues and grid eigenfunctions
/// stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModes<T: Real> {
    pub eigenvalues: Vec<T>,
    pub functions: DMatrix<T>,
}

impl<T: Real> NoiseModes<T> {
    pub fn cosine(spec: &NoiseSpec, grid: Grid) -> Self {
        let ev = spec.eigenvalues();
        let k = ev.len();
        let functions = DMatrix::from_fn(grid.n(), k, |i, j| {
            T::lit(NoiseSpec::eigenfunction(j, grid.midpoint(i)))
        });
        Self {
            eigenvalues: ev.into_iter().map(T::lit).collect(),
            functions,
        }
    }

    /// Custom orthonormal modes for library callers.
    pub fn new(eigenvalues: Vec<T>, functions: DMatrix<T>, grid: Grid) -> Result<Self> {
        let modes = Self {
            eigenvalues,
            functions,
        };
        if modes.functions.nrows() != grid.n() {
            return Err(Error::Shape {
                expected: grid.n(),
                found: modes.functions.nrows(),
            });
        }
        if modes.functions.ncols() != modes.eigenvalues.len() {
            return Err(Error::Shape {
                expected: modes.eigenvalues.len(),
                found: modes.functions.ncols(),
            });
        }
        let err = modes.orthonormality_error(grid);
        if err > 1e-10 {
            return Err(Error::invalid(
                "noise",
                format!("eigenfunctions are not orthonormal (error {err:e})"),
            ));
        }
        if modes.eigenvalues.iter().any(|l| *l < T::zero()) {
            return Err(Error::invalid("noise", "eigenvalues must be >= 0"));
        }
        Ok(modes)
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Max entry of `|Gram − I|` under the weighted inner product.
    pub fn orthonormality_error(&self, grid: Grid) -> f64 {
        let gram = self.functions.transpose() * &self.functions / T::lit(grid.n() as f64);
        let k = gram.nrows();
        let mut err = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((gram[(i, j)].as_f64() - target).abs());
            }
        }
        err
    }
}

/// Scalar coefficients of one team converted to the working precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeamCoefficients<T: Real> {
    pub b: T,
    pub sigma: T,
    pub q: T,
    pub qf: T,
    pub r_own: T,
    pub r_cross: T,
}

/// Running and terminal cost operators on `H²`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBlocks<T: Real> {
    /// `½Q̄₁ (I−Γ₁M₁)² ⊕ 0` and `½Q̄₂ 0 ⊕ (I−Γ₂M₂)²`.
    pub running: [DMatrix<T>; 2],
    /// `½Q̄₁f I ⊕ 0` and `½Q̄₂f 0 ⊕ I`.
    pub terminal: [DMatrix<T>; 2],
    /// `I − Γ_i M_i` on `H`.
    pub tracking: [DMatrix<T>; 2],
}

/// Builds the quadratic-form cost operators. `(I−ΓM)²` is the matrix
/// product of the discretized `I−ΓM` with its transpose, which keeps the
/// blocks positive semidefinite at the discrete level.
pub fn assemble_cost_blocks<T: Real>(spec: &GameSpec, grid: Grid) -> Result<CostBlocks<T>> {
    check(spec.validate())?;
    let n = grid.n();
    let half = T::lit(0.5);
    let mut running: [DMatrix<T>; 2] = [DMatrix::zeros(2 * n, 2 * n), DMatrix::zeros(2 * n, 2 * n)];
    let mut terminal = running.clone();
    let mut tracking: [DMatrix<T>; 2] = [DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
    for team in Team::BOTH {
        let ts = spec.team(team);
        let m = discretize::<T>(&ts.graphon, grid)?;
        let l = DMatrix::<T>::identity(n, n) - m.entries() * T::lit(ts.gamma);
        let block = team.block(n);
        let sq = l.transpose() * &l * (half * T::lit(ts.q));
        running[team.index()]
            .view_mut((block.start, block.start), (n, n))
            .copy_from(&sq);
        terminal[team.index()]
            .view_mut((block.start, block.start), (n, n))
            .fill_with_identity();
        terminal[team.index()] *= half * T::lit(ts.qf);
        tracking[team.index()] = l;
    }
    Ok(CostBlocks {
        running,
        terminal,
        tracking,
    })
}

/// The game on the discretized spaces.
#[derive(Debug, Clone)]
pub struct AssembledGame<T: Real> {
    pub grid: Grid,
    pub epsilon: T,
    pub horizon: f64,
    pub teams: [TeamCoefficients<T>; 2],
    pub graphons: [DiscretizedOperator<T>; 2],
    /// `A_ε`.
    pub drift: DMatrix<T>,
    /// `A_0`, the block-diagonal part of the drift.
    pub drift_decoupled: DMatrix<T>,
    /// `[[0, F₁M̄], [F₂M̄, 0]]`, so that `A_ε = A_0 + ε·coupling`.
    pub coupling: DMatrix<T>,
    /// `B₁ = (B₁I; 0)` and `B₂ = (0; B₂I)`, each `2n × n`.
    pub control_maps: [DMatrix<T>; 2],
    /// Diagonal of `Σ = σ₁I ⊕ σ₂I`.
    pub noise_gain: DVector<T>,
    pub costs: CostBlocks<T>,
    pub noise: [NoiseModes<T>; 2],
    /// Stacked `(x₀¹; x₀²)`.
    pub x0: DVector<T>,
}

/// Assembles every block operator of the joint evolution.
pub fn assemble<T: Real>(spec: &GameSpec, grid: Grid) -> Result<AssembledGame<T>> {
    let mut violations = spec.validate();
    violations.extend(spec.validate_for_grid(grid.n()));
    check(violations)?;

    let n = grid.n();
    let costs = assemble_cost_blocks::<T>(spec, grid)?;
    let mean = discretize::<T>(&GraphonSpec::mean_field(), grid)?;
    let m1 = discretize::<T>(&spec.team1.graphon, grid)?;
    let m2 = discretize::<T>(&spec.team2.graphon, grid)?;

    let mut drift_decoupled = DMatrix::<T>::zeros(2 * n, 2 * n);
    let mut coupling = DMatrix::<T>::zeros(2 * n, 2 * n);
    for (team, m) in [(Team::One, &m1), (Team::Two, &m2)] {
        let ts = spec.team(team);
        let own = DMatrix::<T>::identity(n, n) * T::lit(ts.a) + m.entries() * T::lit(ts.d);
        let r = team.block(n).start;
        drift_decoupled.view_mut((r, r), (n, n)).copy_from(&own);
        // the cross block of team i acts on the opponent's coordinates
        let c = team.other().block(n).start;
        coupling
            .view_mut((r, c), (n, n))
            .copy_from(&(mean.entries() * T::lit(ts.f)));
    }
    let epsilon = T::lit(spec.epsilon);
    let drift = &drift_decoupled + &coupling * epsilon;

    let mut control_maps = [DMatrix::<T>::zeros(2 * n, n), DMatrix::<T>::zeros(2 * n, n)];
    for team in Team::BOTH {
        let r = team.block(n).start;
        control_maps[team.index()]
            .view_mut((r, 0), (n, n))
            .fill_with_identity();
        control_maps[team.index()] *= T::lit(spec.team(team).b);
    }

    let noise_gain = DVector::from_fn(2 * n, |i, _| {
        let team = if i < n { Team::One } else { Team::Two };
        T::lit(spec.team(team).sigma)
    });

    let coeffs = |ts: &TeamSpec| TeamCoefficients {
        b: T::lit(ts.b),
        sigma: T::lit(ts.sigma),
        q: T::lit(ts.q),
        qf: T::lit(ts.qf),
        r_own: T::lit(ts.r_own),
        r_cross: T::lit(ts.r_cross),
    };

    let mut x0 = DVector::<T>::zeros(2 * n);
    for team in Team::BOTH {
        let r = team.block(n).start;
        let init = &spec.team(team).x0;
        for i in 0..n {
            x0[r + i] = T::lit(init.value(grid.midpoint(i)));
        }
    }

    Ok(AssembledGame {
        grid,
        epsilon,
        horizon: spec.horizon,
        teams: [coeffs(&spec.team1), coeffs(&spec.team2)],
        graphons: [m1, m2],
        drift,
        drift_decoupled,
        coupling,
        control_maps,
        noise_gain,
        costs,
        noise: [
            NoiseModes::cosine(&spec.team1.noise, grid),
            NoiseModes::cosine(&spec.team2.noise, grid),
        ],
        x0,
    })
}

impl<T: Real> AssembledGame<T> {
    /// Number of grid cells per team.
    #[inline]
    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// Dimension of the stacked state space `H²`.
    #[inline]
    pub fn dim(&self) -> usize {
        2 * self.grid.n()
    }

    #[inline]
    pub fn team(&self, team: Team) -> &TeamCoefficients<T> {
        &self.teams[team.index()]
    }

    /// Same game at a different coupling strength; only `A_ε` changes.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        let mut out = self.clone();
        out.epsilon = T::lit(epsilon);
        out.drift = &self.drift_decoupled + &self.coupling * out.epsilon;
        out
    }

    /// `2B_i²/R_ii`, the scalar in `(2/R_ii) B_i B_i*` on the team's block.
    pub fn feedback_weight(&self, team: Team) -> T {
        let c = self.team(team);
        T::lit(2.0) * c.b * c.b / c.r_own
    }

    /// `2R_ij B_j² / R_jj²`: the scalar of the opponent-control term in the
    /// team's cost, before the factor `ε`.
    pub fn spillover_weight(&self, team: Team) -> T {
        let own = self.team(team);
        let opp = self.team(team.other());
        T::lit(2.0) * own.r_cross * opp.b * opp.b / (opp.r_own * opp.r_own)
    }

    /// `B_i B_i*` as a `2n × 2n` matrix.
    pub fn control_gram(&self, team: Team) -> DMatrix<T> {
        let b = &self.control_maps[team.index()];
        b * b.transpose()
    }

    pub fn sigma_matrix(&self) -> DMatrix<T> {
        DMatrix::from_diagonal(&self.noise_gain)
    }

    /// Noise modes of `W = (W¹, W²)` embedded in `H²`: `(e_k¹; 0)` and `(0; e_k²)`.
    pub fn embedded_modes(&self) -> Vec<(T, DVector<T>)> {
        let n = self.n();
        let mut out = Vec::new();
        for team in Team::BOTH {
            let modes = &self.noise[team.index()];
            let r = team.block(n).start;
            for k in 0..modes.len() {
                let mut e = DVector::zeros(2 * n);
                e.rows_mut(r, n).copy_from(&modes.functions.column(k));
                out.push((modes.eigenvalues[k], e));
            }
        }
        out
    }

    /// The `H⁴` operators acting on block pairs `Π¹ ⊕ Π²`.
    pub fn h4_operators(&self) -> H4Operators<T> {
        let s = linalg::direct_sum(
            &(self.control_gram(Team::One) * (T::lit(2.0) / self.team(Team::One).r_own)),
            &(self.control_gram(Team::Two) * (T::lit(2.0) / self.team(Team::Two).r_own)),
        );
        let r11 = self.team(Team::One).r_own;
        let r22 = self.team(Team::Two).r_own;
        let s0 = linalg::direct_sum(
            &(self.control_gram(Team::Two)
                * (T::lit(2.0) * self.team(Team::One).r_cross / (r22 * r22))),
            &(self.control_gram(Team::One)
                * (T::lit(2.0) * self.team(Team::Two).r_cross / (r11 * r11))),
        );
        H4Operators {
            k: linalg::direct_sum(&self.drift, &self.drift),
            s,
            s0,
            qbar: linalg::direct_sum(&self.costs.running[0], &self.costs.running[1]),
            g: linalg::direct_sum(&self.costs.terminal[0], &self.costs.terminal[1]),
        }
    }
}

/// `K_ε`, `S`, `S₀`, `Q̄`, `G` as `4n × 4n` matrices. The block swap `J`
/// is applied through [`swap_rows`] and [`swap_cols`].
#[derive(Debug, Clone)]
pub struct H4Operators<T: Real> {
    pub k: DMatrix<T>,
    pub s: DMatrix<T>,
    pub s0: DMatrix<T>,
    pub qbar: DMatrix<T>,
    pub g: DMatrix<T>,
}

/// `J X`: exchanges the two row halves.
pub fn swap_rows<T: Real>(x: &DMatrix<T>) -> DMatrix<T> {
    let h = x.nrows() / 2;
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    out.rows_mut(0, h).copy_from(&x.rows(h, h));
    out.rows_mut(h, h).copy_from(&x.rows(0, h));
    out
}

/// `X J`: exchanges the two column halves.
pub fn swap_cols<T: Real>(x: &DMatrix<T>) -> DMatrix<T> {
    let h = x.ncols() / 2;
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    out.columns_mut(0, h).copy_from(&x.columns(h, h));
    out.columns_mut(h, h).copy_from(&x.columns(0, h));
    out
}

/// The block swap as an explicit matrix.
pub fn swap_matrix<T: Real>(dim: usize) -> DMatrix<T> {
    swap_rows(&DMatrix::identity(dim, dim))
}

/// Spectral norms of the `H⁴` operators entering the existence bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H4Norms {
    pub k: f64,
    pub s: f64,
    pub s0: f64,
    pub j: f64,
    pub q: f64,
    pub g: f64,
}

/// All six norms; block-diagonal operators use `‖T₁ ⊕ T₂‖ = max(‖T₁‖, ‖T₂‖)`.
pub fn h4_norms<T: Real>(asm: &AssembledGame<T>) -> H4Norms {
    let two = T::lit(2.0);
    let (t1, t2) = (Team::One, Team::Two);
    let s1 = asm.control_gram(t1) * (two / asm.team(t1).r_own);
    let s2 = asm.control_gram(t2) * (two / asm.team(t2).r_own);
    let r11 = asm.team(t1).r_own;
    let r22 = asm.team(t2).r_own;
    let s01 = asm.control_gram(t2) * (two * asm.team(t1).r_cross / (r22 * r22));
    let s02 = asm.control_gram(t1) * (two * asm.team(t2).r_cross / (r11 * r11));
    let max_sym = |a: &DMatrix<T>, b: &DMatrix<T>| {
        linalg::spectral_norm_sym(a)
            .max(linalg::spectral_norm_sym(b))
            .as_f64()
    };
    H4Norms {
        k: linalg::spectral_norm(&asm.drift).as_f64(),
        s: max_sym(&s1, &s2),
        s0: max_sym(&s01, &s02),
        // a permutation is an isometry
        j: 1.0,
        q: max_sym(&asm.costs.running[0], &asm.costs.running[1]),
        g: max_sym(&asm.costs.terminal[0], &asm.costs.terminal[1]),
    }
}
