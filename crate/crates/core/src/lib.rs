//! Feedback Nash equilibria for linear-quadratic stochastic differential games
//! between two graphon-coupled teams.
//!
//! The state of each team is a function on `[0, 1]` discretized on a uniform
//! midpoint grid. The crate assembles the block operators of the joint
//! evolution, integrates the coupled Riccati system backward in time,
//! certifies a local existence window, continues the solution in the coupling
//! strength `ε`, and checks the equilibrium both against best-response
//! Riccati solves and by Monte Carlo simulation of the closed loop.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`.

pub mod config;
pub mod error;
pub mod experiment;
pub mod game;
pub mod graphon;
pub mod linalg;
pub mod riccati;
pub mod scalar;
pub mod sde;

pub use error::{Error, Result, Violation};
pub use game::{AssembledGame, GameSpec, NoiseSpec, Team, TeamSpec};
pub use graphon::{DiscretizedOperator, GraphonSpec, Grid, Kernel, NamedKernel};
pub use riccati::{
    ExistenceBound, RiccatiSolution, SolveStatus, SolverConfig,
};
pub use scalar::Real;
pub use sde::{CostEstimate, PathConfig, StrategyPerturbation};

/// Assembled game in double precision.
pub type Game = game::AssembledGame<f64>;
/// Coupled Riccati solution in double precision.
pub type Solution = riccati::RiccatiSolution<f64>;
/// Graphon operator in double precision.
pub type GraphonOperator = graphon::DiscretizedOperator<f64>;
