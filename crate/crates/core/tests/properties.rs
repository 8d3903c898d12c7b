mod common;

use common::assemble_at;
use graphon_nash::config::{parse_config, to_toml, ExperimentConfig};
use graphon_nash::game::{GameSpec, InitialState, NoiseSpec, Team, TeamSpec};
use graphon_nash::graphon::discretize;
use graphon_nash::linalg;
use graphon_nash::riccati::{solve_block_h4, solve_coupled, trajectory_relative_error, SolverConfig};
use graphon_nash::sde::CostEstimate;
use graphon_nash::{GraphonSpec, Grid, NamedKernel};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Symmetric step graphon on `k` equal cells with values in `[-1, 1]`.
fn step_graphon(k: usize) -> impl Strategy<Value = GraphonSpec> {
    prop::collection::vec(-1.0f64..=1.0, k * k).prop_map(move |raw| {
        let mut values = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                values[i][j] = if i <= j { raw[i * k + j] } else { raw[j * k + i] };
            }
        }
        let partition = (0..=k).map(|i| i as f64 / k as f64).collect();
        GraphonSpec::Step { partition, values }
    })
}

fn any_graphon() -> impl Strategy<Value = GraphonSpec> {
    prop_oneof![
        (-1.0f64..=1.0).prop_map(|c| GraphonSpec::Constant { c }),
        (1usize..5).prop_flat_map(step_graphon),
        prop_oneof![
            Just(NamedKernel::Min),
            Just(NamedKernel::Product),
            Just(NamedKernel::CosineDifference)
        ]
        .prop_map(|name| GraphonSpec::Named { name }),
    ]
}

fn team_spec() -> impl Strategy<Value = TeamSpec> {
    (
        (-1.0f64..1.0, 0.2f64..1.5, -1.0f64..1.0, -1.0f64..1.0),
        (0.0f64..0.5, -1.0f64..1.0, 0.0f64..2.0, 0.0f64..2.0),
        (0.5f64..2.0, -0.5f64..0.5, any_graphon(), -1.0f64..1.0),
    )
        .prop_map(|((a, b, d, f), (sigma, gamma, q, qf), (r_own, r_cross, graphon, x0))| TeamSpec {
            a,
            b,
            d,
            f,
            sigma,
            gamma,
            q,
            qf,
            r_own,
            r_cross,
            graphon,
            noise: NoiseSpec {
                modes: 1,
                ..NoiseSpec::default()
            },
            x0: InitialState::Constant { value: x0 },
        })
}

fn game_spec() -> impl Strategy<Value = GameSpec> {
    (-0.2f64..0.2, team_spec(), team_spec()).prop_map(|(epsilon, team1, team2)| GameSpec {
        epsilon,
        horizon: 0.5,
        team1,
        team2,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn graphon_operators_are_bounded_and_symmetric(spec in any_graphon(), n in 1usize..24) {
        let op = discretize::<f64>(&spec, Grid::new(n).unwrap()).unwrap();
        prop_assert!(op.operator_norm().unwrap() <= 1.0 + 1e-12);
        prop_assert!(linalg::relative_asymmetry(op.entries()) <= 1e-12);
    }

    #[test]
    fn constant_kernels_average(c in -1.0f64..=1.0, v in prop::collection::vec(-5.0f64..5.0, 1..20)) {
        let n = v.len();
        let op = discretize::<f64>(&GraphonSpec::Constant { c }, Grid::new(n).unwrap()).unwrap();
        let v = DVector::from_vec(v);
        let mean = v.sum() / n as f64;
        let out = op.apply(&v).unwrap();
        for x in out.iter() {
            prop_assert!((x - c * mean).abs() <= 1e-12 * (1.0 + mean.abs()));
        }
    }

    #[test]
    fn aligned_steps_integrate_block_functions_exactly(
        spec in (1usize..4).prop_flat_map(step_graphon),
        m in 1usize..6,
        blocks in prop::collection::vec(-3.0f64..3.0, 3),
    ) {
        let GraphonSpec::Step { values, .. } = &spec else { unreachable!() };
        let k = values.len();
        let n = k * m;
        let op = discretize::<f64>(&spec, Grid::new(n).unwrap()).unwrap();
        let v = DVector::from_fn(n, |i, _| blocks[i / m]);
        let out = op.apply(&v).unwrap();
        for i in 0..n {
            let exact: f64 = (0..k).map(|b| values[i / m][b] * blocks[b] / k as f64).sum();
            prop_assert!((out[i] - exact).abs() <= 1e-13);
        }
    }

    #[test]
    fn cost_blocks_are_symmetric_and_positive(spec in game_spec(), n in 1usize..8, seed in any::<u64>()) {
        let asm = assemble_at(&spec, n);
        let blocks = asm.costs.running.iter().chain(asm.costs.terminal.iter());
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        for b in blocks {
            prop_assert!(linalg::relative_asymmetry(b) <= 1e-14);
            for _ in 0..50 {
                let x = DVector::from_fn(2 * n, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
                prop_assert!(linalg::weighted_dot(&(b * &x), &x, n) >= -1e-14);
            }
        }
        let ops = asm.h4_operators();
        prop_assert!(linalg::relative_asymmetry(&ops.s) == 0.0);
        prop_assert!(linalg::relative_asymmetry(&ops.s0) == 0.0);
    }

    #[test]
    fn drift_is_affine_in_coupling(spec in game_spec(), n in 1usize..6, eps in -3.0f64..3.0) {
        let asm = assemble_at(&spec, n);
        let shifted = asm.with_epsilon(eps);
        let zero = asm.with_epsilon(0.0);
        let diff = &shifted.drift - &zero.drift;
        let expect = &asm.coupling * eps;
        prop_assert!((diff - &expect).norm() <= 1e-15 * (1.0 + expect.norm()));
        let n2 = asm.n();
        prop_assert!(zero.drift.view((0, n2), (n2, n2)).iter().all(|x| *x == 0.0));
        prop_assert!(zero.drift.view((n2, 0), (n2, n2)).iter().all(|x| *x == 0.0));
    }

    #[test]
    fn riccati_invariants(spec in game_spec(), n in 1usize..4) {
        let asm = assemble_at(&spec, n);
        let cfg = SolverConfig::with_dt(0.01);
        let sol = solve_coupled(&asm, &cfg).unwrap();
        prop_assume!(sol.is_complete());
        prop_assert!(sol.max_asymmetry() <= 1e-10);
        let block = solve_block_h4(&asm, &cfg).unwrap();
        for team in Team::BOTH {
            prop_assert_eq!(sol.pi(team).last().unwrap(), &asm.costs.terminal[team.index()]);
            prop_assert!(trajectory_relative_error(block.pi(team), sol.pi(team)) <= 1e-8);
        }
    }

    #[test]
    fn configs_round_trip(spec in game_spec(), n in 1usize..40, dt_steps in 1usize..200, seed in any::<u64>()) {
        let mut cfg = ExperimentConfig { grid_n: n, game: spec, ..ExperimentConfig::default() };
        cfg.solver.dt = cfg.game.horizon / dt_steps as f64;
        cfg.simulation.dt_sim = cfg.game.horizon / dt_steps as f64;
        cfg.simulation.seed = seed;
        cfg.studies.convergence.dt = vec![cfg.game.horizon / 10.0];
        cfg.studies.convergence.dt_sim = vec![cfg.game.horizon / 10.0];
        cfg.studies.convergence.grid_n = vec![n];
        prop_assume!(cfg.validate().is_empty());
        let text = to_toml(&cfg).unwrap();
        let back = parse_config(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(to_toml(&back).unwrap(), text);
    }

    #[test]
    fn standard_errors_are_nonnegative(samples in prop::collection::vec(-1e3f64..1e3, 1..200)) {
        let e = CostEstimate::from_samples(&samples);
        prop_assert!(e.std_err >= 0.0);
        prop_assert_eq!(e.num_paths, samples.len());
        let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(e.mean >= lo - 1e-9 && e.mean <= hi + 1e-9);
    }
}

#[test]
fn swap_is_an_involution_on_block_pairs() {
    let x = DMatrix::from_fn(6, 6, |i, j| (i * 6 + j) as f64);
    let j = graphon_nash::game::swap_matrix::<f64>(6);
    assert_eq!(&j * &j, DMatrix::identity(6, 6));
    assert_eq!(graphon_nash::game::swap_rows(&x), &j * &x);
    assert_eq!(graphon_nash::game::swap_cols(&x), &x * &j);
}
