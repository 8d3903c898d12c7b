mod common;

use common::assemble_at;
use graphon_nash::config::Reference;
use graphon_nash::game::{AssembledGame, Team};
use graphon_nash::linalg::weighted_dot;
use graphon_nash::riccati::{solve_coupled, RiccatiSolution, SolverConfig};
use graphon_nash::sde::{
    deviation_test, estimate_costs, path_rng, sample_wiener_increment, simulate_closed_loop,
    CostEstimate, PathConfig, StrategyPerturbation,
};
use nalgebra::DVector;

fn cosine(n: usize, sigma: Option<f64>, x0_zero: bool) -> (AssembledGame<f64>, RiccatiSolution<f64>) {
    let cfg = Reference::Cosine.config();
    let mut game = cfg.game;
    if let Some(s) = sigma {
        game.team1.sigma = s;
        game.team2.sigma = s;
    }
    if x0_zero {
        for t in Team::BOTH {
            game.team_mut(t).x0 = graphon_nash::game::InitialState::Constant { value: 0.0 };
        }
    }
    let asm = assemble_at(&game, n);
    let sol = solve_coupled(&asm, &SolverConfig::with_dt(1e-3)).unwrap();
    (asm, sol)
}

fn paths(dt_sim: f64, num_paths: usize, seed: u64) -> PathConfig {
    PathConfig {
        dt_sim,
        num_paths,
        seed,
        modes_used: None,
    }
}

#[test]
fn increments_follow_the_isometry_and_teams_are_independent() {
    let (asm, _) = cosine(16, None, false);
    let dt = 1e-2;
    let draws = 100_000;
    let mut rng = path_rng(99, 0);
    let e1 = DVector::from_element(16, 1.0);
    let mut sq = Vec::with_capacity(draws);
    let mut prod = Vec::with_capacity(draws);
    for _ in 0..draws {
        let dw = sample_wiener_increment(&asm, None, dt, &mut rng);
        sq.push(weighted_dot(&dw, &dw, 16));
        let a = weighted_dot(&dw.rows(0, 16).into_owned(), &e1, 16);
        let b = weighted_dot(&dw.rows(16, 16).into_owned(), &e1, 16);
        prod.push(a * b);
    }
    let target: f64 = dt * asm.noise.iter().flat_map(|m| m.eigenvalues.iter()).sum::<f64>();
    let s = CostEstimate::from_samples(&sq);
    assert!((s.mean - target).abs() <= 4.0 * s.std_err, "{} vs {target}", s.mean);
    let c = CostEstimate::from_samples(&prod);
    assert!(c.mean.abs() <= 4.0 * c.std_err);
}

#[test]
fn no_modes_means_no_noise() {
    let (asm, _) = cosine(16, None, false);
    let mut rng = path_rng(1, 2);
    let dw = sample_wiener_increment(&asm, Some(0), 0.1, &mut rng);
    assert!(dw.iter().all(|x| *x == 0.0));
}

#[test]
fn quiet_system_at_rest_costs_nothing() {
    let (asm, sol) = cosine(16, Some(0.0), true);
    let s = estimate_costs(&asm, &sol, &paths(1e-2, 10, 3)).unwrap();
    for e in s.costs {
        assert_eq!((e.mean, e.std_err), (0.0, 0.0));
    }
}

#[test]
fn deterministic_cost_converges_to_the_value_at_first_order() {
    let (asm, _) = cosine(16, Some(0.0), false);
    let sol = solve_coupled(&asm, &SolverConfig::with_dt(1e-4)).unwrap();
    let value = sol.value_at(&asm.x0).unwrap();
    let coarse = estimate_costs(&asm, &sol, &paths(1e-2, 1, 0)).unwrap();
    let fine = estimate_costs(&asm, &sol, &paths(1e-3, 1, 0)).unwrap();
    for t in 0..2 {
        assert_eq!(coarse.costs[t].std_err, 0.0);
        let e_coarse = (coarse.costs[t].mean - value[t]).abs();
        let e_fine = (fine.costs[t].mean - value[t]).abs();
        assert!(e_coarse <= 0.05 * value[t].abs());
        let ratio = e_coarse / e_fine;
        assert!((7.0..=13.0).contains(&ratio), "team {}: ratio {ratio}", t + 1);
    }
}

#[test]
fn sample_mean_follows_the_noiseless_flow() {
    let (asm, sol) = cosine(16, None, false);
    let noisy = simulate_closed_loop(&asm, &sol, &paths(1e-2, 10_000, 5), None).unwrap();
    let (quiet_asm, quiet_sol) = cosine(16, Some(0.0), false);
    let quiet = simulate_closed_loop(&quiet_asm, &quiet_sol, &paths(1e-2, 1, 5), None).unwrap();
    let target = quiet.paths[0].terminal.clone();
    let mean = noisy.mean_terminal();
    for i in 0..32 {
        let xs: Vec<f64> = noisy.paths.iter().map(|p| p.terminal[i]).collect();
        let e = CostEstimate::from_samples(&xs);
        assert!((mean[i] - target[i]).abs() <= 4.0 * e.std_err, "coordinate {i}");
    }
}

#[test]
fn estimates_do_not_depend_on_the_thread_count() {
    let (asm, sol) = cosine(16, None, false);
    let cfg = paths(1e-2, 300, 77);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_costs(&asm, &sol, &cfg).unwrap())
    };
    let one = run(1);
    for t in [2, 3] {
        assert_eq!(run(t), one);
    }
    let other_seed = estimate_costs(&asm, &sol, &PathConfig { seed: 78, ..cfg }).unwrap();
    assert_ne!(other_seed.costs[0].mean, one.costs[0].mean);
}

#[test]
fn deviations_do_not_pay() {
    let (asm, sol) = cosine(16, None, false);
    let cfg = paths(1e-2, 2000, 21);
    for p in [
        StrategyPerturbation::scale(Team::One, 1.1),
        StrategyPerturbation::offset_along_mode(Team::Two, 16, 0, 0.5),
    ] {
        let r = deviation_test(&asm, &sol, &cfg, &p).unwrap();
        assert!(r.respects_nash(3.0), "{}: {:?}", p.label(), r.delta);
        assert_eq!(r.excluded, 0);
        assert!(r.delta.mean > 0.0);
    }
}

#[test]
fn escaped_solutions_cannot_be_simulated() {
    let mut spec = Reference::Scalar.config().game;
    spec.team1.r_cross = -40.0;
    spec.team2.r_cross = -40.0;
    spec.epsilon = 10.0;
    let asm = assemble_at(&spec, 1);
    let sol = solve_coupled(&asm, &SolverConfig::with_dt(1e-2)).unwrap();
    assert!(!sol.is_complete());
    assert!(estimate_costs(&asm, &sol, &paths(1e-2, 4, 0)).is_err());
}

#[test]
fn too_many_modes_are_rejected() {
    let (asm, sol) = cosine(16, None, false);
    let cfg = PathConfig {
        modes_used: Some(17),
        ..paths(1e-2, 4, 0)
    };
    assert!(estimate_costs(&asm, &sol, &cfg).is_err());
}
