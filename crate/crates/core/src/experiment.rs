//! Subcommand drivers. Every run writes its result files into one output
//! directory, guarded by a lock file, and describes them in `report.json`
//! with a SHA-256 digest per file. Timings live only in the report, so the
//! digested files of two runs with the same config and seed are identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{to_toml, ExperimentConfig};
use crate::error::{Error, Result};
use crate::game::{assemble, AssembledGame, Team};
use crate::graphon::Grid;
use crate::linalg;
use crate::riccati::{
    best_response, certified_window_norm, epsilon_continuation, existence_bound, solve_coupled,
    trajectory_relative_error, RiccatiSolution, SolveStatus, SolverConfig, Trajectory,
};
use crate::sde::{
    deviation_test, estimate_costs, simulate_closed_loop, value_check, weak_order_study,
    DeviationResult, PathConfig, StrategyPerturbation,
};

/// Overrides the configured output directory.
pub const OUT_ENV: &str = "GRAPHON_NASH_OUT";
/// Worker threads for path simulation.
pub const THREADS_ENV: &str = "GRAPHON_NASH_THREADS";

const LOCK_FILE: &str = ".graphon-nash.lock";
const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Simulate,
    VerifyNash,
    Continuation,
    Bounds,
    Convergence,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Solve,
        Command::Simulate,
        Command::VerifyNash,
        Command::Continuation,
        Command::Bounds,
        Command::Convergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Simulate => "simulate",
            Command::VerifyNash => "verify-nash",
            Command::Continuation => "continuation",
            Command::Bounds => "bounds",
            Command::Convergence => "convergence",
        }
    }

    fn phases(self) -> &'static [&'static str] {
        match self {
            Command::Solve => &["assemble", "solve"],
            Command::Simulate => &["assemble", "solve", "simulate"],
            Command::VerifyNash => &["assemble", "solve", "best_response", "deviations", "value_check"],
            Command::Continuation => &["assemble", "continuation"],
            Command::Bounds => &["assemble", "bounds", "solve", "window"],
            Command::Convergence => &["assemble", "grid", "dt", "solve", "dt_sim", "num_paths"],
        }
    }
}

/// Command-line overrides of the config.
#[derive(Debug, Clone, Default)]
pub struct RunFlags {
    pub out: Option<PathBuf>,
    pub export_pi: bool,
    pub per_path_csv: bool,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PhaseStatus {
    Complete,
    /// Ran to the end but at least one check failed.
    AssertionFailed { failures: Vec<String> },
    /// Stopped with an error.
    Failed { reason: String },
    /// Not run because an earlier phase failed.
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct Phase {
    pub name: String,
    #[serde(flatten)]
    pub status: PhaseStatus,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: Command,
    pub version: String,
    /// Digest of the effective config with the output directory blanked.
    pub config_sha256: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub phases: Vec<Phase>,
    pub manifest: Vec<ManifestEntry>,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn success(&self) -> bool {
        self.phases.iter().all(|p| p.status == PhaseStatus::Complete)
    }

    pub fn exit_code(&self) -> i32 {
        if self.success() {
            0
        } else {
            1
        }
    }

    pub fn phase(&self, name: &str) -> Option<&Phase> {
        self.phases.iter().find(|p| p.name == name)
    }
}

pub fn version() -> String {
    match option_env!("GRAPHON_NASH_GIT_DESCRIBE") {
        Some(d) => format!("{} ({d})", env!("CARGO_PKG_VERSION")),
        None => env!("CARGO_PKG_VERSION").to_string(),
    }
}

/// Applies flags and environment overrides to a copy of `cfg`.
pub fn effective_config(cfg: &ExperimentConfig, flags: &RunFlags) -> ExperimentConfig {
    let mut cfg = cfg.clone();
    if let Some(dir) = &flags.out {
        cfg.outputs.dir = dir.clone();
    } else if let Some(dir) = std::env::var_os(OUT_ENV).filter(|d| !d.is_empty()) {
        cfg.outputs.dir = PathBuf::from(dir);
    }
    cfg.outputs.export_pi |= flags.export_pi;
    cfg.outputs.per_path_csv |= flags.per_path_csv;
    if let Some(seed) = flags.seed {
        cfg.simulation.seed = seed;
    }
    cfg
}

pub fn config_digest(cfg: &ExperimentConfig) -> Result<String> {
    let mut c = cfg.clone();
    c.outputs.dir = PathBuf::new();
    Ok(hex::encode(Sha256::digest(to_toml(&c)?.as_bytes())))
}

fn thread_count(flags: &RunFlags) -> Option<usize> {
    flags.threads.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|t| t.trim().parse().ok())
    })
}

/// Runs one subcommand. Errors are returned only when nothing could be
/// recorded (invalid config, unusable or locked output directory); failures
/// inside phases are reported in the returned [`RunReport`].
pub fn run_subcommand(command: Command, cfg: &ExperimentConfig, flags: &RunFlags) -> Result<RunReport> {
    let cfg = effective_config(cfg, flags);
    crate::error::check(cfg.validate())?;
    let dir = cfg.outputs.dir.clone();
    fs::create_dir_all(&dir)?;
    let _lock = Lock::acquire(&dir)?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = thread_count(flags).filter(|t| *t > 0) {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Inconsistent(format!("thread pool: {e}")))?;

    let mut run = Run {
        hash: config_digest(&cfg)?,
        cfg: &cfg,
        dir: dir.clone(),
        phases: Vec::new(),
        manifest: Vec::new(),
        notes: Vec::new(),
    };
    pool.install(|| match command {
        Command::Solve => solve(&mut run),
        Command::Simulate => simulate(&mut run),
        Command::VerifyNash => verify_nash(&mut run),
        Command::Continuation => continuation(&mut run),
        Command::Bounds => bounds(&mut run),
        Command::Convergence => convergence(&mut run),
    })?;

    for name in command.phases() {
        if run.phases.iter().all(|p| p.name != *name) {
            run.phases.push(Phase {
                name: name.to_string(),
                status: PhaseStatus::Skipped,
                seconds: 0.0,
            });
        }
    }
    let report = RunReport {
        command,
        version: version(),
        config_sha256: run.hash,
        seed: cfg.simulation.seed,
        output_dir: dir.clone(),
        phases: run.phases,
        manifest: run.manifest,
        notes: run.notes,
    };
    let mut text = serde_json::to_vec_pretty(&report)?;
    text.push(b'\n');
    fs::write(dir.join(REPORT_FILE), text)?;
    Ok(report)
}

struct Lock(PathBuf);

impl Lock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Lock(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::Locked(dir.to_path_buf()))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Failed checks of one phase.
#[derive(Default)]
struct Checks(Vec<String>);

impl Checks {
    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.0.push(what());
        }
    }
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    hash: String,
    dir: PathBuf,
    phases: Vec<Phase>,
    manifest: Vec<ManifestEntry>,
    notes: Vec<String>,
}

impl Run<'_> {
    /// Runs `f` as the phase `name`. Returns its value unless it errored;
    /// a value is still returned when only checks failed.
    fn phase<R>(&mut self, name: &str, f: impl FnOnce(&mut Self, &mut Checks) -> Result<R>) -> Option<R> {
        let start = Instant::now();
        let mut checks = Checks::default();
        let out = f(self, &mut checks);
        let (status, value) = match out {
            Ok(v) if checks.0.is_empty() => (PhaseStatus::Complete, Some(v)),
            Ok(v) => (PhaseStatus::AssertionFailed { failures: checks.0 }, Some(v)),
            Err(e) => (PhaseStatus::Failed { reason: e.to_string() }, None),
        };
        self.phases.push(Phase {
            name: name.to_string(),
            status,
            seconds: start.elapsed().as_secs_f64(),
        });
        value
    }

    fn write(&mut self, file: &str, bytes: Vec<u8>) -> Result<()> {
        fs::write(self.dir.join(file), &bytes)?;
        let entry = ManifestEntry {
            file: file.to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
            bytes: bytes.len(),
        };
        match self.manifest.iter_mut().find(|m| m.file == file) {
            Some(m) => *m = entry,
            None => self.manifest.push(entry),
        }
        Ok(())
    }

    fn write_json(&mut self, file: &str, value: &Value) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(file, bytes)
    }

    fn assemble(&mut self) -> Option<AssembledGame<f64>> {
        let (game, n) = (&self.cfg.game, self.cfg.grid_n);
        self.phase("assemble", |_, _| assemble::<f64>(game, Grid::new(n)?))
    }

    fn solve(&mut self, asm: &AssembledGame<f64>) -> Option<RiccatiSolution<f64>> {
        let solver = self.cfg.solver.clone();
        self.phase("solve", |_, checks| {
            let sol = solve_coupled(asm, &solver)?;
            require_complete(checks, &sol.status);
            checks.require(terminal_exact(asm, &sol), || {
                "terminal value matrices differ from the terminal cost blocks".into()
            });
            Ok(sol)
        })
    }
}

fn require_complete(checks: &mut Checks, status: &SolveStatus) {
    if let SolveStatus::Escaped { time } = status {
        let time = *time;
        checks.require(false, || format!("solution escaped at t = {time}"));
    }
}

fn terminal_exact(asm: &AssembledGame<f64>, sol: &RiccatiSolution<f64>) -> bool {
    Team::BOTH
        .iter()
        .all(|t| sol.pi(*t).last() == Some(&asm.costs.terminal[t.index()]))
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// Comma-separated table with a header row.
struct Csv(String);

impl Csv {
    fn new(header: &[&str]) -> Self {
        Csv(header.join(",") + "\n")
    }

    fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.0, "{}", cells.join(","));
    }

    fn into_bytes(self) -> Vec<u8> {
        self.0.into_bytes()
    }
}

fn status_json(status: &SolveStatus) -> Value {
    serde_json::to_value(status).unwrap_or(Value::Null)
}

fn solution_csv(asm: &AssembledGame<f64>, sol: &RiccatiSolution<f64>, export_pi: bool) -> Csv {
    let dim = asm.dim();
    let mut header: Vec<String> = [
        "t", "q1", "q2", "pi1_norm", "pi2_norm", "gain1_norm", "gain2_norm", "min_eig1", "min_eig2",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    if export_pi {
        for team in 1..=2 {
            for r in 0..dim {
                for c in 0..dim {
                    header.push(format!("pi{team}_{r}_{c}"));
                }
            }
        }
    }
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&refs);
    for (k, &t) in sol.times.iter().enumerate() {
        let mut cells = vec![num(t), num(sol.q[0][k]), num(sol.q[1][k])];
        for team in Team::BOTH {
            cells.push(num(linalg::spectral_norm_sym(&sol.pi(team)[k])));
        }
        for team in Team::BOTH {
            let gain = crate::riccati::gain_from_pi(asm, team, &sol.pi(team)[k]);
            cells.push(num(linalg::spectral_norm(&gain)));
        }
        for team in Team::BOTH {
            cells.push(num(linalg::min_eigenvalue(&sol.pi(team)[k])));
        }
        if export_pi {
            for team in Team::BOTH {
                let p = &sol.pi(team)[k];
                for r in 0..dim {
                    for c in 0..dim {
                        cells.push(num(p[(r, c)]));
                    }
                }
            }
        }
        csv.row(&cells);
    }
    csv
}

fn solution_summary(run: &Run<'_>, asm: &AssembledGame<f64>, sol: &RiccatiSolution<f64>) -> Value {
    let value = sol.value_at(&asm.x0).ok();
    let min_eig = |t: Team| sol.min_eigenvalues(t).into_iter().fold(f64::INFINITY, f64::min);
    json!({
        "config_sha256": run.hash,
        "grid_n": asm.n(),
        "dt": run.cfg.solver.dt,
        "epsilon": asm.epsilon,
        "solve": status_json(&sol.status),
        "nodes": sol.times.len(),
        "value": value,
        "q0": [sol.q[0][0], sol.q[1][0]],
        "min_eigenvalue": [min_eig(Team::One), min_eig(Team::Two)],
        "max_asymmetry": sol.max_asymmetry(),
        "terminal_exact": terminal_exact(asm, sol),
    })
}

fn solve(run: &mut Run<'_>) -> Result<()> {
    let Some(asm) = run.assemble() else { return Ok(()) };
    let Some(sol) = run.solve(&asm) else { return Ok(()) };
    let csv = solution_csv(&asm, &sol, run.cfg.outputs.export_pi);
    run.write("solution.csv", csv.into_bytes())?;
    let summary = solution_summary(run, &asm, &sol);
    run.write_json("solution.json", &summary)
}

fn simulate(run: &mut Run<'_>) -> Result<()> {
    let Some(asm) = run.assemble() else { return Ok(()) };
    let Some(sol) = run.solve(&asm) else { return Ok(()) };
    let sim_cfg = run.cfg.simulation.clone();
    run.phase("simulate", |run, checks| {
        let sim = simulate_closed_loop(&asm, &sol, &sim_cfg, None)?;
        checks.require(sim.excluded == 0, || format!("{} paths overflowed", sim.excluded));
        let estimates = sim.estimates();
        let analytic = sol.value_at(&asm.x0)?;
        if run.cfg.outputs.per_path_csv {
            let mut csv = Csv::new(&["path", "cost1", "cost2", "finite"]);
            for (i, p) in sim.paths.iter().enumerate() {
                csv.row(&[i.to_string(), num(p.cost[0]), num(p.cost[1]), p.finite.to_string()]);
            }
            run.write("paths.csv", csv.into_bytes())?;
        }
        let record = json!({
            "config_sha256": run.hash,
            "seed": sim_cfg.seed,
            "num_paths": sim_cfg.num_paths,
            "dt_sim": sim_cfg.dt_sim,
            "modes_used": sim_cfg.modes_used,
            "estimates": estimates,
            "analytic": analytic,
            "excluded": sim.excluded,
        });
        run.write_json("costs.json", &record)
    });
    Ok(())
}

fn deviation_row(r: &DeviationResult, pass: bool) -> Vec<String> {
    let (kind, parameter) = match &r.perturbation.kind {
        crate::sde::PerturbationKind::Scale { factor } => ("scale", *factor),
        crate::sde::PerturbationKind::Offset { magnitude, .. } => ("offset", *magnitude),
    };
    vec![
        r.perturbation.team.number().to_string(),
        kind.to_string(),
        num(parameter),
        num(r.delta.mean),
        num(r.delta.std_err),
        num(r.baseline.mean),
        num(r.perturbed.mean),
        r.excluded.to_string(),
        pass.to_string(),
    ]
}

/// The configured battery: every scaling and every mode offset, per team.
pub fn deviation_battery(cfg: &ExperimentConfig) -> Vec<StrategyPerturbation> {
    let v = &cfg.studies.verify;
    let mut out = Vec::new();
    for team in Team::BOTH {
        for &s in &v.scalings {
            out.push(StrategyPerturbation::scale(team, s));
        }
        for &m in &v.offset_modes {
            out.push(StrategyPerturbation::offset_along_mode(team, cfg.grid_n, m, v.offset_magnitude));
        }
    }
    out
}

fn verify_nash(run: &mut Run<'_>) -> Result<()> {
    let Some(asm) = run.assemble() else { return Ok(()) };
    let Some(sol) = run.solve(&asm) else { return Ok(()) };
    let mut report = json!({ "config_sha256": run.hash, "seed": run.cfg.simulation.seed });
    if !sol.is_complete() {
        run.notes.push("no verification of an escaped solution".into());
        return run.write_json("nash_report.json", &report);
    }
    let verify = run.cfg.studies.verify.clone();
    let solver = run.cfg.solver.clone();
    let sim_cfg = run.cfg.simulation.clone();

    let residuals = run.phase("best_response", |_, checks| {
        let mut rows = Vec::new();
        for team in Team::BOTH {
            let opponent = Trajectory::new(&sol.times, sol.pi(team.other()))?;
            let br = best_response(&asm, &solver, opponent, team)?;
            require_complete(checks, &br.status);
            let residual = trajectory_relative_error(&br.p, sol.pi(team));
            let pass = residual <= verify.residual_tol;
            checks.require(pass, || {
                format!("team {} best-response residual {residual:e}", team.number())
            });
            rows.push(json!({ "team": team.number(), "residual": residual, "pass": pass }));
        }
        Ok(rows)
    });
    report["best_response"] = json!({ "tolerance": verify.residual_tol, "teams": residuals });

    let battery = deviation_battery(run.cfg);
    let deviations = run.phase("deviations", |run, checks| {
        let mut identity = Vec::new();
        for team in Team::BOTH {
            let r = deviation_test(&asm, &sol, &sim_cfg, &StrategyPerturbation::scale(team, 1.0))?;
            let zero = r.delta.mean == 0.0 && r.delta.std_err == 0.0;
            checks.require(zero, || format!("identity deviation of team {} is not zero", team.number()));
            identity.push(json!({ "team": team.number(), "delta": r.delta, "exact_zero": zero }));
        }
        let mut csv = Csv::new(&[
            "team", "kind", "parameter", "delta_mean", "delta_std_err", "baseline_mean", "perturbed_mean",
            "excluded", "pass",
        ]);
        let mut results = Vec::new();
        for p in &battery {
            let r = deviation_test(&asm, &sol, &sim_cfg, p)?;
            let pass = r.respects_nash(verify.sigma_tol) && r.excluded == 0;
            checks.require(pass, || {
                format!(
                    "{}: dJ = {:e} +- {:e} ({} excluded)",
                    p.label(),
                    r.delta.mean,
                    r.delta.std_err,
                    r.excluded
                )
            });
            csv.row(&deviation_row(&r, pass));
            results.push(json!({
                "team": p.team.number(),
                "label": p.label(),
                "delta": r.delta,
                "baseline": r.baseline,
                "perturbed": r.perturbed,
                "excluded": r.excluded,
                "pass": pass,
            }));
        }
        run.write("deviations.csv", csv.into_bytes())?;
        Ok(json!({ "sigma_tol": verify.sigma_tol, "identity": identity, "battery": results }))
    });
    report["deviations"] = deviations.unwrap_or(Value::Null);

    if verify.value_check {
        let check = run.phase("value_check", |_, checks| {
            let study = weak_order_study(&asm, &sol, &sim_cfg)?;
            checks.require(study.excluded == 0, || format!("{} paths overflowed", study.excluded));
            let analytic = sol.value_at(&asm.x0)?;
            let vc = value_check(&study, analytic);
            checks.require(vc.ratio_in_range, || {
                format!("weak-order ratios {:?} outside the accepted range", study.ratio)
            });
            checks.require(vc.pass || !vc.ratio_in_range, || {
                format!("Monte Carlo gaps {:?} exceed tolerances {:?}", vc.gap, vc.tolerance)
            });
            Ok(json!({ "weak_order": study, "comparison": vc }))
        });
        report["value_check"] = check.unwrap_or(Value::Null);
    } else {
        run.phases.push(Phase {
            name: "value_check".into(),
            status: PhaseStatus::Complete,
            seconds: 0.0,
        });
        run.notes.push("value check disabled in the config".into());
    }
    run.write_json("nash_report.json", &report)
}

fn continuation(run: &mut Run<'_>) -> Result<()> {
    let Some(asm) = run.assemble() else { return Ok(()) };
    let study = run.cfg.studies.continuation.clone();
    let target = study.target.unwrap_or(run.cfg.game.epsilon);
    let solver = run.cfg.solver.clone();
    run.phase("continuation", |run, checks| {
        let cont = epsilon_continuation(&asm, &solver, target, study.steps)?;
        let mut csv = Csv::new(&["epsilon", "status", "escape_time", "sup_deviation"]);
        for s in &cont.steps {
            let (status, time) = match s.status {
                SolveStatus::Complete => ("complete", String::new()),
                SolveStatus::Escaped { time } => ("escaped", num(time)),
            };
            csv.row(&[
                num(s.epsilon),
                status.into(),
                time,
                s.sup_deviation.map(num).unwrap_or_default(),
            ]);
        }
        run.write("continuation.csv", csv.into_bytes())?;
        let reached = cont.reached_target(target);
        checks.require(reached, || {
            format!("continuation stopped at eps = {} before {target}", cont.achieved_epsilon)
        });
        let sensitivity = (study.steps % 2 == 0 && reached).then(|| {
            let half = cont.steps[study.steps / 2].sup_deviation.unwrap_or(f64::NAN);
            let full = cont.steps[study.steps].sup_deviation.unwrap_or(f64::NAN);
            json!({
                "half_epsilon": target / 2.0,
                "deviation_half": half,
                "deviation_full": full,
                "ratio": finite_or_null(full / half),
            })
        });
        run.write_json(
            "continuation.json",
            &json!({
                "config_sha256": run.hash,
                "target": target,
                "steps": study.steps,
                "achieved_epsilon": cont.achieved_epsilon,
                "reached_target": reached,
                "decoupling_error": cont.decoupling_error,
                "sensitivity": sensitivity,
            }),
        )
    });
    Ok(())
}

fn bounds(run: &mut Run<'_>) -> Result<()> {
    let Some(asm) = run.assemble() else { return Ok(()) };
    let alphas = run.cfg.studies.bounds.alphas.clone();
    let Some(entries) = run.phase("bounds", |_, _| {
        alphas
            .iter()
            .map(|&a| existence_bound(&asm, a))
            .collect::<Result<Vec<_>>>()
    }) else {
        return Ok(());
    };
    let mut records: Vec<Value> = entries
        .iter()
        .map(|b| {
            json!({
                "alpha": b.alpha,
                "r": b.r,
                "tau": finite_or_null(b.tau),
                "c1": b.c1,
                "c2": b.c2,
                "degenerate": b.degenerate,
            })
        })
        .collect();
    if entries.iter().any(|b| !b.has_window()) {
        run.notes.push("no certified window: tau = 0".into());
    }
    let sol = run.solve(&asm);
    if let Some(sol) = &sol {
        let horizon = asm.horizon;
        run.phase("window", |_, checks| {
            for (b, rec) in entries.iter().zip(records.iter_mut()) {
                if !b.has_window() {
                    rec["note"] = json!("no certified window");
                    continue;
                }
                let window = b.tau.min(horizon);
                if let SolveStatus::Escaped { time } = sol.status {
                    checks.require(time < horizon - window, || {
                        format!("alpha = {}: escape at t = {time} inside the window", b.alpha)
                    });
                }
                let sup = certified_window_norm(sol, window);
                let inside = sup <= b.r;
                checks.require(inside, || {
                    format!("alpha = {}: sup norm {sup:e} exceeds r = {:e}", b.alpha, b.r)
                });
                rec["window"] = json!(window);
                rec["window_sup_norm"] = json!(sup);
                rec["inside_ball"] = json!(inside);
            }
            Ok(())
        });
    }
    let norms = entries.first().map(|b| b.norms);
    let out = json!({
        "config_sha256": run.hash,
        "epsilon": asm.epsilon,
        "norms": norms,
        "bounds": records,
        "solve": sol.as_ref().map(|s| status_json(&s.status)),
    });
    run.write_json("bounds.json", &out)
}

fn relative(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> f64 {
    let scale = b.norm();
    let d = (a - b).norm();
    if scale > 0.0 {
        d / scale
    } else {
        d
    }
}

fn convergence(run: &mut Run<'_>) -> Result<()> {
    let Some(asm) = run.assemble() else { return Ok(()) };
    let study = run.cfg.studies.convergence.clone();
    let solver = run.cfg.solver.clone();

    run.phase("grid", |run, checks| {
        let mut values = Vec::new();
        for &n in &study.grid_n {
            let g = assemble::<f64>(&run.cfg.game, Grid::new(n)?)?;
            let sol = solve_coupled(&g, &solver)?;
            require_complete(checks, &sol.status);
            values.push((n, sol.value_at(&g.x0).ok()));
        }
        let reference = values.iter().max_by_key(|(n, _)| *n).and_then(|(_, v)| *v);
        let mut csv = Csv::new(&["grid_n", "value1", "value2", "diff1", "diff2"]);
        for (n, v) in &values {
            let v = v.unwrap_or([f64::NAN; 2]);
            let r = reference.unwrap_or([f64::NAN; 2]);
            csv.row(&[n.to_string(), num(v[0]), num(v[1]), num((v[0] - r[0]).abs()), num((v[1] - r[1]).abs())]);
        }
        run.write("convergence_grid.csv", csv.into_bytes())
    });

    run.phase("dt", |run, checks| {
        let mut sols = Vec::new();
        for &dt in &study.dt {
            let sol = solve_coupled(&asm, &SolverConfig { dt, ..solver.clone() })?;
            require_complete(checks, &sol.status);
            sols.push((dt, sol));
        }
        let reference = sols
            .iter()
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, s)| [s.pi(Team::One)[0].clone(), s.pi(Team::Two)[0].clone()]);
        let mut csv = Csv::new(&["dt", "value1", "value2", "pi0_rel_error1", "pi0_rel_error2"]);
        for (dt, sol) in &sols {
            let v = sol.value_at(&asm.x0).unwrap_or([f64::NAN; 2]);
            let err = |t: Team| {
                reference
                    .as_ref()
                    .map_or(f64::NAN, |r| relative(&sol.pi(t)[0], &r[t.index()]))
            };
            csv.row(&[num(*dt), num(v[0]), num(v[1]), num(err(Team::One)), num(err(Team::Two))]);
        }
        run.write("convergence_dt.csv", csv.into_bytes())
    });

    let Some(sol) = run.phase("solve", |_, checks| {
        let sol = solve_coupled(&asm, &solver)?;
        require_complete(checks, &sol.status);
        Ok(sol)
    }) else {
        return Ok(());
    };
    let Ok(analytic) = sol.value_at(&asm.x0) else { return Ok(()) };
    let base = run.cfg.simulation.clone();

    let mc_row = |cfg: &PathConfig, first: String| -> Result<Vec<String>> {
        let s = estimate_costs(&asm, &sol, cfg)?;
        let [a, b] = s.costs;
        Ok(vec![
            first,
            num(a.mean),
            num(a.std_err),
            num((a.mean - analytic[0]).abs()),
            num(b.mean),
            num(b.std_err),
            num((b.mean - analytic[1]).abs()),
            s.excluded.to_string(),
        ])
    };
    let header = |first: &'static str| {
        Csv::new(&[first, "mean1", "std_err1", "gap1", "mean2", "std_err2", "gap2", "excluded"])
    };

    run.phase("dt_sim", |run, _| {
        let mut csv = header("dt_sim");
        for &dt_sim in &study.dt_sim {
            csv.row(&mc_row(&PathConfig { dt_sim, ..base.clone() }, num(dt_sim))?);
        }
        run.write("convergence_dt_sim.csv", csv.into_bytes())
    });
    run.phase("num_paths", |run, _| {
        let mut csv = header("num_paths");
        for &num_paths in &study.num_paths {
            csv.row(&mc_row(&PathConfig { num_paths, ..base.clone() }, num_paths.to_string())?);
        }
        run.write("convergence_paths.csv", csv.into_bytes())
    });
    run.write_json(
        "convergence.json",
        &json!({ "config_sha256": run.hash, "analytic": analytic, "seed": base.seed }),
    )
}
