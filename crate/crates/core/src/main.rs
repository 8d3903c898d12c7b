use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use graphon_nash::config::{parse_config, ExperimentConfig, Reference};
use graphon_nash::experiment::{run_subcommand, Command, PhaseStatus, RunFlags};

#[derive(Parser)]
#[command(name = "graphon-nash", version, about = "Feedback Nash equilibria of graphon-coupled team games")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Experiment config (TOML). A shipped instance can be named as
    /// `ref:scalar`, `ref:two_block` or `ref:cosine`.
    #[arg(long, short, global = true, default_value = "ref:cosine")]
    config: String,

    /// Output directory (overrides the config and GRAPHON_NASH_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Append every value-matrix entry to the solution table.
    #[arg(long, global = true)]
    export_pi: bool,

    /// Write one row per simulated path.
    #[arg(long, global = true)]
    per_path_csv: bool,

    /// Override the simulation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (overrides GRAPHON_NASH_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Solve the coupled Riccati system and export the solution table.
    Solve,
    /// Estimate both team costs by Monte Carlo.
    Simulate,
    /// Best-response residuals, the deviation battery and the value check.
    VerifyNash,
    /// Continue the solution from the decoupled game to the target coupling.
    Continuation,
    /// Local existence windows and the certified-window norm check.
    Bounds,
    /// Refinement tables over grid size, step sizes and path counts.
    Convergence,
    /// Print the effective config as TOML.
    ShowConfig,
}

fn load(spec: &str) -> Result<ExperimentConfig, String> {
    if let Some(name) = spec.strip_prefix("ref:") {
        return Reference::from_name(name)
            .map(Reference::config)
            .ok_or_else(|| format!("unknown reference config {name:?}"));
    }
    let text = std::fs::read_to_string(spec).map_err(|e| format!("{spec}: {e}"))?;
    parse_config(&text).map_err(|e| match e {
        graphon_nash::Error::Invalid(violations) => {
            let items: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
            format!("{spec}: invalid config\n{}", items.join("\n"))
        }
        other => format!("{spec}: {other}"),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli.config) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let command = match cli.command {
        Cmd::Solve => Command::Solve,
        Cmd::Simulate => Command::Simulate,
        Cmd::VerifyNash => Command::VerifyNash,
        Cmd::Continuation => Command::Continuation,
        Cmd::Bounds => Command::Bounds,
        Cmd::Convergence => Command::Convergence,
        Cmd::ShowConfig => {
            return match graphon_nash::config::to_toml(&cfg) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
    };
    let flags = RunFlags {
        out: cli.out,
        export_pi: cli.export_pi,
        per_path_csv: cli.per_path_csv,
        seed: cli.seed,
        threads: cli.threads,
    };
    let report = match run_subcommand(command, &cfg, &flags) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for phase in &report.phases {
        let status = match &phase.status {
            PhaseStatus::Complete => "ok".to_string(),
            PhaseStatus::AssertionFailed { failures } => format!("FAILED: {}", failures.join("; ")),
            PhaseStatus::Failed { reason } => format!("ERROR: {reason}"),
            PhaseStatus::Skipped => "skipped".to_string(),
        };
        println!("{:<14} {:>8.2}s  {status}", phase.name, phase.seconds);
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    println!("results in {}", report.output_dir.display());
    ExitCode::from(report.exit_code() as u8)
}
