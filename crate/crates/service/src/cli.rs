//! Command-line interface.
//!
//! Exit codes: 0 the task finished (Done), 1 the input ran out before it
//! did, 2 the task aborted, 3 invalid input or usage.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use twistarm::collision::{collision_check, min_arm_distance, ArmSkeleton};
use twistarm::config_opt::optimize_twist_configs;
use twistarm::kinematics::{JointConfig, KinematicChain};

use crate::headless::{load_setup, run_headless, RunError};
use crate::server::serve_interactive;
use crate::session::{Mode, SessionConfig, DEFAULT_HEADLESS_RATE, DEFAULT_INTERACTIVE_RATE, DEFAULT_LISTEN};

pub const EXIT_DONE: i32 = 0;
pub const EXIT_INCOMPLETE: i32 = 1;
pub const EXIT_ABORTED: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "twistarm", version, about = "Dual-arm coordinated twisting simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario headless against its command trace.
    Run(RunArgs),
    /// Replay a recorded trace headless (the trace is required).
    Replay(ReplayArgs),
    /// Host an interactive session over websockets.
    Serve(ServeArgs),
    /// Optimize the twist configurations of a scenario.
    Optimize(OptimizeArgs),
    /// Minimum distance between the two arms at given joint angles.
    CheckCollision(CheckArgs),
}

#[derive(Debug, Args)]
pub struct ArmArgs {
    /// Left arm chain file (defaults to the scenario's).
    #[arg(long)]
    pub left_arm: Option<PathBuf>,
    /// Right arm chain file (defaults to the scenario's).
    #[arg(long)]
    pub right_arm: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Command trace; overrides the scenario's.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub arms: ArmArgs,
    /// Write the per-tick metrics log here.
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
    /// Simulated ticks per second (headless runs are not throttled).
    #[arg(long, default_value_t = DEFAULT_HEADLESS_RATE)]
    pub tick_rate: f64,
    /// Ticks to keep running after the trace is exhausted.
    #[arg(long, default_value_t = 100)]
    pub settle_ticks: u64,
    #[arg(long, default_value_t = 20_000)]
    pub max_ticks: u64,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[command(flatten)]
    pub run: RunArgsNoTrace,
}

#[derive(Debug, Args)]
pub struct RunArgsNoTrace {
    #[arg(long)]
    pub scenario: PathBuf,
    #[command(flatten)]
    pub arms: ArmArgs,
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_HEADLESS_RATE)]
    pub tick_rate: f64,
    #[arg(long, default_value_t = 100)]
    pub settle_ticks: u64,
    #[arg(long, default_value_t = 20_000)]
    pub max_ticks: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[command(flatten)]
    pub arms: ArmArgs,
    #[arg(long, default_value = DEFAULT_LISTEN)]
    pub listen: String,
    #[arg(long, default_value_t = DEFAULT_INTERACTIVE_RATE)]
    pub tick_rate: f64,
    /// Record the operator's commands to this trace file.
    #[arg(long)]
    pub record: Option<PathBuf>,
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[command(flatten)]
    pub arms: ArmArgs,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub left_arm: Option<PathBuf>,
    #[arg(long)]
    pub right_arm: Option<PathBuf>,
    /// Left joint angles, comma separated (radians).
    #[arg(long, allow_hyphen_values = true)]
    pub left: String,
    /// Right joint angles, comma separated (radians).
    #[arg(long, allow_hyphen_values = true)]
    pub right: String,
    /// Leave each arm's gripper link out of the check.
    #[arg(long)]
    pub skip_grippers: bool,
    /// Also report the safety verdict against this threshold (m).
    #[arg(long)]
    pub d_thr: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("{0}")]
    Input(String),
}

pub fn parse_config(text: &str) -> Result<JointConfig, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Input(format!("joint value {s:?}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(JointConfig::from)
}

fn load_chain(path: Option<&Path>, fallback: fn() -> KinematicChain) -> Result<KinematicChain, CliError> {
    match path {
        Some(p) => KinematicChain::load(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display()))),
        None => Ok(fallback()),
    }
}

fn session(mode: Mode, scenario: &Path, arms: &ArmArgs) -> SessionConfig {
    let mut c = SessionConfig::new(mode, scenario);
    c.left_arm = arms.left_arm.clone();
    c.right_arm = arms.right_arm.clone();
    c
}

fn headless(config: SessionConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let run = run_headless(&config)?;
    write!(out, "{}", run.summary).map_err(|e| CliError::Input(e.to_string()))?;
    Ok(run.summary.outcome.exit_code())
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let write_err = |e: std::io::Error| CliError::Input(e.to_string());
    match cli.command {
        Command::Run(a) => {
            let mut c = session(Mode::Headless, &a.scenario, &a.arms);
            c.trace = a.trace;
            c.metrics_out = a.metrics_out;
            c.tick_rate = a.tick_rate;
            c.settle_ticks = a.settle_ticks;
            c.max_ticks = a.max_ticks;
            headless(c, out)
        }
        Command::Replay(a) => {
            let r = a.run;
            let mut c = session(Mode::Headless, &r.scenario, &r.arms);
            c.trace = Some(a.trace);
            c.metrics_out = r.metrics_out;
            c.tick_rate = r.tick_rate;
            c.settle_ticks = r.settle_ticks;
            c.max_ticks = r.max_ticks;
            headless(c, out)
        }
        Command::Serve(a) => {
            let mut c = session(Mode::Interactive, &a.scenario, &a.arms);
            c.listen = a.listen;
            c.tick_rate = a.tick_rate;
            c.record = a.record;
            c.metrics_out = a.metrics_out;
            let summary = serve_interactive(&c)?;
            writeln!(out, "session ended at tick {} in {}", summary.ticks, summary.final_phase).map_err(write_err)?;
            Ok(EXIT_DONE)
        }
        Command::Optimize(a) => {
            let c = session(Mode::Headless, &a.scenario, &a.arms);
            let setup = load_setup(&c)?;
            let result = optimize_twist_configs(&setup.optimization_problem())
                .map_err(|e| CliError::Input(format!("optimization failed: {e}")))?;
            let text = toml::to_string_pretty(&result).map_err(|e| CliError::Input(e.to_string()))?;
            write!(out, "{text}").map_err(write_err)?;
            Ok(EXIT_DONE)
        }
        Command::CheckCollision(a) => {
            let left = load_chain(a.left_arm.as_deref(), KinematicChain::default_left)?;
            let right = load_chain(a.right_arm.as_deref(), KinematicChain::default_right)?;
            let ql = parse_config(&a.left)?;
            let qr = parse_config(&a.right)?;
            let skeleton = |chain: &KinematicChain, q: &JointConfig| {
                chain
                    .joint_positions(q)
                    .map(ArmSkeleton::new)
                    .map_err(|e| CliError::Input(format!("{}: {e}", chain.name())))
            };
            let report = min_arm_distance(&skeleton(&left, &ql)?, &skeleton(&right, &qr)?, a.skip_grippers)
                .map_err(|e| CliError::Input(e.to_string()))?;
            #[derive(serde::Serialize)]
            struct Output {
                report: twistarm::collision::DistanceReport,
                #[serde(skip_serializing_if = "Option::is_none")]
                verdict: Option<twistarm::collision::SafetyVerdict>,
            }
            let output = Output {
                report,
                verdict: a.d_thr.map(|t| collision_check(&report, t)),
            };
            let text = toml::to_string_pretty(&output).map_err(|e| CliError::Input(e.to_string()))?;
            write!(out, "{text}").map_err(write_err)?;
            Ok(EXIT_DONE)
        }
    }
}

/// Parses `args`, runs the command and maps every failure to an exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = write!(err, "{e}");
            return EXIT_INPUT;
        }
        // --help and --version
        Err(e) => {
            let _ = write!(out, "{e}");
            return EXIT_DONE;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
    }
}
