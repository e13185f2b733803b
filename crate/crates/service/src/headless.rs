//! Headless replay of a recorded command trace against a scenario.

use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use twistarm::task_engine::{Phase, ScenarioError, Scenario, TaskCommand, TaskEngine, TaskError, TaskSetup};
use twistarm::teleop::{read_trace, MasterCommand, TraceError};

use crate::cli::{EXIT_ABORTED, EXIT_DONE, EXIT_INCOMPLETE};
use crate::metrics::MetricsLog;
use crate::session::SessionConfig;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("trace {path}: {source}")]
    Trace { path: PathBuf, source: TraceError },
    #[error("writing {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Done,
    Aborted,
    /// The input ran out (or the tick budget did) before the task finished.
    Incomplete,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Done => EXIT_DONE,
            Outcome::Incomplete => EXIT_INCOMPLETE,
            Outcome::Aborted => EXIT_ABORTED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub outcome: Outcome,
    pub final_phase: Phase,
    pub ticks: u64,
    /// Simulated time at the configured tick rate.
    pub simulated_seconds: f64,
    pub final_theta_t_deg: f64,
    pub min_d_min: f64,
    /// `None` when the run never reached Twist.
    pub max_delta_in_twist_deg: Option<f64>,
    pub abort: Option<String>,
}

impl std::fmt::Display for RunSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "outcome:        {:?} (phase {})", self.outcome, self.final_phase)?;
        writeln!(f, "ticks:          {} ({:.2} s simulated)", self.ticks, self.simulated_seconds)?;
        writeln!(f, "final theta_t:  {:.3} deg", self.final_theta_t_deg)?;
        writeln!(f, "min d_min:      {:.4} m", self.min_d_min)?;
        match self.max_delta_in_twist_deg {
            Some(d) => writeln!(f, "max delta twist: {d:.3} deg")?,
            None => writeln!(f, "max delta twist: n/a")?,
        }
        if let Some(reason) = &self.abort {
            writeln!(f, "abort:          {reason}")?;
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct HeadlessRun {
    pub summary: RunSummary,
    pub metrics: MetricsLog,
    pub engine: TaskEngine,
}

pub fn load_setup(config: &SessionConfig) -> Result<TaskSetup, RunError> {
    let scenario = Scenario::load(&config.scenario)?;
    Ok(TaskSetup::load(scenario, config.left_arm.as_deref(), config.right_arm.as_deref())?)
}

pub fn trace_path(config: &SessionConfig, setup: &TaskSetup) -> Option<PathBuf> {
    config.trace.clone().or_else(|| setup.scenario.teleop.trace.clone())
}

/// Runs the scenario to Done or Aborted, or until the trace is exhausted
/// and `settle_ticks` more ticks have passed without finishing.
pub fn run_headless(config: &SessionConfig) -> Result<HeadlessRun, RunError> {
    config.validate().map_err(RunError::Config)?;
    let setup = load_setup(config)?;
    let path = trace_path(config, &setup)
        .ok_or_else(|| RunError::Config("headless runs need a trace (scenario teleop.trace or --trace)".into()))?;
    let trace = read_trace(&path).map_err(|source| RunError::Trace { path, source })?;
    let run = run_trace(setup, &trace, config)?;
    if let Some(out) = &config.metrics_out {
        let file = std::fs::File::create(out).map_err(|source| RunError::Output {
            path: out.clone(),
            source,
        })?;
        run.metrics
            .write_to(std::io::BufWriter::new(file))
            .map_err(|source| RunError::Output {
                path: out.clone(),
                source,
            })?;
    }
    Ok(run)
}

/// Feeds each command at its tick; commands stamped with a tick that has
/// already passed are applied at the next one.
pub fn run_trace(setup: TaskSetup, trace: &[MasterCommand], config: &SessionConfig) -> Result<HeadlessRun, RunError> {
    let mut engine = TaskEngine::new(setup)?;
    let mut metrics = MetricsLog::new(&engine);
    metrics.push(&engine);
    let last_trace_tick = trace.last().map_or(0, |c| c.tick);
    let mut next = 0;
    let mut min_d = engine.state().metrics.d_min;
    let mut max_delta: Option<f64> = None;
    while !engine.phase().is_terminal() && engine.tick() < config.max_ticks {
        if next == trace.len() && engine.tick() >= last_trace_tick + config.settle_ticks {
            break;
        }
        let tick = engine.tick() + 1;
        let mut commands = Vec::new();
        while next < trace.len() && trace[next].tick <= tick {
            commands.push(TaskCommand::Teleop(trace[next]));
            next += 1;
        }
        engine.step(&commands);
        metrics.push(&engine);
        let m = &engine.state().metrics;
        min_d = min_d.min(m.d_min);
        if engine.phase() == Phase::Twist || (engine.phase() == Phase::Done && max_delta.is_some()) {
            max_delta = Some(max_delta.map_or(m.delta_deg, |d| d.max(m.delta_deg)));
        }
    }
    let state = engine.state();
    let outcome = match state.phase {
        Phase::Done => Outcome::Done,
        Phase::Aborted => Outcome::Aborted,
        _ => Outcome::Incomplete,
    };
    let summary = RunSummary {
        outcome,
        final_phase: state.phase,
        ticks: state.tick,
        simulated_seconds: state.tick as f64 / config.tick_rate,
        final_theta_t_deg: state.metrics.theta_t_deg,
        min_d_min: min_d,
        max_delta_in_twist_deg: max_delta,
        abort: state.abort.as_ref().map(|a| a.to_string()),
    };
    Ok(HeadlessRun {
        summary,
        metrics,
        engine,
    })
}
