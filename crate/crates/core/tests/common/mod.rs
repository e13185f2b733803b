#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::Vector3;

use twistarm::kinematics::Pose;
use twistarm::task_engine::{CommandVerdict, LinearPath, Phase, Scenario, StepReport, TaskCommand, TaskEngine, TaskSetup};
use twistarm::teleop::{read_trace, MasterCommand};

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn reference_scenario() -> Scenario {
    Scenario::load(scenario_dir().join("reference.toml")).unwrap()
}

pub fn setup_from(scenario: Scenario) -> TaskSetup {
    TaskSetup::load(scenario, None, None).unwrap()
}

pub fn golden_trace() -> Vec<MasterCommand> {
    read_trace(scenario_dir().join("reference_golden.trace")).unwrap()
}

/// Steps without commands until `phase` (or a terminal phase) is reached.
pub fn run_until(engine: &mut TaskEngine, phase: Phase, max_ticks: u64) {
    while engine.phase() != phase && !engine.phase().is_terminal() && engine.tick() < max_ticks {
        engine.step(&[]);
    }
    assert_eq!(engine.phase(), phase, "abort: {:?}", engine.state().abort);
}

/// Feeds a trace tick by tick and returns every step report.
pub fn replay(engine: &mut TaskEngine, trace: &[MasterCommand], settle: u64) -> Vec<StepReport> {
    let last = trace.last().map_or(0, |c| c.tick);
    let mut next = 0;
    let mut reports = Vec::new();
    while !engine.phase().is_terminal() && engine.tick() < last + settle {
        let tick = engine.tick() + 1;
        let mut cmds = Vec::new();
        while next < trace.len() && trace[next].tick <= tick {
            cmds.push(TaskCommand::Teleop(trace[next]));
            next += 1;
        }
        reports.push(engine.step(&cmds));
    }
    reports
}

/// Scripted operator for the left arm: walks the slave toward a target in
/// small steps and slows down whenever a command is refused.
pub struct Operator {
    origin: Vector3<f64>,
    pace: f64,
    pub gripper: f64,
}

impl Operator {
    /// Engages the clutch at the slave's current pose.
    pub fn engage(engine: &mut TaskEngine) -> Self {
        let mut op = Self {
            origin: engine.left_pose().position,
            pace: 1.0,
            gripper: 0.0,
        };
        let here = engine.left_pose();
        op.send(engine, &here);
        op
    }

    pub fn send(&mut self, engine: &mut TaskEngine, slave_target: &Pose) -> StepReport {
        let cmd = MasterCommand {
            tick: engine.tick() + 1,
            pose: Pose::new(slave_target.position - self.origin, slave_target.orientation),
            gripper: self.gripper,
            clutch: true,
        };
        engine.step(&[TaskCommand::Teleop(cmd)])
    }

    /// True once the slave sits on `target`.
    pub fn drive_to(&mut self, engine: &mut TaskEngine, target: &Pose, max_ticks: u64) -> bool {
        for _ in 0..max_ticks {
            if engine.phase().is_terminal() {
                return false;
            }
            let current = engine.left_pose();
            if (current.position - target.position).norm() < 1e-4 && current.angle_to(target) < 1e-3 {
                return true;
            }
            let next = LinearPath::new(current, *target, 0.003 * self.pace, 0.025 * self.pace).waypoint(1);
            let report = self.send(engine, &next);
            if matches!(report.verdicts.first(), Some(CommandVerdict::Rejected { .. })) {
                self.pace = (self.pace * 0.5).max(0.05);
            } else {
                self.pace = (self.pace * 1.25).min(1.0);
            }
        }
        false
    }

    /// Approaches P₂ along the object axis and closes the gripper on it.
    pub fn grasp_free_end(&mut self, engine: &mut TaskEngine) {
        let obj = engine.world().object.clone();
        let axis = obj.unit_axis().unwrap();
        let grasp = Pose::from_axis(obj.p2(), &axis, &Vector3::new(0.0, 0.0, -1.0));
        let pre = Pose::new(grasp.position + axis * 0.04, grasp.orientation);
        assert!(self.drive_to(engine, &pre, 400), "pre-grasp not reached");
        assert!(self.drive_to(engine, &grasp, 400), "grasp pose not reached");
        self.gripper = 1.0;
        self.send(engine, &grasp);
    }
}
