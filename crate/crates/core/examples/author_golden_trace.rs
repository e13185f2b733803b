//! Drives the left arm through alignment and twisting with a scripted
//! operator and writes the commands it sent as a replayable trace.
//!
//! The operator is closed-loop on the simulated slave pose, so the trace
//! it produces is only valid for the scenario it was authored against.
//!
//! cargo run -p twistarm-core --example author_golden_trace -- scenarios/reference.toml scenarios/reference_golden.trace

use std::path::PathBuf;

use nalgebra::{UnitQuaternion, Unit, Vector3};
use twistarm::kinematics::Pose;
use twistarm::object_model::Grasp;
use twistarm::task_engine::{CommandVerdict, LinearPath, Phase, TaskCommand, TaskEngine, TaskSetup};
use twistarm::teleop::{write_trace, MasterCommand};

const LINEAR_STEP: f64 = 0.003;
const ANGULAR_STEP: f64 = 0.025;
const PRE_GRASP_OFFSET: f64 = 0.04;
const TWIST_STEP_DEG: f64 = 1.0;
const MAX_TICKS: u64 = 3000;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Stage {
    PreGrasp,
    Grasp,
    Close,
    Reconstruct,
    Twist,
}

fn main() {
    let mut args = std::env::args().skip(1);
    let scenario = PathBuf::from(args.next().expect("usage: author_golden_trace <scenario> <trace-out>"));
    let out = PathBuf::from(args.next().expect("usage: author_golden_trace <scenario> <trace-out>"));

    let setup = TaskSetup::from_file(&scenario).expect("scenario loads");
    let mut engine = TaskEngine::new(setup).expect("engine starts");
    while engine.phase() != Phase::AlignLeft {
        engine.step(&[]);
        assert!(!engine.phase().is_terminal(), "aborted before alignment: {:?}", engine.state().abort);
    }

    // the device is centered on the slave's pose at engagement
    let device_origin = engine.left_pose().position;
    let to_master = |p: &Pose| Pose::new(p.position - device_origin, p.orientation);

    // engage the clutch where the slave already is
    let engage = MasterCommand {
        tick: engine.tick() + 1,
        pose: to_master(&engine.left_pose()),
        gripper: 0.0,
        clutch: true,
    };
    engine.step(&[TaskCommand::Teleop(engage)]);
    let mut commands = vec![engage];
    let mut stage = Stage::PreGrasp;
    let mut gripper = 0.0;
    // the operator slows down whenever a command is refused
    let mut pace: f64 = 1.0;
    let mut twist_goal: Option<(Vector3<f64>, Pose, f64)> = None;
    while !engine.phase().is_terminal() && engine.tick() < MAX_TICKS {
        let current = engine.left_pose();
        let obj = &engine.world().object;
        let axis = obj.unit_axis().expect("object has extent");
        let grasp = Pose::from_axis(obj.p2(), &axis, &Vector3::new(0.0, 0.0, -1.0));
        let target = match stage {
            Stage::PreGrasp => Pose::new(grasp.position + axis * PRE_GRASP_OFFSET, grasp.orientation),
            Stage::Grasp | Stage::Close => grasp,
            Stage::Reconstruct => engine.scenario().left_twist_pose(),
            Stage::Twist => {
                let (axis, start, angle) = twist_goal.get_or_insert((engine.right_pose().z_axis(), current, 0.0));
                *angle += TWIST_STEP_DEG;
                let spin = UnitQuaternion::from_axis_angle(&Unit::new_normalize(*axis), angle.to_radians());
                Pose::new(start.position, spin * start.orientation)
            }
        };
        let next = if stage == Stage::Twist {
            target
        } else {
            LinearPath::new(current, target, LINEAR_STEP * pace, ANGULAR_STEP * pace).waypoint(1)
        };
        if stage == Stage::Close {
            gripper = 1.0;
        }
        let cmd = MasterCommand {
            tick: engine.tick() + 1,
            pose: to_master(&next),
            gripper,
            clutch: true,
        };
        commands.push(cmd);
        let report = engine.step(&[TaskCommand::Teleop(cmd)]);
        if matches!(report.verdicts[0], CommandVerdict::Rejected { .. }) {
            pace = (pace * 0.5).max(0.05);
        } else {
            pace = (pace * 1.25).min(1.0);
        }

        let reached = |p: &Pose| (engine.left_pose().position - p.position).norm() < 1e-4 && engine.left_pose().angle_to(p) < 1e-3;
        stage = match stage {
            Stage::PreGrasp if reached(&target) => Stage::Grasp,
            Stage::Grasp if reached(&target) => Stage::Close,
            Stage::Close => {
                assert_eq!(engine.world().object.ends[1].grasp, Grasp::Left, "grasp missed: {:?}", report.events);
                Stage::Reconstruct
            }
            Stage::Reconstruct if engine.phase() == Phase::Twist && reached(&target) => Stage::Twist,
            s => s,
        };
    }
    assert_eq!(engine.phase(), Phase::Done, "authoring run ended in {:?}: {:?}", engine.phase(), engine.state().abort);

    let file = std::fs::File::create(&out).expect("trace file");
    write_trace(std::io::BufWriter::new(file), &commands).expect("trace written");
    let m = &engine.state().metrics;
    println!(
        "{} commands, done at tick {}, theta_t {:.3} deg, theta_l {:.3}, theta_r {:.3}",
        commands.len(),
        engine.tick(),
        m.theta_t_deg,
        m.theta_left_deg,
        m.theta_right_deg
    );
}
