mod common;

use std::path::Path;

use common::{reference_scenario, scenario_dir};
use twistarm::task_engine::{LeftTwistSource, Scenario, ScenarioError, TaskSetup};

fn minimal(extra: &str) -> String {
    format!(
        r#"
[arms]
left = "yumi_left.toml"
right = "yumi_right.toml"
left_home = [0.0, 0.6, 0.0, 1.2, 0.0, 0.6, 0.0]
right_home = [0.0, 0.6, 0.0, 1.2, 0.0, 0.6, 0.0]

[object]
length = 0.2
stiffness = 0.5
p1 = [0.35, -0.1, 0.2]
axis = [0.0, 1.0, 0.0]

[task]
hold_position = [0.38, -0.1, 0.32]
hold_axis = [0.0, 1.0, 0.0]
{extra}
"#
    )
}

#[test]
fn reference_scenario_defaults() {
    let s = reference_scenario();
    assert_eq!(s.d_thr(), s.object.length);
    assert_eq!(s.twist.left, LeftTwistSource::Teleop);
    assert!(s.arms.left.is_absolute() || s.arms.left.starts_with(scenario_dir()));
    assert!(s.teleop.trace.as_ref().unwrap().ends_with("reference_golden.trace"));
    let setup = TaskSetup::load(s, None, None).unwrap();
    assert_eq!(setup.left.joint_count(), 7);
}

#[test]
fn relative_paths_resolve_against_the_file() {
    let s = Scenario::from_toml_str(&minimal(""), Path::new("/some/where")).unwrap();
    assert_eq!(s.arms.left, Path::new("/some/where/yumi_left.toml"));
}

#[test]
fn unknown_fields_are_rejected() {
    let text = minimal("typo_field = 3");
    assert!(matches!(Scenario::from_toml_str(&text, &scenario_dir()), Err(ScenarioError::Parse(_))));
}

#[test]
fn twist_plan_must_be_able_to_reach_the_target() {
    let text = minimal("\n[twist]\ntheta_r_deg = -30.0\ntheta_l_deg = 30.0\ntheta_t_deg = 90.0\nrate_deg = 1.0\n");
    assert!(matches!(Scenario::from_toml_str(&text, &scenario_dir()), Err(ScenarioError::Invalid(_))));
}

#[test]
fn bad_object_parameters_are_rejected() {
    for (from, to) in [
        ("stiffness = 0.5", "stiffness = 1.5"),
        ("length = 0.2", "length = 0.0"),
        ("axis = [0.0, 1.0, 0.0]\n\n[task]", "axis = [0.0, 0.0, 0.0]\n\n[task]"),
    ] {
        let text = minimal("").replacen(from, to, 1);
        assert!(Scenario::from_toml_str(&text, &scenario_dir()).is_err(), "{to}");
    }
}

#[test]
fn negative_threshold_is_rejected() {
    let text = minimal("d_thr = -0.1");
    assert!(Scenario::from_toml_str(&text, &scenario_dir()).is_err());
}

#[test]
fn homes_outside_limits_are_rejected() {
    let mut s = Scenario::from_toml_str(&minimal(""), &scenario_dir()).unwrap();
    s.arms.left_home[0] = 10.0;
    assert!(matches!(TaskSetup::load(s, None, None), Err(ScenarioError::Invalid(_))));
}

#[test]
fn missing_chain_file_names_the_path() {
    let mut s = Scenario::from_toml_str(&minimal(""), &scenario_dir()).unwrap();
    s.arms.right = scenario_dir().join("nope.toml");
    match TaskSetup::load(s, None, None) {
        Err(ScenarioError::Chain { path, .. }) => assert!(path.ends_with("nope.toml")),
        other => panic!("expected a chain error, got {other:?}"),
    }
}

#[test]
fn twist_poses_share_the_hold_axis() {
    let s = reference_scenario();
    let hold = s.hold_pose();
    let left = s.left_twist_pose();
    assert!((hold.z_axis() - left.z_axis()).norm() < 1e-12);
    assert!(((left.position - hold.position).norm() - s.object.length).abs() < 1e-12);
}
