use nalgebra::{Matrix3, Matrix4, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twistarm::kinematics::{IkOptions, JointConfig, KinematicChain, KinematicsError, Pose};

fn chains() -> [KinematicChain; 2] {
    [KinematicChain::default_left(), KinematicChain::default_right()]
}

fn random_config(chain: &KinematicChain, rng: &mut impl Rng) -> JointConfig {
    chain
        .joints()
        .iter()
        .map(|j| rng.random_range(j.min..=j.max))
        .collect::<Vec<_>>()
        .into()
}

// Rodrigues written out by hand so the oracle shares no rotation code with the chain.
fn rodrigues(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = axis.normalize();
    let skew = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Matrix3::identity() + skew * angle.sin() + skew * skew * (1.0 - angle.cos())
}

fn homogeneous(r: Matrix3<f64>, t: Vector3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
    m
}

fn oracle_fk(chain: &KinematicChain, q: &JointConfig) -> Matrix4<f64> {
    let mut t = chain.base().to_homogeneous();
    for (joint, &angle) in chain.joints().iter().zip(q.as_slice()) {
        t = t * homogeneous(rodrigues(&joint.axis, angle), Vector3::zeros()) * joint.link.to_homogeneous();
    }
    t
}

#[test]
fn forward_kinematics_matches_matrix_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for chain in chains() {
        for _ in 0..200 {
            let q = random_config(&chain, &mut rng);
            let expected = oracle_fk(&chain, &q);
            let got = chain.forward_kinematics(&q).unwrap().to_isometry().to_homogeneous();
            assert!((expected - got).abs().max() < 1e-12, "{}: {expected} vs {got}", chain.name());
        }
    }
}

#[test]
fn zero_configuration_stacks_links_vertically() {
    let chain = KinematicChain::default_right();
    let pose = chain.forward_kinematics(&JointConfig::zeros(7)).unwrap();
    let height = 0.2 + 0.11 + 0.17 + 0.10 + 0.15 + 0.08 + 0.07 + 0.07;
    assert!((pose.position - Vector3::new(0.0, -0.2, height)).norm() < 1e-12);
    assert!(pose.angle_to(&Pose::new(pose.position, Default::default())) < 1e-12);
}

#[test]
fn left_gripper_is_flipped() {
    let chain = KinematicChain::default_left();
    let pose = chain.forward_kinematics(&JointConfig::zeros(7)).unwrap();
    assert!((pose.z_axis() + Vector3::z()).norm() < 1e-12);
}

#[test]
fn joint_positions_end_at_the_end_effector() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for chain in chains() {
        let q = random_config(&chain, &mut rng);
        let points = chain.joint_positions(&q).unwrap();
        assert_eq!(points.len(), chain.joint_count() + 1);
        assert_eq!(points[0], chain.base().translation.vector);
        assert_eq!(*points.last().unwrap(), chain.forward_kinematics(&q).unwrap().position);
    }
}

#[test]
fn point_i_depends_only_on_earlier_joints() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let chain = KinematicChain::default_right();
    let q = random_config(&chain, &mut rng);
    let before = chain.joint_positions(&q).unwrap();
    for j in 0..chain.joint_count() {
        let mut moved = q.clone();
        moved[j] = (moved[j] + 0.3).min(chain.joints()[j].max);
        let after = chain.joint_positions(&moved).unwrap();
        for i in 0..=j {
            assert_eq!(before[i], after[i], "point {i} moved with joint {j}");
        }
    }
}

fn rotation_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let angle = cos.acos();
    let v = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    if angle < 1e-12 {
        v / 2.0
    } else {
        v * (angle / (2.0 * angle.sin()))
    }
}

/// Largest per-column relative error between the analytic Jacobian and
/// central differences of the forward kinematics.
fn jacobian_fd_error(chain: &KinematicChain, q: &JointConfig) -> f64 {
    let h = 1e-6;
    let jac = chain.jacobian(q).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..chain.joint_count() {
        let (mut plus, mut minus) = (q.clone(), q.clone());
        plus[i] += h;
        minus[i] -= h;
        let tp = oracle_fk(chain, &plus);
        let tm = oracle_fk(chain, &minus);
        let dp = (tp.fixed_view::<3, 1>(0, 3) - tm.fixed_view::<3, 1>(0, 3)) / (2.0 * h);
        let rp: Matrix3<f64> = tp.fixed_view::<3, 3>(0, 0).into();
        let rm: Matrix3<f64> = tm.fixed_view::<3, 3>(0, 0).into();
        let dw = rotation_log(&(rp * rm.transpose())) / (2.0 * h);
        let analytic: Vec<f64> = jac.linear.column(i).iter().chain(jac.angular.column(i).iter()).copied().collect();
        let numeric: Vec<f64> = dp.iter().chain(dw.iter()).copied().collect();
        let diff = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1.0);
        worst = worst.max(diff / scale);
    }
    worst
}

#[test]
fn jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for chain in chains() {
        for _ in 0..100 {
            let q = random_config(&chain, &mut rng);
            let err = jacobian_fd_error(&chain, &q);
            assert!(err <= 1e-5, "{}: relative error {err:e}", chain.name());
        }
    }
}

#[test]
fn ik_recovers_reachable_poses() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let chain = KinematicChain::default_right();
    let opts = IkOptions::default().with_tol(1e-6);
    let mut solved = 0;
    for _ in 0..50 {
        let q = random_config(&chain, &mut rng);
        let target = chain.forward_kinematics(&q).unwrap();
        let mut seed = q.clone();
        for i in 0..seed.len() {
            seed[i] += rng.random_range(-0.15..0.15);
        }
        chain.clamp(&mut seed);
        if let Ok(sol) = chain.inverse_kinematics(&target, &seed, &opts) {
            solved += 1;
            assert!(sol.residual <= 1e-6);
            assert!(chain.forward_kinematics(&sol.config).unwrap().weighted_error(&target) <= 1e-6);
            assert!(chain.within_limits(&sol.config));
        }
    }
    assert!(solved >= 45, "only {solved}/50 nearby targets solved");
}

#[test]
fn ik_reports_out_of_reach_targets() {
    let chain = KinematicChain::default_right();
    let far = Pose::new(Vector3::new(3.0, 0.0, 0.0), Default::default());
    match chain.inverse_kinematics(&far, &JointConfig::zeros(7), &IkOptions::default()) {
        Err(KinematicsError::Unreachable { best, .. }) => assert!(chain.within_limits(&best)),
        other => panic!("expected unreachable, got {other:?}"),
    }
}

#[test]
fn wrong_length_configs_are_rejected() {
    let chain = KinematicChain::default_right();
    assert!(matches!(
        chain.forward_kinematics(&JointConfig::zeros(6)),
        Err(KinematicsError::LengthMismatch { expected: 7, actual: 6 })
    ));
}

#[test]
fn chain_file_errors_are_reported() {
    let bad_axis = r#"
        name = "x"
        [[joints]]
        axis = [0.0, 0.0, 2.0]
        limits = [-1.0, 1.0]
        translation = [0.0, 0.0, 0.1]
    "#;
    assert!(KinematicChain::from_toml_str(bad_axis).is_err());
    let bad_count = r#"
        name = "x"
        joint_count = 2
        [[joints]]
        axis = [0.0, 0.0, 1.0]
        limits = [-1.0, 1.0]
        translation = [0.0, 0.0, 0.1]
    "#;
    assert!(KinematicChain::from_toml_str(bad_count).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ik_never_leaves_joint_limits(seed in any::<u64>(), x in 0.1..0.6f64, y in -0.5..0.3f64, z in 0.0..0.7f64) {
        let chain = KinematicChain::default_right();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = random_config(&chain, &mut rng);
        let target = Pose::from_axis(Vector3::new(x, y, z), &Vector3::y(), &Vector3::new(0.0, 0.0, -1.0));
        match chain.inverse_kinematics(&target, &start, &IkOptions::default()) {
            Ok(sol) => prop_assert!(chain.within_limits(&sol.config)),
            Err(KinematicsError::Unreachable { best, .. }) => prop_assert!(chain.within_limits(&best)),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn clamp_is_idempotent_and_within_limits(values in proptest::collection::vec(-10.0..10.0f64, 7)) {
        let chain = KinematicChain::default_left();
        let mut q = JointConfig::from(values);
        chain.clamp(&mut q);
        prop_assert!(chain.within_limits(&q));
        let once = q.clone();
        chain.clamp(&mut q);
        prop_assert_eq!(once, q);
    }
}
