use nalgebra::{Isometry3, Point3, Rotation3, Translation3, Unit, UnitQuaternion, Vector3};
use proptest::prelude::*;

use twistarm::kinematics::Pose;
use twistarm::object_model::{
    alignment_error, angle_between, pendent_angle, update_object, AlignmentVariant, Grasp, ObjectError, TwistObject,
};

fn held_by_right(stiffness: f64) -> TwistObject {
    let mut obj = TwistObject::new(0.2, stiffness, Vector3::new(0.4, 0.0, 0.3), &Vector3::y()).unwrap();
    obj.ends[0].grasp = Grasp::Right;
    obj
}

fn gripper(position: Vector3<f64>, z: Vector3<f64>) -> Pose {
    Pose::from_axis(position, &z, &Vector3::new(0.0, 0.0, -1.0))
}

fn unit() -> impl Strategy<Value = Vector3<f64>> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_map(|(x, y, z)| Vector3::new(x, y, z))
        .prop_filter("nonzero", |v| v.norm() > 1e-2)
        .prop_map(|v| v.normalize())
}

fn rigid() -> impl Strategy<Value = Isometry3<f64>> {
    (unit(), -3.1..3.1f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(axis, angle, x, y, z)| {
        Isometry3::from_parts(
            Translation3::new(x, y, z),
            UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle),
        )
    })
}

fn transformed(p: &Pose, t: &Isometry3<f64>) -> Pose {
    Pose::from_isometry(&(t * p.to_isometry()))
}

#[test]
fn rigid_object_does_not_droop() {
    let obj = held_by_right(1.0);
    let pose = gripper(obj.p1(), Vector3::y());
    assert_eq!(pendent_angle(&obj, &pose).unwrap(), 0.0);
    let next = update_object(&obj, &Pose::identity(), &pose, 0.01).unwrap();
    assert!((next.p2() - (obj.p1() + Vector3::y() * 0.2)).norm() < 1e-15);
}

#[test]
fn limp_object_hangs_straight_down() {
    let obj = held_by_right(0.0);
    let pose = gripper(obj.p1(), Vector3::y());
    assert!((pendent_angle(&obj, &pose).unwrap() - 90.0).abs() < 1e-12);
    let next = update_object(&obj, &Pose::identity(), &pose, 0.01).unwrap();
    assert!((next.p2() - (obj.p1() - Vector3::z() * 0.2)).norm() < 1e-12);
}

#[test]
fn half_stiff_object_droops_by_half() {
    let obj = held_by_right(0.5);
    let pose = gripper(obj.p1(), Vector3::y());
    assert!((pendent_angle(&obj, &pose).unwrap() - 45.0).abs() < 1e-12);
    let next = update_object(&obj, &Pose::identity(), &pose, 0.01).unwrap();
    let expected = obj.p1() + (Vector3::y() - Vector3::z()).normalize() * 0.2;
    assert!((next.p2() - expected).norm() < 1e-12);
    assert!((next.axis().norm() - 0.2).abs() < 1e-15);
}

#[test]
fn pointing_down_already_is_not_drooped_further() {
    let obj = held_by_right(0.0);
    let pose = gripper(obj.p1(), -Vector3::z());
    assert_eq!(pendent_angle(&obj, &pose).unwrap(), 0.0);
}

#[test]
fn pendent_model_needs_one_grasped_end() {
    let obj = TwistObject::new(0.2, 0.5, Vector3::zeros(), &Vector3::x()).unwrap();
    assert!(pendent_angle(&obj, &Pose::identity()).is_err());
}

#[test]
fn overstretch_is_detected() {
    let mut obj = held_by_right(0.5);
    obj.ends[1].grasp = Grasp::Left;
    let right = gripper(obj.p1(), Vector3::y());
    let ok = gripper(obj.p1() + Vector3::y() * 0.205, Vector3::y());
    assert!(update_object(&obj, &ok, &right, 0.01).is_ok());
    let far = gripper(obj.p1() + Vector3::y() * 0.25, Vector3::y());
    assert!(matches!(update_object(&obj, &far, &right, 0.01), Err(ObjectError::Overstretch { .. })));
}

#[test]
fn alignment_variants_measure_the_right_angles() {
    let obj = {
        let mut o = held_by_right(0.5);
        o.ends[1].grasp = Grasp::Left;
        o.ends[1].point = o.p1() + Vector3::y() * 0.2;
        o
    };
    let right = gripper(obj.p1(), Vector3::y());
    let tilt = Rotation3::from_axis_angle(&Vector3::x_axis(), 12f64.to_radians());
    let left = gripper(obj.p2(), tilt * Vector3::y());
    let axis_to_axis = alignment_error(&right, &left, &obj, AlignmentVariant::AxisToAxis).unwrap();
    assert!((axis_to_axis.degrees - 12.0).abs() < 1e-9);
    let grip_line = alignment_error(&right, &left, &obj, AlignmentVariant::GripLineToObject).unwrap();
    assert!(grip_line.degrees < 1e-9);
    let axis_to_object = alignment_error(&right, &left, &obj, AlignmentVariant::AxisToObject).unwrap();
    assert!(axis_to_object.degrees < 1e-9);
}

#[test]
fn stiffness_threshold_picks_the_variant() {
    assert_eq!(AlignmentVariant::for_stiffness(0.7), AlignmentVariant::GripLineToObject);
    assert_eq!(AlignmentVariant::for_stiffness(0.6999), AlignmentVariant::AxisToAxis);
}

proptest! {
    #[test]
    fn delta_is_symmetric_and_bounded(u in unit(), v in unit()) {
        let a = angle_between(&u, &v).unwrap();
        let b = angle_between(&v, &u).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!((0.0..=180.0).contains(&a));
        prop_assert!((angle_between(&u, &-v).unwrap() - (180.0 - a)).abs() < 1e-9);
    }

    #[test]
    fn delta_is_rigid_invariant(zr in unit(), zl in unit(), t in rigid(), stiff in proptest::bool::ANY) {
        let mut obj = held_by_right(if stiff { 0.9 } else { 0.3 });
        obj.ends[1].grasp = Grasp::Left;
        obj.ends[1].point = obj.p1() + zr * 0.2;
        let right = gripper(obj.p1(), zr);
        let left = gripper(obj.p2() + Vector3::new(0.01, -0.02, 0.0), zl);
        let variant = AlignmentVariant::for_stiffness(obj.stiffness);
        let before = alignment_error(&right, &left, &obj, variant).unwrap().degrees;
        let mut moved = obj.clone();
        for end in moved.ends.iter_mut() {
            end.point = t.transform_point(&Point3::from(end.point)).coords;
        }
        let after = alignment_error(&transformed(&right, &t), &transformed(&left, &t), &moved, variant).unwrap().degrees;
        prop_assert!((before - after).abs() < 1e-6, "{} vs {}", before, after);
    }

    #[test]
    fn droop_decreases_with_stiffness(s1 in 0.0..=1.0f64, s2 in 0.0..=1.0f64, z in unit()) {
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let pose = gripper(Vector3::new(0.4, 0.0, 0.3), z);
        let soft = pendent_angle(&held_by_right(lo), &pose).unwrap();
        let stiff = pendent_angle(&held_by_right(hi), &pose).unwrap();
        prop_assert!(stiff <= soft + 1e-12);
        prop_assert!((0.0..=90.0 + 1e-12).contains(&soft));
    }

    #[test]
    fn grasped_ends_follow_their_grippers_exactly(p in (-1.0..1.0f64, -1.0..1.0f64, 0.0..1.0f64), z in unit(), both in proptest::bool::ANY) {
        let mut obj = held_by_right(0.4);
        let right = gripper(Vector3::new(p.0, p.1, p.2), z);
        let left = gripper(right.position + z * 0.2, z);
        if both {
            obj.ends[1].grasp = Grasp::Left;
        }
        let next = update_object(&obj, &left, &right, 0.01).unwrap();
        prop_assert_eq!(next.ends[0].point, right.position);
        if both {
            prop_assert_eq!(next.ends[1].point, left.position);
        } else {
            prop_assert!((next.axis().norm() - 0.2).abs() < 1e-12);
        }
    }
}
