mod common;

use common::*;
use gedi_core::geometry::{euler_to_rotation, rotation_to_euler};
use gedi_core::{Mat3, PointCloud, RigidTransform, UnitQuaternion, Vec3};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn index_matches_scan_on_10k_points() {
    let mut rng = seeded(70);
    let pts = random_points(10_000, 5.0, &mut rng);
    for hint in [0.3, 1.0] {
        let cloud = PointCloud::new(pts.clone()).build_spatial_index(hint).unwrap();
        for _ in 0..100 {
            let c = if rng.random_bool(0.5) {
                pts[rng.random_range(0..pts.len())]
            } else {
                random_points(1, 6.0, &mut rng)[0]
            };
            let r = rng.random_range(0.0..1.5);
            assert_eq!(cloud.radius_neighbors(c, r).unwrap(), radius_scan(&pts, c, r));
        }
    }
}

#[test]
fn radius_search_without_index_matches_scan() {
    let mut rng = seeded(71);
    for _ in 0..100 {
        let pts = random_points(rng.random_range(1..500), 1.0, &mut rng);
        let c = random_points(1, 1.2, &mut rng)[0];
        let r = rng.random_range(0.0..1.0);
        assert_eq!(PointCloud::new(pts.clone()).radius_neighbors(c, r).unwrap(), radius_scan(&pts, c, r));
    }
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn quat() -> impl Strategy<Value = UnitQuaternion> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("away from zero", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-2)
        .prop_map(|(w, x, y, z)| UnitQuaternion::new_normalize(w, x, y, z))
}

fn transform() -> impl Strategy<Value = RigidTransform> {
    (quat(), vec3()).prop_map(|(q, t)| RigidTransform::new(q.to_rotation(), t).unwrap())
}

fn mat_diff(a: &Mat3, b: &Mat3) -> f64 {
    a.add(&b.scale(-1.0)).frobenius_norm()
}

fn assert_rotation(r: &Mat3) {
    assert!(r.transpose().mul_mat(r).add(&Mat3::IDENTITY.scale(-1.0)).frobenius_norm() < 1e-9);
    assert!((r.determinant() - 1.0).abs() <= 1e-9);
}

proptest! {
    #[test]
    fn compose_is_associative(a in transform(), b in transform(), c in transform(), p in vec3()) {
        let left = a.compose(&b).compose(&c);
        let right = a.compose(&b.compose(&c));
        prop_assert!(mat_diff(&left.rotation, &right.rotation) < 1e-9);
        prop_assert!((left.translation - right.translation).norm() < 1e-9);
        prop_assert!((left.apply(p) - a.apply(b.apply(c.apply(p)))).norm() < 1e-9);
    }

    #[test]
    fn identity_and_inverse_laws(t in transform(), p in vec3()) {
        for id in [t.compose(&t.inverse()), t.inverse().compose(&t)] {
            prop_assert!(mat_diff(&id.rotation, &Mat3::IDENTITY) < 1e-9);
            prop_assert!(id.translation.norm() < 1e-9);
        }
        prop_assert_eq!(t.compose(&RigidTransform::IDENTITY), t);
        prop_assert!((t.inverse().apply(t.apply(p)) - p).norm() < 1e-9);
        assert_rotation(&t.inverse().rotation);
    }

    #[test]
    fn quaternion_double_cover_is_exact(q in quat()) {
        prop_assert_eq!(q.to_rotation(), q.negated().to_rotation());
        assert_rotation(&q.to_rotation());
    }

    #[test]
    fn euler_rotations_are_orthonormal(ax in -4.0..4.0f64, ay in -4.0..4.0f64, az in -4.0..4.0f64) {
        let r = euler_to_rotation(ax, ay, az);
        assert_rotation(&r);
        let e = rotation_to_euler(&r);
        if !e.gimbal_lock {
            prop_assert!(mat_diff(&euler_to_rotation(e.ax, e.ay, e.az), &r) < 1e-9);
        }
    }

    #[test]
    fn index_agrees_with_scan(seed in 0u64..1000, hint in 0.05..2.0f64, r in 0.0..2.0f64) {
        let mut rng = seeded(seed);
        let pts = random_points(300, 1.0, &mut rng);
        let c = random_points(1, 1.5, &mut rng)[0];
        let cloud = PointCloud::new(pts.clone()).build_spatial_index(hint).unwrap();
        prop_assert_eq!(cloud.radius_neighbors(c, r).unwrap(), radius_scan(&pts, c, r));
    }
}
