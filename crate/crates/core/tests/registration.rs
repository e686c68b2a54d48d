mod common;

use common::*;
use gedi_core::evaluation::{rre, rte};
use gedi_core::registration::*;
use gedi_core::{Mat3, Point3, RigidTransform, Vec3};
use rand::Rng;

fn random_transform<R: Rng>(rng: &mut R) -> RigidTransform {
    RigidTransform::new(random_rotation(rng), random_points(1, 3.0, rng)[0]).unwrap()
}

#[test]
fn mutual_nn_matches_double_argmin() {
    let mut rng = seeded(80);
    for _ in 0..100 {
        let d = rng.random_range(1..20);
        let fa: Vec<Vec<f32>> = (0..rng.random_range(1..80)).map(|_| random_unit(d, &mut rng)).collect();
        let fb: Vec<Vec<f32>> = (0..rng.random_range(1..80)).map(|_| random_unit(d, &mut rng)).collect();
        let got: Vec<(usize, usize)> =
            mutual_nearest_neighbors(&fa, &fb).unwrap().matches.iter().map(|m| (m.a, m.b)).collect();
        assert_eq!(got, mutual_nn(&fa, &fb));
    }
}

#[test]
fn mutual_nn_ties_go_to_the_first_index() {
    let fa = vec![vec![1.0f32, 0.0]];
    let fb = vec![vec![0.0f32, 1.0], vec![0.0, -1.0]];
    let m = mutual_nearest_neighbors(&fa, &fb).unwrap();
    assert_eq!(m.matches.iter().map(|m| (m.a, m.b)).collect::<Vec<_>>(), vec![(0, 0)]);
}

#[test]
fn noise_free_correspondences_are_recovered_exactly() {
    let mut rng = seeded(81);
    for trial in 0..100 {
        let t = random_transform(&mut rng);
        let (a, b, ms) = synthetic_matches(100, 0.0, 0.0, &t, &mut rng);
        let res = ransac_register(&ms, &a, &b, &RansacConfig::new(0.05, trial)).unwrap();
        assert!(rte(&t, &res.transform) < 1e-6);
        assert!(rre(&t.rotation, &res.transform.rotation).degrees < 1e-6);
    }
}

#[test]
fn ransac_survives_half_outliers() {
    let mut rng = seeded(82);
    let mut ok = 0;
    for trial in 0..100 {
        let t = random_transform(&mut rng);
        let (a, b, ms) = synthetic_matches(200, 0.5, 0.005, &t, &mut rng);
        let res = ransac_register(&ms, &a, &b, &RansacConfig::new(0.05, trial)).unwrap();
        if rte(&t, &res.transform) < 2.0 && rre(&t.rotation, &res.transform.rotation).degrees < 5.0 {
            ok += 1;
        }
    }
    assert!(ok >= 95, "{ok}/100");
}

fn residual(r: &Mat3, pa: &[Point3], pb: &[Point3]) -> f64 {
    // Best translation for a fixed rotation maps centroid onto centroid.
    let n = pa.len() as f64;
    let ca = pa.iter().fold(Vec3::ZERO, |s, &p| s + p) / n;
    let cb = pb.iter().fold(Vec3::ZERO, |s, &p| s + p) / n;
    let t = ca - r.mul_vec(cb);
    pa.iter().zip(pb).map(|(&a, &b)| (a - (r.mul_vec(b) + t)).norm_squared()).sum()
}

#[test]
fn kabsch_rotation_is_locally_optimal() {
    let mut rng = seeded(83);
    for _ in 0..50 {
        let t = random_transform(&mut rng);
        let (a, b, _) = synthetic_matches(30, 0.0, 0.05, &t, &mut rng);
        let est = kabsch(a.points(), b.points()).unwrap();
        let best = residual(&est.rotation, a.points(), b.points());
        for _ in 0..20 {
            let axis = Vec3::from_array(std::array::from_fn(|_| rng.random_range(-1.0..1.0))).normalized().unwrap();
            let q = Mat3::from_axis_angle(axis, 0.1f64.to_radians());
            for perturbed in [q.mul_mat(&est.rotation), est.rotation.mul_mat(&q)] {
                assert!(residual(&perturbed, a.points(), b.points()) >= best);
            }
        }
    }
}

#[test]
fn kabsch_returns_proper_rotations_on_mirrored_noise() {
    let mut rng = seeded(84);
    for _ in 0..100 {
        let pa = random_points(10, 1.0, &mut rng);
        let pb: Vec<Point3> =
            pa.iter().map(|p| Vec3::new(-p.x, p.y, p.z) + random_points(1, 0.1, &mut rng)[0]).collect();
        let est = kabsch(&pa, &pb).unwrap();
        assert!((est.rotation.determinant() - 1.0).abs() < 1e-9);
        assert!(est.rotation.orthonormality_error() < 1e-9);
    }
}

#[test]
fn reported_inliers_satisfy_the_threshold() {
    let mut rng = seeded(85);
    for trial in 0..20 {
        let t = random_transform(&mut rng);
        let (a, b, ms) = synthetic_matches(150, 0.6, 0.01, &t, &mut rng);
        let cfg = RansacConfig::new(0.03, trial);
        let res = ransac_register(&ms, &a, &b, &cfg).unwrap();
        let mut expected = Vec::new();
        for (k, m) in ms.matches.iter().enumerate() {
            let d = a.points()[m.a].distance(res.transform.apply(b.points()[m.b]));
            if d <= cfg.threshold {
                expected.push(k);
            }
        }
        assert_eq!(res.inliers, expected);
    }
}

#[test]
fn fixed_seed_gives_identical_results() {
    let mut rng = seeded(86);
    let t = random_transform(&mut rng);
    let (a, b, ms) = synthetic_matches(200, 0.7, 0.01, &t, &mut rng);
    let cfg = RansacConfig::new(0.05, 9);
    assert_eq!(ransac_register(&ms, &a, &b, &cfg).unwrap(), ransac_register(&ms, &a, &b, &cfg).unwrap());
}

#[test]
fn random_matches_give_a_low_inlier_ratio() {
    let mut rng = seeded(87);
    for trial in 0..20 {
        let t = random_transform(&mut rng);
        let (a, b, ms) = synthetic_matches(200, 1.0, 0.0, &t, &mut rng);
        let res = ransac_register(&ms, &a, &b, &RansacConfig::new(0.05, trial)).unwrap();
        assert!(res.inlier_ratio() < 3.0 / 200.0 + 0.05, "ratio {}", res.inlier_ratio());
    }
}
