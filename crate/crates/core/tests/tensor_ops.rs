mod common;

use common::seeded;
use gedi_core::tensor::sweep::{layer_sweep, LAYER_TOLERANCE};
use gedi_core::tensor::{grad_check, CoordinateSelection, Graph, ParamId, ParamStore, Scalar, Tensor, Var};
use proptest::prelude::*;
use rand::Rng;

fn random_tensor<T: Scalar, R: Rng>(shape: &[usize], rng: &mut R) -> Tensor<T> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect()).unwrap()
}

#[test]
fn dense_trivial_cases() {
    let p = ParamStore::<f64>::new();
    let mut g = Graph::new(&p);
    let x = g.input(Tensor::new(&[2, 3], vec![1.0, 2.0, 3.0, -4.0, 5.0, -6.0]).unwrap());
    let eye = g.input(Tensor::new(&[3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap());
    let zero_b = g.input(Tensor::zeros(&[3]));
    let y = g.dense(x, eye, zero_b).unwrap();
    assert_eq!(g.value(y).data(), g.value(x).data());

    let zx = g.input(Tensor::zeros(&[4, 2]));
    let w = g.input(Tensor::new(&[2, 3], vec![1.0; 6]).unwrap());
    let b = g.input(Tensor::new(&[3], vec![0.5, -1.0, 2.0]).unwrap());
    let y = g.dense(zx, w, b).unwrap();
    assert_eq!(g.value(y).data(), [0.5, -1.0, 2.0].repeat(4).as_slice());
}

#[test]
fn relu_pool_and_norm_trivial_cases() {
    let p = ParamStore::<f64>::new();
    let mut g = Graph::new(&p);
    let neg = g.input(Tensor::new(&[2, 2], vec![-1.0, -0.5, -3.0, -1e-9]).unwrap());
    let r = g.relu(neg);
    assert!(g.value(r).data().iter().all(|&v| v == 0.0));

    let one = g.input(Tensor::new(&[1, 1, 3], vec![0.3, -2.0, 7.0]).unwrap());
    let pooled = g.max_pool_points(one).unwrap();
    assert_eq!(g.value(pooled).data(), &[0.3, -2.0, 7.0]);

    let v = g.input(Tensor::new(&[1, 2], vec![3.0, 4.0]).unwrap());
    let n = g.l2_normalize(v, 1e-12);
    let d = g.value(n).data();
    assert!((d[0] - 0.6).abs() < 1e-15 && (d[1] - 0.8).abs() < 1e-15);

    let z = g.input(Tensor::zeros(&[1, 4]));
    let n = g.l2_normalize(z, 1e-12);
    assert!(g.value(n).data().iter().all(|&v| v == 0.0));
}

#[test]
fn max_pool_matches_channel_scan_and_breaks_ties_low() {
    let mut rng = seeded(40);
    for _ in 0..100 {
        let (b, p, c) = (rng.random_range(1..4), rng.random_range(1..9), rng.random_range(1..6));
        let mut params = ParamStore::<f64>::new();
        // Values on a coarse grid so ties are frequent.
        let data: Vec<f64> = (0..b * p * c).map(|_| rng.random_range(-3..3) as f64).collect();
        let id = params.add("x", Tensor::new(&[b, p, c], data.clone()).unwrap()).unwrap();
        let coeffs: Vec<f64> = (0..b * c).map(|_| rng.random_range(0.5..1.5)).collect();
        let mut g = Graph::new(&params);
        let x = g.param(id);
        let y = g.max_pool_points(x).unwrap();
        let out = g.value(y).data().to_vec();
        let loss = g.dot_const(y, coeffs.clone()).unwrap();
        let grads = g.backward(loss).unwrap();
        let grad = grads.get(id).unwrap();
        for bi in 0..b {
            for ch in 0..c {
                let column: Vec<f64> = (0..p).map(|k| data[(bi * p + k) * c + ch]).collect();
                let max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(out[bi * c + ch], max);
                let first = column.iter().position(|&v| v == max).unwrap();
                for k in 0..p {
                    let expected = if k == first { coeffs[bi * c + ch] } else { 0.0 };
                    assert_eq!(grad[(bi * p + k) * c + ch], expected);
                }
            }
        }
    }
}

#[test]
fn dropout_keeps_the_expected_fraction() {
    let p = ParamStore::<f32>::new();
    let mut g = Graph::new(&p);
    let n = 1_000_000;
    let x = g.input(Tensor::new(&[1000, 1000], vec![1.0f32; n]).unwrap());
    let y = g.dropout(x, 0.3, true, &mut seeded(41));
    let kept = g.value(y).data().iter().filter(|&&v| v != 0.0).count() as f64 / n as f64;
    assert!((kept - 0.7).abs() <= 0.005, "kept {kept}");
    assert!(g.value(y).data().iter().all(|&v| v == 0.0 || (v - 1.0 / 0.7).abs() < 1e-6));

    let same = g.dropout(x, 0.0, true, &mut seeded(41));
    assert_eq!(g.value(same).data(), g.value(x).data());
    let eval = g.dropout(x, 0.3, false, &mut seeded(41));
    assert_eq!(g.value(eval).data(), g.value(x).data());
}

fn dense_readout<T: Scalar>(g: &mut Graph<'_, T>, ids: [ParamId; 3], coeffs: &[f64]) -> Var {
    let (x, w, b) = (g.param(ids[0]), g.param(ids[1]), g.param(ids[2]));
    let y = g.dense(x, w, b).unwrap();
    g.dot_const(y, coeffs.iter().map(|&c| T::lit(c)).collect()).unwrap()
}

/// The 32-bit backward pass against central differences taken on the same
/// 32-bit parameter values with 64-bit evaluation.
#[test]
fn dense_gradients_in_f32() {
    let mut rng = seeded(42);
    for _ in 0..20 {
        let (rows, cin, cout) = (rng.random_range(1..6), rng.random_range(1..6), rng.random_range(1..6));
        let mut p = ParamStore::<f32>::new();
        let ids = [
            p.add("x", random_tensor(&[rows, cin], &mut rng)).unwrap(),
            p.add("w", random_tensor(&[cin, cout], &mut rng)).unwrap(),
            p.add("b", random_tensor(&[cout], &mut rng)).unwrap(),
        ];
        let coeffs: Vec<f64> = (0..rows * cout).map(|_| rng.random_range(-1.0..1.0) as f32 as f64).collect();
        let analytic = {
            let mut g = Graph::new(&p);
            let out = dense_readout(&mut g, ids, &coeffs);
            g.backward(out).unwrap()
        };
        let mut wide = p.cast::<f64>();
        let eps = 1e-3;
        for id in ids {
            for k in 0..wide.value(id).numel() {
                let orig = wide.value(id).data()[k];
                let mut eval = |v: f64| {
                    wide.value_mut(id).data_mut()[k] = v;
                    let mut g = Graph::new(&wide);
                    let out = dense_readout(&mut g, ids, &coeffs);
                    g.scalar_value(out)
                };
                let fd = (eval(orig + eps) - eval(orig - eps)) / (2.0 * eps);
                wide.value_mut(id).data_mut()[k] = orig;
                let a = analytic.get(id).unwrap()[k] as f64;
                let rel = (a - fd).abs() / fd.abs().max(1e-6);
                assert!(rel < 1e-3, "{} [{k}]: analytic {a}, numeric {fd}", p.name(id));
            }
        }
    }
}

#[test]
fn gradcheck_trivial_cases() {
    let mut rng = seeded(43);
    let mut p = ParamStore::<f64>::new();
    let x = p.add("x", random_tensor(&[3, 4], &mut rng)).unwrap();
    let coeffs: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
    let linear = grad_check(
        &mut p,
        |g| {
            let xv = g.param(x);
            g.dot_const(xv, coeffs.clone())
        },
        1e-6,
        CoordinateSelection::All,
    )
    .unwrap();
    assert!(linear.max_relative_error < 1e-6);

    let mut p = ParamStore::<f64>::new();
    let far: Vec<f64> = (0..12).map(|i| if i % 2 == 0 { 0.5 } else { -0.5 } + rng.random_range(-0.2..0.2)).collect();
    let x = p.add("x", Tensor::new(&[3, 4], far).unwrap()).unwrap();
    let relu = grad_check(
        &mut p,
        |g| {
            let xv = g.param(x);
            let y = g.relu(xv);
            g.dot_const(y, coeffs.clone())
        },
        1e-6,
        CoordinateSelection::All,
    )
    .unwrap();
    assert!(relu.max_relative_error < 1e-4);
}

#[test]
fn composed_graph_gradients() {
    let mut rng = seeded(44);
    for _ in 0..10 {
        let mut p = ParamStore::<f64>::new();
        let x = p.add("x", random_tensor(&[2, 6, 3], &mut rng)).unwrap();
        let w = p.add("w", random_tensor(&[3, 5], &mut rng)).unwrap();
        let b = p.add("b", random_tensor(&[5], &mut rng)).unwrap();
        let coeffs: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let report = grad_check(
            &mut p,
            |g| {
                let (xv, wv, bv) = (g.param(x), g.param(w), g.param(b));
                let h = g.dense(xv, wv, bv)?;
                let h = g.relu(h);
                let h = g.max_pool_points(h)?;
                let h = g.l2_normalize(h, 1e-12);
                g.dot_const(h, coeffs.clone())
            },
            1e-6,
            CoordinateSelection::All,
        )
        .unwrap();
        assert!(report.max_relative_error < 1e-2, "{report:?}");
    }
}

#[test]
fn layer_sweep_passes_for_many_seeds() {
    for seed in 0..10 {
        for r in layer_sweep(seed).unwrap() {
            assert!(r.passed(LAYER_TOLERANCE), "seed {seed}: {r:?}");
        }
    }
}

#[test]
fn graphs_are_deterministic() {
    let mut rng = seeded(45);
    let mut p = ParamStore::<f32>::new();
    let x = p.add("x", random_tensor(&[4, 16, 8], &mut rng)).unwrap();
    let w = p.add("w", random_tensor(&[8, 32], &mut rng)).unwrap();
    let b = p.add("b", random_tensor(&[32], &mut rng)).unwrap();
    let run = || {
        let mut g = Graph::new(&p);
        let (xv, wv, bv) = (g.param(x), g.param(w), g.param(b));
        let h = g.dense(xv, wv, bv).unwrap();
        let h = g.relu(h);
        let h = g.max_pool_points(h).unwrap();
        let h = g.l2_normalize(h, 1e-12);
        let s = g.sum_squares(h);
        let grads = g.backward(s).unwrap();
        (g.value(h).data().to_vec(), grads.get(w).unwrap().to_vec())
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn l2_rows_are_unit(data in prop::collection::vec(-10.0f64..10.0, 4..40)) {
        let rows = data.len() / 4;
        let p = ParamStore::<f64>::new();
        let mut g = Graph::new(&p);
        let x = g.input(Tensor::new(&[rows, 4], data[..rows * 4].to_vec()).unwrap());
        let y = g.l2_normalize(x, 1e-12);
        for r in 0..rows {
            let src: f64 = g.value(x).row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
            let n: f64 = g.value(y).row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
            if src >= 1e-12 {
                prop_assert!((n - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unit_quaternion_rows_have_unit_norm(data in prop::collection::vec(-5.0f64..5.0, 4..40)) {
        let rows = data.len() / 4;
        let p = ParamStore::<f64>::new();
        let mut g = Graph::new(&p);
        let x = g.input(Tensor::new(&[rows, 4], data[..rows * 4].to_vec()).unwrap());
        let q = g.unit_quaternion(x).unwrap();
        for r in 0..rows {
            let n: f64 = g.value(q).row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() < 1e-6);
        }
    }
}
