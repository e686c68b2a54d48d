//! Finite-difference sweep over every layer of the engine.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{grad_check, CoordinateSelection, Graph, HingeKind, HingeTerm, ParamStore, Tensor, Var};
use crate::error::Result;
use crate::rng;

/// Bound on the relative error of a single layer.
pub const LAYER_TOLERANCE: f64 = 1e-3;
/// Central-difference step used by the sweep.
pub const SWEEP_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub layer: String,
    pub max_relative_error: f64,
    pub coordinates: usize,
}

impl SweepResult {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance
    }
}

/// Uniform values in `±1` that stay at least `gap` away from zero.
fn values<R: Rng>(n: usize, gap: f64, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| loop {
            let v: f64 = rng.random_range(-1.0..1.0);
            if v.abs() >= gap {
                break v;
            }
        })
        .collect()
}

fn tensor<R: Rng>(shape: &[usize], gap: f64, rng: &mut R) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, values(n, gap, rng)).unwrap()
}

type Builder<'a> = dyn for<'g> Fn(&mut Graph<'g, f64>) -> Result<Var> + 'a;

fn check(layer: &str, params: &mut ParamStore<f64>, f: &Builder<'_>) -> Result<SweepResult> {
    let report = grad_check(params, f, SWEEP_EPS, CoordinateSelection::All)?;
    Ok(SweepResult {
        layer: layer.into(),
        max_relative_error: report.max_relative_error,
        coordinates: report.per_param.iter().map(|p| p.1).sum(),
    })
}

/// Checks each layer in isolation, closed by a random linear read-out.
pub fn layer_sweep(seed: u64) -> Result<Vec<SweepResult>> {
    let mut r = rng::seeded(seed);
    let mut out = Vec::new();
    let readout = |g: &mut Graph<'_, f64>, y: Var, seed: u64| -> Result<Var> {
        let n = g.value(y).numel();
        let mut cr = rng::seeded(seed);
        g.dot_const(y, (0..n).map(|_| cr.random_range(-1.0..1.0)).collect())
    };
    let ro = seed.wrapping_add(1);

    let mut p = ParamStore::new();
    let (x, w, b) = (
        p.add("x", tensor(&[2, 5, 4], 0.0, &mut r))?,
        p.add("w", tensor(&[4, 3], 0.0, &mut r))?,
        p.add("b", tensor(&[3], 0.0, &mut r))?,
    );
    out.push(check("dense", &mut p, &|g| {
        let (xv, wv, bv) = (g.param(x), g.param(w), g.param(b));
        let y = g.dense(xv, wv, bv)?;
        readout(g, y, ro)
    })?);

    let mut p = ParamStore::new();
    let x = p.add("x", tensor(&[3, 6], 0.05, &mut r))?;
    out.push(check("relu", &mut p, &|g| {
        let xv = g.param(x);
        let y = g.relu(xv);
        readout(g, y, ro)
    })?);

    let mut p = ParamStore::new();
    let x = p.add("x", tensor(&[2, 7, 3], 0.0, &mut r))?;
    out.push(check("max_pool_points", &mut p, &|g| {
        let xv = g.param(x);
        let y = g.max_pool_points(xv)?;
        readout(g, y, ro)
    })?);

    let mut p = ParamStore::new();
    let x = p.add("x", tensor(&[3, 5], 0.0, &mut r))?;
    out.push(check("l2_normalize", &mut p, &|g| {
        let xv = g.param(x);
        let y = g.l2_normalize(xv, 1e-12);
        readout(g, y, ro)
    })?);

    let mut p = ParamStore::new();
    let x = p.add("x", tensor(&[3, 4], 0.0, &mut r))?;
    out.push(check("unit_quaternion", &mut p, &|g| {
        let xv = g.param(x);
        let y = g.unit_quaternion(xv)?;
        readout(g, y, ro)
    })?);

    let mut p = ParamStore::new();
    let x = p.add("x", tensor(&[4, 5], 0.0, &mut r))?;
    out.push(check("dropout", &mut p, &|g| {
        let xv = g.param(x);
        let y = g.dropout(xv, 0.3, true, &mut rng::seeded(seed ^ 0xD0));
        readout(g, y, ro)
    })?);

    let mut p = ParamStore::new();
    let x = p.add("x", tensor(&[2, 5, 3], 0.0, &mut r))?;
    out.push(check("gather_rows", &mut p, &|g| {
        let xv = g.param(x);
        let y = g.gather_rows(xv, vec![0, 3, 3, 9, 1, 7], &[2, 3])?;
        readout(g, y, ro)
    })?);

    let mut p = ParamStore::new();
    let (a, b) = (p.add("a", tensor(&[2, 3, 4], 0.0, &mut r))?, p.add("b", tensor(&[2, 3, 4], 0.0, &mut r))?);
    out.push(check("sub", &mut p, &|g| {
        let (av, bv) = (g.param(a), g.param(b));
        let y = g.sub(av, bv)?;
        readout(g, y, ro)
    })?);

    let mut p = ParamStore::new();
    let (a, b) = (p.add("a", tensor(&[2, 3, 4], 0.0, &mut r))?, p.add("b", tensor(&[2, 3, 2], 0.0, &mut r))?);
    out.push(check("concat", &mut p, &|g| {
        let (av, bv) = (g.param(a), g.param(b));
        let y = g.concat(av, bv)?;
        readout(g, y, ro)
    })?);

    let mut p = ParamStore::new();
    let (pts, q) = (p.add("points", tensor(&[2, 5, 3], 0.0, &mut r))?, p.add("quat", tensor(&[2, 4], 0.0, &mut r))?);
    out.push(check("quat_rotate", &mut p, &|g| {
        let (pv, qv) = (g.param(pts), g.param(q));
        let u = g.unit_quaternion(qv)?;
        let y = g.quat_rotate(pv, u)?;
        readout(g, y, ro)
    })?);

    let mut p = ParamStore::new();
    let x = p.add("x", tensor(&[3, 4], 0.0, &mut r))?;
    out.push(check("sum_squares", &mut p, &|g| {
        let xv = g.param(x);
        Ok(g.sum_squares(xv))
    })?);

    // Rows sit on a line with known spacing so every hinge is active and
    // away from its kink.
    let mut p = ParamStore::new();
    let mut rows = Vec::new();
    for k in 0..4 {
        rows.extend([k as f64 * 0.5 + r.random_range(-0.05..0.05), r.random_range(-0.05..0.05), 0.1]);
    }
    let x = p.add("x", Tensor::new(&[4, 3], rows)?)?;
    let terms = vec![
        HingeTerm { i: 0, j: 1, margin: 0.1, weight: 0.7, kind: HingeKind::Positive },
        HingeTerm { i: 2, j: 3, margin: 0.2, weight: 1.3, kind: HingeKind::Positive },
        HingeTerm { i: 0, j: 2, margin: 1.4, weight: 0.5, kind: HingeKind::Negative },
        HingeTerm { i: 1, j: 3, margin: 1.4, weight: 0.25, kind: HingeKind::Negative },
    ];
    out.push(check("hinge_loss", &mut p, &|g| {
        let xv = g.param(x);
        g.hinge_loss(xv, terms.clone())
    })?);
    Ok(out)
}
