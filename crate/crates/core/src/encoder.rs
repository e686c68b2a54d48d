//! The descriptor network.
//!
//! A canonical patch of `n` points first goes through a small PointNet that
//! predicts a unit quaternion; the rotated points then pass through local
//! set-abstraction layers (farthest point sampling, ball grouping, a shared
//! MLP and max-pooling), one global set-abstraction layer that pools to a
//! 1024-channel vector, and a head MLP whose output is L2-normalised.
//!
//! Sampling and grouping indices depend only on pairwise distances, so they
//! are computed once per patch on the input coordinates and reused after the
//! quaternion rotation. Points are sorted lexicographically beforehand, which
//! makes the whole network independent of input order.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{quat_to_rotation, UnitQuaternion, Vec3};
use crate::tensor::{
    glorot_uniform, grad_check, CoordinateSelection, GradCheckReport, Graph, ParamId, ParamStore, Scalar, Tensor, Var,
};

/// Width of the global pooled representation.
pub const BOTTLENECK: usize = 1024;
/// Descriptor norms must match 1 within this tolerance.
pub const DESCRIPTOR_NORM_TOLERANCE: f64 = 1e-5;
const L2_EPS: f64 = 1e-12;

/// One local set-abstraction layer. `mlp` lists output widths; the input
/// width is 3 plus the width of the previous layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SetAbstractionConfig {
    pub centroids: usize,
    pub radius: f64,
    pub k: usize,
    pub mlp: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    /// Shared per-point widths of the quaternion network.
    pub qnet_point_mlp: Vec<usize>,
    /// Hidden widths after pooling; a final layer to 4 values is implied.
    pub qnet_head_mlp: Vec<usize>,
    pub use_qnet: bool,
    pub local: Vec<SetAbstractionConfig>,
    /// Widths of the global layer; the last one must be [`BOTTLENECK`].
    pub global_mlp: Vec<usize>,
    /// Hidden widths of the head; a final layer to `d` is implied.
    pub head_mlp: Vec<usize>,
    pub d: usize,
    pub dropout: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            qnet_point_mlp: vec![64, 128, 256],
            qnet_head_mlp: vec![128],
            use_qnet: true,
            local: vec![
                SetAbstractionConfig { centroids: 128, radius: 0.2, k: 32, mlp: vec![64, 64, 128] },
                SetAbstractionConfig { centroids: 32, radius: 0.4, k: 32, mlp: vec![128, 128, 256] },
            ],
            global_mlp: vec![256, 512, BOTTLENECK],
            head_mlp: vec![512, 256],
            d: 32,
            dropout: 0.3,
        }
    }
}

impl EncoderConfig {
    /// Reduced network that trains in minutes on one CPU core.
    pub fn desk(d: usize) -> Self {
        EncoderConfig {
            qnet_point_mlp: vec![32, 64, 128],
            qnet_head_mlp: vec![64],
            use_qnet: true,
            local: vec![
                SetAbstractionConfig { centroids: 32, radius: 0.3, k: 16, mlp: vec![32, 32, 64] },
                SetAbstractionConfig { centroids: 8, radius: 0.6, k: 16, mlp: vec![64, 64, 128] },
            ],
            global_mlp: vec![128, 256, BOTTLENECK],
            head_mlp: vec![256, 128],
            d,
            dropout: 0.3,
        }
    }

    /// Default architecture with halved widths (bottleneck kept) and centroid
    /// counts sized for 64-point patches.
    pub fn halved() -> Self {
        EncoderConfig {
            qnet_point_mlp: vec![32, 64, 128],
            qnet_head_mlp: vec![64],
            use_qnet: true,
            local: vec![
                SetAbstractionConfig { centroids: 32, radius: 0.2, k: 16, mlp: vec![32, 32, 64] },
                SetAbstractionConfig { centroids: 8, radius: 0.4, k: 16, mlp: vec![64, 64, 128] },
            ],
            global_mlp: vec![128, 256, BOTTLENECK],
            head_mlp: vec![256, 128],
            d: 32,
            dropout: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.local.is_empty() {
            return bad("at least one local set-abstraction layer is required".into());
        }
        for (i, sa) in self.local.iter().enumerate() {
            if sa.centroids == 0 || sa.k == 0 || sa.mlp.is_empty() || sa.mlp.contains(&0) {
                return bad(format!("set-abstraction layer {i} has an empty dimension"));
            }
            if !(sa.radius > 0.0 && sa.radius <= 2.0) {
                return bad(format!("set-abstraction layer {i} radius {} outside (0, 2]", sa.radius));
            }
            if i > 0 && sa.centroids > self.local[i - 1].centroids {
                return bad(format!("set-abstraction layer {i} samples more centroids than it receives"));
            }
        }
        if self.global_mlp.last() != Some(&BOTTLENECK) {
            return bad(format!("global layer must end at {BOTTLENECK} channels"));
        }
        let widths = [&self.qnet_point_mlp, &self.qnet_head_mlp, &self.global_mlp, &self.head_mlp];
        if widths.iter().any(|w| w.contains(&0)) || self.qnet_point_mlp.is_empty() || self.d == 0 {
            return bad("zero-width layer".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    /// Smallest patch size the network accepts.
    pub fn min_points(&self) -> usize {
        self.local[0].centroids
    }

    /// Flat name/value records describing the architecture.
    pub fn to_records(&self) -> Vec<(String, f64)> {
        let mut r = Vec::new();
        let list = |r: &mut Vec<(String, f64)>, name: &str, w: &[usize]| {
            r.push((format!("{name}.len"), w.len() as f64));
            for (i, v) in w.iter().enumerate() {
                r.push((format!("{name}.{i}"), *v as f64));
            }
        };
        list(&mut r, "qnet.point", &self.qnet_point_mlp);
        list(&mut r, "qnet.head", &self.qnet_head_mlp);
        r.push(("qnet.enabled".into(), if self.use_qnet { 1.0 } else { 0.0 }));
        r.push(("sa.len".into(), self.local.len() as f64));
        for (i, sa) in self.local.iter().enumerate() {
            r.push((format!("sa{i}.centroids"), sa.centroids as f64));
            r.push((format!("sa{i}.radius"), sa.radius));
            r.push((format!("sa{i}.k"), sa.k as f64));
            list(&mut r, &format!("sa{i}.mlp"), &sa.mlp);
        }
        list(&mut r, "global", &self.global_mlp);
        list(&mut r, "head", &self.head_mlp);
        r.push(("d".into(), self.d as f64));
        r.push(("dropout".into(), self.dropout));
        r
    }

    pub fn from_records(records: &[(String, f64)]) -> Result<Self> {
        let get = |name: &str| -> Result<f64> {
            records
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::InvalidConfig(format!("missing architecture record {name}")))
        };
        let count = |name: &str| -> Result<usize> {
            let v = get(name)?;
            if v < 0.0 || v.fract() != 0.0 || v > 1e9 {
                return Err(Error::InvalidConfig(format!("record {name} = {v} is not a count")));
            }
            Ok(v as usize)
        };
        let list = |name: &str| -> Result<Vec<usize>> {
            (0..count(&format!("{name}.len"))?).map(|i| count(&format!("{name}.{i}"))).collect()
        };
        let local = (0..count("sa.len")?)
            .map(|i| {
                Ok(SetAbstractionConfig {
                    centroids: count(&format!("sa{i}.centroids"))?,
                    radius: get(&format!("sa{i}.radius"))?,
                    k: count(&format!("sa{i}.k"))?,
                    mlp: list(&format!("sa{i}.mlp"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = EncoderConfig {
            qnet_point_mlp: list("qnet.point")?,
            qnet_head_mlp: list("qnet.head")?,
            use_qnet: get("qnet.enabled")? != 0.0,
            local,
            global_mlp: list("global")?,
            head_mlp: list("head")?,
            d: count("d")?,
            dropout: get("dropout")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct DenseIds {
    w: ParamId,
    b: ParamId,
}

/// Parameter ids of every layer, in registration order.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Layout {
    qnet_point: Vec<DenseIds>,
    qnet_head: Vec<DenseIds>,
    local: Vec<Vec<DenseIds>>,
    global: Vec<DenseIds>,
    head: Vec<DenseIds>,
}

/// Unit-norm descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub values: Vec<f32>,
}

impl Descriptor {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Descriptor) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| {
                let d = a as f64 - b as f64;
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

impl AsRef<[f32]> for Descriptor {
    fn as_ref(&self) -> &[f32] {
        &self.values
    }
}

#[derive(Debug, Clone)]
pub struct EncoderModel {
    config: EncoderConfig,
    pub params: ParamStore<f32>,
    layout: Layout,
}

fn add_dense<R: Rng + ?Sized>(
    store: &mut ParamStore<f32>,
    name: &str,
    cin: usize,
    cout: usize,
    rng: &mut R,
) -> Result<DenseIds> {
    let w = store.add(format!("{name}.w"), glorot_uniform(cin, cout, rng))?;
    let b = store.add(format!("{name}.b"), Tensor::zeros(&[cout]))?;
    Ok(DenseIds { w, b })
}

fn add_mlp<R: Rng + ?Sized>(
    store: &mut ParamStore<f32>,
    name: &str,
    cin: usize,
    widths: &[usize],
    rng: &mut R,
) -> Result<Vec<DenseIds>> {
    let mut prev = cin;
    let mut out = Vec::with_capacity(widths.len());
    for (i, &w) in widths.iter().enumerate() {
        out.push(add_dense(store, &format!("{name}.{i}"), prev, w, rng)?);
        prev = w;
    }
    Ok(out)
}

impl EncoderModel {
    /// Glorot-uniform weights and zero biases. The last quaternion layer
    /// starts at zero weights with bias `(1, 0, 0, 0)`, so an untrained
    /// network predicts the identity rotation and still receives gradients.
    pub fn new<R: Rng + ?Sized>(config: EncoderConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut s = ParamStore::new();
        let qnet_point = add_mlp(&mut s, "qnet.point", 3, &config.qnet_point_mlp, rng)?;
        let mut qhead_widths = config.qnet_head_mlp.clone();
        qhead_widths.push(4);
        let qnet_head = add_mlp(&mut s, "qnet.head", *config.qnet_point_mlp.last().unwrap(), &qhead_widths, rng)?;
        let last = *qnet_head.last().unwrap();
        let cin = s.value(last.w).shape()[0];
        s.set(last.w, Tensor::zeros(&[cin, 4]))?;
        s.set(last.b, Tensor::new(&[4], vec![1.0, 0.0, 0.0, 0.0])?)?;

        let mut local = Vec::new();
        let mut feat = 0;
        for (i, sa) in config.local.iter().enumerate() {
            local.push(add_mlp(&mut s, &format!("sa{i}"), 3 + feat, &sa.mlp, rng)?);
            feat = *sa.mlp.last().unwrap();
        }
        let global = add_mlp(&mut s, "global", 3 + feat, &config.global_mlp, rng)?;
        let mut head_widths = config.head_mlp.clone();
        head_widths.push(config.d);
        let head = add_mlp(&mut s, "head", BOTTLENECK, &head_widths, rng)?;
        Ok(EncoderModel { config, params: s, layout: Layout { qnet_point, qnet_head, local, global, head } })
    }

    /// Rebuilds a model from a configuration and named tensors.
    pub fn from_parts(config: EncoderConfig, tensors: Vec<(String, Tensor<f32>)>) -> Result<Self> {
        let mut model = EncoderModel::new(config, &mut crate::rng::seeded(0))?;
        if tensors.len() != model.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameter tensors, got {}",
                model.params.len(),
                tensors.len()
            )));
        }
        for (name, t) in tensors {
            let id = model.params.id(&name)?;
            model.params.set(id, t)?;
        }
        Ok(model)
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    /// Zeroes the last quaternion layer, weights and bias.
    pub fn zero_qnet_output(&mut self) -> Result<()> {
        let last = *self.layout.qnet_head.last().unwrap();
        let shape = self.params.value(last.w).shape().to_vec();
        self.params.set(last.w, Tensor::zeros(&shape))?;
        self.params.set(last.b, Tensor::zeros(&[4]))
    }

    /// Records the forward pass of a batch of patches on `g` and returns the
    /// `[B, d]` descriptor node.
    ///
    /// `g` must borrow `self.params` or a cast of it; only the layout is
    /// taken from `self`.
    pub fn forward<T: Scalar, P: AsRef<[Vec3]>, R: Rng + ?Sized>(
        &self,
        g: &mut Graph<'_, T>,
        patches: &[P],
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let plans = plan_batch(&self.config, patches)?;
        self.forward_planned(g, &plans, training, rng)
    }

    fn forward_planned<T: Scalar, R: Rng + ?Sized>(
        &self,
        g: &mut Graph<'_, T>,
        plans: &[PatchPlan],
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let b = plans.len();
        let n = plans[0].points.len();
        let mut xyz = Vec::with_capacity(b * n * 3);
        for p in plans {
            for v in &p.points {
                xyz.extend([T::lit(v.x), T::lit(v.y), T::lit(v.z)]);
            }
        }
        let mut pts = g.input(Tensor::new(&[b, n, 3], xyz)?);
        if self.config.use_qnet {
            let q = self.qnet_graph(g, pts)?;
            pts = g.quat_rotate(pts, q)?;
        }

        // Coordinates and features of the current level, [B, n_l, ·].
        let mut level_xyz = pts;
        let mut level_feat: Option<Var> = None;
        let mut n_l = n;
        for (l, (sa, ids)) in self.config.local.iter().zip(&self.layout.local).enumerate() {
            let (c, k) = (sa.centroids, sa.k);
            let mut centre_idx = Vec::with_capacity(b * c);
            let mut group_idx = Vec::with_capacity(b * c * k);
            let mut centre_rep = Vec::with_capacity(b * c * k);
            for (pi, p) in plans.iter().enumerate() {
                let off = (pi * n_l) as u32;
                let lv = &p.levels[l];
                centre_idx.extend(lv.centroids.iter().map(|&i| off + i as u32));
                group_idx.extend(lv.groups.iter().map(|&i| off + i as u32));
                for &ci in &lv.centroids {
                    centre_rep.extend(core::iter::repeat_n(off + ci as u32, k));
                }
            }
            let grouped = g.gather_rows(level_xyz, group_idx.clone(), &[b, c, k])?;
            let centres = g.gather_rows(level_xyz, centre_rep, &[b, c, k])?;
            let mut x = g.sub(grouped, centres)?;
            if let Some(f) = level_feat {
                let gf = g.gather_rows(f, group_idx, &[b, c, k])?;
                x = g.concat(x, gf)?;
            }
            let h = mlp(g, x, ids, true)?;
            level_feat = Some(g.max_pool_points(h)?);
            level_xyz = g.gather_rows(level_xyz, centre_idx, &[b, c])?;
            n_l = c;
        }
        let x = g.concat(level_xyz, level_feat.expect("at least one local layer"))?;
        let h = mlp(g, x, &self.layout.global, true)?;
        let mut h = g.max_pool_points(h)?;
        let (last, hidden) = self.layout.head.split_last().unwrap();
        h = mlp(g, h, hidden, true)?;
        h = g.dropout(h, self.config.dropout, training, rng);
        let (w, bias) = (g.param(last.w), g.param(last.b));
        let out = g.dense(h, w, bias)?;
        Ok(g.l2_normalize(out, L2_EPS))
    }

    fn qnet_graph<T: Scalar>(&self, g: &mut Graph<'_, T>, pts: Var) -> Result<Var> {
        let h = mlp(g, pts, &self.layout.qnet_point, true)?;
        let pooled = g.max_pool_points(h)?;
        let (last, hidden) = self.layout.qnet_head.split_last().unwrap();
        let h = mlp(g, pooled, hidden, true)?;
        let (w, b) = (g.param(last.w), g.param(last.b));
        let raw = g.dense(h, w, b)?;
        g.unit_quaternion(raw)
    }

    /// Unit quaternion `(w, x, y, z)` predicted for one set of points.
    pub fn qnet_forward(&self, points: &[Vec3]) -> Result<UnitQuaternion> {
        if points.is_empty() {
            return Err(Error::TooFewPoints { requested: 1, available: 0 });
        }
        let mut g = Graph::new(&self.params);
        let data = points.iter().flat_map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect();
        let x = g.input(Tensor::new(&[1, points.len(), 3], data)?);
        let q = self.qnet_graph(&mut g, x)?;
        let v = g.value(q).data();
        Ok(UnitQuaternion::new_normalize(v[0] as f64, v[1] as f64, v[2] as f64, v[3] as f64))
    }

    pub fn encode<R: Rng + ?Sized>(&self, points: &[Vec3], training: bool, rng: &mut R) -> Result<Descriptor> {
        Ok(self.encode_batch(&[points], training, rng)?.pop().unwrap())
    }

    pub fn encode_batch<P: AsRef<[Vec3]>, R: Rng + ?Sized>(
        &self,
        patches: &[P],
        training: bool,
        rng: &mut R,
    ) -> Result<Vec<Descriptor>> {
        if patches.is_empty() {
            return Ok(Vec::new());
        }
        let mut g = Graph::new(&self.params);
        let out = self.forward(&mut g, patches, training, rng)?;
        let t = g.value(out);
        Ok((0..t.rows()).map(|r| Descriptor { values: t.row(r).to_vec() }).collect())
    }
}

/// Dense layers with ReLU after each one (after the last only if `relu_last`).
fn mlp<T: Scalar>(g: &mut Graph<'_, T>, mut x: Var, layers: &[DenseIds], relu_last: bool) -> Result<Var> {
    for (i, ids) in layers.iter().enumerate() {
        let (w, b) = (g.param(ids.w), g.param(ids.b));
        x = g.dense(x, w, b)?;
        if relu_last || i + 1 < layers.len() {
            x = g.relu(x);
        }
    }
    Ok(x)
}

/// Sampling and grouping indices of one level, relative to the previous
/// level's points.
#[derive(Debug, Clone)]
struct LevelPlan {
    centroids: Vec<usize>,
    /// `centroids.len() × k`, row-major.
    groups: Vec<usize>,
}

#[derive(Debug, Clone)]
struct PatchPlan {
    /// Input points in lexicographic order.
    points: Vec<Vec3>,
    levels: Vec<LevelPlan>,
}

fn lexicographic(a: &Vec3, b: &Vec3) -> Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z))
}

fn plan_patch(config: &EncoderConfig, points: &[Vec3]) -> Result<PatchPlan> {
    let mut sorted = points.to_vec();
    sorted.sort_by(lexicographic);
    let mut levels = Vec::with_capacity(config.local.len());
    let mut current = sorted.clone();
    for sa in &config.local {
        let centroids = farthest_point_sampling(&current, sa.centroids)?;
        let groups = ball_group(&current, &centroids, sa.radius, sa.k).concat();
        current = centroids.iter().map(|&i| current[i]).collect();
        levels.push(LevelPlan { centroids, groups });
    }
    Ok(PatchPlan { points: sorted, levels })
}

fn plan_batch<P: AsRef<[Vec3]>>(config: &EncoderConfig, patches: &[P]) -> Result<Vec<PatchPlan>> {
    let Some(first) = patches.first() else {
        return Err(Error::ShapeMismatch("empty batch".into()));
    };
    let n = first.as_ref().len();
    if let Some((i, p)) = patches.iter().enumerate().find(|(_, p)| p.as_ref().len() != n) {
        return Err(Error::ShapeMismatch(format!("patch {i} has {} points, patch 0 has {n}", p.as_ref().len())));
    }
    patches.iter().map(|p| plan_patch(config, p.as_ref())).collect()
}

/// Greedy max-min selection of `k` indices starting from index 0; ties go
/// to the lowest index.
pub fn farthest_point_sampling(points: &[Vec3], k: usize) -> Result<Vec<usize>> {
    if k > points.len() {
        return Err(Error::TooFewPoints { requested: k, available: points.len() });
    }
    let mut out = Vec::with_capacity(k);
    if k == 0 {
        return Ok(out);
    }
    let mut dist = vec![f64::INFINITY; points.len()];
    let mut cur = 0;
    for _ in 0..k {
        out.push(cur);
        let c = points[cur];
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, (p, d)) in points.iter().zip(dist.iter_mut()).enumerate() {
            let nd = p.distance_squared(c);
            if nd < *d {
                *d = nd;
            }
            if *d > best.0 {
                best = (*d, i);
            }
        }
        cur = best.1;
    }
    Ok(out)
}

/// For each centroid (an index into `points`), the `k` nearest points within
/// `radius` in ascending distance, padded by repeating the nearest one.
pub fn ball_group(points: &[Vec3], centroids: &[usize], radius: f64, k: usize) -> Vec<Vec<usize>> {
    let r2 = radius * radius;
    centroids
        .iter()
        .map(|&ci| {
            let c = points[ci];
            let mut within: Vec<(f64, usize)> =
                points.iter().enumerate().map(|(i, p)| (p.distance_squared(c), i)).filter(|&(d, _)| d <= r2).collect();
            within.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut group: Vec<usize> = within.into_iter().take(k).map(|(_, i)| i).collect();
            let pad = group.first().copied().unwrap_or(ci);
            group.resize(k, pad);
            group
        })
        .collect()
}

/// Rotates every point by the quaternion `q = (w, x, y, z)`.
pub fn apply_quaternion(points: &[Vec3], q: [f64; 4]) -> Result<Vec<Vec3>> {
    let r = quat_to_rotation(q[0], q[1], q[2], q[3])?;
    Ok(points.iter().map(|&p| r.mul_vec(p)).collect())
}

/// Points drawn uniformly from the unit ball.
pub fn random_ball_points<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if v.norm() <= 1.0 {
            out.push(v);
        }
    }
    out
}

/// Bound on the relative gradient error of the reduced encoder.
pub const ENCODER_GRADIENT_TOLERANCE: f64 = 1e-2;

/// Central-difference check of the reduced encoder ([`EncoderConfig::halved`],
/// two 64-point patches, dropout off) in `f64`, on a few sampled coordinates
/// of every parameter tensor. Biases and the quaternion head are jittered
/// away from their initial values, where ReLU kinks and a zero upstream
/// gradient would make the comparison meaningless.
pub fn encoder_gradient_check(seed: u64, per_param: usize) -> Result<GradCheckReport> {
    let model = EncoderModel::new(EncoderConfig::halved(), &mut crate::rng::stream(seed, 0))?;
    let mut params = model.params.cast::<f64>();
    let mut r = crate::rng::stream(seed, 1);
    for id in params.ids().collect::<Vec<_>>() {
        if params.name(id).ends_with(".b") || params.name(id).starts_with("qnet.head.1") {
            for v in params.value_mut(id).data_mut() {
                *v += r.random_range(-0.3..0.3);
            }
        }
    }
    let patches = vec![random_ball_points(64, &mut r), random_ball_points(64, &mut r)];
    let coeffs: Vec<f64> = (0..2 * model.config().d).map(|_| r.random_range(-1.0..1.0)).collect();
    grad_check(
        &mut params,
        |g| {
            let f = model.forward(g, &patches, false, &mut crate::rng::seeded(0))?;
            g.dot_const(f, coeffs.clone())
        },
        1e-6,
        CoordinateSelection::Sample { per_param, seed },
    )
}
