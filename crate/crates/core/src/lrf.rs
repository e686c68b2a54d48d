//! Patch extraction, point sampling, local reference frames and
//! canonicalisation.
//!
//! A patch is every cloud point within radius `r` of a centre `x̂`. The frame
//! is built from the patch covariance about `x̂`: the normal `w` is the
//! eigenvector of the smallest eigenvalue with its sign chosen so that most of
//! the patch lies below the tangent plane; the tangent axis `u` is a weighted
//! sum of the in-plane projections of the offsets, where points far from the
//! plane but close to the centre weigh most; `v = w × u` completes the frame.
//! Canonicalisation maps each sampled point to `R·(x − x̂)/r`.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Point3, PointCloud, Vec3};
use crate::linalg::symmetric_eigen3;
#[allow(unused_imports)]
use num_traits::Float;

/// Relative eigenvalue gap (times the trace) below which the normal is ambiguous.
pub const EIGEN_GAP_TOLERANCE: f64 = 1e-9;
/// Norm below which the radius-normalised tangent sum counts as vanished.
pub const TANGENT_TOLERANCE: f64 = 1e-9;

/// Points of a cloud within `radius` of `centre`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub centre: Point3,
    pub radius: f64,
    pub points: Vec<Point3>,
}

impl Patch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Sampling sizes: `m` points feed the frame estimate, `n < m` feed the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
}

impl SamplingConfig {
    pub fn new(m: usize, n: usize, seed: u64) -> Result<Self> {
        if n < 3 || n >= m {
            return Err(Error::InvalidConfig(alloc::format!("sampling sizes need 3 <= n < m, got m={m}, n={n}")));
        }
        Ok(SamplingConfig { m, n, seed })
    }
}

/// Orthonormal frame with rows `u`, `v`, `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrfFrame {
    pub u: Vec3,
    pub v: Vec3,
    pub w: Vec3,
}

impl LrfFrame {
    pub const IDENTITY: LrfFrame =
        LrfFrame { u: Vec3::new(1.0, 0.0, 0.0), v: Vec3::new(0.0, 1.0, 0.0), w: Vec3::new(0.0, 0.0, 1.0) };

    /// Rotation taking global offsets into the frame.
    pub fn rotation(&self) -> Mat3 {
        Mat3::from_rows(self.u, self.v, self.w)
    }
}

/// `n` points in the unit ball, expressed in the patch frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalPatch {
    pub points: Vec<Vec3>,
    pub centre: Point3,
    pub radius: f64,
    /// True when the frame could not be estimated and the identity was used.
    pub fallback_frame: bool,
}

impl AsRef<[Vec3]> for CanonicalPatch {
    fn as_ref(&self) -> &[Vec3] {
        &self.points
    }
}

pub fn extract_patch(cloud: &PointCloud, centre: Point3, radius: f64) -> Result<Patch> {
    if !(radius > 0.0) {
        return Err(Error::NonPositiveRadius(radius));
    }
    let ids = cloud.radius_neighbors(centre, radius)?;
    if ids.is_empty() {
        return Err(Error::EmptyPatch);
    }
    let pts = cloud.points();
    Ok(Patch { centre, radius, points: ids.into_iter().map(|i| pts[i]).collect() })
}

/// Draws `k` indices out of `len`: without replacement while possible, then
/// uniformly with replacement for the deficit.
pub fn sample_indices<R: Rng + ?Sized>(len: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..len).collect();
    let take = k.min(len);
    for i in 0..take {
        let j = rng.random_range(i..len);
        pool.swap(i, j);
    }
    pool.truncate(take);
    while pool.len() < k {
        pool.push(rng.random_range(0..len));
    }
    pool
}

/// Random subset of exactly `k` points, padded by repetition for small patches.
pub fn sample_points<R: Rng + ?Sized>(patch: &Patch, k: usize, rng: &mut R) -> Patch {
    let idx = sample_indices(patch.len(), k, rng);
    Patch { centre: patch.centre, radius: patch.radius, points: idx.into_iter().map(|i| patch.points[i]).collect() }
}

/// Covariance of the patch about its centre, normalised by the point count.
pub fn compute_covariance(patch: &Patch) -> Mat3 {
    let mut acc = [[0.0f64; 3]; 3];
    for p in &patch.points {
        let d = (*p - patch.centre).to_array();
        for i in 0..3 {
            for j in i..3 {
                acc[i][j] += d[i] * d[j];
            }
        }
    }
    let inv = 1.0 / patch.len() as f64;
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            m[i][j] = acc[i][j] * inv;
            m[j][i] = m[i][j];
        }
    }
    Mat3(m)
}

/// Unit eigenvector of the smallest eigenvalue of a symmetric 3×3 matrix.
pub fn smallest_eigenvector(cov: &Mat3) -> Result<Vec3> {
    let (vals, vecs) = symmetric_eigen3(cov);
    let trace = cov.trace();
    if vals[1] - vals[0] <= EIGEN_GAP_TOLERANCE * trace.abs() {
        return Err(Error::DegenerateEigen);
    }
    Ok(vecs[0])
}

/// Orients `e` so that `Σ e·(x̂ − x) ≥ 0`; an exact zero keeps `+e`.
pub fn disambiguate_normal(e: Vec3, patch: &Patch) -> Vec3 {
    let s: f64 = patch.points.iter().map(|&x| e.dot(patch.centre - x)).sum();
    if s >= 0.0 {
        e
    } else {
        -e
    }
}

/// Tangent axis: normalised `Σ α β ν` with `α = (r − ‖x − x̂‖)²`,
/// `β = ((x − x̂)·w)²` and `ν` the projection of `x − x̂` on the tangent plane.
///
/// The sum is accumulated on radius-normalised offsets (a positive rescaling
/// of the same vector), so the degeneracy threshold does not depend on units.
pub fn compute_tangent_axis(patch: &Patch, w: Vec3, radius: f64) -> Result<Vec3> {
    let mut sum = Vec3::ZERO;
    for &x in &patch.points {
        let d = (x - patch.centre) / radius;
        let h = d.dot(w);
        let alpha = (1.0 - d.norm()).powi(2);
        let beta = h * h;
        let nu = d - w * h;
        sum += nu * (alpha * beta);
    }
    let norm = sum.norm();
    if !(norm >= TANGENT_TOLERANCE) {
        return Err(Error::DegenerateLrf);
    }
    Ok(sum / norm)
}

/// Full frame estimate on a sampled patch.
pub fn compute_lrf(patch: &Patch) -> Result<LrfFrame> {
    if patch.len() < 3 {
        return Err(Error::PatchTooSmall { len: patch.len() });
    }
    let cov = compute_covariance(patch);
    let e = smallest_eigenvector(&cov)?;
    let w = disambiguate_normal(e, patch);
    let u = compute_tangent_axis(patch, w, patch.radius)?;
    // Remove the residual normal component so u·w is zero to rounding.
    let u = (u - w * u.dot(w)).normalized().ok_or(Error::DegenerateLrf)?;
    let v = w.cross(u);
    Ok(LrfFrame { u, v, w })
}

/// `R·(x − x̂)/r` for every point of the patch, in order.
pub fn canonicalise_points(patch: &Patch, frame: &LrfFrame) -> Vec<Vec3> {
    let rot = frame.rotation();
    patch.points.iter().map(|&x| rot.mul_vec((x - patch.centre) / patch.radius)).collect()
}

/// Samples `n` points of the patch and expresses them in the frame.
pub fn canonicalise<R: Rng + ?Sized>(patch: &Patch, frame: &LrfFrame, n: usize, rng: &mut R) -> CanonicalPatch {
    let sampled = sample_points(patch, n, rng);
    CanonicalPatch {
        points: canonicalise_points(&sampled, frame),
        centre: patch.centre,
        radius: patch.radius,
        fallback_frame: false,
    }
}

/// What to do when the frame of a patch cannot be estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegeneratePolicy {
    /// Return the error (training resamples the anchor).
    Fail,
    /// Use the identity frame and flag the patch (inference).
    IdentityFrame,
}

/// Patch-to-network settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchConfig {
    pub radius: f64,
    pub m: usize,
    pub n: usize,
    /// Ablation switch: with `false` patches are only centred and scaled.
    pub use_lrf: bool,
}

/// Extraction, `m`-sampling, frame estimate and `n`-sampling in one call.
/// The `n` points are drawn from the `m`-subset.
pub fn canonical_patch<R: Rng + ?Sized>(
    cloud: &PointCloud,
    centre: Point3,
    cfg: &PatchConfig,
    policy: DegeneratePolicy,
    rng: &mut R,
) -> Result<CanonicalPatch> {
    let patch = extract_patch(cloud, centre, cfg.radius)?;
    let sampled = sample_points(&patch, cfg.m, rng);
    let (frame, fallback) = if cfg.use_lrf {
        // Too-small patches are only a frame error: padding covers sampling.
        let frame =
            if patch.len() < 3 { Err(Error::PatchTooSmall { len: patch.len() }) } else { compute_lrf(&sampled) };
        match (frame, policy) {
            (Ok(f), _) => (f, false),
            (Err(e), DegeneratePolicy::Fail) => return Err(e),
            (Err(_), DegeneratePolicy::IdentityFrame) => (LrfFrame::IDENTITY, true),
        }
    } else {
        (LrfFrame::IDENTITY, false)
    };
    let mut out = canonicalise(&sampled, &frame, cfg.n, rng);
    out.fallback_frame = fallback;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::euler_to_rotation;
    use crate::rng;
    use alloc::vec;

    fn patch(points: Vec<Vec3>) -> Patch {
        Patch { centre: Vec3::ZERO, radius: 1.0, points }
    }

    #[test]
    fn extract_examples() {
        let cloud = PointCloud::new(vec![Vec3::ZERO, Vec3::new(5.0, 0.0, 0.0), Vec3::new(0.0, 5.0, 0.0)]);
        assert_eq!(extract_patch(&cloud, Vec3::ZERO, 0.5).unwrap().len(), 1);
        assert_eq!(extract_patch(&cloud, Vec3::ZERO, 100.0).unwrap().points, cloud.points());
        assert_eq!(extract_patch(&cloud, Vec3::new(50.0, 0.0, 0.0), 1.0), Err(Error::EmptyPatch));
        assert!(extract_patch(&cloud, Vec3::ZERO, 0.0).is_err());
    }

    #[test]
    fn sampling_examples() {
        let mut rng = rng::seeded(0);
        let p = patch((0..10).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect());
        let mut s = sample_points(&p, 10, &mut rng).points;
        s.sort_by(|a, b| a.x.total_cmp(&b.x));
        assert_eq!(s, p.points);

        let one = patch(vec![Vec3::new(0.1, 0.2, 0.3)]);
        assert_eq!(sample_points(&one, 5, &mut rng).points, vec![Vec3::new(0.1, 0.2, 0.3); 5]);

        let big = patch((0..100).map(|i| Vec3::new(i as f64, 1.0, 0.0)).collect());
        let a = sample_points(&big, 64, &mut rng::seeded(9));
        let b = sample_points(&big, 64, &mut rng::seeded(9));
        assert_eq!(a, b);
        let mut xs: Vec<i64> = a.points.iter().map(|p| p.x as i64).collect();
        xs.sort_unstable();
        xs.dedup();
        assert_eq!(xs.len(), 64, "no repeats when the patch is large enough");
    }

    #[test]
    fn padding_uses_every_point_once_first() {
        let p = patch((0..4).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect());
        let s = sample_indices(4, 9, &mut rng::seeded(3));
        let mut head = s[..4].to_vec();
        head.sort_unstable();
        assert_eq!(head, [0, 1, 2, 3]);
        assert!(s.iter().all(|&i| i < p.len()));
    }

    #[test]
    fn covariance_examples() {
        let zero = Patch { centre: Vec3::new(1.0, 1.0, 1.0), radius: 1.0, points: vec![Vec3::new(1.0, 1.0, 1.0); 4] };
        assert_eq!(compute_covariance(&zero), Mat3::ZERO);
        let cross = patch(vec![
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
        ]);
        assert_eq!(compute_covariance(&cross), Mat3([[0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.0]]));
    }

    #[test]
    fn eigenvector_examples() {
        let e = smallest_eigenvector(&Mat3([[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.1]])).unwrap();
        assert_eq!(e.z.abs(), 1.0);
        assert_eq!(smallest_eigenvector(&Mat3::IDENTITY), Err(Error::DegenerateEigen));
    }

    #[test]
    fn normal_sign_examples() {
        let e = Vec3::new(0.0, 0.0, 1.0);
        let flat = patch(vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.5, 0.0)]);
        assert_eq!(disambiguate_normal(e, &flat), e);
        let above = patch(vec![Vec3::new(0.1, 0.0, 0.3), Vec3::new(0.0, 0.2, 0.1)]);
        assert_eq!(disambiguate_normal(e, &above), -e);
    }

    #[test]
    fn tangent_axis_examples() {
        let w = Vec3::new(0.0, 0.0, 1.0);
        let single = patch(vec![Vec3::new(0.3, 0.4, 0.2)]);
        let u = compute_tangent_axis(&single, w, 1.0).unwrap();
        assert!((u - Vec3::new(0.6, 0.8, 0.0)).norm() < 1e-15);

        let symmetric = patch(vec![Vec3::new(0.3, 0.4, 0.2), Vec3::new(-0.3, -0.4, 0.2)]);
        assert_eq!(compute_tangent_axis(&symmetric, w, 1.0), Err(Error::DegenerateLrf));
    }

    #[test]
    fn lrf_on_planar_patch_with_lobe() {
        // A disc in the xy plane plus a denser, slightly raised cluster at +x.
        let mut pts = Vec::new();
        for i in 0..36 {
            let a = i as f64 * core::f64::consts::PI / 18.0;
            for r in [0.3, 0.6, 0.9] {
                pts.push(Vec3::new(r * a.cos(), r * a.sin(), 0.0));
            }
        }
        for k in 0..10 {
            pts.push(Vec3::new(0.5 + 0.01 * k as f64, 0.02 * (k % 3) as f64, -0.05));
        }
        let frame = compute_lrf(&patch(pts)).unwrap();
        assert!(frame.w.z.abs() > 0.99);
        assert!(frame.u.x > 0.9, "u points towards the lobe: {:?}", frame.u);
        let r = frame.rotation();
        assert!(r.orthonormality_error() < 1e-9);
        assert!((r.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lrf_rejects_tiny_and_symmetric_patches() {
        assert_eq!(compute_lrf(&patch(vec![Vec3::ZERO; 2])), Err(Error::PatchTooSmall { len: 2 }));
        let octahedron = patch(vec![
            Vec3::new(0.5, 0.0, 0.0),
            Vec3::new(-0.5, 0.0, 0.0),
            Vec3::new(0.0, 0.5, 0.0),
            Vec3::new(0.0, -0.5, 0.0),
            Vec3::new(0.0, 0.0, 0.5),
            Vec3::new(0.0, 0.0, -0.5),
        ]);
        assert!(compute_lrf(&octahedron).is_err());
    }

    #[test]
    fn canonicalise_examples() {
        let frame = LrfFrame { u: Vec3::new(0.0, 1.0, 0.0), v: Vec3::new(-1.0, 0.0, 0.0), w: Vec3::new(0.0, 0.0, 1.0) };
        let p = Patch {
            centre: Vec3::new(1.0, 1.0, 1.0),
            radius: 2.0,
            points: vec![Vec3::new(1.0, 1.0, 1.0), Vec3::new(1.0, 3.0, 1.0)],
        };
        let out = canonicalise_points(&p, &frame);
        assert_eq!(out[0], Vec3::ZERO);
        assert!((out[1] - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        let sampled = canonicalise(&p, &frame, 5, &mut rng::seeded(1));
        assert_eq!(sampled.points.len(), 5);
        assert!(sampled.points.iter().all(|y| y.norm() <= 1.0 + 1e-9));
    }

    #[test]
    fn frame_rotates_covariantly() {
        let mut rng = rng::seeded(21);
        let pts: Vec<Vec3> = (0..200)
            .map(|_| {
                let x: f64 = rng.random_range(-0.7..0.7);
                let y: f64 = rng.random_range(-0.7..0.7);
                Vec3::new(x, y, 0.3 * x * x - 0.2 * y + 0.1 * x * y)
            })
            .collect();
        let p = patch(pts.clone());
        let q = euler_to_rotation(0.4, -1.1, 2.0);
        let rotated = patch(pts.iter().map(|&x| q.mul_vec(x)).collect());
        let f0 = compute_lrf(&p).unwrap().rotation();
        let f1 = compute_lrf(&rotated).unwrap().rotation();
        let expected = f0.mul_mat(&q.transpose());
        assert!(f1.add(&expected.scale(-1.0)).frobenius_norm() < 1e-6);
    }
}
