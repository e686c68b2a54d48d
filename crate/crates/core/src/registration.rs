//! Descriptor matching, least-squares rigid alignment and RANSAC.
//!
//! Every transform estimated here maps points of cloud B into the frame of
//! cloud A.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Point3, PointCloud, RigidTransform, Vec3};
use crate::linalg::symmetric_eigen3;
use crate::rng;
#[allow(unused_imports)]
use num_traits::Float;

/// Relative size below which a singular value or a triangle area counts as zero.
pub const DEGENERACY_TOLERANCE: f64 = 1e-9;

/// A mutual nearest-neighbour pair of descriptors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchSet {
    pub matches: Vec<Match>,
}

impl MatchSet {
    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }
}

fn sq_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

fn common_dim<D: AsRef<[f32]>>(fa: &[D], fb: &[D]) -> Result<usize> {
    let d = fa.first().or(fb.first()).map_or(0, |f| f.as_ref().len());
    for f in fa.iter().chain(fb) {
        if f.as_ref().len() != d {
            return Err(Error::DimensionMismatch { left: d, right: f.as_ref().len() });
        }
    }
    Ok(d)
}

/// Index of the nearest row of `set` to `q`, first index on ties.
fn argmin<D: AsRef<[f32]>>(q: &[f32], set: &[D]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, f) in set.iter().enumerate() {
        let d = sq_distance(q, f.as_ref());
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Pairs `(i, j)` where `fb[j]` is the nearest neighbour of `fa[i]` and
/// `fa[i]` that of `fb[j]`, ordered by `i`.
pub fn mutual_nearest_neighbors<D: AsRef<[f32]>>(fa: &[D], fb: &[D]) -> Result<MatchSet> {
    common_dim(fa, fb)?;
    if fa.is_empty() || fb.is_empty() {
        return Ok(MatchSet::default());
    }
    let back: Vec<usize> = fb.iter().map(|f| argmin(f.as_ref(), fa).0).collect();
    let matches = fa
        .iter()
        .enumerate()
        .filter_map(|(i, f)| {
            let (j, d) = argmin(f.as_ref(), fb);
            (back[j] == i).then(|| Match { a: i, b: j, distance: d.sqrt() })
        })
        .collect();
    Ok(MatchSet { matches })
}

fn centroid(points: &[Point3]) -> Point3 {
    points.iter().fold(Vec3::ZERO, |acc, &p| acc + p) / points.len() as f64
}

/// Rigid transform minimising `Σ ‖paᵢ − (R·pbᵢ + t)‖²`, with `det R = +1`.
pub fn kabsch(pa: &[Point3], pb: &[Point3]) -> Result<RigidTransform> {
    if pa.len() != pb.len() {
        return Err(Error::DimensionMismatch { left: pa.len(), right: pb.len() });
    }
    if pa.len() < 3 {
        return Err(Error::DegenerateConfiguration);
    }
    let (ca, cb) = (centroid(pa), centroid(pb));
    // M = Σ ãᵢ b̃ᵢᵀ; the optimal rotation is U·diag(1, 1, ±1)·Vᵀ for M = U S Vᵀ.
    let mut m = Mat3::ZERO;
    for (&a, &b) in pa.iter().zip(pb) {
        m = m.add(&Mat3::outer(a - ca, b - cb));
    }
    let (vals, vecs) = symmetric_eigen3(&m.transpose().mul_mat(&m));
    let s0 = vals[2].max(0.0).sqrt();
    let s1 = vals[1].max(0.0).sqrt();
    if !(s0 > 0.0) || s1 <= DEGENERACY_TOLERANCE * s0 {
        return Err(Error::DegenerateConfiguration);
    }
    let (v0, v1) = (vecs[2], vecs[1]);
    let u0 = (m.mul_vec(v0) / s0).normalized().ok_or(Error::DegenerateConfiguration)?;
    let u1 = m.mul_vec(v1) / s1;
    let u1 = (u1 - u0 * u1.dot(u0)).normalized().ok_or(Error::DegenerateConfiguration)?;
    let v1 = (v1 - v0 * v1.dot(v0)).normalized().ok_or(Error::DegenerateConfiguration)?;
    let (u2, v2) = (u0.cross(u1), v0.cross(v1));
    let r = Mat3::outer(u0, v0).add(&Mat3::outer(u1, v1)).add(&Mat3::outer(u2, v2));
    let t = ca - r.mul_vec(cb);
    Ok(RigidTransform::from_parts_unchecked(r, t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    pub max_iterations: usize,
    pub confidence: f64,
    /// Inlier distance threshold in cloud units.
    pub threshold: f64,
    pub seed: u64,
}

impl RansacConfig {
    pub fn new(threshold: f64, seed: u64) -> Self {
        RansacConfig { max_iterations: 10_000, confidence: 0.99, threshold, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidConfig(format!("confidence {} outside (0, 1)", self.confidence)));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::InvalidConfig("RANSAC threshold must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("RANSAC needs at least one iteration".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    pub transform: RigidTransform,
    /// Indices into the match set.
    pub inliers: Vec<usize>,
    /// Non-degenerate hypotheses evaluated.
    pub iterations: usize,
    pub matches: usize,
}

impl RegistrationResult {
    pub fn inlier_ratio(&self) -> f64 {
        if self.matches == 0 {
            0.0
        } else {
            self.inliers.len() as f64 / self.matches as f64
        }
    }
}

/// Hypotheses needed to draw one all-inlier triple with probability
/// `confidence` when a fraction `w` of the matches are inliers.
pub fn required_iterations(w: f64, confidence: f64) -> f64 {
    let p = w * w * w;
    if p >= 1.0 {
        return 1.0;
    }
    if p <= 0.0 {
        return f64::INFINITY;
    }
    ((1.0 - confidence).ln() / (1.0 - p).ln()).ceil()
}

fn collinear(p: [Point3; 3]) -> bool {
    let (e1, e2) = (p[1] - p[0], p[2] - p[0]);
    let scale = e1.norm() * e2.norm();
    !(scale > 0.0) || e1.cross(e2).norm() <= DEGENERACY_TOLERANCE * scale
}

fn inliers_of(t: &RigidTransform, pa: &[Point3], pb: &[Point3], threshold: f64) -> Vec<usize> {
    (0..pa.len()).filter(|&k| pa[k].distance(t.apply(pb[k])) <= threshold).collect()
}

/// RANSAC over three-point Kabsch hypotheses, followed by one refit on the
/// inliers of the best hypothesis.
pub fn ransac_register(
    matches: &MatchSet,
    a: &PointCloud,
    b: &PointCloud,
    cfg: &RansacConfig,
) -> Result<RegistrationResult> {
    cfg.validate()?;
    let n = matches.len();
    if n < 3 {
        return Err(Error::TooFewMatches { len: n });
    }
    let pa: Vec<Point3> = matches.matches.iter().map(|m| a.points()[m.a]).collect();
    let pb: Vec<Point3> = matches.matches.iter().map(|m| b.points()[m.b]).collect();
    let mut rng = rng::seeded(cfg.seed);
    let mut best: Option<(RigidTransform, Vec<usize>)> = None;
    let mut iterations = 0;
    let mut attempts = 0;
    let mut needed = f64::INFINITY;
    while iterations < cfg.max_iterations && attempts < 3 * cfg.max_iterations && (iterations as f64) < needed {
        attempts += 1;
        let idx = crate::lrf::sample_indices(n, 3, &mut rng);
        let sa = [pa[idx[0]], pa[idx[1]], pa[idx[2]]];
        let sb = [pb[idx[0]], pb[idx[1]], pb[idx[2]]];
        if collinear(sa) || collinear(sb) {
            continue;
        }
        let Ok(t) = kabsch(&sa, &sb) else { continue };
        iterations += 1;
        let inl = inliers_of(&t, &pa, &pb, cfg.threshold);
        if best.as_ref().is_none_or(|(_, bi)| inl.len() > bi.len()) {
            needed = required_iterations(inl.len() as f64 / n as f64, cfg.confidence);
            best = Some((t, inl));
        }
    }
    let (mut transform, mut inliers) = best.ok_or(Error::AllSamplesDegenerate)?;
    if inliers.len() >= 3 {
        let fa: Vec<Point3> = inliers.iter().map(|&k| pa[k]).collect();
        let fb: Vec<Point3> = inliers.iter().map(|&k| pb[k]).collect();
        if let Ok(refit) = kabsch(&fa, &fb) {
            let refit_inliers = inliers_of(&refit, &pa, &pb, cfg.threshold);
            if refit_inliers.len() >= inliers.len() {
                transform = refit;
                inliers = refit_inliers;
            }
        }
    }
    Ok(RegistrationResult { transform, inliers, iterations, matches: n })
}
