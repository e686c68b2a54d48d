//! Synthetic desk-scale scenes with exact ground truth.
//!
//! A scene is a square floor with walls, boxes, cylinders and spheres whose
//! surfaces are sampled uniformly at a fixed density. Two half-space crops
//! along a random horizontal direction share the points of a central band;
//! the second crop is moved by the inverse of a random rigid transform and
//! both get independent Gaussian noise.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use gedi_core::geometry::apply_transform;
use gedi_core::training::find_correspondences;
use gedi_core::{rng, Mat3, PointCloud, RigidTransform, UnitQuaternion, Vec3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::cloud_io::save_cloud;
use crate::error::{Error, Result};
use crate::manifest::{DatasetManifest, ManifestEntry};
use crate::pipeline::thread_pool;
use crate::pose_io::save_pose;

/// Crop attempts before giving up on the overlap target.
pub const MAX_CROP_ATTEMPTS: usize = 100;
/// Accepted gap between measured and target overlap.
pub const OVERLAP_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CropStyle {
    /// Each crop keeps one side of a plane; the planes bound the shared band.
    #[default]
    HalfSpace,
}

impl FromStr for CropStyle {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "half-space" => Ok(CropStyle::HalfSpace),
            other => Err(format!("unknown crop style {other:?}")),
        }
    }
}

impl fmt::Display for CropStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("half-space")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    /// Side of the square floor, metres.
    pub extent: f64,
    /// Walls; the first four stand on the floor edges, further ones are free panels.
    pub planes: usize,
    pub boxes: usize,
    pub cylinders: usize,
    pub spheres: usize,
    /// Surface samples per square metre.
    pub density: f64,
    /// Sensor noise σ, metres.
    pub noise: f64,
    pub overlap: f64,
    /// Bound on each translation component of the ground-truth pose, metres.
    pub max_translation: f64,
    pub crop: CropStyle,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            seed: 0,
            extent: 3.0,
            planes: 2,
            boxes: 8,
            cylinders: 5,
            spheres: 4,
            density: 2000.0,
            noise: 0.002,
            overlap: 0.6,
            max_translation: 1.0,
            crop: CropStyle::HalfSpace,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("[scene] {m}")));
        if !(self.overlap > 0.0 && self.overlap <= 1.0) {
            return bad("overlap must lie in (0, 1]");
        }
        if !(self.noise >= 0.0) {
            return bad("noise must be non-negative");
        }
        if !(self.extent >= 1.0 && self.extent.is_finite()) {
            return bad("extent must be at least 1 m");
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return bad("density must be positive");
        }
        if !(self.max_translation >= 0.0 && self.max_translation.is_finite()) {
            return bad("max_translation must be non-negative");
        }
        Ok(())
    }

    /// Mean distance between neighbouring samples.
    pub fn spacing(&self) -> f64 {
        1.0 / self.density.sqrt()
    }

    /// Tolerance used to measure overlap: twice the sample spacing.
    pub fn correspondence_tol(&self) -> f64 {
        2.0 * self.spacing()
    }

    /// Scene settings for pair `k` in a dataset seeded with `self.seed`.
    pub fn for_pair(&self, k: u64) -> SceneSpec {
        SceneSpec { seed: rng::stream(self.seed, k).random(), ..self.clone() }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub a: PointCloud,
    pub b: PointCloud,
    /// Maps B into the frame of A.
    pub transform: RigidTransform,
    pub overlap: f64,
}

struct Sampler<'a, R> {
    rng: &'a mut R,
    density: f64,
    out: Vec<Vec3>,
}

impl<R: Rng> Sampler<'_, R> {
    fn count(&self, area: f64) -> usize {
        (area * self.density).round() as usize
    }

    /// Parallelogram `o + s·u + t·v`, s, t ∈ [0, 1].
    fn rect(&mut self, o: Vec3, u: Vec3, v: Vec3) {
        for _ in 0..self.count(u.cross(v).norm()) {
            let (s, t): (f64, f64) = (self.rng.random(), self.rng.random());
            self.out.push(o + u * s + v * t);
        }
    }

    fn disc(&mut self, c: Vec3, r: f64) {
        for _ in 0..self.count(PI * r * r) {
            let rho = r * self.rng.random::<f64>().sqrt();
            let phi = 2.0 * PI * self.rng.random::<f64>();
            self.out.push(c + Vec3::new(rho * phi.cos(), rho * phi.sin(), 0.0));
        }
    }

    fn cylinder(&mut self, c: Vec3, r: f64, h: f64) {
        for _ in 0..self.count(2.0 * PI * r * h) {
            let phi = 2.0 * PI * self.rng.random::<f64>();
            let z = h * self.rng.random::<f64>();
            self.out.push(c + Vec3::new(r * phi.cos(), r * phi.sin(), z));
        }
        self.disc(c + Vec3::new(0.0, 0.0, h), r);
    }

    fn sphere(&mut self, c: Vec3, r: f64) {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut left = self.count(4.0 * PI * r * r);
        while left > 0 {
            let d = Vec3::new(normal.sample(self.rng), normal.sample(self.rng), normal.sample(self.rng));
            if let Some(d) = d.normalized() {
                self.out.push(c + d * r);
                left -= 1;
            }
        }
    }

    /// Five visible faces of a yawed box standing on the floor.
    fn cuboid(&mut self, c: Vec3, size: Vec3, yaw: f64) {
        let ex = Vec3::new(yaw.cos(), yaw.sin(), 0.0) * size.x;
        let ey = Vec3::new(-yaw.sin(), yaw.cos(), 0.0) * size.y;
        let ez = Vec3::new(0.0, 0.0, size.z);
        let o = c - ex * 0.5 - ey * 0.5;
        self.rect(o + ez, ex, ey);
        self.rect(o, ex, ez);
        self.rect(o + ey, ex, ez);
        self.rect(o, ey, ez);
        self.rect(o + ex, ey, ez);
    }
}

/// Noise-free scene points, deterministic per `spec.seed`.
pub fn generate_scene(spec: &SceneSpec) -> Result<Vec<Vec3>> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, 0);
    let e = spec.extent;
    let h = e / 2.0;
    let mut s = Sampler { rng: &mut rng, density: spec.density, out: Vec::new() };
    s.rect(Vec3::new(-h, -h, 0.0), Vec3::new(e, 0.0, 0.0), Vec3::new(0.0, e, 0.0));
    let wall_height = 1.0;
    for k in 0..spec.planes {
        let up = Vec3::new(0.0, 0.0, wall_height);
        match k {
            0 => s.rect(Vec3::new(-h, -h, 0.0), Vec3::new(e, 0.0, 0.0), up),
            1 => s.rect(Vec3::new(-h, -h, 0.0), Vec3::new(0.0, e, 0.0), up),
            2 => s.rect(Vec3::new(-h, h, 0.0), Vec3::new(e, 0.0, 0.0), up),
            3 => s.rect(Vec3::new(h, -h, 0.0), Vec3::new(0.0, e, 0.0), up),
            _ => {
                let c = Vec3::new(s.rng.random_range(-h..h), s.rng.random_range(-h..h), 0.0);
                let yaw = s.rng.random_range(0.0..PI);
                let w = s.rng.random_range(0.4..1.2);
                let dir = Vec3::new(yaw.cos(), yaw.sin(), 0.0) * w;
                let up = Vec3::new(0.0, 0.0, s.rng.random_range(0.3..0.9));
                s.rect(c - dir * 0.5, dir, up);
            }
        }
    }
    let margin = 0.3;
    let spot = |rng: &mut rng::Rng| {
        Vec3::new(rng.random_range(-h + margin..h - margin), rng.random_range(-h + margin..h - margin), 0.0)
    };
    for _ in 0..spec.boxes {
        let c = spot(s.rng);
        let size =
            Vec3::new(s.rng.random_range(0.15..0.6), s.rng.random_range(0.15..0.6), s.rng.random_range(0.1..0.8));
        let yaw = s.rng.random_range(0.0..PI);
        s.cuboid(c, size, yaw);
    }
    for _ in 0..spec.cylinders {
        let c = spot(s.rng);
        let (r, height) = (s.rng.random_range(0.05..0.25), s.rng.random_range(0.1..0.8));
        s.cylinder(c, r, height);
    }
    for _ in 0..spec.spheres {
        let r = s.rng.random_range(0.08..0.3);
        let c = spot(s.rng) + Vec3::new(0.0, 0.0, r);
        s.sphere(c, r);
    }
    Ok(s.out)
}

/// Uniformly distributed rotation.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Mat3 {
    let normal = Normal::new(0.0, 1.0).unwrap();
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| normal.sample(rng));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-6 {
            return UnitQuaternion::new_normalize(q[0], q[1], q[2], q[3]).to_rotation();
        }
    }
}

fn add_noise<R: Rng + ?Sized>(points: &mut [Vec3], sigma: f64, rng: &mut R) {
    if sigma == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).unwrap();
    for p in points {
        *p += Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng));
    }
}

/// Splits `points` into two crops sharing a band so that the shared part is
/// `overlap` of each crop.
fn half_space_crops(points: &[Vec3], overlap: f64, dir: Vec3) -> (Vec<Vec3>, Vec<Vec3>) {
    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| points[i].dot(dir).total_cmp(&points[j].dot(dir)).then(i.cmp(&j)));
    let alpha = 1.0 / (2.0 - overlap);
    let hi = ((alpha * n as f64).round() as usize).min(n);
    let lo = n - hi;
    let mut in_a = vec![false; n];
    let mut in_b = vec![false; n];
    for (rank, &i) in order.iter().enumerate() {
        in_a[i] = rank < hi;
        in_b[i] = rank >= lo;
    }
    let pick = |mask: &[bool]| points.iter().zip(mask).filter(|(_, &m)| m).map(|(p, _)| *p).collect();
    (pick(&in_a), pick(&in_b))
}

/// One overlapping pair from the scene of `spec.seed`.
pub fn generate_synthetic_pair(spec: &SceneSpec) -> Result<SyntheticPair> {
    let scene = generate_scene(spec)?;
    let tol = spec.correspondence_tol();
    let mut requested = spec.overlap;
    for attempt in 0..MAX_CROP_ATTEMPTS {
        let mut rng = rng::stream(spec.seed, 1 + attempt as u64);
        let phi = rng.random_range(0.0..2.0 * PI);
        let (mut a, b) = half_space_crops(&scene, requested, Vec3::new(phi.cos(), phi.sin(), 0.0));
        let m = spec.max_translation;
        let translation = if m > 0.0 {
            Vec3::new(rng.random_range(-m..=m), rng.random_range(-m..=m), rng.random_range(-m..=m))
        } else {
            Vec3::ZERO
        };
        let transform = RigidTransform::new(random_rotation(&mut rng), translation)?;
        let mut b = apply_transform(&transform.inverse(), &PointCloud::new(b)).into_points();
        add_noise(&mut a, spec.noise, &mut rng);
        add_noise(&mut b, spec.noise, &mut rng);
        let (a, b) = (PointCloud::new(a), PointCloud::new(b));
        let overlap = match find_correspondences(&a, &b, &transform, tol) {
            Ok(c) => c.overlap,
            Err(gedi_core::Error::NoOverlap) => 0.0,
            Err(e) => return Err(e.into()),
        };
        if (overlap - spec.overlap).abs() <= OVERLAP_TOLERANCE {
            return Ok(SyntheticPair { a, b, transform, overlap });
        }
        // Noise breaks some mutual matches inside the shared band, so the
        // measured overlap runs below the cropped share; steer the next crop.
        requested = (requested + spec.overlap - overlap).clamp(0.01, 1.0);
    }
    Err(Error::OverlapUnreachable { attempts: MAX_CROP_ATTEMPTS })
}

/// Writes `train` and `test` pairs under `dir` (`train/`, `test/` and the
/// manifests `train.txt`, `test.txt`). Pair `k` of the whole dataset uses
/// [`SceneSpec::for_pair`]`(k)`, test pairs following the training ones.
pub fn generate_dataset(
    spec: &SceneSpec,
    train: usize,
    test: usize,
    dir: &Path,
) -> Result<(DatasetManifest, DatasetManifest)> {
    spec.validate()?;
    let pool = thread_pool()?;
    let mut manifests = Vec::new();
    for (split, range) in [("train", 0..train), ("test", train..train + test)] {
        let sub = dir.join(split);
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        let offset = range.start;
        let entries = pool.install(|| {
            range
                .into_par_iter()
                .map(|k| {
                    let pair = generate_synthetic_pair(&spec.for_pair(k as u64))?;
                    let stem = format!("pair_{:03}", k - offset);
                    let entry = ManifestEntry {
                        cloud_a: sub.join(format!("{stem}_a.ply")),
                        cloud_b: sub.join(format!("{stem}_b.ply")),
                        pose: sub.join(format!("{stem}.txt")),
                        overlap: pair.overlap,
                    };
                    save_cloud(&entry.cloud_a, &pair.a, None)?;
                    save_cloud(&entry.cloud_b, &pair.b, None)?;
                    save_pose(&entry.pose, &pair.transform)?;
                    Ok(entry)
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let manifest = DatasetManifest { entries };
        manifest.save(dir.join(format!("{split}.txt")))?;
        manifests.push(manifest);
    }
    let test = manifests.pop().unwrap();
    Ok((manifests.pop().unwrap(), test))
}
