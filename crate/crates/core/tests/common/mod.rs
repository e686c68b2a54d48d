//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use gedi_core::{rng, Mat3, Vec3};
use rand::Rng;

pub fn random_points<R: Rng>(n: usize, half: f64, rng: &mut R) -> Vec<Vec3> {
    (0..n)
        .map(|_| Vec3::new(rng.random_range(-half..half), rng.random_range(-half..half), rng.random_range(-half..half)))
        .collect()
}

pub fn random_unit<R: Rng>(d: usize, rng: &mut R) -> Vec<f32> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.1 {
            return v.iter().map(|x| (x / n) as f32).collect();
        }
    }
}

/// Rotation from a uniformly random axis and angle.
pub fn random_rotation<R: Rng>(rng: &mut R) -> Mat3 {
    let axis = loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if let Some(u) = v.normalized() {
            break u;
        }
    };
    Mat3::from_axis_angle(axis, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
}

pub fn dist(a: Vec3, b: Vec3) -> f64 {
    let (dx, dy, dz) = (a.x - b.x, a.y - b.y, a.z - b.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Ids within `r` of `c`, ascending.
pub fn radius_scan(points: &[Vec3], c: Vec3, r: f64) -> Vec<usize> {
    (0..points.len()).filter(|&i| dist(points[i], c) <= r).collect()
}

pub fn desc_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum::<f64>().sqrt()
}

fn argmin(values: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if best.is_none() || v < best.unwrap().1 {
            best = Some((i, v));
        }
    }
    best.map(|b| b.0)
}

/// Pairs `(i, j)` that are each other's nearest neighbour, by double argmin.
pub fn mutual_nn(fa: &[Vec<f32>], fb: &[Vec<f32>]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, a) in fa.iter().enumerate() {
        let Some(j) = argmin(fb.iter().map(|b| desc_dist(a, b))) else { continue };
        if argmin(fa.iter().map(|x| desc_dist(x, &fb[j]))) == Some(i) {
            out.push((i, j));
        }
    }
    out
}

/// Greedy max-min selection starting at index 0, recomputing every
/// distance from scratch; ties go to the lowest index.
pub fn greedy_fps(points: &[Vec3], k: usize) -> Vec<usize> {
    let mut chosen = vec![0];
    while chosen.len() < k {
        let mut best = (usize::MAX, -1.0);
        for i in 0..points.len() {
            let d = chosen.iter().map(|&c| dist(points[i], points[c])).fold(f64::INFINITY, f64::min);
            if d > best.1 {
                best = (i, d);
            }
        }
        chosen.push(best.0);
    }
    chosen
}

/// For every row of `2b`: the nearest row, in descriptor space, that is
/// neither itself nor its partner and whose centre is farther than `ex`.
pub fn hardest_negatives(desc: &[Vec<f32>], centres: &[Vec3], ex: f64) -> Vec<Option<(usize, f64, usize)>> {
    let b = desc.len() / 2;
    (0..desc.len())
        .map(|i| {
            let partner = (i + b) % (2 * b);
            let pool: Vec<usize> =
                (0..desc.len()).filter(|&j| j != i && j != partner && dist(centres[i], centres[j]) > ex).collect();
            let k = argmin(pool.iter().map(|&j| desc_dist(&desc[i], &desc[j])))?;
            Some((pool[k], desc_dist(&desc[i], &desc[pool[k]]), pool.len()))
        })
        .collect()
}

/// The hardest-contrastive loss written out as two nested loops, with the
/// literal weighting (`1/b` outer, `1/b` positive, `1/(2|C₋|)` per negative).
pub fn contrastive_loss_loops(desc: &[Vec<f32>], centres: &[Vec3], ex: f64, m_pos: f64, m_neg: f64) -> f64 {
    let b = desc.len() / 2;
    let mut total = 0.0;
    for k in 0..b {
        let d = desc_dist(&desc[k], &desc[k + b]);
        let mut term = (d - m_pos).max(0.0).powi(2) / b as f64;
        for row in [k, k + b] {
            let partner = if row < b { row + b } else { row - b };
            let mut count = 0usize;
            let mut nearest = f64::INFINITY;
            for j in 0..2 * b {
                if j == row || j == partner || dist(centres[row], centres[j]) <= ex {
                    continue;
                }
                count += 1;
                nearest = nearest.min(desc_dist(&desc[row], &desc[j]));
            }
            if count > 0 {
                term += (m_neg - nearest).max(0.0).powi(2) / (2.0 * count as f64);
            }
        }
        total += term;
    }
    total / b as f64
}

/// `(1/N) Σ (x − c)(x − c)ᵀ`, one entry at a time.
pub fn covariance_about(points: &[Vec3], c: Vec3) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let mut s = 0.0;
            for p in points {
                s += (p[a] - c[a]) * (p[b] - c[b]);
            }
            m[a][b] = s / points.len() as f64;
        }
    }
    m
}

/// Normalised `Σ (r − ‖x − c‖)² ((x − c)·w)² · (x − c − ((x − c)·w) w)` in raw units.
pub fn tangent_axis(points: &[Vec3], c: Vec3, w: Vec3, r: f64) -> Vec3 {
    let mut s = [0.0; 3];
    for p in points {
        let d = [p.x - c.x, p.y - c.y, p.z - c.z];
        let h = d[0] * w.x + d[1] * w.y + d[2] * w.z;
        let alpha = (r - dist(*p, c)).powi(2);
        for k in 0..3 {
            s[k] += alpha * h * h * (d[k] - h * w[k]);
        }
    }
    let n = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
    Vec3::new(s[0] / n, s[1] / n, s[2] / n)
}

/// `(Ξ, mean, population std)` by direct summation.
pub fn fmr_stats(ratios: &[f64], tau2: f64) -> (f64, f64, f64) {
    let n = ratios.len() as f64;
    let recall = ratios.iter().filter(|&&x| x > tau2).count() as f64 / n;
    let mean = ratios.iter().sum::<f64>() / n;
    let var = ratios.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (recall, mean, var.sqrt())
}

pub fn seeded(seed: u64) -> rng::Rng {
    rng::seeded(seed)
}

/// Correspondences for `t_true` (mapping B into A): `n` matches of which a
/// fraction `outliers` pair unrelated random points, with Gaussian noise `sigma`
/// on the inliers.
pub fn synthetic_matches<R: Rng>(
    n: usize,
    outliers: f64,
    sigma: f64,
    t_true: &gedi_core::RigidTransform,
    rng: &mut R,
) -> (gedi_core::PointCloud, gedi_core::PointCloud, gedi_core::registration::MatchSet) {
    use rand_distr::{Distribution, Normal};
    let noise = Normal::new(0.0, sigma.max(1e-300)).unwrap();
    let pa = random_points(n, 1.0, rng);
    let n_out = (n as f64 * outliers).round() as usize;
    let inv = t_true.inverse();
    let pb: Vec<Vec3> = pa
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if i < n_out {
                random_points(1, 1.0, rng)[0]
            } else if sigma > 0.0 {
                inv.apply(p + Vec3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng)))
            } else {
                inv.apply(p)
            }
        })
        .collect();
    let matches = (0..n).map(|i| gedi_core::registration::Match { a: i, b: i, distance: 0.0 }).collect();
    (gedi_core::PointCloud::new(pa), gedi_core::PointCloud::new(pb), gedi_core::registration::MatchSet { matches })
}

/// Relative rotation error in degrees by decomposing `R_gᵀ R_e` with its own
/// arithmetic and summing the absolute angles.
pub fn rre_oracle(rg: &Mat3, re: &Mat3) -> f64 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (0..3).map(|k| rg.0[k][i] * re.0[k][j]).sum();
        }
    }
    // R = Rx·Ry·Rz gives m[0][2] = sin ay, m[0][0] = cy·cz, m[0][1] = −cy·sz, m[1][2] = −sx·cy, m[2][2] = cx·cy.
    let ay = m[0][2].clamp(-1.0, 1.0).asin();
    let az = (-m[0][1]).atan2(m[0][0]);
    let ax = (-m[1][2]).atan2(m[2][2]);
    (ax.abs() + ay.abs() + az.abs()).to_degrees()
}

/// A curved, asymmetric surface patch around the origin: a random cubic
/// height field, rotated and shifted at random.
pub fn surface_cloud<R: Rng>(n: usize, rng: &mut R) -> (Vec<Vec3>, Vec3) {
    let c: [f64; 6] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let rot = random_rotation(rng);
    let shift = Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
    let pts = (0..n)
        .map(|_| {
            let (x, y): (f64, f64) = (rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2));
            let z = 0.4 * (c[0] * x * x + c[1] * y * y + c[2] * x * y)
                + 0.2 * (c[3] * x * x * x + c[4] * y * y * x)
                + 0.1 * c[5] * x;
            rot.mul_vec(Vec3::new(x, y, z)) + shift
        })
        .collect();
    (pts, shift)
}

pub fn random_batch<R: Rng>(b: usize, d: usize, spread: f64, rng: &mut R) -> (Vec<Vec<f32>>, Vec<Vec3>) {
    let desc = (0..2 * b).map(|_| random_unit(d, rng)).collect();
    let anchors = random_points(b, spread, rng);
    // Positives sit close to their anchors, as after alignment.
    let jitter = random_points(b, 0.01, rng);
    let centres = anchors.iter().copied().chain(anchors.iter().zip(&jitter).map(|(a, j)| *a + *j)).collect();
    (desc, centres)
}

/// Curved surface samples so that the frame is well defined.
pub fn bumpy_cloud<R: Rng>(n: usize, rng: &mut R) -> Vec<Vec3> {
    let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    (0..n)
        .map(|_| {
            let (x, y): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            Vec3::new(x, y, 0.4 * (c[0] * x * x + c[1] * y * y + c[2] * x * y) + 0.15 * c[3] * x * x * x)
        })
        .collect()
}
