//! Matching and registration metrics, and PCA colouring of descriptors.
//!
//! All thresholds are strict: an inlier is closer than `τ₁`, a pair counts
//! toward the recall when its inlier ratio exceeds `τ₂`, and a registration
//! succeeds when both errors are below their limits.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::{rotation_to_euler, Mat3, PointCloud, RigidTransform, EULER_CONVENTION};
use crate::linalg::symmetric_eigen;
use crate::registration::MatchSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmrConfig {
    /// Inlier distance `τ₁`, cloud units.
    pub tau1: f64,
    /// Inlier-ratio threshold `τ₂`.
    pub tau2: f64,
    /// Minimum overlap `τ_o` of a pair to be evaluated.
    pub min_overlap: f64,
    /// Points sampled per cloud for description.
    pub sample_points: usize,
}

impl Default for FmrConfig {
    fn default() -> Self {
        FmrConfig { tau1: 0.10, tau2: 0.05, min_overlap: 0.30, sample_points: 5000 }
    }
}

impl FmrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau1 > 0.0) || !(self.tau2 > 0.0 && self.tau2 < 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "need tau1 > 0 and 0 < tau2 < 1, got {} and {}",
                self.tau1,
                self.tau2
            )));
        }
        Ok(())
    }
}

/// Inlier ratio `ξ` of one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InlierRatio {
    pub ratio: f64,
    /// Set when there were no matches; the ratio is then 0.
    pub empty: bool,
}

/// Fraction of matches whose points lie closer than `tau1` once B is mapped
/// into A by `t`.
pub fn inlier_ratio(matches: &MatchSet, a: &PointCloud, b: &PointCloud, t: &RigidTransform, tau1: f64) -> InlierRatio {
    if matches.is_empty() {
        return InlierRatio { ratio: 0.0, empty: true };
    }
    let hits = matches.matches.iter().filter(|m| a.points()[m.a].distance(t.apply(b.points()[m.b])) < tau1).count();
    InlierRatio { ratio: hits as f64 / matches.len() as f64, empty: false }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmrStats {
    pub recall: f64,
    pub mean: f64,
    /// Population standard deviation of the inlier ratios.
    pub std: f64,
}

pub fn feature_matching_recall(ratios: &[f64], tau2: f64) -> Result<FmrStats> {
    if ratios.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = ratios.len() as f64;
    let recall = ratios.iter().filter(|&&x| x > tau2).count() as f64 / n;
    let mean = ratios.iter().sum::<f64>() / n;
    let var = ratios.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Ok(FmrStats { recall, mean, std: var.sqrt() })
}

/// Relative translation error.
pub fn rte(ground_truth: &RigidTransform, estimate: &RigidTransform) -> f64 {
    ground_truth.translation.distance(estimate.translation)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationError {
    pub degrees: f64,
    pub gimbal_lock: bool,
}

/// Relative rotation error: the sum of the absolute Euler angles of
/// `R_gᵀ·R_e`, in degrees.
pub fn rre(ground_truth: &Mat3, estimate: &Mat3) -> RotationError {
    if ground_truth == estimate {
        // The relative rotation is exactly the identity; skip the rounding of RᵀR.
        return RotationError { degrees: 0.0, gimbal_lock: false };
    }
    let e = rotation_to_euler(&ground_truth.transpose().mul_mat(estimate));
    RotationError { degrees: (e.ax.abs() + e.ay.abs() + e.az.abs()).to_degrees(), gimbal_lock: e.gimbal_lock }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessStats {
    pub rate: f64,
    pub successes: usize,
    /// Means over successful pairs only; `None` without successes.
    pub mean_rte: Option<f64>,
    pub mean_rre: Option<f64>,
}

pub const DEFAULT_RTE_MAX: f64 = 2.0;
pub const DEFAULT_RRE_MAX: f64 = 5.0;

pub fn is_success(rte: f64, rre: f64, rte_max: f64, rre_max: f64) -> bool {
    rte < rte_max && rre < rre_max
}

/// `errors` holds `(rte, rre in degrees)` per pair.
pub fn success_rate(errors: &[(f64, f64)], rte_max: f64, rre_max: f64) -> Result<SuccessStats> {
    if errors.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let ok: Vec<(f64, f64)> = errors.iter().copied().filter(|&(t, r)| is_success(t, r, rte_max, rre_max)).collect();
    let k = ok.len();
    let mean = |f: fn(&(f64, f64)) -> f64| (k > 0).then(|| ok.iter().map(f).sum::<f64>() / k as f64);
    Ok(SuccessStats {
        rate: k as f64 / errors.len() as f64,
        successes: k,
        mean_rte: mean(|e| e.0),
        mean_rre: mean(|e| e.1),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaColors {
    pub colors: Vec<[f64; 3]>,
    /// Fewer than three non-zero principal values; missing channels are 0.5.
    pub rank_deficient: bool,
    /// Principal directions, each with its largest-magnitude loading positive.
    pub components: Vec<Vec<f64>>,
}

/// Projects centred descriptors on their top three principal directions and
/// rescales each channel to `[0, 1]`.
pub fn pca_colors<D: AsRef<[f32]>>(descriptors: &[D]) -> Result<PcaColors> {
    if descriptors.len() < 3 {
        return Err(Error::TooFewPoints { requested: 3, available: descriptors.len() });
    }
    let d = descriptors[0].as_ref().len();
    if let Some(f) = descriptors.iter().find(|f| f.as_ref().len() != d) {
        return Err(Error::DimensionMismatch { left: d, right: f.as_ref().len() });
    }
    let n = descriptors.len() as f64;
    let mut mean = vec![0.0; d];
    for f in descriptors {
        for (m, &v) in mean.iter_mut().zip(f.as_ref()) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let centred: Vec<Vec<f64>> =
        descriptors.iter().map(|f| f.as_ref().iter().zip(&mean).map(|(&v, m)| v as f64 - m).collect()).collect();
    let mut cov = vec![0.0; d * d];
    for row in &centred {
        for i in 0..d {
            for j in i..d {
                cov[i * d + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i * d + j] /= n;
            cov[j * d + i] = cov[i * d + j];
        }
    }
    let eig = symmetric_eigen(&cov, d);
    let top = eig.values.last().copied().unwrap_or(0.0);
    let mut components = Vec::new();
    let mut channels: Vec<Option<Vec<f64>>> = Vec::with_capacity(3);
    for c in 0..3 {
        let k = d.checked_sub(1 + c);
        let usable = k.is_some_and(|k| eig.values[k] > 0.0 && eig.values[k] > 1e-12 * top);
        if !usable {
            channels.push(None);
            continue;
        }
        let mut v = eig.vector(k.unwrap()).to_vec();
        let lead = v.iter().enumerate().fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let proj: Vec<f64> = centred.iter().map(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum()).collect();
        components.push(v);
        channels.push(Some(proj));
    }
    let rank_deficient = channels.iter().any(Option::is_none);
    let scaled: Vec<Vec<f64>> = channels
        .into_iter()
        .map(|ch| match ch {
            None => vec![0.5; descriptors.len()],
            Some(p) => {
                let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if hi > lo {
                    p.iter().map(|x| (x - lo) / (hi - lo)).collect()
                } else {
                    vec![0.5; p.len()]
                }
            }
        })
        .collect();
    let colors = (0..descriptors.len()).map(|i| [scaled[0][i], scaled[1][i], scaled[2][i]]).collect();
    Ok(PcaColors { colors, rank_deficient, components })
}

/// Outcome of one evaluated pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEvaluation {
    pub name: alloc::string::String,
    pub inlier_ratio: InlierRatio,
    pub matches: usize,
    pub rte: f64,
    pub rre: RotationError,
    pub success: bool,
}

impl PairEvaluation {
    pub fn new(
        name: alloc::string::String,
        inlier_ratio: InlierRatio,
        matches: usize,
        ground_truth: &RigidTransform,
        estimate: &RigidTransform,
        rte_max: f64,
        rre_max: f64,
    ) -> Self {
        let t = rte(ground_truth, estimate);
        let r = rre(&ground_truth.rotation, &estimate.rotation);
        PairEvaluation {
            name,
            inlier_ratio,
            matches,
            rte: t,
            rre: r,
            success: is_success(t, r.degrees, rte_max, rre_max),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub pairs: Vec<PairEvaluation>,
    pub fmr: FmrStats,
    pub success: SuccessStats,
    pub config: FmrConfig,
    pub rte_max: f64,
    pub rre_max: f64,
    pub euler_convention: &'static str,
}

impl EvalReport {
    pub fn new(pairs: Vec<PairEvaluation>, config: FmrConfig, rte_max: f64, rre_max: f64) -> Result<Self> {
        let ratios: Vec<f64> = pairs.iter().map(|p| p.inlier_ratio.ratio).collect();
        let fmr = feature_matching_recall(&ratios, config.tau2)?;
        let errors: Vec<(f64, f64)> = pairs.iter().map(|p| (p.rte, p.rre.degrees)).collect();
        let success = success_rate(&errors, rte_max, rre_max)?;
        Ok(EvalReport { pairs, fmr, success, config, rte_max, rre_max, euler_convention: EULER_CONVENTION })
    }
}
