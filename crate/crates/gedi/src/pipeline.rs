//! Describe, match, register and evaluate whole clouds.

use gedi_core::encoder::EncoderModel;
use gedi_core::evaluation::{inlier_ratio, EvalReport, FmrConfig, PairEvaluation};
use gedi_core::lrf::{canonical_patch, sample_indices, DegeneratePolicy, PatchConfig};
use gedi_core::registration::{mutual_nearest_neighbors, ransac_register, MatchSet, RansacConfig, RegistrationResult};
use gedi_core::{rng, PointCloud, RigidTransform};
use rayon::prelude::*;

use crate::descriptor_io::{DescriptorFile, FLAG_FALLBACK_FRAME};
use crate::error::{Error, Result};

/// Patches encoded per network call. Fixed so results do not depend on the
/// number of worker threads.
pub const ENCODE_CHUNK: usize = 32;

/// Worker pool capped by the `GEDI_THREADS` environment variable.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("GEDI_THREADS") {
        let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| Error::Config(format!("GEDI_THREADS={v:?}")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescribeConfig {
    pub patch: PatchConfig,
    /// Points described per cloud; all points when the cloud is smaller.
    pub count: usize,
    pub seed: u64,
}

/// Seeded uniform sample of point indices, ascending.
pub fn sample_keypoints(len: usize, count: usize, seed: u64) -> Vec<u32> {
    let mut idx: Vec<u32> = if count >= len {
        (0..len as u32).collect()
    } else {
        sample_indices(len, count, &mut rng::stream(seed, u64::MAX)).into_iter().map(|i| i as u32).collect()
    };
    idx.sort_unstable();
    idx
}

/// Descriptors of seeded sample points of `cloud`. Patches whose frame cannot
/// be estimated use the identity and are flagged.
pub fn describe_cloud(model: &EncoderModel, cloud: &PointCloud, cfg: &DescribeConfig) -> Result<DescriptorFile> {
    let indexed;
    let cloud = if cloud.index().is_some() {
        cloud
    } else {
        indexed = cloud.clone().with_index(cfg.patch.radius)?;
        &indexed
    };
    let indices = sample_keypoints(cloud.len(), cfg.count, cfg.seed);
    let encode_chunk = |chunk: &[u32]| -> Result<(Vec<_>, Vec<u8>)> {
        let patches = chunk
            .iter()
            .map(|&i| {
                let mut r = rng::stream(cfg.seed, i as u64);
                canonical_patch(cloud, cloud.points()[i as usize], &cfg.patch, DegeneratePolicy::IdentityFrame, &mut r)
            })
            .collect::<gedi_core::Result<Vec<_>>>()?;
        let flags = patches.iter().map(|p| if p.fallback_frame { FLAG_FALLBACK_FRAME } else { 0 }).collect();
        Ok((model.encode_batch(&patches, false, &mut rng::seeded(0))?, flags))
    };
    let parts: Vec<_> =
        thread_pool()?.install(|| indices.par_chunks(ENCODE_CHUNK).map(encode_chunk).collect::<Result<Vec<_>>>())?;
    let mut file = DescriptorFile { dim: model.config().d, indices, ..Default::default() };
    for (d, f) in parts {
        file.descriptors.extend(d);
        file.flags.extend(f);
    }
    Ok(file)
}

/// The described points of `cloud`, in descriptor order.
pub fn keypoints(cloud: &PointCloud, file: &DescriptorFile) -> Result<PointCloud> {
    file.indices
        .iter()
        .map(|&i| {
            cloud.points().get(i as usize).copied().ok_or_else(|| {
                Error::Config(format!("descriptor index {i} is outside a cloud of {} points", cloud.len()))
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(PointCloud::new)
}

/// Mutual nearest neighbours in descriptor space; indices refer to descriptor rows.
pub fn match_descriptors(a: &DescriptorFile, b: &DescriptorFile) -> Result<MatchSet> {
    Ok(mutual_nearest_neighbors(&a.descriptors, &b.descriptors)?)
}

/// Pose mapping cloud B into cloud A estimated from descriptor matches.
pub fn register_clouds(
    a: &PointCloud,
    b: &PointCloud,
    da: &DescriptorFile,
    db: &DescriptorFile,
    cfg: &RansacConfig,
) -> Result<RegistrationResult> {
    let matches = match_descriptors(da, db)?;
    Ok(ransac_register(&matches, &keypoints(a, da)?, &keypoints(b, db)?, cfg)?)
}

/// Everything needed to evaluate one pair.
pub struct PairInputs<'a> {
    pub name: String,
    pub a: &'a PointCloud,
    pub b: &'a PointCloud,
    pub da: &'a DescriptorFile,
    pub db: &'a DescriptorFile,
    pub ground_truth: RigidTransform,
    pub estimate: RigidTransform,
}

pub fn evaluate_pair(p: &PairInputs<'_>, cfg: &FmrConfig, rte_max: f64, rre_max: f64) -> Result<PairEvaluation> {
    let matches = match_descriptors(p.da, p.db)?;
    let ir = inlier_ratio(&matches, &keypoints(p.a, p.da)?, &keypoints(p.b, p.db)?, &p.ground_truth, cfg.tau1);
    Ok(PairEvaluation::new(p.name.clone(), ir, matches.len(), &p.ground_truth, &p.estimate, rte_max, rre_max))
}

pub fn evaluate(pairs: &[PairInputs<'_>], cfg: &FmrConfig, rte_max: f64, rre_max: f64) -> Result<EvalReport> {
    let evals = pairs.iter().map(|p| evaluate_pair(p, cfg, rte_max, rre_max)).collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::new(evals, *cfg, rte_max, rre_max)?)
}
