//! Siamese training with the hardest-contrastive loss.
//!
//! Each iteration takes one registered cloud pair, samples `b` corresponding
//! centres in the overlap, canonicalises and augments the patches on both
//! sides, and encodes all `2b` patches with one set of parameters. For every
//! anchor the hardest negative is the closest descriptor of the minibatch
//! whose centre lies strictly outside the exclusion radius.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::encoder::EncoderModel;
use crate::error::{Error, Result};
use crate::geometry::{euler_to_rotation, Point3, PointCloud, RigidTransform};
use crate::lrf::{canonical_patch, CanonicalPatch, DegeneratePolicy, PatchConfig};
use crate::rng;
use crate::tensor::{Graph, HingeKind, HingeTerm, LrSchedule, OptimState};

/// Two registered clouds; `transform` maps points of `b` into the frame of `a`.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    pub a: PointCloud,
    pub b: PointCloud,
    pub transform: RigidTransform,
    pub overlap: f64,
}

/// How the terms of the loss are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossWeighting {
    /// `1/b` outside the sum, `1/|C₊|` on the positive term and
    /// `1/(2|C₋(f)|)` on each negative term.
    Literal,
    /// Mean positive term plus half the mean of each negative side.
    Conventional,
}

impl LossWeighting {
    pub fn name(self) -> &'static str {
        match self {
            LossWeighting::Literal => "literal",
            LossWeighting::Conventional => "conventional",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub pos_margin: f64,
    pub neg_margin: f64,
    /// Exclusion radius around each anchor centre, in cloud units.
    pub exclusion_radius: f64,
    /// Anchor pairs per iteration.
    pub b: usize,
    pub weighting: LossWeighting,
}

impl LossConfig {
    /// Margins `.1`/`1.4`, `b = 350` and exclusion radius `.2·r`.
    pub fn for_radius(r: f64) -> Self {
        LossConfig {
            pos_margin: 0.1,
            neg_margin: 1.4,
            exclusion_radius: 0.2 * r,
            b: 350,
            weighting: LossWeighting::Literal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.pos_margin && self.pos_margin < self.neg_margin) {
            return Err(Error::InvalidConfig(format!(
                "margins need 0 <= m+ < m-, got {} and {}",
                self.pos_margin, self.neg_margin
            )));
        }
        if !(self.exclusion_radius > 0.0) {
            return Err(Error::InvalidConfig("exclusion radius must be positive".into()));
        }
        if self.b == 0 {
            return Err(Error::InvalidConfig("b must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub iterations_per_epoch: usize,
    pub patch: PatchConfig,
    /// Each augmentation angle is uniform in `±augment_deg` degrees.
    pub augment_deg: f64,
    pub learning_rate: f64,
    pub lr_factor: f64,
    pub lr_interval_epochs: usize,
    pub weight_decay: f64,
    pub momentum: f64,
    pub seed: u64,
    /// Maximum aligned distance of a ground-truth correspondence.
    pub correspondence_tol: f64,
    /// Emit a checkpoint event every this many iterations; 0 disables.
    pub checkpoint_every: usize,
    /// Resampling attempts for an anchor whose frame is degenerate.
    pub max_retries: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 160_000,
            iterations_per_epoch: 16_000,
            patch: PatchConfig { radius: 0.5, m: 4000, n: 512, use_lrf: true },
            augment_deg: 10.0,
            learning_rate: 0.1,
            lr_factor: 0.1,
            lr_interval_epochs: 3,
            weight_decay: 5e-5,
            momentum: 0.0,
            seed: 0,
            correspondence_tol: 0.02,
            checkpoint_every: 0,
            max_retries: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.iterations_per_epoch == 0 {
            return bad("iterations per epoch must be positive");
        }
        if !(self.augment_deg >= 0.0) {
            return bad("augmentation bound must be non-negative");
        }
        if !(self.patch.radius > 0.0) || self.patch.n < 3 || self.patch.n >= self.patch.m {
            return bad("patch sizes need r > 0 and 3 <= n < m");
        }
        if !(self.correspondence_tol > 0.0) {
            return bad("correspondence tolerance must be positive");
        }
        Ok(())
    }

    pub fn schedule(&self) -> LrSchedule {
        LrSchedule {
            initial: self.learning_rate,
            factor: self.lr_factor,
            interval_epochs: self.lr_interval_epochs,
            iterations_per_epoch: self.iterations_per_epoch,
        }
    }
}

/// Ground-truth correspondences of a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondences {
    /// `(index in A, index in B)`, ordered by the index in A.
    pub pairs: Vec<(usize, usize)>,
    /// `|pairs| / min(|A|, |B|)`.
    pub overlap: f64,
}

/// Mutual nearest neighbours between `a` and `T·b` no farther apart than `tol`.
///
/// Both clouds are queried through their spatial index when present; any
/// nearest neighbour within `tol` is the global one, so restricting the
/// search to that radius changes nothing.
pub fn find_correspondences(a: &PointCloud, b: &PointCloud, t: &RigidTransform, tol: f64) -> Result<Correspondences> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let moved = PointCloud::new(b.points().iter().map(|&p| t.apply(p)).collect()).with_index(tol)?;
    let a_indexed;
    let a = if a.index().is_some() {
        a
    } else {
        a_indexed = a.clone().with_index(tol)?;
        &a_indexed
    };
    let mut pairs = Vec::new();
    for (j, &p) in moved.points().iter().enumerate() {
        if let Some((i, _)) = a.nearest_within(p, tol)? {
            if let Some((back, _)) = moved.nearest_within(a.points()[i], tol)? {
                if back == j {
                    pairs.push((i, j));
                }
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoOverlap);
    }
    pairs.sort_unstable();
    let overlap = pairs.len() as f64 / a.len().min(b.len()) as f64;
    Ok(Correspondences { pairs, overlap })
}

/// `b` correspondences drawn uniformly: without replacement when there are
/// enough, otherwise with replacement.
pub fn sample_anchor_pairs<R: Rng + ?Sized>(corr: &[(usize, usize)], b: usize, rng: &mut R) -> Vec<(usize, usize)> {
    if corr.is_empty() {
        return Vec::new();
    }
    if corr.len() >= b {
        crate::lrf::sample_indices(corr.len(), b, rng).into_iter().map(|i| corr[i]).collect()
    } else {
        (0..b).map(|_| corr[rng.random_range(0..corr.len())]).collect()
    }
}

/// Rotates the patch by Euler angles drawn uniformly in `±bound_deg`.
pub fn augment_patch<R: Rng + ?Sized>(cp: &CanonicalPatch, bound_deg: f64, rng: &mut R) -> CanonicalPatch {
    let mut out = cp.clone();
    if bound_deg == 0.0 {
        return out;
    }
    let b = bound_deg.to_radians();
    let mut angle = || rng.random_range(-b..=b);
    let (ax, ay, az) = (angle(), angle(), angle());
    let r = euler_to_rotation(ax, ay, az);
    for p in &mut out.points {
        *p = r.mul_vec(*p);
    }
    out
}

/// Hardest admissible negative of one anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinedNegative {
    /// Row of the negative in the pool, `None` when `C₋` is empty.
    pub index: Option<usize>,
    pub distance: f64,
    /// `|C₋(f)|`.
    pub admissible: usize,
}

fn row_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// For each of the `2b` rows (anchors `0..b`, their positives `b..2b`) the
/// closest other row whose centre lies strictly farther than `exclusion`
/// from the row's own centre. The row itself and its positive are never
/// candidates. Ties go to the lowest row.
pub fn mine_hardest_negatives(
    descriptors: &[&[f32]],
    centres: &[Point3],
    exclusion: f64,
) -> Result<Vec<MinedNegative>> {
    let rows = descriptors.len();
    if !rows.is_multiple_of(2) || centres.len() != rows {
        return Err(Error::ShapeMismatch(format!("{rows} descriptors with {} centres", centres.len())));
    }
    let b = rows / 2;
    let partner = |i: usize| if i < b { i + b } else { i - b };
    let ex2 = exclusion * exclusion;
    Ok((0..rows)
        .map(|i| {
            let mut best: Option<(usize, f64)> = None;
            let mut admissible = 0;
            for j in 0..rows {
                if j == i || j == partner(i) || centres[j].distance_squared(centres[i]) <= ex2 {
                    continue;
                }
                admissible += 1;
                let d = row_distance(descriptors[i], descriptors[j]);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
            MinedNegative { index: best.map(|(j, _)| j), distance: best.map_or(f64::NAN, |(_, d)| d), admissible }
        })
        .collect())
}

/// Weighted squared-hinge terms of the loss over the `2b` rows.
pub fn loss_terms(b: usize, mined: &[MinedNegative], cfg: &LossConfig) -> Vec<HingeTerm> {
    let bf = b as f64;
    let pos_weight = match cfg.weighting {
        LossWeighting::Literal => 1.0 / (bf * bf),
        LossWeighting::Conventional => 1.0 / bf,
    };
    let mut terms = Vec::with_capacity(3 * b);
    for k in 0..b {
        terms.push(HingeTerm { i: k, j: k + b, margin: cfg.pos_margin, weight: pos_weight, kind: HingeKind::Positive });
        for row in [k, k + b] {
            let m = &mined[row];
            if let Some(j) = m.index {
                let weight = match cfg.weighting {
                    LossWeighting::Literal => 1.0 / (bf * 2.0 * m.admissible as f64),
                    LossWeighting::Conventional => 1.0 / (2.0 * bf),
                };
                terms.push(HingeTerm { i: row, j, margin: cfg.neg_margin, weight, kind: HingeKind::Negative });
            }
        }
    }
    terms
}

/// Loss value of `2b` descriptor rows with mined negatives.
pub fn hardest_contrastive_loss(descriptors: &[&[f32]], mined: &[MinedNegative], cfg: &LossConfig) -> f64 {
    let b = descriptors.len() / 2;
    loss_terms(b, mined, cfg)
        .iter()
        .map(|t| {
            let d = row_distance(descriptors[t.i], descriptors[t.j]);
            let h = match t.kind {
                HingeKind::Positive => d - t.margin,
                HingeKind::Negative => t.margin - d,
            }
            .max(0.0);
            t.weight * h * h
        })
        .sum()
}

/// Canonicalised, augmented patches of one minibatch: rows `0..b` come from
/// cloud A, rows `b..2b` from cloud B, and `centres` holds every centre in
/// the frame of A.
#[derive(Debug, Clone)]
pub struct Minibatch {
    pub pair: usize,
    pub patches: Vec<CanonicalPatch>,
    pub centres: Vec<Point3>,
}

impl Minibatch {
    pub fn b(&self) -> usize {
        self.patches.len() / 2
    }
}

fn patch_stream(seed: u64, iteration: usize, side: u64, anchor: usize, attempt: usize) -> rng::Rng {
    let id = ((iteration as u64) << 24) | (side << 23) | ((anchor as u64) << 4) | attempt as u64;
    rng::stream(seed, id)
}

/// Samples anchors of one pair and prepares both sides. Anchors whose frame
/// stays degenerate after `cfg.max_retries` resamples are dropped.
pub fn prepare_minibatch(
    pair_id: usize,
    pair: &TrainingPair,
    corr: &[(usize, usize)],
    cfg: &TrainConfig,
    b: usize,
    iteration: usize,
) -> Result<Minibatch> {
    let mut pick = rng::stream(cfg.seed ^ 0xA5A5_5A5A_0F0F_F0F0, iteration as u64);
    let anchors = sample_anchor_pairs(corr, b, &mut pick);
    let mut a_side = Vec::with_capacity(b);
    let mut b_side = Vec::with_capacity(b);
    let mut centres_a = Vec::with_capacity(b);
    let mut centres_b = Vec::with_capacity(b);
    for (k, &first) in anchors.iter().enumerate() {
        let mut cand = first;
        for attempt in 0..=cfg.max_retries {
            let ca = pair.a.points()[cand.0];
            let cb = pair.b.points()[cand.1];
            let mut ra = patch_stream(cfg.seed, iteration, 0, k, attempt);
            let mut rb = patch_stream(cfg.seed, iteration, 1, k, attempt);
            let pa = canonical_patch(&pair.a, ca, &cfg.patch, DegeneratePolicy::Fail, &mut ra);
            let pb = canonical_patch(&pair.b, cb, &cfg.patch, DegeneratePolicy::Fail, &mut rb);
            match (pa, pb) {
                (Ok(pa), Ok(pb)) => {
                    a_side.push(augment_patch(&pa, cfg.augment_deg, &mut ra));
                    b_side.push(augment_patch(&pb, cfg.augment_deg, &mut rb));
                    centres_a.push(ca);
                    centres_b.push(pair.transform.apply(cb));
                    break;
                }
                (Err(e), _) | (_, Err(e)) if is_degenerate(&e) => {
                    cand = corr[pick.random_range(0..corr.len())];
                }
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        }
    }
    a_side.append(&mut b_side);
    centres_a.append(&mut centres_b);
    Ok(Minibatch { pair: pair_id, patches: a_side, centres: centres_a })
}

fn is_degenerate(e: &Error) -> bool {
    matches!(e, Error::DegenerateEigen | Error::DegenerateLrf | Error::PatchTooSmall { .. })
}

/// Per-iteration statistics; `Display` gives the tab-separated log line
/// `iter, pair, loss, positive mean, negative mean, lr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    pub iteration: usize,
    pub pair: usize,
    pub loss: f64,
    pub pos_mean: f64,
    pub neg_mean: f64,
    pub lr: f64,
    pub anchors: usize,
}

impl fmt::Display for TrainRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{:.9e}\t{:.6}\t{:.6}\t{:e}",
            self.iteration, self.pair, self.loss, self.pos_mean, self.neg_mean, self.lr
        )
    }
}

/// One forward/backward/update on a prepared minibatch.
pub fn train_step(
    model: &mut EncoderModel,
    optim: &mut OptimState,
    batch: &Minibatch,
    loss_cfg: &LossConfig,
    iteration: usize,
    seed: u64,
) -> Result<TrainRecord> {
    let b = batch.b();
    let lr = optim.learning_rate();
    let mut dropout_rng = rng::stream(seed ^ 0x5DEE_CE66_D1CE_4E5B, iteration as u64);
    let (loss, pos_mean, neg_mean, grads) = {
        let mut g = Graph::new(&model.params);
        let f = model.forward(&mut g, &batch.patches, true, &mut dropout_rng)?;
        let fv = g.value(f);
        let rows: Vec<&[f32]> = (0..2 * b).map(|r| fv.row(r)).collect();
        let mined = mine_hardest_negatives(&rows, &batch.centres, loss_cfg.exclusion_radius)?;
        let pos_mean = (0..b).map(|k| row_distance(rows[k], rows[k + b])).sum::<f64>() / b as f64;
        let negs: Vec<f64> = mined.iter().filter(|m| m.index.is_some()).map(|m| m.distance).collect();
        let neg_mean = if negs.is_empty() { f64::NAN } else { negs.iter().sum::<f64>() / negs.len() as f64 };
        let terms = loss_terms(b, &mined, loss_cfg);
        let loss = g.hinge_loss(f, terms)?;
        let value = g.value(loss).data()[0] as f64;
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss { iteration });
        }
        (value, pos_mean, neg_mean, g.backward(loss)?)
    };
    model.params.accumulate(&grads);
    optim.sgd_step(&mut model.params)?;
    Ok(TrainRecord { iteration, pair: batch.pair, loss, pos_mean, neg_mean, lr, anchors: b })
}

/// Callback events of [`train`].
#[derive(Debug)]
pub enum TrainEvent<'a> {
    Iteration(&'a TrainRecord),
    Checkpoint { iteration: usize, model: &'a EncoderModel },
}

/// Runs `cfg.iterations` updates, picking a pair uniformly per iteration.
pub fn train(
    model: &mut EncoderModel,
    pairs: &[TrainingPair],
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    observer: &mut dyn FnMut(TrainEvent<'_>) -> Result<()>,
) -> Result<Vec<TrainRecord>> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cfg.validate()?;
    loss_cfg.validate()?;
    let indexed: Vec<TrainingPair> = pairs
        .iter()
        .map(|p| {
            Ok(TrainingPair {
                a: p.a.clone().with_index(cfg.patch.radius)?,
                b: p.b.clone().with_index(cfg.patch.radius)?,
                transform: p.transform,
                overlap: p.overlap,
            })
        })
        .collect::<Result<_>>()?;
    let corr: Vec<Vec<(usize, usize)>> = indexed
        .iter()
        .map(|p| find_correspondences(&p.a, &p.b, &p.transform, cfg.correspondence_tol).map(|c| c.pairs))
        .collect::<Result<_>>()?;
    let mut optim = OptimState::new(cfg.schedule(), cfg.weight_decay, cfg.momentum)?;
    let mut log = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let pair_id = rng::stream(cfg.seed, u64::MAX - it as u64).random_range(0..indexed.len());
        let batch = prepare_minibatch(pair_id, &indexed[pair_id], &corr[pair_id], cfg, loss_cfg.b, it)?;
        if batch.b() == 0 {
            continue;
        }
        let rec = train_step(model, &mut optim, &batch, loss_cfg, it, cfg.seed)?;
        observer(TrainEvent::Iteration(&rec))?;
        log.push(rec);
        if cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0 {
            observer(TrainEvent::Checkpoint { iteration: it + 1, model })?;
        }
    }
    Ok(log)
}
