//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails.
//!
//! Desk-scale artefacts are kept under `<target>/tmp/acceptance/` for
//! inspection.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use common::*;
use gedi::cloud_io::load_cloud;
use gedi::config::ConfigFile;
use gedi::descriptor_io::load_descriptors;
use gedi::manifest::DatasetManifest;
use gedi::pipeline::{evaluate, PairInputs};
use gedi::pose_io::load_pose;
use gedi_core::encoder::*;
use gedi_core::evaluation::*;
use gedi_core::lrf::*;
use gedi_core::registration::*;
use gedi_core::tensor::sweep::{layer_sweep, LAYER_TOLERANCE};
use gedi_core::tensor::{Graph, ParamStore, Tensor};
use gedi_core::training::*;
use gedi_core::{Mat3, PointCloud, RigidTransform, Vec3};
use rand::seq::SliceRandom;
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn work_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn desk_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.cfg")
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut worst_layer: f64 = 0.0;
    for r in layer_sweep(0).map_err(|e| e.to_string())? {
        check(r.passed(LAYER_TOLERANCE), format!("{} at {:.2e}", r.layer, r.max_relative_error))?;
        worst_layer = worst_layer.max(r.max_relative_error);
    }
    let enc = encoder_gradient_check(0, 6).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    check(enc.max_relative_error < ENCODER_GRADIENT_TOLERANCE, format!("encoder at {:.2e}", enc.max_relative_error))?;
    check(secs < 120.0, format!("took {secs:.1} s"))?;
    Ok(format!("layers {worst_layer:.1e}, encoder {:.1e}, {secs:.1} s", enc.max_relative_error))
}

fn canonical(points: &[Vec3], centre: Vec3, r: f64) -> gedi_core::Result<Vec<Vec3>> {
    let patch = extract_patch(&PointCloud::new(points.to_vec()), centre, r)?;
    let frame = compute_lrf(&patch)?;
    Ok(canonicalise_points(&patch, &frame))
}

fn max_diff(a: &[Vec3], b: &[Vec3]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(p, q)| dist(*p, *q)).fold(0.0, f64::max)
}

fn lrf_invariance() -> Outcome {
    let mut rng = seeded(1000);
    let (mut tested, mut rot_ok) = (0, 0);
    let (mut worst_scale, mut worst_shift): (f64, f64) = (0.0, 0.0);
    while tested < 200 {
        let (pts, centre) = surface_cloud(400, &mut rng);
        let Ok(base) = canonical(&pts, centre, 1.0) else { continue };
        tested += 1;
        let t = RigidTransform::new(random_rotation(&mut rng), random_points(1, 3.0, &mut rng)[0]).unwrap();
        let moved: Vec<Vec3> = pts.iter().map(|&p| t.apply(p)).collect();
        if canonical(&moved, t.apply(centre), 1.0).is_ok_and(|c| max_diff(&c, &base) <= 1e-5) {
            rot_ok += 1;
        }
        let s = rng.random_range(0.1..10.0);
        let scaled: Vec<Vec3> = pts.iter().map(|&p| p * s).collect();
        worst_scale = worst_scale.max(canonical(&scaled, centre * s, s).map_or(f64::INFINITY, |c| max_diff(&c, &base)));
        let shifted: Vec<Vec3> = pts.iter().map(|&p| p + t.translation).collect();
        worst_shift = worst_shift
            .max(canonical(&shifted, centre + t.translation, 1.0).map_or(f64::INFINITY, |c| max_diff(&c, &base)));
    }
    check(rot_ok * 100 >= 99 * tested, format!("rotation held on {rot_ok}/{tested}"))?;
    check(worst_scale <= 1e-9 && worst_shift <= 1e-9, format!("scale {worst_scale:.1e}, shift {worst_shift:.1e}"))?;
    Ok(format!("rotation {rot_ok}/{tested}, scale {worst_scale:.1e}, translation {worst_shift:.1e}"))
}

fn descriptor_contracts() -> Outcome {
    let model = EncoderModel::new(EncoderConfig::desk(16), &mut seeded(1100)).unwrap();
    let mut rng = seeded(1101);
    let mut worst_norm: f64 = 0.0;
    for _ in 0..20 {
        let patches: Vec<Vec<Vec3>> = (0..50).map(|_| random_ball_points(64, &mut rng)).collect();
        for f in model.encode_batch(&patches, false, &mut seeded(0)).unwrap() {
            worst_norm = worst_norm.max((f.norm() - 1.0).abs());
        }
    }
    let mut worst_perm: f64 = 0.0;
    for _ in 0..50 {
        let pts = random_ball_points(64, &mut rng);
        let mut shuffled = pts.clone();
        shuffled.shuffle(&mut rng);
        let a = model.encode(&pts, false, &mut seeded(0)).unwrap();
        worst_perm = worst_perm.max(a.distance(&model.encode(&shuffled, false, &mut seeded(0)).unwrap()));
    }
    let cfg = PatchConfig { radius: 0.8, m: 256, n: 128, use_lrf: true };
    let mut worst_cos: f64 = 1.0;
    let mut tested = 0;
    while tested < 50 {
        let pts = bumpy_cloud(2000, &mut rng);
        let centre = pts[0];
        let Ok(a) =
            canonical_patch(&PointCloud::new(pts.clone()), centre, &cfg, DegeneratePolicy::Fail, &mut seeded(tested))
        else {
            continue;
        };
        let t = RigidTransform::new(random_rotation(&mut rng), Vec3::new(1.0, -2.0, 0.5)).unwrap();
        let moved = PointCloud::new(pts.iter().map(|&p| t.apply(p)).collect());
        let b = canonical_patch(&moved, t.apply(centre), &cfg, DegeneratePolicy::Fail, &mut seeded(tested))
            .map_err(|e| e.to_string())?;
        let fa = model.encode(&a.points, false, &mut seeded(0)).unwrap();
        let fb = model.encode(&b.points, false, &mut seeded(0)).unwrap();
        let dot: f64 = fa.values.iter().zip(&fb.values).map(|(x, y)| *x as f64 * *y as f64).sum();
        worst_cos = worst_cos.min(dot / (fa.norm() * fb.norm()));
        tested += 1;
    }
    check(worst_norm < 1e-5, format!("norm error {worst_norm:.1e}"))?;
    check(worst_perm < 1e-5, format!("permutation error {worst_perm:.1e}"))?;
    check(worst_cos >= 0.999, format!("rotated cosine {worst_cos}"))?;
    Ok(format!("norm {worst_norm:.1e} over 1000, permutation {worst_perm:.1e}, rotated cosine >= {worst_cos:.6}"))
}

fn rows(desc: &[Vec<f32>]) -> Vec<&[f32]> {
    desc.iter().map(|r| r.as_slice()).collect()
}

fn loss_oracle() -> Outcome {
    let mut rng = seeded(1200);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let b = rng.random_range(1..=32);
        let (desc, centres) = random_batch(b, rng.random_range(2..20), 1.0, &mut rng);
        let ex = rng.random_range(0.05..0.8);
        let cfg =
            LossConfig { pos_margin: 0.1, neg_margin: 1.4, exclusion_radius: ex, b, weighting: LossWeighting::Literal };
        let expected = contrastive_loss_loops(&desc, &centres, ex, cfg.pos_margin, cfg.neg_margin);
        let mined = mine_hardest_negatives(&rows(&desc), &centres, ex).unwrap();
        worst = worst.max((hardest_contrastive_loss(&rows(&desc), &mined, &cfg) - expected).abs());

        let flat: Vec<f32> = desc.iter().flatten().copied().collect();
        let p = ParamStore::<f32>::new();
        let mut g = Graph::new(&p);
        let x = g.input(Tensor::new(&[2 * b, desc[0].len()], flat).unwrap());
        let l = g.hinge_loss(x, loss_terms(b, &mined, &cfg)).unwrap();
        worst = worst.max((g.scalar_value(l) - expected).abs());

        for (i, m) in mined.iter().enumerate() {
            if let Some(j) = m.index {
                check(
                    dist(centres[i], centres[j]) > ex,
                    format!("negative {j} of row {i} inside the exclusion radius"),
                )?;
            }
        }
    }
    check(worst <= 1e-6, format!("loss error {worst:.1e}"))?;
    Ok(format!("max deviation {worst:.1e} over 100 batches, exclusion exact"))
}

fn oracles() -> Outcome {
    let mut rng = seeded(1300);
    for _ in 0..100 {
        let pts = random_points(rng.random_range(1..2000), 1.0, &mut rng);
        let c = random_points(1, 1.2, &mut rng)[0];
        let r = rng.random_range(0.0..0.6);
        let cloud = PointCloud::new(pts.clone()).build_spatial_index(rng.random_range(0.05..0.6)).unwrap();
        check(cloud.radius_neighbors(c, r).unwrap() == radius_scan(&pts, c, r), "radius search")?;
    }
    for _ in 0..100 {
        let d = rng.random_range(1..20);
        let fa: Vec<Vec<f32>> = (0..rng.random_range(1..80)).map(|_| random_unit(d, &mut rng)).collect();
        let fb: Vec<Vec<f32>> = (0..rng.random_range(1..80)).map(|_| random_unit(d, &mut rng)).collect();
        let got: Vec<(usize, usize)> =
            mutual_nearest_neighbors(&fa, &fb).unwrap().matches.iter().map(|m| (m.a, m.b)).collect();
        check(got == mutual_nn(&fa, &fb), "mutual nearest neighbours")?;
    }
    for _ in 0..100 {
        let pts = random_points(rng.random_range(1..200), 1.0, &mut rng);
        let k = rng.random_range(1..=pts.len());
        check(farthest_point_sampling(&pts, k).unwrap() == greedy_fps(&pts, k), "farthest point sampling")?;
    }
    for _ in 0..100 {
        let b = rng.random_range(1..=32);
        let (desc, centres) = random_batch(b, 8, 1.0, &mut rng);
        let ex = rng.random_range(0.05..1.0);
        let mined = mine_hardest_negatives(&rows(&desc), &centres, ex).unwrap();
        for (m, o) in mined.iter().zip(hardest_negatives(&desc, &centres, ex)) {
            let same = match o {
                Some((j, d, pool)) => m.index == Some(j) && (m.distance - d).abs() <= 1e-10 && m.admissible == pool,
                None => m.index.is_none() && m.admissible == 0,
            };
            check(same, "hardest-negative mining")?;
        }
    }
    for _ in 0..100 {
        let (pts, centre) = surface_cloud(200, &mut rng);
        let patch =
            Patch { centre, radius: 2.0, points: radius_scan(&pts, centre, 2.0).into_iter().map(|i| pts[i]).collect() };
        let cov = compute_covariance(&patch);
        let oracle = covariance_about(&patch.points, centre);
        for a in 0..3 {
            for b in 0..3 {
                check((cov.0[a][b] - oracle[a][b]).abs() <= 1e-10, "covariance")?;
            }
        }
    }
    for _ in 0..100 {
        let ratios: Vec<f64> = (0..rng.random_range(1..60)).map(|_| rng.random_range(0.0..1.0)).collect();
        let tau2 = rng.random_range(0.01..0.99);
        let got = feature_matching_recall(&ratios, tau2).unwrap();
        let (recall, mean, std) = fmr_stats(&ratios, tau2);
        check(
            got.recall == recall && (got.mean - mean).abs() <= 1e-10 && (got.std - std).abs() <= 1e-10,
            "FMR statistics",
        )?;
    }
    Ok("radius, mutual NN, FPS, mining, covariance, FMR: 100 instances each".into())
}

fn registration() -> Outcome {
    let mut rng = seeded(1400);
    let (mut worst_t, mut worst_r): (f64, f64) = (0.0, 0.0);
    for trial in 0..100 {
        let t = RigidTransform::new(random_rotation(&mut rng), random_points(1, 3.0, &mut rng)[0]).unwrap();
        let (a, b, ms) = synthetic_matches(100, 0.0, 0.0, &t, &mut rng);
        let res = ransac_register(&ms, &a, &b, &RansacConfig::new(0.05, trial)).map_err(|e| e.to_string())?;
        worst_t = worst_t.max(rte(&t, &res.transform));
        worst_r = worst_r.max(rre(&t.rotation, &res.transform.rotation).degrees);
    }
    check(worst_t < 1e-6 && worst_r < 1e-6, format!("noise-free RTE {worst_t:.1e}, RRE {worst_r:.1e}"))?;
    let mut ok = 0;
    for trial in 0..100 {
        let t = RigidTransform::new(random_rotation(&mut rng), random_points(1, 3.0, &mut rng)[0]).unwrap();
        let (a, b, ms) = synthetic_matches(200, 0.5, 0.005, &t, &mut rng);
        if let Ok(res) = ransac_register(&ms, &a, &b, &RansacConfig::new(0.05, trial)) {
            if is_success(rte(&t, &res.transform), rre(&t.rotation, &res.transform.rotation).degrees, 2.0, 5.0) {
                ok += 1;
            }
        }
    }
    check(ok >= 95, format!("{ok}/100 with outliers"))?;
    Ok(format!("noise-free RTE {worst_t:.1e} m, RRE {worst_r:.1e} deg; {ok}/100 with 50% outliers"))
}

fn gedi(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out =
        Command::new(env!("CARGO_BIN_EXE_gedi")).current_dir(dir).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("gedi {}: {}", args[0], String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// `gen`, `train`, then `describe`, `match`, `register` and `pca-viz` on every
/// test pair, and `eval`. Returns the training wall time in seconds.
fn pipeline(dir: &Path, cfg: &Path) -> Result<f64, String> {
    let _ = fs::remove_dir_all(dir);
    fs::create_dir_all(dir.join("desc")).map_err(|e| e.to_string())?;
    fs::create_dir_all(dir.join("poses")).map_err(|e| e.to_string())?;
    let cfg = s(cfg);
    gedi(dir, &["gen", "--config", cfg, "--out", "data"])?;
    let start = Instant::now();
    gedi(
        dir,
        &["train", "--config", cfg, "--manifest", "data/train.txt", "--out", "model.gedi", "--log", "train.log"],
    )?;
    let train_secs = start.elapsed().as_secs_f64();
    let test = DatasetManifest::load(dir.join("data/test.txt")).map_err(|e| e.to_string())?;
    for e in &test.entries {
        let mut descs = Vec::new();
        for cloud in [&e.cloud_a, &e.cloud_b] {
            let out = dir.join("desc").join(cloud.file_stem().unwrap()).with_extension("gedf");
            gedi(dir, &["describe", "--model", "model.gedi", "--cloud", s(cloud), "--config", cfg, "--out", s(&out)])?;
            descs.push(out);
        }
        let name = e.pose.file_stem().unwrap().to_string_lossy().into_owned();
        let matches = dir.join("poses").join(format!("{name}.matches"));
        gedi(dir, &["match", "--a", s(&descs[0]), "--b", s(&descs[1]), "--out", s(&matches)])?;
        let pose = dir.join("poses").join(e.pose.file_name().unwrap());
        gedi(
            dir,
            &[
                "register",
                "--cloud-a",
                s(&e.cloud_a),
                "--cloud-b",
                s(&e.cloud_b),
                "--desc-a",
                s(&descs[0]),
                "--desc-b",
                s(&descs[1]),
                "--config",
                cfg,
                "--out",
                s(&pose),
            ],
        )?;
        let viz = dir.join("poses").join(format!("{name}_pca.ply"));
        gedi(dir, &["pca-viz", "--cloud", s(&e.cloud_a), "--descriptors", s(&descs[0]), "--out", s(&viz)])?;
    }
    gedi(
        dir,
        &[
            "eval",
            "--manifest",
            "data/test.txt",
            "--descriptors",
            "desc",
            "--poses",
            "poses",
            "--config",
            cfg,
            "--out",
            "report.json",
        ],
    )?;
    Ok(train_secs)
}

fn desk_end_to_end() -> Outcome {
    let cfg_path = desk_config();
    let cfg = ConfigFile::load(&cfg_path).map_err(|e| e.to_string())?;
    let (patch, n_test) = cfg.patch().map_err(|e| e.to_string())?;
    let enc = cfg.encoder().map_err(|e| e.to_string())?;
    let train = cfg.train(patch).map_err(|e| e.to_string())?;
    let loss = cfg.loss(patch.radius).map_err(|e| e.to_string())?;
    let (n_train_pairs, n_test_pairs) = cfg.dataset().map_err(|e| e.to_string())?;
    check(
        (n_train_pairs, n_test_pairs, enc.d, patch.n, n_test, loss.b) == (24, 8, 16, 128, 256, 64)
            && train.iterations <= 2000,
        "desk configuration differs from the required scale",
    )?;
    let dir = work_dir().join("desk");
    let train_secs = pipeline(&dir, &cfg_path)?;
    let train_manifest = DatasetManifest::load(dir.join("data/train.txt")).map_err(|e| e.to_string())?;
    check(train_manifest.entries.len() == 24, "training manifest size")?;
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("report.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let recall = report["fmr"]["recall"].as_f64().unwrap_or(0.0);
    let successes = report["registration"]["successes"].as_u64().unwrap_or(0);
    let pairs = report["pairs"].as_array().map_or(0, Vec::len);
    let detail = format!(
        "FMR {recall:.3} (mean ratio {:.3}), {successes}/{pairs} registrations, training {:.0} s",
        report["fmr"]["mean_inlier_ratio"].as_f64().unwrap_or(0.0),
        train_secs
    );
    check(pairs == 8 && recall >= 0.8 && successes >= 7 && train_secs < 1800.0, detail.clone())?;
    Ok(detail)
}

fn metrics() -> Outcome {
    let a = RigidTransform::new(Mat3::IDENTITY, Vec3::new(1.0, 0.0, 0.0)).unwrap();
    check(rte(&a, &a) == 0.0 && rte(&a, &RigidTransform::IDENTITY) == 1.0, "rte examples")?;
    let r = Mat3::rot_z(0.7).mul_mat(&Mat3::rot_x(-0.2));
    let five = rre(&Mat3::IDENTITY, &Mat3::rot_z(5f64.to_radians())).degrees;
    check(rre(&r, &r).degrees == 0.0 && (five - 5.0).abs() < 1e-12, format!("rre examples ({five})"))?;
    let all = success_rate(&[(0.0, 0.0), (0.0, 0.0)], 2.0, 5.0).unwrap();
    check((all.rate, all.mean_rte, all.mean_rre) == (1.0, Some(0.0), Some(0.0)), "success example")?;
    let one_off = success_rate(&[(0.5, 1.0), (3.0, 0.5)], 2.0, 5.0).unwrap();
    check((one_off.rate, one_off.mean_rte, one_off.mean_rre) == (0.5, Some(0.5), Some(1.0)), "success exclusion")?;
    check(
        feature_matching_recall(&[1.0, 1.0], 0.05).unwrap() == FmrStats { recall: 1.0, mean: 1.0, std: 0.0 }
            && feature_matching_recall(&[0.04, 0.06], 0.05).unwrap().recall == 0.5,
        "FMR examples",
    )?;
    let pts = PointCloud::new((0..5).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect());
    let ms = MatchSet { matches: (0..5).map(|i| Match { a: i, b: i, distance: 0.0 }).collect() };
    let far = RigidTransform::new(Mat3::IDENTITY, Vec3::new(100.0, 0.0, 0.0)).unwrap();
    check(
        inlier_ratio(&ms, &pts, &pts, &RigidTransform::IDENTITY, 0.1).ratio == 1.0
            && inlier_ratio(&ms, &pts, &pts, &far, 0.1).ratio == 0.0,
        "inlier ratio examples",
    )?;

    // Monotonicity on the desk-scale descriptors.
    let dir = work_dir().join("desk");
    let manifest =
        DatasetManifest::load(dir.join("data/test.txt")).map_err(|e| format!("desk results missing: {e}"))?;
    let mut loaded = Vec::new();
    for e in &manifest.entries {
        let stem = |p: &Path| dir.join("desc").join(p.file_stem().unwrap()).with_extension("gedf");
        loaded.push((
            load_cloud(&e.cloud_a).map_err(|e| e.to_string())?,
            load_cloud(&e.cloud_b).map_err(|e| e.to_string())?,
            load_descriptors(stem(&e.cloud_a)).map_err(|e| e.to_string())?,
            load_descriptors(stem(&e.cloud_b)).map_err(|e| e.to_string())?,
            load_pose(&e.pose).map_err(|e| e.to_string())?,
        ));
    }
    let inputs: Vec<PairInputs<'_>> = loaded
        .iter()
        .map(|(a, b, da, db, gt)| PairInputs { name: String::new(), a, b, da, db, ground_truth: *gt, estimate: *gt })
        .collect();
    let tau1s = [0.025, 0.05, 0.075, 0.1, 0.15, 0.2];
    let tau2s = [0.01, 0.03, 0.05, 0.1, 0.15, 0.2];
    let mut grid = Vec::new();
    for &tau1 in &tau1s {
        let cfg = FmrConfig { tau1, ..FmrConfig::default() };
        let report = evaluate(&inputs, &cfg, 2.0, 5.0).map_err(|e| e.to_string())?;
        let ratios: Vec<f64> = report.pairs.iter().map(|p| p.inlier_ratio.ratio).collect();
        grid.push(tau2s.iter().map(|&t2| feature_matching_recall(&ratios, t2).unwrap().recall).collect::<Vec<_>>());
    }
    for i in 0..tau1s.len() {
        for j in 0..tau2s.len() {
            check(j == 0 || grid[i][j] <= grid[i][j - 1], "FMR increased with tau2")?;
            check(i == 0 || grid[i][j] >= grid[i - 1][j], "FMR decreased with tau1")?;
        }
    }
    let row: Vec<String> = tau2s.iter().enumerate().map(|(j, t)| format!("{t}:{:.2}", grid[3][j])).collect();
    Ok(format!("examples exact; monotone over {}x{} grid (tau1 .1: {})", tau1s.len(), tau2s.len(), row.join(" ")))
}

const SMALL: &str = "\
[scene]
seed = 5
planes = 1
boxes = 3
cylinders = 1
spheres = 1
density = 300
noise = 0.002
overlap = 0.7

[dataset]
train_pairs = 2
test_pairs = 1

[patch]
radius = 0.3
m = 128
n = 64
n_test = 64

[encoder]
preset = desk
d = 16

[loss]
b = 8

[train]
iterations = 6
iterations_per_epoch = 3
learning_rate = 0.05
correspondence_tol = 0.12
checkpoint_every = 3
seed = 2

[ransac]
threshold = 0.1

[eval]
sample_points = 300
";

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let base = work_dir().join("rerun");
    fs::create_dir_all(&base).map_err(|e| e.to_string())?;
    let cfg = base.join("small.cfg");
    fs::write(&cfg, SMALL).map_err(|e| e.to_string())?;
    let run = base.join("run");
    pipeline(&run, &cfg)?;
    let first = snapshot(&run);
    pipeline(&run, &cfg)?;
    let second = snapshot(&run);
    check(first.keys().eq(second.keys()), "different file sets")?;
    for (k, v) in &first {
        check(second[k] == *v, format!("{} differs", k.display()))?;
    }
    Ok(format!("{} files identical across two runs", first.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("gradient correctness", gradients),
        ("LRF invariance", lrf_invariance),
        ("descriptor contracts", descriptor_contracts),
        ("loss oracle", loss_oracle),
        ("oracle equivalences", oracles),
        ("Kabsch/RANSAC recovery", registration),
        ("desk-scale end-to-end", desk_end_to_end),
        ("metrics and FMR monotonicity", metrics),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name}: {detail} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
