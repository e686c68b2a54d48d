//! `gedi` command-line tool.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use gedi::checkpoint::{load_checkpoint, save_checkpoint};
use gedi::cloud_io::load_cloud;
use gedi::config::ConfigFile;
use gedi::descriptor_io::{load_descriptors, save_descriptors};
use gedi::manifest::DatasetManifest;
use gedi::pipeline::{describe_cloud, evaluate, match_descriptors, register_clouds, DescribeConfig, PairInputs};
use gedi::pose_io::{load_pose, save_pose};
use gedi::report::{save_pca_cloud, save_report};
use gedi::synthetic::generate_dataset;
use gedi::{Error, Result};
use gedi_core::encoder::{encoder_gradient_check, EncoderModel, ENCODER_GRADIENT_TOLERANCE};
use gedi_core::rng;
use gedi_core::tensor::sweep::{layer_sweep, LAYER_TOLERANCE};
use gedi_core::training::{train, TrainEvent};
use serde_json::json;

#[derive(Parser)]
#[command(name = "gedi", version, about = "Learned rotation-invariant point-cloud descriptors and registration")]
struct Cli {
    /// Seed for every random decision; overrides the seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset of overlapping cloud pairs.
    Gen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        train: Option<usize>,
        #[arg(long)]
        test: Option<usize>,
    },
    /// Train an encoder on the pairs of a manifest.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-iteration log, tab separated.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Continue from this checkpoint instead of a fresh initialisation.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Describe seeded sample points of a cloud.
    Describe {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Sampled points; defaults to `[eval] sample_points`.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Mutual nearest-neighbour matches between two descriptor files.
    Match {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the pose mapping cloud B into cloud A.
    Register {
        #[arg(long)]
        cloud_a: PathBuf,
        #[arg(long)]
        cloud_b: PathBuf,
        #[arg(long)]
        desc_a: PathBuf,
        #[arg(long)]
        desc_b: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Feature-matching recall and registration metrics over a manifest.
    ///
    /// Descriptors are read from `<descriptors>/<cloud stem>.gedf` and
    /// estimated poses from `<poses>/<pose file name>`.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        descriptors: PathBuf,
        #[arg(long)]
        poses: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Colour the described points by the principal components of their descriptors.
    PcaViz {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        descriptors: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of every layer and of the reduced encoder.
    Gradcheck {
        /// Coordinates checked per encoder parameter tensor.
        #[arg(long, default_value_t = 6)]
        per_param: usize,
    },
}

fn config(path: &Option<PathBuf>) -> Result<ConfigFile> {
    path.as_ref().map_or_else(|| Ok(ConfigFile::default()), ConfigFile::load)
}

fn descriptor_path(dir: &Path, cloud: &Path) -> PathBuf {
    dir.join(cloud.file_stem().unwrap_or_default()).with_extension("gedf")
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Gen { config: c, out, train, test } => {
            let c = config(&c)?;
            let mut spec = c.scene()?;
            spec.seed = seed.unwrap_or(spec.seed);
            let (n_train, n_test) = c.dataset()?;
            let (tr, te) = generate_dataset(&spec, train.unwrap_or(n_train), test.unwrap_or(n_test), &out)?;
            println!("{} training and {} test pairs in {}", tr.entries.len(), te.entries.len(), out.display());
        }
        Command::Train { config: c, manifest, out, log, init } => {
            let c = config(&c)?;
            let (patch, _) = c.patch()?;
            let mut cfg = c.train(patch)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            let loss = c.loss(patch.radius)?;
            let mut model = match init {
                Some(p) => load_checkpoint(p)?.model,
                None => EncoderModel::new(c.encoder()?, &mut rng::stream(cfg.seed, 0x1A17))?,
            };
            let pairs = DatasetManifest::load(&manifest)?.load_pairs()?;
            let mut log_file = match &log {
                Some(p) => {
                    let mut f = fs::File::create(p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
                    writeln!(f, "iteration\tpair\tloss\tpos_mean\tneg_mean\tlr")
                        .map_err(|e| Error::Io { path: p.clone(), source: e })?;
                    Some((p.clone(), f))
                }
                None => None,
            };
            let mut failure = None;
            let mut observer = |ev: TrainEvent<'_>| -> gedi_core::Result<()> {
                let res = match ev {
                    TrainEvent::Iteration(rec) => match &mut log_file {
                        Some((p, f)) => writeln!(f, "{rec}").map_err(|e| Error::Io { path: p.clone(), source: e }),
                        None => Ok(()),
                    },
                    TrainEvent::Checkpoint { iteration, model } => {
                        let meta = [("train.iteration".to_string(), iteration as f64)];
                        save_checkpoint(out.with_extension(format!("iter{iteration}.gedi")), model, &meta)
                    }
                };
                res.map_err(|e| {
                    let msg = e.to_string();
                    failure = Some(e);
                    gedi_core::Error::InvalidConfig(msg)
                })
            };
            let start = Instant::now();
            let records = train(&mut model, &pairs, &cfg, &loss, &mut observer);
            if let Some(e) = failure {
                return Err(e);
            }
            let records = records?;
            let meta =
                [("train.iteration".to_string(), cfg.iterations as f64), ("train.seed".to_string(), cfg.seed as f64)];
            save_checkpoint(&out, &model, &meta)?;
            let tail = records.len().min(50);
            let mean = records[records.len() - tail..].iter().map(|r| r.loss).sum::<f64>() / tail.max(1) as f64;
            println!(
                "{} iterations in {:.1} s, mean loss of the last {tail}: {mean:.6}",
                records.len(),
                start.elapsed().as_secs_f64()
            );
        }
        Command::Describe { model, cloud, out, config: c, count } => {
            let c = config(&c)?;
            let (mut patch, n_test) = c.patch()?;
            patch.n = n_test;
            let (fmr, _, _) = c.eval()?;
            let model = load_checkpoint(model)?.model;
            let cfg = DescribeConfig { patch, count: count.unwrap_or(fmr.sample_points), seed: seed.unwrap_or(0) };
            let file = describe_cloud(&model, &load_cloud(&cloud)?, &cfg)?;
            save_descriptors(&out, &file)?;
            let fallback = file.flags.iter().filter(|&&f| f != 0).count();
            println!("{} descriptors of dimension {} ({fallback} with fallback frames)", file.len(), file.dim);
        }
        Command::Match { a, b, out } => {
            let (da, db) = (load_descriptors(&a)?, load_descriptors(&b)?);
            let matches = match_descriptors(&da, &db)?;
            let mut text = String::from("# index_a index_b descriptor_distance\n");
            for m in &matches.matches {
                text += &format!("{} {} {:.9e}\n", da.indices[m.a], db.indices[m.b], m.distance);
            }
            fs::write(&out, text).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            println!("{} mutual matches", matches.len());
        }
        Command::Register { cloud_a, cloud_b, desc_a, desc_b, out, config: c } => {
            let mut cfg = config(&c)?.ransac()?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            let (a, b) = (load_cloud(&cloud_a)?, load_cloud(&cloud_b)?);
            let res = register_clouds(&a, &b, &load_descriptors(&desc_a)?, &load_descriptors(&desc_b)?, &cfg)?;
            save_pose(&out, &res.transform)?;
            println!(
                "{} of {} matches are inliers after {} iterations",
                res.inliers.len(),
                res.matches,
                res.iterations
            );
        }
        Command::Eval { manifest, descriptors, poses, out, config: c } => {
            let (fmr, rte_max, rre_max) = config(&c)?.eval()?;
            let m = DatasetManifest::load(&manifest)?;
            let kept: Vec<_> = m.entries.iter().filter(|e| e.overlap >= fmr.min_overlap).collect();
            let mut loaded = Vec::new();
            for e in &kept {
                let est = poses.join(e.pose.file_name().unwrap_or_default());
                loaded.push((
                    load_cloud(&e.cloud_a)?,
                    load_cloud(&e.cloud_b)?,
                    load_descriptors(descriptor_path(&descriptors, &e.cloud_a))?,
                    load_descriptors(descriptor_path(&descriptors, &e.cloud_b))?,
                    load_pose(&e.pose)?,
                    load_pose(est)?,
                ));
            }
            let inputs: Vec<PairInputs<'_>> = kept
                .iter()
                .zip(&loaded)
                .map(|(e, (a, b, da, db, gt, est))| PairInputs {
                    name: e.pose.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
                    a,
                    b,
                    da,
                    db,
                    ground_truth: *gt,
                    estimate: *est,
                })
                .collect();
            let report = evaluate(&inputs, &fmr, rte_max, rre_max)?;
            save_report(&out, &report, json!({ "pairs_below_min_overlap": m.entries.len() - kept.len() }))?;
            println!(
                "FMR {:.4} (mean inlier ratio {:.4}), registration success {:.4} over {} pairs",
                report.fmr.recall,
                report.fmr.mean,
                report.success.rate,
                report.pairs.len()
            );
        }
        Command::PcaViz { cloud, descriptors, out } => {
            let pca = save_pca_cloud(&out, &load_cloud(&cloud)?, &load_descriptors(&descriptors)?)?;
            if pca.rank_deficient {
                println!("descriptors span fewer than three principal directions; missing channels are grey");
            }
        }
        Command::Gradcheck { per_param } => {
            let s = seed.unwrap_or(0);
            let start = Instant::now();
            let mut ok = true;
            for r in layer_sweep(s)? {
                let pass = r.passed(LAYER_TOLERANCE);
                ok &= pass;
                println!(
                    "{:<16} {:.3e} over {} coordinates {}",
                    r.layer,
                    r.max_relative_error,
                    r.coordinates,
                    verdict(pass)
                );
            }
            let report = encoder_gradient_check(s, per_param)?;
            let pass = report.max_relative_error < ENCODER_GRADIENT_TOLERANCE;
            ok &= pass;
            let coords: usize = report.per_param.iter().map(|p| p.1).sum();
            println!("{:<16} {:.3e} over {coords} coordinates {}", "encoder", report.max_relative_error, verdict(pass));
            println!("{:.1} s", start.elapsed().as_secs_f64());
            if !ok {
                return Err(Error::GradientCheck("a layer or the encoder exceeded its tolerance".into()));
            }
        }
    }
    Ok(())
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "ok"
    } else {
        "FAILED"
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
