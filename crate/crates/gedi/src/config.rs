//! `key = value` configuration files with `[section]` headers.
//!
//! `#` starts a comment. Each typed builder reads one section, falls back to
//! the defaults for missing keys and rejects keys it does not know.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use gedi_core::encoder::EncoderConfig;
use gedi_core::evaluation::{FmrConfig, DEFAULT_RRE_MAX, DEFAULT_RTE_MAX};
use gedi_core::lrf::PatchConfig;
use gedi_core::registration::RansacConfig;
use gedi_core::training::{LossConfig, LossWeighting, TrainConfig};

use crate::error::{Error, Result};
use crate::synthetic::SceneSpec;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    sections: BTreeMap<String, BTreeMap<String, (usize, String)>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, (usize, String)>> = BTreeMap::new();
        let mut current = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let prev = sections
                .entry(current.clone())
                .or_default()
                .insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
            if prev.is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {}", i + 1, k.trim())));
            }
        }
        Ok(ConfigFile { sections })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    fn section(&self, name: &str) -> Section<'_> {
        Section { name: name.to_string(), entries: self.sections.get(name), used: Vec::new() }
    }

    pub fn scene(&self) -> Result<SceneSpec> {
        let mut s = self.section("scene");
        let d = SceneSpec::default();
        let spec = SceneSpec {
            seed: s.get("seed", d.seed)?,
            extent: s.get("extent", d.extent)?,
            boxes: s.get("boxes", d.boxes)?,
            cylinders: s.get("cylinders", d.cylinders)?,
            spheres: s.get("spheres", d.spheres)?,
            planes: s.get("planes", d.planes)?,
            density: s.get("density", d.density)?,
            noise: s.get("noise", d.noise)?,
            overlap: s.get("overlap", d.overlap)?,
            max_translation: s.get("max_translation", d.max_translation)?,
            crop: s.get("crop", d.crop)?,
        };
        s.finish()?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn patch(&self) -> Result<(PatchConfig, usize)> {
        let mut s = self.section("patch");
        let d = TrainConfig::default().patch;
        let cfg = PatchConfig {
            radius: s.get("radius", d.radius)?,
            m: s.get("m", d.m)?,
            n: s.get("n", d.n)?,
            use_lrf: s.get("use_lrf", d.use_lrf)?,
        };
        let n_test = s.get("n_test", 1024)?;
        s.finish()?;
        Ok((cfg, n_test))
    }

    pub fn encoder(&self) -> Result<EncoderConfig> {
        let mut s = self.section("encoder");
        let preset: String = s.get("preset", "default".to_string())?;
        let mut cfg = match preset.as_str() {
            "default" => EncoderConfig::default(),
            "desk" => EncoderConfig::desk(16),
            "halved" => EncoderConfig::halved(),
            other => return Err(Error::Config(format!("[encoder] unknown preset {other:?}"))),
        };
        cfg.d = s.get("d", cfg.d)?;
        cfg.use_qnet = s.get("use_qnet", cfg.use_qnet)?;
        cfg.dropout = s.get("dropout", cfg.dropout)?;
        s.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn loss(&self, radius: f64) -> Result<LossConfig> {
        let mut s = self.section("loss");
        let d = LossConfig::for_radius(radius);
        let ratio: f64 = s.get("exclusion_ratio", 0.2)?;
        let weighting: String = s.get("weighting", d.weighting.name().to_string())?;
        let cfg = LossConfig {
            pos_margin: s.get("pos_margin", d.pos_margin)?,
            neg_margin: s.get("neg_margin", d.neg_margin)?,
            exclusion_radius: ratio * radius,
            b: s.get("b", d.b)?,
            weighting: match weighting.as_str() {
                "literal" => LossWeighting::Literal,
                "conventional" => LossWeighting::Conventional,
                other => return Err(Error::Config(format!("[loss] unknown weighting {other:?}"))),
            },
        };
        s.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train(&self, patch: PatchConfig) -> Result<TrainConfig> {
        let mut s = self.section("train");
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            iterations: s.get("iterations", d.iterations)?,
            iterations_per_epoch: s.get("iterations_per_epoch", d.iterations_per_epoch)?,
            patch,
            augment_deg: s.get("augment_deg", d.augment_deg)?,
            learning_rate: s.get("learning_rate", d.learning_rate)?,
            lr_factor: s.get("lr_factor", d.lr_factor)?,
            lr_interval_epochs: s.get("lr_interval_epochs", d.lr_interval_epochs)?,
            weight_decay: s.get("weight_decay", d.weight_decay)?,
            momentum: s.get("momentum", d.momentum)?,
            seed: s.get("seed", d.seed)?,
            correspondence_tol: s.get("correspondence_tol", d.correspondence_tol)?,
            checkpoint_every: s.get("checkpoint_every", d.checkpoint_every)?,
            max_retries: s.get("max_retries", d.max_retries)?,
        };
        s.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn ransac(&self) -> Result<RansacConfig> {
        let mut s = self.section("ransac");
        let d = RansacConfig::new(0.05, 0);
        let cfg = RansacConfig {
            max_iterations: s.get("max_iterations", d.max_iterations)?,
            confidence: s.get("confidence", d.confidence)?,
            threshold: s.get("threshold", d.threshold)?,
            seed: s.get("seed", d.seed)?,
        };
        s.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// FMR settings and the success limits `(rte_max, rre_max)`.
    pub fn eval(&self) -> Result<(FmrConfig, f64, f64)> {
        let mut s = self.section("eval");
        let d = FmrConfig::default();
        let cfg = FmrConfig {
            tau1: s.get("tau1", d.tau1)?,
            tau2: s.get("tau2", d.tau2)?,
            min_overlap: s.get("min_overlap", d.min_overlap)?,
            sample_points: s.get("sample_points", d.sample_points)?,
        };
        let rte_max = s.get("rte_max", DEFAULT_RTE_MAX)?;
        let rre_max = s.get("rre_max", DEFAULT_RRE_MAX)?;
        s.finish()?;
        cfg.validate()?;
        Ok((cfg, rte_max, rre_max))
    }

    /// `(train pairs, test pairs)` of the `[dataset]` section.
    pub fn dataset(&self) -> Result<(usize, usize)> {
        let mut s = self.section("dataset");
        let v = (s.get("train_pairs", 24)?, s.get("test_pairs", 8)?);
        s.finish()?;
        Ok(v)
    }
}

struct Section<'a> {
    name: String,
    entries: Option<&'a BTreeMap<String, (usize, String)>>,
    used: Vec<&'static str>,
}

impl Section<'_> {
    fn get<T: FromStr>(&mut self, key: &'static str, default: T) -> Result<T> {
        self.used.push(key);
        match self.entries.and_then(|e| e.get(key)) {
            None => Ok(default),
            Some((line, v)) => {
                v.parse().map_err(|_| Error::Config(format!("line {line}: [{}] {key} = {v:?} is not valid", self.name)))
            }
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(entries) = self.entries {
            if let Some((k, (line, _))) = entries.iter().find(|(k, _)| !self.used.contains(&k.as_str())) {
                return Err(Error::Config(format!("line {line}: unknown key [{}] {k}", self.name)));
            }
        }
        Ok(())
    }
}
