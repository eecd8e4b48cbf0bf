//! Run configuration: a flat key=value file, CLI overrides on top, and the
//! hashes that tie artifacts to the configuration that produced them.
//!
//! Precedence is CLI flag > config file > built-in default. Two hash scopes
//! exist: the data hash covers only the preprocessing parameters (it is
//! stamped into dataset snapshots), and the full hash covers every semantic
//! field (stamped into audit and mitigation artifacts). Output paths do not
//! participate in either hash.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::{ModelHyper, ModelKind};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ratings_path: PathBuf,
    pub movies_path: PathBuf,
    pub users_path: PathBuf,
    /// Ratings below this are dropped when binarizing.
    pub min_rating: u8,
    /// Users with fewer positives than this are dropped.
    pub min_interactions: usize,
    pub train_ratio: f64,
    /// Age codes below this count as "younger".
    pub age_cutoff: u8,
    /// Recommendation list length audited.
    pub k: usize,
    /// Uniform-smoothing factor applied before divergences.
    pub alpha: f64,
    pub model: ModelKind,
    pub seed: u64,
    pub hyper: ModelHyper,
    /// Base oversampling rate for mitigation.
    pub base_rate: f64,
    /// Bin-count override when no inverse-stereotyped users exist.
    pub bin_override: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            ratings_path: PathBuf::from("ratings.dat"),
            movies_path: PathBuf::from("movies.dat"),
            users_path: PathBuf::from("users.dat"),
            min_rating: 4,
            min_interactions: 20,
            train_ratio: 0.8,
            age_cutoff: 35,
            k: 20,
            alpha: 0.01,
            model: ModelKind::UserKnn,
            seed: 42,
            hyper: ModelHyper::default(),
            base_rate: 0.4,
            bin_override: None,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    no + 1
                )));
            };
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    /// Sets one field by key; used by both the file parser and CLI overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("bad value {value:?} for {what}"));
        match key {
            "ratings_path" => self.ratings_path = PathBuf::from(value),
            "movies_path" => self.movies_path = PathBuf::from(value),
            "users_path" => self.users_path = PathBuf::from(value),
            "min_rating" => self.min_rating = value.parse().map_err(|_| bad(key))?,
            "min_interactions" => self.min_interactions = value.parse().map_err(|_| bad(key))?,
            "train_ratio" => self.train_ratio = value.parse().map_err(|_| bad(key))?,
            "age_cutoff" => self.age_cutoff = value.parse().map_err(|_| bad(key))?,
            "k" => self.k = value.parse().map_err(|_| bad(key))?,
            "alpha" => self.alpha = value.parse().map_err(|_| bad(key))?,
            "model" => self.model = ModelKind::parse(value)?,
            "seed" => self.seed = value.parse().map_err(|_| bad(key))?,
            "base_rate" => self.base_rate = value.parse().map_err(|_| bad(key))?,
            "bin_override" => self.bin_override = Some(value.parse().map_err(|_| bad(key))?),
            "knn_neighbors" => self.hyper.knn_neighbors = value.parse().map_err(|_| bad(key))?,
            "bpr_factors" => self.hyper.bpr_factors = value.parse().map_err(|_| bad(key))?,
            "bpr_learning_rate" => {
                self.hyper.bpr_learning_rate = value.parse().map_err(|_| bad(key))?
            }
            "bpr_reg" => self.hyper.bpr_reg = value.parse().map_err(|_| bad(key))?,
            "bpr_epochs" => self.hyper.bpr_epochs = value.parse().map_err(|_| bad(key))?,
            "wrmf_factors" => self.hyper.wrmf_factors = value.parse().map_err(|_| bad(key))?,
            "wrmf_reg" => self.hyper.wrmf_reg = value.parse().map_err(|_| bad(key))?,
            "wrmf_confidence_alpha" => {
                self.hyper.wrmf_confidence_alpha = value.parse().map_err(|_| bad(key))?
            }
            "wrmf_iterations" => {
                self.hyper.wrmf_iterations = value.parse().map_err(|_| bad(key))?
            }
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.min_rating) {
            return Err(Error::Config("min_rating must lie in 1..=5".into()));
        }
        if self.min_interactions == 0 {
            return Err(Error::Config("min_interactions must be at least 1".into()));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(Error::Config("train_ratio must lie in (0, 1)".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("alpha must lie in (0, 1)".into()));
        }
        if !(0.01..=0.4).contains(&self.base_rate) {
            return Err(Error::Config("base_rate must lie in [0.01, 0.4]".into()));
        }
        Ok(())
    }

    fn data_fields(&self) -> BTreeMap<&'static str, String> {
        let mut m = BTreeMap::new();
        m.insert("min_rating", self.min_rating.to_string());
        m.insert("min_interactions", self.min_interactions.to_string());
        m
    }

    fn all_fields(&self) -> BTreeMap<&'static str, String> {
        let mut m = self.data_fields();
        m.insert("train_ratio", self.train_ratio.to_string());
        m.insert("age_cutoff", self.age_cutoff.to_string());
        m.insert("k", self.k.to_string());
        m.insert("alpha", self.alpha.to_string());
        m.insert("model", self.model.as_str().to_string());
        m.insert("seed", self.seed.to_string());
        m.insert("base_rate", self.base_rate.to_string());
        m.insert(
            "bin_override",
            self.bin_override.map_or("none".into(), |n| n.to_string()),
        );
        m.insert("knn_neighbors", self.hyper.knn_neighbors.to_string());
        m.insert("bpr_factors", self.hyper.bpr_factors.to_string());
        m.insert(
            "bpr_learning_rate",
            self.hyper.bpr_learning_rate.to_string(),
        );
        m.insert("bpr_reg", self.hyper.bpr_reg.to_string());
        m.insert("bpr_epochs", self.hyper.bpr_epochs.to_string());
        m.insert("wrmf_factors", self.hyper.wrmf_factors.to_string());
        m.insert("wrmf_reg", self.hyper.wrmf_reg.to_string());
        m.insert(
            "wrmf_confidence_alpha",
            self.hyper.wrmf_confidence_alpha.to_string(),
        );
        m.insert("wrmf_iterations", self.hyper.wrmf_iterations.to_string());
        m
    }

    fn hash_of(fields: &BTreeMap<&'static str, String>) -> String {
        let mut canonical = String::new();
        for (k, v) in fields {
            let _ = writeln!(canonical, "{k}={v}");
        }
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Hash over the preprocessing parameters only; stamped into snapshots.
    pub fn data_hash(&self) -> String {
        Self::hash_of(&self.data_fields())
    }

    /// Hash over every semantic field; stamped into audit artifacts.
    pub fn full_hash(&self) -> String {
        Self::hash_of(&self.all_fields())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn file_then_override_precedence() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# comment\nk=10\nmodel=bpr\nseed=5").unwrap();
        let mut cfg = RunConfig::from_file(f.path()).unwrap();
        assert_eq!(cfg.k, 10);
        assert_eq!(cfg.model, ModelKind::Bpr);
        cfg.set("k", "30").unwrap();
        assert_eq!(cfg.k, 30);
        assert_eq!(cfg.seed, 5);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.set("nope", "1"), Err(Error::Config(_))));
    }

    #[test]
    fn validation_catches_out_of_range() {
        let mut cfg = RunConfig {
            train_ratio: 1.2,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.train_ratio = 0.8;
        cfg.base_rate = 0.5;
        assert!(cfg.validate().is_err());
        cfg.base_rate = 0.4;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn hashes_separate_scopes() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.seed = 99;
        // seed changes the full hash but not the data hash
        assert_eq!(a.data_hash(), b.data_hash());
        assert_ne!(a.full_hash(), b.full_hash());
        let mut c = a.clone();
        c.min_rating = 3;
        assert_ne!(a.data_hash(), c.data_hash());
    }

    #[test]
    fn hashes_are_stable_across_runs() {
        let a = RunConfig::default();
        assert_eq!(a.full_hash(), RunConfig::default().full_hash());
        assert_eq!(a.full_hash().len(), 64);
    }
}
