use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::netcore::Architecture;
use crate::{Error, Result};

/// Hyperparameters and inputs of both training phases.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Weight of the L1 reconstruction term.
    pub lambda: f64,
    pub lr_generator: f64,
    pub lr_discriminator_phase1: f64,
    pub lr_phase2: f64,
    pub epochs_phase1: usize,
    pub epochs_phase2: usize,
    pub batch_size: usize,
    /// Training examples per phase-1 epoch.
    pub pairs_phase1: usize,
    /// Positive/negative iterations per phase-2 epoch.
    pub pairs_phase2: usize,
    pub seed: u64,
    pub erosion_pct: f64,
    pub architecture: Architecture,
    pub erode_outer_frame: bool,
    /// Phase 2 starts from a freshly initialized discriminator.
    pub fresh_discriminator: bool,
    /// When false, phase 2 classifies raw gapped pairs without inpainting.
    pub inpaint: bool,
    pub phase1_corpus: Option<PathBuf>,
    pub phase2_corpus: Option<PathBuf>,
    /// Where per-epoch checkpoints and loss logs go.
    pub out_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 100.0,
            lr_generator: 2e-4,
            lr_discriminator_phase1: 1e-4,
            lr_phase2: 2e-4,
            epochs_phase1: 48,
            epochs_phase2: 40,
            batch_size: 1,
            pairs_phase1: 45_000,
            pairs_phase2: 45_000,
            seed: 0,
            erosion_pct: 0.07,
            architecture: Architecture::standard(),
            erode_outer_frame: false,
            fresh_discriminator: false,
            inpaint: true,
            phase1_corpus: None,
            phase2_corpus: None,
            out_dir: None,
        }
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl TrainConfig {
    pub fn erosion_width(&self) -> Result<usize> {
        crate::puzzle::erosion_width(self.erosion_pct, self.architecture.piece_size)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lr_generator", self.lr_generator),
            ("lr_discriminator_phase1", self.lr_discriminator_phase1),
            ("lr_phase2", self.lr_phase2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if self.batch_size != 1 {
            return Err(Error::invalid(format!(
                "only batch_size = 1 is supported, got {}",
                self.batch_size
            )));
        }
        if !self.inpaint && !self.fresh_discriminator {
            return Err(Error::invalid(
                "classifying raw pairs requires a fresh discriminator (set fresh_discriminator = true)",
            ));
        }
        self.architecture.validate()?;
        self.erosion_width()?;
        if let (Some(a), Some(b)) = (&self.phase1_corpus, &self.phase2_corpus) {
            if same_path(a, b) {
                return Err(Error::invalid("phase-1 and phase-2 corpora must be disjoint"));
            }
        }
        Ok(())
    }

    /// Every field in `key = value` form, in a fixed order.
    pub fn to_entries(&self) -> Vec<(String, String)> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        vec![
            ("lambda".into(), self.lambda.to_string()),
            ("lr_generator".into(), self.lr_generator.to_string()),
            ("lr_discriminator_phase1".into(), self.lr_discriminator_phase1.to_string()),
            ("lr_phase2".into(), self.lr_phase2.to_string()),
            ("epochs_phase1".into(), self.epochs_phase1.to_string()),
            ("epochs_phase2".into(), self.epochs_phase2.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("pairs_phase1".into(), self.pairs_phase1.to_string()),
            ("pairs_phase2".into(), self.pairs_phase2.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("erosion_pct".into(), self.erosion_pct.to_string()),
            ("piece_size".into(), self.architecture.piece_size.to_string()),
            ("generator_channels".into(), join(&self.architecture.generator_channels)),
            ("discriminator_channels".into(), join(&self.architecture.discriminator_channels)),
            ("erode_outer_frame".into(), self.erode_outer_frame.to_string()),
            ("fresh_discriminator".into(), self.fresh_discriminator.to_string()),
            ("inpaint".into(), self.inpaint.to_string()),
            ("phase1_corpus".into(), path(&self.phase1_corpus)),
            ("phase2_corpus".into(), path(&self.phase2_corpus)),
            ("out_dir".into(), path(&self.out_dir)),
        ]
    }

    pub fn to_text(&self) -> String {
        crate::kvfile::render(&self.to_entries())
    }

    /// Digest of the hyperparameters that shape the weights.
    pub fn hash(&self) -> String {
        let text: String = self
            .to_entries()
            .into_iter()
            .filter(|(k, _)| k != "out_dir")
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect();
        Sha256::digest(text.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Applies `key = value` overrides on top of `self`. Unknown keys are
    /// rejected.
    pub fn apply(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        for (k, v) in kv {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::invalid(format!("bad value '{v}' for {key}")))
        }
        fn list(key: &str, v: &str) -> Result<Vec<usize>> {
            v.split(',').map(|t| num(key, t.trim())).collect()
        }
        let opt_path = |v: &str| if v.is_empty() { None } else { Some(PathBuf::from(v)) };
        match key {
            "lambda" => self.lambda = num(key, value)?,
            "lr_generator" => self.lr_generator = num(key, value)?,
            "lr_discriminator_phase1" => self.lr_discriminator_phase1 = num(key, value)?,
            "lr_phase2" => self.lr_phase2 = num(key, value)?,
            "epochs_phase1" => self.epochs_phase1 = num(key, value)?,
            "epochs_phase2" => self.epochs_phase2 = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "pairs_phase1" => self.pairs_phase1 = num(key, value)?,
            "pairs_phase2" => self.pairs_phase2 = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "erosion_pct" => self.erosion_pct = num(key, value)?,
            "piece_size" => self.architecture.piece_size = num(key, value)?,
            "generator_channels" => self.architecture.generator_channels = list(key, value)?,
            "discriminator_channels" => self.architecture.discriminator_channels = list(key, value)?,
            "erode_outer_frame" => self.erode_outer_frame = num(key, value)?,
            "fresh_discriminator" => self.fresh_discriminator = num(key, value)?,
            "inpaint" => self.inpaint = num(key, value)?,
            "phase1_corpus" => self.phase1_corpus = opt_path(value),
            "phase2_corpus" => self.phase2_corpus = opt_path(value),
            "out_dir" => self.out_dir = opt_path(value),
            other => return Err(Error::invalid(format!("unknown training option '{other}'"))),
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut c = Self::default();
        c.apply(&crate::kvfile::read(path)?)?;
        Ok(c)
    }
}

fn same_path(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}
