//! Checkpoint container. The tensor file is
//!
//! ```text
//! "GFCK" | u32 version | u32 tensor count
//! repeated: u32 name length | name | u64 value count | f64 values (LE)
//! 32-byte SHA-256 of everything above
//! ```
//!
//! and `<file>.meta` is a `key = value` sidecar carrying the architecture,
//! phase and training metadata.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{Architecture, Discriminator, Generator, Parameters};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"GFCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Inpainting,
    Classifier,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Inpainting => "inpainting",
            Phase::Classifier => "classifier",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "inpainting" => Ok(Phase::Inpainting),
            "classifier" => Ok(Phase::Classifier),
            other => Err(Error::invalid(format!("unknown phase '{other}'"))),
        }
    }
}

/// Provenance recorded alongside the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub epochs_phase1: usize,
    pub epochs_phase2: usize,
    pub seed: u64,
    pub erosion_width: usize,
    pub config_hash: String,
    pub optimizer: String,
    /// False for the ablation that classifies raw gapped pairs.
    pub inpaint: bool,
    /// True when phase 2 started from a freshly initialized discriminator.
    pub fresh_discriminator: bool,
}

impl Default for TrainingMeta {
    fn default() -> Self {
        Self {
            epochs_phase1: 0,
            epochs_phase2: 0,
            seed: 0,
            erosion_width: 0,
            config_hash: String::new(),
            optimizer: String::new(),
            inpaint: true,
            fresh_discriminator: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub architecture: Architecture,
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub phase: Phase,
    pub meta: TrainingMeta,
}

impl ModelCheckpoint {
    /// Short digest of the weights, used to tag derived artifacts.
    pub fn weights_hash(&self) -> String {
        let mut h = Sha256::new();
        for t in self.generator.tensors().into_iter().chain(self.discriminator.tensors()) {
            for v in t {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

pub fn save_checkpoint(ckpt: &ModelCheckpoint, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let names: Vec<String> = ckpt
        .generator
        .tensor_names()
        .into_iter()
        .chain(ckpt.discriminator.tensor_names())
        .collect();
    let tensors: Vec<&[f64]> = ckpt
        .generator
        .tensors()
        .into_iter()
        .chain(ckpt.discriminator.tensors())
        .collect();
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in names.iter().zip(&tensors) {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for v in t.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, &buf).map_err(|e| Error::io(path, e))?;

    let a = &ckpt.architecture;
    let m = &ckpt.meta;
    let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
    let mut meta = String::new();
    let _ = writeln!(meta, "tool = {}", crate::TOOL_VERSION);
    let _ = writeln!(meta, "architecture_hash = {}", a.hash());
    let _ = writeln!(meta, "piece_size = {}", a.piece_size);
    let _ = writeln!(meta, "generator_channels = {}", join(&a.generator_channels));
    let _ = writeln!(meta, "discriminator_channels = {}", join(&a.discriminator_channels));
    let _ = writeln!(meta, "phase = {}", ckpt.phase.name());
    let _ = writeln!(meta, "epochs_phase1 = {}", m.epochs_phase1);
    let _ = writeln!(meta, "epochs_phase2 = {}", m.epochs_phase2);
    let _ = writeln!(meta, "seed = {}", m.seed);
    let _ = writeln!(meta, "erosion_width = {}", m.erosion_width);
    let _ = writeln!(meta, "config_hash = {}", m.config_hash);
    let _ = writeln!(meta, "optimizer = {}", m.optimizer);
    let _ = writeln!(meta, "inpaint = {}", m.inpaint);
    let _ = writeln!(meta, "fresh_discriminator = {}", m.fresh_discriminator);
    let mp = meta_path(path);
    fs::write(&mp, meta).map_err(|e| Error::io(&mp, e))
}

/// Loads a checkpoint, refusing it when `expected` is given and differs
/// from the stored architecture.
pub fn load_checkpoint(path: &Path, expected: Option<&Architecture>) -> Result<ModelCheckpoint> {
    let mp = meta_path(path);
    let text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    let kv = crate::kvfile::parse(&text).map_err(|e| Error::load(&mp, e))?;
    let get = |k: &str| kv.get(k).cloned().ok_or_else(|| Error::load(&mp, format!("missing key '{k}'")));
    let num = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| Error::load(&mp, format!("bad value for '{k}'"))) };
    let list = |k: &str| -> Result<Vec<usize>> {
        get(k)?
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| Error::load(&mp, format!("bad value for '{k}'"))))
            .collect()
    };
    let flag = |k: &str| -> Result<bool> { get(k)?.parse().map_err(|_| Error::load(&mp, format!("bad value for '{k}'"))) };
    let architecture = Architecture {
        piece_size: num("piece_size")?,
        generator_channels: list("generator_channels")?,
        discriminator_channels: list("discriminator_channels")?,
    };
    let recorded = get("architecture_hash")?;
    if recorded != architecture.hash() {
        return Err(Error::ArchitectureMismatch {
            expected: architecture.hash(),
            found: recorded,
        });
    }
    if let Some(exp) = expected {
        if *exp != architecture {
            return Err(Error::ArchitectureMismatch {
                expected: exp.descriptor(),
                found: architecture.descriptor(),
            });
        }
    }
    let phase = Phase::parse(&get("phase")?)?;
    let meta = TrainingMeta {
        epochs_phase1: num("epochs_phase1")?,
        epochs_phase2: num("epochs_phase2")?,
        seed: get("seed")?.parse().map_err(|_| Error::load(&mp, "bad seed"))?,
        erosion_width: num("erosion_width")?,
        config_hash: get("config_hash")?,
        optimizer: get("optimizer")?,
        inpaint: flag("inpaint")?,
        fresh_discriminator: flag("fresh_discriminator")?,
    };

    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let tensors = parse_tensors(&bytes).map_err(|e| Error::load(path, e))?;

    // shapes come from the architecture; values from the file
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    let mut generator = Generator::new(&architecture, &mut rng)?;
    let mut discriminator = Discriminator::new(&architecture, &mut rng)?;
    let names: Vec<String> = generator.tensor_names().into_iter().chain(discriminator.tensor_names()).collect();
    if names.len() != tensors.len() {
        return Err(Error::load(
            path,
            format!("expected {} tensors, file has {}", names.len(), tensors.len()),
        ));
    }
    let targets: Vec<&mut [f64]> = generator
        .tensors_mut()
        .into_iter()
        .chain(discriminator.tensors_mut())
        .collect();
    for ((target, name), (file_name, values)) in targets.into_iter().zip(&names).zip(tensors) {
        if *name != file_name || target.len() != values.len() {
            return Err(Error::load(
                path,
                format!("tensor '{file_name}' ({} values) does not fit '{name}' ({})", values.len(), target.len()),
            ));
        }
        target.copy_from_slice(&values);
    }
    Ok(ModelCheckpoint {
        architecture,
        generator,
        discriminator,
        phase,
        meta,
    })
}

fn parse_tensors(bytes: &[u8]) -> std::result::Result<Vec<(String, Vec<f64>)>, String> {
    if bytes.len() < 12 + 32 {
        return Err("file truncated".into());
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err("checksum mismatch (truncated or corrupt file)".into());
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err("not a checkpoint file".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| "tensor name is not utf-8")?;
        let n = r.u64()? as usize;
        let raw = r.take(n.checked_mul(8).ok_or("tensor too large")?)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        out.push((name, values));
    }
    if r.pos != body.len() {
        return Err("trailing bytes after tensors".into());
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len()).ok_or("file truncated")?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
