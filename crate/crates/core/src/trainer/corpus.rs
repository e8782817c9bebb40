//! Image corpora for the two training phases.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use image::RgbImage;
use sha2::{Digest, Sha256};

use crate::puzzle::{erode, slice_image, PuzzleBundle, Solution};
use crate::{Error, Result};

/// An image together with the digest of its decoded pixels.
#[derive(Debug, Clone)]
pub struct CorpusImage {
    pub path: PathBuf,
    pub image: RgbImage,
    pub digest: [u8; 32],
}

pub fn content_digest(image: &RgbImage) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(image.width().to_le_bytes());
    h.update(image.height().to_le_bytes());
    h.update(image.as_raw());
    h.finalize().into()
}

impl CorpusImage {
    pub fn new(path: PathBuf, image: RgbImage) -> Self {
        let digest = content_digest(&image);
        Self { path, image, digest }
    }
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "jpg" | "jpeg")
    )
}

/// Every PNG/JPEG file directly inside `dir`, sorted by file name.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusImage>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::invalid(format!("no png/jpg images in {}", dir.display())));
    }
    paths
        .into_iter()
        .map(|p| {
            let img = image::open(&p).map_err(|e| Error::Image {
                path: p.clone(),
                source: e,
            })?;
            Ok(CorpusImage::new(p, img.to_rgb8()))
        })
        .collect()
}

/// Fails when any image of `a` has the same pixels as an image of `b`.
pub fn check_disjoint(a: &[CorpusImage], b: &[CorpusImage]) -> Result<()> {
    let seen: HashSet<[u8; 32]> = a.iter().map(|c| c.digest).collect();
    if let Some(dup) = b.iter().find(|c| seen.contains(&c.digest)) {
        return Err(Error::invalid(format!(
            "{} appears in both training corpora",
            dup.path.display()
        )));
    }
    Ok(())
}

/// A sliced and eroded training puzzle with its ground truth.
#[derive(Debug, Clone)]
pub struct TrainingPuzzle {
    pub bundle: PuzzleBundle,
    pub solution: Solution,
}

/// Slices each image into `piece_size` pieces and erodes them.
pub fn make_puzzles(images: &[CorpusImage], piece_size: usize, erosion_pct: f64) -> Result<Vec<TrainingPuzzle>> {
    images
        .iter()
        .map(|c| {
            let (bundle, solution) = slice_image(&c.image, piece_size)?;
            if bundle.len() < 3 {
                return Err(Error::invalid(format!(
                    "{} yields only {} pieces; at least 3 are needed",
                    c.path.display(),
                    bundle.len()
                )));
            }
            Ok(TrainingPuzzle {
                bundle: erode(&bundle, erosion_pct)?,
                solution,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disjointness_compares_pixels_not_names() {
        let a = CorpusImage::new("a.png".into(), RgbImage::from_pixel(4, 4, image::Rgb([1, 2, 3])));
        let b = CorpusImage::new("b.png".into(), RgbImage::from_pixel(4, 4, image::Rgb([1, 2, 3])));
        let c = CorpusImage::new("a.png".into(), RgbImage::from_pixel(4, 4, image::Rgb([9, 2, 3])));
        assert!(check_disjoint(std::slice::from_ref(&a), &[b]).is_err());
        assert!(check_disjoint(&[a], &[c]).is_ok());
    }

    #[test]
    fn loads_directory() {
        let dir = tempfile::tempdir().unwrap();
        RgbImage::from_pixel(8, 8, image::Rgb([5, 5, 5]))
            .save(dir.path().join("x.png"))
            .unwrap();
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let c = load_corpus(dir.path()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].image.dimensions(), (8, 8));
        assert!(load_corpus(&dir.path().join("missing")).is_err());
    }
}
