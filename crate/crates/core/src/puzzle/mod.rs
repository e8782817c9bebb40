//! Puzzle ingestion: slicing images into square pieces, eroding piece
//! boundaries, shuffling, persisting bundles and rendering boards.

mod bundle;
mod render;

use image::RgbImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use bundle::{load_bundle, load_solution, save_bundle, save_solution, MANIFEST_FILE};
pub use render::{render, EMPTY_GRAY};

/// One square piece. Colors are 8-bit per channel and exposed as values in
/// `[0, 1]`; `valid` is false on eroded pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PieceImage {
    pub id: usize,
    size: usize,
    rgb: Vec<u8>,
    valid: Vec<bool>,
}

impl PieceImage {
    /// Builds a fully valid piece from row-major RGB bytes.
    pub fn from_rgb(id: usize, size: usize, rgb: Vec<u8>) -> Result<Self> {
        if size == 0 || rgb.len() != size * size * 3 {
            return Err(Error::invalid(format!(
                "piece {id}: expected {} rgb bytes, got {}",
                size * size * 3,
                rgb.len()
            )));
        }
        Ok(Self {
            id,
            size,
            rgb,
            valid: vec![true; size * size],
        })
    }

    /// Builds a piece with an explicit validity mask. Invalid pixels are
    /// forced to zero.
    pub fn with_mask(id: usize, size: usize, mut rgb: Vec<u8>, valid: Vec<bool>) -> Result<Self> {
        if valid.len() != size * size {
            return Err(Error::invalid(format!(
                "piece {id}: mask has {} entries, expected {}",
                valid.len(),
                size * size
            )));
        }
        for (i, ok) in valid.iter().enumerate() {
            if !ok {
                rgb[i * 3..i * 3 + 3].fill(0);
            }
        }
        let mut piece = Self::from_rgb(id, size, rgb)?;
        piece.valid = valid;
        Ok(piece)
    }

    /// A flat-colored piece; handy in tests.
    pub fn solid(id: usize, size: usize, color: [u8; 3]) -> Self {
        let rgb = color.iter().copied().cycle().take(size * size * 3).collect();
        Self::from_rgb(id, size, rgb).expect("sizes agree")
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Color of channel `ch` at (`row`, `col`), in `[0, 1]`.
    #[inline]
    pub fn pixel(&self, row: usize, col: usize, ch: usize) -> f64 {
        f64::from(self.rgb[(row * self.size + col) * 3 + ch]) / 255.0
    }

    #[inline]
    pub fn rgb_at(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.size + col) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.valid[row * self.size + col]
    }

    pub fn rgb(&self) -> &[u8] {
        &self.rgb
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn invalid_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }

    /// Invalidates and zeroes the outer frame of width `w`.
    pub fn erode_frame(&mut self, w: usize) {
        let s = self.size;
        for r in 0..s {
            for c in 0..s {
                if r < w || c < w || r >= s - w.min(s) || c >= s - w.min(s) {
                    let i = r * s + c;
                    self.valid[i] = false;
                    self.rgb[i * 3..i * 3 + 3].fill(0);
                }
            }
        }
    }
}

/// A set of equally sized pieces forming a `rows × cols` puzzle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PuzzleBundle {
    pub pieces: Vec<PieceImage>,
    pub piece_size: usize,
    pub rows: usize,
    pub cols: usize,
    pub erosion_width: usize,
    pub shuffled: bool,
    /// Seed of the shuffle that produced this bundle, if any.
    pub seed: Option<u64>,
}

impl PuzzleBundle {
    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Checks the structural invariants shared by every bundle.
    pub fn validate(&self) -> Result<()> {
        if self.rows * self.cols != self.pieces.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} grid but {} pieces",
                self.rows,
                self.cols,
                self.pieces.len()
            )));
        }
        for (i, p) in self.pieces.iter().enumerate() {
            if p.size != self.piece_size {
                return Err(Error::DimensionMismatch(format!(
                    "piece {i} has size {}, bundle says {}",
                    p.size, self.piece_size
                )));
            }
            if p.id != i {
                return Err(Error::invalid(format!("piece at index {i} carries id {}", p.id)));
            }
        }
        if 2 * self.erosion_width >= self.piece_size && self.piece_size > 0 {
            return Err(Error::invalid(format!(
                "erosion width {} leaves nothing of a {}-pixel piece",
                self.erosion_width, self.piece_size
            )));
        }
        Ok(())
    }
}

/// Ground-truth slot of every piece, indexed by piece id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub rows: usize,
    pub cols: usize,
    pub slots: Vec<(usize, usize)>,
}

impl Solution {
    /// The row-major layout produced by slicing.
    pub fn identity(rows: usize, cols: usize) -> Self {
        let slots = (0..rows * cols).map(|i| (i / cols, i % cols)).collect();
        Self { rows, cols, slots }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Piece id sitting at each slot, row-major.
    pub fn grid(&self) -> Result<Vec<usize>> {
        let mut grid = vec![usize::MAX; self.rows * self.cols];
        if self.slots.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "solution lists {} pieces for a {}x{} grid",
                self.slots.len(),
                self.rows,
                self.cols
            )));
        }
        for (id, &(r, c)) in self.slots.iter().enumerate() {
            if r >= self.rows || c >= self.cols {
                return Err(Error::invalid(format!("piece {id} at ({r},{c}) is off the grid")));
            }
            let cell = &mut grid[r * self.cols + c];
            if *cell != usize::MAX {
                return Err(Error::invalid(format!(
                    "pieces {} and {id} share slot ({r},{c})",
                    *cell
                )));
            }
            *cell = id;
        }
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid().map(|_| ())
    }
}

/// Cuts `image` into `piece_size` squares, row-major. The right and bottom
/// remainders are dropped.
pub fn slice_image(image: &RgbImage, piece_size: usize) -> Result<(PuzzleBundle, Solution)> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if piece_size == 0 || h < piece_size || w < piece_size {
        return Err(Error::invalid(format!(
            "{w}x{h} image is smaller than one {piece_size}-pixel piece"
        )));
    }
    let rows = h / piece_size;
    let cols = w / piece_size;
    let mut pieces = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut rgb = Vec::with_capacity(piece_size * piece_size * 3);
            for y in 0..piece_size {
                for x in 0..piece_size {
                    let px = image.get_pixel((c * piece_size + x) as u32, (r * piece_size + y) as u32);
                    rgb.extend_from_slice(&px.0);
                }
            }
            pieces.push(PieceImage::from_rgb(r * cols + c, piece_size, rgb)?);
        }
    }
    let bundle = PuzzleBundle {
        pieces,
        piece_size,
        rows,
        cols,
        erosion_width: 0,
        shuffled: false,
        seed: None,
    };
    Ok((bundle, Solution::identity(rows, cols)))
}

/// Frame width removed from each side for a given erosion fraction.
pub fn erosion_width(erosion_pct: f64, piece_size: usize) -> Result<usize> {
    if !(0.0..0.5).contains(&erosion_pct) {
        return Err(Error::invalid(format!(
            "erosion fraction {erosion_pct} must lie in [0, 0.5)"
        )));
    }
    Ok((erosion_pct * piece_size as f64).floor() as usize)
}

/// Removes a `floor(erosion_pct * S)` pixel frame from every piece.
pub fn erode(bundle: &PuzzleBundle, erosion_pct: f64) -> Result<PuzzleBundle> {
    let w = erosion_width(erosion_pct, bundle.piece_size)?;
    let mut out = bundle.clone();
    for p in &mut out.pieces {
        p.erode_frame(w);
    }
    out.erosion_width = out.erosion_width.max(w);
    Ok(out)
}

/// Permutes the pieces with a seeded shuffle and relabels them so piece `i`
/// is the `i`-th entry. `solution` describes the input bundle; the returned
/// one describes the output.
pub fn shuffle(bundle: &PuzzleBundle, solution: &Solution, seed: u64) -> (PuzzleBundle, Solution) {
    let perm = permutation(bundle.len(), seed);
    let mut pieces = Vec::with_capacity(perm.len());
    let mut slots = Vec::with_capacity(perm.len());
    for (new_id, &old_id) in perm.iter().enumerate() {
        let mut p = bundle.pieces[old_id].clone();
        p.id = new_id;
        pieces.push(p);
        slots.push(solution.slots[old_id]);
    }
    let out = PuzzleBundle {
        pieces,
        shuffled: true,
        seed: Some(seed),
        ..bundle.clone()
    };
    (
        out,
        Solution {
            rows: solution.rows,
            cols: solution.cols,
            slots,
        },
    )
}

/// Saves an RGB image as PNG tagged with the tool version and `extra`
/// text entries.
pub fn write_png(image: &RgbImage, path: &std::path::Path, extra: &[(&str, String)]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut text = vec![("tool", crate::TOOL_VERSION.to_string())];
    text.extend(extra.iter().cloned());
    bundle::write_png(path, image.width(), image.height(), png::ColorType::Rgb, image.as_raw(), &text)
}

/// Seeded permutation of `0..n`; entry `k` is the old index placed at `k`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_image(w: u32, h: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| image::Rgb([(x % 256) as u8, (y % 256) as u8, ((x * 7 + y * 3) % 256) as u8]))
    }

    #[test]
    fn slice_70_piece_grid() {
        let img = gradient_image(448, 672);
        let (b, s) = slice_image(&img, 64).unwrap();
        assert_eq!((b.rows, b.cols, b.len()), (10, 7, 70));
        assert_eq!(s.slots[8], (1, 1));
        assert!(!b.shuffled);
        assert_eq!(b.erosion_width, 0);
        b.validate().unwrap();
    }

    #[test]
    fn slice_single_piece() {
        let img = gradient_image(64, 64);
        let (b, s) = slice_image(&img, 64).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(s.slots, vec![(0, 0)]);
    }

    #[test]
    fn slice_discards_margin() {
        let img = gradient_image(130, 130);
        let (b, _) = slice_image(&img, 64).unwrap();
        assert_eq!((b.rows, b.cols), (2, 2));
        // piece 3 starts at (64, 64) of the source
        assert_eq!(b.pieces[3].rgb_at(0, 0), img.get_pixel(64, 64).0);
        assert_eq!(b.pieces[3].rgb_at(63, 63), img.get_pixel(127, 127).0);
    }

    #[test]
    fn slice_too_small() {
        let img = gradient_image(63, 100);
        assert!(matches!(slice_image(&img, 64), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn erosion_widths() {
        assert_eq!(erosion_width(0.07, 64).unwrap(), 4);
        assert_eq!(erosion_width(0.14, 64).unwrap(), 8);
        assert_eq!(erosion_width(0.0, 64).unwrap(), 0);
        assert!(erosion_width(0.5, 64).is_err());
        assert!(erosion_width(-0.1, 64).is_err());
    }

    #[test]
    fn erode_counts() {
        let (b, _) = slice_image(&gradient_image(128, 64), 64).unwrap();
        let e = erode(&b, 0.07).unwrap();
        assert_eq!(e.erosion_width, 4);
        for p in &e.pieces {
            assert_eq!(p.invalid_count(), 64 * 64 - 56 * 56);
        }
        let e = erode(&b, 0.14).unwrap();
        let valid = e.pieces[0].valid_mask().iter().filter(|v| **v).count();
        assert_eq!(valid, 48 * 48);
        assert!(e.pieces[0].is_valid(8, 8) && !e.pieces[0].is_valid(7, 8) && !e.pieces[0].is_valid(8, 56));
        let e = erode(&b, 0.0).unwrap();
        assert_eq!(e, b);
    }

    #[test]
    fn eroded_pixels_are_zero() {
        let (b, _) = slice_image(&gradient_image(64, 64), 64).unwrap();
        let e = erode(&b, 0.1).unwrap();
        let p = &e.pieces[0];
        for r in 0..64 {
            for c in 0..64 {
                if !p.is_valid(r, c) {
                    assert_eq!(p.rgb_at(r, c), [0, 0, 0]);
                } else {
                    assert_eq!(p.rgb_at(r, c), b.pieces[0].rgb_at(r, c));
                }
            }
        }
    }

    #[test]
    fn shuffle_is_deterministic() {
        let (b, s) = slice_image(&gradient_image(128, 128), 64).unwrap();
        let (b1, s1) = shuffle(&b, &s, 0);
        let (b2, s2) = shuffle(&b, &s, 0);
        assert_eq!(b1, b2);
        assert_eq!(s1, s2);
        assert!(b1.shuffled);
        b1.validate().unwrap();
        s1.validate().unwrap();
    }

    #[test]
    fn shuffle_single_piece_identity() {
        let (b, s) = slice_image(&gradient_image(64, 64), 64).unwrap();
        for seed in [0, 1, 99] {
            let (b1, s1) = shuffle(&b, &s, seed);
            assert_eq!(b1.pieces, b.pieces);
            assert_eq!(s1, s);
        }
    }

    #[test]
    fn shuffle_seeds_differ() {
        assert_ne!(permutation(70, 1), permutation(70, 2));
    }

    #[test]
    fn shuffle_keeps_pieces_with_their_slots() {
        let (b, s) = slice_image(&gradient_image(192, 128), 64).unwrap();
        let (b1, s1) = shuffle(&b, &s, 7);
        for (i, p) in b1.pieces.iter().enumerate() {
            let (r, c) = s1.slots[i];
            assert_eq!(p.rgb(), b.pieces[r * b.cols + c].rgb());
        }
    }

    #[test]
    fn solution_rejects_shared_slot() {
        let s = Solution {
            rows: 1,
            cols: 2,
            slots: vec![(0, 0), (0, 0)],
        };
        assert!(s.validate().is_err());
    }
}
