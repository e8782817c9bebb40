//! Joined two-piece images for the inpainting and classification networks.
//!
//! Every pair is presented horizontally: the first piece on the left, the
//! second on the right, with the unknown gap as a central vertical band.
//! Vertical pairs are rotated 90° counter-clockwise so the upper piece lands
//! on the left.

use image::RgbImage;
use rand::Rng;

use crate::netcore::Tensor;
use crate::puzzle::{PieceImage, PuzzleBundle, Solution};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Right = 0,
    Down = 1,
    Left = 2,
    Up = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Right, Direction::Down, Direction::Left, Direction::Up];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn opposite(self) -> Self {
        match self {
            Direction::Right => Direction::Left,
            Direction::Down => Direction::Up,
            Direction::Left => Direction::Right,
            Direction::Up => Direction::Down,
        }
    }

    /// Row/column step from a piece to its neighbor in this direction.
    pub fn delta(self) -> (isize, isize) {
        match self {
            Direction::Right => (0, 1),
            Direction::Down => (1, 0),
            Direction::Left => (0, -1),
            Direction::Up => (-1, 0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Right => "right",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Up => "up",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown direction '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairMeta {
    pub x: usize,
    pub y: usize,
    pub direction: Direction,
}

/// A joined pair ready for the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    /// `3 × S × 2S`, zero wherever the pixel is unknown.
    pub input: Tensor,
    /// `S × 2S`, true on the band the generator fills.
    pub mask: Vec<bool>,
    /// The same pair before erosion, when known.
    pub original: Option<Tensor>,
    pub label: Option<Label>,
    pub meta: PairMeta,
}

impl PairSample {
    pub fn piece_size(&self) -> usize {
        self.input.h
    }

    pub fn mask_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

/// Central band mask `[S − w, S + w)` over an `S × 2S` pair.
pub fn band_mask(s: usize, w: usize) -> Vec<bool> {
    let mut mask = vec![false; s * 2 * s];
    for y in 0..s {
        for x in s - w..s + w {
            mask[y * 2 * s + x] = true;
        }
    }
    mask
}

/// Places `x` and `y` side by side (`Right`) or stacks and rotates them
/// (`Down`). Left/Up pairs are expressed by swapping the arguments.
pub fn join_pair(x: &PieceImage, y: &PieceImage, d: Direction, w: usize) -> Result<PairSample> {
    let s = x.size();
    if y.size() != s {
        return Err(Error::invalid(format!("pieces {} and {} differ in size", x.id, y.id)));
    }
    if 2 * w >= s {
        return Err(Error::invalid(format!("erosion width {w} too large for {s}-pixel pieces")));
    }
    let mut input = Tensor::zeros(3, s, 2 * s);
    let put = |input: &mut Tensor, piece: &PieceImage, pr: usize, pc: usize, r: usize, c: usize| {
        if piece.is_valid(pr, pc) {
            for ch in 0..3 {
                input.set(ch, r, c, piece.pixel(pr, pc, ch));
            }
        }
    };
    match d {
        Direction::Right => {
            for r in 0..s {
                for c in 0..s {
                    put(&mut input, x, r, c, r, c);
                    put(&mut input, y, r, c, r, s + c);
                }
            }
        }
        Direction::Down => {
            // stack is 2S tall; rotating counter-clockwise maps stack (row, col)
            // to (S - 1 - col, row)
            for r in 0..s {
                for c in 0..s {
                    put(&mut input, x, r, c, s - 1 - c, r);
                    put(&mut input, y, r, c, s - 1 - c, s + r);
                }
            }
        }
        Direction::Left | Direction::Up => {
            return Err(Error::invalid(format!(
                "join_pair takes right/down only; swap the pieces for {}",
                d.name()
            )))
        }
    }
    let mut mask = band_mask(s, w);
    // eroded pixels outside the band stay zero and fixed
    for (i, m) in mask.iter_mut().enumerate() {
        if *m {
            for ch in 0..3 {
                input.data[ch * s * 2 * s + i] = 0.0;
            }
        }
    }
    mask.shrink_to_fit();
    Ok(PairSample {
        input,
        mask,
        original: None,
        label: None,
        meta: PairMeta {
            x: x.id,
            y: y.id,
            direction: d,
        },
    })
}

/// Columns `[S/2, 3S/2)` of an `S × 2S` pair.
pub fn center_crop(raster: &Tensor) -> Result<Tensor> {
    if !raster.w.is_multiple_of(2) || raster.w != 2 * raster.h {
        return Err(Error::invalid(format!(
            "center crop expects an S x 2S raster, got {}x{}",
            raster.h, raster.w
        )));
    }
    let s = raster.h;
    Ok(raster.crop_columns(s / 2, s))
}

/// Options shared by the training samplers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOptions {
    pub piece_size: usize,
    pub erosion_width: usize,
    /// Also zero the non-facing frame of both pieces in inputs and originals.
    pub erode_outer_frame: bool,
}

/// A positive training pair cut at a random position of `image`, with the
/// pre-erosion pixels kept as the reconstruction target.
pub fn make_phase1_example<R: Rng + ?Sized>(image: &RgbImage, opts: &PairOptions, rng: &mut R) -> Result<PairSample> {
    let (s, w) = (opts.piece_size, opts.erosion_width);
    let (iw, ih) = (image.width() as usize, image.height() as usize);
    let horizontal_ok = iw >= 2 * s && ih >= s;
    let vertical_ok = ih >= 2 * s && iw >= s;
    let direction = match (horizontal_ok, vertical_ok) {
        (true, true) => {
            if rng.gen_bool(0.5) {
                Direction::Right
            } else {
                Direction::Down
            }
        }
        (true, false) => Direction::Right,
        (false, true) => Direction::Down,
        (false, false) => {
            return Err(Error::invalid(format!(
                "{iw}x{ih} image cannot hold two adjacent {s}-pixel pieces"
            )))
        }
    };
    let (dr, dc) = match direction {
        Direction::Right => (0, s),
        _ => (s, 0),
    };
    let top = rng.gen_range(0..=ih - s - dr);
    let left = rng.gen_range(0..=iw - s - dc);
    let cut = |id: usize, y0: usize, x0: usize| {
        let mut rgb = Vec::with_capacity(s * s * 3);
        for y in 0..s {
            for x in 0..s {
                rgb.extend_from_slice(&image.get_pixel((x0 + x) as u32, (y0 + y) as u32).0);
            }
        }
        PieceImage::from_rgb(id, s, rgb)
    };
    let a = cut(0, top, left)?;
    let b = cut(1, top + dr, left + dc)?;
    let whole = join_pair(&a, &b, direction, 0)?;
    let mut original = whole.input;
    if opts.erode_outer_frame {
        zero_outer_frame(&mut original, w);
    }
    let mask = band_mask(s, w);
    let mut input = original.clone();
    let plane = s * 2 * s;
    for (i, m) in mask.iter().enumerate() {
        if *m {
            for ch in 0..3 {
                input.data[ch * plane + i] = 0.0;
            }
        }
    }
    Ok(PairSample {
        input,
        mask,
        original: Some(original),
        label: Some(Label::Positive),
        meta: PairMeta { x: 0, y: 1, direction },
    })
}

fn zero_outer_frame(t: &mut Tensor, w: usize) {
    let (h, wd) = (t.h, t.w);
    for ch in 0..t.c {
        for y in 0..h {
            for x in 0..wd {
                if y < w || y >= h - w || x < w || x >= wd - w {
                    t.set(ch, y, x, 0.0);
                }
            }
        }
    }
}

/// All `(x, y)` piece pairs that are true neighbors in direction `d`
/// (`Right` or `Down`).
pub fn adjacent_pairs(solution: &Solution, d: Direction) -> Result<Vec<(usize, usize)>> {
    let grid = solution.grid()?;
    let (dr, dc) = d.delta();
    let mut out = Vec::new();
    for r in 0..solution.rows {
        for c in 0..solution.cols {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr < 0 || nc < 0 || nr as usize >= solution.rows || nc as usize >= solution.cols {
                continue;
            }
            out.push((grid[r * solution.cols + c], grid[nr as usize * solution.cols + nc as usize]));
        }
    }
    Ok(out)
}

/// One positive pair and one negative pair from the same puzzle. The
/// negative keeps one piece of the positive and swaps the other for a
/// uniformly drawn piece that is not its true neighbor in that direction.
pub fn make_phase2_pair<R: Rng + ?Sized>(
    bundle: &PuzzleBundle,
    solution: &Solution,
    rng: &mut R,
) -> Result<(PairSample, PairSample)> {
    let n = bundle.len();
    if n < 3 {
        return Err(Error::invalid(format!("phase-2 sampling needs at least 3 pieces, got {n}")));
    }
    let horiz = adjacent_pairs(solution, Direction::Right)?;
    let vert = adjacent_pairs(solution, Direction::Down)?;
    let (d, pairs) = match (horiz.is_empty(), vert.is_empty()) {
        (false, false) => {
            if rng.gen_bool(0.5) {
                (Direction::Right, horiz)
            } else {
                (Direction::Down, vert)
            }
        }
        (false, true) => (Direction::Right, horiz),
        (true, false) => (Direction::Down, vert),
        (true, true) => return Err(Error::invalid("puzzle has no adjacent pairs")),
    };
    let (x, y) = pairs[rng.gen_range(0..pairs.len())];
    let w = bundle.erosion_width;
    let mut pos = join_pair(&bundle.pieces[x], &bundle.pieces[y], d, w)?;
    pos.label = Some(Label::Positive);

    let keep_first = rng.gen_bool(0.5);
    let (kept, partner) = if keep_first { (x, y) } else { (y, x) };
    // uniform over pieces other than the kept one and its true partner
    let mut other = rng.gen_range(0..n - 2);
    for skip in sorted2(kept, partner) {
        if other >= skip {
            other += 1;
        }
    }
    let (nx, ny) = if keep_first { (kept, other) } else { (other, kept) };
    let mut neg = join_pair(&bundle.pieces[nx], &bundle.pieces[ny], d, w)?;
    neg.label = Some(Label::Negative);
    Ok((pos, neg))
}

fn sorted2(a: usize, b: usize) -> [usize; 2] {
    if a <= b {
        [a, b]
    } else {
        [b, a]
    }
}
