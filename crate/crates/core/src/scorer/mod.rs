//! Pairwise dissimilarity tensors: neural, boundary baseline and oracle.

mod io;

use rayon::prelude::*;

use crate::netcore::{clamp_probability, ModelCheckpoint, Phase};
use crate::pairgen::{join_pair, Direction};
use crate::puzzle::{PieceImage, PuzzleBundle, Solution};
use crate::trainer::classifier_input;
use crate::{Error, Result};

pub use io::{load_tensor, save_tensor};

/// Dissimilarity assigned by the oracle to non-neighbors.
pub const ORACLE_FAR: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScorerKind {
    Neural,
    Baseline,
    Oracle,
}

impl ScorerKind {
    pub fn name(self) -> &'static str {
        match self {
            ScorerKind::Neural => "neural",
            ScorerKind::Baseline => "baseline",
            ScorerKind::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "neural" => Ok(ScorerKind::Neural),
            "baseline" => Ok(ScorerKind::Baseline),
            "oracle" => Ok(ScorerKind::Oracle),
            other => Err(Error::invalid(format!("unknown scorer '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorMeta {
    pub scorer: ScorerKind,
    /// Weights digest of the scoring checkpoint, when there is one.
    pub checkpoint: Option<String>,
    pub seed: Option<u64>,
    pub erosion_width: usize,
    /// Piece side in pixels; 0 when unknown.
    pub piece_size: usize,
}

impl TensorMeta {
    /// Erosion as a fraction of the piece side, when the side is known.
    pub fn erosion_pct(&self) -> Option<f64> {
        (self.piece_size > 0).then(|| self.erosion_width as f64 / self.piece_size as f64)
    }
}

/// `N × N × 4` scores; `value(x, y, d)` rates `y` as the neighbor of `x`
/// in direction `d`. The diagonal holds `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityTensor {
    n: usize,
    values: Vec<f64>,
    pub meta: TensorMeta,
}

impl DissimilarityTensor {
    /// Builds a tensor from its Right and Down slices; Left and Up follow by
    /// symmetry. `right_down(x, y)` is only called for `x != y`.
    pub fn from_fn(n: usize, meta: TensorMeta, mut right_down: impl FnMut(usize, usize, Direction) -> f64) -> Self {
        let mut t = Self::filled(n, meta);
        for x in 0..n {
            for y in 0..n {
                if x != y {
                    for d in [Direction::Right, Direction::Down] {
                        t.set_pair(x, y, d, right_down(x, y, d));
                    }
                }
            }
        }
        t
    }

    /// All off-diagonal entries zero, diagonal `+∞`.
    pub fn filled(n: usize, meta: TensorMeta) -> Self {
        let mut values = vec![0.0; n * n * 4];
        for x in 0..n {
            for d in 0..4 {
                values[(x * n + x) * 4 + d] = f64::INFINITY;
            }
        }
        Self { n, values, meta }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, d: Direction) -> f64 {
        self.values[(x * self.n + y) * 4 + d.index()]
    }

    /// Sets `(x, y, d)` and its mirror `(y, x, opposite(d))`.
    pub fn set_pair(&mut self, x: usize, y: usize, d: Direction, v: f64) {
        let n = self.n;
        self.values[(x * n + y) * 4 + d.index()] = v;
        self.values[(y * n + x) * 4 + d.opposite().index()] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Checks symmetry, the diagonal sentinel and nonnegativity.
    pub fn validate(&self) -> Result<()> {
        for x in 0..self.n {
            for y in 0..self.n {
                for d in Direction::ALL {
                    let v = self.get(x, y, d);
                    if x == y {
                        if v != f64::INFINITY {
                            return Err(Error::invalid(format!("diagonal entry ({x},{x},{}) is {v}", d.name())));
                        }
                        continue;
                    }
                    if v.is_nan() || v < 0.0 {
                        return Err(Error::invalid(format!("entry ({x},{y},{}) is {v}", d.name())));
                    }
                    let m = self.get(y, x, d.opposite());
                    if m.to_bits() != v.to_bits() {
                        return Err(Error::invalid(format!(
                            "entry ({x},{y},{}) = {v} but its mirror is {m}",
                            d.name()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `−ln p` with `p` clamped to `[1e-7, 1 − 1e-7]`.
pub fn probability_to_score(p: f64) -> f64 {
    -clamp_probability(p).ln()
}

/// Scores every ordered pair with the classifier: inpaint the joined pair,
/// crop its center, and take `−ln` of the discriminator probability.
/// Pairs are evaluated in parallel; results do not depend on the thread
/// count.
pub fn neural_dissimilarity(ckpt: &ModelCheckpoint, bundle: &PuzzleBundle) -> Result<DissimilarityTensor> {
    if ckpt.phase != Phase::Classifier {
        return Err(Error::Incompatible(format!(
            "scoring needs a classifier checkpoint, got a {} checkpoint",
            ckpt.phase.name()
        )));
    }
    if bundle.erosion_width != ckpt.meta.erosion_width {
        return Err(Error::invalid(format!(
            "bundle erosion width {} differs from the checkpoint's {}",
            bundle.erosion_width, ckpt.meta.erosion_width
        )));
    }
    if bundle.piece_size != ckpt.architecture.piece_size {
        return Err(Error::invalid(format!(
            "bundle has {}-pixel pieces, checkpoint expects {}",
            bundle.piece_size, ckpt.architecture.piece_size
        )));
    }
    bundle.validate()?;
    let n = bundle.len();
    let jobs: Vec<(usize, usize, Direction)> = (0..n)
        .flat_map(|x| (0..n).filter(move |&y| y != x).map(move |y| (x, y)))
        .flat_map(|(x, y)| [(x, y, Direction::Right), (x, y, Direction::Down)])
        .collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(x, y, d)| {
            let pair = join_pair(&bundle.pieces[x], &bundle.pieces[y], d, bundle.erosion_width)?;
            let crop = classifier_input(&ckpt.generator, ckpt.meta.inpaint, &pair)?;
            let p = ckpt.discriminator.forward(&crop)?.prob;
            let s = probability_to_score(p);
            if !s.is_finite() {
                return Err(Error::Internal(format!("non-finite score for ({x},{y},{})", d.name())));
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let meta = TensorMeta {
        scorer: ScorerKind::Neural,
        checkpoint: Some(ckpt.weights_hash()),
        seed: bundle.seed,
        erosion_width: bundle.erosion_width,
        piece_size: bundle.piece_size,
    };
    let mut t = DissimilarityTensor::filled(n, meta);
    for (&(x, y, d), s) in jobs.iter().zip(scores) {
        t.set_pair(x, y, d, s);
    }
    Ok(t)
}

/// The outermost valid pixel of row/column `line` scanning from the given
/// side, as normalized RGB.
fn outermost(p: &PieceImage, line: usize, side: Direction) -> Option<[f64; 3]> {
    let s = p.size();
    let at = |k: usize| match side {
        Direction::Right => (line, s - 1 - k),
        Direction::Left => (line, k),
        Direction::Down => (s - 1 - k, line),
        Direction::Up => (k, line),
    };
    (0..s).map(at).find(|&(r, c)| p.is_valid(r, c)).map(|(r, c)| {
        let px = p.rgb_at(r, c);
        [px[0] as f64 / 255.0, px[1] as f64 / 255.0, px[2] as f64 / 255.0]
    })
}

/// Mean squared color difference between the outermost known pixels of `x`
/// facing `d` and those of `y` facing back. Lines where either piece has no
/// known pixel are skipped; if none remain the score is the maximum, 1.
pub fn boundary_mse(x: &PieceImage, y: &PieceImage, d: Direction) -> f64 {
    let s = x.size();
    let (mut sum, mut count) = (0.0, 0usize);
    for line in 0..s {
        if let (Some(a), Some(b)) = (outermost(x, line, d), outermost(y, line, d.opposite())) {
            for ch in 0..3 {
                sum += (a[ch] - b[ch]).powi(2);
            }
            count += 3;
        }
    }
    if count == 0 {
        1.0
    } else {
        sum / count as f64
    }
}

/// Classic boundary comparison that treats the outermost known pixels as
/// the piece edge.
pub fn baseline_dissimilarity(bundle: &PuzzleBundle) -> Result<DissimilarityTensor> {
    bundle.validate()?;
    let n = bundle.len();
    let meta = TensorMeta {
        scorer: ScorerKind::Baseline,
        checkpoint: None,
        seed: bundle.seed,
        erosion_width: bundle.erosion_width,
        piece_size: bundle.piece_size,
    };
    let rows: Vec<Vec<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|x| {
            (0..n)
                .map(|y| {
                    if x == y {
                        (0.0, 0.0)
                    } else {
                        let (a, b) = (&bundle.pieces[x], &bundle.pieces[y]);
                        (boundary_mse(a, b, Direction::Right), boundary_mse(a, b, Direction::Down))
                    }
                })
                .collect()
        })
        .collect();
    Ok(DissimilarityTensor::from_fn(n, meta, |x, y, d| match d {
        Direction::Right => rows[x][y].0,
        _ => rows[x][y].1,
    }))
}

/// 0 for ground-truth neighbors in the stated direction, 1000 otherwise.
pub fn oracle_dissimilarity(solution: &Solution, n: usize) -> Result<DissimilarityTensor> {
    solution.validate()?;
    if solution.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "solution has {} pieces, expected {n}",
            solution.len()
        )));
    }
    let meta = TensorMeta {
        scorer: ScorerKind::Oracle,
        checkpoint: None,
        seed: None,
        erosion_width: 0,
        piece_size: 0,
    };
    Ok(DissimilarityTensor::from_fn(n, meta, |x, y, d| {
        let (r, c) = solution.slots[x];
        let (dr, dc) = d.delta();
        let want = (r as isize + dr, c as isize + dc);
        let (yr, yc) = solution.slots[y];
        if want == (yr as isize, yc as isize) {
            0.0
        } else {
            ORACLE_FAR
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::puzzle::PieceImage;

    fn oracle_meta() -> TensorMeta {
        TensorMeta {
            scorer: ScorerKind::Oracle,
            checkpoint: None,
            seed: None,
            erosion_width: 0,
            piece_size: 0,
        }
    }

    #[test]
    fn score_examples() {
        assert!(probability_to_score(1.0 - 1e-7) < 1e-6);
        assert!((probability_to_score(0.5) - 2f64.ln()).abs() < 1e-15);
        assert!((probability_to_score(0.02) - 3.912).abs() < 1e-3);
        assert!((probability_to_score(0.0) - 16.118).abs() < 1e-3);
        let mut prev = f64::INFINITY;
        for i in 1..100 {
            let s = probability_to_score(i as f64 / 100.0);
            assert!(s < prev);
            prev = s;
        }
    }

    #[test]
    fn oracle_two_by_two() {
        let t = oracle_dissimilarity(&Solution::identity(2, 2), 4).unwrap();
        t.validate().unwrap();
        let zeros = (0..4)
            .flat_map(|x| (0..4).map(move |y| (x, y)))
            .filter(|&(x, y)| x != y)
            .flat_map(|(x, y)| [(x, y, Direction::Right), (x, y, Direction::Down)])
            .filter(|&(x, y, d)| t.get(x, y, d) == 0.0)
            .count();
        assert_eq!(zeros, 4);
        assert_eq!(t.get(1, 0, Direction::Left), 0.0);
        assert_eq!(t.get(2, 0, Direction::Up), 0.0);
        assert_eq!(t.get(0, 3, Direction::Right), ORACLE_FAR);
    }

    #[test]
    fn oracle_single_piece() {
        let t = oracle_dissimilarity(&Solution::identity(1, 1), 1).unwrap();
        assert!(t.values().iter().all(|v| *v == f64::INFINITY));
    }

    #[test]
    fn baseline_flat_and_extremes() {
        let a = PieceImage::solid(0, 8, [10, 20, 30]);
        let b = PieceImage::solid(1, 8, [10, 20, 30]);
        assert_eq!(boundary_mse(&a, &b, Direction::Right), 0.0);
        let black = PieceImage::solid(0, 8, [0, 0, 0]);
        let white = PieceImage::solid(1, 8, [255, 255, 255]);
        assert_eq!(boundary_mse(&black, &white, Direction::Down), 1.0);
    }

    #[test]
    fn baseline_unaffected_by_erosion_of_flat_pieces() {
        let mut a = PieceImage::solid(0, 8, [0, 0, 0]);
        let mut b = PieceImage::solid(1, 8, [255, 0, 0]);
        a.erode_frame(2);
        b.erode_frame(2);
        assert!((boundary_mse(&a, &b, Direction::Right) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn baseline_zero_erosion_is_adjacent_column_ssd() {
        let s = 4;
        let rgb = |seed: u8| (0..s * s * 3).map(|i| (i as u8).wrapping_mul(seed).wrapping_add(seed)).collect::<Vec<_>>();
        let a = PieceImage::from_rgb(0, s, rgb(7)).unwrap();
        let b = PieceImage::from_rgb(1, s, rgb(13)).unwrap();
        let mut ssd = 0.0;
        for r in 0..s {
            for ch in 0..3 {
                ssd += (a.pixel(r, s - 1, ch) - b.pixel(r, 0, ch)).powi(2);
            }
        }
        assert!((boundary_mse(&a, &b, Direction::Right) - ssd / (3 * s) as f64).abs() < 1e-12);
    }

    #[test]
    fn from_fn_fills_mirrors() {
        let t = DissimilarityTensor::from_fn(3, oracle_meta(), |x, y, d| (x * 10 + y) as f64 + d.index() as f64 * 0.5);
        t.validate().unwrap();
        assert_eq!(t.get(2, 1, Direction::Left), t.get(1, 2, Direction::Right));
        assert_eq!(t.get(0, 0, Direction::Up), f64::INFINITY);
    }
}
