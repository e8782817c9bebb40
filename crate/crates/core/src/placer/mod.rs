//! Greedy placement: seed with the piece that has the most best buddies,
//! then repeatedly put the unplaced piece that best fits a frontier slot.

mod board;
mod compat;

use std::collections::{BTreeSet, HashMap};

use crate::pairgen::Direction;
use crate::scorer::DissimilarityTensor;
use crate::{Error, Result};

pub use board::{Board, FrameMode};
pub use compat::{best_buddies, best_partner, compatibility, compatibility_value, CompatibilityTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlaceOptions {
    pub frame: FrameMode,
    pub rows: usize,
    pub cols: usize,
    /// When set, ties between pieces follow a seeded priority order instead
    /// of piece ids.
    pub tiebreak_seed: Option<u64>,
}

impl PlaceOptions {
    pub fn constrained(rows: usize, cols: usize) -> Self {
        Self {
            frame: FrameMode::Constrained,
            rows,
            cols,
            tiebreak_seed: None,
        }
    }

    /// Largest allowed bounding box (height, width).
    pub fn limits(&self) -> (usize, usize) {
        match self.frame {
            FrameMode::Constrained => (self.rows, self.cols),
            FrameMode::Unbounded => {
                let l = self.rows.max(self.cols);
                (l, l)
            }
        }
    }
}

/// Sortable form of a score: non-finite values rank below every finite one.
#[inline]
pub fn rank_score(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Compatibility of `q` at a slot, averaged over its placed neighbors.
/// `neighbors` lists `(p, d)` with `p` lying in direction `d` of the slot.
pub fn slot_score(c: &CompatibilityTensor, q: usize, neighbors: &[(usize, Direction)]) -> f64 {
    let sum: f64 = neighbors
        .iter()
        .map(|&(p, d)| (c.get(q, p, d) + c.get(p, q, d.opposite())) / 2.0)
        .sum();
    rank_score(sum / neighbors.len() as f64)
}

/// Priority of each piece in tie-breaks (lower wins).
pub fn piece_priority(n: usize, tiebreak_seed: Option<u64>) -> Vec<usize> {
    match tiebreak_seed {
        None => (0..n).collect(),
        Some(seed) => {
            let perm = crate::puzzle::permutation(n, seed);
            let mut rank = vec![0; n];
            for (i, p) in perm.into_iter().enumerate() {
                rank[p] = i;
            }
            rank
        }
    }
}

/// The first piece to place: most best-buddy relations, then the largest
/// sum of their compatibilities, then priority.
pub fn seed_piece(c: &CompatibilityTensor, priority: &[usize]) -> usize {
    let n = c.n();
    let mut count = vec![0usize; n];
    let mut sum = vec![0.0f64; n];
    for (x, y, d) in best_buddies(c) {
        count[x] += 1;
        sum[x] += c.get(x, y, d);
    }
    (0..n)
        .min_by(|&a, &b| {
            count[b]
                .cmp(&count[a])
                .then(rank_score(sum[b]).total_cmp(&rank_score(sum[a])))
                .then(priority[a].cmp(&priority[b]))
        })
        .expect("n >= 1")
}

type Slot = (i64, i64);

fn neighbors_of(placed: &HashMap<Slot, usize>, (r, c): Slot) -> Vec<(usize, Direction)> {
    Direction::ALL
        .iter()
        .filter_map(|&d| {
            let (dr, dc) = d.delta();
            placed.get(&(r + dr as i64, c + dc as i64)).map(|&p| (p, d))
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct BBox {
    r0: i64,
    r1: i64,
    c0: i64,
    c1: i64,
}

impl BBox {
    fn with(self, (r, c): Slot) -> Self {
        Self {
            r0: self.r0.min(r),
            r1: self.r1.max(r),
            c0: self.c0.min(c),
            c1: self.c1.max(c),
        }
    }

    fn fits(self, (h, w): (usize, usize)) -> bool {
        (self.r1 - self.r0 + 1) as usize <= h && (self.c1 - self.c0 + 1) as usize <= w
    }
}

/// Greedy placement of all `c.n()` pieces.
pub fn place(c: &CompatibilityTensor, opts: &PlaceOptions) -> Result<Board> {
    let n = c.n();
    check_frame(n, opts)?;
    let priority = piece_priority(n, opts.tiebreak_seed);
    let limits = opts.limits();

    let mut placed: HashMap<Slot, usize> = HashMap::with_capacity(n);
    let mut unplaced: BTreeSet<usize> = (0..n).collect();
    let mut frontier: BTreeSet<Slot> = BTreeSet::new();
    let seed = seed_piece(c, &priority);
    let mut bbox = BBox {
        r0: 0,
        r1: 0,
        c0: 0,
        c1: 0,
    };
    let put = |slot: Slot, piece: usize, placed: &mut HashMap<Slot, usize>, frontier: &mut BTreeSet<Slot>| {
        placed.insert(slot, piece);
        frontier.remove(&slot);
        for d in Direction::ALL {
            let (dr, dc) = d.delta();
            let nb = (slot.0 + dr as i64, slot.1 + dc as i64);
            if !placed.contains_key(&nb) {
                frontier.insert(nb);
            }
        }
    };
    put((0, 0), seed, &mut placed, &mut frontier);
    unplaced.remove(&seed);

    while !unplaced.is_empty() {
        // (score, priority, slot, piece) of the best move so far
        let mut best: Option<(f64, usize, Slot, usize)> = None;
        for &slot in &frontier {
            if !bbox.with(slot).fits(limits) {
                continue;
            }
            let nbs = neighbors_of(&placed, slot);
            for &q in &unplaced {
                let s = slot_score(c, q, &nbs);
                let better = match best {
                    None => true,
                    Some((bs, bp, bslot, _)) => {
                        s > bs || (s == bs && (priority[q], slot) < (bp, bslot))
                    }
                };
                if better {
                    best = Some((s, priority[q], slot, q));
                }
            }
        }
        let (_, _, slot, q) = best.ok_or_else(|| Error::Internal("no admissible frontier slot".into()))?;
        bbox = bbox.with(slot);
        put(slot, q, &mut placed, &mut frontier);
        unplaced.remove(&q);
    }

    let (rows, cols) = match opts.frame {
        FrameMode::Constrained => (opts.rows, opts.cols),
        FrameMode::Unbounded => ((bbox.r1 - bbox.r0 + 1) as usize, (bbox.c1 - bbox.c0 + 1) as usize),
    };
    let mut board = Board::empty(rows, cols, opts.frame);
    for (&(r, col), &p) in &placed {
        board.set((r - bbox.r0) as usize, (col - bbox.c0) as usize, Some(p));
    }
    Ok(board)
}

fn check_frame(n: usize, opts: &PlaceOptions) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("nothing to place"));
    }
    if opts.rows * opts.cols < n {
        return Err(Error::invalid(format!(
            "a {}x{} frame cannot hold {n} pieces",
            opts.rows, opts.cols
        )));
    }
    Ok(())
}

/// Compatibility followed by placement; a single piece lands at (0, 0).
pub fn solve(dis: &DissimilarityTensor, opts: &PlaceOptions) -> Result<Board> {
    if dis.n() == 1 {
        check_frame(1, opts)?;
        let (rows, cols) = match opts.frame {
            FrameMode::Constrained => (opts.rows, opts.cols),
            FrameMode::Unbounded => (1, 1),
        };
        let mut b = Board::empty(rows, cols, opts.frame);
        b.set(0, 0, Some(0));
        return Ok(b);
    }
    place(&compatibility(dis)?, opts)
}

/// Sum of `D` over every horizontally or vertically adjacent pair of
/// placed pieces.
pub fn placed_edge_dissimilarity(board: &Board, dis: &DissimilarityTensor) -> f64 {
    let mut total = 0.0;
    for r in 0..board.rows {
        for c in 0..board.cols {
            let Some(a) = board.get(r, c) else { continue };
            if c + 1 < board.cols {
                if let Some(b) = board.get(r, c + 1) {
                    total += dis.get(a, b, Direction::Right);
                }
            }
            if r + 1 < board.rows {
                if let Some(b) = board.get(r + 1, c) {
                    total += dis.get(a, b, Direction::Down);
                }
            }
        }
    }
    total
}
