//! Neighbor, direct and perfect-reconstruction measures.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::pairgen::Direction;
use crate::placer::{Board, FrameMode};
use crate::puzzle::Solution;
use crate::{Error, Result};

fn complete_positions(board: &Board, solution: &Solution) -> Result<Vec<(usize, usize)>> {
    solution.validate()?;
    let n = solution.len();
    let pos = board.positions(n)?;
    if board.occupied() != n || pos.iter().any(Option::is_none) {
        return Err(Error::invalid(format!(
            "board places {} of {n} pieces",
            board.occupied()
        )));
    }
    Ok(pos.into_iter().map(|p| p.expect("checked")).collect())
}

/// Fraction of ground-truth Right/Down adjacencies that the board keeps.
pub fn neighbor_measure(board: &Board, solution: &Solution) -> Result<f64> {
    complete_positions(board, solution)?;
    let (rows, cols) = (solution.rows, solution.cols);
    let total = rows * cols.saturating_sub(1) + rows.saturating_sub(1) * cols;
    if total == 0 {
        return Ok(1.0);
    }
    let mut kept = 0;
    for r in 0..board.rows {
        for c in 0..board.cols {
            let Some(a) = board.get(r, c) else { continue };
            for d in [Direction::Right, Direction::Down] {
                let (dr, dc) = d.delta();
                let (nr, nc) = (r + dr as usize, c + dc as usize);
                if nr >= board.rows || nc >= board.cols {
                    continue;
                }
                if let Some(b) = board.get(nr, nc) {
                    let (ar, ac) = solution.slots[a];
                    if solution.slots[b] == (ar + dr as usize, ac + dc as usize) {
                        kept += 1;
                    }
                }
            }
        }
    }
    Ok(kept as f64 / total as f64)
}

fn direct_count(pos: &[(usize, usize)], solution: &Solution, dr: i64, dc: i64) -> usize {
    pos.iter()
        .zip(&solution.slots)
        .filter(|(&(r, c), &(sr, sc))| r as i64 + dr == sr as i64 && c as i64 + dc == sc as i64)
        .count()
}

/// Translation applied to an unbounded board before comparing absolute
/// positions: the one with the most correct pieces, ties to the smallest
/// shift.
pub fn best_alignment(board: &Board, solution: &Solution) -> Result<(i64, i64)> {
    let pos = complete_positions(board, solution)?;
    let mut best = (0usize, (0i64, 0i64));
    let mut first = true;
    let key = |(dr, dc): (i64, i64)| (dr.abs() + dc.abs(), dr, dc);
    for dr in -(board.rows as i64 - 1)..solution.rows as i64 {
        for dc in -(board.cols as i64 - 1)..solution.cols as i64 {
            let k = direct_count(&pos, solution, dr, dc);
            if first || k > best.0 || (k == best.0 && key((dr, dc)) < key(best.1)) {
                best = (k, (dr, dc));
                first = false;
            }
        }
    }
    Ok(best.1)
}

/// Fraction of pieces at their ground-truth slot. Unbounded boards are
/// first aligned by [`best_alignment`].
pub fn direct_measure(board: &Board, solution: &Solution) -> Result<f64> {
    let pos = complete_positions(board, solution)?;
    let (dr, dc) = match board.frame {
        FrameMode::Constrained => (0, 0),
        FrameMode::Unbounded => best_alignment(board, solution)?,
    };
    Ok(direct_count(&pos, solution, dr, dc) as f64 / solution.len() as f64)
}

pub fn perfect(board: &Board, solution: &Solution) -> Result<bool> {
    Ok(direct_measure(board, solution)? == 1.0)
}

/// One solved puzzle to evaluate.
#[derive(Debug, Clone)]
pub struct EvalItem {
    pub puzzle_id: String,
    pub erosion_pct: f64,
    pub scorer: String,
    pub board: Board,
    pub solution: Solution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub puzzle_id: String,
    pub pieces: usize,
    pub erosion_pct: f64,
    pub scorer: String,
    pub neighbor: f64,
    pub direct: f64,
    pub perfect: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub mean_neighbor: f64,
    pub mean_direct: f64,
    pub perfect_count: usize,
}

pub fn evaluate_dataset(items: &[EvalItem]) -> Result<EvalReport> {
    if items.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty dataset"));
    }
    let rows: Vec<EvalRow> = items
        .par_iter()
        .map(|it| {
            let direct = direct_measure(&it.board, &it.solution)?;
            Ok(EvalRow {
                puzzle_id: it.puzzle_id.clone(),
                pieces: it.solution.len(),
                erosion_pct: it.erosion_pct,
                scorer: it.scorer.clone(),
                neighbor: neighbor_measure(&it.board, &it.solution)?,
                direct,
                perfect: direct == 1.0,
            })
        })
        .collect::<Result<_>>()?;
    let n = rows.len() as f64;
    Ok(EvalReport {
        mean_neighbor: rows.iter().map(|r| r.neighbor).sum::<f64>() / n,
        mean_direct: rows.iter().map(|r| r.direct).sum::<f64>() / n,
        perfect_count: rows.iter().filter(|r| r.perfect).count(),
        rows,
    })
}

impl EvalReport {
    /// CSV with a `#` provenance header; the last row holds the means.
    pub fn to_csv(&self, seed: Option<u64>) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# tool: {}", crate::TOOL_VERSION);
        let _ = writeln!(out, "# seed: {}", seed.map_or("-".into(), |s| s.to_string()));
        out.push_str("puzzle_id,pieces,erosion_pct,scorer,neighbor,direct,perfect\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.puzzle_id, r.pieces, r.erosion_pct, r.scorer, r.neighbor, r.direct, r.perfect
            );
        }
        let _ = writeln!(
            out,
            "mean,{},,,{},{},{}",
            self.rows.iter().map(|r| r.pieces).sum::<usize>(),
            self.mean_neighbor,
            self.mean_direct,
            self.perfect_count
        );
        out
    }

    pub fn to_table(&self) -> String {
        let w = self.rows.iter().map(|r| r.puzzle_id.len()).max().unwrap_or(0).max(6);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<w$}  {:>6}  {:>7}  {:<8}  {:>8}  {:>8}  {:>7}",
            "puzzle", "pieces", "erosion", "scorer", "neighbor", "direct", "perfect"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<w$}  {:>6}  {:>7.3}  {:<8}  {:>7.2}%  {:>7.2}%  {:>7}",
                r.puzzle_id,
                r.pieces,
                r.erosion_pct,
                r.scorer,
                100.0 * r.neighbor,
                100.0 * r.direct,
                if r.perfect { "yes" } else { "no" }
            );
        }
        let _ = writeln!(
            out,
            "{:<w$}  {:>6}  {:>7}  {:<8}  {:>7.2}%  {:>7.2}%  {:>3}/{:<3}",
            "mean",
            "",
            "",
            "",
            100.0 * self.mean_neighbor,
            100.0 * self.mean_direct,
            self.perfect_count,
            self.rows.len()
        );
        out
    }
}
