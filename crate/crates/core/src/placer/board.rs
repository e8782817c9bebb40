use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

/// How the placer bounds the growing board.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameMode {
    /// The board must fit a known `rows × cols` frame.
    Constrained,
    /// Only the longer puzzle side bounds either board dimension.
    Unbounded,
}

impl FrameMode {
    pub fn name(self) -> &'static str {
        match self {
            FrameMode::Constrained => "constrained",
            FrameMode::Unbounded => "unbounded",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "constrained" => Ok(FrameMode::Constrained),
            "unbounded" => Ok(FrameMode::Unbounded),
            other => Err(Error::invalid(format!("unknown frame mode '{other}'"))),
        }
    }
}

/// A grid of slots, each empty or holding one piece id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Board {
    pub rows: usize,
    pub cols: usize,
    cells: Vec<Option<usize>>,
    pub frame: FrameMode,
}

impl Board {
    pub fn empty(rows: usize, cols: usize, frame: FrameMode) -> Self {
        Self {
            rows,
            cols,
            cells: vec![None; rows * cols],
            frame,
        }
    }

    /// Row-major grid of ids; `None` marks an empty slot.
    pub fn from_cells(rows: usize, cols: usize, cells: Vec<Option<usize>>, frame: FrameMode) -> Result<Self> {
        if cells.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} cells for a {rows}x{cols} board",
                cells.len()
            )));
        }
        let board = Self { rows, cols, cells, frame };
        board.check_injective()?;
        Ok(board)
    }

    /// The board a perfect solver would produce.
    pub fn from_solution(solution: &crate::puzzle::Solution) -> Result<Self> {
        let grid = solution.grid()?;
        Self::from_cells(
            solution.rows,
            solution.cols,
            grid.into_iter().map(Some).collect(),
            FrameMode::Constrained,
        )
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<usize> {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, piece: Option<usize>) {
        self.cells[row * self.cols + col] = piece;
    }

    pub fn cells(&self) -> &[Option<usize>] {
        &self.cells
    }

    /// Iterates `(piece, (row, col))` over occupied slots.
    pub fn placements(&self) -> impl Iterator<Item = (usize, (usize, usize))> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter_map(move |(i, c)| c.map(|p| (p, (i / self.cols, i % self.cols))))
    }

    pub fn occupied(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Slot of every piece `0..n`, `None` when unplaced.
    pub fn positions(&self, n: usize) -> Result<Vec<Option<(usize, usize)>>> {
        let mut pos = vec![None; n];
        for (p, rc) in self.placements() {
            let slot = pos
                .get_mut(p)
                .ok_or_else(|| Error::invalid(format!("board holds piece {p} but puzzle has {n}")))?;
            if slot.is_some() {
                return Err(Error::Internal(format!("piece {p} placed twice")));
            }
            *slot = Some(rc);
        }
        Ok(pos)
    }

    /// True when every piece `0..n` is placed exactly once.
    pub fn is_complete(&self, n: usize) -> bool {
        self.occupied() == n && self.positions(n).map(|p| p.iter().all(Option::is_some)).unwrap_or(false)
    }

    fn check_injective(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (p, _) in self.placements() {
            if !seen.insert(p) {
                return Err(Error::Internal(format!("piece {p} placed twice")));
            }
        }
        Ok(())
    }

    /// Plain-text form: `#` header lines, then one line of ids per row
    /// with `-1` for empty slots.
    pub fn to_text(&self, header: &[(&str, String)]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# tool: {}", crate::TOOL_VERSION);
        let _ = writeln!(out, "# frame: {}", self.frame.name());
        for (k, v) in header {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "# size: {} {}", self.rows, self.cols);
        for r in 0..self.rows {
            let line: Vec<String> = (0..self.cols)
                .map(|c| match self.get(r, c) {
                    Some(p) => p.to_string(),
                    None => "-1".to_string(),
                })
                .collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut frame = FrameMode::Constrained;
        let mut declared = None;
        let mut rows: Vec<Vec<Option<usize>>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.split_once(':') {
                    match k.trim() {
                        "frame" => frame = FrameMode::parse(v)?,
                        "size" => {
                            let dims: Vec<usize> = v
                                .split_whitespace()
                                .map(|t| t.parse().map_err(|_| Error::invalid(format!("bad board size '{v}'"))))
                                .collect::<Result<_>>()?;
                            if dims.len() != 2 {
                                return Err(Error::invalid(format!("bad board size '{v}'")));
                            }
                            declared = Some((dims[0], dims[1]));
                        }
                        _ => {}
                    }
                }
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|t| match t.parse::<i64>() {
                    Ok(-1) => Ok(None),
                    Ok(v) if v >= 0 => Ok(Some(v as usize)),
                    _ => Err(Error::invalid(format!("line {}: bad piece id '{t}'", lineno + 1))),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch("ragged board rows".into()));
        }
        if let Some(d) = declared {
            if d != (nrows, ncols) {
                return Err(Error::DimensionMismatch(format!(
                    "header says {}x{}, body is {nrows}x{ncols}",
                    d.0, d.1
                )));
            }
        }
        Self::from_cells(nrows, ncols, rows.into_iter().flatten().collect(), frame)
    }

    pub fn save(&self, path: &Path, header: &[(&str, String)]) -> Result<()> {
        std::fs::write(path, self.to_text(header)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text).map_err(|e| Error::load(path, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let b = Board::from_cells(2, 3, vec![Some(4), None, Some(0), Some(1), Some(2), Some(3)], FrameMode::Unbounded)
            .unwrap();
        let text = b.to_text(&[("seed", "3".into())]);
        assert!(text.contains("-1"));
        assert!(text.contains("# seed: 3"));
        assert_eq!(Board::parse_text(&text).unwrap(), b);
    }

    #[test]
    fn duplicate_piece_rejected() {
        assert!(Board::from_cells(1, 2, vec![Some(0), Some(0)], FrameMode::Constrained).is_err());
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Board::parse_text("0 1\n2\n").is_err());
        assert!(Board::parse_text("# size: 3 3\n0 1\n2 3\n").is_err());
    }
}
