use image::{Rgb, RgbImage};

use super::PuzzleBundle;
use crate::placer::Board;
use crate::{Error, Result};

/// Fill value of slots with no piece.
pub const EMPTY_GRAY: [u8; 3] = [128, 128, 128];

/// Paints `board` at full resolution. Eroded pixels come out black and
/// empty slots mid-gray.
pub fn render(board: &Board, bundle: &PuzzleBundle) -> Result<RgbImage> {
    if board.rows > bundle.rows || board.cols > bundle.cols {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} board does not fit a {}x{} puzzle",
            board.rows, board.cols, bundle.rows, bundle.cols
        )));
    }
    // rejects duplicates and unknown ids
    board.positions(bundle.len())?;

    let s = bundle.piece_size;
    let mut out = RgbImage::from_pixel((bundle.cols * s) as u32, (bundle.rows * s) as u32, Rgb(EMPTY_GRAY));
    for (id, (r, c)) in board.placements() {
        let piece = &bundle.pieces[id];
        for y in 0..s {
            for x in 0..s {
                let px = if piece.is_valid(y, x) { piece.rgb_at(y, x) } else { [0, 0, 0] };
                out.put_pixel((c * s + x) as u32, (r * s + y) as u32, Rgb(px));
            }
        }
    }
    Ok(out)
}
