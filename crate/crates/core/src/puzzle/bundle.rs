//! On-disk bundle layout: a directory holding `manifest.json` and one RGBA
//! PNG per piece, alpha 255 on valid pixels and 0 on eroded ones. The
//! solution lives in its own JSON file so a solver never sees it.

use std::fs;
use std::io::{BufWriter, Cursor};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PieceImage, PuzzleBundle, Solution};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    tool: String,
    piece_size: usize,
    rows: usize,
    cols: usize,
    erosion_width: usize,
    shuffled: bool,
    seed: Option<u64>,
    pieces: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SolutionFile {
    tool: String,
    #[serde(flatten)]
    solution: Solution,
}

fn piece_file_name(id: usize) -> String {
    format!("piece_{id:04}.png")
}

pub fn save_bundle(bundle: &PuzzleBundle, dir: &Path) -> Result<()> {
    bundle.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let names: Vec<String> = (0..bundle.len()).map(piece_file_name).collect();
    for (piece, name) in bundle.pieces.iter().zip(&names) {
        let s = piece.size();
        let mut rgba = Vec::with_capacity(s * s * 4);
        for (px, ok) in piece.rgb().chunks_exact(3).zip(piece.valid_mask()) {
            rgba.extend_from_slice(px);
            rgba.push(if *ok { 255 } else { 0 });
        }
        write_png(&dir.join(name), s as u32, s as u32, png::ColorType::Rgba, &rgba, &[])?;
    }
    let manifest = Manifest {
        tool: crate::TOOL_VERSION.to_string(),
        piece_size: bundle.piece_size,
        rows: bundle.rows,
        cols: bundle.cols,
        erosion_width: bundle.erosion_width,
        shuffled: bundle.shuffled,
        seed: bundle.seed,
        pieces: names,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

pub fn load_bundle(dir: &Path) -> Result<PuzzleBundle> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::load(&path, format!("corrupt manifest: {e}")))?;
    if m.rows * m.cols != m.pieces.len() {
        return Err(Error::DimensionMismatch(format!(
            "manifest declares {}x{} grid but lists {} pieces",
            m.rows,
            m.cols,
            m.pieces.len()
        )));
    }
    let mut pieces = Vec::with_capacity(m.pieces.len());
    for (id, name) in m.pieces.iter().enumerate() {
        let p = dir.join(name);
        let bytes = fs::read(&p).map_err(|e| Error::load(&p, format!("missing piece {id}: {e}")))?;
        let (w, h, rgba) = decode_rgba(&bytes).map_err(|e| Error::load(&p, format!("piece {id}: {e}")))?;
        if w != m.piece_size || h != m.piece_size {
            return Err(Error::DimensionMismatch(format!(
                "piece {id} is {w}x{h}, manifest says {}",
                m.piece_size
            )));
        }
        let mut rgb = Vec::with_capacity(w * h * 3);
        let mut valid = Vec::with_capacity(w * h);
        for px in rgba.chunks_exact(4) {
            rgb.extend_from_slice(&px[..3]);
            match px[3] {
                255 => valid.push(true),
                0 => valid.push(false),
                a => return Err(Error::load(&p, format!("piece {id}: alpha {a} is neither 0 nor 255"))),
            }
        }
        pieces.push(PieceImage::with_mask(id, m.piece_size, rgb, valid)?);
    }
    let bundle = PuzzleBundle {
        pieces,
        piece_size: m.piece_size,
        rows: m.rows,
        cols: m.cols,
        erosion_width: m.erosion_width,
        shuffled: m.shuffled,
        seed: m.seed,
    };
    bundle.validate()?;
    Ok(bundle)
}

pub fn save_solution(solution: &Solution, path: &Path) -> Result<()> {
    solution.validate()?;
    let file = SolutionFile {
        tool: crate::TOOL_VERSION.to_string(),
        solution: solution.clone(),
    };
    let json = serde_json::to_string_pretty(&file).map_err(|e| Error::Internal(e.to_string()))?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_solution(path: &Path) -> Result<Solution> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: SolutionFile = serde_json::from_str(&text).map_err(|e| Error::load(path, format!("corrupt solution: {e}")))?;
    file.solution.validate()?;
    Ok(file.solution)
}

/// Writes an 8-bit PNG with optional `tEXt` entries.
pub(crate) fn write_png(
    path: &Path,
    width: u32,
    height: u32,
    color: png::ColorType,
    data: &[u8],
    text: &[(&str, String)],
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width, height);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let to_err = |e: png::EncodingError| Error::Internal(format!("png encode {}: {e}", path.display()));
    for (k, v) in text {
        enc.add_text_chunk(k.to_string(), v.clone()).map_err(to_err)?;
    }
    let mut writer = enc.write_header().map_err(to_err)?;
    writer.write_image_data(data).map_err(to_err)?;
    writer.finish().map_err(to_err)
}

fn decode_rgba(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<u8>), String> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| e.to_string())?;
    let mut buf = vec![0; reader.output_buffer_size().ok_or("image too large")?];
    let info = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    if info.color_type != png::ColorType::Rgba || info.bit_depth != png::BitDepth::Eight {
        return Err(format!("expected 8-bit RGBA, got {:?} {:?}", info.color_type, info.bit_depth));
    }
    buf.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, buf))
}
