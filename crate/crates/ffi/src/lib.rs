//! C ABI for the gapfill solver.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `gf_*_load`/`gf_score_*`/`gf_place` call and released with the matching
//! `gf_*_free`. Functions return a [`GfStatus`]; on failure the message is
//! available from [`gf_last_error`] on the same thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use gapfill::metrics;
use gapfill::netcore::{load_checkpoint, ModelCheckpoint};
use gapfill::pairgen::Direction;
use gapfill::placer::{self, Board, FrameMode, PlaceOptions};
use gapfill::puzzle::{load_bundle, load_solution, PuzzleBundle, Solution};
use gapfill::scorer::{self, DissimilarityTensor};
use gapfill::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidInput = 2,
    Io = 3,
    Load = 4,
    Incompatible = 5,
    Internal = 6,
    Panic = 7,
}

/// Board frame handling for [`gf_place`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GfFrame {
    Constrained = 0,
    Unbounded = 1,
}

/// Quality of a solved board.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GfMetrics {
    pub neighbor: f64,
    pub direct: f64,
    pub perfect: bool,
}

pub struct GfBundle(PuzzleBundle);
pub struct GfSolution(Solution);
pub struct GfModel(ModelCheckpoint);
pub struct GfTensor(DissimilarityTensor);
pub struct GfBoard(Board);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> GfStatus {
    match e {
        Error::InvalidInput(_) | Error::DimensionMismatch(_) => GfStatus::InvalidInput,
        Error::Io { .. } => GfStatus::Io,
        Error::Load { .. } | Error::Image { .. } => GfStatus::Load,
        Error::ArchitectureMismatch { .. } | Error::Incompatible(_) => GfStatus::Incompatible,
        Error::Diverged { .. } | Error::Internal(_) => GfStatus::Internal,
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), GfStatus>) -> GfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            GfStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside gapfill");
            GfStatus::Panic
        }
    }
}

fn fail(e: Error) -> GfStatus {
    set_error(&e.to_string());
    status_of(&e)
}

fn null(what: &str) -> GfStatus {
    set_error(&format!("{what} is null"));
    GfStatus::NullArgument
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, GfStatus> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(Error::InvalidInput("path is not UTF-8".into())))
}

unsafe fn obj<'a, T>(p: *const T, what: &str) -> Result<&'a T, GfStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), GfStatus> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message describing the last failure on this thread; empty after a
/// success. Valid until the next gapfill call on the same thread.
#[no_mangle]
pub extern "C" fn gf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gf_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains NUL"),
    };
    VERSION.as_ptr()
}

#[no_mangle]
pub unsafe extern "C" fn gf_bundle_load(dir: *const c_char, out: *mut *mut GfBundle) -> GfStatus {
    guard(|| {
        let b = load_bundle(&path_arg(dir)?).map_err(fail)?;
        put(out, GfBundle(b))
    })
}

#[no_mangle]
pub unsafe extern "C" fn gf_bundle_free(b: *mut GfBundle) {
    free(b)
}

/// Piece count, or 0 for a null bundle.
#[no_mangle]
pub unsafe extern "C" fn gf_bundle_len(b: *const GfBundle) -> usize {
    b.as_ref().map_or(0, |b| b.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn gf_bundle_grid(b: *const GfBundle, rows: *mut usize, cols: *mut usize) -> GfStatus {
    guard(|| {
        let b = obj(b, "bundle")?;
        if rows.is_null() || cols.is_null() {
            return Err(null("output pointer"));
        }
        *rows = b.0.rows;
        *cols = b.0.cols;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn gf_solution_load(path: *const c_char, out: *mut *mut GfSolution) -> GfStatus {
    guard(|| {
        let s = load_solution(&path_arg(path)?).map_err(fail)?;
        put(out, GfSolution(s))
    })
}

#[no_mangle]
pub unsafe extern "C" fn gf_solution_free(s: *mut GfSolution) {
    free(s)
}

#[no_mangle]
pub unsafe extern "C" fn gf_model_load(path: *const c_char, out: *mut *mut GfModel) -> GfStatus {
    guard(|| {
        let m = load_checkpoint(&path_arg(path)?, None).map_err(fail)?;
        put(out, GfModel(m))
    })
}

#[no_mangle]
pub unsafe extern "C" fn gf_model_free(m: *mut GfModel) {
    free(m)
}

#[no_mangle]
pub unsafe extern "C" fn gf_score_baseline(b: *const GfBundle, out: *mut *mut GfTensor) -> GfStatus {
    guard(|| {
        let t = scorer::baseline_dissimilarity(&obj(b, "bundle")?.0).map_err(fail)?;
        put(out, GfTensor(t))
    })
}

#[no_mangle]
pub unsafe extern "C" fn gf_score_oracle(s: *const GfSolution, out: *mut *mut GfTensor) -> GfStatus {
    guard(|| {
        let s = &obj(s, "solution")?.0;
        let t = scorer::oracle_dissimilarity(s, s.len()).map_err(fail)?;
        put(out, GfTensor(t))
    })
}

/// Fails with `Incompatible`/`InvalidInput` when the model is not a
/// classifier or was trained for another erosion width.
#[no_mangle]
pub unsafe extern "C" fn gf_score_neural(m: *const GfModel, b: *const GfBundle, out: *mut *mut GfTensor) -> GfStatus {
    guard(|| {
        let t = scorer::neural_dissimilarity(&obj(m, "model")?.0, &obj(b, "bundle")?.0).map_err(fail)?;
        put(out, GfTensor(t))
    })
}

#[no_mangle]
pub unsafe extern "C" fn gf_tensor_load(path: *const c_char, out: *mut *mut GfTensor) -> GfStatus {
    guard(|| {
        let t = scorer::load_tensor(&path_arg(path)?).map_err(fail)?;
        put(out, GfTensor(t))
    })
}

#[no_mangle]
pub unsafe extern "C" fn gf_tensor_save(t: *const GfTensor, path: *const c_char) -> GfStatus {
    guard(|| scorer::save_tensor(&obj(t, "tensor")?.0, &path_arg(path)?).map_err(fail))
}

#[no_mangle]
pub unsafe extern "C" fn gf_tensor_free(t: *mut GfTensor) {
    free(t)
}

/// Number of pieces the tensor covers, or 0 for null.
#[no_mangle]
pub unsafe extern "C" fn gf_tensor_len(t: *const GfTensor) -> usize {
    t.as_ref().map_or(0, |t| t.0.n())
}

/// Dissimilarity of `y` as the neighbor of `x` in direction `dir`
/// (0 right, 1 down, 2 left, 3 up).
#[no_mangle]
pub unsafe extern "C" fn gf_tensor_get(t: *const GfTensor, x: usize, y: usize, dir: u32, value: *mut f64) -> GfStatus {
    guard(|| {
        let t = &obj(t, "tensor")?.0;
        if value.is_null() {
            return Err(null("output pointer"));
        }
        let d = Direction::from_index(dir as usize)
            .ok_or_else(|| fail(Error::InvalidInput(format!("direction {dir} is not in 0..4"))))?;
        if x >= t.n() || y >= t.n() {
            return Err(fail(Error::InvalidInput(format!("({x},{y}) outside a {}-piece tensor", t.n()))));
        }
        *value = t.get(x, y, d);
        Ok(())
    })
}

/// Greedy placement; `frame` is a [`GfFrame`] value. `tiebreak_seed` is
/// used only when `seeded_ties` is true.
#[no_mangle]
pub unsafe extern "C" fn gf_place(
    t: *const GfTensor,
    frame: u32,
    rows: usize,
    cols: usize,
    seeded_ties: bool,
    tiebreak_seed: u64,
    out: *mut *mut GfBoard,
) -> GfStatus {
    guard(|| {
        let t = &obj(t, "tensor")?.0;
        let opts = PlaceOptions {
            frame: match frame {
                f if f == GfFrame::Constrained as u32 => FrameMode::Constrained,
                f if f == GfFrame::Unbounded as u32 => FrameMode::Unbounded,
                f => return Err(fail(Error::InvalidInput(format!("unknown frame mode {f}")))),
            },
            rows,
            cols,
            tiebreak_seed: seeded_ties.then_some(tiebreak_seed),
        };
        let b = placer::solve(t, &opts).map_err(fail)?;
        put(out, GfBoard(b))
    })
}

#[no_mangle]
pub unsafe extern "C" fn gf_board_load(path: *const c_char, out: *mut *mut GfBoard) -> GfStatus {
    guard(|| {
        let b = Board::load(&path_arg(path)?).map_err(fail)?;
        put(out, GfBoard(b))
    })
}

#[no_mangle]
pub unsafe extern "C" fn gf_board_save(b: *const GfBoard, path: *const c_char) -> GfStatus {
    guard(|| obj(b, "board")?.0.save(&path_arg(path)?, &[]).map_err(fail))
}

#[no_mangle]
pub unsafe extern "C" fn gf_board_free(b: *mut GfBoard) {
    free(b)
}

#[no_mangle]
pub unsafe extern "C" fn gf_board_size(b: *const GfBoard, rows: *mut usize, cols: *mut usize) -> GfStatus {
    guard(|| {
        let b = obj(b, "board")?;
        if rows.is_null() || cols.is_null() {
            return Err(null("output pointer"));
        }
        *rows = b.0.rows;
        *cols = b.0.cols;
        Ok(())
    })
}

/// Piece id at a slot, `-1` when empty.
#[no_mangle]
pub unsafe extern "C" fn gf_board_get(b: *const GfBoard, row: usize, col: usize, piece: *mut i64) -> GfStatus {
    guard(|| {
        let b = &obj(b, "board")?.0;
        if piece.is_null() {
            return Err(null("output pointer"));
        }
        if row >= b.rows || col >= b.cols {
            return Err(fail(Error::InvalidInput(format!(
                "slot ({row},{col}) outside a {}x{} board",
                b.rows, b.cols
            ))));
        }
        *piece = b.get(row, col).map_or(-1, |p| p as i64);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn gf_metrics(b: *const GfBoard, s: *const GfSolution, out: *mut GfMetrics) -> GfStatus {
    guard(|| {
        let (b, s) = (&obj(b, "board")?.0, &obj(s, "solution")?.0);
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let neighbor = metrics::neighbor_measure(b, s).map_err(fail)?;
        let direct = metrics::direct_measure(b, s).map_err(fail)?;
        *out = GfMetrics {
            neighbor,
            direct,
            perfect: direct == 1.0,
        };
        Ok(())
    })
}
