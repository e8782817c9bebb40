use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use gapfill::puzzle::{save_bundle, save_solution, shuffle, slice_image};
use gapfill::synth::natural_image;
use gapfill_ffi::*;

fn c(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(gf_last_error()) }.to_string_lossy().into_owned()
}

/// Writes a shuffled 3x4 puzzle and its solution; returns (bundle dir, solution file).
fn fixture(dir: &Path) -> (CString, CString) {
    let img = natural_image(4 * 32, 3 * 32, 5);
    let (b, s) = slice_image(&img, 32).unwrap();
    let (b, s) = shuffle(&b, &s, 9);
    save_bundle(&b, &dir.join("bundle")).unwrap();
    save_solution(&s, &dir.join("solution.json")).unwrap();
    (c(&dir.join("bundle")), c(&dir.join("solution.json")))
}

#[test]
fn oracle_pipeline_solves_through_c_api() {
    let tmp = tempfile::tempdir().unwrap();
    let (bundle_path, sol_path) = fixture(tmp.path());
    unsafe {
        let mut bundle = ptr::null_mut();
        assert_eq!(gf_bundle_load(bundle_path.as_ptr(), &mut bundle), GfStatus::Ok);
        assert_eq!(gf_bundle_len(bundle), 12);
        let (mut rows, mut cols) = (0, 0);
        assert_eq!(gf_bundle_grid(bundle, &mut rows, &mut cols), GfStatus::Ok);
        assert_eq!((rows, cols), (3, 4));

        let mut sol = ptr::null_mut();
        assert_eq!(gf_solution_load(sol_path.as_ptr(), &mut sol), GfStatus::Ok);
        let mut tensor = ptr::null_mut();
        assert_eq!(gf_score_oracle(sol, &mut tensor), GfStatus::Ok);
        assert_eq!(gf_tensor_len(tensor), 12);

        let tensor_file = c(&tmp.path().join("t.csv"));
        assert_eq!(gf_tensor_save(tensor, tensor_file.as_ptr()), GfStatus::Ok);
        let mut reloaded = ptr::null_mut();
        assert_eq!(gf_tensor_load(tensor_file.as_ptr(), &mut reloaded), GfStatus::Ok);
        let (mut a, mut b) = (0.0, 0.0);
        assert_eq!(gf_tensor_get(tensor, 0, 1, 0, &mut a), GfStatus::Ok);
        assert_eq!(gf_tensor_get(reloaded, 0, 1, 0, &mut b), GfStatus::Ok);
        assert_eq!(a, b);
        assert_eq!(gf_tensor_get(tensor, 3, 3, 1, &mut a), GfStatus::Ok);
        assert!(a.is_infinite());

        let mut board = ptr::null_mut();
        assert_eq!(
            gf_place(reloaded, GfFrame::Constrained as u32, 3, 4, false, 0, &mut board),
            GfStatus::Ok
        );
        let mut m = GfMetrics::default();
        assert_eq!(gf_metrics(board, sol, &mut m), GfStatus::Ok);
        assert_eq!(m, GfMetrics { neighbor: 1.0, direct: 1.0, perfect: true });

        let board_file = c(&tmp.path().join("board.txt"));
        assert_eq!(gf_board_save(board, board_file.as_ptr()), GfStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(gf_board_load(board_file.as_ptr(), &mut back), GfStatus::Ok);
        let mut piece = -7;
        assert_eq!(gf_board_get(back, 2, 3, &mut piece), GfStatus::Ok);
        assert!((0..12).contains(&piece));
        assert_eq!(gf_board_get(back, 3, 0, &mut piece), GfStatus::InvalidInput);
        assert!(last_error().contains("outside"));

        let mut baseline = ptr::null_mut();
        assert_eq!(gf_score_baseline(bundle, &mut baseline), GfStatus::Ok);
        let mut unbounded = ptr::null_mut();
        assert_eq!(
            gf_place(baseline, GfFrame::Unbounded as u32, 3, 4, true, 3, &mut unbounded),
            GfStatus::Ok
        );
        assert_eq!(gf_metrics(unbounded, sol, &mut m), GfStatus::Ok);
        assert!((0.0..=1.0).contains(&m.neighbor));

        gf_board_free(unbounded);
        gf_tensor_free(baseline);
        gf_board_free(back);
        gf_board_free(board);
        gf_tensor_free(reloaded);
        gf_tensor_free(tensor);
        gf_solution_free(sol);
        gf_bundle_free(bundle);
    }
}

#[test]
fn null_and_bad_arguments_report_errors() {
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(gf_tensor_load(ptr::null(), &mut t), GfStatus::NullArgument);
        assert!(last_error().contains("null"));
        assert!(t.is_null());

        let missing = CString::new("/nonexistent/tensor.csv").unwrap();
        assert_eq!(gf_tensor_load(missing.as_ptr(), &mut t), GfStatus::Io);
        assert!(last_error().contains("/nonexistent/tensor.csv"));
        assert!(t.is_null());

        let mut board = ptr::null_mut();
        assert_eq!(gf_place(ptr::null(), 0, 2, 2, false, 0, &mut board), GfStatus::NullArgument);
        assert_eq!(gf_score_neural(ptr::null(), ptr::null(), &mut t), GfStatus::NullArgument);
        assert_eq!(gf_bundle_len(ptr::null()), 0);
        assert_eq!(gf_tensor_len(ptr::null()), 0);

        // freeing null is a no-op
        gf_bundle_free(ptr::null_mut());
        gf_tensor_free(ptr::null_mut());
        gf_board_free(ptr::null_mut());
        gf_model_free(ptr::null_mut());
        gf_solution_free(ptr::null_mut());

        let v = CStr::from_ptr(gf_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn invalid_frame_and_direction_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, sol_path) = fixture(tmp.path());
    unsafe {
        let mut sol = ptr::null_mut();
        assert_eq!(gf_solution_load(sol_path.as_ptr(), &mut sol), GfStatus::Ok);
        let mut t = ptr::null_mut();
        assert_eq!(gf_score_oracle(sol, &mut t), GfStatus::Ok);
        let mut v = 0.0;
        assert_eq!(gf_tensor_get(t, 0, 1, 4, &mut v), GfStatus::InvalidInput);
        assert_eq!(gf_tensor_get(t, 0, 12, 0, &mut v), GfStatus::InvalidInput);
        let mut board = ptr::null_mut();
        assert_eq!(gf_place(t, 9, 3, 4, false, 0, &mut board), GfStatus::InvalidInput);
        assert!(last_error().contains("frame"));
        assert!(board.is_null());
        assert_eq!(gf_place(t, 0, 2, 2, false, 0, &mut board), GfStatus::InvalidInput);
        assert!(board.is_null());
        gf_tensor_free(t);
        gf_solution_free(sol);
    }
}

#[test]
fn header_is_in_sync() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/gapfill.h")).unwrap();
    for name in ["gf_bundle_load", "gf_place", "gf_metrics", "gf_last_error", "GF_STATUS_NULL_ARGUMENT", "typedef struct GfTensor GfTensor"] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = std::process::Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(cc.status.success());
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"gapfill.h\"\n\
         int run(const char *dir) {\n\
           GfBundle *b = NULL;\n\
           GfTensor *t = NULL;\n\
           GfBoard *board = NULL;\n\
           GfMetrics m;\n\
           if (gf_bundle_load(dir, &b) != GF_STATUS_OK) return 1;\n\
           if (gf_score_baseline(b, &t) != GF_STATUS_OK) return 2;\n\
           if (gf_place(t, GF_FRAME_CONSTRAINED, 2, 2, false, 0, &board) != GF_STATUS_OK) return 3;\n\
           (void)m;\n\
           gf_board_free(board); gf_tensor_free(t); gf_bundle_free(b);\n\
           return 0;\n\
         }\n",
    )
    .unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
