use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use weakconc_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(wc_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn triangle_exact_moments() {
    let text = CString::new("a b 1\nb c 1\na c 1").unwrap();
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(wc_graph_parse(text.as_ptr(), &mut g), WcStatus::Ok);
        assert_eq!(wc_graph_vertex_count(g), 3);
        assert_eq!(wc_graph_edge_count(g), 3);
        let (mut a, mut c) = (0usize, 0usize);
        let la = CString::new("a").unwrap();
        let lc = CString::new("c").unwrap();
        assert_eq!(wc_graph_vertex_id(g, la.as_ptr(), &mut a), WcStatus::Ok);
        assert_eq!(wc_graph_vertex_id(g, lc.as_ptr(), &mut c), WcStatus::Ok);
        let mut cut = 0.0;
        assert_eq!(wc_graph_min_cut(g, &mut cut), WcStatus::Ok);
        assert_eq!(cut, 2.0);
        let mut s = ptr::null_mut();
        assert_eq!(wc_fpp_solve(g, a, c, &mut s), WcStatus::Ok);
        // min(E1, E1 + E1') over two routes; mean 3/4, variance 7/16
        assert!((wc_solution_expected_time(s) - 0.75).abs() < 1e-12);
        assert!((wc_solution_variance(s) - 7.0 / 16.0).abs() < 1e-12);
        assert!(wc_solution_kappa(s).is_finite());
        assert!(wc_solution_state_count(s) >= 2);
        wc_solution_free(s);
        wc_graph_free(g);
    }
}

#[test]
fn simulation_fills_buffers_deterministically() {
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(wc_graph_bridge(3, 3, 0.5, &mut g), WcStatus::Ok);
        let mut x1 = vec![0.0; 500];
        let mut xi1 = vec![0.0; 500];
        let mut x2 = vec![0.0; 500];
        assert_eq!(wc_fpp_simulate(g, 0, 5, 500, 7, x1.as_mut_ptr(), xi1.as_mut_ptr(), 500), WcStatus::Ok);
        assert_eq!(wc_fpp_simulate(g, 0, 5, 500, 7, x2.as_mut_ptr(), ptr::null_mut(), 500), WcStatus::Ok);
        assert_eq!(x1, x2);
        assert!(x1.iter().zip(&xi1).all(|(x, xi)| xi <= x && *xi > 0.0));
        assert_eq!(
            wc_fpp_simulate(g, 0, 5, 500, 7, x1.as_mut_ptr(), ptr::null_mut(), 10),
            WcStatus::BufferTooSmall
        );
        assert!(last_error().contains("need 500"));
        wc_graph_free(g);
    }
}

#[test]
fn scalar_functions() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(wc_psi_minus_ln(1.0, &mut v), WcStatus::Ok);
        assert!((v.exp() - 0.013176).abs() < 1e-6);
        assert_eq!(wc_a_k(1, &mut v), WcStatus::Ok);
        assert!((v - 1.0).abs() < 1e-6);
        assert_eq!(wc_fk_eval(1, 1.0, &mut v), WcStatus::Ok);
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
        let xs = [0.0, 0.0, 0.0, 5.0];
        assert_eq!(wc_l0_norm(xs.as_ptr(), xs.len(), &mut v), WcStatus::Ok);
        assert!((v - 0.25).abs() < 1e-12);
        assert_eq!(wc_a_k(0, &mut v), WcStatus::InvalidInput);
        assert!(!last_error().is_empty());
        assert_eq!(wc_psi_minus_ln(0.5, ptr::null_mut()), WcStatus::NullPointer);
    }
}

#[test]
fn bad_inputs_return_codes() {
    let mut g = ptr::null_mut();
    unsafe {
        let dup = CString::new("a b 1\nb a 2").unwrap();
        assert_eq!(wc_graph_parse(dup.as_ptr(), &mut g), WcStatus::InvalidInput);
        assert!(last_error().contains("duplicate"));
        assert_eq!(wc_graph_parse(ptr::null(), &mut g), WcStatus::NullPointer);
        let mut s = ptr::null_mut();
        assert_eq!(wc_fpp_solve(ptr::null(), 0, 1, &mut s), WcStatus::NullPointer);
        assert_eq!(wc_graph_vertex_count(ptr::null()), 0);
        assert!(wc_solution_variance(ptr::null()).is_nan());
        wc_graph_free(ptr::null_mut());
        wc_solution_free(ptr::null_mut());
    }
}

/// Compiles a C program against the generated header and the static library.
#[test]
fn c_program_links_against_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib_dir = deps.parent().unwrap();
    let lib = lib_dir.join("libweakconc_ffi.a");
    if !lib.exists() {
        eprintln!("skipping: {} not built", lib.display());
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("cc runs");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok 0.750000 0.437500");
}
