//! Exercises the C ABI through the exported symbols and checks the
//! generated header ships the expected interface.

use std::ffi::CString;
use strata_ffi::*;

#[test]
fn dist_and_procrustes_roundtrip() {
    let m = [2.0, 0.0, 0.0, 0.5];
    let mut d = 0.0;
    let status = unsafe { strata_dist_so(2, m.as_ptr(), &mut d) };
    assert_eq!(status, StrataStatus::Ok);
    assert!((d - (1.0f64 + 0.25).sqrt()).abs() < 1e-12);

    let mut rot = [0.0; 4];
    let mut degenerate = true;
    let status = unsafe { strata_procrustes(2, m.as_ptr(), rot.as_mut_ptr(), &mut degenerate) };
    assert_eq!(status, StrataStatus::Ok);
    assert!(!degenerate);
    assert!((rot[0] - 1.0).abs() < 1e-12 && (rot[3] - 1.0).abs() < 1e-12);
}

#[test]
fn f_lambda_and_admissibility_error() {
    let shear = [1.0, 3.0, 0.0, 1.0];
    let mut out = [0.0; 4];
    let status = unsafe { strata_f_lambda(2, shear.as_ptr(), 0.5, out.as_mut_ptr()) };
    assert_eq!(status, StrataStatus::Ok);
    assert_eq!(out, [1.0, 6.0, 0.0, 1.0]);

    let stretched = [2.0, 0.0, 0.0, 1.0];
    let status = unsafe { strata_f_lambda(2, stretched.as_ptr(), 0.5, out.as_mut_ptr()) };
    assert_eq!(status, StrataStatus::NotInAdmissibleSet);
    let mut buf = [0i8; 128];
    let len = unsafe { strata_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(len > 0);
}

#[test]
fn minors_phase_midsection_svk() {
    let m = [1.0, 3.0, 0.0, 1.0];
    let mut out = [0.0; 5];
    let status = unsafe { strata_minors(2, m.as_ptr(), out.as_mut_ptr(), out.len()) };
    assert_eq!(status, StrataStatus::Ok);
    assert_eq!(out, [1.0, 3.0, 0.0, 1.0, 1.0]);

    assert_eq!(strata_phase(0.03, 0.5, 0.1), 1);
    assert_eq!(strata_phase(0.07, 0.5, 0.1), 0);
    assert_eq!(strata_phase(0.0, 0.0, 0.1), -1);
    assert!((strata_midsection(0.3, 0.5, 1.0) - 0.75).abs() < 1e-15);
    assert!(strata_midsection(0.3, 0.5, -1.0).is_nan());

    let zero = [0.0; 4];
    let mut v = -1.0;
    let status = unsafe { strata_svk(2, zero.as_ptr(), 1.0, 1.0, &mut v) };
    assert_eq!(status, StrataStatus::Ok);
    assert!((v - 1.0).abs() < 1e-14);
}

#[test]
fn density_handles_and_cell_problem() {
    let density = strata_density_frobenius(2);
    assert!(!density.is_null());
    let f = [1.0, 1.0, 0.0, 1.0];
    let mut v = 0.0;
    let status = unsafe { strata_w_hom_convex(density, f.as_ptr(), 0.5, &mut v) };
    assert_eq!(status, StrataStatus::Ok);
    assert!((v - 3.0).abs() < 1e-12);

    let mut value = 0.0;
    let mut norm = 0.0;
    let mut converged = false;
    let status = unsafe {
        strata_cell_minimize(
            density,
            f.as_ptr(),
            0.5,
            9,
            5,
            2,
            1,
            7,
            &mut value,
            &mut norm,
            &mut converged,
        )
    };
    assert_eq!(status, StrataStatus::Ok);
    assert!((value - 3.0).abs() < 1e-3);
    assert!(norm <= 1e-4);
    unsafe { strata_density_free(density) };
}

#[test]
fn run_experiment_writes_csv() {
    let dir = std::env::temp_dir().join("strata_ffi_smoke");
    std::fs::create_dir_all(&dir).unwrap();
    let config_path = dir.join("scaling.cfg");
    std::fs::write(
        &config_path,
        "example = rotation\neps_list = 0.25, 0.125, 0.0625\n",
    )
    .unwrap();
    let out_path = dir.join("scaling.csv");
    let kind = CString::new("scaling").unwrap();
    let cfg = CString::new(config_path.to_str().unwrap()).unwrap();
    let out = CString::new(out_path.to_str().unwrap()).unwrap();
    let status = unsafe { strata_run_experiment(kind.as_ptr(), cfg.as_ptr(), out.as_ptr(), 3) };
    assert_eq!(status, StrataStatus::Ok);
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("schema=1"));
    assert!(text.contains("exact_rigidity"));
}

#[test]
fn generated_header_exports_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/strata.h"))
        .expect("cbindgen header generated at build time");
    for symbol in [
        "strata_dist_so",
        "strata_procrustes",
        "strata_f_lambda",
        "strata_minors",
        "strata_cell_minimize",
        "strata_run_experiment",
        "StrataDensity",
        "StrataStatus",
    ] {
        assert!(header.contains(symbol), "header misses {symbol}");
    }
}
