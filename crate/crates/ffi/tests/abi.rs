use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use cocycle_lab_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(cocycle_lab_last_error()) }.to_string_lossy().into_owned()
}

fn cat_cocycle(a: &[f64; 4]) -> (*mut CocycleLabAutomorphism, *mut CocycleLabCocycle) {
    let base = cocycle_lab_automorphism_cat_map();
    let mut coc = ptr::null_mut();
    let st = unsafe { cocycle_lab_cocycle_constant(base, a.as_ptr(), 2, &mut coc) };
    assert_eq!(st, CocycleLabStatus::Ok);
    (base, coc)
}

#[test]
fn automorphism_round_trip() {
    let entries = [2i64, 1, 1, 1];
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { cocycle_lab_automorphism_new(entries.as_ptr(), 2, &mut h) }, CocycleLabStatus::Ok);
    assert_eq!(unsafe { cocycle_lab_automorphism_dim(h) }, 2);
    let (mut nu, mut nu_hat) = (0.0, 0.0);
    assert_eq!(unsafe { cocycle_lab_automorphism_rates(h, &mut nu, &mut nu_hat) }, CocycleLabStatus::Ok);
    assert!((nu * nu_hat - 1.0).abs() < 1e-14);
    let x = [0.5, 0.5];
    let mut y = [0.0; 2];
    assert_eq!(unsafe { cocycle_lab_automorphism_step(h, x.as_ptr(), 1, y.as_mut_ptr()) }, CocycleLabStatus::Ok);
    assert_eq!(y, [0.5, 0.0]);
    unsafe { cocycle_lab_automorphism_free(h) };
}

#[test]
fn automorphism_errors_map_to_codes() {
    let mut h = ptr::null_mut();
    let det4 = [2i64, 0, 0, 2];
    assert_eq!(unsafe { cocycle_lab_automorphism_new(det4.as_ptr(), 2, &mut h) }, CocycleLabStatus::NotUnimodular);
    assert!(last_error().contains("unimodular"));
    assert!(h.is_null());
    let shear = [1i64, 1, 0, 1];
    assert_eq!(unsafe { cocycle_lab_automorphism_new(shear.as_ptr(), 2, &mut h) }, CocycleLabStatus::NotHyperbolic);
    assert_eq!(unsafe { cocycle_lab_automorphism_new(ptr::null(), 2, &mut h) }, CocycleLabStatus::NullPointer);
    assert!(last_error().contains("entries"));
    assert_eq!(unsafe { cocycle_lab_automorphism_dim(ptr::null()) }, 0);
    unsafe { cocycle_lab_automorphism_free(ptr::null_mut()) };
}

#[test]
fn cocycle_iterate_and_exponents() {
    let (base, coc) = cat_cocycle(&[2.0, 0.0, 0.0, 0.5]);
    assert_eq!(unsafe { cocycle_lab_cocycle_dim(coc) }, 2);
    let x = [0.1, 0.7];
    let mut m = [0.0; 4];
    assert_eq!(unsafe { cocycle_lab_cocycle_iterate(coc, x.as_ptr(), 3, m.as_mut_ptr()) }, CocycleLabStatus::Ok);
    assert_eq!(m, [8.0, 0.0, 0.0, 0.125]);
    let mut s = [0.0; 2];
    assert_eq!(unsafe { cocycle_lab_lyapunov(coc, x.as_ptr(), 10_000, 1, s.as_mut_ptr()) }, CocycleLabStatus::Ok);
    assert!((s[0] - 2f64.ln()).abs() < 1e-6 && (s[1] + 2f64.ln()).abs() < 1e-6);
    assert_eq!(unsafe { cocycle_lab_lyapunov(coc, x.as_ptr(), 10, 1, s.as_mut_ptr()) }, CocycleLabStatus::InvalidArgument);
    let (mut theta, mut passed) = (0.0, true);
    assert_eq!(unsafe { cocycle_lab_fiber_bunching(coc, 1.0, &mut theta, &mut passed) }, CocycleLabStatus::Ok);
    assert!(theta > 1.5 && !passed);
    unsafe {
        cocycle_lab_cocycle_free(coc);
        cocycle_lab_automorphism_free(base);
    }
}

#[test]
fn singular_generator_is_rejected() {
    let base = cocycle_lab_automorphism_cat_map();
    let mut coc = ptr::null_mut();
    let singular = [1.0, 2.0, 2.0, 4.0];
    let st = unsafe { cocycle_lab_cocycle_constant(base, singular.as_ptr(), 2, &mut coc) };
    assert_ne!(st, CocycleLabStatus::Ok);
    assert!(coc.is_null());
    assert!(!last_error().is_empty());
    unsafe { cocycle_lab_automorphism_free(base) };
}

#[test]
fn scenario_runs_through_the_abi() {
    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let name = CString::new("perturbation").unwrap();
    let mut passed = false;
    let st = unsafe { cocycle_lab_run_scenario(name.as_ptr(), ptr::null(), out.as_ptr(), true, &mut passed) };
    assert_eq!(st, CocycleLabStatus::Ok, "{}", last_error());
    assert!(passed);
    assert!(dir.path().join("perturbation_checks.csv").exists());
    let bogus = CString::new("nope").unwrap();
    let st = unsafe { cocycle_lab_run_scenario(bogus.as_ptr(), ptr::null(), out.as_ptr(), true, &mut passed) };
    assert_eq!(st, CocycleLabStatus::InvalidArgument);
    let missing = CString::new(dir.path().join("missing.toml").to_str().unwrap()).unwrap();
    let st = unsafe { cocycle_lab_run_scenario(name.as_ptr(), missing.as_ptr(), out.as_ptr(), true, &mut passed) };
    assert_ne!(st, CocycleLabStatus::Ok);
}

#[test]
fn header_declares_the_abi() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/cocycle_lab.h");
    let text = std::fs::read_to_string(header).unwrap();
    for sym in [
        "cocycle_lab_last_error",
        "cocycle_lab_automorphism_new",
        "cocycle_lab_cocycle_iterate",
        "cocycle_lab_lyapunov",
        "cocycle_lab_run_scenario",
        "COCYCLE_LAB_STATUS_NULL_POINTER",
        "typedef struct CocycleLabCocycle CocycleLabCocycle",
    ] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    // the header must also parse as C when a compiler is around
    if let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c", header]).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
