use std::ffi::{c_void, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use qline_ffi::*;

fn builtin(name: &str, c: Option<f64>) -> Result<*mut QlineProblem, QlineStatus> {
    let name = CString::new(name).unwrap();
    let mut p = ptr::null_mut();
    let code = unsafe { qline_problem_builtin(name.as_ptr(), c.unwrap_or(0.0), c.is_some() as i32, &mut p) };
    if code == QlineStatus::Ok {
        Ok(p)
    } else {
        Err(code)
    }
}

fn last_error() -> String {
    let p = qline_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn builtin_problem_solves_with_both_methods() {
    let p = builtin("branin", None).unwrap();
    assert_eq!(unsafe { qline_problem_dimension(p) }, 2);
    let x0 = [3.0, 2.0];
    for solve in [qline_solve_qls, qline_solve_bfgs] {
        let mut r = ptr::null_mut();
        assert_eq!(unsafe { solve(p, x0.as_ptr(), 2, ptr::null(), &mut r) }, QlineStatus::Ok);
        unsafe {
            assert_eq!(qline_result_status(r), QlineSolveStatus::Converged);
            assert!(qline_result_grad_norm(r) < 1e-5);
            assert!((qline_result_objective(r) - 0.397887357729738).abs() < 1e-9);
            let mut x = [0.0; 2];
            assert_eq!(qline_result_x(r, x.as_mut_ptr(), 2), QlineStatus::Ok);
            assert!((x[0] - std::f64::consts::PI).abs() < 1e-4);
            assert_eq!(qline_result_x(r, x.as_mut_ptr(), 1), QlineStatus::DimensionMismatch);
            qline_result_free(r);
        }
    }
    unsafe { qline_problem_free(p) };
}

#[test]
fn fc_needs_its_parameter() {
    assert_eq!(builtin("fc", None).unwrap_err(), QlineStatus::InvalidArgument);
    assert!(last_error().contains("fc"));
    let p = builtin("fc", Some(0.5)).unwrap();
    unsafe { qline_problem_free(p) };
}

#[test]
fn unknown_problem_sets_the_error_message() {
    assert_eq!(builtin("nosuch", None).unwrap_err(), QlineStatus::UnknownProblem);
    assert!(last_error().contains("nosuch"));
    // a successful call clears it
    let p = builtin("sphere", None).unwrap();
    assert!(qline_last_error().is_null());
    unsafe { qline_problem_free(p) };
}

unsafe extern "C" fn shifted_f(x: *const f64, n: usize, user: *mut c_void) -> f64 {
    let shift = *(user as *const f64);
    let x = std::slice::from_raw_parts(x, n);
    x.iter().map(|v| (v - shift).powi(2)).sum()
}

unsafe extern "C" fn shifted_g(x: *const f64, n: usize, out: *mut f64, user: *mut c_void) {
    let shift = *(user as *const f64);
    let x = std::slice::from_raw_parts(x, n);
    let out = std::slice::from_raw_parts_mut(out, n);
    for (o, v) in out.iter_mut().zip(x) {
        *o = 2.0 * (v - shift);
    }
}

#[test]
fn callback_problem_passes_user_data_through() {
    let mut shift = 3.0_f64;
    let mut p = ptr::null_mut();
    let code = unsafe {
        qline_problem_from_callbacks(3, Some(shifted_f), Some(shifted_g), &mut shift as *mut f64 as *mut c_void, &mut p)
    };
    assert_eq!(code, QlineStatus::Ok);
    let mut opts = qline_options_default();
    opts.gamma = 3;
    let x0 = [1.0, -1.0, 0.5];
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { qline_solve_qls(p, x0.as_ptr(), 3, &opts, &mut r) }, QlineStatus::Ok);
    let mut x = [0.0; 3];
    unsafe {
        assert_eq!(qline_result_iterations(r), 1);
        qline_result_x(r, x.as_mut_ptr(), 3);
        qline_result_free(r);
        qline_problem_free(p);
    }
    for v in x {
        assert!((v - 3.0).abs() < 1e-10);
    }
}

#[test]
fn argument_errors_are_codes_not_crashes() {
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { qline_problem_from_callbacks(2, None, Some(shifted_g), ptr::null_mut(), &mut p) },
        QlineStatus::NullPointer
    );
    assert_eq!(unsafe { qline_problem_builtin(ptr::null(), 0.0, 0, &mut p) }, QlineStatus::NullPointer);

    let sphere = builtin("sphere", None).unwrap();
    let x0 = [1.0; 8];
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { qline_solve_qls(sphere, x0.as_ptr(), 3, ptr::null(), &mut r) }, QlineStatus::DimensionMismatch);
    let mut opts = qline_options_default();
    opts.q0 = 1.5;
    assert_eq!(unsafe { qline_solve_qls(sphere, x0.as_ptr(), 8, &opts, &mut r) }, QlineStatus::InvalidArgument);
    assert!(last_error().contains("q"));
    opts = qline_options_default();
    opts.grad_tolerance = -1.0;
    assert_eq!(unsafe { qline_solve_bfgs(sphere, x0.as_ptr(), 8, &opts, &mut r) }, QlineStatus::InvalidArgument);
    assert!(r.is_null());
    unsafe {
        qline_problem_free(sphere);
        qline_problem_free(ptr::null_mut());
        qline_result_free(ptr::null_mut());
    }
}

#[test]
fn psd_modify_lifts_negative_curvature() {
    let a = [0.0, 1.0, 1.0, 0.0];
    let mut out = [0.0; 4];
    assert_eq!(unsafe { qline_psd_modify(a.as_ptr(), 2, 0.5, out.as_mut_ptr()) }, QlineStatus::Ok);
    for (got, want) in out.iter().zip([0.75, 0.25, 0.25, 0.75]) {
        assert!((got - want).abs() < 1e-12);
    }
    assert_eq!(unsafe { qline_psd_modify(a.as_ptr(), 2, 0.0, out.as_mut_ptr()) }, QlineStatus::InvalidArgument);
    let asym = [1.0, 2.0, 0.0, 1.0];
    assert_eq!(unsafe { qline_psd_modify(asym.as_ptr(), 2, 0.1, out.as_mut_ptr()) }, QlineStatus::InvalidArgument);
}

#[test]
fn c_program_links_against_the_header_and_static_library() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // the static library lands next to this test binary in target/<profile>/deps
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib = [deps.join("libqline_ffi.a"), deps.parent().unwrap().join("libqline_ffi.a")]
        .into_iter()
        .find(|p| p.exists())
        .expect("libqline_ffi.a is built alongside the tests");
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("cc runs");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("sphere iterations 1"), "{text}");
}
