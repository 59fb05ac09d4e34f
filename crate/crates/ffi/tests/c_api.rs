use std::ffi::{CStr, CString};
use std::ptr;

use platecap_ffi::*;

fn last_error() -> String {
    let p = platecap_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn iso(lambda: f64, mu: f64) -> *mut PlatecapMaterial {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { platecap_material_isotropic(lambda, mu, &mut m) }, PlatecapStatus::Ok);
    m
}

#[test]
fn reduced_stiffness_of_an_isotropic_material() {
    let m = iso(1.0, 1.0);
    let mut a0 = [0.0; 9];
    assert_eq!(unsafe { platecap_material_reduced(m, a0.as_mut_ptr()) }, PlatecapStatus::Ok);
    // λ' = 2λμ/(λ+2μ) = 2/3 sits off the diagonal, λ' + 2μ on it.
    assert!((a0[1] - 2.0 / 3.0).abs() < 1e-14);
    assert!((a0[0] - 8.0 / 3.0).abs() < 1e-14);
    assert!((a0[8] - 2.0).abs() < 1e-14);
    unsafe { platecap_material_free(m) };
}

#[test]
fn invalid_material_sets_the_error_message() {
    let mut m = ptr::null_mut();
    let status = unsafe { platecap_material_isotropic(1.0, -1.0, &mut m) };
    assert_eq!(status, PlatecapStatus::InvalidMaterial);
    assert!(m.is_null());
    assert!(last_error().contains("mu"), "{}", last_error());

    let upper = [1.0; 21];
    assert_eq!(unsafe { platecap_material_general(upper.as_ptr(), &mut m) }, PlatecapStatus::InvalidMaterial);
}

#[test]
fn null_pointers_are_reported() {
    assert_eq!(unsafe { platecap_material_isotropic(1.0, 1.0, ptr::null_mut()) }, PlatecapStatus::NullPointer);
    assert_eq!(unsafe { platecap_material_reduced(ptr::null(), ptr::null_mut()) }, PlatecapStatus::NullPointer);
    unsafe {
        platecap_material_free(ptr::null_mut());
        platecap_fundamentals_free(ptr::null_mut());
    }
}

#[test]
fn hardy_ratio_of_a_linear_function() {
    let nodes: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let name = CString::new("classical").unwrap();
    let mut r = 0.0;
    let status =
        unsafe { platecap_hardy_ratio(name.as_ptr(), 0.0, nodes.as_ptr(), nodes.as_ptr(), nodes.len(), &mut r) };
    assert_eq!(status, PlatecapStatus::Ok);
    assert!((r - 1.0).abs() < 1e-9, "{r}");

    let bad = CString::new("2.15").unwrap();
    let status = unsafe { platecap_hardy_ratio(bad.as_ptr(), 0.0, nodes.as_ptr(), nodes.as_ptr(), nodes.len(), &mut r) };
    assert_eq!(status, PlatecapStatus::InvalidArgument);
    assert!(last_error().contains("classical"));
}

#[test]
fn fundamental_solutions_are_symmetric_and_singular_at_the_origin() {
    let upper = [4., 0.5, 0., 0., 0., 0., 1., 0., 0., 0., 0., 2., 0., 0., 0., 1., 0., 0., 1., 0., 1.];
    let mut m = ptr::null_mut();
    let mut f = ptr::null_mut();
    unsafe {
        assert_eq!(platecap_material_general(upper.as_ptr(), &mut m), PlatecapStatus::Ok);
        assert_eq!(platecap_fundamentals_new(m, &mut f), PlatecapStatus::Ok);
        let (mut pp, mut p3) = ([0.0; 4], 0.0);
        assert_eq!(platecap_fundamentals_eval(f, 0.3, -1.2, pp.as_mut_ptr(), &mut p3), PlatecapStatus::Ok);
        assert!((pp[1] - pp[2]).abs() < 1e-10);
        assert!(p3.is_finite());
        assert_eq!(platecap_fundamentals_eval(f, 0.0, 0.0, pp.as_mut_ptr(), &mut p3), PlatecapStatus::InvalidArgument);
        platecap_fundamentals_free(f);
        platecap_material_free(m);
    }
}

#[test]
fn kirchhoff_solve_pins_the_support() {
    let m = iso(1.0, 1.0);
    let n = 16;
    let nodes = (n + 1) * (n + 1);
    let load = vec![1.0; 3 * nodes];
    let mut sol = vec![0.0; 3 * nodes];
    let mut energy = 0.0;
    let status =
        unsafe { platecap_kirchhoff_solve(m, 1.0, 1.0, n, n, 1, 0.5, 0.5, load.as_ptr(), sol.as_mut_ptr(), &mut energy) };
    assert_eq!(status, PlatecapStatus::Ok);
    let centre = n / 2 + (n + 1) * (n / 2);
    assert!(sol[3 * centre + 2].abs() < 1e-12);
    assert!(sol[3 * (centre + 3) + 2] > 0.0);
    assert!(energy < 0.0);

    let status = unsafe {
        platecap_kirchhoff_solve(m, 1.0, 1.0, n, n, 1, 0.0, 0.5, load.as_ptr(), sol.as_mut_ptr(), ptr::null_mut())
    };
    assert_eq!(status, PlatecapStatus::InvalidArgument);
    unsafe { platecap_material_free(m) };
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(platecap_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
