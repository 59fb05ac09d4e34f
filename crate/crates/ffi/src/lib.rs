//! C interface to the platecap library.
//!
//! Every function returns a [`PlatecapStatus`]. On failure the message of the
//! most recent error on the calling thread is available through
//! [`platecap_last_error`]. Objects are handed out as opaque pointers and
//! released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use platecap::elastic::StiffnessMatrix;
use platecap::error::Error;
use platecap::fundsol::{construct_fundamental, Fundamentals};
use platecap::inequality::hardy::{HardyQuadrature, HardyVariant};
use platecap::kirchhoff::{self, PlateDomain};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlatecapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidMaterial = 3,
    SolverFailure = 4,
    NotConverged = 5,
    /// A Rust panic was caught at the boundary.
    Internal = 6,
}

/// Stiffness matrix of a material, 6×6 in Mandel notation.
pub struct PlatecapMaterial(StiffnessMatrix<f64>);

/// Normalised fundamental solutions of the limit plate operators.
pub struct PlatecapFundamentals(Fundamentals);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PlatecapStatus {
    match e {
        Error::InvalidMaterial(_) => PlatecapStatus::InvalidMaterial,
        Error::Solver(_) => PlatecapStatus::SolverFailure,
        Error::NotConverged { .. } => PlatecapStatus::NotConverged,
        _ => PlatecapStatus::InvalidArgument,
    }
}

struct Fail(PlatecapStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PlatecapStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PlatecapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PlatecapStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            PlatecapStatus::Internal
        }
    }
}

unsafe fn input<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn output<'a, T>(p: *mut T, n: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, n))
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn platecap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn platecap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Isotropic material with Lamé constants `lambda >= 0`, `mu > 0`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn platecap_material_isotropic(lambda: f64, mu: f64, out: *mut *mut PlatecapMaterial) -> PlatecapStatus {
    guard(|| {
        let out = output(out, 1, "out")?;
        let a = StiffnessMatrix::isotropic(lambda, mu)?;
        out[0] = Box::into_raw(Box::new(PlatecapMaterial(a)));
        Ok(())
    })
}

/// General material from the 21 upper-triangle entries of the Mandel
/// stiffness, row by row.
///
/// # Safety
/// `upper` must point to 21 readable doubles and `out` to writable storage
/// for one pointer.
#[no_mangle]
pub unsafe extern "C" fn platecap_material_general(upper: *const f64, out: *mut *mut PlatecapMaterial) -> PlatecapStatus {
    guard(|| {
        let upper = input(upper, 21, "upper")?;
        let out = output(out, 1, "out")?;
        let a = StiffnessMatrix::from_upper_triangle(upper)?;
        out[0] = Box::into_raw(Box::new(PlatecapMaterial(a)));
        Ok(())
    })
}

/// # Safety
/// `material` must come from a `platecap_material_*` constructor and not be
/// used afterwards. Null is accepted.
#[no_mangle]
pub unsafe extern "C" fn platecap_material_free(material: *mut PlatecapMaterial) {
    if !material.is_null() {
        drop(Box::from_raw(material));
    }
}

/// Writes the 3×3 reduced (plane-stress) stiffness, row-major, to `out`.
///
/// # Safety
/// `material` must be a live handle and `out` must point to 9 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn platecap_material_reduced(material: *const PlatecapMaterial, out: *mut f64) -> PlatecapStatus {
    guard(|| {
        let m = material.as_ref().ok_or_else(|| null("material"))?;
        let out = output(out, 9, "out")?;
        let a0 = m.0.reduced();
        let mat = a0.matrix();
        for i in 0..3 {
            for j in 0..3 {
                out[3 * i + j] = mat[(i, j)];
            }
        }
        Ok(())
    })
}

/// Hardy ratio of the piecewise-linear function with values `values` at
/// the increasing `nodes`. `variant` is one of `classical`, `log-outer`,
/// `log-inner`, `shifted`; `shift` is used only by the last one.
///
/// # Safety
/// `variant` must be a NUL-terminated string, `nodes` and `values` must hold
/// `n` doubles and `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn platecap_hardy_ratio(
    variant: *const c_char,
    shift: f64,
    nodes: *const f64,
    values: *const f64,
    n: usize,
    out: *mut f64,
) -> PlatecapStatus {
    guard(|| {
        if variant.is_null() {
            return Err(null("variant"));
        }
        let name = CStr::from_ptr(variant)
            .to_str()
            .map_err(|_| Fail(PlatecapStatus::InvalidArgument, "variant is not UTF-8".into()))?;
        let v = HardyVariant::by_name(name, shift)?;
        v.validate()?;
        let nodes = input(nodes, n, "nodes")?.to_vec();
        let values = input(values, n, "values")?;
        let out = output(out, 1, "out")?;
        let quad = HardyQuadrature::new(v, nodes)?;
        out[0] = quad.ratio(values)?;
        Ok(())
    })
}

/// Builds and normalises the fundamental solutions for `material`.
///
/// # Safety
/// `material` must be a live handle and `out` must point to writable storage
/// for one pointer.
#[no_mangle]
pub unsafe extern "C" fn platecap_fundamentals_new(
    material: *const PlatecapMaterial,
    out: *mut *mut PlatecapFundamentals,
) -> PlatecapStatus {
    guard(|| {
        let m = material.as_ref().ok_or_else(|| null("material"))?;
        let out = output(out, 1, "out")?;
        let f = construct_fundamental(&m.0.reduced(), 1024)?;
        out[0] = Box::into_raw(Box::new(PlatecapFundamentals(f)));
        Ok(())
    })
}

/// # Safety
/// `f` must come from [`platecap_fundamentals_new`] and not be used
/// afterwards. Null is accepted.
#[no_mangle]
pub unsafe extern "C" fn platecap_fundamentals_free(f: *mut PlatecapFundamentals) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Evaluates the membrane matrix `Φ′` (row-major into `phi_prime[4]`) and
/// the bending solution `Φ₃` at `(y1, y2) ≠ 0`.
///
/// # Safety
/// `f` must be a live handle, `phi_prime` must point to 4 writable doubles
/// and `phi3` to one.
#[no_mangle]
pub unsafe extern "C" fn platecap_fundamentals_eval(
    f: *const PlatecapFundamentals,
    y1: f64,
    y2: f64,
    phi_prime: *mut f64,
    phi3: *mut f64,
) -> PlatecapStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("fundamentals"))?;
        let pp = output(phi_prime, 4, "phi_prime")?;
        let p3 = output(phi3, 1, "phi3")?;
        if !(y1.is_finite() && y2.is_finite()) || (y1 == 0.0 && y2 == 0.0) {
            return Err(Fail(PlatecapStatus::InvalidArgument, "fundamental solutions are singular at the origin".into()));
        }
        let m = f.0.phi_prime([y1, y2]);
        pp.copy_from_slice(&[m[0][0], m[0][1], m[1][0], m[1][1]]);
        p3[0] = f.0.phi3([y1, y2]);
        Ok(())
    })
}

/// Solves the clamped Kirchhoff plate on `(0, a) × (0, b)` with an
/// `nx × ny` grid. `load` and `solution` hold `(g₁, g₂, g₃)` and
/// `(w₁, w₂, w₃)` per node, node `i + (nx+1)·j` at `(i·a/nx, j·b/ny)`.
/// If `with_point` is nonzero, `w₃` is also pinned at the interior grid
/// node nearest to `(p1, p2)`. `energy` may be null.
///
/// # Safety
/// `material` must be a live handle; `load` and `solution` must hold
/// `3·(nx+1)·(ny+1)` doubles; `energy` is null or points to one double.
#[no_mangle]
pub unsafe extern "C" fn platecap_kirchhoff_solve(
    material: *const PlatecapMaterial,
    a: f64,
    b: f64,
    nx: usize,
    ny: usize,
    with_point: i32,
    p1: f64,
    p2: f64,
    load: *const f64,
    solution: *mut f64,
    energy: *mut f64,
) -> PlatecapStatus {
    guard(|| {
        let m = material.as_ref().ok_or_else(|| null("material"))?;
        let mut d = PlateDomain::new(a, b, nx, ny)?;
        if with_point != 0 {
            d = d.with_point([p1, p2])?;
        }
        let n = d.n_nodes();
        let load = input(load, 3 * n, "load")?;
        let out = output(solution, 3 * n, "solution")?;
        let g: Vec<[f64; 3]> = load.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let sol = kirchhoff::solve(&d, &m.0.reduced(), &g)?;
        for k in 0..n {
            out[3 * k] = sol.membrane.w1[k];
            out[3 * k + 1] = sol.membrane.w2[k];
            out[3 * k + 2] = sol.bending.w3[k];
        }
        if !energy.is_null() {
            *energy = sol.energy();
        }
        Ok(())
    })
}
