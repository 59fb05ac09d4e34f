//! Manufactured solutions for the clamped-layer solver.

use platecap::elastic::{layer_operator_parts, LayerPart, StiffnessMatrix};
use platecap::fem::assembly::ElementKind;
use platecap::layer::{solve_layer_problem_with, LayerMesh, LayerMeshSpec, ThetaShape};
use platecap::poly::{Poly, PolyVec};

const INNER: f64 = 0.6;
const OUTER: f64 = 1.6;

/// `(ρ² − a²)⁴(b² − ρ²)⁴`, normalised to peak 1, as a polynomial in `η`.
fn annulus_bump() -> Poly<f64> {
    let rho2 = Poly::var(0).mul(&Poly::var(0)).add(&Poly::var(1).mul(&Poly::var(1)));
    let p = rho2.sub(&Poly::constant(INNER * INNER));
    let q = Poly::constant(OUTER * OUTER).sub(&rho2);
    let mut out = Poly::constant(1.0);
    for _ in 0..4 {
        out = out.mul(&p).mul(&q);
    }
    let peak = (0.5 * (OUTER * OUTER - INNER * INNER)).powi(8);
    out.scale(&(1.0 / peak))
}

struct Manufactured {
    v: PolyVec<f64>,
    f: PolyVec<f64>,
    g_plus: PolyVec<f64>,
    g_minus: PolyVec<f64>,
}

fn manufactured(a: &StiffnessMatrix<f64>) -> Manufactured {
    let psi = annulus_bump();
    let zeta = Poly::var(2);
    let lin = |c0: f64, c1: f64| Poly::constant(c0).add(&zeta.scale(&c1));
    let v = [psi.mul(&lin(1.0, 0.5)), psi.mul(&lin(-0.5, 1.0)), psi.mul(&lin(0.8, -0.3))];
    let sum = |parts: &[LayerPart]| -> PolyVec<f64> {
        let mut acc: PolyVec<f64> = Default::default();
        for &p in parts {
            let t = layer_operator_parts(a, &v, p);
            for k in 0..3 {
                acc[k] = acc[k].add(&t[k]);
            }
        }
        acc
    };
    Manufactured {
        f: sum(&[LayerPart::L0, LayerPart::L1, LayerPart::L2]),
        g_plus: sum(&[LayerPart::N0Plus, LayerPart::N1Plus]),
        g_minus: sum(&[LayerPart::N0Minus, LayerPart::N1Minus]),
        v,
    }
}

fn inside(x: [f64; 3]) -> bool {
    let r = x[0].hypot(x[1]);
    r > INNER && r < OUTER
}

fn eval(p: &PolyVec<f64>, x: [f64; 3]) -> [f64; 3] {
    if inside(x) {
        std::array::from_fn(|k| p[k].eval_f64(x))
    } else {
        [0.0; 3]
    }
}

fn max_error(spacing: f64, nz: usize, kind: ElementKind, m: &Manufactured, a: &StiffnessMatrix<f64>) -> f64 {
    let spec = LayerMeshSpec { t: 2.0, nz, h_core: spacing, growth: 1.0, h_far: spacing };
    let mesh = LayerMesh::build(spec, ThetaShape::Disk { radius: 0.4 }).unwrap();
    let f = |x: [f64; 3]| eval(&m.f, x);
    let gp = |x: [f64; 3]| eval(&m.g_plus, x);
    let gm = |x: [f64; 3]| eval(&m.g_minus, x);
    let sol = solve_layer_problem_with(&mesh, a, kind, &f, &gp, &gm, None).unwrap();
    assert!(sol.residual < 1e-9, "solver residual {}", sol.residual);
    let mut err: f64 = 0.0;
    for n in 0..mesh.grid.n_nodes() {
        let x = mesh.grid.coords(n);
        let exact = eval(&m.v, x);
        for k in 0..3 {
            err = err.max((sol.u[3 * n + k] - exact[k]).abs());
        }
    }
    err
}

/// The field is linear in `ζ`, so with a fixed number of layers the only
/// discretisation error comes from the in-plane spacing.
#[test]
fn trilinear_elements_converge_at_second_order() {
    let a = StiffnessMatrix::isotropic(1.0, 1.0).unwrap();
    let m = manufactured(&a);
    let errors: Vec<f64> =
        [0.2, 0.1, 0.05].iter().map(|&d| max_error(d, 2, ElementKind::Trilinear, &m, &a)).collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    println!("max-norm errors {errors:?}, observed orders {orders:?}");
    assert!(orders.iter().all(|o| *o > 1.8), "orders {orders:?}");
}

/// The incompatible modes are not conforming through the thickness, so the
/// layers have to be refined together with the in-plane spacing.
#[test]
fn incompatible_modes_converge_under_full_refinement() {
    let a = StiffnessMatrix::isotropic(1.0, 1.0).unwrap();
    let m = manufactured(&a);
    let levels = [(0.2, 2), (0.1, 4)];
    let errors: Vec<f64> =
        levels.iter().map(|&(d, nz)| max_error(d, nz, ElementKind::IncompatibleModes, &m, &a)).collect();
    let order = (errors[0] / errors[1]).log2();
    println!("max-norm errors {errors:?}, observed order {order}");
    assert!(order > 1.8, "order {order}");
}

#[test]
fn anisotropic_manufactured_solution_is_recovered() {
    let entries: Vec<f64> = vec![
        4.0, 1.2, 1.1, 0.1, 0.0, 0.2, //
        3.5, 1.0, 0.0, 0.1, 0.0, //
        3.0, 0.0, 0.0, 0.1, //
        1.5, 0.1, 0.0, //
        1.4, 0.0, //
        1.2,
    ];
    let a = StiffnessMatrix::from_upper_triangle(&entries).unwrap();
    let m = manufactured(&a);
    let coarse = max_error(0.1, 2, ElementKind::Trilinear, &m, &a);
    let fine = max_error(0.05, 2, ElementKind::Trilinear, &m, &a);
    let order = (coarse / fine).log2();
    assert!(order > 1.8, "{coarse} -> {fine}");
}
