use proptest::prelude::*;

use platecap::elastic::StiffnessMatrix;
use platecap::fundsol::{construct_fundamental, Fundamentals};

fn orthotropic() -> Fundamentals {
    let a = [4., 0., 0., 0., 0., 0., 1., 0., 0., 0., 0., 2., 0., 0., 0., 1., 0., 0., 1., 0., 1.];
    construct_fundamental(&StiffnessMatrix::from_upper_triangle(&a).unwrap().reduced(), 1024).unwrap()
}

fn isotropic() -> Fundamentals {
    construct_fundamental(&StiffnessMatrix::isotropic(1.0, 1.0).unwrap().reduced(), 1024).unwrap()
}

fn central_difference(f: impl Fn([f64; 2]) -> f64, y: [f64; 2], dir: usize) -> f64 {
    let e = 1e-5;
    let mut p = y;
    let mut m = y;
    p[dir] += e;
    m[dir] -= e;
    (f(p) - f(m)) / (2.0 * e)
}

fn point() -> impl Strategy<Value = [f64; 2]> {
    (0.3f64..3.0, 0.0f64..std::f64::consts::TAU).prop_map(|(r, t)| [r * t.cos(), r * t.sin()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bending_derivatives_match_differences(y in point(), ortho in any::<bool>()) {
        let f = if ortho { orthotropic() } else { isotropic() };
        for dir in 0..2 {
            let (a, b) = if dir == 0 { (1, 0) } else { (0, 1) };
            let fd = central_difference(|p| f.phi3(p), y, dir);
            let exact = f.phi3_derivative(a, b, y);
            prop_assert!((fd - exact).abs() < 1e-6 * (1.0 + exact.abs()), "∂{dir}Φ₃ at {y:?}: {fd} vs {exact}");
            let fd2 = central_difference(|p| f.phi3_derivative(a, b, p), y, dir);
            let exact2 = f.phi3_derivative(2 * a, 2 * b, y);
            prop_assert!((fd2 - exact2).abs() < 1e-5 * (1.0 + exact2.abs()));
        }
    }

    #[test]
    fn membrane_derivatives_match_differences(y in point(), ortho in any::<bool>()) {
        let f = if ortho { orthotropic() } else { isotropic() };
        for i in 0..2 {
            for j in 0..2 {
                let fd = central_difference(|p| f.phi_prime(p)[i][j], y, 1);
                let exact = f.phi_prime_derivative(i, j, 0, 1, y);
                prop_assert!((fd - exact).abs() < 1e-6 * (1.0 + exact.abs()));
            }
        }
    }

    #[test]
    fn membrane_solution_is_symmetric(y in point()) {
        let f = orthotropic();
        let p = f.phi_prime(y);
        prop_assert!((p[0][1] - p[1][0]).abs() < 1e-9);
    }
}

#[test]
fn plane_wave_construction_reproduces_the_isotropic_closed_form() {
    let a0 = StiffnessMatrix::isotropic(1.0, 1.0).unwrap().reduced();
    let mut pw = Fundamentals::plane_wave(&a0, 1024).unwrap();
    let mut cf = Fundamentals::isotropic(2.0 / 3.0, 1.0).unwrap();
    pw.normalize(512);
    cf.normalize(512);
    for y in [[0.7, 0.2], [-1.3, 0.9], [0.1, -2.0]] {
        // Φ₃ is fixed only up to a quadratic polynomial, so compare third
        // derivatives.
        for (a, b) in [(3, 0), (2, 1), (0, 3)] {
            let (p, c) = (pw.phi3_derivative(a, b, y), cf.phi3_derivative(a, b, y));
            assert!((p - c).abs() < 1e-8, "∂^({a},{b})Φ₃: {p} vs {c}");
        }
        let (p, c) = (pw.phi_prime_derivative(0, 1, 1, 0, y), cf.phi_prime_derivative(0, 1, 1, 0, y));
        assert!((p - c).abs() < 1e-8, "{p} vs {c}");
    }
}
