use proptest::prelude::*;

use platecap::elastic::StiffnessMatrix;
use platecap::kirchhoff::{bending_matrix, membrane_matrix, solve, solve_bending, LoadSpec, PlateDomain};

fn iso() -> platecap::elastic::ReducedStiffness<f64> {
    StiffnessMatrix::isotropic(1.0, 1.0).unwrap().reduced()
}

fn ortho() -> platecap::elastic::ReducedStiffness<f64> {
    let a = [4., 0.5, 0., 0., 0., 0., 1., 0., 0., 0., 0., 2., 0., 0., 0., 1., 0., 0., 1., 0., 1.];
    StiffnessMatrix::from_upper_triangle(&a).unwrap().reduced()
}

#[test]
fn assembled_operators_are_symmetric() {
    let d = PlateDomain::new(1.0, 0.7, 12, 9).unwrap();
    for a0 in [iso(), ortho()] {
        assert!(membrane_matrix(&d, &a0).is_symmetric(1e-10));
        assert!(bending_matrix(&d, &a0).is_symmetric(1e-10));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn assembled_operators_are_positive(v in prop::collection::vec(-1.0f64..1.0, 2 * 11 * 11)) {
        let d = PlateDomain::new(1.0, 1.0, 10, 10).unwrap();
        let a0 = ortho();
        let m = membrane_matrix(&d, &a0);
        let b = bending_matrix(&d, &a0);
        let xm: Vec<f64> = v.iter().take(m.n()).copied().collect();
        let xb: Vec<f64> = v.iter().take(b.n()).copied().collect();
        prop_assume!(xm.iter().any(|x| *x != 0.0));
        prop_assert!(m.quadratic_form(&xm) > 0.0);
        prop_assert!(b.quadratic_form(&xb) > 0.0);
    }
}

#[test]
fn mirror_symmetric_load_gives_mirror_symmetric_deflection() {
    let n = 20;
    let d = PlateDomain::new(1.0, 1.0, n, n).unwrap().with_point([0.5, 0.25]).unwrap();
    let g = d.sample(|y| (y[0] - 0.5).powi(2) + y[1]);
    let s = solve_bending(&d, &iso(), &g).unwrap();
    for j in 0..=n {
        for i in 0..=n {
            let a = s.w3[d.node(i, j)];
            let b = s.w3[d.node(n - i, j)];
            assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "({i},{j}): {a} vs {b}");
        }
    }
}

#[test]
fn point_support_raises_the_minimum_energy() {
    let d = PlateDomain::new(1.0, 1.0, 24, 24).unwrap();
    let g = LoadSpec::parse("constant:1").unwrap().sample(&d).unwrap();
    let free = solve(&d, &ortho(), &g).unwrap();
    let pinned_domain = d.clone().with_point([0.5, 0.5]).unwrap();
    let pinned = solve(&pinned_domain, &ortho(), &g).unwrap();
    assert!(free.energy() < 0.0);
    assert!(pinned.energy() > free.energy());
    assert!(pinned.bending.constraint_residual < 1e-12);
    assert_eq!(pinned.membrane.energy, free.membrane.energy);
}

#[test]
fn deflection_is_linear_in_the_load() {
    let d = PlateDomain::new(1.0, 1.0, 16, 16).unwrap().with_point([0.25, 0.5]).unwrap();
    let g1 = d.sample(|y| (3.0 * y[0]).sin());
    let g2 = d.sample(|y| y[0] * y[1]);
    let sum: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| 2.0 * a - b).collect();
    let (s1, s2, s) = (
        solve_bending(&d, &iso(), &g1).unwrap(),
        solve_bending(&d, &iso(), &g2).unwrap(),
        solve_bending(&d, &iso(), &sum).unwrap(),
    );
    for k in 0..d.n_nodes() {
        assert!((s.w3[k] - (2.0 * s1.w3[k] - s2.w3[k])).abs() < 1e-10);
    }
}
