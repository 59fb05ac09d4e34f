use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use platecap::experiments::{hardy_grid, random_piecewise_linear};
use platecap::inequality::gram::{gram, inverse_norm, support_matrix, Moments};
use platecap::inequality::hardy::{HardyQuadrature, HardyVariant};
use platecap::inequality::korn::{korn_constant, ClampMode, KornMesh, NormVariant, SupportLayout};
use platecap::inequality::weights::{cutoff, distance_weight, support_weight, Rect};
use platecap::elastic::StiffnessMatrix;

fn variant() -> impl Strategy<Value = HardyVariant> {
    prop_oneof![
        (0.5f64..3.0).prop_map(|t| HardyVariant::Classical { t }),
        (0.5f64..3.0).prop_map(|r| HardyVariant::LogOuter { r }),
        (0.5f64..3.0).prop_map(|r| HardyVariant::LogInner { r }),
        (0.01f64..0.4, 0.5f64..2.0).prop_map(|(h, t)| HardyVariant::Shifted { h, t }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hardy_ratio_never_exceeds_the_constant(v in variant(), seed in any::<u64>()) {
        let quad = HardyQuadrature::new(v, hardy_grid(v).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let u = random_piecewise_linear(v, quad.nodes(), &mut rng);
            let r = quad.ratio(&u).unwrap();
            prop_assert!(r <= v.constant() * (1.0 + 1e-9), "{v:?}: ratio {r}");
        }
    }

    #[test]
    fn weights_are_bounded_below_by_h(h in 1e-4f64..0.4, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let omega = Rect::centered(2.0, 2.0).unwrap();
        prop_assert!(distance_weight(h, &omega, [x, y]) >= h);
        prop_assert!(support_weight(h, 1, [x, y]) > 0.0);
    }

    #[test]
    fn gram_matrices_are_positive_semidefinite(
        lo in prop::array::uniform3(-2.0f64..0.0),
        size in prop::array::uniform3(0.05f64..2.0),
    ) {
        let hi = [lo[0] + size[0], lo[1] + size[1], lo[2] + size[2]];
        let g = gram(&Moments::box_region(lo, hi));
        let eig = g.to_nalgebra().symmetric_eigen();
        let scale = eig.eigenvalues.amax();
        prop_assert!(eig.eigenvalues.iter().all(|l| *l >= -1e-12 * scale));
        for a in 0..6 {
            for b in 0..6 {
                prop_assert!((g[(a, b)] - g[(b, a)]).abs() <= 1e-14 * scale);
            }
        }
    }

    #[test]
    fn cutoff_is_monotone(a in 0.0f64..1.5, b in 0.0f64..1.5) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(cutoff(lo) >= cutoff(hi));
    }
}

#[test]
fn cutoff_limits() {
    assert_eq!(cutoff(0.3), 1.0);
    assert_eq!(cutoff(1.2), 0.0);
}

#[test]
fn power_law_ratio_matches_closed_form() {
    let v = HardyVariant::Classical { t: 1.0 };
    let quad = HardyQuadrature::geometric(v, 0.8, 1e-280).unwrap();
    for alpha in [0.6, 0.75, 1.0] {
        let r = quad.ratio_of(|x| x.powf(alpha)).unwrap();
        let exact = 1.0 / (alpha * alpha);
        assert!((r - exact).abs() < 5e-3 * exact, "alpha {alpha}: {r} vs {exact}");
    }
}

#[test]
fn support_matrix_inverse_grows_like_h_minus_two() {
    let centers = [[-0.25, 0.0], [0.25, 0.0]];
    let scaled: Vec<f64> =
        [0.2, 0.1, 0.05, 0.025, 0.0125].iter().map(|&h| inverse_norm(&support_matrix(&centers, h, 1.0)) * h * h).collect();
    let max = scaled.iter().copied().fold(0.0, f64::max);
    let min = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(max / min < 1.5, "h²‖M⁻¹‖ = {scaled:?}");
}

#[test]
fn single_support_matrix_loses_a_rotation_at_order_h_four() {
    // One support cannot fix the rotation about the vertical axis: the
    // smallest eigenvalue scales like h⁴ instead of h².
    let lam = |h: f64| 1.0 / inverse_norm(&support_matrix(&[[0.0, 0.0]], h, 1.0));
    let ratio = lam(0.05) / lam(0.025);
    assert!((ratio - 16.0).abs() < 0.5, "{ratio}");
}

#[test]
fn korn_constant_does_not_increase_with_more_clamping() {
    let a = StiffnessMatrix::isotropic(1.0, 1.0).unwrap();
    let mesh = KornMesh::default();
    for h in [0.2, 0.1] {
        let free = korn_constant(&SupportLayout::spread(1, ClampMode::SupportsOnly), &a, NormVariant::Plain, h, &mesh).unwrap();
        let clamped =
            korn_constant(&SupportLayout::spread(1, ClampMode::LateralAndSupports), &a, NormVariant::Plain, h, &mesh).unwrap();
        assert!(clamped.k <= free.k * (1.0 + 1e-6), "h {h}: {} > {}", clamped.k, free.k);
    }
}

#[test]
fn korn_constant_with_two_supports_grows_as_h_shrinks() {
    let a = StiffnessMatrix::isotropic(1.0, 1.0).unwrap();
    let layout = SupportLayout::spread(2, ClampMode::SupportsOnly);
    let k: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&h| korn_constant(&layout, &a, NormVariant::FreeEdge, h, &KornMesh::default()).unwrap().k)
        .collect();
    assert!(k.windows(2).all(|w| w[1] > w[0]), "{k:?}");
}
