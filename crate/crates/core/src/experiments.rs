//! Batch experiments shared by the command-line tool and the acceptance
//! tests. Each runner returns plain serialisable records; judging them
//! against thresholds is left to the caller.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::Mat;
use crate::elastic::{bending_coefficient, lambda_prime, MaterialSpec, ReducedStiffness, StiffnessMatrix};
use crate::error::{Error, Result};
use crate::fundsol::{construct_fundamental, isotropic_parameters, verify_contour_identities, ContourReport, Fundamentals};
use crate::inequality::hardy::{power_law_ratio, HardyQuadrature, HardyVariant, ZeroEnd};
use crate::inequality::korn::{
    korn_constant, linear_fit, log_fit, relative_variation, ClampMode, KornEstimate, KornMesh, LinearFit, NormVariant,
    SupportLayout,
};
use crate::inequality::witness::{evaluate, log_weight_energy_constant, WitnessGeometry, WitnessKind};
use crate::kirchhoff::manufactured::{apply_bending, apply_membrane, Separable, Trig};
use crate::kirchhoff::{operator_coefficients, solve_bending, solve_membrane, PlateDomain};
use crate::layer::{
    extract_capacity, symmetry_and_decay_report, CapacityMatrix, CapacityOptions, CapacityRecord, LayerMesh, LayerMeshSpec,
    SymmetryDecayReport, ThetaShape,
};
use crate::poly::{Poly, PolyVec};
use crate::reduction::{apply_symbol, field_residuals, AnsatzOperators};
use crate::scalar::Surd;

/// Runs `f` on a pool of at most `jobs` threads (0 means the rayon default).
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(f))
}

// ---------------------------------------------------------------------------
// Hardy inequalities

/// Grid for random trials: uniform cells plus geometric refinement towards
/// each endpoint where the weights are singular.
pub fn hardy_grid(variant: HardyVariant) -> Result<Vec<f64>> {
    let (a, b) = variant.interval();
    let len = b - a;
    let mut nodes: Vec<f64> = (0..1000).map(|i| a + len * i as f64 / 1000.0).collect();
    nodes.push(b);
    let mut x = 1e-3 * len;
    while x > 1e-9 * len {
        x *= 0.8;
        nodes.push(a + x);
        if variant.zero_end() == ZeroEnd::Right {
            nodes.push(b - x);
        }
    }
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|p, q| (*p - *q).abs() <= 1e-15 * len);
    Ok(nodes)
}

/// A random piecewise-linear function with a handful of kinks, some of
/// them placed very close to the singular end, sampled on `nodes`.
pub fn random_piecewise_linear(variant: HardyVariant, nodes: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    let (a, b) = variant.interval();
    let len = b - a;
    let kinks = rng.gen_range(1..=12);
    let mut knots: Vec<(f64, f64)> = (0..kinks)
        .map(|_| {
            let t = if rng.gen_bool(0.5) { 10f64.powf(rng.gen_range(-8.0..0.0)) } else { rng.gen_range(0.0..1.0) };
            (a + t * len, rng.gen_range(-1.0..1.0))
        })
        .collect();
    let (left, right) = match variant.zero_end() {
        ZeroEnd::Left => (0.0, rng.gen_range(-1.0..1.0)),
        ZeroEnd::Right => (rng.gen_range(-1.0..1.0), 0.0),
    };
    knots.push((a, left));
    knots.push((b, right));
    knots.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut k = 0;
    nodes
        .iter()
        .map(|&x| {
            while k + 2 < knots.len() && knots[k + 1].0 < x {
                k += 1;
            }
            let (x0, v0) = knots[k];
            let (x1, v1) = knots[k + 1];
            if x1 == x0 {
                v1
            } else {
                v0 + (v1 - v0) * ((x - x0) / (x1 - x0)).clamp(0.0, 1.0)
            }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HardySummary {
    pub variant: String,
    pub samples: usize,
    pub seed: u64,
    pub constant: f64,
    pub max_ratio: f64,
    pub quadrature_error: f64,
}

/// Ratios of `samples` random admissible functions, in sample order.
pub fn hardy_random_ratios(variant: HardyVariant, samples: usize, seed: u64) -> Result<(Vec<f64>, HardySummary)> {
    let quad = HardyQuadrature::new(variant, hardy_grid(variant)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(samples);
    for _ in 0..samples {
        let u = random_piecewise_linear(variant, quad.nodes(), &mut rng);
        ratios.push(quad.ratio(&u)?);
    }
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let summary = HardySummary {
        variant: variant.name().into(),
        samples,
        seed,
        constant: variant.constant(),
        max_ratio,
        quadrature_error: quad.quadrature_error(),
    };
    Ok((ratios, summary))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PowerLawRow {
    pub alpha: f64,
    pub ratio: f64,
    pub exact: f64,
}

/// Ratios of `x^α` for the classical inequality on a grid refined down to
/// `1e-280`, so the slowly converging integrals are captured.
pub fn hardy_power_law(alphas: &[f64]) -> Result<Vec<PowerLawRow>> {
    let variant = HardyVariant::Classical { t: 1.0 };
    let quad = HardyQuadrature::geometric(variant, 0.8, 1e-280)?;
    alphas
        .iter()
        .map(|&alpha| Ok(PowerLawRow { alpha, ratio: quad.ratio_of(|x| x.powf(alpha))?, exact: power_law_ratio(alpha) }))
        .collect()
}

// ---------------------------------------------------------------------------
// Exact algebra

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsotropicAlgebraRow {
    pub lambda: String,
    pub mu: String,
    pub lambda_prime: String,
    pub bending: String,
    pub lambda_prime_matches: bool,
    pub bending_matches: bool,
}

/// Random rational Lamé pairs with `λ ≥ 0`, `μ > 0`.
pub fn random_lame_pairs(count: usize, seed: u64) -> Vec<(Surd, Surd)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let l = Surd::ratio(rng.gen_range(0..40), rng.gen_range(1..13));
            let m = Surd::ratio(rng.gen_range(1..40), rng.gen_range(1..13));
            (l, m)
        })
        .collect()
}

/// Compares the Schur complement and the extracted bending coefficient with
/// the closed forms `2λμ/(λ+2μ)` and `μ(λ+μ)/(3(λ+2μ))`.
pub fn isotropic_algebra(pairs: &[(Surd, Surd)]) -> Result<Vec<IsotropicAlgebraRow>> {
    pairs
        .iter()
        .map(|(l, m)| {
            let a = StiffnessMatrix::isotropic(l.clone(), m.clone())?;
            let a0 = a.reduced();
            let lp = a0.matrix()[(0, 1)].clone();
            let coeffs = operator_coefficients(&a0);
            let b = coeffs.bending[0].clone();
            Ok(IsotropicAlgebraRow {
                lambda: l.to_string(),
                mu: m.to_string(),
                lambda_prime_matches: lp == lambda_prime(l, m),
                bending_matches: b == bending_coefficient(l, m),
                lambda_prime: lp.to_string(),
                bending: b.to_string(),
            })
        })
        .collect()
}

/// The stiffness of `spec` in exact arithmetic. Every finite `f64` is a
/// binary rational, so the conversion loses nothing.
pub fn exact_stiffness(spec: &MaterialSpec) -> Result<StiffnessMatrix<Surd>> {
    let a = spec.stiffness()?;
    let m = a.matrix();
    let mut bad = None;
    let exact = Mat::from_fn(6, 6, |i, j| {
        Surd::from_f64(m[(i, j)]).unwrap_or_else(|| {
            bad = Some(m[(i, j)]);
            Surd::int(0)
        })
    });
    if let Some(v) = bad {
        return Err(Error::InvalidMaterial(format!("entry {v} is not finite")));
    }
    StiffnessMatrix::new(exact)
}

/// Symmetric positive definite stiffness with small rational entries:
/// `BᵀB + I` for a random integer matrix `B`.
pub fn random_anisotropic_stiffness(rng: &mut impl Rng) -> Result<StiffnessMatrix<Surd>> {
    let b = Mat::from_fn(6, 6, |_, _| Surd::int(rng.gen_range(-2..=2)));
    StiffnessMatrix::new(b.transpose().mul(&b).add(&Mat::identity(6)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnsatzResidualSummary {
    pub material: String,
    pub fields: usize,
    /// Interior and traction residuals of orders 0, 1, 2 vanish.
    pub low_orders_vanish: bool,
    /// Order-3 residuals are `(ℒ′w′, 0)` inside and zero on the faces.
    pub membrane_limit: bool,
    /// The thickness-averaged order-4 vertical residual equals `ℒ₃w₃`.
    pub bending_limit: bool,
    /// The operators extracted from the cell problems equal the ones
    /// computed directly from `A⁰`.
    pub operators_match: bool,
    pub first_failure: Option<String>,
}

/// All monomials `y₁^a y₂^b` with `a + b ≤ degree`.
pub fn plane_monomials(degree: u16) -> Vec<Poly<Surd>> {
    let mut out = Vec::new();
    for d in 0..=degree {
        for a in 0..=d {
            out.push(Poly::monomial(Surd::int(1), [a, d - a, 0]));
        }
    }
    out
}

/// Checks the residual cascade of the ansatz on every field `m·e_c` with
/// `m` a monomial of degree at most `degree`.
pub fn ansatz_residuals(a: &StiffnessMatrix<Surd>, degree: u16, label: &str) -> Result<AnsatzResidualSummary> {
    let ops = AnsatzOperators::build(a)?;
    let (operators_match, mut first_failure) = match ops.verify() {
        Ok(_) => (true, None),
        Err(e) => (false, Some(e.to_string())),
    };
    let membrane = ops.reduced().membrane_symbol();
    let bending = ops.reduced().bending_symbol();
    let half = Surd::ratio(1, 2);
    let mut fields = 0;
    let (mut low, mut mem, mut bend) = (true, true, true);
    for m in plane_monomials(degree) {
        for c in 0..3 {
            let mut w: PolyVec<Surd> = Default::default();
            w[c] = m.clone();
            fields += 1;
            let r = field_residuals(&ops, &w);
            let zero = |v: &PolyVec<Surd>| v.iter().all(Poly::is_zero);
            let mut note = |ok: &mut bool, what: &str| {
                if *ok {
                    *ok = false;
                    first_failure.get_or_insert_with(|| format!("{what} for component {c} of degree-{} monomial", m.degree().unwrap_or(0)));
                }
            };
            if !(0..3).all(|q| zero(&r.interior[q]) && zero(&r.traction_plus[q]) && zero(&r.traction_minus[q])) {
                note(&mut low, "low-order residual");
            }
            let expected: [Poly<Surd>; 2] = std::array::from_fn(|i| {
                let mut acc = Poly::zero();
                for j in 0..2 {
                    acc.add_assign(&apply_symbol(&membrane[i][j], &w[j]));
                }
                acc
            });
            let f3 = &r.interior[3];
            if f3[0] != expected[0] || f3[1] != expected[1] || !f3[2].is_zero() || !zero(&r.traction_plus[3]) || !zero(&r.traction_minus[3]) {
                note(&mut mem, "order-3 residual");
            }
            let avg = r.interior[4][2]
                .integrate(crate::poly::ZETA, &-half.clone(), &half)
                .add(&r.traction_plus[4][2])
                .add(&r.traction_minus[4][2]);
            if avg != apply_symbol(&bending, &w[2]) {
                note(&mut bend, "averaged order-4 residual");
            }
        }
    }
    Ok(AnsatzResidualSummary {
        material: label.into(),
        fields,
        low_orders_vanish: low,
        membrane_limit: mem,
        bending_limit: bend,
        operators_match,
        first_failure,
    })
}

impl AnsatzResidualSummary {
    pub fn passed(&self) -> bool {
        self.low_orders_vanish && self.membrane_limit && self.bending_limit && self.operators_match
    }
}

// ---------------------------------------------------------------------------
// Fundamental solutions

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FundsolVerification {
    pub closed_form: bool,
    /// `∮ψ′ᵀ𝒩′Φ′` on the unit circle before normalisation.
    pub raw_normalization: [[f64; 2]; 2],
    /// Constant added to `ψ′`.
    pub offset: [[f64; 2]; 2],
    pub reports: Vec<ContourReport>,
    pub max_defect: f64,
}

/// Builds the fundamental solutions, records the raw normalisation
/// integral, normalises and checks the contour identities at each radius.
pub fn fundsol_verify(a0: &ReducedStiffness<f64>, radii: &[f64], nodes: usize, contour_nodes: usize) -> Result<(Fundamentals, FundsolVerification)> {
    let mut f = match isotropic_parameters(a0.matrix()) {
        Some((lp, mu)) => Fundamentals::isotropic(lp, mu)?,
        None => Fundamentals::plane_wave(a0, nodes)?,
    };
    let raw_normalization = f.normalize(contour_nodes);
    let reports: Vec<ContourReport> =
        radii.iter().map(|&r| verify_contour_identities(&f, r, contour_nodes, 0.0)).collect::<Result<_>>()?;
    let max_defect = reports.iter().map(|r| r.max_defect).fold(0.0, f64::max);
    let v = FundsolVerification {
        closed_form: f.closed_form,
        raw_normalization,
        offset: f.normalization_offset,
        reports,
        max_defect,
    };
    Ok((f, v))
}

// ---------------------------------------------------------------------------
// Kirchhoff plate

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct KirchhoffConvergenceRow {
    pub cells: usize,
    pub spacing: f64,
    pub membrane_error: f64,
    pub bending_error: f64,
    /// `|w₃(𝒪)|` of the discrete solution.
    pub point_value: f64,
    pub multiplier: f64,
}

/// Manufactured solutions on the unit square: `w′ = sin πy₁ sin πy₂ (1, 1)`
/// and `w₃ = sin²πy₁ sin²2πy₂`, which vanishes at the support `(½, ½)` so
/// the point condition does not change the exact solution.
pub fn kirchhoff_convergence(a0: &ReducedStiffness<f64>, levels: &[usize]) -> Result<Vec<KirchhoffConvergenceRow>> {
    let coeffs = operator_coefficients(a0);
    let wm = Separable { fx: Trig::sin(PI), fy: Trig::sin(PI) };
    let wb = Separable { fx: Trig::sin_squared(PI), fy: Trig::sin_squared(2.0 * PI) };
    levels
        .par_iter()
        .map(|&n| {
            let d = PlateDomain::new(1.0, 1.0, n, n)?.with_point([0.5, 0.5])?;
            let gm = d.sample(|y| apply_membrane(&coeffs, &[wm, wm], y));
            let gb = d.sample(|y| apply_bending(&coeffs, &wb, y));
            let m = solve_membrane(&d, a0, &gm)?;
            let b = solve_bending(&d, a0, &gb)?;
            let mut em: f64 = 0.0;
            let mut eb: f64 = 0.0;
            for node in 0..d.n_nodes() {
                let y = d.coords(node);
                let v = wm.value(y);
                em = em.max((m.w1[node] - v).abs()).max((m.w2[node] - v).abs());
                eb = eb.max((b.w3[node] - wb.value(y)).abs());
            }
            let [pi, pj] = d.point.expect("point set above");
            Ok(KirchhoffConvergenceRow {
                cells: n,
                spacing: d.dx(),
                membrane_error: em,
                bending_error: eb,
                point_value: b.w3[d.node(pi, pj)].abs(),
                multiplier: b.multiplier.unwrap_or(0.0),
            })
        })
        .collect()
}

/// Observed orders `log₂(e_k / e_{k+1})` for successive halvings.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

// ---------------------------------------------------------------------------
// Korn constants

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KornSweep {
    pub clamp: ClampMode,
    pub supports: usize,
    pub norm: NormVariant,
    pub mesh: KornMesh,
    /// Sorted by decreasing `h`.
    pub estimates: Vec<KornEstimate>,
    pub log_fit: LinearFit,
    pub relative_variation: f64,
}

pub fn korn_sweep(
    clamp: ClampMode,
    supports: usize,
    norm: NormVariant,
    hs: &[f64],
    mesh: KornMesh,
    a: &StiffnessMatrix<f64>,
) -> Result<KornSweep> {
    let layout = SupportLayout::spread(supports, clamp);
    let mut estimates: Vec<KornEstimate> =
        hs.par_iter().map(|&h| korn_constant(&layout, a, norm, h, &mesh)).collect::<Result<_>>()?;
    estimates.sort_by(|p, q| q.h.total_cmp(&p.h));
    Ok(KornSweep {
        clamp,
        supports,
        norm,
        mesh,
        log_fit: log_fit(&estimates),
        relative_variation: relative_variation(&estimates),
        estimates,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RotationBoundRow {
    pub h: f64,
    /// Rayleigh-quotient lower bound for the free-edge Korn constant.
    pub lower_bound: f64,
    pub scaled: f64,
}

/// Lower bounds for the single-support Korn constant from the cut-off
/// rotation field, with `scaled = h·bound`.
pub fn rotation_lower_bounds(hs: &[f64]) -> Result<Vec<RotationBoundRow>> {
    let geom = WitnessGeometry::default();
    hs.iter()
        .map(|&h| {
            let w = evaluate(WitnessKind::Rotation, &geom, h)?;
            let b = w.free_edge_lower_bound();
            Ok(RotationBoundRow { h, lower_bound: b, scaled: b * h })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LogWeightRow {
    pub h: f64,
    /// `energy·|ln h|/h`.
    pub scaled_energy: f64,
    /// Unlogged weighted norm over energy.
    pub unlogged_over_energy: f64,
}

pub fn log_weight_witness(hs: &[f64]) -> Result<(Vec<LogWeightRow>, f64)> {
    let geom = WitnessGeometry::default();
    let rows = hs
        .iter()
        .map(|&h| {
            let w = evaluate(WitnessKind::LogWeight, &geom, h)?;
            Ok(LogWeightRow {
                h,
                scaled_energy: w.energy * h.ln().abs() / h,
                unlogged_over_energy: w.weighted_unlogged / w.energy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((rows, log_weight_energy_constant()))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly).slope
}

// ---------------------------------------------------------------------------
// Capacity

pub struct CapacityRun {
    pub record: CapacityRecord,
    pub matrix: CapacityMatrix,
    pub report: SymmetryDecayReport,
    pub dofs: usize,
}

/// Builds the truncated layer, extracts the capacity matrix and checks it
/// on the comparison annuli.
pub fn capacity_run(
    material: &MaterialSpec,
    theta: &ThetaShape,
    mesh: LayerMeshSpec,
    opts: &CapacityOptions,
    fundsol_nodes: usize,
) -> Result<CapacityRun> {
    let a = material.stiffness()?;
    let ops = AnsatzOperators::build(&a)?;
    let fund = construct_fundamental(&a.reduced(), fundsol_nodes)?;
    let mesh = LayerMesh::build(mesh, *theta)?;
    let (matrix, pot) = extract_capacity(&mesh, &a, &fund, &ops, opts)?;
    let report = symmetry_and_decay_report(&mesh, &matrix, &pot, opts)?;
    Ok(CapacityRun {
        record: CapacityRecord::new(&matrix, material.clone(), theta),
        matrix,
        report,
        dofs: mesh.n_dofs(),
    })
}

/// Largest entrywise change between two capacity matrices.
pub fn capacity_drift(a: &CapacityMatrix, b: &CapacityMatrix) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            d = d.max((a.c[i][j] - b.c[i][j]).abs());
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_functions_respect_the_zero_end() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for v in [HardyVariant::Classical { t: 1.0 }, HardyVariant::LogOuter { r: 1.0 }] {
            let nodes = hardy_grid(v).unwrap();
            for _ in 0..20 {
                let u = random_piecewise_linear(v, &nodes, &mut rng);
                let end = if v.zero_end() == ZeroEnd::Left { u[0] } else { u[u.len() - 1] };
                assert_eq!(end, 0.0);
            }
        }
    }

    #[test]
    fn same_seed_same_ratios() {
        let v = HardyVariant::Shifted { h: 0.1, t: 1.0 };
        let (a, _) = hardy_random_ratios(v, 20, 7).unwrap();
        let (b, _) = hardy_random_ratios(v, 20, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn monomial_count() {
        assert_eq!(plane_monomials(6).len(), 28);
    }
}
