//! Cell-problem and envelope behavior: Jensen consistency for convex
//! densities, polyconvex lower bounds, growth inheritance, local Lipschitz
//! bounds, refinement monotonicity, relaxation activity of the compressed
//! Saint Venant-Kirchhoff density, and homogenized energies of limit maps.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use strata_core::constructions::{build_recovery_sequence, LimitPair, RotationCurve};
use strata_core::geometry::{CuboidDomain, LayerConfig, QuadratureSpec};
use strata_core::homog::*;
use strata_core::mat::*;
use strata_core::rigidity::stiff_energy;

fn random_admissible(rng: &mut ChaCha8Rng, n: usize, shear_scale: f64) -> SquareMatrix {
    let rot = RotationMatrix::planar(n, rng.random_range(-3.0..3.0));
    let mut d = Vector::zeros(n);
    for i in 0..n {
        d.set(i, rng.random_range(-shear_scale..shear_scale));
    }
    rot.matrix().add(&d.outer(&Vector::unit(n, n - 1)))
}

#[test]
fn jensen_consistency_for_convex_density() {
    let w = EnergyDensity::frobenius_squared(2);
    let disc = CellDiscretization::new(9, 5, 2).unwrap().with_restarts(2);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let f = random_admissible(&mut rng, 2, 1.5);
        let lambda = rng.random_range(0.25..0.75);
        let exact = w_hom_convex(&f, &w, lambda).unwrap();
        let out = cell_minimize(&f, &w, lambda, &disc).unwrap();
        assert!(out.value >= exact - 1e-6, "Jensen lower bound");
        assert!(out.value <= exact + 1e-6, "zero start attains the infimum");
    }
}

#[test]
fn polyconvex_minors_lower_bound() {
    // W(F) = |F|^2 + det^2 is polyconvex but not convex; its declared
    // minors bound is exact, so the cell value meets it with equality
    let w = EnergyDensity::frobenius_det_squared(2);
    let disc = CellDiscretization::new(9, 5, 3).unwrap().with_restarts(2);
    let lambda = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..4 {
        let f = random_admissible(&mut rng, 2, 1.0);
        let fl = f_lambda(&f, lambda).unwrap();
        let bound = lambda * (w.poly_lower().unwrap())(&minors(&fl));
        let out = cell_minimize(&f, &w, lambda, &disc).unwrap();
        assert!(
            out.value >= bound - 1e-6,
            "cell value {} under the polyconvex bound {bound}",
            out.value
        );
        assert!(
            out.value <= bound + 1e-3,
            "polyconvex density needs no relaxation"
        );
    }
}

#[test]
fn growth_inheritance_sandwich_on_admissible_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10_000 {
        let n = if rng.random_range(0.0..1.0) < 0.5 {
            2
        } else {
            3
        };
        let lambda: f64 = rng.random_range(0.15..0.85);
        let f = random_admissible(&mut rng, n, 3.0);
        let fl = f_lambda(&f, lambda).unwrap();
        let norm_f = f.frobenius_norm();
        let norm_fl = fl.frobenius_norm();
        assert!(
            norm_f / (2.0 * lambda) - n as f64 / lambda <= norm_fl + 1e-12,
            "lower sandwich fails: |F| = {norm_f}, |F_l| = {norm_fl}, lambda = {lambda}"
        );
        assert!(
            norm_fl <= (norm_f + 1.0) / lambda + 1e-12,
            "upper sandwich fails: |F| = {norm_f}, |F_l| = {norm_fl}, lambda = {lambda}"
        );
    }
}

#[test]
fn homogenized_density_is_locally_lipschitz() {
    // for W = |F|^2, lambda = 1/2, n = 2 the chain of estimates gives
    // |Whom(F) - Whom(G)| <= 10 (1 + |F| + |G|) |F - G| on admissible pairs
    let w = EnergyDensity::frobenius_squared(2);
    let lambda = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let f = random_admissible(&mut rng, 2, 2.0);
        let g = random_admissible(&mut rng, 2, 2.0);
        let vf = w_hom_convex(&f, &w, lambda).unwrap();
        let vg = w_hom_convex(&g, &w, lambda).unwrap();
        let diff = f.sub(&g).frobenius_norm();
        if diff < 1e-9 {
            continue;
        }
        let ratio = (vf - vg).abs() / ((1.0 + f.frobenius_norm() + g.frobenius_norm()) * diff);
        worst = worst.max(ratio);
    }
    assert!(worst <= 10.0, "sampled Lipschitz ratio {worst}");
    assert!(worst > 0.1, "sanity: the ratio is non-trivial");
}

#[test]
fn refinement_monotonicity_of_the_cell_value() {
    // nested grids enlarge the perturbation space, so the minimum cannot
    // increase; warm starts carry the coarse minimizer upward
    let w = EnergyDensity::svk(2, SvkParams::new(1.0, 1.0).unwrap());
    let f = SquareMatrix::from_rows(2, &[1.0, 0.0, 0.0, 0.55]);
    let lambda = 0.5;
    let base = f_lambda(&f, lambda).unwrap();
    let coarse_disc = CellDiscretization::new(5, 3, 3).unwrap().with_restarts(2);
    let coarse = cell_minimize_at_base(&base, &w, lambda, &coarse_disc, &[]).unwrap();
    let mid_disc = coarse_disc.refined();
    let mid = cell_minimize_at_base(&base, &w, lambda, &mid_disc, &[coarse.field.clone()]).unwrap();
    let fine_disc = mid_disc.refined();
    let fine = cell_minimize_at_base(&base, &w, lambda, &fine_disc, &[mid.field.clone()]).unwrap();
    assert!(
        mid.value <= coarse.value + 1e-9,
        "refinement must not increase: {} -> {}",
        coarse.value,
        mid.value
    );
    assert!(
        fine.value <= mid.value + 1e-9,
        "refinement must not increase: {} -> {}",
        mid.value,
        fine.value
    );

    // convex case: all levels agree with the closed form
    let wc = EnergyDensity::frobenius_squared(2);
    let f = SquareMatrix::from_rows(2, &[1.0, 1.0, 0.0, 1.0]);
    let exact = w_hom_convex(&f, &wc, lambda).unwrap();
    for disc in [coarse_disc, mid_disc] {
        let out = cell_minimize(&f, &wc, lambda, &disc).unwrap();
        assert!((out.value - exact).abs() <= 1e-9);
    }
}

#[test]
fn svk_relaxation_is_active_under_compression() {
    let params = SvkParams::new(1.0, 1.0).unwrap();
    let w = EnergyDensity::svk(2, params);
    let lambda = 0.5;
    // R = I, d = -0.45 e_2: F_lambda = diag(1, 0.1), strongly compressed
    let f = SquareMatrix::from_rows(2, &[1.0, 0.0, 0.0, 0.55]);
    let fl = f_lambda(&f, lambda).unwrap();
    assert!(fl.sub(&SquareMatrix::diag(2, &[1.0, 0.1])).frobenius_norm() < 1e-12);
    let unrelaxed = lambda * svk(&fl, &params);
    let disc = CellDiscretization::default_desk();
    let out = cell_minimize(&f, &w, lambda, &disc).unwrap();
    assert!(
        out.value < 0.99 * unrelaxed,
        "relaxation must beat lambda W(F_lambda) by > 1%: {} vs {unrelaxed}",
        out.value
    );
    assert!(out.value >= 0.0);

    // cross-check against the lamination envelope at F_lambda: the
    // compressed diagonal mixes diag(1, +-1) along the rank-one e2 (x) e2,
    // so the envelope value vanishes there
    let spec = EnvelopeSpec::default_desk();
    let grid = lamination_envelope(&w, &spec, 3).unwrap();
    let envelope_at_fl = grid.query(&fl).unwrap();
    assert!(
        envelope_at_fl <= 1e-9,
        "envelope at F_lambda: {envelope_at_fl}"
    );
    assert!(lambda * envelope_at_fl <= out.value + 1e-9);
}

#[test]
fn envelope_improving_segment_is_verified_before_the_grid() {
    // the concrete rank-one segments behind the F = 0 improvement:
    // diag(0,1) = (I + diag(-1,1)) / 2 with a rank-one difference, and
    // 0 = (diag(0,1) + diag(0,-1)) / 2 with a rank-one difference
    let params = SvkParams::new(1.0, 1.0).unwrap();
    let id = SquareMatrix::identity(2);
    let reflect = SquareMatrix::diag(2, &[-1.0, 1.0]);
    let diff = id.sub(&reflect);
    assert!((diff.det()).abs() < 1e-14, "rank-one difference");
    assert!(svk(&id, &params) < 1e-14 && svk(&reflect, &params) < 1e-14);
    let mid = SquareMatrix::diag(2, &[0.0, 1.0]);
    let lam_value = 0.5 * (svk(&id, &params) + svk(&reflect, &params));
    assert!(lam_value < svk(&mid, &params), "first split improves");

    let up = SquareMatrix::diag(2, &[0.0, 1.0]);
    let down = SquareMatrix::diag(2, &[0.0, -1.0]);
    assert!((up.sub(&down).det()).abs() < 1e-14, "rank-one difference");
    // after the first sweep both endpoints relax to zero, improving F = 0
    // below svk(0) = 1
}

#[test]
fn envelope_zero_matrix_relaxes_and_iterations_are_monotone() {
    let w = EnergyDensity::svk(2, SvkParams::new(1.0, 1.0).unwrap());
    let spec = EnvelopeSpec::new(SquareMatrix::zeros(2), 1.0, 5).unwrap();
    let one = lamination_envelope(&w, &spec, 1).unwrap();
    let two = lamination_envelope(&w, &spec, 2).unwrap();
    let three = lamination_envelope(&w, &spec, 3).unwrap();
    for i in 0..one.values.len() {
        assert!(two.values[i] <= one.values[i] + 1e-15);
        assert!(three.values[i] <= two.values[i] + 1e-15);
    }
    let zero = SquareMatrix::zeros(2);
    assert!(three.query(&zero).unwrap() < 1.0, "strict improvement at 0");
    assert!(three.query(&SquareMatrix::identity(2)).unwrap() <= 1e-12);
}

#[test]
fn hom_energy_of_rigid_motion_vanishes() {
    // a density vanishing on rotations sees zero homogenized energy for a
    // rigid-motion limit (d = 0)
    let w = EnergyDensity::svk(2, SvkParams::new(1.0, 1.0).unwrap());
    let pair = LimitPair {
        rotation: RotationCurve::constant(RotationMatrix::planar(2, 0.4), (-1.0, 2.0)).unwrap(),
        shear: Arc::new(|_| Vector::zeros(2)),
    };
    let dom = CuboidDomain::unit_cube(2);
    let disc = CellDiscretization::new(5, 3, 2).unwrap().with_restarts(1);
    let value = hom_energy(&pair, &w, 0.5, &dom, &disc, 4, 3).unwrap();
    assert!(value.abs() <= 1e-6, "rigid motion energy {value:.3e}");

    // the convex closed form keeps the floor lambda |R|^2 for |F|^2
    let wf = EnergyDensity::frobenius_squared(2);
    let value = hom_energy(&pair, &wf, 0.5, &dom, &disc, 4, 3).unwrap();
    assert!((value - 0.5 * 2.0).abs() < 1e-12, "lambda |R|^2 = 1");
}

#[test]
fn three_dimensional_cell_problem_matches_closed_form() {
    let w = EnergyDensity::frobenius_squared(3);
    let lambda = 0.5;
    let f = SquareMatrix::identity(3)
        .add(&Vector::from_slice(3, &[0.8, 0.3, 0.0]).outer(&Vector::unit(3, 2)));
    let exact = w_hom_convex(&f, &w, lambda).unwrap();
    let disc = CellDiscretization::new(5, 4, 2).unwrap().with_restarts(1);
    let out = cell_minimize(&f, &w, lambda, &disc).unwrap();
    assert!(
        (out.value - exact).abs() <= 1e-9,
        "{} vs {exact}",
        out.value
    );
    assert!(out.perturbation_norm <= 1e-6);
}

#[test]
fn envelope_grid_exports_csv() {
    let w = EnergyDensity::frobenius_squared(2);
    let spec = EnvelopeSpec::new(SquareMatrix::zeros(2), 1.0, 3).unwrap();
    let grid = lamination_envelope(&w, &spec, 1).unwrap();
    let mut buf = Vec::new();
    grid.to_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "f_11,f_12,f_21,f_22,value,iterations"
    );
    assert_eq!(lines.count(), 81);
}

#[test]
fn hom_energy_constant_shear_matches_pointwise_value() {
    let w = EnergyDensity::frobenius_squared(2);
    let pair = LimitPair {
        rotation: RotationCurve::constant(RotationMatrix::identity(2), (-1.0, 2.0)).unwrap(),
        shear: Arc::new(|_| Vector::from_slice(2, &[1.0, 0.0])),
    };
    let dom = CuboidDomain::unit_cube(2);
    let disc = CellDiscretization::new(5, 3, 2).unwrap().with_restarts(1);
    let value = hom_energy(&pair, &w, 0.5, &dom, &disc, 4, 3).unwrap();
    assert!((value - 3.0).abs() < 1e-12, "|Omega| * 3.0");
}

#[test]
fn hom_energy_caches_cell_solves_for_nonconvex_densities() {
    // constant compensated gradient: a single cell solve serves every
    // quadrature node; runtime stays in the single-solve regime
    let w = EnergyDensity::svk(2, SvkParams::new(1.0, 1.0).unwrap());
    let pair = LimitPair {
        rotation: RotationCurve::constant(RotationMatrix::identity(2), (-1.0, 2.0)).unwrap(),
        shear: Arc::new(|_| Vector::from_slice(2, &[0.0, -0.225])),
    };
    let dom = CuboidDomain::unit_cube(2);
    let disc = CellDiscretization::new(9, 5, 3).unwrap().with_restarts(2);
    let t0 = std::time::Instant::now();
    let value = hom_energy(&pair, &w, 0.5, &dom, &disc, 4, 3).unwrap();
    let elapsed = t0.elapsed();
    // pointwise value equals the affine cell problem at F = I + d (x) e_2
    let f = SquareMatrix::identity(2)
        .add(&Vector::from_slice(2, &[0.0, -0.225]).outer(&Vector::unit(2, 1)));
    let direct = cell_minimize(&f, &w, 0.5, &disc).unwrap();
    assert!((value - direct.value).abs() < 1e-10);
    assert!(
        elapsed < std::time::Duration::from_secs(30),
        "cache must collapse {} quadrature nodes into one solve",
        4 * 4 * 9
    );
}

#[test]
fn gamma_consistency_recovery_energy_matches_homogenized_value() {
    // affine admissible F, convex W: the recovery-sequence energy at
    // eps = 2^-7 reproduces |Omega| W_hom(F) and the scaled stiff term
    // vanishes
    let f = SquareMatrix::from_rows(2, &[1.0, 1.0, 0.0, 1.0]);
    let dec = decompose_a(&f, 1e-8).unwrap();
    let w = EnergyDensity::frobenius_squared(2);
    let lambda = 0.5;
    let whom = w_hom_convex(&f, &w, lambda).unwrap();
    let dom = CuboidDomain::unit_cube(2);
    let eps = 2f64.powi(-7);
    let layers = LayerConfig::new(lambda, eps).unwrap();
    let sigma = RotationCurve::constant(dec.rotation, (-1.0, 2.0)).unwrap();
    let shear = dec.shear;
    let field = build_recovery_sequence(&sigma, Arc::new(move |_| shear), layers, dom).unwrap();
    let spec = QuadratureSpec::default_desk();
    let (stiff_scaled, soft) = energy_epsilon(&field, &w, 2.0, 3.0, &spec).unwrap();
    let total = stiff_scaled + soft;
    assert!(
        (total - whom).abs() <= 0.02 * whom,
        "E_eps = {total} vs |Omega| W_hom = {whom}"
    );
    assert!(
        stiff_scaled < 1e-6,
        "eps^-3-scaled stiff energy {stiff_scaled:.3e}"
    );
    let raw_stiff = stiff_energy(&field, 2.0, &spec).unwrap();
    assert!(raw_stiff <= 1e-20);
}
