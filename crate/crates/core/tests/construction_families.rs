//! The deformation families: bending, volume bending, wrinkling, layer
//! rotation, laminates, the stop-and-go reparametrization and recovery
//! sequences — checked against their closed-form limits and invariants.

use std::sync::Arc;
use strata_core::constructions::*;
use strata_core::geometry::*;
use strata_core::mat::*;
use strata_core::rigidity::stiff_energy;
use strata_core::verification::{curl_max_error, fd_gradient_max_error};

fn unit_square() -> CuboidDomain {
    CuboidDomain::unit_cube(2)
}

fn layers(eps: f64) -> LayerConfig {
    LayerConfig::new(0.5, eps).unwrap()
}

/// First bessel-function zero: the tangent angle amplitude closing the
/// wrinkle mean direction.
const BESSEL_J0_ZERO: f64 = 2.404825557695773;

#[test]
fn straight_profile_gives_identity_deformation() {
    let profile = example_uniform_bending(&CurveSpec::straight(2)).unwrap();
    let field = build_layer_deformation(&profile, layers(0.25), unit_square()).unwrap();
    for (x, y) in [(0.21, 0.07), (0.55, 0.41), (0.83, 0.96), (0.4, 0.125)] {
        let u = field.eval_u(&[x, y]);
        assert!((u.get(0) - x).abs() < 1e-13 && (u.get(1) - y).abs() < 1e-13);
        let g = field.eval_grad(&[x, y]);
        assert!(g.sub(&SquareMatrix::identity(2)).frobenius_norm() < 1e-13);
    }
    let limit = (field.limit_grad.as_ref().unwrap())(&[0.3, 0.6]);
    assert!(limit.sub(&SquareMatrix::identity(2)).frobenius_norm() < 1e-14);
}

#[test]
fn circular_bend_limit_violates_volume_constraint() {
    let profile = example_uniform_bending(&CurveSpec::circular(2)).unwrap();
    let limit = profile.limit_grad.clone();
    let mut saw_nonunit = false;
    for k in 0..9 {
        let x1 = 0.05 + 0.9 * k as f64 / 8.0;
        let det = limit(&[x1, 0.5]).det();
        let expected = (x1 - 0.5).cos();
        assert!((det - expected).abs() < 1e-12, "det = g'.e1");
        if (det - 1.0).abs() > 1e-3 {
            saw_nonunit = true;
        }
    }
    assert!(
        saw_nonunit,
        "det grad u = cos(x1 - 1/2) is not identically 1"
    );
    // |d11 f| = |g''| = 1 for the circular arc
    assert!((profile.d11_sup - 1.0).abs() < 1e-6);
}

#[test]
fn circular_bend_energy_bound_at_representative_eps() {
    let profile = example_uniform_bending(&CurveSpec::circular(2)).unwrap();
    let eps = 2f64.powi(-4);
    let field = build_layer_deformation(&profile, layers(eps), unit_square()).unwrap();
    let e = stiff_energy(&field, 2.0, &QuadratureSpec::default_desk()).unwrap();
    assert!(e <= 4.0 * eps * eps, "e = {e:.3e} exceeds 4 eps^2");
    assert!(e > 0.0, "bending energy is positive");
}

#[test]
fn volume_bending_is_locally_volume_preserving_for_circular_arc() {
    let g = CurveSpec::circular(2);
    let profile = example_volume_bending(&g).unwrap();
    let limit = profile.limit_grad.clone();
    for k in 0..25 {
        let x = [0.04 * k as f64, 0.13 + 0.03 * k as f64];
        let det = limit(&x).det();
        assert!((det - 1.0).abs() < 1e-12, "det = {det} at {x:?}");
        // the displayed determinant identity det = -g'.g^perp
        let r = x[0] / (x[1] + 1.0);
        let symbolic = -(g.dg)(r).dot(&perp(&(g.g)(r)));
        assert!((det - symbolic).abs() < 1e-12);
        assert!(((g.dg)(r).dot(&perp(&(g.g)(r))) + 1.0).abs() < 1e-12);
    }
    // the limit rotation field varies with x1
    let a = (profile.d1f)(&[0.1, 0.5]);
    let b = (profile.d1f)(&[0.9, 0.5]);
    assert!(a.sub(&b).norm() > 1e-2, "d1 R must depend on x1");
}

#[test]
fn volume_bending_straight_curve_is_volume_preserving() {
    // the horizontal line at unit height: (x_n + 1) g(x_1 / (x_n + 1))
    // = x_1 e_1 + (x_n + 1) e_n, an identity-like profile
    let line = CurveSpec::new(
        2,
        Arc::new(|t| Vector::from_slice(2, &[t, 1.0])),
        Arc::new(|_| Vector::unit(2, 0)),
        Arc::new(|_| Vector::zeros(2)),
        true,
        None,
    )
    .unwrap();
    let profile = example_volume_bending(&line).unwrap();
    let limit = profile.limit_grad.clone();
    for k in 0..9 {
        let g = limit(&[0.1 * k as f64, 0.4]);
        assert!((g.det() - 1.0).abs() < 1e-12);
        assert!(g.sub(&SquareMatrix::identity(2)).frobenius_norm() < 1e-12);
    }
}

#[test]
fn closed_wrinkle_has_vanishing_mean_direction() {
    let g = CurveSpec::wrinkle(2, BESSEL_J0_ZERO);
    let mean = g.mean_derivative();
    assert!(
        mean.norm() <= 1e-10,
        "closed wrinkle mean = {:?}",
        mean.as_slice()
    );
    let profile = example_wrinkling(&g, 1.0, 0.5, 0.0625).unwrap();
    let limit = (profile.limit_grad)(&[0.5, 0.5]);
    assert!(limit.col(0).norm() <= 1e-10, "|F e_1| = 0");
}

#[test]
fn wrinkle_second_derivative_scales_like_eps_to_minus_gamma() {
    let amplitude = std::f64::consts::FRAC_PI_2;
    let g = CurveSpec::wrinkle(2, amplitude);
    let gamma = 0.5;
    // dense-sampled |g''| sup (analytically A * 2 pi)
    let mut sup_g2 = 0.0f64;
    for k in 0..100_000 {
        sup_g2 = sup_g2.max((g.d2g)(k as f64 / 100_000.0).norm());
    }
    assert!((sup_g2 - amplitude * std::f64::consts::TAU).abs() < 1e-6);
    for eps in [0.25, 0.0625] {
        let profile = example_wrinkling(&g, 2.0, gamma, eps).unwrap();
        let expected = eps.powf(-gamma) * sup_g2;
        // the profile's sup is grid-sampled and may sit slightly below peak
        assert!(profile.d11_sup <= expected * 1.000001);
        assert!(
            profile.d11_sup >= 0.9 * expected,
            "sup |d11 f| = {} vs eps^-gamma |g''| = {expected}",
            profile.d11_sup
        );
    }
}

#[test]
fn wrinkle_compensating_beta_restores_unit_determinant() {
    let g = CurveSpec::wrinkle(2, std::f64::consts::FRAC_PI_2);
    let mean = g.mean_derivative();
    assert!(mean.norm() < 1.0, "non-degenerate wrinkle shortens");
    let beta = 1.0 / mean.get(0);
    let profile = example_wrinkling(&g, beta, 0.5, 0.0625).unwrap();
    let limit = (profile.limit_grad)(&[0.2, 0.8]);
    assert!((limit.det() - 1.0).abs() < 1e-12);
}

#[test]
fn wrinkling_rejects_bad_exponent_and_aperiodic_curve() {
    let g = CurveSpec::wrinkle(2, 1.0);
    assert!(example_wrinkling(&g, 1.0, 0.0, 0.1).is_err());
    assert!(example_wrinkling(&g, 1.0, 1.0, 0.1).is_err());
    let circular = CurveSpec::circular(2);
    assert!(example_wrinkling(&circular, 1.0, 0.5, 0.1).is_err());
}

#[test]
fn layer_rotation_constant_curve_limit_is_rigid_motion() {
    let r0 = RotationMatrix::planar(2, 0.7);
    let rc = RotationCurve::constant(r0, (-1.0, 3.0)).unwrap();
    let profile = example_layer_rotation(&rc).unwrap();
    let pair = profile
        .limit_pair
        .clone()
        .expect("rotation family carries a limit pair");
    for x in [[0.2, 0.3], [0.8, 0.9], [0.5, 0.05]] {
        let g = pair.gradient(&x);
        assert!(g.sub(r0.matrix()).frobenius_norm() < 1e-12);
        assert!((g.det() - 1.0).abs() < 1e-12);
        assert!(((pair.shear)(x[1])).norm() < 1e-14, "d = 0 for constant R");
    }
}

#[test]
fn layer_rotation_stiff_gradient_is_exactly_rotational() {
    let rc = RotationCurve::planar(2, |t| 1.3 * t, |_| 1.3, (-1.0, 3.0)).unwrap();
    let profile = example_layer_rotation(&rc).unwrap();
    for eps in [0.25, 0.0625, 0.03125] {
        let field = build_layer_deformation(&profile, layers(eps), unit_square()).unwrap();
        for k in 0..40 {
            let x = [0.025 * k as f64 + 0.01, 0.024 * k as f64 + 0.02];
            if phase(x[1], &layers(eps)) == Phase::Stiff {
                assert!(dist_so(&field.eval_grad(&x)) < 1e-14);
            }
        }
    }
}

#[test]
fn layer_rotation_varying_curve_breaks_volume_and_normal_constancy() {
    let rc = RotationCurve::planar(2, |t| 1.1 * t, |_| 1.1, (-1.0, 3.0)).unwrap();
    let profile = example_layer_rotation(&rc).unwrap();
    let pair = profile.limit_pair.clone().unwrap();
    let mut det_dev = 0.0f64;
    let mut ren_dev = 0.0f64;
    let re_n0 = (pair.rotation.sigma)(0.0).col(1);
    for k in 0..=16 {
        let t = k as f64 / 16.0;
        det_dev = det_dev.max((pair.gradient(&[0.9, t]).det() - 1.0).abs());
        ren_dev = ren_dev.max((pair.rotation.sigma)(t).col(1).sub(&re_n0).norm());
    }
    assert!(det_dev > 1e-2, "local volume condition must fail");
    assert!(ren_dev > 1e-2, "R e_n must vary");
}

#[test]
fn layer_rotation_requires_fixed_middle_axes() {
    // rotation in the e_2-e_3 plane moves e_2, violating the precondition
    let bad = RotationCurve::new(
        3,
        Arc::new(|t: f64| {
            let (s, c) = (0.5 * t).sin_cos();
            let mut m = SquareMatrix::identity(3);
            m.set(1, 1, c);
            m.set(1, 2, -s);
            m.set(2, 1, s);
            m.set(2, 2, c);
            m
        }),
        Arc::new(|t: f64| {
            let (s, c) = (0.5 * t).sin_cos();
            let mut m = SquareMatrix::zeros(3);
            m.set(1, 1, -0.5 * s);
            m.set(1, 2, -0.5 * c);
            m.set(2, 1, 0.5 * c);
            m.set(2, 2, -0.5 * s);
            m
        }),
        (-1.0, 3.0),
    )
    .unwrap();
    assert!(example_layer_rotation(&bad).is_err());
}

#[test]
fn all_families_pass_fd_gradient_consistency() {
    let eps = 0.0625;
    let cfg = layers(eps);
    let dom = unit_square();
    let mut fields: Vec<(&str, DeformationField)> = Vec::new();
    let bend = example_uniform_bending(&CurveSpec::circular(2)).unwrap();
    fields.push(("bending", build_layer_deformation(&bend, cfg, dom).unwrap()));
    let vol = example_volume_bending(&CurveSpec::circular(2)).unwrap();
    fields.push(("volume", build_layer_deformation(&vol, cfg, dom).unwrap()));
    let wr = example_wrinkling(&CurveSpec::wrinkle(2, 1.2), 1.5, 0.5, eps).unwrap();
    fields.push(("wrinkling", build_layer_deformation(&wr, cfg, dom).unwrap()));
    let rc = RotationCurve::planar(2, |t| 0.9 * t, |_| 0.9, (-1.0, 3.0)).unwrap();
    let rot = example_layer_rotation(&rc).unwrap();
    fields.push(("rotation", build_layer_deformation(&rot, cfg, dom).unwrap()));
    let f = SquareMatrix::from_rows(2, &[1.0, 0.8, 0.0, 1.0]);
    fields.push(("laminate", build_laminate(&f, cfg, dom).unwrap()));
    for (name, field) in &fields {
        let err = fd_gradient_max_error(field, 1000, 1e-5, 0xfd);
        assert!(err <= 1e-6, "{name}: fd gradient error {err:.3e}");
    }
}

#[test]
fn laminate_identity_matrix_stays_unlaminated() {
    let field = build_laminate(&SquareMatrix::identity(2), layers(0.25), unit_square()).unwrap();
    // gradient is I everywhere and u is the mean-centered identity
    for x in [[0.1, 0.2], [0.6, 0.55], [0.9, 0.83]] {
        let g = field.eval_grad(&x);
        assert!(g.sub(&SquareMatrix::identity(2)).frobenius_norm() < 1e-14);
        let u = field.eval_u(&x);
        assert!((u.get(0) - (x[0] - 0.5)).abs() < 1e-13);
        assert!((u.get(1) - (x[1] - 0.5)).abs() < 1e-13);
    }
}

#[test]
fn laminate_mean_gradient_is_f_when_eps_divides_height() {
    let f = SquareMatrix::from_rows(2, &[1.0, 1.0, 0.0, 1.0]);
    let cfg = layers(0.25);
    let dom = unit_square();
    let field = build_laminate(&f, cfg, dom).unwrap();
    let spec = QuadratureSpec::default_desk();
    let mean = layered_integral_multi(&dom, &cfg, PhaseFilter::Both, &spec, 4, |x, out| {
        let g = field.eval_grad(x);
        out.copy_from_slice(&g.row_major());
    })
    .unwrap();
    for (value, expect) in mean.iter().zip(f.row_major()) {
        assert!((value - expect).abs() < 1e-13, "mean gradient must equal F");
    }
    // mean value of u vanishes
    let mean_u = layered_integral_multi(&dom, &cfg, PhaseFilter::Both, &spec, 2, |x, out| {
        let u = field.eval_u(x);
        out.copy_from_slice(u.as_slice());
    })
    .unwrap();
    assert!(mean_u.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn laminate_volume_average_identity() {
    let r = RotationMatrix::planar(2, -0.4);
    let f = r
        .matrix()
        .add(&Vector::from_slice(2, &[0.6, -0.2]).outer(&Vector::unit(2, 1)));
    let dec = decompose_a(&f, 1e-8).unwrap();
    for lambda in [0.25, 0.5, 0.75] {
        let fl = apply_f_lambda(&dec, lambda);
        let avg = dec.rotation.scale(1.0 - lambda).add(&fl.scale(lambda));
        assert!(avg.sub(&f).frobenius_norm() < 1e-14);
    }
}

#[test]
fn reparam_phi_reference_values_and_contract() {
    let cfg = layers(1.0);
    let phi = reparam_phi(&cfg);
    assert!((phi.eval(0.25) - 0.5).abs() < 1e-15);
    assert!((phi.eval(0.75) - 1.0).abs() < 1e-15);
    assert!((phi.eval(1.25) - 1.5).abs() < 1e-15);

    for eps in [0.5, 0.125, 0.03125] {
        let cfg = layers(eps);
        let phi = reparam_phi(&cfg);
        let mut prev = phi.eval(-1.0);
        for k in 0..10_000 {
            let t = -1.0 + 3.0 * k as f64 / 9999.0;
            let v = phi.eval(t);
            assert!((v - t).abs() <= eps + 1e-12, "sup |phi - id| <= eps");
            assert!(v >= prev - 1e-12, "phi must be nondecreasing");
            prev = v;
            // derivative off breakpoints is exactly 1/lambda or 0
            let d = phi.derivative(t);
            match phase(t, &cfg) {
                Phase::Soft => assert_eq!(d, 2.0),
                Phase::Stiff => assert_eq!(d, 0.0),
            }
        }
    }
}

#[test]
fn recovery_matches_laminate_for_constant_data() {
    let r = RotationMatrix::planar(2, 0.9);
    let shear = Vector::from_slice(2, &[0.5, 0.0]);
    let f = r.matrix().add(&shear.outer(&Vector::unit(2, 1)));
    let cfg = layers(0.125);
    let dom = unit_square();
    let laminate = build_laminate(&f, cfg, dom).unwrap();
    let sigma = RotationCurve::constant(r, (-1.0, 2.0)).unwrap();
    let recovery = build_recovery_sequence(&sigma, Arc::new(move |_| shear), cfg, dom).unwrap();
    // gradients coincide exactly; values differ by a constant
    let offset = recovery
        .eval_u(&[0.3, 0.3])
        .sub(&laminate.eval_u(&[0.3, 0.3]));
    for x in [[0.1, 0.1], [0.7, 0.45], [0.9, 0.96], [0.24, 0.625]] {
        let dg = recovery.eval_grad(&x).sub(&laminate.eval_grad(&x));
        assert!(dg.frobenius_norm() < 1e-12);
        let du = recovery.eval_u(&x).sub(&laminate.eval_u(&x)).sub(&offset);
        assert!(du.norm() < 1e-10, "value offset is not constant: {du:?}");
    }
}

#[test]
fn recovery_constant_data_reproduces_rigid_motion() {
    let r = RotationMatrix::planar(2, -1.2);
    let sigma = RotationCurve::constant(r, (-1.0, 2.0)).unwrap();
    let field = build_recovery_sequence(
        &sigma,
        Arc::new(|_| Vector::zeros(2)),
        layers(0.125),
        unit_square(),
    )
    .unwrap();
    let u0 = field.eval_u(&[0.0, 0.0]);
    for x in [[0.3, 0.2], [0.8, 0.77]] {
        let g = field.eval_grad(&x);
        assert!(g.sub(r.matrix()).frobenius_norm() < 1e-14);
        let expect = r.mul_vec(&Vector::from_slice(2, &x)).add(&u0);
        assert!(field.eval_u(&x).sub(&expect).norm() < 1e-12);
    }
}

#[test]
fn recovery_gradient_has_vanishing_curl() {
    let tau = std::f64::consts::TAU;
    let sigma = RotationCurve::planar(
        2,
        move |t| 0.5 * t + 0.2 * (tau * t).sin(),
        move |t| 0.5 + 0.2 * tau * (tau * t).cos(),
        (-1.0, 2.0),
    )
    .unwrap();
    let d = Arc::new(|t: f64| {
        Vector::from_slice(2, &[0.4, 0.0]).scale(1.0 + 0.5 * (std::f64::consts::PI * t).sin())
    });
    let field = build_recovery_sequence(&sigma, d, layers(2f64.powi(-5)), unit_square()).unwrap();
    let curl = curl_max_error(&field, 1000, 1e-5, 0xc0);
    assert!(curl <= 1e-5, "curl residual {curl:.3e}");
    let fd = fd_gradient_max_error(&field, 1000, 1e-5, 0xc1);
    assert!(fd <= 1e-6, "fd gradient error {fd:.3e}");
}

#[test]
fn recovery_uses_reflection_when_phi_overshoots() {
    // interval exactly the domain extent: phi overshoots by <= eps at the top
    let sigma = RotationCurve::planar(2, |t| 0.8 * t, |_| 0.8, (0.0, 1.0)).unwrap();
    let field = build_recovery_sequence(
        &sigma,
        Arc::new(|_| Vector::zeros(2)),
        layers(0.125),
        unit_square(),
    )
    .unwrap();
    // top soft layer probes the reflected extension; gradients stay finite
    // and consistent with finite differences
    let err = fd_gradient_max_error(&field, 400, 1e-6, 0xc2);
    assert!(err <= 1e-4, "fd error with reflection {err:.3e}");
    let g = field.eval_grad(&[0.5, 0.96]);
    assert!(g.is_finite());
}

#[test]
fn three_dimensional_rotation_family_is_exactly_rigid() {
    let rc = RotationCurve::planar(3, |t| 0.8 * t, |_| 0.8, (-1.0, 3.0)).unwrap();
    let profile = example_layer_rotation(&rc).unwrap();
    let cfg = layers(0.125);
    let dom = CuboidDomain::unit_cube(3);
    let field = build_layer_deformation(&profile, cfg, dom).unwrap();
    for k in 0..30 {
        let x = [
            0.03 * k as f64 + 0.01,
            0.029 * k as f64 + 0.04,
            0.031 * k as f64 + 0.02,
        ];
        if phase(x[2], &cfg) == Phase::Stiff {
            assert!(dist_so(&field.eval_grad(&x)) < 1e-13);
        }
    }
    let err = fd_gradient_max_error(&field, 300, 1e-5, 0x3d);
    assert!(err <= 1e-6, "3d fd gradient error {err:.3e}");
}

#[test]
fn three_dimensional_laminate_mean_gradient() {
    let r = RotationMatrix::planar(3, 0.6);
    let f = r
        .matrix()
        .add(&Vector::from_slice(3, &[0.5, -0.2, 0.3]).outer(&Vector::unit(3, 2)));
    let cfg = layers(0.25);
    let dom = CuboidDomain::unit_cube(3);
    let field = build_laminate(&f, cfg, dom).unwrap();
    let spec = QuadratureSpec::new(2, 4, 3).unwrap();
    let mean = layered_integral_multi(&dom, &cfg, PhaseFilter::Both, &spec, 9, |x, out| {
        out.copy_from_slice(&field.eval_grad(x).row_major());
    })
    .unwrap();
    for (value, expect) in mean.iter().zip(f.row_major()) {
        assert!((value - expect).abs() < 1e-12);
    }
}

#[test]
fn deformation_csv_export_has_declared_columns() {
    let profile = example_uniform_bending(&CurveSpec::circular(2)).unwrap();
    let field = build_layer_deformation(&profile, layers(0.25), unit_square()).unwrap();
    let mut buf = Vec::new();
    field.export_samples_csv(&mut buf, 4).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "x_1,x_2,u_1,u_2,g_11,g_12,g_21,g_22,phase"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 16);
    assert!(rows
        .iter()
        .all(|r| r.ends_with("soft") || r.ends_with("stiff")));
}
