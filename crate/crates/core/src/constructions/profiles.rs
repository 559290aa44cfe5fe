//! The midsection-based layer deformation builder and the four example
//! profile families it is fed with: uniform bending, volume-preserving
//! bending, wrinkling, and rotation of the stiff layers.

use super::{middle_identity, CurveSpec, DeformationField, LimitPair, ProfileField, RotationCurve};
use crate::error::{Error, Result};
use crate::geometry::{midsection, phase, CuboidDomain, LayerConfig, Phase};
use crate::mat::{perp, SquareMatrix, Vector};
use std::sync::Arc;

/// Deformation that rigidly transports the profile on stiff layers,
///
/// `u(x) = f(x', [x_n]) + (x_n - [x_n]) * (d1 f)^perp(x', [x_n])`,
///
/// and interpolates affinely in the e_n-direction across soft layers. Both
/// the value and the gradient are evaluated from closed forms; the soft-phase
/// gradient carries the interpolation endpoints explicitly rather than being
/// differenced numerically.
pub fn build_layer_deformation(
    profile: &ProfileField,
    cfg: LayerConfig,
    dom: CuboidDomain,
) -> Result<DeformationField> {
    let n = profile.n();
    if dom.n() != n {
        return Err(Error::Dimension(
            "profile and domain dimension mismatch".into(),
        ));
    }
    let eps = cfg.eps();
    let lambda = cfg.lambda();

    let at_midsection = move |x: &[f64], m: f64| -> Vec<f64> {
        let mut xm = x.to_vec();
        xm[x.len() - 1] = m;
        xm
    };

    let u = {
        let p = profile.clone();
        Arc::new(move |x: &[f64]| -> Vector {
            let xn = x[n - 1];
            let m_up = midsection(xn, &cfg);
            match phase(xn, &cfg) {
                Phase::Stiff => {
                    let xm = at_midsection(x, m_up);
                    (p.f)(&xm).add(&perp(&(p.d1f)(&xm)).scale(xn - m_up))
                }
                Phase::Soft => {
                    let xm_up = at_midsection(x, m_up);
                    let xm_dn = at_midsection(x, m_up - eps);
                    let offset = 0.5 * (1.0 - lambda) * eps;
                    let u_dn = (p.f)(&xm_dn).add(&perp(&(p.d1f)(&xm_dn)).scale(offset));
                    let u_up = (p.f)(&xm_up).add(&perp(&(p.d1f)(&xm_up)).scale(-offset));
                    let s = (xn - eps * (xn / eps).ceil() + eps) / (lambda * eps);
                    u_dn.scale(1.0 - s).add(&u_up.scale(s))
                }
            }
        })
    };

    let grad = {
        let p = profile.clone();
        Arc::new(move |x: &[f64]| -> SquareMatrix {
            let xn = x[n - 1];
            let e1 = Vector::unit(n, 0);
            let en = Vector::unit(n, n - 1);
            let m_up = midsection(xn, &cfg);
            match phase(xn, &cfg) {
                Phase::Stiff => {
                    let xm = at_midsection(x, m_up);
                    let d1 = (p.d1f)(&xm);
                    d1.outer(&e1)
                        .add(&perp(&(p.d11f)(&xm)).scale(xn - m_up).outer(&e1))
                        .add(&middle_identity(n))
                        .add(&perp(&d1).outer(&en))
                }
                Phase::Soft => {
                    let xm_up = at_midsection(x, m_up);
                    let xm_dn = at_midsection(x, m_up - eps);
                    let ell = xn - eps * (xn / eps).ceil() + eps;
                    let s = ell / (lambda * eps);
                    let half_gap = 0.5 * (1.0 - lambda) * eps;
                    let d1_up = (p.d1f)(&xm_up);
                    let d1_dn = (p.d1f)(&xm_dn);
                    let d11_up = perp(&(p.d11f)(&xm_up));
                    let d11_dn = perp(&(p.d11f)(&xm_dn));

                    let col1 = d1_dn
                        .add(&d11_dn.scale(half_gap))
                        .add(&d1_up.sub(&d1_dn).scale(s))
                        .add(&d11_up.add(&d11_dn).scale(-s * half_gap));
                    let coln = (p.f)(&xm_up)
                        .sub(&(p.f)(&xm_dn))
                        .scale(1.0 / (lambda * eps))
                        .add(
                            &perp(&d1_up)
                                .add(&perp(&d1_dn))
                                .scale(-0.5 * (1.0 - lambda) / lambda),
                        );
                    col1.outer(&e1)
                        .add(&middle_identity(n))
                        .add(&coln.outer(&en))
                }
            }
        })
    };

    Ok(DeformationField::new(
        n,
        u,
        grad,
        dom,
        Some(cfg),
        Some(profile.limit_grad.clone()),
        profile.limit_pair.clone(),
    ))
}

/// Uniform bending of the stiff layers along an arc-length curve:
/// `f(x) = g(x_1) + sum_{i>=2} x_i e_i`.
pub fn example_uniform_bending(g: &CurveSpec) -> Result<ProfileField> {
    if !g.arc_length() {
        return Err(Error::InvariantViolation(
            "bending requires an arc-length curve".into(),
        ));
    }
    let n = g.n();
    let gc = g.clone();
    let f = Arc::new(move |x: &[f64]| -> Vector {
        let mut v = (gc.g)(x[0]);
        for i in 1..n {
            v.set(i, v.get(i) + x[i]);
        }
        v
    });
    let gc = g.clone();
    let d1f = Arc::new(move |x: &[f64]| (gc.dg)(x[0]));
    let gc = g.clone();
    let d11f = Arc::new(move |x: &[f64]| (gc.d2g)(x[0]));
    let dnf = Arc::new(move |_: &[f64]| Vector::unit(n, n - 1));
    let gc = g.clone();
    let limit_grad = Arc::new(move |x: &[f64]| -> SquareMatrix {
        let mut m = (gc.dg)(x[0]).outer(&Vector::unit(n, 0));
        for i in 1..n {
            m.set(i, i, m.get(i, i) + 1.0);
        }
        m
    });
    ProfileField::new(n, f, d1f, d11f, dnf, limit_grad, None)
}

/// Volume-compatible bending: `f(x) = (x_n + 1) g(x_1 / (x_n + 1)) +
/// sum_{2<=i<n} x_i e_i`. The limit determinant equals `-g' . g^perp`.
pub fn example_volume_bending(g: &CurveSpec) -> Result<ProfileField> {
    if !g.arc_length() {
        return Err(Error::InvariantViolation(
            "bending requires an arc-length curve".into(),
        ));
    }
    let n = g.n();
    let gc = g.clone();
    let f = Arc::new(move |x: &[f64]| -> Vector {
        let scale = x[n - 1] + 1.0;
        let mut v = (gc.g)(x[0] / scale).scale(scale);
        for i in 1..n - 1 {
            v.set(i, v.get(i) + x[i]);
        }
        v
    });
    let gc = g.clone();
    let d1f = Arc::new(move |x: &[f64]| (gc.dg)(x[0] / (x[n - 1] + 1.0)));
    let gc = g.clone();
    let d11f = Arc::new(move |x: &[f64]| {
        let scale = x[n - 1] + 1.0;
        (gc.d2g)(x[0] / scale).scale(1.0 / scale)
    });
    let gc = g.clone();
    let dnf = Arc::new(move |x: &[f64]| -> Vector {
        let r = x[0] / (x[n - 1] + 1.0);
        (gc.g)(r).sub(&(gc.dg)(r).scale(r))
    });
    let gc = g.clone();
    let limit_grad = Arc::new(move |x: &[f64]| -> SquareMatrix {
        let r = x[0] / (x[n - 1] + 1.0);
        let en_col = (gc.g)(r).sub(&(gc.dg)(r).scale(r));
        (gc.dg)(r)
            .outer(&Vector::unit(n, 0))
            .add(&middle_identity(n))
            .add(&en_col.outer(&Vector::unit(n, n - 1)))
    });
    ProfileField::new(n, f, d1f, d11f, dnf, limit_grad, None)
}

/// Wrinkling of the stiff layers: `f(x) = eps^gamma g(eps^-gamma x_1)
/// + beta x_n e_n + sum_{2<=i<n} x_i e_i` for a curve with 1-periodic
/// derivative. The weak limit has first column `g(1) - g(0)` of norm < 1.
pub fn example_wrinkling(g: &CurveSpec, beta: f64, gamma: f64, eps: f64) -> Result<ProfileField> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "wrinkling exponent gamma = {gamma} must lie in (0, 1)"
        )));
    }
    if g.period().is_none() {
        return Err(Error::InvariantViolation(
            "wrinkling requires a curve with periodic derivative".into(),
        ));
    }
    if !g.arc_length() {
        return Err(Error::InvariantViolation(
            "wrinkling requires an arc-length curve".into(),
        ));
    }
    let n = g.n();
    let fine = eps.powf(-gamma);
    let coarse = eps.powf(gamma);
    let gc = g.clone();
    let f = Arc::new(move |x: &[f64]| -> Vector {
        let mut v = (gc.g)(fine * x[0]).scale(coarse);
        for i in 1..n - 1 {
            v.set(i, v.get(i) + x[i]);
        }
        v.set(n - 1, v.get(n - 1) + beta * x[n - 1]);
        v
    });
    let gc = g.clone();
    let d1f = Arc::new(move |x: &[f64]| (gc.dg)(fine * x[0]));
    let gc = g.clone();
    let d11f = Arc::new(move |x: &[f64]| (gc.d2g)(fine * x[0]).scale(fine));
    let dnf = Arc::new(move |_: &[f64]| Vector::unit(n, n - 1).scale(beta));
    let gbar = g.mean_derivative();
    let limit = {
        let mut m = gbar.outer(&Vector::unit(n, 0)).add(&middle_identity(n));
        m.set(n - 1, n - 1, m.get(n - 1, n - 1) + beta);
        m
    };
    let limit_grad = Arc::new(move |_: &[f64]| limit);
    ProfileField::new(n, f, d1f, d11f, dnf, limit_grad, None)
}

/// Rotation of the stiff layers around their mid-fibers:
/// `f(x) = (x_1 - 1/2) R(x_n) e_1 + 1/2 e_1 + sum_{i>=2} x_i e_i`.
/// The second tangent derivative vanishes identically, so the stiff-phase
/// gradient is exactly rotational for every eps.
pub fn example_layer_rotation(rc: &RotationCurve) -> Result<ProfileField> {
    let n = rc.n();
    // rotations must fix e_2..e_{n-1}
    let (a, b) = rc.interval();
    for k in 0..=16 {
        let t = a + (b - a) * k as f64 / 16.0;
        let r = (rc.sigma)(t);
        for i in 1..n - 1 {
            if r.col(i).sub(&Vector::unit(n, i)).norm() > 1e-10 {
                return Err(Error::InvariantViolation(
                    "layer rotation requires R e_i = e_i for the middle axes".into(),
                ));
            }
        }
    }
    let rcc = rc.clone();
    let f = Arc::new(move |x: &[f64]| -> Vector {
        let re1 = (rcc.sigma)(x[n - 1]).col(0);
        let mut v = re1.scale(x[0] - 0.5);
        v.set(0, v.get(0) + 0.5);
        for i in 1..n {
            v.set(i, v.get(i) + x[i]);
        }
        v
    });
    let rcc = rc.clone();
    let d1f = Arc::new(move |x: &[f64]| (rcc.sigma)(x[n - 1]).col(0));
    let d11f = Arc::new(move |_: &[f64]| Vector::zeros(n));
    let rcc = rc.clone();
    let dnf = Arc::new(move |x: &[f64]| -> Vector {
        let mut v = (rcc.dsigma)(x[n - 1]).col(0).scale(x[0] - 0.5);
        v.set(n - 1, v.get(n - 1) + 1.0);
        v
    });
    let rcc = rc.clone();
    let limit_grad = Arc::new(move |x: &[f64]| -> SquareMatrix {
        let mut m = (rcc.sigma)(x[n - 1]).col(0).outer(&Vector::unit(n, 0));
        for i in 1..n {
            m.set(i, i, m.get(i, i) + 1.0);
        }
        m.add(
            &(rcc.dsigma)(x[n - 1])
                .col(0)
                .scale(x[0] - 0.5)
                .outer(&Vector::unit(n, n - 1)),
        )
    });
    // companion limit in the layered rigid form, with the shear profile
    // d(t) = -1/2 R'(t) e_1 - t R'(t) e_n
    let rcc = rc.clone();
    let shear = Arc::new(move |t: f64| -> Vector {
        let dr = (rcc.dsigma)(t);
        dr.col(0).scale(-0.5).sub(&dr.col(n - 1).scale(t))
    });
    let pair = LimitPair {
        rotation: rc.clone(),
        shear,
    };
    ProfileField::new(n, f, d1f, d11f, dnf, limit_grad, Some(pair))
}
