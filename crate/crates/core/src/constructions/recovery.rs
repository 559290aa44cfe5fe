//! Laminates of admissible matrices, the stop-and-go reparametrization, and
//! recovery sequences whose gradients are exact rotations on stiff layers.

use super::{CurveFn, DeformationField, LimitPair, RotationCurve};
use crate::error::{Error, Result};
use crate::geometry::{layer_panels_1d, phase, CuboidDomain, LayerConfig, Phase};
use crate::mat::{apply_f_lambda, decompose_a, SquareMatrix, Vector, DEFAULT_ADMISSIBLE_TOL};
use std::sync::Arc;

/// Piecewise-affine reparametrization that stops on stiff intervals
/// (value `eps * ceil(t/eps)`) and advances with slope `1/lambda` on soft
/// intervals. Continuous, nondecreasing, `sup |phi - id| <= eps`.
#[derive(Clone, Copy, Debug)]
pub struct ReparamPhi {
    eps: f64,
    lambda: f64,
}

impl ReparamPhi {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = (t / self.eps).floor();
        let s = t - self.eps * k;
        if s < self.lambda * self.eps {
            self.eps * k + s / self.lambda
        } else {
            self.eps * (k + 1.0)
        }
    }

    /// Derivative off breakpoints: `1/lambda` on soft, 0 on stiff.
    pub fn derivative(&self, t: f64) -> f64 {
        let cfg = LayerConfig::new(self.lambda, self.eps).expect("validated on construction");
        match phase(t, &cfg) {
            Phase::Soft => 1.0 / self.lambda,
            Phase::Stiff => 0.0,
        }
    }

    /// Exact integral over `[a, b]` (phi is affine between breakpoints).
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let mut cuts = vec![a];
        let k_lo = (a / self.eps).floor() as i64;
        let k_hi = (b / self.eps).ceil() as i64;
        for k in k_lo..=k_hi {
            for c in [self.eps * k as f64, self.eps * (k as f64 + self.lambda)] {
                if c > a && c < b {
                    cuts.push(c);
                }
            }
        }
        cuts.push(b);
        cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += 0.5 * (self.eval(w[0]) + self.eval(w[1])) * (w[1] - w[0]);
        }
        total
    }
}

/// The reparametrization for a layer configuration.
pub fn reparam_phi(cfg: &LayerConfig) -> ReparamPhi {
    ReparamPhi {
        eps: cfg.eps(),
        lambda: cfg.lambda(),
    }
}

/// Continuous piecewise-affine laminate with gradient exactly `R_F` on stiff
/// layers and `F_lambda` on soft layers, mean value zero over the domain.
pub fn build_laminate(
    f: &SquareMatrix,
    cfg: LayerConfig,
    dom: CuboidDomain,
) -> Result<DeformationField> {
    let n = f.n();
    if dom.n() != n {
        return Err(Error::Dimension(
            "matrix and domain dimension mismatch".into(),
        ));
    }
    let dec = decompose_a(f, DEFAULT_ADMISSIBLE_TOL)?;
    let rot = *dec.rotation.matrix();
    let shear = dec.shear;
    let f_soft = apply_f_lambda(&dec, cfg.lambda());
    let phi = reparam_phi(&cfg);

    let a_n = dom.lower()[n - 1];
    let b_n = dom.upper()[n - 1];
    let phi_mean = phi.integral(a_n, b_n) / (b_n - a_n);
    let centroid = Vector::from_slice(n, &dom.centroid());
    let mean = rot.mul_vec(&centroid).add(&shear.scale(phi_mean));

    let u = Arc::new(move |x: &[f64]| -> Vector {
        let xv = Vector::from_slice(x.len(), x);
        rot.mul_vec(&xv)
            .add(&shear.scale(phi.eval(x[x.len() - 1])))
            .sub(&mean)
    });
    let grad = Arc::new(move |x: &[f64]| -> SquareMatrix {
        match phase(x[x.len() - 1], &cfg) {
            Phase::Stiff => rot,
            Phase::Soft => f_soft,
        }
    });

    let fmat = *f;
    let limit_grad = Arc::new(move |_: &[f64]| fmat);
    let pair = LimitPair {
        rotation: RotationCurve::constant(dec.rotation, (a_n - 1.0, b_n + 1.0))?,
        shear: Arc::new(move |_| shear),
    };
    Ok(DeformationField::new(
        n,
        u,
        grad,
        dom,
        Some(cfg),
        Some(limit_grad),
        Some(pair),
    ))
}

/// Cumulative soft-phase integral `b(t) = (1/lambda) int_a^t d(s) 1_soft ds`,
/// built from per-layer composite Simpson panels.
struct SoftCumulative {
    lambda: f64,
    /// (panel start, panel end, soft?, cumulative value at panel start)
    panels: Vec<(f64, f64, bool, Vector)>,
}

impl SoftCumulative {
    fn build(d: &CurveFn, cfg: &LayerConfig, a: f64, b: f64, n: usize) -> Self {
        let mut panels = Vec::new();
        let mut cum = Vector::zeros(n);
        for p in layer_panels_1d(a, b, cfg) {
            let soft = matches!(p.phase, Phase::Soft);
            panels.push((p.a, p.b, soft, cum));
            if soft {
                cum = cum.add(&Self::simpson(d, p.a, p.b, 16).scale(1.0 / cfg.lambda()));
            }
        }
        SoftCumulative {
            lambda: cfg.lambda(),
            panels,
        }
    }

    /// Composite Simpson with an even number of subdivisions.
    fn simpson(d: &CurveFn, a: f64, b: f64, subdivisions: usize) -> Vector {
        debug_assert!(subdivisions % 2 == 0);
        let h = (b - a) / subdivisions as f64;
        let mut acc = d(a).add(&d(b));
        for k in 1..subdivisions {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc = acc.add_scaled(&d(a + h * k as f64), w);
        }
        acc.scale(h / 3.0)
    }

    fn eval(&self, d: &CurveFn, t: f64) -> Vector {
        let idx = match self
            .panels
            .binary_search_by(|p| p.0.partial_cmp(&t).expect("finite breakpoints"))
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let (start, end, soft, base) = &self.panels[idx];
        let tt = t.min(*end);
        if !soft || tt <= *start {
            *base
        } else {
            base.add(&Self::simpson(d, *start, tt, 8).scale(1.0 / self.lambda))
        }
    }
}

/// Recovery-family deformation for a limit in the layered rigid form:
/// `u(x) = Sigma(phi_eps(x_n)) x + b_eps(x_n)` with the cumulative soft
/// integral `b_eps` chosen so that the gradient is `Sigma(phi_eps)` on stiff
/// layers and `R_eps + (d_n R_eps) x (x) e_n + (1/lambda) d (x) e_n` on soft
/// layers. `Sigma` is extended by reflection where `phi_eps` overshoots.
pub fn build_recovery_sequence(
    sigma: &RotationCurve,
    d: CurveFn,
    cfg: LayerConfig,
    dom: CuboidDomain,
) -> Result<DeformationField> {
    let n = sigma.n();
    if dom.n() != n {
        return Err(Error::Dimension(
            "curve and domain dimension mismatch".into(),
        ));
    }
    let (ia, ib) = sigma.interval();
    let a_n = dom.lower()[n - 1];
    let b_n = dom.upper()[n - 1];
    if a_n < ia || b_n > ib {
        return Err(Error::InvalidArgument(
            "rotation curve must cover the domain's layering extent".into(),
        ));
    }
    if cfg.eps() > ib - ia {
        return Err(Error::InvalidArgument(
            "layer period exceeds the rotation-curve interval".into(),
        ));
    }

    let reflect = move |t: f64| -> (f64, f64) {
        if t > ib {
            (2.0 * ib - t, -1.0)
        } else if t < ia {
            (2.0 * ia - t, -1.0)
        } else {
            (t, 1.0)
        }
    };
    let phi = reparam_phi(&cfg);
    let cumulative = Arc::new(SoftCumulative::build(&d, &cfg, a_n, b_n, n));

    let sig = sigma.sigma.clone();
    let dcl = d.clone();
    let cum = Arc::clone(&cumulative);
    let u = Arc::new(move |x: &[f64]| -> Vector {
        let t = x[n - 1];
        let (tr, _) = reflect(phi.eval(t));
        let xv = Vector::from_slice(n, x);
        sig(tr).mul_vec(&xv).add(&cum.eval(&dcl, t))
    });

    let sig = sigma.sigma.clone();
    let dsig = sigma.dsigma.clone();
    let dcl = d.clone();
    let lambda = cfg.lambda();
    let grad = Arc::new(move |x: &[f64]| -> SquareMatrix {
        let t = x[n - 1];
        let (tr, orient) = reflect(phi.eval(t));
        let r_eps = sig(tr);
        match phase(t, &cfg) {
            Phase::Stiff => r_eps,
            Phase::Soft => {
                let xv = Vector::from_slice(n, x);
                let dr = dsig(tr).scale(orient / lambda);
                let coln = dr.mul_vec(&xv).add(&dcl(t).scale(1.0 / lambda));
                r_eps.add(&coln.outer(&Vector::unit(n, n - 1)))
            }
        }
    });

    let sig = sigma.sigma.clone();
    let dsig = sigma.dsigma.clone();
    let dcl = d.clone();
    let limit_grad = Arc::new(move |x: &[f64]| -> SquareMatrix {
        let t = x[n - 1];
        let xv = Vector::from_slice(n, x);
        let coln = dsig(t).mul_vec(&xv).add(&dcl(t));
        sig(t).add(&coln.outer(&Vector::unit(n, n - 1)))
    });
    let pair = LimitPair {
        rotation: sigma.clone(),
        shear: d,
    };
    Ok(DeformationField::new(
        n,
        u,
        grad,
        dom,
        Some(cfg),
        Some(limit_grad),
        Some(pair),
    ))
}
