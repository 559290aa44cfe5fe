//! Explicit deformation families on layered domains: the midsection-based
//! layer deformation builder, the bending / wrinkling / rotation example
//! profiles, laminates of admissible matrices, the stop-and-go
//! reparametrization, and recovery sequences with exactly rotational
//! gradients on the stiff layers.

mod profiles;
mod recovery;

pub use profiles::{
    build_layer_deformation, example_layer_rotation, example_uniform_bending,
    example_volume_bending, example_wrinkling,
};
pub use recovery::{build_laminate, build_recovery_sequence, reparam_phi, ReparamPhi};

use crate::error::{Error, Result};
use crate::geometry::{phase, CuboidDomain, LayerConfig, Phase};
use crate::mat::{RotationMatrix, SquareMatrix, Vector};
use std::io::Write;
use std::sync::Arc;

pub type CurveFn = Arc<dyn Fn(f64) -> Vector + Send + Sync>;
pub type MatCurveFn = Arc<dyn Fn(f64) -> SquareMatrix + Send + Sync>;
pub type PointFn = Arc<dyn Fn(&[f64]) -> Vector + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64]) -> SquareMatrix + Send + Sync>;

/// A planar curve `g: R -> span{e_1, e_n}` with first and second derivative
/// callables. Curves must evaluate slightly beyond their nominal parameter
/// interval; all built-in curves are globally analytic or quasi-periodic.
#[derive(Clone)]
pub struct CurveSpec {
    n: usize,
    pub g: CurveFn,
    pub dg: CurveFn,
    pub d2g: CurveFn,
    arc_length: bool,
    period: Option<f64>,
}

impl CurveSpec {
    pub fn new(
        n: usize,
        g: CurveFn,
        dg: CurveFn,
        d2g: CurveFn,
        arc_length: bool,
        period: Option<f64>,
    ) -> Result<Self> {
        let spec = CurveSpec {
            n,
            g,
            dg,
            d2g,
            arc_length,
            period,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        const SAMPLES: usize = 1000;
        for k in 0..=SAMPLES {
            let t = k as f64 / SAMPLES as f64;
            let v = (self.g)(t);
            let dv = (self.dg)(t);
            if v.n() != self.n || dv.n() != self.n {
                return Err(Error::Dimension("curve output dimension mismatch".into()));
            }
            for i in 1..self.n - 1 {
                if v.get(i).abs() > 1e-10 || dv.get(i).abs() > 1e-10 {
                    return Err(Error::InvariantViolation(format!(
                        "curve leaves span{{e_1, e_n}} at t = {t}"
                    )));
                }
            }
            if self.arc_length && (dv.norm() - 1.0).abs() > 1e-8 {
                return Err(Error::InvariantViolation(format!(
                    "|g'({t})| = {} violates the arc-length claim",
                    dv.norm()
                )));
            }
            if let Some(p) = self.period {
                let shifted = (self.dg)(t + p);
                if shifted.sub(&dv).norm() > 1e-8 {
                    return Err(Error::InvariantViolation(format!(
                        "g' is not {p}-periodic at t = {t}"
                    )));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn arc_length(&self) -> bool {
        self.arc_length
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    /// Mean derivative over one unit interval, `g(1) - g(0)`.
    pub fn mean_derivative(&self) -> Vector {
        (self.g)(1.0).sub(&(self.g)(0.0))
    }

    /// Straight line `g(t) = t e_1`.
    pub fn straight(n: usize) -> Self {
        CurveSpec::new(
            n,
            Arc::new(move |t| Vector::unit(n, 0).scale(t)),
            Arc::new(move |_| Vector::unit(n, 0)),
            Arc::new(move |_| Vector::zeros(n)),
            true,
            None,
        )
        .expect("straight line is arc length")
    }

    /// Circular arc `g(t) = sin(t - 1/2) e_1 + cos(t - 1/2) e_n`.
    pub fn circular(n: usize) -> Self {
        let mk = move |f: fn(f64) -> (f64, f64)| {
            Arc::new(move |t: f64| {
                let (a, b) = f(t - 0.5);
                let mut v = Vector::zeros(n);
                v.set(0, a);
                v.set(n - 1, b);
                v
            }) as CurveFn
        };
        CurveSpec::new(
            n,
            mk(|s| (s.sin(), s.cos())),
            mk(|s| (s.cos(), -s.sin())),
            mk(|s| (-s.sin(), -s.cos())),
            true,
            None,
        )
        .expect("circular arc is arc length")
    }

    /// Arc-length wrinkle with 1-periodic derivative: the tangent angle is
    /// `theta(t) = amplitude * sin(2 pi t)`, so `|g'| = 1` exactly and the
    /// mean derivative has norm strictly below one for amplitude != 0.
    /// Values of `g` come from a precomputed cumulative table plus exact
    /// quasi-periodic reduction, accurate to ~1e-14.
    pub fn wrinkle(n: usize, amplitude: f64) -> Self {
        const KNOTS: usize = 2048;
        let tangent = move |t: f64| -> Vector {
            let theta = amplitude * (2.0 * std::f64::consts::PI * t).sin();
            let mut v = Vector::zeros(n);
            v.set(0, theta.cos());
            v.set(n - 1, theta.sin());
            v
        };
        // cumulative integral of the tangent over [0, 1]
        let (nodes, weights) = crate::geometry::gauss_rule(5);
        let mut table = Vec::with_capacity(KNOTS + 1);
        table.push(Vector::zeros(n));
        let h = 1.0 / KNOTS as f64;
        for k in 0..KNOTS {
            let a = h * k as f64;
            let mut inc = Vector::zeros(n);
            for (x, w) in nodes.iter().zip(weights) {
                let t = a + 0.5 * h * (1.0 + x);
                inc = inc.add_scaled(&tangent(t), 0.5 * h * w);
            }
            let prev = *table.last().expect("table is non-empty");
            table.push(prev.add(&inc));
        }
        let table = Arc::new(table);
        let gbar = *table.last().expect("table is non-empty");

        let eval_g = {
            let table = Arc::clone(&table);
            move |t: f64| -> Vector {
                let k = t.floor();
                let r = t - k;
                let j = ((r * KNOTS as f64).floor() as usize).min(KNOTS - 1);
                let t_knot = h * j as f64;
                let mut partial = table[j];
                if r > t_knot {
                    let mut inc = Vector::zeros(n);
                    let half = 0.5 * (r - t_knot);
                    for (x, w) in nodes.iter().zip(weights) {
                        let s = t_knot + half * (1.0 + x);
                        inc = inc.add_scaled(&tangent(s), half * w);
                    }
                    partial = partial.add(&inc);
                }
                partial.add(&gbar.scale(k))
            }
        };
        let dtangent = move |t: f64| -> Vector {
            let two_pi = 2.0 * std::f64::consts::PI;
            let theta = amplitude * (two_pi * t).sin();
            let dtheta = amplitude * two_pi * (two_pi * t).cos();
            let mut v = Vector::zeros(n);
            v.set(0, -theta.sin() * dtheta);
            v.set(n - 1, theta.cos() * dtheta);
            v
        };
        CurveSpec::new(
            n,
            Arc::new(eval_g),
            Arc::new(tangent),
            Arc::new(dtangent),
            true,
            Some(1.0),
        )
        .expect("wrinkle tangent has unit length by construction")
    }
}

/// A rotation-valued curve with derivative, validated on samples.
#[derive(Clone)]
pub struct RotationCurve {
    n: usize,
    pub sigma: MatCurveFn,
    pub dsigma: MatCurveFn,
    interval: (f64, f64),
}

impl RotationCurve {
    pub fn new(
        n: usize,
        sigma: MatCurveFn,
        dsigma: MatCurveFn,
        interval: (f64, f64),
    ) -> Result<Self> {
        if !(interval.0 < interval.1) {
            return Err(Error::InvalidArgument(
                "empty rotation-curve interval".into(),
            ));
        }
        let curve = RotationCurve {
            n,
            sigma,
            dsigma,
            interval,
        };
        curve.validate()?;
        Ok(curve)
    }

    fn validate(&self) -> Result<()> {
        const SAMPLES: usize = 100;
        let (a, b) = self.interval;
        for k in 0..=SAMPLES {
            let t = a + (b - a) * k as f64 / SAMPLES as f64;
            RotationMatrix::new((self.sigma)(t))?;
        }
        // light finite-difference consistency of the declared derivative
        let h = 1e-6 * (b - a);
        for k in 1..8 {
            let t = a + (b - a) * k as f64 / 8.0;
            let fd = (self.sigma)(t + h).sub(&(self.sigma)(t - h)).scale(0.5 / h);
            let dev = fd.sub(&(self.dsigma)(t)).frobenius_norm();
            if dev > 1e-4 * (1.0 + (self.dsigma)(t).frobenius_norm()) {
                return Err(Error::InvariantViolation(format!(
                    "rotation-curve derivative inconsistent at t = {t} (dev {dev:.3e})"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn rotation_at(&self, t: f64) -> RotationMatrix {
        RotationMatrix::new((self.sigma)(t)).expect("validated rotation curve")
    }

    /// Constant curve.
    pub fn constant(rot: RotationMatrix, interval: (f64, f64)) -> Result<Self> {
        let n = rot.n();
        let m = *rot.matrix();
        RotationCurve::new(
            n,
            Arc::new(move |_| m),
            Arc::new(move |_| SquareMatrix::zeros(n)),
            interval,
        )
    }

    /// Planar rotation in the e_1-e_n plane with angle profile `theta(t)`.
    pub fn planar<F, G>(n: usize, theta: F, dtheta: G, interval: (f64, f64)) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let theta = Arc::new(theta);
        let th = Arc::clone(&theta);
        let sigma = Arc::new(move |t: f64| *RotationMatrix::planar(n, th(t)).matrix());
        let th = Arc::clone(&theta);
        let dsigma = Arc::new(move |t: f64| {
            let (s, c) = th(t).sin_cos();
            let rate = dtheta(t);
            let mut m = SquareMatrix::zeros(n);
            m.set(0, 0, -s * rate);
            m.set(0, n - 1, -c * rate);
            m.set(n - 1, 0, c * rate);
            m.set(n - 1, n - 1, -s * rate);
            m
        });
        RotationCurve::new(n, sigma, dsigma, interval)
    }
}

/// Limit data in the layered rigid form `u = R(x_n) x + b(x_n)`: the
/// rotation curve and the shear profile `d(x_n)` entering
/// `grad u = R + (d_n R) x (x) e_n + d (x) e_n`.
#[derive(Clone)]
pub struct LimitPair {
    pub rotation: RotationCurve,
    pub shear: CurveFn,
}

impl LimitPair {
    /// Limit gradient at `x`.
    pub fn gradient(&self, x: &[f64]) -> SquareMatrix {
        let n = self.rotation.n();
        let t = x[n - 1];
        let xv = Vector::from_slice(n, x);
        let en = Vector::unit(n, n - 1);
        let r = (self.rotation.sigma)(t);
        let dr = (self.rotation.dsigma)(t);
        r.add(&dr.mul_vec(&xv).add(&(self.shear)(t)).outer(&en))
    }

    /// Soft-phase compensated limit gradient `(grad u)_lambda` at `x`.
    pub fn gradient_lambda(&self, x: &[f64], lambda: f64) -> SquareMatrix {
        let n = self.rotation.n();
        let t = x[n - 1];
        let xv = Vector::from_slice(n, x);
        let en = Vector::unit(n, n - 1);
        let r = (self.rotation.sigma)(t);
        let dr = (self.rotation.dsigma)(t);
        let shear = dr.mul_vec(&xv).add(&(self.shear)(t)).scale(1.0 / lambda);
        r.add(&shear.outer(&en))
    }
}

/// A profile `f` on the reference slab with the partial derivatives the
/// layer-deformation builder needs, plus the companion limit fields of the
/// family it generates.
#[derive(Clone)]
pub struct ProfileField {
    n: usize,
    pub f: PointFn,
    pub d1f: PointFn,
    pub d11f: PointFn,
    pub dnf: PointFn,
    pub limit_grad: GradFn,
    pub limit_pair: Option<LimitPair>,
    /// Sampled sup of |d11f| over the reference slab (for energy bounds).
    pub d11_sup: f64,
}

impl ProfileField {
    pub fn new(
        n: usize,
        f: PointFn,
        d1f: PointFn,
        d11f: PointFn,
        dnf: PointFn,
        limit_grad: GradFn,
        limit_pair: Option<LimitPair>,
    ) -> Result<Self> {
        let mut profile = ProfileField {
            n,
            f,
            d1f,
            d11f,
            dnf,
            limit_grad,
            limit_pair,
            d11_sup: 0.0,
        };
        profile.d11_sup = profile.validate()?;
        Ok(profile)
    }

    /// Samples the reference slab `[0,1]^{n-1} x [0,2]`: unit first tangent
    /// inside span{e_1, e_n}, and finite-difference consistency of the
    /// declared partials. Returns the sampled sup of |d11f|.
    fn validate(&self) -> Result<f64> {
        let n = self.n;
        let grid = 32usize;
        let mut sup = 0.0f64;
        let mut x = vec![0.5; n];
        for i in 0..grid {
            for j in 0..grid {
                x[0] = (i as f64 + 0.5) / grid as f64;
                x[n - 1] = 2.0 * (j as f64 + 0.5) / grid as f64;
                let d1 = (self.d1f)(&x);
                if (d1.norm() - 1.0).abs() > 1e-8 {
                    return Err(Error::InvariantViolation(format!(
                        "|d1 f| = {} at ({}, {})",
                        d1.norm(),
                        x[0],
                        x[n - 1]
                    )));
                }
                for mid in 1..n - 1 {
                    if d1.get(mid).abs() > 1e-8 {
                        return Err(Error::InvariantViolation(
                            "d1 f leaves span{e_1, e_n}".into(),
                        ));
                    }
                }
                sup = sup.max((self.d11f)(&x).norm());
            }
        }
        // light FD consistency of the declared partials
        let h = 1e-6;
        for k in 0..25 {
            x[0] = 0.1 + 0.8 * (k as f64 / 24.0);
            x[n - 1] = 0.15 + 1.7 * ((k * 7 % 25) as f64 / 24.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[0] += h;
            xm[0] -= h;
            let fd1 = (self.f)(&xp).sub(&(self.f)(&xm)).scale(0.5 / h);
            if fd1.sub(&(self.d1f)(&x)).norm() > 1e-4 {
                return Err(Error::InvariantViolation("d1 f inconsistent with f".into()));
            }
            let fd11 = (self.d1f)(&xp).sub(&(self.d1f)(&xm)).scale(0.5 / h);
            if fd11.sub(&(self.d11f)(&x)).norm() > 1e-4 * (1.0 + sup) {
                return Err(Error::InvariantViolation(
                    "d11 f inconsistent with d1 f".into(),
                ));
            }
            xp[0] = x[0];
            xm[0] = x[0];
            xp[n - 1] = x[n - 1] + h;
            xm[n - 1] = x[n - 1] - h;
            let fdn = (self.f)(&xp).sub(&(self.f)(&xm)).scale(0.5 / h);
            if fdn.sub(&(self.dnf)(&x)).norm() > 1e-4 * (1.0 + fdn.norm()) {
                return Err(Error::InvariantViolation("dn f inconsistent with f".into()));
            }
        }
        Ok(sup)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }
}

/// A deformation `x -> (u(x), grad u(x))` with piecewise-analytic evaluation
/// respecting layer boundaries, plus optional companion limit fields.
#[derive(Clone)]
pub struct DeformationField {
    n: usize,
    pub u: PointFn,
    pub grad: GradFn,
    pub domain: CuboidDomain,
    pub cfg: Option<LayerConfig>,
    pub limit_grad: Option<GradFn>,
    pub limit_pair: Option<LimitPair>,
}

impl DeformationField {
    pub fn new(
        n: usize,
        u: PointFn,
        grad: GradFn,
        domain: CuboidDomain,
        cfg: Option<LayerConfig>,
        limit_grad: Option<GradFn>,
        limit_pair: Option<LimitPair>,
    ) -> Self {
        DeformationField {
            n,
            u,
            grad,
            domain,
            cfg,
            limit_grad,
            limit_pair,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eval_u(&self, x: &[f64]) -> Vector {
        (self.u)(x)
    }

    pub fn eval_grad(&self, x: &[f64]) -> SquareMatrix {
        (self.grad)(x)
    }

    /// Writes samples on a uniform cell-center grid as CSV with columns
    /// `x_1..x_n, u_1..u_n, g_11..g_nn, phase`.
    pub fn export_samples_csv<W: Write>(&self, out: &mut W, cells_per_axis: usize) -> Result<()> {
        let n = self.n;
        let mut header = Vec::new();
        for i in 1..=n {
            header.push(format!("x_{i}"));
        }
        for i in 1..=n {
            header.push(format!("u_{i}"));
        }
        for i in 1..=n {
            for j in 1..=n {
                header.push(format!("g_{i}{j}"));
            }
        }
        header.push("phase".into());
        writeln!(out, "{}", header.join(","))?;

        let mut idx = vec![0usize; n];
        loop {
            let x: Vec<f64> = (0..n)
                .map(|axis| {
                    self.domain.lower()[axis]
                        + self.domain.extent(axis) * (idx[axis] as f64 + 0.5)
                            / cells_per_axis as f64
                })
                .collect();
            let u = self.eval_u(&x);
            let g = self.eval_grad(&x);
            let mut row: Vec<String> = x.iter().map(|v| format!("{v:.16e}")).collect();
            row.extend(u.as_slice().iter().map(|v| format!("{v:.16e}")));
            row.extend(g.row_major().iter().map(|v| format!("{v:.16e}")));
            row.push(match self.cfg {
                Some(cfg) => match phase(x[n - 1], &cfg) {
                    Phase::Soft => "soft".into(),
                    Phase::Stiff => "stiff".into(),
                },
                None => "none".to_string(),
            });
            writeln!(out, "{}", row.join(","))?;

            let mut axis = 0;
            loop {
                idx[axis] += 1;
                if idx[axis] < cells_per_axis {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
                if axis == n {
                    return Ok(());
                }
            }
        }
    }
}

/// `sum_{i=2}^{n-1} e_i (x) e_i` (empty at n = 2).
pub(crate) fn middle_identity(n: usize) -> SquareMatrix {
    let mut m = SquareMatrix::zeros(n);
    for i in 1..n - 1 {
        m.set(i, i, 1.0);
    }
    m
}
