//! Matrix-to-scalar energy densities with growth/convexity metadata, and
//! the Saint Venant-Kirchhoff stored energy.

use crate::error::{Error, Result};
use crate::mat::{dist_so, MinorsVector, SquareMatrix};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub type DensityFn = Arc<dyn Fn(&SquareMatrix) -> f64 + Send + Sync>;
pub type DensityGradFn = Arc<dyn Fn(&SquareMatrix) -> SquareMatrix + Send + Sync>;
pub type MinorsBoundFn = Arc<dyn Fn(&MinorsVector) -> f64 + Send + Sync>;

/// Lame constants of the Saint Venant-Kirchhoff density.
#[derive(Clone, Copy, Debug)]
pub struct SvkParams {
    pub lam: f64,
    pub mu: f64,
}

impl SvkParams {
    pub fn new(lam: f64, mu: f64) -> Result<Self> {
        if !(lam > 0.0 && mu > 0.0) {
            return Err(Error::InvalidArgument(
                "Lame constants must be positive".into(),
            ));
        }
        Ok(SvkParams { lam, mu })
    }
}

/// `W_SK(F) = lam/4 |F^T F - I|^2 + mu/8 (|F|^2 - n)^2`; vanishes exactly on
/// orthogonal matrices and grows like |F|^4.
pub fn svk(f: &SquareMatrix, params: &SvkParams) -> f64 {
    let n = f.n() as f64;
    let e = f.transpose().mul(f).sub(&SquareMatrix::identity(f.n()));
    let frob2 = f.inner(f);
    0.25 * params.lam * e.inner(&e) + 0.125 * params.mu * (frob2 - n) * (frob2 - n)
}

/// Gradient of [`svk`] with respect to F.
pub fn svk_gradient(f: &SquareMatrix, params: &SvkParams) -> SquareMatrix {
    let n = f.n() as f64;
    let e = f.transpose().mul(f).sub(&SquareMatrix::identity(f.n()));
    let frob2 = f.inner(f);
    f.mul(&e)
        .scale(params.lam)
        .add(&f.scale(0.5 * params.mu * (frob2 - n)))
}

/// A matrix-to-scalar energy density with growth exponent and convexity
/// metadata. Non-negativity (and midpoint convexity, when claimed) is
/// sampled at construction.
#[derive(Clone)]
pub struct EnergyDensity {
    n: usize,
    w: DensityFn,
    grad: Option<DensityGradFn>,
    p: f64,
    convex: bool,
    /// Declared growth constants (c, C) of `c|F|^p - 1/C <= W <= C(1+|F|^p)`.
    growth: Option<(f64, f64)>,
    /// Declared local Lipschitz constant of the (H3)-type bound.
    lipschitz: Option<f64>,
    /// Declared convex-in-minors lower bound with `W(F) >= g(M(F))`.
    poly_lower: Option<MinorsBoundFn>,
    name: String,
}

impl EnergyDensity {
    #[allow(clippy::too_many_arguments)]
    pub fn custom(
        name: &str,
        n: usize,
        w: DensityFn,
        grad: Option<DensityGradFn>,
        p: f64,
        convex: bool,
        growth: Option<(f64, f64)>,
        lipschitz: Option<f64>,
        poly_lower: Option<MinorsBoundFn>,
    ) -> Result<Self> {
        let density = EnergyDensity {
            n,
            w,
            grad,
            p,
            convex,
            growth,
            lipschitz,
            poly_lower,
            name: name.to_string(),
        };
        density.validate()?;
        Ok(density)
    }

    fn validate(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
        for _ in 0..10_000 {
            let f = random_matrix_in_ball(&mut rng, self.n, 3.0);
            let v = (self.w)(&f);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvariantViolation(format!(
                    "density `{}` returned {v} (must be finite and >= 0)",
                    self.name
                )));
            }
        }
        if self.convex {
            for _ in 0..1_000 {
                let f = random_matrix_in_ball(&mut rng, self.n, 3.0);
                let g = random_matrix_in_ball(&mut rng, self.n, 3.0);
                let mid = f.add(&g).scale(0.5);
                let gap = (self.w)(&mid) - 0.5 * ((self.w)(&f) + (self.w)(&g));
                if gap > 1e-9 {
                    return Err(Error::InvariantViolation(format!(
                        "density `{}` claims convexity but violates the midpoint test by {gap:.3e}",
                        self.name
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

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn convex(&self) -> bool {
        self.convex
    }

    pub fn growth(&self) -> Option<(f64, f64)> {
        self.growth
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn poly_lower(&self) -> Option<&MinorsBoundFn> {
        self.poly_lower.as_ref()
    }

    pub fn eval(&self, f: &SquareMatrix) -> f64 {
        (self.w)(f)
    }

    /// Analytic gradient when declared, central finite differences otherwise.
    pub fn eval_grad(&self, f: &SquareMatrix) -> SquareMatrix {
        if let Some(g) = &self.grad {
            return g(f);
        }
        let n = self.n;
        let h = 1e-6 * (1.0 + f.frobenius_norm());
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut fp = *f;
                let mut fm = *f;
                fp.set(i, j, f.get(i, j) + h);
                fm.set(i, j, f.get(i, j) - h);
                out.set(i, j, ((self.w)(&fp) - (self.w)(&fm)) / (2.0 * h));
            }
        }
        out
    }

    /// `W(F) = |F|^2`: convex, p = 2, exact polyconvex self-bound.
    pub fn frobenius_squared(n: usize) -> Self {
        let w: DensityFn = Arc::new(|f: &SquareMatrix| f.inner(f));
        let grad: DensityGradFn = Arc::new(|f: &SquareMatrix| f.scale(2.0));
        let poly: MinorsBoundFn =
            Arc::new(move |m: &MinorsVector| m.components()[..n * n].iter().map(|v| v * v).sum());
        EnergyDensity::custom(
            "frobenius_squared",
            n,
            w,
            Some(grad),
            2.0,
            true,
            Some((1.0, 1.0)),
            Some(1.0),
            Some(poly),
        )
        .expect("|F|^2 satisfies its declared metadata")
    }

    /// Saint Venant-Kirchhoff, p = 4, non-convex. Growth constants follow
    /// from `(a-b)^2 >= a^2/2 - b^2` and the triangle inequality.
    pub fn svk(n: usize, params: SvkParams) -> Self {
        let nn = n as f64;
        let c = params.mu / 16.0;
        let big_c = (0.5 * params.lam + 0.25 * params.mu)
            .max(0.5 * params.lam * nn + 0.25 * params.mu * nn * nn)
            .max(8.0 / (params.mu * nn * nn));
        let w: DensityFn = Arc::new(move |f: &SquareMatrix| svk(f, &params));
        let grad: DensityGradFn = Arc::new(move |f: &SquareMatrix| svk_gradient(f, &params));
        EnergyDensity::custom(
            "svk",
            n,
            w,
            Some(grad),
            4.0,
            false,
            Some((c, big_c)),
            None,
            None,
        )
        .expect("SVK satisfies its declared metadata")
    }

    /// The stiff-phase density `dist^p(., SO(n))`; satisfies the coercivity
    /// hypothesis with constant k = 1 by definition.
    pub fn stiff_dist(n: usize, p: f64) -> Self {
        let w: DensityFn = Arc::new(move |f: &SquareMatrix| dist_so(f).powf(p));
        EnergyDensity::custom("stiff_dist", n, w, None, p, false, None, None, None)
            .expect("dist^p is non-negative")
    }

    /// `W(F) = |F|^2 + (det F)^2`: polyconvex but not convex; the declared
    /// minors bound is exact.
    pub fn frobenius_det_squared(n: usize) -> Self {
        let w: DensityFn = Arc::new(|f: &SquareMatrix| f.inner(f) + f.det() * f.det());
        let poly: MinorsBoundFn = Arc::new(move |m: &MinorsVector| {
            let fro: f64 = m.components()[..n * n].iter().map(|v| v * v).sum();
            fro + m.det() * m.det()
        });
        EnergyDensity::custom(
            "frobenius_det_squared",
            n,
            w,
            None,
            2.0,
            false,
            None,
            None,
            Some(poly),
        )
        .expect("|F|^2 + det^2 is non-negative")
    }
}

/// Uniform sample from the Frobenius ball of the given radius.
pub fn random_matrix_in_ball<R: Rng>(rng: &mut R, n: usize, radius: f64) -> SquareMatrix {
    let dim = (n * n) as f64;
    loop {
        let mut m = SquareMatrix::zeros(n);
        let mut norm2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                // Box-Muller style normal via two uniforms
                let u1: f64 = rng.random_range(1e-12..1.0);
                let u2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let g = (-2.0 * u1.ln()).sqrt() * u2.cos();
                m.set(i, j, g);
                norm2 += g * g;
            }
        }
        if norm2 <= 0.0 {
            continue;
        }
        let r: f64 = rng.random_range(0.0f64..1.0);
        let scale = radius * r.powf(1.0 / dim) / norm2.sqrt();
        return m.scale(scale);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::RotationMatrix;

    #[test]
    fn svk_reference_values() {
        let params = SvkParams::new(1.0, 1.0).unwrap();
        let r = RotationMatrix::planar(2, 0.83);
        assert!(svk(r.matrix(), &params).abs() < 1e-14);
        let r3 = RotationMatrix::planar(3, -1.9);
        assert!(svk(r3.matrix(), &params).abs() < 1e-13);
        assert!((svk(&SquareMatrix::zeros(2), &params) - 1.0).abs() < 1e-14);
        let two_i = SquareMatrix::identity(2).scale(2.0);
        assert!((svk(&two_i, &params) - 9.0).abs() < 1e-13);
    }

    #[test]
    fn svk_gradient_matches_finite_differences() {
        let params = SvkParams::new(1.3, 0.7).unwrap();
        let f = SquareMatrix::from_rows(2, &[1.2, -0.3, 0.5, 0.9]);
        let analytic = svk_gradient(&f, &params);
        let h = 1e-6;
        for i in 0..2 {
            for j in 0..2 {
                let mut fp = f;
                let mut fm = f;
                fp.set(i, j, f.get(i, j) + h);
                fm.set(i, j, f.get(i, j) - h);
                let fd = (svk(&fp, &params) - svk(&fm, &params)) / (2.0 * h);
                assert!((fd - analytic.get(i, j)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn convexity_claim_is_checked() {
        // dist^2 to SO(2) is not convex; claiming so must fail
        let w: DensityFn = Arc::new(|f: &SquareMatrix| dist_so(f).powi(2));
        let out = EnergyDensity::custom("bogus", 2, w, None, 2.0, true, None, None, None);
        assert!(out.is_err());
    }

    #[test]
    fn ball_sampling_respects_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let m = random_matrix_in_ball(&mut rng, 3, 5.0);
            assert!(m.frobenius_norm() <= 5.0 + 1e-12);
        }
    }
}
