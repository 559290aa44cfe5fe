//! Layerwise rigidity diagnostics: stiff-phase energies, per-strip
//! Procrustes rotations and rigid approximants, shift moduli of the
//! piecewise-constant rotation profile, scaling-exponent fits, the
//! thickness-independent reverse Poincare check, and incompressibility
//! reports for limit fields.

use crate::constructions::{DeformationField, LimitPair};
use crate::error::{Error, Result};
use crate::geometry::{
    gauss_rule, layered_integral, layered_integral_multi, phase_measure, strips, CuboidDomain,
    LayerConfig, PhaseFilter, QuadratureSpec, StripIndex,
};
use crate::mat::{dist_so, procrustes_rotation, RotationMatrix, SquareMatrix, Vector};
use std::io::Write;

/// Strip-indexed rotations and translations forming the rigid approximant
/// `w(x) = R_i x + b_i` on each full strip.
#[derive(Clone, Debug)]
pub struct PiecewiseRotationField {
    pub strips: Vec<(StripIndex, RotationMatrix, Vector)>,
    /// Per-strip degenerate-Procrustes flags (non-unique minimizer).
    pub degenerate: Vec<bool>,
    pub cfg: LayerConfig,
    /// Covered layering interval `[eps*i_first, eps*(i_last+1))`.
    pub interval: (f64, f64),
}

impl PiecewiseRotationField {
    pub fn n(&self) -> usize {
        self.strips[0].1.n()
    }

    /// Rotation of the strip containing `t` (piecewise constant profile).
    pub fn sigma(&self, t: f64) -> &RotationMatrix {
        let eps = self.cfg.eps();
        let i = (t / eps).floor() as i64;
        let first = self.strips[0].0 .0;
        let idx = (i - first).clamp(0, self.strips.len() as i64 - 1) as usize;
        &self.strips[idx].1
    }

    /// Rigid approximant at `x`.
    pub fn w(&self, x: &[f64]) -> Vector {
        let n = x.len();
        let eps = self.cfg.eps();
        let i = (x[n - 1] / eps).floor() as i64;
        let first = self.strips[0].0 .0;
        let idx = (i - first).clamp(0, self.strips.len() as i64 - 1) as usize;
        let (_, r, b) = &self.strips[idx];
        r.mul_vec(&Vector::from_slice(n, x)).add(b)
    }

    /// CSV rows `(i, R entries row-major, b entries)`.
    pub fn to_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let n = self.n();
        let mut header = vec!["i".to_string()];
        for i in 1..=n {
            for j in 1..=n {
                header.push(format!("r_{i}{j}"));
            }
        }
        for i in 1..=n {
            header.push(format!("b_{i}"));
        }
        writeln!(out, "{}", header.join(","))?;
        for (StripIndex(i), r, b) in &self.strips {
            let mut row = vec![i.to_string()];
            row.extend(r.row_major().iter().map(|v| format!("{v:.16e}")));
            row.extend(b.as_slice().iter().map(|v| format!("{v:.16e}")));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// `int_{stiff} dist^p(grad u, SO(n)) dx` over the field's domain.
pub fn stiff_energy(field: &DeformationField, p: f64, spec: &QuadratureSpec) -> Result<f64> {
    let cfg = field.cfg.ok_or(Error::MissingLayerConfig)?;
    layered_integral(&field.domain, &cfg, PhaseFilter::Stiff, spec, |x| {
        dist_so(&field.eval_grad(x)).powf(p)
    })
}

/// Per full strip: the Procrustes rotation of the mean stiff-phase gradient
/// and the stiff-phase mean of `u - R_i x`. The rotation extraction uses the
/// Frobenius (p = 2) fit for every p; `p` only labels downstream norms.
pub fn layerwise_procrustes(
    field: &DeformationField,
    _p: f64,
    spec: &QuadratureSpec,
) -> Result<PiecewiseRotationField> {
    let cfg = field.cfg.ok_or(Error::MissingLayerConfig)?;
    if spec.layer_subcells * spec.gauss < 2 {
        return Err(Error::InvalidArgument(
            "rotation extraction needs at least two sample planes per layer".into(),
        ));
    }
    let n = field.n();
    let decomposition = strips(&field.domain, &cfg);
    if decomposition.full.is_empty() {
        return Err(Error::InvalidArgument(
            "domain contains no full strip at this eps".into(),
        ));
    }
    let mut out = Vec::with_capacity(decomposition.full.len());
    let mut degenerate = Vec::with_capacity(decomposition.full.len());
    for (idx, strip_dom) in &decomposition.full {
        let volume = phase_measure(strip_dom, &cfg, PhaseFilter::Stiff);
        let mean_grad = layered_integral_multi(
            strip_dom,
            &cfg,
            PhaseFilter::Stiff,
            spec,
            n * n,
            |x, out| {
                let g = field.eval_grad(x);
                for (slot, v) in out.iter_mut().zip(g.row_major()) {
                    *slot = v / volume;
                }
            },
        )?;
        let (rot, flag) = procrustes_rotation(&SquareMatrix::from_rows(n, &mean_grad));
        let mean_dev =
            layered_integral_multi(strip_dom, &cfg, PhaseFilter::Stiff, spec, n, |x, out| {
                let dev = field.eval_u(x).sub(&rot.mul_vec(&Vector::from_slice(n, x)));
                for (slot, v) in out.iter_mut().zip(dev.as_slice()) {
                    *slot = v / volume;
                }
            })?;
        out.push((*idx, rot, Vector::from_slice(n, &mean_dev)));
        degenerate.push(flag);
    }
    let eps = cfg.eps();
    let interval = (
        eps * out[0].0 .0 as f64,
        eps * (out[out.len() - 1].0 .0 + 1) as f64,
    );
    Ok(PiecewiseRotationField {
        strips: out,
        degenerate,
        cfg,
        interval,
    })
}

/// Per-strip stiff-phase residuals `|grad u - R_i|_{L^p}` of an extracted
/// rotation field (the layerwise quantitative-rigidity left-hand side).
pub fn strip_residuals(
    field: &DeformationField,
    w: &PiecewiseRotationField,
    p: f64,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let cfg = field.cfg.ok_or(Error::MissingLayerConfig)?;
    let mut out = Vec::with_capacity(w.strips.len());
    for (StripIndex(i), rot, _) in &w.strips {
        let eps = cfg.eps();
        let strip_dom = field
            .domain
            .with_layer_range(eps * *i as f64, eps * (*i as f64 + 1.0))?;
        let v = layered_integral(&strip_dom, &cfg, PhaseFilter::Stiff, spec, |x| {
            field
                .eval_grad(x)
                .sub(rot.matrix())
                .frobenius_norm()
                .powf(p)
        })?;
        out.push(v.powf(1.0 / p));
    }
    Ok(out)
}

/// `|u - w|_{L^p(Q')}` where `Q'` is the domain shrunk by one strip height
/// at the bottom and top of the layering axis.
pub fn approx_error(
    field: &DeformationField,
    w: &PiecewiseRotationField,
    p: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let cfg = field.cfg.ok_or(Error::MissingLayerConfig)?;
    let inner = field
        .domain
        .shrink_layer_axis(cfg.eps())
        .map_err(|_| Error::InvalidArgument("domain too thin to shrink by one strip".into()))?;
    let v = layered_integral(&inner, &cfg, PhaseFilter::Both, spec, |x| {
        field.eval_u(x).sub(&w.w(x)).norm().powf(p)
    })?;
    Ok(v.powf(1.0 / p))
}

/// One-variable L^p shift modulus `|Sigma(. + xi) - Sigma|_{L^p(J)}` of the
/// strip rotation profile over the inner interval `J = (a, b - xi)`,
/// integrated exactly (the integrand is piecewise constant).
pub fn sigma_shift_modulus(sigma: &PiecewiseRotationField, xi: f64, p: f64) -> Result<f64> {
    let (a, b) = sigma.interval;
    if xi < 0.0 || xi >= b - a {
        return Err(Error::ShiftTooLarge { xi, len: b - a });
    }
    if xi == 0.0 {
        return Ok(0.0);
    }
    let j_end = b - xi;
    let eps = sigma.cfg.eps();
    let mut cuts = vec![a, j_end];
    let k_lo = (a / eps).floor() as i64;
    let k_hi = (b / eps).ceil() as i64;
    for k in k_lo..=k_hi {
        for c in [eps * k as f64, eps * k as f64 - xi] {
            if c > a && c < j_end {
                cuts.push(c);
            }
        }
    }
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-15 * eps);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let gap = sigma
            .sigma(mid + xi)
            .matrix()
            .sub(sigma.sigma(mid).matrix())
            .frobenius_norm();
        total += gap.powf(p) * (w[1] - w[0]);
    }
    Ok(total.powf(1.0 / p))
}

/// Scaling verdict of an energy-vs-eps sweep.
#[derive(Clone, Debug)]
pub enum ScalingVerdict {
    /// Least-squares line on (log eps, log E).
    PowerLaw {
        slope: f64,
        intercept: f64,
        /// Root-mean-square residual of log energies around the fit.
        residual: f64,
    },
    /// All energies vanish to quadrature accuracy.
    ExactRigidity,
}

/// Samples plus fitted scaling behavior.
#[derive(Clone, Debug)]
pub struct ScalingReport {
    pub samples: Vec<(f64, f64)>,
    pub verdict: ScalingVerdict,
}

/// Energies below this count as exactly rigid.
pub const EXACT_RIGIDITY_THRESHOLD: f64 = 1e-20;

impl ScalingReport {
    pub fn fitted_slope(&self) -> Option<f64> {
        match self.verdict {
            ScalingVerdict::PowerLaw { slope, .. } => Some(slope),
            ScalingVerdict::ExactRigidity => None,
        }
    }
}

/// Least-squares fit of `log E` against `log eps`; an all-vanishing sweep
/// yields the exact-rigidity verdict instead of a fit.
pub fn fit_scaling(samples: &[(f64, f64)]) -> Result<ScalingReport> {
    if samples.len() < 3 {
        return Err(Error::InvalidSamples(format!(
            "need at least 3 samples, got {}",
            samples.len()
        )));
    }
    for &(eps, e) in samples {
        if !(eps > 0.0) || !e.is_finite() || e < 0.0 {
            return Err(Error::InvalidSamples(format!(
                "sample (eps = {eps}, energy = {e}) invalid"
            )));
        }
    }
    if samples.iter().all(|&(_, e)| e <= EXACT_RIGIDITY_THRESHOLD) {
        return Ok(ScalingReport {
            samples: samples.to_vec(),
            verdict: ScalingVerdict::ExactRigidity,
        });
    }
    if samples.iter().any(|&(_, e)| e <= 0.0) {
        return Err(Error::InvalidSamples(
            "mixed zero and positive energies admit no log-log fit".into(),
        ));
    }
    let m = samples.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(eps, e) in samples {
        let x = eps.ln();
        let y = e.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = m * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::InvalidSamples("eps values are all equal".into()));
    }
    let slope = (m * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / m;
    let mut rss = 0.0;
    for &(eps, e) in samples {
        let r = e.ln() - (slope * eps.ln() + intercept);
        rss += r * r;
    }
    Ok(ScalingReport {
        samples: samples.to_vec(),
        verdict: ScalingVerdict::PowerLaw {
            slope,
            intercept,
            residual: (rss / m).sqrt(),
        },
    })
}

/// Result of the translation-minimized rotation-gap integral.
#[derive(Clone, Copy, Debug)]
pub struct ReversePoincare {
    /// `min_d int_P |(R2 - R1) x + d|^p dx`.
    pub lhs: f64,
    /// `lhs / (l^p |P| |R2 - R1|^p)`; `None` when R1 = R2.
    pub ratio: Option<f64>,
    pub degenerate: bool,
}

/// Evaluates the reverse Poincare quantity on `P = O x I` with `O` a cube of
/// side `l`. For p = 2 the optimal translation is the centered one and the
/// integral is closed-form; for other p a convex coordinate descent refines
/// the p = 2 minimizer.
pub fn reverse_poincare_check(
    r1: &RotationMatrix,
    r2: &RotationMatrix,
    p_dom: &CuboidDomain,
    p: f64,
) -> Result<ReversePoincare> {
    let n = p_dom.n();
    if r1.n() != n || r2.n() != n {
        return Err(Error::Dimension(
            "rotation/domain dimension mismatch".into(),
        ));
    }
    let l = p_dom.extent(0);
    for axis in 1..n - 1 {
        if (p_dom.extent(axis) - l).abs() > 1e-12 * l {
            return Err(Error::InvalidArgument(
                "cross-section must be a cube".into(),
            ));
        }
    }
    let a = r2.matrix().sub(r1.matrix());
    let a_norm = a.frobenius_norm();
    if a_norm <= 1e-14 {
        return Ok(ReversePoincare {
            lhs: 0.0,
            ratio: None,
            degenerate: true,
        });
    }
    let centroid = Vector::from_slice(n, &p_dom.centroid());
    let lhs = if (p - 2.0).abs() < 1e-14 {
        // second moments of the centered box are diagonal
        let ata = a.transpose().mul(&a);
        let mut v = 0.0;
        for j in 0..n {
            let w = p_dom.extent(j);
            v += ata.get(j, j) * w * w / 12.0;
        }
        v * p_dom.volume()
    } else {
        let objective = |d: &Vector| -> f64 {
            plain_cuboid_integral(p_dom, 8, 5, |x| {
                a.mul_vec(&Vector::from_slice(n, x)).add(d).norm().powf(p)
            })
        };
        let mut d = a.mul_vec(&centroid).scale(-1.0);
        let mut best = objective(&d);
        let mut step = 0.25 * l * a_norm;
        while step > 1e-10 {
            let mut improved = false;
            for axis in 0..n {
                for sign in [-1.0, 1.0] {
                    let mut cand = d;
                    cand.set(axis, d.get(axis) + sign * step);
                    let val = objective(&cand);
                    if val < best {
                        best = val;
                        d = cand;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best
    };
    let ratio = lhs / (l.powf(p) * p_dom.volume() * a_norm.powf(p));
    Ok(ReversePoincare {
        lhs,
        ratio: Some(ratio),
        degenerate: false,
    })
}

/// Tensor-Gauss quadrature on a plain cuboid (no layering).
pub fn plain_cuboid_integral<F>(dom: &CuboidDomain, cells: usize, gauss: usize, f: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let n = dom.n();
    let (nodes, weights) = gauss_rule(gauss);
    let mut acc = crate::geometry::Accumulator::default();
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    'outer: loop {
        // one cell
        let mut gp = vec![0usize; n];
        loop {
            let mut w = 1.0;
            for axis in 0..n {
                let h = dom.extent(axis) / cells as f64;
                let ca = dom.lower()[axis] + h * idx[axis] as f64;
                let half = 0.5 * h;
                x[axis] = ca + half * (1.0 + nodes[gp[axis]]);
                w *= half * weights[gp[axis]];
            }
            acc.add(w * f(&x));
            let mut axis = 0;
            loop {
                gp[axis] += 1;
                if gp[axis] < gauss {
                    break;
                }
                gp[axis] = 0;
                axis += 1;
                if axis == n {
                    break;
                }
            }
            if axis == n {
                break;
            }
        }
        let mut axis = 0;
        loop {
            idx[axis] += 1;
            if idx[axis] < cells {
                break;
            }
            idx[axis] = 0;
            axis += 1;
            if axis == n {
                break 'outer;
            }
        }
    }
    acc.value()
}

/// Incompressibility diagnostics of a limit field `u = R(x_n) x + b(x_n)`.
#[derive(Clone, Debug)]
pub struct IncompressibilityReport {
    pub det_min: f64,
    pub det_max: f64,
    /// Max |det grad u - 1| over the sample grid.
    pub det_max_dev: f64,
    pub volume_preserving: bool,
    /// Max |a_n| of the shear in `grad u = R (I + a (x) e_n)`.
    pub a_n_max: f64,
    pub a_n_vanishes: bool,
    /// Max deviation of `R(t) e_n` from its value at the interval bottom.
    pub re_n_max_dev: f64,
    pub re_n_constant: bool,
    /// For n = 2 with constant rotation: the factor Q and sampled shear
    /// amounts gamma(t) of `grad u = Q (I + gamma e_1 (x) e_2)`.
    pub shear_2d: Option<(RotationMatrix, Vec<(f64, f64)>)>,
}

/// Samples a limit pair on a grid over `dom` and reports local volume
/// preservation, vanishing normal shear, constancy of `R e_n`, and (in 2d)
/// the rotation-shear factorization.
pub fn incompressibility_report(
    pair: &LimitPair,
    dom: &CuboidDomain,
    tol: f64,
) -> IncompressibilityReport {
    let n = pair.rotation.n();
    let grid = 17usize;
    let mut det_min = f64::INFINITY;
    let mut det_max = f64::NEG_INFINITY;
    let mut det_max_dev = 0.0f64;
    let mut a_n_max = 0.0f64;

    let mut idx = vec![0usize; n];
    loop {
        let x: Vec<f64> = (0..n)
            .map(|axis| {
                dom.lower()[axis] + dom.extent(axis) * (idx[axis] as f64 + 0.5) / grid as f64
            })
            .collect();
        let g = pair.gradient(&x);
        let det = g.det();
        det_min = det_min.min(det);
        det_max = det_max.max(det);
        det_max_dev = det_max_dev.max((det - 1.0).abs());
        let r = (pair.rotation.sigma)(x[n - 1]);
        // a = R^T (grad u) e_n - e_n
        let a = r
            .transpose()
            .mul(&g)
            .col(n - 1)
            .sub(&Vector::unit(n, n - 1));
        a_n_max = a_n_max.max(a.get(n - 1).abs());
        let mut axis = 0;
        loop {
            idx[axis] += 1;
            if idx[axis] < grid {
                break;
            }
            idx[axis] = 0;
            axis += 1;
            if axis == n {
                break;
            }
        }
        if axis == n {
            break;
        }
    }

    let a_t = dom.lower()[n - 1];
    let b_t = dom.upper()[n - 1];
    let re_n0 = (pair.rotation.sigma)(a_t + 1e-12).col(n - 1);
    let mut re_n_max_dev = 0.0f64;
    let mut rot_dev = 0.0f64;
    let r0 = (pair.rotation.sigma)(a_t + 1e-12);
    for k in 0..=64 {
        let t = a_t + (b_t - a_t) * k as f64 / 64.0;
        let r = (pair.rotation.sigma)(t);
        re_n_max_dev = re_n_max_dev.max(r.col(n - 1).sub(&re_n0).norm());
        rot_dev = rot_dev.max(r.sub(&r0).frobenius_norm());
    }

    let shear_2d = if n == 2 && rot_dev <= tol {
        let q = RotationMatrix::new(r0).expect("validated rotation curve");
        let samples: Vec<(f64, f64)> = (0..=16)
            .map(|k| {
                let t = a_t + (b_t - a_t) * k as f64 / 16.0;
                let x = [dom.centroid()[0], t];
                let g = pair.gradient(&x);
                let a = q.transpose().mul(&g).col(1).sub(&Vector::unit(2, 1));
                (t, a.get(0))
            })
            .collect();
        Some((q, samples))
    } else {
        None
    };

    IncompressibilityReport {
        det_min,
        det_max,
        det_max_dev,
        volume_preserving: det_max_dev <= tol,
        a_n_max,
        a_n_vanishes: a_n_max <= tol,
        re_n_max_dev,
        re_n_constant: re_n_max_dev <= tol,
        shear_2d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_scaling_recovers_exact_power_law() {
        let samples: Vec<(f64, f64)> = (3..=8)
            .map(|k| {
                let eps = 2f64.powi(-k);
                (eps, eps * eps)
            })
            .collect();
        let report = fit_scaling(&samples).unwrap();
        match report.verdict {
            ScalingVerdict::PowerLaw {
                slope, residual, ..
            } => {
                assert!((slope - 2.0).abs() < 1e-10);
                assert!(residual < 1e-12);
            }
            _ => panic!("expected a power-law fit"),
        }
    }

    #[test]
    fn fit_scaling_exact_rigidity_verdict() {
        let samples = vec![(0.125, 0.0), (0.0625, 1e-30), (0.03125, 0.0)];
        let report = fit_scaling(&samples).unwrap();
        assert!(matches!(report.verdict, ScalingVerdict::ExactRigidity));
        assert!(report.fitted_slope().is_none());
    }

    #[test]
    fn fit_scaling_rejects_bad_samples() {
        assert!(fit_scaling(&[(0.1, 1.0), (0.05, 0.5)]).is_err());
        assert!(fit_scaling(&[(0.1, 1.0), (0.05, -0.5), (0.025, 0.1)]).is_err());
        assert!(fit_scaling(&[(0.1, 1.0), (0.05, 0.0), (0.025, 0.1)]).is_err());
    }

    #[test]
    fn reverse_poincare_closed_form_case() {
        let dom = CuboidDomain::unit_cube(2);
        let r1 = RotationMatrix::identity(2);
        let r2 = RotationMatrix::planar(2, std::f64::consts::PI);
        let out = reverse_poincare_check(&r1, &r2, &dom, 2.0).unwrap();
        assert!((out.lhs - 2.0 / 3.0).abs() < 1e-10, "lhs = {}", out.lhs);
        assert!((out.ratio.unwrap() - 1.0 / 12.0).abs() < 1e-10);
    }

    #[test]
    fn reverse_poincare_degenerate_case() {
        let dom = CuboidDomain::unit_cube(2);
        let r = RotationMatrix::planar(2, 0.3);
        let out = reverse_poincare_check(&r, &r, &dom, 2.0).unwrap();
        assert_eq!(out.lhs, 0.0);
        assert!(out.degenerate);
        assert!(out.ratio.is_none());
    }

    #[test]
    fn reverse_poincare_p_not_two_matches_p_two_shape() {
        // p = 2 via the generic path must agree with the closed form
        let dom = CuboidDomain::new(&[0.0, 0.0], &[1.0, 0.5]).unwrap();
        let r1 = RotationMatrix::identity(2);
        let r2 = RotationMatrix::planar(2, 1.1);
        let closed = reverse_poincare_check(&r1, &r2, &dom, 2.0).unwrap();
        let generic = reverse_poincare_check(&r1, &r2, &dom, 2.0 + 1e-13).unwrap();
        assert!((closed.lhs - generic.lhs).abs() < 1e-6 * closed.lhs.max(1e-30));
    }
}
