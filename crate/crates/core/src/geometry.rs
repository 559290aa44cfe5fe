//! The eps-periodic stiff/soft layering of a cuboid domain: phase queries,
//! the midsection projection, strip indexing, and layer-aligned quadrature.
//!
//! The unit cell is `(0,1]^n` with the soft phase occupying
//! `(0,1]^{n-1} x (0,lambda)`; layering is along the last axis. Integration
//! cells never straddle a layer boundary, and summation is compensated so
//! results do not depend on evaluation order.

use crate::error::{Error, Result};

/// Relative soft fraction and layer period of the stiff/soft layering.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerConfig {
    lambda: f64,
    eps: f64,
}

impl LayerConfig {
    pub fn new(lambda: f64, eps: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "soft fraction lambda = {lambda} must lie in (0, 1)"
            )));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "layer period eps = {eps} must be positive"
            )));
        }
        Ok(LayerConfig { lambda, eps })
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[inline]
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        LayerConfig::new(self.lambda, eps)
    }
}

/// Material phase of a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Soft,
    Stiff,
}

/// Phase restriction of an integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseFilter {
    Soft,
    Stiff,
    Both,
}

impl PhaseFilter {
    fn admits(&self, phase: Phase) -> bool {
        matches!(
            (self, phase),
            (PhaseFilter::Both, _)
                | (PhaseFilter::Soft, Phase::Soft)
                | (PhaseFilter::Stiff, Phase::Stiff)
        )
    }
}

/// Phase of the coordinate `x_n`: soft iff the fractional part of `x_n/eps`
/// lies strictly inside `(0, lambda)`. The boundary values 0 and lambda are
/// stiff, matching the half-open periodicity cell.
pub fn phase(xn: f64, cfg: &LayerConfig) -> Phase {
    let frac = (xn / cfg.eps).rem_euclid(1.0);
    if frac > 0.0 && frac < cfg.lambda {
        Phase::Soft
    } else {
        Phase::Stiff
    }
}

/// Midsection of the closest stiff layer lying above:
/// `[t]_eps = eps*ceil(t/eps) - eps + (1+lambda)/2 * eps`.
pub fn midsection(t: f64, cfg: &LayerConfig) -> f64 {
    let eps = cfg.eps;
    eps * (t / eps).ceil() - eps + 0.5 * (1.0 + cfg.lambda) * eps
}

/// Axis-aligned open cuboid, validated non-degenerate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CuboidDomain {
    n: usize,
    lower: [f64; 3],
    upper: [f64; 3],
}

impl CuboidDomain {
    pub fn new(lower: &[f64], upper: &[f64]) -> Result<Self> {
        let n = lower.len();
        if n != upper.len() || !(2..=3).contains(&n) {
            return Err(Error::Dimension(format!(
                "cuboid needs matching bounds of dimension 2 or 3, got {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for i in 0..n {
            if !(lower[i].is_finite() && upper[i].is_finite()) || lower[i] >= upper[i] {
                return Err(Error::DegenerateDomain(format!(
                    "axis {i}: [{}, {}] has non-positive extent",
                    lower[i], upper[i]
                )));
            }
            lo[i] = lower[i];
            hi[i] = upper[i];
        }
        Ok(CuboidDomain {
            n,
            lower: lo,
            upper: hi,
        })
    }

    /// The open unit cube `(0,1)^n`.
    pub fn unit_cube(n: usize) -> Self {
        CuboidDomain::new(&vec![0.0; n], &vec![1.0; n]).expect("unit cube is non-degenerate")
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower[..self.n]
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper[..self.n]
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.n).map(|i| self.extent(i)).product()
    }

    pub fn centroid(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| 0.5 * (self.lower[i] + self.upper[i]))
            .collect()
    }

    /// Cross-section area orthogonal to the layering axis.
    pub fn cross_section(&self) -> f64 {
        (0..self.n - 1).map(|i| self.extent(i)).product()
    }

    /// Replaces the extent along the last axis.
    pub fn with_layer_range(&self, a: f64, b: f64) -> Result<Self> {
        let mut lower = self.lower().to_vec();
        let mut upper = self.upper().to_vec();
        lower[self.n - 1] = a;
        upper[self.n - 1] = b;
        CuboidDomain::new(&lower, &upper)
    }

    /// Domain shrunk by `delta` at the bottom and top of the layering axis.
    pub fn shrink_layer_axis(&self, delta: f64) -> Result<Self> {
        self.with_layer_range(
            self.lower[self.n - 1] + delta,
            self.upper[self.n - 1] - delta,
        )
    }
}

/// Index of the horizontal strip `R^{n-1} x eps*[i, i+1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct StripIndex(pub i64);

/// Full-height strips contained in a domain, with partial boundary strips
/// reported separately.
#[derive(Clone, Debug)]
pub struct StripDecomposition {
    pub full: Vec<(StripIndex, CuboidDomain)>,
    pub partial: Vec<(StripIndex, CuboidDomain)>,
}

/// Ordered strip decomposition of `dom`. A strip is full iff
/// `eps*[i, i+1)` is contained in the domain's layering extent.
pub fn strips(dom: &CuboidDomain, cfg: &LayerConfig) -> StripDecomposition {
    let eps = cfg.eps();
    let a = dom.lower()[dom.n() - 1];
    let b = dom.upper()[dom.n() - 1];
    let slack = 1e-9 * eps;
    let k_lo = (a / eps).floor() as i64;
    let k_hi = (b / eps).ceil() as i64;
    let mut full = Vec::new();
    let mut partial = Vec::new();
    for i in k_lo..k_hi {
        let s0 = eps * i as f64;
        let s1 = eps * (i + 1) as f64;
        let c0 = s0.max(a);
        let c1 = s1.min(b);
        if c1 - c0 <= slack {
            continue;
        }
        let piece = dom
            .with_layer_range(c0, c1)
            .expect("clipped strip is non-degenerate");
        if s0 >= a - slack && s1 <= b + slack {
            full.push((StripIndex(i), piece));
        } else {
            partial.push((StripIndex(i), piece));
        }
    }
    StripDecomposition { full, partial }
}

/// Quadrature resolution: sub-cells per contiguous layer piece along the
/// layering axis, cells per cross axis, and Gauss points per axis (1..=5).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub layer_subcells: usize,
    pub cross_cells: usize,
    pub gauss: usize,
}

impl QuadratureSpec {
    pub fn new(layer_subcells: usize, cross_cells: usize, gauss: usize) -> Result<Self> {
        if layer_subcells < 1 {
            return Err(Error::InvalidArgument(
                "quadrature needs at least one sub-cell per layer".into(),
            ));
        }
        if cross_cells < 1 {
            return Err(Error::InvalidArgument(
                "quadrature needs at least one cell per cross axis".into(),
            ));
        }
        if !(1..=5).contains(&gauss) {
            return Err(Error::InvalidArgument(
                "Gauss points per axis must lie in 1..=5".into(),
            ));
        }
        Ok(QuadratureSpec {
            layer_subcells,
            cross_cells,
            gauss,
        })
    }

    /// 2 sub-cells per layer, 3-point Gauss: exact for the piecewise
    /// polynomial gradients of the laminate and rotation families.
    pub fn default_desk() -> Self {
        QuadratureSpec {
            layer_subcells: 2,
            cross_cells: 8,
            gauss: 3,
        }
    }

    pub fn with_cross_cells(&self, cross_cells: usize) -> Self {
        QuadratureSpec {
            cross_cells,
            ..*self
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_rule(points: usize) -> (&'static [f64], &'static [f64]) {
    match points {
        1 => (&[0.0], &[2.0]),
        2 => (&[-0.5773502691896258, 0.5773502691896258], &[1.0, 1.0]),
        3 => (
            &[-0.7745966692414834, 0.0, 0.7745966692414834],
            &[0.5555555555555556, 0.8888888888888888, 0.5555555555555556],
        ),
        4 => (
            &[
                -0.8611363115940526,
                -0.3399810435848563,
                0.3399810435848563,
                0.8611363115940526,
            ],
            &[
                0.34785484513745385,
                0.6521451548625462,
                0.6521451548625462,
                0.34785484513745385,
            ],
        ),
        5 => (
            &[
                -0.906179845938664,
                -0.538469310105683,
                0.0,
                0.538469310105683,
                0.906179845938664,
            ],
            &[
                0.23692688505618908,
                0.47862867049936647,
                0.5688888888888889,
                0.47862867049936647,
                0.23692688505618908,
            ],
        ),
        _ => panic!("Gauss rule only tabulated for 1..=5 points"),
    }
}

/// One phase-pure interval along the layering axis.
#[derive(Clone, Copy, Debug)]
pub struct LayerPanel {
    pub a: f64,
    pub b: f64,
    pub phase: Phase,
}

/// Splits the layering extent of `dom` into phase-pure intervals.
pub fn layer_panels(dom: &CuboidDomain, cfg: &LayerConfig) -> Vec<LayerPanel> {
    let a = dom.lower()[dom.n() - 1];
    let b = dom.upper()[dom.n() - 1];
    layer_panels_1d(a, b, cfg)
}

/// Splits the interval `[a, b]` into phase-pure pieces.
pub fn layer_panels_1d(a: f64, b: f64, cfg: &LayerConfig) -> Vec<LayerPanel> {
    let eps = cfg.eps();
    let lambda = cfg.lambda();
    let slack = 1e-13 * eps;
    let k_lo = (a / eps).floor() as i64 - 1;
    let k_hi = (b / eps).ceil() as i64 + 1;
    let mut panels = Vec::new();
    for k in k_lo..=k_hi {
        let base = eps * k as f64;
        let cuts = [
            (base, base + lambda * eps, Phase::Soft),
            (base + lambda * eps, base + eps, Phase::Stiff),
        ];
        for (p0, p1, ph) in cuts {
            let c0 = p0.max(a);
            let c1 = p1.min(b);
            if c1 - c0 > slack {
                panels.push(LayerPanel {
                    a: c0,
                    b: c1,
                    phase: ph,
                });
            }
        }
    }
    panels
}

/// Neumaier compensated accumulator; insensitive to summand magnitudes.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Quadrature of `f` over the phase-filtered part of `dom`, with integration
/// cells aligned to layer boundaries. Deterministic for a fixed spec.
pub fn layered_integral<F>(
    dom: &CuboidDomain,
    cfg: &LayerConfig,
    filter: PhaseFilter,
    spec: &QuadratureSpec,
    f: F,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let out = layered_integral_multi(dom, cfg, filter, spec, 1, |x, out| out[0] = f(x))?;
    Ok(out[0])
}

/// Componentwise quadrature of a map into R^k; one pass over the grid.
pub fn layered_integral_multi<F>(
    dom: &CuboidDomain,
    cfg: &LayerConfig,
    filter: PhaseFilter,
    spec: &QuadratureSpec,
    k: usize,
    f: F,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    if dom.volume() <= 0.0 {
        return Err(Error::DegenerateDomain("zero volume".into()));
    }
    let n = dom.n();
    let (nodes, weights) = gauss_rule(spec.gauss);
    let panels: Vec<LayerPanel> = layer_panels(dom, cfg)
        .into_iter()
        .filter(|p| filter.admits(p.phase))
        .collect();

    // Per cross axis: uniform cells.
    let cross_axes: Vec<Vec<(f64, f64)>> = (0..n - 1)
        .map(|axis| {
            let a = dom.lower()[axis];
            let w = dom.extent(axis) / spec.cross_cells as f64;
            (0..spec.cross_cells)
                .map(|c| (a + w * c as f64, a + w * (c + 1) as f64))
                .collect()
        })
        .collect();

    let mut acc: Vec<Accumulator> = vec![Accumulator::default(); k];
    let mut vals = vec![0.0; k];
    let mut x = vec![0.0; n];

    for panel in &panels {
        let sub_w = (panel.b - panel.a) / spec.layer_subcells as f64;
        for sub in 0..spec.layer_subcells {
            let za = panel.a + sub_w * sub as f64;
            let zb = za + sub_w;
            // tensor loop over cross cells
            let mut cell_idx = vec![0usize; n - 1];
            loop {
                // gauss tensor loop inside one cell
                let mut gp = vec![0usize; n];
                loop {
                    let mut w = 1.0;
                    for axis in 0..n - 1 {
                        let (ca, cb) = cross_axes[axis][cell_idx[axis]];
                        let h = 0.5 * (cb - ca);
                        x[axis] = ca + h * (1.0 + nodes[gp[axis]]);
                        w *= h * weights[gp[axis]];
                    }
                    let h = 0.5 * (zb - za);
                    x[n - 1] = za + h * (1.0 + nodes[gp[n - 1]]);
                    w *= h * weights[gp[n - 1]];

                    f(&x, &mut vals);
                    for (a, v) in acc.iter_mut().zip(vals.iter()) {
                        a.add(w * v);
                    }

                    // advance gauss indices
                    let mut axis = 0;
                    loop {
                        gp[axis] += 1;
                        if gp[axis] < spec.gauss {
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
                // advance cross-cell indices
                if n == 2 {
                    cell_idx[0] += 1;
                    if cell_idx[0] == spec.cross_cells {
                        break;
                    }
                } else {
                    let mut axis = 0;
                    loop {
                        cell_idx[axis] += 1;
                        if cell_idx[axis] < spec.cross_cells {
                            break;
                        }
                        cell_idx[axis] = 0;
                        axis += 1;
                        if axis == n - 1 {
                            break;
                        }
                    }
                    if axis == n - 1 {
                        break;
                    }
                }
            }
        }
    }
    Ok(acc.into_iter().map(|a| a.value()).collect())
}

/// Measure of the phase-filtered part of `dom` (exact, by panel splitting).
pub fn phase_measure(dom: &CuboidDomain, cfg: &LayerConfig, filter: PhaseFilter) -> f64 {
    let cross = dom.cross_section();
    layer_panels(dom, cfg)
        .into_iter()
        .filter(|p| filter.admits(p.phase))
        .map(|p| (p.b - p.a) * cross)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lambda: f64, eps: f64) -> LayerConfig {
        LayerConfig::new(lambda, eps).unwrap()
    }

    #[test]
    fn phase_reference_values() {
        let c = cfg(0.5, 0.1);
        assert_eq!(phase(0.03, &c), Phase::Soft);
        assert_eq!(phase(0.07, &c), Phase::Stiff);
        assert_eq!(phase(0.05, &c), Phase::Stiff, "boundary is stiff");
        assert_eq!(phase(0.0, &c), Phase::Stiff);
        assert_eq!(phase(-0.97, &c), Phase::Soft); // periodic below zero
    }

    #[test]
    fn phase_is_periodic() {
        let c = cfg(0.3, 0.25);
        for k in -4..5 {
            let shift = 0.25 * k as f64;
            assert_eq!(phase(0.04 + shift, &c), phase(0.04, &c));
            assert_eq!(phase(0.2 + shift, &c), phase(0.2, &c));
        }
    }

    #[test]
    fn midsection_reference_values() {
        let c = cfg(0.5, 1.0);
        assert_eq!(midsection(0.3, &c), 0.75);
        assert_eq!(midsection(1.5, &c), 1.75);
        assert_eq!(midsection(0.75, &c), 0.75, "fixed point on midsection");
        // value t = 1 belongs to the stiff layer (0.5, 1]
        assert_eq!(midsection(1.0, &c), 0.75);
    }

    #[test]
    fn midsection_within_two_eps() {
        let c = cfg(0.23, 0.37);
        let mut t = -1.0;
        while t < 2.0 {
            assert!((t - midsection(t, &c)).abs() <= 2.0 * c.eps());
            t += 0.0113;
        }
    }

    #[test]
    fn strips_reference_counts() {
        let dom = CuboidDomain::unit_cube(2);
        let d = strips(&dom, &cfg(0.5, 0.25));
        assert_eq!(d.full.len(), 4);
        assert_eq!(d.partial.len(), 0);

        let d = strips(&dom, &cfg(0.5, 0.3));
        assert_eq!(d.full.len(), 3);
        assert_eq!(d.partial.len(), 1);

        let d = strips(&dom, &cfg(0.5, 1.0));
        assert_eq!(d.full.len(), 1);
        assert_eq!(d.partial.len(), 0);
    }

    #[test]
    fn layered_integral_of_one_gives_phase_measures() {
        let dom = CuboidDomain::unit_cube(2);
        let c = cfg(0.5, 0.25);
        let spec = QuadratureSpec::default_desk();
        let soft = layered_integral(&dom, &c, PhaseFilter::Soft, &spec, |_| 1.0).unwrap();
        let stiff = layered_integral(&dom, &c, PhaseFilter::Stiff, &spec, |_| 1.0).unwrap();
        assert!((soft - 0.5).abs() < 1e-13);
        assert!((stiff - 0.5).abs() < 1e-13);
    }

    #[test]
    fn layered_integral_linear_exact() {
        let dom = CuboidDomain::unit_cube(2);
        let c = cfg(0.5, 0.25);
        let spec = QuadratureSpec::default_desk();
        let v = layered_integral(&dom, &c, PhaseFilter::Both, &spec, |x| x[1]).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn soft_and_stiff_add_to_both() {
        let dom = CuboidDomain::new(&[0.0, 0.0], &[1.0, 0.83]).unwrap();
        let c = cfg(0.31, 0.21);
        let spec = QuadratureSpec::default_desk();
        let f = |x: &[f64]| (3.1 * x[0]).sin() + x[1] * x[1];
        let soft = layered_integral(&dom, &c, PhaseFilter::Soft, &spec, f).unwrap();
        let stiff = layered_integral(&dom, &c, PhaseFilter::Stiff, &spec, f).unwrap();
        let both = layered_integral(&dom, &c, PhaseFilter::Both, &spec, f).unwrap();
        assert!((soft + stiff - both).abs() < 1e-12);
    }

    #[test]
    fn soft_measure_exact_when_eps_divides() {
        for k in [1usize, 2, 4, 8, 16] {
            let c = cfg(0.5, 1.0 / k as f64);
            let m = phase_measure(&CuboidDomain::unit_cube(2), &c, PhaseFilter::Soft);
            assert!((m - 0.5).abs() < 1e-12, "k = {k}: {m}");
        }
    }

    #[test]
    fn degenerate_domain_rejected() {
        assert!(CuboidDomain::new(&[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(CuboidDomain::new(&[0.0, 0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn gauss_rules_integrate_polynomials() {
        // order-g rule is exact up to degree 2g-1 on [-1, 1]
        for g in 1..=5 {
            let (xs, ws) = gauss_rule(g);
            for deg in 0..2 * g {
                let num: f64 = xs
                    .iter()
                    .zip(ws)
                    .map(|(&x, &w)| w * x.powi(deg as i32))
                    .sum();
                let exact = if deg % 2 == 0 {
                    2.0 / (deg as f64 + 1.0)
                } else {
                    0.0
                };
                assert!((num - exact).abs() < 1e-13, "g={g} deg={deg}");
            }
        }
    }
}
