//! Zero-boundary cell problem on the soft part of the unit cell:
//! minimize the mean of `W(F_lambda + grad phi)` over multilinear
//! perturbations vanishing on the boundary, by seeded multistart descent.

use super::density::EnergyDensity;
use crate::error::{Error, Result};
use crate::geometry::gauss_rule;
use crate::mat::{apply_f_lambda, decompose_a, SquareMatrix, Vector, DEFAULT_ADMISSIBLE_TOL};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Grid, quadrature and minimizer parameters of the cell problem.
#[derive(Clone, Copy, Debug)]
pub struct CellDiscretization {
    /// Nodes per cross axis of the soft cell.
    pub m: usize,
    /// Nodes along the layering axis.
    pub m_n: usize,
    /// Gauss points per axis and element.
    pub gauss: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Seeded random restarts in addition to the zero start.
    pub restarts: usize,
    pub seed: u64,
}

impl CellDiscretization {
    pub fn new(m: usize, m_n: usize, gauss: usize) -> Result<Self> {
        if m < 3 || m_n < 3 {
            return Err(Error::InvalidArgument(
                "cell grid needs at least 3 nodes per axis".into(),
            ));
        }
        if !(1..=5).contains(&gauss) {
            return Err(Error::InvalidArgument(
                "Gauss points per axis must lie in 1..=5".into(),
            ));
        }
        Ok(CellDiscretization {
            m,
            m_n,
            gauss,
            max_iters: 1000,
            grad_tol: 1e-8,
            restarts: 4,
            seed: 7,
        })
    }

    /// 17 x 9 grid, 3-point Gauss, 4 restarts.
    pub fn default_desk() -> Self {
        CellDiscretization::new(17, 9, 3).expect("default grid is valid")
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    /// Nested refinement: doubles the element count per axis.
    pub fn refined(&self) -> Self {
        CellDiscretization {
            m: 2 * self.m - 1,
            m_n: 2 * self.m_n - 1,
            ..*self
        }
    }
}

/// Nodal multilinear perturbation field on the soft cell.
#[derive(Clone, Debug)]
pub struct CellField {
    n: usize,
    dims: Vec<usize>,
    lambda: f64,
    /// Node-major nodal values, `n` components per node.
    pub values: Vec<f64>,
}

impl CellField {
    pub fn zero(n: usize, disc: &CellDiscretization, lambda: f64) -> Self {
        let dims = grid_dims(n, disc);
        let nodes = dims.iter().product::<usize>();
        CellField {
            n,
            dims,
            lambda,
            values: vec![0.0; nodes * n],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Multilinear evaluation at a point of the soft cell.
    pub fn eval(&self, y: &[f64]) -> Vector {
        let n = self.n;
        let mut base = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for a in 0..n {
            let extent = if a == n - 1 { self.lambda } else { 1.0 };
            let cells = (self.dims[a] - 1) as f64;
            let t = (y[a] / extent).clamp(0.0, 1.0) * cells;
            let i = (t.floor() as usize).min(self.dims[a] - 2);
            base[a] = i;
            frac[a] = t - i as f64;
        }
        let mut out = Vector::zeros(n);
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut flat = 0usize;
            let mut stride = 1usize;
            for a in 0..n {
                let bit = (corner >> a) & 1;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                flat += (base[a] + bit) * stride;
                stride *= self.dims[a];
            }
            for comp in 0..n {
                out.set(comp, out.get(comp) + w * self.values[flat * n + comp]);
            }
        }
        out
    }

    /// Interpolates onto another discretization of the same cell.
    pub fn resample(&self, disc: &CellDiscretization) -> CellField {
        let n = self.n;
        let mut out = CellField::zero(n, disc, self.lambda);
        let dims = out.dims.clone();
        let mut idx = vec![0usize; n];
        let nodes: usize = dims.iter().product();
        for flat in 0..nodes {
            let mut rem = flat;
            for a in 0..n {
                idx[a] = rem % dims[a];
                rem /= dims[a];
            }
            let interior = (0..n).all(|a| idx[a] > 0 && idx[a] + 1 < dims[a]);
            if !interior {
                continue;
            }
            let y: Vec<f64> = (0..n)
                .map(|a| {
                    let extent = if a == n - 1 { self.lambda } else { 1.0 };
                    extent * idx[a] as f64 / (dims[a] - 1) as f64
                })
                .collect();
            let v = self.eval(&y);
            for comp in 0..n {
                out.values[flat * n + comp] = v.get(comp);
            }
        }
        out
    }
}

/// Minimization result: the homogenized value `lambda * mean W`, the
/// H1-type norm of the optimal perturbation, and convergence metadata.
#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub value: f64,
    pub perturbation_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub field: CellField,
}

/// Finite cell value or the infinite branch for non-admissible matrices.
#[derive(Clone, Debug)]
pub enum CellValue {
    Finite(CellOutcome),
    Infinite,
}

impl CellValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            CellValue::Finite(outcome) => Some(outcome.value),
            CellValue::Infinite => None,
        }
    }
}

fn grid_dims(n: usize, disc: &CellDiscretization) -> Vec<usize> {
    let mut dims = vec![disc.m; n];
    dims[n - 1] = disc.m_n;
    dims
}

/// Precomputed uniform Q1 grid on the soft cell `(0,1)^{n-1} x (0,lambda)`.
struct Grid {
    n: usize,
    dims: Vec<usize>,
    nodes: usize,
    pinned: Vec<bool>,
    /// Element corner nodes, 2^n per element.
    elems: Vec<Vec<usize>>,
    /// Per Gauss point: quadrature weight (physical), shape values,
    /// physical shape gradients (corner-major).
    gauss_pts: Vec<(f64, Vec<f64>, Vec<f64>)>,
    cell_measure: f64,
    lambda: f64,
}

impl Grid {
    fn build(n: usize, disc: &CellDiscretization, lambda: f64) -> Grid {
        let dims = grid_dims(n, disc);
        let nodes: usize = dims.iter().product();
        let mut strides = vec![1usize; n];
        for a in 1..n {
            strides[a] = strides[a - 1] * dims[a - 1];
        }
        let h: Vec<f64> = (0..n)
            .map(|a| {
                let extent = if a == n - 1 { lambda } else { 1.0 };
                extent / (dims[a] - 1) as f64
            })
            .collect();

        let mut pinned = vec![false; nodes];
        for flat in 0..nodes {
            let mut rem = flat;
            for a in 0..n {
                let i = rem % dims[a];
                rem /= dims[a];
                if i == 0 || i + 1 == dims[a] {
                    pinned[flat] = true;
                }
            }
        }

        let cells: Vec<usize> = dims.iter().map(|d| d - 1).collect();
        let total_elems: usize = cells.iter().product();
        let mut elems = Vec::with_capacity(total_elems);
        let mut e_idx = vec![0usize; n];
        for _ in 0..total_elems {
            let mut corners = Vec::with_capacity(1 << n);
            for corner in 0..(1usize << n) {
                let mut flat = 0usize;
                for a in 0..n {
                    let bit = (corner >> a) & 1;
                    flat += (e_idx[a] + bit) * strides[a];
                }
                corners.push(flat);
            }
            elems.push(corners);
            let mut a = 0;
            loop {
                e_idx[a] += 1;
                if e_idx[a] < cells[a] {
                    break;
                }
                e_idx[a] = 0;
                a += 1;
                if a == n {
                    break;
                }
            }
        }

        let (g_nodes, g_weights) = gauss_rule(disc.gauss);
        let elem_volume: f64 = h.iter().product();
        let mut gauss_pts = Vec::new();
        let mut gp = vec![0usize; n];
        loop {
            let mut wgt = elem_volume;
            let mut xi = vec![0.0; n];
            for a in 0..n {
                xi[a] = 0.5 * (1.0 + g_nodes[gp[a]]);
                wgt *= 0.5 * g_weights[gp[a]];
            }
            let mut shape = Vec::with_capacity(1 << n);
            let mut dshape = Vec::with_capacity((1 << n) * n);
            for corner in 0..(1usize << n) {
                let mut s = 1.0;
                for a in 0..n {
                    let bit = (corner >> a) & 1;
                    s *= if bit == 1 { xi[a] } else { 1.0 - xi[a] };
                }
                shape.push(s);
                for a in 0..n {
                    let mut d = 1.0;
                    for b in 0..n {
                        let bit = (corner >> b) & 1;
                        if b == a {
                            d *= if bit == 1 { 1.0 } else { -1.0 };
                            d /= h[b];
                        } else {
                            d *= if bit == 1 { xi[b] } else { 1.0 - xi[b] };
                        }
                    }
                    dshape.push(d);
                }
            }
            gauss_pts.push((wgt, shape, dshape));
            let mut a = 0;
            loop {
                gp[a] += 1;
                if gp[a] < disc.gauss {
                    break;
                }
                gp[a] = 0;
                a += 1;
                if a == n {
                    break;
                }
            }
            if a == n {
                break;
            }
        }

        Grid {
            n,
            dims,
            nodes,
            pinned,
            elems,
            gauss_pts,
            cell_measure: lambda,
            lambda,
        }
    }

    /// Integral of `W(base + grad phi)` over the cell, optionally with its
    /// gradient with respect to the nodal values.
    fn energy(
        &self,
        base: &SquareMatrix,
        w: &EnergyDensity,
        values: &[f64],
        grad_out: Option<&mut Vec<f64>>,
    ) -> f64 {
        let n = self.n;
        let want_grad = grad_out.is_some();
        let mut grad = grad_out;
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut acc = crate::geometry::Accumulator::default();
        for corners in &self.elems {
            for (wgt, _shape, dshape) in &self.gauss_pts {
                let mut m = *base;
                for (c, &node) in corners.iter().enumerate() {
                    for comp in 0..n {
                        let v = values[node * n + comp];
                        if v != 0.0 {
                            for axis in 0..n {
                                m.set(comp, axis, m.get(comp, axis) + v * dshape[c * n + axis]);
                            }
                        }
                    }
                }
                acc.add(wgt * w.eval(&m));
                if want_grad {
                    let dw = w.eval_grad(&m);
                    let g = grad.as_deref_mut().expect("grad requested");
                    for (c, &node) in corners.iter().enumerate() {
                        if self.pinned[node] {
                            continue;
                        }
                        for comp in 0..n {
                            let mut s = 0.0;
                            for axis in 0..n {
                                s += dw.get(comp, axis) * dshape[c * n + axis];
                            }
                            g[node * n + comp] += wgt * s;
                        }
                    }
                }
            }
        }
        acc.value()
    }

    /// `sqrt(int |phi|^2 + |grad phi|^2)` over the cell.
    fn h1_norm(&self, values: &[f64]) -> f64 {
        let n = self.n;
        let mut acc = crate::geometry::Accumulator::default();
        for corners in &self.elems {
            for (wgt, shape, dshape) in &self.gauss_pts {
                let mut val2 = 0.0;
                let mut grad2 = 0.0;
                for comp in 0..n {
                    let mut v = 0.0;
                    for (c, &node) in corners.iter().enumerate() {
                        v += values[node * n + comp] * shape[c];
                    }
                    val2 += v * v;
                    for axis in 0..n {
                        let mut d = 0.0;
                        for (c, &node) in corners.iter().enumerate() {
                            d += values[node * n + comp] * dshape[c * n + axis];
                        }
                        grad2 += d * d;
                    }
                }
                acc.add(wgt * (val2 + grad2));
            }
        }
        acc.value().sqrt()
    }
}

fn descend(
    grid: &Grid,
    base: &SquareMatrix,
    w: &EnergyDensity,
    start: Vec<f64>,
    disc: &CellDiscretization,
) -> (f64, Vec<f64>, usize, bool) {
    let n = grid.n;
    let mut x = start;
    // enforce pinned dofs
    for node in 0..grid.nodes {
        if grid.pinned[node] {
            for comp in 0..n {
                x[node * n + comp] = 0.0;
            }
        }
    }
    let mut g = vec![0.0; x.len()];
    let mut energy = grid.energy(base, w, &x, Some(&mut g));
    let mut alpha = 1.0 / (1.0 + g.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let mut prev_x: Option<Vec<f64>> = None;
    let mut prev_g: Option<Vec<f64>> = None;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..disc.max_iters {
        iterations = it;
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax <= disc.grad_tol {
            converged = true;
            break;
        }
        // Barzilai-Borwein step from the previous pair, Armijo safeguarded
        if let (Some(px), Some(pg)) = (&prev_x, &prev_g) {
            let mut ss = 0.0;
            let mut sy = 0.0;
            for i in 0..x.len() {
                let s = x[i] - px[i];
                let y = g[i] - pg[i];
                ss += s * s;
                sy += s * y;
            }
            if sy > 1e-300 {
                alpha = (ss / sy).clamp(1e-12, 1e4);
            }
        }
        let g2: f64 = g.iter().map(|v| v * v).sum();
        let mut step = alpha;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
            let cand_energy = grid.energy(base, w, &cand, None);
            if cand_energy <= energy - 1e-4 * step * g2 {
                prev_x = Some(std::mem::take(&mut x));
                prev_g = Some(g.clone());
                x = cand;
                energy = cand_energy;
                grid.energy(base, w, &x, Some(&mut g));
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no descent direction left at line-search resolution
            converged = g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= 1e3 * disc.grad_tol;
            break;
        }
    }
    (energy, x, iterations, converged)
}

/// Minimizes `lambda * mean W(base + grad phi)` over zero-boundary
/// multilinear perturbations, from the zero start, seeded random restarts,
/// and any caller-provided warm starts. The best value wins; ties resolve
/// to the earliest start for determinism.
pub fn cell_minimize_at_base(
    base: &SquareMatrix,
    w: &EnergyDensity,
    lambda: f64,
    disc: &CellDiscretization,
    warm_starts: &[CellField],
) -> Result<CellOutcome> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidArgument(
            "lambda must lie strictly between 0 and 1".into(),
        ));
    }
    let n = base.n();
    if w.n() != n {
        return Err(Error::Dimension("density/matrix dimension mismatch".into()));
    }
    let grid = Grid::build(n, disc, lambda);
    let h_min = lambda / (disc.m_n - 1) as f64;
    let amplitudes = [0.25, 0.5, 1.0, 2.0];

    let mut starts: Vec<Vec<f64>> = Vec::new();
    starts.push(vec![0.0; grid.nodes * n]);
    for r in 0..disc.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(disc.seed.wrapping_add(r as u64));
        let amp = amplitudes[r % amplitudes.len()] * h_min;
        let mut v = vec![0.0; grid.nodes * n];
        for (node, slot) in v.chunks_mut(n).enumerate() {
            if grid.pinned[node] {
                continue;
            }
            for comp in slot.iter_mut() {
                *comp = rng.random_range(-amp..amp);
            }
        }
        starts.push(v);
    }
    for warm in warm_starts {
        let resampled = warm.resample(disc);
        starts.push(resampled.values);
    }

    let results: Vec<(f64, Vec<f64>, usize, bool)> = starts
        .into_par_iter()
        .map(|s| descend(&grid, base, w, s, disc))
        .collect();
    let best_idx = results
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            a.0.partial_cmp(&b.0)
                .expect("finite energies")
                .then(ia.cmp(ib))
        })
        .map(|(i, _)| i)
        .expect("at least the zero start exists");
    let (integral, values, iterations, converged) =
        results.into_iter().nth(best_idx).expect("index in range");
    let norm = grid.h1_norm(&values);
    let value = integral * (lambda / grid.cell_measure);
    Ok(CellOutcome {
        value,
        perturbation_norm: norm,
        converged,
        iterations,
        field: CellField {
            n,
            dims: grid.dims.clone(),
            lambda: grid.lambda,
            values,
        },
    })
}

/// Cell problem for an admissible `F`: minimizes the soft-cell mean of
/// `W(F_lambda + grad phi)` and scales by lambda.
pub fn cell_minimize(
    f: &SquareMatrix,
    w: &EnergyDensity,
    lambda: f64,
    disc: &CellDiscretization,
) -> Result<CellOutcome> {
    let dec = decompose_a(f, DEFAULT_ADMISSIBLE_TOL)?;
    let base = apply_f_lambda(&dec, lambda);
    cell_minimize_at_base(&base, w, lambda, disc, &[])
}

/// Constrained cell formula with a rigid stiff phase: infinite for
/// non-admissible `F`; otherwise subtracts the piecewise-affine corrector
/// with gradient `-d (x) e_n` on stiff and `(1-lambda)/lambda d (x) e_n` on
/// soft, which pins the stiff phase to the rotation `R_F` and leaves the
/// soft-phase minimization around `F + (1-lambda)/lambda d (x) e_n`.
pub fn cell_formula_rigid(
    f: &SquareMatrix,
    w: &EnergyDensity,
    lambda: f64,
    disc: &CellDiscretization,
) -> Result<CellValue> {
    let dec = match decompose_a(f, DEFAULT_ADMISSIBLE_TOL) {
        Ok(dec) => dec,
        Err(Error::NotInAdmissibleSet(_)) => return Ok(CellValue::Infinite),
        Err(e) => return Err(e),
    };
    let n = f.n();
    let en = Vector::unit(n, n - 1);
    // stiff phase: F - d (x) e_n must be the rotation R_F (zero rigid energy)
    let stiff = f.sub(&dec.shear.outer(&en));
    debug_assert!(
        stiff.sub(dec.rotation.matrix()).frobenius_norm() < 1e-10,
        "stiff phase must collapse to the rotation factor"
    );
    let soft_base = f.add(&dec.shear.scale((1.0 - lambda) / lambda).outer(&en));
    let outcome = cell_minimize_at_base(&soft_base, w, lambda, disc, &[])?;
    Ok(CellValue::Finite(outcome))
}
