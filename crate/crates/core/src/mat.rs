//! Small dense matrix and rotation utilities for n in {2, 3}.
//!
//! Provides the Frobenius distance to SO(n), the SO(n)-Procrustes fit,
//! minors vectors, the decomposition `F = R_F + d_F (x) e_n` of admissible
//! matrices, and the soft-phase compensating map `F -> F_lambda`.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Orthonormality tolerance of the `RotationMatrix` invariant.
pub const ROTATION_ORTH_TOL: f64 = 1e-10;
/// Determinant tolerance of the `RotationMatrix` invariant.
pub const ROTATION_DET_TOL: f64 = 1e-10;
/// Default column tolerance for [`decompose_a`].
pub const DEFAULT_ADMISSIBLE_TOL: f64 = 1e-8;
/// Tie tolerance below which the Procrustes minimizer counts as non-unique.
pub const PROCRUSTES_DEGENERATE_TOL: f64 = 1e-12;

const MAX_N: usize = 3;

/// Dense n x n real matrix, row-major, n in {2, 3}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    a: [f64; MAX_N * MAX_N],
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!((2..=MAX_N).contains(&n), "dimension must be 2 or 3");
        SquareMatrix {
            n,
            a: [0.0; MAX_N * MAX_N],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Row-major construction; `entries.len()` must be `n * n`.
    pub fn from_rows(n: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), n * n, "entry count must be n*n");
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, entries[i * n + j]);
            }
        }
        m
    }

    pub fn diag(n: usize, d: &[f64]) -> Self {
        assert_eq!(d.len(), n);
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, d[i]);
        }
        m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.n && j < self.n);
        self.a[i * MAX_N + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        self.a[i * MAX_N + j] = v;
    }

    pub fn row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn col(&self, j: usize) -> Vector {
        let mut v = Vector::zeros(self.n);
        for i in 0..self.n {
            v.set(i, self.get(i, j));
        }
        v
    }

    pub fn set_col(&mut self, j: usize, v: &Vector) {
        debug_assert_eq!(v.n(), self.n);
        for i in 0..self.n {
            self.set(i, j, v.get(i));
        }
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m.set(i, j, self.get(j, i));
            }
        }
        m
    }

    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        let mut m = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let mut s = 0.0;
                for k in 0..self.n {
                    s += self.get(i, k) * other.get(k, j);
                }
                m.set(i, j, s);
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &Vector) -> Vector {
        debug_assert_eq!(self.n, v.n());
        let mut out = Vector::zeros(self.n);
        for i in 0..self.n {
            let mut s = 0.0;
            for j in 0..self.n {
                s += self.get(i, j) * v.get(j);
            }
            out.set(i, s);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_scaled(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(other, -1.0)
    }

    /// `self + t * other`.
    pub fn add_scaled(&self, other: &Self, t: f64) -> Self {
        debug_assert_eq!(self.n, other.n);
        let mut m = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                m.set(i, j, self.get(i, j) + t * other.get(i, j));
            }
        }
        m
    }

    pub fn scale(&self, t: f64) -> Self {
        let mut m = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                m.set(i, j, t * self.get(i, j));
            }
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.get(i, j) * self.get(i, j);
            }
        }
        s.sqrt()
    }

    /// Frobenius inner product `self : other`.
    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.n, other.n);
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.get(i, j) * other.get(i, j);
            }
        }
        s
    }

    pub fn det(&self) -> f64 {
        match self.n {
            2 => self.get(0, 0) * self.get(1, 1) - self.get(0, 1) * self.get(1, 0),
            3 => {
                self.get(0, 0) * (self.get(1, 1) * self.get(2, 2) - self.get(1, 2) * self.get(2, 1))
                    - self.get(0, 1)
                        * (self.get(1, 0) * self.get(2, 2) - self.get(1, 2) * self.get(2, 0))
                    + self.get(0, 2)
                        * (self.get(1, 0) * self.get(2, 1) - self.get(1, 1) * self.get(2, 0))
            }
            _ => unreachable!(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn is_finite(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.get(i, j).is_finite()))
    }
}

/// Small n-vector companion to [`SquareMatrix`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vector {
    n: usize,
    v: [f64; MAX_N],
}

impl Vector {
    pub fn zeros(n: usize) -> Self {
        assert!((2..=MAX_N).contains(&n), "dimension must be 2 or 3");
        Vector { n, v: [0.0; MAX_N] }
    }

    pub fn from_slice(n: usize, s: &[f64]) -> Self {
        assert_eq!(s.len(), n);
        let mut v = Self::zeros(n);
        v.v[..n].copy_from_slice(s);
        v
    }

    pub fn unit(n: usize, axis: usize) -> Self {
        let mut v = Self::zeros(n);
        v.set(axis, 1.0);
        v
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        self.v[i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, val: f64) {
        debug_assert!(i < self.n);
        self.v[i] = val;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.v[..self.n]
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.n, other.n);
        (0..self.n).map(|i| self.get(i) * other.get(i)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_scaled(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(other, -1.0)
    }

    /// `self + t * other`.
    pub fn add_scaled(&self, other: &Self, t: f64) -> Self {
        debug_assert_eq!(self.n, other.n);
        let mut v = *self;
        for i in 0..self.n {
            v.set(i, self.get(i) + t * other.get(i));
        }
        v
    }

    pub fn scale(&self, t: f64) -> Self {
        let mut v = *self;
        for i in 0..self.n {
            v.set(i, t * self.get(i));
        }
        v
    }

    /// Outer product `self (x) other`.
    pub fn outer(&self, other: &Self) -> SquareMatrix {
        debug_assert_eq!(self.n, other.n);
        let mut m = SquareMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m.set(i, j, self.get(i) * other.get(j));
            }
        }
        m
    }
}

/// `a^perp = (-a_n, a_2, ..., a_{n-1}, a_1)`, the n-dimensional analogue of
/// the 2d perpendicular vector.
pub fn perp(a: &Vector) -> Vector {
    let n = a.n();
    let mut out = *a;
    out.set(0, -a.get(n - 1));
    out.set(n - 1, a.get(0));
    out
}

/// Validated member of SO(n).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationMatrix(SquareMatrix);

impl RotationMatrix {
    /// Validates `|R^T R - I| <= 1e-10` and `|det R - 1| <= 1e-10`.
    pub fn new(m: SquareMatrix) -> Result<Self> {
        Self::with_tolerance(m, ROTATION_ORTH_TOL)
    }

    /// Validation with a caller-chosen orthonormality tolerance (the
    /// determinant check scales with it). Used by [`decompose_a`], whose
    /// acceptance tolerance may be wider than the type default.
    pub fn with_tolerance(m: SquareMatrix, tol: f64) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::NotARotation("non-finite entries".into()));
        }
        let gram_dev = m.transpose().mul(&m).sub(&SquareMatrix::identity(m.n()));
        let orth = gram_dev.frobenius_norm();
        if orth > tol {
            return Err(Error::NotARotation(format!(
                "|R^T R - I| = {orth:.3e} exceeds {tol:.1e}"
            )));
        }
        let det = m.det();
        let det_tol = tol.max(ROTATION_DET_TOL);
        if (det - 1.0).abs() > det_tol {
            return Err(Error::NotARotation(format!(
                "det = {det:.17} not within {det_tol:.1e} of 1"
            )));
        }
        Ok(RotationMatrix(m))
    }

    pub fn identity(n: usize) -> Self {
        RotationMatrix(SquareMatrix::identity(n))
    }

    /// Rotation by `theta` in the e_1-e_n plane, fixing e_2..e_{n-1}.
    pub fn planar(n: usize, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let mut m = SquareMatrix::identity(n);
        m.set(0, 0, c);
        m.set(0, n - 1, -s);
        m.set(n - 1, 0, s);
        m.set(n - 1, n - 1, c);
        RotationMatrix(m)
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }
}

impl std::ops::Deref for RotationMatrix {
    type Target = SquareMatrix;
    fn deref(&self) -> &SquareMatrix {
        &self.0
    }
}

/// The splitting `F = R_F + d_F (x) e_n` of an admissible matrix.
#[derive(Clone, Copy, Debug)]
pub struct ADecomposition {
    pub rotation: RotationMatrix,
    pub shear: Vector,
}

impl ADecomposition {
    /// `R_F + d_F (x) e_n`.
    pub fn reconstruct(&self) -> SquareMatrix {
        let n = self.rotation.n();
        self.rotation
            .matrix()
            .add(&self.shear.outer(&Vector::unit(n, n - 1)))
    }
}

/// Ordered vector of all k x k minors, k = 1..n: the 1 x 1 minors row-major,
/// then the 2 x 2 minors lexicographic in (row set, column set), ..., then
/// the determinant. Length 5 for n = 2 and 19 for n = 3.
#[derive(Clone, Debug, PartialEq)]
pub struct MinorsVector {
    n: usize,
    components: Vec<f64>,
}

impl MinorsVector {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Last component: the determinant.
    pub fn det(&self) -> f64 {
        *self.components.last().expect("minors vector is non-empty")
    }
}

/// Expected length of the minors vector: sum_k C(n,k)^2.
pub fn minors_len(n: usize) -> usize {
    match n {
        2 => 5,
        3 => 19,
        _ => panic!("dimension must be 2 or 3"),
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        // advance lexicographically
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn submatrix_det(f: &SquareMatrix, rows: &[usize], cols: &[usize]) -> f64 {
    match rows.len() {
        1 => f.get(rows[0], cols[0]),
        2 => {
            f.get(rows[0], cols[0]) * f.get(rows[1], cols[1])
                - f.get(rows[0], cols[1]) * f.get(rows[1], cols[0])
        }
        3 => f.det(),
        _ => unreachable!(),
    }
}

/// All minors of `F` in the declared deterministic order.
pub fn minors(f: &SquareMatrix) -> MinorsVector {
    let n = f.n();
    let mut components = Vec::with_capacity(minors_len(n));
    for k in 1..=n {
        let sets = combinations(n, k);
        for rows in &sets {
            for cols in &sets {
                components.push(submatrix_det(f, rows, cols));
            }
        }
    }
    debug_assert_eq!(components.len(), minors_len(n));
    MinorsVector { n, components }
}

/// Singular value decomposition `F = U diag(sigma) V^T` with the singular
/// values sorted in decreasing order.
pub fn svd(f: &SquareMatrix) -> (SquareMatrix, Vec<f64>, SquareMatrix) {
    let n = f.n();
    let m = DMatrix::from_row_slice(n, n, &f.row_major());
    let svd = m.svd(true, true);
    let u_na = svd.u.expect("svd requested u");
    let vt_na = svd.v_t.expect("svd requested v_t");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .expect("finite singular values")
    });
    let mut u = SquareMatrix::zeros(n);
    let mut vt = SquareMatrix::zeros(n);
    let mut sigma = vec![0.0; n];
    for (dst, &src) in order.iter().enumerate() {
        sigma[dst] = svd.singular_values[src];
        for i in 0..n {
            u.set(i, dst, u_na[(i, src)]);
            vt.set(dst, i, vt_na[(src, i)]);
        }
    }
    (u, sigma, vt)
}

/// Singular values in decreasing order. The 2 x 2 case uses the closed
/// form through the conformal/anticonformal split, which is exact and
/// allocation-free; 3 x 3 falls back to the SVD.
pub fn singular_values(f: &SquareMatrix) -> Vec<f64> {
    if f.n() == 2 {
        let (a, b, c, d) = (f.get(0, 0), f.get(0, 1), f.get(1, 0), f.get(1, 1));
        let p = ((a + d) * (a + d) + (b - c) * (b - c)).sqrt();
        let q = ((a - d) * (a - d) + (b + c) * (b + c)).sqrt();
        vec![0.5 * (p + q), 0.5 * (p - q).abs()]
    } else {
        svd(f).1
    }
}

/// Frobenius distance of `F` to SO(n), computed from singular values:
/// `sqrt(sum (sigma_i - 1)^2)` when `det F >= 0`, with the smallest singular
/// value sign-flipped when `det F < 0`.
pub fn dist_so(f: &SquareMatrix) -> f64 {
    let n = f.n();
    let sigma = singular_values(f);
    let flip = f.det() < 0.0;
    let mut s = 0.0;
    for (i, &sv) in sigma.iter().enumerate() {
        let corrected = if flip && i == n - 1 { -sv } else { sv };
        s += (corrected - 1.0) * (corrected - 1.0);
    }
    s.sqrt()
}

/// Nearest rotation to `G` in Frobenius norm via `R = U diag(1,..,1,s) V^T`
/// with `s = det(U V^T)`. The flag reports a non-unique minimizer (the two
/// smallest corrected singular values tie, which includes `G = 0`).
pub fn procrustes_rotation(g: &SquareMatrix) -> (RotationMatrix, bool) {
    let n = g.n();
    let (u, sigma, vt) = svd(g);
    let sign = if u.det() * vt.det() < 0.0 { -1.0 } else { 1.0 };
    let mut d = SquareMatrix::identity(n);
    d.set(n - 1, n - 1, sign);
    let r = u.mul(&d).mul(&vt);
    // Uniqueness gap: sigma_{n-1} + sign * sigma_n. Zero gap means the last
    // corrected factor can be attached to either of the two smallest singular
    // directions without changing the objective.
    let gap = sigma[n - 2] + sign * sigma[n - 1];
    let degenerate = gap <= PROCRUSTES_DEGENERATE_TOL;
    let rot = RotationMatrix::new(r).expect("polar factor of an SVD is a rotation");
    (rot, degenerate)
}

/// Generalized cross product of the first n-1 columns (the positively
/// oriented unit completion when the columns are orthonormal).
fn column_completion(f: &SquareMatrix) -> Vector {
    let n = f.n();
    match n {
        2 => perp(&f.col(0)),
        3 => {
            let a = f.col(0);
            let b = f.col(1);
            Vector::from_slice(
                3,
                &[
                    a.get(1) * b.get(2) - a.get(2) * b.get(1),
                    a.get(2) * b.get(0) - a.get(0) * b.get(2),
                    a.get(0) * b.get(1) - a.get(1) * b.get(0),
                ],
            )
        }
        _ => unreachable!(),
    }
}

/// Splits `F = R_F + d_F (x) e_n` when the first n-1 columns of `F` are
/// orthonormal within `tol`. `R_F` keeps those columns verbatim, so
/// `lambda * f_lambda(F) + (1 - lambda) * R_F = F` holds exactly; the last
/// column of `R_F` is the normalized positively oriented completion.
pub fn decompose_a(f: &SquareMatrix, tol: f64) -> Result<ADecomposition> {
    assert!(tol > 0.0, "tolerance must be positive");
    let n = f.n();
    for i in 0..n - 1 {
        let ci = f.col(i);
        if (ci.norm() - 1.0).abs() > tol {
            return Err(Error::NotInAdmissibleSet(n - 1));
        }
        for j in i + 1..n - 1 {
            if ci.dot(&f.col(j)).abs() > tol {
                return Err(Error::NotInAdmissibleSet(n - 1));
            }
        }
    }
    let mut r = *f;
    let cross = column_completion(f);
    let cross_norm = cross.norm();
    if cross_norm <= tol {
        return Err(Error::NotInAdmissibleSet(n - 1));
    }
    r.set_col(n - 1, &cross.scale(1.0 / cross_norm));
    let rotation = RotationMatrix::with_tolerance(r, (4.0 * tol).max(ROTATION_ORTH_TOL))?;
    let shear = f.col(n - 1).sub(&rotation.col(n - 1));
    Ok(ADecomposition { rotation, shear })
}

/// The soft-phase compensating map `F_lambda = R_F + (1/lambda) d_F (x) e_n`.
/// `lambda = 1` is admitted and acts as the identity map.
pub fn f_lambda(f: &SquareMatrix, lambda: f64) -> Result<SquareMatrix> {
    assert!(lambda > 0.0 && lambda <= 1.0, "lambda must lie in (0, 1]");
    let dec = decompose_a(f, DEFAULT_ADMISSIBLE_TOL)?;
    Ok(apply_f_lambda(&dec, lambda))
}

/// `F_lambda` from an existing decomposition.
pub fn apply_f_lambda(dec: &ADecomposition, lambda: f64) -> SquareMatrix {
    let n = dec.rotation.n();
    dec.rotation
        .matrix()
        .add(&dec.shear.scale(1.0 / lambda).outer(&Vector::unit(n, n - 1)))
}
