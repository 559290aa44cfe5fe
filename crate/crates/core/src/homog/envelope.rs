//! Iterative rank-one lamination envelope on a matrix-space grid (n = 2):
//! a desk-scale stand-in for the quasiconvex envelope wherever lamination
//! convexification is active.

use super::density::EnergyDensity;
use crate::error::{Error, Result};
use crate::mat::{SquareMatrix, Vector};
use rayon::prelude::*;

/// Grid specification: a hypercube of side `2 * radius` around `center`
/// sampled with `res` nodes per matrix entry.
#[derive(Clone, Copy, Debug)]
pub struct EnvelopeSpec {
    pub center: SquareMatrix,
    pub radius: f64,
    pub res: usize,
}

impl EnvelopeSpec {
    pub fn new(center: SquareMatrix, radius: f64, res: usize) -> Result<Self> {
        if center.n() != 2 {
            return Err(Error::Dimension(
                "lamination grids are supported for n = 2 only".into(),
            ));
        }
        if !(radius > 0.0) || res < 3 {
            return Err(Error::InvalidArgument(
                "envelope grid needs positive radius and at least 3 nodes per entry".into(),
            ));
        }
        Ok(EnvelopeSpec {
            center,
            radius,
            res,
        })
    }

    /// Center 0, radius 1.5, 7 nodes per entry: contains all rotations with
    /// entries in {0, +-1} as grid nodes.
    pub fn default_desk() -> Self {
        EnvelopeSpec::new(SquareMatrix::zeros(2), 1.5, 7).expect("valid default grid")
    }

    fn spacing(&self) -> f64 {
        2.0 * self.radius / (self.res - 1) as f64
    }

    fn node_matrix(&self, idx: &[usize; 4]) -> SquareMatrix {
        let h = self.spacing();
        let mut m = SquareMatrix::zeros(2);
        for (k, &i) in idx.iter().enumerate() {
            let v = self.center.get(k / 2, k % 2) - self.radius + h * i as f64;
            m.set(k / 2, k % 2, v);
        }
        m
    }
}

/// Envelope values on the grid after a number of lamination sweeps.
#[derive(Clone, Debug)]
pub struct EnvelopeGrid {
    pub spec: EnvelopeSpec,
    pub values: Vec<f64>,
    pub iterations: usize,
}

impl EnvelopeGrid {
    fn flat(&self, idx: &[usize; 4]) -> usize {
        let r = self.spec.res;
        ((idx[0] * r + idx[1]) * r + idx[2]) * r + idx[3]
    }

    pub fn node_value(&self, idx: &[usize; 4]) -> f64 {
        self.values[self.flat(idx)]
    }

    pub fn node_matrix(&self, idx: &[usize; 4]) -> SquareMatrix {
        self.spec.node_matrix(idx)
    }

    /// Multilinear interpolation; errors outside the grid hull.
    pub fn query(&self, f: &SquareMatrix) -> Result<f64> {
        interpolate(&self.spec, &self.values, f).ok_or_else(|| {
            Error::InvalidArgument("query point lies outside the envelope grid".into())
        })
    }

    /// CSV rows `(f_11, f_12, f_21, f_22, value, iterations)`.
    pub fn to_csv<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "f_11,f_12,f_21,f_22,value,iterations")?;
        let r = self.spec.res;
        for flat in 0..self.values.len() {
            let idx = unflatten(flat, r);
            let m = self.spec.node_matrix(&idx);
            let mut row: Vec<String> = m.row_major().iter().map(|v| format!("{v:.16e}")).collect();
            row.push(format!("{:.16e}", self.values[flat]));
            row.push(self.iterations.to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn interpolate(spec: &EnvelopeSpec, values: &[f64], f: &SquareMatrix) -> Option<f64> {
    let r = spec.res;
    let h = spec.spacing();
    let mut base = [0usize; 4];
    let mut frac = [0.0f64; 4];
    for k in 0..4 {
        let rel = (f.get(k / 2, k % 2) - (spec.center.get(k / 2, k % 2) - spec.radius)) / h;
        if rel < -1e-12 || rel > (r - 1) as f64 + 1e-12 {
            return None;
        }
        let clamped = rel.clamp(0.0, (r - 1) as f64);
        let i = (clamped.floor() as usize).min(r - 2);
        base[k] = i;
        frac[k] = clamped - i as f64;
    }
    let mut out = 0.0;
    for corner in 0..16usize {
        let mut w = 1.0;
        let mut idx = [0usize; 4];
        for k in 0..4 {
            let bit = (corner >> k) & 1;
            w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
            idx[k] = base[k] + bit;
        }
        let flat = ((idx[0] * r + idx[1]) * r + idx[2]) * r + idx[3];
        out += w * values[flat];
    }
    Some(out)
}

/// Sampled rank-one split candidates: unit directions at 16 angles per
/// factor, split weights 1/8..7/8, and step magnitudes of 1, 2 and 4 grid
/// spacings.
fn directions() -> Vec<Vector> {
    (0..16)
        .map(|j| {
            let angle = std::f64::consts::PI * j as f64 / 16.0;
            Vector::from_slice(2, &[angle.cos(), angle.sin()])
        })
        .collect()
}

/// Iterative rank-one lamination: each sweep replaces every node value by
/// the best sampled split `theta W_k(F + (1-theta) s a (x) b) +
/// (1-theta) W_k(F - theta s a (x) b)`, never increasing. Candidates
/// leaving the grid are skipped.
pub fn lamination_envelope(
    w: &EnergyDensity,
    spec: &EnvelopeSpec,
    iters: usize,
) -> Result<EnvelopeGrid> {
    if w.n() != 2 {
        return Err(Error::Dimension(
            "lamination grids are supported for n = 2 only".into(),
        ));
    }
    let r = spec.res;
    let total = r * r * r * r;
    let mut values: Vec<f64> = (0..total)
        .map(|flat| {
            let idx = unflatten(flat, r);
            w.eval(&spec.node_matrix(&idx))
        })
        .collect();

    let dirs = directions();
    let h = spec.spacing();
    let steps = [h, 2.0 * h, 4.0 * h];
    let thetas: Vec<f64> = (1..8).map(|k| k as f64 / 8.0).collect();

    for _ in 0..iters {
        let prev = values.clone();
        values = (0..total)
            .into_par_iter()
            .map(|flat| {
                let idx = unflatten(flat, r);
                let f = spec.node_matrix(&idx);
                let mut best = prev[flat];
                for a in &dirs {
                    for b in &dirs {
                        let rank_one = a.outer(b);
                        for &s in &steps {
                            for &theta in &thetas {
                                let plus = f.add(&rank_one.scale((1.0 - theta) * s));
                                let minus = f.add(&rank_one.scale(-theta * s));
                                let (Some(vp), Some(vm)) = (
                                    interpolate(spec, &prev, &plus),
                                    interpolate(spec, &prev, &minus),
                                ) else {
                                    continue;
                                };
                                let cand = theta * vp + (1.0 - theta) * vm;
                                if cand < best {
                                    best = cand;
                                }
                            }
                        }
                    }
                }
                best
            })
            .collect();
    }
    Ok(EnvelopeGrid {
        spec: *spec,
        values,
        iterations: iters,
    })
}

fn unflatten(flat: usize, r: usize) -> [usize; 4] {
    [
        flat / (r * r * r),
        (flat / (r * r)) % r,
        (flat / r) % r,
        flat % r,
    ]
}
