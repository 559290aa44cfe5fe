//! Field verification helpers: finite-difference consistency of declared
//! gradients and a numerical curl check of matrix fields. Sampling avoids
//! layer boundaries so the stencils stay inside one phase.

use crate::constructions::DeformationField;
use crate::geometry::{phase, Phase};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn interior_samples(
    field: &DeformationField,
    per_phase: usize,
    margin: f64,
    seed: u64,
) -> Vec<Vec<f64>> {
    let n = field.n();
    let dom = &field.domain;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut soft = 0usize;
    let mut stiff = 0usize;
    let target = if field.cfg.is_some() { per_phase } else { 0 };
    let mut out = Vec::new();
    let mut attempts = 0usize;
    while out.len() < 2 * per_phase.max(1) && attempts < 400 * per_phase.max(1) {
        attempts += 1;
        let x: Vec<f64> = (0..n)
            .map(|axis| {
                let a = dom.lower()[axis] + margin;
                let b = dom.upper()[axis] - margin;
                rng.random_range(a..b)
            })
            .collect();
        match field.cfg {
            Some(cfg) => {
                let here = phase(x[n - 1], &cfg);
                if phase(x[n - 1] - margin, &cfg) != here || phase(x[n - 1] + margin, &cfg) != here
                {
                    continue;
                }
                match here {
                    Phase::Soft if soft < target => soft += 1,
                    Phase::Stiff if stiff < target => stiff += 1,
                    _ => continue,
                }
                out.push(x);
            }
            None => out.push(x),
        }
    }
    out
}

/// Max relative deviation between the declared gradient and central finite
/// differences of `u`, over `per_phase` interior points of each phase.
pub fn fd_gradient_max_error(field: &DeformationField, per_phase: usize, h: f64, seed: u64) -> f64 {
    let n = field.n();
    let mut worst = 0.0f64;
    for x in interior_samples(field, per_phase, 4.0 * h, seed) {
        let g = field.eval_grad(&x);
        for axis in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[axis] += h;
            xm[axis] -= h;
            let fd = field.eval_u(&xp).sub(&field.eval_u(&xm)).scale(0.5 / h);
            let col = g.col(axis);
            let err = fd.sub(&col).norm() / (1.0 + col.norm());
            worst = worst.max(err);
        }
    }
    worst
}

/// Max absolute numerical curl component of the declared gradient field:
/// for every axis pair (j, k), central differences of column k along axis j
/// minus column j along axis k. Vanishes when the field has a potential.
pub fn curl_max_error(field: &DeformationField, points: usize, h: f64, seed: u64) -> f64 {
    let n = field.n();
    let mut worst = 0.0f64;
    for x in interior_samples(field, points.div_ceil(2), 4.0 * h, seed) {
        for j in 0..n {
            for k in j + 1..n {
                let mut xjp = x.clone();
                let mut xjm = x.clone();
                xjp[j] += h;
                xjm[j] -= h;
                let dj_colk = field
                    .eval_grad(&xjp)
                    .col(k)
                    .sub(&field.eval_grad(&xjm).col(k))
                    .scale(0.5 / h);
                let mut xkp = x.clone();
                let mut xkm = x.clone();
                xkp[k] += h;
                xkm[k] -= h;
                let dk_colj = field
                    .eval_grad(&xkp)
                    .col(j)
                    .sub(&field.eval_grad(&xkm).col(j))
                    .scale(0.5 / h);
                worst = worst.max(dj_colk.sub(&dk_colj).norm());
            }
        }
    }
    worst
}
