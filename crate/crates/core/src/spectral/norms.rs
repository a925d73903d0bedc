use super::field::{PhysicalField, SpectralField};
use super::grid::Grid3;
use super::ops::derivative;
use crate::error::{domain, Result};
use rayon::prelude::*;
use std::f64::consts::PI;

const CHUNK: usize = 4096;

/// Sum with a fixed chunking so the result does not depend on the worker count.
pub fn det_sum(xs: &[f64]) -> f64 {
    let parts: Vec<f64> = xs
        .par_chunks(CHUNK)
        .map(|c| c.iter().sum::<f64>())
        .collect();
    parts.iter().sum()
}

pub fn det_sum_map<F: Fn(usize) -> f64 + Sync>(len: usize, f: F) -> f64 {
    let nchunks = len.div_ceil(CHUNK);
    let parts: Vec<f64> = (0..nchunks)
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(len)).map(&f).sum::<f64>())
        .collect();
    parts.iter().sum()
}

pub fn det_max(xs: &[f64]) -> f64 {
    xs.par_iter().cloned().reduce(|| 0.0, f64::max)
}

fn volume() -> f64 {
    (2.0 * PI).powi(3)
}

/// ‖u‖_{L²} = (2π)^{3/2} (Σ|û_n|²)^{1/2}, summed over all components.
pub fn l2(f: &SpectralField) -> f64 {
    (volume() * det_sum_map(f.coeffs.len(), |i| f.coeffs[i].norm_sqr())).sqrt()
}

/// Grid-quadrature L² norm of samples.
pub fn l2_quadrature(p: &PhysicalField) -> f64 {
    (p.grid.cell_volume() * det_sum_map(p.data.len(), |i| p.data[i] * p.data[i])).sqrt()
}

/// ‖u‖_{H^γ} with weight (1+|n|²)^{γ/2}.
pub fn h_gamma(f: &SpectralField, gamma: f64) -> f64 {
    let g = f.grid;
    let len = g.len();
    let s = det_sum_map(f.coeffs.len(), |i| match g.mode(i % len) {
        Some(k) => {
            let w = (1.0 + (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).powf(gamma);
            w * f.coeffs[i].norm_sqr()
        }
        None => f.coeffs[i].norm_sqr(),
    });
    (volume() * s).sqrt()
}

/// L^p of the pointwise magnitude by equal-weight quadrature.
pub fn lp(p: &PhysicalField, pexp: f64) -> f64 {
    let m = p.magnitude();
    if pexp.is_infinite() {
        return det_max(&m);
    }
    (p.grid.cell_volume() * det_sum_map(m.len(), |i| m[i].powf(pexp))).powf(1.0 / pexp)
}

pub fn c0(p: &PhysicalField) -> f64 {
    det_max(&p.magnitude())
}

/// ‖u‖_{W^{1,p}} = ‖u‖_{L^p} + Σ_j ‖∂_j u‖_{L^p}, sampled on a grid `factor`× finer.
pub fn w1p(f: &SpectralField, pexp: f64, factor: usize) -> f64 {
    let fine = Grid3::new(f.grid.n() * factor).expect("grid");
    let mut s = lp(&f.resample(fine).to_physical(), pexp);
    for ax in 0..3 {
        let mut a = [0u32; 3];
        a[ax] = 1;
        s += lp(&derivative(f, a).resample(fine).to_physical(), pexp);
    }
    s
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct NormReport {
    pub l2: f64,
    pub p: f64,
    pub lp: f64,
    pub c0: f64,
    pub c1_tx: Option<f64>,
    pub w1p: f64,
    pub gamma: f64,
    pub h_gamma: f64,
}

/// Norms of one field; C⁰ and L^p are taken on a grid `factor`× finer than the field's.
pub fn norms(f: &SpectralField, pexp: f64, gamma: f64, factor: usize) -> NormReport {
    let fine = Grid3::new(f.grid.n() * factor).expect("grid");
    let phys = f.resample(fine).to_physical();
    NormReport {
        l2: l2(f),
        p: pexp,
        lp: lp(&phys, pexp),
        c0: c0(&phys),
        c1_tx: None,
        w1p: w1p(f, pexp, factor),
        gamma,
        h_gamma: h_gamma(f, gamma),
    }
}

/// C¹_{t,x} norm of a time series: sup|u| + sup|∂_t u| + Σ_j sup|∂_j u|, ∂_t by central
/// differences (one-sided at the ends).
pub fn c1_tx(series: &[(f64, SpectralField)], factor: usize) -> Result<f64> {
    if series.is_empty() {
        return domain("empty time series");
    }
    let fine = Grid3::new(series[0].1.grid.n() * factor).expect("grid");
    let sup = |f: &SpectralField| c0(&f.resample(fine).to_physical());
    let mut best_u: f64 = 0.0;
    let mut best_x: f64 = 0.0;
    for (_, f) in series {
        best_u = best_u.max(sup(f));
        let mut sx = 0.0;
        for ax in 0..3 {
            let mut a = [0u32; 3];
            a[ax] = 1;
            sx += sup(&derivative(f, a));
        }
        best_x = best_x.max(sx);
    }
    let mut best_t: f64 = 0.0;
    let n = series.len();
    for k in 0..n {
        if n < 2 {
            break;
        }
        let (lo, hi) = if k == 0 {
            (0, 1)
        } else if k == n - 1 {
            (n - 2, n - 1)
        } else {
            (k - 1, k + 1)
        };
        let dt = series[hi].0 - series[lo].0;
        let d = series[hi].1.sub(&series[lo].1).scaled(1.0 / dt);
        best_t = best_t.max(sup(&d));
    }
    Ok(best_u + best_t + best_x)
}
