//! Periodic boxes around a compact support, with spectral derivatives and trapezoid sums.
//! The boxes live in frame coordinates, where the jets separate into 1-D and 2-D factors.
use num::complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

fn wavenumbers(n: usize, period: f64) -> Vec<f64> {
    let base = 2.0 * PI / period;
    (0..n)
        .map(|i| {
            if i == n / 2 {
                0.0
            } else if i < n / 2 {
                i as f64 * base
            } else {
                (i as f64 - n as f64) * base
            }
        })
        .collect()
}

/// 1-D box [c − h, c + h) with n nodes.
#[derive(Clone, Debug)]
pub struct Box1 {
    pub center: f64,
    pub half: f64,
    pub n: usize,
}

impl Box1 {
    pub fn new(center: f64, half: f64, n: usize) -> Self {
        Box1 { center, half, n }
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = 2.0 * self.half / self.n as f64;
        (0..self.n)
            .map(|i| self.center - self.half + i as f64 * h)
            .collect()
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half / self.n as f64
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes().into_iter().map(f).collect()
    }

    /// Spectral derivative of order m.
    pub fn derivative(&self, f: &[f64], m: u32) -> Vec<f64> {
        if m == 0 {
            return f.to_vec();
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(self.n);
        let inv = planner.plan_fft_inverse(self.n);
        let mut c: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fwd.process(&mut c);
        let k = wavenumbers(self.n, 2.0 * self.half);
        for (ci, ki) in c.iter_mut().zip(&k) {
            *ci *= Complex64::new(0.0, *ki).powu(m) / self.n as f64;
        }
        inv.process(&mut c);
        c.iter().map(|z| z.re).collect()
    }

    /// Trapezoid value of ∫|f|^p (p = ∞ gives the max).
    pub fn lp_pow(&self, f: &[f64], p: f64) -> f64 {
        if p.is_infinite() {
            return f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        }
        self.spacing() * f.iter().map(|x| x.abs().powf(p)).sum::<f64>()
    }

    pub fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        self.spacing() * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// 2-D box centred at the origin, n × n nodes, row-major (first index y₁).
#[derive(Clone, Debug)]
pub struct Box2 {
    pub half: f64,
    pub n: usize,
}

impl Box2 {
    pub fn new(half: f64, n: usize) -> Self {
        Box2 { half, n }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half / self.n as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half + i as f64 * self.spacing()
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64 + Sync) -> Vec<f64> {
        use rayon::prelude::*;
        let n = self.n;
        (0..n * n)
            .into_par_iter()
            .map(|idx| f(self.coord(idx / n), self.coord(idx % n)))
            .collect()
    }

    /// Spectral ∂₁^{m1} ∂₂^{m2}.
    pub fn derivative(&self, f: &[f64], m1: u32, m2: u32) -> Vec<f64> {
        self.symbol(f, |k1, k2| {
            Complex64::new(0.0, k1).powu(m1) * Complex64::new(0.0, k2).powu(m2)
        })
    }

    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        self.symbol(f, |k1, k2| Complex64::new(-(k1 * k1 + k2 * k2), 0.0))
    }

    fn symbol(&self, f: &[f64], s: impl Fn(f64, f64) -> Complex64) -> Vec<f64> {
        let n = self.n;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut c: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let transpose = |c: &mut Vec<Complex64>| {
            let mut t = vec![Complex64::new(0.0, 0.0); n * n];
            for i in 0..n {
                for j in 0..n {
                    t[j * n + i] = c[i * n + j];
                }
            }
            *c = t;
        };
        // rows, then columns via transposition; the second pass leaves the array transposed
        for row in c.chunks_mut(n) {
            fwd.process(row);
        }
        transpose(&mut c);
        for row in c.chunks_mut(n) {
            fwd.process(row);
        }
        let k = wavenumbers(n, 2.0 * self.half);
        let scale = 1.0 / (n * n) as f64;
        for j in 0..n {
            for i in 0..n {
                // transposed layout: c[j * n + i] holds mode (k_i, k_j)
                c[j * n + i] *= s(k[i], k[j]) * scale;
            }
        }
        for row in c.chunks_mut(n) {
            inv.process(row);
        }
        transpose(&mut c);
        for row in c.chunks_mut(n) {
            inv.process(row);
        }
        c.iter().map(|z| z.re).collect()
    }

    pub fn lp_pow(&self, f: &[f64], p: f64) -> f64 {
        if p.is_infinite() {
            return f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        }
        self.spacing().powi(2) * f.iter().map(|x| x.abs().powf(p)).sum::<f64>()
    }

    pub fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        self.spacing().powi(2) * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }
}
