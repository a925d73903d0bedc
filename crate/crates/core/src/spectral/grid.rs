use crate::error::{domain, Result};
use std::f64::consts::PI;

/// Uniform collocation grid on [0, 2π)³.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Grid3 {
    n: usize,
}

impl Grid3 {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return domain(format!("grid size must be even and >= 4, got {n}"));
        }
        Ok(Grid3 { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest retained frequency per axis; the Nyquist plane is never part of a band-limited field.
    pub fn cutoff(&self) -> i64 {
        self.n as i64 / 2 - 1
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    /// Signed wavenumber of FFT index `i`; `None` on the Nyquist index.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> Option<i64> {
        let h = self.n / 2;
        if i < h {
            Some(i as i64)
        } else if i == h {
            None
        } else {
            Some(i as i64 - self.n as i64)
        }
    }

    /// FFT index of a signed wavenumber within the cutoff.
    #[inline]
    pub fn index_of(&self, k: i64) -> Option<usize> {
        if k.abs() > self.cutoff() {
            None
        } else if k >= 0 {
            Some(k as usize)
        } else {
            Some((k + self.n as i64) as usize)
        }
    }

    #[inline]
    pub fn flat(&self, i1: usize, i2: usize, i3: usize) -> usize {
        (i1 * self.n + i2) * self.n + i3
    }

    #[inline]
    pub fn unflat(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    /// Wavevector at flat index, `None` if any axis sits on the Nyquist index.
    #[inline]
    pub fn mode(&self, idx: usize) -> Option<[i64; 3]> {
        let (a, b, c) = self.unflat(idx);
        Some([
            self.wavenumber(a)?,
            self.wavenumber(b)?,
            self.wavenumber(c)?,
        ])
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let (a, b, c) = self.unflat(idx);
        let h = self.spacing();
        [a as f64 * h, b as f64 * h, c as f64 * h]
    }
}
