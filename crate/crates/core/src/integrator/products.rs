//! Products of band-limited fields on a 3/2-oversampled grid, truncated back to the base band.
use crate::error::{domain, Result};
use crate::spectral::{tc, Grid3, PhysicalField, Rank, SpectralField};
use rayon::prelude::*;

/// Order of the six independent entries of a symmetric tensor.
pub const SYM: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

#[derive(Clone, Copy, Debug)]
pub struct Dealias {
    pub base: Grid3,
    pub fine: Grid3,
}

impl Dealias {
    /// Fine grid of 3N/2 points: quadratic products truncated to the base band are exact.
    pub fn new(base: Grid3) -> Result<Self> {
        if base.n() % 4 != 0 {
            return domain(format!(
                "base grid must be a multiple of 4, got {}",
                base.n()
            ));
        }
        Ok(Dealias {
            base,
            fine: Grid3::new(base.n() * 3 / 2)?,
        })
    }

    pub fn up(&self, f: &SpectralField) -> PhysicalField {
        f.resample(self.fine).to_physical()
    }

    pub fn down(&self, p: &PhysicalField) -> SpectralField {
        p.transform().resample(self.base)
    }

    pub fn scalar<F: Fn(usize) -> f64 + Sync + Send>(&self, f: F) -> SpectralField {
        let data: Vec<f64> = (0..self.fine.len()).into_par_iter().map(f).collect();
        self.down(&PhysicalField {
            grid: self.fine,
            rank: Rank::Scalar,
            data,
        })
    }

    pub fn vector<F: Fn(usize) -> [f64; 3] + Sync + Send>(&self, f: F) -> SpectralField {
        let len = self.fine.len();
        let vals: Vec<[f64; 3]> = (0..len).into_par_iter().map(f).collect();
        let mut data = vec![0.0; 3 * len];
        for (i, v) in vals.iter().enumerate() {
            for c in 0..3 {
                data[c * len + i] = v[c];
            }
        }
        self.down(&PhysicalField {
            grid: self.fine,
            rank: Rank::Vector,
            data,
        })
    }

    /// Symmetric tensor from its six entries (in [`SYM`] order) at every fine point.
    pub fn sym<F: Fn(usize) -> [f64; 6] + Sync + Send>(&self, f: F) -> SpectralField {
        let len = self.fine.len();
        let vals: Vec<[f64; 6]> = (0..len).into_par_iter().map(f).collect();
        let blen = self.base.len();
        let mut out = SpectralField::zeros(self.base, Rank::Tensor);
        for (c, &(i, j)) in SYM.iter().enumerate() {
            let data: Vec<f64> = vals.iter().map(|v| v[c]).collect();
            let s = self.down(&PhysicalField {
                grid: self.fine,
                rank: Rank::Scalar,
                data,
            });
            out.coeffs[tc(i, j) * blen..(tc(i, j) + 1) * blen].copy_from_slice(&s.coeffs);
            if i != j {
                out.coeffs[tc(j, i) * blen..(tc(j, i) + 1) * blen].copy_from_slice(&s.coeffs);
            }
        }
        out
    }
}

/// Value of component c of a physical field at flat point i.
#[inline]
pub fn at(p: &PhysicalField, c: usize, i: usize) -> f64 {
    p.data[c * p.grid.len() + i]
}

#[inline]
pub fn vec_at(p: &PhysicalField, i: usize) -> [f64; 3] {
    let l = p.grid.len();
    [p.data[i], p.data[l + i], p.data[2 * l + i]]
}

/// Entries of a ⊗ b + b ⊗ a.
#[inline]
pub fn sym_outer(a: [f64; 3], b: [f64; 3]) -> [f64; 6] {
    let mut o = [0.0; 6];
    for (c, &(i, j)) in SYM.iter().enumerate() {
        o[c] = a[i] * b[j] + a[j] * b[i];
    }
    o
}

/// Symmetric traceless part and one third of the trace.
pub fn split_trace(s: &SpectralField) -> (SpectralField, SpectralField) {
    let tr = crate::spectral::ops::trace(s).scaled(1.0 / 3.0);
    (crate::spectral::ops::sym_traceless(s), tr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_of_top_modes_is_exact_after_truncation() {
        let base = Grid3::new(8).unwrap();
        let d = Dealias::new(base).unwrap();
        // cos(3x)·cos(2x) = (cos x + cos 5x)/2; only cos x survives the base band (cutoff 3)
        let a = PhysicalField::from_fn(base, Rank::Scalar, |x, o| o[0] = (3.0 * x[0]).cos())
            .transform();
        let b = PhysicalField::from_fn(base, Rank::Scalar, |x, o| o[0] = (2.0 * x[0]).cos())
            .transform();
        let (af, bf) = (d.up(&a), d.up(&b));
        let p = d.scalar(|i| af.data[i] * bf.data[i]);
        let want =
            PhysicalField::from_fn(base, Rank::Scalar, |x, o| o[0] = 0.5 * x[0].cos()).transform();
        let err: f64 = p
            .coeffs
            .iter()
            .zip(&want.coeffs)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-14, "{err}");
    }
}
