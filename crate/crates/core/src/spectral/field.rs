use super::fft::fft3;
use super::grid::Grid3;
use crate::error::{Error, Result};
use num::complex::Complex64;
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rank {
    Scalar,
    Vector,
    Tensor,
}

impl Rank {
    pub fn ncomp(self) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::Vector => 3,
            Rank::Tensor => 9,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Rank::Scalar => 0,
            Rank::Vector => 1,
            Rank::Tensor => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Rank> {
        match c {
            0 => Some(Rank::Scalar),
            1 => Some(Rank::Vector),
            2 => Some(Rank::Tensor),
            _ => None,
        }
    }
}

/// Tensor component index, row-major.
#[inline]
pub const fn tc(i: usize, j: usize) -> usize {
    3 * i + j
}

/// Grid samples, stored component-major (all of component 0, then component 1, ...).
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField {
    pub grid: Grid3,
    pub rank: Rank,
    pub data: Vec<f64>,
}

impl PhysicalField {
    pub fn zeros(grid: Grid3, rank: Rank) -> Self {
        PhysicalField {
            grid,
            rank,
            data: vec![0.0; grid.len() * rank.ncomp()],
        }
    }

    pub fn from_data(grid: Grid3, rank: Rank, data: Vec<f64>) -> Result<Self> {
        let expected = grid.len() * rank.ncomp();
        if data.len() != expected {
            return Err(Error::Size {
                expected,
                got: data.len(),
            });
        }
        Ok(PhysicalField { grid, rank, data })
    }

    /// Sample `f(x, out)` at every collocation point.
    pub fn from_fn<F>(grid: Grid3, rank: Rank, f: F) -> Self
    where
        F: Fn([f64; 3], &mut [f64]) + Sync,
    {
        let nc = rank.ncomp();
        let mut inter = vec![0.0; grid.len() * nc];
        inter
            .par_chunks_mut(nc)
            .enumerate()
            .for_each(|(i, out)| f(grid.point(i), out));
        Self::from_interleaved(grid, rank, &inter)
    }

    pub fn from_interleaved(grid: Grid3, rank: Rank, inter: &[f64]) -> Self {
        let nc = rank.ncomp();
        let len = grid.len();
        let mut data = vec![0.0; len * nc];
        for c in 0..nc {
            for i in 0..len {
                data[c * len + i] = inter[i * nc + c];
            }
        }
        PhysicalField { grid, rank, data }
    }

    pub fn to_interleaved(&self) -> Vec<f64> {
        let nc = self.rank.ncomp();
        let len = self.grid.len();
        let mut out = vec![0.0; len * nc];
        for c in 0..nc {
            for i in 0..len {
                out[i * nc + c] = self.data[c * len + i];
            }
        }
        out
    }

    pub fn comp(&self, c: usize) -> &[f64] {
        let len = self.grid.len();
        &self.data[c * len..(c + 1) * len]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [f64] {
        let len = self.grid.len();
        &mut self.data[c * len..(c + 1) * len]
    }

    pub fn ncomp(&self) -> usize {
        self.rank.ncomp()
    }

    pub fn transform(&self) -> SpectralField {
        SpectralField::from_physical(self)
    }

    /// Pointwise magnitude: |u| for vectors, Frobenius norm for tensors.
    pub fn magnitude(&self) -> Vec<f64> {
        let len = self.grid.len();
        let nc = self.ncomp();
        (0..len)
            .into_par_iter()
            .map(|i| {
                (0..nc)
                    .map(|c| self.data[c * len + i].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    pub fn axpy(&mut self, a: f64, other: &PhysicalField) {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .par_iter_mut()
            .zip(&other.data)
            .for_each(|(x, y)| *x += a * y);
    }

    pub fn scaled(&self, a: f64) -> PhysicalField {
        let mut out = self.clone();
        out.data.par_iter_mut().for_each(|x| *x *= a);
        out
    }
}

/// Truncated Fourier representation û_n = (2π)^{-3} ∫ u e^{-in·y}, component-major in FFT index order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    pub grid: Grid3,
    pub rank: Rank,
    pub coeffs: Vec<Complex64>,
    pub is_real: bool,
}

impl SpectralField {
    pub fn zeros(grid: Grid3, rank: Rank) -> Self {
        SpectralField {
            grid,
            rank,
            coeffs: vec![Complex64::default(); grid.len() * rank.ncomp()],
            is_real: true,
        }
    }

    pub fn from_physical(p: &PhysicalField) -> Self {
        let n = p.grid.n();
        let len = p.grid.len();
        let inv = 1.0 / len as f64;
        let mut coeffs: Vec<Complex64> =
            p.data.par_iter().map(|&x| Complex64::new(x, 0.0)).collect();
        for c in 0..p.ncomp() {
            let blk = &mut coeffs[c * len..(c + 1) * len];
            fft3(blk, n, false);
            blk.par_iter_mut().for_each(|z| *z *= inv);
        }
        SpectralField {
            grid: p.grid,
            rank: p.rank,
            coeffs,
            is_real: true,
        }
    }

    /// Checked transform from raw samples.
    pub fn transform(grid: Grid3, rank: Rank, samples: &[f64]) -> Result<Self> {
        Ok(PhysicalField::from_data(grid, rank, samples.to_vec())?.transform())
    }

    fn inverse_blocks(&self) -> Vec<Complex64> {
        let n = self.grid.n();
        let len = self.grid.len();
        let mut buf = self.coeffs.clone();
        for c in 0..self.rank.ncomp() {
            fft3(&mut buf[c * len..(c + 1) * len], n, true);
        }
        buf
    }

    /// Real part of the inverse transform.
    pub fn to_physical(&self) -> PhysicalField {
        let buf = self.inverse_blocks();
        PhysicalField {
            grid: self.grid,
            rank: self.rank,
            data: buf.par_iter().map(|z| z.re).collect(),
        }
    }

    pub fn to_physical_complex(&self) -> Vec<Complex64> {
        self.inverse_blocks()
    }

    pub fn ncomp(&self) -> usize {
        self.rank.ncomp()
    }

    pub fn comp(&self, c: usize) -> &[Complex64] {
        let len = self.grid.len();
        &self.coeffs[c * len..(c + 1) * len]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [Complex64] {
        let len = self.grid.len();
        &mut self.coeffs[c * len..(c + 1) * len]
    }

    pub fn coeff(&self, c: usize, k: [i64; 3]) -> Complex64 {
        let g = self.grid;
        match (g.index_of(k[0]), g.index_of(k[1]), g.index_of(k[2])) {
            (Some(a), Some(b), Some(d)) => self.comp(c)[g.flat(a, b, d)],
            _ => Complex64::default(),
        }
    }

    pub fn set_coeff(&mut self, c: usize, k: [i64; 3], z: Complex64) -> Result<()> {
        let g = self.grid;
        match (g.index_of(k[0]), g.index_of(k[1]), g.index_of(k[2])) {
            (Some(a), Some(b), Some(d)) => {
                self.comp_mut(c)[g.flat(a, b, d)] = z;
                Ok(())
            }
            _ => Err(Error::Domain(format!(
                "mode {k:?} outside cutoff {}",
                g.cutoff()
            ))),
        }
    }

    pub fn mean(&self, c: usize) -> Complex64 {
        self.comp(c)[0]
    }

    /// Remove everything outside the per-axis cutoff (the Nyquist planes).
    pub fn band_limit(&mut self) {
        let g = self.grid;
        let len = g.len();
        for c in 0..self.ncomp() {
            self.coeffs[c * len..(c + 1) * len]
                .par_iter_mut()
                .enumerate()
                .for_each(|(i, z)| {
                    if g.mode(i).is_none() {
                        *z = Complex64::default();
                    }
                });
        }
    }

    /// Max deviation from û_{-n} = conj(û_n).
    pub fn hermitian_defect(&self) -> f64 {
        let g = self.grid;
        let n = g.n();
        let mut worst: f64 = 0.0;
        for c in 0..self.ncomp() {
            let blk = self.comp(c);
            for i in 0..g.len() {
                let (a, b, d) = g.unflat(i);
                let j = g.flat((n - a) % n, (n - b) % n, (n - d) % n);
                worst = worst.max((blk[j] - blk[i].conj()).norm());
            }
        }
        worst
    }

    /// Zero-pad (m > n) or truncate (m < n) to another grid, keeping the band-limited modes.
    pub fn resample(&self, target: Grid3) -> SpectralField {
        let src = self.grid;
        let mut out = SpectralField::zeros(target, self.rank);
        out.is_real = self.is_real;
        let kc = src.cutoff().min(target.cutoff());
        let tl = target.len();
        let sl = src.len();
        for c in 0..self.ncomp() {
            let s = &self.coeffs[c * sl..(c + 1) * sl];
            let t = &mut out.coeffs[c * tl..(c + 1) * tl];
            for k1 in -kc..=kc {
                let (a, ta) = (src.index_of(k1).unwrap(), target.index_of(k1).unwrap());
                for k2 in -kc..=kc {
                    let (b, tb) = (src.index_of(k2).unwrap(), target.index_of(k2).unwrap());
                    for k3 in -kc..=kc {
                        let (d, td) = (src.index_of(k3).unwrap(), target.index_of(k3).unwrap());
                        t[target.flat(ta, tb, td)] = s[src.flat(a, b, d)];
                    }
                }
            }
        }
        out
    }

    pub fn add(&self, other: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        assert_eq!(self.grid, other.grid);
        assert_eq!(self.rank, other.rank);
        self.coeffs
            .par_iter_mut()
            .zip(&other.coeffs)
            .for_each(|(x, y)| *x += y * a);
        self.is_real &= other.is_real;
    }

    pub fn scaled(&self, a: f64) -> SpectralField {
        let mut out = self.clone();
        out.coeffs.par_iter_mut().for_each(|z| *z *= a);
        out
    }

    /// Build a field from selected components of `self`.
    pub fn component(&self, c: usize) -> SpectralField {
        SpectralField {
            grid: self.grid,
            rank: Rank::Scalar,
            coeffs: self.comp(c).to_vec(),
            is_real: self.is_real,
        }
    }

    pub fn stack(parts: &[&SpectralField], rank: Rank) -> SpectralField {
        assert_eq!(parts.len(), rank.ncomp());
        let grid = parts[0].grid;
        let mut coeffs = Vec::with_capacity(grid.len() * rank.ncomp());
        for p in parts {
            assert_eq!(p.rank, Rank::Scalar);
            coeffs.extend_from_slice(&p.coeffs);
        }
        SpectralField {
            grid,
            rank,
            coeffs,
            is_real: parts.iter().all(|p| p.is_real),
        }
    }

    /// Apply a mode-wise linear map. `f(n, input, output)` sees the input components at mode n.
    /// Nyquist modes map to zero.
    pub fn apply_symbol<F>(&self, out_rank: Rank, f: F) -> SpectralField
    where
        F: Fn([f64; 3], &[Complex64], &mut [Complex64]) + Sync,
    {
        let g = self.grid;
        let len = g.len();
        let ni = self.ncomp();
        let no = out_rank.ncomp();
        let mut inter = vec![Complex64::default(); len * no];
        inter.par_chunks_mut(no).enumerate().for_each(|(i, out)| {
            if let Some(k) = g.mode(i) {
                let mut inp = [Complex64::default(); 9];
                for c in 0..ni {
                    inp[c] = self.coeffs[c * len + i];
                }
                f([k[0] as f64, k[1] as f64, k[2] as f64], &inp[..ni], out);
            }
        });
        let mut coeffs = vec![Complex64::default(); len * no];
        for c in 0..no {
            for i in 0..len {
                coeffs[c * len + i] = inter[i * no + c];
            }
        }
        SpectralField {
            grid: g,
            rank: out_rank,
            coeffs,
            is_real: self.is_real,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_has_only_mean() {
        let g = Grid3::new(8).unwrap();
        let f = PhysicalField::from_fn(g, Rank::Scalar, |_, o| o[0] = 2.5).transform();
        assert!((f.mean(0).re - 2.5).abs() < 1e-14);
        let rest: f64 = f.coeffs.iter().skip(1).map(|z| z.norm()).sum();
        assert!(rest < 1e-13);
    }

    #[test]
    fn sine_mode_coefficients() {
        let g = Grid3::new(8).unwrap();
        let f = PhysicalField::from_fn(g, Rank::Scalar, |x, o| o[0] = x[0].sin()).transform();
        assert!((f.coeff(0, [1, 0, 0]) - Complex64::new(0.0, -0.5)).norm() < 1e-14);
        assert!((f.coeff(0, [-1, 0, 0]) - Complex64::new(0.0, 0.5)).norm() < 1e-14);
    }

    #[test]
    fn resample_preserves_band() {
        let g = Grid3::new(8).unwrap();
        let f = PhysicalField::from_fn(g, Rank::Scalar, |x, o| {
            o[0] = (2.0 * x[1] - x[2]).cos() + x[0].sin()
        });
        let s = f.transform();
        let big = s.resample(Grid3::new(16).unwrap());
        let back = big.resample(g).to_physical();
        for (a, b) in f.data.iter().zip(&back.data) {
            assert!((a - b).abs() < 1e-13);
        }
        let p = big.to_physical();
        let x = p.grid.point(37);
        let v = (2.0 * x[1] - x[2]).cos() + x[0].sin();
        assert!((p.data[37] - v).abs() < 1e-13);
        let _ = PI;
    }
}
