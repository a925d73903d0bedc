//! Space and time mollification of a level's fields.
use crate::error::{domain, Result};
use crate::quad;
use crate::spectral::{Grid3, PhysicalField, Rank, SpectralField};
use rayon::prelude::*;
use std::f64::consts::PI;

fn bump(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        (1.0 / (r * r - 1.0)).exp()
    }
}

/// Normalization C with ∫_{ℝ³} C exp(1/(|x|²−1)) dx = 1.
pub fn space_bump_constant() -> f64 {
    1.0 / (4.0 * PI * quad::integrate(0.0, 1.0, 16, 32, |r| bump(r) * r * r))
}

/// Radial bump of radius ℓ applied as a Fourier multiplier.
#[derive(Clone, Debug)]
pub struct SpaceMollifier {
    pub ell: f64,
    pub c_space: f64,
    grid: Grid3,
    /// Weight indexed by |n|².
    table: Vec<f64>,
}

impl SpaceMollifier {
    pub fn new(ell: f64, grid: Grid3) -> Result<Self> {
        if !(ell > 0.0) {
            return domain(format!("mollification scale must be positive, got {ell}"));
        }
        let c = space_bump_constant();
        let cut = grid.cutoff();
        let max = (3 * cut * cut) as usize;
        let table = (0..=max)
            .into_par_iter()
            .map(|m| Self::weight_at(c, ell, (m as f64).sqrt()))
            .collect();
        Ok(SpaceMollifier {
            ell,
            c_space: c,
            grid,
            table,
        })
    }

    /// φ̂_ℓ(n) = 4πC ∫₀¹ e^{1/(r²−1)} sinc(ℓ|n|r) r² dr.
    fn weight_at(c: f64, ell: f64, kn: f64) -> f64 {
        let z = ell * kn;
        let panels = 16 + (z / 2.0) as usize;
        4.0 * PI
            * c
            * quad::integrate(0.0, 1.0, panels, 32, |r| {
                let s = if z * r < 1e-8 {
                    1.0 - (z * r).powi(2) / 6.0
                } else {
                    (z * r).sin() / (z * r)
                };
                bump(r) * s * r * r
            })
    }

    pub fn weight(&self, n: [i64; 3]) -> f64 {
        self.table[(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]) as usize]
    }

    pub fn apply(&self, f: &SpectralField) -> SpectralField {
        assert_eq!(f.grid, self.grid);
        let t = &self.table;
        f.apply_symbol(f.rank, |n, a, o| {
            let w = t[(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]) as usize];
            for (x, y) in o.iter_mut().zip(a) {
                *x = y * w;
            }
        })
    }
}

/// Σ_j w_j f_j over physical snapshots, in a fixed order.
pub fn weighted_sum(parts: &[(f64, &PhysicalField)], grid: Grid3, rank: Rank) -> PhysicalField {
    let mut out = PhysicalField::zeros(grid, rank);
    for (w, f) in parts {
        if *w != 0.0 {
            out.data
                .par_iter_mut()
                .zip(&f.data)
                .for_each(|(x, y)| *x += w * y);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::PhysicalField;

    #[test]
    fn constant_is_kept() {
        let g = Grid3::new(8).unwrap();
        let m = SpaceMollifier::new(0.3, g).unwrap();
        assert!((m.weight([0, 0, 0]) - 1.0).abs() < 1e-12);
        let f = PhysicalField::from_fn(g, Rank::Scalar, |_, o| o[0] = 2.0).transform();
        let back = m.apply(&f).to_physical();
        assert!(back.data.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn single_mode_matches_direct_convolution() {
        // (φ_ℓ ∗ cos(n·x))(0) = ∫ φ_ℓ(y) cos(n·y) dy by a tensor Gauss rule on the ball
        let g = Grid3::new(16).unwrap();
        let ell = 0.4;
        let m = SpaceMollifier::new(ell, g).unwrap();
        let n = [2i64, -3, 1];
        let c = space_bump_constant();
        let nodes = quad::composite_nodes(-1.0, 1.0, 8, 16);
        let mut s = 0.0;
        for &(x, wx) in &nodes {
            for &(y, wy) in &nodes {
                for &(z, wz) in &nodes {
                    let r = (x * x + y * y + z * z).sqrt();
                    let ph = ell * (n[0] as f64 * x + n[1] as f64 * y + n[2] as f64 * z);
                    s += wx * wy * wz * c * bump(r) * ph.cos();
                }
            }
        }
        assert!((s - m.weight(n)).abs() < 1e-7, "{s} vs {}", m.weight(n));
    }
}
