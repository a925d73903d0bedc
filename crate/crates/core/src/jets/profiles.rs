//! The compactly supported profiles Φ (radial, ℝ²), φ = −ΔΦ and ψ (ℝ, zero mean).
use crate::error::{domain, Error, Result};
use crate::quad;
use std::f64::consts::PI;

/// Raw bump exp(1/(r²−1)) and the pieces of its log-derivative g = 1/(r²−1).
#[inline]
fn bump(r: f64) -> Option<(f64, f64)> {
    if r.abs() >= 1.0 {
        return None;
    }
    let d = r * r - 1.0;
    let e = (1.0 / d).exp();
    if e == 0.0 {
        None
    } else {
        Some((e, d))
    }
}

fn phi_pot_raw(r: f64) -> f64 {
    bump(r).map_or(0.0, |(e, _)| e)
}

/// dΦ/dr for the raw potential.
fn phi_pot_raw_dr(r: f64) -> f64 {
    bump(r).map_or(0.0, |(e, d)| e * (-2.0 * r / (d * d)))
}

/// −ΔΦ for the raw radial potential: −e^g (g'' + g'² + g'/r).
fn phi_raw(r: f64) -> f64 {
    bump(r).map_or(0.0, |(e, d)| {
        let g1 = -2.0 * r / (d * d);
        let g2 = -2.0 / (d * d) + 8.0 * r * r / (d * d * d);
        let g1_over_r = -2.0 / (d * d);
        -e * (g2 + g1 * g1 + g1_over_r)
    })
}

/// ψ_raw = h' with h = exp(1/(s²−1)); returns (ψ, ψ', ψ'').
fn psi_raw(s: f64) -> (f64, f64, f64) {
    bump(s).map_or((0.0, 0.0, 0.0), |(e, d)| {
        let g1 = -2.0 * s / (d * d);
        let g2 = -2.0 / (d * d) + 8.0 * s * s / (d * d * d);
        let g3 = 24.0 * s / (d * d * d) - 48.0 * s * s * s / (d * d * d * d);
        (
            e * g1,
            e * (g2 + g1 * g1),
            e * (g3 + 3.0 * g1 * g2 + g1 * g1 * g1),
        )
    })
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct ProfileSet {
    pub c_phi: f64,
    pub c_psi: f64,
    pub quadrature_n: usize,
    /// (1/4π²)∫φ² − 1 and (1/2π)∫ψ² − 1 after scaling.
    pub norm_residuals: [f64; 2],
    /// ∫φ and ∫ψ.
    pub mean_residuals: [f64; 2],
}

impl ProfileSet {
    /// Scale the bumps so that (1/4π²)∫φ² = 1 and (1/2π)∫ψ² = 1.
    pub fn build(quadrature_n: usize) -> Result<ProfileSet> {
        if quadrature_n < 256 {
            return domain(format!(
                "quadrature needs at least 256 nodes, got {quadrature_n}"
            ));
        }
        let radial = |f: &dyn Fn(f64) -> f64| {
            quad::integrate(0.0, 1.0, 8, quadrature_n / 8, |r| 2.0 * PI * r * f(r))
        };
        let line = |f: &dyn Fn(f64) -> f64| quad::integrate(-1.0, 1.0, 16, quadrature_n / 8, f);
        let i_phi = radial(&|r| phi_raw(r).powi(2));
        let i_psi = line(&|s| psi_raw(s).0.powi(2));
        let c_phi = (4.0 * PI * PI / i_phi).sqrt();
        let c_psi = (2.0 * PI / i_psi).sqrt();
        let p = ProfileSet {
            c_phi,
            c_psi,
            quadrature_n,
            norm_residuals: [0.0; 2],
            mean_residuals: [0.0; 2],
        };
        let n1 = radial(&|r| p.phi(r).powi(2)) / (4.0 * PI * PI) - 1.0;
        let n2 = line(&|s| p.psi(s).powi(2)) / (2.0 * PI) - 1.0;
        let m1 = radial(&|r| p.phi(r));
        let m2 = line(&|s| p.psi(s));
        let p = ProfileSet {
            norm_residuals: [n1, n2],
            mean_residuals: [m1, m2],
            ..p
        };
        if n1.abs() > 1e-8 || n2.abs() > 1e-8 {
            return Err(Error::Numerical(format!(
                "profile normalization residuals {n1:.2e}, {n2:.2e}"
            )));
        }
        Ok(p)
    }

    /// Φ at radius r.
    pub fn phi_pot(&self, r: f64) -> f64 {
        self.c_phi * phi_pot_raw(r)
    }

    /// dΦ/dr.
    pub fn phi_pot_dr(&self, r: f64) -> f64 {
        self.c_phi * phi_pot_raw_dr(r)
    }

    /// φ = −ΔΦ at radius r.
    pub fn phi(&self, r: f64) -> f64 {
        self.c_phi * phi_raw(r)
    }

    pub fn psi(&self, s: f64) -> f64 {
        self.c_psi * psi_raw(s).0
    }

    pub fn psi_d1(&self, s: f64) -> f64 {
        self.c_psi * psi_raw(s).1
    }

    pub fn psi_d2(&self, s: f64) -> f64 {
        self.c_psi * psi_raw(s).2
    }
}
