//! Band-limited jets on a periodic grid, built from exact Fourier coefficients.
//!
//! The coefficients of the periodized profiles are computed by quadrature (a sine transform for
//! ψ, a Hankel transform for φ and Φ), so the grid fields are the exact truncations of the
//! analytic jets to the grid band. Truncation loses a little L² mass; g and h of one direction
//! are rescaled by a common factor so that ‖W‖_{L²} = 1 again.
use super::family::JetFamily;
use crate::error::{domain, Result};
use crate::frame::Rat;
use crate::quad;
use crate::spectral::{Grid3, Rank, SpectralField};
use num::complex::Complex64;
use std::collections::HashMap;
use std::f64::consts::PI;

#[derive(Clone, Debug)]
struct Mode {
    flat: usize,
    m_along: i64,
    g: Complex64,
    h: Complex64,
}

#[derive(Clone, Debug)]
pub struct GridJet {
    pub xi: [f64; 3],
    modes: Vec<Mode>,
    /// Fraction of ‖W‖² retained by the truncation, before rescaling.
    pub captured: f64,
    pub rescale: f64,
}

#[derive(Clone, Debug)]
pub struct GridJets {
    pub grid: Grid3,
    /// Temporal frequency of the travelling profile: n_* k μ.
    pub omega: f64,
    /// 1/(n_*λ)².
    pub potential_factor: f64,
    pub jets: Vec<GridJet>,
}

fn int_vec(v: &[Rat; 3], n_star: i64, k: i64) -> [i64; 3] {
    v.map(|c| (c * Rat::from_integer(n_star)).to_integer() * k)
}

/// Fourier coefficient (1/2π)∫ψ_{r_∥}(y)e^{−imy}dy of the periodized ψ profile; purely imaginary
/// because ψ is odd.
pub fn psi_fourier(fam: &JetFamily, m: i64) -> Complex64 {
    let r = fam.r_par;
    let w = m as f64 * r;
    let panels = 16 + (w.abs() / 4.0) as usize;
    let v = quad::integrate(-1.0, 1.0, panels, 24, |x| {
        fam.profiles.psi(x) * (w * x).sin()
    });
    Complex64::new(0.0, -(2.0 * PI).powf(-1.5) * r.sqrt() * v)
}

/// Fourier coefficients (1/4π²)∫f(y)e^{−im·y}dy of the periodized φ and Φ profiles, by the
/// Hankel transform of the radial profiles.
pub fn transverse_fourier(fam: &JetFamily, m2: i64, m3: i64) -> (f64, f64) {
    let r = fam.r_perp;
    let z = r * ((m2 * m2 + m3 * m3) as f64).sqrt();
    let panels = 16 + (z / 4.0) as usize;
    let f = |g: &dyn Fn(f64) -> f64| {
        quad::integrate(0.0, 1.0, panels, 24, |rho| {
            g(rho) * quad::bessel_j0(z * rho) * rho
        }) * r
            / (4.0 * PI * PI)
    };
    (
        f(&|rho| fam.profiles.phi(rho)),
        f(&|rho| fam.profiles.phi_pot(rho)),
    )
}

impl GridJets {
    pub fn build(fam: &JetFamily, grid: Grid3) -> Result<Self> {
        let ns = fam.frame.n_star;
        let k = fam.k as i64;
        let s = (ns * k) as f64;
        let cut = grid.cutoff();
        let reach = ((3.0f64).sqrt() * cut as f64 / s).ceil() as i64 + 1;

        let psi_coeff: HashMap<i64, Complex64> =
            (-reach..=reach).map(|m| (m, psi_fourier(fam, m))).collect();
        let mut hankel: HashMap<i64, (f64, f64)> = HashMap::new();
        let mut transverse = |m2: i64, m3: i64| -> (f64, f64) {
            *hankel
                .entry(m2 * m2 + m3 * m3)
                .or_insert_with(|| transverse_fourier(fam, m2, m3))
        };

        let mut jets = Vec::with_capacity(fam.len());
        for (i, d) in fam.frame.directions.iter().enumerate() {
            let xi_n = int_vec(&d.xi, ns, k);
            let a_n = int_vec(&d.a, ns, k);
            let b_n = int_vec(&d.b(), ns, k);
            let al = fam.offsets[i];
            let mut modes = Vec::new();
            for m1 in -reach..=reach {
                let c = psi_coeff[&m1];
                if c.norm() == 0.0 {
                    continue;
                }
                for m2 in -reach..=reach {
                    for m3 in -reach..=reach {
                        let n = [0, 1, 2].map(|j| m1 * xi_n[j] + m2 * a_n[j] + m3 * b_n[j]);
                        let idx = match (
                            grid.index_of(n[0]),
                            grid.index_of(n[1]),
                            grid.index_of(n[2]),
                        ) {
                            (Some(x), Some(y), Some(z)) => grid.flat(x, y, z),
                            _ => continue,
                        };
                        let (dphi, dpot) = transverse(m2, m3);
                        let perp = [0, 1, 2].map(|j| (m2 * a_n[j] + m3 * b_n[j]) as f64);
                        let phase = -(perp[0] * al[0] + perp[1] * al[1] + perp[2] * al[2]);
                        let e = Complex64::from_polar(1.0, phase);
                        modes.push(Mode {
                            flat: idx,
                            m_along: m1,
                            g: c * dphi * e,
                            h: c * dpot * e,
                        });
                    }
                }
            }
            let norm2: f64 = (2.0 * PI).powi(3) * modes.iter().map(|m| m.g.norm_sqr()).sum::<f64>();
            if norm2 == 0.0 {
                return domain(format!("grid {} resolves no mode of jet {i}", grid.n()));
            }
            let rescale = norm2.sqrt().recip();
            for m in &mut modes {
                m.g *= rescale;
                m.h *= rescale;
            }
            jets.push(GridJet {
                xi: d.xi_f(),
                modes,
                captured: norm2,
                rescale,
            });
        }
        Ok(GridJets {
            grid,
            omega: s * fam.mu,
            potential_factor: fam.potential_factor(),
            jets,
        })
    }

    pub fn len(&self) -> usize {
        self.jets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jets.is_empty()
    }

    fn field(&self, i: usize, t: f64, pick: impl Fn(&Mode) -> Complex64) -> SpectralField {
        let mut f = SpectralField::zeros(self.grid, Rank::Scalar);
        let c = f.comp_mut(0);
        for m in &self.jets[i].modes {
            c[m.flat] = pick(m) * Complex64::from_polar(1.0, m.m_along as f64 * self.omega * t);
        }
        f
    }

    /// Band-limited ψφ of direction i at time t.
    pub fn g(&self, i: usize, t: f64) -> SpectralField {
        self.field(i, t, |m| m.g)
    }

    /// ∂_t g, exact.
    pub fn g_dt(&self, i: usize, t: f64) -> SpectralField {
        let om = self.omega;
        self.field(i, t, |m| m.g * Complex64::new(0.0, m.m_along as f64 * om))
    }

    /// Band-limited ψΦ.
    pub fn h(&self, i: usize, t: f64) -> SpectralField {
        self.field(i, t, |m| m.h)
    }

    /// W = ξ g.
    pub fn w(&self, i: usize, t: f64) -> SpectralField {
        let xi = self.jets[i].xi;
        self.g(i, t).apply_symbol(Rank::Vector, move |_, f, o| {
            for j in 0..3 {
                o[j] = f[0] * xi[j];
            }
        })
    }

    /// V = s ξ h.
    pub fn v(&self, i: usize, t: f64) -> SpectralField {
        let xi = self.jets[i].xi;
        let s = self.potential_factor;
        self.h(i, t).apply_symbol(Rank::Vector, move |_, f, o| {
            for j in 0..3 {
                o[j] = f[0] * xi[j] * s;
            }
        })
    }

    /// W^c = curl curl V − W, mode by mode: s(|n|²ξ − n(n·ξ))ĥ − ξĝ.
    pub fn wc(&self, i: usize, t: f64) -> SpectralField {
        let xi = self.jets[i].xi;
        let s = self.potential_factor;
        let mut f = SpectralField::zeros(self.grid, Rank::Vector);
        let len = self.grid.len();
        for m in &self.jets[i].modes {
            let n = self
                .grid
                .mode(m.flat)
                .expect("modes avoid the Nyquist planes")
                .map(|c| c as f64);
            let nn = n[0] * n[0] + n[1] * n[1] + n[2] * n[2];
            let nx = n[0] * xi[0] + n[1] * xi[1] + n[2] * xi[2];
            let e = Complex64::from_polar(1.0, m.m_along as f64 * self.omega * t);
            for j in 0..3 {
                f.coeffs[j * len + m.flat] = (m.h * s * (xi[j] * nn - n[j] * nx) - m.g * xi[j]) * e;
            }
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::GeometricFrame;
    use crate::jets::ProfileSet;
    use crate::spectral::{norms, ops};

    fn desk() -> JetFamily {
        let frame = GeometricFrame::standard().unwrap();
        let offsets = (0..6)
            .map(|i| [0.3 * i as f64, 1.1 * i as f64, 0.7])
            .collect();
        JetFamily::uncertified(ProfileSet::build(256).unwrap(), frame, 1, offsets).unwrap()
    }

    #[test]
    fn profile_coefficients_match_fft() {
        use rustfft::FftPlanner;
        let fam = desk();
        let n = 4096;
        let mut line: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new(fam.psi_tilde(-PI + 2.0 * PI * j as f64 / n as f64, 0), 0.0))
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut line);
        for m in [1i64, 2, 5, -3] {
            // the grid starts at −π: shift by e^{iπm}
            let idx = m.rem_euclid(n as i64) as usize;
            let c = line[idx] / n as f64 * if m % 2 == 0 { 1.0 } else { -1.0 };
            assert!(
                (c - psi_fourier(&fam, m)).norm() < 1e-12,
                "m={m}: {c} vs {}",
                psi_fourier(&fam, m)
            );
        }
        let n = 512;
        let mut plane = vec![Complex64::default(); n * n];
        for a in 0..n {
            for b in 0..n {
                let (u, v) = (
                    -PI + 2.0 * PI * a as f64 / n as f64,
                    -PI + 2.0 * PI * b as f64 / n as f64,
                );
                plane[a * n + b] = Complex64::new(fam.phi_tilde(u, v), 0.0);
            }
        }
        // brute-force DFT at a few modes
        for (m2, m3) in [(0i64, 0i64), (1, 2), (3, 0), (2, -2)] {
            let mut acc = Complex64::default();
            for a in 0..n {
                for b in 0..n {
                    let (u, v) = (
                        -PI + 2.0 * PI * a as f64 / n as f64,
                        -PI + 2.0 * PI * b as f64 / n as f64,
                    );
                    acc += plane[a * n + b]
                        * Complex64::from_polar(1.0, -(m2 as f64 * u + m3 as f64 * v));
                }
            }
            let c = acc / (n * n) as f64;
            let (d, _) = transverse_fourier(&fam, m2, m3);
            assert!(
                (c.re - d).abs() < 1e-8 && c.im.abs() < 1e-10,
                "({m2},{m3}): {c} vs {d}"
            );
        }
    }

    #[test]
    fn coefficients_match_direct_fourier_quadrature() {
        // (2π)^{-3}∫ψφ e^{−in·x}dx by Gauss–Legendre in frame coordinates, integrand from the
        // x-space evaluators, checks the mode lattice, offsets and time phases
        let fam = desk();
        let grid = Grid3::new(16).unwrap();
        let gj = GridJets::build(&fam, grid).unwrap();
        let t = 0.0123;
        let along = quad::composite_nodes(-1.0, 1.0, 8, 16);
        let radial = quad::composite_nodes(0.0, 1.0, 8, 16);
        for i in [0, 4] {
            let g = gj.g(i, t).scaled(1.0 / gj.jets[i].rescale);
            let origin = fam.coords(i, t, fam.point_at(i, t, [0.0; 3]));
            let mut best: Vec<(f64, usize)> = g
                .comp(0)
                .iter()
                .enumerate()
                .map(|(j, z)| (z.norm(), j))
                .collect();
            best.sort_by(|a, b| b.0.total_cmp(&a.0));
            for &(_, j) in best.iter().take(3) {
                let n = grid.mode(j).unwrap().map(|c| c as f64);
                let mut acc = Complex64::default();
                for &(y3, w3) in &along {
                    for &(r, wr) in &radial {
                        for q in 0..64 {
                            let th = 2.0 * PI * q as f64 / 64.0;
                            let y = [
                                origin.y1 + r * th.cos(),
                                origin.y2 + r * th.sin(),
                                origin.y3 + y3,
                            ];
                            let x = fam.point_at(i, t, y);
                            let v = fam.psi(i, t, x) * fam.phi(i, x);
                            let ph = -(n[0] * x[0] + n[1] * x[1] + n[2] * x[2]);
                            acc += Complex64::from_polar(w3 * wr * r * 2.0 * PI / 64.0 * v, ph);
                        }
                    }
                }
                let exact = acc / (2.0 * PI).powi(3);
                let err = (g.comp(0)[j] - exact).norm() / exact.norm();
                assert!(
                    err < 1e-6,
                    "direction {i}, mode {n:?}: {} vs {exact}",
                    g.comp(0)[j]
                );
            }
        }
    }

    #[test]
    fn corrector_makes_the_sum_solenoidal_and_normalized() {
        let fam = desk();
        let gj = GridJets::build(&fam, Grid3::new(32).unwrap()).unwrap();
        for i in 0..gj.len() {
            let w = gj.w(i, 0.2);
            assert!((norms::l2(&w) - 1.0).abs() < 1e-12);
            let total = w.add(&gj.wc(i, 0.2));
            let d = norms::l2(&ops::div(&total));
            assert!(d < 1e-10 * norms::l2(&ops::grad(&gj.g(i, 0.2))), "{d}");
            assert!(gj.jets[i].captured > 0.0 && gj.jets[i].captured <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn time_derivative_is_transport_along_xi() {
        let fam = desk();
        let gj = GridJets::build(&fam, Grid3::new(16).unwrap()).unwrap();
        let i = 2;
        let xi = gj.jets[i].xi;
        let mu = fam.mu;
        let g = gj.g(i, 0.4);
        let transport = g.apply_symbol(Rank::Scalar, move |n, f, o| {
            o[0] = f[0] * Complex64::new(0.0, mu * (n[0] * xi[0] + n[1] * xi[1] + n[2] * xi[2]));
        });
        let err = norms::l2(&gj.g_dt(i, 0.4).sub(&transport));
        assert!(err < 1e-10 * norms::l2(&transport));
    }
}
