//! Analytic intermittent jets: exact composed formulas evaluated at arbitrary (t, x).
use super::profiles::ProfileSet;
use crate::error::{domain, Error, Result};
use crate::frame::{GeometricFrame, TubePlacement};
use std::f64::consts::PI;

#[inline]
pub(crate) fn wrap(y: f64) -> f64 {
    (y + PI).rem_euclid(2.0 * PI) - PI
}

#[inline]
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[derive(Clone, Debug)]
pub struct JetFamily {
    pub profiles: ProfileSet,
    pub frame: GeometricFrame,
    pub k: u64,
    pub lambda: f64,
    pub r_perp: f64,
    pub r_par: f64,
    pub mu: f64,
    pub offsets: Vec<[f64; 3]>,
    /// Present when supports are certified disjoint.
    pub placement: Option<TubePlacement>,
}

/// Frame coordinates (y₁, y₂, y₃) of a point, each wrapped to [−π, π).
#[derive(Clone, Copy, Debug)]
pub struct FrameCoords {
    pub y1: f64,
    pub y2: f64,
    pub y3: f64,
}

impl JetFamily {
    /// λ = k⁷, r_⊥ = k⁻⁶, r_∥ = k⁻⁴, μ = k⁹, with certified tube placement.
    pub fn build(
        profiles: ProfileSet,
        frame: GeometricFrame,
        k: u64,
        placement: Option<&TubePlacement>,
    ) -> Result<Self> {
        if k < 2 {
            return domain(format!("k = {k}: certified jets need k ≥ 2"));
        }
        let placement =
            placement.ok_or_else(|| Error::Precondition("tube placement missing".into()))?;
        if placement.k != k || placement.offsets.len() < frame.len() {
            return Err(Error::Precondition(format!(
                "placement is for k = {} with {} offsets",
                placement.k,
                placement.offsets.len()
            )));
        }
        if placement.margin <= 0.0 {
            return Err(Error::Placement {
                best_margin: placement.margin,
            });
        }
        let mut f = Self::uncertified(profiles, frame, k, placement.offsets.clone())?;
        f.placement = Some(placement.clone());
        Ok(f)
    }

    /// Same formulas without a disjointness certificate; used at desk scale (k = 1 is allowed).
    pub fn uncertified(
        profiles: ProfileSet,
        frame: GeometricFrame,
        k: u64,
        offsets: Vec<[f64; 3]>,
    ) -> Result<Self> {
        if k < 1 {
            return domain("k must be positive");
        }
        if offsets.len() < frame.len() {
            return domain(format!(
                "{} offsets for {} directions",
                offsets.len(),
                frame.len()
            ));
        }
        let kf = k as f64;
        Ok(JetFamily {
            profiles,
            frame,
            k,
            lambda: kf.powi(7),
            r_perp: kf.powi(-6),
            r_par: kf.powi(-4),
            mu: kf.powi(9),
            offsets,
            placement: None,
        })
    }

    pub fn len(&self) -> usize {
        self.frame.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame.is_empty()
    }

    /// The oscillation factor n_* r_⊥ λ = n_* k.
    pub fn scale(&self) -> f64 {
        (self.frame.n_star as u64 * self.k) as f64
    }

    /// Prefactor 1/(n_*λ)² of the potential.
    pub fn potential_factor(&self) -> f64 {
        (self.frame.n_star as f64 * self.lambda).powi(-2)
    }

    pub fn coords(&self, i: usize, t: f64, x: [f64; 3]) -> FrameCoords {
        let d = &self.frame.directions[i];
        let a = self.offsets[i];
        let rel = [x[0] - a[0], x[1] - a[1], x[2] - a[2]];
        let s = self.scale();
        FrameCoords {
            y1: wrap(s * dot(rel, d.a_f())),
            y2: wrap(s * dot(rel, d.b_f())),
            y3: wrap(s * (dot(x, d.xi_f()) + self.mu * t)),
        }
    }

    /// Point with the given (unwrapped) frame coordinates, wrapped into [0, 2π)³.
    pub fn point_at(&self, i: usize, t: f64, y: [f64; 3]) -> [f64; 3] {
        let d = &self.frame.directions[i];
        let (xi, a, b) = (d.xi_f(), d.a_f(), d.b_f());
        let s = self.scale();
        let al = self.offsets[i];
        let along = y[2] / s - self.mu * t - dot(al, xi);
        let mut x = [0.0; 3];
        for c in 0..3 {
            x[c] = (al[c] + y[0] / s * a[c] + y[1] / s * b[c] + along * xi[c]).rem_euclid(2.0 * PI);
        }
        x
    }

    /// Periodized ψ_{r_∥}: (2π)^{-1/2} r_∥^{-1/2} ψ(y/r_∥) and its y-derivatives up to order 2.
    pub fn psi_tilde(&self, y: f64, order: u32) -> f64 {
        let r = self.r_par;
        let s = wrap(y) / r;
        let c = (2.0 * PI * r).powf(-0.5);
        match order {
            0 => c * self.profiles.psi(s),
            1 => c / r * self.profiles.psi_d1(s),
            2 => c / (r * r) * self.profiles.psi_d2(s),
            _ => panic!("psi_tilde: derivative order {order} not available"),
        }
    }

    /// Periodized φ_{r_⊥}: (2π)^{-1} r_⊥^{-1} φ(|y|/r_⊥).
    pub fn phi_tilde(&self, y1: f64, y2: f64) -> f64 {
        let r = self.r_perp;
        let rho = wrap(y1).hypot(wrap(y2)) / r;
        self.profiles.phi(rho) / (2.0 * PI * r)
    }

    pub fn phi_pot_tilde(&self, y1: f64, y2: f64) -> f64 {
        let r = self.r_perp;
        let rho = wrap(y1).hypot(wrap(y2)) / r;
        self.profiles.phi_pot(rho) / (2.0 * PI * r)
    }

    /// y-gradient of the periodized potential.
    pub fn phi_pot_tilde_grad(&self, y1: f64, y2: f64) -> [f64; 2] {
        let r = self.r_perp;
        let (u, v) = (wrap(y1), wrap(y2));
        let rr = u.hypot(v);
        if rr == 0.0 {
            return [0.0, 0.0];
        }
        let d = self.profiles.phi_pot_dr(rr / r) / (2.0 * PI * r * r);
        [d * u / rr, d * v / rr]
    }

    pub fn psi(&self, i: usize, t: f64, x: [f64; 3]) -> f64 {
        self.psi_tilde(self.coords(i, t, x).y3, 0)
    }

    pub fn phi(&self, i: usize, x: [f64; 3]) -> f64 {
        let c = self.coords(i, 0.0, x);
        self.phi_tilde(c.y1, c.y2)
    }

    pub fn phi_pot(&self, i: usize, x: [f64; 3]) -> f64 {
        let c = self.coords(i, 0.0, x);
        self.phi_pot_tilde(c.y1, c.y2)
    }

    /// W = ξ ψ φ.
    pub fn w(&self, i: usize, t: f64, x: [f64; 3]) -> [f64; 3] {
        let c = self.coords(i, t, x);
        let amp = self.psi_tilde(c.y3, 0);
        if amp == 0.0 {
            return [0.0; 3];
        }
        let amp = amp * self.phi_tilde(c.y1, c.y2);
        let xi = self.frame.directions[i].xi_f();
        [amp * xi[0], amp * xi[1], amp * xi[2]]
    }

    /// Corrector W^c = s (ξ·∇ψ) ∇Φ, s = 1/(n_*λ)².
    pub fn wc(&self, i: usize, t: f64, x: [f64; 3]) -> [f64; 3] {
        let c = self.coords(i, t, x);
        let dpsi = self.psi_tilde(c.y3, 1);
        if dpsi == 0.0 {
            return [0.0; 3];
        }
        let g = self.phi_pot_tilde_grad(c.y1, c.y2);
        let d = &self.frame.directions[i];
        let (a, b) = (d.a_f(), d.b_f());
        let f = self.potential_factor() * self.scale() * self.scale() * dpsi;
        [0, 1, 2].map(|j| f * (g[0] * a[j] + g[1] * b[j]))
    }

    /// Potential V = s ξ ψ Φ.
    pub fn v(&self, i: usize, t: f64, x: [f64; 3]) -> [f64; 3] {
        let c = self.coords(i, t, x);
        let amp =
            self.potential_factor() * self.psi_tilde(c.y3, 0) * self.phi_pot_tilde(c.y1, c.y2);
        let xi = self.frame.directions[i].xi_f();
        [amp * xi[0], amp * xi[1], amp * xi[2]]
    }

    /// Distance of x from the nearest axis of the ξ_i tube lattice, in the plane ⟂ ξ.
    pub fn axis_distance(&self, i: usize, x: [f64; 3]) -> f64 {
        let c = self.coords(i, 0.0, x);
        c.y1.hypot(c.y2) / self.scale()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::place_tubes;

    fn family(k: u64) -> JetFamily {
        let frame = GeometricFrame::standard().unwrap();
        let pl = place_tubes(&frame, k, 6, 400).unwrap();
        JetFamily::build(ProfileSet::build(256).unwrap(), frame, k, Some(&pl)).unwrap()
    }

    #[test]
    fn build_preconditions() {
        let frame = GeometricFrame::standard().unwrap();
        let p = ProfileSet::build(256).unwrap();
        assert!(matches!(
            JetFamily::build(p.clone(), frame.clone(), 2, None),
            Err(Error::Precondition(_))
        ));
        assert!(JetFamily::build(p, frame, 1, None).is_err());
    }

    #[test]
    fn point_at_inverts_coords() {
        let f = family(2);
        for i in 0..6 {
            let x = f.point_at(i, 0.013, [0.01, -0.02, 0.4]);
            let c = f.coords(i, 0.013, x);
            assert!(
                (c.y1 - 0.01).abs() < 1e-9
                    && (c.y2 + 0.02).abs() < 1e-9
                    && (c.y3 - 0.4).abs() < 1e-9,
                "{c:?}"
            );
        }
    }

    #[test]
    fn corrector_matches_finite_difference_of_potential() {
        // W + W^c = curl curl V; check curl curl V − W = W^c at a point by nested central differences
        let f = family(2);
        let i = 1;
        let x0 = f.point_at(i, 0.0, [0.3 * f.r_perp, -0.2 * f.r_perp, 0.35 * f.r_par]);
        let h = 0.04 * f.r_perp / f.scale();
        let v = |x: [f64; 3]| f.v(i, 0.0, x);
        let shift = |x: [f64; 3], d: usize, s: f64| {
            let mut y = x;
            y[d] += s;
            y
        };
        let d2 = |c: usize, a: usize, b: usize| -> f64 {
            let g = |x: [f64; 3]| (v(shift(x, b, h))[c] - v(shift(x, b, -h))[c]) / (2.0 * h);
            (g(shift(x0, a, h)) - g(shift(x0, a, -h))) / (2.0 * h)
        };
        let w = f.w(i, 0.0, x0);
        let wc = f.wc(i, 0.0, x0);
        let scale = w.iter().map(|c| c.abs()).fold(0.0, f64::max);
        for c in 0..3 {
            // (curl curl V)_c = ∂_c div V − ΔV_c
            let grad_div: f64 = (0..3).map(|j| d2(j, c, j)).sum();
            let lap: f64 = (0..3).map(|j| d2(c, j, j)).sum();
            let cc = grad_div - lap;
            assert!(
                (cc - w[c] - wc[c]).abs() < 2e-2 * scale,
                "c={c}: {cc} vs {}",
                w[c] + wc[c]
            );
        }
    }
}
