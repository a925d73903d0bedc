//! Pointwise check of the principal-part product identity with analytic jets:
//! Θ_ℓ w_p⊗w_p = Σ a_ξ² P_{≠0}(W_ξ⊗W_ξ) + ρ Id − R̊_ℓ.
//!
//! Grid jets are truncated and overlap, so the identity is checked with the exact jets at
//! sampled points, using amplitudes built from a real mollified stress.
use super::level::Mollified;
use crate::frame::GeometricFrame;
use crate::jets::checks::w_l2_norm;
use crate::jets::JetFamily;
use crate::spectral::{tc, SpectralField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Value of every component of a band-limited field at an arbitrary point.
pub fn eval_at(f: &SpectralField, x: [f64; 3]) -> Vec<f64> {
    let g = f.grid;
    let len = g.len();
    let mut out = vec![0.0; f.ncomp()];
    for i in 0..len {
        let Some(n) = g.mode(i) else { continue };
        let ph = n[0] as f64 * x[0] + n[1] as f64 * x[1] + n[2] as f64 * x[2];
        let (s, c) = ph.sin_cos();
        for (k, o) in out.iter_mut().enumerate() {
            let z = f.coeffs[k * len + i];
            *o += z.re * c - z.im * s;
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProductIdentityReport {
    pub k: u64,
    pub lambda: f64,
    pub points: usize,
    pub points_in_support: usize,
    /// Largest pointwise defect, each relative to |ρId − R̊_ℓ| + Σ a²(|W|² + ⨍|W|²) at that point.
    pub relative: f64,
    pub max_defect: f64,
    pub scale: f64,
    /// ‖W_ξ‖²_{L²} − 1 per direction, by quadrature.
    pub normalization: Vec<f64>,
}

/// Checks the identity at `points` sampled points (half inside the tubes) at time t.
pub fn product_identity(
    fam: &JetFamily,
    frame: &GeometricFrame,
    moll: &Mollified,
    ell: f64,
    rho_factor: f64,
    t: f64,
    points: usize,
    seed: u64,
) -> ProductIdentityReport {
    let nd = fam.len();
    let norms: Vec<f64> = (0..nd).map(|i| w_l2_norm(fam, i, t).powi(2)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(points);
    for p in 0..points {
        if p % 2 == 0 {
            xs.push([0, 1, 2].map(|_| rng.random::<f64>() * 2.0 * PI));
        } else {
            let i = (p / 2) % nd;
            let x0 = fam.point_at(i, t, [0.0; 3]);
            let c0 = fam.coords(i, t, x0);
            let r = fam.r_perp * rng.random::<f64>().sqrt();
            let th = rng.random::<f64>() * 2.0 * PI;
            let y3 = fam.r_par * (2.0 * rng.random::<f64>() - 1.0);
            xs.push(fam.point_at(
                i,
                t,
                [c0.y1 + r * th.cos(), c0.y2 + r * th.sin(), c0.y3 + y3],
            ));
        }
    }
    let vol = (2.0 * PI).powi(3);
    let lift = moll.theta * moll.eta.max(0.0);
    let rows: Vec<(f64, f64, bool)> = xs
        .par_iter()
        .map(|&x| {
            let rv = eval_at(&moll.r, x);
            let mut r = [[0.0; 3]; 3];
            let mut fro2 = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    r[a][b] = 0.5 * (rv[tc(a, b)] + rv[tc(b, a)]);
                    fro2 += r[a][b] * r[a][b];
                }
            }
            let rho = rho_factor * (ell * ell + fro2).sqrt() + lift;
            let mut m = [[0.0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    m[a][b] = if a == b { 1.0 } else { 0.0 } - r[a][b] / rho;
                }
            }
            let g2 = frame.gamma2_unchecked(&m);
            let amp: Vec<f64> = g2
                .iter()
                .map(|g| vol.sqrt() * rho.sqrt() * g.max(0.0).sqrt())
                .collect();
            let ws: Vec<[f64; 3]> = (0..nd).map(|i| fam.w(i, t, x)).collect();
            let inside = ws.iter().any(|w| w.iter().any(|c| *c != 0.0));
            // Θ_ℓ w_p⊗w_p with w_p = Θ_ℓ^{-1/2} Σ a W
            let mut wp = [0.0; 3];
            for i in 0..nd {
                for c in 0..3 {
                    wp[c] += amp[i] * ws[i][c];
                }
            }
            let mut defect = 0.0;
            let mut base = 0.0;
            let mut size = 0.0;
            for i in 0..nd {
                let w2 = ws[i].iter().map(|c| c * c).sum::<f64>();
                size += amp[i] * amp[i] * (w2 + norms[i] / vol);
            }
            for a in 0..3 {
                for b in 0..3 {
                    let lhs = wp[a] * wp[b];
                    let mut rhs = if a == b { rho } else { 0.0 } - r[a][b];
                    for i in 0..nd {
                        let xi = frame.directions[i].xi_f();
                        rhs += amp[i]
                            * amp[i]
                            * (ws[i][a] * ws[i][b] - xi[a] * xi[b] * norms[i] / vol);
                    }
                    defect += (lhs - rhs).powi(2);
                    base += (if a == b { rho } else { 0.0 } - r[a][b]).powi(2);
                }
            }
            (defect.sqrt(), size + base.sqrt(), inside)
        })
        .collect();
    let max_defect = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let scale = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let relative = rows
        .iter()
        .map(|r| r.0 / r.1.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    ProductIdentityReport {
        k: fam.k,
        lambda: fam.lambda,
        points,
        points_in_support: rows.iter().filter(|r| r.2).count(),
        relative,
        max_defect,
        scale,
        normalization: norms.iter().map(|n| n - 1.0).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::place_tubes;
    use crate::integrator::level::{mollify_at, Drivers};
    use crate::integrator::run::{build_setups, run, History, LevelPlan, RunPlan};
    use crate::jets::build_profiles;
    use crate::noise::NoisePath;
    use crate::params::{EnergyProfile, EnergyShape};

    #[test]
    fn product_identity_on_a_built_step() {
        let profiles = build_profiles(2000).unwrap();
        let frame = GeometricFrame::standard().unwrap();
        let dt = 1.0 / 256.0;
        let lp = LevelPlan {
            k: 1,
            mu: 1.0,
            ell: 64.0 * dt,
            delta_next: 0.5,
            delta_after: 0.25,
        };
        let plan = RunPlan {
            grid: 16,
            dt,
            levels: vec![lp.clone(), lp],
            rho_factor: None,
            check_stride: 0,
            top_first: 0,
        };
        let noise = NoisePath::sample(5, dt, 1.0).unwrap();
        let energy =
            EnergyProfile::new(EnergyShape::Constant { value: 5.0 }, 1.0, 5.0, 1.0, 4.5).unwrap();
        let drv = Drivers {
            noise: &noise,
            energy: &energy,
            dt,
        };
        let setups = build_setups(&plan, &profiles, &frame).unwrap();
        let mut hist = History::new(1, 70);
        // stop the chain before the second level produces anything
        let first = crate::integrator::run::first_index(&setups, 0);
        let last = first + setups[0].time.lookback() as i64 + 66;
        let setups2 = build_setups(&plan, &profiles, &frame).unwrap();
        run(setups, &drv, 0, last.max(0), &mut [&mut hist]).unwrap();
        let i = hist.last_index().unwrap() + 1;
        let moll = mollify_at(&setups2[1], &drv, i, &|k| hist.get(k)).unwrap();
        let placement = place_tubes(&frame, 2, frame.len(), 400).unwrap();
        let fam = JetFamily::build(profiles, frame.clone(), 2, Some(&placement)).unwrap();
        let rep = product_identity(
            &fam,
            &frame,
            &moll,
            setups2[1].ell(),
            setups2[1].rho_factor,
            drv.t(i),
            400,
            1,
        );
        eprintln!("{rep:?}");
        assert!(rep.points_in_support > 100);
        assert!(rep.relative < 1e-6, "{}", rep.relative);
    }
}
