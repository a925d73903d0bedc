//! Rational direction set, the dyad decomposition R = Σ γ_ξ²(R) ξ⊗ξ near the identity,
//! tube offsets with a disjointness certificate, and the amplitude constant M.
use crate::error::{domain, Error, Result};
use nalgebra::{Matrix6, Vector6};
use num::integer::Integer;
use num::rational::Ratio;
use num::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::f64::consts::PI;

pub type Rat = Ratio<i64>;
pub type RVec = [Rat; 3];

pub fn rvec(num: [i64; 3], den: i64) -> RVec {
    [
        Rat::new(num[0], den),
        Rat::new(num[1], den),
        Rat::new(num[2], den),
    ]
}

pub fn rdot(a: &RVec, b: &RVec) -> Rat {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn rcross(a: &RVec, b: &RVec) -> RVec {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn to_f64(v: &RVec) -> [f64; 3] {
    let f = |r: &Rat| *r.numer() as f64 / *r.denom() as f64;
    [f(&v[0]), f(&v[1]), f(&v[2])]
}

/// One direction ξ with its orthonormal completion {ξ, A, ξ×A}.
#[derive(Clone, Debug, PartialEq)]
pub struct Direction {
    pub xi: RVec,
    pub a: RVec,
}

impl Direction {
    pub fn b(&self) -> RVec {
        rcross(&self.xi, &self.a)
    }

    pub fn xi_f(&self) -> [f64; 3] {
        to_f64(&self.xi)
    }
    pub fn a_f(&self) -> [f64; 3] {
        to_f64(&self.a)
    }
    pub fn b_f(&self) -> [f64; 3] {
        to_f64(&self.b())
    }
}

/// Symmetric 3×3 matrix as a vector in ℝ⁶, isometric for the Frobenius norm.
pub fn sym6(m: &[[f64; 3]; 3]) -> Vector6<f64> {
    let s = std::f64::consts::SQRT_2;
    Vector6::new(
        m[0][0],
        m[1][1],
        m[2][2],
        s * m[0][1],
        s * m[0][2],
        s * m[1][2],
    )
}

pub fn unsym6(v: &Vector6<f64>) -> [[f64; 3]; 3] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [
        [v[0], s * v[3], s * v[4]],
        [s * v[3], v[1], s * v[5]],
        [s * v[4], s * v[5], v[2]],
    ]
}

pub fn identity3() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

pub fn frob(m: &[[f64; 3]; 3]) -> f64 {
    m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Debug)]
pub struct GeometricFrame {
    pub directions: Vec<Direction>,
    pub n_star: i64,
    /// Rows of the inverse dyad matrix: γ²(R) = dyad_inv · sym6(R).
    pub dyad_inv: Matrix6<f64>,
    pub gamma2_id: [f64; 6],
    pub r_cert: f64,
    pub condition: f64,
}

fn lcm_denoms(vs: &[RVec]) -> i64 {
    vs.iter().flatten().fold(1i64, |acc, r| acc.lcm(r.denom()))
}

impl GeometricFrame {
    /// The fixed six-direction set {(4,±3,0), (0,4,±3), (3,0,±4)}/5 with A = e3, e1, e2.
    pub fn standard() -> Result<Self> {
        let e1 = rvec([1, 0, 0], 1);
        let e2 = rvec([0, 1, 0], 1);
        let e3 = rvec([0, 0, 1], 1);
        let dirs = vec![
            Direction {
                xi: rvec([4, 3, 0], 5),
                a: e3,
            },
            Direction {
                xi: rvec([4, -3, 0], 5),
                a: e3,
            },
            Direction {
                xi: rvec([0, 4, 3], 5),
                a: e1,
            },
            Direction {
                xi: rvec([0, 4, -3], 5),
                a: e1,
            },
            Direction {
                xi: rvec([3, 0, 4], 5),
                a: e2,
            },
            Direction {
                xi: rvec([3, 0, -4], 5),
                a: e2,
            },
        ];
        Self::from_directions(dirs)
    }

    pub fn from_directions(directions: Vec<Direction>) -> Result<Self> {
        if directions.len() != 6 {
            return domain(format!("need six directions, got {}", directions.len()));
        }
        let one = Rat::from_integer(1);
        for d in &directions {
            if rdot(&d.xi, &d.xi) != one || rdot(&d.a, &d.a) != one || !rdot(&d.xi, &d.a).is_zero()
            {
                return Err(Error::Invariant(format!(
                    "frame for {:?} is not orthonormal",
                    to_f64(&d.xi)
                )));
            }
        }
        let all: Vec<RVec> = directions.iter().flat_map(|d| [d.xi, d.a, d.b()]).collect();
        let n_star = lcm_denoms(&all);
        let mut dyads = Matrix6::zeros();
        for (c, d) in directions.iter().enumerate() {
            let x = d.xi_f();
            let mut m = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] = x[i] * x[j];
                }
            }
            dyads.set_column(c, &sym6(&m));
        }
        let inv = dyads
            .try_inverse()
            .ok_or_else(|| Error::Numerical("dyads ξ⊗ξ are linearly dependent".into()))?;
        let sv = dyads.singular_values();
        let condition = sv.max() / sv.min();
        let g = inv * sym6(&identity3());
        let mut gamma2_id = [0.0; 6];
        let mut r = f64::INFINITY;
        for i in 0..6 {
            gamma2_id[i] = g[i];
            if g[i] <= 0.0 {
                return Err(Error::Numerical(format!(
                    "γ²(Id) not positive for direction {i}"
                )));
            }
            r = r.min(g[i] / inv.row(i).norm());
        }
        Ok(GeometricFrame {
            directions,
            n_star,
            dyad_inv: inv,
            gamma2_id,
            r_cert: r * (1.0 - 1e-9),
            condition,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// γ_ξ²(R) without the certified-ball check.
    pub fn gamma2_unchecked(&self, r: &[[f64; 3]; 3]) -> [f64; 6] {
        let g = self.dyad_inv * sym6(r);
        [g[0], g[1], g[2], g[3], g[4], g[5]]
    }

    /// γ_ξ(R) ≥ 0 with Σ γ_ξ² ξ⊗ξ = R, for ‖R − Id‖_F ≤ r_cert.
    pub fn gamma(&self, r: &[[f64; 3]; 3]) -> Result<[f64; 6]> {
        let mut e = *r;
        for (i, row) in e.iter_mut().enumerate() {
            row[i] -= 1.0;
        }
        let dist = frob(&e);
        if dist > self.r_cert {
            return Err(Error::Domain(format!(
                "‖R − Id‖_F = {dist:.6} exceeds the certified radius {:.6}",
                self.r_cert
            )));
        }
        let g2 = self.gamma2_unchecked(r);
        let mut out = [0.0; 6];
        for i in 0..6 {
            out[i] = g2[i].max(0.0).sqrt();
        }
        Ok(out)
    }

    /// Σ γ_ξ² ξ⊗ξ.
    pub fn reconstruct(&self, gamma: &[f64; 6]) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for (d, g) in self.directions.iter().zip(gamma) {
            let x = d.xi_f();
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] += g * g * x[i] * x[j];
                }
            }
        }
        m
    }

    /// Sampled cross-check of the certified radius: bisection on r until every sampled point
    /// of the sphere ‖R − Id‖_F = r keeps all γ² > 0. Never smaller than the closed form.
    pub fn r_cert_bisection(&self, samples: usize, seed: u64) -> f64 {
        let dirs = sphere_samples(samples, seed);
        let ok = |r: f64| {
            dirs.iter().all(|d| {
                let g = self.dyad_inv * (sym6(&identity3()) + d * r);
                g.iter().all(|x| *x > 0.0)
            })
        };
        let (mut lo, mut hi) = (0.0, 2.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn to_json(&self, placement: Option<&TubePlacement>) -> serde_json::Value {
        let rj = |v: &RVec| {
            serde_json::json!(v
                .iter()
                .map(|r| [*r.numer(), *r.denom()])
                .collect::<Vec<_>>())
        };
        serde_json::json!({
            "directions": self.directions.iter().map(|d| serde_json::json!({
                "xi": rj(&d.xi), "a": rj(&d.a), "xi_cross_a": rj(&d.b()),
            })).collect::<Vec<_>>(),
            "n_star": self.n_star,
            "r_cert": self.r_cert,
            "dyad_condition": self.condition,
            "gamma2_identity": self.gamma2_id,
            "placement": placement.map(|p| serde_json::json!({
                "k": p.k,
                "offsets": p.offsets,
                "margin": finite_or_null(p.margin),
                "lattice_margin": finite_or_null(p.lattice_margin),
                "displayed_margin": finite_or_null(p.displayed_margin),
            })),
        })
    }
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else {
        serde_json::Value::Null
    }
}

/// Uniform unit vectors in ℝ⁶ (Gaussian normalization), fixed seed.
pub fn sphere_samples(n: usize, seed: u64) -> Vec<Vector6<f64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let normal = rand_distr::StandardNormal;
    (0..n)
        .map(|_| {
            let v = Vector6::from_fn(|_, _| rng.sample::<f64, _>(normal));
            v / v.norm()
        })
        .collect()
}

/// Random symmetric R with ‖R − Id‖_F ≤ radius (uniform in the ball).
pub fn random_near_identity(n: usize, radius: f64, seed: u64) -> Vec<[[f64; 3]; 3]> {
    let dirs = sphere_samples(n, seed);
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    dirs.iter()
        .map(|d| {
            let r = radius * rng.random::<f64>().powf(1.0 / 6.0);
            unsym6(&(sym6(&identity3()) + d * r))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TubePlacement {
    pub k: u64,
    pub offsets: Vec<[f64; 3]>,
    /// min(lattice_margin, displayed_margin); +∞ for a single direction.
    pub margin: f64,
    pub lattice_margin: f64,
    pub displayed_margin: f64,
}

fn igcd(a: i64, b: i64) -> i64 {
    a.gcd(&b)
}

/// Closest-approach spacing s of the axis distances between the ξ- and ξ'-tube families:
/// distances are dist((α − α')·n, sℤ) with n = ξ×ξ'/|ξ×ξ'|.
pub fn pair_spacing(
    d1: &Direction,
    d2: &Direction,
    n_star: i64,
    k: u64,
) -> Option<(f64, [f64; 3])> {
    let ns = Rat::from_integer(n_star);
    let scale = |v: &RVec| -> [i64; 3] {
        let w = [v[0] * ns, v[1] * ns, v[2] * ns];
        [w[0].to_integer(), w[1].to_integer(), w[2].to_integer()]
    };
    let x1 = scale(&d1.xi);
    let x2 = scale(&d2.xi);
    let nv = [
        x1[1] * x2[2] - x1[2] * x2[1],
        x1[2] * x2[0] - x1[0] * x2[2],
        x1[0] * x2[1] - x1[1] * x2[0],
    ];
    if nv.iter().all(|c| *c == 0) {
        return None;
    }
    let dot = |a: [i64; 3]| a[0] * nv[0] + a[1] * nv[1] + a[2] * nv[2];
    let g = [scale(&d1.a), scale(&d1.b()), scale(&d2.a), scale(&d2.b())]
        .iter()
        .fold(0i64, |acc, v| igcd(acc, dot(*v).abs()));
    let norm = ((nv[0] * nv[0] + nv[1] * nv[1] + nv[2] * nv[2]) as f64).sqrt();
    let s = 2.0 * PI * g as f64 / ((n_star * n_star) as f64 * k as f64 * norm);
    Some((
        s,
        [
            nv[0] as f64 / norm,
            nv[1] as f64 / norm,
            nv[2] as f64 / norm,
        ],
    ))
}

fn dist_to_lattice(x: f64, s: f64) -> f64 {
    let r = x.rem_euclid(s);
    r.min(s - r)
}

/// Margins (distance − 2/(n_*λ)) of a set of offsets: exact pair-lattice certificate and the
/// displayed planar condition over z₁, z₂ ∈ {−2, …, 2}.
pub fn placement_margins(frame: &GeometricFrame, k: u64, offsets: &[[f64; 3]]) -> (f64, f64) {
    let lambda = (k as f64).powi(7);
    let need = 2.0 / (frame.n_star as f64 * lambda);
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let mut lat = f64::INFINITY;
    let mut disp = f64::INFINITY;
    let nd = offsets.len().min(frame.len());
    for i in 0..nd {
        for j in 0..i {
            let (di, dj) = (&frame.directions[i], &frame.directions[j]);
            let diff = [
                offsets[i][0] - offsets[j][0],
                offsets[i][1] - offsets[j][1],
                offsets[i][2] - offsets[j][2],
            ];
            if let Some((s, n)) = pair_spacing(di, dj, frame.n_star, k) {
                lat = lat.min(dist_to_lattice(dot(diff, n), s) - need);
            }
            let u = dot(offsets[i], di.a_f()) - dot(offsets[j], dj.a_f());
            let v = dot(offsets[i], di.b_f()) - dot(offsets[j], dj.b_f());
            for z1 in -2..=2 {
                for z2 in -2..=2 {
                    let d = ((u - 2.0 * PI * z1 as f64).powi(2)
                        + (v - 2.0 * PI * z2 as f64).powi(2))
                    .sqrt();
                    disp = disp.min(d - need);
                }
            }
        }
    }
    (lat, disp)
}

fn halton(i: usize, base: usize) -> f64 {
    let (mut f, mut r, mut i) = (1.0, 0.0, i);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Place offsets α_ξ one direction at a time, choosing among `budget` Halton candidates the one
/// with the largest margin against the directions already placed.
pub fn place_tubes(
    frame: &GeometricFrame,
    k: u64,
    count: usize,
    budget: usize,
) -> Result<TubePlacement> {
    if k < 1 {
        return domain("λ must be at least 1");
    }
    let count = count.min(frame.len());
    let mut offsets: Vec<[f64; 3]> = vec![[0.0; 3]];
    for _ in 1..count {
        let mut best = (f64::NEG_INFINITY, [0.0; 3]);
        for c in 1..=budget {
            let cand = [
                2.0 * PI * halton(c, 2),
                2.0 * PI * halton(c, 3),
                2.0 * PI * halton(c, 5),
            ];
            let mut trial = offsets.clone();
            trial.push(cand);
            let (l, d) = placement_margins(frame, k, &trial);
            let m = l.min(d);
            if m > best.0 {
                best = (m, cand);
            }
        }
        offsets.push(best.1);
    }
    let (lattice_margin, displayed_margin) = placement_margins(frame, k, &offsets);
    let margin = lattice_margin.min(displayed_margin);
    if margin <= 0.0 {
        return Err(Error::Placement {
            best_margin: margin,
        });
    }
    Ok(TubePlacement {
        k,
        offsets,
        margin,
        lattice_margin,
        displayed_margin,
    })
}

/// Derivative of order j of √u: c_j u^{1/2 − j}.
fn sqrt_deriv_coeff(j: u32) -> f64 {
    (0..j).map(|i| 0.5 - i as f64).product()
}

/// Multi-indices α ∈ ℕ⁶ with |α| = order.
fn multi_indices(order: u32) -> Vec<[u32; 6]> {
    let mut out = Vec::new();
    fn rec(pos: usize, left: u32, cur: &mut [u32; 6], out: &mut Vec<[u32; 6]>) {
        if pos == 5 {
            cur[5] = left;
            out.push(*cur);
            return;
        }
        for a in 0..=left {
            cur[pos] = a;
            rec(pos + 1, left - a, cur, out);
        }
    }
    rec(0, order, &mut [0; 6], &mut out);
    out
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct ConstantM {
    pub n: u32,
    pub value: f64,
    pub samples: usize,
    pub radius: f64,
    pub fd_step: f64,
}

/// Central finite-difference estimate of D^α γ_i at x (coordinates in the sym6 basis).
fn fd_derivative(frame: &GeometricFrame, x: &Vector6<f64>, alpha: &[u32; 6], h: f64) -> [f64; 6] {
    // product of one-dimensional central stencils: Σ (−1)^i C(m,i) f(x + (m/2 − i)h)
    let mut stencil: Vec<(Vector6<f64>, f64)> = vec![(*x, 1.0)];
    for ax in 0..6 {
        let m = alpha[ax];
        if m == 0 {
            continue;
        }
        let mut next = Vec::new();
        for (p, w) in &stencil {
            let mut binom = 1.0;
            for i in 0..=m {
                let mut q = *p;
                q[ax] += (m as f64 / 2.0 - i as f64) * h;
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                next.push((q, w * sign * binom / h.powi(m as i32)));
                binom = binom * (m - i) as f64 / (i + 1) as f64;
            }
        }
        stencil = next;
    }
    let id = sym6(&identity3());
    let mut out = [0.0; 6];
    for (p, w) in stencil {
        let g = frame.dyad_inv * (id + p);
        for i in 0..6 {
            out[i] += w * g[i].max(0.0).sqrt();
        }
    }
    out
}

/// M = 8|Λ|(1+8π³)^{1/2} sup_ξ(‖γ_ξ‖_C + Σ_{|α|≤N} ‖D^α γ_ξ‖_C), sup over `samples` points of
/// the ball ‖R − Id‖_F ≤ radius, derivatives by central differences.
pub fn constant_m(
    frame: &GeometricFrame,
    n: u32,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<ConstantM> {
    if n > 4 {
        return domain(format!("derivative order {n} exceeds 4"));
    }
    if radius > frame.r_cert {
        return domain(format!(
            "sampling radius {radius} exceeds r_cert {}",
            frame.r_cert
        ));
    }
    use rayon::prelude::*;
    let h = 1e-3 * radius.max(1e-3);
    let pts: Vec<Vector6<f64>> = {
        let dirs = sphere_samples(samples, seed);
        let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(17));
        dirs.into_iter()
            .map(|d| d * (radius * rng.random::<f64>().powf(1.0 / 6.0)))
            .collect()
    };
    let indices: Vec<[u32; 6]> = (0..=n).flat_map(multi_indices).collect();
    // sup over points of each term, per direction
    let sups: Vec<[f64; 6]> = indices
        .iter()
        .map(|alpha| {
            let parts: Vec<[f64; 6]> = pts
                .par_chunks(1024)
                .map(|chunk| {
                    let mut s = [0.0f64; 6];
                    for x in chunk {
                        let d = if alpha.iter().all(|a| *a == 0) {
                            let g = frame.dyad_inv * (sym6(&identity3()) + x);
                            [0, 1, 2, 3, 4, 5].map(|i| g[i].max(0.0).sqrt())
                        } else {
                            fd_derivative(frame, x, alpha, h)
                        };
                        for i in 0..6 {
                            s[i] = s[i].max(d[i].abs());
                        }
                    }
                    s
                })
                .collect();
            parts.iter().fold([0.0f64; 6], |mut acc, p| {
                for i in 0..6 {
                    acc[i] = acc[i].max(p[i]);
                }
                acc
            })
        })
        .collect();
    let mut best: f64 = 0.0;
    for i in 0..6 {
        // ‖γ‖_C plus the α-sum (which includes α = 0 again)
        let total = sups[0][i] + sups.iter().map(|s| s[i]).sum::<f64>();
        best = best.max(total);
    }
    let pref = 8.0 * frame.len() as f64 * (1.0 + 8.0 * PI.powi(3)).sqrt();
    Ok(ConstantM {
        n,
        value: pref * best,
        samples,
        radius,
        fd_step: h,
    })
}

/// Exact sup of the same expression: γ_i² is affine in R, so every derivative of γ_i has a
/// closed form and its sup over the ball sits where γ_i² is smallest.
pub fn constant_m_exact(frame: &GeometricFrame, n: u32, radius: f64) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..6 {
        let row: Vec<f64> = frame.dyad_inv.row(i).iter().cloned().collect();
        let len = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        let c = frame.gamma2_id[i];
        let umax = c + radius * len;
        let umin = c - radius * len;
        let mut total = 2.0 * umax.sqrt();
        for j in 1..=n {
            let cj = sqrt_deriv_coeff(j).abs() * umin.powf(0.5 - j as f64);
            total += multi_indices(j)
                .iter()
                .map(|a| {
                    cj * (0..6)
                        .map(|k| row[k].abs().powi(a[k] as i32))
                        .product::<f64>()
                })
                .sum::<f64>();
        }
        best = best.max(total);
    }
    8.0 * frame.len() as f64 * (1.0 + 8.0 * PI.powi(3)).sqrt() * best
}

pub fn is_positive(x: &Rat) -> bool {
    x.is_positive()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_frame_is_exact() {
        let f = GeometricFrame::standard().unwrap();
        assert_eq!(f.n_star, 5);
        let ns = Rat::from_integer(5);
        for d in &f.directions {
            for v in [d.xi, d.a, d.b()] {
                for c in v {
                    assert!((c * ns).is_integer());
                }
            }
            assert_eq!(rdot(&d.b(), &d.b()), Rat::from_integer(1));
        }
        for g in f.gamma2_id {
            assert!((g - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_reconstructs() {
        let f = GeometricFrame::standard().unwrap();
        let g = f.gamma(&identity3()).unwrap();
        let m = f.reconstruct(&g);
        let mut e = m;
        for i in 0..3 {
            e[i][i] -= 1.0;
        }
        assert!(frob(&e) < 1e-12);
    }

    #[test]
    fn certified_radius_closed_form_is_sharp() {
        let f = GeometricFrame::standard().unwrap();
        assert!((f.r_cert - 0.46312).abs() < 1e-4, "{}", f.r_cert);
        let b = f.r_cert_bisection(20_000, 1);
        assert!(b >= f.r_cert);
        assert!(b < f.r_cert * 1.05);
    }

    #[test]
    fn outside_ball_rejected() {
        let f = GeometricFrame::standard().unwrap();
        let mut r = identity3();
        r[0][0] += 0.5;
        assert!(matches!(f.gamma(&r), Err(Error::Domain(_))));
    }

    #[test]
    fn single_direction_has_infinite_margin() {
        let f = GeometricFrame::standard().unwrap();
        let p = place_tubes(&f, 2, 1, 16).unwrap();
        assert!(p.margin.is_infinite());
    }

    #[test]
    fn colliding_offsets_flagged() {
        let f = GeometricFrame::standard().unwrap();
        let (l, d) = placement_margins(&f, 2, &[[0.0; 3], [0.0; 3]]);
        assert!(l < 0.0 && d < 0.0);
    }

    #[test]
    fn sqrt_derivative_coefficients() {
        assert_eq!(sqrt_deriv_coeff(0), 1.0);
        assert_eq!(sqrt_deriv_coeff(1), 0.5);
        assert_eq!(sqrt_deriv_coeff(2), -0.25);
        assert_eq!(multi_indices(2).len(), 21);
    }
}
