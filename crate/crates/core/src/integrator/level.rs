//! One level of the iteration as a streaming stage: level-q snapshots go in, level-(q+1)
//! snapshots come out, one time index at a time.
//!
//! Time derivatives inside the construction are central differences on the run's uniform grid.
//! Mollification in time only looks at strictly earlier samples, so the output at index i depends
//! on the input up to i (velocity) and i + 1 (stress and pressure, through the central difference).
use super::mollify::{weighted_sum, SpaceMollifier};
use super::products::{at, split_trace, sym_outer, vec_at, Dealias, SYM};
use crate::error::{Error, Result};
use crate::frame::GeometricFrame;
use crate::jets::grid::GridJets;
use crate::noise::{NoisePath, TimeMollifier};
use crate::params::EnergyProfile;
use crate::spectral::norms::{det_sum_map, l2};
use crate::spectral::ops::{
    curl, div, grad, inv_divergence, inv_laplacian, leray, project_ge, project_nonzero,
    r_composition, RComposition,
};
use crate::spectral::{tc, Grid3, PhysicalField, Rank, SpectralField};
use num::complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::VecDeque;
use std::f64::consts::PI;
use std::sync::Arc;

fn vol() -> f64 {
    (2.0 * PI).powi(3)
}

/// Noise path and energy profile sampled on the run's time grid.
#[derive(Clone, Copy)]
pub struct Drivers<'a> {
    pub noise: &'a NoisePath,
    pub energy: &'a EnergyProfile,
    pub dt: f64,
}

impl Drivers<'_> {
    pub fn t(&self, i: i64) -> f64 {
        i as f64 * self.dt
    }

    pub fn theta(&self, i: i64) -> f64 {
        self.noise.theta_at(i)
    }

    pub fn e(&self, i: i64) -> f64 {
        self.energy.eval(self.t(i))
    }

    /// Θ⁻²e at index i.
    pub fn target(&self, i: i64) -> f64 {
        self.e(i) / self.theta(i).powi(2)
    }
}

/// Snapshot of (v_q, R̊_q, p_q) at one time index, with the truncated product v⊗v.
#[derive(Clone, Debug)]
pub struct LevelRecord {
    pub q: usize,
    pub index: i64,
    pub t: f64,
    pub v: PhysicalField,
    pub r: PhysicalField,
    pub p: PhysicalField,
    pub vv: PhysicalField,
    /// ‖v‖²_{L²}.
    pub energy: f64,
    pub zero: bool,
}

impl LevelRecord {
    pub fn zero(q: usize, grid: Grid3, index: i64, dt: f64) -> Self {
        LevelRecord {
            q,
            index,
            t: index as f64 * dt,
            v: PhysicalField::zeros(grid, Rank::Vector),
            r: PhysicalField::zeros(grid, Rank::Tensor),
            p: PhysicalField::zeros(grid, Rank::Scalar),
            vv: PhysicalField::zeros(grid, Rank::Tensor),
            energy: 0.0,
            zero: true,
        }
    }

    /// SHA-256 over the bit patterns of v, R̊ and p.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for f in [&self.v, &self.r, &self.p] {
            for x in &f.data {
                h.update(x.to_bits().to_le_bytes());
            }
        }
        h.finalize().into()
    }

    pub fn velocity_digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for x in &self.v.data {
            h.update(x.to_bits().to_le_bytes());
        }
        h.finalize().into()
    }
}

pub fn energy_of(v: &PhysicalField) -> f64 {
    v.grid.cell_volume() * det_sum_map(v.data.len(), |i| v.data[i] * v.data[i])
}

/// Immutable configuration of one level.
#[derive(Clone, Debug)]
pub struct LevelSetup {
    /// Level consumed; the stage produces q + 1.
    pub q: usize,
    pub dealias: Dealias,
    pub time: TimeMollifier,
    pub space: SpaceMollifier,
    pub jets: GridJets,
    pub frame: GeometricFrame,
    pub mu: f64,
    /// Threshold of the high-pass in the oscillation stress.
    pub kappa: f64,
    /// ρ = c √(ℓ² + ‖R̊_ℓ‖²) + Θ_ℓ η_ℓ.
    pub rho_factor: f64,
    pub delta_next: f64,
    pub delta_after: f64,
}

impl LevelSetup {
    pub fn ell(&self) -> f64 {
        self.time.ell
    }

    pub fn base(&self) -> Grid3 {
        self.dealias.base
    }

    /// η_q at index i from ‖v_q(i)‖².
    pub fn eta(&self, drv: &Drivers, i: i64, energy: f64) -> f64 {
        (drv.target(i) * (1.0 - self.delta_after) - energy) / (3.0 * vol())
    }
}

/// Mollified inputs at one index.
#[derive(Clone, Debug)]
pub struct Mollified {
    pub index: i64,
    pub v: SpectralField,
    pub r: SpectralField,
    pub p: SpectralField,
    /// (Θ P_N(v_q⊗v_q)) mollified.
    pub m: SpectralField,
    pub theta: f64,
    pub eta: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct AmplitudeStats {
    pub max_ratio: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub max_amplitude: f64,
}

/// Amplitudes on the base band: a_ξ, a_ξ² and ρ.
#[derive(Clone, Debug)]
pub struct AmplitudeSet {
    pub rho: SpectralField,
    pub a: Vec<SpectralField>,
    pub a2: Vec<SpectralField>,
    pub stats: AmplitudeStats,
    /// Fine-grid samples of a_ξ before truncation.
    fine_a: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct PerturbationParts {
    pub wp: SpectralField,
    pub wc: SpectralField,
    pub wt: SpectralField,
}

impl PerturbationParts {
    pub fn total(&self) -> SpectralField {
        self.wp.add(&self.wc).add(&self.wt)
    }
}

/// Everything computed at one index before the central differences are available.
#[derive(Clone, Debug)]
struct Partial {
    index: i64,
    moll: Mollified,
    amp: AmplitudeSet,
    parts: PerturbationParts,
    /// P_N(a_ξ² g_ξ²).
    q4: Vec<SpectralField>,
    /// P_N(g_ξ²).
    gsq: Vec<SpectralField>,
}

/// The four stress pieces and their pressures (added to the equation as div R + ∇π).
#[derive(Clone, Debug)]
pub struct ReynoldsDecomposition {
    pub r_lin: SpectralField,
    pub r_cor: SpectralField,
    pub r_osc: SpectralField,
    /// Part of r_osc not given by the closed-form terms: cross terms between directions
    /// and truncation defects of the band-limited products.
    pub r_rem: SpectralField,
    pub r_com: SpectralField,
    pub p_lin: SpectralField,
    pub p_cor: SpectralField,
    pub p_osc: SpectralField,
    pub p_com: SpectralField,
}

impl ReynoldsDecomposition {
    pub fn stress(&self) -> SpectralField {
        self.r_lin
            .add(&self.r_cor)
            .add(&self.r_osc)
            .add(&self.r_com)
    }

    /// p_{q+1}: the equation carries +∇p while the pieces enter as +∇π.
    pub fn pressure(&self) -> SpectralField {
        self.p_lin
            .add(&self.p_cor)
            .add(&self.p_osc)
            .add(&self.p_com)
            .scaled(-1.0)
    }
}

/// Per-index diagnostics of the produced level.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct StepDiag {
    pub index: i64,
    pub t: f64,
    pub theta: f64,
    pub theta_l: f64,
    pub target: f64,
    pub eta_q: f64,
    pub eta_l: f64,
    pub amplitudes: AmplitudeStats,
    pub prev_l2: f64,
    pub moll_l2: f64,
    pub moll_err: f64,
    pub v_l2: f64,
    pub increment: f64,
    pub wp_l2: f64,
    pub wc_l2: f64,
    pub wt_l2: f64,
    /// Means of w_p + w_c and w_t relative to the mean-square size of the perturbation.
    pub wpc_mean: f64,
    pub wt_mean: f64,
    pub wpc_div: f64,
    /// Largest symmetric and trace defects of R̊_{q+1}, relative to its largest entry.
    pub stress_asym: f64,
    pub stress_trace: f64,
    /// ‖div v_{q+1}‖/‖∇v_{q+1}‖.
    pub v_div: f64,
    pub r_lin_l1: f64,
    pub r_cor_l1: f64,
    pub r_osc_l1: f64,
    pub r_rem_l1: f64,
    pub r_com_l1: f64,
    pub r_l1: f64,
    /// Terms I–V of the energy budget and its left side.
    pub budget: [f64; 5],
    pub budget_lhs: f64,
    /// Relative defect of w_p + w_c against Θ_ℓ^{-1/2}Σ curl curl(a V) via the explicit corrector formula.
    pub corrector_identity: Option<f64>,
}

fn l1_tensor(f: &SpectralField) -> f64 {
    let p = f.to_physical();
    let m = p.magnitude();
    p.grid.cell_volume() * det_sum_map(m.len(), |i| m[i])
}

/// Gradient of a vector field as a tensor, for relative divergence checks.
fn grad_norm_src(f: &SpectralField) -> SpectralField {
    f.apply_symbol(Rank::Tensor, |n, a, o| {
        for i in 0..3 {
            for j in 0..3 {
                o[tc(i, j)] = Complex64::new(0.0, n[j]) * a[i];
            }
        }
    })
}

fn max_mean(f: &SpectralField) -> f64 {
    (0..f.ncomp()).map(|c| f.mean(c).norm()).fold(0.0, f64::max)
}

fn times_xi(s: &SpectralField, xi: [f64; 3]) -> SpectralField {
    s.apply_symbol(Rank::Vector, move |_, a, o| {
        for j in 0..3 {
            o[j] = a[0] * xi[j];
        }
    })
}

fn along(s: &SpectralField, xi: [f64; 3]) -> SpectralField {
    s.apply_symbol(Rank::Scalar, move |n, a, o| {
        o[0] = Complex64::new(0.0, n[0] * xi[0] + n[1] * xi[1] + n[2] * xi[2]) * a[0];
    })
}

fn r_of(f: &SpectralField) -> SpectralField {
    inv_divergence(&project_nonzero(f)).expect("zero-mean input")
}

/// Mollify level-q snapshots at index i from the records with lags 1..n−1.
pub fn mollify_at(
    setup: &LevelSetup,
    drv: &Drivers,
    i: i64,
    lookup: &dyn Fn(i64) -> Option<Arc<LevelRecord>>,
) -> Result<Mollified> {
    let n = setup.time.lookback();
    let base = setup.base();
    let mut recs = Vec::new();
    let (mut theta, mut eta) = (0.0, 0.0);
    for j in 1..n {
        let w = setup.time.weights[j];
        if w == 0.0 {
            continue;
        }
        let k = i - j as i64;
        let rec = lookup(k).ok_or_else(|| {
            Error::Domain(format!("level {} lacks history at index {k}", setup.q))
        })?;
        theta += w * drv.theta(k);
        eta += w * setup.eta(drv, k, rec.energy);
        recs.push((w, rec));
    }
    let all_zero = recs.iter().all(|(_, r)| r.zero);
    let mk =
        |rank: Rank, pick: &dyn Fn(&LevelRecord) -> &PhysicalField, scale: &dyn Fn(i64) -> f64| {
            if all_zero {
                return SpectralField::zeros(base, rank);
            }
            let parts: Vec<(f64, &PhysicalField)> = recs
                .iter()
                .map(|(w, r)| (w * scale(r.index), pick(r)))
                .collect();
            setup
                .space
                .apply(&weighted_sum(&parts, base, rank).transform())
        };
    let one = |_: i64| 1.0;
    Ok(Mollified {
        index: i,
        v: mk(Rank::Vector, &|r| &r.v, &one),
        r: mk(Rank::Tensor, &|r| &r.r, &one),
        p: mk(Rank::Scalar, &|r| &r.p, &one),
        m: mk(Rank::Tensor, &|r| &r.vv, &|k| drv.theta(k)),
        theta,
        eta,
    })
}

/// ρ and a_ξ = (2π)^{3/2} ρ^{1/2} γ_ξ(Id − R̊_ℓ/ρ) pointwise on the fine grid, then truncated.
pub fn amplitudes(setup: &LevelSetup, moll: &Mollified) -> Result<AmplitudeSet> {
    let d = &setup.dealias;
    let rf = d.up(&moll.r);
    let len = d.fine.len();
    let ell = setup.ell();
    // a violated energy window at level q gives η < 0; proceed with the floor and let the ledger flag it
    let lift = moll.theta * moll.eta.max(0.0);
    let nd = setup.frame.len();
    let pre = vol().sqrt();
    let per_point: Vec<(f64, f64, [f64; 6])> = {
        use rayon::prelude::*;
        (0..len)
            .into_par_iter()
            .map(|i| {
                let mut m = [[0.0; 3]; 3];
                let mut fro2 = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        let v = 0.5 * (at(&rf, tc(a, b), i) + at(&rf, tc(b, a), i));
                        m[a][b] = v;
                        fro2 += v * v;
                    }
                }
                let fro = fro2.sqrt();
                let rho = setup.rho_factor * (ell * ell + fro2).sqrt() + lift;
                let mut id = [[0.0; 3]; 3];
                for a in 0..3 {
                    for b in 0..3 {
                        id[a][b] = if a == b { 1.0 } else { 0.0 } - m[a][b] / rho;
                    }
                }
                let g2 = setup.frame.gamma2_unchecked(&id);
                let mut amp = [0.0; 6];
                for k in 0..6 {
                    amp[k] = pre * rho.max(0.0).sqrt() * g2[k].max(0.0).sqrt();
                }
                (rho, fro / rho, amp)
            })
            .collect()
    };
    let mut stats = AmplitudeStats {
        max_ratio: 0.0,
        min_rho: f64::INFINITY,
        max_rho: 0.0,
        max_amplitude: 0.0,
    };
    for (rho, ratio, amp) in &per_point {
        stats.min_rho = stats.min_rho.min(*rho);
        stats.max_rho = stats.max_rho.max(*rho);
        stats.max_ratio = stats
            .max_ratio
            .max(if *rho > 0.0 { *ratio } else { f64::INFINITY });
        stats.max_amplitude = amp.iter().fold(stats.max_amplitude, |a, b| a.max(*b));
    }
    if !(stats.min_rho > 0.0) || stats.max_ratio > setup.frame.r_cert {
        return Err(Error::Domain(format!(
            "amplitude input leaves the certified ball: max ‖R̊_ℓ‖_F/ρ = {:.6} (radius {:.6}), min ρ = {:.3e}",
            stats.max_ratio, setup.frame.r_cert, stats.min_rho
        )));
    }
    let rho = d.scalar(|i| per_point[i].0);
    let fine_a: Vec<Vec<f64>> = (0..nd)
        .map(|k| per_point.iter().map(|p| p.2[k]).collect())
        .collect();
    let a = fine_a.iter().map(|fa| d.scalar(|i| fa[i])).collect();
    let a2 = fine_a
        .iter()
        .map(|fa| d.scalar(|i| fa[i] * fa[i]))
        .collect();
    Ok(AmplitudeSet {
        rho,
        a,
        a2,
        stats,
        fine_a,
    })
}

/// w_p, w_c, w_t at time t; also returns P_N(a²g²) and P_N(g²) per direction.
fn perturbation_at(
    setup: &LevelSetup,
    amp: &AmplitudeSet,
    theta_l: f64,
    t: f64,
) -> (PerturbationParts, Vec<SpectralField>, Vec<SpectralField>) {
    let d = &setup.dealias;
    let base = setup.base();
    let jets = &setup.jets;
    let mut wp = SpectralField::zeros(base, Rank::Vector);
    let mut pot = SpectralField::zeros(base, Rank::Vector);
    let mut osc = SpectralField::zeros(base, Rank::Vector);
    let mut q4 = Vec::new();
    let mut gsq = Vec::new();
    for (k, jet) in jets.jets.iter().enumerate() {
        let xi = jet.xi;
        let af = d.up(&amp.a[k]);
        let gf = d.up(&jets.g(k, t));
        let hf = d.up(&jets.h(k, t));
        let ag = d.scalar(|i| af.data[i] * gf.data[i]);
        let ah = d.scalar(|i| af.data[i] * hf.data[i]);
        let fa = &amp.fine_a[k];
        let a2g2 = d.scalar(|i| (fa[i] * gf.data[i]).powi(2));
        gsq.push(d.scalar(|i| gf.data[i] * gf.data[i]));
        wp.axpy(1.0, &times_xi(&ag, xi));
        pot.axpy(jets.potential_factor, &times_xi(&ah, xi));
        osc.axpy(1.0, &times_xi(&a2g2, xi));
        q4.push(a2g2);
    }
    let s = theta_l.powf(-0.5);
    let wp = wp.scaled(s);
    let wpc = curl(&curl(&pot)).scaled(s);
    let wc = wpc.sub(&wp);
    let wt = leray(&project_nonzero(&osc)).scaled(-1.0 / setup.mu);
    (PerturbationParts { wp, wc, wt }, q4, gsq)
}

/// The corrector from its explicit formula Θ_ℓ^{-1/2}Σ[curl(∇a×V) + ∇a×curl V + a W^c].
pub fn corrector_explicit(
    setup: &LevelSetup,
    amp: &AmplitudeSet,
    theta_l: f64,
    t: f64,
) -> SpectralField {
    let d = &setup.dealias;
    let base = setup.base();
    let mut out = SpectralField::zeros(base, Rank::Vector);
    let cross = |a: [f64; 3], b: [f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    for k in 0..setup.jets.len() {
        let af = d.up(&amp.a[k]);
        let ga = d.up(&grad(&amp.a[k]));
        let v = setup.jets.v(k, t);
        let vf = d.up(&v);
        let cvf = d.up(&curl(&v));
        let wcf = d.up(&setup.jets.wc(k, t));
        let gxv = d.vector(|i| cross(vec_at(&ga, i), vec_at(&vf, i)));
        let rest = d.vector(|i| {
            let c = cross(vec_at(&ga, i), vec_at(&cvf, i));
            let w = vec_at(&wcf, i);
            [
                c[0] + af.data[i] * w[0],
                c[1] + af.data[i] * w[1],
                c[2] + af.data[i] * w[2],
            ]
        });
        out.axpy(1.0, &curl(&gxv));
        out.axpy(1.0, &rest);
    }
    out.scaled(theta_l.powf(-0.5))
}

/// Streaming processor of one level.
pub struct LevelProcessor {
    pub setup: LevelSetup,
    ring: VecDeque<Arc<LevelRecord>>,
    partials: VecDeque<Partial>,
    /// Evaluate the explicit corrector identity every `check_stride` outputs (0 disables).
    pub check_stride: usize,
    emitted: usize,
}

/// A produced snapshot with its decomposition norms.
pub struct StepOutput {
    pub record: LevelRecord,
    pub diag: StepDiag,
}

impl LevelProcessor {
    pub fn new(setup: LevelSetup, check_stride: usize) -> Self {
        LevelProcessor {
            setup,
            ring: VecDeque::new(),
            partials: VecDeque::new(),
            check_stride,
            emitted: 0,
        }
    }

    /// Inputs needed before the first output: outputs start n samples after the first input.
    pub fn warmup(&self) -> usize {
        self.setup.time.lookback()
    }

    fn lookup(&self, k: i64) -> Option<Arc<LevelRecord>> {
        let first = self.ring.front()?.index;
        if k < first {
            return None;
        }
        self.ring.get((k - first) as usize).cloned()
    }

    /// Push the level-q snapshot at index j; returns the level-(q+1) snapshot at j once available.
    pub fn feed(&mut self, rec: Arc<LevelRecord>, drv: &Drivers) -> Result<Option<StepOutput>> {
        let j = rec.index;
        if let Some(last) = self.ring.back() {
            if last.index + 1 != j {
                return Err(Error::Precondition(format!(
                    "level {} got index {j} after {}",
                    self.setup.q, last.index
                )));
            }
        }
        self.ring.push_back(rec);
        let n = self.setup.time.lookback();
        while self.ring.len() > n {
            self.ring.pop_front();
        }
        if self.ring.front().unwrap().index <= j + 2 - n as i64 {
            let lookup = |k: i64| self.lookup(k);
            let moll = mollify_at(&self.setup, drv, j + 1, &lookup)?;
            let amp = amplitudes(&self.setup, &moll)?;
            let (parts, q4, gsq) = perturbation_at(&self.setup, &amp, moll.theta, drv.t(j + 1));
            self.partials.push_back(Partial {
                index: j + 1,
                moll,
                amp,
                parts,
                q4,
                gsq,
            });
            while self.partials.len() > 3 {
                self.partials.pop_front();
            }
        }
        if self.partials.len() == 3 && self.partials[1].index == j {
            let cur = self.ring.back().unwrap().clone();
            let out = self.assemble(&cur, drv)?;
            self.emitted += 1;
            return Ok(Some(out));
        }
        Ok(None)
    }

    fn assemble(&self, cur: &LevelRecord, drv: &Drivers) -> Result<StepOutput> {
        let s = &self.setup;
        let d = &s.dealias;
        let (pm, p0, pp) = (&self.partials[0], &self.partials[1], &self.partials[2]);
        let i = p0.index;
        let t = drv.t(i);
        let h = 0.5 / drv.dt;
        let theta = drv.theta(i);
        let tl = p0.moll.theta;
        let diff = |a: &SpectralField, b: &SpectralField| a.sub(b).scaled(h);

        let wpc_p = pp.parts.wp.add(&pp.parts.wc);
        let wpc_m = pm.parts.wp.add(&pm.parts.wc);
        let dwpc = diff(&wpc_p, &wpc_m);
        let dwt = diff(&pp.parts.wt, &pm.parts.wt);
        let parts = &p0.parts;
        let x = parts.wc.add(&parts.wt);
        let w = parts.wp.add(&x);
        let vl = &p0.moll.v;
        let v1 = vl.add(&w);

        let vlf = d.up(vl);
        let wpf = d.up(&parts.wp);
        let xf = d.up(&x);
        let v1f = d.up(&v1);

        // linear
        let s_lin = d.sym(|k| {
            let a = vec_at(&vlf, k);
            let (p, q) = (vec_at(&wpf, k), vec_at(&xf, k));
            sym_outer(a, [p[0] + q[0], p[1] + q[1], p[2] + q[2]])
        });
        let (s_lin_tl, p_lin) = split_trace(&s_lin.scaled(tl));
        let mut r_lin = r_of(&dwpc);
        r_lin.axpy(0.5, &r_of(&w));
        r_lin.axpy(
            -1.0,
            &r_composition(&project_nonzero(&w), RComposition::Delta)?,
        );
        r_lin.axpy(1.0, &s_lin_tl);

        // corrector
        let s_cor = d.sym(|k| {
            let (p, q) = (vec_at(&wpf, k), vec_at(&xf, k));
            let mut o = sym_outer(q, p);
            let qq = sym_outer(q, q);
            for c in 0..6 {
                o[c] += 0.5 * qq[c];
            }
            o
        });
        let (r_cor, p_cor) = split_trace(&s_cor.scaled(tl));

        // oscillation
        let t_pp = d.sym(|k| {
            let p = vec_at(&wpf, k);
            let mut o = sym_outer(p, p);
            o.iter_mut().for_each(|z| *z *= 0.5);
            o
        });
        let mut forcing = div(&t_pp).scaled(tl);
        forcing.axpy(1.0, &dwt);
        forcing.axpy(1.0, &div(&p0.moll.r));
        forcing.axpy(-1.0, &grad(&p0.moll.p));
        let base = s.base();
        let mut hi_term = SpectralField::zeros(base, Rank::Vector);
        let mut dt_term = SpectralField::zeros(base, Rank::Vector);
        let mut dq = SpectralField::zeros(base, Rank::Vector);
        for (k, jet) in s.jets.jets.iter().enumerate() {
            let xi = jet.xi;
            let hi = d.up(&project_ge(&p0.gsq[k], s.kappa)?);
            let da = d.up(&along(&p0.amp.a2[k], xi));
            hi_term.axpy(1.0, &times_xi(&d.scalar(|z| hi.data[z] * da.data[z]), xi));
            let da2 = d.up(&diff(&pp.amp.a2[k], &pm.amp.a2[k]));
            let gf = d.up(&s.jets.g(k, t));
            dt_term.axpy(
                1.0,
                &times_xi(&d.scalar(|z| da2.data[z] * gf.data[z] * gf.data[z]), xi),
            );
            dq.axpy(1.0, &times_xi(&diff(&pp.q4[k], &pm.q4[k]), xi));
        }
        let mut r_osc = r_of(&hi_term);
        r_osc.axpy(-1.0 / s.mu, &r_of(&dt_term));
        let mut p_osc = inv_laplacian(&div(&project_nonzero(&dq))).scaled(1.0 / s.mu);
        p_osc.axpy(1.0, &p0.amp.rho);
        p_osc.axpy(-1.0, &p0.moll.p);
        let mut rem = forcing.sub(&div(&r_osc));
        rem.axpy(-1.0, &grad(&p_osc));
        let r_rem = r_of(&leray(&rem));
        let p_rem = inv_laplacian(&div(&rem));
        r_osc.axpy(1.0, &r_rem);
        p_osc.axpy(1.0, &p_rem);

        // commutator
        let vv1 = d.sym(|k| {
            let a = vec_at(&v1f, k);
            let mut o = sym_outer(a, a);
            o.iter_mut().for_each(|z| *z *= 0.5);
            o
        });
        let vvl = d.sym(|k| {
            let a = vec_at(&vlf, k);
            let mut o = sym_outer(a, a);
            o.iter_mut().for_each(|z| *z *= 0.5);
            o
        });
        let mut s_com = vv1.scaled(theta - tl);
        s_com.axpy(tl, &vvl);
        s_com.axpy(-1.0, &p0.moll.m);
        let (r_com, p_com) = split_trace(&s_com);

        let dec = ReynoldsDecomposition {
            r_lin,
            r_cor,
            r_osc,
            r_rem,
            r_com,
            p_lin,
            p_cor,
            p_osc,
            p_com,
        };
        let r_total = dec.stress();
        let p_total = dec.pressure();

        let v_phys = v1.to_physical();
        let energy = energy_of(&v_phys);
        let record = LevelRecord {
            q: s.q + 1,
            index: i,
            t,
            v: v_phys,
            r: r_total.to_physical(),
            p: p_total.to_physical(),
            vv: vv1.to_physical(),
            energy,
            zero: false,
        };

        // diagnostics
        let vq = cur.v.transform();
        let fine_vol = d.fine.cell_volume();
        let dot_l1 = |a: &PhysicalField, b: &PhysicalField| {
            let l = a.grid.len();
            fine_vol
                * det_sum_map(l, |z| {
                    (a.data[z] * b.data[z]
                        + a.data[l + z] * b.data[l + z]
                        + a.data[2 * l + z] * b.data[2 * l + z])
                        .abs()
                })
        };
        let eta_q = s.eta(drv, i, cur.energy);
        let wp2 = l2(&parts.wp).powi(2);
        let budget = [
            (3.0 * vol() * eta_q - wp2).abs(),
            (cur.energy - l2(vl).powi(2)).abs(),
            2.0 * dot_l1(&vlf, &wpf),
            2.0 * dot_l1(&vlf, &xf) + 2.0 * dot_l1(&wpf, &xf),
            l2(&x).powi(2),
        ];
        let corrector_identity = if self.check_stride > 0 && self.emitted % self.check_stride == 0 {
            let explicit = corrector_explicit(s, &p0.amp, tl, t);
            let want = parts.wc.clone();
            Some(l2(&explicit.sub(&want)) / l2(&parts.wp.add(&want)).max(f64::MIN_POSITIVE))
        } else {
            None
        };
        let wpc = parts.wp.add(&parts.wc);
        let (stress_asym, stress_trace) = tensor_defects(&record.r);
        let wscale = l2(&w) / vol().sqrt();
        let diag = StepDiag {
            index: i,
            t,
            theta,
            theta_l: tl,
            target: drv.target(i),
            eta_q,
            eta_l: p0.moll.eta,
            amplitudes: p0.amp.stats.clone(),
            prev_l2: cur.energy.sqrt(),
            moll_l2: l2(vl),
            moll_err: l2(&vq.sub(vl)),
            v_l2: energy.sqrt(),
            increment: l2(&v1.sub(&vq)),
            wp_l2: wp2.sqrt(),
            wc_l2: l2(&parts.wc),
            wt_l2: l2(&parts.wt),
            wpc_mean: max_mean(&wpc) / wscale.max(f64::MIN_POSITIVE),
            wt_mean: max_mean(&parts.wt) / wscale.max(f64::MIN_POSITIVE),
            wpc_div: l2(&div(&wpc)) / l2(&grad_norm_src(&wpc)).max(f64::MIN_POSITIVE),
            stress_asym,
            stress_trace,
            v_div: l2(&div(&v1)) / l2(&grad_norm_src(&v1)).max(f64::MIN_POSITIVE),
            r_lin_l1: l1_tensor(&dec.r_lin),
            r_cor_l1: l1_tensor(&dec.r_cor),
            r_osc_l1: l1_tensor(&dec.r_osc),
            r_rem_l1: l1_tensor(&dec.r_rem),
            r_com_l1: l1_tensor(&dec.r_com),
            r_l1: {
                let m = record.r.magnitude();
                record.r.grid.cell_volume() * det_sum_map(m.len(), |z| m[z])
            },
            budget,
            budget_lhs: (3.0 * vol() * eta_q + cur.energy - energy).abs(),
            corrector_identity,
        };
        Ok(StepOutput { record, diag })
    }
}

/// Symmetry and trace defects of a tensor snapshot, relative to its size.
pub fn tensor_defects(r: &PhysicalField) -> (f64, f64) {
    let l = r.grid.len();
    let mut scale: f64 = 0.0;
    let (mut sym, mut tr): (f64, f64) = (0.0, 0.0);
    for z in 0..l {
        let g = |a: usize, b: usize| r.data[tc(a, b) * l + z];
        for a in 0..3 {
            for b in 0..3 {
                scale = scale.max(g(a, b).abs());
                sym = sym.max((g(a, b) - g(b, a)).abs());
            }
        }
        tr = tr.max((g(0, 0) + g(1, 1) + g(2, 2)).abs());
    }
    if scale == 0.0 {
        return (0.0, 0.0);
    }
    (sym / scale, tr / scale)
}

/// Entries of a symmetric tensor in [`SYM`] order at a point.
pub fn sym_entries(r: &PhysicalField, z: usize) -> [f64; 6] {
    let mut o = [0.0; 6];
    for (c, &(a, b)) in SYM.iter().enumerate() {
        o[c] = at(r, tc(a, b), z);
    }
    o
}
