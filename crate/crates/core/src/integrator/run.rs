//! Multi-level streaming run: level-0 zero snapshots are pushed through a chain of level
//! processors one time index at a time.
use super::level::{Drivers, LevelProcessor, LevelRecord, LevelSetup, StepDiag};
use super::mollify::SpaceMollifier;
use super::products::Dealias;
use crate::error::{domain, Result};
use crate::frame::{place_tubes, GeometricFrame};
use crate::jets::grid::GridJets;
use crate::jets::{JetFamily, ProfileSet};
use crate::noise::TimeMollifier;
use crate::params::SurrogateSchedule;
use crate::spectral::norms::l2;
use crate::spectral::ops::{div, grad, laplacian};
use crate::spectral::{Grid3, SpectralField};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

/// Desk settings of one level (consumes q, produces q + 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelPlan {
    /// Jet parameter: λ = k⁷.
    pub k: u64,
    /// Temporal speed of the jets.
    pub mu: f64,
    /// Requested mollification scale; snapped to an even multiple of dt with ≥ 64 steps.
    pub ell: f64,
    pub delta_next: f64,
    pub delta_after: f64,
}

impl LevelPlan {
    /// Plans for `count` levels from a surrogate schedule, with desk μ and ℓ.
    pub fn from_surrogate(
        s: &SurrogateSchedule,
        ks: &[u64],
        mu: f64,
        ell: f64,
    ) -> Result<Vec<LevelPlan>> {
        if s.levels.len() < ks.len() + 2 {
            return domain(format!(
                "surrogate schedule has {} levels, need {}",
                s.levels.len(),
                ks.len() + 2
            ));
        }
        Ok(ks
            .iter()
            .enumerate()
            .map(|(q, &k)| LevelPlan {
                k,
                mu,
                ell,
                delta_next: s.levels[q + 1].delta,
                delta_after: s.levels[q + 2].delta,
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    /// Base grid points per axis (multiple of 4).
    pub grid: usize,
    pub dt: f64,
    pub levels: Vec<LevelPlan>,
    /// Factor c in ρ = c√(ℓ² + ‖R̊_ℓ‖²) + Θ_ℓη_ℓ; at least 1/r_cert so the amplitude input stays certified.
    pub rho_factor: Option<f64>,
    /// Stride of the explicit corrector check (0 disables).
    pub check_stride: usize,
    /// First index produced at the top level.
    pub top_first: i64,
}

/// Builds the per-level setups. k = 1 has no certified placement and uses zero offsets.
pub fn build_setups(
    plan: &RunPlan,
    profiles: &ProfileSet,
    frame: &GeometricFrame,
) -> Result<Vec<LevelSetup>> {
    let base = Grid3::new(plan.grid)?;
    let dealias = Dealias::new(base)?;
    let rho_factor = plan.rho_factor.unwrap_or_else(|| default_rho_factor(frame));
    if rho_factor * frame.r_cert < 1.0 {
        return domain(format!(
            "ρ factor {rho_factor} leaves the certified radius {}",
            frame.r_cert
        ));
    }
    plan.levels
        .iter()
        .enumerate()
        .map(|(q, lp)| {
            let mut fam = if lp.k >= 2 {
                let placement = place_tubes(frame, lp.k, frame.len(), 400)?;
                JetFamily::build(profiles.clone(), frame.clone(), lp.k, Some(&placement))?
            } else {
                JetFamily::uncertified(
                    profiles.clone(),
                    frame.clone(),
                    lp.k,
                    vec![[0.0; 3]; frame.len()],
                )?
            };
            fam.mu = lp.mu;
            let time = TimeMollifier::snapped(lp.ell, plan.dt)?;
            let space = SpaceMollifier::new(time.ell, base)?;
            Ok(LevelSetup {
                q,
                dealias,
                space,
                jets: GridJets::build(&fam, base)?,
                frame: frame.clone(),
                mu: lp.mu,
                kappa: (frame.n_star as f64 * lp.k as f64 / 2.0).max(1.0),
                rho_factor,
                delta_next: lp.delta_next,
                delta_after: lp.delta_after,
                time,
            })
        })
        .collect()
}

pub fn default_rho_factor(frame: &GeometricFrame) -> f64 {
    // a hair above 1/r_cert so rounding cannot push ‖R̊‖/ρ past the radius
    (1.0 / frame.r_cert * (1.0 + 1e-9)).max(2.0)
}

/// Receives every snapshot of every level in production order.
pub trait Observer {
    fn observe(
        &mut self,
        rec: &Arc<LevelRecord>,
        diag: Option<&StepDiag>,
        drv: &Drivers,
    ) -> Result<()>;
}

/// Index of the first level-0 snapshot needed for the top level to start at `top_first`.
pub fn first_index(setups: &[LevelSetup], top_first: i64) -> i64 {
    top_first - setups.iter().map(|s| s.time.lookback() as i64).sum::<i64>()
}

/// Runs the chain over level-0 indices first..=last and reports every snapshot to the observers.
pub fn run(
    setups: Vec<LevelSetup>,
    drv: &Drivers,
    top_first: i64,
    last: i64,
    observers: &mut [&mut dyn Observer],
) -> Result<Vec<Vec<StepDiag>>> {
    let check_stride = 0;
    run_with_checks(setups, drv, top_first, last, check_stride, observers)
}

pub fn run_with_checks(
    setups: Vec<LevelSetup>,
    drv: &Drivers,
    top_first: i64,
    last: i64,
    check_stride: usize,
    observers: &mut [&mut dyn Observer],
) -> Result<Vec<Vec<StepDiag>>> {
    if setups.is_empty() {
        return domain("run needs at least one level");
    }
    let first = first_index(&setups, top_first);
    if last < top_first {
        return domain(format!(
            "last index {last} precedes the first output {top_first}"
        ));
    }
    let base = setups[0].base();
    let mut procs: Vec<LevelProcessor> = setups
        .into_iter()
        .map(|s| LevelProcessor::new(s, check_stride))
        .collect();
    let mut diags = vec![Vec::new(); procs.len()];
    for j in first..=last {
        let mut rec = Arc::new(LevelRecord::zero(0, base, j, drv.dt));
        for o in observers.iter_mut() {
            o.observe(&rec, None, drv)?;
        }
        for (q, p) in procs.iter_mut().enumerate() {
            match p.feed(rec, drv)? {
                Some(out) => {
                    rec = Arc::new(out.record);
                    for o in observers.iter_mut() {
                        o.observe(&rec, Some(&out.diag), drv)?;
                    }
                    diags[q].push(out.diag);
                }
                None => break,
            }
        }
    }
    Ok(diags)
}

/// Residual of the transformed system at one index, relative to the sum of term sizes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualRow {
    pub q: usize,
    pub index: i64,
    pub t: f64,
    /// With the central difference used by the construction.
    pub discrete: f64,
    /// With a fourth-order difference standing in for ∂_t.
    pub continuous: f64,
    pub scale: f64,
}

struct Slot {
    index: i64,
    v: SpectralField,
    rest: SpectralField,
}

/// Residual ∂_t v + ½v − Δv + Θ div P_N(v⊗v) + ∇p − div R̊ at each interior index.
#[derive(Default)]
pub struct ResidualProbe {
    window: BTreeMap<usize, VecDeque<Slot>>,
    sizes: BTreeMap<usize, VecDeque<f64>>,
    pub rows: Vec<ResidualRow>,
}

impl ResidualProbe {
    pub fn max_by_level(&self, continuous: bool) -> BTreeMap<usize, f64> {
        let mut out = BTreeMap::new();
        for r in &self.rows {
            let v = if continuous { r.continuous } else { r.discrete };
            let e = out.entry(r.q).or_insert(0.0f64);
            *e = e.max(v);
        }
        out
    }
}

impl Observer for ResidualProbe {
    fn observe(
        &mut self,
        rec: &Arc<LevelRecord>,
        _: Option<&StepDiag>,
        drv: &Drivers,
    ) -> Result<()> {
        if rec.zero {
            return Ok(());
        }
        let v = rec.v.transform();
        let theta = drv.theta(rec.index);
        let nl = div(&rec.vv.transform()).scaled(theta);
        let lap = laplacian(&v);
        let dr = div(&rec.r.transform());
        let gp = grad(&rec.p.transform());
        let mut rest = v.scaled(0.5);
        rest.axpy(-1.0, &lap);
        rest.axpy(1.0, &nl);
        rest.axpy(1.0, &gp);
        rest.axpy(-1.0, &dr);
        let size = 0.5 * l2(&v) + l2(&lap) + l2(&nl) + l2(&gp) + l2(&dr);
        let w = self.window.entry(rec.q).or_default();
        let s = self.sizes.entry(rec.q).or_default();
        if let Some(b) = w.back() {
            if b.index + 1 != rec.index {
                w.clear();
                s.clear();
            }
        }
        w.push_back(Slot {
            index: rec.index,
            v,
            rest,
        });
        s.push_back(size);
        if w.len() > 5 {
            w.pop_front();
            s.pop_front();
        }
        if w.len() == 5 {
            let c = &w[2];
            let d2 = w[3].v.sub(&w[1].v).scaled(0.5 / drv.dt);
            let mut d4 = w[3].v.sub(&w[1].v).scaled(8.0);
            d4.axpy(-1.0, &w[4].v);
            d4.axpy(1.0, &w[0].v);
            let d4 = d4.scaled(1.0 / (12.0 * drv.dt));
            let scale = l2(&d4) + s[2];
            let rel = |x: f64| if scale > 0.0 { x / scale } else { x };
            self.rows.push(ResidualRow {
                q: rec.q,
                index: c.index,
                t: drv.t(c.index),
                discrete: rel(l2(&d2.add(&c.rest))),
                continuous: rel(l2(&d4.add(&c.rest))),
                scale,
            });
        }
        Ok(())
    }
}

/// SHA-256 digests of every snapshot, per level, plus a running digest of each level.
#[derive(Default)]
pub struct DigestLog {
    pub velocity: BTreeMap<(usize, i64), [u8; 32]>,
    pub full: BTreeMap<(usize, i64), [u8; 32]>,
}

impl DigestLog {
    /// Digest of all of a level's snapshots with index ≤ `upto`.
    pub fn level_digest(&self, q: usize, upto: i64) -> String {
        let mut h = Sha256::new();
        for ((lq, i), d) in &self.full {
            if *lq == q && *i <= upto {
                h.update(d);
            }
        }
        hex(&h.finalize())
    }

    /// Indices at which the velocity of level q differs between two logs (over common indices).
    pub fn velocity_mismatches(&self, other: &DigestLog, q: usize) -> Vec<i64> {
        self.velocity
            .iter()
            .filter(|((lq, _), _)| *lq == q)
            .filter_map(|((_, i), d)| match other.velocity.get(&(q, *i)) {
                Some(e) if e != d => Some(*i),
                _ => None,
            })
            .collect()
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Observer for DigestLog {
    fn observe(&mut self, rec: &Arc<LevelRecord>, _: Option<&StepDiag>, _: &Drivers) -> Result<()> {
        self.velocity
            .insert((rec.q, rec.index), rec.velocity_digest());
        self.full.insert((rec.q, rec.index), rec.digest());
        Ok(())
    }
}

/// Spectral snapshots of (v, R̊, p) at every `stride`-th index of levels ≥ 1, plus the last one.
pub struct Snapshots {
    pub stride: i64,
    pub levels: BTreeMap<usize, Vec<Snapshot>>,
    last: BTreeMap<usize, Arc<LevelRecord>>,
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub index: i64,
    pub t: f64,
    pub v: SpectralField,
    pub r: SpectralField,
    pub p: SpectralField,
}

impl Snapshot {
    fn of(rec: &LevelRecord) -> Self {
        Snapshot {
            index: rec.index,
            t: rec.t,
            v: rec.v.transform(),
            r: rec.r.transform(),
            p: rec.p.transform(),
        }
    }
}

impl Snapshots {
    pub fn new(stride: i64) -> Self {
        Snapshots {
            stride: stride.max(1),
            levels: BTreeMap::new(),
            last: BTreeMap::new(),
        }
    }

    /// Adds the final snapshot of each level if the stride skipped it.
    pub fn finish(&mut self) {
        for (q, rec) in &self.last {
            let list = self.levels.entry(*q).or_default();
            if list.last().map(|s| s.index) != Some(rec.index) {
                list.push(Snapshot::of(rec));
            }
        }
    }
}

impl Observer for Snapshots {
    fn observe(&mut self, rec: &Arc<LevelRecord>, _: Option<&StepDiag>, _: &Drivers) -> Result<()> {
        if rec.zero {
            return Ok(());
        }
        if rec.index.rem_euclid(self.stride) == 0 {
            self.levels
                .entry(rec.q)
                .or_default()
                .push(Snapshot::of(rec));
        }
        self.last.insert(rec.q, rec.clone());
        Ok(())
    }
}

/// The last `keep` snapshots of one level.
pub struct History {
    pub q: usize,
    pub keep: usize,
    pub records: VecDeque<Arc<LevelRecord>>,
}

impl History {
    pub fn new(q: usize, keep: usize) -> Self {
        History {
            q,
            keep,
            records: VecDeque::new(),
        }
    }

    pub fn get(&self, index: i64) -> Option<Arc<LevelRecord>> {
        self.records.iter().find(|r| r.index == index).cloned()
    }

    pub fn last_index(&self) -> Option<i64> {
        self.records.back().map(|r| r.index)
    }
}

impl Observer for History {
    fn observe(&mut self, rec: &Arc<LevelRecord>, _: Option<&StepDiag>, _: &Drivers) -> Result<()> {
        if rec.q == self.q {
            self.records.push_back(rec.clone());
            while self.records.len() > self.keep {
                self.records.pop_front();
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::build_profiles;
    use crate::noise::NoisePath;
    use crate::params::{EnergyProfile, EnergyShape};

    #[test]
    fn smoke_one_level() {
        let profiles = build_profiles(2000).unwrap();
        let frame = GeometricFrame::standard().unwrap();
        let dt = 1.0 / 256.0;
        let plan = RunPlan {
            grid: 16,
            dt,
            levels: vec![LevelPlan {
                k: 1,
                mu: 1.0,
                ell: 64.0 * dt,
                delta_next: 1.0,
                delta_after: 0.5,
            }],
            rho_factor: None,
            check_stride: 4,
            top_first: -4,
        };
        let setups = build_setups(&plan, &profiles, &frame).unwrap();
        let noise = NoisePath::sample(3, dt, 1.0).unwrap();
        let energy =
            EnergyProfile::new(EnergyShape::Constant { value: 5.0 }, 1.0, 5.0, 1.0, 4.5).unwrap();
        let drv = Drivers {
            noise: &noise,
            energy: &energy,
            dt,
        };
        let mut probe = ResidualProbe::default();
        let t0 = std::time::Instant::now();
        let diags = run_with_checks(setups, &drv, -4, 12, 4, &mut [&mut probe]).unwrap();
        eprintln!("elapsed {:?}", t0.elapsed());
        for d in &diags[0] {
            eprintln!("{} v={:.4} wp={:.4} wc={:.3e} wt={:.3e} r={:.3e} ratio={:.3} id={:?} budget={:?} lhs={:.3e}", d.index, d.v_l2, d.wp_l2, d.wc_l2, d.wt_l2, d.r_l1, d.amplitudes.max_ratio, d.corrector_identity, d.budget, d.budget_lhs);
        }
        for r in &probe.rows {
            eprintln!("res {} {:.3e} {:.3e}", r.index, r.discrete, r.continuous);
        }
    }
}
