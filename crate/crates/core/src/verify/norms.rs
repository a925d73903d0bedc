//! Running space-time norms of every level, gathered as snapshots stream past.
use crate::error::Result;
use crate::integrator::level::{Drivers, LevelRecord, StepDiag};
use crate::integrator::run::Observer;
use crate::spectral::norms::c0;
use crate::spectral::ops::derivative;
use crate::spectral::{Grid3, PhysicalField, SpectralField};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Grid maxima over the stored time range of one level.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LevelNormSummary {
    pub samples: usize,
    pub t_first: f64,
    pub t_last: f64,
    /// sup_t ‖v(t)‖_{L²}
    pub v_ct_l2: f64,
    /// sup |v|
    pub v_c0: f64,
    /// sup|v| + sup|∂_t v| + Σ_j sup|∂_j v|
    pub v_c1: f64,
    pub v_dt_c0: f64,
    pub v_dx_c0: f64,
    /// sup_t ‖R̊(t)‖_{L¹}
    pub r_ct_l1: f64,
    /// sup_t |Θ⁻²e − ‖v‖²| over t ≥ 0
    pub energy_gap: f64,
    pub energy_gap_t: f64,
}

struct Running {
    sum: LevelNormSummary,
    prev: Option<(i64, SpectralField)>,
}

/// Observer for [`LevelNormSummary`] per level; suprema are taken on a grid `factor`× finer.
pub struct LevelNorms {
    pub factor: usize,
    levels: BTreeMap<usize, Running>,
}

impl LevelNorms {
    pub fn new(factor: usize) -> Self {
        LevelNorms {
            factor: factor.max(1),
            levels: BTreeMap::new(),
        }
    }

    pub fn summary(&self, q: usize) -> Option<&LevelNormSummary> {
        self.levels.get(&q).map(|r| &r.sum)
    }

    pub fn summaries(&self) -> BTreeMap<usize, LevelNormSummary> {
        self.levels
            .iter()
            .map(|(q, r)| (*q, r.sum.clone()))
            .collect()
    }
}

fn l1(p: &PhysicalField) -> f64 {
    let m = p.magnitude();
    p.grid.cell_volume() * crate::spectral::norms::det_sum(&m)
}

impl Observer for LevelNorms {
    fn observe(
        &mut self,
        rec: &Arc<LevelRecord>,
        _: Option<&StepDiag>,
        drv: &Drivers,
    ) -> Result<()> {
        let fine = Grid3::new(rec.v.grid.n() * self.factor)?;
        let sup = |f: &SpectralField| c0(&f.resample(fine).to_physical());
        let v = rec.v.transform();
        let run = self.levels.entry(rec.q).or_insert_with(|| Running {
            sum: LevelNormSummary {
                t_first: rec.t,
                ..Default::default()
            },
            prev: None,
        });
        let s = &mut run.sum;
        s.samples += 1;
        s.t_last = rec.t;
        s.v_ct_l2 = s.v_ct_l2.max(rec.energy.sqrt());
        s.r_ct_l1 = s.r_ct_l1.max(l1(&rec.r));
        if !rec.zero {
            s.v_c0 = s.v_c0.max(sup(&v));
            let dx: f64 = (0..3)
                .map(|ax| {
                    let mut a = [0u32; 3];
                    a[ax] = 1;
                    sup(&derivative(&v, a))
                })
                .sum();
            s.v_dx_c0 = s.v_dx_c0.max(dx);
            if let Some((pi, pv)) = &run.prev {
                let h = (rec.index - pi) as f64 * drv.dt;
                s.v_dt_c0 = s.v_dt_c0.max(sup(&v.sub(pv).scaled(1.0 / h)));
            }
            if rec.t >= 0.0 {
                let gap = (drv.target(rec.index) - rec.energy).abs();
                if gap > s.energy_gap {
                    s.energy_gap = gap;
                    s.energy_gap_t = rec.t;
                }
            }
        }
        s.v_c1 = s.v_c0 + s.v_dt_c0 + s.v_dx_c0;
        run.prev = (!rec.zero).then(|| (rec.index, v));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoisePath;
    use crate::params::{EnergyProfile, EnergyShape};
    use crate::spectral::Rank;

    #[test]
    fn travelling_mode_norms() {
        // v = (sin(x₂ − t), 0, 0): sup 1, |∂_t| ≈ 1, |∂_x| = 1
        let g = Grid3::new(8).unwrap();
        let dt = 1e-3;
        let noise = NoisePath::zero(dt, 1.0);
        let energy =
            EnergyProfile::new(EnergyShape::Constant { value: 5.0 }, 1.0, 5.0, 1.0, 4.5).unwrap();
        let drv = Drivers {
            noise: &noise,
            energy: &energy,
            dt,
        };
        let mut n = LevelNorms::new(2);
        for i in 0..20 {
            let t = i as f64 * dt;
            let v = PhysicalField::from_fn(g, Rank::Vector, |x, o| {
                o[0] = (x[1] - t).sin();
                o[1] = 0.0;
                o[2] = 0.0;
            });
            let mut rec = LevelRecord::zero(1, g, i, dt);
            rec.energy = crate::integrator::level::energy_of(&v);
            rec.v = v;
            rec.zero = false;
            n.observe(&Arc::new(rec), None, &drv).unwrap();
        }
        let s = n.summary(1).unwrap();
        assert!((s.v_c0 - 1.0).abs() < 1e-2);
        assert!((s.v_dx_c0 - 1.0).abs() < 1e-2);
        assert!((s.v_dt_c0 - 1.0).abs() < 1e-2);
        let l2 = (4.0 * std::f64::consts::PI.powi(3)).sqrt();
        assert!((s.v_ct_l2 - l2).abs() < 1e-9 * l2);
        assert_eq!(s.samples, 20);
    }
}
