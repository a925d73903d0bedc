//! Cross-level trends: increments, stress and energy gap per level, and the H^γ interpolation
//! inequality on every stored field.
use super::ledger::{Flag, LedgerRow, Relation};
use super::norms::LevelNormSummary;
use crate::error::{domain, Result};
use crate::integrator::level::StepDiag;
use crate::integrator::run::Snapshot;
use crate::spectral::norms::{det_sum, h_gamma, l2};
use crate::spectral::SpectralField;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelTrend {
    pub q: usize,
    /// sup_t ‖v_q − v_{q−1}‖_{L²} (NaN for level 0).
    pub increment: f64,
    /// increment / δ_q^{1/2}
    pub increment_over_delta: f64,
    pub stress_ct_l1: f64,
    pub energy_gap: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub gamma: f64,
    pub levels: Vec<LevelTrend>,
    /// Consecutive increment ratios from level 1 on.
    pub increment_ratios: Vec<f64>,
    pub stress_ratios: Vec<f64>,
    pub gap_ratios: Vec<f64>,
    pub fields_checked: usize,
    /// max over fields of ‖f‖_{H^γ}/(‖f‖_{H¹}^γ‖f‖_{L²}^{1−γ}) − 1.
    pub interpolation_excess: f64,
}

/// ‖f‖_{H^γ} / (‖f‖_{H¹}^γ ‖f‖_{L²}^{1−γ}) − 1, or −1 for a zero field.
pub fn interpolation_excess(f: &SpectralField, gamma: f64) -> f64 {
    let (a, h1, l) = (h_gamma(f, gamma), h_gamma(f, 1.0), l2(f));
    let rhs = h1.powf(gamma) * l.powf(1.0 - gamma);
    if rhs == 0.0 {
        if a == 0.0 {
            -1.0
        } else {
            f64::INFINITY
        }
    } else {
        a / rhs - 1.0
    }
}

fn ratios(xs: &[f64]) -> Vec<f64> {
    xs.windows(2).map(|w| w[1] / w[0]).collect()
}

/// Trends from a live run: `norms` covers levels 0..=Q, `diags[q]` the step producing level
/// q + 1 and `deltas[q]` is δ_q.
pub fn trends_from_run(
    norms: &BTreeMap<usize, LevelNormSummary>,
    diags: &[Vec<StepDiag>],
    deltas: &[f64],
) -> Vec<LevelTrend> {
    norms
        .iter()
        .map(|(&q, s)| {
            let increment = if q == 0 {
                f64::NAN
            } else {
                diags
                    .get(q - 1)
                    .map(|d| d.iter().map(|x| x.increment).fold(0.0, f64::max))
                    .unwrap_or(f64::NAN)
            };
            LevelTrend {
                q,
                increment,
                increment_over_delta: increment / deltas.get(q).copied().unwrap_or(f64::NAN).sqrt(),
                stress_ct_l1: s.r_ct_l1,
                energy_gap: s.energy_gap,
            }
        })
        .collect()
}

/// Trends from stored snapshots of levels ≥ 1; level 0 is the zero state. Increments are taken
/// at the indices two consecutive levels share.
pub fn trends_from_snapshots(
    levels: &BTreeMap<usize, Vec<Snapshot>>,
    target: &dyn Fn(i64) -> f64,
    deltas: &[f64],
) -> Vec<LevelTrend> {
    let gap = |list: &[Snapshot]| {
        list.iter()
            .filter(|s| s.t >= 0.0)
            .map(|s| (target(s.index) - l2(&s.v).powi(2)).abs())
            .fold(0.0, f64::max)
    };
    let l1 = |f: &SpectralField| {
        let p = f.to_physical();
        p.grid.cell_volume() * det_sum(&p.magnitude())
    };
    let mut out = Vec::new();
    let zero_gap = levels
        .values()
        .flatten()
        .filter(|s| s.t >= 0.0)
        .map(|s| target(s.index))
        .fold(0.0, f64::max);
    out.push(LevelTrend {
        q: 0,
        increment: f64::NAN,
        increment_over_delta: f64::NAN,
        stress_ct_l1: 0.0,
        energy_gap: zero_gap,
    });
    for (&q, list) in levels {
        let below = if q >= 2 { levels.get(&(q - 1)) } else { None };
        let increment = list
            .iter()
            .filter_map(|s| match below {
                Some(b) => b
                    .iter()
                    .find(|x| x.index == s.index)
                    .map(|x| l2(&s.v.sub(&x.v))),
                None if q == 1 => Some(l2(&s.v)),
                None => None,
            })
            .fold(f64::NAN, f64::max);
        out.push(LevelTrend {
            q,
            increment,
            increment_over_delta: increment / deltas.get(q).copied().unwrap_or(f64::NAN).sqrt(),
            stress_ct_l1: list.iter().map(|s| l1(&s.r)).fold(0.0, f64::max),
            energy_gap: gap(list),
        });
    }
    out
}

/// Needs γ ∈ (0, β/(5+β)) and at least three states.
pub fn convergence_report(
    levels: Vec<LevelTrend>,
    fields: &[&SpectralField],
    gamma: f64,
    beta: f64,
) -> Result<ConvergenceReport> {
    if levels.len() < 3 {
        return domain(format!(
            "convergence needs at least 3 levels, got {}",
            levels.len()
        ));
    }
    let cap = beta / (5.0 + beta);
    if !(gamma > 0.0 && gamma < cap) {
        return domain(format!("γ = {gamma} must lie in (0, {cap:.3e})"));
    }
    let later: Vec<&LevelTrend> = levels.iter().filter(|l| l.q >= 1).collect();
    let excess: Vec<f64> = fields
        .par_iter()
        .map(|f| interpolation_excess(f, gamma))
        .collect();
    Ok(ConvergenceReport {
        gamma,
        increment_ratios: ratios(&later.iter().map(|l| l.increment).collect::<Vec<_>>()),
        stress_ratios: ratios(&later.iter().map(|l| l.stress_ct_l1).collect::<Vec<_>>()),
        gap_ratios: ratios(&later.iter().map(|l| l.energy_gap).collect::<Vec<_>>()),
        levels,
        fields_checked: fields.len(),
        interpolation_excess: excess.iter().cloned().fold(-1.0, f64::max),
    })
}

impl ConvergenceReport {
    pub fn increments_decay(&self) -> bool {
        !self.increment_ratios.is_empty() && self.increment_ratios.iter().all(|r| *r < 1.0)
    }

    pub fn stress_decreasing(&self) -> bool {
        !self.stress_ratios.is_empty() && self.stress_ratios.iter().all(|r| *r < 1.0)
    }

    pub fn gap_decreasing(&self) -> bool {
        !self.gap_ratios.is_empty() && self.gap_ratios.iter().all(|r| *r < 1.0)
    }

    pub fn interpolation_holds(&self) -> bool {
        self.interpolation_excess <= 1e-9
    }

    pub fn rows(&self) -> Vec<LedgerRow> {
        let max = |v: &[f64]| v.iter().cloned().fold(f64::NAN, f64::max);
        let trend = |id: &str, v: &[f64], what: &str| {
            LedgerRow::new(None, id, max(v), 1.0, Relation::AtMost, Flag::Soft)
                .note(format!("largest ratio of consecutive {what} from level 1"))
        };
        vec![
            trend("increment_decay", &self.increment_ratios, "increments"),
            trend("stress_decrease", &self.stress_ratios, "stress sup norms"),
            trend("energy_gap_decrease", &self.gap_ratios, "energy gaps"),
            LedgerRow::new(
                None,
                "interpolation",
                self.interpolation_excess,
                1e-9,
                Relation::AtMost,
                Flag::Hard,
            )
            .note(format!(
                "{} stored fields, γ = {:.3e}",
                self.fields_checked, self.gamma
            )),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{Grid3, PhysicalField, Rank};

    #[test]
    fn interpolation_on_two_modes() {
        let g = Grid3::new(8).unwrap();
        let f = PhysicalField::from_fn(g, Rank::Scalar, |x, o| {
            o[0] = x[0].sin() + 0.3 * (3.0 * x[1]).cos()
        })
        .transform();
        let e = interpolation_excess(&f, 0.3);
        assert!(e <= 1e-12, "{e}");
        // a single shell is the equality case
        let s =
            PhysicalField::from_fn(g, Rank::Scalar, |x, o| o[0] = (2.0 * x[2]).sin()).transform();
        assert!(interpolation_excess(&s, 0.3).abs() < 1e-12);
    }

    #[test]
    fn too_few_levels_rejected() {
        let mut n = BTreeMap::new();
        n.insert(0, LevelNormSummary::default());
        n.insert(1, LevelNormSummary::default());
        assert!(convergence_report(trends_from_run(&n, &[], &[]), &[], 1e-11, 1e-9).is_err());
        n.insert(2, LevelNormSummary::default());
        assert!(convergence_report(trends_from_run(&n, &[], &[]), &[], 0.5, 1e-9).is_err());
        assert!(convergence_report(trends_from_run(&n, &[], &[]), &[], 1e-11, 1e-9).is_ok());
    }
}
