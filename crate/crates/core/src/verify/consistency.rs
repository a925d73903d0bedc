//! Two energies that agree up to a time must give bitwise-identical iterates up to that time.
use crate::error::{Error, Result};
use crate::experiment::{ExperimentSpec, Toolkit};
use crate::integrator::run::DigestLog;
use crate::noise::NoisePath;
use crate::params::EnergyProfile;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelConsistency {
    pub q: usize,
    /// Indices compared with t ≤ t_agree ∧ τ.
    pub compared: usize,
    /// Indices up to the cutoff whose velocity digests differ (must be zero).
    pub mismatches: usize,
    /// Time of the first differing snapshot after the cutoff, if any.
    pub first_difference: Option<f64>,
    pub differing_after: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedConsistency {
    pub seed: u64,
    pub tau: f64,
    pub cutoff: f64,
    pub levels: Vec<LevelConsistency>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub t_agree: f64,
    pub runs: Vec<SeedConsistency>,
}

impl ConsistencyReport {
    pub fn all_equal(&self) -> bool {
        self.runs
            .iter()
            .all(|r| r.levels.iter().all(|l| l.mismatches == 0 && l.compared > 0))
    }
}

/// Largest |e₁ − e₂| on a dt-grid of [0, t_agree] (endpoints included).
pub fn energy_difference(e1: &EnergyProfile, e2: &EnergyProfile, t_agree: f64, dt: f64) -> f64 {
    let n = (t_agree / dt).ceil().max(1.0) as usize;
    (0..=n)
        .map(|i| (i as f64 * dt).min(t_agree))
        .map(|t| (e1.eval(t) - e2.eval(t)).abs())
        .fold(0.0, f64::max)
}

/// Runs both energies for every seed and compares the velocity digests level by level.
pub fn consistency_experiment(
    spec: &ExperimentSpec,
    kit: &Toolkit,
    e1: &EnergyProfile,
    e2: &EnergyProfile,
    t_agree: f64,
    seeds: &[u64],
) -> Result<ConsistencyReport> {
    let diff = energy_difference(e1, e2, t_agree, spec.dt);
    if diff > 1e-14 {
        return Err(Error::Precondition(format!(
            "energies differ by {diff:.3e} on [0, {t_agree}]"
        )));
    }
    let mut runs = Vec::new();
    for &seed in seeds {
        let s = ExperimentSpec {
            seed,
            ..spec.clone()
        };
        let noise = NoisePath::sample(seed, s.dt, s.horizon)?;
        let mut a = DigestLog::default();
        let mut b = DigestLog::default();
        let (tau, _) = s.run_plain(kit, &noise, e1, &mut [&mut a])?;
        s.run_plain(kit, &noise, e2, &mut [&mut b])?;
        let cutoff = t_agree.min(tau.tau);
        let levels = (1..=s.ks.len())
            .map(|q| {
                let mut l = LevelConsistency {
                    q,
                    compared: 0,
                    mismatches: 0,
                    first_difference: None,
                    differing_after: 0,
                };
                for (&(lq, i), d) in &a.velocity {
                    if lq != q {
                        continue;
                    }
                    let Some(e) = b.velocity.get(&(q, i)) else {
                        continue;
                    };
                    let t = i as f64 * s.dt;
                    if t <= cutoff + 1e-12 {
                        l.compared += 1;
                        l.mismatches += (d != e) as usize;
                    } else if d != e {
                        l.differing_after += 1;
                        l.first_difference.get_or_insert(t);
                    }
                }
                l
            })
            .collect();
        runs.push(SeedConsistency {
            seed,
            tau: tau.tau,
            cutoff,
            levels,
        });
    }
    Ok(ConsistencyReport { t_agree, runs })
}
