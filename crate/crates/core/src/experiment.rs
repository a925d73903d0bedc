//! One complete desk run: noise path, stopping time, level chain and every diagnostic observer,
//! gathered into a ledger.
use crate::error::{domain, Error, Result};
use crate::frame::GeometricFrame;
use crate::integrator::level::{Drivers, LevelSetup, StepDiag};
use crate::integrator::run::{
    build_setups, first_index, run_with_checks, LevelPlan, Observer, ResidualProbe, RunPlan,
    Snapshot, Snapshots,
};
use crate::jets::{build_profiles, ProfileSet};
use crate::noise::{stopping_time, NoisePath, StoppingTime};
use crate::params::{surrogate_schedule, Constants, EnergyProfile, SurrogateSchedule};
use crate::spectral::container::{read_coefficients, write_coefficients};
use crate::spectral::{Grid3, SpectralField};
use crate::verify::convergence::{
    convergence_report, trends_from_run, trends_from_snapshots, ConvergenceReport,
};
use crate::verify::ledger::{DiagnosticLedger, Flag, LedgerRow, Relation};
use crate::verify::norms::{LevelNormSummary, LevelNorms};
use crate::verify::rows::{fit_rows, step_rows, BoundContext, StepInputs, REQUIRED_STEP_IDS};
use crate::verify::weak::{TestBank, WeakForm, WeakReport};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

/// Geometric surrogate frequencies λ_q = λ₀·ratio^q.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateSpec {
    pub lambda0: u64,
    pub ratio: u64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        SurrogateSpec {
            lambda0: 1,
            ratio: 128,
            alpha: 1e-4,
            beta: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub seed: u64,
    pub dt: f64,
    /// Horizon and stopping level L.
    pub horizon: f64,
    /// Hölder exponent for the stopping time.
    pub iota: f64,
    pub grid: usize,
    /// Refinement used for sup norms.
    pub oversample: usize,
    /// Jet parameter per step, λ = k⁷.
    pub ks: Vec<u64>,
    pub mu: f64,
    pub ell: f64,
    pub surrogate: SurrogateSpec,
    pub constants: Constants,
    pub rho_factor: Option<f64>,
    /// Stride of the explicit corrector check (0 disables).
    pub check_stride: usize,
    /// First index produced by the top level.
    pub top_first: i64,
    /// Stop time; the run ends at the earlier of this and τ.
    pub t_end: Option<f64>,
    pub residual_tol: f64,
    /// Interpolation exponent; must lie in (0, β/(5+β)).
    pub gamma: f64,
    /// Snapshot stride in time steps.
    pub snapshot_stride: i64,
    pub quadrature_nodes: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            seed: 1,
            dt: 1.0 / 256.0,
            horizon: 1.0,
            iota: 0.4,
            grid: 16,
            oversample: 2,
            ks: vec![1],
            mu: 1.0,
            ell: 0.25,
            surrogate: SurrogateSpec::default(),
            constants: Constants::default(),
            rho_factor: None,
            check_stride: 8,
            top_first: 0,
            t_end: Some(0.125),
            residual_tol: 5e-4,
            gamma: 1e-3,
            snapshot_stride: 8,
            quadrature_nodes: 2000,
        }
    }
}

/// Shared heavy inputs, built once.
pub struct Toolkit {
    pub profiles: ProfileSet,
    pub frame: GeometricFrame,
}

impl Toolkit {
    pub fn new(quadrature_nodes: usize) -> Result<Self> {
        Ok(Toolkit {
            profiles: build_profiles(quadrature_nodes)?,
            frame: GeometricFrame::standard()?,
        })
    }
}

impl ExperimentSpec {
    pub fn schedule(&self) -> Result<SurrogateSchedule> {
        let s = &self.surrogate;
        surrogate_schedule(
            s.lambda0,
            s.ratio,
            s.beta,
            s.alpha,
            self.ks.len() as u32 + 2,
        )
    }

    pub fn plans(&self) -> Result<Vec<LevelPlan>> {
        if self.ks.is_empty() {
            return domain("at least one step is needed");
        }
        LevelPlan::from_surrogate(&self.schedule()?, &self.ks, self.mu, self.ell)
    }

    pub fn run_plan(&self) -> Result<RunPlan> {
        Ok(RunPlan {
            grid: self.grid,
            dt: self.dt,
            levels: self.plans()?,
            rho_factor: self.rho_factor,
            check_stride: self.check_stride,
            top_first: self.top_first,
        })
    }

    pub fn noise(&self) -> Result<NoisePath> {
        NoisePath::sample(self.seed, self.dt, self.horizon)
    }

    pub fn setups(&self, kit: &Toolkit) -> Result<Vec<LevelSetup>> {
        build_setups(&self.run_plan()?, &kit.profiles, &kit.frame)
    }

    /// Stopping time of the path and the last index to compute.
    pub fn stop(&self, noise: &NoisePath) -> Result<(StoppingTime, i64)> {
        let tau = stopping_time(noise, self.horizon, self.iota)?;
        let end = self.t_end.map_or(tau.tau, |t| t.min(tau.tau));
        let last = (end / self.dt + 1e-9).floor() as i64;
        if last < self.top_first {
            return domain(format!(
                "run ends at index {last} before the first output {}",
                self.top_first
            ));
        }
        Ok((tau, last))
    }

    /// The level chain with only the given observers.
    pub fn run_plain(
        &self,
        kit: &Toolkit,
        noise: &NoisePath,
        energy: &EnergyProfile,
        observers: &mut [&mut dyn Observer],
    ) -> Result<(StoppingTime, Vec<Vec<StepDiag>>)> {
        let (tau, last) = self.stop(noise)?;
        let drv = Drivers {
            noise,
            energy,
            dt: self.dt,
        };
        let diags = run_with_checks(
            self.setups(kit)?,
            &drv,
            self.top_first,
            last,
            self.check_stride,
            observers,
        )?;
        Ok((tau, diags))
    }

    /// The level chain with every diagnostic attached.
    pub fn run(
        &self,
        kit: &Toolkit,
        noise: &NoisePath,
        energy: &EnergyProfile,
        extra: &mut [&mut dyn Observer],
    ) -> Result<Outcome> {
        let setups = self.setups(kit)?;
        let ells: Vec<f64> = setups.iter().map(|s| s.ell()).collect();
        let first = first_index(&setups, self.top_first);
        let (tau, last) = self.stop(noise)?;
        let drv = Drivers {
            noise,
            energy,
            dt: self.dt,
        };
        let mut norms = LevelNorms::new(self.oversample);
        let mut probe = ResidualProbe::default();
        let mut weak = WeakForm::new(TestBank::standard(Grid3::new(self.grid)?)?);
        let mut snaps = Snapshots::new(self.snapshot_stride);
        let diags = {
            let mut obs: Vec<&mut dyn Observer> =
                vec![&mut norms, &mut probe, &mut weak, &mut snaps];
            for o in extra.iter_mut() {
                obs.push(&mut **o);
            }
            run_with_checks(
                setups,
                &drv,
                self.top_first,
                last,
                self.check_stride,
                &mut obs,
            )?
        };
        snaps.finish();
        let ctx = BoundContext::new(
            &self.schedule()?,
            &self.plans()?,
            self.constants.clone(),
            energy.e_bar,
            self.iota,
            kit.frame.r_cert,
            self.residual_tol,
        )?;
        Ok(Outcome {
            spec: self.clone(),
            tau,
            first_index: first,
            last_index: last,
            ells,
            diags,
            norms: norms.summaries(),
            residual: probe
                .max_by_level(false)
                .into_iter()
                .map(|(q, d)| (q, (d, probe.max_by_level(true)[&q])))
                .collect(),
            weak,
            snapshots: snaps.levels,
            ctx,
        })
    }
}

pub struct Outcome {
    pub spec: ExperimentSpec,
    pub tau: StoppingTime,
    pub first_index: i64,
    pub last_index: i64,
    pub ells: Vec<f64>,
    /// `diags[q]` belongs to the step producing level q + 1.
    pub diags: Vec<Vec<StepDiag>>,
    pub norms: BTreeMap<usize, LevelNormSummary>,
    /// Largest relative residual per level: (second-order, fourth-order time difference).
    pub residual: BTreeMap<usize, (f64, f64)>,
    pub weak: WeakForm,
    pub snapshots: BTreeMap<usize, Vec<Snapshot>>,
    pub ctx: BoundContext,
}

/// Everything the run reports besides the ledger.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub tau: StoppingTime,
    pub first_index: i64,
    pub last_index: i64,
    pub ells: Vec<f64>,
    pub norms: BTreeMap<usize, LevelNormSummary>,
    pub residual: BTreeMap<usize, (f64, f64)>,
    pub weak: Option<WeakReport>,
    pub convergence: Option<ConvergenceReport>,
    pub hard_failures: usize,
    pub soft_failures: usize,
}

/// Hard completeness row: every step carries the full id set.
fn completeness(ledger: &DiagnosticLedger, levels: usize) -> LedgerRow {
    let missing: Vec<String> = (1..=levels)
        .flat_map(|q| {
            ledger
                .missing(Some(q), REQUIRED_STEP_IDS)
                .into_iter()
                .map(move |id| format!("{q}:{id}"))
        })
        .collect();
    LedgerRow::new(
        None,
        "ledger_complete",
        missing.len() as f64,
        0.0,
        Relation::AtMost,
        Flag::Hard,
    )
    .note(missing.join(" "))
}

fn weak_rows(w: &WeakReport) -> Vec<LedgerRow> {
    vec![
        LedgerRow::new(
            Some(w.level),
            "weak_residual",
            w.worst_ratio,
            1.0,
            Relation::AtMost,
            Flag::Hard,
        )
        .note("residual over 1.1·√3‖φ‖_{C¹}‖R̊‖_{C_tL¹}(t−t₀) plus the quadrature floor"),
        LedgerRow::new(
            Some(w.level),
            "weak_divergence",
            w.divergence,
            1e-8,
            Relation::AtMost,
            Flag::Hard,
        ),
    ]
}

impl Outcome {
    pub fn top(&self) -> usize {
        self.diags.len()
    }

    pub fn weak_report(&self) -> Result<WeakReport> {
        self.weak.report(self.top(), 0.0)
    }

    pub fn convergence(&self) -> Result<ConvergenceReport> {
        let fields: Vec<&SpectralField> = self
            .snapshots
            .values()
            .flatten()
            .flat_map(|s| [&s.v, &s.r, &s.p])
            .collect();
        convergence_report(
            trends_from_run(&self.norms, &self.diags, &self.ctx.deltas),
            &fields,
            self.spec.gamma,
            self.spec.surrogate.beta,
        )
    }

    pub fn ledger(&self) -> Result<(DiagnosticLedger, RunReport)> {
        let mut ledger = DiagnosticLedger::default();
        let empty = LevelNormSummary::default();
        for (q, d) in self.diags.iter().enumerate() {
            let inputs = StepInputs {
                level: q + 1,
                ell: self.ells[q],
                diags: d,
                input: self.norms.get(&q).unwrap_or(&empty),
                output: self.norms.get(&(q + 1)).unwrap_or(&empty),
                residual: self.residual.get(&(q + 1)).copied(),
            };
            ledger.extend(step_rows(&self.ctx, &inputs)?);
        }
        let levels: Vec<(usize, &[StepDiag])> = self
            .diags
            .iter()
            .enumerate()
            .map(|(q, d)| (q + 1, d.as_slice()))
            .collect();
        ledger.extend(fit_rows(&self.ctx, &levels));
        let weak = self.weak_report().ok();
        if let Some(w) = &weak {
            ledger.extend(weak_rows(w));
        }
        let convergence = if self.norms.len() >= 3 {
            Some(self.convergence()?)
        } else {
            None
        };
        if let Some(c) = &convergence {
            ledger.extend(c.rows());
        }
        ledger.push(completeness(&ledger, self.top()));
        let report = RunReport {
            tau: self.tau,
            first_index: self.first_index,
            last_index: self.last_index,
            ells: self.ells.clone(),
            norms: self.norms.clone(),
            residual: self.residual.clone(),
            weak,
            convergence,
            hard_failures: ledger.hard_failures().len(),
            soft_failures: ledger.soft_failures().len(),
        };
        Ok((ledger, report))
    }

    /// Writes v, R̊ and p snapshots of every level and the weak-form integrands to `dir`.
    pub fn write_checkpoints(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (q, list) in &self.snapshots {
            let times: Vec<f64> = list.iter().map(|s| s.t).collect();
            for (name, pick) in [
                (
                    "velocity",
                    (|s: &Snapshot| s.v.clone()) as fn(&Snapshot) -> SpectralField,
                ),
                ("stress", |s| s.r.clone()),
                ("pressure", |s| s.p.clone()),
            ] {
                let fields: Vec<SpectralField> = list.iter().map(pick).collect();
                let mut out =
                    BufWriter::new(File::create(dir.join(format!("level_{q}_{name}.bin")))?);
                write_coefficients(&mut out, &times, &fields)?;
            }
        }
        let w = serde_json::to_vec(&self.weak.export())?;
        std::fs::write(dir.join("weak_series.json"), w)?;
        Ok(())
    }
}

/// Snapshots and weak-form integrands read back from a checkpoint directory.
pub struct Checkpoints {
    pub levels: BTreeMap<usize, Vec<Snapshot>>,
    pub weak: WeakForm,
}

impl Checkpoints {
    pub fn load(dir: &Path, spec: &ExperimentSpec) -> Result<Self> {
        let mut levels = BTreeMap::new();
        for q in 1..=spec.ks.len() {
            let read = |name: &str| -> Result<(Vec<f64>, Vec<SpectralField>)> {
                let path = dir.join(format!("level_{q}_{name}.bin"));
                let f = File::open(&path)
                    .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
                read_coefficients(&mut BufReader::new(f))
            };
            let (times, vs) = read("velocity")?;
            let (_, rs) = read("stress")?;
            let (_, ps) = read("pressure")?;
            if vs.len() != rs.len() || vs.len() != ps.len() {
                return Err(Error::Format(format!(
                    "level {q} checkpoints have mismatched lengths"
                )));
            }
            let list = times
                .iter()
                .zip(vs.into_iter().zip(rs.into_iter().zip(ps)))
                .map(|(&t, (v, (r, p)))| Snapshot {
                    index: (t / spec.dt).round() as i64,
                    t,
                    v,
                    r,
                    p,
                })
                .collect();
            levels.insert(q, list);
        }
        let raw = std::fs::read(dir.join("weak_series.json"))?;
        let weak = WeakForm::import(
            TestBank::standard(Grid3::new(spec.grid)?)?,
            &serde_json::from_slice(&raw)?,
        )?;
        Ok(Checkpoints { levels, weak })
    }

    /// Weak-form and convergence rows recomputed from the stored data.
    pub fn verify(
        &self,
        spec: &ExperimentSpec,
        energy: &EnergyProfile,
        noise: &NoisePath,
    ) -> Result<(
        DiagnosticLedger,
        Option<WeakReport>,
        Option<ConvergenceReport>,
    )> {
        let mut ledger = DiagnosticLedger::default();
        let drv = Drivers {
            noise,
            energy,
            dt: spec.dt,
        };
        let top = spec.ks.len();
        let weak = self.weak.report(top, 0.0)?;
        ledger.extend(weak_rows(&weak));
        let deltas: Vec<f64> = spec.schedule()?.levels.iter().map(|l| l.delta).collect();
        let trends = trends_from_snapshots(&self.levels, &|i| drv.target(i), &deltas);
        let fields: Vec<&SpectralField> = self
            .levels
            .values()
            .flatten()
            .flat_map(|s| [&s.v, &s.r, &s.p])
            .collect();
        let conv = if trends.len() >= 3 {
            let c = convergence_report(trends, &fields, spec.gamma, spec.surrogate.beta)?;
            ledger.extend(c.rows());
            Some(c)
        } else {
            ledger.push(
                LedgerRow::new(
                    None,
                    "interpolation",
                    fields
                        .iter()
                        .map(|f| crate::verify::convergence::interpolation_excess(f, spec.gamma))
                        .fold(-1.0, f64::max),
                    1e-9,
                    Relation::AtMost,
                    Flag::Hard,
                )
                .note(format!("{} stored fields", fields.len())),
            );
            None
        };
        Ok((ledger, Some(weak), conv))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::EnergyShape;

    #[test]
    fn single_step_ledger_is_complete() {
        let spec = ExperimentSpec {
            t_end: Some(0.0625),
            ..Default::default()
        };
        let kit = Toolkit::new(spec.quadrature_nodes).unwrap();
        let energy =
            EnergyProfile::new(EnergyShape::Constant { value: 5.0 }, 1.0, 5.0, 1.0, 4.5).unwrap();
        let out = spec
            .run(&kit, &spec.noise().unwrap(), &energy, &mut [])
            .unwrap();
        let (ledger, report) = out.ledger().unwrap();
        for r in &ledger.rows {
            eprintln!(
                "{:?} {:<26} {:>12.4e} {:>12.4e} {:?} {}",
                r.level, r.id, r.measured, r.reference, r.flag, r.pass
            );
        }
        assert!(ledger.missing(Some(1), REQUIRED_STEP_IDS).is_empty());
        assert!(
            ledger.hard_failures().is_empty(),
            "{:?}",
            ledger.hard_failures()
        );
        assert!(report.weak.is_some());
    }
}
