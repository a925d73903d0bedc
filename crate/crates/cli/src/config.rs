//! Run configuration: a TOML document with nested blocks, validated at load.
use convint::experiment::{ExperimentSpec, SurrogateSpec};
use convint::params::{Constants, EnergyProfile, EnergyShape, ParamSchedule};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;

#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent configuration.
    Config(String),
    Run(convint::Error),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(s) => write!(f, "config error: {s}"),
            CliError::Run(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "io: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<convint::Error> for CliError {
    fn from(e: convint::Error) -> Self {
        CliError::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Run(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleBlock {
    /// The true doubly exponential schedule λ_q = a^{b^q}; only checked, never run.
    /// Give either `a` or `ln_a`; admissible tuples need a far beyond u64.
    Exact {
        #[serde(default)]
        a: Option<u64>,
        #[serde(default)]
        ln_a: Option<f64>,
        b: u64,
        alpha: f64,
        beta: f64,
        iota: f64,
        #[serde(default = "default_q_check")]
        q_check: u32,
    },
    /// Desk surrogate λ_q = λ₀·ratio^q with the same formulas.
    Surrogate {
        lambda0: u64,
        ratio: u64,
        alpha: f64,
        beta: f64,
    },
}

fn default_q_check() -> u32 {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseBlock {
    pub seed: u64,
    pub dt: f64,
    /// Horizon and stopping level L.
    pub horizon: f64,
    pub iota: f64,
}

impl Default for NoiseBlock {
    fn default() -> Self {
        NoiseBlock {
            seed: 1,
            dt: 1.0 / 256.0,
            horizon: 1.0,
            iota: 0.4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyBlock {
    pub profile: EnergyShape,
    pub e_bar: f64,
    pub e_tilde: f64,
    pub e_under: f64,
}

impl Default for EnergyBlock {
    fn default() -> Self {
        EnergyBlock {
            profile: EnergyShape::Constant { value: 5.0 },
            e_bar: 5.0,
            e_tilde: 1.0,
            e_under: 4.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    pub n_per_axis: usize,
    pub oversampling: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        GridBlock {
            n_per_axis: 16,
            oversampling: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative residual of the new iterate with a fourth-order time difference.
    pub residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { residual: 5e-4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunBlock {
    /// Last level index q whose step is run: levels 1..=q_max+1 are produced.
    pub q_max: usize,
    /// Jet parameter per step (λ = k⁷); needs at least q_max + 1 entries.
    pub ks: Vec<u64>,
    pub mu: f64,
    pub ell: f64,
    pub t_end: Option<f64>,
    pub top_first: i64,
    /// Checkpoint directory, relative to the output directory unless absolute.
    pub checkpoints: PathBuf,
    pub check_stride: usize,
    pub snapshot_stride: i64,
    pub gamma: f64,
    pub rho_factor: Option<f64>,
    pub quadrature_nodes: usize,
    pub tolerances: Tolerances,
}

impl Default for RunBlock {
    fn default() -> Self {
        let e = ExperimentSpec::default();
        RunBlock {
            q_max: 0,
            ks: e.ks,
            mu: e.mu,
            ell: e.ell,
            t_end: e.t_end,
            top_first: e.top_first,
            checkpoints: PathBuf::from("checkpoints"),
            check_stride: e.check_stride,
            snapshot_stride: e.snapshot_stride,
            gamma: e.gamma,
            rho_factor: e.rho_factor,
            quadrature_nodes: e.quadrature_nodes,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JetsBlock {
    pub k: u64,
    pub box_nodes: [usize; 2],
    pub scan_grid: usize,
    pub near_points: usize,
    pub times: Vec<f64>,
    pub dts: Vec<f64>,
    pub scaling_ks: Vec<u64>,
}

impl Default for JetsBlock {
    fn default() -> Self {
        let o = convint::jets::JetReportOptions::default();
        JetsBlock {
            k: 2,
            box_nodes: o.box_nodes,
            scan_grid: o.scan_grid,
            near_points: o.near_points,
            times: o.times,
            dts: o.dts,
            scaling_ks: o.scaling_ks,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencyBlock {
    pub t_agree: f64,
    pub seeds: Vec<u64>,
    /// Second energy profile; shares the bounds of the energy block.
    pub profile: EnergyShape,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schedule: ScheduleBlock,
    #[serde(default)]
    pub noise: NoiseBlock,
    #[serde(default)]
    pub energy: EnergyBlock,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub constants: Constants,
    #[serde(default)]
    pub jets: JetsBlock,
    pub consistency: Option<ConsistencyBlock>,
}

fn bad<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(msg.into()))
}

impl RunConfig {
    /// Parses and validates; errors name the offending key (and line, for syntax errors).
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        if let ScheduleBlock::Exact { .. } = self.schedule {
            self.exact_schedule()?;
        }
        if self.run.tolerances.residual < f64::EPSILON {
            return bad(format!(
                "run.tolerances.residual = {} is below machine epsilon",
                self.run.tolerances.residual
            ));
        }
        if self.run.ks.len() < self.run.q_max + 1 {
            return bad(format!(
                "run.ks has {} entries, q_max = {} needs {}",
                self.run.ks.len(),
                self.run.q_max,
                self.run.q_max + 1
            ));
        }
        if self.grid.oversampling == 0 {
            return bad("grid.oversampling must be at least 1");
        }
        self.energy_profile()?;
        if let Some(c) = &self.consistency {
            self.profile_with(c.profile.clone())?;
        }
        Ok(())
    }

    pub fn exact_schedule(&self) -> CliResult<(ParamSchedule, u32)> {
        match &self.schedule {
            ScheduleBlock::Exact {
                a,
                ln_a,
                b,
                alpha,
                beta,
                iota,
                q_check,
            } => {
                let (eb, et, eu) = (self.energy.e_bar, self.energy.e_tilde, self.energy.e_under);
                let base = match (a, ln_a) {
                    (Some(a), None) => ParamSchedule::new(*a, *b, *alpha, *beta, *iota, eb, et, eu),
                    (None, Some(l)) => {
                        ParamSchedule::from_ln_a(*l, *b, *alpha, *beta, *iota, eb, et, eu)
                    }
                    _ => return bad("schedule: give exactly one of a and ln_a"),
                };
                let mut s = base
                    .and_then(|s| s.with_constants(self.constants.clone()))
                    .map_err(|e| CliError::Config(format!("schedule: {e}")))?;
                s.horizon = self.noise.horizon;
                Ok((s, *q_check))
            }
            ScheduleBlock::Surrogate { .. } => {
                bad("this command needs a schedule of kind \"exact\"")
            }
        }
    }

    fn profile_with(&self, shape: EnergyShape) -> CliResult<EnergyProfile> {
        EnergyProfile::new(
            shape,
            self.noise.horizon,
            self.energy.e_bar,
            self.energy.e_tilde,
            self.energy.e_under,
        )
        .map_err(|e| CliError::Config(format!("energy: {e}")))
    }

    pub fn energy_profile(&self) -> CliResult<EnergyProfile> {
        self.profile_with(self.energy.profile.clone())
    }

    pub fn second_energy(&self) -> CliResult<(EnergyProfile, &ConsistencyBlock)> {
        match &self.consistency {
            Some(c) => Ok((self.profile_with(c.profile.clone())?, c)),
            None => bad("the consistency command needs a [consistency] block"),
        }
    }

    pub fn experiment(&self) -> CliResult<ExperimentSpec> {
        let surrogate = match &self.schedule {
            ScheduleBlock::Surrogate {
                lambda0,
                ratio,
                alpha,
                beta,
            } => SurrogateSpec {
                lambda0: *lambda0,
                ratio: *ratio,
                alpha: *alpha,
                beta: *beta,
            },
            ScheduleBlock::Exact { .. } => {
                return bad("running the construction needs a schedule of kind \"surrogate\"")
            }
        };
        let r = &self.run;
        Ok(ExperimentSpec {
            seed: self.noise.seed,
            dt: self.noise.dt,
            horizon: self.noise.horizon,
            iota: self.noise.iota,
            grid: self.grid.n_per_axis,
            oversample: self.grid.oversampling,
            ks: r.ks[..=r.q_max].to_vec(),
            mu: r.mu,
            ell: r.ell,
            surrogate,
            constants: self.constants.clone(),
            rho_factor: r.rho_factor,
            check_stride: r.check_stride,
            top_first: r.top_first,
            t_end: r.t_end,
            residual_tol: r.tolerances.residual,
            gamma: r.gamma,
            snapshot_stride: r.snapshot_stride,
            quadrature_nodes: r.quadrature_nodes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = r#"
[schedule]
kind = "exact"
a = 3600
b = 7
alpha = 1e-4
beta = 1e-9
iota = 0.4
"#;

    #[test]
    fn exact_tuple_parses() {
        let c = RunConfig::parse(REFERENCE).unwrap();
        assert!(c.exact_schedule().is_ok());
        assert!(c.experiment().is_err());
    }

    #[test]
    fn b_not_multiple_of_seven_rejected() {
        let e = RunConfig::parse(&REFERENCE.replace("b = 7", "b = 6"))
            .unwrap_err()
            .to_string();
        assert!(e.contains("multiple of 7"), "{e}");
    }

    #[test]
    fn missing_alpha_named() {
        let e = RunConfig::parse(&REFERENCE.replace("alpha = 1e-4\n", ""))
            .unwrap_err()
            .to_string();
        assert!(e.contains("alpha"), "{e}");
    }

    #[test]
    fn tolerance_below_epsilon_rejected() {
        let t = format!("{REFERENCE}\n[run.tolerances]\nresidual = 1e-20\n");
        assert!(RunConfig::parse(&t).is_err());
    }

    #[test]
    fn unknown_key_rejected() {
        let t = format!("{REFERENCE}\n[grid]\nn = 16\n");
        let e = RunConfig::parse(&t).unwrap_err().to_string();
        assert!(e.contains("unknown field"), "{e}");
    }

    #[test]
    fn round_trip() {
        let c = RunConfig::parse(REFERENCE).unwrap();
        let back = RunConfig::parse(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, back);
    }
}
