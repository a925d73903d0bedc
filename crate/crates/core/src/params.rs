//! Parameter schedule, energy profiles and the admissibility checker.
//!
//! Frequencies λ_q = a^(b^q) overflow any float after two or three levels, so every inequality
//! is compared in natural-log units with the exponent b^q held as an exact integer.
use crate::error::{domain, Error, Result};
use crate::noise::m_const;
use num::{BigUint, ToPrimitive};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Universal-constant slots. The construction only asserts their existence; default 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Constants {
    pub k: f64,
    pub k_tilde: f64,
    pub k_hat: f64,
    pub k_star: f64,
    pub k_prime: f64,
    pub k_dprime: f64,
    pub s: f64,
    pub s_tilde: f64,
    pub s_hat: f64,
    /// M/(4|Λ|).
    pub m_frame: f64,
    pub m0: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            k: 1.0,
            k_tilde: 1.0,
            k_hat: 1.0,
            k_star: 1.0,
            k_prime: 1.0,
            k_dprime: 1.0,
            s: 1.0,
            s_tilde: 1.0,
            s_hat: 1.0,
            m_frame: 1.0,
            m0: 1.0,
        }
    }
}

impl Constants {
    fn check(&self) -> Result<()> {
        let all = [
            ("k", self.k),
            ("k_tilde", self.k_tilde),
            ("k_hat", self.k_hat),
            ("k_star", self.k_star),
            ("k_prime", self.k_prime),
            ("k_dprime", self.k_dprime),
            ("s", self.s),
            ("s_tilde", self.s_tilde),
            ("s_hat", self.s_hat),
            ("m_frame", self.m_frame),
            ("m0", self.m0),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return domain(format!("constant {name} = {v} must be positive"));
            }
        }
        if self.m0 < 1.0 {
            return domain(format!("m0 = {} must be at least 1", self.m0));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSchedule {
    /// Integer base, when given as such.
    pub a: Option<u64>,
    pub ln_a: f64,
    pub b: u64,
    pub alpha: f64,
    pub beta: f64,
    pub iota: f64,
    pub horizon: f64,
    pub e_bar: f64,
    pub e_tilde: f64,
    pub e_under: f64,
    pub constants: Constants,
}

impl ParamSchedule {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: u64,
        b: u64,
        alpha: f64,
        beta: f64,
        iota: f64,
        e_bar: f64,
        e_tilde: f64,
        e_under: f64,
    ) -> Result<Self> {
        if a < 2 {
            return domain(format!("a = {a} must be at least 2"));
        }
        Self::from_ln_a(
            (a as f64).ln(),
            b,
            alpha,
            beta,
            iota,
            e_bar,
            e_tilde,
            e_under,
        )
        .map(|s| ParamSchedule { a: Some(a), ..s })
    }

    /// Same, with the base given by its logarithm (for bases beyond u64).
    #[allow(clippy::too_many_arguments)]
    pub fn from_ln_a(
        ln_a: f64,
        b: u64,
        alpha: f64,
        beta: f64,
        iota: f64,
        e_bar: f64,
        e_tilde: f64,
        e_under: f64,
    ) -> Result<Self> {
        if b == 0 || b % 7 != 0 {
            return domain(format!("b = {b} must be a positive multiple of 7"));
        }
        if !(ln_a > 0.0 && ln_a.is_finite()) {
            return domain(format!("ln a = {ln_a} must be positive"));
        }
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0 && v < 1.0) {
                return domain(format!("{name} = {v} must lie in (0, 1)"));
            }
        }
        if !(iota > 1.0 / 3.0 && iota < 0.5) {
            return domain(format!("iota = {iota} must lie in (1/3, 1/2)"));
        }
        if !(e_under > 4.0 && e_bar >= e_under && e_tilde >= 0.0) {
            return domain(format!("energy bounds need 4 < e_under ≤ e_bar and e_tilde ≥ 0, got {e_under}, {e_bar}, {e_tilde}"));
        }
        Ok(ParamSchedule {
            a: None,
            ln_a,
            b,
            alpha,
            beta,
            iota,
            horizon: 1.0,
            e_bar,
            e_tilde,
            e_under,
            constants: Constants::default(),
        })
    }

    pub fn with_constants(mut self, c: Constants) -> Result<Self> {
        c.check()?;
        self.constants = c;
        Ok(self)
    }

    /// b^q, exact.
    pub fn b_pow(&self, q: u32) -> BigUint {
        BigUint::from(self.b).pow(q)
    }

    /// ln λ_q = b^q ln a.
    pub fn ln_lambda(&self, q: u32) -> f64 {
        self.b_pow(q).to_f64().unwrap_or(f64::INFINITY) * self.ln_a
    }

    /// ln δ_q = 2β(ln λ₁ − ln λ_q).
    pub fn ln_delta(&self, q: u32) -> f64 {
        2.0 * self.beta * (self.ln_lambda(1) - self.ln_lambda(q))
    }

    /// ln ℓ at level q: −(3α/2) ln λ_{q+1} − 2 ln λ_q.
    pub fn ln_ell(&self, q: u32) -> f64 {
        -1.5 * self.alpha * self.ln_lambda(q + 1) - 2.0 * self.ln_lambda(q)
    }

    pub fn ln_r_perp(&self, q: u32) -> f64 {
        -(6.0 / 7.0) * self.ln_lambda(q + 1)
    }

    pub fn ln_r_par(&self, q: u32) -> f64 {
        -(4.0 / 7.0) * self.ln_lambda(q + 1)
    }

    pub fn ln_mu(&self, q: u32) -> f64 {
        (9.0 / 7.0) * self.ln_lambda(q + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    /// margin = ln(rhs) − ln(lhs)
    Log,
    /// margin = rhs − lhs
    Linear,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub id: String,
    pub description: String,
    pub level: Option<u32>,
    pub lhs: f64,
    pub rhs: f64,
    pub units: Units,
    pub strict: bool,
    pub margin: f64,
    pub pass: bool,
}

impl ConstraintRow {
    fn new(
        id: &str,
        description: &str,
        level: Option<u32>,
        lhs: f64,
        rhs: f64,
        units: Units,
        strict: bool,
    ) -> Self {
        let margin = rhs - lhs;
        let pass = if strict { margin > 0.0 } else { margin >= 0.0 } && margin.is_finite();
        ConstraintRow {
            id: id.into(),
            description: description.into(),
            level,
            lhs,
            rhs,
            units,
            strict,
            margin,
            pass,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdmissibilityLedger {
    pub q_max: u32,
    pub rows: Vec<ConstraintRow>,
}

impl AdmissibilityLedger {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failing(&self) -> Vec<&ConstraintRow> {
        self.rows.iter().filter(|r| !r.pass).collect()
    }

    pub fn row(&self, id: &str, level: Option<u32>) -> Option<&ConstraintRow> {
        self.rows.iter().find(|r| r.id == id && r.level == level)
    }
}

/// ln(e^x + e^y) without overflow.
fn log_add(x: f64, y: f64) -> f64 {
    let m = x.max(y);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((x - m).exp() + (y - m).exp()).ln()
}

/// Evaluate every parameter constraint for levels q = 0..=q_max. The late-level list is applied
/// from q = 1 on, the value of q₀ the construction is allowed to assume.
pub fn check_admissible(s: &ParamSchedule, q_max: u32) -> Result<AdmissibilityLedger> {
    if s.b == 0 || s.b % 7 != 0 {
        return domain(format!("b = {} must be a positive multiple of 7", s.b));
    }
    let c = &s.constants;
    c.check()?;
    let ln_m = m_const().ln();
    let (al, be, io) = (s.alpha, s.beta, s.iota);
    let bf = s.b as f64;
    let lin = Units::Linear;
    let log = Units::Log;
    let mut rows = vec![
        ConstraintRow::new(
            "161alpha<1/7",
            "161α < 1/7",
            None,
            (161.0 * al).ln(),
            (1.0f64 / 7.0).ln(),
            log,
            true,
        ),
        ConstraintRow::new(
            "alpha*iota>4beta*b^2",
            "αι > 4βb²",
            None,
            (4.0 * be * bf * bf).ln(),
            (al * io).ln(),
            log,
            true,
        ),
        ConstraintRow::new(
            "alpha*b>=10/iota-4",
            "αb ≥ 10/ι − 4",
            None,
            10.0 / io - 4.0,
            al * bf,
            lin,
            false,
        ),
        ConstraintRow::new(
            "a>=3600",
            "a ≥ 3600",
            None,
            3600f64.ln(),
            s.ln_a,
            log,
            false,
        ),
        ConstraintRow::new(
            "a^(beta*b)>=2",
            "a^{βb} ≥ 2",
            None,
            2f64.ln(),
            be * bf * s.ln_a,
            log,
            false,
        ),
        ConstraintRow::new(
            "a^(3alpha/2*b+2)>=m^2*e_bar",
            "a^{(3α/2)b+2} ≥ m²ē",
            None,
            2.0 * ln_m + s.e_bar.ln(),
            (1.5 * al * bf + 2.0) * s.ln_a,
            log,
            false,
        ),
        ConstraintRow::new("iota>1/3", "ι > 1/3", None, 1.0 / 3.0, io, lin, true),
        ConstraintRow::new("iota<1/2", "ι < 1/2", None, io, 0.5, lin, true),
        ConstraintRow::new("e_under>4", "e̲ > 4", None, 4.0, s.e_under, lin, true),
    ];
    // geometric-sum bound: 1/(1 − a^{−βb}) ≤ 2
    let ratio = (-be * bf * s.ln_a).exp();
    rows.push(ConstraintRow::new(
        "delta_sum<=2",
        "Σ_r δ_r^{1/2} ≤ 1/(1 − a^{−βb}) ≤ 2",
        None,
        -(1.0 - ratio).ln(),
        2f64.ln(),
        log,
        false,
    ));

    let target = -(1500f64.ln()) - 0.5 * ln_m;
    let target5 = -(5f64.ln()) - 0.5 * ln_m;
    let mf = c.m_frame;
    for q in 0..=q_max {
        let lq = s.ln_lambda(q);
        let x = s.ln_lambda(q + 1);
        let ell = s.ln_ell(q);
        let lv = Some(q);
        if !x.is_finite() {
            return Err(Error::Numerical(format!("ln λ_{} is not finite", q + 1)));
        }
        rows.push(ConstraintRow::new(
            "ell_scale_gap",
            "ℓ λ_q^{5/ι} ≤ λ_{q+1}^{−α}",
            lv,
            ell + 5.0 / io * lq,
            -al * x,
            log,
            false,
        ));
        rows.push(ConstraintRow::new(
            "ell_energy_floor",
            "m²ē ≤ ℓ^{−1}",
            lv,
            2.0 * ln_m + s.e_bar.ln(),
            -ell,
            log,
            false,
        ));
        rows.push(ConstraintRow::new(
            "ell_frequency_cap",
            "ℓ^{−1} ≤ λ_{q+1}^{2α}",
            lv,
            -ell,
            2.0 * al * x,
            log,
            false,
        ));
        rows.push(ConstraintRow::new(
            "ell<1",
            "ℓ ∈ (0, 1)",
            lv,
            ell,
            0.0,
            log,
            true,
        ));
        if q >= 2 {
            rows.push(ConstraintRow::new(
                "delta<1",
                "δ_q ∈ (0, 1)",
                lv,
                s.ln_delta(q),
                0.0,
                log,
                true,
            ));
        }
        let partial: f64 = (1..=q).map(|r| (0.5 * s.ln_delta(r)).exp()).sum();
        rows.push(ConstraintRow::new(
            "delta_partial_sum",
            "Σ_{r=1}^q δ_r^{1/2} ≤ 2",
            lv,
            partial,
            2.0,
            lin,
            false,
        ));
        if q < 1 {
            continue;
        }
        rows.push(ConstraintRow::new(
            "late-1",
            "10 M₀ ē λ_{q+1}^{−α/2+2βb²} ≤ 1",
            lv,
            (10.0 * c.m0 * s.e_bar).ln() + (-al / 2.0 + 2.0 * be * bf * bf) * x,
            0.0,
            log,
            false,
        ));
        rows.push(ConstraintRow::new(
            "late-2",
            "M/4|Λ| λ_{q+1}^{33α−1/7} ≤ 1",
            lv,
            mf.ln() + (33.0 * al - 1.0 / 7.0) * x,
            0.0,
            log,
            false,
        ));
        rows.push(ConstraintRow::new(
            "late-3",
            "33(2π)^{3/2} M₀ m^{9/4}(ē+ẽ) λ_{q+1}^{−α(3ι/2−1/2)} ≤ 1/(1500 m^{1/2})",
            lv,
            (33.0 * (2.0 * PI).powf(1.5) * c.m0 * (s.e_bar + s.e_tilde)).ln() + 2.25 * ln_m
                - al * (1.5 * io - 0.5) * x,
            target,
            log,
            false,
        ));
        rows.push(ConstraintRow::new(
            "late-4",
            "S(M/4|Λ| + (M/4|Λ|)²) λ_{q+1}^{−100α} ≤ 1/(1500 m^{1/2})",
            lv,
            (c.s * (mf + mf * mf)).ln() - 100.0 * al * x,
            target,
            log,
            false,
        ));
        let max_pow = [2, 3, 4].iter().map(|n| mf.powi(*n)).fold(0.0, f64::max);
        rows.push(ConstraintRow::new(
            "late-5",
            "3S̃ max_n (M/4|Λ|)^n λ_{q+1}^{−68α} ≤ 1/(1500 m^{1/2})",
            lv,
            (3.0 * c.s_tilde * max_pow).ln() - 68.0 * al * x,
            target,
            log,
            false,
        ));
        rows.push(ConstraintRow::new(
            "late-6",
            "Ŝ (M/4|Λ|)² λ_{q+1}^{−111α} ≤ 1/(1500 m^{1/2})",
            lv,
            (c.s_hat * mf * mf).ln() - 111.0 * al * x,
            target,
            log,
            false,
        ));
        rows.push(ConstraintRow::new(
            "late-7",
            "2K M/4|Λ| λ_{q+1}^{−12/7} + K (M/4|Λ|)² λ_{q+1}^{−6/7} ≤ 1/2",
            lv,
            log_add(
                (2.0 * c.k * mf).ln() - 12.0 / 7.0 * x,
                (c.k * mf * mf).ln() - 6.0 / 7.0 * x,
            ),
            0.5f64.ln(),
            log,
            false,
        ));
        rows.push(ConstraintRow::new(
            "late-8",
            "K̃ λ_q⁵ λ_{q+1}^{−5} ≤ 1/2",
            lv,
            c.k_tilde.ln() + 5.0 * lq - 5.0 * x,
            0.5f64.ln(),
            log,
            false,
        ));
        rows.push(ConstraintRow::new(
            "late-9",
            "K̂ λ_{q+1}^{−147α} ≤ 1/(80 m^{3/4})",
            lv,
            c.k_hat.ln() - 147.0 * al * x,
            -(80f64.ln()) - 0.75 * ln_m,
            log,
            false,
        ));
        rows.push(ConstraintRow::new(
            "late-10",
            "K* 2π M/4|Λ| λ_{q+1}^{−5/21} ≤ 1/(5 m^{1/2})",
            lv,
            (c.k_star * 2.0 * PI * mf).ln() - 5.0 / 21.0 * x,
            target5,
            log,
            false,
        ));
        rows.push(ConstraintRow::new(
            "late-11",
            "K′(M₀ + M/4|Λ|)³ λ_{q+1}^{−1/14} ≤ 1/(5 m^{1/2})",
            lv,
            (c.k_prime * (c.m0 + mf).powi(3)).ln() - x / 14.0,
            target5,
            log,
            false,
        ));
        rows.push(ConstraintRow::new(
            "late-12",
            "K″((M/4|Λ|)² + (M/4|Λ|)⁴) λ_{q+1}^{−1/7} ≤ 1/(5 m^{1/2})",
            lv,
            (c.k_dprime * (mf * mf + mf.powi(4))).ln() - x / 7.0,
            target5,
            log,
            false,
        ));
    }
    Ok(AdmissibilityLedger { q_max, rows })
}

/// Energy profile e(t) on [0, L], extended by constants outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnergyShape {
    Constant {
        value: f64,
    },
    Affine {
        start: f64,
        slope: f64,
    },
    /// Cubic Hermite through the samples with centred-difference slopes (C¹).
    Tabulated {
        times: Vec<f64>,
        values: Vec<f64>,
    },
    /// base + amplitude·b((t − start)/width) with the smooth step b rising from 0 to 1.
    Step {
        base: f64,
        amplitude: f64,
        start: f64,
        width: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyProfile {
    pub shape: EnergyShape,
    pub horizon: f64,
    pub e_bar: f64,
    pub e_tilde: f64,
    pub e_under: f64,
}

fn smooth_step(x: f64) -> f64 {
    // C^∞ transition from 0 (x ≤ 0) to 1 (x ≥ 1)
    let f = |y: f64| if y <= 0.0 { 0.0 } else { (-1.0 / y).exp() };
    let (a, b) = (f(x), f(1.0 - x));
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

impl EnergyProfile {
    /// Build and check the bounds on a fine sample of [0, L].
    pub fn new(
        shape: EnergyShape,
        horizon: f64,
        e_bar: f64,
        e_tilde: f64,
        e_under: f64,
    ) -> Result<Self> {
        if let EnergyShape::Tabulated { times, values } = &shape {
            if times.len() < 2
                || times.len() != values.len()
                || times.windows(2).any(|w| w[1] <= w[0])
            {
                return domain(
                    "tabulated energy needs ≥ 2 strictly increasing times with matching values",
                );
            }
        }
        if let EnergyShape::Step { width, .. } = &shape {
            if *width <= 0.0 {
                return domain("step width must be positive");
            }
        }
        if !(e_under > 4.0 && e_bar >= e_under) {
            return domain(format!(
                "energy bounds need 4 < e_under ≤ e_bar, got {e_under}, {e_bar}"
            ));
        }
        let p = EnergyProfile {
            shape,
            horizon,
            e_bar,
            e_tilde,
            e_under,
        };
        let n = 4000;
        let h = 1e-6 * horizon.max(1.0);
        for i in 0..=n {
            let t = horizon * i as f64 / n as f64;
            let e = p.eval(t);
            if e < e_under || e > e_bar {
                return domain(format!("e({t}) = {e} outside [{e_under}, {e_bar}]"));
            }
            let d = (p.eval(t + h) - p.eval(t - h)) / (2.0 * h);
            let d = if t == 0.0 || t == horizon {
                p.derivative(t)
            } else {
                d
            };
            if d.abs() > e_tilde * (1.0 + 1e-6) + 1e-9 {
                return domain(format!(
                    "|e'({t})| = {} exceeds e_tilde = {e_tilde}",
                    d.abs()
                ));
            }
        }
        Ok(p)
    }

    fn clamp(&self, t: f64) -> f64 {
        t.clamp(0.0, self.horizon)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let t = self.clamp(t);
        match &self.shape {
            EnergyShape::Constant { value } => *value,
            EnergyShape::Affine { start, slope } => start + slope * t,
            EnergyShape::Tabulated { times, values } => hermite(times, values, t).0,
            EnergyShape::Step {
                base,
                amplitude,
                start,
                width,
            } => base + amplitude * smooth_step((t - start) / width),
        }
    }

    /// One-sided zero outside [0, L] follows from the constant extension.
    pub fn derivative(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.horizon {
            return 0.0;
        }
        match &self.shape {
            EnergyShape::Constant { .. } => 0.0,
            EnergyShape::Affine { slope, .. } => *slope,
            EnergyShape::Tabulated { times, values } => hermite(times, values, t).1,
            EnergyShape::Step {
                amplitude,
                start,
                width,
                ..
            } => {
                let h = 1e-6 * width;
                let x = (t - start) / width;
                amplitude * (smooth_step(x + h / width) - smooth_step(x - h / width)) / (2.0 * h)
            }
        }
    }
}

/// Value and slope of the C¹ cubic Hermite interpolant.
fn hermite(ts: &[f64], vs: &[f64], t: f64) -> (f64, f64) {
    let n = ts.len();
    let t = t.clamp(ts[0], ts[n - 1]);
    let i = match ts.iter().position(|&x| x > t) {
        Some(0) => 0,
        Some(j) => j - 1,
        None => n - 2,
    };
    let slope = |j: usize| -> f64 {
        if j == 0 {
            (vs[1] - vs[0]) / (ts[1] - ts[0])
        } else if j == n - 1 {
            (vs[n - 1] - vs[n - 2]) / (ts[n - 1] - ts[n - 2])
        } else {
            (vs[j + 1] - vs[j - 1]) / (ts[j + 1] - ts[j - 1])
        }
    };
    let h = ts[i + 1] - ts[i];
    let s = (t - ts[i]) / h;
    let (m0, m1) = (slope(i) * h, slope(i + 1) * h);
    let (p0, p1) = (vs[i], vs[i + 1]);
    let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
    let h10 = s.powi(3) - 2.0 * s * s + s;
    let h01 = -2.0 * s.powi(3) + 3.0 * s * s;
    let h11 = s.powi(3) - s * s;
    let v = h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1;
    let d = ((6.0 * s * s - 6.0 * s) * p0
        + (3.0 * s * s - 4.0 * s + 1.0) * m0
        + (-6.0 * s * s + 6.0 * s) * p1
        + (3.0 * s * s - 2.0 * s) * m1)
        / h;
    (v, d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateLevel {
    pub q: u32,
    pub lambda: u64,
    /// λ = k⁷.
    pub k: u64,
    pub delta: f64,
    /// Mollification scale ℓ_q = λ_{q+1}^{−3α/2} λ_q^{−2} (set when λ_{q+1} is known).
    pub ell: Option<f64>,
    pub r_perp: f64,
    pub r_par: f64,
    pub mu: f64,
}

/// Desk-scale stand-in for the true schedule: the same formulas on small 7th powers. None of the
/// admissibility inequalities are asserted for it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSchedule {
    pub alpha: f64,
    pub beta: f64,
    pub levels: Vec<SurrogateLevel>,
    pub inequalities_asserted: bool,
}

fn seventh_root(n: u64) -> Option<u64> {
    let guess = (n as f64).powf(1.0 / 7.0).round() as u64;
    (guess.saturating_sub(1)..=guess + 1).find(|k| (*k as u128).pow(7) == n as u128)
}

/// λ_q = λ₀ ratio^q for q = 0..levels, each a 7th power.
pub fn surrogate_schedule(
    lambda0: u64,
    ratio: u64,
    beta: f64,
    alpha: f64,
    levels: u32,
) -> Result<SurrogateSchedule> {
    if lambda0 == 0 || ratio < 2 {
        return domain("surrogate schedule needs λ₀ ≥ 1 and ratio ≥ 2");
    }
    if !(beta > 0.0 && beta < 1.0 && alpha > 0.0 && alpha < 1.0) {
        return domain("α and β must lie in (0, 1)");
    }
    let mut lams = Vec::new();
    let mut lam = lambda0 as u128;
    for q in 0..=levels {
        if lam > u64::MAX as u128 {
            return domain(format!("λ_{q} overflows"));
        }
        let l = lam as u64;
        if seventh_root(l).is_none() {
            return domain(format!("λ_{q} = {l} is not a 7th power"));
        }
        lams.push(l);
        lam *= ratio as u128;
    }
    let l1 = lams.get(1).copied().unwrap_or(lams[0]) as f64;
    let out = lams
        .iter()
        .enumerate()
        .map(|(q, &l)| {
            let lf = l as f64;
            let next = lams.get(q + 1).map(|&x| x as f64);
            SurrogateLevel {
                q: q as u32,
                lambda: l,
                k: seventh_root(l).unwrap(),
                delta: (l1 / lf).powf(2.0 * beta),
                ell: next.map(|n| n.powf(-1.5 * alpha) * lf.powi(-2)),
                r_perp: lf.powf(-6.0 / 7.0),
                r_par: lf.powf(-4.0 / 7.0),
                mu: lf.powf(9.0 / 7.0),
            }
        })
        .collect();
    Ok(SurrogateSchedule {
        alpha,
        beta,
        levels: out,
        inequalities_asserted: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> ParamSchedule {
        ParamSchedule::new(3600, 7, 1e-4, 1e-9, 0.4, 5.0, 1.0, 4.5).unwrap()
    }

    #[test]
    fn reference_tuple_rows() {
        let l = check_admissible(&reference(), 10).unwrap();
        assert!(l.row("161alpha<1/7", None).unwrap().pass);
        let r = l.row("alpha*iota>4beta*b^2", None).unwrap();
        assert!(r.pass);
        // 4e-5 against 1.96e-7
        assert!((r.rhs.exp() - 4e-5).abs() < 1e-18 && (r.lhs.exp() - 1.96e-7).abs() < 1e-20);
        assert!(!l.row("alpha*b>=10/iota-4", None).unwrap().pass);
        assert!(l.rows.iter().all(|r| r.margin.is_finite()));
        assert!(l.rows.iter().any(|r| r.level == Some(10)));
    }

    #[test]
    fn forced_violation_flips_one_row() {
        let base = check_admissible(&reference(), 3).unwrap();
        let mut s = reference();
        s.alpha = 1.01 / (161.0 * 7.0);
        let l = check_admissible(&s, 3).unwrap();
        assert!(!l.row("161alpha<1/7", None).unwrap().pass);
        // the global rows not involving α keep their verdicts
        for id in ["a>=3600", "a^(beta*b)>=2", "iota>1/3", "e_under>4"] {
            assert_eq!(
                l.row(id, None).unwrap().pass,
                base.row(id, None).unwrap().pass,
                "{id}"
            );
        }
    }

    #[test]
    fn log_domain_matches_direct_evaluation() {
        let s = reference();
        for q in 0..2u32 {
            let lam_q = 3600f64.powi(7i32.pow(q));
            let lam_n = 3600f64.powi(7i32.pow(q + 1));
            let ell = lam_n.powf(-1.5 * s.alpha) * lam_q.powi(-2);
            assert!((s.ln_ell(q).exp() / ell - 1.0).abs() < 1e-12);
            assert!((s.ln_lambda(q + 1) / lam_n.ln() - 1.0).abs() < 1e-12);
        }
        let d2 = (3600f64.powi(7) / 3600f64.powi(49)).powf(2e-9);
        assert!((s.ln_delta(2).exp() / d2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn b_must_be_multiple_of_seven() {
        assert!(ParamSchedule::new(3600, 6, 1e-4, 1e-9, 0.4, 5.0, 1.0, 4.5).is_err());
        let mut s = reference();
        s.b = 6;
        assert!(check_admissible(&s, 1).is_err());
    }

    #[test]
    fn ell_lower_bound_in_log_domain() {
        let l = check_admissible(&reference(), 1).unwrap();
        let r = l.row("ell_energy_floor", Some(1)).unwrap();
        assert!((r.lhs - (8.0 + 5f64.ln())).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn surrogate_levels() {
        let s = surrogate_schedule(128, 128, 0.1, 0.01, 2).unwrap();
        let lams: Vec<u64> = s.levels.iter().map(|l| l.lambda).collect();
        assert_eq!(lams, vec![128, 16384, 2097152]);
        assert_eq!(s.levels[1].k, 4);
        assert!(s.levels.windows(2).all(|w| w[1].delta < w[0].delta));
        assert!(s.levels.iter().filter_map(|l| l.ell).all(|e| e < 1.0));
        assert!(surrogate_schedule(128, 3, 0.1, 0.01, 2).is_err());
        assert!(!s.inequalities_asserted);
    }

    #[test]
    fn energy_profiles() {
        let tab = EnergyShape::Tabulated {
            times: vec![0.0, 0.5, 1.0],
            values: vec![5.0, 6.0, 5.5],
        };
        let p = EnergyProfile::new(tab, 1.0, 7.0, 10.0, 4.5).unwrap();
        assert!((p.eval(0.5) - 6.0).abs() < 1e-14);
        assert_eq!(p.eval(-1.0), 5.0);
        let h = 1e-7;
        let d = (p.eval(0.5 + h) - p.eval(0.5 - h)) / (2.0 * h);
        assert!((d - p.derivative(0.5)).abs() < 1e-5);
        assert!(
            EnergyProfile::new(EnergyShape::Constant { value: 3.0 }, 1.0, 5.0, 0.0, 4.5).is_err()
        );
        assert!(EnergyProfile::new(
            EnergyShape::Affine {
                start: 5.0,
                slope: 2.0
            },
            1.0,
            8.0,
            1.0,
            4.5
        )
        .is_err());
        let step = EnergyShape::Step {
            base: 5.0,
            amplitude: 1.0,
            start: 0.3,
            width: 0.2,
        };
        let p = EnergyProfile::new(step, 1.0, 6.0, 20.0, 4.5).unwrap();
        assert_eq!(p.eval(0.3), 5.0);
        assert!((p.eval(0.6) - 6.0).abs() < 1e-14);
    }
}
