//! Brownian driving path, Θ = e^B, stopping time, Hölder tracking and causal time mollification.
use crate::error::{domain, Error, Result};
use crate::quad;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use std::io::{Read, Write};

/// m = e⁴.
pub fn m_const() -> f64 {
    4f64.exp()
}

/// Sampled path on t_k = k·dt, k = 0..=n, extended by B(t) = 0 for t ≤ 0.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisePath {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub samples: Vec<f64>,
}

impl NoisePath {
    /// Gaussian increments with variance dt from a ChaCha20 stream seeded by `seed`.
    pub fn sample(seed: u64, dt: f64, horizon: f64) -> Result<NoisePath> {
        if !(dt > 0.0 && horizon > 0.0) {
            return domain(format!("need dt > 0 and L > 0, got dt={dt}, L={horizon}"));
        }
        if dt >= horizon {
            return domain(format!(
                "dt={dt} must be smaller than the horizon {horizon}"
            ));
        }
        let n = (horizon / dt).ceil() as usize;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, dt.sqrt()).map_err(|e| Error::Numerical(e.to_string()))?;
        let mut samples = Vec::with_capacity(n + 1);
        let mut b = 0.0;
        samples.push(b);
        for _ in 0..n {
            b += normal.sample(&mut rng);
            samples.push(b);
        }
        Ok(NoisePath {
            dt,
            horizon,
            seed,
            samples,
        })
    }

    pub fn from_samples(dt: f64, horizon: f64, seed: u64, samples: Vec<f64>) -> Result<NoisePath> {
        if samples.first().copied() != Some(0.0) {
            return domain("a path must start at B(0) = 0");
        }
        Ok(NoisePath {
            dt,
            horizon,
            seed,
            samples,
        })
    }

    pub fn zero(dt: f64, horizon: f64) -> NoisePath {
        let n = (horizon / dt).ceil() as usize;
        NoisePath {
            dt,
            horizon,
            seed: 0,
            samples: vec![0.0; n + 1],
        }
    }

    /// Copy of the path that agrees up to `t0` and continues with fresh increments from `seed`.
    pub fn resampled_after(&self, t0: f64, seed: u64) -> Result<NoisePath> {
        let fresh = NoisePath::sample(seed, self.dt, self.horizon)?;
        let k0 = ((t0 / self.dt).floor().max(0.0) as usize).min(self.samples.len() - 1);
        let mut s = self.samples.clone();
        for k in k0 + 1..s.len() {
            s[k] = s[k - 1] + (fresh.samples[k] - fresh.samples[k - 1]);
        }
        Ok(NoisePath {
            samples: s,
            ..self.clone()
        })
    }

    pub fn end_time(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    /// Piecewise-linear B(t); zero for t ≤ 0, held at the last sample beyond the end.
    pub fn b(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let s = t / self.dt;
        let k = s.floor() as usize;
        if k + 1 >= self.samples.len() {
            return *self.samples.last().unwrap();
        }
        let f = s - k as f64;
        if f == 0.0 {
            self.samples[k]
        } else {
            self.samples[k] * (1.0 - f) + self.samples[k + 1] * f
        }
    }

    pub fn theta(&self, t: f64) -> f64 {
        self.b(t).exp()
    }

    /// Θ at grid index k (time k·dt): 1 for k ≤ 0, the last sample beyond the end.
    pub fn theta_at(&self, k: i64) -> f64 {
        if k <= 0 {
            return 1.0;
        }
        let k = (k as usize).min(self.samples.len() - 1);
        self.samples[k].exp()
    }

    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(
            out,
            "# seed={} dt={:.16e} L={:.16e}",
            self.seed, self.dt, self.horizon
        )?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "B", "Theta"])?;
        for (k, b) in self.samples.iter().enumerate() {
            let t = k as f64 * self.dt;
            w.write_record([
                format!("{t:.16e}"),
                format!("{b:.16e}"),
                format!("{:.16e}", b.exp()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(inp: &mut impl Read) -> Result<NoisePath> {
        let mut text = String::new();
        inp.read_to_string(&mut text)?;
        let head = text.lines().next().unwrap_or("");
        let field = |key: &str| -> Result<String> {
            head.split_whitespace()
                .find_map(|kv| kv.strip_prefix(&format!("{key}=")).map(str::to_string))
                .ok_or_else(|| Error::Format(format!("path header lacks {key}")))
        };
        let parse = |s: String| s.parse::<f64>().map_err(|e| Error::Format(e.to_string()));
        let seed = field("seed")?
            .parse::<u64>()
            .map_err(|e| Error::Format(e.to_string()))?;
        let dt = parse(field("dt")?)?;
        let horizon = parse(field("L")?)?;
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut samples = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            samples.push(parse(rec[1].to_string())?);
        }
        NoisePath::from_samples(dt, horizon, seed, samples)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trigger {
    Amplitude,
    Hoelder,
    Horizon,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StoppingTime {
    pub tau: f64,
    pub triggered_by: Trigger,
    pub dt: f64,
    /// Hölder seminorm of B on [0, τ] over sample pairs.
    pub hoelder: f64,
}

/// Running max of |B(s) − B(s')| / |s − s'|^ι over sample pairs. Blocks of past samples carry
/// their min and max, and a block is skipped whenever its best possible quotient cannot beat
/// the current maximum.
pub struct HoelderTracker {
    dt: f64,
    iota: f64,
    block: usize,
    values: Vec<f64>,
    mins: Vec<f64>,
    maxs: Vec<f64>,
    best: f64,
}

impl HoelderTracker {
    pub fn new(dt: f64, iota: f64) -> Self {
        HoelderTracker {
            dt,
            iota,
            block: 32,
            values: Vec::new(),
            mins: Vec::new(),
            maxs: Vec::new(),
            best: 0.0,
        }
    }

    pub fn seminorm(&self) -> f64 {
        self.best
    }

    /// Add the next sample and return the updated seminorm.
    pub fn push(&mut self, b: f64) -> f64 {
        let k = self.values.len();
        let nb = k / self.block;
        for blk in (0..nb).rev() {
            let end = (blk + 1) * self.block - 1;
            let gap = ((k - end) as f64 * self.dt).powf(self.iota);
            let bound = (b - self.mins[blk]).abs().max((b - self.maxs[blk]).abs()) / gap;
            if bound <= self.best {
                continue;
            }
            for j in blk * self.block..=end {
                let q = (b - self.values[j]).abs() / (((k - j) as f64) * self.dt).powf(self.iota);
                self.best = self.best.max(q);
            }
        }
        for j in nb * self.block..k {
            let q = (b - self.values[j]).abs() / (((k - j) as f64) * self.dt).powf(self.iota);
            self.best = self.best.max(q);
        }
        self.values.push(b);
        if k % self.block == 0 {
            self.mins.push(b);
            self.maxs.push(b);
        } else {
            let i = self.mins.len() - 1;
            self.mins[i] = self.mins[i].min(b);
            self.maxs[i] = self.maxs[i].max(b);
        }
        self.best
    }
}

/// Brute-force Hölder seminorm over all sample pairs of the first `upto+1` samples.
pub fn hoelder_bruteforce(samples: &[f64], dt: f64, iota: f64, upto: usize) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..=upto {
        for j in 0..i {
            best = best.max((samples[i] - samples[j]).abs() / (((i - j) as f64) * dt).powf(iota));
        }
    }
    best
}

/// τ = inf{|B| ≥ L} ∧ inf{‖B‖_{C^ι} ≥ L} ∧ L on the sample grid. Amplitude wins ties.
pub fn stopping_time(path: &NoisePath, level: f64, iota: f64) -> Result<StoppingTime> {
    if !(iota > 1.0 / 3.0 && iota < 0.5) {
        return domain(format!(
            "Hölder exponent must lie in (1/3, 1/2), got {iota}"
        ));
    }
    let mut tr = HoelderTracker::new(path.dt, iota);
    tr.push(path.samples[0]);
    for k in 1..path.samples.len() {
        let t = k as f64 * path.dt;
        if t > level {
            break;
        }
        let b = path.samples[k];
        let h = tr.push(b);
        if b.abs() >= level {
            return Ok(StoppingTime {
                tau: t,
                triggered_by: Trigger::Amplitude,
                dt: path.dt,
                hoelder: h,
            });
        }
        if h >= level {
            return Ok(StoppingTime {
                tau: t,
                triggered_by: Trigger::Hoelder,
                dt: path.dt,
                hoelder: h,
            });
        }
    }
    Ok(StoppingTime {
        tau: level.min(path.end_time()),
        triggered_by: Trigger::Horizon,
        dt: path.dt,
        hoelder: tr.seminorm(),
    })
}

fn bump_time(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (1.0 / ((t - 0.5).powi(2) - 0.25)).exp()
    }
}

/// Normalization C with ∫₀¹ C exp(1/(|t−1/2|²−1/4)) dt = 1.
pub fn time_bump_constant() -> f64 {
    1.0 / quad::integrate(0.0, 1.0, 32, 32, bump_time)
}

/// φ(t) of the shifted time mollifier, supported in (0, 1).
pub fn time_bump(t: f64) -> f64 {
    static C: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
    *C.get_or_init(time_bump_constant) * bump_time(t)
}

/// Causal mollifier on a uniform time grid: (f ∗ φ_ℓ)(t_k) = Σ_j w_j f(t_{k−j}), j = 0..=n,
/// with composite-Simpson weights over [0, ℓ], renormalized to sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeMollifier {
    pub ell: f64,
    pub dt: f64,
    pub weights: Vec<f64>,
}

impl TimeMollifier {
    /// Requires ℓ/dt to be an even integer ≥ 64.
    pub fn new(ell: f64, dt: f64) -> Result<Self> {
        if !(ell > 0.0 && dt > 0.0) {
            return domain(format!("need ℓ > 0 and dt > 0, got ℓ={ell}, dt={dt}"));
        }
        let r = ell / dt;
        let n = r.round() as usize;
        if (r - n as f64).abs() > 1e-9 * r || n % 2 != 0 || n < 64 {
            return domain(format!("ℓ/dt = {r} must be an even integer >= 64"));
        }
        let h = dt;
        let mut w: Vec<f64> = (0..=n)
            .map(|j| {
                let s = if j == 0 || j == n {
                    1.0
                } else if j % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                s * h / 3.0 * time_bump(j as f64 * h / ell) / ell
            })
            .collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        Ok(TimeMollifier {
            ell,
            dt,
            weights: w,
        })
    }

    /// Snap ℓ to the nearest admissible multiple of dt (even, ≥ 64 steps).
    pub fn snapped(ell: f64, dt: f64) -> Result<Self> {
        let mut n = (ell / dt / 2.0).round() as usize * 2;
        n = n.max(64);
        Self::new(n as f64 * dt, dt)
    }

    /// Number of past samples consulted (the lag-0 and lag-n weights vanish).
    pub fn lookback(&self) -> usize {
        self.weights.len() - 1
    }

    /// Mollify a scalar series given on indices first..first+len; output on the indices
    /// that have full history.
    pub fn apply_series(&self, f: &[f64], first: i64) -> (i64, Vec<f64>) {
        let n = self.lookback();
        if f.len() <= n {
            return (first + n as i64, Vec::new());
        }
        let out = (n..f.len())
            .map(|k| {
                self.weights
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w * f[k - j])
                    .sum()
            })
            .collect();
        (first + n as i64, out)
    }

    /// Value at index k of a series supplied by `f(index)`.
    pub fn at<F: Fn(i64) -> f64>(&self, k: i64, f: F) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(j, w)| w * f(k - j as i64))
            .sum()
    }
}

/// mollify_time on a series defined on `first..`: errors when the requested index lacks ℓ of history.
pub fn mollify_time(series: &[f64], first: i64, dt: f64, ell: f64, at: &[i64]) -> Result<Vec<f64>> {
    let m = TimeMollifier::new(ell, dt)?;
    let n = m.lookback() as i64;
    at.iter()
        .map(|&k| {
            if k - n < first || k >= first + series.len() as i64 {
                return domain(format!("index {k} lacks {n} samples of history"));
            }
            Ok(m.at(k, |i| series[(i - first) as usize]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_path() {
        let a = NoisePath::sample(7, 1e-3, 1.0).unwrap();
        let b = NoisePath::sample(7, 1e-3, 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.b(-0.5), 0.0);
        assert_eq!(a.samples[0], 0.0);
    }

    #[test]
    fn dt_must_be_below_horizon() {
        assert!(NoisePath::sample(1, 1.0, 1.0).is_err());
    }

    #[test]
    fn zero_path_runs_to_horizon() {
        let p = NoisePath::zero(1e-3, 1.0);
        let s = stopping_time(&p, 1.0, 0.4).unwrap();
        assert_eq!(s.triggered_by, Trigger::Horizon);
        assert!((s.tau - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forced_amplitude_trigger() {
        let mut s = vec![0.0; 101];
        for x in s.iter_mut().skip(1) {
            *x = 2.0;
        }
        let p = NoisePath::from_samples(0.01, 1.0, 0, s).unwrap();
        let st = stopping_time(&p, 1.0, 0.4).unwrap();
        assert_eq!(st.triggered_by, Trigger::Amplitude);
        assert!((st.tau - 0.01).abs() < 1e-15);
    }

    #[test]
    fn pruned_tracker_matches_bruteforce() {
        let p = NoisePath::sample(3, 1e-3, 0.5).unwrap();
        let mut tr = HoelderTracker::new(p.dt, 0.45);
        for (k, &b) in p.samples.iter().enumerate() {
            let h = tr.push(b);
            if k % 97 == 0 || k == p.samples.len() - 1 {
                let bf = hoelder_bruteforce(&p.samples, p.dt, 0.45, k);
                assert!((h - bf).abs() <= 1e-14 * bf.max(1.0), "k={k}: {h} vs {bf}");
            }
        }
    }

    #[test]
    fn mollifier_reproduces_constants_and_is_causal() {
        let m = TimeMollifier::new(0.064, 1e-3).unwrap();
        assert_eq!(m.weights[0], 0.0);
        let c = m.at(10, |_| 3.5);
        assert!((c - 3.5).abs() < 1e-14);
        // changing the future leaves the value unchanged
        let a = m.at(100, |i| (i as f64).sin());
        let b = m.at(100, |i| if i > 100 { 1e9 } else { (i as f64).sin() });
        assert_eq!(a, b);
        assert!(TimeMollifier::new(0.063, 1e-3).is_err());
        assert!(TimeMollifier::new(0.010, 1e-3).is_err());
    }

    #[test]
    fn time_bump_integrates_to_one() {
        let v = quad::integrate(0.0, 1.0, 40, 40, time_bump);
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn csv_round_trip() {
        let p = NoisePath::sample(11, 0.01, 0.2).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let q = NoisePath::read_csv(&mut buf.as_slice()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn resampling_keeps_the_past() {
        let p = NoisePath::sample(5, 1e-3, 1.0).unwrap();
        let q = p.resampled_after(0.3, 99).unwrap();
        for k in 0..=300 {
            assert_eq!(p.samples[k], q.samples[k]);
        }
        assert_ne!(p.samples[600], q.samples[600]);
    }
}
