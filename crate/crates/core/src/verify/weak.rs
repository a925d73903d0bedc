//! Weak form of the transformed system against a fixed bank of smooth test functions.
use crate::error::{domain, Result};
use crate::integrator::level::{Drivers, LevelRecord, StepDiag};
use crate::integrator::run::Observer;
use crate::spectral::norms::c0;
use crate::spectral::ops::{derivative, div, grad, laplacian};
use crate::spectral::{tc, Grid3, PhysicalField, Rank, SpectralField};
use num::complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

/// Sparse band-limited field: (flat index, coefficient per component).
#[derive(Clone, Debug)]
struct Sparse {
    modes: Vec<(usize, Vec<Complex64>)>,
}

impl Sparse {
    fn of(f: &SpectralField) -> Self {
        let len = f.grid.len();
        let nc = f.ncomp();
        let modes = (0..len)
            .filter_map(|i| {
                let c: Vec<Complex64> = (0..nc).map(|k| f.coeffs[k * len + i]).collect();
                c.iter().any(|z| z.norm() > 0.0).then_some((i, c))
            })
            .collect();
        Sparse { modes }
    }

    /// ⟨f, self⟩_{L²} for a real field f on the same grid.
    fn inner(&self, f: &SpectralField) -> f64 {
        let len = f.grid.len();
        let vol = (2.0 * PI).powi(3);
        vol * self
            .modes
            .iter()
            .map(|(i, c)| {
                c.iter()
                    .enumerate()
                    .map(|(k, z)| (f.coeffs[k * len + i] * z.conj()).re)
                    .sum::<f64>()
            })
            .sum::<f64>()
    }
}

#[derive(Clone, Debug)]
pub struct TestFunction {
    pub field: SpectralField,
    /// sup|φ| + Σ_j sup|∂_j φ| on a fine sample.
    pub c1: f64,
    sparse: Sparse,
    lap: Sparse,
    grad: Sparse,
}

/// Divergence-free vector tests (curls of random low-mode potentials) and scalar tests.
#[derive(Clone, Debug)]
pub struct TestBank {
    pub grid: Grid3,
    pub vectors: Vec<TestFunction>,
    pub scalars: Vec<TestFunction>,
}

fn random_low_mode(
    grid: Grid3,
    rank: Rank,
    max_mode: i64,
    rng: &mut ChaCha8Rng,
) -> Result<SpectralField> {
    let mut f = SpectralField::zeros(grid, rank);
    for n1 in -max_mode..=max_mode {
        for n2 in -max_mode..=max_mode {
            for n3 in -max_mode..=max_mode {
                let n = [n1, n2, n3];
                // fill one of each ± pair, then mirror
                if n <= [-n1, -n2, -n3] || n == [0, 0, 0] {
                    continue;
                }
                for c in 0..rank.ncomp() {
                    let z = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                    f.set_coeff(c, n, z)?;
                    f.set_coeff(c, [-n1, -n2, -n3], z.conj())?;
                }
            }
        }
    }
    Ok(f)
}

fn c1_norm(f: &SpectralField) -> f64 {
    let fine = Grid3::new(48).expect("grid");
    let mut s = c0(&f.resample(fine).to_physical());
    for ax in 0..3 {
        let mut a = [0u32; 3];
        a[ax] = 1;
        s += c0(&derivative(f, a).resample(fine).to_physical());
    }
    s
}

impl TestFunction {
    fn new(field: SpectralField) -> Self {
        let lap = Sparse::of(&laplacian(&field));
        let g = Sparse::of(&if field.rank == Rank::Vector {
            grad_tensor(&field)
        } else {
            grad(&field)
        });
        TestFunction {
            c1: c1_norm(&field),
            sparse: Sparse::of(&field),
            lap,
            grad: g,
            field,
        }
    }
}

/// (∇φ)_{ij} = ∂_j φ_i.
fn grad_tensor(f: &SpectralField) -> SpectralField {
    f.apply_symbol(Rank::Tensor, |n, a, o| {
        for i in 0..3 {
            for j in 0..3 {
                o[tc(i, j)] = Complex64::new(0.0, n[j]) * a[i];
            }
        }
    })
}

impl TestBank {
    /// `nv` solenoidal fields and `ns` scalars with modes up to |n|∞ ≤ 2, from a fixed seed.
    pub fn new(grid: Grid3, nv: usize, ns: usize, seed: u64) -> Result<Self> {
        if grid.cutoff() < 2 {
            return domain("test bank needs a grid resolving modes up to 2");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vectors = Vec::with_capacity(nv);
        for _ in 0..nv {
            let pot = random_low_mode(grid, Rank::Vector, 1, &mut rng)?;
            vectors.push(TestFunction::new(crate::spectral::ops::curl(&pot)));
        }
        let mut scalars = Vec::with_capacity(ns);
        for _ in 0..ns {
            scalars.push(TestFunction::new(random_low_mode(
                grid,
                Rank::Scalar,
                2,
                &mut rng,
            )?));
        }
        let bank = TestBank {
            grid,
            vectors,
            scalars,
        };
        bank.check()?;
        Ok(bank)
    }

    /// The default bank: 24 solenoidal fields and 8 scalars.
    pub fn standard(grid: Grid3) -> Result<Self> {
        TestBank::new(grid, 24, 8, 20_240_917)
    }

    /// Rejects vector tests that are not divergence free.
    pub fn check(&self) -> Result<()> {
        for (i, t) in self.vectors.iter().enumerate() {
            let d = crate::spectral::norms::l2(&div(&t.field));
            if d > 1e-12 * crate::spectral::norms::l2(&t.field).max(1.0) {
                return domain(format!(
                    "test field {i} is not divergence free (‖div‖ = {d:.3e})"
                ));
            }
        }
        Ok(())
    }

    pub fn from_fields(
        grid: Grid3,
        vectors: Vec<SpectralField>,
        scalars: Vec<SpectralField>,
    ) -> Result<Self> {
        let bank = TestBank {
            grid,
            vectors: vectors.into_iter().map(TestFunction::new).collect(),
            scalars: scalars.into_iter().map(TestFunction::new).collect(),
        };
        bank.check()?;
        Ok(bank)
    }
}

/// Per-index inner products of one level with the bank.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct Series {
    t: Vec<f64>,
    /// ⟨v, φ⟩ per test.
    pairing: Vec<Vec<f64>>,
    /// ½⟨v,φ⟩ − ⟨v,Δφ⟩ − Θ⟨P_N(v⊗v), ∇φ⟩ per test.
    rate: Vec<Vec<f64>>,
    /// ⟨R̊, ∇φ⟩ per test.
    stress: Vec<Vec<f64>>,
    /// |∫ v·∇ϕ| per scalar test, max over time.
    divergence: f64,
    /// max_t ‖R̊(t)‖_{L¹}.
    stress_l1: f64,
}

/// Observer accumulating the weak-form integrands for every level ≥ 1.
pub struct WeakForm {
    pub bank: TestBank,
    levels: BTreeMap<usize, Series>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakTestRow {
    pub test: usize,
    /// max over t of |⟨v(t)−v(t₀),φ⟩ + ∫(½⟨v,φ⟩ − ⟨v,Δφ⟩ − Θ⟨v⊗v,∇φ⟩)|.
    pub residual: f64,
    /// Same expression with the stress term −∫⟨R̊,∇φ⟩ added: what the scheme makes vanish.
    pub with_stress: f64,
    /// √3‖φ‖_{C¹}‖R̊‖_{C_tL¹}·(t − t₀), the stress-driven bound at the worst time.
    pub bound: f64,
    /// Time-quadrature error estimate (trapezoid against its half-resolution version).
    pub floor: f64,
    pub c1: f64,
    pub t: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakReport {
    pub level: usize,
    pub t0: f64,
    pub t1: f64,
    pub samples: usize,
    pub stress_l1: f64,
    pub rows: Vec<WeakTestRow>,
    pub max_residual: f64,
    /// max over tests of residual/(1.1·bound + floor).
    pub worst_ratio: f64,
    pub divergence: f64,
}

impl WeakForm {
    pub fn new(bank: TestBank) -> Self {
        WeakForm {
            bank,
            levels: BTreeMap::new(),
        }
    }

    /// The accumulated integrands, for storing beside field checkpoints.
    pub fn export(&self) -> serde_json::Value {
        serde_json::json!({ "tests": self.bank.vectors.len(), "levels": self.levels })
    }

    /// Restores integrands written by [`WeakForm::export`] for the same bank.
    pub fn import(bank: TestBank, v: &serde_json::Value) -> Result<Self> {
        if v.get("tests").and_then(|t| t.as_u64()) != Some(bank.vectors.len() as u64) {
            return domain("stored weak-form series was made with a different test bank");
        }
        let levels: BTreeMap<usize, Series> = serde_json::from_value(v["levels"].clone())?;
        Ok(WeakForm { bank, levels })
    }

    pub fn levels(&self) -> Vec<usize> {
        self.levels.keys().copied().collect()
    }

    /// Weak residual of level q over its samples with t ≥ `from` (or all samples when none qualify).
    pub fn report(&self, q: usize, from: f64) -> Result<WeakReport> {
        let s = self
            .levels
            .get(&q)
            .ok_or_else(|| crate::Error::Domain(format!("no samples for level {q}")))?;
        let start = s.t.iter().position(|&t| t >= from - 1e-12).unwrap_or(0);
        let n = s.t.len() - start;
        if n < 3 {
            return domain(format!(
                "level {q} has {n} samples after t = {from}, need 3"
            ));
        }
        let mut rows = Vec::new();
        for (k, tf) in self.bank.vectors.iter().enumerate() {
            let p = &s.pairing[k][start..];
            let g = &s.rate[k][start..];
            let st = &s.stress[k][start..];
            let ts = &s.t[start..];
            let mut best = WeakTestRow {
                test: k,
                residual: 0.0,
                with_stress: 0.0,
                bound: 0.0,
                floor: 0.0,
                c1: tf.c1,
                t: ts[0],
            };
            let mut ig = 0.0;
            let mut is = 0.0;
            let mut worst = f64::NEG_INFINITY;
            for j in 1..n {
                let h = ts[j] - ts[j - 1];
                ig += 0.5 * h * (g[j] + g[j - 1]);
                is += 0.5 * h * (st[j] + st[j - 1]);
                let res = (p[j] - p[0] + ig).abs();
                let bound = 3f64.sqrt() * tf.c1 * s.stress_l1 * (ts[j] - ts[0]);
                // coarse trapezoid on every other sample from the same start, for the error estimate
                let floor = if j % 2 == 0 {
                    let mut c = 0.0;
                    for m in (2..=j).step_by(2) {
                        let hh = ts[m] - ts[m - 2];
                        c += 0.5 * hh * (g[m] + g[m - 2]);
                    }
                    (c - ig).abs() / 3.0
                } else {
                    best.floor
                };
                let ratio = res / (1.1 * bound + floor + f64::MIN_POSITIVE);
                if ratio > worst {
                    worst = ratio;
                    best = WeakTestRow {
                        test: k,
                        residual: res,
                        with_stress: (p[j] - p[0] + ig - is).abs(),
                        bound,
                        floor,
                        c1: tf.c1,
                        t: ts[j],
                    };
                }
            }
            rows.push(best);
        }
        let max_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
        let worst_ratio = rows
            .iter()
            .map(|r| r.residual / (1.1 * r.bound + r.floor + f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        Ok(WeakReport {
            level: q,
            t0: s.t[start],
            t1: *s.t.last().unwrap(),
            samples: n,
            stress_l1: s.stress_l1,
            rows,
            max_residual,
            worst_ratio,
            divergence: s.divergence,
        })
    }
}

fn l1(p: &PhysicalField) -> f64 {
    let m = p.magnitude();
    p.grid.cell_volume() * crate::spectral::norms::det_sum(&m)
}

impl Observer for WeakForm {
    fn observe(
        &mut self,
        rec: &Arc<LevelRecord>,
        _: Option<&StepDiag>,
        drv: &Drivers,
    ) -> Result<()> {
        if rec.zero {
            return Ok(());
        }
        let nv = self.bank.vectors.len();
        let s = self.levels.entry(rec.q).or_insert_with(|| Series {
            pairing: vec![Vec::new(); nv],
            rate: vec![Vec::new(); nv],
            stress: vec![Vec::new(); nv],
            ..Default::default()
        });
        let v = rec.v.transform();
        let vv = rec.vv.transform();
        let r = rec.r.transform();
        let theta = drv.theta(rec.index);
        s.t.push(rec.t);
        for (k, tf) in self.bank.vectors.iter().enumerate() {
            let p = tf.sparse.inner(&v);
            s.pairing[k].push(p);
            s.rate[k].push(0.5 * p - tf.lap.inner(&v) - theta * tf.grad.inner(&vv));
            s.stress[k].push(tf.grad.inner(&r));
        }
        for tf in &self.bank.scalars {
            s.divergence = s.divergence.max(tf.grad.inner(&v).abs());
        }
        s.stress_l1 = s.stress_l1.max(l1(&rec.r));
        Ok(())
    }
}
