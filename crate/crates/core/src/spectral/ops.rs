//! Fourier-multiplier calculus: derivatives, projections, Leray, inverse divergence.
use super::field::{tc, PhysicalField, Rank, SpectralField};
use super::grid::Grid3;
use crate::error::{Error, Result};
use num::complex::Complex64;
use rayon::prelude::*;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn norm2(n: [f64; 3]) -> f64 {
    n[0] * n[0] + n[1] * n[1] + n[2] * n[2]
}

/// Derivative D^α applied componentwise. Orders above 6 are allowed; see [`aliasing_risk`].
pub fn derivative(f: &SpectralField, alpha: [u32; 3]) -> SpectralField {
    f.apply_symbol(f.rank, |n, a, o| {
        let mut s = Complex64::new(1.0, 0.0);
        for ax in 0..3 {
            for _ in 0..alpha[ax] {
                s *= I * n[ax];
            }
        }
        for (x, y) in o.iter_mut().zip(a) {
            *x = s * y;
        }
    })
}

pub fn aliasing_risk(alpha: [u32; 3]) -> bool {
    alpha.iter().sum::<u32>() > 6
}

pub fn grad(f: &SpectralField) -> SpectralField {
    assert_eq!(f.rank, Rank::Scalar);
    f.apply_symbol(Rank::Vector, |n, a, o| {
        for j in 0..3 {
            o[j] = I * n[j] * a[0];
        }
    })
}

/// Divergence of a vector field, or row-wise divergence (∂_j T_ij) of a tensor field.
pub fn div(f: &SpectralField) -> SpectralField {
    match f.rank {
        Rank::Vector => f.apply_symbol(Rank::Scalar, |n, a, o| {
            o[0] = I * (n[0] * a[0] + n[1] * a[1] + n[2] * a[2]);
        }),
        Rank::Tensor => f.apply_symbol(Rank::Vector, |n, a, o| {
            for i in 0..3 {
                o[i] = I * (n[0] * a[tc(i, 0)] + n[1] * a[tc(i, 1)] + n[2] * a[tc(i, 2)]);
            }
        }),
        Rank::Scalar => panic!("divergence of a scalar field"),
    }
}

pub fn curl(f: &SpectralField) -> SpectralField {
    assert_eq!(f.rank, Rank::Vector);
    f.apply_symbol(Rank::Vector, |n, a, o| {
        o[0] = I * (n[1] * a[2] - n[2] * a[1]);
        o[1] = I * (n[2] * a[0] - n[0] * a[2]);
        o[2] = I * (n[0] * a[1] - n[1] * a[0]);
    })
}

pub fn laplacian(f: &SpectralField) -> SpectralField {
    f.apply_symbol(f.rank, |n, a, o| {
        let s = -norm2(n);
        for (x, y) in o.iter_mut().zip(a) {
            *x = y * s;
        }
    })
}

/// Δ⁻¹ on nonzero modes; the mean is sent to zero.
pub fn inv_laplacian(f: &SpectralField) -> SpectralField {
    f.apply_symbol(f.rank, |n, a, o| {
        let k2 = norm2(n);
        if k2 > 0.0 {
            for (x, y) in o.iter_mut().zip(a) {
                *x = -y / k2;
            }
        }
    })
}

pub fn project_nonzero(f: &SpectralField) -> SpectralField {
    f.apply_symbol(f.rank, |n, a, o| {
        if norm2(n) > 0.0 {
            o.copy_from_slice(a);
        }
    })
}

/// Smooth cutoff: 1 on |x| ≤ 1/2, 0 on |x| ≥ 1.
pub fn chi(x: f64) -> f64 {
    let x = x.abs();
    if x <= 0.5 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        1.0 / ((1.0 / (0.5 - x) + 1.0 / (1.0 - x)).exp() + 1.0)
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa >= 1.0) {
        return Err(Error::Domain(format!(
            "frequency threshold must be >= 1, got {kappa}"
        )));
    }
    Ok(())
}

/// P_{≤κ}: multiply û_n by χ(|n|/κ).
pub fn project_le(f: &SpectralField, kappa: f64) -> Result<SpectralField> {
    check_kappa(kappa)?;
    Ok(f.apply_symbol(f.rank, |n, a, o| {
        let w = chi(norm2(n).sqrt() / kappa);
        for (x, y) in o.iter_mut().zip(a) {
            *x = y * w;
        }
    }))
}

/// P_{≥κ} = Id − P_{≤κ}.
pub fn project_ge(f: &SpectralField, kappa: f64) -> Result<SpectralField> {
    check_kappa(kappa)?;
    Ok(f.apply_symbol(f.rank, |n, a, o| {
        let w = 1.0 - chi(norm2(n).sqrt() / kappa);
        for (x, y) in o.iter_mut().zip(a) {
            *x = y * w;
        }
    }))
}

/// Leray projection Id − ∇Δ⁻¹div. The mean mode passes through unchanged.
pub fn leray(f: &SpectralField) -> SpectralField {
    assert_eq!(f.rank, Rank::Vector);
    f.apply_symbol(Rank::Vector, |n, a, o| {
        let k2 = norm2(n);
        if k2 == 0.0 {
            o.copy_from_slice(a);
            return;
        }
        let nd = (n[0] * a[0] + n[1] * a[1] + n[2] * a[2]) / k2;
        for j in 0..3 {
            o[j] = a[j] - nd * n[j];
        }
    })
}

/// Mode-wise inverse divergence symbol applied to f̂ at wavevector n ≠ 0.
#[inline]
pub fn r_symbol(n: [f64; 3], f: &[Complex64], o: &mut [Complex64]) {
    let k2 = norm2(n);
    if k2 == 0.0 {
        o.iter_mut().for_each(|z| *z = Complex64::default());
        return;
    }
    let u = [-f[0] / k2, -f[1] / k2, -f[2] / k2];
    let divu = I * (n[0] * u[0] + n[1] * u[1] + n[2] * u[2]);
    for i in 0..3 {
        for j in 0..3 {
            let d = if i == j { 1.0 } else { 0.0 };
            o[tc(i, j)] = I * (n[i] * u[j] + n[j] * u[i]) - 0.5 * (n[i] * n[j] / k2 + d) * divu;
        }
    }
}

fn mean_size(f: &SpectralField) -> f64 {
    (0..f.ncomp())
        .map(|c| f.mean(c).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Inverse divergence ℛ: zero-mean vector field to symmetric traceless tensor with div ℛf = f.
pub fn inv_divergence(f: &SpectralField) -> Result<SpectralField> {
    assert_eq!(f.rank, Rank::Vector);
    let m = mean_size(f);
    if m > 1e-12 {
        return Err(Error::Precondition(format!(
            "inverse divergence needs a zero-mean field, mean is {m:.3e}"
        )));
    }
    Ok(f.apply_symbol(Rank::Tensor, r_symbol))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RComposition {
    Curl,
    Delta,
    Ge(f64),
}

/// ℛcurl, ℛΔ and ℛP_{≥κ} as single multipliers.
pub fn r_composition(f: &SpectralField, which: RComposition) -> Result<SpectralField> {
    assert_eq!(f.rank, Rank::Vector);
    match which {
        RComposition::Curl => Ok(f.apply_symbol(Rank::Tensor, |n, a, o| {
            let c = [
                I * (n[1] * a[2] - n[2] * a[1]),
                I * (n[2] * a[0] - n[0] * a[2]),
                I * (n[0] * a[1] - n[1] * a[0]),
            ];
            r_symbol(n, &c, o)
        })),
        RComposition::Delta => Ok(f.apply_symbol(Rank::Tensor, |n, a, o| {
            let k2 = norm2(n);
            let c = [-a[0] * k2, -a[1] * k2, -a[2] * k2];
            r_symbol(n, &c, o)
        })),
        RComposition::Ge(kappa) => {
            check_kappa(kappa)?;
            Ok(f.apply_symbol(Rank::Tensor, move |n, a, o| {
                let w = 1.0 - chi(norm2(n).sqrt() / kappa);
                let c = [a[0] * w, a[1] * w, a[2] * w];
                r_symbol(n, &c, o)
            }))
        }
    }
}

/// Symmetric traceless part of a tensor field.
pub fn sym_traceless(t: &SpectralField) -> SpectralField {
    assert_eq!(t.rank, Rank::Tensor);
    t.apply_symbol(Rank::Tensor, |_, a, o| {
        let tr = (a[0] + a[4] + a[8]) / 3.0;
        for i in 0..3 {
            for j in 0..3 {
                o[tc(i, j)] = 0.5 * (a[tc(i, j)] + a[tc(j, i)])
                    - if i == j { tr } else { Complex64::default() };
            }
        }
    })
}

pub fn trace(t: &SpectralField) -> SpectralField {
    assert_eq!(t.rank, Rank::Tensor);
    t.apply_symbol(Rank::Scalar, |_, a, o| o[0] = a[0] + a[4] + a[8])
}

/// Pseudo-spectral product: pad every input to `factor`× the grid, evaluate `f` pointwise,
/// transform back and truncate. With factor 2 quadratic products of band-limited fields are exact.
pub fn dealiased<F>(inputs: &[&SpectralField], out_rank: Rank, factor: usize, f: F) -> SpectralField
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let base = inputs[0].grid;
    let fine = Grid3::new(base.n() * factor).expect("oversampled grid");
    let phys: Vec<PhysicalField> = inputs
        .iter()
        .map(|s| s.resample(fine).to_physical())
        .collect();
    let out = pointwise(&phys, out_rank, f);
    out.transform().resample(base)
}

/// Evaluate `f` at every grid point on the concatenated components of the inputs.
pub fn pointwise<F>(inputs: &[PhysicalField], out_rank: Rank, f: F) -> PhysicalField
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let g = inputs[0].grid;
    let len = g.len();
    let nin: usize = inputs.iter().map(|p| p.ncomp()).sum();
    let no = out_rank.ncomp();
    let mut inter = vec![0.0; len * no];
    inter.par_chunks_mut(no).enumerate().for_each(|(i, out)| {
        let mut vals = [0.0f64; 64];
        let mut k = 0;
        for p in inputs {
            for c in 0..p.ncomp() {
                vals[k] = p.data[c * len + i];
                k += 1;
            }
        }
        f(&vals[..nin], out);
    });
    PhysicalField::from_interleaved(g, out_rank, &inter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::field::PhysicalField;

    fn g8() -> Grid3 {
        Grid3::new(8).unwrap()
    }

    #[test]
    fn derivative_of_sine() {
        let f = PhysicalField::from_fn(g8(), Rank::Scalar, |x, o| o[0] = x[0].sin()).transform();
        let d = derivative(&f, [1, 0, 0]).to_physical();
        for i in 0..d.grid.len() {
            assert!((d.data[i] - d.grid.point(i)[0].cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn chi_boundary_values() {
        assert_eq!(chi(0.5), 1.0);
        assert_eq!(chi(1.0), 0.0);
        assert!(chi(0.75) > 0.0 && chi(0.75) < 1.0);
        let mut prev = 1.0;
        for k in 0..=100 {
            let v = chi(0.5 + 0.005 * k as f64);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn kappa_below_one_rejected() {
        let f = SpectralField::zeros(g8(), Rank::Scalar);
        assert!(project_le(&f, 0.5).is_err());
        assert!(project_ge(&f, 0.99).is_err());
    }

    #[test]
    fn r_single_mode_closed_form() {
        // f = e^{i x1} v: Û = -v, div U = -i v1, so R_11 = -2i v1 - (1/2)(1+1)(-i v1) = -i v1
        let v = [
            Complex64::new(0.3, 0.0),
            Complex64::new(-1.2, 0.5),
            Complex64::new(0.0, 2.0),
        ];
        let mut o = [Complex64::default(); 9];
        r_symbol([1.0, 0.0, 0.0], &v, &mut o);
        assert!((o[tc(0, 0)] - (-I * v[0])).norm() < 1e-15);
        // R_12 = i(n1 U2) = -i v2 ; R_22 = -(1/2)(-i v1) = i v1 / 2
        assert!((o[tc(0, 1)] - (-I * v[1])).norm() < 1e-15);
        assert!((o[tc(1, 1)] - (I * v[0] * 0.5)).norm() < 1e-15);
        for i in 0..3 {
            for j in 0..3 {
                assert!((o[tc(i, j)] - o[tc(j, i)]).norm() < 1e-15);
            }
        }
        assert!((o[0] + o[4] + o[8]).norm() < 1e-15);
        // divergence row 0: i n_j R_0j = i R_00 = v0
        assert!((I * o[tc(0, 0)] - v[0]).norm() < 1e-15);
    }
}
