//! Separable 3-D complex FFT built from rustfft line transforms.
use num::complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

type Plan = Arc<dyn Fft<f64>>;

fn plan(n: usize, inverse: bool) -> Plan {
    static PLANS: OnceLock<Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Plan>)>> =
        OnceLock::new();
    let lock = PLANS.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut g = lock.lock().unwrap();
    if let Some(p) = g.1.get(&(n, inverse)) {
        return p.clone();
    }
    let p = if inverse {
        g.0.plan_fft_inverse(n)
    } else {
        g.0.plan_fft_forward(n)
    };
    g.1.insert((n, inverse), p.clone());
    p
}

fn lines_contiguous(data: &mut [Complex64], n: usize, p: &Plan) {
    let slen = p.get_inplace_scratch_len();
    data.par_chunks_mut(n * 64).for_each_init(
        || vec![Complex64::default(); slen],
        |scratch, block| {
            for line in block.chunks_mut(n) {
                p.process_with_scratch(line, scratch);
            }
        },
    );
}

/// Transform along a strided axis by gathering lines into a scratch buffer.
fn lines_strided(
    data: &mut [Complex64],
    n: usize,
    axis: usize,
    p: &Plan,
    buf: &mut Vec<Complex64>,
) {
    let n2 = n * n;
    buf.resize(data.len(), Complex64::default());
    let slen = p.get_inplace_scratch_len();
    // line j enumerates the two fixed indices; element i walks the axis
    let src = &*data;
    let at = move |j: usize, i: usize| -> usize {
        if axis == 0 {
            i * n2 + j
        } else {
            (j / n) * n2 + i * n + (j % n)
        }
    };
    buf.par_chunks_mut(n).enumerate().for_each_init(
        || vec![Complex64::default(); slen],
        |scratch, (j, line)| {
            for (i, v) in line.iter_mut().enumerate() {
                *v = src[at(j, i)];
            }
            p.process_with_scratch(line, scratch);
        },
    );
    let b = &*buf;
    data.par_chunks_mut(n).enumerate().for_each(|(row, out)| {
        // row = i1 * n + i2 covers indices (i1, i2, 0..n)
        let (i1, i2) = (row / n, row % n);
        for (i3, v) in out.iter_mut().enumerate() {
            let (j, i) = if axis == 0 {
                (i2 * n + i3, i1)
            } else {
                (i1 * n + i3, i2)
            };
            *v = b[j * n + i];
        }
    });
}

/// In-place unnormalized 3-D transform of one n³ block (row-major, last axis fastest).
pub fn fft3(data: &mut [Complex64], n: usize, inverse: bool) {
    assert_eq!(data.len(), n * n * n);
    let p = plan(n, inverse);
    let mut buf = Vec::new();
    lines_contiguous(data, n, &p);
    lines_strided(data, n, 1, &p, &mut buf);
    lines_strided(data, n, 0, &p, &mut buf);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_dft() {
        let n = 4;
        let data: Vec<Complex64> = (0..64)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut fast = data.clone();
        fft3(&mut fast, n, false);
        for k in 0..64 {
            let (k1, k2, k3) = (k / 16, (k / 4) % 4, k % 4);
            let mut s = Complex64::default();
            for j in 0..64 {
                let (j1, j2, j3) = (j / 16, (j / 4) % 4, j % 4);
                let ph = -2.0 * std::f64::consts::PI * ((k1 * j1 + k2 * j2 + k3 * j3) as f64) / 4.0;
                s += data[j] * Complex64::from_polar(1.0, ph);
            }
            assert!((s - fast[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn inverse_round_trip() {
        let n = 6;
        let data: Vec<Complex64> = (0..216)
            .map(|i| Complex64::new(i as f64, -(i as f64) * 0.5))
            .collect();
        let mut x = data.clone();
        fft3(&mut x, n, false);
        fft3(&mut x, n, true);
        for (a, b) in data.iter().zip(&x) {
            assert!((a - b / 216.0).norm() < 1e-10);
        }
    }
}
