//! Gauss–Legendre helpers.
use gauss_quad::GaussLegendre;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights on [-1, 1], cached by order.
pub fn rule(n: usize) -> Arc<Vec<(f64, f64)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let c = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = c.lock().unwrap().get(&n) {
        return r.clone();
    }
    let g = GaussLegendre::new(n.try_into().expect("order >= 1"));
    let r = Arc::new(g.iter().map(|(x, w)| (*x, *w)).collect::<Vec<_>>());
    c.lock().unwrap().insert(n, r.clone());
    r
}

/// Nodes and weights of a composite rule with `panels` equal panels on [a, b].
pub fn composite_nodes(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let r = rule(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for &(x, w) in r.iter() {
            out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
        }
    }
    out
}

pub fn integrate<F: Fn(f64) -> f64>(a: f64, b: f64, panels: usize, order: usize, f: F) -> f64 {
    composite_nodes(a, b, panels, order)
        .iter()
        .map(|&(x, w)| w * f(x))
        .sum()
}

/// Nodes covering a list of breakpoints, `order` nodes per panel.
pub fn piecewise_nodes(breaks: &[f64], order: usize) -> Vec<(f64, f64)> {
    breaks
        .windows(2)
        .flat_map(|w| composite_nodes(w[0], w[1], 1, order))
        .collect()
}

/// Bessel J₀ from its integral form (1/π)∫₀^π cos(z sin θ) dθ.
pub fn bessel_j0(z: f64) -> f64 {
    let panels = 2 + (z.abs() / 8.0) as usize;
    integrate(0.0, std::f64::consts::PI, panels, 32, |t| {
        (z * t.sin()).cos()
    }) / std::f64::consts::PI
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exactness() {
        let v = integrate(0.0, 2.0, 3, 8, |x| x.powi(7) - x);
        assert!((v - (256.0 / 8.0 - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn j0_reference_values() {
        // first zero and two tabulated values
        assert!(bessel_j0(2.404825557695773).abs() < 1e-14);
        assert!((bessel_j0(1.0) - 0.7651976865579666).abs() < 1e-14);
        assert!((bessel_j0(50.0) - 0.05581232766925181).abs() < 1e-13);
    }

    #[test]
    fn high_order_rule_is_accurate() {
        let v = integrate(0.0, std::f64::consts::PI, 1, 256, f64::sin);
        assert!((v - 2.0).abs() < 1e-13);
    }
}
