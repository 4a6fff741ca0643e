//! Gauss–Legendre quadrature with cached node tables.
//!
//! The spectrum integrator builds every momentum, angle, and time integral
//! out of fixed-order Gauss–Legendre panels, so node/weight tables for the
//! handful of orders in play are computed once and shared.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights on the reference interval [-1, 1], exact for
/// polynomials of degree 2·order − 1. Tables are cached per order.
pub fn gauss_legendre(order: usize) -> Arc<Vec<(f64, f64)>> {
    assert!(order >= 1, "quadrature order must be at least 1");
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard.entry(order).or_insert_with(|| Arc::new(compute_nodes(order))).clone()
}

/// Legendre P_n(x) and its derivative by the three-term recurrence.
fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 1..order {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = p_next;
    }
    let dp = order as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

fn compute_nodes(order: usize) -> Vec<(f64, f64)> {
    if order == 1 {
        return vec![(0.0, 2.0)];
    }
    let mut table = vec![(0.0, 0.0); order];
    // Newton from the Chebyshev-like initial guess; roots come out in
    // descending order, mirrored onto the negative half for exact symmetry.
    for i in 0..order.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-15 * x.abs().max(1e-3) {
                let (p2, d2) = legendre_with_derivative(order, x);
                dp = d2;
                x -= p2 / d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        table[i] = (-x, w);
        table[order - 1 - i] = (x, w);
    }
    if order % 2 == 1 {
        let mid = order / 2;
        let (_, d) = legendre_with_derivative(order, 0.0);
        table[mid] = (0.0, 2.0 / (d * d));
    }
    table
}

/// Nodes and weights mapped onto [a, b].
pub fn panel_nodes(a: f64, b: f64, order: usize) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    gauss_legendre(order)
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Integral of `f` over [a, b] split into `panels` equal panels of the given
/// order.
pub fn integrate_panels(a: f64, b: f64, panels: usize, order: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    assert!(panels >= 1);
    let step = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let lo = a + step * i as f64;
        for (x, w) in panel_nodes(lo, lo + step, order) {
            total += w * f(x);
        }
    }
    total
}
