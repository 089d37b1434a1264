//! Adaptive Gauss–Kronrod (7/15) quadrature for complex integrands.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

use crate::linalg::{C64, ZERO};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: C64,
    pub error: f64,
    pub evaluations: usize,
}

fn gk15<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    let kron = kron * h;
    let gauss = gauss * h;
    (kron, (kron - gauss).norm())
}

struct Interval {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `[a, b]` split at `breaks`, bisecting the interval
/// with the largest error estimate until the total estimate falls below
/// `max(abs_tol, rel_tol·|I|)` or the interval budget is spent.
pub fn integrate_with_breaks<F: Fn(f64) -> C64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> QuadResult {
    let mut points = vec![a];
    points.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    points.push(b);
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut heap = BinaryHeap::new();
    let mut total = ZERO;
    let mut err = 0.0;
    let mut evals = 0;
    for w in points.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (v, e) = gk15(&f, w[0], w[1]);
        evals += 15;
        total += v;
        err += e;
        heap.push(Interval { a: w[0], b: w[1], value: v, error: e });
    }
    let max_intervals = 20_000;
    while err > abs_tol.max(rel_tol * total.norm()) && heap.len() < max_intervals {
        let Some(iv) = heap.pop() else { break };
        let m = 0.5 * (iv.a + iv.b);
        if m <= iv.a || m >= iv.b {
            heap.push(iv);
            break;
        }
        let (v1, e1) = gk15(&f, iv.a, m);
        let (v2, e2) = gk15(&f, m, iv.b);
        evals += 30;
        total += v1 + v2 - iv.value;
        err += e1 + e2 - iv.error;
        heap.push(Interval { a: iv.a, b: m, value: v1, error: e1 });
        heap.push(Interval { a: m, b: iv.b, value: v2, error: e2 });
    }
    // Re-sum to remove drift from the incremental updates.
    let mut value = ZERO;
    let mut error = 0.0;
    for iv in heap.iter() {
        value += iv.value;
        error += iv.error;
    }
    QuadResult { value, error, evaluations: evals }
}

pub fn integrate<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> QuadResult {
    integrate_with_breaks(f, a, b, &[], abs_tol, rel_tol)
}

pub fn integrate_real<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> (f64, f64) {
    let r = integrate(|x| C64::new(f(x), 0.0), a, b, abs_tol, rel_tol);
    (r.value.re, r.error)
}

pub fn integrate_real_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> (f64, f64) {
    let r = integrate_with_breaks(|x| C64::new(f(x), 0.0), a, b, breaks, abs_tol, rel_tol);
    (r.value.re, r.error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let (v, _) = integrate_real(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, 1e-14, 0.0);
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((v - exact).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_complex_integrand() {
        let k = 40.0;
        let r = integrate(|x| C64::new(0.0, k * x).exp(), 0.0, 1.0, 1e-13, 1e-13);
        let exact = (C64::new(0.0, k).exp() - 1.0) / C64::new(0.0, k);
        assert!((r.value - exact).norm() < 1e-12);
    }

    #[test]
    fn breakpoints_handle_kinks() {
        let (v, _) = integrate_real_with_breaks(|x| x.abs(), -1.0, 3.0, &[0.0], 1e-14, 0.0);
        assert!((v - 5.0).abs() < 1e-13);
    }
}
