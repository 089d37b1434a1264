//! Gap phases `e^{iξR}` for very large products `ξR`.
//!
//! The product is formed exactly as a double-double with an FMA and reduced
//! modulo 2π against a two-word representation of 2π, so the reduced angle
//! is accurate to a few ulps of π whatever the size of `ξR`.

use crate::linalg::C64;

const TWO_PI_HI: f64 = std::f64::consts::TAU;
const TWO_PI_LO: f64 = 2.449_293_598_294_706_4e-16;

/// `ξ·R mod 2π`, in `(-π, π]`.
pub fn reduced_product(xi: f64, r: f64) -> f64 {
    let p = xi * r;
    let e = xi.mul_add(r, -p);
    if !p.is_finite() {
        return f64::NAN;
    }
    if p.abs() < TWO_PI_HI {
        return wrap(p + e);
    }
    let n = (p / TWO_PI_HI).round();
    let mut t = (-n).mul_add(TWO_PI_HI, p);
    t = (-n).mul_add(TWO_PI_LO, t);
    t += e;
    wrap(t)
}

fn wrap(mut t: f64) -> f64 {
    let half = TWO_PI_HI / 2.0;
    while t > half {
        t -= TWO_PI_HI;
        t -= TWO_PI_LO;
    }
    while t <= -half {
        t += TWO_PI_HI;
        t += TWO_PI_LO;
    }
    t
}

/// `e^{iξR}`.
pub fn cis_product(xi: f64, r: f64) -> C64 {
    C64::from_polar(1.0, reduced_product(xi, r))
}

/// A conservative bound on the absolute error of [`reduced_product`].
pub fn phase_error_bound(xi: f64, r: f64) -> f64 {
    let n = (xi * r / TWO_PI_HI).abs().round();
    8.0 * f64::EPSILON * std::f64::consts::PI + n * 1e-31
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_products_match_direct_evaluation() {
        for &(xi, r) in &[(0.5, 3.0), (-1.25, 2.0), (0.0, 1e9), (2.0, 1.0)] {
            let direct = C64::from_polar(1.0, xi * r);
            assert!((cis_product(xi, r) - direct).norm() < 1e-14);
        }
    }

    #[test]
    fn large_products_match_high_precision_reduction() {
        // Reference values from 60-digit arithmetic on the exact double inputs.
        let cases = [
            (0.5, 1_099_511_627_776.0, -1.361_921_305_460_894),
            (0.75, 1e15, -3.130_115_392_582_105_5),
            (1.0 / 3.0, 1_125_899_906_842_624.0, 0.152_314_267_941_772_5),
            (0.123_456_789, 987_654_321_987.0, 1.067_242_043_272_063_5),
        ];
        for (xi, r, expected) in cases {
            let t = reduced_product(xi, r);
            assert!((t - expected).abs() < 1e-14, "{xi} {r}: {t} vs {expected}");
        }
    }
}
