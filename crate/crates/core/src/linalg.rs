//! Dense 2×2 complex matrices: products, inverses, exact exponentials and
//! exact operator norms.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// 2×2 complex matrix stored row-major.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);
    pub const ZERO: Mat2 = Mat2([[ZERO, ZERO], [ZERO, ZERO]]);

    pub fn new(m11: C64, m12: C64, m21: C64, m22: C64) -> Self {
        Mat2([[m11, m12], [m21, m22]])
    }

    pub fn diag(d1: C64, d2: C64) -> Self {
        Mat2([[d1, ZERO], [ZERO, d2]])
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[row][col]
    }

    #[inline]
    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    #[inline]
    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn scale(&self, s: C64) -> Mat2 {
        let m = &self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    /// Multiplies the first row by `s`, i.e. `diag(s, 1) · self`.
    pub fn scale_row0(&self, s: C64) -> Mat2 {
        let m = &self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0], m[1][1]]])
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d.norm() == 0.0 || !d.is_finite() {
            return None;
        }
        let m = &self.0;
        let inv = d.inv();
        Some(Mat2([
            [m[1][1] * inv, -m[0][1] * inv],
            [-m[1][0] * inv, m[0][0] * inv],
        ]))
    }

    /// Adjugate; equals the inverse for unimodular matrices.
    pub fn adjugate(&self) -> Mat2 {
        let m = &self.0;
        Mat2([[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]])
    }

    pub fn commutator(&self, other: &Mat2) -> Mat2 {
        *self * *other - *other * *self
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Operator norm on ℂ² (largest singular value), closed form.
    pub fn op_norm(&self) -> f64 {
        let f = self.frobenius_sq();
        let d = self.det().norm();
        let disc = (f * f - 4.0 * d * d).max(0.0).sqrt();
        ((f + disc) / 2.0).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.is_finite())
    }

    /// Exact exponential. Writes `M = τI + N` with `N` traceless, so
    /// `N² = s²I` and `exp(M) = e^τ (cosh s · I + sinh(s)/s · N)`.
    pub fn exp(&self) -> Mat2 {
        let tau = self.trace() * 0.5;
        let n = Mat2([
            [self.0[0][0] - tau, self.0[0][1]],
            [self.0[1][0], self.0[1][1] - tau],
        ]);
        let s2 = n.0[0][0] * n.0[0][0] + n.0[0][1] * n.0[1][0];
        let mut s = s2.sqrt();
        if s.re < 0.0 {
            s = -s;
        }
        let (c, sh) = if s.norm() < 0.5 {
            // cosh s and sinh(s)/s by their Taylor series in s².
            let mut c = ONE;
            let mut sh = ONE;
            let mut term_c = ONE;
            let mut term_s = ONE;
            for j in 1..=8 {
                let jf = j as f64;
                term_c = term_c * s2 / ((2.0 * jf - 1.0) * (2.0 * jf));
                term_s = term_s * s2 / ((2.0 * jf) * (2.0 * jf + 1.0));
                c += term_c;
                sh += term_s;
            }
            let e = tau.exp();
            (c * e, sh * e)
        } else {
            let ep = (tau + s).exp();
            let em = (tau - s).exp();
            ((ep + em) * 0.5, (ep - em) / (s * 2.0))
        };
        Mat2([
            [c + sh * n.0[0][0], sh * n.0[0][1]],
            [sh * n.0[1][0], c + sh * n.0[1][1]],
        ])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    #[inline]
    fn mul(self, r: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &r.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    #[inline]
    fn add(self, r: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &r.0;
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    #[inline]
    fn sub(self, r: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &r.0;
        Mat2([
            [a[0][0] - b[0][0], a[0][1] - b[0][1]],
            [a[1][0] - b[1][0], a[1][1] - b[1][1]],
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taylor_exp(m: &Mat2) -> Mat2 {
        let mut sum = Mat2::IDENTITY;
        let mut term = Mat2::IDENTITY;
        for j in 1..60 {
            term = (term * *m).scale(C64::new(1.0 / j as f64, 0.0));
            sum = sum + term;
        }
        sum
    }

    #[test]
    fn exp_matches_taylor_series() {
        let cases = [
            Mat2::new(C64::new(0.3, 1.0), C64::new(-0.7, 0.2), C64::new(0.1, -0.4), C64::new(0.0, 0.5)),
            Mat2::new(ZERO, -ONE, -ONE, ZERO),
            Mat2::new(C64::new(0.0, 2.0), ZERO, ZERO, ZERO),
            Mat2::new(C64::new(1e-9, 0.0), C64::new(1e-9, 0.0), ZERO, ZERO),
        ];
        for m in cases {
            let e = m.exp();
            let t = taylor_exp(&m);
            assert!((e - t).max_abs() < 1e-13, "{m:?}");
        }
    }

    #[test]
    fn exp_of_constant_krein_generator_at_zero_frequency() {
        // [[0,-1],[-1,0]] squares to I: exp(xM) = cosh x I + sinh x M.
        let x = 2.0;
        let m = Mat2::new(ZERO, -ONE, -ONE, ZERO).scale(C64::new(x, 0.0));
        let e = m.exp();
        assert!((e.get(1, 1).re - x.cosh()).abs() < 1e-13);
        assert!((e.get(1, 0).re + x.sinh()).abs() < 1e-13);
    }

    #[test]
    fn exp_does_not_overflow_for_strongly_damped_generators() {
        let m = Mat2::new(C64::new(-900.0, 3.0), C64::new(0.5, 0.0), C64::new(0.5, 0.0), ZERO);
        let e = m.exp();
        assert!(e.is_finite());
        assert!((e.get(1, 1) - ONE).norm() < 1e-3);
    }

    #[test]
    fn op_norm_of_diagonal_and_rank_one() {
        let d = Mat2::diag(C64::new(3.0, 0.0), C64::new(0.0, -4.0));
        assert!((d.op_norm() - 4.0).abs() < 1e-14);
        let r = Mat2::new(ONE, ONE, ONE, ONE);
        assert!((r.op_norm() - 2.0).abs() < 1e-14);
    }
}
