//! Dirac scattering on ℝ.
//!
//! `T' = [[-iξ/2, conj q], [q, iξ/2]] T`; the Jost solution `T₊` behaves like
//! `E(x) = diag(e^{-iξx/2}, e^{iξx/2})` at `+∞`, and `Y = E⁻¹T₊` tends to
//! `[[conj a, -conj b], [-b, a]]` at `-∞`.
//!
//! Frequencies are always the Dirac `ξ`. The Krein bridge evaluates Krein
//! systems at `k = ξ/2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{clip_segments, propagate, Profile, Settings, Windowed};
use crate::krein::{coefficients, integrate_krein, integrate_krein_stops};
use crate::linalg::{Mat2, C64, I, ONE, ZERO};
use crate::phase::cis_product;
use crate::potential::{PotentialSpec, Segment};

pub const DEFAULT_TOL: f64 = 1e-10;

/// `(a, b, r)` sampled on a frequency grid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScatteringCoeffs {
    pub grid: Vec<f64>,
    pub a: Vec<C64>,
    pub b: Vec<C64>,
    pub r: Vec<C64>,
}

impl ScatteringCoeffs {
    pub fn log_modulus(&self) -> Vec<f64> {
        self.a.iter().map(|a| a.norm().ln()).collect()
    }

    pub fn max_unimodularity_defect(&self) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| (a.norm_sqr() - b.norm_sqr() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JostState {
    pub y: Mat2,
    pub x: f64,
    pub xi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub xi: f64,
    pub a: C64,
    pub b: C64,
    pub r: C64,
}

/// `E(x) = diag(e^{-iξx/2}, e^{iξx/2})`.
pub fn free_matrix(xi: f64, x: f64) -> Mat2 {
    let e = cis_product(0.5 * xi, x);
    Mat2::diag(e.conj(), e)
}

fn check_xi(xi: f64) -> Result<()> {
    if xi.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("frequency"))
    }
}

/// Forward propagator of the `T` system across `[lo, hi]`.
fn forward<P: Profile + ?Sized>(q: &P, xi: f64, lo: f64, hi: f64, tol: f64) -> Result<Mat2> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let d = C64::new(0.0, 0.5 * xi);
    let gen = |x: f64| {
        let v = q.value(x);
        Mat2::new(-d, v.conj(), v, d)
    };
    let free = |a: f64, b: f64| free_matrix(xi, b - a);
    let settings = Settings { tol, ..Settings::default() };
    Ok(propagate(&gen, &free, &q.segments(), lo, hi, 0.5 * xi.abs(), &settings)?.matrix)
}

/// Truncation window for `q`, checking that what is cut off fits the budget.
fn window(q: &PotentialSpec, tol: f64) -> Result<Option<(f64, f64)>> {
    let Some((lo, hi)) = q.support() else { return Ok(None) };
    if !q.is_compact() {
        let tail = q.mass_outside(lo, hi);
        if tail > 0.1 * tol {
            return Err(Error::TailBudget { tail, budget: 0.1 * tol });
        }
    }
    Ok(Some((lo, hi)))
}

fn jost_between<P: Profile + ?Sized>(q: &P, xi: f64, x: f64, hi: f64, tol: f64) -> Result<Mat2> {
    if x >= hi {
        return Ok(Mat2::IDENTITY);
    }
    let p = forward(q, xi, x, hi, tol)?;
    Ok(free_matrix(-xi, x) * p.adjugate() * free_matrix(xi, hi))
}

/// `Y` at the left edge of the support, integrating from the right edge
/// where `Y = I`.
pub fn integrate_jost(q: &PotentialSpec, xi: f64, tol: f64) -> Result<JostState> {
    check_xi(xi)?;
    match window(q, tol)? {
        None => Ok(JostState { y: Mat2::IDENTITY, x: 0.0, xi }),
        Some((lo, hi)) => Ok(JostState { y: jost_between(q, xi, lo, hi, tol)?, x: lo, xi }),
    }
}

/// `Y(x)` at each requested position (identity to the right of the support).
pub fn jost_profile(q: &PotentialSpec, xi: f64, xs: &[f64], tol: f64) -> Result<Vec<JostState>> {
    check_xi(xi)?;
    let w = window(q, tol)?;
    xs.par_iter()
        .map(|&x| {
            let y = match w {
                None => Mat2::IDENTITY,
                Some((lo, hi)) => jost_between(q, xi, x.max(lo), hi, tol)?,
            };
            Ok(JostState { y, x, xi })
        })
        .collect()
}

/// `(a, b)` from the left-edge Jost state.
pub fn read_ab(y: &Mat2) -> (C64, C64) {
    (y.get(1, 1), -y.get(1, 0))
}

fn transition_of<P: Profile + ?Sized>(q: &P, xi: f64, lo: f64, hi: f64, tol: f64) -> Result<Transition> {
    let y = jost_between(q, xi, lo, hi, tol)?;
    finish(xi, read_ab(&y))
}

fn finish(xi: f64, (a, b): (C64, C64)) -> Result<Transition> {
    if !(a.norm() >= 1.0 - 1e-6) {
        return Err(Error::ModulusBelowOne(a.norm()));
    }
    Ok(Transition { xi, a, b, r: b / a })
}

pub fn transition(q: &PotentialSpec, xi: f64) -> Result<Transition> {
    transition_tol(q, xi, DEFAULT_TOL)
}

pub fn transition_tol(q: &PotentialSpec, xi: f64, tol: f64) -> Result<Transition> {
    let s = integrate_jost(q, xi, tol)?;
    finish(xi, read_ab(&s.y))
}

/// [`transition`] over a grid, in parallel.
pub fn scattering(q: &PotentialSpec, grid: &[f64], tol: f64) -> Result<ScatteringCoeffs> {
    let pts: Vec<Transition> = grid.par_iter().map(|&xi| transition_tol(q, xi, tol)).collect::<Result<_>>()?;
    Ok(ScatteringCoeffs {
        grid: grid.to_vec(),
        a: pts.iter().map(|t| t.a).collect(),
        b: pts.iter().map(|t| t.b).collect(),
        r: pts.iter().map(|t| t.r).collect(),
    })
}

/// Coefficients of `v₁ + v₂(· - R)` from those of `v₁` and `v₂` when `v₁`
/// lies entirely to the left of the shifted `v₂`.
pub fn glue_coeffs(c1: (C64, C64), c2: (C64, C64), r: f64, xi: f64) -> (C64, C64) {
    let (a1, b1) = c1;
    let (a2, b2) = c2;
    let ph = cis_product(xi, r);
    (a1 * a2 + b1 * b2.conj() * ph, a2.conj() * b1 + a1 * b2 * ph.conj())
}

pub fn glue_exact(v1: &PotentialSpec, v2: &PotentialSpec, r: f64, xi: f64) -> Result<(C64, C64)> {
    glue_exact_tol(v1, v2, r, xi, DEFAULT_TOL)
}

pub fn glue_exact_tol(v1: &PotentialSpec, v2: &PotentialSpec, r: f64, xi: f64, tol: f64) -> Result<(C64, C64)> {
    check_xi(xi)?;
    if !r.is_finite() {
        return Err(Error::NonFinite("separation"));
    }
    if let (Some((_, hi1)), Some((lo2, _))) = (v1.support(), v2.support()) {
        if hi1 > lo2 + r {
            return Err(Error::ShortGap { gap: lo2 + r - hi1, required: 0.0 });
        }
    }
    let t1 = transition_tol(v1, xi, tol)?;
    let t2 = transition_tol(v2, xi, tol)?;
    Ok(glue_coeffs((t1.a, t1.b), (t2.a, t2.b), r, xi))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxGlue {
    pub a: C64,
    pub b: C64,
    /// Rigorous bound on the entrywise error caused by truncation.
    pub eps_star: f64,
    pub tail1: f64,
    pub tail2: f64,
}

/// Glues the truncations `vⱼ·χ_{|x| < R/2}` and reports
/// `ε* = (tail₁ + tail₂)·exp(2(‖v₁‖₁ + ‖v₂‖₁))`.
pub fn glue_approx(v1: &PotentialSpec, v2: &PotentialSpec, r: f64, xi: f64) -> Result<ApproxGlue> {
    glue_approx_tol(v1, v2, r, xi, DEFAULT_TOL)
}

pub fn glue_approx_tol(v1: &PotentialSpec, v2: &PotentialSpec, r: f64, xi: f64, tol: f64) -> Result<ApproxGlue> {
    check_xi(xi)?;
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("separation must be nonnegative, got {r}")));
    }
    let h = 0.5 * r;
    let truncated = |v: &PotentialSpec| -> Result<(C64, C64)> {
        let (lo, hi) = match v.support() {
            Some((lo, hi)) => (lo.max(-h), hi.min(h)),
            None => return Ok((ONE, ZERO)),
        };
        if hi <= lo {
            return Ok((ONE, ZERO));
        }
        let w = Windowed { inner: v, lo, hi };
        let t = transition_of(&w, xi, lo, hi, tol)?;
        Ok((t.a, t.b))
    };
    let c1 = truncated(v1)?;
    let c2 = truncated(v2)?;
    let (a, b) = glue_coeffs(c1, c2, r, xi);
    let tail1 = v1.tail_mass(h);
    let tail2 = v2.tail_mass(h);
    let eps_star = (tail1 + tail2) * (2.0 * (v1.l1_norm() + v2.l1_norm())).exp();
    Ok(ApproxGlue { a, b, eps_star, tail1, tail2 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeValue {
    /// Dirac `a(ξ)`.
    pub a: C64,
    /// Dirac `b(ξ)`, only for real `ξ`.
    pub b: Option<C64>,
}

/// `A₊(x) = -½ conj q(x/2)` on `x ≥ 0`.
pub struct KreinPlus<P>(pub P);

impl<P: Profile> Profile for KreinPlus<P> {
    fn value(&self, x: f64) -> C64 {
        if x < 0.0 {
            ZERO
        } else {
            -0.5 * self.0.value(0.5 * x).conj()
        }
    }

    fn segments(&self) -> Vec<Segment> {
        clip_segments(&self.0.segments(), 0.0, f64::INFINITY)
            .into_iter()
            .map(|s| Segment { start: 2.0 * s.start, end: 2.0 * s.end, rate: 0.5 * s.rate })
            .collect()
    }
}

/// `A₋(x) = ½ q(-x/2)` on `x ≥ 0`.
pub struct KreinMinus<P>(pub P);

impl<P: Profile> Profile for KreinMinus<P> {
    fn value(&self, x: f64) -> C64 {
        if x < 0.0 {
            ZERO
        } else {
            0.5 * self.0.value(-0.5 * x)
        }
    }

    fn segments(&self) -> Vec<Segment> {
        let mut out: Vec<Segment> = clip_segments(&self.0.segments(), f64::NEG_INFINITY, 0.0)
            .into_iter()
            .map(|s| Segment { start: -2.0 * s.end, end: -2.0 * s.start, rate: 0.5 * s.rate })
            .collect();
        out.reverse();
        out
    }
}

fn combine(ap: C64, bp: C64, am: C64, bm: C64, real: bool) -> BridgeValue {
    BridgeValue { a: ap * am - bp * bm, b: real.then(|| am * bp.conj() - bm * ap.conj()) }
}

/// Evaluates Dirac `a(ξ, q)` for `Im ξ ≥ 0` from the two Krein systems with
/// `A₊(x) = -½ conj q(x/2)` and `A₋(x) = ½ q(-x/2)` on `ℝ⁺` at `k = ξ/2`:
/// `a = 𝔞₊𝔞₋ - 𝔟₊𝔟₋`, and on the real line
/// `b = 𝔞₋ conj 𝔟₊ - 𝔟₋ conj 𝔞₊`.
pub fn krein_dirac_bridge(q: &PotentialSpec, xi: C64) -> Result<BridgeValue> {
    krein_dirac_bridge_tol(q, xi, DEFAULT_TOL)
}

pub fn krein_dirac_bridge_tol(q: &PotentialSpec, xi: C64, tol: f64) -> Result<BridgeValue> {
    Ok(bridge_cutoffs(q, xi, &[f64::INFINITY], tol)?[0])
}

/// Bridge values for the truncations `q·χ_{(-∞, c]}` at each cutoff `c`
/// (increasing).
pub fn bridge_cutoffs(q: &PotentialSpec, xi: C64, cutoffs: &[f64], tol: f64) -> Result<Vec<BridgeValue>> {
    if !xi.is_finite() {
        return Err(Error::NonFinite("frequency"));
    }
    if xi.im < 0.0 {
        return Err(Error::LowerHalfPlane(xi.im));
    }
    if cutoffs.iter().any(|c| c.is_nan()) || cutoffs.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("cutoffs must be increasing".into()));
    }
    let k = xi * 0.5;
    let real = xi.im == 0.0;
    let Some((lo, hi)) = window(q, tol)? else {
        return Ok(vec![BridgeValue { a: ONE, b: real.then_some(ZERO) }; cutoffs.len()]);
    };
    let mut out = vec![BridgeValue { a: ONE, b: real.then_some(ZERO) }; cutoffs.len()];
    // Cutoffs left of the origin only trim A₋.
    for (j, &c) in cutoffs.iter().enumerate() {
        if c < 0.0 && c > lo {
            let w = Windowed { inner: q, lo: f64::NEG_INFINITY, hi: c };
            let e = coefficients(&integrate_krein(&KreinMinus(&w), k, -2.0 * lo, tol)?);
            out[j] = combine(ONE, ZERO, e.a, e.b, real);
        }
    }
    let (am, bm) = if lo < 0.0 {
        let e = coefficients(&integrate_krein(&KreinMinus(q), k, -2.0 * lo, tol)?);
        (e.a, e.b)
    } else {
        (ONE, ZERO)
    };
    let right: Vec<(usize, f64)> =
        cutoffs.iter().enumerate().filter(|(_, &c)| c >= 0.0).map(|(j, &c)| (j, 2.0 * c.min(hi.max(0.0)))).collect();
    if !right.is_empty() {
        let stops: Vec<f64> = right.iter().map(|&(_, x)| x).collect();
        let plus = integrate_krein_stops(&KreinPlus(q), k, &stops, tol)?;
        for (&(j, _), t) in right.iter().zip(&plus) {
            let e = coefficients(t);
            out[j] = combine(e.a, e.b, am, bm, real);
        }
    }
    Ok(out)
}

/// Rotation by `e^{iθ}` as a unimodular factor.
pub fn unimodular(theta: f64) -> C64 {
    (I * theta).exp()
}
