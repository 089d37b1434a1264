//! Krein systems on ℝ⁺:
//!
//! ```text
//! X'(x) = [[ik, -conj A(x)], [-A(x), 0]] X(x),   X(0) = I,
//! X = [[𝔄*, 𝔅*], [𝔅, 𝔄]].
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{propagate, Profile, Settings};
use crate::linalg::{Mat2, C64, I, ONE, ZERO};
use crate::phase::cis_product;
use crate::potential::PotentialSpec;

pub const DEFAULT_TOL: f64 = 1e-10;

/// A fundamental matrix tagged with its position and spectral parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transfer2 {
    pub entries: Mat2,
    pub x: f64,
    pub k: C64,
}

/// `(𝔄, 𝔅, 𝔄*, 𝔅*)` read off a [`Transfer2`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KreinEntries {
    pub a: C64,
    pub b: C64,
    pub a_star: C64,
    pub b_star: C64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KreinCoeffs {
    pub a_frak: C64,
    pub b_frak: C64,
    pub k: C64,
    pub x_cutoff: f64,
}

/// `e^{ikx}` with the real part of the phase reduced exactly.
pub fn exp_ikx(k: C64, x: f64) -> C64 {
    cis_product(k.re, x) * (-k.im * x).exp()
}

fn check_k(k: C64) -> Result<()> {
    if !k.is_finite() {
        return Err(Error::NonFinite("spectral parameter"));
    }
    if k.im < 0.0 {
        return Err(Error::LowerHalfPlane(k.im));
    }
    Ok(())
}

fn free_krein(k: C64) -> impl Fn(f64, f64) -> Mat2 {
    move |a: f64, b: f64| Mat2::diag(exp_ikx(k, b - a), ONE)
}

/// Integrates from 0 to `x_end`. Only the lower half-plane check is
/// enforced here; [`integrate_krein_any`] skips it for the star test.
pub fn integrate_krein<P: Profile + ?Sized>(p: &P, k: C64, x_end: f64, tol: f64) -> Result<Transfer2> {
    check_k(k)?;
    integrate_krein_any(p, k, x_end, tol)
}

/// As [`integrate_krein`] but accepting any finite `k`. Used for the
/// pointwise evaluations at `conj k`.
pub fn integrate_krein_any<P: Profile + ?Sized>(p: &P, k: C64, x_end: f64, tol: f64) -> Result<Transfer2> {
    if !x_end.is_finite() || x_end < 0.0 {
        return Err(Error::InvalidParameter(format!("x_end must be finite and nonnegative, got {x_end}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let ik = I * k;
    let gen = |x: f64| {
        let a = p.value(x);
        Mat2::new(ik, -a.conj(), -a, ZERO)
    };
    let settings = Settings { tol, ..Settings::default() };
    let prop = propagate(&gen, &free_krein(k), &p.segments(), 0.0, x_end, k.norm(), &settings)?;
    Ok(Transfer2 { entries: prop.matrix, x: x_end, k })
}

/// `X(x, k, p)` at each of the increasing positions `stops`.
pub fn integrate_krein_stops<P: Profile + ?Sized>(p: &P, k: C64, stops: &[f64], tol: f64) -> Result<Vec<Transfer2>> {
    check_k(k)?;
    if stops.iter().any(|x| !x.is_finite() || *x < 0.0) || stops.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("stops must be finite, nonnegative and nondecreasing".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let ik = I * k;
    let gen = |x: f64| {
        let a = p.value(x);
        Mat2::new(ik, -a.conj(), -a, ZERO)
    };
    let settings = Settings { tol, ..Settings::default() };
    let segs = p.segments();
    let free = free_krein(k);
    let mut out = Vec::with_capacity(stops.len());
    let mut m = Mat2::IDENTITY;
    let mut x = 0.0;
    for &stop in stops {
        if stop > x {
            m = propagate(&gen, &free, &segs, x, stop, k.norm(), &settings)?.matrix * m;
            x = stop;
        }
        out.push(Transfer2 { entries: m, x: stop, k });
    }
    Ok(out)
}

pub fn coefficients(t: &Transfer2) -> KreinEntries {
    let m = &t.entries.0;
    KreinEntries { a: m[1][1], b: m[1][0], a_star: m[0][0], b_star: m[0][1] }
}

/// Residual of `det X = e^{ikx}`. Where `e^{ikx}` is tiny the residual is
/// measured against the size of the two products forming the determinant.
pub fn det_residual(t: &Transfer2) -> f64 {
    let d = t.entries.det();
    if t.k.im * t.x <= 30.0 {
        (d * exp_ikx(-t.k, t.x) - ONE).norm()
    } else {
        let m = &t.entries.0;
        let scale = (m[0][0] * m[1][1]).norm() + (m[0][1] * m[1][0]).norm();
        (d - exp_ikx(t.k, t.x)).norm() / scale.max(f64::MIN_POSITIVE)
    }
}

/// `|𝔄|² - |𝔅|² - 1`; zero on the real axis.
pub fn unimodularity_defect(t: &Transfer2) -> f64 {
    let e = coefficients(t);
    e.a.norm_sqr() - e.b.norm_sqr() - 1.0
}

/// `max(|𝔄* - e^{ikx} conj 𝔄(conj k)|, |𝔅* - e^{ikx} conj 𝔅(conj k)|)`.
pub fn star_residual<P: Profile + ?Sized>(p: &P, t: &Transfer2, tol: f64) -> Result<f64> {
    let mirror = if t.k.im == 0.0 { *t } else { integrate_krein_any(p, t.k.conj(), t.x, tol)? };
    let e = coefficients(t);
    let m = coefficients(&mirror);
    let ph = exp_ikx(t.k, t.x);
    Ok((e.a_star - ph * m.a.conj()).norm().max((e.b_star - ph * m.b.conj()).norm()))
}

/// `𝔞 = 𝔄(L, k)`, `𝔟 = 𝔅(L, k)` where `L` is the right end of the support.
pub fn limits_ab(p: &PotentialSpec, k: C64) -> Result<KreinCoeffs> {
    limits_ab_tol(p, k, DEFAULT_TOL)
}

pub fn limits_ab_tol(p: &PotentialSpec, k: C64, tol: f64) -> Result<KreinCoeffs> {
    check_k(k)?;
    if !p.is_compact() {
        return Err(Error::UnboundedSupport("limits_ab needs a compactly supported coefficient".into()));
    }
    let Some((lo, hi)) = p.support() else {
        return Ok(KreinCoeffs { a_frak: ONE, b_frak: ZERO, k, x_cutoff: 0.0 });
    };
    if lo < 0.0 {
        return Err(Error::InvalidParameter(format!("Krein coefficient must live on [0, ∞), support starts at {lo}")));
    }
    let t = integrate_krein(p, k, hi, tol)?;
    let e = coefficients(&t);
    Ok(KreinCoeffs { a_frak: e.a, b_frak: e.b, k, x_cutoff: hi })
}

/// Group property: `X = G_n P_n ⋯ G_1 P_1` where `G_j = diag(e^{ik·gap_j}, 1)`.
/// `gaps` has one entry per junction, optionally followed by a trailing gap.
pub fn group_compose(pieces: &[Transfer2], gaps: &[f64], k: C64) -> Result<Transfer2> {
    if pieces.is_empty() {
        return Err(Error::Dimension("no pieces to compose".into()));
    }
    if gaps.len() + 1 != pieces.len() && gaps.len() != pieces.len() {
        return Err(Error::Dimension(format!("{} pieces but {} gaps", pieces.len(), gaps.len())));
    }
    if let Some(bad) = pieces.iter().find(|t| t.k != k) {
        return Err(Error::Dimension(format!("piece evaluated at k = {} instead of {k}", bad.k)));
    }
    if let Some(g) = gaps.iter().find(|g| !(**g >= 0.0)) {
        return Err(Error::InvalidParameter(format!("gap must be nonnegative, got {g}")));
    }
    let mut m = Mat2::IDENTITY;
    let mut x = 0.0;
    for (j, piece) in pieces.iter().enumerate() {
        m = piece.entries * m;
        x += piece.x;
        if let Some(&g) = gaps.get(j) {
            m = m.scale_row0(exp_ikx(k, g));
            x += g;
        }
    }
    Ok(Transfer2 { entries: m, x, k })
}

/// Every prefix of [`group_compose`] for equal pieces spacing: after piece
/// `j` the matrix is advanced across a gap of length `gap`.
pub fn group_prefixes(pieces: &[Transfer2], gap: f64, k: C64) -> Result<Vec<Transfer2>> {
    if !(gap >= 0.0) {
        return Err(Error::InvalidParameter(format!("gap must be nonnegative, got {gap}")));
    }
    let phase = exp_ikx(k, gap);
    let mut m = Mat2::IDENTITY;
    let mut x = 0.0;
    let mut out = Vec::with_capacity(pieces.len());
    for piece in pieces {
        if piece.k != k {
            return Err(Error::Dimension(format!("piece evaluated at k = {} instead of {k}", piece.k)));
        }
        m = (piece.entries * m).scale_row0(phase);
        x += piece.x + gap;
        out.push(Transfer2 { entries: m, x, k });
    }
    Ok(out)
}

/// `X(x_end, k, p)` over a list of spectral parameters, in parallel.
pub fn sweep_k<P: Profile + ?Sized>(p: &P, ks: &[C64], x_end: f64, tol: f64) -> Result<Vec<Transfer2>> {
    ks.par_iter().map(|&k| integrate_krein(p, k, x_end, tol)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_case_is_diagonal() {
        let z = PotentialSpec::zero();
        let k = C64::new(1.3, 0.4);
        let t = integrate_krein(&z, k, 2.5, DEFAULT_TOL).unwrap();
        assert_eq!(t.entries, Mat2::diag(exp_ikx(k, 2.5), ONE));
        let e = coefficients(&t);
        assert_eq!((e.a, e.b, e.b_star), (ONE, ZERO, ZERO));
    }

    #[test]
    fn constant_coefficient_at_zero_frequency() {
        for x in [0.5, 1.0, 2.0, 4.0] {
            let p = PotentialSpec::indicator(0.0, x).unwrap();
            let t = integrate_krein(&p, ZERO, x, DEFAULT_TOL).unwrap();
            let e = coefficients(&t);
            assert!((e.a - x.cosh()).norm() < 1e-10 * x.cosh());
            assert!((e.b + x.sinh()).norm() < 1e-10 * x.cosh());
            assert!((e.a_star - x.cosh()).norm() < 1e-10 * x.cosh());
            assert!((e.b_star + x.sinh()).norm() < 1e-10 * x.cosh());
        }
    }

    #[test]
    fn rejects_lower_half_plane_and_bad_inputs() {
        let z = PotentialSpec::zero();
        assert!(matches!(integrate_krein(&z, C64::new(0.0, -1.0), 1.0, 1e-10), Err(Error::LowerHalfPlane(_))));
        assert!(integrate_krein(&z, ONE, -1.0, 1e-10).is_err());
        assert!(integrate_krein(&z, ONE, 1.0, 0.0).is_err());
    }

    #[test]
    fn limits_of_zero_and_gaussian() {
        let z = PotentialSpec::zero();
        let c = limits_ab(&z, ONE).unwrap();
        assert_eq!((c.a_frak, c.b_frak), (ONE, ZERO));
        let g = PotentialSpec::bump(crate::potential::Template::Gaussian, 20.0, 1.0, ONE).unwrap();
        assert!(matches!(limits_ab(&g, ONE), Err(Error::UnboundedSupport(_))));
    }

    #[test]
    fn group_compose_trivial_cases() {
        let k = C64::new(0.7, 0.1);
        let p = PotentialSpec::standard_bump();
        let t = integrate_krein(&p, k, 1.0, DEFAULT_TOL).unwrap();
        assert_eq!(group_compose(&[t], &[], k).unwrap(), t);
        let z = PotentialSpec::zero();
        let f1 = integrate_krein(&z, k, 1.0, DEFAULT_TOL).unwrap();
        let f2 = integrate_krein(&z, k, 2.0, DEFAULT_TOL).unwrap();
        let c = group_compose(&[f1, f2], &[0.0], k).unwrap();
        assert!((c.entries - Mat2::diag(exp_ikx(k, 3.0), ONE)).max_abs() < 1e-15);
        assert!(group_compose(&[f1, f2], &[1.0, 2.0, 3.0], k).is_err());
    }
}
