//! Invariant suites: exact identities, symmetries, sum rules, gluing, the
//! bridge between the two systems, the outer representation and the
//! perturbation bounds. Each suite reports its worst deviation against a
//! fixed limit.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    check_jost_stability, check_jost_tail, check_krein_l1, halving_family, product_perturbation_suite,
    recursive_perturbation_suite, sequence_bound_suite, trial_seed, SuiteReport,
};
use crate::dirac::{glue_approx_tol, glue_exact_tol, krein_dirac_bridge_tol, transition_tol, Transition};
use crate::error::Result;
use crate::krein::{det_residual, exp_ikx, integrate_krein, limits_ab_tol, unimodularity_defect};
use crate::linalg::{Mat2, C64, ONE, ZERO};
use crate::outer::{linear_fit, outer_extend, sum_rule, sum_rule_with, LogModTable, Mode};
use crate::potential::{PotentialSpec, Template};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub passed: bool,
    /// Largest deviation seen (or the quantity compared with `limit`).
    pub worst: f64,
    pub limit: f64,
    #[serde(default)]
    pub details: BTreeMap<String, f64>,
}

impl SuiteOutcome {
    fn below(name: &str, worst: f64, limit: f64) -> Self {
        SuiteOutcome { name: name.into(), passed: worst <= limit, worst, limit, details: BTreeMap::new() }
    }

    fn with(mut self, key: &str, v: f64) -> Self {
        self.details.insert(key.into(), v);
        self
    }
}

const TOL: f64 = 1e-11;

/// Two smooth bumps with amplitudes in the unit disc inside `[lo, hi]`.
pub fn random_bumps(rng: &mut impl Rng, lo: f64, hi: f64) -> Result<PotentialSpec> {
    let terms = (0..2)
        .map(|_| {
            let width = rng.gen_range(0.3..1.0f64).min(hi - lo);
            let center = rng.gen_range(lo + 0.5 * width..=hi - 0.5 * width);
            let amp = C64::from_polar(rng.gen_range(0.2..1.0), rng.gen_range(-PI..PI));
            PotentialSpec::bump(Template::SmoothBump, center, width, amp)
        })
        .collect::<Result<Vec<_>>>()?;
    PotentialSpec::sum(terms)
}

fn entry_gap(a: &Mat2, b: &Mat2) -> f64 {
    (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| (a.get(i, j) - b.get(i, j)).norm() / a.get(i, j).norm().max(1.0))
        .fold(0.0, f64::max)
}

/// `A ≡ 0` gives `X = diag(e^{ikx}, 1)`.
pub fn free_case() -> Result<SuiteOutcome> {
    let zero = PotentialSpec::zero();
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let x = 2.0 * i as f64 + 0.37;
        for j in 0..10 {
            let k = C64::new(-5.0 + 1.1 * j as f64, if j % 2 == 0 { 0.0 } else { 0.1 * j as f64 });
            let t = integrate_krein(&zero, k, x, TOL)?;
            worst = worst.max(entry_gap(&Mat2::diag(exp_ikx(k, x), ONE), &t.entries));
        }
    }
    Ok(SuiteOutcome::below("free_case", worst, 1e-13))
}

/// Determinant law and real-axis unimodularity for random bumps.
pub fn identities(seed: u64, count: usize) -> Result<SuiteOutcome> {
    let per: Vec<(f64, f64)> = (0..count)
        .into_par_iter()
        .map(|n| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, n));
            let a = random_bumps(&mut rng, 0.0, 3.0)?;
            let (mut det, mut uni): (f64, f64) = (0.0, 0.0);
            for i in 0..64 {
                let re = -8.0 + 16.0 * i as f64 / 63.0;
                let t = integrate_krein(&a, C64::new(re, 0.0), 3.0, TOL)?;
                det = det.max(det_residual(&t));
                uni = uni.max(unimodularity_defect(&t));
                let t = integrate_krein(&a, C64::new(re, 0.5), 3.0, TOL)?;
                det = det.max(det_residual(&t));
            }
            Ok((det, uni))
        })
        .collect::<Result<_>>()?;
    let det = per.iter().map(|p| p.0).fold(0.0, f64::max);
    let uni = per.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(SuiteOutcome::below("identities", det.max(uni), 1e-9).with("det_residual", det).with("unimodularity", uni))
}

/// `A ≡ 1` on `[0, x]` at `k = 0`: `𝔄 = 𝔄* = cosh x`, `𝔅 = 𝔅* = -sinh x`.
pub fn closed_form() -> Result<SuiteOutcome> {
    let mut worst: f64 = 0.0;
    for x in [0.5, 1.0, 2.0, 4.0] {
        let a = PotentialSpec::indicator(0.0, x)?;
        let t = integrate_krein(&a, ZERO, x, TOL)?;
        let (c, s) = (x.cosh(), x.sinh());
        let expect = Mat2::new(C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(-s, 0.0), C64::new(c, 0.0));
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((t.entries.get(i, j) - expect.get(i, j)).norm());
            }
        }
    }
    Ok(SuiteOutcome::below("closed_form", worst, 1e-10))
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / a.norm().max(1.0)
}

/// The five scattering symmetries and the two Krein scalings on 32-point
/// grids for random potentials.
pub fn symmetries(seed: u64, count: usize) -> Result<SuiteOutcome> {
    let (mu, ell, beta) = (1.7, 0.9, 0.6);
    let zeta = C64::from_polar(1.0, 0.7);
    let per: Vec<[f64; 7]> = (0..count)
        .into_par_iter()
        .map(|n| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, n));
            let q = random_bumps(&mut rng, -1.5, 1.5)?;
            let a = random_bumps(&mut rng, 0.0, 2.0)?;
            let t = |p: &PotentialSpec, xi: f64| -> Result<Transition> { transition_tol(p, xi, TOL) };
            let dil = q.dilate(mu)?;
            let conj = q.conjugate();
            let tr = q.translate(ell)?;
            let md = q.modulate(-beta)?;
            let rot = q.rotate(zeta)?;
            let mut w = [0.0f64; 7];
            for i in 0..32 {
                let xi = -4.0 + 8.0 * i as f64 / 31.0;
                let base = t(&q, xi)?;
                w[0] = w[0].max(rel(t(&q, xi / mu)?.r, t(&dil, xi)?.r));
                w[1] = w[1].max(rel(t(&q, -xi)?.r.conj(), t(&conj, xi)?.r));
                w[2] = w[2].max(rel(base.r * C64::from_polar(1.0, -xi * ell), t(&tr, xi)?.r));
                w[3] = w[3].max(rel(t(&q, xi + beta)?.r, t(&md, xi)?.r));
                let r = t(&rot, xi)?;
                w[4] = w[4].max(rel(base.b * zeta, r.b).max(rel(base.a, r.a)));

                let k = C64::new(-3.0 + 6.0 * i as f64 / 31.0, if i % 2 == 0 { 0.0 } else { 0.3 });
                let x = 2.0;
                let lhs = integrate_krein(&a, k, x, TOL)?.entries.scale_row0(exp_ikx(C64::new(-ell, 0.0), x));
                let rhs = integrate_krein(&a.modulate(ell)?, k - ell, x, TOL)?.entries;
                w[5] = w[5].max(entry_gap(&lhs, &rhs));
                let m = 1.5;
                let lhs = integrate_krein(&a, k / m, m * x, TOL)?.entries;
                let rhs = integrate_krein(&a.dilate(m)?, k, x, TOL)?.entries;
                w[6] = w[6].max(entry_gap(&lhs, &rhs));
            }
            Ok(w)
        })
        .collect::<Result<_>>()?;
    let names = ["dilation", "conjugation", "translation", "modulation", "rotation", "krein_modulation", "krein_dilation"];
    let mut out = SuiteOutcome::below("symmetries", 0.0, 1e-9);
    for (j, name) in names.iter().enumerate() {
        let v = per.iter().map(|w| w[j]).fold(0.0, f64::max);
        out.worst = out.worst.max(v);
        out.details.insert(name.to_string(), v);
    }
    out.passed = out.worst <= out.limit;
    Ok(out)
}

/// Both sum rules for the standard bump, and the `δ²` scaling of `∫ log|a|`.
pub fn sum_rules() -> Result<SuiteOutcome> {
    let p = PotentialSpec::standard_bump();
    let krein = sum_rule(&p, Mode::Krein)?;
    let dirac = sum_rule(&p, Mode::Dirac)?;
    let deltas = [0.4, 0.2, 0.1, 0.05];
    let ints: Vec<f64> = deltas
        .par_iter()
        .map(|&d| Ok(sum_rule_with(&p.scaled(d), Mode::Dirac, 200.0, 1e-12)?.rhs))
        .collect::<Result<_>>()?;
    let fit = linear_fit(&deltas.map(f64::ln), &ints.iter().map(|v| v.ln()).collect::<Vec<_>>())?;
    let residual = krein.residual.abs().max(dirac.residual.abs());
    let slope_dev = (fit.slope - 2.0).abs();
    let mut out = SuiteOutcome::below("sum_rules", residual, 1e-3)
        .with("krein_residual", krein.residual)
        .with("dirac_residual", dirac.residual)
        .with("delta_slope", fit.slope);
    out.passed = residual <= 1e-3 && slope_dev <= 0.05;
    Ok(out)
}

/// `glue_exact` against direct integration of the joined potential, and
/// the `ε*` bound of `glue_approx` on overlapping pairs.
pub fn gluing(seed: u64, cases: usize) -> Result<SuiteOutcome> {
    let v1 = PotentialSpec::bump(Template::SmoothBump, 0.0, 1.0, C64::new(0.8, 0.3))?;
    let v2 = PotentialSpec::bump(Template::SmoothBump, 0.2, 1.4, C64::new(-0.5, 0.6))?;
    let mut exact: f64 = 0.0;
    for r in [4.0, 16.0, 64.0] {
        let joined = PotentialSpec::sum(vec![v1.clone(), v2.translate(r)?])?;
        for i in 0..16 {
            let xi = -3.0 + 6.0 * i as f64 / 15.0;
            let (a, b) = glue_exact_tol(&v1, &v2, r, xi, TOL)?;
            let d = transition_tol(&joined, xi, TOL)?;
            exact = exact.max((a - d.a).norm()).max((b - d.b).norm());
        }
    }
    let ratios: Vec<f64> = (0..cases)
        .into_par_iter()
        .map(|n| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, n));
            let g = |rng: &mut ChaCha8Rng| {
                let amp = C64::from_polar(rng.gen_range(0.1..0.8), rng.gen_range(-PI..PI));
                PotentialSpec::bump(Template::Gaussian, rng.gen_range(-0.3..0.3), rng.gen_range(0.2..0.6), amp)
            };
            let w1 = g(&mut rng)?;
            let w2 = g(&mut rng)?;
            let r = rng.gen_range(1.0..4.0);
            let xi = rng.gen_range(-3.0..3.0);
            let approx = glue_approx_tol(&w1, &w2, r, xi, TOL)?;
            let truth = transition_tol(&PotentialSpec::sum(vec![w1, w2.translate(r)?])?, xi, TOL)?;
            let err = (approx.a - truth.a).norm().max((approx.b - truth.b).norm());
            Ok(err / (approx.eps_star + 10.0 * TOL))
        })
        .collect::<Result<_>>()?;
    let worst_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let mut out = SuiteOutcome::below("gluing", exact, 1e-8).with("approx_worst_ratio", worst_ratio);
    out.passed = exact <= 1e-8 && worst_ratio <= 1.0;
    Ok(out)
}

/// Dirac `a` from the two Krein systems against the Jost transition.
pub fn bridge() -> Result<SuiteOutcome> {
    let q = PotentialSpec::bump(Template::SmoothBump, 1.0, 1.5, C64::new(0.9, -0.4))?;
    let worst = (0..16)
        .into_par_iter()
        .map(|i| {
            let xi = 0.25 + 1.75 * i as f64 / 15.0;
            let b = krein_dirac_bridge_tol(&q, C64::new(2.0 * xi, 0.0), TOL)?;
            Ok((b.a - transition_tol(&q, 2.0 * xi, TOL)?.a).norm())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(SuiteOutcome::below("bridge", worst, 1e-7))
}

/// The outer function of the boundary modulus against direct integration
/// in the upper half-plane.
pub fn outer_representation() -> Result<SuiteOutcome> {
    let p = PotentialSpec::standard_bump();
    let table = LogModTable::krein(&p, Some(1.0), 200.0, 0.05, TOL)?;
    let worst = (0..10)
        .into_par_iter()
        .map(|i| {
            let k = C64::new(-2.0 + 0.45 * i as f64, 0.5 + 0.3 * i as f64);
            let direct = limits_ab_tol(&p, k, TOL)?.a_frak;
            Ok(rel(direct, outer_extend(&table, k)?))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(SuiteOutcome::below("outer_representation", worst, 1e-3))
}

/// The three randomized lemma suites plus the Jost and Krein bounds.
pub fn appendix_bounds(seed: u64, trials: usize) -> Result<(SuiteOutcome, Vec<SuiteReport>)> {
    let suites = vec![
        product_perturbation_suite(seed, trials)?,
        recursive_perturbation_suite(seed, trials)?,
        sequence_bound_suite(seed, trials)?,
    ];
    let violations: usize = suites.iter().map(|s| s.violations).sum();
    let q = PotentialSpec::standard_bump();
    let xs: Vec<f64> = (0..16).map(|i| -0.2 + 1.4 * i as f64 / 15.0).collect();
    let mut tail_ok = true;
    for xi in [0.0, 1.0, 2.0] {
        tail_ok &= check_jost_tail(&q, xi, &xs, TOL)?.iter().all(|c| c.holds);
    }
    let v = PotentialSpec::bump(Template::Gaussian, 0.4, 0.1, C64::new(0.3, 0.2))?;
    let stab = check_jost_stability(&q, &halving_family(&v, 6), 1.0, 1e-12)?;
    let a = PotentialSpec::indicator(0.0, 7.0)?;
    let ks: Vec<C64> = (0..32).map(|i| C64::new(-4.0 + 8.0 * i as f64 / 31.0, if i % 4 == 0 { 0.5 } else { 0.0 })).collect();
    let l1_ok = check_krein_l1(&a, &ks, &[1.0, 3.0, 5.0, 7.0], 1e-10)?.iter().all(|c| c.holds);
    let mut out = SuiteOutcome::below("appendix_bounds", violations as f64, 0.0)
        .with("jost_tail", f64::from(u8::from(tail_ok)))
        .with("jost_stability_slope_a", stab.slope_a)
        .with("jost_stability_slope_b", stab.slope_b)
        .with("krein_l1", f64::from(u8::from(l1_ok)));
    out.passed = violations == 0 && tail_ok && stab.holds && l1_ok;
    Ok((out, suites))
}

/// Everything, in a fixed order.
pub fn run_all(seed: u64, trials: usize) -> Result<(Vec<SuiteOutcome>, Vec<SuiteReport>)> {
    let mut out = vec![
        free_case()?,
        identities(seed, 10)?,
        closed_form()?,
        symmetries(seed, 5)?,
        sum_rules()?,
        gluing(seed, 100)?,
        bridge()?,
        outer_representation()?,
    ];
    let (b, suites) = appendix_bounds(seed, trials)?;
    out.push(b);
    Ok((out, suites))
}
