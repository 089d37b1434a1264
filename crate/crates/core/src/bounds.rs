//! Randomized and deterministic checks of the perturbation lemmas behind
//! the constructions: matrix products, recursive products, slowly perturbed
//! sequences, Jost tails, Jost stability and the Krein `L¹` bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirac::{free_matrix, jost_profile, transition_tol};
use crate::error::{Error, Result};
use crate::krein::integrate_krein_stops;
use crate::linalg::{Mat2, C64, ZERO};
use crate::outer::linear_fit;
use crate::potential::PotentialSpec;
use crate::quadrature::integrate_with_breaks;

/// Frozen constant in `‖T₊(x) - E(x)‖ ≤ C·t·e^{C·t}`, `t = ∫ₓ^∞ |q|`.
pub const JOST_TAIL_C: f64 = 2.0;
/// Frozen constant in `‖X(x, k, A)‖ ≤ exp(C ∫₀ˣ |A|)` for `Im k ≥ 0`.
pub const KREIN_L1_C: f64 = 1.0;

/// Two sides of an inequality `lhs ≤ rhs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Check {
    /// Equality cases are reachable, so the comparison allows rounding in
    /// the last few bits.
    fn new(lhs: f64, rhs: f64) -> Self {
        Check { lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-12) }
    }

    /// The prefix checks folded into one: the worst ratio and whether all hold.
    fn worst(checks: &[Check]) -> Check {
        let holds = checks.iter().all(|c| c.holds);
        let w = checks
            .iter()
            .max_by(|a, b| ratio(a).total_cmp(&ratio(b)))
            .copied()
            .unwrap_or(Check { lhs: 0.0, rhs: 0.0, holds: true });
        Check { holds, ..w }
    }
}

fn ratio(c: &Check) -> f64 {
    if c.rhs > 0.0 {
        c.lhs / c.rhs
    } else if c.lhs > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Matrices `X_j` with perturbations `Δ_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationTrial {
    pub xs: Vec<Mat2>,
    pub deltas: Vec<Mat2>,
}

impl PerturbationTrial {
    pub fn new(xs: Vec<Mat2>, deltas: Vec<Mat2>) -> Result<Self> {
        if xs.len() != deltas.len() || xs.is_empty() || xs.len() > 64 {
            return Err(Error::Dimension(format!("trial needs 1..=64 matched pairs, got {} and {}", xs.len(), deltas.len())));
        }
        Ok(PerturbationTrial { xs, deltas })
    }

    /// `max ‖Δ_j‖`.
    pub fn epsilon(&self) -> f64 {
        self.deltas.iter().map(Mat2::op_norm).fold(0.0, f64::max)
    }

    /// `max ‖X_j‖`.
    pub fn c(&self) -> f64 {
        self.xs.iter().map(Mat2::op_norm).fold(0.0, f64::max)
    }

    /// Entries uniform in the unit disc scaled by `x_scale`; each `Δ_j` has
    /// norm at most `eps`.
    pub fn random(rng: &mut impl Rng, n: usize, x_scale: f64, eps: f64) -> Result<Self> {
        let xs = (0..n).map(|_| random_matrix(rng).scale(C64::new(x_scale, 0.0))).collect();
        let deltas = (0..n)
            .map(|_| {
                let d = random_matrix(rng);
                let s = eps * rng.gen::<f64>() / d.op_norm().max(1e-300);
                d.scale(C64::new(s, 0.0))
            })
            .collect();
        Self::new(xs, deltas)
    }
}

fn disc_point(rng: &mut impl Rng) -> C64 {
    loop {
        let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if z.norm_sqr() <= 1.0 {
            return z;
        }
    }
}

fn random_matrix(rng: &mut impl Rng) -> Mat2 {
    Mat2::new(disc_point(rng), disc_point(rng), disc_point(rng), disc_point(rng))
}

/// `‖Π(X_j + Δ_j) - ΠX_j‖ ≤ (1 + 2C + 2ε)^n ε` for every prefix `n`.
pub fn check_product_perturbation(trial: &PerturbationTrial) -> Vec<Check> {
    let (eps, c) = (trial.epsilon(), trial.c());
    let mut exact = Mat2::IDENTITY;
    let mut perturbed = Mat2::IDENTITY;
    let mut out = Vec::with_capacity(trial.xs.len());
    for (n, (x, d)) in trial.xs.iter().zip(&trial.deltas).enumerate() {
        exact = *x * exact;
        perturbed = (*x + *d) * perturbed;
        let rhs = (1.0 + 2.0 * c + 2.0 * eps).powi(n as i32 + 1) * eps;
        out.push(Check::new((perturbed - exact).op_norm(), rhs));
    }
    out
}

/// `Y₁ = X₁`, `Y_{n+1} = X_{n+1}Y_n + Δ_n` against `Ψ_n = X_n⋯X₁`:
/// `‖Y_n - Ψ_n‖ ≤ ε(n-1)C^{n-1}` with `C = max(1, max‖X_j‖)`.
pub fn check_recursive_perturbation(trial: &PerturbationTrial) -> Vec<Check> {
    let eps = trial.epsilon();
    let c = trial.c().max(1.0);
    let mut y = trial.xs[0];
    let mut psi = trial.xs[0];
    let mut out = vec![Check::new((y - psi).op_norm(), 0.0)];
    for n in 1..trial.xs.len() {
        y = trial.xs[n] * y + trial.deltas[n - 1];
        psi = trial.xs[n] * psi;
        out.push(Check::new((y - psi).op_norm(), eps * n as f64 * c.powi(n as i32)));
    }
    out
}

/// `C'` such that `|x_n| ≤ (1 + C'e^{-n₀})|x_{n₀}| + C'e^{-n₀}` whenever
/// `|x_{j+1}| ≤ (1 + Ce^{-j})|x_j| + Ce^{-j}` for `j ≥ n₀`.
pub fn sequence_constant(c: f64, n0: usize) -> f64 {
    let mut log_p = 0.0;
    let mut j = n0 as f64;
    loop {
        let t = c * (-j).exp();
        log_p += t.ln_1p();
        if t < 1e-18 {
            break;
        }
        j += 1.0;
    }
    let p = log_p.exp();
    let e = std::f64::consts::E;
    (log_p.exp_m1() * (n0 as f64).exp()).max(p * c * e / (e - 1.0))
}

/// Checks every `|x_n|`, `n > n₀`, against the closed bound.
/// `values[0]` is `x_{n₀}`.
pub fn check_sequence_bound(values: &[f64], c: f64, n0: usize) -> Result<Check> {
    if values.is_empty() || !(c >= 0.0) {
        return Err(Error::InvalidParameter("need a starting value and C ≥ 0".into()));
    }
    let cp = sequence_constant(c, n0);
    let decay = (-(n0 as f64)).exp();
    let rhs = (1.0 + cp * decay) * values[0].abs() + cp * decay;
    let lhs = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(Check::new(lhs, rhs))
}

/// A sequence that satisfies the recursion hypothesis, with the multipliers
/// and addends drawn inside their allowed ranges (and sometimes at the edge).
pub fn random_admissible_sequence(rng: &mut impl Rng, x0: f64, c: f64, n0: usize, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut x = x0;
    out.push(x);
    for j in n0..n0 + len - 1 {
        let e = c * (-(j as f64)).exp();
        let (s, t) = if rng.gen_bool(0.25) { (1.0, 1.0) } else { (rng.gen::<f64>(), rng.gen::<f64>()) };
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        x = sign * ((1.0 + s * e) * x.abs() + t * e);
        out.push(x);
    }
    out
}

// ---------------------------------------------------------------------------
// Jost solutions

/// `∫ₓ^∞ |q|`.
fn tail_l1(q: &PotentialSpec, x: f64) -> f64 {
    q.l1_norm() - q.mass_outside(x, f64::INFINITY)
}

/// `‖T₊(x, ξ) - E(x, ξ)‖ ≤ C·t·e^{C·t}` at each grid point, `C = JOST_TAIL_C`.
/// With `T₊ = E·Y` and `E` unitary the left side is `‖Y(x) - I‖`.
pub fn check_jost_tail(q: &PotentialSpec, xi: f64, xs: &[f64], tol: f64) -> Result<Vec<Check>> {
    let states = jost_profile(q, xi, xs, tol)?;
    Ok(states
        .iter()
        .map(|s| {
            let t = tail_l1(q, s.x);
            // The integrator's error rides on the left side.
            Check::new((s.y - Mat2::IDENTITY).op_norm(), JOST_TAIL_C * t * (JOST_TAIL_C * t).exp() + 10.0 * tol)
        })
        .collect())
}

/// First Born term `δa` for `q → q + v`:
/// `δY = -Y(lo) ∫ Y(x)⁻¹ E(x)⁻¹ V(x) E(x) Y(x) dx` with `V = [[0, v̄], [v, 0]]`.
pub fn born_delta_a(q: &PotentialSpec, v: &PotentialSpec, xi: f64, tol: f64) -> Result<C64> {
    let (lo, hi) = match (q.support(), v.support()) {
        (Some(a), Some(b)) => (a.0.min(b.0), a.1.max(b.1)),
        (None, Some(b)) => b,
        _ => return Ok(ZERO),
    };
    let y_at = |x: f64| -> Result<Mat2> { Ok(jost_profile(q, xi, &[x], tol)?[0].y) };
    let y_lo = y_at(lo)?;
    let kernel = |x: f64, row: usize| -> C64 {
        let Ok(y) = y_at(x) else { return C64::new(f64::NAN, 0.0) };
        let e = free_matrix(xi, x);
        let w = v.value(x);
        let big_v = Mat2::new(ZERO, w.conj(), w, ZERO);
        // det Y = 1, so the inverse is the adjugate.
        let m = y.adjugate() * e.adjugate() * big_v * e * y;
        m.get(row, 1)
    };
    let breaks: Vec<f64> = [q.support(), v.support()].iter().flatten().flat_map(|s| [s.0, s.1]).collect();
    let k01 = integrate_with_breaks(|x| kernel(x, 0), lo, hi, &breaks, 1e-13, 1e-10);
    let k11 = integrate_with_breaks(|x| kernel(x, 1), lo, hi, &breaks, 1e-13, 1e-10);
    let d = -(y_lo.get(1, 0) * k01.value + y_lo.get(1, 1) * k11.value);
    if !d.is_finite() {
        return Err(Error::NonFinite("Born term"));
    }
    Ok(d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub xi: f64,
    pub v_l1: Vec<f64>,
    pub delta_a: Vec<f64>,
    pub delta_b: Vec<f64>,
    pub slope_a: f64,
    pub slope_b: f64,
    pub holds: bool,
}

/// `|a(q + v) - a(q)|` and `|b(q + v) - b(q)|` against `‖v‖₁` for a sequence
/// of perturbations; the log-log slopes must be at least 0.9.
pub fn check_jost_stability(q: &PotentialSpec, vs: &[PotentialSpec], xi: f64, tol: f64) -> Result<StabilityReport> {
    if vs.len() < 5 {
        return Err(Error::InvalidParameter("need at least four halvings".into()));
    }
    let t0 = transition_tol(q, xi, tol)?;
    let mut v_l1 = Vec::new();
    let mut delta_a = Vec::new();
    let mut delta_b = Vec::new();
    for v in vs {
        let t = transition_tol(&PotentialSpec::sum(vec![q.clone(), v.clone()])?, xi, tol)?;
        v_l1.push(v.l1_norm());
        delta_a.push((t.a - t0.a).norm());
        delta_b.push((t.b - t0.b).norm());
    }
    let lx: Vec<f64> = v_l1.iter().map(|v| v.ln()).collect();
    let slope = |d: &[f64]| -> Result<f64> {
        // A difference below the integration floor carries no slope information.
        if d.iter().any(|x| *x < 1e3 * tol) {
            return Ok(f64::NAN);
        }
        Ok(linear_fit(&lx, &d.iter().map(|x| x.ln()).collect::<Vec<_>>())?.slope)
    };
    let slope_a = slope(&delta_a)?;
    let slope_b = slope(&delta_b)?;
    let holds = [slope_a, slope_b].iter().all(|s| s.is_nan() || *s >= 0.9) && !(slope_a.is_nan() && slope_b.is_nan());
    Ok(StabilityReport { xi, v_l1, delta_a, delta_b, slope_a, slope_b, holds })
}

/// `v, v/2, v/4, …` (`count` terms).
pub fn halving_family(v: &PotentialSpec, count: usize) -> Vec<PotentialSpec> {
    (0..count).map(|i| v.scaled(0.5f64.powi(i as i32))).collect()
}

/// `‖X(x, k, A)‖ ≤ exp(C ∫₀ˣ |A|)` at every sample, `C = KREIN_L1_C`.
pub fn check_krein_l1(a: &PotentialSpec, ks: &[C64], xs: &[f64], tol: f64) -> Result<Vec<Check>> {
    if ks.iter().any(|k| k.im < 0.0) {
        return Err(Error::LowerHalfPlane(ks.iter().map(|k| k.im).fold(f64::INFINITY, f64::min)));
    }
    let mut stops = xs.to_vec();
    stops.sort_by(f64::total_cmp);
    let mass: Vec<f64> = stops.iter().map(|&x| a.l1_norm() - a.mass_outside(0.0, x)).collect();
    let per_k: Vec<Vec<Check>> = ks
        .par_iter()
        .map(|&k| {
            let ts = integrate_krein_stops(a, k, &stops, tol)?;
            Ok(ts.iter().zip(&mass).map(|(t, m)| Check::new(t.entries.op_norm(), (KREIN_L1_C * m).exp() * (1.0 + 10.0 * tol))).collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_k.into_iter().flatten().collect())
}

// ---------------------------------------------------------------------------
// Seeded suites

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub trials: Vec<TrialRecord>,
    pub violations: usize,
}

impl SuiteReport {
    fn from_trials(suite: &str, seed: u64, trials: Vec<TrialRecord>) -> Self {
        let violations = trials.iter().filter(|t| !t.holds).count();
        SuiteReport { suite: suite.into(), seed, trials, violations }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Per-trial seed: a fixed mix of the suite seed and the trial index, so
/// results do not depend on scheduling.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    let mut z = seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn run_suite<F>(name: &str, seed: u64, trials: usize, f: F) -> Result<SuiteReport>
where
    F: Fn(&mut ChaCha8Rng) -> Result<Check> + Sync,
{
    let records = (0..trials)
        .into_par_iter()
        .map(|i| {
            let s = trial_seed(seed, i);
            let c = f(&mut ChaCha8Rng::seed_from_u64(s))?;
            Ok(TrialRecord { seed: s, lhs: c.lhs, rhs: c.rhs, holds: c.holds })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport::from_trials(name, seed, records))
}

/// Random products with entries in the unit disc and `ε = 1e-3`.
pub fn product_perturbation_suite(seed: u64, trials: usize) -> Result<SuiteReport> {
    run_suite("product_perturbation", seed, trials, |rng| {
        let n = rng.gen_range(1..=64);
        let t = PerturbationTrial::random(rng, n, 1.0, 1e-3)?;
        Ok(Check::worst(&check_product_perturbation(&t)))
    })
}

/// Random recursive products with `C ∈ [1, 2]` and `ε = 1e-4`.
pub fn recursive_perturbation_suite(seed: u64, trials: usize) -> Result<SuiteReport> {
    run_suite("recursive_perturbation", seed, trials, |rng| {
        let n = rng.gen_range(1..=64);
        // Unit-disc entries give norms up to 2, so this lands C in [1, 2].
        let scale = rng.gen_range(0.5..1.0);
        let mut t = PerturbationTrial::random(rng, n, scale, 1e-4)?;
        if t.c() < 1.0 {
            let s = 1.0 / t.c();
            t.xs.iter_mut().for_each(|x| *x = x.scale(C64::new(s, 0.0)));
        }
        Ok(Check::worst(&check_recursive_perturbation(&t)))
    })
}

/// Random admissible sequences with `C ∈ [0, 3]`, `n₀ ∈ [0, 8]`.
pub fn sequence_bound_suite(seed: u64, trials: usize) -> Result<SuiteReport> {
    run_suite("sequence_bound", seed, trials, |rng| {
        let c = rng.gen_range(0.0..3.0);
        let n0 = rng.gen_range(0..=8);
        let x0 = rng.gen_range(-2.0..2.0);
        let len = rng.gen_range(2..=60);
        let seq = random_admissible_sequence(rng, x0, c, n0, len);
        check_sequence_bound(&seq, c, n0)
    })
}
