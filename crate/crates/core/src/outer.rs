//! Outer functions in ℂ⁺ built from boundary log-modulus data, continuous
//! arguments along vertical rays, sum rules and the maximal functions.
//!
//! With `L = log|a|` on ℝ,
//!
//! ```text
//! log a(k) = (1/(πi)) ∫ L(s)/(s - k) ds,   arg a(k) = -(1/π) Re ∫ L(s)/(s - k) ds.
//! ```

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirac::{bridge_cutoffs, transition_tol};
use crate::error::{Error, Result};
use crate::krein::{integrate_krein, integrate_krein_stops, limits_ab_tol};
use crate::linalg::{C64, I, ONE};
use crate::potential::{build_decoupled_family, PotentialSpec};
use crate::quadrature::integrate_real_with_breaks;

/// Which analytic quantity a ray follows: the Krein `𝔄(x, k)` or the Dirac
/// `a(ξ)` of the truncation `q·χ_{(-∞, x]}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Krein,
    Dirac,
}

// ---------------------------------------------------------------------------
// Boundary tables and the Cauchy integral

/// `log|a|` sampled on the uniform grid `start + i·step`, with `C/s²` tails
/// fitted on each side from the outer half of the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogModTable {
    pub start: f64,
    pub step: f64,
    pub values: Vec<f64>,
    pub tail_left: f64,
    pub tail_right: f64,
}

/// Sixth-order local interpolant in Newton form around a point, in the
/// variable `t = (s - s₀)/h`.
struct LocalPoly {
    origin: f64,
    step: f64,
    coeffs: [f64; 6],
}

impl LocalPoly {
    fn eval(&self, k: C64) -> (C64, C64) {
        let t = (k - self.origin) / self.step;
        let mut p = C64::new(self.coeffs[5], 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for j in (0..5).rev() {
            dp = dp * (t - j as f64) + p;
            p = p * (t - j as f64) + self.coeffs[j];
        }
        (p, dp / self.step)
    }
}

/// `∫_S^∞ ds / (s²(s - k))`.
fn tail_kernel(k: C64, s: f64) -> C64 {
    if k.norm() < 0.5 * s {
        let mut sum = C64::new(0.0, 0.0);
        let mut pow = C64::new(1.0 / (s * s), 0.0);
        for n in 0..200 {
            let term = pow / (n as f64 + 2.0);
            sum += term;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
            pow = pow * k / s;
        }
        sum
    } else {
        let minus = C64::new(s - k.re, -k.im);
        (C64::new(s.ln(), 0.0) - minus.ln()) / (k * k) - 1.0 / (k * s)
    }
}

fn fit_inverse_square<'a>(points: impl Iterator<Item = (f64, f64)> + 'a) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (s, l) in points {
        let w = s.powi(-2);
        num += l * w;
        den += w * w;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

impl LogModTable {
    pub fn from_samples(start: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if !start.is_finite() || !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidParameter(format!("bad grid start {start} / step {step}")));
        }
        if values.len() < 16 {
            return Err(Error::InvalidParameter("log-modulus table needs at least 16 samples".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("log-modulus sample"));
        }
        if let Some(v) = values.iter().find(|v| **v < -1e-8) {
            return Err(Error::InvalidParameter(format!("log-modulus must be nonnegative, found {v}")));
        }
        let end = start + step * (values.len() - 1) as f64;
        if !(start < 0.0 && end > 0.0) {
            return Err(Error::InvalidParameter(format!("grid [{start}, {end}] must straddle 0")));
        }
        let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let edge = values[0].abs().max(values[values.len() - 1].abs());
        if peak > 0.0 && edge > 1e-2 * peak {
            return Err(Error::NonDecaying(edge));
        }
        let at = |i: usize| (start + step * i as f64, values[i]);
        let n = values.len();
        let tail_right = fit_inverse_square((0..n).map(at).filter(|(s, _)| *s >= 0.5 * end));
        let tail_left = fit_inverse_square((0..n).map(at).filter(|(s, _)| *s <= 0.5 * start));
        Ok(LogModTable { start, step, values, tail_left, tail_right })
    }

    /// Samples `f` on `[-half_width, half_width]`, in parallel.
    pub fn from_fn<F>(f: F, half_width: f64, step: f64) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64> + Sync,
    {
        if !(half_width > 0.0) || !(step > 0.0) {
            return Err(Error::InvalidParameter("half width and step must be positive".into()));
        }
        let n = (half_width / step).round() as i64;
        let values = (-n..=n).into_par_iter().map(|i| f(i as f64 * step)).collect::<Result<Vec<_>>>()?;
        Self::from_samples(-(n as f64) * step, step, values)
    }

    /// `log|𝔄(x, s)|` on the real line; `x` defaults to the end of the support.
    pub fn krein(p: &PotentialSpec, x_cutoff: Option<f64>, half_width: f64, step: f64, tol: f64) -> Result<Self> {
        let x = match x_cutoff {
            Some(x) => x,
            None => p.support().map_or(0.0, |(_, hi)| hi),
        };
        Self::from_fn(|s| Ok(integrate_krein(p, C64::new(s, 0.0), x, tol)?.entries.get(1, 1).norm().ln()), half_width, step)
    }

    /// `log|a(ξ)|` on the real line.
    pub fn dirac(q: &PotentialSpec, half_width: f64, step: f64, tol: f64) -> Result<Self> {
        Self::from_fn(|xi| Ok(transition_tol(q, xi, tol)?.a.norm().ln()), half_width, step)
    }

    pub fn end(&self) -> f64 {
        self.start + self.step * (self.values.len() - 1) as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.start + self.step * i as f64).collect()
    }

    /// `∫ L` by the trapezoid rule plus the fitted tails.
    pub fn integral(&self) -> f64 {
        let n = self.values.len();
        let inner: f64 = self.values.iter().sum::<f64>() - 0.5 * (self.values[0] + self.values[n - 1]);
        inner * self.step + self.tail_right / self.end() + self.tail_left / -self.start
    }

    fn local(&self, x: f64) -> LocalPoly {
        let n = self.values.len();
        let pos = ((x - self.start) / self.step).floor() as i64;
        let i0 = (pos - 2).clamp(0, n as i64 - 6) as usize;
        let mut c = [0.0; 6];
        c.copy_from_slice(&self.values[i0..i0 + 6]);
        // Divided differences on unit-spaced nodes 0..5.
        for order in 1..6 {
            for j in (order..6).rev() {
                c[j] = (c[j] - c[j - 1]) / order as f64;
            }
        }
        LocalPoly { origin: self.start + self.step * i0 as f64, step: self.step, coeffs: c }
    }

    /// `∫ L(s)/(s - k) ds` for `Im k ≥ 0`; on the real axis the value is the
    /// boundary limit from above, `PV + iπL(x)`.
    pub fn cauchy(&self, k: C64) -> Result<C64> {
        if !k.is_finite() {
            return Err(Error::NonFinite("spectral parameter"));
        }
        if k.im < 0.0 {
            return Err(Error::LowerHalfPlane(k.im));
        }
        let (x, y) = (k.re, k.im);
        let h = self.step;
        // Close to a grid end on or near the real axis the truncated sum and
        // the tail kernel carry opposite log singularities; interpolate
        // across the band from points on either side of it instead.
        let band = 6.0 * h;
        if y < band {
            for edge in [self.start, self.end()] {
                if (x - edge).abs() < band {
                    let nodes = [edge - 2.0 * band, edge - band, edge + band, edge + 2.0 * band];
                    let mut acc = C64::new(0.0, 0.0);
                    for (i, &xi) in nodes.iter().enumerate() {
                        let w: f64 = nodes.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &xj)| (x - xj) / (xi - xj)).product();
                        acc += self.cauchy_direct(C64::new(xi, y)) * w;
                    }
                    return Ok(acc);
                }
            }
        }
        Ok(self.cauchy_direct(k))
    }

    fn cauchy_direct(&self, k: C64) -> C64 {
        let (x, y) = (k.re, k.im);
        let h = self.step;
        let poly = self.local(x);
        let inside = x >= self.start && x <= self.end();
        // Subtracting the analytic continuation of the local model removes
        // the near-singularity of the kernel when k is close to the grid.
        let c = if !inside {
            C64::new(0.0, 0.0)
        } else if y < 5.0 * h {
            poly.eval(k).0
        } else {
            C64::new(poly.eval(C64::new(x, 0.0)).0.re, 0.0)
        };
        let n = self.values.len();
        let mut acc = C64::new(0.0, 0.0);
        for (i, &l) in self.values.iter().enumerate() {
            let d = C64::new(self.start + h * i as f64 - x, -y);
            let term = if d.norm() < 1e-9 * h { poly.eval(k).1 } else { (l - c) / d };
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            acc += term * w;
        }
        acc *= h;
        // Euler–Maclaurin end corrections for the subtracted constant, whose
        // kernel -c/(s - k) does not decay at the grid ends.
        let (a_end, b_end) = (C64::new(self.start - x, -y), C64::new(self.end() - x, -y));
        let d1 = c * (b_end.powi(-2) - a_end.powi(-2));
        let d3 = c * 6.0 * (b_end.powi(-4) - a_end.powi(-4));
        acc -= d1 * (h * h / 12.0) - d3 * (h.powi(4) / 720.0);
        let log_diff = |s: f64| C64::new(s - x, -y).norm().ln();
        let arg = |s: f64| if y == 0.0 { if s < x { -PI } else { 0.0 } } else { (-y).atan2(s - x) };
        let (hi, lo) = (self.end(), self.start);
        acc += c * C64::new(log_diff(hi) - log_diff(lo), arg(hi) - arg(lo));
        acc += self.tail_right * tail_kernel(k, hi) - self.tail_left * tail_kernel(-k, -lo);
        acc
    }

    /// `log a(k)` for `Im k ≥ 0`.
    pub fn log_outer(&self, k: C64) -> Result<C64> {
        Ok(self.cauchy(k)? / (I * PI))
    }

    /// Continuous `arg a(k)` (zero at infinity) for `Im k ≥ 0`.
    pub fn arg(&self, k: C64) -> Result<f64> {
        Ok(-self.cauchy(k)?.re / PI)
    }
}

/// `a(k) = exp((1/(πi)) ∫ log|a(s)|/(s - k) ds)` for `Im k > 0`.
pub fn outer_extend(table: &LogModTable, k: C64) -> Result<C64> {
    if !(k.im > 0.0) {
        return Err(Error::LowerHalfPlane(k.im));
    }
    Ok(table.log_outer(k)?.exp())
}

/// Principal-value boundary argument `-(1/π) PV ∫ L(s)/(s - ξ) ds`.
pub fn boundary_arg(table: &LogModTable, xi: f64) -> Result<f64> {
    table.arg(C64::new(xi, 0.0))
}

// ---------------------------------------------------------------------------
// Ray tracing

/// An analytic quantity followed down a vertical ray, top point first.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ArgTrace {
    pub path: Vec<C64>,
    pub values: Vec<C64>,
    pub unwrapped_arg: Vec<f64>,
}

impl ArgTrace {
    /// Unwrapped argument at the lowest point.
    pub fn final_arg(&self) -> f64 {
        *self.unwrapped_arg.last().unwrap_or(&0.0)
    }

    pub fn final_value(&self) -> C64 {
        *self.values.last().unwrap_or(&ONE)
    }

    pub fn top_value(&self) -> C64 {
        *self.values.first().unwrap_or(&ONE)
    }

    pub fn min_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn total_variation(&self) -> f64 {
        self.unwrapped_arg.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    pub fn max_step(&self) -> f64 {
        self.unwrapped_arg.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
    }

    /// Unwrapped argument at the traced point with imaginary part `eta`.
    pub fn arg_at(&self, eta: f64) -> Option<f64> {
        self.path.iter().position(|k| k.im == eta).map(|i| self.unwrapped_arg[i])
    }

    /// CSV with columns `eta, re_value, im_value, unwrapped_arg`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["eta", "re_value", "im_value", "unwrapped_arg"])?;
        for ((k, v), a) in self.path.iter().zip(&self.values).zip(&self.unwrapped_arg) {
            out.write_record([fmt17(k.im), fmt17(v.re), fmt17(v.im), fmt17(*a)])?;
        }
        out.flush().map_err(|e| Error::Io { path: "<csv>".into(), source: e })?;
        Ok(())
    }
}

/// A float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaySettings {
    /// Fixed top of the ray; `None` searches upward from 64 by factors of 4.
    pub eta_top: Option<f64>,
    /// Geometric steps stop here; below it the ray is walked in equal steps.
    pub floor: f64,
    pub ratio: f64,
    /// Largest accepted argument change between neighbouring points.
    pub max_jump: f64,
    pub tol: f64,
}

impl Default for RaySettings {
    fn default() -> Self {
        RaySettings { eta_top: None, floor: 1e-3, ratio: 1.5, max_jump: PI / 4.0, tol: 1e-10 }
    }
}

const ANCHOR_RADIUS: f64 = 0.1;
const MODULUS_SLACK: f64 = 1e-6;
const MAX_TOP: f64 = 1e8;

fn anchor_gap(vals: &[C64]) -> f64 {
    vals.iter().map(|v| (v - ONE).norm()).fold(0.0, f64::max)
}

/// Follows every channel of `eval` down the ray `ξ + iη`, from the top
/// anchor to `eta_bottom`, passing exactly through each of `stops`. The
/// top anchor carries its principal argument; below it the argument is
/// continued by adding principal increments, bisecting whenever one
/// exceeds `max_jump`.
pub fn trace_channels<F>(eval: F, xi: f64, eta_bottom: f64, stops: &[f64], settings: &RaySettings) -> Result<Vec<ArgTrace>>
where
    F: Fn(C64) -> Result<Vec<C64>>,
{
    if !xi.is_finite() {
        return Err(Error::NonFinite("ray abscissa"));
    }
    if !(eta_bottom >= 0.0) {
        return Err(Error::LowerHalfPlane(eta_bottom));
    }
    let highest = stops.iter().copied().fold(eta_bottom, f64::max);
    let (top, top_vals) = match settings.eta_top {
        Some(t) => {
            if !(t >= highest) {
                return Err(Error::InvalidParameter(format!("eta_max {t} is below the lowest required point {highest}")));
            }
            let v = eval(C64::new(xi, t))?;
            let gap = anchor_gap(&v);
            if !(gap < ANCHOR_RADIUS) {
                return Err(Error::AnchorNotNearOne(gap));
            }
            (t, v)
        }
        None => {
            let mut t = 64.0f64.max(4.0 * highest);
            loop {
                let v = eval(C64::new(xi, t))?;
                let gap = anchor_gap(&v);
                if gap < ANCHOR_RADIUS {
                    break (t, v);
                }
                if t * 4.0 > MAX_TOP || !gap.is_finite() {
                    return Err(Error::AnchorNotNearOne(gap));
                }
                t *= 4.0;
            }
        }
    };

    let mut schedule = Vec::new();
    let mut eta = top;
    while eta > settings.floor {
        schedule.push(eta);
        eta /= settings.ratio;
    }
    for j in 0..=4 {
        schedule.push(settings.floor * (4 - j) as f64 / 4.0);
    }
    schedule.retain(|&e| e >= eta_bottom);
    schedule.extend(stops.iter().copied().filter(|&e| e >= eta_bottom && e <= top));
    schedule.push(eta_bottom);
    schedule.sort_by(|a, b| b.total_cmp(a));
    schedule.dedup();

    let nch = top_vals.len();
    let mut traces: Vec<ArgTrace> = (0..nch).map(|_| ArgTrace::default()).collect();
    let push = |traces: &mut Vec<ArgTrace>, k: C64, vals: &[C64], args: &[f64]| {
        for c in 0..nch {
            traces[c].path.push(k);
            traces[c].values.push(vals[c]);
            traces[c].unwrapped_arg.push(args[c]);
        }
    };
    let check = |vals: &[C64]| -> Result<()> {
        if vals.len() != nch {
            return Err(Error::Dimension("channel count changed along the ray".into()));
        }
        for v in vals {
            if !v.is_finite() {
                return Err(Error::NonFinite("traced value"));
            }
            if v.norm() < 1.0 - MODULUS_SLACK {
                return Err(Error::ModulusBelowOne(v.norm()));
            }
        }
        Ok(())
    };
    check(&top_vals)?;
    let mut args: Vec<f64> = top_vals.iter().map(|v| v.arg()).collect();
    let mut cur_vals = top_vals;
    let mut cur_eta = top;
    push(&mut traces, C64::new(xi, top), &cur_vals, &args);

    for &target in &schedule[1..] {
        let mut pending = vec![target];
        while let Some(&t) = pending.last() {
            let k = C64::new(xi, t);
            let vals = eval(k)?;
            check(&vals)?;
            let jumps: Vec<f64> = vals.iter().zip(&cur_vals).map(|(v, w)| (v / w).arg()).collect();
            let worst = jumps.iter().fold(0.0f64, |m, j| m.max(j.abs()));
            if worst > settings.max_jump {
                if cur_eta - t < 1e-12 * top.max(1.0) {
                    return Err(Error::ToleranceNotReached { tol: settings.max_jump, achieved: worst });
                }
                pending.push(0.5 * (cur_eta + t));
                continue;
            }
            for (a, j) in args.iter_mut().zip(&jumps) {
                *a += j;
            }
            push(&mut traces, k, &vals, &args);
            cur_vals = vals;
            cur_eta = t;
            pending.pop();
        }
    }
    Ok(traces)
}

/// Values of the traced quantity for each cutoff at one spectral point.
pub fn channel_values(p: &PotentialSpec, cutoffs: &[f64], k: C64, mode: Mode, tol: f64) -> Result<Vec<C64>> {
    match mode {
        Mode::Krein => Ok(integrate_krein_stops(p, k, cutoffs, tol)?.iter().map(|t| t.entries.get(1, 1)).collect()),
        Mode::Dirac => Ok(bridge_cutoffs(p, k, cutoffs, tol)?.iter().map(|b| b.a).collect()),
    }
}

fn check_cutoffs(cutoffs: &[f64], mode: Mode) -> Result<()> {
    if cutoffs.is_empty() {
        return Err(Error::InvalidParameter("no cutoffs".into()));
    }
    if cutoffs.iter().any(|c| c.is_nan()) || cutoffs.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("cutoffs must be nondecreasing".into()));
    }
    if mode == Mode::Krein && cutoffs.iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::InvalidParameter("Krein cutoffs must be finite and nonnegative".into()));
    }
    Ok(())
}

/// Traces `𝔄(x_cutoff, ξ + iη, p)` (or Dirac `a` of the truncation) from
/// `η_max` down to the real axis.
pub fn unwrapped_arg_along_ray(p: &PotentialSpec, x_cutoff: f64, xi: f64, eta_max: Option<f64>, mode: Mode) -> Result<ArgTrace> {
    let settings = RaySettings { eta_top: eta_max, ..RaySettings::default() };
    ray_traces(p, &[x_cutoff], xi, 0.0, &[], mode, &settings).map(|mut t| t.remove(0))
}

/// One trace per cutoff along the ray above `xi`.
pub fn ray_traces(
    p: &PotentialSpec,
    cutoffs: &[f64],
    xi: f64,
    eta_bottom: f64,
    stops: &[f64],
    mode: Mode,
    settings: &RaySettings,
) -> Result<Vec<ArgTrace>> {
    check_cutoffs(cutoffs, mode)?;
    trace_channels(|k| channel_values(p, cutoffs, k, mode, settings.tol), xi, eta_bottom, stops, settings)
}

// ---------------------------------------------------------------------------
// Maximal functions

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalRecord {
    pub xi: f64,
    pub cutoffs: Vec<f64>,
    /// Per cutoff, the recorded argument of largest modulus.
    pub args: Vec<f64>,
    pub stolz_samples: Option<Vec<C64>>,
    pub sup_value: f64,
}

/// Sampling of the Stolz angle `|Re k - ξ| ≤ tan(aperture)·Im k`,
/// `0 < Im k ≤ depth`: `levels` heights `depth·2^{-l}`, each with
/// `per_level` (odd) equally spaced abscissae, plus the vertex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StolzGrid {
    pub aperture: f64,
    pub depth: f64,
    pub levels: usize,
    pub per_level: usize,
}

impl Default for StolzGrid {
    fn default() -> Self {
        StolzGrid { aperture: PI / 4.0, depth: 1.0, levels: 6, per_level: 5 }
    }
}

impl StolzGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.aperture > 0.0 && self.aperture < PI / 2.0) {
            return Err(Error::InvalidParameter(format!("aperture must lie in (0, π/2), got {}", self.aperture)));
        }
        if !(self.depth > 0.0) || !self.depth.is_finite() {
            return Err(Error::InvalidParameter(format!("depth must be positive, got {}", self.depth)));
        }
        if self.levels == 0 || self.per_level.is_multiple_of(2) {
            return Err(Error::InvalidParameter("need at least one level and an odd count per level".into()));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.levels * self.per_level + 1
    }

    /// Sample points as `(offset from ξ, height)`, vertex last.
    pub fn offsets(&self) -> Vec<(f64, f64)> {
        let slope = self.aperture.tan();
        let mut out = Vec::with_capacity(self.n_samples());
        for l in 0..self.levels {
            let eta = self.depth * 0.5f64.powi(l as i32);
            for i in 0..self.per_level {
                let t = if self.per_level == 1 {
                    0.0
                } else {
                    slope * eta * (2.0 * i as f64 / (self.per_level - 1) as f64 - 1.0)
                };
                out.push((t, eta));
            }
        }
        out.push((0.0, 0.0));
        out
    }
}

fn record(xi: f64, cutoffs: &[f64], per_cutoff: Vec<f64>, samples: Option<Vec<C64>>) -> MaximalRecord {
    let sup_value = per_cutoff.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    MaximalRecord { xi, cutoffs: cutoffs.to_vec(), args: per_cutoff, stolz_samples: samples, sup_value }
}

/// `𝔐_w`: largest `|arg|` on the real axis over the cutoffs.
pub fn maximal_weak(p: &PotentialSpec, xi: f64, cutoffs: &[f64], mode: Mode) -> Result<MaximalRecord> {
    let traces = ray_traces(p, cutoffs, xi, 0.0, &[], mode, &RaySettings::default())?;
    Ok(record(xi, cutoffs, traces.iter().map(|t| t.final_arg()).collect(), None))
}

/// `𝔐`: largest `|arg|` over the cutoffs and the Stolz samples. The vertex
/// sample reuses the [`maximal_weak`] trace, so `𝔐 ≥ 𝔐_w` exactly.
pub fn maximal_strong(p: &PotentialSpec, xi: f64, cutoffs: &[f64], stolz: &StolzGrid, mode: Mode) -> Result<MaximalRecord> {
    stolz.validate()?;
    let weak = maximal_weak(p, xi, cutoffs, mode)?;
    let offsets = stolz.offsets();
    // One ray per distinct abscissa; the centre column shares a ray.
    let mut columns: Vec<(f64, Vec<f64>)> = Vec::new();
    for &(t, eta) in offsets.iter().filter(|(_, e)| *e > 0.0) {
        match columns.iter_mut().find(|(c, _)| *c == t) {
            Some((_, etas)) => etas.push(eta),
            None => columns.push((t, vec![eta])),
        }
    }
    let settings = RaySettings::default();
    let best: Vec<Vec<f64>> = columns
        .par_iter()
        .map(|(t, etas)| {
            let bottom = etas.iter().copied().fold(f64::INFINITY, f64::min);
            let traces = ray_traces(p, cutoffs, xi + t, bottom, etas, mode, &settings)?;
            Ok(traces
                .iter()
                .map(|tr| {
                    etas.iter()
                        .filter_map(|e| tr.arg_at(*e))
                        .fold(0.0f64, |m, a| if a.abs() > m.abs() { a } else { m })
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut per_cutoff = weak.args.clone();
    for col in &best {
        for (slot, a) in per_cutoff.iter_mut().zip(col) {
            if a.abs() > slot.abs() {
                *slot = *a;
            }
        }
    }
    let samples = offsets.iter().map(|(t, e)| C64::new(xi + t, *e)).collect();
    Ok(record(xi, cutoffs, per_cutoff, Some(samples)))
}

// ---------------------------------------------------------------------------
// Sum rules

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumRule {
    /// `π‖p‖²`.
    pub lhs: f64,
    /// `∫ log|a|` over the line.
    pub rhs: f64,
    pub residual: f64,
    /// Part of `rhs` from the fitted `C/s²` tails.
    pub tail: f64,
    pub quadrature_error: f64,
}

fn log_modulus(p: &PotentialSpec, s: f64, mode: Mode, tol: f64) -> Result<f64> {
    match mode {
        Mode::Krein => Ok(limits_ab_tol(p, C64::new(s, 0.0), tol)?.a_frak.norm().ln()),
        Mode::Dirac => Ok(transition_tol(p, s, tol)?.a.norm().ln()),
    }
}

pub fn sum_rule(p: &PotentialSpec, mode: Mode) -> Result<SumRule> {
    let half_width = match mode {
        Mode::Krein => 100.0,
        Mode::Dirac => 200.0,
    };
    sum_rule_with(p, mode, half_width, 1e-11)
}

/// Adaptive quadrature of `log|a|` over `[-W, W]` plus `C/s²` tails fitted
/// on `W/2 ≤ |s| ≤ W`.
pub fn sum_rule_with(p: &PotentialSpec, mode: Mode, half_width: f64, tol: f64) -> Result<SumRule> {
    let lhs = PI * p.l2_norm().powi(2);
    if !lhs.is_finite() {
        return Err(Error::NonIntegrable("potential is not square integrable".into()));
    }
    if p.is_zero() {
        return Ok(SumRule { lhs: 0.0, rhs: 0.0, residual: 0.0, tail: 0.0, quadrature_error: 0.0 });
    }
    let w = half_width;
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let f = |s: f64| match log_modulus(p, s, mode, tol) {
        Ok(v) => v,
        Err(e) => {
            failure.lock().unwrap().get_or_insert(e);
            0.0
        }
    };
    let breaks = [-0.1 * w, -1.0, 0.0, 1.0, 0.1 * w];
    let (body, err) = integrate_real_with_breaks(f, -w, w, &breaks, 1e-12, 1e-9);
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let pts: Vec<f64> = (0..32).map(|j| 0.5 * w + 0.5 * w * j as f64 / 31.0).collect();
    let right: Vec<(f64, f64)> = pts.par_iter().map(|&s| Ok((s, log_modulus(p, s, mode, tol)?))).collect::<Result<_>>()?;
    let left: Vec<(f64, f64)> = pts.par_iter().map(|&s| Ok((s, log_modulus(p, -s, mode, tol)?))).collect::<Result<_>>()?;
    let peak = right.iter().chain(&left).map(|p| p.1).fold(0.0f64, f64::max);
    let edge = right.last().unwrap().1.max(left.last().unwrap().1);
    let bulk = body.abs() / w;
    if edge > 1e-2 * bulk.max(peak) && edge > 1e-12 {
        return Err(Error::NonDecaying(edge));
    }
    let tail = (fit_inverse_square(right.into_iter()) + fit_inverse_square(left.into_iter())) / w;
    let rhs = body + tail;
    let residual = (lhs - rhs).abs() / lhs.max(f64::MIN_POSITIVE);
    Ok(SumRule { lhs, rhs, residual, tail, quadrature_error: err })
}

// ---------------------------------------------------------------------------
// The decoupled model

/// Outer-function model of the base coefficient `𝔞(·, A)` from which all
/// `𝔞_ℓ(k) = 𝔞(ν(k - ξ_ℓ))` are read.
#[derive(Clone, Debug)]
pub struct DecoupledModel {
    pub base: PotentialSpec,
    pub table: LogModTable,
}

impl DecoupledModel {
    /// Default table on `[-200, 200]` with step `0.05`. Tables are cached per
    /// base for the life of the process.
    pub fn new(base: &PotentialSpec) -> Result<Self> {
        static CACHE: Mutex<Vec<(PotentialSpec, LogModTable)>> = Mutex::new(Vec::new());
        if let Some((_, t)) = CACHE.lock().unwrap().iter().find(|(b, _)| b == base) {
            return Ok(DecoupledModel { base: base.clone(), table: t.clone() });
        }
        let model = Self::with_table(base, 200.0, 0.05, 1e-11)?;
        CACHE.lock().unwrap().push((base.clone(), model.table.clone()));
        Ok(model)
    }

    pub fn with_table(base: &PotentialSpec, half_width: f64, step: f64, tol: f64) -> Result<Self> {
        build_decoupled_family(base, 1)?;
        let table = LogModTable::krein(base, Some(1.0), half_width, step, tol)?;
        Ok(DecoupledModel { base: base.clone(), table })
    }

    /// `arg 𝔞(z, A)`, continuous from infinity.
    pub fn h(&self, z: C64) -> Result<f64> {
        self.table.arg(z)
    }

    /// `arg 𝔒_j(k) = Σ_{ℓ≤j} arg 𝔞(ν(k - ξ_ℓ))`.
    pub fn arg_profile(&self, nu: usize, j: usize, k: C64) -> Result<f64> {
        check_index(nu, j)?;
        let w = k * nu as f64;
        (0..=j).map(|l| self.h(w - l as f64)).sum()
    }

    /// `H(n/4 + i)` for `n` in `-4m..=4m`, index `n + 4m`.
    pub fn quarter_lattice(&self, m: usize) -> Result<Vec<f64>> {
        let n = 4 * m as i64;
        (-n..=n).into_par_iter().map(|i| self.h(C64::new(i as f64 / 4.0, 1.0))).collect()
    }

    /// `max_j |arg 𝔒_j(ξ + i/ν)|` over `j ∈ [ν/2, ν-1]` for `ξ` on the lattice
    /// `i/(4ν)` inside the window. Returns `(ξ, j, arg)` at each `ξ`.
    pub fn growth_scan(&self, nu: usize, window: (f64, f64), lattice: &[f64]) -> Result<Vec<(f64, usize, f64)>> {
        let m = (lattice.len() - 1) / 8;
        if nu > m {
            return Err(Error::Dimension(format!("lattice covers ν ≤ {m}, asked for {nu}")));
        }
        let q = 4 * nu as i64;
        let lo = (window.0 * q as f64).ceil() as i64;
        let hi = (window.1 * q as f64).floor() as i64;
        let centre = 4 * m as i64;
        let jmin = nu / 2;
        Ok((lo..=hi)
            .map(|n| {
                let mut acc = 0.0;
                let mut best = (jmin, 0.0f64);
                for l in 0..nu {
                    acc += lattice[(centre + n - 4 * l as i64) as usize];
                    if l >= jmin && acc.abs() > best.1.abs() {
                        best = (l, acc);
                    }
                }
                (n as f64 / q as f64, best.0, best.1)
            })
            .collect())
    }
}

fn check_index(nu: usize, j: usize) -> Result<()> {
    if nu == 0 || j >= nu {
        return Err(Error::InvalidParameter(format!("need 0 ≤ j < ν, got j = {j}, ν = {nu}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteCheck {
    pub outer: f64,
    pub ray: f64,
    pub diff: f64,
}

/// `arg 𝔒_j(k)` by both routes: the outer model of the base coefficient and
/// ray traces of each modulated, dilated bump `A_ℓ`.
pub fn decoupled_routes(model: &DecoupledModel, nu: usize, j: usize, k: C64) -> Result<RouteCheck> {
    check_index(nu, j)?;
    if k.im < 0.0 {
        return Err(Error::LowerHalfPlane(k.im));
    }
    let outer = model.arg_profile(nu, j, k)?;
    let family = build_decoupled_family(&model.base, nu)?;
    let settings = RaySettings { tol: 1e-11, ..RaySettings::default() };
    let x_end = nu as f64;
    let ray: f64 = family[..=j]
        .par_iter()
        .map(|a| {
            let t = trace_channels(
                |z| Ok(vec![integrate_krein(a, z, x_end, settings.tol)?.entries.get(1, 1)]),
                k.re,
                k.im,
                &[],
                &settings,
            )?;
            Ok(t[0].final_arg())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .sum();
    let diff = (outer - ray).abs();
    Ok(RouteCheck { outer, ray, diff })
}

/// `arg 𝔒_j(k)`; fails when the two routes differ by more than 1e-3.
pub fn decoupled_arg_profile(base: &PotentialSpec, nu: usize, j: usize, k: C64) -> Result<f64> {
    let model = DecoupledModel::new(base)?;
    let r = decoupled_routes(&model, nu, j, k)?;
    if r.diff > 1e-3 {
        return Err(Error::RouteDisagreement { diff: r.diff, limit: 1e-3 });
    }
    Ok(r.outer)
}

// ---------------------------------------------------------------------------
// The kernel estimate behind the logarithmic growth

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyuRow {
    pub k: C64,
    /// `|∫ Σ_{p≤j} log|𝔞(s - p)| Re(1/(s - νk)) ds|`.
    pub integral: f64,
    /// `|log|k - ξ_j||`.
    pub log_distance: f64,
    /// `C₁|log|k - ξ_j|| - C₂`.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyuReport {
    pub nu: usize,
    pub j: usize,
    pub c1: f64,
    pub c2: f64,
    pub correlation: f64,
    pub rows: Vec<HyuRow>,
    /// Least-squares residuals of `integral ≈ C₁·log_distance - C`.
    pub residuals: Vec<f64>,
    pub holds: bool,
}

/// Evaluates the kernel integral on `k_grid`, fits `C₁` by least squares
/// and takes the smallest `C₂` making the inequality hold on the grid.
pub fn hyu_check(model: &DecoupledModel, nu: usize, j: usize, k_grid: &[C64]) -> Result<HyuReport> {
    check_index(nu, j)?;
    let xj = j as f64 / nu as f64;
    for k in k_grid {
        if !(k.im >= 0.0 && k.im <= 1.0) || !(k.re >= xj + 0.5 / nu as f64 && k.re <= 4.0) {
            return Err(Error::InvalidParameter(format!("k = {k} outside the admissible region")));
        }
    }
    if k_grid.len() < 3 {
        return Err(Error::FitDegenerate("need at least three grid points".into()));
    }
    let values: Vec<(f64, f64)> = k_grid
        .par_iter()
        .map(|&k| {
            let w = k * nu as f64;
            let s: f64 = (0..=j).map(|p| model.h(w - p as f64)).sum::<Result<f64>>()?;
            Ok(((PI * s).abs(), (k - xj).norm().ln().abs()))
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = values.iter().map(|v| v.1).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.0).collect();
    let fit = linear_fit(&xs, &ys)?;
    let c1 = fit.slope;
    let c2 = xs.iter().zip(&ys).map(|(x, y)| c1 * x - y).fold(f64::NEG_INFINITY, f64::max);
    let rows: Vec<HyuRow> = k_grid
        .iter()
        .zip(&values)
        .map(|(&k, &(integral, log_distance))| HyuRow { k, integral, log_distance, bound: c1 * log_distance - c2 })
        .collect();
    let holds = c1 > 0.0 && rows.iter().all(|r| r.integral >= r.bound - 1e-12 * r.integral.abs().max(1.0));
    Ok(HyuReport { nu, j, c1, c2, correlation: fit.correlation, rows, residuals: fit.residuals, holds })
}

// ---------------------------------------------------------------------------

/// Least-squares line with Pearson correlation and residuals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub correlation: f64,
    pub residuals: Vec<f64>,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::FitDegenerate(format!("{} abscissae for {} ordinates", xs.len(), ys.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::FitDegenerate("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let correlation = if syy > 0.0 { sxy / (sxx * syy).sqrt() } else { 1.0 };
    let residuals = xs.iter().zip(ys).map(|(x, y)| y - slope * x - intercept).collect();
    Ok(LinearFit { slope, intercept, correlation, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_kernel_branches_agree() {
        for k in [C64::new(30.0, 2.0), C64::new(-40.0, 0.5), C64::new(49.0, 0.0)] {
            let s = 100.0;
            let series = {
                let mut sum = C64::new(0.0, 0.0);
                let mut pow = C64::new(1.0 / (s * s), 0.0);
                for n in 0..400 {
                    sum += pow / (n as f64 + 2.0);
                    pow = pow * k / s;
                }
                sum
            };
            let closed = (C64::new(s.ln(), 0.0) - (C64::new(s, 0.0) - k).ln()) / (k * k) - 1.0 / (k * s);
            assert!((series - closed).norm() < 1e-15, "{k}");
        }
    }

    #[test]
    fn local_poly_reproduces_quintics() {
        let f = |s: f64| 0.3 - s + 0.2 * s.powi(3) - 0.01 * s.powi(5);
        let vals: Vec<f64> = (0..40).map(|i| f(-2.0 + 0.1 * i as f64)).collect();
        let t = LogModTable { start: -2.0, step: 0.1, values: vals, tail_left: 0.0, tail_right: 0.0 };
        let p = t.local(0.33);
        let k = C64::new(0.33, 0.07);
        let exact = C64::new(0.3, 0.0) - k + k * k * k * 0.2 - k.powi(5) * 0.01;
        let d = -ONE + k * k * 0.6 - k.powi(4) * 0.05;
        let (v, dv) = p.eval(k);
        assert!((v - exact).norm() < 1e-12);
        assert!((dv - d).norm() < 1e-11);
    }

    #[test]
    fn lorentzian_outer_function() {
        // Gaussian boundary data against adaptive quadrature of the kernel.
        let l = |s: f64| (-s * s).exp();
        let t = LogModTable::from_fn(|s| Ok(l(s)), 20.0, 0.05).unwrap();
        for k in [C64::new(0.3, 0.5), C64::new(-1.0, 0.01), C64::new(2.0, 3.0), C64::new(0.7, 0.0)] {
            let direct = if k.im > 0.0 {
                let f = |s: f64| l(s) * (s - k.re) / ((s - k.re).powi(2) + k.im * k.im);
                integrate_real_with_breaks(f, -30.0, 30.0, &[k.re], 1e-14, 1e-13).0
            } else {
                // Subtracted PV.
                let f = |s: f64| if s == k.re { -2.0 * s * l(s) } else { (l(s) - l(k.re)) / (s - k.re) };
                integrate_real_with_breaks(f, -30.0, 30.0, &[k.re], 1e-14, 1e-13).0
                    + l(k.re) * ((30.0 - k.re) / (30.0 + k.re)).ln()
            };
            // On and within a few steps of the axis the pole of the subtracted
            // integrand sees the local interpolant's O(h⁶) error.
            let limit = if k.im < 5.0 * t.step { 5e-8 } else { 1e-9 };
            let got = t.cauchy(k).unwrap().re;
            assert!((got - direct).abs() < limit, "{k}: {got} vs {direct}");
        }
    }

    #[test]
    fn zero_table_gives_one() {
        let t = LogModTable::from_fn(|_| Ok(0.0), 10.0, 0.1).unwrap();
        assert_eq!(outer_extend(&t, C64::new(0.5, 1.0)).unwrap(), ONE);
        assert!(outer_extend(&t, C64::new(0.5, 0.0)).is_err());
    }

    #[test]
    fn non_decaying_table_is_rejected() {
        assert!(matches!(LogModTable::from_fn(|_| Ok(1.0), 10.0, 0.1), Err(Error::NonDecaying(_))));
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept + 1.0).abs() < 1e-14);
        assert!((f.correlation - 1.0).abs() < 1e-14);
    }

    #[test]
    fn stolz_offsets_stay_in_the_angle() {
        let g = StolzGrid::default();
        let o = g.offsets();
        assert_eq!(o.len(), g.n_samples());
        for (t, e) in o {
            assert!(t.abs() <= e * g.aperture.tan() + 1e-15);
        }
    }
}
