//! The counterexample constructions at desk scale: piled decoupled bumps,
//! well-separated bumps, Dirac samples and their sparse assembly.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dirac::{glue_coeffs, transition_tol};
use crate::error::{Error, Result};
use crate::krein::{group_prefixes, integrate_krein, integrate_krein_stops, Transfer2};
use crate::linalg::{C64, ONE, ZERO};
use crate::outer::{decoupled_routes, fmt17, linear_fit, trace_channels, DecoupledModel, LinearFit, LogModTable, RaySettings};
use crate::phase::phase_error_bound;
use crate::potential::{assemble_sparse, build_decoupled_family, build_sample, build_separated, PotentialSpec};

/// One measured number with the tolerance it is known to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub nu: usize,
    pub delta: f64,
    /// Bump, cutoff or sample index, depending on the construction.
    pub index: usize,
    pub xi: f64,
    pub eta: f64,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub construction: String,
    pub parameters: BTreeMap<String, Value>,
    pub measurements: Vec<Measurement>,
    /// Description of the fitted model, e.g. `alpha*log(nu)+beta`.
    pub fit_model: Option<String>,
    pub fit: Option<LinearFit>,
    /// Constants fitted from the measurements.
    pub fitted: BTreeMap<String, f64>,
    /// Error budgets: quadrature, route, gap-phase and envelope terms.
    pub budgets: BTreeMap<String, f64>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl ProbeReport {
    fn new(construction: &str) -> Self {
        ProbeReport { construction: construction.into(), ..Default::default() }
    }

    fn param(&mut self, key: &str, v: Value) {
        self.parameters.insert(key.into(), v);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The measurements as CSV.
    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["nu", "delta", "index", "xi", "eta", "value", "tolerance"])?;
        for m in &self.measurements {
            out.write_record([
                m.nu.to_string(),
                fmt17(m.delta),
                m.index.to_string(),
                fmt17(m.xi),
                fmt17(m.eta),
                fmt17(m.value),
                fmt17(m.tolerance),
            ])?;
        }
        out.flush().map_err(|e| Error::Io { path: "<csv>".into(), source: e })?;
        Ok(())
    }

    /// Largest measured value.
    pub fn max_value(&self) -> f64 {
        self.measurements.iter().map(|m| m.value).fold(0.0, f64::max)
    }
}

fn check_window(w: (f64, f64)) -> Result<()> {
    if !(0.5 <= w.0 && w.0 <= w.1 && w.1 <= 1.0) {
        return Err(Error::InvalidParameter(format!("ξ window [{}, {}] must lie in [1/2, 1]", w.0, w.1)));
    }
    Ok(())
}

fn check_increasing(nus: &[usize]) -> Result<()> {
    if nus.is_empty() || nus[0] == 0 || nus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("ν list must be nonempty, positive and increasing".into()));
    }
    Ok(())
}

fn log_fit(report: &mut ProbeReport, model: &str, xs: &[f64], ys: &[f64]) -> Result<()> {
    let distinct = xs.windows(2).any(|w| w[0] != w[1]);
    if xs.len() >= 2 && distinct {
        let fit = linear_fit(xs, ys)?;
        report.fitted.insert("alpha".into(), fit.slope);
        report.fitted.insert("beta".into(), fit.intercept);
        report.fit_model = Some(model.into());
        report.fit = Some(fit);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Decoupled bumps

/// For each `ν`, the largest `|arg 𝔒_j(ξ + i/ν)|` over `j ∈ [ν/2, ν-1]` and
/// `ξ` on the lattice `i/(4ν)` in the window, with the outer-model value at
/// the maximizer confirmed by ray traces of the individual bumps. Fits
/// `α log ν + β`.
pub fn run_decoupled_growth(base: &PotentialSpec, nu_list: &[usize], window: (f64, f64)) -> Result<ProbeReport> {
    check_increasing(nu_list)?;
    check_window(window)?;
    let model = DecoupledModel::new(base)?;
    let lattice = model.quarter_lattice(*nu_list.last().unwrap())?;
    let mut report = ProbeReport::new("decoupled_growth");
    report.param("nu_list", json!(nu_list));
    report.param("window", json!([window.0, window.1]));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut worst_route: f64 = 0.0;
    for &nu in nu_list {
        let scan = model.growth_scan(nu, window, &lattice)?;
        let Some(&(xi, j, arg)) = scan.iter().max_by(|a, b| a.2.abs().total_cmp(&b.2.abs())) else {
            return Err(Error::InvalidParameter(format!("window holds no lattice point for ν = {nu}")));
        };
        let eta = 1.0 / nu as f64;
        let route = decoupled_routes(&model, nu, j, C64::new(xi, eta))?;
        if route.diff > 1e-3 {
            return Err(Error::RouteDisagreement { diff: route.diff, limit: 1e-3 });
        }
        worst_route = worst_route.max(route.diff);
        report.diagnostics.insert(format!("min_over_xi_nu{nu}"), scan.iter().map(|s| s.2.abs()).fold(f64::INFINITY, f64::min));
        report.measurements.push(Measurement {
            nu,
            delta: 1.0,
            index: j,
            xi,
            eta,
            value: arg.abs(),
            tolerance: route.diff.max(1e-9),
        });
        xs.push((nu as f64).ln());
        ys.push(arg.abs());
    }
    report.budgets.insert("route_difference".into(), worst_route);
    log_fit(&mut report, "alpha*log(nu)+beta", &xs, &ys)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Separated bumps

fn pieces_at(family: &[PotentialSpec], nu: usize, k: C64, tol: f64) -> Result<Vec<Transfer2>> {
    family.iter().map(|a| integrate_krein(a, k, nu as f64, tol)).collect()
}

/// Largest `|arg 𝔄((ν + R)ℓ, ξ + i/ν, Q_{ν,R})|` over `ℓ = 1..ν`, each
/// argument continued from the top of the ray. Returns `(ℓ, arg)`.
pub fn separated_lower_bound(family: &[PotentialSpec], r: f64, xi: f64, tol: f64) -> Result<(usize, f64)> {
    let nu = family.len();
    let eta = 1.0 / nu as f64;
    let eval = |k: C64| -> Result<Vec<C64>> {
        let pieces = pieces_at(family, nu, k, tol)?;
        Ok(group_prefixes(&pieces, r, k)?.iter().map(|t| t.entries.get(1, 1)).collect())
    };
    let settings = RaySettings { tol, ..RaySettings::default() };
    let traces = trace_channels(eval, xi, eta, &[], &settings)?;
    Ok(traces
        .iter()
        .enumerate()
        .map(|(l, t)| (l + 1, t.final_arg()))
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .unwrap())
}

/// Builds `Q_{ν,R}`, checks the group product against direct integration
/// and against the decoupled product `Π 𝔞_j` at `Im k = 1/2` (fitting `C₁`
/// in `|𝔄 - Π𝔞_j| ≤ e^{-R Im k} C₁^ℓ`), then records the lower bound for
/// `𝔐(ξ, Q_{ν,R})` at `k = ξ + i/ν` for `n_xi` points of the window.
pub fn run_separated_growth(base: &PotentialSpec, nu: usize, r: f64, window: (f64, f64), n_xi: usize) -> Result<ProbeReport> {
    run_separated_growth_tol(base, nu, r, window, n_xi, 1e-10)
}

pub fn run_separated_growth_tol(
    base: &PotentialSpec,
    nu: usize,
    r: f64,
    window: (f64, f64),
    n_xi: usize,
    tol: f64,
) -> Result<ProbeReport> {
    check_window(window)?;
    if n_xi == 0 || !(tol > 0.0) {
        return Err(Error::InvalidParameter("need at least one ξ sample and a positive tolerance".into()));
    }
    let q = build_separated(base, nu, r)?;
    let family = build_decoupled_family(base, nu)?;
    let mut report = ProbeReport::new("separated_growth");
    report.param("nu", json!(nu));
    report.param("R", json!(r));
    report.param("window", json!([window.0, window.1]));

    // Keep e^{-R Im k} well above the integration noise so the fit sees
    // the interaction and not the tolerance floor.
    let k0 = C64::new(0.5 * (window.0 + window.1), (8.0 / r.max(1.0)).min(0.5));
    let pieces = pieces_at(&family, nu, k0, tol)?;
    let product = group_prefixes(&pieces, r, k0)?;
    let stops: Vec<f64> = (1..=nu).map(|l| (nu as f64 + r) * l as f64).collect();
    let direct = integrate_krein_stops(&q, k0, &stops, tol)?;
    let mut group_gap: f64 = 0.0;
    let mut max_dev: f64 = 0.0;
    let mut log_c1: f64 = 0.0;
    let mut decoupled = ONE;
    for (l, (p, d)) in product.iter().zip(&direct).enumerate() {
        group_gap = group_gap.max((p.entries.get(1, 1) - d.entries.get(1, 1)).norm());
        decoupled *= pieces[l].entries.get(1, 1);
        let dev = (d.entries.get(1, 1) - decoupled).norm();
        max_dev = max_dev.max(dev);
        if dev > 1e3 * tol {
            log_c1 = log_c1.max((dev.ln() + r * k0.im) / (l + 1) as f64);
        }
    }
    let c1 = log_c1.exp();
    report.diagnostics.insert("max_decoupling_deviation".into(), max_dev);
    report.budgets.insert("group_vs_direct".into(), group_gap);
    report.fitted.insert("c1".into(), c1);
    report.diagnostics.insert("envelope_im_k".into(), k0.im);

    let eta = 1.0 / nu as f64;
    let envelope = (-r * eta + nu as f64 * log_c1).exp();
    let xis: Vec<f64> = (0..n_xi)
        .map(|i| if n_xi == 1 { window.0 } else { window.0 + (window.1 - window.0) * i as f64 / (n_xi - 1) as f64 })
        .collect();
    let bounds: Vec<(usize, f64)> = xis.par_iter().map(|&xi| separated_lower_bound(&family, r, xi, tol)).collect::<Result<_>>()?;
    for (&xi, &(l, arg)) in xis.iter().zip(&bounds) {
        report.measurements.push(Measurement {
            nu,
            delta: 1.0,
            index: l,
            xi,
            eta,
            value: arg.abs(),
            tolerance: envelope + 1e-8,
        });
    }
    report.budgets.insert("decoupling_envelope".into(), envelope);
    Ok(report)
}

// ---------------------------------------------------------------------------
// Dirac samples

/// Options shared by the Dirac sample experiments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleOptions {
    /// The template is `base` dilated by `1/template_scale`, which narrows
    /// each bump's frequency profile to about one lattice spacing.
    pub template_scale: f64,
    /// Bump spacing as a multiple of the bump diameter.
    pub spacing_factor: f64,
    /// Coefficients are integrated directly while the base frequency stays
    /// below this; beyond it `a` comes from the outer function and `b = 0`.
    pub direct_limit: f64,
    pub tol: f64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions { template_scale: 32.0, spacing_factor: 2.0, direct_limit: 100.0, tol: 1e-11 }
    }
}

/// Coefficients of `δ·base` at base frequency `ζ`, memoized on a rational
/// lattice `ζ = W·n/den`.
struct BumpCoefficients {
    base: PotentialSpec,
    table: LogModTable,
    scale: f64,
    den: f64,
    limit: f64,
    tol: f64,
    memo: HashMap<i64, (C64, C64, f64)>,
    consistency: f64,
}

impl BumpCoefficients {
    fn new(base: &PotentialSpec, delta: f64, den: f64, opts: &SampleOptions) -> Result<Self> {
        let scaled = base.scaled(delta);
        let table = LogModTable::dirac(&scaled, 200.0, 0.05, opts.tol)?;
        let mut me = BumpCoefficients {
            base: scaled,
            table,
            scale: opts.template_scale,
            den,
            limit: opts.direct_limit,
            tol: opts.tol,
            memo: HashMap::new(),
            consistency: 0.0,
        };
        // The outer and direct values must meet where the rule switches.
        let z = me.limit;
        let direct = transition_tol(&me.base, z, me.tol)?.a;
        let outer = me.table.log_outer(C64::new(z, 0.0))?.exp();
        me.consistency = (direct - outer).norm();
        Ok(me)
    }

    fn ensure(&mut self, keys: &[i64]) -> Result<()> {
        let mut missing: Vec<i64> = keys.iter().copied().filter(|n| !self.memo.contains_key(n)).collect();
        missing.sort_unstable();
        missing.dedup();
        let this = &*self;
        let fresh: Vec<(i64, (C64, C64, f64))> = missing
            .par_iter()
            .map(|&n| {
                let z = this.scale * n as f64 / this.den;
                let theta = this.table.arg(C64::new(z, 0.0))?;
                let (a, b) = if z.abs() <= this.limit {
                    let t = transition_tol(&this.base, z, this.tol)?;
                    (t.a, t.b)
                } else {
                    (this.table.log_outer(C64::new(z, 0.0))?.exp(), ZERO)
                };
                Ok((n, (a, b, theta)))
            })
            .collect::<Result<_>>()?;
        self.memo.extend(fresh);
        Ok(())
    }

    fn get(&self, n: i64) -> (C64, C64, f64) {
        self.memo[&n]
    }
}

/// Geometry of one sample: `ν` bumps of diameter `diameter` every `rho`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleGeometry {
    pub nu: usize,
    pub delta: f64,
    pub rho: f64,
    pub diameter: f64,
}

impl SampleGeometry {
    fn new(base: &PotentialSpec, nu: usize, delta: f64, opts: &SampleOptions) -> Result<Self> {
        let (lo, hi) = base.support().ok_or_else(|| Error::InvalidParameter("base potential is zero".into()))?;
        if !base.is_compact() || lo < 0.0 {
            return Err(Error::InvalidParameter("sample base must be compactly supported in [0, ∞)".into()));
        }
        let diameter = opts.template_scale * nu as f64 * hi;
        Ok(SampleGeometry { nu, delta, rho: opts.spacing_factor * diameter, diameter })
    }

    /// Extent of the full sample `Q_{ν,ν-1}`.
    pub fn length(&self) -> f64 {
        self.rho * (self.nu - 1) as f64 + self.diameter
    }
}

/// Per-lattice-point state of a chain of glued bumps.
#[derive(Clone, Copy)]
struct Chain {
    a: C64,
    b: C64,
    theta: f64,
    product: C64,
    phase_error: f64,
}

impl Chain {
    fn start() -> Self {
        Chain { a: ONE, b: ZERO, theta: 0.0, product: ONE, phase_error: 0.0 }
    }

    fn push(&mut self, c: (C64, C64, f64), offset: f64, xi: f64) {
        let (a, b) = glue_coeffs((self.a, self.b), (c.0, c.1), offset, xi);
        self.a = a;
        self.b = b;
        self.theta += c.2;
        self.product *= c.0;
        self.phase_error += phase_error_bound(xi, offset) * (c.1.norm() + 1e-300);
    }

    /// Continuous `arg a`: the outer arguments of the bumps plus the
    /// principal argument of the interaction factor. Returns the argument
    /// and `|a/Πa_j - 1|`.
    fn arg(&self) -> (f64, f64) {
        let ratio = self.a / self.product;
        (self.theta + ratio.arg(), (ratio - ONE).norm())
    }
}

fn xi_lattice(window: (f64, f64), den: f64) -> Vec<f64> {
    let lo = (window.0 * den).ceil() as i64;
    let hi = (window.1 * den).floor() as i64;
    (lo..=hi).map(|i| i as f64 / den).collect()
}

/// Key of `u = ν ξ - j` on the lattice `1/den` when `ξ = i/den`.
fn key(nu: usize, i: i64, j: usize, den: i64) -> i64 {
    nu as i64 * i - den * j as i64
}

#[derive(Clone, Copy)]
struct StageStats {
    max_a: f64,
    min_a: f64,
    max_b: f64,
    unimodularity: f64,
    ratio: f64,
    phase: f64,
}

impl StageStats {
    fn new() -> Self {
        StageStats { max_a: 0.0, min_a: f64::INFINITY, max_b: 0.0, unimodularity: 0.0, ratio: 0.0, phase: 0.0 }
    }

    fn see(&mut self, c: &Chain, ratio: f64) {
        self.max_a = self.max_a.max(c.a.norm());
        self.min_a = self.min_a.min(c.a.norm());
        self.max_b = self.max_b.max(c.b.norm());
        self.unimodularity = self.unimodularity.max((c.a.norm_sqr() - c.b.norm_sqr() - 1.0).abs());
        self.ratio = self.ratio.max(ratio);
        self.phase = self.phase.max(c.phase_error);
    }

    fn merge(mut self, o: StageStats) -> Self {
        self.max_a = self.max_a.max(o.max_a);
        self.min_a = self.min_a.min(o.min_a);
        self.max_b = self.max_b.max(o.max_b);
        self.unimodularity = self.unimodularity.max(o.unimodularity);
        self.ratio = self.ratio.max(o.ratio);
        self.phase = self.phase.max(o.phase);
        self
    }

    fn check(&self) -> Result<()> {
        if self.ratio >= 0.5 {
            return Err(Error::RouteDisagreement { diff: self.ratio, limit: 0.5 });
        }
        if self.phase > 1e-6 {
            return Err(Error::PhaseBudget(self.phase));
        }
        if self.min_a < 1.0 - 1e-9 {
            return Err(Error::ModulusBelowOne(self.min_a));
        }
        Ok(())
    }

    fn record(&self, report: &mut ProbeReport, prefix: &str) {
        report.diagnostics.insert(format!("{prefix}max_abs_a"), self.max_a);
        report.diagnostics.insert(format!("{prefix}min_abs_a"), self.min_a);
        report.diagnostics.insert(format!("{prefix}max_abs_b"), self.max_b);
        report.diagnostics.insert(format!("{prefix}unimodularity_defect"), self.unimodularity);
        report.diagnostics.insert(format!("{prefix}interaction_sup"), self.ratio);
        report.budgets.insert(format!("{prefix}gap_phase"), self.phase);
    }
}

/// Builds `Q_{ν,m,ρ,δ}` from the dilated template, computes `a(ξ)` on the
/// `ξ`-lattice `i/(4ν)` by chained exact gluing, and records
/// `max_ξ |arg a(ξ, Q_{ν,m})|` for each `m ∈ [⌈ν/2⌉, ν-1]`. The fitted
/// constant is `α = max arg / (δ² log ν)`.
pub fn run_dirac_sample(base: &PotentialSpec, nu: usize, delta: f64, window: (f64, f64), opts: &SampleOptions) -> Result<ProbeReport> {
    check_window(window)?;
    if nu < 2 {
        return Err(Error::InvalidParameter("a sample needs ν ≥ 2".into()));
    }
    let geo = SampleGeometry::new(base, nu, delta, opts)?;
    let template = base.dilate(1.0 / opts.template_scale)?;
    // Validates δ, the spacing and the assembly.
    let sample = build_sample(&template, nu, nu - 1, geo.rho, delta)?;
    let mut report = ProbeReport::new("dirac_sample");
    report.param("nu", json!(nu));
    report.param("delta", json!(delta));
    report.param("rho", json!(geo.rho));
    report.param("window", json!([window.0, window.1]));
    report.param("options", serde_json::to_value(opts)?);
    report.diagnostics.insert("l2_norm".into(), sample.l2_norm());
    let m_lo = nu.div_ceil(2);
    let den = 4 * nu as i64;
    let xis = xi_lattice(window, den as f64);
    if delta == 0.0 {
        for m in m_lo..nu {
            report.measurements.push(Measurement { nu, delta, index: m, xi: window.0, eta: 0.0, value: 0.0, tolerance: 0.0 });
        }
        return Ok(report);
    }
    let mut coeffs = BumpCoefficients::new(base, delta, den as f64, opts)?;
    let keys: Vec<i64> = xis
        .iter()
        .flat_map(|&xi| {
            let i = (xi * den as f64).round() as i64;
            (0..nu).map(move |j| key(nu, i, j, den))
        })
        .collect();
    coeffs.ensure(&keys)?;
    let coeffs = &coeffs;
    let per_xi: Vec<(Vec<f64>, StageStats)> = xis
        .par_iter()
        .map(|&xi| {
            let i = (xi * den as f64).round() as i64;
            let mut chain = Chain::start();
            let mut stats = StageStats::new();
            let mut args = Vec::with_capacity(nu);
            for j in 0..nu {
                chain.push(coeffs.get(key(nu, i, j, den)), geo.rho * j as f64, xi);
                let (arg, ratio) = chain.arg();
                stats.see(&chain, ratio);
                args.push(arg);
            }
            (args, stats)
        })
        .collect();
    let stats = per_xi.iter().fold(StageStats::new(), |s, (_, o)| s.merge(*o));
    stats.check()?;
    stats.record(&mut report, "");
    report.budgets.insert("outer_direct_switch".into(), coeffs.consistency);
    for m in m_lo..nu {
        let (xi, arg) = xis
            .iter()
            .zip(&per_xi)
            .map(|(&xi, (args, _))| (xi, args[m]))
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        report.measurements.push(Measurement {
            nu,
            delta,
            index: m,
            xi,
            eta: 0.0,
            value: arg.abs(),
            tolerance: stats.phase + 1e-8,
        });
    }
    let max_arg = report.max_value();
    report.fitted.insert("alpha".into(), max_arg / (delta * delta * (nu as f64).ln()));
    report.fitted.insert("c_modulus".into(), (stats.max_a - 1.0) / (delta * delta));
    report.fitted.insert("c_b".into(), stats.max_b / delta);
    report.fit_model = Some("max_arg = alpha*delta^2*log(nu)".into());
    Ok(report)
}

/// For each `ξ = i/(4ν)` in `is`, the coefficients `(a, b)` of
/// `Q_{ν,j,ρ,δ}` for `j = 0..=m`, by the same glued chain that
/// [`run_dirac_sample`] uses, with the sample geometry from `opts`.
pub fn sample_chain(
    base: &PotentialSpec,
    nu: usize,
    m: usize,
    delta: f64,
    is: &[i64],
    opts: &SampleOptions,
) -> Result<Vec<Vec<(C64, C64)>>> {
    if m >= nu {
        return Err(Error::InvalidParameter(format!("m = {m} must be below ν = {nu}")));
    }
    let geo = SampleGeometry::new(base, nu, delta, opts)?;
    if delta == 0.0 {
        return Ok(vec![vec![(ONE, ZERO); m + 1]; is.len()]);
    }
    let den = 4 * nu as i64;
    let mut coeffs = BumpCoefficients::new(base, delta, den as f64, opts)?;
    let keys: Vec<i64> = is.iter().flat_map(|&i| (0..=m).map(move |j| key(nu, i, j, den))).collect();
    coeffs.ensure(&keys)?;
    Ok(is
        .iter()
        .map(|&i| {
            let xi = i as f64 / den as f64;
            let mut chain = Chain::start();
            (0..=m)
                .map(|j| {
                    chain.push(coeffs.get(key(nu, i, j, den)), geo.rho * j as f64, xi);
                    (chain.a, chain.b)
                })
                .collect()
        })
        .collect())
}

/// The sample potential with the geometry [`run_dirac_sample`] uses.
pub fn sample_potential(base: &PotentialSpec, nu: usize, m: usize, delta: f64, opts: &SampleOptions) -> Result<PotentialSpec> {
    let geo = SampleGeometry::new(base, nu, delta, opts)?;
    build_sample(&base.dilate(1.0 / opts.template_scale)?, nu, m, geo.rho, delta)
}

/// `max arg` over `δ` at fixed `ν` and the log-log slope against `δ`.
pub fn dirac_delta_scaling(base: &PotentialSpec, nu: usize, deltas: &[f64], window: (f64, f64), opts: &SampleOptions) -> Result<ProbeReport> {
    let mut report = ProbeReport::new("dirac_delta_scaling");
    report.param("nu", json!(nu));
    report.param("deltas", json!(deltas));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &d in deltas {
        let r = run_dirac_sample(base, nu, d, window, opts)?;
        let best = r.measurements.iter().max_by(|a, b| a.value.total_cmp(&b.value)).cloned().unwrap();
        xs.push(d.ln());
        ys.push(best.value.ln());
        report.measurements.push(best);
        report.diagnostics.insert(format!("alpha_delta{d}"), r.fitted["alpha"]);
    }
    log_fit(&mut report, "log(max_arg) = slope*log(delta)+intercept", &xs, &ys)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Sparse assembly

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssemblySchedule {
    /// `(ν_n, δ_n)` per sample.
    pub samples: Vec<(usize, f64)>,
    /// Gap after each sample as a multiple of the running support diameter.
    pub gap_factor: f64,
}

impl Default for AssemblySchedule {
    fn default() -> Self {
        AssemblySchedule { samples: vec![(16, 0.3), (64, 0.5), (256, 0.8)], gap_factor: 10.0 }
    }
}

/// Assembles the samples with exact gaps and, on a common `ξ`-lattice in
/// the window, follows `arg a(ξ, q·χ_{(-∞, cutoff]})` across every bump.
/// For sample `n` the oscillation is `max_{ξ,r} |arg(n, r) - arg(n, 0)|`;
/// it is compared with `c·δ_n² log ν_n`.
pub fn assemble_and_probe(
    base: &PotentialSpec,
    schedule: &AssemblySchedule,
    window: (f64, f64),
    c: f64,
    opts: &SampleOptions,
) -> Result<ProbeReport> {
    check_window(window)?;
    if schedule.samples.is_empty() || schedule.samples.len() > 4 {
        return Err(Error::InvalidParameter("between one and four samples at desk scale".into()));
    }
    if !(schedule.gap_factor >= 1.0) {
        return Err(Error::InvalidParameter(format!("gap factor must be at least 1, got {}", schedule.gap_factor)));
    }
    let geos: Vec<SampleGeometry> =
        schedule.samples.iter().map(|&(nu, d)| SampleGeometry::new(base, nu, d, opts)).collect::<Result<_>>()?;
    let mut offsets = Vec::with_capacity(geos.len());
    let mut end: f64 = 0.0;
    for (n, g) in geos.iter().enumerate() {
        let o = if n == 0 { 0.0 } else { end + schedule.gap_factor * end };
        offsets.push(o);
        end = o + g.length();
    }
    let template = base.dilate(1.0 / opts.template_scale)?;
    let samples: Vec<PotentialSpec> =
        geos.iter().map(|g| build_sample(&template, g.nu, g.nu - 1, g.rho, g.delta)).collect::<Result<_>>()?;
    let assembled = assemble_sparse(&samples, &offsets)?;

    let mut report = ProbeReport::new("assembly");
    report.param("schedule", serde_json::to_value(schedule)?);
    report.param("offsets", json!(offsets));
    report.param("window", json!([window.0, window.1]));
    report.param("c", json!(c));
    report.param("options", serde_json::to_value(opts)?);
    report.diagnostics.insert("l2_norm".into(), assembled.l2_norm());

    let den = 4 * geos.iter().map(|g| g.nu).max().unwrap() as i64;
    let xis = xi_lattice(window, den as f64);
    let idx: Vec<i64> = xis.iter().map(|x| (x * den as f64).round() as i64).collect();
    let mut tables = Vec::with_capacity(geos.len());
    for g in &geos {
        if g.delta == 0.0 {
            tables.push(None);
            continue;
        }
        let mut t = BumpCoefficients::new(base, g.delta, den as f64, opts)?;
        let keys: Vec<i64> = idx.iter().flat_map(|&i| (0..g.nu).map(move |j| key(g.nu, i, j, den))).collect();
        t.ensure(&keys)?;
        tables.push(Some(t));
    }

    // For each ξ and sample: the oscillation and the args at each cutoff.
    let per_xi: Vec<(Vec<f64>, StageStats)> = idx
        .par_iter()
        .zip(&xis)
        .map(|(&i, &xi)| {
            let mut chain = Chain::start();
            let mut stats = StageStats::new();
            let mut osc = Vec::with_capacity(geos.len());
            for (n, g) in geos.iter().enumerate() {
                let Some(t) = &tables[n] else {
                    osc.push(0.0);
                    continue;
                };
                let mut first = 0.0;
                let mut best: f64 = 0.0;
                for j in 0..g.nu {
                    chain.push(t.get(key(g.nu, i, j, den)), offsets[n] + g.rho * j as f64, xi);
                    let (arg, ratio) = chain.arg();
                    stats.see(&chain, ratio);
                    if j == 0 {
                        first = arg;
                    }
                    best = best.max((arg - first).abs());
                }
                osc.push(best);
            }
            (osc, stats)
        })
        .collect();
    let stats = per_xi.iter().fold(StageStats::new(), |s, (_, o)| s.merge(*o));
    stats.check()?;
    stats.record(&mut report, "");
    report.fitted.insert("c_uniform".into(), (stats.max_a - 1.0).max(stats.max_b));
    for (n, g) in geos.iter().enumerate() {
        let (xi, value) = xis
            .iter()
            .zip(&per_xi)
            .map(|(&xi, (o, _))| (xi, o[n]))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let threshold = c * g.delta * g.delta * (g.nu as f64).ln();
        report.diagnostics.insert(format!("threshold_{n}"), threshold);
        report.diagnostics.insert(format!("exceeds_threshold_{n}"), if value > threshold { 1.0 } else { 0.0 });
        report.measurements.push(Measurement {
            nu: g.nu,
            delta: g.delta,
            index: n,
            xi,
            eta: 0.0,
            value,
            tolerance: stats.phase + 1e-8,
        });
    }
    Ok(report)
}

/// Per-sample oscillations from an assembly report, in order.
pub fn oscillations(report: &ProbeReport) -> Vec<f64> {
    let mut m: Vec<&Measurement> = report.measurements.iter().collect();
    m.sort_by_key(|m| m.index);
    m.iter().map(|m| m.value).collect()
}

// ---------------------------------------------------------------------------
// Weak-type failure

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakTypeRow {
    pub nu: usize,
    pub l2_norm: f64,
    pub threshold: f64,
    /// Fraction of sampled `ξ` whose lower bound for `𝔐` reaches the threshold.
    pub fraction: f64,
    pub min_bound: f64,
    pub max_bound: f64,
    /// `fraction·threshold/‖Ψ_ν‖₂`, which a weak-type bound would keep bounded.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakTypeTable {
    pub c: f64,
    pub n_xi: usize,
    pub rows: Vec<WeakTypeRow>,
}

impl WeakTypeTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["nu", "l2_norm", "threshold", "fraction", "min_bound", "max_bound", "ratio"])?;
        for r in &self.rows {
            out.write_record([
                r.nu.to_string(),
                fmt17(r.l2_norm),
                fmt17(r.threshold),
                fmt17(r.fraction),
                fmt17(r.min_bound),
                fmt17(r.max_bound),
                fmt17(r.ratio),
            ])?;
        }
        out.flush().map_err(|e| Error::Io { path: "<csv>".into(), source: e })?;
        Ok(())
    }
}

/// For `Ψ_ν = Q_{ν,ν³}`: `‖Ψ_ν‖₂` and the fraction of `n_xi` equally spaced
/// `ξ ∈ [1/2, 1]` where the lower bound for `𝔐(ξ, Ψ_ν)` reaches `c·log ν`.
pub fn weak_type_failure_table(base: &PotentialSpec, nu_list: &[usize], c: f64, n_xi: usize) -> Result<WeakTypeTable> {
    check_increasing(nu_list)?;
    if n_xi == 0 || !(c > 0.0) {
        return Err(Error::InvalidParameter("need ξ samples and a positive threshold constant".into()));
    }
    let mut rows = Vec::new();
    for &nu in nu_list {
        let r = (nu as f64).powi(3);
        let psi = build_separated(base, nu, r)?;
        let l2_norm = psi.l2_norm();
        let threshold = c * (nu as f64).ln();
        let bounds: Vec<f64> = if nu == 1 {
            vec![0.0; n_xi]
        } else {
            let report = run_separated_growth(base, nu, r, (0.5, 1.0), n_xi)?;
            report.measurements.iter().map(|m| m.value).collect()
        };
        let hits = bounds.iter().filter(|b| **b >= threshold).count();
        let fraction = hits as f64 / n_xi as f64;
        rows.push(WeakTypeRow {
            nu,
            l2_norm,
            threshold,
            fraction,
            min_bound: bounds.iter().copied().fold(f64::INFINITY, f64::min),
            max_bound: bounds.iter().copied().fold(0.0, f64::max),
            ratio: fraction * threshold / l2_norm,
        });
    }
    Ok(WeakTypeTable { c, n_xi, rows })
}
