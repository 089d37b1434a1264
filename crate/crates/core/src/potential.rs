//! Potentials: symbolic descriptions of the coefficient `A` of a Krein system
//! (on ℝ⁺) or `q` of a Dirac operator (on ℝ), closed under modulation,
//! dilation, translation, conjugation, rotation and disjoint assembly.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::linalg::{C64, ONE, ZERO};
use crate::quadrature::integrate_real;

/// Normalizing constant of `exp(-1/(u(1-u)))` on `(0, 1)` in L².
pub const BUMP_NORMALIZER: f64 = 101.541_608_713_741;
/// L¹ norm of the L²-normalized unit bump.
pub const BUMP_L1: f64 = 0.713_823_131_636_960_5;

/// Half-width, in units of `width`, beyond which a Gaussian is treated as 0.
pub const GAUSSIAN_CUTOFF: f64 = 9.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    /// `c·exp(-1/(u(1-u)))` with `u = (x - center)/width + 1/2`.
    SmoothBump,
    /// `1` on `[center - width/2, center + width/2]`.
    Indicator,
    /// `exp(-((x - center)/width)²/2)`.
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub spec: PotentialSpec,
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// Linear interpolation of `samples` at `start + j·step`; zero outside.
    GridSampled { step: f64, start: f64, samples: Vec<C64> },
    AnalyticBump { template: Template, center: f64, width: f64, amplitude: C64 },
    /// `inner(x)·e^{iℓx}`.
    Modulated { inner: Box<PotentialSpec>, frequency: f64 },
    /// `μ·inner(μx)`.
    Dilated { inner: Box<PotentialSpec>, scale: f64 },
    /// `inner(x - shift)`.
    Translated { inner: Box<PotentialSpec>, shift: f64 },
    Conjugated { inner: Box<PotentialSpec> },
    /// `ζ·inner(x)` with `|ζ| = 1`.
    Rotated { inner: Box<PotentialSpec>, factor: C64 },
    /// `Σ spec_j(x - offset_j)` with disjoint supports. Empty means zero.
    Composite { pieces: Vec<Piece> },
    /// Plain sum; supports may overlap.
    Sum { terms: Vec<PotentialSpec> },
}

/// An interval on which a potential is smooth, with a rough rate of
/// variation used to seed the integrator's cell count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub l1: f64,
    pub l2: f64,
    /// `(half_width, ∫_{|x| > half_width} |p|)` pairs.
    pub tails: Vec<(f64, f64)>,
}

impl NormReport {
    pub fn tail_mass(&self, half_width: f64) -> Option<f64> {
        self.tails.iter().find(|(h, _)| *h == half_width).map(|(_, m)| *m)
    }
}

fn unit_bump(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        BUMP_NORMALIZER * (-1.0 / (u * (1.0 - u))).exp()
    }
}

fn check_finite(v: f64, what: &'static str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

impl PotentialSpec {
    pub fn zero() -> Self {
        PotentialSpec::Composite { pieces: Vec::new() }
    }

    /// The L²-normalized smooth bump supported on `[0, 1]`.
    pub fn standard_bump() -> Self {
        PotentialSpec::AnalyticBump {
            template: Template::SmoothBump,
            center: 0.5,
            width: 1.0,
            amplitude: ONE,
        }
    }

    /// `χ_{[a, b]}`.
    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        check_finite(a, "indicator start")?;
        check_finite(b, "indicator end")?;
        if b <= a {
            return Err(Error::InvalidParameter(format!("indicator interval [{a}, {b}] is empty")));
        }
        Ok(PotentialSpec::AnalyticBump {
            template: Template::Indicator,
            center: 0.5 * (a + b),
            width: b - a,
            amplitude: ONE,
        })
    }

    pub fn bump(template: Template, center: f64, width: f64, amplitude: C64) -> Result<Self> {
        let p = PotentialSpec::AnalyticBump { template, center, width, amplitude };
        p.validate()?;
        Ok(p)
    }

    pub fn modulate(&self, frequency: f64) -> Result<Self> {
        check_finite(frequency, "modulation frequency")?;
        Ok(PotentialSpec::Modulated { inner: Box::new(self.clone()), frequency })
    }

    pub fn dilate(&self, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!("dilation scale must be positive, got {scale}")));
        }
        Ok(PotentialSpec::Dilated { inner: Box::new(self.clone()), scale })
    }

    pub fn translate(&self, shift: f64) -> Result<Self> {
        check_finite(shift, "translation")?;
        Ok(PotentialSpec::Translated { inner: Box::new(self.clone()), shift })
    }

    pub fn conjugate(&self) -> Self {
        PotentialSpec::Conjugated { inner: Box::new(self.clone()) }
    }

    pub fn rotate(&self, factor: C64) -> Result<Self> {
        if !factor.is_finite() || (factor.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("rotation factor must be unimodular, |ζ| = {}", factor.norm())));
        }
        Ok(PotentialSpec::Rotated { inner: Box::new(self.clone()), factor })
    }

    /// Multiplies the potential by a real constant, pushing the factor into
    /// the leaves so that no new representation is needed.
    pub fn scaled(&self, c: f64) -> Self {
        use PotentialSpec::*;
        match self {
            GridSampled { step, start, samples } => GridSampled {
                step: *step,
                start: *start,
                samples: samples.iter().map(|z| z * c).collect(),
            },
            AnalyticBump { template, center, width, amplitude } => AnalyticBump {
                template: *template,
                center: *center,
                width: *width,
                amplitude: amplitude * c,
            },
            Modulated { inner, frequency } => Modulated { inner: Box::new(inner.scaled(c)), frequency: *frequency },
            Dilated { inner, scale } => Dilated { inner: Box::new(inner.scaled(c)), scale: *scale },
            Translated { inner, shift } => Translated { inner: Box::new(inner.scaled(c)), shift: *shift },
            Conjugated { inner } => Conjugated { inner: Box::new(inner.scaled(c)) },
            Rotated { inner, factor } => Rotated { inner: Box::new(inner.scaled(c)), factor: *factor },
            Composite { pieces } => Composite {
                pieces: pieces.iter().map(|p| Piece { spec: p.spec.scaled(c), offset: p.offset }).collect(),
            },
            Sum { terms } => Sum { terms: terms.iter().map(|t| t.scaled(c)).collect() },
        }
    }

    /// Composite of `pieces`, checking that offsets increase and the shifted
    /// supports do not overlap (touching is allowed).
    pub fn composite(pieces: Vec<Piece>) -> Result<Self> {
        let p = PotentialSpec::Composite { pieces };
        p.validate()?;
        Ok(p)
    }

    pub fn sum(terms: Vec<PotentialSpec>) -> Result<Self> {
        let p = PotentialSpec::Sum { terms };
        p.validate()?;
        Ok(p)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: PotentialSpec = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        use PotentialSpec::*;
        match self {
            GridSampled { step, start, samples } => {
                check_finite(*start, "grid start")?;
                if !(*step > 0.0) || !step.is_finite() {
                    return Err(Error::InvalidParameter(format!("grid step must be positive, got {step}")));
                }
                if samples.iter().any(|z| !z.is_finite()) {
                    return Err(Error::NonIntegrable("grid contains non-finite samples".into()));
                }
                Ok(())
            }
            AnalyticBump { center, width, amplitude, .. } => {
                check_finite(*center, "bump center")?;
                if !(*width > 0.0) || !width.is_finite() {
                    return Err(Error::InvalidParameter(format!("bump width must be positive, got {width}")));
                }
                if !amplitude.is_finite() {
                    return Err(Error::NonFinite("bump amplitude"));
                }
                Ok(())
            }
            Modulated { inner, frequency } => {
                check_finite(*frequency, "modulation frequency")?;
                inner.validate()
            }
            Dilated { inner, scale } => {
                if !(*scale > 0.0) || !scale.is_finite() {
                    return Err(Error::InvalidParameter(format!("dilation scale must be positive, got {scale}")));
                }
                inner.validate()
            }
            Translated { inner, shift } => {
                check_finite(*shift, "translation")?;
                inner.validate()
            }
            Conjugated { inner } => inner.validate(),
            Rotated { inner, factor } => {
                if !factor.is_finite() || (factor.norm() - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "rotation factor must be unimodular, |ζ| = {}",
                        factor.norm()
                    )));
                }
                inner.validate()
            }
            Composite { pieces } => {
                let mut prev: Option<(f64, f64)> = None;
                for (index, piece) in pieces.iter().enumerate() {
                    check_finite(piece.offset, "piece offset")?;
                    piece.spec.validate()?;
                    if let Some((prev_offset, _)) = prev {
                        if piece.offset <= prev_offset {
                            return Err(Error::InvalidParameter(format!(
                                "composite offsets must increase strictly (piece {index})"
                            )));
                        }
                    }
                    if let Some((lo, hi)) = piece.spec.support() {
                        let start = lo + piece.offset;
                        if let Some((_, prev_end)) = prev {
                            if start < prev_end {
                                return Err(Error::Overlap { index, start, prev_end });
                            }
                        }
                        prev = Some((piece.offset, hi + piece.offset));
                    } else {
                        let prev_end = prev.map_or(f64::NEG_INFINITY, |(_, e)| e);
                        prev = Some((piece.offset, prev_end));
                    }
                }
                Ok(())
            }
            Sum { terms } => terms.iter().try_for_each(|t| t.validate()),
        }
    }

    /// Declared support `[lo, hi]`, or `None` for the zero potential. For
    /// Gaussians this is the effective support `center ± 9·width`.
    pub fn support(&self) -> Option<(f64, f64)> {
        use PotentialSpec::*;
        match self {
            GridSampled { step, start, samples } => {
                if samples.is_empty() {
                    None
                } else {
                    Some((*start, start + step * (samples.len() - 1) as f64))
                }
            }
            AnalyticBump { template, center, width, amplitude } => {
                if *amplitude == ZERO {
                    return None;
                }
                let h = match template {
                    Template::Gaussian => GAUSSIAN_CUTOFF * width,
                    _ => 0.5 * width,
                };
                Some((center - h, center + h))
            }
            Modulated { inner, .. } | Conjugated { inner } | Rotated { inner, .. } => inner.support(),
            Dilated { inner, scale } => inner.support().map(|(a, b)| (a / scale, b / scale)),
            Translated { inner, shift } => inner.support().map(|(a, b)| (a + shift, b + shift)),
            Composite { pieces } => {
                let first = pieces.iter().find_map(|p| p.spec.support().map(|(a, _)| a + p.offset))?;
                let last = pieces.iter().rev().find_map(|p| p.spec.support().map(|(_, b)| b + p.offset))?;
                Some((first, last))
            }
            Sum { terms } => terms.iter().filter_map(|t| t.support()).fold(None, |acc, (a, b)| match acc {
                None => Some((a, b)),
                Some((lo, hi)) => Some((lo.min(a), hi.max(b))),
            }),
        }
    }

    /// Whether the representation is genuinely compactly supported (as
    /// opposed to truncated at an effective radius).
    pub fn is_compact(&self) -> bool {
        use PotentialSpec::*;
        match self {
            GridSampled { .. } => true,
            AnalyticBump { template, amplitude, .. } => *template != Template::Gaussian || *amplitude == ZERO,
            Modulated { inner, .. }
            | Conjugated { inner }
            | Rotated { inner, .. }
            | Dilated { inner, .. }
            | Translated { inner, .. } => inner.is_compact(),
            Composite { pieces } => pieces.iter().all(|p| p.spec.is_compact()),
            Sum { terms } => terms.iter().all(|t| t.is_compact()),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.support().is_none()
    }

    /// Value at `x`; errors only on non-finite `x`.
    pub fn evaluate(&self, x: f64) -> Result<C64> {
        check_finite(x, "evaluation point")?;
        Ok(self.value(x))
    }

    /// Unchecked evaluation used by the integrators.
    pub fn value(&self, x: f64) -> C64 {
        use PotentialSpec::*;
        match self {
            GridSampled { step, start, samples } => {
                let n = samples.len();
                if n == 0 {
                    return ZERO;
                }
                let t = (x - start) / step;
                if t < 0.0 || t > (n - 1) as f64 {
                    return ZERO;
                }
                let j = (t.floor() as usize).min(n.saturating_sub(2));
                if n == 1 {
                    return samples[0];
                }
                let w = t - j as f64;
                samples[j] * (1.0 - w) + samples[j + 1] * w
            }
            AnalyticBump { template, center, width, amplitude } => {
                let s = (x - center) / width;
                let v = match template {
                    Template::SmoothBump => unit_bump(s + 0.5),
                    Template::Indicator => {
                        if s.abs() <= 0.5 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    Template::Gaussian => {
                        if s.abs() <= GAUSSIAN_CUTOFF {
                            (-0.5 * s * s).exp()
                        } else {
                            0.0
                        }
                    }
                };
                amplitude * v
            }
            Modulated { inner, frequency } => {
                let v = inner.value(x);
                if v == ZERO {
                    v
                } else {
                    v * C64::from_polar(1.0, frequency * x)
                }
            }
            Dilated { inner, scale } => inner.value(scale * x) * *scale,
            Translated { inner, shift } => inner.value(x - shift),
            Conjugated { inner } => inner.value(x).conj(),
            Rotated { inner, factor } => inner.value(x) * factor,
            Composite { pieces } => {
                // Pieces are ordered with disjoint supports: locate by binary
                // search on the shifted support starts.
                let idx = pieces.partition_point(|p| match p.spec.support() {
                    Some((a, _)) => a + p.offset <= x,
                    None => true,
                });
                for p in pieces[..idx].iter().rev() {
                    match p.spec.support() {
                        Some((_, b)) => {
                            if x <= b + p.offset {
                                return p.spec.value(x - p.offset);
                            }
                            return ZERO;
                        }
                        None => continue,
                    }
                }
                ZERO
            }
            Sum { terms } => terms.iter().map(|t| t.value(x)).sum(),
        }
    }

    /// Smooth segments covering the support, in increasing order.
    pub fn segments(&self) -> Vec<Segment> {
        use PotentialSpec::*;
        match self {
            GridSampled { step, start, samples } => (0..samples.len().saturating_sub(1))
                .map(|j| Segment {
                    start: start + step * j as f64,
                    end: start + step * (j + 1) as f64,
                    rate: 1.0 / step,
                })
                .collect(),
            AnalyticBump { template, width, .. } => match self.support() {
                None => Vec::new(),
                Some((a, b)) => {
                    let rate = match template {
                        Template::SmoothBump => 40.0 / width,
                        Template::Indicator => 0.0,
                        Template::Gaussian => 2.0 / width,
                    };
                    vec![Segment { start: a, end: b, rate }]
                }
            },
            Modulated { inner, frequency } => inner
                .segments()
                .into_iter()
                .map(|s| Segment { rate: s.rate + frequency.abs(), ..s })
                .collect(),
            Dilated { inner, scale } => inner
                .segments()
                .into_iter()
                .map(|s| Segment { start: s.start / scale, end: s.end / scale, rate: s.rate * scale })
                .collect(),
            Translated { inner, shift } => inner
                .segments()
                .into_iter()
                .map(|s| Segment { start: s.start + shift, end: s.end + shift, rate: s.rate })
                .collect(),
            Conjugated { inner } | Rotated { inner, .. } => inner.segments(),
            Composite { pieces } => pieces
                .iter()
                .flat_map(|p| {
                    p.spec.segments().into_iter().map(move |s| Segment {
                        start: s.start + p.offset,
                        end: s.end + p.offset,
                        rate: s.rate,
                    })
                })
                .collect(),
            Sum { terms } => merge_segments(terms.iter().flat_map(|t| t.segments()).collect()),
        }
    }

    /// `∫_{x < lo} |p| + ∫_{x > hi} |p|`.
    pub fn mass_outside(&self, lo: f64, hi: f64) -> f64 {
        use PotentialSpec::*;
        match self {
            AnalyticBump { template: Template::Gaussian, center, width, amplitude } => {
                let s = width * std::f64::consts::SQRT_2;
                let c = amplitude.norm() * width * (std::f64::consts::PI / 2.0).sqrt();
                let right = if hi.is_finite() { erfc((hi - center) / s) } else { 0.0 };
                let left = if lo.is_finite() { erfc((center - lo) / s) } else { 0.0 };
                c * (right + left)
            }
            AnalyticBump { template: Template::Indicator, amplitude, .. } => match self.support() {
                None => 0.0,
                Some((a, b)) => {
                    let inside = (b.min(hi) - a.max(lo)).max(0.0);
                    amplitude.norm() * ((b - a) - inside)
                }
            },
            Modulated { inner, .. } | Conjugated { inner } | Rotated { inner, .. } => inner.mass_outside(lo, hi),
            Dilated { inner, scale } => inner.mass_outside(lo * scale, hi * scale),
            Translated { inner, shift } => inner.mass_outside(lo - shift, hi - shift),
            Composite { pieces } => pieces.iter().map(|p| p.spec.mass_outside(lo - p.offset, hi - p.offset)).sum(),
            _ => {
                let mut total = 0.0;
                for s in self.segments() {
                    if s.start < lo {
                        total += self.abs_integral(s.start, s.end.min(lo));
                    }
                    if s.end > hi {
                        total += self.abs_integral(s.start.max(hi), s.end);
                    }
                }
                total
            }
        }
    }

    fn abs_integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        integrate_real(|x| self.value(x).norm(), a, b, 1e-15, 1e-11).0
    }

    fn numeric_norms(&self) -> (f64, f64) {
        let mut l1 = 0.0;
        let mut l2sq = 0.0;
        for s in self.segments() {
            l1 += self.abs_integral(s.start, s.end);
            l2sq += integrate_real(|x| self.value(x).norm_sqr(), s.start, s.end, 1e-15, 1e-11).0;
        }
        (l1, l2sq)
    }

    /// `(‖p‖₁, ‖p‖₂²)`, analytically where the representation allows.
    fn norms_sq(&self) -> (f64, f64) {
        use PotentialSpec::*;
        match self {
            AnalyticBump { template, width, amplitude, .. } => {
                let m = amplitude.norm();
                match template {
                    Template::SmoothBump => (m * width * BUMP_L1, m * m * width),
                    Template::Indicator => (m * width, m * m * width),
                    Template::Gaussian => {
                        let root_pi = std::f64::consts::PI.sqrt();
                        (m * width * std::f64::consts::SQRT_2 * root_pi, m * m * width * root_pi)
                    }
                }
            }
            GridSampled { step, samples, .. } => {
                // The interpolant's L² norm is exact; L¹ is integrated.
                let l2sq = samples
                    .windows(2)
                    .map(|w| step * (w[0].norm_sqr() + (w[0] * w[1].conj()).re + w[1].norm_sqr()) / 3.0)
                    .sum();
                (self.numeric_norms().0, l2sq)
            }
            Modulated { inner, .. } | Conjugated { inner } | Rotated { inner, .. } | Translated { inner, .. } => {
                inner.norms_sq()
            }
            Dilated { inner, scale } => {
                let (l1, l2sq) = inner.norms_sq();
                (l1, l2sq * scale)
            }
            Composite { pieces } => pieces.iter().fold((0.0, 0.0), |(a, b), p| {
                let (l1, l2sq) = p.spec.norms_sq();
                (a + l1, b + l2sq)
            }),
            Sum { .. } => self.numeric_norms(),
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.norms_sq().0
    }

    pub fn l2_norm(&self) -> f64 {
        self.norms_sq().1.sqrt()
    }

    /// `∫_{|x| > half_width} |p|`.
    pub fn tail_mass(&self, half_width: f64) -> f64 {
        self.mass_outside(-half_width, half_width)
    }
}

fn merge_segments(mut segs: Vec<Segment>) -> Vec<Segment> {
    let mut cuts: Vec<f64> = segs.iter().flat_map(|s| [s.start, s.end]).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    segs.sort_by(|a, b| a.start.total_cmp(&b.start));
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let rate = segs
            .iter()
            .filter(|s| s.start <= mid && mid <= s.end)
            .map(|s| s.rate)
            .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
        if let Some(rate) = rate {
            out.push(Segment { start: w[0], end: w[1], rate });
        }
    }
    out
}

/// L¹, L² and tail masses at the requested half-widths.
pub fn norms(p: &PotentialSpec, half_widths: &[f64]) -> Result<NormReport> {
    let (l1, l2sq) = p.norms_sq();
    if !l1.is_finite() || !l2sq.is_finite() {
        return Err(Error::NonIntegrable("norm quadrature did not converge".into()));
    }
    let tails = half_widths.iter().map(|&h| (h, p.tail_mass(h).min(l1))).collect();
    Ok(NormReport { l1, l2: l2sq.sqrt(), tails })
}

fn check_base(base: &PotentialSpec) -> Result<()> {
    base.validate()?;
    match base.support() {
        None => Err(Error::InvalidParameter("base potential is identically zero".into())),
        Some((a, b)) if a < 0.0 || b > 1.0 => Err(Error::InvalidParameter(format!(
            "base potential must be supported in [0, 1], support is [{a}, {b}]"
        ))),
        Some(_) => Ok(()),
    }
}

/// `A_j(x) = ν⁻¹ base(x/ν) e^{-iξ_j x}`, `ξ_j = j/ν`, `j = 0..ν-1`.
pub fn build_decoupled_family(base: &PotentialSpec, nu: usize) -> Result<Vec<PotentialSpec>> {
    if nu < 1 {
        return Err(Error::InvalidParameter("ν must be at least 1".into()));
    }
    check_base(base)?;
    let dilated = base.dilate(1.0 / nu as f64)?;
    (0..nu)
        .map(|j| {
            let xi = j as f64 / nu as f64;
            if j == 0 {
                Ok(dilated.clone())
            } else {
                dilated.modulate(-xi)
            }
        })
        .collect()
}

/// `Q_{ν,R}(x) = Σ_j A_j(x - j(ν + R))`.
pub fn build_separated(base: &PotentialSpec, nu: usize, r: f64) -> Result<PotentialSpec> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("separation must be nonnegative, got {r}")));
    }
    let family = build_decoupled_family(base, nu)?;
    if nu == 1 {
        return Ok(family.into_iter().next().unwrap());
    }
    let period = nu as f64 + r;
    let pieces = family
        .into_iter()
        .enumerate()
        .map(|(j, spec)| Piece { spec, offset: j as f64 * period })
        .collect();
    PotentialSpec::composite(pieces)
}

/// The Dirac sample `Σ_{j=0}^{m} q_j(x - ρj)` with
/// `q_j(x) = δ ν⁻¹ template(x/ν) e^{iξ_j x}`.
pub fn build_sample(template: &PotentialSpec, nu: usize, m: usize, rho: f64, delta: f64) -> Result<PotentialSpec> {
    if nu < 1 {
        return Err(Error::InvalidParameter("ν must be at least 1".into()));
    }
    if m + 1 > nu {
        return Err(Error::InvalidParameter(format!("m = {m} must be at most ν - 1 = {}", nu - 1)));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!("δ must lie in [0, 1), got {delta}")));
    }
    template.validate()?;
    if delta == 0.0 || template.is_zero() {
        return Ok(PotentialSpec::zero());
    }
    let bump = template.scaled(delta).dilate(1.0 / nu as f64)?;
    let (a, b) = bump.support().expect("nonzero bump has support");
    if !(rho > b - a) {
        return Err(Error::ShortGap { gap: rho, required: b - a });
    }
    let pieces = (0..=m)
        .map(|j| {
            let xi = j as f64 / nu as f64;
            let spec = if j == 0 { bump.clone() } else { bump.modulate(xi)? };
            Ok(Piece { spec, offset: rho * j as f64 })
        })
        .collect::<Result<Vec<_>>>()?;
    if pieces.len() == 1 {
        return Ok(pieces.into_iter().next().unwrap().spec);
    }
    PotentialSpec::composite(pieces)
}

/// Places `samples[n]` at `offsets[n]`; gaps must exceed the support
/// diameter of the preceding sample.
pub fn assemble_sparse(samples: &[PotentialSpec], offsets: &[f64]) -> Result<PotentialSpec> {
    if samples.len() != offsets.len() {
        return Err(Error::Dimension(format!("{} samples but {} offsets", samples.len(), offsets.len())));
    }
    if offsets.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("offsets must increase strictly".into()));
    }
    let pieces: Vec<Piece> = samples
        .iter()
        .zip(offsets)
        .filter(|(s, _)| !s.is_zero())
        .map(|(s, &o)| Piece { spec: s.clone(), offset: o })
        .collect();
    if pieces.len() == 1 && pieces[0].offset == 0.0 {
        return Ok(pieces.into_iter().next().unwrap().spec);
    }
    let mut prev_end: Option<(f64, f64)> = None;
    for (index, p) in pieces.iter().enumerate() {
        let (a, b) = p.spec.support().expect("zero samples filtered");
        let start = a + p.offset;
        if let Some((end, diam)) = prev_end {
            if start < end {
                return Err(Error::Overlap { index, start, prev_end: end });
            }
            if start - end < diam {
                return Err(Error::ShortGap { gap: start - end, required: diam });
            }
        }
        prev_end = Some((b + p.offset, b - a));
    }
    PotentialSpec::composite(pieces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::I;

    #[test]
    fn bump_constants_match_quadrature() {
        let (l2sq, _) = integrate_real(|u| unit_bump(u).powi(2), 0.0, 1.0, 1e-15, 1e-13);
        let (l1, _) = integrate_real(unit_bump, 0.0, 1.0, 1e-15, 1e-13);
        assert!((l2sq - 1.0).abs() < 1e-12);
        assert!((l1 - BUMP_L1).abs() < 1e-12);
    }

    #[test]
    fn indicator_values_and_norms() {
        let p = PotentialSpec::indicator(0.0, 7.0).unwrap();
        assert_eq!(p.evaluate(3.0).unwrap(), ONE);
        assert_eq!(p.evaluate(8.0).unwrap(), ZERO);
        let n = norms(&p, &[]).unwrap();
        assert!((n.l1 - 7.0).abs() < 1e-15);
        assert!((n.l2 - 7f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_potential() {
        let z = PotentialSpec::zero();
        assert_eq!(z.evaluate(1.3).unwrap(), ZERO);
        let n = norms(&z, &[0.0, 1.0]).unwrap();
        assert_eq!((n.l1, n.l2), (0.0, 0.0));
        assert_eq!(n.tails, vec![(0.0, 0.0), (1.0, 0.0)]);
    }

    #[test]
    fn transformations_follow_definitions() {
        let chi = PotentialSpec::indicator(0.0, 1.0).unwrap();
        let m = chi.modulate(std::f64::consts::PI).unwrap();
        assert!((m.evaluate(0.5).unwrap() - I).norm() < 1e-15);
        let d = chi.dilate(2.0).unwrap();
        assert_eq!(d.evaluate(0.25).unwrap(), C64::new(2.0, 0.0));
        assert_eq!(chi.modulate(3.0).unwrap().evaluate(0.0).unwrap(), ONE);
        let t = chi.translate(5.0).unwrap();
        assert_eq!(t.support(), Some((5.0, 6.0)));
        assert!(chi.dilate(0.0).is_err());
        assert!(chi.dilate(-1.0).is_err());
        assert!(chi.rotate(C64::new(1.0, 1e-5)).is_err());
        assert!(chi.evaluate(f64::NAN).is_err());
    }

    #[test]
    fn gaussian_tails() {
        let g = PotentialSpec::bump(Template::Gaussian, 0.0, 1.0, ONE).unwrap();
        let mut prev = f64::INFINITY;
        for h in [0.0, 1.0, 2.0, 4.0, 8.0] {
            let t = g.tail_mass(h);
            assert!(t <= prev);
            prev = t;
        }
        assert!(g.tail_mass(8.0) < 1e-10);
        assert!((g.tail_mass(0.0) - g.l1_norm()).abs() < 1e-14);
    }

    #[test]
    fn decoupled_family_indices() {
        let base = PotentialSpec::standard_bump();
        let fam = build_decoupled_family(&base, 4).unwrap();
        assert_eq!(fam.len(), 4);
        match &fam[2] {
            PotentialSpec::Modulated { frequency, .. } => assert_eq!(*frequency, -0.5),
            other => panic!("unexpected {other:?}"),
        }
        let one = build_decoupled_family(&base, 1).unwrap();
        for x in [0.1, 0.5, 0.9] {
            assert!((one[0].value(x) - base.value(x)).norm() < 1e-15);
        }
        assert!(build_decoupled_family(&base, 0).is_err());
        let wide = PotentialSpec::indicator(0.0, 2.0).unwrap();
        assert!(build_decoupled_family(&wide, 2).is_err());
    }

    #[test]
    fn separated_offsets_and_gaps() {
        let base = PotentialSpec::standard_bump();
        let q = build_separated(&base, 2, 8.0).unwrap();
        match &q {
            PotentialSpec::Composite { pieces } => {
                assert_eq!(pieces.len(), 2);
                assert_eq!(pieces[1].offset, 10.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        for x in [2.0, 5.0, 9.99] {
            assert_eq!(q.value(x), ZERO);
        }
        assert!(build_separated(&base, 2, -1.0).is_err());
    }

    #[test]
    fn sample_edge_cases() {
        let base = PotentialSpec::standard_bump();
        assert!(build_sample(&base, 8, 3, 64.0, 0.0).unwrap().is_zero());
        let one = build_sample(&base, 8, 0, 64.0, 0.5).unwrap();
        assert!((one.l2_norm() - 0.5 / 8f64.sqrt()).abs() < 1e-14);
        assert!(build_sample(&base, 8, 8, 64.0, 0.5).is_err());
        assert!(build_sample(&base, 8, 2, 4.0, 0.5).is_err());
        assert!(build_sample(&base, 8, 2, 64.0, 1.0).is_err());
    }

    #[test]
    fn assembly_rules() {
        let bump = PotentialSpec::standard_bump();
        let same = assemble_sparse(std::slice::from_ref(&bump), &[0.0]).unwrap();
        assert_eq!(same, bump);
        let zeros = assemble_sparse(&[PotentialSpec::zero(), PotentialSpec::zero()], &[0.0, 10.0]).unwrap();
        assert!(zeros.is_zero());
        let two = assemble_sparse(&[bump.clone(), bump.clone()], &[0.0, 100.0]).unwrap();
        assert!((two.l2_norm().powi(2) - 2.0).abs() < 1e-14);
        assert!(assemble_sparse(&[bump.clone(), bump.clone()], &[0.0, 0.5]).is_err());
        assert!(assemble_sparse(&[bump.clone(), bump.clone()], &[0.0, 1.5]).is_err());
        assert!(assemble_sparse(&[bump.clone(), bump], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn composite_rejects_overlap() {
        let bump = PotentialSpec::standard_bump();
        let err = PotentialSpec::composite(vec![
            Piece { spec: bump.clone(), offset: 0.0 },
            Piece { spec: bump, offset: 0.5 },
        ]);
        assert!(matches!(err, Err(Error::Overlap { .. })));
    }

    #[test]
    fn grid_interpolates_linearly() {
        let g = PotentialSpec::GridSampled {
            step: 0.5,
            start: 1.0,
            samples: vec![ZERO, C64::new(2.0, 0.0), C64::new(0.0, 2.0)],
        };
        assert_eq!(g.value(1.25), C64::new(1.0, 0.0));
        assert_eq!(g.value(1.75), C64::new(1.0, 1.0));
        assert_eq!(g.value(0.9), ZERO);
        assert_eq!(g.value(2.1), ZERO);
        // ∫ of |linear|² over two segments of length 0.5.
        let l2sq = 0.5 * (0.0 + 0.0 + 4.0) / 3.0 + 0.5 * (4.0 + 0.0 + 4.0) / 3.0;
        assert!((g.l2_norm().powi(2) - l2sq).abs() < 1e-14);
    }

    #[test]
    fn json_round_trip_and_unknown_fields() {
        let p = PotentialSpec::standard_bump().dilate(0.25).unwrap().modulate(-0.5).unwrap();
        let s = p.to_json().unwrap();
        assert_eq!(PotentialSpec::from_json(&s).unwrap(), p);
        let bad = r#"{"kind":"translated","inner":{"kind":"composite","pieces":[]},"shift":1.0,"extra":2}"#;
        assert!(PotentialSpec::from_json(bad).is_err());
        let neg = r#"{"kind":"dilated","inner":{"kind":"composite","pieces":[]},"scale":-1.0}"#;
        assert!(PotentialSpec::from_json(neg).is_err());
    }
}
