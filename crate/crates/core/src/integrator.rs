//! Fourth-order Magnus propagation of `X' = G(x) X` for 2×2 systems whose
//! coefficient is smooth on a list of segments and free in between.

use crate::error::{Error, Result};
use crate::linalg::{Mat2, C64};
use crate::potential::{PotentialSpec, Segment};

/// Something that can be sampled like a potential.
pub trait Profile: Sync {
    fn value(&self, x: f64) -> C64;
    /// Smooth pieces of the support in increasing order; the profile is zero
    /// off their union.
    fn segments(&self) -> Vec<Segment>;
}

impl Profile for PotentialSpec {
    fn value(&self, x: f64) -> C64 {
        PotentialSpec::value(self, x)
    }

    fn segments(&self) -> Vec<Segment> {
        PotentialSpec::segments(self)
    }
}

impl<P: Profile + ?Sized> Profile for &P {
    fn value(&self, x: f64) -> C64 {
        (**self).value(x)
    }

    fn segments(&self) -> Vec<Segment> {
        (**self).segments()
    }
}

/// `x ↦ p(-x)`.
pub struct Reflected<P>(pub P);

impl<P: Profile> Profile for Reflected<P> {
    fn value(&self, x: f64) -> C64 {
        self.0.value(-x)
    }

    fn segments(&self) -> Vec<Segment> {
        let mut s: Vec<Segment> = self
            .0
            .segments()
            .into_iter()
            .map(|s| Segment { start: -s.end, end: -s.start, rate: s.rate })
            .collect();
        s.reverse();
        s
    }
}

/// `p·χ_{[lo, hi]}`.
pub struct Windowed<P> {
    pub inner: P,
    pub lo: f64,
    pub hi: f64,
}

impl<P: Profile> Profile for Windowed<P> {
    fn value(&self, x: f64) -> C64 {
        if x < self.lo || x > self.hi {
            C64::new(0.0, 0.0)
        } else {
            self.inner.value(x)
        }
    }

    fn segments(&self) -> Vec<Segment> {
        clip_segments(&self.inner.segments(), self.lo, self.hi)
    }
}

pub fn clip_segments(segs: &[Segment], lo: f64, hi: f64) -> Vec<Segment> {
    segs.iter()
        .filter_map(|s| {
            let a = s.start.max(lo);
            let b = s.end.min(hi);
            (b > a).then_some(Segment { start: a, end: b, rate: s.rate })
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub struct Settings {
    pub tol: f64,
    /// Largest number of cells tried on one segment.
    pub max_cells: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { tol: 1e-10, max_cells: 1 << 18 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Propagation {
    pub matrix: Mat2,
    /// Sum over segments of the Richardson estimates.
    pub error_estimate: f64,
    pub cells: usize,
}

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // √3/6
const COMMUTATOR_WEIGHT: f64 = 0.144_337_567_297_406_43; // √3/12

/// Propagator over one segment with `n` uniform cells.
fn sweep<G: Fn(f64) -> Mat2>(gen: &G, a: f64, b: f64, n: usize) -> Mat2 {
    let h = (b - a) / n as f64;
    let mut p = Mat2::IDENTITY;
    for j in 0..n {
        let x0 = a + h * j as f64;
        let m1 = gen(x0 + (0.5 - GAUSS_OFFSET) * h);
        let m2 = gen(x0 + (0.5 + GAUSS_OFFSET) * h);
        let omega = (m1 + m2).scale(C64::new(0.5 * h, 0.0))
            + m2.commutator(&m1).scale(C64::new(COMMUTATOR_WEIGHT * h * h, 0.0));
        p = omega.exp() * p;
    }
    p
}

/// Propagates across `[a, b]`. `gen` gives the coefficient matrix, `free`
/// the exact propagator across a stretch where the profile vanishes, and
/// `rate` an estimate of how fast the free part of the coefficient varies.
pub fn propagate<G, F>(
    gen: &G,
    free: &F,
    segments: &[Segment],
    a: f64,
    b: f64,
    rate: f64,
    settings: &Settings,
) -> Result<Propagation>
where
    G: Fn(f64) -> Mat2,
    F: Fn(f64, f64) -> Mat2,
{
    let segs = clip_segments(segments, a, b);
    let mut x = a;
    let mut total = Mat2::IDENTITY;
    let mut err = 0.0;
    let mut cells = 0;
    for s in &segs {
        if s.start > x {
            total = free(x, s.start) * total;
        }
        let len = s.end - s.start;
        let mut n = ((len * (s.rate + rate) / 2.0).ceil() as usize).max(2);
        let mut coarse = sweep(gen, s.start, s.end, n);
        cells += n;
        loop {
            let fine = sweep(gen, s.start, s.end, 2 * n);
            cells += 2 * n;
            let est = (fine - coarse).op_norm() / 15.0;
            let scale = fine.op_norm().max(1.0);
            if est <= settings.tol * scale {
                total = fine * total;
                err += est / scale;
                break;
            }
            if !fine.is_finite() || 4 * n > settings.max_cells {
                return Err(Error::ToleranceNotReached { tol: settings.tol, achieved: est / scale });
            }
            n *= 2;
            coarse = fine;
        }
        x = s.end;
    }
    if b > x {
        total = free(x, b) * total;
    }
    Ok(Propagation { matrix: total, error_estimate: err, cells })
}
