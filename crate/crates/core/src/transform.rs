//! Drift removal by increasing affine maps.
//!
//! With `C1(t) = ∫_0^t c1` and `I(t) = ∫_0^t c0(z) e^{-C1(z)} dz`:
//!
//! ```text
//! λ0(t) = e^{C1(t)} I(t)               λ1(t) = e^{C1(t)}
//! λ̃0(t) = e^{C1(T)} (I(T) − I(t))      λ̃1(t) = e^{C1(T) − C1(t)}
//! ```
//!
//! `C1` is an exact piecewise-polynomial antiderivative. `I` is tabulated at
//! breakpoints by adaptive quadrature and interpolated inside each segment by
//! Chebyshev panels checked against the same quadrature, so evaluation costs
//! one segment lookup plus a short Clenshaw recurrence.

use crate::error::{Error, Result};
use crate::piecewise::PiecewiseVecFn;
use crate::quadrature::{adaptive, quad_exp_weighted, DEFAULT_MAX_DEPTH, DEFAULT_TOL};
use crate::sde::LinearSde;

const PANEL_DEGREE: usize = 24;
const PANEL_WIDTH: f64 = 0.25;
const PANEL_CHECK_TOL: f64 = 1e-13;
const PANEL_MAX_SPLITS: u32 = 12;

/// Antiderivative of a smooth integrand on `[a, b]` as a Chebyshev series,
/// zero at `a`.
#[derive(Clone, Debug)]
struct ChebPanel {
    a: f64,
    b: f64,
    base: f64,
    coeffs: Vec<f64>,
}

impl ChebPanel {
    fn fit<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, base: f64) -> ChebPanel {
        let n = PANEL_DEGREE;
        let (bma, bpa) = (0.5 * (b - a), 0.5 * (b + a));
        let pi = std::f64::consts::PI;
        let fx: Vec<f64> = (0..n)
            .map(|k| f(bma * (pi * (k as f64 + 0.5) / n as f64).cos() + bpa))
            .collect();
        let c: Vec<f64> = (0..n)
            .map(|j| {
                2.0 / n as f64
                    * fx.iter()
                        .enumerate()
                        .map(|(k, &v)| v * (pi * j as f64 * (k as f64 + 0.5) / n as f64).cos())
                        .sum::<f64>()
            })
            .collect();
        // Integrate the series term by term, pinning the value at `a` to zero.
        let con = 0.25 * (b - a);
        let mut cint = vec![0.0; n];
        for j in 1..n - 1 {
            cint[j] = con * (c[j - 1] - c[j + 1]) / j as f64;
        }
        cint[n - 1] = con * c[n - 2] / (n - 1) as f64;
        let mut sum = 0.0;
        let mut fac = 1.0;
        for &v in &cint[1..] {
            sum += fac * v;
            fac = -fac;
        }
        cint[0] = 2.0 * sum;
        ChebPanel { a, b, base, coeffs: cint }
    }

    /// Integral from `a` to `t`.
    fn partial(&self, t: f64) -> f64 {
        let y = (2.0 * t - self.a - self.b) / (self.b - self.a);
        let y2 = 2.0 * y;
        let (mut d, mut dd) = (0.0, 0.0);
        for &c in self.coeffs[1..].iter().rev() {
            let sv = d;
            d = y2 * d - dd + c;
            dd = sv;
        }
        y * d - dd + 0.5 * self.coeffs[0]
    }

    fn value(&self, t: f64) -> f64 {
        self.base + self.partial(t)
    }
}

/// Cached `C1` and `I` for one coefficient pair `(c0, c1)`.
#[derive(Clone, Debug)]
pub struct Transform {
    horizon: f64,
    c1_int: PiecewiseVecFn,
    c1_total: f64,
    /// `I` at each breakpoint.
    drift_at_breaks: Vec<f64>,
    /// Chebyshev panels per segment.
    panels: Vec<Vec<ChebPanel>>,
}

impl Transform {
    pub(crate) fn build(c0: &PiecewiseVecFn, c1: &PiecewiseVecFn) -> Result<Transform> {
        let horizon = c0.horizon();
        let c1_int = c1.antiderivative()?;
        let c1_total = c1_int.value(horizon);
        let mut drift_at_breaks = vec![0.0];
        let mut panels = Vec::with_capacity(c0.num_segments());
        for i in 0..c0.num_segments() {
            let (a, b) = c0.segment_bounds(i);
            let g = &c0.segment(i)[0];
            let big = &c1_int.segment(i)[0];
            let base = *drift_at_breaks.last().unwrap();
            // ∫_a^b c0 e^{-C1} = e^{-C1(b)} ∫_a^b c0 e^{C1(b) - C1(z)} dz
            let seg_integral = (-big.eval(b)).exp() * quad_exp_weighted(c0, &c1_int, a, b, DEFAULT_TOL)?;
            let seg_panels = if g.is_zero() {
                vec![ChebPanel { a, b, base, coeffs: vec![0.0; 2] }]
            } else {
                let integrand = |z: f64| g.eval(z) * (-big.eval(z)).exp();
                build_panels(&integrand, a, b, base)?
            };
            drift_at_breaks.push(base + seg_integral);
            panels.push(seg_panels);
        }
        Ok(Transform { horizon, c1_int, c1_total, drift_at_breaks, panels })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `C1(t) = ∫_0^t c1`.
    pub fn c1_integral(&self, t: f64) -> f64 {
        self.c1_int.value(t)
    }

    /// `∫_0^T c1`.
    pub fn c1_total(&self) -> f64 {
        self.c1_total
    }

    /// `I(t) = ∫_0^t c0(z) e^{-C1(z)} dz`, equal to `λ0(t) / λ1(t)`.
    pub fn drift_integral(&self, t: f64) -> f64 {
        let i = self.c1_int.segment_index(t);
        let seg = &self.panels[i];
        let k = seg.partition_point(|p| p.a <= t).saturating_sub(1);
        seg[k].value(t)
    }

    pub fn drift_total(&self) -> f64 {
        *self.drift_at_breaks.last().unwrap()
    }

    pub fn lambda0(&self, t: f64) -> f64 {
        self.c1_integral(t).exp() * self.drift_integral(t)
    }

    pub fn lambda1(&self, t: f64) -> f64 {
        self.c1_integral(t).exp()
    }

    pub fn tilde_lambda0(&self, t: f64) -> f64 {
        self.c1_total.exp() * (self.drift_total() - self.drift_integral(t))
    }

    pub fn tilde_lambda1(&self, t: f64) -> f64 {
        (self.c1_total - self.c1_integral(t)).exp()
    }
}

fn build_panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, base: f64) -> Result<Vec<ChebPanel>> {
    let count = ((b - a) / PANEL_WIDTH).ceil().max(1.0) as usize;
    let mut out = Vec::new();
    let mut running = base;
    for k in 0..count {
        let lo = a + (b - a) * k as f64 / count as f64;
        let hi = if k + 1 == count { b } else { a + (b - a) * (k + 1) as f64 / count as f64 };
        running = push_checked(f, lo, hi, running, 0, &mut out)?;
    }
    Ok(out)
}

/// Fit a panel on `[lo, hi]`; split it while the series disagrees with
/// adaptive quadrature. Returns the integral accumulated up to `hi`.
fn push_checked<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, base: f64, depth: u32, out: &mut Vec<ChebPanel>) -> Result<f64> {
    let reference = adaptive(f, lo, hi, PANEL_CHECK_TOL, DEFAULT_MAX_DEPTH)?;
    let panel = ChebPanel::fit(f, lo, hi, base);
    let mid = 0.5 * (lo + hi);
    let mid_ref = adaptive(f, lo, mid, PANEL_CHECK_TOL, DEFAULT_MAX_DEPTH)?;
    let scale = 1.0 + reference.abs();
    let ok = (panel.partial(hi) - reference).abs() <= PANEL_CHECK_TOL * scale
        && (panel.partial(mid) - mid_ref).abs() <= PANEL_CHECK_TOL * scale;
    if ok {
        out.push(panel);
        return Ok(base + reference);
    }
    if depth >= PANEL_MAX_SPLITS {
        return Err(Error::Quadrature {
            a: lo,
            b: hi,
            estimate: reference,
            error: (panel.partial(hi) - reference).abs(),
        });
    }
    let next = push_checked(f, lo, mid, base, depth + 1, out)?;
    push_checked(f, mid, hi, next, depth + 1, out)
}

/// Which end of `[0, T]` the affine map is anchored at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `(λ0, λ1)`, identity at `t = 0`.
    Forward,
    /// `(λ̃0, λ̃1)`, identity at `t = T`.
    Backward,
}

/// Intercept and (strictly positive) slope of one of the two affine maps.
#[derive(Clone, Copy, Debug)]
pub struct AffinePair<'a> {
    transform: &'a Transform,
    direction: Direction,
}

impl AffinePair<'_> {
    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn intercept(&self, t: f64) -> f64 {
        match self.direction {
            Direction::Forward => self.transform.lambda0(t),
            Direction::Backward => self.transform.tilde_lambda0(t),
        }
    }

    pub fn slope(&self, t: f64) -> f64 {
        match self.direction {
            Direction::Forward => self.transform.lambda1(t),
            Direction::Backward => self.transform.tilde_lambda1(t),
        }
    }

    /// `intercept(t) + slope(t) * x`.
    pub fn apply(&self, t: f64, x: f64) -> f64 {
        self.intercept(t) + self.slope(t) * x
    }
}

pub fn forward_pair(sde: &LinearSde) -> AffinePair<'_> {
    AffinePair { transform: sde.transform(), direction: Direction::Forward }
}

pub fn backward_pair(sde: &LinearSde) -> AffinePair<'_> {
    AffinePair { transform: sde.transform(), direction: Direction::Backward }
}

/// Diffusion intercept of the driftless process started at 0:
/// `c2*(t) = c2/λ1 + c3 (x0 + λ0/λ1)`. Paired with `c3` it drives
/// `dX* = (c2* + c3 X*)ᵀ dW`.
#[derive(Clone, Copy, Debug)]
pub struct C2Star<'a> {
    sde: &'a LinearSde,
    x0: f64,
}

impl<'a> C2Star<'a> {
    pub fn sde(&self) -> &'a LinearSde {
        self.sde
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// Value using segment `i`'s polynomials (one-sided at the segment ends).
    pub fn eval_segment_into(&self, i: usize, t: f64, out: &mut [f64]) {
        let tr = self.sde.transform();
        let inv = (-tr.c1_integral(t)).exp();
        let shift = self.x0 + tr.drift_integral(t);
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.sde.c2().segment(i)[j].eval(t) * inv + self.sde.c3().segment(i)[j].eval(t) * shift;
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.sde.dim()];
        self.eval_segment_into(self.sde.segment_index(t), t, &mut out);
        out
    }

    pub fn eval_left_limit(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.sde.dim()];
        self.eval_segment_into(self.sde.c0().segment_index_left(t), t, &mut out);
        out
    }

    /// Time derivative inside segment `i`:
    /// `(c2' − c1 c2)/λ1 + c3' (x0 + I) + c3 c0/λ1`.
    pub fn derivative_segment_into(&self, i: usize, t: f64, out: &mut [f64]) {
        let tr = self.sde.transform();
        let inv = (-tr.c1_integral(t)).exp();
        let shift = self.x0 + tr.drift_integral(t);
        let c0 = self.sde.c0().segment(i)[0].eval(t);
        let c1 = self.sde.c1().segment(i)[0].eval(t);
        for (j, o) in out.iter_mut().enumerate() {
            let c2 = &self.sde.c2().segment(i)[j];
            let c3 = &self.sde.c3().segment(i)[j];
            *o = (c2.derivative().eval(t) - c1 * c2.eval(t)) * inv
                + c3.derivative().eval(t) * shift
                + c3.eval(t) * c0 * inv;
        }
    }
}

pub fn c2_star(sde: &LinearSde, x0: f64) -> C2Star<'_> {
    C2Star { sde, x0 }
}

/// `c̃2*(s) = c2(s) λ̃1(s) − c3(s) λ̃0(s)`.
#[derive(Clone, Copy, Debug)]
pub struct TildeC2Star<'a> {
    sde: &'a LinearSde,
}

impl TildeC2Star<'_> {
    pub fn eval_segment_into(&self, i: usize, s: f64, out: &mut [f64]) {
        let tr = self.sde.transform();
        let (l0, l1) = (tr.tilde_lambda0(s), tr.tilde_lambda1(s));
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.sde.c2().segment(i)[j].eval(s) * l1 - self.sde.c3().segment(i)[j].eval(s) * l0;
        }
    }

    pub fn eval(&self, s: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.sde.dim()];
        self.eval_segment_into(self.sde.segment_index(s), s, &mut out);
        out
    }

    pub fn eval_left_limit(&self, s: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.sde.dim()];
        self.eval_segment_into(self.sde.c0().segment_index_left(s), s, &mut out);
        out
    }
}

pub fn tilde_c2_star(sde: &LinearSde) -> TildeC2Star<'_> {
    TildeC2Star { sde }
}

/// Star-process initial state `λ̃0(t) + λ̃1(t) x`.
pub fn conjugate_cdf_args(sde: &LinearSde, t: f64, x: f64) -> Result<f64> {
    sde.check_time(t)?;
    Ok(backward_pair(sde).apply(t, x))
}

/// `ξ̃(t) = (ξ − λ̃0(t)) / λ̃1(t)`: the state at `t` whose deterministic image
/// at `T` is `ξ`.
pub fn xi_tilde(sde: &LinearSde, xi: f64, t: f64) -> Result<f64> {
    sde.check_time(t)?;
    let tr = sde.transform();
    Ok((xi - tr.tilde_lambda0(t)) / tr.tilde_lambda1(t))
}

/// Noise-free path `λ0(t) + λ1(t) x0`.
pub fn deterministic_path(sde: &LinearSde, x0: f64, t: f64) -> f64 {
    forward_pair(sde).apply(t, x0)
}
