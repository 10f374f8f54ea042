//! Reachable states and support of `X(t)`.
//!
//! With `c2*` the diffusion intercept of the driftless process started at 0,
//! `h(s) = −c2*·c3/‖c3‖²` is the state that minimises the diffusion
//! magnitude at time `s`. The branch logic uses the first time `t̲` at which
//! `c2*` leaves zero, the first time `t̄` at which `c2* + c3 h` (the part of
//! `c2*` not cancellable by any state) leaves zero, and the sign and
//! monotonicity of `h` in between. A numeric cross-check integrates the
//! extremal ODE `g' = k‖c2* + c3 g‖` for large `|k|`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::poly::Poly;
use crate::quadrature::chebyshev_nodes;
use crate::regime::{norm, IDENTITY_NODES, IDENTITY_TOL};
use crate::sde::LinearSde;
use crate::transform::{c2_star, C2Star};

/// Minimum samples per segment and total samples for the sign and
/// monotonicity analysis of `h`.
const MIN_SEGMENT_SAMPLES: usize = 64;
const TOTAL_SAMPLES: usize = 10_000;
/// Relative margin below which a sign or slope of `h` counts as zero.
const SHAPE_MARGIN: f64 = 1e-9;
const MINOR_TOL: f64 = 1e-12;

pub const DIVERGENCE_LEVEL: f64 = 1e12;
pub const DEFAULT_K_SCHEDULE: [f64; 8] = [-1e4, -1e3, -1e2, -1e1, 1e1, 1e2, 1e3, 1e4];

/// Interval with optional (infinite) ends and per-end openness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl Interval {
    pub fn real_line() -> Self {
        Interval { lo: None, hi: None, lo_open: true, hi_open: true }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: Some(v), hi: Some(v), lo_open: false, hi_open: false }
    }

    pub fn lower_half_open(lo: f64) -> Self {
        Interval { lo: Some(lo), hi: None, lo_open: true, hi_open: true }
    }

    pub fn upper_half_open(hi: f64) -> Self {
        Interval { lo: None, hi: Some(hi), lo_open: true, hi_open: true }
    }

    /// Closure: finite ends become closed.
    pub fn closure(&self) -> Self {
        Interval { lo: self.lo, hi: self.hi, lo_open: self.lo.is_none(), hi_open: self.hi.is_none() }
    }

    pub fn lo_or_neg_inf(&self) -> f64 {
        self.lo.unwrap_or(f64::NEG_INFINITY)
    }

    pub fn hi_or_inf(&self) -> f64 {
        self.hi.unwrap_or(f64::INFINITY)
    }

    pub fn contains(&self, v: f64) -> bool {
        let above = match self.lo {
            None => true,
            Some(lo) => v > lo || (!self.lo_open && v == lo),
        };
        let below = match self.hi {
            None => true,
            Some(hi) => v < hi || (!self.hi_open && v == hi),
        };
        above && below
    }

    /// Closed-interval membership with slack `tol` at finite ends.
    pub fn contains_closed(&self, v: f64, tol: f64) -> bool {
        v >= self.lo_or_neg_inf() - tol && v <= self.hi_or_inf() + tol
    }

    /// `self ⊆ other` for the closures, with slack `tol`.
    pub fn closure_within(&self, other: &Interval, tol: f64) -> bool {
        self.lo_or_neg_inf() >= other.lo_or_neg_inf() - tol && self.hi_or_inf() <= other.hi_or_inf() + tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "i")]
    Singleton,
    #[serde(rename = "ii")]
    FullLineNoise,
    #[serde(rename = "iii-a")]
    SignChange,
    #[serde(rename = "iii-b-R")]
    NonPositiveNotMonotone,
    #[serde(rename = "iii-b-halfline")]
    NonPositiveHalfLine,
    #[serde(rename = "iii-c-R")]
    NonNegativeNotMonotone,
    #[serde(rename = "iii-c-halfline")]
    NonNegativeHalfLine,
}

impl Branch {
    pub fn tag(&self) -> &'static str {
        match self {
            Branch::Singleton => "i",
            Branch::FullLineNoise => "ii",
            Branch::SignChange => "iii-a",
            Branch::NonPositiveNotMonotone => "iii-b-R",
            Branch::NonPositiveHalfLine => "iii-b-halfline",
            Branch::NonNegativeNotMonotone => "iii-c-R",
            Branch::NonNegativeHalfLine => "iii-c-halfline",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachDiagnostics {
    pub t_underline: f64,
    pub t_bar: f64,
    pub tau_t: Option<f64>,
    pub h_star: Option<f64>,
    /// Number of points at which `h` was sampled.
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachResult {
    pub t: f64,
    pub branch: Branch,
    pub reachable: Interval,
    pub support: Interval,
    pub diagnostics: ReachDiagnostics,
}

/// `h` on segment `i` at `s`, with the indicator `c3(s) ≠ 0`.
fn h_segment(cs: &C2Star, i: usize, s: f64, buf: &mut [Vec<f64>; 2]) -> f64 {
    let sde = cs.sde();
    let [c2v, c3v] = buf;
    cs.eval_segment_into(i, s, c2v);
    sde.c3().eval_segment_into(i, s, c3v);
    let dn: f64 = c3v.iter().map(|v| v * v).sum();
    if dn == 0.0 {
        return 0.0;
    }
    -c2v.iter().zip(c3v.iter()).map(|(p, q)| p * q).sum::<f64>() / dn
}

/// `h(s)`, right-continuous.
pub fn h_fun(sde: &LinearSde, x0: f64, s: f64) -> Result<f64> {
    sde.check_time(s)?;
    let cs = c2_star(sde, x0);
    let mut buf = [vec![0.0; sde.dim()], vec![0.0; sde.dim()]];
    Ok(h_segment(&cs, sde.segment_index(s), s, &mut buf))
}

/// Left limit of `h` at `s > 0`.
pub fn h_left_limit(sde: &LinearSde, x0: f64, s: f64) -> Result<f64> {
    sde.check_time(s)?;
    let cs = c2_star(sde, x0);
    let mut buf = [vec![0.0; sde.dim()], vec![0.0; sde.dim()]];
    Ok(h_segment(&cs, sde.c0().segment_index_left(s), s, &mut buf))
}

/// `h` and `h'` on segment `i` at `s`; `None` off `{c3 ≠ 0}`.
fn h_with_slope(cs: &C2Star, i: usize, s: f64, dc3: &[Poly]) -> Option<(f64, f64)> {
    let sde = cs.sde();
    let d = sde.dim();
    let mut c2v = vec![0.0; d];
    let mut dc2v = vec![0.0; d];
    cs.eval_segment_into(i, s, &mut c2v);
    cs.derivative_segment_into(i, s, &mut dc2v);
    let c3v = sde.c3().eval_segment(i, s);
    let dc3v: Vec<f64> = dc3.iter().map(|p| p.eval(s)).collect();
    let dn: f64 = c3v.iter().map(|v| v * v).sum();
    if dn == 0.0 {
        return None;
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let n = dot(&c2v, &c3v);
    let dn_d = 2.0 * dot(&c3v, &dc3v);
    let n_d = dot(&dc2v, &c3v) + dot(&c2v, &dc3v);
    Some((-n / dn, -(n_d * dn - n * dn_d) / (dn * dn)))
}

/// True when `c2*` vanishes identically on segment `i`.
fn c2_star_zero_on_segment(sde: &LinearSde, x0: f64, i: usize) -> bool {
    if sde.c3().segment_is_zero(i) {
        return sde.c2().segment_is_zero(i);
    }
    let (a, b) = sde.segment_bounds(i);
    let cs = c2_star(sde, x0);
    let tr = sde.transform();
    let d = sde.dim();
    let mut v = vec![0.0; d];
    chebyshev_nodes(a, b, IDENTITY_NODES).into_iter().all(|s| {
        cs.eval_segment_into(i, s, &mut v);
        let res = norm(v.iter().copied());
        let c2n = norm(sde.c2().eval_segment(i, s).into_iter());
        let c3n = norm(sde.c3().eval_segment(i, s).into_iter());
        let scale = c2n * (-tr.c1_integral(s)).exp() + c3n * (x0 + tr.drift_integral(s)).abs();
        res <= IDENTITY_TOL * scale
    })
}

/// `t̲ = inf { s : c2*(s) ≠ 0 }`, or `T`.
pub fn t_underline(sde: &LinearSde, x0: f64) -> f64 {
    (0..sde.num_segments())
        .find(|&i| !c2_star_zero_on_segment(sde, x0, i))
        .map_or(sde.horizon(), |i| sde.segment_bounds(i).0)
}

fn poly_is_negligible(p: &Poly, bound: f64) -> bool {
    p.coeffs().iter().all(|c| c.abs() <= MINOR_TOL * bound)
}

fn abs_sum(p: &Poly) -> f64 {
    p.coeffs().iter().map(|c| c.abs()).sum()
}

/// True when `c2* + c3 h` vanishes identically on segment `i`.
fn residual_zero_on_segment(sde: &LinearSde, i: usize) -> bool {
    let c2 = sde.c2().segment(i);
    let c3 = sde.c3().segment(i);
    if sde.c3().segment_is_zero(i) {
        return sde.c2().segment_is_zero(i);
    }
    // c2* ∥ c3 exactly when c2 ∥ c3, i.e. every 2×2 minor vanishes.
    let d = c2.len();
    for a in 0..d {
        for b in a + 1..d {
            let minor = c2[a].mul(&c3[b]).add(&c2[b].mul(&c3[a]).scale(-1.0));
            let bound = abs_sum(&c2[a]) * abs_sum(&c3[b]) + abs_sum(&c2[b]) * abs_sum(&c3[a]);
            if !poly_is_negligible(&minor, bound) {
                return false;
            }
        }
    }
    true
}

/// `t̄ = inf { s : ∫_0^s ‖c2* + c3 h‖ > 0 }`, or `T`.
pub fn t_bar(sde: &LinearSde, x0: f64) -> f64 {
    let lower = t_underline(sde, x0);
    if lower >= sde.horizon() {
        return sde.horizon();
    }
    let start = sde.segment_index(lower);
    (start..sde.num_segments())
        .find(|&i| !residual_zero_on_segment(sde, i))
        .map_or(sde.horizon(), |i| sde.segment_bounds(i).0.max(lower))
}

struct HShape {
    has_pos: bool,
    has_neg: bool,
    increases: bool,
    decreases: bool,
    tau: Option<f64>,
    h_star: Option<f64>,
    samples: usize,
}

/// Sign and monotonicity of `h` on `[lo, t) ∩ {c3 ≠ 0}`.
fn analyze_h(sde: &LinearSde, x0: f64, lo: f64, t: f64) -> HShape {
    let cs = c2_star(sde, x0);
    let mut seq: Vec<(f64, f64)> = Vec::new();
    let mut last_seg: Option<(usize, f64)> = None;
    let span = t - lo;
    for i in 0..sde.num_segments() {
        let (a, b) = sde.segment_bounds(i);
        let (sa, sb) = (a.max(lo), b.min(t));
        if sa >= sb || sde.c3().segment_is_zero(i) {
            continue;
        }
        last_seg = Some((i, sb));
        let dc3: Vec<Poly> = sde.c3().segment(i).iter().map(Poly::derivative).collect();
        let n = MIN_SEGMENT_SAMPLES.max(((sb - sa) / span * TOTAL_SAMPLES as f64).ceil() as usize);
        for k in 0..=n {
            let s = sa + (sb - sa) * k as f64 / n as f64;
            if let Some(v) = h_with_slope(&cs, i, s, &dc3) {
                if v.0.is_finite() && v.1.is_finite() {
                    seq.push(v);
                }
            }
        }
    }
    let hmax = seq.iter().fold(1.0f64, |m, v| m.max(v.0.abs()));
    let dmax = seq.iter().fold(1.0f64, |m, v| m.max(v.1.abs()));
    let (m, md) = (SHAPE_MARGIN * hmax, SHAPE_MARGIN * dmax);
    let has_pos = seq.iter().any(|v| v.0 > m);
    let has_neg = seq.iter().any(|v| v.0 < -m);
    let increases = seq.iter().any(|v| v.1 > md) || seq.windows(2).any(|w| w[1].0 - w[0].0 > m);
    let decreases = seq.iter().any(|v| v.1 < -md) || seq.windows(2).any(|w| w[0].0 - w[1].0 > m);
    let (tau, h_star) = match last_seg {
        None => (Some(lo), None),
        Some((i, tau)) => {
            let mut buf = [vec![0.0; sde.dim()], vec![0.0; sde.dim()]];
            let c3n = norm(sde.c3().eval_segment(i, tau).into_iter());
            // A root of c3 exactly at the end: approach the limit from inside.
            let s = if c3n == 0.0 {
                let (a, _) = sde.segment_bounds(i);
                tau - 1e-9 * (tau - a.max(lo))
            } else {
                tau
            };
            (Some(tau), Some(h_segment(&cs, i, s, &mut buf)))
        }
    };
    HShape { has_pos, has_neg, increases, decreases, tau, h_star, samples: seq.len() }
}

/// Reachable states of `X(t)` from `X(0) = x0` and their closure, the support.
pub fn reachable_set(sde: &LinearSde, x0: f64, t: f64) -> Result<ReachResult> {
    sde.check_time(t)?;
    let t_underline = t_underline(sde, x0);
    let t_bar = t_bar(sde, x0);
    let tr = sde.transform();
    let (l0, l1) = (tr.lambda0(t), tr.lambda1(t));
    let mut diagnostics = ReachDiagnostics { t_underline, t_bar, tau_t: None, h_star: None, samples: 0 };
    let (branch, reachable) = if t <= t_underline {
        (Branch::Singleton, Interval::point(l0 + l1 * x0))
    } else if t > t_bar {
        (Branch::FullLineNoise, Interval::real_line())
    } else {
        let shape = analyze_h(sde, x0, t_underline, t);
        diagnostics.tau_t = shape.tau;
        diagnostics.h_star = shape.h_star;
        diagnostics.samples = shape.samples;
        let end = l0 + l1 * (x0 + shape.h_star.unwrap_or(0.0));
        if shape.has_pos && shape.has_neg {
            (Branch::SignChange, Interval::real_line())
        } else if !shape.has_pos {
            if shape.increases {
                (Branch::NonPositiveNotMonotone, Interval::real_line())
            } else {
                (Branch::NonPositiveHalfLine, Interval::lower_half_open(end))
            }
        } else if shape.decreases {
            (Branch::NonNegativeNotMonotone, Interval::real_line())
        } else {
            (Branch::NonNegativeHalfLine, Interval::upper_half_open(end))
        }
    };
    Ok(ReachResult { t, branch, reachable, support: reachable.closure(), diagnostics })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum GOutcome {
    Finite { value: f64 },
    Diverged { time: f64 },
}

impl GOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            GOutcome::Finite { value } => Some(*value),
            GOutcome::Diverged { .. } => None,
        }
    }
}

/// `g_k(t)` for `g' = k‖c2* + c3 g‖`, `g(0) = 0`, by RK4 with step-doubling
/// error control on breakpoint-aligned pieces.
pub fn g_extremal(sde: &LinearSde, x0: f64, k: f64, t: f64) -> Result<GOutcome> {
    const TOL: f64 = 1e-10;
    sde.check_time(t)?;
    if k == 0.0 || t == 0.0 {
        return Ok(GOutcome::Finite { value: 0.0 });
    }
    let cs = c2_star(sde, x0);
    let d = sde.dim();
    let c3max = (0..sde.num_segments())
        .flat_map(|i| {
            let (a, b) = sde.segment_bounds(i);
            chebyshev_nodes(a, b, 9).into_iter().chain([a, b]).map(move |s| (i, s))
        })
        .map(|(i, s)| norm(sde.c3().eval_segment(i, s).into_iter()))
        .fold(0.0f64, f64::max);
    let h_cap = if c3max > 0.0 { (0.5 / (k.abs() * c3max)).min(1e-3) } else { 1e-3 };
    let mut g = 0.0;
    let mut c2v = vec![0.0; d];
    let mut c3v = vec![0.0; d];
    let mut cuts: Vec<f64> = sde.breakpoints().iter().copied().filter(|&b| b < t).collect();
    cuts.push(t);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let i = sde.segment_index(0.5 * (a + b));
        let mut f = |s: f64, y: f64| {
            cs.eval_segment_into(i, s, &mut c2v);
            sde.c3().eval_segment_into(i, s, &mut c3v);
            k * norm(c2v.iter().zip(&c3v).map(|(p, q)| p + q * y))
        };
        let mut rk4 = |s: f64, y: f64, h: f64| {
            let k1 = f(s, y);
            let k2 = f(s + 0.5 * h, y + 0.5 * h * k1);
            let k3 = f(s + 0.5 * h, y + 0.5 * h * k2);
            let k4 = f(s + h, y + h * k3);
            y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        };
        let mut s = a;
        let mut h = h_cap;
        let h_min = 1e-12 * (b - a).max(1.0);
        while s < b {
            let step = h.min(b - s);
            let full = rk4(s, g, step);
            let half = rk4(s, g, 0.5 * step);
            let two = rk4(s + 0.5 * step, half, 0.5 * step);
            let err = (two - full).abs();
            if err <= TOL * (1.0 + two.abs()) || step <= h_min || !two.is_finite() {
                s = if step == b - s { b } else { s + step };
                g = two;
                if !g.is_finite() || g.abs() > DIVERGENCE_LEVEL {
                    return Ok(GOutcome::Diverged { time: s });
                }
                if err < TOL / 32.0 * (1.0 + two.abs()) {
                    h = (2.0 * h).min(h_cap);
                }
            } else {
                h = 0.5 * step;
            }
        }
    }
    Ok(GOutcome::Finite { value: g })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndEstimate {
    pub infinite: bool,
    /// Extrapolated limit of `g_k` in driftless coordinates.
    pub limit: Option<f64>,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportEstimate {
    pub t: f64,
    pub support: Interval,
    pub lower: EndEstimate,
    pub upper: EndEstimate,
    pub schedule: Vec<(f64, GOutcome)>,
}

/// Classify one end from `g_k` values ordered by increasing `|k|`.
fn judge_end(ks: &[f64], gs: &[GOutcome]) -> EndEstimate {
    if let Some(pos) = gs.iter().position(|g| g.value().is_none()) {
        return EndEstimate { infinite: true, limit: None, reason: format!("diverged at k = {}", ks[pos]) };
    }
    let v: Vec<f64> = gs.iter().filter_map(GOutcome::value).collect();
    for j in 1..v.len() {
        if v[j].abs() > 1e3 * (1.0 + v[j - 1].abs()) {
            return EndEstimate {
                infinite: true,
                limit: None,
                reason: format!("|g| jumped past 1e3 (1 + |previous|) at k = {}", ks[j]),
            };
        }
    }
    let n = v.len();
    if n >= 3 {
        let last = (v[n - 1] - v[n - 2]).abs();
        let prev = (v[n - 2] - v[n - 3]).abs();
        if last > 0.5 * prev + 1e-9 * (1.0 + v[n - 1].abs()) {
            return EndEstimate {
                infinite: true,
                limit: None,
                reason: "increments of g_k are not shrinking".into(),
            };
        }
    }
    let limit = if n >= 2 {
        let (k1, k2) = (ks[n - 2], ks[n - 1]);
        (k2 * v[n - 1] - k1 * v[n - 2]) / (k2 - k1)
    } else {
        v[n - 1]
    };
    EndEstimate { infinite: false, limit: Some(limit), reason: "converged".into() }
}

/// Support of `X(t)` estimated from `g_k` over a schedule of `k`.
pub fn support_numeric(sde: &LinearSde, x0: f64, t: f64, k_schedule: &[f64]) -> Result<SupportEstimate> {
    sde.check_time(t)?;
    let mut ks: Vec<f64> = k_schedule.to_vec();
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    let outcomes = ks
        .par_iter()
        .map(|&k| g_extremal(sde, x0, k, t))
        .collect::<Result<Vec<GOutcome>>>()?;
    let schedule: Vec<(f64, GOutcome)> = ks.iter().copied().zip(outcomes).collect();
    let side = |positive: bool| {
        let mut picked: Vec<(f64, GOutcome)> =
            schedule.iter().filter(|(k, _)| (*k > 0.0) == positive && *k != 0.0).copied().collect();
        picked.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
        let (k, g): (Vec<f64>, Vec<GOutcome>) = picked.into_iter().unzip();
        if k.is_empty() {
            EndEstimate { infinite: true, limit: None, reason: "no k on this side of the schedule".into() }
        } else {
            judge_end(&k, &g)
        }
    };
    let upper = side(true);
    let lower = side(false);
    let tr = sde.transform();
    let map = |g: f64| tr.lambda0(t) + tr.lambda1(t) * (x0 + g);
    let support = Interval {
        lo: lower.limit.filter(|_| !lower.infinite).map(map),
        hi: upper.limit.filter(|_| !upper.infinite).map(map),
        lo_open: lower.infinite,
        hi_open: upper.infinite,
    };
    Ok(SupportEstimate { t, support, lower, upper, schedule })
}
