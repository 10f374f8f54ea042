//! Regime times and the four-way classification of the transition law.
//!
//! `t*` is the first time after which both diffusion coefficients of the
//! terminal-anchored driftless process vanish. `t_*` is the first time after
//! which the diffusion is proportional, `c̃2* + ξ c3 ≡ 0`, for one constant
//! `ξ`. Zero tests on `c2`, `c3` are exact. The proportionality identity
//! involves exponential factors and is checked at Chebyshev nodes with a
//! relative residual threshold.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::poly::Poly;
use crate::quadrature::{adaptive, chebyshev_nodes, DEFAULT_MAX_DEPTH};
use crate::sde::LinearSde;
use crate::transform::tilde_c2_star;

pub const IDENTITY_NODES: usize = 21;
pub const IDENTITY_TOL: f64 = 1e-10;
pub const IDENTITY_WARN: f64 = 1e-6;
/// Relative tolerance for deciding `x = ξ̃(t)`.
pub const ATOM_TOL: f64 = 1e-12;

/// Regime times of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeTimes {
    pub t_star: f64,
    pub t_lower_star: f64,
    /// Degeneracy level at the horizon; present iff `t_lower_star < t_star`.
    pub xi: Option<f64>,
    /// Largest relative residual of the proportionality identity accepted
    /// while extending `t_*` (0 when no numeric check was needed).
    pub identity_residual: f64,
}

impl RegimeTimes {
    /// True when an accepted residual lies in the warning band, so the
    /// shifted-lognormal verdict should be treated with care.
    pub fn borderline(&self) -> bool {
        self.identity_residual > IDENTITY_TOL
    }
}

/// Law of `X(T)` given `X(t) = x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", content = "params")]
pub enum CaseTag {
    Degenerate,
    Gaussian { b_t: f64 },
    ShiftedLognormal { xi: f64, a_bar: f64, b_bar: f64 },
    NonDegenerate,
}

impl CaseTag {
    pub fn name(&self) -> &'static str {
        match self {
            CaseTag::Degenerate => "Degenerate",
            CaseTag::Gaussian { .. } => "Gaussian",
            CaseTag::ShiftedLognormal { .. } => "ShiftedLognormal",
            CaseTag::NonDegenerate => "NonDegenerate",
        }
    }

    pub fn is_closed_form(&self) -> bool {
        !matches!(self, CaseTag::NonDegenerate)
    }
}

/// Regime times together with the case at one query time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub t_star: f64,
    pub t_lower_star: f64,
    pub xi: Option<f64>,
    pub case: CaseTag,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
}

fn segment_c3_zero(sde: &LinearSde, i: usize) -> bool {
    sde.c3().segment_is_zero(i)
}

fn segment_c2_zero(sde: &LinearSde, i: usize) -> bool {
    sde.c2().segment_is_zero(i)
}

/// `inf { t : c̃2* = c3 = 0 on [t, T) }`.
pub fn compute_t_star(sde: &LinearSde) -> f64 {
    let mut i = sde.num_segments();
    while i > 0 && segment_c2_zero(sde, i - 1) && segment_c3_zero(sde, i - 1) {
        i -= 1;
    }
    sde.breakpoints()[i]
}

/// Scale-relative residual of `c̃2* + ξ c3` at the nodes of segment `i`.
fn identity_residual(sde: &LinearSde, i: usize, xi: f64) -> f64 {
    let (a, b) = sde.segment_bounds(i);
    let tc = tilde_c2_star(sde);
    let tr = sde.transform();
    let d = sde.dim();
    let mut tc_v = vec![0.0; d];
    let mut c2_v = vec![0.0; d];
    let mut c3_v = vec![0.0; d];
    let mut worst: f64 = 0.0;
    for s in chebyshev_nodes(a, b, IDENTITY_NODES) {
        tc.eval_segment_into(i, s, &mut tc_v);
        sde.c2().eval_segment_into(i, s, &mut c2_v);
        sde.c3().eval_segment_into(i, s, &mut c3_v);
        let res = norm(tc_v.iter().zip(&c3_v).map(|(p, q)| p + xi * q));
        let scale = norm(c2_v.iter().copied()) * tr.tilde_lambda1(s)
            + norm(c3_v.iter().copied()) * (xi.abs() + tr.tilde_lambda0(s).abs());
        if res > 0.0 {
            worst = worst.max(if scale > 0.0 { res / scale } else { f64::INFINITY });
        }
    }
    worst
}

pub(crate) fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// `ξ = −c̃2*·c3 / ‖c3‖²` at the node of segment `i` where `‖c3‖` is largest.
fn xi_candidate(sde: &LinearSde, i: usize) -> f64 {
    let (a, b) = sde.segment_bounds(i);
    let d = sde.dim();
    let mut c3_v = vec![0.0; d];
    let mut best = (f64::NEG_INFINITY, a);
    for s in chebyshev_nodes(a, b, IDENTITY_NODES) {
        sde.c3().eval_segment_into(i, s, &mut c3_v);
        let n2: f64 = c3_v.iter().map(|x| x * x).sum();
        if n2 > best.0 {
            best = (n2, s);
        }
    }
    let s = best.1;
    let mut tc_v = vec![0.0; d];
    tilde_c2_star(sde).eval_segment_into(i, s, &mut tc_v);
    sde.c3().eval_segment_into(i, s, &mut c3_v);
    -tc_v.iter().zip(&c3_v).map(|(p, q)| p * q).sum::<f64>() / best.0
}

/// `t_*` and `ξ`, scanning left from `t*` one segment at a time. Returns the
/// worst accepted relative residual as the third component.
pub fn compute_t_lower_star(sde: &LinearSde, t_star: f64) -> (f64, Option<f64>, f64) {
    let mut i = sde.c0().segment_index_left(t_star);
    if t_star <= 0.0 {
        return (t_star, None, 0.0);
    }
    let mut xi: Option<f64> = None;
    let mut worst: f64 = 0.0;
    let mut lower = t_star;
    loop {
        if segment_c3_zero(sde, i) {
            if !segment_c2_zero(sde, i) {
                break;
            }
        } else {
            let cand = *xi.get_or_insert_with(|| xi_candidate(sde, i));
            let r = identity_residual(sde, i, cand);
            if r > IDENTITY_TOL {
                break;
            }
            worst = worst.max(r);
        }
        lower = sde.segment_bounds(i).0;
        if i == 0 {
            break;
        }
        i -= 1;
    }
    if lower == t_star {
        return (t_star, None, 0.0);
    }
    // Segments with c2 ≡ c3 ≡ 0 accept any level; ξ is then whatever the
    // nonzero segments fixed. The segment just left of t* always has c3 ≢ 0
    // when the extension is nonempty, so ξ is set here.
    (lower, xi, worst)
}

/// Regime times, computed from scratch.
pub fn analyze(sde: &LinearSde) -> RegimeTimes {
    let t_star = compute_t_star(sde);
    let (t_lower_star, xi, identity_residual) = compute_t_lower_star(sde, t_star);
    // adding +0.0 turns a signed zero into a plain zero
    let xi = xi.map(|v| v + 0.0);
    RegimeTimes { t_star, t_lower_star, xi, identity_residual }
}

/// `∫_t^T ‖c3‖²`, exact.
pub fn c3_energy(sde: &LinearSde, t: f64) -> f64 {
    let mut total = 0.0;
    for i in sde.segment_index(t)..sde.num_segments() {
        let (a, b) = sde.segment_bounds(i);
        let a = a.max(t);
        if a >= b {
            continue;
        }
        let sq = sde.c3().segment(i).iter().fold(Poly::zero(), |acc, p| acc.add(&p.mul(p)));
        let anti = sq.antiderivative();
        total += anti.eval(b) - anti.eval(a);
    }
    total
}

/// `∫_t^T ‖c̃2*‖²` by adaptive quadrature per segment.
pub fn tilde_c2_energy(sde: &LinearSde, t: f64) -> Result<f64> {
    let tc = tilde_c2_star(sde);
    let d = sde.dim();
    let mut total = 0.0;
    for i in sde.segment_index(t)..sde.num_segments() {
        let (a, b) = sde.segment_bounds(i);
        let a = a.max(t);
        if a >= b || (segment_c2_zero(sde, i) && segment_c3_zero(sde, i)) {
            continue;
        }
        let f = |s: f64| {
            let mut v = vec![0.0; d];
            tc.eval_segment_into(i, s, &mut v);
            v.iter().map(|x| x * x).sum::<f64>()
        };
        total += adaptive(&f, a, b, 1e-14, DEFAULT_MAX_DEPTH)?;
    }
    Ok(total)
}

/// The law of `X(T)` given `X(t)`, for `t` in `[0, T)`.
pub fn classify_at(sde: &LinearSde, t: f64) -> Result<CaseTag> {
    sde.check_time_open(t)?;
    let reg = sde.regime();
    if t >= reg.t_star {
        return Ok(CaseTag::Degenerate);
    }
    if let Some(xi) = reg.xi {
        if t >= reg.t_lower_star {
            let b_bar = c3_energy(sde, t).sqrt();
            return Ok(CaseTag::ShiftedLognormal { xi, a_bar: -0.5 * b_bar * b_bar, b_bar });
        }
    }
    if sde.c3().is_zero_on(t, sde.horizon()) {
        return Ok(CaseTag::Gaussian { b_t: tilde_c2_energy(sde, t)?.sqrt() });
    }
    Ok(CaseTag::NonDegenerate)
}

pub fn report_at(sde: &LinearSde, t: f64) -> Result<RegimeReport> {
    let case = classify_at(sde, t)?;
    let reg = sde.regime();
    let warning = reg.borderline().then(|| {
        format!(
            "proportionality identity accepted with relative residual {:.3e}; shifted-lognormal verdict is borderline",
            reg.identity_residual
        )
    });
    Ok(RegimeReport { t_star: reg.t_star, t_lower_star: reg.t_lower_star, xi: reg.xi, case, warning })
}

/// `x = ξ̃(t)` up to the atom tolerance; only meaningful when `ξ` exists.
pub(crate) fn is_atom(sde: &LinearSde, t: f64, x: f64) -> Option<f64> {
    let reg = sde.regime();
    let xi = reg.xi?;
    if t < reg.t_lower_star || t >= reg.t_star {
        return None;
    }
    let tr = sde.transform();
    let xt = (xi - tr.tilde_lambda0(t)) / tr.tilde_lambda1(t);
    ((x - xt).abs() <= ATOM_TOL * (1.0 + xt.abs())).then_some(xt)
}

/// Whether the law of `X(T)` given `X(t) = x` has a density.
pub fn has_density(sde: &LinearSde, t: f64, x: f64) -> Result<bool> {
    sde.check_time_open(t)?;
    if t >= sde.regime().t_star {
        return Ok(false);
    }
    Ok(is_atom(sde, t, x).is_none())
}
