//! Wealth dynamics of a dollar-amount portfolio strategy
//! `θ(t) = θ0(t) + θ1(t) X(t)` in `n` risky assets driven by `d` Brownian
//! motions: `dX = bᵀθ dt + θᵀσ dW`. This is a linear SDE with
//! `c0 = bᵀθ0`, `c1 = bᵀθ1`, `c2 = σᵀθ0`, `c3 = σᵀθ1`. Regime times and
//! reachable sets are computed directly on `(θ0, θ1)` and can be compared
//! with the general machinery applied to the derived model.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::piecewise::{merge_breakpoints, PiecewiseVecFn};
use crate::poly::Poly;
use crate::quadrature::{adaptive, chebyshev_nodes, DEFAULT_MAX_DEPTH};
use crate::reach::{h_fun, reachable_set, t_bar, t_underline, Branch, Interval, ReachDiagnostics, ReachResult};
use crate::regime::RegimeTimes;
use crate::sde::LinearSde;

pub const MAX_PORTFOLIO_DEGREE: usize = 1;
const PD_NODES: usize = 21;
const RATIO_TOL: f64 = 1e-12;
const SAMPLES_PER_SEGMENT: usize = 2000;
const SHAPE_MARGIN: f64 = 1e-9;

/// Strategy and market coefficients on a common partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct PortfolioSpec {
    n: usize,
    d: usize,
    theta0: PiecewiseVecFn,
    theta1: PiecewiseVecFn,
    b: PiecewiseVecFn,
    sigma: PiecewiseVecFn,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    n: usize,
    d: usize,
    theta0: PiecewiseVecFn,
    theta1: PiecewiseVecFn,
    b: PiecewiseVecFn,
    sigma: PiecewiseVecFn,
}

impl TryFrom<RawSpec> for PortfolioSpec {
    type Error = Error;

    fn try_from(r: RawSpec) -> Result<Self> {
        PortfolioSpec::new(r.n, r.d, r.theta0, r.theta1, r.b, r.sigma)
    }
}

impl From<PortfolioSpec> for RawSpec {
    fn from(s: PortfolioSpec) -> Self {
        RawSpec { n: s.n, d: s.d, theta0: s.theta0, theta1: s.theta1, b: s.b, sigma: s.sigma }
    }
}

/// `σ(t)σ(t)ᵀ` for the row-major `n × d` values in `sig`.
fn gram(sig: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            g[i * n + j] = (0..d).map(|k| sig[i * d + k] * sig[j * d + k]).sum();
        }
    }
    g
}

/// Cholesky succeeds with pivots above a relative floor.
fn is_positive_definite(m: &[f64], n: usize) -> bool {
    let scale = (0..n).map(|i| m[i * n + i].abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return false;
    }
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let diag = m[j * n + j] - (0..j).map(|k| l[j * n + k] * l[j * n + k]).sum::<f64>();
        if diag <= 1e-14 * scale {
            return false;
        }
        l[j * n + j] = diag.sqrt();
        for i in j + 1..n {
            let s = m[i * n + j] - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
            l[i * n + j] = s / l[j * n + j];
        }
    }
    true
}

impl PortfolioSpec {
    pub fn new(
        n: usize,
        d: usize,
        theta0: PiecewiseVecFn,
        theta1: PiecewiseVecFn,
        b: PiecewiseVecFn,
        sigma: PiecewiseVecFn,
    ) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidModel("n and d must be positive".into()));
        }
        for (name, f, want) in [("theta0", &theta0, n), ("theta1", &theta1, n), ("b", &b, n), ("sigma", &sigma, n * d)] {
            if f.dim() != want {
                return Err(Error::InvalidModel(format!("{name} has dim {}, expected {want}", f.dim())));
            }
            let deg = f.max_degree();
            if deg > MAX_PORTFOLIO_DEGREE {
                return Err(Error::DegreeOverflow { degree: deg, max: MAX_PORTFOLIO_DEGREE });
            }
        }
        let merged = merge_breakpoints(&[theta0, theta1, b, sigma])?;
        let [theta0, theta1, b, sigma]: [PiecewiseVecFn; 4] = merged.try_into().expect("four inputs");
        for i in 0..sigma.num_segments() {
            let (lo, hi) = sigma.segment_bounds(i);
            let mut nodes = chebyshev_nodes(lo, hi, PD_NODES);
            nodes.extend([lo, hi]);
            for s in nodes {
                if !is_positive_definite(&gram(&sigma.eval_segment(i, s), n, d), n) {
                    return Err(Error::AssumptionViolation(format!(
                        "sigma sigma^T is not positive definite at t = {s}"
                    )));
                }
            }
        }
        Ok(PortfolioSpec { n, d, theta0, theta1, b, sigma })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn horizon(&self) -> f64 {
        self.theta0.horizon()
    }

    pub fn theta0(&self) -> &PiecewiseVecFn {
        &self.theta0
    }

    pub fn theta1(&self) -> &PiecewiseVecFn {
        &self.theta1
    }

    pub fn b(&self) -> &PiecewiseVecFn {
        &self.b
    }

    pub fn sigma(&self) -> &PiecewiseVecFn {
        &self.sigma
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon()).contains(&t) {
            return Err(domain(format!("time {t} outside [0, {}]", self.horizon())));
        }
        Ok(())
    }

    fn num_segments(&self) -> usize {
        self.theta0.num_segments()
    }

    fn segment_bounds(&self, i: usize) -> (f64, f64) {
        self.theta0.segment_bounds(i)
    }

    /// `bᵀθ` on segment `i` as a polynomial.
    fn b_dot(&self, i: usize, theta: &PiecewiseVecFn) -> Poly {
        self.b
            .segment(i)
            .iter()
            .zip(theta.segment(i))
            .fold(Poly::zero(), |acc, (p, q)| acc.add(&p.mul(q)))
    }

    /// `σᵀθ` on segment `i`, one polynomial per Brownian component.
    fn sigma_t(&self, i: usize, theta: &PiecewiseVecFn) -> Vec<Poly> {
        let sig = self.sigma.segment(i);
        let th = theta.segment(i);
        (0..self.d)
            .map(|j| (0..self.n).fold(Poly::zero(), |acc, k| acc.add(&sig[k * self.d + j].mul(&th[k]))))
            .collect()
    }
}

/// The linear SDE of the wealth process.
pub fn to_linear(spec: &PortfolioSpec) -> Result<LinearSde> {
    let bps = spec.theta0.breakpoints().to_vec();
    let t = spec.horizon();
    let segs = spec.num_segments();
    let c0 = (0..segs).map(|i| vec![spec.b_dot(i, &spec.theta0)]).collect();
    let c1 = (0..segs).map(|i| vec![spec.b_dot(i, &spec.theta1)]).collect();
    let c2 = (0..segs).map(|i| spec.sigma_t(i, &spec.theta0)).collect();
    let c3 = (0..segs).map(|i| spec.sigma_t(i, &spec.theta1)).collect();
    LinearSde::new(
        PiecewiseVecFn::new(1, t, bps.clone(), c0)?,
        PiecewiseVecFn::new(1, t, bps.clone(), c1)?,
        PiecewiseVecFn::new(spec.d, t, bps.clone(), c2)?,
        PiecewiseVecFn::new(spec.d, t, bps, c3)?,
    )
}

fn coeff_scale(ps: &[Poly]) -> f64 {
    ps.iter().flat_map(|p| p.coeffs().iter().map(|c| c.abs())).fold(0.0, f64::max)
}

/// `θ0 + ξ θ1 ≡ 0` on segment `i`, coefficient by coefficient.
fn proportional_with(spec: &PortfolioSpec, i: usize, xi: f64) -> bool {
    let th0 = spec.theta0.segment(i);
    let th1 = spec.theta1.segment(i);
    let bound = coeff_scale(th0) + xi.abs() * coeff_scale(th1);
    th0.iter()
        .zip(th1)
        .all(|(p, q)| p.add(&q.scale(xi)).coeffs().iter().all(|c| c.abs() <= RATIO_TOL * bound))
}

/// `ξ = −θ0/θ1` read off the largest coefficient of `θ1` on segment `i`.
fn ratio_candidate(spec: &PortfolioSpec, i: usize) -> f64 {
    let th0 = spec.theta0.segment(i);
    let th1 = spec.theta1.segment(i);
    let mut best = (0.0f64, 0.0f64);
    for (p, q) in th0.iter().zip(th1) {
        for (k, &c) in q.coeffs().iter().enumerate() {
            if c.abs() > best.1.abs() {
                best = (p.coeffs().get(k).copied().unwrap_or(0.0), c);
            }
        }
    }
    -best.0 / best.1
}

/// Regime times from exact tests on `(θ0, θ1)`.
pub fn port_regime(spec: &PortfolioSpec) -> RegimeTimes {
    let mut i = spec.num_segments();
    while i > 0 && spec.theta0.segment_is_zero(i - 1) && spec.theta1.segment_is_zero(i - 1) {
        i -= 1;
    }
    let t_star = spec.theta0.breakpoints()[i];
    let mut xi: Option<f64> = None;
    let mut lower = t_star;
    while i > 0 {
        let k = i - 1;
        if spec.theta1.segment_is_zero(k) {
            if !spec.theta0.segment_is_zero(k) {
                break;
            }
        } else {
            let cand = *xi.get_or_insert_with(|| ratio_candidate(spec, k));
            if !proportional_with(spec, k, cand) {
                break;
            }
        }
        lower = spec.segment_bounds(k).0;
        i -= 1;
    }
    if lower == t_star {
        xi = None;
    }
    RegimeTimes { t_star, t_lower_star: lower, xi: xi.map(|v| v + 0.0), identity_residual: 0.0 }
}

/// `ξ̃(t)`, which equals `ξ` on `[t_*, T]`; `None` before `t_*` or when
/// there is no degeneracy level.
pub fn port_xi_tilde(spec: &PortfolioSpec, t: f64) -> Option<f64> {
    let r = port_regime(spec);
    r.xi.filter(|_| t >= r.t_lower_star)
}

/// `h̃ = −θ0ᵀσσᵀθ1 / ‖σᵀθ1‖²` on segment `i` as numerator and denominator
/// polynomials.
fn tilde_h_parts(spec: &PortfolioSpec, i: usize) -> (Poly, Poly) {
    let s0 = spec.sigma_t(i, &spec.theta0);
    let s1 = spec.sigma_t(i, &spec.theta1);
    let num = s0.iter().zip(&s1).fold(Poly::zero(), |acc, (p, q)| acc.add(&p.mul(q)));
    let den = s1.iter().fold(Poly::zero(), |acc, q| acc.add(&q.mul(q)));
    (num.scale(-1.0), den)
}

fn tilde_h_segment(spec: &PortfolioSpec, i: usize, t: f64) -> f64 {
    if spec.theta1.segment(i).iter().all(|p| p.eval(t) == 0.0) {
        return 0.0;
    }
    let (num, den) = tilde_h_parts(spec, i);
    num.eval(t) / den.eval(t)
}

/// `h̃(t)`, right-continuous, zero where `θ1(t) = 0`.
pub fn tilde_h(spec: &PortfolioSpec, t: f64) -> Result<f64> {
    spec.check_time(t)?;
    Ok(tilde_h_segment(spec, spec.theta0.segment_index(t), t))
}

/// `∫_0^t bᵀθ1`, exact.
fn growth_integral(spec: &PortfolioSpec, t: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..spec.num_segments() {
        let (a, b) = spec.segment_bounds(i);
        if a >= t {
            break;
        }
        let anti = spec.b_dot(i, &spec.theta1).antiderivative();
        acc += anti.eval(b.min(t)) - anti.eval(a);
    }
    acc
}

/// Noise-free wealth `x*(t)` by direct quadrature of its defining integral.
pub fn x_star_path(spec: &PortfolioSpec, x0: f64, t: f64) -> Result<f64> {
    spec.check_time(t)?;
    let at = growth_integral(spec, t);
    let mut total = x0 * at.exp();
    for i in 0..spec.num_segments() {
        let (a, b) = spec.segment_bounds(i);
        if a >= t {
            break;
        }
        let c0 = spec.b_dot(i, &spec.theta0);
        if c0.is_zero() {
            continue;
        }
        let anti = spec.b_dot(i, &spec.theta1).antiderivative();
        let base = growth_integral(spec, a) - anti.eval(a);
        let f = |s: f64| c0.eval(s) * (at - base - anti.eval(s)).exp();
        total += adaptive(&f, a, b.min(t), 1e-13, DEFAULT_MAX_DEPTH)?;
    }
    Ok(total)
}

fn theta1_nonzero_at(spec: &PortfolioSpec, i: usize, t: f64) -> bool {
    spec.theta1.segment(i).iter().any(|p| p.eval(t) != 0.0)
}

/// Largest deviation of the general `h` from `e^{−∫bᵀθ1} [h̃ − x* 1{θ1 ≠ 0}]`
/// over `grid`.
pub fn h_identity_check(spec: &PortfolioSpec, x0: f64, grid: &[f64]) -> Result<f64> {
    let sde = to_linear(spec)?;
    let mut worst: f64 = 0.0;
    for &t in grid {
        spec.check_time(t)?;
        let i = spec.theta0.segment_index(t);
        let general = h_fun(&sde, x0, t)?;
        let indicator = if theta1_nonzero_at(spec, i, t) { 1.0 } else { 0.0 };
        let special = (-growth_integral(spec, t)).exp() * (tilde_h(spec, t)? - x_star_path(spec, x0, t)? * indicator);
        worst = worst.max((general - special).abs());
    }
    Ok(worst)
}

/// `t̲ = inf { s : θ0(s) + x0 θ1(s) ≠ 0 }`.
pub fn port_t_underline(spec: &PortfolioSpec, x0: f64) -> f64 {
    (0..spec.num_segments())
        .find(|&i| !proportional_with(spec, i, x0))
        .map_or(spec.horizon(), |i| spec.segment_bounds(i).0)
}

/// `θ0 ∥ θ1` on segment `i` (so `θ0 + h̃ θ1 ≡ 0`), by exact 2×2 minors.
fn parallel_on_segment(spec: &PortfolioSpec, i: usize) -> bool {
    let th0 = spec.theta0.segment(i);
    let th1 = spec.theta1.segment(i);
    if spec.theta1.segment_is_zero(i) {
        return spec.theta0.segment_is_zero(i);
    }
    let bound = coeff_scale(th0) * coeff_scale(th1) * 2.0;
    for a in 0..spec.n {
        for b in a + 1..spec.n {
            let minor = th0[a].mul(&th1[b]).add(&th0[b].mul(&th1[a]).scale(-1.0));
            if minor.coeffs().iter().any(|c| c.abs() > RATIO_TOL * bound) {
                return false;
            }
        }
    }
    true
}

/// `t̄ = inf { s : ∫_0^s ‖θ0 + h̃ θ1‖ > 0 }`.
pub fn port_t_bar(spec: &PortfolioSpec, x0: f64) -> f64 {
    let lower = port_t_underline(spec, x0);
    if lower >= spec.horizon() {
        return spec.horizon();
    }
    (spec.theta0.segment_index(lower)..spec.num_segments())
        .find(|&i| !parallel_on_segment(spec, i))
        .map_or(spec.horizon(), |i| spec.segment_bounds(i).0.max(lower))
}

/// Does `θ1` vanish somewhere in the open interval `(lo, hi)`?
fn theta1_vanishes_in(spec: &PortfolioSpec, lo: f64, hi: f64) -> bool {
    for i in 0..spec.num_segments() {
        let (a, b) = spec.segment_bounds(i);
        let (sa, sb) = (a.max(lo), b.min(hi));
        if sa >= sb {
            continue;
        }
        let th1 = spec.theta1.segment(i);
        let Some(lead) = th1.iter().find(|p| !p.is_zero()) else {
            return true;
        };
        let scale = coeff_scale(th1).max(f64::MIN_POSITIVE);
        for r in lead.real_roots_in(sa, sb) {
            if r > lo && r < hi && th1.iter().all(|p| p.eval(r).abs() <= RATIO_TOL * scale) {
                return true;
            }
        }
    }
    false
}

/// Reachable set result together with whether the specialised branches
/// applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortReach {
    pub result: ReachResult,
    pub specialized: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub notice: Option<String>,
}

/// Reachable wealth levels at `t`, from the sign of `h̃ − x*` and the
/// monotonicity of `h̃`. Falls back to the general computation when `t` is
/// outside `(t̲, t̄]` or `θ1` vanishes on `(t̲, t)`.
pub fn port_reach(spec: &PortfolioSpec, x0: f64, t: f64) -> Result<PortReach> {
    spec.check_time(t)?;
    let lower = port_t_underline(spec, x0);
    let upper = port_t_bar(spec, x0);
    let fallback = |why: String| -> Result<PortReach> {
        let sde = to_linear(spec)?;
        Ok(PortReach { result: reachable_set(&sde, x0, t)?, specialized: false, notice: Some(why) })
    };
    if !(t > lower && t <= upper) {
        return fallback(format!("t = {t} lies outside (t_underline, t_bar] = ({lower}, {upper}]; general branches used"));
    }
    if theta1_vanishes_in(spec, lower, t) {
        return fallback("theta1 vanishes inside (t_underline, t); general branches used".into());
    }
    let mut samples: Vec<(f64, f64, f64)> = Vec::new();
    let mut last = None;
    for i in 0..spec.num_segments() {
        let (a, b) = spec.segment_bounds(i);
        let (sa, sb) = (a.max(lower), b.min(t));
        if sa >= sb {
            continue;
        }
        last = Some(i);
        let (num, den) = tilde_h_parts(spec, i);
        let (dnum, dden) = (num.derivative(), den.derivative());
        for k in 0..=SAMPLES_PER_SEGMENT {
            let s = sa + (sb - sa) * k as f64 / SAMPLES_PER_SEGMENT as f64;
            // Open interval at t_underline.
            if s == lower {
                continue;
            }
            let (nv, dv) = (num.eval(s), den.eval(s));
            let slope = (dnum.eval(s) * dv - nv * dden.eval(s)) / (dv * dv);
            samples.push((nv / dv, slope, x_star_path(spec, x0, s)?));
        }
    }
    let hmax = samples.iter().fold(1.0f64, |m, v| m.max(v.0.abs()).max(v.2.abs()));
    let dmax = samples.iter().fold(1.0f64, |m, v| m.max(v.1.abs()));
    let (m, md) = (SHAPE_MARGIN * hmax, SHAPE_MARGIN * dmax);
    let below = samples.iter().any(|v| v.0 < v.2 - m);
    let above = samples.iter().any(|v| v.0 > v.2 + m);
    let increases = samples.iter().any(|v| v.1 > md) || samples.windows(2).any(|w| w[1].0 - w[0].0 > m);
    let decreases = samples.iter().any(|v| v.1 < -md) || samples.windows(2).any(|w| w[0].0 - w[1].0 > m);
    let end = last.map_or(0.0, |i| tilde_h_segment(spec, i, t));
    let (branch, reachable) = if below && above {
        (Branch::SignChange, Interval::real_line())
    } else if !above {
        if increases {
            (Branch::NonPositiveNotMonotone, Interval::real_line())
        } else {
            (Branch::NonPositiveHalfLine, Interval::lower_half_open(end))
        }
    } else if decreases {
        (Branch::NonNegativeNotMonotone, Interval::real_line())
    } else {
        (Branch::NonNegativeHalfLine, Interval::upper_half_open(end))
    };
    let half_line = matches!(branch, Branch::NonPositiveHalfLine | Branch::NonNegativeHalfLine);
    let diagnostics = ReachDiagnostics {
        t_underline: lower,
        t_bar: upper,
        tau_t: Some(t),
        h_star: half_line.then_some(end),
        samples: samples.len(),
    };
    Ok(PortReach {
        result: ReachResult { t, branch, reachable, support: reachable.closure(), diagnostics },
        specialized: true,
        notice: None,
    })
}

/// Consistency of the θ-level times with the general ones on the derived SDE.
pub fn general_times(spec: &PortfolioSpec, x0: f64) -> Result<(f64, f64)> {
    let sde = to_linear(spec)?;
    Ok((t_underline(&sde, x0), t_bar(&sde, x0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> PiecewiseVecFn {
        PiecewiseVecFn::scalar_constant(1.0, v).unwrap()
    }

    fn lin(c0: f64, c1: f64) -> PiecewiseVecFn {
        PiecewiseVecFn::polynomial(1.0, vec![Poly::new(vec![c0, c1])]).unwrap()
    }

    fn spec(theta0: PiecewiseVecFn, theta1: PiecewiseVecFn) -> PortfolioSpec {
        PortfolioSpec::new(1, 1, theta0, theta1, scalar(1.0), scalar(1.0)).unwrap()
    }

    fn worked() -> PortfolioSpec {
        let th0 = PiecewiseVecFn::step(1.0, vec![0.0, 0.5, 1.0], vec![vec![1.0], vec![-2.0]]).unwrap();
        spec(th0, scalar(1.0))
    }

    #[test]
    fn to_linear_examples() {
        let s = to_linear(&spec(scalar(1.0), scalar(0.0))).unwrap();
        assert_eq!(
            (s.c0().value(0.3), s.c1().value(0.3), s.c2().value(0.3), s.c3().value(0.3)),
            (1.0, 0.0, 1.0, 0.0)
        );
        let s = to_linear(&spec(scalar(0.0), scalar(1.0))).unwrap();
        assert_eq!(
            (s.c0().value(0.3), s.c1().value(0.3), s.c2().value(0.3), s.c3().value(0.3)),
            (0.0, 1.0, 0.0, 1.0)
        );
        let s = to_linear(&spec(scalar(-1.5), scalar(1.0))).unwrap();
        assert_eq!(t_underline(&s, 1.5), 1.0);
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        let quad = PiecewiseVecFn::polynomial(1.0, vec![Poly::new(vec![0.0, 0.0, 1.0])]).unwrap();
        assert!(matches!(
            PortfolioSpec::new(1, 1, quad, scalar(1.0), scalar(1.0), scalar(1.0)),
            Err(Error::DegreeOverflow { degree: 2, max: 1 })
        ));
        assert!(matches!(
            PortfolioSpec::new(1, 1, scalar(1.0), scalar(1.0), scalar(1.0), lin(-0.5, 1.0)),
            Err(Error::AssumptionViolation(_))
        ));
        // two assets driven by one Brownian motion: σσᵀ singular
        let sig = PiecewiseVecFn::constant(1.0, &[1.0, 2.0]).unwrap();
        let two = PiecewiseVecFn::constant(1.0, &[1.0, 1.0]).unwrap();
        assert!(matches!(
            PortfolioSpec::new(2, 1, two.clone(), two.clone(), two, sig),
            Err(Error::AssumptionViolation(_))
        ));
    }

    #[test]
    fn regime_examples() {
        let r = port_regime(&spec(scalar(1.0), scalar(0.0)));
        assert_eq!((r.t_star, r.t_lower_star, r.xi), (1.0, 1.0, None));
        let r = port_regime(&worked());
        assert_eq!((r.t_star, r.t_lower_star, r.xi), (1.0, 0.5, Some(2.0)));
        assert_eq!(port_xi_tilde(&worked(), 0.7), Some(2.0));
        assert_eq!(port_xi_tilde(&worked(), 0.2), None);
        let r = port_regime(&spec(lin(-3.0, -1.5), lin(1.0, 0.5)));
        assert_eq!((r.t_lower_star, r.xi), (0.0, Some(3.0)));
    }

    #[test]
    fn tilde_h_examples() {
        let s = PortfolioSpec::new(
            1,
            1,
            scalar(1.0),
            PiecewiseVecFn::step(1.0, vec![0.0, 0.5, 1.0], vec![vec![0.0], vec![1.0]]).unwrap(),
            scalar(1.0),
            scalar(1.0),
        )
        .unwrap();
        assert_eq!(tilde_h(&s, 0.2).unwrap(), 0.0);
        assert_eq!(tilde_h(&spec(lin(0.0, 1.0), scalar(1.0)), 0.35).unwrap(), -0.35);
        let s = PortfolioSpec::new(1, 1, lin(-2.0, -1.0), lin(1.0, 0.5), scalar(0.3), lin(0.5, 1.0)).unwrap();
        assert!((tilde_h(&s, 0.6).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn x_star_examples() {
        assert_eq!(x_star_path(&spec(scalar(0.0), scalar(0.0)), 1.7, 0.8).unwrap(), 1.7);
        assert!((x_star_path(&spec(scalar(1.0), scalar(0.0)), 0.0, 0.6).unwrap() - 0.6).abs() < 1e-14);
        assert!((x_star_path(&spec(scalar(0.0), scalar(1.0)), 1.0, 0.6).unwrap() - 0.6f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn h_identity_examples() {
        let grid: Vec<f64> = (0..100).map(|k| k as f64 / 100.0).collect();
        assert_eq!(h_identity_check(&spec(scalar(1.0), scalar(0.0)), 0.0, &grid).unwrap(), 0.0);
        assert!(h_identity_check(&spec(lin(0.0, 1.0), scalar(1.0)), 0.0, &grid).unwrap() <= 1e-10);
        assert!(h_identity_check(&spec(scalar(-0.8), scalar(1.0)), 0.8, &grid).unwrap() <= 1e-12);
    }

    #[test]
    fn reach_examples() {
        let r = port_reach(&spec(lin(0.0, 1.0), scalar(1.0)), 0.0, 0.7).unwrap();
        assert!(r.specialized);
        assert_eq!(r.result.branch, Branch::NonPositiveHalfLine);
        assert!((r.result.reachable.lo.unwrap() + 0.7).abs() < 1e-15);
        let r = port_reach(&spec(scalar(1.0), scalar(1.0)), 0.0, 0.4).unwrap();
        assert_eq!(r.result.branch, Branch::NonPositiveHalfLine);
        assert_eq!(r.result.reachable.lo, Some(-1.0));
        let r = port_reach(&spec(scalar(-0.5), scalar(1.0)), 0.5, 0.9).unwrap();
        assert!(!r.specialized);
        let pt = r.result.reachable;
        assert_eq!(pt.lo, pt.hi);
        assert!((pt.lo.unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn theta_level_times_match_general() {
        for s in [worked(), spec(lin(0.0, 1.0), scalar(1.0)), spec(scalar(-0.5), scalar(1.0))] {
            for x0 in [0.0, 0.5] {
                let (gl, gb) = general_times(&s, x0).unwrap();
                assert_eq!((port_t_underline(&s, x0), port_t_bar(&s, x0)), (gl, gb));
            }
        }
    }
}
