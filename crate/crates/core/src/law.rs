//! Transition CDF, density and quantile of `X(T)` given `X(t) = x`, with
//! their sensitivities and a finite-difference check of the backward
//! equation. Closed forms cover the degenerate, Gaussian and shifted
//! lognormal cases; the general case is estimated from the path oracle.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{domain, Error, Result};
use crate::oracle::{dkw_band, empirical_cdf, empirical_quantile, simulate_terminal, SamplePool, SimConfig};
use crate::regime::{classify_at, is_atom, CaseTag};
use crate::sde::LinearSde;

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile: an `erfc_inv` start polished by Halley steps
/// on the lower tail, where `Φ` keeps full relative precision.
pub fn norm_inv(p: f64) -> f64 {
    if p > 0.5 {
        return -norm_inv(1.0 - p);
    }
    let mut x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    for _ in 0..2 {
        let e = norm_cdf(x) - p;
        let u = e / norm_pdf(x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Provenance {
    ClosedForm,
    MonteCarlo { n_paths: usize, n_steps: usize, seed: u64, dkw_band: f64 },
}

/// A reported value with where it came from and its uncertainty, if any.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub provenance: Provenance,
    pub error_band: Option<f64>,
}

/// The law of `X(T)` given `X(t) = x`.
#[derive(Clone, Debug)]
pub struct TransitionLaw {
    case: CaseTag,
    t: f64,
    x: f64,
    /// `λ̃0(t) + λ̃1(t) x`, the deterministic image of `x` at the horizon.
    x_hat: f64,
    slope: f64,
    /// Set when `x` is the absorbed level `ξ̃(t)`.
    atom: Option<f64>,
    pool: Option<SamplePool>,
}

impl TransitionLaw {
    /// Closed form where available, otherwise Monte Carlo with the default
    /// configuration.
    pub fn new(sde: &LinearSde, t: f64, x: f64) -> Result<Self> {
        Self::with_config(sde, t, x, SimConfig::default())
    }

    pub fn with_config(sde: &LinearSde, t: f64, x: f64, cfg: SimConfig) -> Result<Self> {
        let case = classify_at(sde, t)?;
        if !x.is_finite() {
            return Err(domain(format!("state must be finite, got {x}")));
        }
        let tr = sde.transform();
        let slope = tr.tilde_lambda1(t);
        let mut x_hat = tr.tilde_lambda0(t) + slope * x;
        let mut atom = None;
        if let CaseTag::ShiftedLognormal { xi, .. } = case {
            if is_atom(sde, t, x).is_some() {
                atom = Some(xi);
                x_hat = xi;
            }
        }
        let pool = match case {
            CaseTag::NonDegenerate => Some(simulate_terminal(sde, t, x, sde.horizon(), cfg)?),
            _ => None,
        };
        Ok(TransitionLaw { case, t, x, x_hat, slope, atom, pool })
    }

    pub fn case(&self) -> &CaseTag {
        &self.case
    }

    pub fn x_hat(&self) -> f64 {
        self.x_hat
    }

    pub fn atom(&self) -> Option<f64> {
        match self.case {
            CaseTag::Degenerate => Some(self.x_hat),
            _ => self.atom,
        }
    }

    pub fn pool(&self) -> Option<&SamplePool> {
        self.pool.as_ref()
    }

    pub fn provenance(&self) -> Provenance {
        match &self.pool {
            None => Provenance::ClosedForm,
            Some(p) => Provenance::MonteCarlo {
                n_paths: p.config.n_paths,
                n_steps: p.config.steps_per_unit_time,
                seed: p.config.seed,
                dkw_band: dkw_band(p.len()),
            },
        }
    }

    /// Uniform error band of the CDF: 0 for closed forms, DKW 99% otherwise.
    pub fn cdf_band(&self) -> f64 {
        self.pool.as_ref().map_or(0.0, |p| dkw_band(p.len()))
    }

    /// Kernel-style bandwidth `1.06 σ̂ N^{-1/5}` used by the Monte Carlo density.
    pub fn bandwidth(&self) -> Option<f64> {
        self.pool.as_ref().map(|p| 1.06 * p.variance().sqrt() * (p.len() as f64).powf(-0.2))
    }

    pub fn cdf(&self, y: f64) -> f64 {
        let xh = self.x_hat;
        match (&self.case, &self.pool) {
            (_, Some(p)) => empirical_cdf(p, y),
            (CaseTag::Degenerate, _) => indicator(y >= xh),
            (CaseTag::Gaussian { b_t }, _) => norm_cdf((y - xh) / b_t),
            (CaseTag::ShiftedLognormal { xi, a_bar, b_bar }, _) => {
                let xi = *xi;
                if self.atom.is_some() {
                    indicator(y >= xi)
                } else if xh > xi {
                    if y <= xi {
                        0.0
                    } else {
                        norm_cdf(((y - xi).ln() - (xh - xi).ln() - a_bar) / b_bar)
                    }
                } else if y >= xi {
                    1.0
                } else {
                    1.0 - norm_cdf(((xi - y).ln() - (xi - xh).ln() - a_bar) / b_bar)
                }
            }
            (CaseTag::NonDegenerate, None) => unreachable!("general case always carries samples"),
        }
    }

    pub fn density(&self, y: f64) -> Result<f64> {
        if let Some(xi) = self.atom {
            if (y - xi).abs() <= crate::regime::ATOM_TOL * (1.0 + xi.abs()) {
                return Err(Error::SingularPoint { x: self.x, y });
            }
            return Err(Error::NoDensity { atom: xi });
        }
        let xh = self.x_hat;
        Ok(match (&self.case, &self.pool) {
            (_, Some(p)) => {
                let h = self.bandwidth().unwrap_or(0.0);
                if h > 0.0 {
                    (empirical_cdf(p, y + h) - empirical_cdf(p, y - h)) / (2.0 * h)
                } else {
                    return Err(Error::NoDensity { atom: p.min() });
                }
            }
            (CaseTag::Degenerate, _) => return Err(Error::NoDensity { atom: xh }),
            (CaseTag::Gaussian { b_t }, _) => norm_pdf((y - xh) / b_t) / b_t,
            (CaseTag::ShiftedLognormal { xi, a_bar, b_bar }, _) => {
                let xi = *xi;
                let (num, den) = if xh > xi { (y - xi, xh - xi) } else { (xi - y, xi - xh) };
                if num <= 0.0 {
                    0.0
                } else {
                    norm_pdf((num.ln() - den.ln() - a_bar) / b_bar) / (b_bar * num)
                }
            }
            (CaseTag::NonDegenerate, None) => unreachable!("general case always carries samples"),
        })
    }

    /// Right-continuous quantile `G(t, x, α)`.
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        let xh = self.x_hat;
        Ok(match (&self.case, &self.pool) {
            (_, Some(p)) => empirical_quantile(p, alpha)?,
            (CaseTag::Degenerate, _) => xh,
            (CaseTag::Gaussian { b_t }, _) => xh + b_t * norm_inv(alpha),
            (CaseTag::ShiftedLognormal { xi, a_bar, b_bar }, _) => {
                let xi = *xi;
                if self.atom.is_some() {
                    xi
                } else if xh > xi {
                    xi + (xh - xi) * (a_bar + b_bar * norm_inv(alpha)).exp()
                } else {
                    xi - (xi - xh) * (a_bar + b_bar * norm_inv(1.0 - alpha)).exp()
                }
            }
            (CaseTag::NonDegenerate, None) => unreachable!("general case always carries samples"),
        })
    }

    fn estimate(&self, value: f64, error_band: Option<f64>) -> Estimate {
        Estimate { value, provenance: self.provenance(), error_band }
    }

    /// `F(t, x, y)` with its DKW band when simulated.
    pub fn cdf_estimate(&self, y: f64) -> Estimate {
        self.estimate(self.cdf(y), self.pool.as_ref().map(|p| dkw_band(p.len())))
    }

    /// Density value; the simulated version carries no band.
    pub fn density_estimate(&self, y: f64) -> Result<Estimate> {
        Ok(self.estimate(self.density(y)?, None))
    }

    /// `G(t, x, α)`; when simulated, the band is the half-width of the
    /// empirical quantiles at `α ± ε` with `ε` the DKW band.
    pub fn quantile_estimate(&self, alpha: f64) -> Result<Estimate> {
        let value = self.quantile(alpha)?;
        let band = match &self.pool {
            None => None,
            Some(p) => {
                let eps = dkw_band(p.len());
                let lo = empirical_quantile(p, (alpha - eps).max(f64::MIN_POSITIVE))?;
                let hi = empirical_quantile(p, (alpha + eps).min(1.0 - f64::EPSILON))?;
                Some(0.5 * (hi - lo))
            }
        };
        Ok(self.estimate(value, band))
    }

    /// Closed-form `∂F/∂x`; not available for the general case.
    pub fn cdf_x_sensitivity(&self, y: f64) -> Result<f64> {
        let xh = self.x_hat;
        match &self.case {
            CaseTag::Gaussian { b_t } => Ok(-norm_pdf((y - xh) / b_t) * self.slope / b_t),
            CaseTag::ShiftedLognormal { xi, a_bar, b_bar } => {
                let xi = *xi;
                if self.atom.is_some() {
                    return Err(Error::RegularityViolation { t: self.t, x: self.x });
                }
                let (num, den) = if xh > xi { (y - xi, xh - xi) } else { (xi - y, xi - xh) };
                if num <= 0.0 {
                    return Ok(0.0);
                }
                let z = (num.ln() - den.ln() - a_bar) / b_bar;
                Ok(-norm_pdf(z) * self.slope / (den * b_bar))
            }
            CaseTag::Degenerate => {
                if y == xh {
                    Err(Error::DiagonalPoint { y, image: xh })
                } else {
                    Ok(0.0)
                }
            }
            CaseTag::NonDegenerate => Err(Error::NotClosedForm("x-sensitivity of the general-case CDF".into())),
        }
    }

    /// Closed-form `∂G/∂x`.
    pub fn quantile_x_sensitivity(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        if self.atom.is_some() {
            return Err(Error::RegularityViolation { t: self.t, x: self.x });
        }
        match &self.case {
            CaseTag::Degenerate | CaseTag::Gaussian { .. } => Ok(self.slope),
            CaseTag::ShiftedLognormal { xi, a_bar, b_bar } => {
                let p = if self.x_hat > *xi { alpha } else { 1.0 - alpha };
                Ok(self.slope * (a_bar + b_bar * norm_inv(p)).exp())
            }
            CaseTag::NonDegenerate => Err(Error::NotClosedForm("use quantile_x_sensitivity_with".into())),
        }
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

pub fn transition_cdf(sde: &LinearSde, t: f64, x: f64, y: f64) -> Result<f64> {
    Ok(TransitionLaw::new(sde, t, x)?.cdf(y))
}

pub fn transition_density(sde: &LinearSde, t: f64, x: f64, y: f64) -> Result<f64> {
    TransitionLaw::new(sde, t, x)?.density(y)
}

pub fn transition_quantile(sde: &LinearSde, t: f64, x: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    TransitionLaw::new(sde, t, x)?.quantile(alpha)
}

pub fn quantile_x_sensitivity(sde: &LinearSde, t: f64, x: f64, alpha: f64) -> Result<f64> {
    quantile_x_sensitivity_with(sde, t, x, alpha, SimConfig::default())
}

/// As [`quantile_x_sensitivity`]; the general case uses common random
/// numbers at `x ± δ` and a central difference of the empirical quantiles.
pub fn quantile_x_sensitivity_with(sde: &LinearSde, t: f64, x: f64, alpha: f64, cfg: SimConfig) -> Result<f64> {
    check_alpha(alpha)?;
    if is_atom(sde, t, x).is_some() {
        return Err(Error::RegularityViolation { t, x });
    }
    let case = classify_at(sde, t)?;
    if case.is_closed_form() {
        return TransitionLaw::new(sde, t, x)?.quantile_x_sensitivity(alpha);
    }
    let delta = 1e-3 * (1.0 + x.abs());
    let up = simulate_terminal(sde, t, x + delta, sde.horizon(), cfg)?;
    let dn = simulate_terminal(sde, t, x - delta, sde.horizon(), cfg)?;
    Ok((empirical_quantile(&up, alpha)? - empirical_quantile(&dn, alpha)?) / (2.0 * delta))
}

/// `F_t + (c0 + c1 x) F_x + ½‖c2 + c3 x‖² F_xx` by central differences on the
/// closed-form CDF.
pub fn generator_residual(sde: &LinearSde, t: f64, x: f64, y: f64, dt: f64, dx: f64) -> Result<f64> {
    if !(dt > 0.0 && dx > 0.0) {
        return Err(domain("step sizes must be positive"));
    }
    let case = classify_at(sde, t)?;
    if !case.is_closed_form() {
        return Err(Error::NotClosedForm("backward-equation residual needs a closed-form regime".into()));
    }
    let i = sde.segment_index(t);
    let (a, b) = sde.segment_bounds(i);
    if t - dt < a {
        return Err(Error::StencilAcrossBreakpoint { lo: t - dt, hi: t + dt, breakpoint: a });
    }
    if t + dt >= b {
        return Err(Error::StencilAcrossBreakpoint { lo: t - dt, hi: t + dt, breakpoint: b });
    }
    if let CaseTag::ShiftedLognormal { xi, .. } = case {
        let xt = crate::transform::xi_tilde(sde, xi, t)?;
        if (x - xt).abs() < 10.0 * dx && (y - xi).abs() < 10.0 * dx {
            return Err(Error::SingularPoint { x, y });
        }
    }
    let f = |s: f64, z: f64| -> Result<f64> { Ok(TransitionLaw::new(sde, s, z)?.cdf(y)) };
    let centre = f(t, x)?;
    let (tp, tm) = (f(t + dt, x)?, f(t - dt, x)?);
    let (xp, xm) = (f(t, x + dx)?, f(t, x - dx)?);
    if case == CaseTag::Degenerate {
        let vals = [centre, tp, tm, xp, xm];
        if vals.iter().any(|&v| v != centre) {
            let image = TransitionLaw::new(sde, t, x)?.x_hat();
            return Err(Error::DiagonalPoint { y, image });
        }
    }
    let f_t = (tp - tm) / (2.0 * dt);
    let f_x = (xp - xm) / (2.0 * dx);
    let f_xx = (xp - 2.0 * centre + xm) / (dx * dx);
    let c0 = sde.c0().segment(i)[0].eval(t);
    let c1 = sde.c1().segment(i)[0].eval(t);
    let diff2: f64 = sde
        .c2()
        .eval_segment(i, t)
        .iter()
        .zip(sde.c3().eval_segment(i, t))
        .map(|(p, q)| (p + q * x).powi(2))
        .sum();
    Ok(f_t + (c0 + c1 * x) * f_x + 0.5 * diff2 * f_xx)
}

/// `F(t* − eps, x, y)`, which tends to the indicator of `y ≥` the image of
/// `x` as `eps → 0`.
pub fn terminal_limit_check(sde: &LinearSde, x: f64, y: f64, eps: f64) -> Result<f64> {
    let t_star = sde.regime().t_star;
    if t_star <= 0.0 {
        return Err(domain("the model is deterministic from time 0; no terminal limit to check"));
    }
    if !(eps > 0.0 && eps <= t_star) {
        return Err(domain(format!("eps must lie in (0, {t_star}], got {eps}")));
    }
    let tr = sde.transform();
    let image = tr.tilde_lambda0(t_star) + tr.tilde_lambda1(t_star) * x;
    if (y - image).abs() <= 1e-12 * (1.0 + image.abs()) {
        return Err(Error::DiagonalPoint { y, image });
    }
    transition_cdf(sde, t_star - eps, x, y)
}
