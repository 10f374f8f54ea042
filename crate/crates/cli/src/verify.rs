//! Invariant checks run by the `verify` subcommand.

use linsde::law::generator_residual;
use linsde::oracle::simulate_terminal;
use linsde::portfolio::{h_identity_check, port_reach, port_regime};
use linsde::reach::{support_numeric, DEFAULT_K_SCHEDULE};
use linsde::regime::report_at;
use linsde::{reachable_set, CaseTag, Error, LinearSde, SimConfig, TransitionLaw};
use serde::Serialize;

use crate::model::Model;

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: Result<String, String>) -> Check {
    match outcome {
        Ok(detail) => Check { name, passed: true, detail },
        Err(detail) => Check { name, passed: false, detail },
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

/// Query times strictly inside `[0, T)`.
fn times(sde: &LinearSde, n: usize) -> Vec<f64> {
    (0..n).map(|k| sde.horizon() * k as f64 / n as f64).collect()
}

fn transform_positive(sde: &LinearSde) -> Result<String, String> {
    let tr = sde.transform();
    for t in times(sde, 50) {
        let (l1, tl1) = (tr.lambda1(t), tr.tilde_lambda1(t));
        if !(l1 > 0.0 && tl1 > 0.0 && l1.is_finite() && tl1.is_finite()) {
            return Err(format!("affine slopes not positive at t = {t}: {l1}, {tl1}"));
        }
        let composed = tr.lambda1(t) * tr.tilde_lambda1(t);
        let whole = tr.tilde_lambda1(0.0);
        if ((composed - whole) / whole).abs() > 1e-10 {
            return Err(format!("slope semigroup broken at t = {t}: {composed} vs {whole}"));
        }
    }
    Ok("slopes positive and multiplicative on 50 times".into())
}

fn classification(sde: &LinearSde) -> Result<String, String> {
    let regime = sde.regime();
    let mut seen = Vec::new();
    for t in times(sde, 50) {
        let report = report_at(sde, t).map_err(err)?;
        let expected_degenerate = t >= regime.t_star;
        if expected_degenerate != (report.case == CaseTag::Degenerate) {
            return Err(format!("case {} at t = {t} disagrees with t* = {}", report.case.name(), regime.t_star));
        }
        if let CaseTag::ShiftedLognormal { .. } = report.case {
            if t < regime.t_lower_star {
                return Err(format!("shifted lognormal before t_* = {} at t = {t}", regime.t_lower_star));
            }
        }
        if !seen.contains(&report.case.name()) {
            seen.push(report.case.name());
        }
    }
    Ok(format!("cases seen: {}", seen.join(", ")))
}

fn law_shape(sde: &LinearSde, x0: f64, cfg: SimConfig) -> Result<String, String> {
    let t = 0.0;
    let law = TransitionLaw::with_config(sde, t, x0, cfg).map_err(err)?;
    let centre = law.quantile(0.5).map_err(err)?;
    let spread = (law.quantile(0.9).map_err(err)? - law.quantile(0.1).map_err(err)?).max(1.0);
    let mut prev = -1.0;
    for k in 0..=200 {
        let y = centre + spread * (k as f64 / 20.0 - 5.0);
        let f = law.cdf(y);
        if !(0.0..=1.0).contains(&f) || f < prev {
            return Err(format!("CDF not monotone in [0, 1] at y = {y}"));
        }
        prev = f;
    }
    for alpha in [0.05, 0.25, 0.5, 0.75, 0.95] {
        let q = law.quantile(alpha).map_err(err)?;
        let f = law.cdf(q);
        let ok = if law.case().is_closed_form() && law.atom().is_none() {
            (f - alpha).abs() <= 1e-10
        } else {
            f >= alpha
        };
        if !ok {
            return Err(format!("F(G({alpha})) = {f}"));
        }
    }
    Ok(format!("{} law at t = 0: CDF monotone, quantile round-trip holds", law.case().name()))
}

fn generator(sde: &LinearSde, x0: f64) -> Result<String, String> {
    let mut tested = 0;
    let mut worst: f64 = 0.0;
    for t in times(sde, 10) {
        let law = TransitionLaw::new(sde, t, x0).map_err(err)?;
        if !matches!(law.case(), CaseTag::Gaussian { .. } | CaseTag::ShiftedLognormal { .. }) {
            continue;
        }
        if law.atom().is_some() {
            continue;
        }
        let q = match law.quantile(0.75) {
            Ok(q) => q,
            Err(_) => continue,
        };
        match generator_residual(sde, t, x0, q, 1e-3, 1e-3) {
            Ok(r) => {
                tested += 1;
                worst = worst.max(r.abs());
            }
            Err(Error::StencilAcrossBreakpoint { .. } | Error::SingularPoint { .. } | Error::Domain(_)) => {}
            Err(e) => return Err(err(e)),
        }
    }
    if worst > 1e-4 {
        return Err(format!("residual {worst:e} exceeds 1e-4"));
    }
    Ok(format!("{tested} points, max residual {worst:e}"))
}

fn reach_consistency(sde: &LinearSde, x0: f64, cfg: SimConfig) -> Result<String, String> {
    let t_end = sde.horizon();
    let mut prev: Option<linsde::Interval> = None;
    for k in 1..=5 {
        let t = t_end * k as f64 / 5.0;
        let r = reachable_set(sde, x0, t).map_err(err)?;
        if let Some(p) = prev {
            if !p.closure_within(&r.support, 1e-9 * (1.0 + x0.abs())) {
                return Err(format!("support at t = {t} does not contain the earlier support"));
            }
        }
        prev = Some(r.support);
    }
    let t = t_end;
    let r = reachable_set(sde, x0, t).map_err(err)?;
    let numeric = support_numeric(sde, x0, t, &DEFAULT_K_SCHEDULE).map_err(err)?;
    let lo_inf = r.support.lo.is_none();
    let hi_inf = r.support.hi.is_none();
    if r.support.lo != r.support.hi && (lo_inf != numeric.lower.infinite || hi_inf != numeric.upper.infinite) {
        return Err(format!(
            "branch {} ends (inf lo {lo_inf}, inf hi {hi_inf}) disagree with numeric ends ({}, {})",
            r.branch.tag(),
            numeric.lower.infinite,
            numeric.upper.infinite
        ));
    }
    let mc = SimConfig { n_paths: cfg.n_paths.min(20_000), ..cfg };
    let pool = simulate_terminal(sde, 0.0, x0, t, mc).map_err(err)?;
    let tol = 1e-6 * (1.0 + pool.min().abs().max(pool.max().abs()));
    if !(r.support.contains_closed(pool.min(), tol) && r.support.contains_closed(pool.max(), tol)) {
        return Err(format!(
            "samples span [{}, {}] outside support of branch {}",
            pool.min(),
            pool.max(),
            r.branch.tag()
        ));
    }
    Ok(format!("branch {} at T; nesting, numeric ends and {} samples consistent", r.branch.tag(), pool.len()))
}

fn portfolio_consistency(model: &Model) -> Option<Check> {
    let spec = model.portfolio.as_ref()?;
    let sde = &model.sde;
    let outcome = (|| {
        let theta = port_regime(spec);
        let general = sde.regime();
        if theta.t_star != general.t_star || theta.t_lower_star != general.t_lower_star {
            return Err(format!("theta-level times {theta:?} differ from general {general:?}"));
        }
        match (theta.xi, general.xi) {
            (None, None) => {}
            (Some(a), Some(b)) if (a - b).abs() <= 1e-10 * (1.0 + a.abs()) => {}
            (a, b) => return Err(format!("xi differs: {a:?} vs {b:?}")),
        }
        let grid: Vec<f64> = times(sde, 100);
        let resid = h_identity_check(spec, model.x0, &grid).map_err(err)?;
        if resid > 1e-10 {
            return Err(format!("h identity residual {resid:e}"));
        }
        let t = sde.horizon();
        let pr = port_reach(spec, model.x0, t).map_err(err)?;
        if pr.specialized {
            let g = reachable_set(sde, model.x0, t).map_err(err)?;
            let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
                (None, None) => true,
                (Some(a), Some(b)) => (a - b).abs() <= 1e-9 * (1.0 + a.abs()),
                _ => false,
            };
            if pr.result.branch != g.branch || !close(pr.result.reachable.lo, g.reachable.lo) || !close(pr.result.reachable.hi, g.reachable.hi) {
                return Err(format!("portfolio reach {:?} differs from general {:?}", pr.result.reachable, g.reachable));
            }
        }
        Ok(format!("regime equal, h residual {resid:e}, reach specialized = {}", pr.specialized))
    })();
    Some(check("portfolio_consistency", outcome))
}

pub fn run(model: &Model, cfg: SimConfig) -> Vec<Check> {
    let sde = &model.sde;
    let mut out = vec![
        check("transform_positivity", transform_positive(sde)),
        check("classification", classification(sde)),
        check("law_shape", law_shape(sde, model.x0, cfg)),
        check("generator_identity", generator(sde, model.x0)),
        check("reach_consistency", reach_consistency(sde, model.x0, cfg)),
    ];
    out.extend(portfolio_consistency(model));
    out
}
