//! Monte Carlo oracle: Euler–Maruyama on breakpoint-aligned grids, an exact
//! log scheme for the proportional regime, empirical statistics, and the
//! deterministic controlled ODE whose values fill the support.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::piecewise::{union_breakpoints, PiecewiseVecFn};
use crate::regime::c3_energy;
use crate::sde::LinearSde;
use crate::transform::{c2_star, xi_tilde};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    EulerMaruyama,
    /// Exact in law when the diffusion is proportional to `X − ξ̃(t)`.
    LogEulerWhereProportional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub steps_per_unit_time: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl SimConfig {
    pub fn euler(n_paths: usize, steps_per_unit_time: usize, seed: u64) -> Self {
        SimConfig { n_paths, steps_per_unit_time, seed, scheme: Scheme::EulerMaruyama }
    }

    pub fn log_scheme(n_paths: usize, steps_per_unit_time: usize, seed: u64) -> Self {
        SimConfig { n_paths, steps_per_unit_time, seed, scheme: Scheme::LogEulerWhereProportional }
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::euler(100_000, 1_000, 42)
    }
}

/// Sorted terminal samples with the query that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePool {
    values: Vec<f64>,
    pub t0: f64,
    pub t1: f64,
    pub x: f64,
    pub config: SimConfig,
}

impl SamplePool {
    /// Build a pool from raw samples (sorted on entry).
    pub fn from_samples(mut values: Vec<f64>, t0: f64, t1: f64, x: f64, config: SimConfig) -> Self {
        values.sort_by(f64::total_cmp);
        SamplePool { values, t0, t1, x, config }
    }

    /// Samples in ascending order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let n = self.len() as f64;
        self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.len() - 1]
    }
}

/// Uniform 99% DKW band half-width for `n` samples.
pub fn dkw_band(n: usize) -> f64 {
    ((2.0f64 / 0.01).ln() / (2.0 * n as f64)).sqrt()
}

/// Fraction of samples `<= y`.
pub fn empirical_cdf(pool: &SamplePool, y: f64) -> f64 {
    pool.values.partition_point(|&v| v <= y) as f64 / pool.len() as f64
}

/// Order statistic at 1-based index `⌈αN⌉`.
pub fn empirical_quantile(pool: &SamplePool, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let n = pool.len();
    let k = ((alpha * n as f64).ceil() as usize).clamp(1, n);
    Ok(pool.values[k - 1])
}

/// Step times from `t0` to `t1`: every breakpoint inside is a grid point and
/// each piece of length `ℓ` gets `⌈ℓ · steps_per_unit⌉` equal steps.
pub fn time_grid(breakpoints: &[f64], t0: f64, t1: f64, steps_per_unit: usize) -> Vec<f64> {
    let mut cuts = vec![t0];
    cuts.extend(breakpoints.iter().copied().filter(|&b| b > t0 && b < t1));
    cuts.push(t1);
    let mut grid = vec![t0];
    for w in cuts.windows(2) {
        let n = ((w[1] - w[0]) * steps_per_unit as f64).ceil().max(1.0) as usize;
        for k in 1..n {
            grid.push(w[0] + (w[1] - w[0]) * k as f64 / n as f64);
        }
        grid.push(w[1]);
    }
    grid
}

/// Reproducible generator for path `path`: the seed selects the key and the
/// path index selects an independent stream.
pub fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Brownian increments of path `path` on `grid`, `d` per step, step-major.
pub fn brownian_increments(seed: u64, path: usize, grid: &[f64], d: usize) -> Vec<f64> {
    let mut rng = path_rng(seed, path);
    let mut out = Vec::with_capacity((grid.len() - 1) * d);
    for w in grid.windows(2) {
        let sq = (w[1] - w[0]).sqrt();
        for _ in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            out.push(sq * z);
        }
    }
    out
}

/// Left-endpoint coefficient values for one Euler step.
struct EulerStep {
    dt: f64,
    c0: f64,
    c1: f64,
    c2: Vec<f64>,
    c3: Vec<f64>,
}

fn euler_steps(sde: &LinearSde, grid: &[f64]) -> Vec<EulerStep> {
    grid.windows(2)
        .map(|w| {
            let i = sde.segment_index(0.5 * (w[0] + w[1]));
            EulerStep {
                dt: w[1] - w[0],
                c0: sde.c0().segment(i)[0].eval(w[0]),
                c1: sde.c1().segment(i)[0].eval(w[0]),
                c2: sde.c2().eval_segment(i, w[0]),
                c3: sde.c3().eval_segment(i, w[0]),
            }
        })
        .collect()
}

/// One Euler path returning the state at every grid point, driven by
/// `brownian_increments(seed, path, grid, d)`.
pub fn euler_trajectory(sde: &LinearSde, grid: &[f64], x: f64, seed: u64, path: usize) -> Result<Vec<f64>> {
    let steps = euler_steps(sde, grid);
    let dw = brownian_increments(seed, path, grid, sde.dim());
    let d = sde.dim();
    let mut out = Vec::with_capacity(grid.len());
    let mut state = x;
    out.push(state);
    for (k, st) in steps.iter().enumerate() {
        let noise: f64 = (0..d).map(|j| (st.c2[j] + st.c3[j] * state) * dw[k * d + j]).sum();
        state += (st.c0 + st.c1 * state) * st.dt + noise;
        if !state.is_finite() {
            return Err(Error::SimulationOverflow { path, time: grid[k + 1] });
        }
        out.push(state);
    }
    Ok(out)
}

fn check_window(sde: &LinearSde, t0: f64, t1: f64, cfg: &SimConfig) -> Result<()> {
    if !(0.0 <= t0 && t0 < t1 && t1 <= sde.horizon()) {
        return Err(domain(format!("need 0 <= t0 < t1 <= T, got t0={t0}, t1={t1}")));
    }
    if cfg.n_paths == 0 || cfg.steps_per_unit_time == 0 {
        return Err(domain("n_paths and steps_per_unit_time must be positive"));
    }
    Ok(())
}

/// Terminal values of `n_paths` independent paths from `(t0, x)` to `t1`.
/// Output is sorted and does not depend on the worker count.
pub fn simulate_terminal(sde: &LinearSde, t0: f64, x: f64, t1: f64, cfg: SimConfig) -> Result<SamplePool> {
    check_window(sde, t0, t1, &cfg)?;
    let grid = time_grid(sde.breakpoints(), t0, t1, cfg.steps_per_unit_time);
    let results: Vec<Result<f64>> = match cfg.scheme {
        Scheme::EulerMaruyama => {
            let steps = euler_steps(sde, &grid);
            let d = sde.dim();
            (0..cfg.n_paths)
                .into_par_iter()
                .map(|p| {
                    let mut rng = path_rng(cfg.seed, p);
                    let mut state = x;
                    let mut z = vec![0.0; d];
                    for (k, st) in steps.iter().enumerate() {
                        for zj in z.iter_mut() {
                            *zj = StandardNormal.sample(&mut rng);
                        }
                        let sq = st.dt.sqrt();
                        let noise: f64 = (0..d).map(|j| (st.c2[j] + st.c3[j] * state) * z[j]).sum();
                        state += (st.c0 + st.c1 * state) * st.dt + sq * noise;
                        if !state.is_finite() {
                            return Err(Error::SimulationOverflow { path: p, time: grid[k + 1] });
                        }
                    }
                    Ok(state)
                })
                .collect()
        }
        Scheme::LogEulerWhereProportional => {
            let reg = sde.regime();
            let Some(xi) = reg.xi else {
                return Err(Error::SchemeUnavailable("no degeneracy level: diffusion is not proportional".into()));
            };
            if t0 < reg.t_lower_star {
                return Err(Error::SchemeUnavailable(format!(
                    "start time {t0} precedes the proportional regime starting at {}",
                    reg.t_lower_star
                )));
            }
            // Z = X − ξ̃ solves dZ = c1 Z dt + Z c3ᵀ dW exactly step by step.
            let tr = sde.transform();
            let steps: Vec<(f64, f64)> = grid
                .windows(2)
                .map(|w| {
                    let drift = tr.c1_integral(w[1]) - tr.c1_integral(w[0]);
                    let var = (c3_energy(sde, w[0]) - c3_energy(sde, w[1])).max(0.0);
                    (drift - 0.5 * var, var.sqrt())
                })
                .collect();
            let z0 = x - xi_tilde(sde, xi, t0)?;
            let end_level = xi_tilde(sde, xi, t1)?;
            (0..cfg.n_paths)
                .into_par_iter()
                .map(|p| {
                    let mut rng = path_rng(cfg.seed, p);
                    let mut log_factor = 0.0;
                    for &(m, s) in &steps {
                        let n: f64 = StandardNormal.sample(&mut rng);
                        log_factor += m + s * n;
                    }
                    let v = end_level + z0 * log_factor.exp();
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::SimulationOverflow { path: p, time: t1 })
                    }
                })
                .collect()
        }
    };
    let values = results.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(SamplePool::from_samples(values, t0, t1, x, cfg))
}

/// `f_w(t)` for `f' = (c2* + c3 f)ᵀ(w' − c3/2)`, `f(0) = 0`, by RK4 on a grid
/// aligned with the breakpoints of the model and of the control.
pub fn controlled_path(sde: &LinearSde, x0: f64, wprime: &PiecewiseVecFn, t: f64) -> Result<f64> {
    const STEPS_PER_UNIT: usize = 2000;
    if wprime.dim() != sde.dim() || wprime.horizon() != sde.horizon() {
        return Err(domain("control must match the Brownian dimension and horizon of the model"));
    }
    sde.check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let bps = union_breakpoints([sde.c0(), wprime]);
    let grid = time_grid(&bps, 0.0, t, STEPS_PER_UNIT);
    let cs = c2_star(sde, x0);
    let d = sde.dim();
    let mut c2v = vec![0.0; d];
    let mut c3v = vec![0.0; d];
    let mut wv = vec![0.0; d];
    let mut f = 0.0;
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let i = sde.segment_index(mid);
        let k = wprime.segment_index(mid);
        let mut rhs = |s: f64, y: f64| {
            cs.eval_segment_into(i, s, &mut c2v);
            sde.c3().eval_segment_into(i, s, &mut c3v);
            wprime.eval_segment_into(k, s, &mut wv);
            (0..d).map(|j| (c2v[j] + c3v[j] * y) * (wv[j] - 0.5 * c3v[j])).sum::<f64>()
        };
        let h = b - a;
        let k1 = rhs(a, f);
        let k2 = rhs(mid, f + 0.5 * h * k1);
        let k3 = rhs(mid, f + 0.5 * h * k2);
        let k4 = rhs(b, f + h * k3);
        f += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Ok(f)
}
