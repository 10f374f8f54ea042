//! Adaptive Gauss–Legendre quadrature with error control by interval halving.

use std::sync::OnceLock;

use crate::error::{domain, Error, Result};
use crate::piecewise::{union_breakpoints, PiecewiseVecFn};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_DEPTH: u32 = 40;

const GL_ORDER: usize = 10;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// by Newton iteration on `P_n` from the Chebyshev initial guesses.
pub fn gauss_legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre_rule(GL_ORDER))
}

/// Fixed-order Gauss–Legendre estimate on `[a, b]`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    half * nodes
        .iter()
        .zip(weights)
        .map(|(&x, &w)| w * f(mid + half * x))
        .sum::<f64>()
}

/// Adaptive Gauss–Legendre: accept a panel when the halved estimate agrees
/// with the whole-panel estimate within the panel's share of `tol`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let whole = gauss_legendre(f, a, b);
    refine(f, a, b, whole, tol, max_depth, 0)
}

fn refine<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, max_depth: u32, depth: u32) -> Result<f64> {
    let mid = 0.5 * (a + b);
    let left = gauss_legendre(f, a, mid);
    let right = gauss_legendre(f, mid, b);
    let halves = left + right;
    let err = (halves - whole).abs();
    // Below a few ulps of the panel value no further halving can help.
    let floor = 64.0 * f64::EPSILON * (left.abs() + right.abs());
    if err <= tol.max(floor) {
        return Ok(halves);
    }
    if depth >= max_depth || !halves.is_finite() {
        return Err(Error::Quadrature { a, b, estimate: halves, error: err });
    }
    Ok(refine(f, a, mid, left, 0.5 * tol, max_depth, depth + 1)?
        + refine(f, mid, b, right, 0.5 * tol, max_depth, depth + 1)?)
}

/// `n` Chebyshev points of the first kind mapped to `[a, b]`, ascending.
pub fn chebyshev_nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .rev()
        .map(|k| {
            let c = (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos();
            0.5 * (a + b) + 0.5 * (b - a) * c
        })
        .collect()
}

/// `∫_a^b g(z) exp(A(b) − A(z)) dz` for scalar piecewise polynomials `g` and
/// continuous `A`, integrated segment by segment on the merged partition.
pub fn quad_exp_weighted(g: &PiecewiseVecFn, big_a: &PiecewiseVecFn, a: f64, b: f64, tol: f64) -> Result<f64> {
    if g.dim() != 1 || big_a.dim() != 1 {
        return Err(domain("quad_exp_weighted needs scalar functions"));
    }
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
    if !(0.0 <= a && a <= b && b <= g.horizon()) || !(tol > 0.0) {
        return Err(domain(format!("need 0 <= a <= b <= T and tol > 0, got a={a}, b={b}, tol={tol}")));
    }
    if a == b {
        return Ok(0.0);
    }
    let a_end = big_a.value(b);
    let bps = union_breakpoints([g, big_a]);
    let pieces: Vec<(f64, f64)> = bps
        .windows(2)
        .map(|w| (w[0].max(a), w[1].min(b)))
        .filter(|(lo, hi)| lo < hi)
        .collect();
    let share = tol / pieces.len() as f64;
    let mut total = 0.0;
    for (lo, hi) in pieces {
        let mid = 0.5 * (lo + hi);
        let gp = &g.segment(g.segment_index(mid))[0];
        if gp.is_zero() {
            continue;
        }
        let ap = &big_a.segment(big_a.segment_index(mid))[0];
        let f = |z: f64| gp.eval(z) * (a_end - ap.eval(z)).exp();
        total += adaptive(&f, lo, hi, share, DEFAULT_MAX_DEPTH)?;
    }
    Ok(total)
}
