//! Model builders, random model generators and independent reference
//! computations shared by the integration tests.
#![allow(dead_code)]

use linsde::portfolio::PortfolioSpec;
use linsde::{LinearSde, PiecewiseVecFn, Poly};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(v: f64) -> PiecewiseVecFn {
    PiecewiseVecFn::scalar_constant(1.0, v).unwrap()
}

pub fn poly1(coeffs: &[f64]) -> PiecewiseVecFn {
    PiecewiseVecFn::polynomial(1.0, vec![Poly::new(coeffs.to_vec())]).unwrap()
}

pub fn gauss() -> LinearSde {
    LinearSde::constant(1.0, 0.0, 0.0, &[1.0], &[0.0]).unwrap()
}

pub fn gbm() -> LinearSde {
    LinearSde::constant(1.0, 0.0, 0.0, &[0.0], &[1.0]).unwrap()
}

/// `dX = (s + shift + X) dW`.
pub fn ramp(shift: f64) -> LinearSde {
    LinearSde::new(c(0.0), c(0.0), poly1(&[shift, 1.0]), c(1.0)).unwrap()
}

/// Ornstein-Uhlenbeck noise switched off at 0.5.
pub fn stopped_ou() -> LinearSde {
    let c2 = PiecewiseVecFn::step(1.0, vec![0.0, 0.5, 1.0], vec![vec![1.0], vec![0.0]]).unwrap();
    LinearSde::new(c(0.3), c(-1.0), c2, c(0.0)).unwrap()
}

fn random_poly(r: &mut ChaCha8Rng, max_deg: usize) -> Poly {
    let deg = r.random_range(0..=max_deg);
    Poly::new((0..=deg).map(|_| r.random_range(-1.0..1.0)).collect())
}

fn nonzero_poly(r: &mut ChaCha8Rng, max_deg: usize) -> Poly {
    let mut p = random_poly(r, max_deg);
    let mut cs = p.coeffs().to_vec();
    cs[0] += if cs[0] >= 0.0 { 0.5 } else { -0.5 };
    p = Poly::new(cs);
    p
}

fn random_breakpoints(r: &mut ChaCha8Rng, segs: usize) -> Vec<f64> {
    let mut inner: Vec<f64> = Vec::new();
    while inner.len() + 1 < segs {
        let v = r.random_range(1..16) as f64 / 16.0;
        if !inner.contains(&v) {
            inner.push(v);
        }
    }
    inner.sort_by(f64::total_cmp);
    let mut bps = vec![0.0];
    bps.extend(inner);
    bps.push(1.0);
    bps
}

/// Which structure a segment of a random model has.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegKind {
    /// No noise, arbitrary drift.
    Quiet,
    /// Noise proportional to the distance from the level of the model.
    Proportional,
    /// Additive noise only.
    Additive,
    /// Unrelated `c2`, `c3`.
    Generic,
}

/// A random model on `[0, 1]` built right to left: a quiet tail, a block
/// whose noise and drift both vanish at one level `η`, and an arbitrary
/// head. Any block may be empty. Degrees stay small to keep values tame.
pub fn random_structured_model(r: &mut ChaCha8Rng, d: usize) -> (LinearSde, Vec<SegKind>, f64) {
    let segs = r.random_range(1..=5);
    let bps = random_breakpoints(r, segs);
    let quiet = r.random_range(0..=segs);
    let prop = r.random_range(0..=segs - quiet);
    let level: f64 = r.random_range(-2.0..2.0);
    let mut kinds = vec![SegKind::Generic; segs];
    for (i, k) in kinds.iter_mut().enumerate() {
        *k = if i >= segs - quiet {
            SegKind::Quiet
        } else if i >= segs - quiet - prop {
            SegKind::Proportional
        } else if r.random_bool(0.3) {
            SegKind::Additive
        } else {
            SegKind::Generic
        };
    }
    let (mut c0, mut c1, mut c2, mut c3) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for k in &kinds {
        let drift1 = random_poly(r, 1);
        let zero = vec![Poly::zero(); d];
        match k {
            SegKind::Quiet => {
                c0.push(vec![random_poly(r, 2)]);
                c1.push(vec![drift1]);
                c2.push(zero.clone());
                c3.push(zero);
            }
            SegKind::Proportional => {
                let noise: Vec<Poly> = if r.random_bool(0.15) {
                    zero
                } else {
                    (0..d).map(|_| nonzero_poly(r, 1)).collect()
                };
                c0.push(vec![drift1.scale(-level)]);
                c1.push(vec![drift1]);
                c2.push(noise.iter().map(|p| p.scale(-level)).collect());
                c3.push(noise);
            }
            SegKind::Additive => {
                c0.push(vec![random_poly(r, 2)]);
                c1.push(vec![drift1]);
                c2.push((0..d).map(|_| nonzero_poly(r, 2)).collect());
                c3.push(zero);
            }
            SegKind::Generic => {
                c0.push(vec![random_poly(r, 2)]);
                c1.push(vec![drift1]);
                c2.push((0..d).map(|_| random_poly(r, 2)).collect());
                c3.push((0..d).map(|_| nonzero_poly(r, 1)).collect());
            }
        }
    }
    let f = |dim, segsv| PiecewiseVecFn::new(dim, 1.0, bps.clone(), segsv).unwrap();
    let sde = LinearSde::new(f(1, c0), f(1, c1), f(d, c2), f(d, c3)).unwrap();
    (sde, kinds, level)
}

/// Driftless random model with generic noise: `c0 = c1 = 0`.
pub fn random_driftless(r: &mut ChaCha8Rng) -> LinearSde {
    let segs = r.random_range(1..=3);
    let bps = random_breakpoints(r, segs);
    let c2: Vec<Vec<Poly>> = (0..segs).map(|_| vec![random_poly(r, 1)]).collect();
    let c3: Vec<Vec<Poly>> = (0..segs)
        .map(|_| vec![if r.random_bool(0.2) { Poly::zero() } else { random_poly(r, 1) }])
        .collect();
    let z: Vec<Vec<Poly>> = vec![vec![Poly::zero()]; segs];
    let f = |s| PiecewiseVecFn::new(1, 1.0, bps.clone(), s).unwrap();
    LinearSde::new(f(z.clone()), f(z), f(c2), f(c3)).unwrap()
}

/// A one-asset portfolio with `θ1` bounded away from zero on `[0, 1]`.
pub fn random_portfolio_1d(r: &mut ChaCha8Rng) -> (PortfolioSpec, f64) {
    let a1: f64 = r.random_range(0.5..1.5) * if r.random_bool(0.5) { 1.0 } else { -1.0 };
    let b1 = r.random_range(-0.4..0.4) * a1.abs();
    let theta1 = poly1(&[a1, b1]);
    let theta0 = poly1(&[r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]);
    let b = poly1(&[r.random_range(-0.5..0.5), r.random_range(-0.3..0.3)]);
    let sigma = poly1(&[r.random_range(0.5..1.5), r.random_range(-0.3..0.3)]);
    let x0 = r.random_range(-1.0..1.0);
    (PortfolioSpec::new(1, 1, theta0, theta1, b, sigma).unwrap(), x0)
}

/// Composite Simpson on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Hand-rolled polynomial antiderivative from 0.
fn prim(cs: &[f64], t: f64) -> f64 {
    cs.iter().enumerate().map(|(k, c)| c / (k as f64 + 1.0) * t.powi(k as i32 + 1)).sum()
}

/// Reference affine flow of the noise-free dynamics, independent of the
/// library's transform cache.
pub struct RefFlow<'a> {
    sde: &'a LinearSde,
}

impl<'a> RefFlow<'a> {
    pub fn new(sde: &'a LinearSde) -> Self {
        RefFlow { sde }
    }

    fn seg(&self, t: f64) -> usize {
        let bps = self.sde.breakpoints();
        let n = bps.len() - 1;
        (0..n).rfind(|&i| bps[i] <= t).unwrap_or(0).min(n - 1)
    }

    /// `∫_a^b c1`, exact.
    pub fn c1_int(&self, a: f64, b: f64) -> f64 {
        let bps = self.sde.breakpoints();
        let mut acc = 0.0;
        for i in 0..bps.len() - 1 {
            let (lo, hi) = (bps[i].max(a), bps[i + 1].min(b));
            if lo < hi {
                let cs = self.sde.c1().segment(i)[0].coeffs();
                acc += prim(cs, hi) - prim(cs, lo);
            }
        }
        acc
    }

    pub fn c0(&self, s: f64) -> f64 {
        self.sde.c0().segment(self.seg(s))[0].eval(s)
    }

    /// `∫_a^b c0(u) e^{∫_u^b c1} du` by Simpson on each segment.
    fn carried(&self, a: f64, b: f64) -> f64 {
        let bps = self.sde.breakpoints();
        let mut acc = 0.0;
        for i in 0..bps.len() - 1 {
            let (lo, hi) = (bps[i].max(a), bps[i + 1].min(b));
            if lo < hi {
                let p = &self.sde.c0().segment(i)[0];
                acc += simpson(|u| p.eval(u) * self.c1_int(u, b).exp(), lo, hi, 400);
            }
        }
        acc
    }

    pub fn tilde_lambda1(&self, t: f64) -> f64 {
        self.c1_int(t, self.sde.horizon()).exp()
    }

    pub fn tilde_lambda0(&self, t: f64) -> f64 {
        self.carried(t, self.sde.horizon())
    }

    pub fn lambda1(&self, t: f64) -> f64 {
        self.c1_int(0.0, t).exp()
    }

    pub fn lambda0(&self, t: f64) -> f64 {
        self.carried(0.0, t)
    }
}

/// Brute-force case at `t` from the four defining conditions: exact zero
/// tests on the stored coefficients and a grid test of the proportionality
/// identity with the reference flow. Returns the case name and `ξ` when the
/// proportional case holds.
pub fn brute_force_case(sde: &LinearSde, t: f64) -> (&'static str, Option<f64>) {
    let bps = sde.breakpoints();
    let segs: Vec<(usize, f64, f64)> = (0..bps.len() - 1)
        .filter(|&i| bps[i + 1] > t)
        .map(|i| (i, bps[i].max(t), bps[i + 1]))
        .collect();
    let zero = |f: &PiecewiseVecFn, i: usize| f.segment(i).iter().all(|p| p.coeffs().iter().all(|&c| c == 0.0));
    let c3_zero = segs.iter().all(|&(i, _, _)| zero(sde.c3(), i));
    let c2_zero = segs.iter().all(|&(i, _, _)| zero(sde.c2(), i));
    if c3_zero {
        return if c2_zero { ("Degenerate", None) } else { ("Gaussian", None) };
    }
    let flow = RefFlow::new(sde);
    let mut pts = Vec::new();
    for &(i, a, b) in &segs {
        for k in 0..=12 {
            let s = a + (b - a) * (k as f64 + 0.5) / 13.5;
            let c2 = sde.c2().segment(i).iter().map(|p| p.eval(s)).collect::<Vec<_>>();
            let c3 = sde.c3().segment(i).iter().map(|p| p.eval(s)).collect::<Vec<_>>();
            let (l0, l1) = (flow.tilde_lambda0(s), flow.tilde_lambda1(s));
            let tc2: Vec<f64> = c2.iter().zip(&c3).map(|(p, q)| p * l1 - q * l0).collect();
            pts.push((tc2, c3));
        }
    }
    let xi = pts.iter().find_map(|(tc2, c3)| {
        let n: f64 = c3.iter().map(|v| v * v).sum();
        (n > 1e-6).then(|| -tc2.iter().zip(c3).map(|(p, q)| p * q).sum::<f64>() / n)
    });
    let Some(xi) = xi else {
        return ("NonDegenerate", None);
    };
    let holds = pts.iter().all(|(tc2, c3)| {
        tc2.iter().zip(c3).all(|(p, q)| (p + xi * q).abs() <= 1e-7 * (1.0 + p.abs() + (xi * q).abs()))
    });
    if holds {
        ("ShiftedLognormal", Some(xi))
    } else {
        ("NonDegenerate", None)
    }
}

/// Random piecewise-constant control with values in `[-5, 5]`.
pub fn random_control(r: &mut ChaCha8Rng, d: usize) -> PiecewiseVecFn {
    let segs = r.random_range(1..=6);
    let bps = random_breakpoints(r, segs);
    let vals = (0..segs).map(|_| (0..d).map(|_| r.random_range(-5.0..5.0)).collect()).collect();
    PiecewiseVecFn::step(1.0, bps, vals).unwrap()
}
