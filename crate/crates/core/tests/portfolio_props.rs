mod common;

use common::{random_portfolio_1d, rng};
use linsde::portfolio::{port_reach, port_regime, to_linear, PortfolioSpec};
use linsde::{reachable_set, PiecewiseVecFn, Poly};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn lin(r: &mut ChaCha8Rng) -> Poly {
    Poly::new(vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)])
}

/// A multi-asset spec with a zero tail and a block where `θ0 = −ξ θ1`.
fn random_structured_spec(r: &mut ChaCha8Rng) -> PortfolioSpec {
    let n = r.random_range(1..=2);
    let segs = r.random_range(1..=4);
    let mut bps: Vec<f64> = (1..segs).map(|k| k as f64 / segs as f64).collect();
    bps.insert(0, 0.0);
    bps.push(1.0);
    let zero_tail = r.random_range(0..=segs);
    let prop = r.random_range(0..=segs - zero_tail);
    let xi: f64 = r.random_range(-2.0..2.0);
    let (mut th0, mut th1) = (Vec::new(), Vec::new());
    for i in 0..segs {
        if i >= segs - zero_tail {
            th0.push(vec![Poly::zero(); n]);
            th1.push(vec![Poly::zero(); n]);
        } else if i >= segs - zero_tail - prop {
            let t1: Vec<Poly> = (0..n).map(|_| lin(r)).collect();
            th0.push(t1.iter().map(|p| p.scale(-xi)).collect());
            th1.push(t1);
        } else {
            th0.push((0..n).map(|_| lin(r)).collect());
            th1.push((0..n).map(|_| lin(r)).collect());
        }
    }
    let f = |v| PiecewiseVecFn::new(n, 1.0, bps.clone(), v).unwrap();
    let b = PiecewiseVecFn::polynomial(1.0, (0..n).map(|_| lin(r).scale(0.5)).collect()).unwrap();
    // upper-triangular volatility with a dominant diagonal
    let sigma: Vec<Poly> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            if i == j {
                Poly::new(vec![r.random_range(0.8..1.5), r.random_range(-0.2..0.2)])
            } else if j > i {
                Poly::constant(r.random_range(-0.3..0.3))
            } else {
                Poly::zero()
            }
        })
        .collect();
    let sigma = PiecewiseVecFn::polynomial(1.0, sigma).unwrap();
    PortfolioSpec::new(n, n, f(th0), f(th1), b, sigma).unwrap()
}

#[test]
fn theta_regime_matches_general() {
    let mut r = rng(61);
    let mut with_xi = 0;
    for _ in 0..200 {
        let spec = random_structured_spec(&mut r);
        let theta = port_regime(&spec);
        let sde = to_linear(&spec).unwrap();
        let general = sde.regime();
        assert!((theta.t_star - general.t_star).abs() <= 1e-14);
        assert!((theta.t_lower_star - general.t_lower_star).abs() <= 1e-14, "{theta:?} vs {general:?}");
        match (theta.xi, general.xi) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
                with_xi += 1;
            }
            other => panic!("xi presence differs: {other:?}"),
        }
    }
    assert!(with_xi > 20);
}

#[test]
fn specialised_reach_matches_general() {
    let mut r = rng(62);
    for m in 0..50 {
        let (spec, x0) = random_portfolio_1d(&mut r);
        let t: f64 = r.random_range(0.05..=1.0);
        let pr = port_reach(&spec, x0, t).unwrap();
        assert!(pr.specialized, "model {m}: {:?}", pr.notice);
        let g = reachable_set(&to_linear(&spec).unwrap(), x0, t).unwrap();
        assert_eq!(pr.result.branch, g.branch, "model {m}");
        for (a, b) in [(pr.result.reachable.lo, g.reachable.lo), (pr.result.reachable.hi, g.reachable.hi)] {
            match (a, b) {
                (None, None) => {}
                (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "model {m}: {a} vs {b}"),
                other => panic!("model {m}: ends differ {other:?}"),
            }
        }
    }
}

#[test]
fn reachable_wealth_grows_and_contains_start() {
    let mut r = rng(63);
    for _ in 0..30 {
        let (spec, x0) = random_portfolio_1d(&mut r);
        let mut prev: Option<linsde::Interval> = None;
        for t in [0.2, 0.4, 0.6, 0.8, 1.0] {
            let res = port_reach(&spec, x0, t).unwrap().result;
            if let Some(p) = prev {
                assert!(p.closure_within(&res.support, 1e-9), "{p:?} not inside {:?}", res.support);
            }
            if t > res.diagnostics.t_underline {
                assert!(res.support.lo_or_neg_inf() < x0 && x0 < res.support.hi_or_inf(), "{x0} not interior to {:?}", res.support);
            }
            prev = Some(res.support);
        }
    }
}
