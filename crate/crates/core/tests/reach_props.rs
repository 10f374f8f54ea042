mod common;

use common::{random_driftless, random_structured_model, ramp, rng};
use linsde::oracle::simulate_terminal;
use linsde::reach::{g_extremal, support_numeric, DEFAULT_K_SCHEDULE};
use linsde::{reachable_set, Interval, LinearSde, SimConfig};
use rand::Rng;

/// Support mapped to driftless coordinates `(x − λ0) / λ1 − x0`.
fn driftless_support(sde: &LinearSde, x0: f64, t: f64) -> Interval {
    let s = reachable_set(sde, x0, t).unwrap().support;
    let tr = sde.transform();
    let map = |v: f64| (v - tr.lambda0(t)) / tr.lambda1(t) - x0;
    Interval { lo: s.lo.map(map), hi: s.hi.map(map), ..s }
}

fn close_end(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => (a - b).abs() <= tol,
        _ => false,
    }
}

#[test]
fn branch_logic_agrees_with_extremal_odes() {
    let mut r = rng(51);
    let mut finite_ends = 0;
    for m in 0..50 {
        let sde = random_driftless(&mut r);
        let x0: f64 = r.random_range(-1.0..1.0);
        let t: f64 = r.random_range(0.1..=1.0);
        let exact = reachable_set(&sde, x0, t).unwrap();
        if exact.support.lo.is_some() && exact.support.lo == exact.support.hi {
            continue;
        }
        let numeric = support_numeric(&sde, x0, t, &DEFAULT_K_SCHEDULE).unwrap();
        let ok = close_end(exact.support.lo, numeric.support.lo, 1e-2) && close_end(exact.support.hi, numeric.support.hi, 1e-2);
        assert!(ok, "model {m} t {t}: branch {} gives {:?}, numeric {:?}", exact.branch.tag(), exact.support, numeric.support);
        finite_ends += usize::from(exact.support.lo.is_some()) + usize::from(exact.support.hi.is_some());
    }
    assert!(finite_ends > 5, "too few finite ends exercised: {finite_ends}");
}

#[test]
fn g_monotone_in_k_and_t() {
    let mut r = rng(52);
    let ks = [-300.0, -30.0, -3.0, 0.0, 3.0, 30.0, 300.0];
    for _ in 0..10 {
        let sde = random_driftless(&mut r);
        let x0: f64 = r.random_range(-1.0..1.0);
        for t in [0.25, 0.5, 0.75, 1.0] {
            let gs: Vec<Option<f64>> = ks.iter().map(|&k| g_extremal(&sde, x0, k, t).unwrap().value()).collect();
            for w in gs.windows(2) {
                if let (Some(a), Some(b)) = (w[0], w[1]) {
                    assert!(a <= b + 1e-6 * (1.0 + b.abs()), "g not monotone in k: {a} > {b}");
                }
            }
        }
        for &k in &ks {
            let gs: Vec<Option<f64>> = (1..=8).map(|j| g_extremal(&sde, x0, k, j as f64 / 8.0).unwrap().value()).collect();
            for w in gs.windows(2) {
                if let (Some(a), Some(b)) = (w[0], w[1]) {
                    let tol = 1e-6 * (1.0 + a.abs());
                    if k >= 0.0 {
                        assert!(b >= a - tol, "k = {k}: g decreased in t");
                    } else {
                        assert!(b <= a + tol, "k = {k}: g increased in t");
                    }
                }
            }
        }
    }
}

#[test]
fn supports_nested_in_time() {
    let mut r = rng(53);
    for _ in 0..40 {
        let (sde, _, _) = random_structured_model(&mut r, 1);
        let x0: f64 = r.random_range(-1.0..1.0);
        let mut prev: Option<Interval> = None;
        for t in [0.2, 0.4, 0.6, 0.8, 1.0] {
            let s = driftless_support(&sde, x0, t);
            if let Some(p) = prev {
                assert!(p.closure_within(&s, 1e-9), "{p:?} not inside {s:?} at t = {t}");
            }
            prev = Some(s);
        }
    }
}

#[test]
fn simulated_values_fill_the_support() {
    for (sde, x0, t) in [(ramp(0.0), 0.0, 1.0), (ramp(-0.5), 0.0, 1.0), (common::gbm(), 1.0, 1.0)] {
        let reach = reachable_set(&sde, x0, t).unwrap();
        let pool = simulate_terminal(&sde, 0.0, x0, t, SimConfig::euler(100_000, 1000, 42)).unwrap();
        let inside = pool.values().iter().filter(|&&v| reach.support.contains_closed(v, 0.0)).count();
        assert!(inside as f64 >= 0.999 * pool.len() as f64, "{} of {} inside", inside, pool.len());
        if let (Some(lo), None) = (reach.support.lo, reach.support.hi) {
            let v = pool.values();
            let scale = v[(0.99 * v.len() as f64) as usize] - v[(0.01 * v.len() as f64) as usize];
            let near = v.iter().filter(|&&x| x > lo && x < lo + 0.1 * scale).count();
            assert!(near > 0, "no samples near the lower end {lo}");
        }
    }
}

#[test]
fn lower_end_left_continuous() {
    let sde = ramp(0.0);
    let t = 0.7;
    let at = reachable_set(&sde, 0.0, t).unwrap().reachable.lo.unwrap();
    let gaps: Vec<f64> = [0.1, 0.01, 0.001]
        .iter()
        .map(|d| (at - reachable_set(&sde, 0.0, t - d).unwrap().reachable.lo.unwrap()).abs())
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    assert!(gaps[2] < 2e-3);
}
