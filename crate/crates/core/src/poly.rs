//! Dense real polynomials in the absolute time variable, coefficients stored
//! low to high.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly(Vec<f64>);

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Poly(coeffs)
    }

    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    /// True when every stored coefficient is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    /// Degree after dropping trailing zero coefficients; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.0.iter().rposition(|&c| c != 0.0)
    }

    /// Number of stored coefficients minus one (the declared degree).
    pub fn stored_degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn derivative(&self) -> Poly {
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    /// Antiderivative with zero constant term.
    pub fn antiderivative(&self) -> Poly {
        let mut out = Vec::with_capacity(self.0.len() + 1);
        out.push(0.0);
        out.extend(self.0.iter().enumerate().map(|(k, &c)| c / (k as f64 + 1.0)));
        Poly(out)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        Poly(
            (0..n)
                .map(|k| self.0.get(k).copied().unwrap_or(0.0) + other.0.get(k).copied().unwrap_or(0.0))
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly(self.0.iter().map(|&c| c * s).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.0.is_empty() || other.0.is_empty() {
            return Poly::zero();
        }
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, &a) in self.0.iter().enumerate() {
            for (j, &b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    pub fn with_constant(mut self, c: f64) -> Poly {
        if self.0.is_empty() {
            self.0.push(c);
        } else {
            self.0[0] = c;
        }
        self
    }

    /// Real roots in the closed interval `[a, b]`, ascending.
    ///
    /// Isolation is by recursion on the derivative: between consecutive
    /// critical points the polynomial is monotone, so each sign change brackets
    /// exactly one root, which is then refined by bisection. The zero
    /// polynomial yields no roots.
    pub fn real_roots_in(&self, a: f64, b: f64) -> Vec<f64> {
        let deg = match self.degree() {
            None | Some(0) => return Vec::new(),
            Some(d) => d,
        };
        if deg == 1 {
            let r = -self.0[0] / self.0[1];
            return if (a..=b).contains(&r) { vec![r] } else { Vec::new() };
        }
        let mut knots = vec![a];
        knots.extend(self.derivative().real_roots_in(a, b));
        knots.push(b);
        let mut roots: Vec<f64> = Vec::new();
        let push = |r: f64, roots: &mut Vec<f64>| {
            if roots.last().is_none_or(|&last| r > last) {
                roots.push(r);
            }
        };
        for w in knots.windows(2) {
            let (mut lo, mut hi) = (w[0], w[1]);
            let (mut flo, fhi) = (self.eval(lo), self.eval(hi));
            if flo == 0.0 {
                push(lo, &mut roots);
                continue;
            }
            if fhi == 0.0 || flo.signum() == fhi.signum() {
                continue;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = self.eval(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            push(0.5 * (lo + hi), &mut roots);
        }
        if self.eval(b) == 0.0 {
            push(b, &mut roots);
        }
        roots
    }
}

impl From<Vec<f64>> for Poly {
    fn from(v: Vec<f64>) -> Self {
        Poly(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_and_calculus() {
        let p = Poly::new(vec![1.0, -2.0, 3.0]);
        assert_eq!(p.eval(2.0), 1.0 - 4.0 + 12.0);
        assert_eq!(p.derivative().coeffs(), &[-2.0, 6.0]);
        assert_eq!(p.antiderivative().coeffs(), &[0.0, 1.0, -1.0, 1.0]);
        assert_eq!(p.mul(&Poly::new(vec![0.0, 1.0])).coeffs(), &[0.0, 1.0, -2.0, 3.0]);
    }

    #[test]
    fn degree_ignores_trailing_zeros() {
        assert_eq!(Poly::new(vec![1.0, 0.0, 0.0]).degree(), Some(0));
        assert_eq!(Poly::new(vec![0.0, 0.0]).degree(), None);
        assert!(Poly::zero().is_zero());
    }

    #[test]
    fn roots_of_cubic() {
        // (t - 0.1)(t - 0.5)(t - 0.9)
        let p = Poly::new(vec![-0.045, 0.59, -1.5, 1.0]);
        let r = p.real_roots_in(0.0, 1.0);
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([0.1, 0.5, 0.9]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert_eq!(p.real_roots_in(0.2, 0.4).len(), 0);
    }

    #[test]
    fn double_root_is_found_at_critical_point() {
        let p = Poly::new(vec![0.25, -1.0, 1.0]); // (t - 0.5)^2
        let r = p.real_roots_in(0.0, 1.0);
        assert_eq!(r, vec![0.5]);
    }
}
