//! Vector-valued piecewise polynomials on `[0, T]`.
//!
//! A [`PiecewiseVecFn`] is right-continuous: on `[t_{i-1}, t_i)` it is given by
//! the `i`-th segment's polynomials, and at `t = T` it takes the left limit of
//! the last segment. Left limits at interior breakpoints are available through
//! [`PiecewiseVecFn::eval_left_limit`]. Zero tests compare stored coefficients
//! exactly; no tolerance is applied anywhere in this module.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::poly::Poly;

/// Largest polynomial degree accepted at the model boundary.
pub const MAX_INPUT_DEGREE: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPiecewise", into = "RawPiecewise")]
pub struct PiecewiseVecFn {
    dim: usize,
    horizon: f64,
    breakpoints: Vec<f64>,
    segments: Vec<Vec<Poly>>,
}

#[derive(Serialize, Deserialize)]
struct RawPiecewise {
    dim: usize,
    horizon: f64,
    breakpoints: Vec<f64>,
    segments: Vec<Vec<Poly>>,
}

impl TryFrom<RawPiecewise> for PiecewiseVecFn {
    type Error = Error;

    fn try_from(raw: RawPiecewise) -> Result<Self> {
        PiecewiseVecFn::new(raw.dim, raw.horizon, raw.breakpoints, raw.segments)
    }
}

impl From<PiecewiseVecFn> for RawPiecewise {
    fn from(f: PiecewiseVecFn) -> Self {
        RawPiecewise {
            dim: f.dim,
            horizon: f.horizon,
            breakpoints: f.breakpoints,
            segments: f.segments,
        }
    }
}

impl PiecewiseVecFn {
    /// Validated constructor used at the model boundary (degree at most 3).
    pub fn new(dim: usize, horizon: f64, breakpoints: Vec<f64>, segments: Vec<Vec<Poly>>) -> Result<Self> {
        let f = Self::new_unbounded(dim, horizon, breakpoints, segments)?;
        for seg in &f.segments {
            for p in seg {
                if p.degree().unwrap_or(0) > MAX_INPUT_DEGREE {
                    return Err(Error::DegreeOverflow {
                        degree: p.degree().unwrap_or(0),
                        max: MAX_INPUT_DEGREE,
                    });
                }
            }
        }
        Ok(f)
    }

    /// Same checks as [`new`](Self::new) except the degree cap; used for
    /// derived functions such as antiderivatives and products.
    pub fn new_unbounded(dim: usize, horizon: f64, breakpoints: Vec<f64>, segments: Vec<Vec<Poly>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be positive".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidModel(format!("horizon must be positive and finite, got {horizon}")));
        }
        if breakpoints.len() < 2 || breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != horizon {
            return Err(Error::InvalidModel(format!(
                "breakpoints must run from 0 to the horizon {horizon}, got {breakpoints:?}"
            )));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidModel(format!("breakpoints must be strictly increasing: {breakpoints:?}")));
        }
        if segments.len() != breakpoints.len() - 1 {
            return Err(Error::InvalidModel(format!(
                "{} breakpoints require {} segments, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                segments.len()
            )));
        }
        for (i, seg) in segments.iter().enumerate() {
            if seg.len() != dim {
                return Err(Error::InvalidModel(format!(
                    "segment {i} has {} components, expected {dim}",
                    seg.len()
                )));
            }
            if seg.iter().flat_map(|p| p.coeffs()).any(|c| !c.is_finite()) {
                return Err(Error::InvalidModel(format!("segment {i} has a non-finite coefficient")));
            }
        }
        Ok(PiecewiseVecFn { dim, horizon, breakpoints, segments })
    }

    /// Single-segment function with the given component polynomials.
    pub fn polynomial(horizon: f64, components: Vec<Poly>) -> Result<Self> {
        let dim = components.len();
        Self::new(dim, horizon, vec![0.0, horizon], vec![components])
    }

    pub fn constant(horizon: f64, values: &[f64]) -> Result<Self> {
        Self::polynomial(horizon, values.iter().map(|&v| Poly::constant(v)).collect())
    }

    pub fn scalar_constant(horizon: f64, value: f64) -> Result<Self> {
        Self::constant(horizon, &[value])
    }

    pub fn zero(dim: usize, horizon: f64) -> Result<Self> {
        Self::constant(horizon, &vec![0.0; dim])
    }

    /// Piecewise-constant function: `values[i]` holds on `[breakpoints[i], breakpoints[i+1])`.
    pub fn step(horizon: f64, breakpoints: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let dim = values.first().map_or(0, |v| v.len());
        let segments = values
            .into_iter()
            .map(|v| v.into_iter().map(Poly::constant).collect())
            .collect();
        Self::new(dim, horizon, breakpoints, segments)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn segment(&self, i: usize) -> &[Poly] {
        &self.segments[i]
    }

    /// `(start, end)` of segment `i`.
    pub fn segment_bounds(&self, i: usize) -> (f64, f64) {
        (self.breakpoints[i], self.breakpoints[i + 1])
    }

    pub fn max_degree(&self) -> usize {
        self.segments
            .iter()
            .flatten()
            .map(|p| p.degree().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// Index of the segment whose half-open interval contains `t`; `t = T`
    /// maps to the last segment. Caller guarantees `0 <= t <= T`.
    pub fn segment_index(&self, t: f64) -> usize {
        let n = self.segments.len();
        let idx = self.breakpoints.partition_point(|&b| b <= t);
        idx.saturating_sub(1).min(n - 1)
    }

    /// Index of the segment active just before `t`, for `0 < t <= T`.
    pub fn segment_index_left(&self, t: f64) -> usize {
        let idx = self.breakpoints.partition_point(|&b| b < t);
        idx.saturating_sub(1).min(self.segments.len() - 1)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(domain(format!("time {t} outside [0, {}]", self.horizon)));
        }
        Ok(())
    }

    pub fn eval_right(&self, t: f64) -> Result<Vec<f64>> {
        self.check_time(t)?;
        Ok(self.eval_segment(self.segment_index(t), t))
    }

    pub fn eval_left_limit(&self, t: f64) -> Result<Vec<f64>> {
        if !(t > 0.0 && t <= self.horizon) {
            return Err(domain(format!("left limit needs t in (0, {}], got {t}", self.horizon)));
        }
        Ok(self.eval_segment(self.segment_index_left(t), t))
    }

    /// Evaluate segment `i`'s polynomials at `t` (which may lie on either
    /// closed end of the segment, giving one-sided values).
    pub fn eval_segment(&self, i: usize, t: f64) -> Vec<f64> {
        self.segments[i].iter().map(|p| p.eval(t)).collect()
    }

    pub fn eval_segment_into(&self, i: usize, t: f64, out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.segments[i]) {
            *o = p.eval(t);
        }
    }

    /// Scalar shortcut: first component, right-continuous. Caller guarantees
    /// `t` in range.
    pub fn value(&self, t: f64) -> f64 {
        self.segments[self.segment_index(t)][0].eval(t)
    }

    /// Continuous antiderivative of a scalar function with `F(0) = 0`.
    pub fn antiderivative(&self) -> Result<PiecewiseVecFn> {
        if self.dim != 1 {
            return Err(domain(format!("antiderivative needs a scalar function, got dim {}", self.dim)));
        }
        let mut acc = 0.0;
        let mut segments = Vec::with_capacity(self.segments.len());
        for (i, seg) in self.segments.iter().enumerate() {
            let (a, b) = self.segment_bounds(i);
            let raw = seg[0].antiderivative();
            let offset = acc - raw.eval(a);
            let shifted = raw.with_constant(offset);
            acc = shifted.eval(b);
            segments.push(vec![shifted]);
        }
        PiecewiseVecFn::new_unbounded(1, self.horizon, self.breakpoints.clone(), segments)
    }

    /// Segments overlapping `[a, b)`.
    fn overlapping(&self, a: f64, b: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.segments.len()).filter(move |&i| self.breakpoints[i] < b && self.breakpoints[i + 1] > a)
    }

    /// True iff every component is identically zero on `[a, b)`.
    pub fn is_zero_on(&self, a: f64, b: f64) -> bool {
        self.overlapping(a, b)
            .all(|i| self.segments[i].iter().all(Poly::is_zero))
    }

    pub fn segment_is_zero(&self, i: usize) -> bool {
        self.segments[i].iter().all(Poly::is_zero)
    }

    /// `inf { s >= from : f(s) != 0 }`, or `T` when `f` vanishes on `[from, T)`.
    ///
    /// A polynomial that is not identically zero has finitely many roots, so
    /// the infimum is either `from` or the start of a segment.
    pub fn first_nonzero(&self, from: f64) -> f64 {
        self.overlapping(from, self.horizon)
            .find(|&i| !self.segment_is_zero(i))
            .map_or(self.horizon, |i| self.breakpoints[i].max(from))
    }

    /// Re-express on a finer partition containing this function's breakpoints.
    pub fn refine(&self, breakpoints: &[f64]) -> PiecewiseVecFn {
        let segments = breakpoints
            .windows(2)
            .map(|w| self.segments[self.segment_index(0.5 * (w[0] + w[1]))].clone())
            .collect();
        PiecewiseVecFn {
            dim: self.dim,
            horizon: self.horizon,
            breakpoints: breakpoints.to_vec(),
            segments,
        }
    }

    /// Component-wise map of segment polynomials, keeping the partition.
    pub fn map_polys(&self, f: impl Fn(&Poly) -> Poly) -> PiecewiseVecFn {
        PiecewiseVecFn {
            dim: self.dim,
            horizon: self.horizon,
            breakpoints: self.breakpoints.clone(),
            segments: self.segments.iter().map(|s| s.iter().map(&f).collect()).collect(),
        }
    }
}

/// Union of all breakpoints (exact float equality decides duplicates).
pub fn union_breakpoints<'a>(fs: impl IntoIterator<Item = &'a PiecewiseVecFn>) -> Vec<f64> {
    let mut all: Vec<f64> = fs.into_iter().flat_map(|f| f.breakpoints.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

/// Rewrite every function on the union of their partitions.
pub fn merge_breakpoints(fs: &[PiecewiseVecFn]) -> Result<Vec<PiecewiseVecFn>> {
    let Some(first) = fs.first() else {
        return Ok(Vec::new());
    };
    if fs.iter().any(|f| f.horizon != first.horizon) {
        return Err(Error::InvalidModel("functions to merge must share one horizon".into()));
    }
    let bps = union_breakpoints(fs);
    Ok(fs.iter().map(|f| f.refine(&bps)).collect())
}
