use std::sync::OnceLock;

use crate::error::{domain, Error, Result};
use crate::piecewise::{merge_breakpoints, PiecewiseVecFn};
use crate::regime::RegimeTimes;
use crate::transform::Transform;

/// `dX = (c0 + c1 X) dt + (c2 + c3 X)ᵀ dW` on `[0, T]` with a `d`-dimensional
/// Brownian driver. All four coefficients are stored on one common partition.
#[derive(Clone, Debug)]
pub struct LinearSde {
    c0: PiecewiseVecFn,
    c1: PiecewiseVecFn,
    c2: PiecewiseVecFn,
    c3: PiecewiseVecFn,
    transform: Transform,
    regime: OnceLock<RegimeTimes>,
}

impl LinearSde {
    pub fn new(c0: PiecewiseVecFn, c1: PiecewiseVecFn, c2: PiecewiseVecFn, c3: PiecewiseVecFn) -> Result<Self> {
        if c0.dim() != 1 || c1.dim() != 1 {
            return Err(Error::InvalidModel(format!(
                "c0 and c1 must be scalar, got dims {} and {}",
                c0.dim(),
                c1.dim()
            )));
        }
        if c2.dim() != c3.dim() {
            return Err(Error::InvalidModel(format!(
                "c2 and c3 must share the Brownian dimension, got {} and {}",
                c2.dim(),
                c3.dim()
            )));
        }
        let merged = merge_breakpoints(&[c0, c1, c2, c3])?;
        let [c0, c1, c2, c3]: [PiecewiseVecFn; 4] = merged.try_into().expect("four inputs");
        let transform = Transform::build(&c0, &c1)?;
        Ok(LinearSde { c0, c1, c2, c3, transform, regime: OnceLock::new() })
    }

    /// Convenience constructor from constant coefficients on `[0, horizon]`.
    pub fn constant(horizon: f64, c0: f64, c1: f64, c2: &[f64], c3: &[f64]) -> Result<Self> {
        Self::new(
            PiecewiseVecFn::scalar_constant(horizon, c0)?,
            PiecewiseVecFn::scalar_constant(horizon, c1)?,
            PiecewiseVecFn::constant(horizon, c2)?,
            PiecewiseVecFn::constant(horizon, c3)?,
        )
    }

    pub fn c0(&self) -> &PiecewiseVecFn {
        &self.c0
    }

    pub fn c1(&self) -> &PiecewiseVecFn {
        &self.c1
    }

    pub fn c2(&self) -> &PiecewiseVecFn {
        &self.c2
    }

    pub fn c3(&self) -> &PiecewiseVecFn {
        &self.c3
    }

    pub fn horizon(&self) -> f64 {
        self.c0.horizon()
    }

    /// Brownian dimension `d`.
    pub fn dim(&self) -> usize {
        self.c2.dim()
    }

    pub fn breakpoints(&self) -> &[f64] {
        self.c0.breakpoints()
    }

    pub fn num_segments(&self) -> usize {
        self.c0.num_segments()
    }

    pub fn segment_index(&self, t: f64) -> usize {
        self.c0.segment_index(t)
    }

    pub fn segment_bounds(&self, i: usize) -> (f64, f64) {
        self.c0.segment_bounds(i)
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    /// Regime times `t*`, `t_*` and `ξ`, computed once.
    pub fn regime(&self) -> &RegimeTimes {
        self.regime.get_or_init(|| crate::regime::analyze(self))
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon()).contains(&t) {
            return Err(domain(format!("time {t} outside [0, {}]", self.horizon())));
        }
        Ok(())
    }

    pub(crate) fn check_time_open(&self, t: f64) -> Result<()> {
        if !(0.0..self.horizon()).contains(&t) {
            return Err(domain(format!("time {t} outside [0, {})", self.horizon())));
        }
        Ok(())
    }
}
