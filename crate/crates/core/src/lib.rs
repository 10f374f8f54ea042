//! Scalar linear SDEs `dX = (c0 + c1 X) dt + (c2 + c3 X)ᵀ dW` with
//! piecewise-polynomial coefficients: regime classification, transition
//! laws, reachable sets, a Monte Carlo oracle and a portfolio front end.

pub mod error;
pub mod law;
pub mod oracle;
pub mod piecewise;
pub mod poly;
pub mod portfolio;
pub mod quadrature;
pub mod reach;
pub mod regime;
pub mod sde;
pub mod transform;

pub use error::{Error, Result};
pub use law::{Estimate, Provenance, TransitionLaw};
pub use oracle::{SamplePool, Scheme, SimConfig};
pub use piecewise::PiecewiseVecFn;
pub use poly::Poly;
pub use reach::{reachable_set, Branch, Interval, ReachResult};
pub use regime::{classify_at, has_density, CaseTag, RegimeReport, RegimeTimes};
pub use sde::LinearSde;
