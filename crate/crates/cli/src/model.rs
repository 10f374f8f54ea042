//! Model files: a tagged JSON document holding either a linear SDE or a
//! portfolio description, with the starting state.

use std::path::Path;

use linsde::portfolio::{to_linear, PortfolioSpec};
use linsde::{Error, LinearSde, PiecewiseVecFn};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelFile {
    LinearSde {
        #[serde(rename = "T")]
        horizon: f64,
        d: usize,
        x0: f64,
        c0: PiecewiseVecFn,
        c1: PiecewiseVecFn,
        c2: PiecewiseVecFn,
        c3: PiecewiseVecFn,
    },
    Portfolio {
        #[serde(rename = "T")]
        horizon: f64,
        n: usize,
        d: usize,
        x0: f64,
        theta0: PiecewiseVecFn,
        theta1: PiecewiseVecFn,
        b: PiecewiseVecFn,
        sigma: PiecewiseVecFn,
    },
}

/// A loaded model: the linear SDE every command works on, plus the
/// portfolio view when the file describes one.
pub struct Model {
    pub file: ModelFile,
    pub sde: LinearSde,
    pub portfolio: Option<PortfolioSpec>,
    pub x0: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] Error),
}

fn check_header(horizon: f64, d: usize, x0: f64, fields: &[(&str, &PiecewiseVecFn, usize)]) -> Result<(), Error> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidModel(format!("T must be positive and finite, got {horizon}")));
    }
    if d == 0 {
        return Err(Error::InvalidModel("d must be positive".into()));
    }
    if !x0.is_finite() {
        return Err(Error::InvalidModel(format!("x0 must be finite, got {x0}")));
    }
    for (name, f, dim) in fields {
        if f.horizon() != horizon {
            return Err(Error::InvalidModel(format!("{name} has horizon {}, expected T = {horizon}", f.horizon())));
        }
        if f.dim() != *dim {
            return Err(Error::InvalidModel(format!("{name} has dim {}, expected {dim}", f.dim())));
        }
    }
    Ok(())
}

impl ModelFile {
    /// Validate and build the working model.
    pub fn build(self) -> Result<Model, Error> {
        match &self {
            ModelFile::LinearSde { horizon, d, x0, c0, c1, c2, c3 } => {
                check_header(*horizon, *d, *x0, &[("c0", c0, 1), ("c1", c1, 1), ("c2", c2, *d), ("c3", c3, *d)])?;
                let sde = LinearSde::new(c0.clone(), c1.clone(), c2.clone(), c3.clone())?;
                Ok(Model { x0: *x0, sde, portfolio: None, file: self })
            }
            ModelFile::Portfolio { horizon, n, d, x0, theta0, theta1, b, sigma } => {
                let fields = [("theta0", theta0, *n), ("theta1", theta1, *n), ("b", b, *n), ("sigma", sigma, n * d)];
                check_header(*horizon, *d, *x0, &fields)?;
                let spec = PortfolioSpec::new(*n, *d, theta0.clone(), theta1.clone(), b.clone(), sigma.clone())?;
                let sde = to_linear(&spec)?;
                Ok(Model { x0: *x0, sde, portfolio: Some(spec), file: self })
            }
        }
    }

    /// Canonical JSON: fixed key order, shortest round-trip floats.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }
}

pub fn load(path: &Path) -> Result<Model, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
    let file: ModelFile = serde_json::from_str(&text)?;
    Ok(file.build()?)
}
