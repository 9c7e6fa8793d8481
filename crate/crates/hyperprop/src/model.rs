//! JSON model-file schema and loading.
//!
//! ```json
//! {
//!   "n": 2,
//!   "m": 1,
//!   "speeds": ["1", "-1"],
//!   "dampings": ["0", "0"],
//!   "boundary": {"nonlinear": {"h": ["0.8*cos(t)*sin(xi2)", "sin(0.9*xi1)^2"]}},
//!   "autonomous": false,
//!   "speed_floor": 1.0,
//!   "validation": {"t_max": 4.0}
//! }
//! ```
//!
//! `speeds` and `dampings` are expressions in `x, t`; a nonlinear boundary
//! holds expressions in `t, xi1..xin`; a linear boundary is
//! `{"linear": {"P": [[...], ...]}}`. The full schema is documented in
//! `docs/model_format.md`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::exprlang;
use crate::system::{Boundary, SystemSpec, ValidationConfig};
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearBoundaryFile {
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonlinearBoundaryFile {
    pub h: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear: Option<LinearBoundaryFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonlinear: Option<NonlinearBoundaryFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nt: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_xi: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub n: usize,
    pub m: usize,
    pub speeds: Vec<String>,
    pub dampings: Vec<String>,
    pub boundary: BoundaryFile,
    #[serde(default)]
    pub autonomous: bool,
    pub speed_floor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationFile>,
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model files serialize")
    }

    /// Parse all expressions and build the validated spec.
    pub fn to_spec(&self) -> Result<SystemSpec> {
        let coeff_env = ["x", "t"];
        let speeds = self
            .speeds
            .iter()
            .map(|s| exprlang::parse(s, &coeff_env))
            .collect::<Result<Vec<_>>>()?;
        let dampings = self
            .dampings
            .iter()
            .map(|s| exprlang::parse(s, &coeff_env))
            .collect::<Result<Vec<_>>>()?;
        let boundary = match (&self.boundary.linear, &self.boundary.nonlinear) {
            (Some(linear), None) => Boundary::Linear {
                p: linear.p.clone(),
            },
            (None, Some(nonlinear)) => {
                let names: Vec<String> = std::iter::once("t".to_string())
                    .chain((1..=self.n).map(|i| format!("xi{i}")))
                    .collect();
                let env: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
                let h = nonlinear
                    .h
                    .iter()
                    .map(|s| exprlang::parse(s, &env))
                    .collect::<Result<Vec<_>>>()?;
                Boundary::Nonlinear { h }
            }
            (Some(_), Some(_)) => {
                return Err(Error::Model(
                    "boundary must be either linear or nonlinear, not both".into(),
                ));
            }
            (None, None) => {
                return Err(Error::Model(
                    "boundary needs a `linear` or `nonlinear` entry".into(),
                ));
            }
        };
        let defaults = ValidationConfig::default();
        let validation = match &self.validation {
            None => defaults,
            Some(v) => ValidationConfig {
                t_max: v.t_max.unwrap_or(defaults.t_max),
                xi_lo: v.xi_lo.unwrap_or(defaults.xi_lo),
                xi_hi: v.xi_hi.unwrap_or(defaults.xi_hi),
                nx: v.nx.unwrap_or(defaults.nx),
                nt: v.nt.unwrap_or(defaults.nt),
                n_xi: v.n_xi.unwrap_or(defaults.n_xi),
                fd_step: defaults.fd_step,
            },
        };
        SystemSpec::new(
            self.n,
            self.m,
            speeds,
            dampings,
            boundary,
            self.autonomous,
            self.speed_floor,
            validation,
        )
    }
}
