//! Model problems for `−Δu = f` on the unit cube with homogeneous Dirichlet
//! data.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhsKind {
    /// `f ≡ 1`; no closed-form solution.
    #[default]
    One,
    /// `u = Π sin(π x_i)`, `f = d π² u`.
    SinProd,
}

impl RhsKind {
    pub fn source(self, x: &[f64]) -> f64 {
        match self {
            RhsKind::One => 1.0,
            RhsKind::SinProd => x.len() as f64 * PI * PI * sin_product(x),
        }
    }

    pub fn exact_solution(self) -> Option<fn(&[f64]) -> f64> {
        match self {
            RhsKind::One => None,
            RhsKind::SinProd => Some(sin_product),
        }
    }
}

impl fmt::Display for RhsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RhsKind::One => "one",
            RhsKind::SinProd => "sinprod",
        })
    }
}

impl FromStr for RhsKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "one" => Ok(RhsKind::One),
            "sinprod" => Ok(RhsKind::SinProd),
            other => Err(invalid(format!("unknown right-hand side '{other}'"))),
        }
    }
}

pub fn sin_product(x: &[f64]) -> f64 {
    x.iter().map(|&xi| (PI * xi).sin()).product()
}
