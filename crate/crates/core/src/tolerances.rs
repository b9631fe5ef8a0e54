//! Named tolerance tiers shared by the certificate, the sweeps and the CLI.

use serde::{Deserialize, Serialize};

use crate::error::{BihermError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Identities that follow by linear algebra from the assembly.
    pub algebraic: f64,
    /// Flow invariants such as `f o phi_t = f` and the wedge relations.
    pub flow: f64,
    /// One finite-difference layer.
    pub first_derivative: f64,
    /// Two finite-difference layers.
    pub second_derivative: f64,
    /// The Lee-form scalar identity.
    pub lee_scalar: f64,
    pub integrability: f64,
    pub type_12: f64,
    pub equivariance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            algebraic: 1e-9,
            flow: 1e-7,
            first_derivative: 1e-6,
            second_derivative: 1e-4,
            lee_scalar: 1e-3,
            integrability: 1e-5,
            type_12: 1e-5,
            equivariance: 1e-7,
        }
    }
}

impl Tolerances {
    pub const NAMES: [&'static str; 8] = [
        "algebraic",
        "flow",
        "first_derivative",
        "second_derivative",
        "lee_scalar",
        "integrability",
        "type_12",
        "equivariance",
    ];

    fn slot(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "algebraic" => &mut self.algebraic,
            "flow" => &mut self.flow,
            "first_derivative" => &mut self.first_derivative,
            "second_derivative" => &mut self.second_derivative,
            "lee_scalar" => &mut self.lee_scalar,
            "integrability" => &mut self.integrability,
            "type_12" => &mut self.type_12,
            "equivariance" => &mut self.equivariance,
            _ => return None,
        })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let mut copy = *self;
        copy.slot(name).map(|v| *v)
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(BihermError::InvalidInput(format!("tolerance {name} must be positive, got {value}")));
        }
        match self.slot(name) {
            Some(v) => {
                *v = value;
                Ok(())
            }
            None => Err(BihermError::InvalidInput(format!(
                "unknown tolerance tier {name:?}; expected one of {}",
                Self::NAMES.join(", ")
            ))),
        }
    }

    /// Parses `NAME=X`.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (name, value) = spec
            .split_once('=')
            .ok_or_else(|| BihermError::InvalidInput(format!("expected NAME=X, got {spec:?}")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| BihermError::InvalidInput(format!("tolerance {name}: {value:?} is not a number")))?;
        self.set(name.trim(), value)
    }
}
