//! Quantum predictions for a polarization singlet with imperfect visibility.
//!
//! For measurement directions `a`, `b` on the Poincaré sphere the singlet
//! correlation is `E = −a·b = −cos φ`. Real sources wash this out by a
//! visibility factor `V ∈ [0, 1]`: `E = −V a·b`, with joint outcome
//! probabilities `P(i, j) = (1 − ij·V·a·b)/4`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::PoincareVector;
use crate::types::Outcome;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("visibility {0} outside [0, 1]")]
    InvalidVisibility(f64),
}

/// Two-photon interference visibility, the contrast factor multiplying every
/// correlation. Validated into `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Visibility(f64);

impl Visibility {
    pub const ONE: Visibility = Visibility(1.0);

    pub fn new(value: f64) -> Result<Self, QuantumError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(QuantumError::InvalidVisibility(value));
        }
        Ok(Visibility(value))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Visibility {
    type Error = QuantumError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Visibility::new(value)
    }
}

impl From<Visibility> for f64 {
    fn from(v: Visibility) -> f64 {
        v.0
    }
}

/// Ideal singlet correlation `−a·b`.
#[inline]
pub fn singlet_correlation(a: &PoincareVector, b: &PoincareVector) -> f64 {
    -a.dot(b)
}

/// Singlet correlation damped by finite visibility: `−V a·b`.
#[inline]
pub fn visibility_correlation(a: &PoincareVector, b: &PoincareVector, vis: Visibility) -> f64 {
    -vis.value() * a.dot(b)
}

/// Joint probability of outcomes `(i, j)` for settings `(a, b)`:
/// `(1 − ij·V·a·b)/4`. The four cells are a probability distribution with
/// unpolarized marginals.
#[inline]
pub fn joint_probability(
    i: Outcome,
    j: Outcome,
    a: &PoincareVector,
    b: &PoincareVector,
    vis: Visibility,
) -> f64 {
    0.25 * (1.0 - i.sign() * j.sign() * vis.value() * a.dot(b))
}
