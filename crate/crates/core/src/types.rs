//! Small value types shared across the library.

use serde::{Deserialize, Serialize};

/// A dichotomic measurement outcome, recorded as `+1` or `-1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    /// Numeric value of the outcome: `+1.0` or `-1.0`.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }

    /// Both outcomes, in the order used for count-table cells.
    pub const BOTH: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    /// Product of two outcomes as a number (`+1.0` when equal, `-1.0` otherwise).
    #[inline]
    pub fn product(self, other: Outcome) -> f64 {
        if self == other {
            1.0
        } else {
            -1.0
        }
    }
}

/// A correlation (or marginal) estimate together with its statistical error
/// and the number of events that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    /// Estimated expectation value, in `[-1, 1]` up to statistical noise.
    pub value: f64,
    /// One standard error of `value`; `0.0` when the estimate is exact.
    pub std_error: f64,
    /// Number of detected pairs (or Monte Carlo samples) behind the estimate.
    pub total_counts: u64,
}

impl CorrelationEstimate {
    /// Estimate from the empirical mean of `n` dichotomic (`±1`) samples,
    /// with the binomial standard error `sqrt((1 - mean²)/n)`.
    pub fn from_dichotomic_mean(mean: f64, n: u64) -> Self {
        let variance = (1.0 - mean * mean).max(0.0);
        let std_error = if n > 0 {
            (variance / n as f64).sqrt()
        } else {
            0.0
        };
        CorrelationEstimate {
            value: mean,
            std_error,
            total_counts: n,
        }
    }
}

/// A measured value with an optional standard error, the common currency of
/// the inequality evaluators (errors are propagated only when present).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub value: f64,
    pub std_error: Option<f64>,
}

impl Measurement {
    /// A value with no error information attached.
    pub fn exact(value: f64) -> Self {
        Measurement {
            value,
            std_error: None,
        }
    }

    /// A value with a known standard error.
    pub fn with_error(value: f64, std_error: f64) -> Self {
        Measurement {
            value,
            std_error: Some(std_error),
        }
    }

    /// Variance contribution of this measurement (zero when no error is known).
    pub(crate) fn variance(&self) -> f64 {
        self.std_error.map_or(0.0, |e| e * e)
    }
}

impl From<&CorrelationEstimate> for Measurement {
    fn from(est: &CorrelationEstimate) -> Self {
        Measurement::with_error(est.value, est.std_error)
    }
}
