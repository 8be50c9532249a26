//! Leggett-type and CHSH inequality evaluation.
//!
//! The Leggett-type inequality constrains every non-local hidden-variable
//! model in which subensembles carry definite polarizations with Malus-law
//! marginals:
//!
//! ```text
//! S_NLHV = |E11(φ) + E23(0)| + |E22(φ) + E23(0)| ≤ 4 − (4/π)|sin(φ/2)|
//! ```
//!
//! where `E11` and `E22` are correlations at sphere angle φ measured in two
//! orthogonal great-circle planes and `E23(0)` is the perfect-correlation
//! setting on their intersection. The quantum singlet predicts
//! `2V(1 + cos φ)` for the left-hand side, which exceeds the bound in a
//! finite angle window once the visibility `V` is high enough.
//!
//! The same five-setting arrangement also yields a CHSH combination
//! `|E11 + E12 − E21 + E22| ≤ 2` with quantum value `V(2cos φ + sin φ)`,
//! letting one experiment test both local and this class of non-local
//! realism.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::Visibility;
use crate::types::Measurement;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InequalityError {
    #[error("relative angle {0} rad leaves the quantity undefined")]
    DegenerateAngle(f64),
    #[error(
        "visibility {visibility} does not exceed the critical visibility {critical:.6}; \
         no violation window exists"
    )]
    NoViolation { visibility: f64, critical: f64 },
}

/// The three correlation inputs of the Leggett-type left-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeggettInputs {
    /// Correlation at relative angle φ in the first plane.
    pub e11: Measurement,
    /// Correlation at relative angle φ in the orthogonal plane.
    pub e22: Measurement,
    /// Perfect-correlation setting on the plane intersection (angle 0).
    pub e23: Measurement,
}

/// The four correlation inputs of the CHSH combination
/// `E11 + E12 − E21 + E22`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshInputs {
    pub e11: Measurement,
    pub e12: Measurement,
    pub e21: Measurement,
    pub e22: Measurement,
}

/// Outcome of comparing an inequality's left-hand side against its bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub bound: f64,
    /// `lhs − bound`; positive means the inequality is violated.
    pub margin: f64,
    /// Propagated standard error of the left-hand side, when inputs carry
    /// errors.
    pub lhs_std_error: Option<f64>,
    /// `margin` in units of `lhs_std_error` (0 when errors are absent).
    pub sigma_margin: f64,
    /// True when an absolute-value argument was exactly zero: the
    /// propagation derivative is taken as +1 there, which deserves a
    /// warning in reports.
    pub zero_abs_argument: bool,
}

impl InequalityReport {
    fn from_parts(lhs: Measurement, bound: f64, zero_abs_argument: bool) -> Self {
        let margin = lhs.value - bound;
        let sigma_margin = match lhs.std_error {
            Some(err) if err > 0.0 => margin / err,
            _ => 0.0,
        };
        InequalityReport {
            lhs: lhs.value,
            bound,
            margin,
            lhs_std_error: lhs.std_error,
            sigma_margin,
            zero_abs_argument,
        }
    }
}

/// Quadrature error propagation over independently measured terms.
///
/// Each absolute-value term is treated as an independently measured
/// quantity, so an input appearing in two terms contributes its variance
/// twice (not with a squared coefficient). This is the convention behind
/// the published error bars on combinations like
/// `|E11 + E23| + |E22 + E23|`, and the derivative of `|x|` has unit
/// magnitude everywhere, so signs never alter the result; at `x = 0` the
/// derivative is taken as `+1` and flagged.
fn propagate(terms: &[&[&Measurement]], values: &[f64]) -> (Option<f64>, bool) {
    let zero = values.contains(&0.0);
    let mut variance = 0.0;
    let mut any = false;
    for term in terms {
        for m in *term {
            if m.std_error.is_some() {
                any = true;
            }
            variance += m.variance();
        }
    }
    let err = if any { Some(variance.sqrt()) } else { None };
    (err, zero)
}

/// Left-hand side `|E11 + E23| + |E22 + E23|` with propagated error.
pub fn leggett_lhs(inputs: &LeggettInputs) -> Measurement {
    let (value, err, _) = leggett_lhs_detailed(inputs);
    Measurement {
        value,
        std_error: err,
    }
}

fn leggett_lhs_detailed(inputs: &LeggettInputs) -> (f64, Option<f64>, bool) {
    let term1 = inputs.e11.value + inputs.e23.value;
    let term2 = inputs.e22.value + inputs.e23.value;
    let value = term1.abs() + term2.abs();
    let (err, zero) = propagate(
        &[&[&inputs.e11, &inputs.e23], &[&inputs.e22, &inputs.e23]],
        &[term1, term2],
    );
    (value, err, zero)
}

/// The Leggett-type bound `4 − (4/π)|sin(φ/2)|` for sphere angle `phi`
/// (radians).
#[inline]
pub fn leggett_bound(phi: f64) -> f64 {
    4.0 - (4.0 / PI) * (0.5 * phi).sin().abs()
}

/// Full Leggett-type comparison at angle `phi` (radians).
pub fn leggett_report(inputs: &LeggettInputs, phi: f64) -> InequalityReport {
    let (value, err, zero) = leggett_lhs_detailed(inputs);
    InequalityReport::from_parts(
        Measurement {
            value,
            std_error: err,
        },
        leggett_bound(phi),
        zero,
    )
}

/// CHSH combination `|E11 + E12 − E21 + E22|` with propagated error.
pub fn chsh_value(inputs: &ChshInputs) -> Measurement {
    let (value, err, _) = chsh_detailed(inputs);
    Measurement {
        value,
        std_error: err,
    }
}

fn chsh_detailed(inputs: &ChshInputs) -> (f64, Option<f64>, bool) {
    let sum = inputs.e11.value + inputs.e12.value - inputs.e21.value + inputs.e22.value;
    let (err, zero) = propagate(
        &[&[&inputs.e11, &inputs.e12, &inputs.e21, &inputs.e22]],
        &[sum],
    );
    (sum.abs(), err, zero)
}

/// The local-realist bound on the CHSH combination.
pub const CHSH_BOUND: f64 = 2.0;

/// Full CHSH comparison against the local bound of 2.
pub fn chsh_report(inputs: &ChshInputs) -> InequalityReport {
    let (value, err, zero) = chsh_detailed(inputs);
    InequalityReport::from_parts(
        Measurement {
            value,
            std_error: err,
        },
        CHSH_BOUND,
        zero,
    )
}

/// Quantum singlet prediction for the Leggett-type left-hand side:
/// `2V(1 + cos φ)`.
#[inline]
pub fn quantum_leggett_lhs(phi: f64, vis: Visibility) -> f64 {
    2.0 * vis.value() * (1.0 + phi.cos())
}

/// Quantum singlet prediction for the CHSH combination in the orthogonal
/// two-plane arrangement (first-plane pair at angle φ, second setting of
/// Alice on the plane intersection): `V(2cos φ + sin φ)` for
/// `φ ∈ [0, π/2]`.
#[inline]
pub fn quantum_chsh_at_settings(phi: f64, vis: Visibility) -> f64 {
    vis.value() * (2.0 * phi.cos() + phi.sin())
}

/// Minimum visibility at which the quantum prediction reaches the
/// Leggett-type bound at angle `phi`: `bound(φ) / (2(1 + cos φ))`.
pub fn critical_visibility_nlhv(phi: f64) -> Result<f64, InequalityError> {
    let denom = 2.0 * (1.0 + phi.cos());
    if denom.abs() < 1e-12 {
        return Err(InequalityError::DegenerateAngle(phi));
    }
    Ok(leggett_bound(phi) / denom)
}

/// Minimum visibility at which the quantum prediction reaches the CHSH
/// bound at angle `phi` in this arrangement: `2 / (2cos φ + sin φ)`.
pub fn critical_visibility_chsh_at(phi: f64) -> Result<f64, InequalityError> {
    let denom = 2.0 * phi.cos() + phi.sin();
    if denom.abs() < 1e-12 {
        return Err(InequalityError::DegenerateAngle(phi));
    }
    Ok(2.0 / denom)
}

/// The CHSH visibility thresholds relevant to this arrangement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshCriticalVisibility {
    /// Threshold at the angle returned by [`find_phi_max`] (the arrangement
    /// actually run): `2 / (2cos φ* + sin φ*)`.
    pub at_phi_max: f64,
    /// Threshold at the CHSH-optimal settings, `1/√2`.
    pub standard_optimum: f64,
}

/// CHSH critical visibilities: at the Leggett-optimal angle and at the
/// CHSH-optimal settings.
pub fn critical_visibility_chsh_here() -> ChshCriticalVisibility {
    let phi = find_phi_max();
    ChshCriticalVisibility {
        at_phi_max: critical_visibility_chsh_at(phi).expect("φ* is non-degenerate"),
        standard_optimum: FRAC_1_SQRT_2,
    }
}

/// Golden-section minimizer for a unimodal function on `[lo, hi]`.
fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9; // (√5 − 1)/2
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Tolerance (radians) of the optimum searches below.
pub const PHI_SEARCH_TOLERANCE: f64 = 1e-8;

/// The angle (radians) where the quantum violation of the Leggett-type
/// inequality is most robust: the minimizer of
/// [`critical_visibility_nlhv`] over `(0, π/2)`, ≈ 18.81°.
///
/// Closed form for cross-checks: `sin(φ*/2) = π − √(π² − 1)`.
pub fn find_phi_max() -> f64 {
    golden_section_min(
        |phi| critical_visibility_nlhv(phi).expect("bracket excludes π"),
        1e-4,
        FRAC_PI_2,
        PHI_SEARCH_TOLERANCE,
    )
}

/// The angle (radians) maximizing the *absolute* gap
/// `quantum_leggett_lhs(φ, 1) − leggett_bound(φ)`, ≈ 18.32°. Distinct from
/// [`find_phi_max`]: the gap peaks slightly below the angle of greatest
/// robustness, and the two are worth reporting side by side.
///
/// Closed form for cross-checks: `sin(φ/2) = 1/(2π)`.
pub fn find_phi_margin_max() -> f64 {
    golden_section_min(
        |phi| leggett_bound(phi) - quantum_leggett_lhs(phi, Visibility::ONE),
        1e-4,
        FRAC_PI_2,
        PHI_SEARCH_TOLERANCE,
    )
}

/// Bisection for a sign change of `f` on `[lo, hi]`; `f(lo)` and `f(hi)`
/// must differ in sign.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    debug_assert!(flo * f(hi) <= 0.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if (flo <= 0.0) == (fmid <= 0.0) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Tolerance (radians) of the violation-window root search.
pub const WINDOW_ROOT_TOLERANCE: f64 = 1e-6;

/// The angle window `(φ_low, φ_high)` (radians) in which the quantum
/// prediction at visibility `vis` exceeds the Leggett-type bound.
///
/// Fails with [`InequalityError::NoViolation`] when the visibility does not
/// exceed the critical visibility at the optimal angle. At `V = 1` the two
/// curves touch at φ = 0, so the window opens at exactly 0.
pub fn violation_window(vis: Visibility) -> Result<(f64, f64), InequalityError> {
    let phi_star = find_phi_max();
    let critical = critical_visibility_nlhv(phi_star).expect("φ* is non-degenerate");
    let margin = |phi: f64| quantum_leggett_lhs(phi, vis) - leggett_bound(phi);
    if margin(phi_star) <= 0.0 {
        return Err(InequalityError::NoViolation {
            visibility: vis.value(),
            critical,
        });
    }
    let low = if margin(0.0) >= 0.0 {
        // Tangency at the origin (V = 1): the window opens at 0.
        0.0
    } else {
        bisect(margin, 0.0, phi_star, WINDOW_ROOT_TOLERANCE)
    };
    let high = bisect(margin, phi_star, FRAC_PI_2, WINDOW_ROOT_TOLERANCE);
    Ok((low, high))
}
