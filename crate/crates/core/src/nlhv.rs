//! A non-local hidden-variable model for polarization-entangled photon pairs.
//!
//! Each emitted pair carries a definite polarization pair `(u, v)` — `u` for
//! the photon sent to Alice, `v` for Bob's — plus one hidden variable
//! `λ ∈ [0, 1]`, uniformly distributed. Outcomes are deterministic:
//!
//! * Alice outputs `+1` iff `λ ≤ λ_A` with `λ_A = (1 + u·a)/2`,
//! * Bob outputs `+1` iff `λ ∈ [x1, x2]` with
//!   `x1 = (1 + u·a − v·b + a·b)/4` and `x2 = (3 + u·a + v·b + a·b)/4`.
//!
//! Bob's interval endpoints depend on Alice's setting `a`, which is the
//! model's explicit non-locality. Both marginals obey Malus' law
//! (`Ā = u·a`, `B̄ = v·b`), and whenever the interval is well-placed
//! (`0 ≤ x1 ≤ λ_A ≤ x2 ≤ 1`) the subensemble correlation is exactly `−a·b`,
//! i.e. the quantum singlet correlation. The placement condition fails for
//! some setting/polarization combinations; that *validity domain* is the
//! crux of the Leggett-type analysis, so every sampling routine here either
//! fails loudly on invalid combinations ([`IntervalPolicy::Strict`]) or
//! keeps the interval width — and hence both Malus laws — while sliding the
//! interval back into `[0, 1]` ([`IntervalPolicy::Clamp`]). The clamped
//! variant is still a member of the model class the inequality constrains;
//! it simply no longer reproduces the singlet correlation.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{uniform_sphere_sample, PoincareVector};
use crate::types::{CorrelationEstimate, Outcome};

/// Absolute slack for validity comparisons, absorbing floating-point
/// rounding in the interval endpoints (sums like `3 + p − p + 1` do not
/// round to exactly 4).
pub const VALIDITY_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NlhvError {
    #[error("hidden variable {0} outside [0, 1]")]
    LambdaOutOfRange(f64),
    /// The interval construction left its domain for these inputs. Carries
    /// the offending combination and, for sampled estimates, the fraction of
    /// draws that were invalid.
    #[error(
        "model validity violated for a=({}, {}, {}), b=({}, {}, {}), u=({}, {}, {}), v=({}, {}, {}); \
         invalid fraction {invalid_fraction:.4}",
        a.x(), a.y(), a.z(), b.x(), b.y(), b.z(), u.x(), u.y(), u.z(), v.x(), v.y(), v.z()
    )]
    ModelInvalid {
        a: PoincareVector,
        b: PoincareVector,
        u: PoincareVector,
        v: PoincareVector,
        invalid_fraction: f64,
    },
    #[error("mixture weights must be non-negative (found {0})")]
    NegativeWeight(f64),
    #[error("mixture weights must sum to 1 within 1e-12 (sum = {0})")]
    WeightsNotNormalized(f64),
    #[error("a weighted mixture needs at least one entry")]
    EmptyMixture,
}

/// The hidden variable: one uniform draw from `[0, 1]` per emitted pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenVariable(f64);

impl HiddenVariable {
    pub fn new(lambda: f64) -> Result<Self, NlhvError> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(NlhvError::LambdaOutOfRange(lambda));
        }
        Ok(HiddenVariable(lambda))
    }

    /// Uniform draw from `[0, 1)`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        HiddenVariable(rng.gen::<f64>())
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// The definite polarizations carried by one subensemble: `u` travels to
/// Alice, `v` to Bob.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubensemblePolarization {
    pub u: PoincareVector,
    pub v: PoincareVector,
}

/// One entry of a discrete polarization mixture.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedPair {
    pub u: PoincareVector,
    pub v: PoincareVector,
    pub weight: f64,
}

/// The source distribution over subensemble polarizations `(u, v)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SourceModel {
    /// `u` uniform on the sphere; the pair is `(u, −u)` or `(−u, u)` with
    /// equal probability (a rotationally invariant two-point mixture).
    SingletTwoPoint,
    /// Every pair carries the same `(u, v)`.
    FixedPair {
        u: PoincareVector,
        v: PoincareVector,
    },
    /// A discrete mixture of polarization pairs with weights summing to 1.
    WeightedList(Vec<WeightedPair>),
}

impl SourceModel {
    /// Validating constructor for [`SourceModel::WeightedList`].
    pub fn weighted_list(pairs: Vec<WeightedPair>) -> Result<Self, NlhvError> {
        if pairs.is_empty() {
            return Err(NlhvError::EmptyMixture);
        }
        let mut sum = 0.0;
        for p in &pairs {
            if p.weight.is_nan() || p.weight < 0.0 {
                return Err(NlhvError::NegativeWeight(p.weight));
            }
            sum += p.weight;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(NlhvError::WeightsNotNormalized(sum));
        }
        Ok(SourceModel::WeightedList(pairs))
    }

    /// The two-point mixture `{(u, −u), (−u, u)}` with equal weights: the
    /// singlet-like source pinned to one axis instead of averaged over the
    /// sphere. With `u` normal to a measurement plane this source satisfies
    /// the validity condition for every setting pair in that plane.
    pub fn singlet_pair(u: PoincareVector) -> Self {
        SourceModel::WeightedList(vec![
            WeightedPair {
                u,
                v: -u,
                weight: 0.5,
            },
            WeightedPair {
                u: -u,
                v: u,
                weight: 0.5,
            },
        ])
    }

    /// Draws one subensemble polarization pair.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SubensemblePolarization {
        match self {
            SourceModel::SingletTwoPoint => {
                let u = uniform_sphere_sample(rng);
                if rng.gen::<bool>() {
                    SubensemblePolarization { u, v: -u }
                } else {
                    SubensemblePolarization { u: -u, v: u }
                }
            }
            SourceModel::FixedPair { u, v } => SubensemblePolarization { u: *u, v: *v },
            SourceModel::WeightedList(pairs) => {
                let mut t: f64 = rng.gen::<f64>();
                for p in pairs {
                    t -= p.weight;
                    if t < 0.0 {
                        return SubensemblePolarization { u: p.u, v: p.v };
                    }
                }
                // Weight rounding can leave a sliver above the last cumulative
                // sum; attribute it to the final entry.
                let last = pairs.last().expect("validated non-empty");
                SubensemblePolarization {
                    u: last.u,
                    v: last.v,
                }
            }
        }
    }
}

/// Alice's threshold `λ_A = (1 + u·a)/2`; she outputs `+1` iff `λ ≤ λ_A`.
#[inline]
pub fn alice_threshold(a: &PoincareVector, u: &PoincareVector) -> f64 {
    (0.5 * (1.0 + u.dot(a))).clamp(0.0, 1.0)
}

/// Alice's deterministic outcome. The threshold itself maps to `+1`.
#[inline]
pub fn alice_outcome(a: &PoincareVector, u: &PoincareVector, lambda: HiddenVariable) -> Outcome {
    if lambda.value() <= alice_threshold(a, u) {
        Outcome::Plus
    } else {
        Outcome::Minus
    }
}

/// Bob's acceptance interval `[x1, x2]`: he outputs `+1` iff `λ` falls in it.
/// The width `x2 − x1 = (1 + v·b)/2` encodes Bob's Malus law regardless of
/// where the interval sits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BobInterval {
    x1: f64,
    x2: f64,
}

impl BobInterval {
    #[inline]
    pub fn x1(&self) -> f64 {
        self.x1
    }

    #[inline]
    pub fn x2(&self) -> f64 {
        self.x2
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    /// Closed-interval membership; both endpoints map to `+1`.
    #[inline]
    pub fn contains(&self, lambda: HiddenVariable) -> bool {
        let l = lambda.value();
        self.x1 <= l && l <= self.x2
    }
}

#[inline]
fn interval_endpoints(ua: f64, vb: f64, ab: f64) -> (f64, f64) {
    (0.25 * (1.0 + ua - vb + ab), 0.25 * (3.0 + ua + vb + ab))
}

/// Bob's interval for the given settings and polarizations, or
/// [`NlhvError::ModelInvalid`] when the endpoints leave `[0, 1]` or cross.
///
/// Endpoints within [`VALIDITY_SLACK`] of the domain are accepted and
/// clipped, absorbing floating-point rounding of exact boundary cases.
pub fn bob_interval(
    a: &PoincareVector,
    b: &PoincareVector,
    u: &PoincareVector,
    v: &PoincareVector,
) -> Result<BobInterval, NlhvError> {
    let (x1, x2) = interval_endpoints(u.dot(a), v.dot(b), a.dot(b));
    if x1 < -VALIDITY_SLACK || x2 > 1.0 + VALIDITY_SLACK || x1 > x2 + VALIDITY_SLACK {
        return Err(NlhvError::ModelInvalid {
            a: *a,
            b: *b,
            u: *u,
            v: *v,
            invalid_fraction: 1.0,
        });
    }
    Ok(BobInterval {
        x1: x1.clamp(0.0, 1.0),
        x2: x2.clamp(0.0, 1.0),
    })
}

/// Bob's interval with its exact width but a placement slid back into
/// `[0, 1]` when the nominal endpoints leave the domain. Always well-formed,
/// always Malus-law faithful; coincides with [`bob_interval`] on the validity
/// domain.
pub fn bob_interval_clamped(
    a: &PoincareVector,
    b: &PoincareVector,
    u: &PoincareVector,
    v: &PoincareVector,
) -> BobInterval {
    let (x1, x2) = clamped_endpoints(u.dot(a), v.dot(b), a.dot(b));
    BobInterval { x1, x2 }
}

#[inline]
fn clamped_endpoints(ua: f64, vb: f64, ab: f64) -> (f64, f64) {
    let width = (0.5 * (1.0 + vb)).clamp(0.0, 1.0);
    let (x1, _) = interval_endpoints(ua, vb, ab);
    let x1 = x1.clamp(0.0, 1.0 - width);
    (x1, x1 + width)
}

/// Bob's deterministic outcome under the strict placement rule.
pub fn bob_outcome(
    a: &PoincareVector,
    b: &PoincareVector,
    u: &PoincareVector,
    v: &PoincareVector,
    lambda: HiddenVariable,
) -> Result<Outcome, NlhvError> {
    let interval = bob_interval(a, b, u, v)?;
    Ok(if interval.contains(lambda) {
        Outcome::Plus
    } else {
        Outcome::Minus
    })
}

/// Bob's deterministic outcome under the clamped placement rule (never fails).
pub fn bob_outcome_clamped(
    a: &PoincareVector,
    b: &PoincareVector,
    u: &PoincareVector,
    v: &PoincareVector,
    lambda: HiddenVariable,
) -> Outcome {
    if bob_interval_clamped(a, b, u, v).contains(lambda) {
        Outcome::Plus
    } else {
        Outcome::Minus
    }
}

/// Whether the model reproduces the singlet correlation for this
/// combination: both complementarity branches
/// `|a·b ± u·a| ≤ 1 ∓ v·b` must hold (within [`VALIDITY_SLACK`]).
///
/// This is equivalent to Bob's interval being well-formed *and* straddling
/// Alice's threshold (`x1 ≤ λ_A ≤ x2`).
pub fn model_valid(
    a: &PoincareVector,
    b: &PoincareVector,
    u: &PoincareVector,
    v: &PoincareVector,
) -> bool {
    let ua = u.dot(a);
    let vb = v.dot(b);
    let ab = a.dot(b);
    model_valid_from_parts(ua, vb, ab)
}

#[inline]
fn model_valid_from_parts(ua: f64, vb: f64, ab: f64) -> bool {
    (ab + ua).abs() <= 1.0 - vb + VALIDITY_SLACK && (ab - ua).abs() <= 1.0 + vb + VALIDITY_SLACK
}

/// Exact subensemble averages in the validity domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubensembleAverages {
    /// `Ā = u·a` (Alice's Malus law).
    pub mean_alice: f64,
    /// `B̄ = v·b` (Bob's Malus law).
    pub mean_bob: f64,
    /// `(AB)̄ = −a·b` (the singlet correlation).
    pub mean_product: f64,
}

/// Closed-form subensemble averages, available only where the model is
/// valid; otherwise [`NlhvError::ModelInvalid`].
pub fn subensemble_averages(
    a: &PoincareVector,
    b: &PoincareVector,
    u: &PoincareVector,
    v: &PoincareVector,
) -> Result<SubensembleAverages, NlhvError> {
    if !model_valid(a, b, u, v) {
        return Err(NlhvError::ModelInvalid {
            a: *a,
            b: *b,
            u: *u,
            v: *v,
            invalid_fraction: 1.0,
        });
    }
    Ok(SubensembleAverages {
        mean_alice: u.dot(a),
        mean_bob: v.dot(b),
        mean_product: -a.dot(b),
    })
}

/// How sampling routines treat combinations outside the validity domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntervalPolicy {
    /// Fail with [`NlhvError::ModelInvalid`], reporting the invalid fraction.
    Strict,
    /// Keep the interval width (both Malus laws stay exact) but slide the
    /// interval into `[0, 1]`. The result remains in the model class the
    /// Leggett-type bound constrains, but no longer matches `−a·b`.
    Clamp,
}

/// Monte Carlo product correlation `⟨A·B⟩` for a source and a setting pair,
/// failing on the first pass if any sampled polarization pair is invalid
/// (the error reports the invalid fraction over all `n` draws).
pub fn source_correlation<R: Rng + ?Sized>(
    source: &SourceModel,
    a: &PoincareVector,
    b: &PoincareVector,
    n: u64,
    rng: &mut R,
) -> Result<CorrelationEstimate, NlhvError> {
    source_correlation_with_policy(source, a, b, n, rng, IntervalPolicy::Strict)
}

/// [`source_correlation`] with an explicit invalid-regime policy.
pub fn source_correlation_with_policy<R: Rng + ?Sized>(
    source: &SourceModel,
    a: &PoincareVector,
    b: &PoincareVector,
    n: u64,
    rng: &mut R,
    policy: IntervalPolicy,
) -> Result<CorrelationEstimate, NlhvError> {
    source_correlation_detailed(source, a, b, n, rng, policy).map(|d| d.estimate)
}

/// A correlation estimate plus invalid-regime diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceCorrelation {
    pub estimate: CorrelationEstimate,
    /// Number of draws whose polarization pair fell in the invalid regime.
    /// Nonzero only under [`IntervalPolicy::Clamp`]; the strict policy
    /// fails instead of clamping.
    pub clamped_draws: u64,
}

/// [`source_correlation_with_policy`] returning how many draws had to be
/// clamped, so callers can tell a clean valid-regime estimate from one
/// that exercised the width-preserving fallback.
pub fn source_correlation_detailed<R: Rng + ?Sized>(
    source: &SourceModel,
    a: &PoincareVector,
    b: &PoincareVector,
    n: u64,
    rng: &mut R,
    policy: IntervalPolicy,
) -> Result<SourceCorrelation, NlhvError> {
    assert!(n > 0, "need at least one sample");
    let ab = a.dot(b);

    // A fixed pair has fixed interval parts; hoist them out of the loop.
    if let SourceModel::FixedPair { u, v } = source {
        let ua = u.dot(a);
        let vb = v.dot(b);
        let valid = model_valid_from_parts(ua, vb, ab);
        if policy == IntervalPolicy::Strict && !valid {
            return Err(NlhvError::ModelInvalid {
                a: *a,
                b: *b,
                u: *u,
                v: *v,
                invalid_fraction: 1.0,
            });
        }
        let lam_a = (0.5 * (1.0 + ua)).clamp(0.0, 1.0);
        let (x1, x2) = clamped_endpoints(ua, vb, ab);
        let mut sum = 0i64;
        for _ in 0..n {
            let l: f64 = rng.gen();
            let alice = l <= lam_a;
            let bob = x1 <= l && l <= x2;
            sum += if alice == bob { 1 } else { -1 };
        }
        return Ok(SourceCorrelation {
            estimate: CorrelationEstimate::from_dichotomic_mean(sum as f64 / n as f64, n),
            clamped_draws: if valid { 0 } else { n },
        });
    }

    let mut sum = 0i64;
    let mut invalid = 0u64;
    let mut first_offender: Option<SubensemblePolarization> = None;
    for _ in 0..n {
        let pair = source.sample(rng);
        let ua = pair.u.dot(a);
        let vb = pair.v.dot(b);
        if !model_valid_from_parts(ua, vb, ab) {
            invalid += 1;
            first_offender.get_or_insert(pair);
            if policy == IntervalPolicy::Strict {
                continue;
            }
        }
        let lam_a = (0.5 * (1.0 + ua)).clamp(0.0, 1.0);
        let (x1, x2) = clamped_endpoints(ua, vb, ab);
        let l: f64 = rng.gen();
        let alice = l <= lam_a;
        let bob = x1 <= l && l <= x2;
        sum += if alice == bob { 1 } else { -1 };
    }
    if policy == IntervalPolicy::Strict && invalid > 0 {
        let pair = first_offender.expect("invalid draw recorded");
        return Err(NlhvError::ModelInvalid {
            a: *a,
            b: *b,
            u: pair.u,
            v: pair.v,
            invalid_fraction: invalid as f64 / n as f64,
        });
    }
    Ok(SourceCorrelation {
        estimate: CorrelationEstimate::from_dichotomic_mean(sum as f64 / n as f64, n),
        clamped_draws: invalid,
    })
}

/// Which observer's marginal [`local_average`] estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Alice,
    Bob,
}

/// Monte Carlo marginal `⟨A⟩` or `⟨B⟩` for one observer.
///
/// Never fails: a marginal only depends on the interval *width*, so Bob's
/// side uses the clamped placement (with the remote setting fixed to
/// `setting` itself, which cannot influence the marginal — that is exactly
/// the model's no-signalling property).
pub fn local_average<R: Rng + ?Sized>(
    source: &SourceModel,
    side: Side,
    setting: &PoincareVector,
    n: u64,
    rng: &mut R,
) -> CorrelationEstimate {
    assert!(n > 0, "need at least one sample");
    let mut sum = 0i64;
    for _ in 0..n {
        let pair = source.sample(rng);
        let lambda = HiddenVariable::sample(rng);
        let outcome = match side {
            Side::Alice => alice_outcome(setting, &pair.u, lambda),
            Side::Bob => bob_outcome_clamped(setting, setting, &pair.u, &pair.v, lambda),
        };
        sum += outcome.sign() as i64;
    }
    CorrelationEstimate::from_dichotomic_mean(sum as f64 / n as f64, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vec3(x: f64, y: f64, z: f64) -> PoincareVector {
        PoincareVector::new(x, y, z).unwrap()
    }

    fn lambda(l: f64) -> HiddenVariable {
        HiddenVariable::new(l).unwrap()
    }

    #[test]
    fn hidden_variable_domain() {
        assert!(HiddenVariable::new(0.0).is_ok());
        assert!(HiddenVariable::new(1.0).is_ok());
        assert!(matches!(
            HiddenVariable::new(-0.1),
            Err(NlhvError::LambdaOutOfRange(_))
        ));
        assert!(matches!(
            HiddenVariable::new(1.1),
            Err(NlhvError::LambdaOutOfRange(_))
        ));
    }

    #[test]
    fn alice_threshold_is_malus_cdf() {
        let a = PoincareVector::Z;
        assert_eq!(alice_threshold(&a, &a), 1.0);
        assert_eq!(alice_threshold(&a, &-a), 0.0);
        let u = PoincareVector::X;
        assert!((alice_threshold(&a, &u) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn alice_outcome_includes_threshold() {
        // u·a = 0.5 → λ_A = 0.75; the boundary itself is a +1.
        let a = PoincareVector::Z;
        let u = vec3(3.0_f64.sqrt() / 2.0, 0.0, 0.5);
        assert!((alice_threshold(&a, &u) - 0.75).abs() < 1e-12);
        assert_eq!(alice_outcome(&a, &u, lambda(0.75)), Outcome::Plus);
        assert_eq!(alice_outcome(&a, &u, lambda(0.7500001)), Outcome::Minus);
    }

    #[test]
    fn interval_endpoints_for_transverse_polarizations() {
        // u ⊥ a and v ⊥ b with a·b = −cos 20°.
        let phi = 20.0_f64.to_radians();
        let a = PoincareVector::Z;
        let b = vec3(
            (std::f64::consts::PI - phi).sin(),
            0.0,
            (std::f64::consts::PI - phi).cos(),
        );
        assert!((a.dot(&b) + phi.cos()).abs() < 1e-12);
        let u = PoincareVector::Y;
        let v = PoincareVector::Y;
        let interval = bob_interval(&a, &b, &u, &v).unwrap();
        assert!((interval.x1() - 0.015_076_844_803_522_9).abs() < 1e-12);
        assert!((interval.x2() - 0.515_076_844_803_522_9).abs() < 1e-12);
        assert!((interval.width() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn interval_width_is_bobs_malus_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let a = uniform_sphere_sample(&mut rng);
            let b = uniform_sphere_sample(&mut rng);
            let u = uniform_sphere_sample(&mut rng);
            let v = uniform_sphere_sample(&mut rng);
            let width = 0.5 * (1.0 + v.dot(&b));
            if let Ok(interval) = bob_interval(&a, &b, &u, &v) {
                assert!((interval.width() - width).abs() < 1e-9);
            }
            let clamped = bob_interval_clamped(&a, &b, &u, &v);
            assert!((clamped.width() - width).abs() < 1e-9);
            assert!(clamped.x1() >= -1e-15 && clamped.x2() <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn perfect_anticorrelation_setting() {
        // v = −u, b = a: Bob's interval starts exactly at Alice's threshold.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let a = uniform_sphere_sample(&mut rng);
            let u = uniform_sphere_sample(&mut rng);
            let v = -u;
            let interval = bob_interval(&a, &a, &u, &v).unwrap();
            let lam_a = alice_threshold(&a, &u);
            assert!((interval.x1() - lam_a).abs() < 1e-12);
            assert!((interval.x2() - 1.0).abs() < 1e-12);
            // Below the threshold the outcomes disagree.
            let l = lambda(lam_a * 0.5);
            let alice = alice_outcome(&a, &u, l);
            let bob = bob_outcome(&a, &a, &u, &v, l).unwrap();
            assert_eq!(alice.product(bob), -1.0);
        }
    }

    #[test]
    fn perfect_correlation_setting() {
        // v = −u, b = −a: Bob's interval is [0, λ_A], so outcomes agree.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let a = uniform_sphere_sample(&mut rng);
            let u = uniform_sphere_sample(&mut rng);
            let v = -u;
            let b = -a;
            let interval = bob_interval(&a, &b, &u, &v).unwrap();
            let lam_a = alice_threshold(&a, &u);
            assert!(interval.x1().abs() < 1e-12);
            assert!((interval.x2() - lam_a).abs() < 1e-12);
            let l = HiddenVariable::sample(&mut rng);
            let alice = alice_outcome(&a, &u, l);
            let bob = bob_outcome(&a, &b, &u, &v, l).unwrap();
            assert_eq!(alice.product(bob), 1.0);
        }
    }

    #[test]
    fn validity_at_the_aligned_boundary() {
        // u = a, v = −u, a·b = 0.9 saturates both branches and stays valid.
        let a = PoincareVector::Z;
        let b = vec3((0.9_f64).acos().sin(), 0.0, 0.9);
        let u = a;
        let v = -u;
        assert!((a.dot(&b) - 0.9).abs() < 1e-12);
        assert!(model_valid(&a, &b, &u, &v));
    }

    #[test]
    fn invalidity_outside_the_domain() {
        // u = a, v = +u at intermediate angle: branch 2 fails.
        let a = PoincareVector::Z;
        let b = vec3((0.5_f64).acos().sin(), 0.0, 0.5);
        let u = a;
        let v = u;
        assert!(!model_valid(&a, &b, &u, &v));
        assert!(matches!(
            bob_interval(&a, &b, &u, &v),
            Err(NlhvError::ModelInvalid { .. })
        ));
        assert!(matches!(
            subensemble_averages(&a, &b, &u, &v),
            Err(NlhvError::ModelInvalid { .. })
        ));
    }

    #[test]
    fn validity_equals_interval_placement() {
        // The branch inequalities are exactly "interval well-formed and
        // straddling Alice's threshold". Boundary cases within 1e-9 are
        // skipped: the two formulations round differently there.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut checked = 0u32;
        for _ in 0..20_000 {
            let a = uniform_sphere_sample(&mut rng);
            let b = uniform_sphere_sample(&mut rng);
            let u = uniform_sphere_sample(&mut rng);
            let v = uniform_sphere_sample(&mut rng);
            let ua = u.dot(&a);
            let vb = v.dot(&b);
            let ab = a.dot(&b);
            let margins = [(1.0 - vb) - (ab + ua).abs(), (1.0 + vb) - (ab - ua).abs()];
            if margins.iter().any(|m| m.abs() < 1e-9) {
                continue;
            }
            checked += 1;
            let valid = model_valid(&a, &b, &u, &v);
            let placement = match bob_interval(&a, &b, &u, &v) {
                Ok(interval) => {
                    let lam_a = alice_threshold(&a, &u);
                    interval.x1() <= lam_a && lam_a <= interval.x2()
                }
                Err(_) => false,
            };
            assert_eq!(valid, placement, "ua={ua} vb={vb} ab={ab}");
        }
        assert!(checked > 10_000);
    }

    #[test]
    fn subensemble_averages_match_malus_and_singlet() {
        // Orthogonal settings (a·b = 0) keep the model valid as long as
        // |u·a| ≤ 1 − |v·b|: here 0.6 ≤ 1 − 0.3.
        let a = PoincareVector::Z;
        let b = PoincareVector::X;
        let u = vec3(0.0, 0.8, 0.6);
        let v = vec3(0.3, -0.91_f64.sqrt(), 0.0);
        let avg = subensemble_averages(&a, &b, &u, &v).unwrap();
        assert!((avg.mean_alice - 0.6).abs() < 1e-12);
        assert!((avg.mean_bob - 0.3).abs() < 1e-12);
        assert!((avg.mean_product - 0.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_list_validation() {
        let u = PoincareVector::Z;
        assert!(matches!(
            SourceModel::weighted_list(vec![]),
            Err(NlhvError::EmptyMixture)
        ));
        assert!(matches!(
            SourceModel::weighted_list(vec![WeightedPair {
                u,
                v: -u,
                weight: -0.5
            }]),
            Err(NlhvError::NegativeWeight(_))
        ));
        assert!(matches!(
            SourceModel::weighted_list(vec![WeightedPair {
                u,
                v: -u,
                weight: 0.7
            }]),
            Err(NlhvError::WeightsNotNormalized(_))
        ));
        assert!(SourceModel::weighted_list(vec![
            WeightedPair {
                u,
                v: -u,
                weight: 0.25
            },
            WeightedPair {
                u: -u,
                v: u,
                weight: 0.75
            },
        ])
        .is_ok());
    }

    #[test]
    fn fixed_pair_perfect_correlations_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let u = uniform_sphere_sample(&mut rng);
        let a = uniform_sphere_sample(&mut rng);
        let source = SourceModel::FixedPair { u, v: -u };
        let anti = source_correlation(&source, &a, &a, 50_000, &mut rng).unwrap();
        assert_eq!(anti.value, -1.0);
        assert_eq!(anti.std_error, 0.0);
        let same = source_correlation(&source, &a, &-a, 50_000, &mut rng).unwrap();
        assert_eq!(same.value, 1.0);
    }

    #[test]
    fn singlet_pair_source_recovers_the_singlet_correlation() {
        // Polarizations pinned normal to the measurement plane: valid for
        // every setting pair in the plane, correlation −a·b = −cos 20°.
        let phi = 20.0_f64.to_radians();
        let a = PoincareVector::Z;
        let b = vec3(phi.sin(), 0.0, phi.cos());
        let source = SourceModel::singlet_pair(PoincareVector::Y);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let n = 1_000_000;
        let est = source_correlation(&source, &a, &b, n, &mut rng).unwrap();
        let target = -phi.cos();
        assert!(
            (est.value - target).abs() < 3.0 * est.std_error.max(1e-9),
            "estimate {} vs {}",
            est.value,
            target
        );
    }

    #[test]
    fn strict_sampling_reports_invalid_fraction() {
        // The rotationally invariant source hits invalid subensembles at any
        // intermediate angle; the error carries the measured fraction.
        let phi = 18.8_f64.to_radians();
        let a = PoincareVector::X;
        let b = vec3(phi.cos(), 0.0, phi.sin());
        assert!((a.dot(&b) - phi.cos()).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let err = source_correlation(&SourceModel::SingletTwoPoint, &a, &b, 20_000, &mut rng)
            .unwrap_err();
        match err {
            NlhvError::ModelInvalid {
                invalid_fraction, ..
            } => {
                // The invalid region covers ≈ 85% of the sphere at 18.8°.
                assert!(
                    (invalid_fraction - 0.85).abs() < 0.02,
                    "fraction {invalid_fraction}"
                );
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn clamped_sampling_never_fails() {
        let phi = 18.8_f64.to_radians();
        let a = PoincareVector::X;
        let b = vec3(phi.cos(), 0.0, phi.sin());
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let est = source_correlation_with_policy(
            &SourceModel::SingletTwoPoint,
            &a,
            &b,
            200_000,
            &mut rng,
            IntervalPolicy::Clamp,
        )
        .unwrap();
        // Weaker than the singlet correlation −cos 18.8° ≈ −0.947: clamping
        // degrades the correlation, which is the whole point of the bound.
        assert!(
            est.value > -0.9 && est.value < -0.5,
            "estimate {}",
            est.value
        );
    }

    #[test]
    fn local_averages_follow_malus_and_no_signalling() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let u = uniform_sphere_sample(&mut rng);
        let v = uniform_sphere_sample(&mut rng);
        let setting = uniform_sphere_sample(&mut rng);
        let source = SourceModel::FixedPair { u, v };
        let n = 400_000;
        let alice = local_average(&source, Side::Alice, &setting, n, &mut rng);
        assert!((alice.value - u.dot(&setting)).abs() < 4.0 * alice.std_error.max(1e-9));
        let bob = local_average(&source, Side::Bob, &setting, n, &mut rng);
        assert!((bob.value - v.dot(&setting)).abs() < 4.0 * bob.std_error.max(1e-9));

        // The rotationally invariant source has unpolarized marginals.
        let singlet = local_average(
            &SourceModel::SingletTwoPoint,
            Side::Alice,
            &setting,
            n,
            &mut rng,
        );
        assert!(singlet.value.abs() < 4.0 * singlet.std_error);
        let singlet_bob = local_average(
            &SourceModel::SingletTwoPoint,
            Side::Bob,
            &setting,
            n,
            &mut rng,
        );
        assert!(singlet_bob.value.abs() < 4.0 * singlet_bob.std_error);
    }

    #[test]
    fn weighted_sampling_respects_weights() {
        let u = PoincareVector::Z;
        let source = SourceModel::weighted_list(vec![
            WeightedPair {
                u,
                v: -u,
                weight: 0.25,
            },
            WeightedPair {
                u: -u,
                v: u,
                weight: 0.75,
            },
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let n = 200_000;
        let mut first = 0u64;
        for _ in 0..n {
            if source.sample(&mut rng).u == u {
                first += 1;
            }
        }
        let frac = first as f64 / n as f64;
        assert!((frac - 0.25).abs() < 0.005, "weight fraction {frac}");
    }
}
