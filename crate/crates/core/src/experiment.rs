//! Simulated coincidence-counting experiment.
//!
//! A photon-pair source feeding two polarization analyzers produces four
//! coincidence counters per setting pair: `(++, +−, −+, −−)`. Counts are
//! modeled as independent Poisson variates whose means follow the
//! visibility-scaled singlet joint probabilities, the standard model of
//! accidental-free coincidence counting. From a [`CountTable`] the
//! correlation is estimated as
//!
//! ```text
//! E = (N++ + N−− − N+− − N−+) / N,   σ_E = √(4·S·D/N³)
//! ```
//!
//! with `S = N++ + N−−`, `D = N+− + N−+`, `N = S + D` (first-order Poisson
//! propagation).
//!
//! [`run_protocol`] performs the five-setting measurement plan in which the
//! three correlations `E(a1,b1)`, `E(a2,b2)`, `E(a2,b3)` feed the
//! Leggett-type inequality while `E(a1,b1)`, `E(a1,b2)`, `E(a2,b1)`,
//! `E(a2,b2)` feed CHSH, so one simulated run tests both. [`sweep_phi`]
//! repeats the plan over a grid of relative angles for plotting.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    planes_orthogonal, polarizer_to_poincare, GeometryError, MeasurementPlane, PlanePair,
    PoincareVector, PolarizerSetting, GEOMETRY_TOLERANCE,
};
use crate::inequalities::{
    chsh_report, leggett_report, ChshInputs, InequalityReport, LeggettInputs,
};
use crate::quantum::{joint_probability, Visibility};
use crate::types::{CorrelationEstimate, Measurement, Outcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("count table is empty; at least one coincidence is needed to estimate")]
    EmptyTable,
    #[error("mean pair count must be positive and finite, got {0}")]
    InvalidMeanPairs(f64),
    #[error("sweep grid must contain at least one angle")]
    EmptyGrid,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(
        "the planes spanned by (a1,b1) and (a2,b2) are not orthogonal; \
         the two-plane inequality needs perpendicular great circles"
    )]
    PlanesNotOrthogonal,
    #[error(
        "b3 must coincide with a2 on the sphere (dot product {dot:.6}); the shared \
         setting provides the perfect-correlation reference"
    )]
    MisplacedSharedSetting { dot: f64 },
    #[error(
        "relative angles differ between planes: {phi1_deg:.6}° vs {phi2_deg:.6}°; \
         the bound is a function of a single angle"
    )]
    MismatchedRelativeAngles { phi1_deg: f64, phi2_deg: f64 },
}

/// Coincidence counts for the four outcome pairs of one setting pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub n_pp: u64,
    pub n_pm: u64,
    pub n_mp: u64,
    pub n_mm: u64,
}

impl CountTable {
    pub fn total(&self) -> u64 {
        self.n_pp + self.n_pm + self.n_mp + self.n_mm
    }

    /// Same-outcome coincidences `N++ + N−−`.
    pub fn same(&self) -> u64 {
        self.n_pp + self.n_mm
    }

    /// Opposite-outcome coincidences `N+− + N−+`.
    pub fn different(&self) -> u64 {
        self.n_pm + self.n_mp
    }
}

/// Correlation estimate `E = (S − D)/N` with Poisson error `√(4SD/N³)`.
///
/// The error expression is first-order propagation through the ratio
/// assuming each cell is Poisson; it agrees with a parametric bootstrap to
/// within a few percent once `N` reaches the thousands.
pub fn correlation_from_counts(c: &CountTable) -> Result<CorrelationEstimate, ExperimentError> {
    let n = c.total();
    if n == 0 {
        return Err(ExperimentError::EmptyTable);
    }
    let s = c.same() as f64;
    let d = c.different() as f64;
    let nf = n as f64;
    Ok(CorrelationEstimate {
        value: (s - d) / nf,
        std_error: (4.0 * s * d / (nf * nf * nf)).sqrt(),
        total_counts: n,
    })
}

/// Draws a Poisson count table for one setting pair: each cell is an
/// independent Poisson variate with mean
/// `mean_pairs × joint_probability(i, j, a, b, vis)`.
pub fn simulate_counts<R: Rng + ?Sized>(
    a: &PoincareVector,
    b: &PoincareVector,
    vis: Visibility,
    mean_pairs: f64,
    rng: &mut R,
) -> Result<CountTable, ExperimentError> {
    if !(mean_pairs > 0.0 && mean_pairs.is_finite()) {
        return Err(ExperimentError::InvalidMeanPairs(mean_pairs));
    }
    let mut draw = |i: Outcome, j: Outcome| -> u64 {
        let lambda = mean_pairs * joint_probability(i, j, a, b, vis);
        if lambda <= 0.0 {
            // A zero-probability cell never fires; the Poisson sampler
            // rejects a zero mean, so short-circuit it.
            0
        } else {
            Poisson::new(lambda)
                .expect("positive finite Poisson mean")
                .sample(rng) as u64
        }
    };
    Ok(CountTable {
        n_pp: draw(Outcome::Plus, Outcome::Plus),
        n_pm: draw(Outcome::Plus, Outcome::Minus),
        n_mp: draw(Outcome::Minus, Outcome::Plus),
        n_mm: draw(Outcome::Minus, Outcome::Minus),
    })
}

/// Scalar visibility with optional per-plane overrides.
///
/// Real sources show slightly different interference visibilities in
/// different polarization bases, so correlations measured in the linear
/// (z–x) plane, in the circular (z–y) plane, and at the collinear
/// perfect-correlation setting on their intersection may each carry their
/// own factor. Absent overrides, `base` applies everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityModel {
    pub base: Visibility,
    pub linear: Option<Visibility>,
    pub circular: Option<Visibility>,
    pub intersection: Option<Visibility>,
}

impl VisibilityModel {
    pub fn scalar(base: Visibility) -> Self {
        VisibilityModel {
            base,
            linear: None,
            circular: None,
            intersection: None,
        }
    }

    /// The visibility applying to the setting pair `(a, b)`.
    ///
    /// Collinear pairs (the perfect-correlation settings) take the
    /// `intersection` override; pairs spanning the z–x plane take `linear`;
    /// pairs spanning the z–y plane take `circular`; anything else falls
    /// back to `base`.
    pub fn for_pair(&self, a: &PoincareVector, b: &PoincareVector) -> Visibility {
        let (cx, cy, cz) = a.cross(b);
        let norm = (cx * cx + cy * cy + cz * cz).sqrt();
        if norm < GEOMETRY_TOLERANCE {
            return self.intersection.unwrap_or(self.base);
        }
        let (nx, ny) = (cx / norm, cy / norm);
        if ny.abs() > 1.0 - GEOMETRY_TOLERANCE {
            self.linear.unwrap_or(self.base)
        } else if nx.abs() > 1.0 - GEOMETRY_TOLERANCE {
            self.circular.unwrap_or(self.base)
        } else {
            self.base
        }
    }
}

/// Full configuration of a simulated run, serializable as flat JSON with
/// degree-valued angles.
///
/// `alpha1/alpha2/beta1` are linear-analyzer angles; `beta2/beta3` are
/// analyzer angles in the rotated (quarter-wave-plate) basis, which is what
/// places the second measurement plane orthogonal to the first. The default
/// settings `{45°, 0°, 55°, 10°, 0°}` realize a relative angle of 20° in
/// both planes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alpha1_deg: f64,
    pub alpha2_deg: f64,
    pub beta1_deg: f64,
    pub beta2_deg: f64,
    pub beta3_deg: f64,
    pub visibility: Visibility,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visibility_linear: Option<Visibility>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visibility_circular: Option<Visibility>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visibility_intersection: Option<Visibility>,
    pub mean_pairs: f64,
    pub seed: u64,
    pub phi_grid_deg: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            alpha1_deg: 45.0,
            alpha2_deg: 0.0,
            beta1_deg: 55.0,
            beta2_deg: 10.0,
            beta3_deg: 0.0,
            visibility: Visibility::new(0.99).expect("0.99 is a valid visibility"),
            visibility_linear: None,
            visibility_circular: None,
            visibility_intersection: None,
            mean_pairs: 1_000_000.0,
            seed: 42,
            phi_grid_deg: (0..=30).map(|k| 2.0 * k as f64).collect(),
        }
    }
}

impl ExperimentConfig {
    pub fn visibility_model(&self) -> VisibilityModel {
        VisibilityModel {
            base: self.visibility,
            linear: self.visibility_linear,
            circular: self.visibility_circular,
            intersection: self.visibility_intersection,
        }
    }
}

/// The five analyzer directions of one protocol run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSettings {
    pub a1: PoincareVector,
    pub a2: PoincareVector,
    pub b1: PoincareVector,
    pub b2: PoincareVector,
    pub b3: PoincareVector,
}

impl ProtocolSettings {
    /// Maps analyzer angles to sphere directions: Alice's two settings and
    /// Bob's first are linear-basis analyzers, Bob's second and third sit
    /// in the rotated basis.
    pub fn from_angles(
        alpha1_deg: f64,
        alpha2_deg: f64,
        beta1_deg: f64,
        beta2_deg: f64,
        beta3_deg: f64,
    ) -> Self {
        let lin = |deg| polarizer_to_poincare(PolarizerSetting::new(deg, MeasurementPlane::Linear));
        let rot =
            |deg| polarizer_to_poincare(PolarizerSetting::new(deg, MeasurementPlane::Rotated));
        ProtocolSettings {
            a1: lin(alpha1_deg),
            a2: lin(alpha2_deg),
            b1: lin(beta1_deg),
            b2: rot(beta2_deg),
            b3: rot(beta3_deg),
        }
    }

    /// Checks the two-plane geometry and returns the common relative angle
    /// (radians).
    pub fn validate(&self) -> Result<f64, ExperimentError> {
        let planes = PlanePair::new((self.a1, self.b1), (self.a2, self.b2));
        match planes_orthogonal(&planes) {
            Ok(true) => {}
            Ok(false) => return Err(ExperimentError::PlanesNotOrthogonal),
            // Both pairs collinear (the φ = 0 or φ = 180° rows): no pair
            // pins its plane, and an orthogonal-plane assignment through
            // any two axes always exists, so the configuration is sound.
            Err(GeometryError::DegeneratePlane) => {}
            Err(e) => return Err(e.into()),
        }
        let dot = self.a2.dot(&self.b3);
        if dot < 1.0 - GEOMETRY_TOLERANCE {
            return Err(ExperimentError::MisplacedSharedSetting { dot });
        }
        let phi1 = self.a1.angle_to(&self.b1);
        let phi2 = self.a2.angle_to(&self.b2);
        if (phi1 - phi2).abs() > GEOMETRY_TOLERANCE {
            return Err(ExperimentError::MismatchedRelativeAngles {
                phi1_deg: phi1.to_degrees(),
                phi2_deg: phi2.to_degrees(),
            });
        }
        Ok(phi1)
    }
}

/// Simulation result for one setting pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    /// Visibility the pair was simulated with.
    pub visibility: f64,
    pub counts: CountTable,
    pub correlation: CorrelationEstimate,
}

/// Full report of one five-setting run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    /// Common relative angle between the settings of each plane, degrees.
    pub phi_deg: f64,
    pub e11: PairResult,
    pub e22: PairResult,
    pub e23: PairResult,
    pub e12: PairResult,
    pub e21: PairResult,
    pub leggett: InequalityReport,
    pub chsh: InequalityReport,
}

fn simulate_pair<R: Rng + ?Sized>(
    a: &PoincareVector,
    b: &PoincareVector,
    vis_model: &VisibilityModel,
    mean_pairs: f64,
    rng: &mut R,
) -> Result<PairResult, ExperimentError> {
    let vis = vis_model.for_pair(a, b);
    let counts = simulate_counts(a, b, vis, mean_pairs, rng)?;
    Ok(PairResult {
        visibility: vis.value(),
        counts,
        correlation: correlation_from_counts(&counts)?,
    })
}

/// RNG for one independent measurement within a run: same seed, distinct
/// stream, so measurements can run in any order (or in parallel) without
/// changing the result.
fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs the five-setting protocol: simulates the five coincidence tables,
/// estimates the correlations, and evaluates both inequalities with
/// propagated errors.
pub fn run_protocol(cfg: &ExperimentConfig) -> Result<ProtocolReport, ExperimentError> {
    if !(cfg.mean_pairs > 0.0 && cfg.mean_pairs.is_finite()) {
        return Err(ExperimentError::InvalidMeanPairs(cfg.mean_pairs));
    }
    let settings = ProtocolSettings::from_angles(
        cfg.alpha1_deg,
        cfg.alpha2_deg,
        cfg.beta1_deg,
        cfg.beta2_deg,
        cfg.beta3_deg,
    );
    let phi = settings.validate()?;
    let vis_model = cfg.visibility_model();
    protocol_at(&settings, phi, &vis_model, cfg.mean_pairs, cfg.seed, 0)
}

/// Measurement order and stream offsets within a run; sweeps space rows
/// `STREAMS_PER_ROW` apart so every measurement in a sweep gets its own
/// stream.
const STREAMS_PER_ROW: u64 = 8;

fn protocol_at(
    s: &ProtocolSettings,
    phi: f64,
    vis_model: &VisibilityModel,
    mean_pairs: f64,
    seed: u64,
    stream_base: u64,
) -> Result<ProtocolReport, ExperimentError> {
    let pairs = [
        (&s.a1, &s.b1),
        (&s.a2, &s.b2),
        (&s.a2, &s.b3),
        (&s.a1, &s.b2),
        (&s.a2, &s.b1),
    ];
    let mut results = Vec::with_capacity(pairs.len());
    for (idx, (a, b)) in pairs.iter().enumerate() {
        let mut rng = stream_rng(seed, stream_base + idx as u64);
        results.push(simulate_pair(a, b, vis_model, mean_pairs, &mut rng)?);
    }
    let [e11, e22, e23, e12, e21]: [PairResult; 5] =
        results.try_into().expect("exactly five setting pairs");
    let leggett = leggett_report(
        &LeggettInputs {
            e11: Measurement::from(&e11.correlation),
            e22: Measurement::from(&e22.correlation),
            e23: Measurement::from(&e23.correlation),
        },
        phi,
    );
    let chsh = chsh_report(&ChshInputs {
        e11: Measurement::from(&e11.correlation),
        e12: Measurement::from(&e12.correlation),
        e21: Measurement::from(&e21.correlation),
        e22: Measurement::from(&e22.correlation),
    });
    Ok(ProtocolReport {
        phi_deg: phi.to_degrees(),
        e11,
        e22,
        e23,
        e12,
        e21,
        leggett,
        chsh,
    })
}

/// One row of an angle sweep; the field order is the CSV column order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub phi_deg: f64,
    pub s_nlhv_analytic: f64,
    pub s_nlhv_mc: f64,
    pub s_nlhv_mc_err: f64,
    pub leggett_bound: f64,
    pub s_chsh_analytic: f64,
    pub s_chsh_mc: f64,
    pub s_chsh_mc_err: f64,
    pub chsh_bound: f64,
}

impl SweepRow {
    pub const COLUMNS: [&'static str; 9] = [
        "phi_deg",
        "s_nlhv_analytic",
        "s_nlhv_mc",
        "s_nlhv_mc_err",
        "leggett_bound",
        "s_chsh_analytic",
        "s_chsh_mc",
        "s_chsh_mc_err",
        "chsh_bound",
    ];
}

/// Canonical sweep geometry for a relative angle φ: Alice at 45° and 0°
/// linear; Bob tracks her at `45° + φ/2` linear, `φ/2` rotated, and `0°`
/// rotated (the shared perfect-correlation setting). Analyzer angles move
/// by φ/2 because of the sphere's angle doubling.
pub fn sweep_settings(phi_deg: f64) -> ProtocolSettings {
    ProtocolSettings::from_angles(45.0, 0.0, 45.0 + 0.5 * phi_deg, 0.5 * phi_deg, 0.0)
}

/// Simulates the protocol over the configured φ grid.
///
/// Each row contains the analytic expectations at the configured
/// visibilities next to Monte Carlo estimates with propagated errors,
/// plus both bounds, ready for plotting.
pub fn sweep_phi(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, ExperimentError> {
    if cfg.phi_grid_deg.is_empty() {
        return Err(ExperimentError::EmptyGrid);
    }
    if !(cfg.mean_pairs > 0.0 && cfg.mean_pairs.is_finite()) {
        return Err(ExperimentError::InvalidMeanPairs(cfg.mean_pairs));
    }
    let vis_model = cfg.visibility_model();
    let mut rows = Vec::with_capacity(cfg.phi_grid_deg.len());
    for (row_idx, &phi_deg) in cfg.phi_grid_deg.iter().enumerate() {
        let settings = sweep_settings(phi_deg);
        let phi = settings.validate()?;
        let report = protocol_at(
            &settings,
            phi,
            &vis_model,
            cfg.mean_pairs,
            cfg.seed,
            STREAMS_PER_ROW * row_idx as u64,
        )?;
        // Report the requested grid angle, not its round-trip through the
        // sphere vectors (identical up to rounding noise).
        rows.push(SweepRow {
            phi_deg,
            ..sweep_row(&settings, &report, &vis_model, phi)
        });
    }
    Ok(rows)
}

/// Analytic expectations evaluated with the same per-pair visibilities the
/// simulation used, so Monte Carlo and analytic columns estimate the same
/// quantity even under per-plane overrides.
fn sweep_row(
    s: &ProtocolSettings,
    report: &ProtocolReport,
    vis_model: &VisibilityModel,
    phi: f64,
) -> SweepRow {
    let exact = |a: &PoincareVector, b: &PoincareVector| {
        Measurement::exact(-vis_model.for_pair(a, b).value() * a.dot(b))
    };
    let nlhv_analytic = crate::inequalities::leggett_lhs(&LeggettInputs {
        e11: exact(&s.a1, &s.b1),
        e22: exact(&s.a2, &s.b2),
        e23: exact(&s.a2, &s.b3),
    });
    let chsh_analytic = crate::inequalities::chsh_value(&ChshInputs {
        e11: exact(&s.a1, &s.b1),
        e12: exact(&s.a1, &s.b2),
        e21: exact(&s.a2, &s.b1),
        e22: exact(&s.a2, &s.b2),
    });
    SweepRow {
        phi_deg: report.phi_deg,
        s_nlhv_analytic: nlhv_analytic.value,
        s_nlhv_mc: report.leggett.lhs,
        s_nlhv_mc_err: report.leggett.lhs_std_error.unwrap_or(0.0),
        leggett_bound: crate::inequalities::leggett_bound(phi),
        s_chsh_analytic: chsh_analytic.value,
        s_chsh_mc: report.chsh.lhs,
        s_chsh_mc_err: report.chsh.lhs_std_error.unwrap_or(0.0),
        chsh_bound: crate::inequalities::CHSH_BOUND,
    }
}
