//! Core library for testing a class of non-local hidden-variable photon
//! models against quantum mechanics.
//!
//! The crate provides, bottom-up:
//!
//! - [`geometry`]: polarization analyzer settings and their Poincaré-sphere
//!   representation (the only place angle doubling happens);
//! - [`nlhv`]: an explicit non-local hidden-variable model whose
//!   subensembles carry definite polarizations with Malus-law marginals;
//! - [`quantum`]: singlet-state predictions with finite visibility;
//! - [`inequalities`]: the Leggett-type bound these models obey, the CHSH
//!   bound, critical visibilities, optimal angles and violation windows;
//! - [`experiment`]: a coincidence-counting simulator producing the
//!   five-setting protocol and angle sweeps with counting statistics;
//! - [`audit`]: numerical checks of every step in the derivation of the
//!   bound, from outcome identities to a Monte Carlo test of the full
//!   inequality against the model class itself.

pub mod audit;
pub mod experiment;
pub mod geometry;
pub mod inequalities;
pub mod nlhv;
pub mod quantum;
pub mod types;

pub use audit::{
    audit_full_chain, audit_full_chain_with, check_dichotomic_identity, check_modulus_bound,
    check_projection_bound, check_sine_difference_bounds, check_triangle_inequality, leggett_trial,
    lemma_battery, rotation_averaged_correlation, xi_average_abs_cos, AuditError, AuditReport,
    AuditTrial, CheckTally, LemmaBatterySizes, LemmaTallies, OutcomeDistribution, RotationAverage,
    RotationPlane,
};
pub use experiment::{
    correlation_from_counts, run_protocol, simulate_counts, sweep_phi, sweep_settings, CountTable,
    ExperimentConfig, ExperimentError, PairResult, ProtocolReport, ProtocolSettings, SweepRow,
    VisibilityModel,
};
pub use geometry::{
    polarizer_to_poincare, sphere_angle, GeometryError, MeasurementPlane, PlanePair,
    PoincareVector, PolarizerSetting,
};
pub use inequalities::{
    chsh_report, chsh_value, critical_visibility_chsh_at, critical_visibility_chsh_here,
    critical_visibility_nlhv, find_phi_margin_max, find_phi_max, leggett_bound, leggett_lhs,
    leggett_report, quantum_chsh_at_settings, quantum_leggett_lhs, violation_window,
    ChshCriticalVisibility, ChshInputs, InequalityError, InequalityReport, LeggettInputs,
    CHSH_BOUND,
};
pub use nlhv::{
    IntervalPolicy, NlhvError, SourceCorrelation, SourceModel, SubensembleAverages,
    SubensemblePolarization, WeightedPair,
};
pub use quantum::{joint_probability, singlet_correlation, visibility_correlation, Visibility};
pub use types::{CorrelationEstimate, Measurement, Outcome};
