//! `leggett` — a command-line laboratory for testing non-local
//! hidden-variable photon models against quantum mechanics.
//!
//! The binary exposes the core library as five subcommands:
//!
//! - `bounds`: the optimal relative angle, the Leggett-type bound and
//!   quantum value there, critical visibilities, and the full-visibility
//!   violation window;
//! - `scan`: a relative-angle sweep of the simulated five-setting
//!   protocol, written as CSV next to the analytic expectations;
//! - `simulate`: one five-setting protocol run from a JSON config, with
//!   counts, correlations, and both inequality reports;
//! - `audit`: the full lemma battery behind the bound's derivation plus a
//!   Monte Carlo check of the closing inequality on random model
//!   instances;
//! - `model-check`: sampling checks of the hidden-variable model's
//!   structural invariants.
//!
//! Every artifact embeds a timestamp-free run manifest, so a rerun with
//! identical inputs reproduces the output byte for byte. Exit codes:
//! 0 success, 1 I/O failure, 2 bad flags or config, 3 geometry or
//! model-validity error, 4 audit failure.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use leggett_core::geometry::uniform_sphere_sample;
use leggett_core::nlhv::{
    alice_threshold, bob_interval, bob_interval_clamped, bob_outcome_clamped, local_average,
    model_valid, source_correlation_with_policy, HiddenVariable, Side,
};
use leggett_core::{
    audit_full_chain, chsh_value, critical_visibility_chsh_here, critical_visibility_nlhv,
    find_phi_margin_max, find_phi_max, leggett_bound, lemma_battery, quantum_chsh_at_settings,
    quantum_leggett_lhs, run_protocol, sweep_phi, violation_window, AuditError, ChshInputs,
    ExperimentConfig, ExperimentError, IntervalPolicy, LemmaBatterySizes, Measurement, Outcome,
    PoincareVector, SourceModel, SweepRow, Visibility,
};

/// Environment variable consulted for the default seed; an explicit
/// `--seed` flag always wins.
const SEED_ENV_VAR: &str = "LEGGETT_SEED";
const DEFAULT_SEED: u64 = 42;

/// Executable laboratory for Leggett-type (non-local realism) and CHSH
/// inequality tests of hidden-variable photon models.
#[derive(Parser)]
#[command(name = "leggett", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print optimal angles, bound constants, critical visibilities, and
    /// the full-visibility violation window
    Bounds(BoundsArgs),
    /// Sweep the relative angle, simulate the five-setting protocol at
    /// each grid point, and write analytic vs Monte Carlo values as CSV
    Scan(ScanArgs),
    /// Run the five-setting protocol from a JSON config and emit counts,
    /// correlations, and both inequality reports
    Simulate(SimulateArgs),
    /// Check every lemma behind the Leggett-type bound, then Monte Carlo
    /// the closing inequality on random model instances
    Audit(AuditArgs),
    /// Sample the hidden-variable model and verify its structural
    /// invariants (Malus marginals, perfect correlations, validity
    /// equivalence, no-signalling, CHSH reproduction)
    ModelCheck(ModelCheckArgs),
}

#[derive(Args)]
struct BoundsArgs {
    /// Emit the report as JSON (with embedded manifest) instead of text
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ScanArgs {
    /// Interference visibility applied to every setting pair
    #[arg(long, default_value_t = 0.99)]
    vis: f64,
    /// Relative-angle grid in degrees: either one angle or start:end:step
    #[arg(long, default_value = "0:60:2")]
    phi: String,
    /// Mean photon pairs per setting pair (scientific notation accepted)
    #[arg(long, default_value_t = 1e6)]
    pairs: f64,
    /// Seed for the deterministic generator (overrides LEGGETT_SEED)
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; a `<out>.manifest.json` sibling records the run
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON config path; omitted, the built-in reference configuration
    /// (45°/0°/55°/10°/0°, V = 0.99, 10⁶ pairs, seed 42) is used
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed override (wins over the config file's seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    /// Number of random source/geometry trials of the closing inequality
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Seed for the deterministic generator (overrides LEGGETT_SEED)
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelCheckArgs {
    /// Monte Carlo draws per sampled estimate
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Seed for the deterministic generator (overrides LEGGETT_SEED)
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Bounds(args) => cmd_bounds(args),
        Command::Scan(args) => cmd_scan(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Audit(args) => cmd_audit(args),
        Command::ModelCheck(args) => cmd_model_check(args),
    }
}

#[derive(Debug)]
enum CliError {
    /// Bad flag values or malformed configuration input (exit 2).
    Usage(String),
    /// Geometry or model-validity failure (exit 3).
    Domain(String),
    /// The derivation audit found a violation (exit 4).
    AuditFailed(String),
    /// Filesystem failure (exit 1).
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 3,
            CliError::AuditFailed(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg)
            | CliError::Domain(msg)
            | CliError::AuditFailed(msg)
            | CliError::Io(msg) => f.write_str(msg),
        }
    }
}

fn io_err(path: &Path, err: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {err}", path.display()))
}

fn from_experiment(err: ExperimentError) -> CliError {
    match err {
        ExperimentError::InvalidMeanPairs(_) | ExperimentError::EmptyGrid => {
            CliError::Usage(err.to_string())
        }
        _ => CliError::Domain(err.to_string()),
    }
}

fn from_audit(err: AuditError) -> CliError {
    match err {
        AuditError::GridTooCoarse(_) => CliError::Usage(err.to_string()),
        _ => CliError::Domain(err.to_string()),
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV_VAR) {
        Ok(text) => text.trim().parse().map_err(|_| {
            CliError::Usage(format!(
                "{SEED_ENV_VAR} must be an unsigned 64-bit integer, got {text:?}"
            ))
        }),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

/// Run-identity block embedded in every artifact (and written as a
/// `.manifest.json` sibling of CSV output). Deliberately timestamp-free:
/// a rerun with identical inputs must be byte-identical.
#[derive(Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    schema: u32,
    subcommand: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    config: serde_json::Value,
    outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    csv_columns: Option<Vec<&'static str>>,
}

fn manifest(
    subcommand: &'static str,
    seed: Option<u64>,
    config: serde_json::Value,
    outputs: Vec<String>,
) -> RunManifest {
    RunManifest {
        tool: "leggett",
        version: env!("CARGO_PKG_VERSION"),
        schema: 1,
        subcommand,
        seed,
        config,
        outputs,
        csv_columns: None,
    }
}

/// Writes `text` to stdout, exiting quietly when the reader has gone away
/// (e.g. `leggett bounds | head` closes the pipe early); any other stdout
/// failure is a hard I/O error.
fn write_stdout(text: &str) {
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: cannot write to stdout: {e}");
        std::process::exit(1);
    }
}

/// Writes pretty-printed JSON (with a trailing newline) to `out`, or to
/// stdout when no path is given.
fn emit_json(doc: &serde_json::Value, out: Option<&Path>) -> Result<(), CliError> {
    let text = format!("{doc:#}\n");
    match out {
        Some(path) => fs::write(path, text).map_err(|e| io_err(path, e)),
        None => {
            write_stdout(&text);
            Ok(())
        }
    }
}

fn output_names(out: Option<&Path>) -> Vec<String> {
    match out {
        Some(path) => vec![path.display().to_string()],
        None => vec!["-".to_string()],
    }
}

// ---------------------------------------------------------------------------
// bounds

#[derive(Serialize)]
struct BoundsReport {
    /// Angle (degrees) where the quantum violation tolerates the least
    /// visibility, i.e. is most robust.
    phi_max_deg: f64,
    /// Angle (degrees) of the largest absolute violation margin at V = 1.
    phi_margin_max_deg: f64,
    leggett_bound_at_phi_max: f64,
    quantum_lhs_at_phi_max: f64,
    chsh_at_phi_max: f64,
    critical_visibility_leggett: f64,
    critical_visibility_chsh_at_phi_max: f64,
    critical_visibility_chsh_optimum: f64,
    violation_window_low_deg: f64,
    violation_window_high_deg: f64,
}

fn bounds_report() -> BoundsReport {
    let phi = find_phi_max();
    let chsh = critical_visibility_chsh_here();
    let (low, high) =
        violation_window(Visibility::ONE).expect("full visibility violates the bound");
    BoundsReport {
        phi_max_deg: phi.to_degrees(),
        phi_margin_max_deg: find_phi_margin_max().to_degrees(),
        leggett_bound_at_phi_max: leggett_bound(phi),
        quantum_lhs_at_phi_max: quantum_leggett_lhs(phi, Visibility::ONE),
        chsh_at_phi_max: quantum_chsh_at_settings(phi, Visibility::ONE),
        critical_visibility_leggett: critical_visibility_nlhv(phi)
            .expect("the optimum is far from the degenerate angle"),
        critical_visibility_chsh_at_phi_max: chsh.at_phi_max,
        critical_visibility_chsh_optimum: chsh.standard_optimum,
        violation_window_low_deg: low.to_degrees(),
        violation_window_high_deg: high.to_degrees(),
    }
}

fn cmd_bounds(args: &BoundsArgs) -> Result<(), CliError> {
    let report = bounds_report();
    if args.json {
        let doc = json!({
            "manifest": manifest("bounds", None, serde_json::Value::Null, output_names(None)),
            "report": report,
        });
        return emit_json(&doc, None);
    }
    let line = |label: &str, value: f64| write_stdout(&format!("{label:<38} {value:>16.9}\n"));
    line("phi_max_deg", report.phi_max_deg);
    line("phi_margin_max_deg", report.phi_margin_max_deg);
    line("leggett_bound_at_phi_max", report.leggett_bound_at_phi_max);
    line("quantum_lhs_at_phi_max", report.quantum_lhs_at_phi_max);
    line("chsh_at_phi_max", report.chsh_at_phi_max);
    line(
        "critical_visibility_leggett",
        report.critical_visibility_leggett,
    );
    line(
        "critical_visibility_chsh_at_phi_max",
        report.critical_visibility_chsh_at_phi_max,
    );
    line(
        "critical_visibility_chsh_optimum",
        report.critical_visibility_chsh_optimum,
    );
    line("violation_window_low_deg", report.violation_window_low_deg);
    line(
        "violation_window_high_deg",
        report.violation_window_high_deg,
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// scan

/// Parses a grid argument: one angle, or `start:end:step` (degrees, inclusive
/// of `end` when it falls on the grid).
fn parse_phi_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let parse = |s: &str| -> Result<f64, CliError> {
        let value: f64 = s
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("invalid angle {s:?} in --phi")))?;
        if !value.is_finite() {
            return Err(CliError::Usage(format!(
                "--phi angle {value} is not finite"
            )));
        }
        Ok(value)
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [single] => Ok(vec![parse(single)?]),
        [start, end, step] => {
            let (start, end, step) = (parse(start)?, parse(end)?, parse(step)?);
            if step.is_nan() || step <= 0.0 {
                return Err(CliError::Usage(format!(
                    "--phi step must be positive, got {step}"
                )));
            }
            if end < start {
                return Err(CliError::Usage(format!(
                    "--phi range is empty: start {start} exceeds end {end}"
                )));
            }
            let count = ((end - start) / step + 1e-9).floor() as usize;
            Ok((0..=count).map(|i| start + step * i as f64).collect())
        }
        _ => Err(CliError::Usage(format!(
            "--phi must be a single angle or start:end:step, got {text:?}"
        ))),
    }
}

fn manifest_sibling(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn cmd_scan(args: &ScanArgs) -> Result<(), CliError> {
    let visibility = Visibility::new(args.vis).map_err(|e| CliError::Usage(e.to_string()))?;
    if !(args.pairs > 0.0 && args.pairs.is_finite()) {
        return Err(CliError::Usage(format!(
            "--pairs must be positive and finite, got {}",
            args.pairs
        )));
    }
    let phi_grid_deg = parse_phi_grid(&args.phi)?;
    let seed = resolve_seed(args.seed)?;
    let cfg = ExperimentConfig {
        visibility,
        mean_pairs: args.pairs,
        seed,
        phi_grid_deg,
        ..ExperimentConfig::default()
    };
    let rows = sweep_phi(&cfg).map_err(from_experiment)?;

    let mut csv = SweepRow::COLUMNS.join(",");
    csv.push('\n');
    for row in &rows {
        let cells = [
            row.phi_deg,
            row.s_nlhv_analytic,
            row.s_nlhv_mc,
            row.s_nlhv_mc_err,
            row.leggett_bound,
            row.s_chsh_analytic,
            row.s_chsh_mc,
            row.s_chsh_mc_err,
            row.chsh_bound,
        ];
        let line: Vec<String> = cells.iter().map(|v| v.to_string()).collect();
        csv.push_str(&line.join(","));
        csv.push('\n');
    }
    fs::write(&args.out, csv).map_err(|e| io_err(&args.out, e))?;

    let mut manifest = manifest(
        "scan",
        Some(seed),
        serde_json::to_value(&cfg).expect("config serializes"),
        vec![args.out.display().to_string()],
    );
    manifest.csv_columns = Some(SweepRow::COLUMNS.to_vec());
    let manifest_path = manifest_sibling(&args.out);
    emit_json(
        &serde_json::to_value(&manifest).expect("manifest serializes"),
        Some(&manifest_path),
    )?;

    write_stdout(&format!(
        "wrote {} rows to {} (manifest: {})\n",
        rows.len(),
        args.out.display(),
        manifest_path.display()
    ));
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let report = run_protocol(&cfg).map_err(from_experiment)?;
    let doc = json!({
        "manifest": manifest(
            "simulate",
            Some(cfg.seed),
            serde_json::to_value(&cfg).expect("config serializes"),
            output_names(args.out.as_deref()),
        ),
        "report": report,
    });
    emit_json(&doc, args.out.as_deref())
}

// ---------------------------------------------------------------------------
// audit

fn cmd_audit(args: &AuditArgs) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".to_string()));
    }
    let seed = resolve_seed(args.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes = LemmaBatterySizes::default();
    let lemmas = lemma_battery(&sizes, &mut rng);
    let chain = audit_full_chain(args.trials, &mut rng).map_err(from_audit)?;
    let passed = lemmas.all_passed() && chain.failures == 0;
    let doc = json!({
        "manifest": manifest(
            "audit",
            Some(seed),
            json!({ "trials": args.trials, "lemma_sizes": sizes }),
            output_names(args.out.as_deref()),
        ),
        "lemmas": lemmas,
        "chain": chain,
        "passed": passed,
    });
    emit_json(&doc, args.out.as_deref())?;
    if args.out.is_some() {
        write_stdout(&format!(
            "audit: {}/{} closing-inequality trials passed; lemma checks {}\n",
            chain.passes,
            chain.trials,
            if lemmas.all_passed() {
                "passed"
            } else {
                "FAILED"
            }
        ));
    }
    if !passed {
        return Err(CliError::AuditFailed(format!(
            "derivation audit failed: {} of {} closing-inequality trials violated the bound, \
             lemma checks {}",
            chain.failures,
            chain.trials,
            if lemmas.all_passed() {
                "passed"
            } else {
                "failed"
            }
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// model-check

#[derive(Serialize)]
struct SuiteTally {
    checked: u64,
    failures: u64,
    /// Suite-specific worst deviation: a z-score for sampled estimates, an
    /// absolute difference for exact identities.
    worst: f64,
}

#[derive(Serialize)]
struct ModelCheckReport {
    samples_per_estimate: u64,
    /// Sampled marginals vs the two Malus laws (4σ gate).
    malus_marginals: SuiteTally,
    /// Aligned/anti-aligned settings: correlations must be exactly ∓1.
    perfect_correlations: SuiteTally,
    /// Closed-form validity condition vs interval placement, checked away
    /// from the boundary.
    validity_equivalence: SuiteTally,
    /// Bob's interval width (exact) and outcome frequency (4σ) must not
    /// react to Alice's setting.
    no_signalling: SuiteTally,
    /// CHSH at optimal in-plane settings vs 2√2 (4σ gate).
    chsh_reproduction: SuiteTally,
    passed: bool,
}

/// Uniformly random settings/polarizations kept clear of the validity
/// boundary (rejection sampling).
fn random_valid_config<R: Rng + ?Sized>(rng: &mut R) -> [PoincareVector; 4] {
    loop {
        let a = uniform_sphere_sample(rng);
        let b = uniform_sphere_sample(rng);
        let u = uniform_sphere_sample(rng);
        let v = uniform_sphere_sample(rng);
        if validity_margin(&a, &b, &u, &v) > 1e-6 {
            return [a, b, u, v];
        }
    }
}

/// Signed distance to the validity boundary (positive inside).
fn validity_margin(
    a: &PoincareVector,
    b: &PoincareVector,
    u: &PoincareVector,
    v: &PoincareVector,
) -> f64 {
    let (ua, vb, ab) = (u.dot(a), v.dot(b), a.dot(b));
    (1.0 - vb - (ab + ua).abs()).min(1.0 + vb - (ab - ua).abs())
}

fn model_check_report<R: Rng + ?Sized>(
    samples: u64,
    rng: &mut R,
) -> Result<ModelCheckReport, CliError> {
    const MALUS_CONFIGS: u64 = 40;
    const PERFECT_CONFIGS: u64 = 20;
    const NO_SIGNALLING_CONFIGS: u64 = 25;
    /// Error floor for the 4σ gates; binomial errors vanish as estimates
    /// approach ±1 and would otherwise reject exact agreement.
    const SIGMA_FLOOR: f64 = 1e-4;

    // Malus-law marginals: ⟨A⟩ = u·a and ⟨B⟩ = v·b.
    let mut malus = SuiteTally {
        checked: 0,
        failures: 0,
        worst: 0.0,
    };
    for _ in 0..MALUS_CONFIGS {
        let [a, b, u, v] = random_valid_config(rng);
        let source = SourceModel::FixedPair { u, v };
        for (side, setting, expected) in [(Side::Alice, a, u.dot(&a)), (Side::Bob, b, v.dot(&b))] {
            let est = local_average(&source, side, &setting, samples, rng);
            let z = (est.value - expected).abs() / est.std_error.max(SIGMA_FLOOR);
            malus.checked += 1;
            malus.worst = malus.worst.max(z);
            if z > 4.0 {
                malus.failures += 1;
            }
        }
    }

    // Perfect correlations: with v = −u the product is −1 at b = a and +1
    // at b = −a on every single draw, so the estimates are exact.
    let mut perfect = SuiteTally {
        checked: 0,
        failures: 0,
        worst: 0.0,
    };
    let perfect_draws = samples.clamp(1, 20_000);
    for _ in 0..PERFECT_CONFIGS {
        let u = uniform_sphere_sample(rng);
        let a = uniform_sphere_sample(rng);
        let source = SourceModel::FixedPair { u, v: -u };
        for (b, expected) in [(a, -1.0), (-a, 1.0)] {
            let est = source_correlation_with_policy(
                &source,
                &a,
                &b,
                perfect_draws,
                rng,
                IntervalPolicy::Strict,
            )
            .map_err(|e| CliError::Domain(e.to_string()))?;
            let deviation = (est.value - expected).abs();
            perfect.checked += 1;
            perfect.worst = perfect.worst.max(deviation);
            if deviation != 0.0 {
                perfect.failures += 1;
            }
        }
    }

    // The closed-form validity condition is equivalent to Bob's interval
    // being well-formed and straddling Alice's threshold.
    let mut validity = SuiteTally {
        checked: 0,
        failures: 0,
        worst: 0.0,
    };
    for _ in 0..samples {
        let a = uniform_sphere_sample(rng);
        let b = uniform_sphere_sample(rng);
        let u = uniform_sphere_sample(rng);
        let v = uniform_sphere_sample(rng);
        let margin = validity_margin(&a, &b, &u, &v);
        if margin.abs() <= 1e-9 {
            // On the boundary the two routes may round differently.
            continue;
        }
        let closed_form = model_valid(&a, &b, &u, &v);
        let placement = match bob_interval(&a, &b, &u, &v) {
            Ok(interval) => {
                let threshold = alice_threshold(&a, &u);
                interval.x1() <= threshold && threshold <= interval.x2()
            }
            Err(_) => false,
        };
        validity.checked += 1;
        if closed_form != placement {
            validity.failures += 1;
            validity.worst = validity.worst.max(margin.abs());
        }
    }

    // No-signalling: Bob's interval width is a function of v·b only, and
    // his outcome frequency cannot depend on Alice's setting.
    let mut no_signalling = SuiteTally {
        checked: 0,
        failures: 0,
        worst: 0.0,
    };
    for _ in 0..NO_SIGNALLING_CONFIGS {
        let [a, b, u, v] = random_valid_config(rng);
        let remote = uniform_sphere_sample(rng);
        let w1 = bob_interval_clamped(&a, &b, &u, &v).width();
        let w2 = bob_interval_clamped(&remote, &b, &u, &v).width();
        no_signalling.checked += 1;
        if (w1 - w2).abs() > 4.0 * f64::EPSILON {
            no_signalling.failures += 1;
        }
        let frequency = |alice_setting: &PoincareVector, rng: &mut R| {
            let mut plus = 0u64;
            for _ in 0..samples {
                let lambda = HiddenVariable::sample(rng);
                if bob_outcome_clamped(alice_setting, &b, &u, &v, lambda) == Outcome::Plus {
                    plus += 1;
                }
            }
            plus as f64 / samples as f64
        };
        let f1 = frequency(&a, rng);
        let f2 = frequency(&remote, rng);
        let se = ((f1 * (1.0 - f1) + f2 * (1.0 - f2)) / samples as f64)
            .sqrt()
            .max(SIGMA_FLOOR);
        let z = (f1 - f2).abs() / se;
        no_signalling.checked += 1;
        no_signalling.worst = no_signalling.worst.max(z);
        if z > 4.0 {
            no_signalling.failures += 1;
        }
    }

    // CHSH at optimal settings: a source pinned normal to the measurement
    // plane is valid everywhere in it and reproduces E = −a·b, so the
    // CHSH value reaches the full quantum 2√2.
    let normal = PoincareVector::new(0.0, 1.0, 0.0).expect("unit axis");
    let source = SourceModel::singlet_pair(normal);
    let dir = |deg: f64| {
        let t = f64::to_radians(deg);
        PoincareVector::new(t.sin(), 0.0, t.cos()).expect("unit direction")
    };
    let (a1, a2, b1, b2) = (dir(0.0), dir(90.0), dir(-45.0), dir(45.0));
    let correlate = |x: &PoincareVector, y: &PoincareVector, rng: &mut R| {
        source_correlation_with_policy(&source, x, y, samples, rng, IntervalPolicy::Strict)
            .map_err(|e| CliError::Domain(e.to_string()))
    };
    let inputs = ChshInputs {
        e11: Measurement::from(&correlate(&a1, &b1, rng)?),
        e12: Measurement::from(&correlate(&a1, &b2, rng)?),
        e21: Measurement::from(&correlate(&a2, &b1, rng)?),
        e22: Measurement::from(&correlate(&a2, &b2, rng)?),
    };
    let s = chsh_value(&inputs);
    let target = 2.0 * std::f64::consts::SQRT_2;
    let z = (s.value - target).abs() / s.std_error.unwrap_or(0.0).max(SIGMA_FLOOR);
    let chsh_reproduction = SuiteTally {
        checked: 1,
        failures: u64::from(z > 4.0),
        worst: z,
    };

    let passed = [
        &malus,
        &perfect,
        &validity,
        &no_signalling,
        &chsh_reproduction,
    ]
    .iter()
    .all(|t| t.failures == 0);
    Ok(ModelCheckReport {
        samples_per_estimate: samples,
        malus_marginals: malus,
        perfect_correlations: perfect,
        validity_equivalence: validity,
        no_signalling,
        chsh_reproduction,
        passed,
    })
}

fn cmd_model_check(args: &ModelCheckArgs) -> Result<(), CliError> {
    if args.samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".to_string()));
    }
    let seed = resolve_seed(args.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let report = model_check_report(args.samples, &mut rng)?;
    let doc = json!({
        "manifest": manifest(
            "model-check",
            Some(seed),
            json!({ "samples": args.samples }),
            output_names(args.out.as_deref()),
        ),
        "report": report,
    });
    emit_json(&doc, args.out.as_deref())?;
    if !report.passed {
        return Err(CliError::Domain(format!(
            "model check failed: {} malus, {} perfect-correlation, {} validity, \
             {} no-signalling, {} chsh failures",
            report.malus_marginals.failures,
            report.perfect_correlations.failures,
            report.validity_equivalence.failures,
            report.no_signalling.failures,
            report.chsh_reproduction.failures,
        )));
    }
    Ok(())
}
