//! Command pipelines: validate, run, demo-instability and decay-report.
//!
//! A run directory holds `fields.csv`, `density.csv`, `norms.csv`, a
//! `report.toml` summary and, written last, `manifest.toml`. A directory
//! without a manifest is a partial run.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use vpme_core::diagnostics::{
    decay_fit, decay_fit_series, instability_from_result, strided_times, weak_convergence_gap, DecayReport,
    InstabilityReport, MuParameters, TestFunction, WeakConvergenceReport,
};
use vpme_core::scheme::run_iteration;
use vpme_core::{AsymptoticDatum, SchemeConfig, SchemeResult, ValidationReport};

use crate::audit::{stability_audit, StabilityAudit};
use crate::config::{parse_config, DatumSpec, RunConfig, RunMode};
use crate::error::{CliError, Result};
use crate::io;

pub const MANIFEST: &str = "manifest.toml";
pub const REPORT: &str = "report.toml";
pub const INSTABILITY_REPORT: &str = "instability.toml";

/// Weak gaps and probe gaps are sampled at about this many times.
const SAMPLE_TIMES: usize = 10;
/// Random density pairs in the stability audit.
const AUDIT_PAIRS: usize = 100;
/// The contraction factor the theorem guarantees.
const CONTRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    NotConverged,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Converged => 0,
            Status::NotConverged => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseTime {
    pub name: &'static str,
    pub seconds: f64,
}

struct Clock {
    phases: Vec<PhaseTime>,
    mark: Instant,
}

impl Clock {
    fn start() -> Self {
        Self {
            phases: Vec::new(),
            mark: Instant::now(),
        }
    }

    fn lap(&mut self, name: &'static str) {
        let now = Instant::now();
        self.phases.push(PhaseTime {
            name,
            seconds: (now - self.mark).as_secs_f64(),
        });
        self.mark = now;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationDoc {
    pub member: bool,
    pub theorem_ready: bool,
    pub nonnegative: bool,
    pub min_value: f64,
    pub tail_bound: bool,
    pub tail_sup: f64,
    pub fourier_envelope: bool,
    pub fourier_ratio_lattice: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fourier_ratio_analytic: Option<f64>,
    pub series_ok: bool,
    pub series_upper: f64,
    pub t0_admissible: bool,
    pub min_t0: f64,
    pub theorem_regime: bool,
    pub regime_threshold: f64,
    pub violations: Vec<String>,
}

impl From<&ValidationReport> for ValidationDoc {
    fn from(v: &ValidationReport) -> Self {
        Self {
            member: v.is_member(),
            theorem_ready: v.theorem_ready(),
            nonnegative: v.nonnegative,
            min_value: v.min_value,
            tail_bound: v.tail_bound,
            tail_sup: v.tail_sup,
            fourier_envelope: v.fourier_envelope,
            fourier_ratio_lattice: v.fourier_ratio_lattice,
            fourier_ratio_analytic: v.fourier_ratio_analytic,
            series_ok: v.series_ok,
            series_upper: v.series_upper,
            t0_admissible: v.t0_admissible,
            min_t0: v.min_t0,
            theorem_regime: v.theorem_regime,
            regime_threshold: v.regime_threshold,
            violations: v.violations(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationDoc {
    pub converged: bool,
    pub iterations: usize,
    pub tolerance: f64,
    pub final_delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_ratio: Option<f64>,
    pub max_norm: f64,
    /// `16 a1`
    pub norm_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction_bound: Option<f64>,
    pub active_horizon: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlicesDoc {
    pub utilde_max: f64,
    pub dutilde_max: f64,
    pub d2utilde_max: f64,
    pub potential_bounds_pass: bool,
    pub mass_min: f64,
    pub mass_max: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub electron_mass_error_max: f64,
    pub poisson_residual_max: f64,
    pub newton_iterations_max: usize,
    pub lipschitz_max: f64,
    /// `24 a2 + 3`
    pub lipschitz_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayDoc {
    pub degenerate: bool,
    pub prefactor: f64,
    pub rate: f64,
    pub r_squared: f64,
    pub nodes: usize,
    pub envelope_pass: bool,
    pub envelope_ratio: f64,
}

impl From<&DecayReport> for DecayDoc {
    fn from(d: &DecayReport) -> Self {
        Self {
            degenerate: d.degenerate,
            prefactor: d.prefactor,
            rate: d.rate,
            r_squared: d.r_squared,
            nodes: d.residuals.len(),
            envelope_pass: d.envelope_pass,
            envelope_ratio: d.envelope_ratio,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakDoc {
    pub test: &'static str,
    pub t: f64,
    pub gap: f64,
}

fn weak_docs(w: &WeakConvergenceReport) -> Vec<WeakDoc> {
    w.gaps
        .iter()
        .map(|g| WeakDoc {
            test: g.test.id(),
            t: g.t,
            gap: g.gap,
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub validation: ValidationDoc,
    pub iteration: IterationDoc,
    pub slices: SlicesDoc,
    pub decay: DecayDoc,
    pub stability_audit: StabilityAudit,
    pub weak: Vec<WeakDoc>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Headline {
    pub final_delta: f64,
    pub iterations: usize,
    pub decay_rate: f64,
    pub envelope_pass: bool,
    pub contraction: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub command: &'static str,
    pub status: Status,
    pub headline: Headline,
    pub phases: Vec<PhaseTime>,
    pub config: RunConfig,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: Status,
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub report: RunReport,
}

fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("report serializes")
}

/// Create `dir` and drop any stale manifest so an interrupted run is
/// detectable.
fn prepare(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let manifest = dir.join(MANIFEST);
    if manifest.exists() {
        std::fs::remove_file(&manifest).map_err(|e| CliError::io(&manifest, e))?;
    }
    Ok(())
}

/// Validation only: the datum and its report.
pub fn validate(cfg: &RunConfig, base: &Path) -> Result<(AsymptoticDatum, ValidationReport)> {
    let datum = cfg.datum(base)?;
    let report = datum.validate();
    Ok((datum, report))
}

pub fn validation_text(report: &ValidationReport) -> String {
    to_toml(&ValidationDoc::from(report))
}

fn slices_doc(result: &SchemeResult, datum: &AsymptoticDatum) -> SlicesDoc {
    let recs = &result.records;
    let fold = |f: fn(&vpme_core::scheme::IterationRecord) -> f64, init: f64, pick: fn(f64, f64) -> f64| {
        recs.iter().map(f).fold(init, pick)
    };
    let bounds = recs
        .iter()
        .map(|r| r.fields.bounds)
        .reduce(|a, b| a.max(b))
        .expect("at least one pass");
    SlicesDoc {
        utilde_max: bounds.utilde_max,
        dutilde_max: bounds.dutilde_max,
        d2utilde_max: bounds.d2utilde_max,
        potential_bounds_pass: bounds.pass(),
        mass_min: fold(|r| r.mass_min, f64::INFINITY, f64::min),
        mass_max: fold(|r| r.mass_max, f64::NEG_INFINITY, f64::max),
        rho_min: fold(|r| r.rho_min, f64::INFINITY, f64::min),
        rho_max: fold(|r| r.rho_max, 0.0, f64::max),
        electron_mass_error_max: fold(|r| r.fields.electron_mass_error_max, 0.0, f64::max),
        poisson_residual_max: fold(|r| r.fields.poisson_residual_max, 0.0, f64::max),
        newton_iterations_max: recs.iter().map(|r| r.fields.newton_iterations_max).max().unwrap_or(0),
        lipschitz_max: fold(|r| r.lipschitz, 0.0, f64::max),
        lipschitz_bound: datum.class.lipschitz_bound(),
    }
}

fn iteration_doc(result: &SchemeResult, datum: &AsymptoticDatum) -> IterationDoc {
    IterationDoc {
        converged: result.converged,
        iterations: result.iterations(),
        tolerance: result.tolerance,
        final_delta: result.final_delta(),
        max_ratio: result.max_ratio(),
        max_norm: result.max_norm(),
        norm_bound: datum.class.field_envelope(),
        contraction_bound: datum.class.contraction_bound(),
        active_horizon: result.field.active_horizon(),
        warnings: result.warnings.clone(),
    }
}

fn headline(result: &SchemeResult, decay: &DecayReport) -> Headline {
    let verdict = if result.contracts_by(CONTRACTION) { "pass" } else { "fail" };
    Headline {
        final_delta: result.final_delta(),
        iterations: result.iterations(),
        decay_rate: decay.rate,
        envelope_pass: decay.envelope_pass,
        contraction: format!("contraction ≤ {CONTRACTION}: {verdict}"),
    }
}

fn emit_tables(dir: &Path, result: &SchemeResult) -> Result<()> {
    io::write_fields(&dir.join("fields.csv"), &result.field)?;
    io::write_density(&dir.join("density.csv"), &result.density)?;
    io::write_norms(&dir.join("norms.csv"), &result.records)
}

struct Solved {
    datum: AsymptoticDatum,
    scheme: SchemeConfig,
    result: SchemeResult,
}

fn solve(cfg: &RunConfig, base: &Path, mode: RunMode, clock: &mut Clock) -> Result<Solved> {
    let datum = cfg.datum(base)?;
    let scheme = cfg.scheme_config(&datum, mode)?;
    clock.lap("validate");
    let result = run_iteration(&datum, &scheme)?;
    clock.lap("iterate");
    Ok(Solved { datum, scheme, result })
}

/// Validate, iterate, run diagnostics and write the run directory.
pub fn run(cfg: &RunConfig, base: &Path, mode: RunMode, dir: &Path) -> Result<RunOutcome> {
    prepare(dir)?;
    let mut clock = Clock::start();
    let Solved { datum, scheme, result } = solve(cfg, base, mode, &mut clock)?;

    let decay = decay_fit(&result.field, &datum.class);
    let times = strided_times(&scheme.time, scheme.time.len().div_ceil(SAMPLE_TIMES));
    let weak = weak_convergence_gap(
        &datum,
        &result.field,
        scheme.velocity,
        &times,
        &TestFunction::DEFAULT_SET,
        scheme.ode_substeps,
    )?;
    let audit = stability_audit(cfg.seed, AUDIT_PAIRS, scheme.grid, scheme.newton)?;
    clock.lap("diagnostics");

    let report = RunReport {
        validation: ValidationDoc::from(&result.validation),
        iteration: iteration_doc(&result, &datum),
        slices: slices_doc(&result, &datum),
        decay: DecayDoc::from(&decay),
        stability_audit: audit,
        weak: weak_docs(&weak),
    };
    emit_tables(dir, &result)?;
    io::write_text(&dir.join(REPORT), &to_toml(&report))?;
    clock.lap("emit");

    let status = if result.converged { Status::Converged } else { Status::NotConverged };
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        command: "run",
        status,
        headline: headline(&result, &decay),
        phases: clock.phases,
        config: cfg.clone(),
    };
    io::write_text(&dir.join(MANIFEST), &to_toml(&manifest))?;
    Ok(RunOutcome {
        status,
        dir: dir.to_path_buf(),
        manifest,
        report,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct InstabilityDoc {
    pub amplitude: f64,
    pub sigma: f64,
    pub member: bool,
    pub converged: bool,
    pub probe_velocity: f64,
    pub probe_floor: f64,
    pub probe_min: f64,
    pub weak_final_max: f64,
    pub weak_nonincreasing: bool,
    /// Weak gaps below `1e-3` at the last sample while the probe gap stays
    /// above its floor.
    pub weak_not_strong: bool,
    pub narrative: String,
    pub probe: Vec<ProbeDoc>,
    pub weak: Vec<WeakDoc>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeDoc {
    pub t: f64,
    pub gap: f64,
}

/// Tolerance on the last weak gap for the weak-but-not-strong verdict.
pub const WEAK_TOL: f64 = 1e-3;
/// Per-step slack and absolute floor for the monotonicity check on weak gaps.
pub const WEAK_SLACK: f64 = 0.05;
pub const WEAK_FLOOR: f64 = 1e-12;

impl From<&InstabilityReport> for InstabilityDoc {
    fn from(r: &InstabilityReport) -> Self {
        Self {
            amplitude: r.mu.amplitude,
            sigma: r.mu.sigma,
            member: r.member,
            converged: r.converged,
            probe_velocity: r.probe_velocity,
            probe_floor: r.probe_floor,
            probe_min: r.probe_min(),
            weak_final_max: r.weak.final_max(),
            weak_nonincreasing: r.weak.nonincreasing(WEAK_SLACK, WEAK_FLOOR),
            weak_not_strong: r.weak_not_strong(WEAK_TOL),
            narrative: r.narrative.clone(),
            probe: r.probe_gaps.iter().map(|&(t, gap)| ProbeDoc { t, gap }).collect(),
            weak: weak_docs(&r.weak),
        }
    }
}

/// Iterate `f* = mu(v)(1 + cos 2 pi x)` with `mu` taken from the configured
/// gaussian-cosine datum, then compare weak and pointwise convergence.
pub fn demo_instability(cfg: &RunConfig, base: &Path, mode: RunMode, dir: &Path) -> Result<(Status, InstabilityReport)> {
    let mu = match cfg.datum {
        DatumSpec::GaussianCosine { amplitude, sigma } => MuParameters { amplitude, sigma },
        DatumSpec::Tabulated { .. } => {
            return Err(CliError::config("datum.family", "demo-instability needs the gaussian-cosine family"))
        }
    };
    let class = cfg.class_parameters()?;
    if !mu.bounded_by(class.a2) {
        return Err(vpme_core::Error::Parameter {
            name: "mu",
            reason: format!("|mu(v)| exceeds a2 / (2 (1 + v^4)) for amplitude {}", mu.amplitude),
        }
        .into());
    }
    prepare(dir)?;
    let mut clock = Clock::start();
    let Solved { datum, scheme, result } = solve(cfg, base, mode, &mut clock)?;
    let times = strided_times(&scheme.time, scheme.time.len().div_ceil(SAMPLE_TIMES));
    let report = instability_from_result(&datum, mu, &result, &scheme, 0.0, &times)?;
    let decay = decay_fit(&result.field, &datum.class);
    clock.lap("diagnostics");

    emit_tables(dir, &result)?;
    io::write_text(&dir.join(INSTABILITY_REPORT), &to_toml(&InstabilityDoc::from(&report)))?;
    clock.lap("emit");

    let status = if result.converged { Status::Converged } else { Status::NotConverged };
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        command: "demo-instability",
        status,
        headline: headline(&result, &decay),
        phases: clock.phases,
        config: cfg.clone(),
    };
    io::write_text(&dir.join(MANIFEST), &to_toml(&manifest))?;
    Ok((status, report))
}

/// Decay fit recomputed from a finished run directory.
pub fn decay_report(dir: &Path) -> Result<DecayDoc> {
    let manifest_path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| CliError::io(&manifest_path, e))?;
    let table: toml::Table = text.parse().map_err(|e| CliError::format(&manifest_path, e))?;
    let config = table
        .get("config")
        .and_then(|c| c.as_table())
        .ok_or_else(|| CliError::format(&manifest_path, "no [config] section"))?;
    let cfg = parse_config(&toml::to_string(config).expect("table serializes"))?;
    let class = cfg.class_parameters()?;
    let sups = io::read_field_sups(&dir.join("fields.csv"))?;
    let (times, values): (Vec<f64>, Vec<f64>) = sups.into_iter().unzip();
    Ok(DecayDoc::from(&decay_fit_series(&times, &values, &class)))
}

pub fn decay_text(doc: &DecayDoc) -> String {
    to_toml(doc)
}

