//! Post-processing of converged runs: decay fit, weak homogenization gaps,
//! Lipschitz estimate and the weak-but-not-strong instability check.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::characteristics::{FieldHistory, PhasePoint, TimeGrid};
use crate::datum::{gaussian_tail_peak, AsymptoticDatum, ClassParameters, ValidationReport};
use crate::error::{Error, Result};
use crate::math::{cos, exp, gaussian, ln, sin, torus, TAU};
use crate::scheme::{map_indices, run_iteration, SchemeConfig, SchemeResult, VelocityGrid};

/// Below this `sup_x |E|` a node is treated as numerically zero.
pub const DECAY_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    /// `C` in `sup_x |E(t)| ~ C e^(-lambda t)`.
    pub prefactor: f64,
    pub rate: f64,
    pub r_squared: f64,
    /// `(t, log sup|E| - fitted)` per node used in the fit.
    pub residuals: Vec<(f64, f64)>,
    /// `sup_x |E(t)| <= 16 a1 e^(-a t)` at every node from `t0` on.
    pub envelope_pass: bool,
    /// Largest `sup_x |E(t)| / (16 a1 e^(-a t))`.
    pub envelope_ratio: f64,
    /// Fewer than three usable nodes; no fit.
    pub degenerate: bool,
}

/// Fit `log sup_x |E|` against `t` on the nodes `t >= t0`.
pub fn decay_fit(history: &FieldHistory, class: &ClassParameters) -> DecayReport {
    let times: Vec<f64> = history.time().times().collect();
    decay_fit_series(&times, history.sup_norms(), class)
}

/// Same as [`decay_fit`] for a bare `(t, sup_x |E|)` series.
pub fn decay_fit_series(times: &[f64], sups: &[f64], class: &ClassParameters) -> DecayReport {
    let envelope = class.field_envelope();
    let eps = 1e-12 * (1.0 + class.t0.abs());
    let mut envelope_ratio: f64 = 0.0;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (&t, &s) in times.iter().zip(sups) {
        if t < class.t0 - eps {
            continue;
        }
        envelope_ratio = envelope_ratio.max(s / (envelope * exp(-class.a * t)));
        if s > DECAY_FLOOR {
            pts.push((t, ln(s)));
        }
    }
    let envelope_pass = envelope_ratio <= 1.0;
    if pts.len() < 3 {
        return DecayReport {
            prefactor: 0.0,
            rate: f64::NAN,
            r_squared: f64::NAN,
            residuals: Vec::new(),
            envelope_pass,
            envelope_ratio,
            degenerate: true,
        };
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm) * (p.0 - tm)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - ym) * (p.1 - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let residuals: Vec<(f64, f64)> = pts.iter().map(|&(t, y)| (t, y - (intercept + slope * t))).collect();
    let ss_res: f64 = residuals.iter().map(|r| r.1 * r.1).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    DecayReport {
        prefactor: exp(intercept),
        rate: -slope,
        r_squared,
        residuals,
        envelope_pass,
        envelope_ratio,
        degenerate: false,
    }
}

/// Test functions for weak convergence, all bounded and smooth; compact
/// support in `v` comes from the velocity truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    One,
    CosX,
    SinX,
    CosXGaussV,
    VGaussV,
}

impl TestFunction {
    pub const DEFAULT_SET: [TestFunction; 5] = [
        TestFunction::One,
        TestFunction::CosX,
        TestFunction::SinX,
        TestFunction::CosXGaussV,
        TestFunction::VGaussV,
    ];

    pub fn id(self) -> &'static str {
        match self {
            TestFunction::One => "one",
            TestFunction::CosX => "cos2pix",
            TestFunction::SinX => "sin2pix",
            TestFunction::CosXGaussV => "cos2pix_expv2",
            TestFunction::VGaussV => "v_expv2",
        }
    }

    pub fn eval(self, x: f64, v: f64) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::CosX => cos(TAU * x),
            TestFunction::SinX => sin(TAU * x),
            TestFunction::CosXGaussV => cos(TAU * x) * exp(-v * v),
            TestFunction::VGaussV => v * exp(-v * v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakGap {
    pub test: TestFunction,
    pub t: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeakConvergenceReport {
    pub gaps: Vec<WeakGap>,
}

impl WeakConvergenceReport {
    /// `(t, gap)` for one test function, in time order.
    pub fn series(&self, test: TestFunction) -> Vec<(f64, f64)> {
        self.gaps.iter().filter(|g| g.test == test).map(|g| (g.t, g.gap)).collect()
    }

    /// Largest gap at the latest reported time.
    pub fn final_max(&self) -> f64 {
        let last = self.gaps.iter().map(|g| g.t).fold(f64::NEG_INFINITY, f64::max);
        self.gaps.iter().filter(|g| g.t == last).map(|g| g.gap).fold(0.0, f64::max)
    }

    /// Every series satisfies `gap_{k+1} <= (1 + slack) gap_k + floor`.
    pub fn nonincreasing(&self, slack: f64, floor: f64) -> bool {
        let mut tests: Vec<TestFunction> = Vec::new();
        for g in &self.gaps {
            if !tests.contains(&g.test) {
                tests.push(g.test);
            }
        }
        tests.into_iter().all(|test| {
            self.series(test)
                .windows(2)
                .all(|w| w[1].1 <= (1.0 + slack) * w[0].1 + floor)
        })
    }
}

/// `|int int phi f(t) dx dv - int int phi h dx dv|` on the spatial grid of
/// `history` and the midpoint velocity grid, for each requested time.
pub fn weak_convergence_gap(
    datum: &AsymptoticDatum,
    history: &FieldHistory,
    velocity: VelocityGrid,
    times: &[f64],
    tests: &[TestFunction],
    substeps: usize,
) -> Result<WeakConvergenceReport> {
    let grid = history.grid();
    let flow = history.flow(substeps);
    let (hx, hv) = (grid.spacing(), velocity.weight());
    let h: Vec<f64> = velocity.nodes().map(|v| datum.h_limit(v)).collect::<Result<_>>()?;
    let per_time = map_indices(times.len(), |i| {
        let t = times[i];
        let mut acc = alloc::vec![0.0; tests.len()];
        for x in grid.nodes() {
            for (k, v) in velocity.nodes().enumerate() {
                let label = flow.label_from_point(PhasePoint::new(t, x, v))?;
                let diff = datum.eval(label.x, label.v)? - h[k];
                for (a, phi) in acc.iter_mut().zip(tests) {
                    *a += phi.eval(x, v) * diff;
                }
            }
        }
        Ok(acc)
    })?;
    let mut gaps = Vec::with_capacity(times.len() * tests.len());
    for (&t, acc) in times.iter().zip(per_time) {
        for (&test, a) in tests.iter().zip(acc) {
            gaps.push(WeakGap { test, t, gap: (a * hx * hv).abs() });
        }
    }
    Ok(WeakConvergenceReport { gaps })
}

/// `max_i max_j |E(tau_i, x_{j+1}) - E(tau_i, x_j)| / dx`, periodic in `j`.
pub fn lipschitz_estimate(history: &FieldHistory) -> f64 {
    let dx = history.grid().spacing();
    (0..history.time().len())
        .map(|i| {
            let e = history.total(i);
            let n = e.len();
            (0..n).fold(0.0_f64, |m, j| m.max((e[(j + 1) % n] - e[j]).abs()))
        })
        .fold(0.0, f64::max)
        / dx
}

/// Gaussian profile `mu(v) = c g_sigma(v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuParameters {
    pub amplitude: f64,
    pub sigma: f64,
}

impl MuParameters {
    pub fn eval(&self, v: f64) -> f64 {
        self.amplitude * gaussian(v, self.sigma)
    }

    /// `|mu(v)| <= a2 / (2 (1 + v^4))` for all `v`.
    pub fn bounded_by(&self, a2: f64) -> bool {
        self.amplitude * gaussian_tail_peak(self.sigma) <= 0.5 * a2
    }
}

#[derive(Debug, Clone)]
pub struct InstabilityReport {
    pub mu: MuParameters,
    pub validation: ValidationReport,
    /// `f* = mu (1 + cos 2 pi x)` lies in the class.
    pub member: bool,
    pub converged: bool,
    pub weak: WeakConvergenceReport,
    pub probe_velocity: f64,
    /// `(t, sup_x |f(t, x, v*) - mu(v*)|)`. A proxy for "does not stay close
    /// to mu"; no quantitative separation is claimed.
    pub probe_gaps: Vec<(f64, f64)>,
    /// `0.5 mu(v*)`, the lower bound the probe gap is compared against.
    pub probe_floor: f64,
    pub narrative: String,
}

impl InstabilityReport {
    pub fn probe_min(&self) -> f64 {
        self.probe_gaps.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }

    /// Weak gaps small at the last time while the probe gap stays above its
    /// floor throughout.
    pub fn weak_not_strong(&self, weak_tol: f64) -> bool {
        self.weak.final_max() < weak_tol && self.probe_min() > self.probe_floor
    }
}

/// Build `f* = mu(v)(1 + cos 2 pi x)`, iterate the scheme and measure weak
/// versus pointwise convergence to `mu`.
pub fn instability_report(
    mu: MuParameters,
    class: ClassParameters,
    config: &SchemeConfig,
    probe_velocity: f64,
    sample_times: &[f64],
) -> Result<InstabilityReport> {
    if !mu.bounded_by(class.a2) {
        return Err(Error::param(
            "mu",
            format!("|mu(v)| exceeds a2 / (2 (1 + v^4)) for amplitude {}", mu.amplitude),
        ));
    }
    let datum = AsymptoticDatum::gaussian_cosine(mu.amplitude, mu.sigma, class)?;
    let result = run_iteration(&datum, config)?;
    instability_from_result(&datum, mu, &result, config, probe_velocity, sample_times)
}

/// The measurement half of [`instability_report`] for an existing run.
pub fn instability_from_result(
    datum: &AsymptoticDatum,
    mu: MuParameters,
    result: &SchemeResult,
    config: &SchemeConfig,
    probe_velocity: f64,
    sample_times: &[f64],
) -> Result<InstabilityReport> {
    let weak = weak_convergence_gap(
        datum,
        &result.field,
        config.velocity,
        sample_times,
        &TestFunction::DEFAULT_SET,
        config.ode_substeps,
    )?;
    let flow = result.field.flow(config.ode_substeps);
    let grid = result.field.grid();
    let target = mu.eval(probe_velocity);
    let probe_gaps = map_indices(sample_times.len(), |i| {
        let t = sample_times[i];
        let mut worst: f64 = 0.0;
        for x in grid.nodes() {
            let label = flow.label_from_point(PhasePoint::new(t, x, probe_velocity))?;
            worst = worst.max((datum.eval(torus(label.x), label.v)? - target).abs());
        }
        Ok((t, worst))
    })?;
    let validation = result.validation.clone();
    let member = validation.is_member();
    let mut report = InstabilityReport {
        mu,
        validation,
        member,
        converged: result.converged,
        weak,
        probe_velocity,
        probe_gaps,
        probe_floor: 0.5 * target,
        narrative: String::new(),
    };
    report.narrative = format!(
        "f* = mu(v)(1 + cos 2 pi x) has homogeneous limit h = mu, so f(t) -> mu weakly \
         (largest weak gap at the last sample {:.3e}). Pointwise, sup_x |f(t, x, {}) - mu| stays \
         at least {:.3e} (floor {:.3e}). Reversing time maps this solution to one that starts \
         near mu(-v) and leaves it, so mu is unstable in the weak topology; that reversal needs \
         t < t0 and is not simulated.",
        report.weak.final_max(),
        probe_velocity,
        report.probe_min(),
        report.probe_floor,
    );
    Ok(report)
}

/// Sample times: every `stride`-th node plus the last one.
pub fn strided_times(time: &TimeGrid, stride: usize) -> Vec<f64> {
    let stride = stride.max(1);
    let n = time.len();
    let mut out: Vec<f64> = (0..n).step_by(stride).map(|i| time.time(i)).collect();
    if !(n - 1).is_multiple_of(stride) {
        out.push(time.end());
    }
    out
}
