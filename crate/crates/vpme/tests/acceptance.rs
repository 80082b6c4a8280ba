//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so every line is printed; exits nonzero if any criterion fails.

use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use vpme::{parse_config, RunConfig, RunMode};
use vpme_core::characteristics::DEFAULT_TAIL_TOL;
use vpme_core::datum::E6;
use vpme_core::diagnostics::{decay_fit, instability_from_result, strided_times, MuParameters};
use vpme_core::poisson::{solve_nonlinear, solve_slice, verify_potential_bounds, BoundsReport};
use vpme_core::scheme::{field_update, push_density, run_iteration};
use vpme_core::*;

const THEOREM: &str = include_str!("../../../configs/theorem.toml");
const EXPLORATORY: &str = include_str!("../../../configs/exploratory.toml");

const HOMOGENEOUS_TOL: f64 = 1e-10;
const HOMOGENEOUS_TIME: Duration = Duration::from_secs(1);
const FIRST_ITERATE_TOL: f64 = 1e-6;
const FIRST_ITERATE_TIME: Duration = Duration::from_secs(30);
const LINEARIZED_EPS: f64 = 1e-4;
const LINEARIZED_TOL: f64 = 1e-9;
const NEWTON_RESIDUAL: f64 = 1e-10;
const NEWTON_STEPS: usize = 10;
const AUDIT_SEED: u64 = 20_240_601;
const AUDIT_PAIRS: usize = 100;
const AUDIT_LINEARIZED_REL: f64 = 0.02;
const CONTRACTION: f64 = 0.5;
const EXPLORATORY_DELTA: f64 = 1e-9;
const EXPLORATORY_ITERATIONS: usize = 30;
const CONTRACTION_TIME: Duration = Duration::from_secs(600);
const ROUNDTRIP_TOL: f64 = 1e-6;
const RK4_RATIO: (f64, f64) = (16.0, 3.0);
const MASS_TOL: f64 = 1e-6;
const ELECTRON_TOL: f64 = 1e-8;
const DECAY_R2: f64 = 0.99;
const WEAK_TOL: f64 = 1e-3;

struct Line {
    id: usize,
    pass: bool,
    detail: String,
}

struct Run {
    datum: AsymptoticDatum,
    scheme: SchemeConfig,
    result: SchemeResult,
    elapsed: Duration,
}

fn solve(text: &str, mode: RunMode) -> Run {
    let cfg: RunConfig = parse_config(text).expect("config parses");
    let datum = cfg.datum(Path::new(".")).expect("datum builds");
    let scheme = cfg.scheme_config(&datum, mode).expect("scheme config");
    let start = Instant::now();
    let result = run_iteration(&datum, &scheme).expect("scheme runs");
    Run {
        datum,
        scheme,
        result,
        elapsed: start.elapsed(),
    }
}

fn no_bounds() -> BoundsReport {
    BoundsReport {
        utilde_max: 0.0,
        dutilde_max: 0.0,
        d2utilde_max: 0.0,
    }
}

fn homogeneous(bounds: &mut BoundsReport) -> Line {
    let grid = SpatialGrid::new(256).unwrap();
    let start = Instant::now();
    let (mut e_max, mut u_err): (f64, f64) = (0.0, 0.0);
    for m in [0.1, 1.0] {
        let (slice, _) = solve_slice(&vec![m; grid.len()], grid, NewtonOptions::default()).unwrap();
        e_max = e_max.max(slice.total().iter().fold(0.0, |a, e| a.max(e.abs())));
        u_err = u_err.max(slice.utilde.iter().fold(0.0, |a, u| a.max((u - m / 12.0).abs())));
        *bounds = bounds.max(verify_potential_bounds(&slice));
    }
    let elapsed = start.elapsed();
    Line {
        id: 1,
        pass: e_max <= HOMOGENEOUS_TOL && u_err <= HOMOGENEOUS_TOL && elapsed < HOMOGENEOUS_TIME,
        detail: format!(
            "homogeneous state: |E| {e_max:.2e}, |Utilde - m/12| {u_err:.2e} (tol {HOMOGENEOUS_TOL:e}), {:.3} s (limit {} s)",
            elapsed.as_secs_f64(),
            HOMOGENEOUS_TIME.as_secs()
        ),
    }
}

fn first_iterate(explore: &Run, bounds: &mut BoundsReport) -> Line {
    let (c, s) = (0.05, 1.0);
    let grid = SpatialGrid::new(256).unwrap();
    let velocity = VelocityGrid::new(VelocityGrid::default_vmax(&explore.datum), 512).unwrap();
    let time = explore.scheme.time;
    let start = Instant::now();
    let zero = FieldHistory::zero(time, grid);
    let rho = push_density(&explore.datum, &zero, velocity, 4).unwrap();
    let (field, stats) = field_update(&rho, NewtonOptions::default(), DEFAULT_TAIL_TOL).unwrap();
    let elapsed = start.elapsed();
    *bounds = bounds.max(stats.bounds);
    let (mut rho_err, mut e_err): (f64, f64) = (0.0, 0.0);
    for (i, t) in time.times().enumerate() {
        let damp = (-2.0 * PI * PI * s * s * t * t).exp();
        for (j, x) in grid.nodes().enumerate() {
            rho_err = rho_err.max((rho.slice(i)[j] - c * (1.0 + (TAU * x).cos() * damp)).abs());
            e_err = e_err.max((field.slices()[i].ebar[j] - c / TAU * (TAU * x).sin() * damp).abs());
        }
    }
    Line {
        id: 2,
        pass: rho_err <= FIRST_ITERATE_TOL && e_err <= FIRST_ITERATE_TOL && elapsed < FIRST_ITERATE_TIME,
        detail: format!(
            "first iterate at Nx=256, Nv=512: rho {rho_err:.2e}, Ebar {e_err:.2e} (tol {FIRST_ITERATE_TOL:e}), {:.2} s (limit {} s)",
            elapsed.as_secs_f64(),
            FIRST_ITERATE_TIME.as_secs()
        ),
    }
}

fn linearization() -> Line {
    let grid = SpatialGrid::new(256).unwrap();
    let ubar: Vec<f64> = grid.nodes().map(|x| LINEARIZED_EPS * (TAU * x).cos()).collect();
    let sol = solve_nonlinear(&ubar, grid, NewtonOptions::default()).unwrap();
    let k = 4.0 * PI * PI;
    let expect = |x: f64| -LINEARIZED_EPS * (TAU * x).cos() / (1.0 + k);
    let err = grid
        .nodes()
        .zip(&sol.utilde)
        .fold(0.0, |a: f64, (x, u)| a.max((u - expect(x)).abs()));
    let mean = sol.utilde.iter().sum::<f64>() / grid.len() as f64;
    let harmonic_err = grid
        .nodes()
        .zip(&sol.utilde)
        .fold(0.0, |a: f64, (x, u)| a.max((u - mean - expect(x)).abs()));
    Line {
        id: 3,
        pass: err <= LINEARIZED_TOL && sol.residual() <= NEWTON_RESIDUAL && sol.iterations <= NEWTON_STEPS,
        detail: format!(
            "linearized Newton, eps = {LINEARIZED_EPS:e}: |Utilde - linear| {err:.2e} (tol {LINEARIZED_TOL:e}), \
             residual {:.2e} in {} steps (limits {NEWTON_RESIDUAL:e}, {NEWTON_STEPS}); \
             mean of Utilde {mean:.2e}, error after removing it {harmonic_err:.2e}",
            sol.residual(),
            sol.iterations
        ),
    }
}

fn stability() -> Line {
    let grid = SpatialGrid::new(128).unwrap();
    let audit = vpme::audit::stability_audit(AUDIT_SEED, AUDIT_PAIRS, grid, NewtonOptions::default()).unwrap();
    Line {
        id: 4,
        pass: audit.pass() && audit.linearized_error() <= AUDIT_LINEARIZED_REL,
        detail: format!(
            "stability audit, seed {AUDIT_SEED}, {AUDIT_PAIRS} pairs: max ratio {:.4} vs e^6 = {E6:.2}, {} violations; \
             linearized ratio {:.5} vs {:.5} ({:.3}% off, limit {}%)",
            audit.max_ratio,
            audit.violations,
            audit.linearized_ratio,
            audit.linearized_limit,
            100.0 * audit.linearized_error(),
            100.0 * AUDIT_LINEARIZED_REL
        ),
    }
}

fn potential_bounds(bounds: BoundsReport) -> Line {
    Line {
        id: 5,
        pass: bounds.pass(),
        detail: format!(
            "potential bounds over all slices: |Utilde| {:.2e} <= 3, |Utilde'| {:.2e} <= 2, |Utilde''| {:.2e} <= 3",
            bounds.utilde_max, bounds.dutilde_max, bounds.d2utilde_max
        ),
    }
}

fn contraction(theorem: &Run, explore: &Run) -> Line {
    let class = theorem.datum.class;
    let a_expected = ((200.0 * class.a2 + 3.0) * (E6 + 1.0)).sqrt().ceil();
    let amp_max = AsymptoticDatum::max_gaussian_cosine_amplitude(12.0, &class);
    let setup = class.a == a_expected && theorem.datum.validate().theorem_ready();
    let t = &theorem.result;
    let ratios: Vec<f64> = t.records.iter().filter_map(|r| r.ratio).collect();
    let norm_cap = 16.0 * class.a1;
    let theorem_ok = t.converged && t.contracts_by(CONTRACTION) && t.max_norm() <= norm_cap;
    let e = &explore.result;
    let explore_ok = e.converged && e.iterations() <= EXPLORATORY_ITERATIONS && e.final_delta() <= EXPLORATORY_DELTA;
    let elapsed = theorem.elapsed.max(explore.elapsed);
    let fmt = |r: &[f64]| r.iter().map(|q| format!("{q:.2e}")).collect::<Vec<_>>().join(", ");
    let explore_ratios: Vec<f64> = e.records.iter().filter_map(|r| r.ratio).collect();
    Line {
        id: 6,
        pass: setup && theorem_ok && explore_ok && elapsed < CONTRACTION_TIME,
        detail: format!(
            "contraction: theorem (a = {}, a needed {a_expected}, amplitude {:.3e} <= {amp_max:.3e}) ratios [{}] \
             (limit {CONTRACTION}), max norm {:.2e} <= {norm_cap}; exploratory ratios [{}], delta {:.2e} \
             after {} iterations (limits {EXPLORATORY_DELTA:e}, {EXPLORATORY_ITERATIONS}); slowest run {:.1} s (limit {} s)",
            class.a,
            theorem.datum.mass(),
            fmt(&ratios),
            t.max_norm(),
            fmt(&explore_ratios),
            e.final_delta(),
            e.iterations(),
            elapsed.as_secs_f64(),
            CONTRACTION_TIME.as_secs()
        ),
    }
}

fn torus_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

fn flow(explore: &Run) -> Line {
    let field = &explore.result.field;
    let flow = field.flow(explore.scheme.ode_substeps);
    let time = explore.scheme.time;
    let mut worst: f64 = 0.0;
    for t in [time.start(), 0.5 * (time.start() + field.active_horizon())] {
        for i in 0..32 {
            for k in 0..32 {
                let p = PhasePoint::new(t, i as f64 / 32.0, -4.0 + 8.0 * (k as f64 + 0.5) / 32.0);
                let label = flow.label_from_point(p).unwrap();
                let back = flow.flow_from_label(label, t).unwrap();
                worst = worst.max(torus_dist(back.x, p.x)).max((back.v - p.v).abs());
            }
        }
    }
    // uniform field e^(-2t): X' = V, V' = e^(-2t), exact from (0, x, v) to s
    let a = 2.0;
    let uniform = |t: f64, _x: f64| (-a * t).exp();
    let (x, v, s) = (0.2, 0.4, 3.0);
    let es = (-a * s).exp();
    let exact = (x + (v + 1.0 / a) * s + (es - 1.0) / (a * a), v + (1.0 - es) / a);
    let err = |step: f64| {
        let (xn, vn) = Flow::new(&uniform, step, 0.0, s).integrate(0.0, s, x, v).unwrap();
        (xn - exact.0).abs().max((vn - exact.1).abs())
    };
    let ratio = err(0.2) / err(0.1);
    Line {
        id: 7,
        pass: worst <= ROUNDTRIP_TOL && (ratio - RK4_RATIO.0).abs() <= RK4_RATIO.1,
        detail: format!(
            "flow: 32x32 roundtrip {worst:.2e} (tol {ROUNDTRIP_TOL:e}); RK4 halving ratio {ratio:.3} (16 +- 3)"
        ),
    }
}

fn conservation(runs: &[&Run]) -> Line {
    let (mut mass_err, mut electron_err): (f64, f64) = (0.0, 0.0);
    for run in runs {
        let m = run.datum.mass();
        for r in &run.result.records {
            mass_err = mass_err.max((r.mass_min - m).abs()).max((r.mass_max - m).abs());
            electron_err = electron_err.max(r.fields.electron_mass_error_max);
        }
    }
    Line {
        id: 8,
        pass: mass_err <= MASS_TOL && electron_err <= ELECTRON_TOL,
        detail: format!(
            "conservation over all slices and iterations: density mass {mass_err:.2e} (tol {MASS_TOL:e}), \
             int exp(U) - 1 {electron_err:.2e} (tol {ELECTRON_TOL:e})"
        ),
    }
}

fn damping(explore: &Run) -> Line {
    let fit = decay_fit(&explore.result.field, &explore.datum.class);
    let mu = MuParameters {
        amplitude: 0.05,
        sigma: 1.0,
    };
    let times = strided_times(&explore.scheme.time, 10);
    let report =
        instability_from_result(&explore.datum, mu, &explore.result, &explore.scheme, 0.0, &times).unwrap();
    let floor = 0.5 * mu.amplitude / (TAU.sqrt() * mu.sigma);
    let fit_ok = !fit.degenerate && fit.rate > 0.0 && fit.r_squared >= DECAY_R2;
    let weak = report.weak.final_max();
    let probe = report.probe_min();
    Line {
        id: 9,
        pass: fit_ok && weak < WEAK_TOL && probe > floor,
        detail: format!(
            "damping: rate {:.3}, R^2 {:.4} over {} nodes (min {DECAY_R2}); weak gap at horizon {weak:.2e} \
             (tol {WEAK_TOL:e}); probe gap min {probe:.4e} > {floor:.4e}",
            fit.rate,
            fit.r_squared,
            fit.residuals.len()
        ),
    }
}

fn main() -> ExitCode {
    let mut bounds = no_bounds();
    let theorem = solve(THEOREM, RunMode::Theorem);
    let explore = solve(EXPLORATORY, RunMode::Exploratory);
    for run in [&theorem, &explore] {
        for r in &run.result.records {
            bounds = bounds.max(r.fields.bounds);
        }
    }
    let mut lines = vec![homogeneous(&mut bounds), first_iterate(&explore, &mut bounds)];
    lines.push(linearization());
    lines.push(stability());
    lines.push(contraction(&theorem, &explore));
    lines.push(flow(&explore));
    lines.push(conservation(&[&theorem, &explore]));
    lines.push(damping(&explore));
    lines.push(potential_bounds(bounds));
    lines.sort_by_key(|l| l.id);

    let mut failed = 0;
    for l in &lines {
        let tag = if l.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {}: {}", l.id, l.detail);
        failed += usize::from(!l.pass);
    }
    println!("acceptance: {} passed, {failed} failed", lines.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
