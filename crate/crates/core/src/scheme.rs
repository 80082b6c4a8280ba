//! Fixed-point iteration on the electric field.
//!
//! Starting from `E_0 = 0`, each pass pulls `f*` back along the
//! characteristics of the previous field to get `rho_n`, then solves the split
//! Poisson problem slice by slice to get `E_n`. Progress is measured in the
//! weighted norm `||F||_{a,t0} = sup_{t >= t0} e^(a t) ||F(t)||_inf`, evaluated
//! on the time nodes (a grid lower bound of the continuous supremum).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::characteristics::{FieldHistory, PhasePoint, TimeGrid, DEFAULT_TAIL_TOL};
use crate::datum::{AsymptoticDatum, ValidationReport};
use crate::diagnostics::lipschitz_estimate;
use crate::error::{Error, Result};
use crate::math::{cbrt, exp, max_abs};
use crate::poisson::{self, BoundsReport, FieldSlice, NewtonOptions, SpatialGrid};

/// Whether the theorem's hypotheses are enforced before iterating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Refuse data outside the theorem's hypotheses.
    Theorem,
    /// Iterate anyway; violations become warnings and bounds are only
    /// reported.
    Exploratory,
}

/// Mass the class tail bound may lose past `vmax`.
pub const CLASS_TAIL_TOL: f64 = 1e-10;

/// Mass the datum's own tail may lose past `vmax`; small enough that the cut
/// leaves no field above roundoff.
pub const FAMILY_TAIL_TOL: f64 = 1e-16;

/// Midpoint rule on `[-vmax, vmax]` with `n` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityGrid {
    vmax: f64,
    n: usize,
}

impl VelocityGrid {
    pub fn new(vmax: f64, n: usize) -> Result<Self> {
        if !(vmax.is_finite() && vmax > 0.0) {
            return Err(Error::param("vmax", format!("must be positive, got {vmax}")));
        }
        if n < 2 {
            return Err(Error::param("nv", "need at least two velocity cells"));
        }
        Ok(Self { vmax, n })
    }

    pub fn vmax(&self) -> f64 {
        self.vmax
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn weight(&self) -> f64 {
        2.0 * self.vmax / self.n as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        -self.vmax + (k as f64 + 0.5) * self.weight()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |k| self.node(k))
    }

    /// `V` with `int_{|v| > V} a2 / (1 + v^4) dv <= 2 a2 / (3 V^3) = tol`.
    pub fn class_tail_vmax(a2: f64, tol: f64) -> f64 {
        cbrt(2.0 * a2 / (3.0 * tol))
    }

    /// The tighter of the class tail bound at [`CLASS_TAIL_TOL`] and the
    /// datum's own decay at [`FAMILY_TAIL_TOL`].
    pub fn default_vmax(datum: &AsymptoticDatum) -> f64 {
        Self::class_tail_vmax(datum.class.a2, CLASS_TAIL_TOL)
            .min(datum.velocity_extent(FAMILY_TAIL_TOL))
    }

    /// First time at which the midpoint rule aliases `cos(2 pi v t)`.
    pub fn recurrence_time(&self) -> f64 {
        1.0 / self.weight()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub grid: SpatialGrid,
    pub time: TimeGrid,
    pub velocity: VelocityGrid,
    pub newton: NewtonOptions,
    /// RK4 steps per time-grid interval.
    pub ode_substeps: usize,
    /// Stop when `||E_{n+1} - E_n||_{a,t0}` drops to this; `None` means
    /// `1e-9 (1 + ||E_1||_{a,t0})`.
    pub fixed_point_tol: Option<f64>,
    pub max_iterations: usize,
    pub mode: Mode,
    /// Impulse that may be dropped when treating a field as free past its
    /// active horizon.
    pub tail_tol: f64,
}

impl SchemeConfig {
    pub fn new(grid: SpatialGrid, time: TimeGrid, velocity: VelocityGrid) -> Self {
        Self {
            grid,
            time,
            velocity,
            newton: NewtonOptions::default(),
            ode_substeps: 4,
            fixed_point_tol: None,
            max_iterations: 30,
            mode: Mode::Theorem,
            tail_tol: DEFAULT_TAIL_TOL,
        }
    }
}

/// `rho(tau_i, x_j)` with per-slice mass.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityHistory {
    time: TimeGrid,
    grid: SpatialGrid,
    rho: Vec<Vec<f64>>,
    mass: Vec<f64>,
}

impl DensityHistory {
    pub fn new(time: TimeGrid, grid: SpatialGrid, rho: Vec<Vec<f64>>) -> Result<Self> {
        if rho.len() != time.len() || rho.iter().any(|r| r.len() != grid.len()) {
            return Err(Error::param("rho", "density table does not match the grids"));
        }
        let h = grid.spacing();
        let mass = rho.iter().map(|r| r.iter().sum::<f64>() * h).collect();
        Ok(Self { time, grid, rho, mass })
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn slice(&self, i: usize) -> &[f64] {
        &self.rho[i]
    }

    pub fn slices(&self) -> &[Vec<f64>] {
        &self.rho
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn max_density(&self) -> f64 {
        self.rho.iter().map(|r| max_abs(r)).fold(0.0, f64::max)
    }

    pub fn min_density(&self) -> f64 {
        self.rho.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

#[cfg(feature = "std")]
pub(crate) fn map_indices<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "std"))]
pub(crate) fn map_indices<T>(n: usize, f: impl Fn(usize) -> Result<T>) -> Result<Vec<T>> {
    (0..n).map(f).collect()
}

/// `rho(tau_i, x_j) = sum_k w f*(label(tau_i, x_j, v_k))` over the truncated
/// velocity grid. Columns are independent; the `v` sum runs in a fixed order.
pub fn push_density(
    datum: &AsymptoticDatum,
    history: &FieldHistory,
    velocity: VelocityGrid,
    substeps: usize,
) -> Result<DensityHistory> {
    let time = *history.time();
    let grid = history.grid();
    let nx = grid.len();
    let flow = history.flow(substeps);
    let w = velocity.weight();
    let column = |idx: usize| -> Result<f64> {
        let (i, j) = (idx / nx, idx % nx);
        let (t, x) = (time.time(i), grid.node(j));
        let mut acc = 0.0;
        for v in velocity.nodes() {
            let label = flow.label_from_point(PhasePoint::new(t, x, v))?;
            acc += datum.eval(label.x, label.v)?;
        }
        Ok(w * acc)
    };
    let flat = map_indices(time.len() * nx, column)?;
    let rho = flat.chunks(nx).map(|c| c.to_vec()).collect();
    DensityHistory::new(time, grid, rho)
}

/// Per-pass summary of the Poisson solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldStats {
    pub newton_iterations_max: usize,
    pub newton_residual_max: f64,
    /// `max |int exp(Ubar + Utilde) - 1|` over slices.
    pub electron_mass_error_max: f64,
    pub poisson_residual_max: f64,
    pub bounds: BoundsReport,
}

/// Solve the split Poisson problem on every density slice.
pub fn field_update(
    density: &DensityHistory,
    newton: NewtonOptions,
    tail_tol: f64,
) -> Result<(FieldHistory, FieldStats)> {
    let grid = density.grid();
    let solved = map_indices(density.time().len(), |i| {
        let rho = density.slice(i);
        let (slice, sol) = poisson::solve_slice(rho, grid, newton).map_err(|e| match e {
            Error::SolverDivergence { iterations, residual, .. } => Error::SolverDivergence {
                iterations,
                residual,
                slice: Some(i),
            },
            other => other,
        })?;
        let bounds = poisson::verify_potential_bounds(&slice);
        let residual = slice.poisson_residual(rho);
        let mass_err = (slice.electron_mass() - 1.0).abs();
        Ok((slice, sol.iterations, sol.residual(), mass_err, residual, bounds))
    })?;
    let mut stats = FieldStats {
        newton_iterations_max: 0,
        newton_residual_max: 0.0,
        electron_mass_error_max: 0.0,
        poisson_residual_max: 0.0,
        bounds: BoundsReport {
            utilde_max: 0.0,
            dutilde_max: 0.0,
            d2utilde_max: 0.0,
        },
    };
    let mut slices: Vec<FieldSlice> = Vec::with_capacity(solved.len());
    for (slice, iters, res, mass_err, residual, bounds) in solved {
        stats.newton_iterations_max = stats.newton_iterations_max.max(iters);
        stats.newton_residual_max = stats.newton_residual_max.max(res);
        stats.electron_mass_error_max = stats.electron_mass_error_max.max(mass_err);
        stats.poisson_residual_max = stats.poisson_residual_max.max(residual);
        stats.bounds = stats.bounds.max(bounds);
        slices.push(slice);
    }
    let history = FieldHistory::with_tail_tolerance(*density.time(), grid, slices, tail_tol)?;
    Ok((history, stats))
}

/// `max_{tau_i >= t0} e^(a tau_i) sups[i]`.
pub fn weighted_sup(time: &TimeGrid, sups: &[f64], a: f64, t0: f64) -> Result<f64> {
    if sups.is_empty() {
        return Err(Error::EmptyHistory);
    }
    if sups.len() != time.len() {
        return Err(Error::param("sups", "one value per time node is required"));
    }
    let eps = 1e-12 * (1.0 + t0.abs());
    let mut best: Option<f64> = None;
    for (i, &s) in sups.iter().enumerate() {
        let t = time.time(i);
        if t >= t0 - eps {
            let w = if s == 0.0 { 0.0 } else { exp(a * t) * s };
            best = Some(best.map_or(w, |b: f64| b.max(w)));
        }
    }
    best.ok_or(Error::EmptyHistory)
}

/// `||E||_{a,t0}` of the total field.
pub fn weighted_norm(history: &FieldHistory, a: f64, t0: f64) -> Result<f64> {
    weighted_sup(history.time(), history.sup_norms(), a, t0)
}

/// `||E_1 - E_2||_{a,t0}` for two histories on the same grids.
pub fn weighted_distance(h1: &FieldHistory, h2: &FieldHistory, a: f64, t0: f64) -> Result<f64> {
    if h1.time() != h2.time() || h1.grid() != h2.grid() {
        return Err(Error::param("history", "histories live on different grids"));
    }
    let sups: Vec<f64> = (0..h1.time().len())
        .map(|i| {
            h1.total(i)
                .iter()
                .zip(h2.total(i))
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
        })
        .collect();
    weighted_sup(h1.time(), &sups, a, t0)
}

fn component_norm(history: &FieldHistory, a: f64, t0: f64, pick: impl Fn(&FieldSlice) -> &[f64]) -> Result<f64> {
    let sups: Vec<f64> = history.slices().iter().map(|s| max_abs(pick(s))).collect();
    weighted_sup(history.time(), &sups, a, t0)
}

/// Everything measured on one pass `E_{n-1} -> E_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub n: usize,
    /// `||E_n||_{a,t0}`
    pub norm: f64,
    pub ebar_norm: f64,
    pub etilde_norm: f64,
    /// `||E_n - E_{n-1}||_{a,t0}`
    pub delta: f64,
    /// `delta_n / delta_{n-1}`, from the second pass on.
    pub ratio: Option<f64>,
    /// Largest adjacent-node difference quotient of `E_n` in `x`.
    pub lipschitz: f64,
    pub rho_max: f64,
    pub rho_min: f64,
    pub mass_min: f64,
    pub mass_max: f64,
    pub fields: FieldStats,
}

#[derive(Debug, Clone)]
pub struct SchemeResult {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub tolerance: f64,
    pub field: FieldHistory,
    pub density: DensityHistory,
    pub validation: ValidationReport,
    pub warnings: Vec<String>,
    pub mode: Mode,
}

impl SchemeResult {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_delta(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.delta)
    }

    pub fn max_ratio(&self) -> Option<f64> {
        self.records.iter().filter_map(|r| r.ratio).reduce(f64::max)
    }

    pub fn max_norm(&self) -> f64 {
        self.records.iter().map(|r| r.norm).fold(0.0, f64::max)
    }

    /// Every measured ratio is at most `factor` (vacuously true with fewer
    /// than two passes).
    pub fn contracts_by(&self, factor: f64) -> bool {
        self.records.iter().filter_map(|r| r.ratio).all(|q| q <= factor)
    }
}

/// Run the iteration `E_0 = 0 -> rho_1 -> E_1 -> ...` until the weighted
/// delta falls below tolerance or the pass cap is reached. Hitting the cap is
/// not an error: the result carries `converged = false` and the full trace.
pub fn run_iteration(datum: &AsymptoticDatum, config: &SchemeConfig) -> Result<SchemeResult> {
    let validation = datum.validate();
    let mut warnings = Vec::new();
    if !validation.theorem_ready() {
        let issues = validation.violations().join("; ");
        match config.mode {
            Mode::Theorem => return Err(Error::InvalidDatum(issues)),
            Mode::Exploratory => warnings.push(format!(
                "outside the theorem hypotheses ({issues}); contraction is reported, not asserted"
            )),
        }
    }
    let recurrence = config.velocity.recurrence_time();
    if recurrence <= config.time.end() {
        warnings.push(format!(
            "velocity spacing {:.4} aliases free transport at t = {recurrence:.3} before the horizon",
            config.velocity.weight()
        ));
    }
    let (a, t0) = (datum.class.a, datum.class.t0);
    if t0 < config.time.start() - 1e-12 {
        return Err(Error::param("t0", "class start time precedes the time grid"));
    }

    let mut previous = FieldHistory::zero(config.time, config.grid);
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut tolerance = config.fixed_point_tol.unwrap_or(f64::NAN);
    let mut converged = false;
    let mut density = None;

    for n in 1..=config.max_iterations {
        let rho = push_density(datum, &previous, config.velocity, config.ode_substeps)?;
        let (field, stats) = field_update(&rho, config.newton, config.tail_tol)?;
        let norm = weighted_norm(&field, a, t0)?;
        let delta = weighted_distance(&field, &previous, a, t0)?;
        if n == 1 && config.fixed_point_tol.is_none() {
            tolerance = 1e-9 * (1.0 + norm);
        }
        let ratio = records.last().map(|r| {
            if r.delta == 0.0 {
                0.0
            } else {
                delta / r.delta
            }
        });
        let (mass_min, mass_max) = rho
            .mass()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &m| (lo.min(m), hi.max(m)));
        records.push(IterationRecord {
            n,
            norm,
            ebar_norm: component_norm(&field, a, t0, |s| &s.ebar)?,
            etilde_norm: component_norm(&field, a, t0, |s| &s.etilde)?,
            delta,
            ratio,
            lipschitz: lipschitz_estimate(&field),
            rho_max: rho.max_density(),
            rho_min: rho.min_density(),
            mass_min,
            mass_max,
            fields: stats,
        });
        previous = field;
        density = Some(rho);
        if delta <= tolerance {
            converged = true;
            break;
        }
    }

    Ok(SchemeResult {
        records,
        converged,
        tolerance,
        field: previous,
        density: density.expect("at least one pass runs"),
        validation,
        warnings,
        mode: config.mode,
    })
}

/// `f(t, x, v) = f*(label(t, x, v))`.
pub fn reconstruct_f(
    datum: &AsymptoticDatum,
    history: &FieldHistory,
    point: PhasePoint,
    substeps: usize,
) -> Result<f64> {
    let label = history.flow(substeps).label_from_point(point)?;
    datum.eval(label.x, label.v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datum::ClassParameters;
    use crate::math::{cos, exp, PI, TAU};
    use alloc::vec;

    #[test]
    fn velocity_grid_midpoints() {
        let g = VelocityGrid::new(2.0, 4).unwrap();
        assert_eq!(g.weight(), 1.0);
        assert_eq!(g.node(0), -1.5);
        assert_eq!(g.node(3), 1.5);
        assert!(VelocityGrid::new(0.0, 4).is_err());
    }

    #[test]
    fn class_tail_truncation() {
        let v = VelocityGrid::class_tail_vmax(0.1, 1e-10);
        // 2 a2 / (3 V^3) at V
        assert!((2.0 * 0.1 / (3.0 * v * v * v) - 1e-10).abs() < 1e-22);
    }

    #[test]
    fn weighted_norm_examples() {
        let time = TimeGrid::new(0.5, 3.0, 11).unwrap();
        let a = 1.7;
        let zero = vec![0.0; 11];
        assert_eq!(weighted_sup(&time, &zero, a, 0.5).unwrap(), 0.0);
        let decay2: Vec<f64> = time.times().map(|t| exp(-2.0 * a * t)).collect();
        assert!((weighted_sup(&time, &decay2, a, 0.5).unwrap() - exp(-a * 0.5)).abs() < 1e-15);
        let decay1: Vec<f64> = time.times().map(|t| exp(-a * t)).collect();
        assert!((weighted_sup(&time, &decay1, a, 0.5).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(weighted_sup(&time, &[], a, 0.5), Err(Error::EmptyHistory));
    }

    #[test]
    fn free_transport_density_matches_closed_form() {
        let (c, s) = (1.0, 1.0);
        let class = ClassParameters::new(2.0, 2.62, 2.0, 0.5, 0.0).unwrap();
        let datum = AsymptoticDatum::gaussian_cosine(c, s, class).unwrap();
        let grid = SpatialGrid::new(32).unwrap();
        let time = TimeGrid::new(0.0, 1.5, 7).unwrap();
        let vel = VelocityGrid::new(VelocityGrid::default_vmax(&datum), 256).unwrap();
        let rho = push_density(&datum, &FieldHistory::zero(time, grid), vel, 4).unwrap();
        for (i, t) in time.times().enumerate() {
            let damp = exp(-2.0 * PI * PI * s * s * t * t);
            for (j, x) in grid.nodes().enumerate() {
                let expect = c * (1.0 + cos(TAU * x) * damp);
                assert!((rho.slice(i)[j] - expect).abs() < 1e-9);
            }
            assert!((rho.mass()[i] - c).abs() < 1e-10);
        }
        assert!(rho.min_density() >= 0.0);
    }

    #[test]
    fn uniform_density_gives_zero_field() {
        let grid = SpatialGrid::new(16).unwrap();
        let time = TimeGrid::new(0.0, 1.0, 3).unwrap();
        let rho = DensityHistory::new(time, grid, vec![vec![0.4; 16]; 3]).unwrap();
        let (field, stats) = field_update(&rho, NewtonOptions::default(), DEFAULT_TAIL_TOL).unwrap();
        assert!(field.sup_norms().iter().all(|&e| e < 1e-12));
        assert!(stats.electron_mass_error_max < 1e-12);
    }

    #[test]
    fn theorem_mode_rejects_invalid_datum() {
        let class = ClassParameters::new(2.0, 2.62, 0.1, 0.5, 0.4).unwrap();
        let datum = AsymptoticDatum::gaussian_cosine(0.05, 1.0, class).unwrap();
        let cfg = SchemeConfig::new(
            SpatialGrid::new(16).unwrap(),
            TimeGrid::new(0.4, 2.0, 5).unwrap(),
            VelocityGrid::new(6.0, 32).unwrap(),
        );
        assert!(matches!(run_iteration(&datum, &cfg), Err(Error::InvalidDatum(_))));
    }
}
