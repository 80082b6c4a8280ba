//! Characteristics pinned at `t -> infinity`.
//!
//! A label `(x, v)` names the trajectory with `X(t) - V(t) t -> x` and
//! `V(t) -> v`. Time is truncated at a horizon past which the field is taken
//! to be zero, so trajectories are free there: `X(t) = x + v t`. The inverse
//! map sends a phase point at time `t` to its label, which is what the
//! pullback `f(t) = f* o label` needs.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{ceil, max_abs, torus};
use crate::poisson::{FieldSlice, SpatialGrid};
use crate::spline::PeriodicSpline;

/// Default bound on the weighted impulse `int (1 + s) sup|E|` neglected when a
/// field history is treated as free past its active horizon. Sits above the
/// roundoff floor of a vanished field (~1e-16 per node over O(10) time units).
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Uniform time grid `t0 = tau_0 < ... < tau_{n-1} = T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t_end: f64,
    nodes: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::param("nt", "need at least two time nodes"));
        }
        if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
            return Err(Error::param("T", "horizon must exceed t0"));
        }
        Ok(Self { t0, t_end, nodes })
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        self.t_end
    }

    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t0) / (self.nodes - 1) as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            self.t_end
        } else {
            self.t0 + i as f64 * self.step()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nodes).map(move |i| self.time(i))
    }

    /// Interval index and fractional position of `t`, clamped to the grid.
    fn locate(&self, t: f64) -> (usize, f64) {
        let u = ((t - self.t0) / self.step()).max(0.0);
        let i = (u as usize).min(self.nodes - 2);
        (i, (u - i as f64).min(1.0))
    }
}

/// Anything that can drive `V' = E(t, X)`.
pub trait ForceField {
    /// Field at time `t` and (unreduced) position `x`.
    fn field(&self, t: f64, x: f64) -> f64;
}

impl<F: Fn(f64, f64) -> f64> ForceField for F {
    fn field(&self, t: f64, x: f64) -> f64 {
        self(t, x)
    }
}

/// Electric field sampled on a time grid, one [`FieldSlice`] per node.
#[derive(Debug, Clone)]
pub struct FieldHistory {
    time: TimeGrid,
    grid: SpatialGrid,
    slices: Vec<FieldSlice>,
    totals: Vec<PeriodicSpline>,
    sups: Vec<f64>,
    active_end: f64,
}

impl FieldHistory {
    pub fn new(time: TimeGrid, grid: SpatialGrid, slices: Vec<FieldSlice>) -> Result<Self> {
        Self::with_tail_tolerance(time, grid, slices, DEFAULT_TAIL_TOL)
    }

    /// As [`FieldHistory::new`], with an explicit bound on the impulse
    /// `int (1 + s) sup|E(s)| ds` that may be dropped past the active horizon.
    pub fn with_tail_tolerance(
        time: TimeGrid,
        grid: SpatialGrid,
        slices: Vec<FieldSlice>,
        tail_tol: f64,
    ) -> Result<Self> {
        if slices.is_empty() {
            return Err(Error::EmptyHistory);
        }
        if slices.len() != time.len() {
            return Err(Error::param("slices", "one slice per time node is required"));
        }
        let n = grid.len();
        if slices
            .iter()
            .any(|s| s.ebar.len() != n || s.etilde.len() != n || s.ubar.len() != n || s.utilde.len() != n)
        {
            return Err(Error::param("slices", "slice length does not match the grid"));
        }
        let totals = slices
            .iter()
            .map(|s| PeriodicSpline::new(s.total()))
            .collect::<Result<Vec<_>>>()?;
        let sups: Vec<f64> = totals.iter().map(|s| max_abs(s.values())).collect();

        // smallest node past which the remaining impulse is negligible
        let dt = time.step();
        let mut tail = 0.0;
        let mut active = time.len() - 1;
        for i in (0..time.len() - 1).rev() {
            tail += dt * (1.0 + time.time(i + 1).abs()) * sups[i].max(sups[i + 1]);
            if tail > tail_tol {
                break;
            }
            active = i;
        }
        let active_end = if sups[time.len() - 1] > tail_tol {
            time.end()
        } else {
            time.time(active)
        };
        Ok(Self {
            time,
            grid,
            slices,
            totals,
            sups,
            active_end,
        })
    }

    pub fn zero(time: TimeGrid, grid: SpatialGrid) -> Self {
        let slices = (0..time.len()).map(|_| FieldSlice::zero(grid)).collect();
        Self::new(time, grid, slices).expect("zero history is well-formed")
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn slices(&self) -> &[FieldSlice] {
        &self.slices
    }

    /// Total field `E = Ebar + Etilde` at time node `i`.
    pub fn total(&self, i: usize) -> &[f64] {
        self.totals[i].values()
    }

    /// `sup_x |E(tau_i)|` per node.
    pub fn sup_norms(&self) -> &[f64] {
        &self.sups
    }

    /// Time after which trajectories are integrated as free streaming.
    pub fn active_horizon(&self) -> f64 {
        self.active_end
    }

    /// `E(t, x)`: periodic cubic spline in `x`, linear in `t`, zero past `T`.
    pub fn sample_field(&self, t: f64, x: f64) -> Result<f64> {
        let t0 = self.time.start();
        if t < t0 - 1e-12 * (1.0 + t0.abs()) {
            return Err(Error::TimeOutOfRange { t, t0 });
        }
        Ok(self.field(t, x))
    }

    /// Characteristic integrator over this history, with RK4 step
    /// `dt / substeps`.
    pub fn flow(&self, substeps: usize) -> Flow<'_, Self> {
        Flow::new(
            self,
            self.time.step() / substeps.max(1) as f64,
            self.time.start(),
            self.active_end,
        )
    }
}

impl ForceField for FieldHistory {
    fn field(&self, t: f64, x: f64) -> f64 {
        if t > self.time.end() {
            return 0.0;
        }
        let (i, s) = self.time.locate(t);
        let (a, b) = (&self.totals[i], &self.totals[i + 1]);
        let xa = a.eval(x);
        if s == 0.0 {
            return xa;
        }
        let xb = b.eval(x);
        if s == 1.0 {
            return xb;
        }
        (1.0 - s) * xa + s * xb
    }
}

/// Asymptotic label `(lim X - V t, lim V)`, with `x` on `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseLabel {
    pub x: f64,
    pub v: f64,
}

impl PhaseLabel {
    pub fn new(x: f64, v: f64) -> Self {
        Self { x: torus(x), v }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub t: f64,
    pub x: f64,
    pub v: f64,
}

impl PhasePoint {
    pub fn new(t: f64, x: f64, v: f64) -> Self {
        Self { t, x: torus(x), v }
    }
}

/// Fixed-step RK4 for `X' = V, V' = E(t, X)` on `[start, free_after]`, with
/// exact free streaming beyond `free_after`.
#[derive(Debug, Clone, Copy)]
pub struct Flow<'a, F: ?Sized> {
    field: &'a F,
    step: f64,
    start: f64,
    free_after: f64,
}

impl<'a, F: ForceField + ?Sized> Flow<'a, F> {
    pub fn new(field: &'a F, step: f64, start: f64, free_after: f64) -> Self {
        Self {
            field,
            step,
            start,
            free_after,
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t < self.start - 1e-12 * (1.0 + self.start.abs()) {
            Err(Error::TimeOutOfRange { t, t0: self.start })
        } else {
            Ok(())
        }
    }

    /// Phase point at time `t` of the trajectory labelled `label`.
    pub fn flow_from_label(&self, label: PhaseLabel, t: f64) -> Result<PhasePoint> {
        self.check_time(t)?;
        if t >= self.free_after {
            return Ok(PhasePoint::new(t, label.x + label.v * t, label.v));
        }
        let horizon = self.free_after;
        let (x, v) = self.integrate(horizon, t, label.x + label.v * horizon, label.v)?;
        Ok(PhasePoint::new(t, x, v))
    }

    /// Label of the trajectory through `point`.
    pub fn label_from_point(&self, point: PhasePoint) -> Result<PhaseLabel> {
        self.check_time(point.t)?;
        if point.t >= self.free_after {
            return Ok(PhaseLabel::new(point.x - point.v * point.t, point.v));
        }
        let horizon = self.free_after;
        let (x, v) = self.integrate(point.t, horizon, point.x, point.v)?;
        // X - t V is conserved once the field vanishes
        Ok(PhaseLabel::new(x - horizon * v, v))
    }

    /// RK4 from `(t_from, x, v)` to `t_to` in either direction. Positions are
    /// kept unreduced.
    pub fn integrate(&self, t_from: f64, t_to: f64, x: f64, v: f64) -> Result<(f64, f64)> {
        let span = t_to - t_from;
        if span == 0.0 {
            return Ok((x, v));
        }
        let steps = ceil(span.abs() / self.step - 1e-9).max(1.0) as usize;
        let h = span / steps as f64;
        let (mut x, mut v) = (x, v);
        let e = |t: f64, x: f64| self.field.field(t, x);
        for n in 0..steps {
            let t = t_from + n as f64 * h;
            let k1x = v;
            let k1v = e(t, x);
            let k2x = v + 0.5 * h * k1v;
            let k2v = e(t + 0.5 * h, x + 0.5 * h * k1x);
            let k3x = v + 0.5 * h * k2v;
            let k3v = e(t + 0.5 * h, x + 0.5 * h * k2x);
            let k4x = v + h * k3v;
            let k4v = e(t + h, x + h * k3x);
            x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            if !(x.is_finite() && v.is_finite()) {
                return Err(Error::Integration { t: t + h });
            }
        }
        Ok((x, v))
    }
}
