//! Asymptotic data `f*(x, v)` and the admissible class they must belong to.
//!
//! The class is parametrized by a velocity-analyticity rate `a`, a bound `a1`
//! on `sum_k k^-(1+alpha)`, a velocity-tail amplitude `a2` and a spatial
//! Hölder exponent `alpha`. Membership requires
//!
//! * `f* >= 0`,
//! * `|f*(x, v)| <= a2 / (1 + v^4)`,
//! * `|f^*(k, eta)| <= e^-6 / (1 + |k|^alpha) * e^(-a |eta|)` with the transform
//!   taken against `exp(-2 pi i k x) exp(-i eta v)`.
//!
//! The torus is identified with `[0, 1)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math::{cos, exp, gaussian, ln, powf, sin, sqrt, torus, TAU};

/// `e^6`, the recurring constant of the class and stability bounds.
pub const E6: f64 = 403.428_793_492_735_1;

/// Largest wavenumber checked on the Fourier-envelope lattice.
pub const ENVELOPE_K_MAX: i64 = 64;
/// Number of `eta` intervals on the Fourier-envelope lattice.
pub const ENVELOPE_ETA_STEPS: usize = 512;

const SERIES_TERMS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassParameters {
    pub a: f64,
    pub a1: f64,
    pub a2: f64,
    pub alpha: f64,
    pub t0: f64,
}

impl ClassParameters {
    pub fn new(a: f64, a1: f64, a2: f64, alpha: f64, t0: f64) -> Result<Self> {
        for (name, value) in [("a", a), ("a1", a1), ("a2", a2)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {value}")));
            }
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param("alpha", format!("must lie in (0, 1), got {alpha}")));
        }
        if !(t0.is_finite() && t0 >= 0.0) {
            return Err(Error::param("t0", format!("must be finite and >= 0, got {t0}")));
        }
        Ok(Self { a, a1, a2, alpha, t0 })
    }

    /// Smallest admissible start time, `max(0, log(8 a1 a2) / a)`.
    pub fn min_t0(&self) -> f64 {
        (ln(8.0 * self.a1 * self.a2) / self.a).max(0.0)
    }

    pub fn t0_admissible(&self) -> bool {
        self.t0 >= self.min_t0()
    }

    /// Smallest `a` with `a^2 >= (200 a2 + 3)(e^6 + 1)`.
    pub fn regime_threshold(a2: f64) -> f64 {
        sqrt((200.0 * a2 + 3.0) * (E6 + 1.0))
    }

    pub fn theorem_regime(&self) -> bool {
        self.a * self.a >= (200.0 * self.a2 + 3.0) * (E6 + 1.0)
    }

    /// Rigorous bracket `(lower, upper)` of `sum_{k>=1} k^-(1+alpha)`: a partial
    /// sum plus integral bounds on the tail.
    pub fn series_bounds(alpha: f64) -> (f64, f64) {
        let s = 1.0 + alpha;
        // smallest terms first
        let partial: f64 = (1..=SERIES_TERMS).rev().map(|k| powf(k as f64, -s)).sum();
        let k = SERIES_TERMS as f64;
        let upper = partial + powf(k, -alpha) / alpha;
        let lower = partial + powf(k + 1.0, -alpha) / alpha;
        (lower, upper)
    }

    pub fn series_ok(&self) -> bool {
        Self::series_bounds(self.alpha).1 <= self.a1
    }

    /// Weighted-norm ceiling `16 a1` on every iterate and on the limit field.
    pub fn field_envelope(&self) -> f64 {
        16.0 * self.a1
    }

    /// Spatial Lipschitz ceiling `24 a2 + 3` of every iterate.
    pub fn lipschitz_bound(&self) -> f64 {
        24.0 * self.a2 + 3.0
    }

    /// Proven contraction factor `(e^6 + 1) 88 a2 / (a^2 - (24 a2 + 3))`, when
    /// the denominator is positive.
    pub fn contraction_bound(&self) -> Option<f64> {
        let denom = self.a * self.a - self.lipschitz_bound();
        (denom > 0.0).then(|| (E6 + 1.0) * 88.0 * self.a2 / denom)
    }

    /// Horizon `T` at which the neglected impulse `(16 a1 / a) e^(-a T)` drops
    /// to `tol`; never earlier than `t0`.
    pub fn horizon(&self, tol: f64) -> f64 {
        (ln(16.0 * self.a1 / (self.a * tol)) / self.a).max(self.t0)
    }
}

/// Gaussian in velocity times a finite cosine series in space:
/// `f*(x, v) = c g_sigma(v) sum_k m_k cos(2 pi k x)` with symmetric real
/// coefficients (mode `k` and `-k` are listed separately).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModes {
    pub amplitude: f64,
    pub sigma: f64,
    pub modes: Vec<(i64, f64)>,
}

impl GaussianModes {
    fn coefficient(&self, k: i64) -> f64 {
        self.modes.iter().filter(|(m, _)| *m == k).map(|(_, c)| c).sum()
    }

    fn spatial_factor(&self, x: f64) -> f64 {
        self.modes
            .iter()
            .map(|&(k, c)| c * cos(TAU * k as f64 * x))
            .sum()
    }

    fn spatial_extrema(&self) -> (f64, f64) {
        let n = 4096;
        (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), j| {
            let s = self.spatial_factor(j as f64 / n as f64);
            (lo.min(s), hi.max(s))
        })
    }
}

/// `sup_v g_sigma(v) (1 + v^4)` in closed form.
pub fn gaussian_tail_peak(sigma: f64) -> f64 {
    // stationary points of (1 + s^2) e^(-s / 2 sigma^2) in s = v^2
    let at_zero = gaussian(0.0, sigma);
    let s2 = sigma * sigma;
    let disc = 4.0 * s2 * s2 - 1.0;
    if disc < 0.0 {
        return at_zero;
    }
    let s = 2.0 * s2 + sqrt(disc);
    let v = sqrt(s);
    at_zero.max(gaussian(v, sigma) * (1.0 + s * s))
}

/// Samples of `f*` on a uniform periodic `x` grid (`x_i = i / nx`) times a
/// sorted `v` grid, evaluated bilinearly.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedGrid {
    nx: usize,
    vs: Vec<f64>,
    /// row-major, `values[iv * nx + ix]`
    values: Vec<f64>,
}

impl TabulatedGrid {
    pub fn new(nx: usize, vs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nx < 2 {
            return Err(Error::param("x", "need at least two x nodes"));
        }
        if vs.len() < 2 || vs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("v", "v nodes must be strictly increasing (>= 2 nodes)"));
        }
        if values.len() != nx * vs.len() {
            return Err(Error::param("f", "value count does not match the x-v grid"));
        }
        if values.iter().any(|f| !f.is_finite()) {
            return Err(Error::param("f", "non-finite sample"));
        }
        Ok(Self { nx, vs, values })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn velocities(&self) -> &[f64] {
        &self.vs
    }

    pub fn value(&self, ix: usize, iv: usize) -> f64 {
        self.values[iv * self.nx + ix]
    }

    pub fn eval(&self, x: f64, v: f64) -> Result<f64> {
        let (v0, v1) = (self.vs[0], self.vs[self.vs.len() - 1]);
        if !(v >= v0 && v <= v1) {
            return Err(Error::OutOfRange { x, v });
        }
        let iv = self.vs.partition_point(|&w| w <= v).clamp(1, self.vs.len() - 1) - 1;
        let sv = (v - self.vs[iv]) / (self.vs[iv + 1] - self.vs[iv]);
        let xs = torus(x) * self.nx as f64;
        let ix = (xs as usize).min(self.nx - 1);
        let sx = xs - ix as f64;
        let ix1 = (ix + 1) % self.nx;
        let row = |iv: usize| (1.0 - sx) * self.value(ix, iv) + sx * self.value(ix1, iv);
        Ok((1.0 - sv) * row(iv) + sv * row(iv + 1))
    }

    fn column_mean(&self, iv: usize) -> f64 {
        (0..self.nx).map(|ix| self.value(ix, iv)).sum::<f64>() / self.nx as f64
    }

    fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.vs.len();
        let mut w = vec![0.0; n];
        for i in 0..n - 1 {
            let h = 0.5 * (self.vs[i + 1] - self.vs[i]);
            w[i] += h;
            w[i + 1] += h;
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    GaussianCosine(GaussianModes),
    Tabulated(TabulatedGrid),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticDatum {
    pub family: Family,
    pub class: ClassParameters,
}

impl AsymptoticDatum {
    /// `f*(x, v) = c g_sigma(v) (1 + cos 2 pi x)`.
    pub fn gaussian_cosine(amplitude: f64, sigma: f64, class: ClassParameters) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::param("amplitude", format!("must be positive, got {amplitude}")));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
        }
        Ok(Self {
            family: Family::GaussianCosine(GaussianModes {
                amplitude,
                sigma,
                modes: vec![(0, 1.0), (1, 0.5), (-1, 0.5)],
            }),
            class,
        })
    }

    pub fn tabulated(grid: TabulatedGrid, class: ClassParameters) -> Self {
        Self {
            family: Family::Tabulated(grid),
            class,
        }
    }

    /// Largest amplitude `c` for which the Gaussian-cosine datum of width
    /// `sigma` satisfies both the Fourier envelope and the velocity tail bound.
    pub fn max_gaussian_cosine_amplitude(sigma: f64, class: &ClassParameters) -> f64 {
        let a = class.a;
        // |f^(k, eta)| = (c/2) e^(-sigma^2 eta^2 / 2) for k = +-1, c e^(..) for k = 0;
        // both give c <= e^(-6 - a^2 / (2 sigma^2)).
        let envelope = exp(-6.0 - a * a / (2.0 * sigma * sigma));
        let tail = class.a2 / (2.0 * gaussian_tail_peak(sigma));
        envelope.min(tail)
    }

    pub fn eval(&self, x: f64, v: f64) -> Result<f64> {
        match &self.family {
            Family::GaussianCosine(g) => {
                Ok(g.amplitude * gaussian(v, g.sigma) * g.spatial_factor(torus(x)))
            }
            Family::Tabulated(t) => t.eval(x, v),
        }
    }

    /// `f^*(k, eta) = int int f* e^(-2 pi i k x) e^(-i eta v) dx dv`.
    pub fn fourier(&self, k: i64, eta: f64) -> Complex64 {
        match &self.family {
            Family::GaussianCosine(g) => {
                let c = g.amplitude * g.coefficient(k);
                Complex64::new(c * exp(-0.5 * g.sigma * g.sigma * eta * eta), 0.0)
            }
            Family::Tabulated(t) => {
                let w = t.trapezoid_weights();
                let modes = tabulated_x_modes(t, k, k);
                fourier_from_modes(t, &w, &modes[0], eta)
            }
        }
    }

    /// Homogeneous limit `h(v) = int_T f*(x, v) dx`.
    pub fn h_limit(&self, v: f64) -> Result<f64> {
        match &self.family {
            Family::GaussianCosine(g) => Ok(g.amplitude * g.coefficient(0) * gaussian(v, g.sigma)),
            Family::Tabulated(t) => {
                let n = t.nx;
                let mut acc = 0.0;
                for ix in 0..n {
                    acc += t.eval(ix as f64 / n as f64, v)?;
                }
                Ok(acc / n as f64)
            }
        }
    }

    /// Total phase-space mass `int int f*`.
    pub fn mass(&self) -> f64 {
        match &self.family {
            Family::GaussianCosine(g) => g.amplitude * g.coefficient(0),
            Family::Tabulated(t) => {
                let w = t.trapezoid_weights();
                (0..t.vs.len()).map(|iv| w[iv] * t.column_mean(iv)).sum()
            }
        }
    }

    /// Velocity beyond which the datum carries less than `tol` of mass, using
    /// the family's own decay (not the class tail bound).
    pub fn velocity_extent(&self, tol: f64) -> f64 {
        match &self.family {
            Family::GaussianCosine(g) => {
                let scale: f64 = g.amplitude * g.modes.iter().map(|(_, c)| c.abs()).sum::<f64>();
                // two-sided Gaussian tail: erfc(z) <= e^(-z^2)
                let z2 = ln(scale / tol).max(0.5);
                g.sigma * sqrt(2.0 * z2)
            }
            Family::Tabulated(t) => t.vs[0].abs().min(t.vs[t.vs.len() - 1].abs()),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let class = &self.class;
        let (min_value, tail_sup) = match &self.family {
            Family::GaussianCosine(g) => {
                let (lo, hi) = g.spatial_extrema();
                let min_value = g.amplitude * lo.min(0.0) * gaussian(0.0, g.sigma);
                let peak = lo.abs().max(hi.abs());
                (min_value, g.amplitude * peak * gaussian_tail_peak(g.sigma))
            }
            Family::Tabulated(t) => {
                let mut lo = f64::INFINITY;
                let mut sup = 0.0_f64;
                for (iv, &v) in t.vs.iter().enumerate() {
                    for ix in 0..t.nx {
                        let f = t.value(ix, iv);
                        lo = lo.min(f);
                        sup = sup.max(f.abs() * (1.0 + v * v * v * v));
                    }
                }
                (lo, sup)
            }
        };

        let fourier_ratio_lattice = self.envelope_ratio_on_lattice();
        let fourier_ratio_analytic = match &self.family {
            Family::GaussianCosine(g) => {
                let shift = 6.0 + class.a * class.a / (2.0 * g.sigma * g.sigma);
                let worst = g
                    .modes
                    .iter()
                    .map(|&(k, _)| {
                        let c = g.amplitude * g.coefficient(k).abs();
                        c * (1.0 + powf(k.unsigned_abs() as f64, class.alpha)) * exp(shift)
                    })
                    .fold(0.0_f64, f64::max);
                Some(worst)
            }
            Family::Tabulated(_) => None,
        };
        let fourier_envelope = fourier_ratio_lattice <= 1.0
            && fourier_ratio_analytic.is_none_or(|r| r <= 1.0);

        let (_, series_upper) = ClassParameters::series_bounds(class.alpha);
        ValidationReport {
            nonnegative: min_value >= 0.0,
            min_value,
            tail_bound: tail_sup <= class.a2,
            tail_sup,
            fourier_envelope,
            fourier_ratio_lattice,
            fourier_ratio_analytic,
            series_ok: series_upper <= class.a1,
            series_upper,
            t0_admissible: class.t0_admissible(),
            min_t0: class.min_t0(),
            theorem_regime: class.theorem_regime(),
            regime_threshold: ClassParameters::regime_threshold(class.a2),
        }
    }

    /// `max |f^(k, eta)| / envelope(k, eta)` over `|k| <= 64` and a uniform
    /// `eta` grid out to where `e^(-a eta) < 1e-14`. Real data satisfy
    /// `|f^(k, -eta)| = |f^(-k, eta)|`, so `eta >= 0` suffices.
    fn envelope_ratio_on_lattice(&self) -> f64 {
        let a = self.class.a;
        let alpha = self.class.alpha;
        let eta_max = 14.0 * ln(10.0) / a;
        let etas = (0..=ENVELOPE_ETA_STEPS).map(|j| eta_max * j as f64 / ENVELOPE_ETA_STEPS as f64);
        let envelope =
            |k: i64, eta: f64| exp(-6.0 - a * eta) / (1.0 + powf(k.unsigned_abs() as f64, alpha));
        match &self.family {
            Family::GaussianCosine(_) => {
                let mut worst = 0.0_f64;
                for k in -ENVELOPE_K_MAX..=ENVELOPE_K_MAX {
                    for eta in etas.clone() {
                        worst = worst.max(self.fourier(k, eta).norm() / envelope(k, eta));
                    }
                }
                worst
            }
            Family::Tabulated(t) => {
                let w = t.trapezoid_weights();
                let modes = tabulated_x_modes(t, -ENVELOPE_K_MAX, ENVELOPE_K_MAX);
                let mut worst = 0.0_f64;
                for (i, m) in modes.iter().enumerate() {
                    let k = i as i64 - ENVELOPE_K_MAX;
                    for eta in etas.clone() {
                        worst = worst.max(fourier_from_modes(t, &w, m, eta).norm() / envelope(k, eta));
                    }
                }
                worst
            }
        }
    }
}

/// Per-`v` spatial Fourier coefficients `int f*(x, v_j) e^(-2 pi i k x) dx`
/// (periodic trapezoid) for `k` in `k_lo..=k_hi`.
fn tabulated_x_modes(t: &TabulatedGrid, k_lo: i64, k_hi: i64) -> Vec<Vec<Complex64>> {
    let n = t.nx;
    (k_lo..=k_hi)
        .map(|k| {
            (0..t.vs.len())
                .map(|iv| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for ix in 0..n {
                        let th = -TAU * k as f64 * ix as f64 / n as f64;
                        acc += Complex64::new(cos(th), sin(th)) * t.value(ix, iv);
                    }
                    acc / n as f64
                })
                .collect()
        })
        .collect()
}

fn fourier_from_modes(t: &TabulatedGrid, w: &[f64], modes: &[Complex64], eta: f64) -> Complex64 {
    t.vs.iter()
        .zip(w)
        .zip(modes)
        .fold(Complex64::new(0.0, 0.0), |acc, ((&v, &wv), &m)| {
            acc + m * Complex64::new(cos(eta * v), -sin(eta * v)) * wv
        })
}

/// Outcome of a class-membership check. Violations are reported, never thrown.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub nonnegative: bool,
    pub min_value: f64,
    pub tail_bound: bool,
    /// `sup |f*| (1 + v^4)`, to compare with `a2`.
    pub tail_sup: f64,
    pub fourier_envelope: bool,
    pub fourier_ratio_lattice: f64,
    /// Worst ratio over all `(k, eta)`, for closed-form families.
    pub fourier_ratio_analytic: Option<f64>,
    pub series_ok: bool,
    pub series_upper: f64,
    pub t0_admissible: bool,
    pub min_t0: f64,
    pub theorem_regime: bool,
    /// Smallest `a` that puts `a2` in the theorem regime.
    pub regime_threshold: f64,
}

impl ValidationReport {
    /// `f*` belongs to the class (positivity, tail, envelope, series).
    pub fn is_member(&self) -> bool {
        self.nonnegative && self.tail_bound && self.fourier_envelope && self.series_ok
    }

    /// All hypotheses of the existence theorem hold.
    pub fn theorem_ready(&self) -> bool {
        self.is_member() && self.t0_admissible && self.theorem_regime
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.nonnegative {
            out.push(format!("f* takes negative values (min {:e})", self.min_value));
        }
        if !self.tail_bound {
            out.push(format!("sup |f*|(1+v^4) = {:e} exceeds a2", self.tail_sup));
        }
        if !self.fourier_envelope {
            let worst = self
                .fourier_ratio_analytic
                .unwrap_or(0.0)
                .max(self.fourier_ratio_lattice);
            out.push(format!("Fourier envelope exceeded by a factor {worst:e}"));
        }
        if !self.series_ok {
            out.push(format!("a1 below the series bound {:.6}", self.series_upper));
        }
        if !self.t0_admissible {
            out.push(format!("t0 below the admissible minimum {:.6}", self.min_t0));
        }
        if !self.theorem_regime {
            out.push(format!("a below the regime threshold {:.6}", self.regime_threshold));
        }
        out
    }
}
