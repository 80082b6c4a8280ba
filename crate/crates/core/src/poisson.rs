//! Split Poisson problem on one time slice.
//!
//! The potential is `U = Ubar + Utilde` where `Ubar = W * rho` is the
//! convolution of the density with the periodic kernel
//! `W(x) = (x^2 - |x|) / 2`, and `Utilde` solves
//! `Utilde'' = exp(Ubar + Utilde) - 1`. Fields are `E = -U'`.
//!
//! `Ubar` is computed spectrally (`Ubar^(k) = rho^(k) / (2 pi k)^2`, zero mode
//! `-rho^(0) / 12`), so `Ubar'' = mean(rho) - rho`. The constant shift of
//! `Utilde` then enforces `int exp(Ubar + Utilde) = 1`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::math::{exp, max_abs, mean, torus, TAU};
use crate::tridiag;

/// Uniform periodic grid `x_j = j / n` on `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpatialGrid {
    n: usize,
}

impl SpatialGrid {
    pub const MIN_NODES: usize = 8;

    pub fn new(n: usize) -> Result<Self> {
        if n < Self::MIN_NODES || !n.is_multiple_of(2) {
            return Err(Error::param("nx", format!("need an even node count >= 8, got {n}")));
        }
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 / self.n as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.node(j))
    }
}

/// `(W(x), W'(x))` with `x` reduced to `[0, 1)`, where `W = (x^2 - x) / 2` and
/// `W' = x - 1/2`. At integers `W'` takes its right limit `-1/2`.
pub fn kernel_eval(x: f64) -> (f64, f64) {
    let y = torus(x);
    (0.5 * (y * y - y), y - 0.5)
}

/// `(Ubar, Ebar)` for one density slice.
pub fn solve_linear(rho: &[f64], grid: SpatialGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = grid.len();
    if rho.len() != n {
        return Err(Error::param("rho", "length does not match the grid"));
    }
    if let Some((node, &value)) = rho.iter().enumerate().find(|(_, r)| !(**r >= 0.0)) {
        return Err(Error::NegativeDensity { node, value });
    }
    let spec = fft::forward(rho);
    let mut u_hat = vec![Complex64::new(0.0, 0.0); n];
    let mut e_hat = vec![Complex64::new(0.0, 0.0); n];
    for (i, r) in spec.iter().enumerate() {
        let k = fft::wavenumber(i, n);
        if k == 0 {
            u_hat[i] = -r / 12.0;
            continue;
        }
        let w = TAU * k as f64;
        u_hat[i] = r / (w * w);
        // Ebar = -d/dx Ubar; the Nyquist mode has no well-defined derivative
        if i != n / 2 {
            e_hat[i] = -Complex64::new(0.0, w) * u_hat[i];
        }
    }
    Ok((fft::inverse_real(&u_hat), fft::inverse_real(&e_hat)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 50,
        }
    }
}

/// Converged Boltzmann correction with its Newton trace.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearSolution {
    pub utilde: Vec<f64>,
    pub etilde: Vec<f64>,
    pub iterations: usize,
    /// Max-norm residual of the discrete equation after each iterate,
    /// starting with the initial guess.
    pub residuals: Vec<f64>,
}

impl NonlinearSolution {
    pub fn residual(&self) -> f64 {
        *self.residuals.last().unwrap_or(&f64::NAN)
    }
}

fn nonlinear_residual(ubar: &[f64], u: &[f64], inv_h2: f64) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|j| {
            let lap = (u[(j + n - 1) % n] - 2.0 * u[j] + u[(j + 1) % n]) * inv_h2;
            lap - exp(ubar[j] + u[j]) + 1.0
        })
        .collect()
}

/// Damped Newton for `Utilde'' = exp(Ubar + Utilde) - 1` with the periodic
/// three-point Laplacian, starting from `Utilde = 0`. The step is halved until
/// the max-norm residual decreases.
pub fn solve_nonlinear(ubar: &[f64], grid: SpatialGrid, opts: NewtonOptions) -> Result<NonlinearSolution> {
    let n = grid.len();
    if ubar.len() != n {
        return Err(Error::param("ubar", "length does not match the grid"));
    }
    if ubar.iter().any(|u| !u.is_finite()) {
        return Err(Error::param("ubar", "non-finite potential"));
    }
    let inv_h2 = (n * n) as f64;
    let mut u = vec![0.0; n];
    let mut f = nonlinear_residual(ubar, &u, inv_h2);
    let mut res = max_abs(&f);
    let mut residuals = vec![res];
    let mut iterations = 0;
    let off = vec![inv_h2; n];
    while res > opts.tol {
        if iterations == opts.max_iterations {
            return Err(Error::SolverDivergence {
                iterations,
                residual: res,
                slice: None,
            });
        }
        let diag: Vec<f64> = (0..n).map(|j| -2.0 * inv_h2 - exp(ubar[j] + u[j])).collect();
        let rhs: Vec<f64> = f.iter().map(|r| -r).collect();
        let step = tridiag::solve_cyclic(&off, &diag, &off, &rhs)?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(a, d)| a + lambda * d).collect();
            let ft = nonlinear_residual(ubar, &trial, inv_h2);
            let rt = max_abs(&ft);
            if rt < res {
                u = trial;
                f = ft;
                res = rt;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-10 {
                return Err(Error::SolverDivergence {
                    iterations,
                    residual: res,
                    slice: None,
                });
            }
        }
        iterations += 1;
        residuals.push(res);
    }
    let etilde = fft::derivative(&u).into_iter().map(|d| -d).collect();
    Ok(NonlinearSolution {
        utilde: u,
        etilde,
        iterations,
        residuals,
    })
}

/// Potentials and fields of one time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSlice {
    pub ubar: Vec<f64>,
    pub utilde: Vec<f64>,
    pub ebar: Vec<f64>,
    pub etilde: Vec<f64>,
}

impl FieldSlice {
    pub fn zero(grid: SpatialGrid) -> Self {
        let z = vec![0.0; grid.len()];
        Self {
            ubar: z.clone(),
            utilde: z.clone(),
            ebar: z.clone(),
            etilde: z,
        }
    }

    pub fn total(&self) -> Vec<f64> {
        self.ebar.iter().zip(&self.etilde).map(|(a, b)| a + b).collect()
    }

    /// `int_T exp(Ubar + Utilde) dx`, which the Boltzmann equation pins to 1.
    pub fn electron_mass(&self) -> f64 {
        mean(
            &self
                .ubar
                .iter()
                .zip(&self.utilde)
                .map(|(a, b)| exp(a + b))
                .collect::<Vec<_>>(),
        )
    }

    /// `max |E' + exp(U) - rho - (1 - m)|` with `m` the mean density: the full
    /// Poisson equation under the zero-mode convention above.
    pub fn poisson_residual(&self, rho: &[f64]) -> f64 {
        let de = fft::derivative(&self.total());
        let m = mean(rho);
        (0..rho.len())
            .map(|j| {
                let boltz = exp(self.ubar[j] + self.utilde[j]);
                (de[j] + boltz - rho[j] - (1.0 - m)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Solve both halves of the split problem for one density slice.
pub fn solve_slice(rho: &[f64], grid: SpatialGrid, opts: NewtonOptions) -> Result<(FieldSlice, NonlinearSolution)> {
    let (ubar, ebar) = solve_linear(rho, grid)?;
    let sol = solve_nonlinear(&ubar, grid, opts)?;
    let slice = FieldSlice {
        ubar,
        utilde: sol.utilde.clone(),
        ebar,
        etilde: sol.etilde.clone(),
    };
    Ok((slice, sol))
}

pub const UTILDE_BOUND: f64 = 3.0;
pub const DUTILDE_BOUND: f64 = 2.0;
pub const D2UTILDE_BOUND: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsReport {
    pub utilde_max: f64,
    pub dutilde_max: f64,
    pub d2utilde_max: f64,
}

impl BoundsReport {
    pub fn utilde_ok(&self) -> bool {
        self.utilde_max <= UTILDE_BOUND
    }

    pub fn dutilde_ok(&self) -> bool {
        self.dutilde_max <= DUTILDE_BOUND
    }

    pub fn d2utilde_ok(&self) -> bool {
        self.d2utilde_max <= D2UTILDE_BOUND
    }

    pub fn pass(&self) -> bool {
        self.utilde_ok() && self.dutilde_ok() && self.d2utilde_ok()
    }

    /// Componentwise maximum, for accumulating over many slices.
    pub fn max(self, other: Self) -> Self {
        Self {
            utilde_max: self.utilde_max.max(other.utilde_max),
            dutilde_max: self.dutilde_max.max(other.dutilde_max),
            d2utilde_max: self.d2utilde_max.max(other.d2utilde_max),
        }
    }
}

pub fn verify_potential_bounds(slice: &FieldSlice) -> BoundsReport {
    BoundsReport {
        utilde_max: max_abs(&slice.utilde),
        dutilde_max: max_abs(&slice.etilde),
        d2utilde_max: max_abs(&fft::second_derivative(&slice.utilde)),
    }
}

/// `||Utilde_1' - Utilde_2'||_inf / ||Ubar_1 - Ubar_2||_inf`.
pub fn stability_ratio(ubar1: &[f64], ubar2: &[f64], grid: SpatialGrid, opts: NewtonOptions) -> Result<f64> {
    let denom = ubar1
        .iter()
        .zip(ubar2)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    if denom == 0.0 {
        return Err(Error::DegenerateRatio);
    }
    let s1 = solve_nonlinear(ubar1, grid, opts)?;
    let s2 = solve_nonlinear(ubar2, grid, opts)?;
    let num = s1
        .etilde
        .iter()
        .zip(&s2.etilde)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(num / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{cos, sin};

    fn grid(n: usize) -> SpatialGrid {
        SpatialGrid::new(n).unwrap()
    }

    #[test]
    fn grid_constraints() {
        assert!(SpatialGrid::new(6).is_err());
        assert!(SpatialGrid::new(9).is_err());
        assert_eq!(grid(8).spacing(), 0.125);
    }

    #[test]
    fn kernel_values() {
        assert_eq!(kernel_eval(0.0), (0.0, -0.5));
        assert_eq!(kernel_eval(0.75).1, 0.25);
        assert_eq!(kernel_eval(1.75), kernel_eval(0.75));
        // Simpson on a smooth integrand: int_0^1 W = -1/12
        let n = 1000;
        let h = 1.0 / n as f64;
        let s: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                let x = (i as f64 * h).min(1.0 - 1e-16);
                w * kernel_eval(x).0
            })
            .sum::<f64>()
            * h
            / 3.0;
        assert!((s + 1.0 / 12.0).abs() < 1e-12);
        // sup |W| = 1/8
        assert_eq!(kernel_eval(0.5).0, -0.125);
    }

    #[test]
    fn constant_density() {
        let g = grid(64);
        let (u, e) = solve_linear(&vec![0.7; 64], g).unwrap();
        assert!(u.iter().all(|x| (x + 0.7 / 12.0).abs() < 1e-14));
        assert!(max_abs(&e) < 1e-14);
    }

    #[test]
    fn single_harmonic_density() {
        let g = grid(128);
        let rho: Vec<f64> = g.nodes().map(|x| 1.0 + cos(TAU * x)).collect();
        let (u, e) = solve_linear(&rho, g).unwrap();
        for (j, x) in g.nodes().enumerate() {
            assert!((u[j] - (-1.0 / 12.0 + cos(TAU * x) / (TAU * TAU))).abs() < 1e-14);
            assert!((e[j] - sin(TAU * x) / TAU).abs() < 1e-14);
        }
        assert!(mean(&e).abs() < 1e-15);
    }

    #[test]
    fn negative_density_rejected() {
        let mut rho = vec![1.0; 16];
        rho[3] = -0.1;
        assert_eq!(
            solve_linear(&rho, grid(16)),
            Err(Error::NegativeDensity { node: 3, value: -0.1 })
        );
    }

    #[test]
    fn constant_potential_balanced_exactly() {
        let g = grid(64);
        let m = 1.0;
        let sol = solve_nonlinear(&vec![-m / 12.0; 64], g, NewtonOptions::default()).unwrap();
        let worst = sol.utilde.iter().fold(0.0_f64, |w, u| w.max((u - m / 12.0).abs()));
        assert!(worst < 1e-10, "{worst}");
        assert!(max_abs(&sol.etilde) < 1e-12);
        let slice = FieldSlice {
            ubar: vec![-m / 12.0; 64],
            utilde: sol.utilde,
            ebar: vec![0.0; 64],
            etilde: sol.etilde,
        };
        let b = verify_potential_bounds(&slice);
        assert!(b.pass());
        assert!((b.utilde_max - 1.0 / 12.0).abs() < 1e-10);
    }

    #[test]
    fn newton_residual_decreases_monotonically() {
        let g = grid(128);
        let rho: Vec<f64> = g.nodes().map(|x| 6.0 + 4.0 * cos(TAU * x) + 2.0 * sin(3.0 * TAU * x)).collect();
        let (ubar, _) = solve_linear(&rho, g).unwrap();
        let sol = solve_nonlinear(&ubar, g, NewtonOptions::default()).unwrap();
        assert!(sol.residual() <= 1e-10);
        assert!(sol.residuals.windows(2).skip(1).all(|w| w[1] < w[0]));
    }

    #[test]
    fn iteration_cap_reports_divergence() {
        let g = grid(32);
        let ubar: Vec<f64> = g.nodes().map(|x| 2.0 * cos(TAU * x)).collect();
        let opts = NewtonOptions { tol: 1e-10, max_iterations: 1 };
        match solve_nonlinear(&ubar, g, opts) {
            Err(Error::SolverDivergence { iterations: 1, residual, .. }) => assert!(residual > 1e-10),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fabricated_violation_flags_fail() {
        let g = grid(16);
        let mut s = FieldSlice::zero(g);
        s.utilde = vec![5.0; 16];
        let b = verify_potential_bounds(&s);
        assert!(!b.utilde_ok() && b.dutilde_ok() && !b.pass());
    }

    #[test]
    fn degenerate_ratio() {
        let g = grid(16);
        let u = vec![0.1; 16];
        assert_eq!(stability_ratio(&u, &u, g, NewtonOptions::default()), Err(Error::DegenerateRatio));
    }
}
