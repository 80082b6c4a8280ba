//! Tridiagonal and cyclic tridiagonal solvers.
//!
//! Row `i` of the cyclic system reads
//! `lower[i] * x[i-1] + diag[i] * x[i] + upper[i] * x[i+1] = rhs[i]`
//! with indices taken modulo `n`, so `lower[0]` and `upper[n-1]` are the
//! corner entries.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Thomas algorithm. `lower[0]` and `upper[n-1]` are ignored.
pub fn solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::param("rhs", "tridiagonal bands must share one length"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut gam = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut bet = diag[0];
    if bet == 0.0 {
        return Err(Error::param("diag", "zero pivot"));
    }
    x[0] = rhs[0] / bet;
    for i in 1..n {
        gam[i] = upper[i - 1] / bet;
        bet = diag[i] - lower[i] * gam[i];
        if bet == 0.0 {
            return Err(Error::param("diag", "zero pivot"));
        }
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / bet;
    }
    for i in (0..n - 1).rev() {
        x[i] -= gam[i + 1] * x[i + 1];
    }
    Ok(x)
}

/// Periodic (cyclic) tridiagonal solve via Sherman-Morrison. Needs `n >= 3`.
pub fn solve_cyclic(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n < 3 {
        return Err(Error::param("n", "cyclic system needs at least 3 unknowns"));
    }
    let alpha = upper[n - 1];
    let beta = lower[0];
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= alpha * beta / gamma;
    let y = solve(lower, &bb, upper, rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve(lower, &bb, upper, &u)?;
    let fact = (y[0] + beta * y[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    Ok(y.iter().zip(&z).map(|(yi, zi)| yi - fact * zi).collect())
}
