//! Periodic cubic spline on the uniform grid `x_j = j / n`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::math::torus;
use crate::tridiag;

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSpline {
    values: Vec<f64>,
    /// second derivatives at the nodes
    curvature: Vec<f64>,
}

impl PeriodicSpline {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if values.iter().all(|&v| v == 0.0) {
            return Ok(Self {
                curvature: vec![0.0; n],
                values,
            });
        }
        let scale = 6.0 * (n * n) as f64;
        let rhs: Vec<f64> = (0..n)
            .map(|j| scale * (values[(j + n - 1) % n] - 2.0 * values[j] + values[(j + 1) % n]))
            .collect();
        let curvature = tridiag::solve_cyclic(&vec![1.0; n], &vec![4.0; n], &vec![1.0; n], &rhs)?;
        Ok(Self { values, curvature })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let xs = torus(x) * n as f64;
        let j = (xs as usize).min(n - 1);
        let s = xs - j as f64;
        let r = 1.0 - s;
        let j1 = if j + 1 == n { 0 } else { j + 1 };
        let h2 = 1.0 / (n * n) as f64;
        r * self.values[j]
            + s * self.values[j1]
            + h2 / 6.0 * ((r * r * r - r) * self.curvature[j] + (s * s * s - s) * self.curvature[j1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{sin, TAU};

    #[test]
    fn reproduces_nodes_and_wraps() {
        let n = 32;
        let vals: Vec<f64> = (0..n).map(|j| sin(TAU * j as f64 / n as f64) + 0.3).collect();
        let s = PeriodicSpline::new(vals.clone()).unwrap();
        for (j, v) in vals.iter().enumerate() {
            assert!((s.eval(j as f64 / n as f64) - v).abs() < 1e-15);
        }
        assert_eq!(s.eval(1.0), s.eval(0.0));
    }

    #[test]
    fn midcell_accuracy_on_sine() {
        // error bound (5/384) h^4 max|f''''| ~ 4.7e-9 at n = 256
        let n = 256;
        let vals: Vec<f64> = (0..n).map(|j| sin(TAU * j as f64 / n as f64)).collect();
        let s = PeriodicSpline::new(vals).unwrap();
        let err = (0..n)
            .map(|j| {
                let x = (j as f64 + 0.5) / n as f64;
                (s.eval(x) - sin(TAU * x)).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }
}
