//! Seeded audit of the nonlinear-Poisson stability estimate
//! `||dUtilde_1 - dUtilde_2||_inf <= e^6 ||Ubar_1 - Ubar_2||_inf`.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use vpme_core::datum::E6;
use vpme_core::poisson::{solve_linear, stability_ratio};
use vpme_core::{NewtonOptions, Result, SpatialGrid};

/// Harmonics in each random density.
const MODES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityAudit {
    pub seed: u64,
    pub pairs: usize,
    pub bound: f64,
    pub max_ratio: f64,
    pub violations: usize,
    /// Ratio for `Ubar_1 = 0`, `Ubar_2 = eps cos 2 pi x`.
    pub linearized_ratio: f64,
    /// `2 pi / (1 + 4 pi^2)`.
    pub linearized_limit: f64,
}

impl StabilityAudit {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }

    pub fn linearized_error(&self) -> f64 {
        (self.linearized_ratio - self.linearized_limit).abs() / self.linearized_limit
    }
}

/// Smooth positive density with `||rho||_inf <= 10`: a mean in `[0.05, 5]`
/// times `1 + sum` of four random harmonics with total amplitude below one.
pub fn random_density(rng: &mut impl Rng, grid: SpatialGrid) -> Vec<f64> {
    let m: f64 = rng.random_range(0.05..5.0);
    let raw: Vec<(f64, f64)> = (0..MODES)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let total: f64 = raw.iter().map(|(a, b)| a.abs() + b.abs()).sum::<f64>().max(1e-12);
    let scale = rng.random_range(0.0..0.99) / total;
    grid.nodes()
        .map(|x| {
            let wave: f64 = raw
                .iter()
                .enumerate()
                .map(|(k, (a, b))| {
                    let w = TAU * (k + 1) as f64 * x;
                    a * w.cos() + b * w.sin()
                })
                .sum();
            m * (1.0 + scale * wave)
        })
        .collect()
}

pub fn stability_audit(seed: u64, pairs: usize, grid: SpatialGrid, newton: NewtonOptions) -> Result<StabilityAudit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..pairs {
        let (u1, _) = solve_linear(&random_density(&mut rng, grid), grid)?;
        let (u2, _) = solve_linear(&random_density(&mut rng, grid), grid)?;
        let q = stability_ratio(&u1, &u2, grid, newton)?;
        if q > E6 {
            violations += 1;
        }
        max_ratio = max_ratio.max(q);
    }
    let eps = 1e-6;
    let zero = vec![0.0; grid.len()];
    let wave: Vec<f64> = grid.nodes().map(|x| eps * (TAU * x).cos()).collect();
    let linearized_ratio = stability_ratio(&zero, &wave, grid, newton)?;
    Ok(StabilityAudit {
        seed,
        pairs,
        bound: E6,
        max_ratio,
        violations,
        linearized_ratio,
        linearized_limit: TAU / (1.0 + 4.0 * PI * PI),
    })
}
