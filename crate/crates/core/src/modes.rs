//! Local maxima of an isotropic Gaussian mixture.
//!
//! Component means, plus evenly spaced points on the segment joining every
//! pair of means, seed a Gaussian mean-shift iteration
//!
//! ```text
//! y ← Σᵢ rᵢ(y) μᵢ/σᵢ² / Σᵢ rᵢ(y)/σᵢ²,   rᵢ(y) = πᵢ N(y; μᵢ, σᵢ² I)
//! ```
//!
//! which increases the density monotonically. Mean shift slows down to a
//! linear rate near flat maxima, so whenever the Hessian of log p is
//! negative definite a Newton step is also tried and kept if it reaches a
//! higher density than the mean-shift step.
//!
//! Means alone are not enough: two overlapping broad components can raise a
//! maximum whose basin of attraction contains no mean at all.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PdnError, Result};
use crate::mixture::MixtureParams;

/// A reported mode has ‖∇ log p‖ below this.
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSearchConfig {
    pub max_iterations: usize,
    /// Step-norm convergence tolerance, normalized units.
    pub tolerance: f64,
    /// Converged points closer than this are one mode.
    pub merge_radius: f64,
    /// Modes below this fraction of the highest density are dropped.
    pub min_relative_density: f64,
    /// Interior seeds on the segment between each pair of means.
    pub pair_starts: usize,
}

impl Default for ModeSearchConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-8,
            merge_radius: 1e-3,
            min_relative_density: 1e-4,
            pair_starts: 7,
        }
    }
}

impl ModeSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0
            || !(self.tolerance > 0.0)
            || !(self.merge_radius > 0.0)
            || !(self.min_relative_density > 0.0)
        {
            return Err(PdnError::InvalidConfig(format!(
                "mode search settings must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub point: Vec<f64>,
    pub density: f64,
    pub log_density: f64,
    /// Index of the seed the search started from: component means first,
    /// then the pair seeds in (i, j, step) order.
    pub start: usize,
    pub iterations: usize,
    pub converged: bool,
}

fn mean_shift_step(params: &MixtureParams, y: &[f64]) -> Vec<f64> {
    let (gamma, _) = params.responsibilities(y);
    let mut numer = vec![0.0; y.len()];
    let mut denom = 0.0;
    for ((g, mu), s) in gamma.iter().zip(&params.mu).zip(&params.sigma) {
        let w = g / (s * s);
        denom += w;
        for (n, m) in numer.iter_mut().zip(mu) {
            *n += w * m;
        }
    }
    numer.iter().map(|n| n / denom).collect()
}

fn newton_step(params: &MixtureParams, y: &[f64], grad: &[f64]) -> Option<Vec<f64>> {
    let d = y.len();
    let h = params.hessian_log_density(y);
    let neg_h = DMatrix::from_row_slice(d, d, &h).map(|v| -v);
    let chol = neg_h.cholesky()?;
    let delta = chol.solve(&DVector::from_column_slice(grad));
    Some(y.iter().zip(delta.iter()).map(|(a, b)| a + b).collect())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Hill-climbs from `start` and reports where it stopped.
pub fn climb(
    params: &MixtureParams,
    start: &[f64],
    config: &ModeSearchConfig,
) -> (Vec<f64>, usize, bool) {
    let mut y = start.to_vec();
    let mut log_p = params.log_density(&y);
    for iteration in 1..=config.max_iterations {
        let grad = params.grad_log_density(&y);
        let mut next = mean_shift_step(params, &y);
        let mut next_log_p = params.log_density(&next);
        if let Some(newton) = newton_step(params, &y, &grad) {
            let newton_log_p = params.log_density(&newton);
            if newton_log_p >= next_log_p {
                next = newton;
                next_log_p = newton_log_p;
            }
        }
        let step = distance(&next, &y);
        if next_log_p >= log_p {
            y = next;
            log_p = next_log_p;
        }
        if step < config.tolerance {
            let converged = norm(&params.grad_log_density(&y)) < GRADIENT_TOLERANCE;
            return (y, iteration, converged);
        }
    }
    let converged = norm(&params.grad_log_density(&y)) < GRADIENT_TOLERANCE;
    (y, config.max_iterations, converged)
}

/// Modes sorted by descending density, merged and thresholded.
pub fn find_modes(params: &MixtureParams, config: &ModeSearchConfig) -> Result<Vec<Mode>> {
    config.validate()?;
    params.validate(0.0)?;
    let mut found: Vec<Mode> = seeds(params, config.pair_starts)
        .par_iter()
        .enumerate()
        .map(|(start, seed)| {
            let (point, iterations, converged) = climb(params, seed, config);
            let log_density = params.log_density(&point);
            Mode {
                density: log_density.exp(),
                log_density,
                point,
                start,
                iterations,
                converged,
            }
        })
        .collect();

    // converged first, then by density, then lexicographic for determinism
    found.sort_by(|a, b| {
        b.converged
            .cmp(&a.converged)
            .then(b.log_density.total_cmp(&a.log_density))
            .then_with(|| lexicographic(&a.point, &b.point))
    });
    let mut kept: Vec<Mode> = Vec::new();
    for mode in found {
        if kept
            .iter()
            .all(|k| distance(&k.point, &mode.point) >= config.merge_radius)
        {
            kept.push(mode);
        }
    }
    let best = kept
        .iter()
        .map(|m| m.log_density)
        .fold(f64::NEG_INFINITY, f64::max);
    let floor = best + config.min_relative_density.ln();
    kept.retain(|m| m.log_density >= floor);
    kept.sort_by(|a, b| {
        b.log_density
            .total_cmp(&a.log_density)
            .then_with(|| lexicographic(&a.point, &b.point))
    });
    Ok(kept)
}

fn seeds(params: &MixtureParams, pair_starts: usize) -> Vec<Vec<f64>> {
    let mut out = params.mu.clone();
    let m = params.mu.len();
    for i in 0..m {
        for j in i + 1..m {
            for k in 1..=pair_starts {
                let t = k as f64 / (pair_starts + 1) as f64;
                out.push(
                    params.mu[i]
                        .iter()
                        .zip(&params.mu[j])
                        .map(|(a, b)| a + t * (b - a))
                        .collect(),
                );
            }
        }
    }
    out
}

pub(crate) fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}
