//! Isotropic Gaussian mixtures: p(y) = Σᵢ πᵢ N(y; μᵢ, σᵢ² I).

use std::f64::consts::PI;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{PdnError, Result};

/// Tolerance on Σπ = 1.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

/// Numerically stable log(Σ exp(v)).
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    /// Mixing coefficients, one per component.
    pub pi: Vec<f64>,
    /// Component means, `m` rows of `d` values.
    pub mu: Vec<Vec<f64>>,
    /// Isotropic standard deviations, one per component.
    pub sigma: Vec<f64>,
}

impl MixtureParams {
    pub fn new(pi: Vec<f64>, mu: Vec<Vec<f64>>, sigma: Vec<f64>) -> Result<Self> {
        let params = Self { pi, mu, sigma };
        params.validate(0.0)?;
        Ok(params)
    }

    pub fn components(&self) -> usize {
        self.pi.len()
    }

    pub fn dim(&self) -> usize {
        self.mu.first().map_or(0, Vec::len)
    }

    /// Checks shapes, Σπ = 1, π ≥ 0 and σ ≥ `sigma_floor`.
    pub fn validate(&self, sigma_floor: f64) -> Result<()> {
        let m = self.pi.len();
        if m == 0 || self.mu.len() != m || self.sigma.len() != m {
            return Err(PdnError::InvalidInput(format!(
                "mixture shape mismatch: {} weights, {} means, {} deviations",
                m,
                self.mu.len(),
                self.sigma.len()
            )));
        }
        let d = self.dim();
        if d == 0 || self.mu.iter().any(|row| row.len() != d) {
            return Err(PdnError::InvalidInput("ragged mixture means".into()));
        }
        let finite = self
            .pi
            .iter()
            .chain(&self.sigma)
            .chain(self.mu.iter().flatten());
        if finite.clone().any(|v| !v.is_finite()) {
            return Err(PdnError::InvalidInput(
                "non-finite mixture parameter".into(),
            ));
        }
        let total: f64 = self.pi.iter().sum();
        if self.pi.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(PdnError::InvalidInput(format!(
                "mixing coefficients must be non-negative and sum to 1 (sum {total})"
            )));
        }
        if self.sigma.iter().any(|&s| !(s > 0.0) || s < sigma_floor) {
            return Err(PdnError::InvalidInput(format!(
                "deviations must be positive and at least {sigma_floor}"
            )));
        }
        Ok(())
    }

    /// log πᵢ + log N(y; μᵢ, σᵢ² I) for every component.
    pub fn log_joint(&self, y: &[f64]) -> Vec<f64> {
        let d = y.len() as f64;
        self.pi
            .iter()
            .zip(&self.mu)
            .zip(&self.sigma)
            .map(|((&p, mu), &s)| {
                let sq: f64 = y.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
                p.ln() - 0.5 * d * (2.0 * PI * s * s).ln() - 0.5 * sq / (s * s)
            })
            .collect()
    }

    pub fn log_density(&self, y: &[f64]) -> f64 {
        log_sum_exp(&self.log_joint(y))
    }

    pub fn density(&self, y: &[f64]) -> f64 {
        self.log_density(y).exp()
    }

    /// Negative log-likelihood of a single target.
    pub fn nll(&self, y: &[f64]) -> f64 {
        -self.log_density(y)
    }

    /// Posterior component probabilities γᵢ(y) and log p(y).
    pub fn responsibilities(&self, y: &[f64]) -> (Vec<f64>, f64) {
        let mut joint = self.log_joint(y);
        let log_p = log_sum_exp(&joint);
        for v in joint.iter_mut() {
            *v = (*v - log_p).exp();
        }
        (joint, log_p)
    }

    /// ∇_y log p(y) = Σᵢ γᵢ (μᵢ − y) / σᵢ².
    pub fn grad_log_density(&self, y: &[f64]) -> Vec<f64> {
        let (gamma, _) = self.responsibilities(y);
        let mut grad = vec![0.0; y.len()];
        for ((g, mu), s) in gamma.iter().zip(&self.mu).zip(&self.sigma) {
            let w = g / (s * s);
            for ((acc, m), v) in grad.iter_mut().zip(mu).zip(y) {
                *acc += w * (m - v);
            }
        }
        grad
    }

    /// Hessian of log p(y), row-major d×d.
    pub fn hessian_log_density(&self, y: &[f64]) -> Vec<f64> {
        let d = y.len();
        let (gamma, _) = self.responsibilities(y);
        let grad = self.grad_log_density(y);
        let mut h = vec![0.0; d * d];
        for ((g, mu), s) in gamma.iter().zip(&self.mu).zip(&self.sigma) {
            let s2 = s * s;
            let diff: Vec<f64> = mu.iter().zip(y).map(|(m, v)| (m - v) / s2).collect();
            for i in 0..d {
                for j in 0..d {
                    h[i * d + j] += g * diff[i] * diff[j];
                }
                h[i * d + i] -= g / s2;
            }
        }
        for i in 0..d {
            for j in 0..d {
                h[i * d + j] -= grad[i] * grad[j];
            }
        }
        h
    }

    /// Ancestral draws: a component from π, then an isotropic Gaussian.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(PdnError::InvalidArgument(
                "sample count must be >= 1".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let picker = WeightedIndex::new(&self.pi)
            .map_err(|e| PdnError::InvalidInput(format!("bad mixing coefficients: {e}")))?;
        Ok((0..n)
            .map(|_| {
                let k = picker.sample(rng);
                self.mu[k]
                    .iter()
                    .map(|m| {
                        let z: f64 = StandardNormal.sample(rng);
                        m + self.sigma[k] * z
                    })
                    .collect()
            })
            .collect())
    }

    /// Copy with components reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            pi: order.iter().map(|&i| self.pi[i]).collect(),
            mu: order.iter().map(|&i| self.mu[i].clone()).collect(),
            sigma: order.iter().map(|&i| self.sigma[i]).collect(),
        }
    }
}

/// Gradient of the single-target NLL with respect to the mixture
/// parameters, as produced by the head nonlinearities.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureGradient {
    pub nll: f64,
    /// ∂L/∂(mixing logit ᵢ) = πᵢ − γᵢ.
    pub logits: Vec<f64>,
    /// ∂L/∂μᵢⱼ.
    pub mu: Vec<Vec<f64>>,
    /// ∂L/∂σᵢ.
    pub sigma: Vec<f64>,
}

impl MixtureParams {
    pub fn nll_gradient(&self, y: &[f64]) -> MixtureGradient {
        let d = y.len() as f64;
        let (gamma, log_p) = self.responsibilities(y);
        let mut mu_grad = Vec::with_capacity(self.components());
        let mut sigma_grad = Vec::with_capacity(self.components());
        for ((g, mu), &s) in gamma.iter().zip(&self.mu).zip(&self.sigma) {
            let s2 = s * s;
            let mut sq = 0.0;
            let row: Vec<f64> = mu
                .iter()
                .zip(y)
                .map(|(m, v)| {
                    sq += (v - m) * (v - m);
                    -g * (v - m) / s2
                })
                .collect();
            mu_grad.push(row);
            sigma_grad.push(g * (d / s - sq / (s2 * s)));
        }
        MixtureGradient {
            nll: -log_p,
            logits: self.pi.iter().zip(&gamma).map(|(p, g)| p - g).collect(),
            mu: mu_grad,
            sigma: sigma_grad,
        }
    }
}
