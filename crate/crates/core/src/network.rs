//! Feed-forward front end with a Gaussian-mixture head.
//!
//! Hidden layers are affine maps followed by tanh. The head is affine and
//! produces `m·(d+2)` raw values laid out as `[m logits | m·d means |
//! m log-deviations]`, component-major for the means. Logits go through a
//! softmax, means are used as is and deviations are `floor + exp(raw)`.
//!
//! All parameters live in one flat vector so the optimizer and the
//! finite-difference checks can treat them uniformly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PdnError, Result};
use crate::mixture::MixtureParams;

/// Initial deviation of every component, normalized output units.
pub const INITIAL_SIGMA: f64 = 0.3;

/// How raw head outputs become component means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanActivation {
    /// Means used as produced.
    Identity,
    /// Logistic squashing into (0, 1), the normalized radius range. Every
    /// mixture mode lies in the convex hull of the means, so modes can
    /// never leave the radius bounds.
    #[default]
    Sigmoid,
}

/// Samples per gradient chunk. Fixed so the reduction order does not depend
/// on the number of threads.
const CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub components: usize,
    pub output_dim: usize,
    pub sigma_floor: f64,
    #[serde(default)]
    pub mean_activation: MeanActivation,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            input_dim: 250,
            hidden_layers: vec![256, 128],
            components: 10,
            output_dim: 5,
            sigma_floor: 1e-3,
            mean_activation: MeanActivation::default(),
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.components == 0 || self.output_dim == 0 {
            return Err(PdnError::InvalidConfig(
                "input_dim, components and output_dim must be >= 1".into(),
            ));
        }
        if self.hidden_layers.contains(&0) {
            return Err(PdnError::InvalidConfig("hidden widths must be >= 1".into()));
        }
        if !(self.sigma_floor > 0.0 && self.sigma_floor.is_finite()) {
            return Err(PdnError::InvalidConfig(
                "sigma_floor must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn head_width(&self) -> usize {
        self.components * (self.output_dim + 2)
    }

    /// (fan_in, fan_out) of every dense layer, head last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input_dim];
        widths.extend(&self.hidden_layers);
        widths.push(self.head_width());
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerSlot {
    fan_in: usize,
    fan_out: usize,
    /// Start of the row-major `fan_out × fan_in` weight block; the bias
    /// follows immediately.
    offset: usize,
}

impl LayerSlot {
    fn weight_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    fn bias_range(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.fan_in * self.fan_out;
        start..start + self.fan_out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    config: NetworkConfig,
    slots: Vec<LayerSlot>,
    params: Vec<f64>,
}

/// Activations kept from a forward pass for the backward pass.
struct Trace {
    /// Input followed by every hidden activation.
    activations: Vec<Vec<f64>>,
    mixture: MixtureParams,
    /// exp(raw log-deviation) = σ − floor, per component.
    sigma_excess: Vec<f64>,
}

fn slots_for(config: &NetworkConfig) -> (Vec<LayerSlot>, usize) {
    let mut offset = 0;
    let slots = config
        .layer_shapes()
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let slot = LayerSlot {
                fan_in,
                fan_out,
                offset,
            };
            offset += fan_in * fan_out + fan_out;
            slot
        })
        .collect();
    (slots, offset)
}

impl NetworkWeights {
    /// Glorot-uniform weights, zero biases, and a head deviation bias that
    /// starts every component near [`INITIAL_SIGMA`].
    pub fn init(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let (slots, total) = slots_for(config);
        let mut params = vec![0.0; total];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for slot in &slots {
            let limit = (6.0 / (slot.fan_in + slot.fan_out) as f64).sqrt();
            for w in &mut params[slot.weight_range()] {
                *w = rng.random_range(-limit..limit);
            }
        }
        let mut weights = Self {
            config: config.clone(),
            slots,
            params,
        };
        let log_sigma_bias = (INITIAL_SIGMA - config.sigma_floor).max(1e-6).ln();
        let m = config.components;
        let d = config.output_dim;
        let head = *weights.slots.last().unwrap();
        for b in &mut weights.params[head.bias_range()][m + m * d..] {
            *b = log_sigma_bias;
        }
        Ok(weights)
    }

    pub fn from_params(config: &NetworkConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let (slots, total) = slots_for(config);
        if params.len() != total {
            return Err(PdnError::CheckpointIncompatible(format!(
                "expected {total} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(PdnError::CheckpointIncompatible(
                "non-finite parameter".into(),
            ));
        }
        Ok(Self {
            config: config.clone(),
            slots,
            params,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Weight and bias blocks of layer `index` (head is the last layer).
    pub fn layer(&self, index: usize) -> (&[f64], &[f64]) {
        let slot = &self.slots[index];
        (
            &self.params[slot.weight_range()],
            &self.params[slot.bias_range()],
        )
    }

    pub fn layer_mut(&mut self, index: usize) -> (&mut [f64], &mut [f64]) {
        let slot = self.slots[index];
        let (w, b) = self.params[slot.offset..slot.bias_range().end]
            .split_at_mut(slot.fan_in * slot.fan_out);
        (w, b)
    }

    pub fn num_layers(&self) -> usize {
        self.slots.len()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.input_dim {
            return Err(PdnError::InvalidInput(format!(
                "expected {} input values, got {}",
                self.config.input_dim,
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(PdnError::InvalidInput("non-finite input value".into()));
        }
        Ok(())
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let mut activations = Vec::with_capacity(self.slots.len());
        activations.push(x.to_vec());
        let mut raw = Vec::new();
        for (i, slot) in self.slots.iter().enumerate() {
            let input = activations.last().unwrap();
            let weights = &self.params[slot.weight_range()];
            let bias = &self.params[slot.bias_range()];
            let out: Vec<f64> = weights
                .chunks_exact(slot.fan_in)
                .zip(bias)
                .map(|(row, b)| b + dot(row, input))
                .collect();
            if i + 1 < self.slots.len() {
                activations.push(out.into_iter().map(f64::tanh).collect());
            } else {
                raw = out;
            }
        }
        let (mixture, sigma_excess) = self.head(&raw);
        Trace {
            activations,
            mixture,
            sigma_excess,
        }
    }

    fn head(&self, raw: &[f64]) -> (MixtureParams, Vec<f64>) {
        let m = self.config.components;
        let d = self.config.output_dim;
        let logits = &raw[..m];
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let pi = exps.iter().map(|e| e / total).collect();
        let activation = self.config.mean_activation;
        let mu = raw[m..m + m * d]
            .chunks_exact(d)
            .map(|row| match activation {
                MeanActivation::Identity => row.to_vec(),
                MeanActivation::Sigmoid => row.iter().map(|r| sigmoid(*r)).collect(),
            })
            .collect();
        let sigma_excess: Vec<f64> = raw[m + m * d..].iter().map(|r| r.exp()).collect();
        let sigma = sigma_excess
            .iter()
            .map(|e| self.config.sigma_floor + e)
            .collect();
        (MixtureParams { pi, mu, sigma }, sigma_excess)
    }

    /// Mixture parameters for a normalized spectrum.
    pub fn forward(&self, x: &[f64]) -> Result<MixtureParams> {
        self.check_input(x)?;
        let mixture = self.trace(x).mixture;
        debug_assert!(mixture.validate(self.config.sigma_floor).is_ok());
        Ok(mixture)
    }

    /// Adds ∂nll/∂θ for one (x, y) pair into `grad` and returns the nll.
    pub fn accumulate_gradient(&self, x: &[f64], y: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.check_input(x)?;
        if y.len() != self.config.output_dim {
            return Err(PdnError::InvalidInput(format!(
                "expected {} output values, got {}",
                self.config.output_dim,
                y.len()
            )));
        }
        debug_assert_eq!(grad.len(), self.params.len());
        let trace = self.trace(x);
        let mix_grad = trace.mixture.nll_gradient(y);

        let mut delta: Vec<f64> = Vec::with_capacity(self.config.head_width());
        delta.extend(&mix_grad.logits);
        match self.config.mean_activation {
            MeanActivation::Identity => delta.extend(mix_grad.mu.iter().flatten()),
            MeanActivation::Sigmoid => delta.extend(
                mix_grad
                    .mu
                    .iter()
                    .flatten()
                    .zip(trace.mixture.mu.iter().flatten())
                    .map(|(g, mu)| g * mu * (1.0 - mu)),
            ),
        }
        delta.extend(
            mix_grad
                .sigma
                .iter()
                .zip(&trace.sigma_excess)
                .map(|(g, e)| g * e),
        );

        for (i, slot) in self.slots.iter().enumerate().rev() {
            let input = &trace.activations[i];
            let (gw, gb) =
                grad[slot.offset..slot.bias_range().end].split_at_mut(slot.fan_in * slot.fan_out);
            for ((row, b), &dz) in gw
                .chunks_exact_mut(slot.fan_in)
                .zip(gb.iter_mut())
                .zip(&delta)
            {
                *b += dz;
                if dz != 0.0 {
                    axpy(dz, input, row);
                }
            }
            if i == 0 {
                break;
            }
            let weights = &self.params[slot.weight_range()];
            let mut upstream = vec![0.0; slot.fan_in];
            for (row, &dz) in weights.chunks_exact(slot.fan_in).zip(&delta) {
                if dz != 0.0 {
                    axpy(dz, row, &mut upstream);
                }
            }
            // through tanh: 1 − h²
            for (u, h) in upstream.iter_mut().zip(input) {
                *u *= 1.0 - h * h;
            }
            delta = upstream;
        }
        Ok(mix_grad.nll)
    }

    /// nll and its parameter gradient for a single pair.
    pub fn backward(&self, x: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let nll = self.accumulate_gradient(x, y, &mut grad)?;
        Ok((nll, grad))
    }

    /// Mean nll and mean gradient over the indexed pairs. Per-chunk sums
    /// are computed in parallel and reduced in index order, so the result
    /// is identical for any thread count.
    pub fn batch_gradient(
        &self,
        inputs: &[Vec<f64>],
        outputs: &[Vec<f64>],
        indices: &[usize],
    ) -> Result<(f64, Vec<f64>)> {
        if indices.is_empty() {
            return Err(PdnError::InvalidArgument("empty batch".into()));
        }
        let n = self.params.len();
        let partials: Vec<(f64, Vec<f64>)> = indices
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut grad = vec![0.0; n];
                let mut loss = 0.0;
                for &i in chunk {
                    loss += self.accumulate_gradient(&inputs[i], &outputs[i], &mut grad)?;
                }
                Ok((loss, grad))
            })
            .collect::<Result<_>>()?;
        let mut total_loss = 0.0;
        let mut total = vec![0.0; n];
        for (loss, grad) in &partials {
            total_loss += loss;
            for (t, g) in total.iter_mut().zip(grad) {
                *t += g;
            }
        }
        let scale = 1.0 / indices.len() as f64;
        total.iter_mut().for_each(|g| *g *= scale);
        Ok((total_loss * scale, total))
    }

    /// Mean nll over a set of pairs, reduced in index order.
    pub fn mean_nll(&self, inputs: &[Vec<f64>], outputs: &[Vec<f64>]) -> Result<f64> {
        if inputs.is_empty() || inputs.len() != outputs.len() {
            return Err(PdnError::InvalidArgument(
                "mean nll needs matching, non-empty inputs and outputs".into(),
            ));
        }
        let losses: Vec<f64> = inputs
            .par_iter()
            .zip(outputs)
            .map(|(x, y)| Ok(self.forward(x)?.nll(y)))
            .collect::<Result<_>>()?;
        Ok(losses.iter().sum::<f64>() / losses.len() as f64)
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> NetworkConfig {
        NetworkConfig {
            input_dim: 4,
            hidden_layers: vec![6],
            components: 3,
            output_dim: 2,
            sigma_floor: 1e-3,
            mean_activation: MeanActivation::Sigmoid,
            seed: 11,
        }
    }

    #[test]
    fn parameter_count() {
        let w = NetworkWeights::init(&tiny()).unwrap();
        assert_eq!(w.num_params(), 4 * 6 + 6 + 6 * 12 + 12);
        assert_eq!(w.num_layers(), 2);
    }

    #[test]
    fn zero_head_gives_uniform_weights() {
        let mut w = NetworkWeights::init(&tiny()).unwrap();
        let head = w.num_layers() - 1;
        let (hw, hb) = w.layer_mut(head);
        hw.iter_mut().for_each(|v| *v = 0.0);
        hb.iter_mut().for_each(|v| *v = 0.0);
        let p = w.forward(&[0.3, -1.0, 2.0, 0.0]).unwrap();
        for pi in &p.pi {
            assert!((pi - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(p.sigma.iter().all(|&s| (s - 1.001).abs() < 1e-12));
    }

    #[test]
    fn initial_sigma_is_broad() {
        let mut w = NetworkWeights::init(&tiny()).unwrap();
        let head = w.num_layers() - 1;
        w.layer_mut(head).0.iter_mut().for_each(|v| *v = 0.0);
        let p = w.forward(&[0.0; 4]).unwrap();
        assert!(p.sigma.iter().all(|&s| (s - INITIAL_SIGMA).abs() < 1e-12));
    }

    #[test]
    fn rejects_bad_inputs() {
        let w = NetworkWeights::init(&tiny()).unwrap();
        assert!(matches!(
            w.forward(&[0.0; 3]),
            Err(PdnError::InvalidInput(_))
        ));
        assert!(w.forward(&[0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(w.backward(&[0.0; 4], &[0.0; 3]).is_err());
        let bad = NetworkConfig {
            components: 0,
            ..tiny()
        };
        assert!(NetworkWeights::init(&bad).is_err());
    }

    #[test]
    fn from_params_checks_length() {
        let w = NetworkWeights::init(&tiny()).unwrap();
        let mut p = w.params().to_vec();
        assert_eq!(NetworkWeights::from_params(&tiny(), p.clone()).unwrap(), w);
        p.pop();
        assert!(matches!(
            NetworkWeights::from_params(&tiny(), p),
            Err(PdnError::CheckpointIncompatible(_))
        ));
    }

    #[test]
    fn sigmoid_means_squash_the_identity_means() {
        let mut w = NetworkWeights::init(&tiny()).unwrap();
        w.params_mut().iter_mut().for_each(|v| *v *= 40.0);
        let identity_config = NetworkConfig {
            mean_activation: MeanActivation::Identity,
            ..tiny()
        };
        let raw = NetworkWeights::from_params(&identity_config, w.params().to_vec()).unwrap();
        let x = [0.9, -2.0, 0.4, 1.5];
        let (a, b) = (w.forward(&x).unwrap(), raw.forward(&x).unwrap());
        assert_eq!(a.pi, b.pi);
        assert_eq!(a.sigma, b.sigma);
        for (ma, mb) in a.mu.iter().flatten().zip(b.mu.iter().flatten()) {
            assert!((0.0..=1.0).contains(ma));
            assert!((ma - 1.0 / (1.0 + (-mb).exp())).abs() < 1e-15);
        }
        assert!(b.mu.iter().flatten().any(|m| !(0.0..=1.0).contains(m)));
    }
}
