//! Mini-batch maximum-likelihood training.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adam::{Adam, AdamConfig};
use crate::dataset::{Dataset, NormalizationStats, NormalizedData};
use crate::error::{PdnError, Result};
use crate::network::{NetworkConfig, NetworkWeights};

/// Components whose weight stays below this for every validation sample are
/// reported as collapsed.
pub const COLLAPSE_THRESHOLD: f64 = 1e-6;

// keeps the split stream independent of the batch-shuffle stream
const SPLIT_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: AdamConfig::default(),
            batch_size: 64,
            epochs: 200,
            seed: 0,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.batch_size == 0 {
            return Err(PdnError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(PdnError::InvalidConfig(
                "validation_fraction must be in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 0 is the untrained network.
    pub epoch: usize,
    pub train_nll: f64,
    pub validation_nll: f64,
    pub collapsed_components: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
    /// Seconds since the start of training, per record. Not part of the
    /// deterministic log.
    pub wall_seconds: Vec<f64>,
    pub best_epoch: usize,
}

impl TrainingLog {
    pub fn initial_validation_nll(&self) -> Option<f64> {
        self.records.first().map(|r| r.validation_nll)
    }

    pub fn best_validation_nll(&self) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.epoch == self.best_epoch)
            .map(|r| r.validation_nll)
    }

    /// `epoch,train_nll,validation_nll,wall_time_s,collapsed` rows; with
    /// `include_wall_time` false the wall-time column is left empty so the
    /// text is reproducible.
    pub fn to_csv(&self, include_wall_time: bool) -> String {
        let mut out = String::from("epoch,train_nll,validation_nll,wall_time_s,collapsed\n");
        for (i, r) in self.records.iter().enumerate() {
            let wall = if include_wall_time {
                format!("{:.3}", self.wall_seconds.get(i).copied().unwrap_or(0.0))
            } else {
                String::new()
            };
            let collapsed: Vec<String> = r
                .collapsed_components
                .iter()
                .map(usize::to_string)
                .collect();
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{},{}",
                r.epoch,
                r.train_nll,
                r.validation_nll,
                wall,
                collapsed.join(";")
            );
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: NetworkWeights,
    pub stats: NormalizationStats,
    pub log: TrainingLog,
}

/// Deterministic train/validation index split.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let val_count = ((n as f64) * fraction).round() as usize;
    if n < 2 || val_count == 0 {
        return (idx.clone(), idx);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SPLIT_SALT);
    idx.shuffle(&mut rng);
    let val_count = val_count.min(n - 1);
    let mut validation = idx[..val_count].to_vec();
    let mut train = idx[val_count..].to_vec();
    validation.sort_unstable();
    train.sort_unstable();
    (train, validation)
}

/// Splits, normalizes with statistics from the training part only, and
/// trains.
pub fn train(
    dataset: &Dataset,
    net_config: &NetworkConfig,
    train_config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_config.validate()?;
    net_config.validate()?;
    if dataset.is_empty() {
        return Err(PdnError::InvalidArgument(
            "cannot train on an empty dataset".into(),
        ));
    }
    if dataset.samples[0].x.len() != net_config.input_dim
        || dataset.layers() != net_config.output_dim
    {
        return Err(PdnError::InvalidConfig(format!(
            "network expects {}→{} but the dataset is {}→{}",
            net_config.input_dim,
            net_config.output_dim,
            dataset.samples[0].x.len(),
            dataset.layers()
        )));
    }
    let (train_idx, val_idx) = split_indices(
        dataset.len(),
        train_config.validation_fraction,
        train_config.seed,
    );
    let train_samples: Vec<_> = train_idx
        .iter()
        .map(|&i| dataset.samples[i].clone())
        .collect();
    let val_samples: Vec<_> = val_idx
        .iter()
        .map(|&i| dataset.samples[i].clone())
        .collect();
    let stats = NormalizationStats::fit(&train_samples, &dataset.bounds)?;
    let train_data = NormalizedData::with_stats(&train_samples, &stats);
    let val_data = NormalizedData::with_stats(&val_samples, &stats);
    let (weights, log) = train_normalized(&train_data, &val_data, net_config, train_config)?;
    Ok(TrainOutcome {
        weights,
        stats,
        log,
    })
}

/// Mean nll and, per component, the largest weight seen over the set.
fn evaluate(weights: &NetworkWeights, data: &NormalizedData) -> Result<(f64, Vec<f64>)> {
    let per_sample: Vec<(f64, Vec<f64>)> = data
        .inputs
        .par_iter()
        .zip(&data.outputs)
        .map(|(x, y)| {
            let mix = weights.forward(x)?;
            Ok((mix.nll(y), mix.pi))
        })
        .collect::<Result<_>>()?;
    let m = weights.config().components;
    let mut max_pi = vec![0.0f64; m];
    let mut total = 0.0;
    for (loss, pi) in &per_sample {
        total += loss;
        for (acc, p) in max_pi.iter_mut().zip(pi) {
            *acc = acc.max(*p);
        }
    }
    Ok((total / per_sample.len() as f64, max_pi))
}

pub fn train_normalized(
    train_data: &NormalizedData,
    val_data: &NormalizedData,
    net_config: &NetworkConfig,
    train_config: &TrainConfig,
) -> Result<(NetworkWeights, TrainingLog)> {
    train_config.validate()?;
    if train_data.is_empty() || val_data.is_empty() {
        return Err(PdnError::InvalidArgument(
            "training and validation sets must be non-empty".into(),
        ));
    }
    let start = Instant::now();
    let mut weights = NetworkWeights::init(net_config)?;
    let mut adam = Adam::new(train_config.optimizer, weights.num_params());
    let mut rng = ChaCha8Rng::seed_from_u64(train_config.seed);
    let mut log = TrainingLog::default();

    let (train_nll, _) = evaluate(&weights, train_data)?;
    let (val_nll, max_pi) = evaluate(&weights, val_data)?;
    if !train_nll.is_finite() || !val_nll.is_finite() {
        return Err(PdnError::TrainingDiverged {
            step: 0,
            last_finite_loss: f64::NAN,
        });
    }
    log.records.push(EpochRecord {
        epoch: 0,
        train_nll,
        validation_nll: val_nll,
        collapsed_components: collapsed(&max_pi),
    });
    log.wall_seconds.push(start.elapsed().as_secs_f64());
    let mut best = (val_nll, weights.clone());

    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut step = 0usize;
    let mut last_finite = train_nll;
    for epoch in 1..=train_config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(train_config.batch_size) {
            let (loss, grad) =
                weights.batch_gradient(&train_data.inputs, &train_data.outputs, batch)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(PdnError::TrainingDiverged {
                    step,
                    last_finite_loss: last_finite,
                });
            }
            last_finite = loss;
            epoch_loss += loss * batch.len() as f64;
            adam.step(weights.params_mut(), &grad);
            step += 1;
        }
        let train_nll = epoch_loss / train_data.len() as f64;
        let (val_nll, max_pi) = evaluate(&weights, val_data)?;
        if !val_nll.is_finite() {
            return Err(PdnError::TrainingDiverged {
                step,
                last_finite_loss: last_finite,
            });
        }
        log.records.push(EpochRecord {
            epoch,
            train_nll,
            validation_nll: val_nll,
            collapsed_components: collapsed(&max_pi),
        });
        log.wall_seconds.push(start.elapsed().as_secs_f64());
        if val_nll < best.0 {
            best = (val_nll, weights.clone());
            log.best_epoch = epoch;
        }
    }
    Ok((best.1, log))
}

fn collapsed(max_pi: &[f64]) -> Vec<usize> {
    max_pi
        .iter()
        .enumerate()
        .filter(|(_, &p)| p < COLLAPSE_THRESHOLD)
        .map(|(i, _)| i)
        .collect()
}
