//! `pdn-checkpoint-v1`: a JSON document with the configs, normalization
//! statistics and base64 blocks of little-endian f64 weights.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::dataset::NormalizationStats;
use crate::duct::ForwardSetup;
use crate::error::{PdnError, Result};
use crate::network::{NetworkConfig, NetworkWeights};
use crate::train::TrainConfig;

pub const CHECKPOINT_FORMAT: &str = "pdn-checkpoint-v1";

/// A trained network together with everything needed to use it.
#[derive(Debug, Clone, PartialEq)]
pub struct PdnModel {
    pub weights: NetworkWeights,
    pub stats: NormalizationStats,
    pub setup: ForwardSetup,
    pub train_config: TrainConfig,
    pub config_hash: String,
}

impl PdnModel {
    pub fn network_config(&self) -> &NetworkConfig {
        self.weights.config()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatsDoc {
    input_mean: String,
    input_std: String,
    constant_dims: Vec<usize>,
    min_radius: f64,
    max_radius: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    fan_out: usize,
    fan_in: usize,
    weights: String,
    bias: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDoc {
    format: String,
    config_hash: String,
    network: NetworkConfig,
    training: TrainConfig,
    forward: ForwardSetup,
    normalization: StatsDoc,
    layers: Vec<LayerDoc>,
}

fn encode(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode(text: &str, what: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| PdnError::CheckpointIncompatible(format!("{what}: bad base64 ({e})")))?;
    if bytes.len() % 8 != 0 {
        return Err(PdnError::CheckpointIncompatible(format!(
            "{what}: {} bytes is not a whole number of f64 values",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn to_string(model: &PdnModel) -> Result<String> {
    let config = model.network_config();
    let layers = config
        .layer_shapes()
        .iter()
        .enumerate()
        .map(|(i, &(fan_in, fan_out))| {
            let (w, b) = model.weights.layer(i);
            LayerDoc {
                fan_out,
                fan_in,
                weights: encode(w),
                bias: encode(b),
            }
        })
        .collect();
    let doc = CheckpointDoc {
        format: CHECKPOINT_FORMAT.to_string(),
        config_hash: model.config_hash.clone(),
        network: config.clone(),
        training: model.train_config.clone(),
        forward: model.setup,
        normalization: StatsDoc {
            input_mean: encode(&model.stats.input_mean),
            input_std: encode(&model.stats.input_std),
            constant_dims: model.stats.constant_dims.clone(),
            min_radius: model.stats.min_radius,
            max_radius: model.stats.max_radius,
        },
        layers,
    };
    serde_json::to_string_pretty(&doc)
        .map_err(|e| PdnError::InvalidInput(format!("cannot serialize checkpoint: {e}")))
}

/// Parses a checkpoint. When `expected` is given, the stored network
/// config must match it exactly.
pub fn from_str(text: &str, expected: Option<&NetworkConfig>) -> Result<PdnModel> {
    let doc: CheckpointDoc = serde_json::from_str(text)
        .map_err(|e| PdnError::CheckpointIncompatible(format!("unreadable checkpoint: {e}")))?;
    if doc.format != CHECKPOINT_FORMAT {
        return Err(PdnError::CheckpointIncompatible(format!(
            "format {:?}, expected {CHECKPOINT_FORMAT:?}",
            doc.format
        )));
    }
    if let Some(expected) = expected {
        if *expected != doc.network {
            return Err(PdnError::CheckpointIncompatible(format!(
                "network config differs: checkpoint has {:?}, expected {:?}",
                doc.network, expected
            )));
        }
    }
    doc.network
        .validate()
        .map_err(|e| PdnError::CheckpointIncompatible(e.to_string()))?;
    let shapes = doc.network.layer_shapes();
    if shapes.len() != doc.layers.len() {
        return Err(PdnError::CheckpointIncompatible(format!(
            "{} layers stored, config implies {}",
            doc.layers.len(),
            shapes.len()
        )));
    }
    let mut params = Vec::new();
    for (i, (layer, &(fan_in, fan_out))) in doc.layers.iter().zip(&shapes).enumerate() {
        if layer.fan_in != fan_in || layer.fan_out != fan_out {
            return Err(PdnError::CheckpointIncompatible(format!(
                "layer {i} is {}×{}, config implies {fan_out}×{fan_in}",
                layer.fan_out, layer.fan_in
            )));
        }
        let w = decode(&layer.weights, "weights")?;
        let b = decode(&layer.bias, "bias")?;
        if w.len() != fan_in * fan_out || b.len() != fan_out {
            return Err(PdnError::CheckpointIncompatible(format!(
                "layer {i} block sizes do not match its shape"
            )));
        }
        params.extend(w);
        params.extend(b);
    }
    let weights = NetworkWeights::from_params(&doc.network, params)?;
    let stats = NormalizationStats {
        input_mean: decode(&doc.normalization.input_mean, "input_mean")?,
        input_std: decode(&doc.normalization.input_std, "input_std")?,
        constant_dims: doc.normalization.constant_dims,
        min_radius: doc.normalization.min_radius,
        max_radius: doc.normalization.max_radius,
    };
    if stats.input_dim() != doc.network.input_dim || stats.input_std.len() != stats.input_dim() {
        return Err(PdnError::CheckpointIncompatible(
            "normalization statistics do not match the input dimension".into(),
        ));
    }
    if doc.forward.grid.count != doc.network.input_dim {
        return Err(PdnError::CheckpointIncompatible(
            "frequency grid does not match the input dimension".into(),
        ));
    }
    Ok(PdnModel {
        weights,
        stats,
        setup: doc.forward,
        train_config: doc.training,
        config_hash: doc.config_hash,
    })
}

pub fn save_checkpoint(model: &PdnModel, path: &Path) -> Result<()> {
    fs::write(path, to_string(model)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, expected: Option<&NetworkConfig>) -> Result<PdnModel> {
    from_str(&fs::read_to_string(path)?, expected)
}
