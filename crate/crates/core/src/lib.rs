//! Mixture-density inverse design of stepped acoustic ducts.
//!
//! A lossless transfer-matrix model labels (radii → transmission spectrum)
//! pairs; a network with a Gaussian-mixture head learns the multivalued
//! inverse map; mode finding and forward verification turn a target
//! spectrum into ranked candidate structures.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adam;
pub mod checkpoint;
pub mod dataset;
pub mod duct;
pub mod error;
pub mod inverse;
pub mod mixture;
pub mod modes;
pub mod network;
pub mod pca;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, PdnModel};
pub use dataset::{Dataset, NormalizationStats, RadiusBounds, SamplePair};
pub use duct::{
    ForwardSetup, FrequencyGrid, PhysicalMedium, Spectrum, StructureGeometry, TwoPortMatrix,
};
pub use error::{PdnError, Result};
pub use inverse::{design, quality_factor, DesignCandidate, DesignReport};
pub use mixture::MixtureParams;
pub use modes::{find_modes, Mode, ModeSearchConfig};
pub use network::{MeanActivation, NetworkConfig, NetworkWeights};
pub use pca::{density_map, fit_pca, DensityMap, PcaModel};
pub use train::{train, TrainConfig, TrainOutcome, TrainingLog};
