//! Run configuration: a TOML file merged with `--set section.key=value`
//! overrides, validated before any work starts.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pdn_core::adam::AdamConfig;
use pdn_core::{
    ForwardSetup, FrequencyGrid, MeanActivation, ModeSearchConfig, NetworkConfig, PhysicalMedium,
    RadiusBounds, TrainConfig,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub physics: Physics,
    pub grid: Grid,
    pub dataset: DatasetSection,
    pub network: Network,
    pub training: Training,
    pub modes: Modes,
    pub paths: Paths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Physics {
    /// m/s
    pub sound_speed: f64,
    /// kg/m³
    pub density: f64,
    pub layer_length_mm: f64,
    pub host_radius_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub start_hz: f64,
    pub step_hz: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    /// Radius levels per layer for the grid corpus.
    pub levels: usize,
    pub layers: usize,
    pub min_radius_mm: f64,
    pub max_radius_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Network {
    pub hidden_layers: Vec<usize>,
    pub components: usize,
    pub sigma_floor: f64,
    pub mean_activation: MeanActivation,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Training {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub validation_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Modes {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub merge_radius: f64,
    pub min_relative_density: f64,
    pub pair_starts: usize,
}

/// Output locations. Relative paths resolve against `output_dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub output_dir: PathBuf,
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
    pub training_log: PathBuf,
    pub report: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let setup = ForwardSetup::default();
        let bounds = RadiusBounds::default();
        let net = NetworkConfig::default();
        let train = TrainConfig::default();
        let modes = ModeSearchConfig::default();
        Self {
            physics: Physics {
                sound_speed: setup.medium.sound_speed,
                density: setup.medium.density,
                layer_length_mm: setup.layer_length,
                host_radius_mm: setup.host_radius,
            },
            grid: Grid {
                start_hz: setup.grid.start_hz,
                step_hz: setup.grid.step_hz,
                count: setup.grid.count,
            },
            dataset: DatasetSection {
                levels: 8,
                layers: 5,
                min_radius_mm: bounds.min,
                max_radius_mm: bounds.max,
            },
            network: Network {
                hidden_layers: net.hidden_layers,
                components: net.components,
                sigma_floor: net.sigma_floor,
                mean_activation: net.mean_activation,
                seed: net.seed,
            },
            training: Training {
                learning_rate: train.optimizer.learning_rate,
                beta1: train.optimizer.beta1,
                beta2: train.optimizer.beta2,
                epsilon: train.optimizer.epsilon,
                batch_size: train.batch_size,
                epochs: train.epochs,
                seed: train.seed,
                validation_fraction: train.validation_fraction,
            },
            modes: Modes {
                max_iterations: modes.max_iterations,
                tolerance: modes.tolerance,
                merge_radius: modes.merge_radius,
                min_relative_density: modes.min_relative_density,
                pair_starts: modes.pair_starts,
            },
            paths: Paths::default(),
        }
    }
}

macro_rules! section_default {
    ($($ty:ident => $field:ident),*) => {
        $(impl Default for $ty {
            fn default() -> Self {
                RunConfig::default().$field
            }
        })*
    };
}

section_default!(Physics => physics, Grid => grid, DatasetSection => dataset, Network => network, Training => training, Modes => modes);

impl Default for Paths {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("run"),
            dataset: PathBuf::from("corpus.pdn"),
            checkpoint: PathBuf::from("model.json"),
            training_log: PathBuf::from("training_log.csv"),
            report: PathBuf::from("design_report.json"),
        }
    }
}

impl RunConfig {
    /// Reads `path` (or starts from defaults) and applies the overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("cannot read config {}", p.display()))?;
                text.parse()
                    .with_context(|| format!("config {} is not valid TOML", p.display()))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let config: RunConfig = table.try_into().context("invalid configuration")?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.setup()?;
        self.bounds().validate(self.physics.host_radius_mm)?;
        self.network_config().validate()?;
        self.train_config().validate()?;
        self.mode_config().validate()?;
        if self.dataset.levels < 2 || self.dataset.layers == 0 {
            bail!("dataset needs at least 2 levels and 1 layer");
        }
        Ok(())
    }

    pub fn setup(&self) -> pdn_core::Result<ForwardSetup> {
        let setup = ForwardSetup {
            medium: PhysicalMedium::new(self.physics.sound_speed, self.physics.density)?,
            grid: FrequencyGrid::new(self.grid.start_hz, self.grid.step_hz, self.grid.count)?,
            layer_length: self.physics.layer_length_mm,
            host_radius: self.physics.host_radius_mm,
        };
        setup.validate()?;
        Ok(setup)
    }

    pub fn bounds(&self) -> RadiusBounds {
        RadiusBounds {
            min: self.dataset.min_radius_mm,
            max: self.dataset.max_radius_mm,
        }
    }

    pub fn network_config(&self) -> NetworkConfig {
        NetworkConfig {
            input_dim: self.grid.count,
            hidden_layers: self.network.hidden_layers.clone(),
            components: self.network.components,
            output_dim: self.dataset.layers,
            sigma_floor: self.network.sigma_floor,
            mean_activation: self.network.mean_activation,
            seed: self.network.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            optimizer: AdamConfig {
                learning_rate: t.learning_rate,
                beta1: t.beta1,
                beta2: t.beta2,
                epsilon: t.epsilon,
            },
            batch_size: t.batch_size,
            epochs: t.epochs,
            seed: t.seed,
            validation_fraction: t.validation_fraction,
        }
    }

    pub fn mode_config(&self) -> ModeSearchConfig {
        let m = &self.modes;
        ModeSearchConfig {
            max_iterations: m.max_iterations,
            tolerance: m.tolerance,
            merge_radius: m.merge_radius,
            min_relative_density: m.min_relative_density,
            pair_starts: m.pair_starts,
        }
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.paths.output_dir.join(path)
        }
    }

    /// Hash of every setting that affects results. Paths are excluded so a
    /// run can be relocated without changing its identity.
    pub fn hash(&self) -> String {
        let mut identity = self.clone();
        identity.paths = Paths::default();
        let text = toml::to_string(&identity).expect("run config always serializes");
        pdn_core::dataset::config_hash(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }
}

/// `section.key=value`; the value is parsed as TOML and falls back to a
/// bare string.
fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .with_context(|| format!("override {item:?} is not of the form section.key=value"))?;
    let (section, field) = key
        .trim()
        .split_once('.')
        .with_context(|| format!("override key {key:?} is not of the form section.key"))?;
    let value: toml::Value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("just inserted"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(field.to_string(), value);
            Ok(())
        }
        _ => bail!("config key {section:?} is not a section"),
    }
}
