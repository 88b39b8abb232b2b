//! From a target spectrum to ranked, forward-verified design candidates.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::PdnModel;
use crate::dataset::RadiusBounds;
use crate::duct::{ForwardSetup, Spectrum};
use crate::error::{PdnError, Result};
use crate::modes::{find_modes, lexicographic, ModeSearchConfig};

pub const REPORT_FORMAT: &str = "pdn-design-report-v1";

/// 1 / (1 + MSE) between the candidate's forward spectrum and the target.
pub fn quality_factor(
    radii_mm: &[f64],
    target: &Spectrum,
    setup: &ForwardSetup,
    bounds: &RadiusBounds,
) -> Result<f64> {
    Ok(verify(radii_mm, target, setup, bounds)?.2)
}

/// Forward spectrum, MSE and quality factor of a candidate.
fn verify(
    radii_mm: &[f64],
    target: &Spectrum,
    setup: &ForwardSetup,
    bounds: &RadiusBounds,
) -> Result<(Spectrum, f64, f64)> {
    if let Some(r) = radii_mm.iter().find(|&&r| !bounds.contains(r)) {
        return Err(PdnError::InvalidCandidate(format!(
            "radius {r} mm outside [{}, {}]",
            bounds.min, bounds.max
        )));
    }
    let predicted = setup.spectrum(radii_mm)?;
    let mse = predicted.mse(target)?;
    Ok((predicted, mse, 1.0 / (1.0 + mse)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignCandidate {
    /// Radii in mm.
    pub radii: Vec<f64>,
    /// Mode position in normalized output units.
    pub normalized: Vec<f64>,
    /// Mixture density at the mode (normalized output space).
    pub density_at_mode: f64,
    /// False when some radius falls outside the training bounds; such
    /// candidates are reported but not forward-verified.
    pub in_bounds: bool,
    pub predicted_spectrum: Option<Spectrum>,
    pub mse: Option<f64>,
    pub quality_factor: Option<f64>,
    pub mode_converged: bool,
    pub iterations: usize,
}

/// Verified candidates by descending quality factor, then density, then
/// radii; unverifiable candidates follow by descending density.
pub fn rank(candidates: &mut [DesignCandidate]) {
    candidates.sort_by(|a, b| match (a.quality_factor, b.quality_factor) {
        (Some(qa), Some(qb)) => qb
            .total_cmp(&qa)
            .then(b.density_at_mode.total_cmp(&a.density_at_mode))
            .then_with(|| lexicographic(&a.radii, &b.radii)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => b
            .density_at_mode
            .total_cmp(&a.density_at_mode)
            .then_with(|| lexicographic(&a.radii, &b.radii)),
    });
}

pub fn design(
    model: &PdnModel,
    target: &Spectrum,
    config: &ModeSearchConfig,
) -> Result<Vec<DesignCandidate>> {
    let input_dim = model.network_config().input_dim;
    if target.len() != input_dim {
        return Err(PdnError::InvalidInput(format!(
            "target has {} values, expected {input_dim}",
            target.len()
        )));
    }
    let x = model.stats.normalize_input(target.values());
    let mixture = model.weights.forward(&x)?;
    let modes = find_modes(&mixture, config)?;
    let bounds = RadiusBounds {
        min: model.stats.min_radius,
        max: model.stats.max_radius,
    };
    let mut candidates: Vec<DesignCandidate> = modes
        .par_iter()
        .map(|mode| {
            let radii = model.stats.denormalize_output(&mode.point);
            let in_bounds = radii.iter().all(|&r| bounds.contains(r));
            let (predicted_spectrum, mse, quality_factor) = if in_bounds {
                let (s, mse, q) = verify(&radii, target, &model.setup, &bounds)?;
                (Some(s), Some(mse), Some(q))
            } else {
                (None, None, None)
            };
            Ok(DesignCandidate {
                radii,
                normalized: mode.point.clone(),
                density_at_mode: mode.density,
                in_bounds,
                predicted_spectrum,
                mse,
                quality_factor,
                mode_converged: mode.converged,
                iterations: mode.iterations,
            })
        })
        .collect::<Result<_>>()?;
    rank(&mut candidates);
    Ok(candidates)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub format: String,
    pub config_hash: String,
    pub target: String,
    pub candidates: Vec<DesignCandidate>,
}

impl DesignReport {
    pub fn new(config_hash: &str, target: &str, candidates: Vec<DesignCandidate>) -> Self {
        Self {
            format: REPORT_FORMAT.to_string(),
            config_hash: config_hash.to_string(),
            target: target.to_string(),
            candidates,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| PdnError::InvalidInput(format!("cannot serialize report: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text)
            .map_err(|e| PdnError::InvalidInput(format!("unreadable report: {e}")))?;
        if report.format != REPORT_FORMAT {
            return Err(PdnError::InvalidInput(format!(
                "report format {:?}, expected {REPORT_FORMAT:?}",
                report.format
            )));
        }
        Ok(report)
    }
}
