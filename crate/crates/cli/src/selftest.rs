//! Fast invariant checks runnable from the command line.

use pdn_core::dataset::generate_random_corpus;
use pdn_core::{find_modes, MixtureParams, NetworkConfig, NetworkWeights};

use crate::config::RunConfig;

pub type Check = (&'static str, fn(&RunConfig) -> Result<String, String>);

pub const CHECKS: [Check; 4] = [
    ("gradient", gradient),
    ("reciprocity", reciprocity),
    ("normalization", normalization),
    ("mode finder", mode_finder),
];

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Backpropagation against central differences on a small network.
fn gradient(_: &RunConfig) -> Result<String, String> {
    let config = NetworkConfig {
        input_dim: 6,
        hidden_layers: vec![7, 5],
        components: 3,
        output_dim: 2,
        seed: 11,
        ..NetworkConfig::default()
    };
    let mut weights = NetworkWeights::init(&config).map_err(fail)?;
    let x = [0.3, -1.1, 0.7, 2.0, -0.4, 0.05];
    let y = [0.35, 0.8];
    let (_, analytic) = weights.backward(&x, &y).map_err(fail)?;
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let original = weights.params()[i];
        weights.params_mut()[i] = original + h;
        let up = weights.forward(&x).map_err(fail)?.nll(&y);
        weights.params_mut()[i] = original - h;
        let down = weights.forward(&x).map_err(fail)?.nll(&y);
        weights.params_mut()[i] = original;
        let numeric = (up - down) / (2.0 * h);
        let scale = a.abs() + numeric.abs();
        if scale > 1e-7 {
            worst = worst.max((a - numeric).abs() / scale);
        }
    }
    if worst < 1e-4 {
        Ok(format!(
            "{} parameters, worst relative error {worst:.1e}",
            weights.num_params()
        ))
    } else {
        Err(format!("worst relative error {worst:.1e}"))
    }
}

/// Reversed structures transmit identically and nothing exceeds unity.
fn reciprocity(run: &RunConfig) -> Result<String, String> {
    let setup = run.setup().map_err(fail)?;
    let corpus = generate_random_corpus(200, 1, run.dataset.layers, &setup, &run.bounds(), &[])
        .map_err(fail)?;
    let mut worst = 0.0f64;
    for s in &corpus.samples {
        let mut reversed = s.y.clone();
        reversed.reverse();
        let back = setup.spectrum(&reversed).map_err(fail)?;
        for (a, b) in s.x.iter().zip(back.values()) {
            worst = worst.max((a - b).abs());
            if *a > 1.0 + 1e-9 {
                return Err(format!("transmittance {a} above one"));
            }
        }
    }
    let flat = setup.spectrum(&[setup.host_radius; 3]).map_err(fail)?;
    let flat_err = flat
        .values()
        .iter()
        .map(|t| (t - 1.0).abs())
        .fold(0.0, f64::max);
    if worst < 1e-10 && flat_err < 1e-12 {
        Ok(format!(
            "200 structures, max |T - T_rev| {worst:.1e}, uniform duct {flat_err:.1e}"
        ))
    } else {
        Err(format!(
            "max |T - T_rev| {worst:.1e}, uniform duct {flat_err:.1e}"
        ))
    }
}

/// Importance-sampled integral of a network-produced mixture.
fn normalization(_: &RunConfig) -> Result<String, String> {
    let config = NetworkConfig {
        input_dim: 4,
        hidden_layers: vec![8],
        components: 4,
        output_dim: 3,
        seed: 3,
        ..NetworkConfig::default()
    };
    let p = NetworkWeights::init(&config)
        .and_then(|w| w.forward(&[0.5, -1.0, 2.0, 0.1]))
        .map_err(fail)?;
    let q = MixtureParams {
        sigma: p.sigma.iter().map(|s| 2.0 * s).collect(),
        ..p.clone()
    };
    let n = 200_000;
    let draws = q.sample(n, 5).map_err(fail)?;
    let integral = draws
        .iter()
        .map(|y| (p.log_density(y) - q.log_density(y)).exp())
        .sum::<f64>()
        / n as f64;
    if (integral - 1.0).abs() < 0.02 {
        Ok(format!("integral {integral:.4} from {n} draws"))
    } else {
        Err(format!("integral {integral:.4}"))
    }
}

/// Modes of a 1-D mixture against a dense grid scan.
fn mode_finder(run: &RunConfig) -> Result<String, String> {
    let p = MixtureParams::new(
        vec![0.45, 0.2, 0.35],
        vec![vec![0.2], vec![0.45], vec![0.8]],
        vec![0.06, 0.05, 0.1],
    )
    .map_err(fail)?;
    let n = 100_001;
    let density: Vec<f64> = (0..n)
        .map(|i| p.density(&[i as f64 / (n - 1) as f64]))
        .collect();
    let grid_modes: Vec<f64> = (1..n - 1)
        .filter(|&i| density[i] > density[i - 1] && density[i] >= density[i + 1])
        .map(|i| i as f64 / (n - 1) as f64)
        .collect();
    let found = find_modes(&p, &run.mode_config()).map_err(fail)?;
    let mut positions: Vec<f64> = found.iter().map(|m| m.point[0]).collect();
    positions.sort_by(f64::total_cmp);
    let matched = positions.len() == grid_modes.len()
        && positions
            .iter()
            .zip(&grid_modes)
            .all(|(a, b)| (a - b).abs() < 2e-5);
    if matched {
        Ok(format!(
            "{} modes agree with the grid scan",
            positions.len()
        ))
    } else {
        Err(format!("modes {positions:?}, grid scan {grid_modes:?}"))
    }
}
