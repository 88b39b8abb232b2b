//! Labelled (spectrum, radii) corpora: generation, normalization and the
//! `PDN1` binary container.
//!
//! Container layout, all fields little-endian:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "PDN1"
//!      4     8  u64 format version (1)
//!     12     8  u64 sample count n
//!     20     8  u64 spectrum length f
//!     28     8  u64 layer count l
//!     36     8  f64 grid start (Hz)
//!     44     8  f64 grid step (Hz)
//!     52     8  f64 minimum radius (mm)
//!     60     8  f64 maximum radius (mm)
//!     68     8  f64 layer length (mm)
//!     76     8  f64 host radius (mm)
//!     84     8  f64 sound speed (m/s)
//!     92     8  f64 density (kg/m³)
//!    100     8  u64 seed
//!    108   8nf  f64 spectra, row-major
//!      …   8nl  f64 radii, row-major
//! ```
//!
//! A `<file>.meta` sidecar holds `key=value` lines with the seed, config
//! hash and generation time.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::duct::{ForwardSetup, FrequencyGrid, PhysicalMedium};
use crate::error::{PdnError, Result};

pub const MAGIC: &[u8; 4] = b"PDN1";
pub const FORMAT_VERSION: u64 = 1;
const HEADER_LEN: u64 = 108;

/// Radii closer than this (max-norm, mm) count as the same structure.
pub const COINCIDENCE_TOLERANCE_MM: f64 = 1e-9;

/// Range of admissible layer radii, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for RadiusBounds {
    fn default() -> Self {
        Self {
            min: 1.8125,
            max: 14.5,
        }
    }
}

impl RadiusBounds {
    pub fn validate(&self, host_radius: f64) -> Result<()> {
        if !(self.min > 0.0 && self.min < self.max && self.max <= host_radius) {
            return Err(PdnError::InvalidConfig(format!(
                "radius bounds [{}, {}] must satisfy 0 < min < max <= host radius {host_radius}",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.min && r <= self.max
    }

    /// `count` evenly spaced levels ending at `max`; eight levels over the
    /// default bounds are 1.8125, 3.625, …, 14.5 mm.
    pub fn levels(&self, count: usize) -> Vec<f64> {
        match count {
            0 => Vec::new(),
            1 => vec![self.max],
            _ => (0..count)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (count - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePair {
    /// Transmittance spectrum.
    pub x: Vec<f64>,
    /// Layer radii in mm.
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<SamplePair>,
    pub setup: ForwardSetup,
    pub bounds: RadiusBounds,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn layers(&self) -> usize {
        self.samples.first().map_or(0, |s| s.y.len())
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.setup.grid
    }
}

/// Hex SHA-256 of a canonical configuration description.
pub fn config_hash(description: &str) -> String {
    let digest = Sha256::digest(description.as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn describe_setup(setup: &ForwardSetup, bounds: &RadiusBounds) -> String {
    format!(
        "grid={:?}/{:?}/{};medium={:?}/{:?};layer_length={:?};host_radius={:?};bounds={:?}/{:?}",
        setup.grid.start_hz,
        setup.grid.step_hz,
        setup.grid.count,
        setup.medium.sound_speed,
        setup.medium.density,
        setup.layer_length,
        setup.host_radius,
        bounds.min,
        bounds.max
    )
}

fn label_all(radii: Vec<Vec<f64>>, setup: &ForwardSetup) -> Result<Vec<SamplePair>> {
    radii
        .into_par_iter()
        .map(|y| {
            let x = setup.spectrum(&y)?.0;
            Ok(SamplePair { x, y })
        })
        .collect()
}

/// Every combination of `levels` over `layers` layers, in odometer order
/// (last layer varies fastest).
pub fn generate_grid_corpus(
    levels: &[f64],
    layers: usize,
    setup: &ForwardSetup,
    bounds: &RadiusBounds,
) -> Result<Dataset> {
    setup.validate()?;
    bounds.validate(setup.host_radius)?;
    if levels.is_empty() || layers == 0 {
        return Err(PdnError::InvalidConfig(
            "grid corpus needs at least one level and one layer".into(),
        ));
    }
    if let Some(bad) = levels.iter().find(|&&r| !bounds.contains(r)) {
        return Err(PdnError::InvalidConfig(format!(
            "level {bad} mm outside radius bounds [{}, {}]",
            bounds.min, bounds.max
        )));
    }
    let total = (levels.len() as u64)
        .checked_pow(layers as u32)
        .filter(|&n| n <= usize::MAX as u64)
        .ok_or_else(|| PdnError::InvalidConfig("grid corpus too large".into()))?
        as usize;
    let radii: Vec<Vec<f64>> = (0..total)
        .map(|index| {
            let mut y = vec![0.0; layers];
            let mut rest = index;
            for slot in y.iter_mut().rev() {
                *slot = levels[rest % levels.len()];
                rest /= levels.len();
            }
            y
        })
        .collect();
    let samples = label_all(radii, setup)?;
    let description = format!(
        "kind=grid;levels={levels:?};layers={layers};{}",
        describe_setup(setup, bounds)
    );
    Ok(Dataset {
        samples,
        setup: *setup,
        bounds: *bounds,
        provenance: Provenance {
            seed: 0,
            config_hash: config_hash(&description),
        },
    })
}

fn coincides_with_grid(y: &[f64], levels: &[f64]) -> bool {
    y.iter().all(|&r| {
        levels
            .iter()
            .any(|&l| (r - l).abs() <= COINCIDENCE_TOLERANCE_MM)
    })
}

/// `n` structures with radii uniform in `bounds`. Structures landing on a
/// point of the grid spanned by `exclude_levels` are redrawn.
pub fn generate_random_corpus(
    n: usize,
    seed: u64,
    layers: usize,
    setup: &ForwardSetup,
    bounds: &RadiusBounds,
    exclude_levels: &[f64],
) -> Result<Dataset> {
    setup.validate()?;
    bounds.validate(setup.host_radius)?;
    if n == 0 || layers == 0 {
        return Err(PdnError::InvalidArgument(
            "random corpus needs n >= 1 and at least one layer".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut radii = Vec::with_capacity(n);
    while radii.len() < n {
        let y: Vec<f64> = (0..layers)
            .map(|_| rng.random_range(bounds.min..=bounds.max))
            .collect();
        if !coincides_with_grid(&y, exclude_levels) {
            radii.push(y);
        }
    }
    let samples = label_all(radii, setup)?;
    let description = format!(
        "kind=random;n={n};seed={seed};layers={layers};exclude={exclude_levels:?};{}",
        describe_setup(setup, bounds)
    );
    Ok(Dataset {
        samples,
        setup: *setup,
        bounds: *bounds,
        provenance: Provenance {
            seed,
            config_hash: config_hash(&description),
        },
    })
}

/// Per-dimension z-scoring of spectra and min-max scaling of radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    /// Input dimensions with zero variance; their std is set to 1.
    pub constant_dims: Vec<usize>,
    pub min_radius: f64,
    pub max_radius: f64,
}

impl NormalizationStats {
    pub fn fit(samples: &[SamplePair], bounds: &RadiusBounds) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| PdnError::InvalidArgument("cannot normalize an empty dataset".into()))?;
        let dim = first.x.len();
        let n = samples.len() as f64;
        let mut mean = vec![0.0; dim];
        for s in samples {
            if s.x.len() != dim {
                return Err(PdnError::InvalidInput("ragged spectra".into()));
            }
            for (m, v) in mean.iter_mut().zip(&s.x) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for s in samples {
            for ((acc, v), m) in var.iter_mut().zip(&s.x).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let mut constant_dims = Vec::new();
        let std = var
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    constant_dims.push(i);
                    1.0
                }
            })
            .collect();
        Ok(Self {
            input_mean: mean,
            input_std: std,
            constant_dims,
            min_radius: bounds.min,
            max_radius: bounds.max,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_mean.len()
    }

    pub fn normalize_input(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.input_mean.iter().zip(&self.input_std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn denormalize_input(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.input_mean.iter().zip(&self.input_std))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    pub fn normalize_output(&self, y: &[f64]) -> Vec<f64> {
        let span = self.max_radius - self.min_radius;
        y.iter().map(|r| (r - self.min_radius) / span).collect()
    }

    pub fn denormalize_output(&self, u: &[f64]) -> Vec<f64> {
        let span = self.max_radius - self.min_radius;
        u.iter().map(|v| self.min_radius + v * span).collect()
    }

    /// Millimetres per normalized output unit.
    pub fn output_scale(&self) -> f64 {
        self.max_radius - self.min_radius
    }
}

/// Normalized inputs and outputs, index-aligned with the source samples.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedData {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
}

impl NormalizedData {
    pub fn with_stats(samples: &[SamplePair], stats: &NormalizationStats) -> Self {
        Self {
            inputs: samples
                .iter()
                .map(|s| stats.normalize_input(&s.x))
                .collect(),
            outputs: samples
                .iter()
                .map(|s| stats.normalize_output(&s.y))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Fits statistics on the whole dataset and applies them.
pub fn normalize(dataset: &Dataset) -> Result<(NormalizedData, NormalizationStats)> {
    let stats = NormalizationStats::fit(&dataset.samples, &dataset.bounds)?;
    Ok((NormalizedData::with_stats(&dataset.samples, &stats), stats))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

pub fn to_bytes(dataset: &Dataset) -> Result<Vec<u8>> {
    let n = dataset.len();
    let f = dataset.setup.grid.count;
    let l = dataset.layers();
    if dataset
        .samples
        .iter()
        .any(|s| s.x.len() != f || s.y.len() != l)
    {
        return Err(PdnError::InvalidInput(
            "samples disagree with the grid or layer count".into(),
        ));
    }
    let mut out = Vec::with_capacity(HEADER_LEN as usize + 8 * n * (f + l));
    out.extend_from_slice(MAGIC);
    for v in [FORMAT_VERSION, n as u64, f as u64, l as u64] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let s = &dataset.setup;
    for v in [
        s.grid.start_hz,
        s.grid.step_hz,
        dataset.bounds.min,
        dataset.bounds.max,
        s.layer_length,
        s.host_radius,
        s.medium.sound_speed,
        s.medium.density,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&dataset.provenance.seed.to_le_bytes());
    for sample in &dataset.samples {
        for v in &sample.x {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for sample in &dataset.samples {
        for v in &sample.y {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl Reader<'_> {
    fn take(&mut self, len: usize, what: &str) -> Result<&[u8]> {
        let end = self
            .offset
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                PdnError::format(
                    self.offset as u64,
                    format!("truncated while reading {what}"),
                )
            })?;
        let slice = &self.bytes[self.offset..end];
        self.offset = end;
        Ok(slice)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader { bytes, offset: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(PdnError::format(0, "bad magic, expected PDN1"));
    }
    let version = r.u64("version")?;
    if version != FORMAT_VERSION {
        return Err(PdnError::format(
            4,
            format!("unsupported version {version}"),
        ));
    }
    let n = r.u64("sample count")?;
    let f = r.u64("spectrum length")?;
    let l = r.u64("layer count")?;
    if n == 0 || f == 0 || l == 0 {
        return Err(PdnError::format(12, "counts must be non-zero"));
    }
    let grid = FrequencyGrid {
        start_hz: r.f64("grid start")?,
        step_hz: r.f64("grid step")?,
        count: f as usize,
    };
    let bounds = RadiusBounds {
        min: r.f64("min radius")?,
        max: r.f64("max radius")?,
    };
    let layer_length = r.f64("layer length")?;
    let host_radius = r.f64("host radius")?;
    let medium = PhysicalMedium {
        sound_speed: r.f64("sound speed")?,
        density: r.f64("density")?,
    };
    let seed = r.u64("seed")?;
    let setup = ForwardSetup {
        medium,
        grid,
        layer_length,
        host_radius,
    };
    setup
        .validate()
        .map_err(|e| PdnError::format(36, format!("invalid header: {e}")))?;

    let expected = (n as u128) * ((f + l) as u128) * 8 + HEADER_LEN as u128;
    if expected != bytes.len() as u128 {
        let offset = (bytes.len() as u64).min(expected.min(u64::MAX as u128) as u64);
        return Err(PdnError::format(
            offset,
            format!(
                "length mismatch: header implies {expected} bytes, file has {}",
                bytes.len()
            ),
        ));
    }
    let (n, f, l) = (n as usize, f as usize, l as usize);
    let mut samples: Vec<SamplePair> = Vec::with_capacity(n);
    for _ in 0..n {
        let x = (0..f).map(|_| r.f64("spectra")).collect::<Result<_>>()?;
        samples.push(SamplePair { x, y: Vec::new() });
    }
    for s in samples.iter_mut() {
        s.y = (0..l).map(|_| r.f64("radii")).collect::<Result<_>>()?;
    }
    Ok(Dataset {
        samples,
        setup,
        bounds,
        provenance: Provenance {
            seed,
            config_hash: String::new(),
        },
    })
}

/// Writes the binary container and its `.meta` sidecar.
pub fn save(dataset: &Dataset, path: &Path) -> Result<()> {
    let bytes = to_bytes(dataset)?;
    fs::write(path, &bytes)?;
    let generated = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = format!(
        "format=PDN1\nversion={FORMAT_VERSION}\nsamples={}\nlayers={}\nfrequencies={}\nseed={}\nconfig_hash={}\ncontent_sha256={}\ngenerated_unix={generated}\n",
        dataset.len(),
        dataset.layers(),
        dataset.setup.grid.count,
        dataset.provenance.seed,
        dataset.provenance.config_hash,
        content_hash(&bytes),
    );
    fs::write(sidecar_path(path), meta)?;
    Ok(())
}

/// Loads a container; the config hash comes from the sidecar when present.
pub fn load(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path)?;
    let mut dataset = from_bytes(&bytes)?;
    if let Ok(meta) = fs::read_to_string(sidecar_path(path)) {
        for line in meta.lines() {
            if let Some(hash) = line.strip_prefix("config_hash=") {
                dataset.provenance.config_hash = hash.trim().to_string();
            }
        }
    }
    Ok(dataset)
}

/// Re-runs the forward model on every hundredth sample and fails if any
/// stored spectrum differs by more than 1e-12.
pub fn verify_sample_spectra(dataset: &Dataset) -> Result<()> {
    let stride = 100;
    (0..dataset.len())
        .step_by(stride)
        .collect::<Vec<_>>()
        .into_par_iter()
        .try_for_each(|i| {
            let s = &dataset.samples[i];
            let fresh = dataset.setup.spectrum(&s.y)?;
            let worst = fresh
                .values()
                .iter()
                .zip(&s.x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if worst > 1e-12 {
                return Err(PdnError::InvalidInput(format!(
                    "sample {i} spectrum differs from the forward model by {worst:e}"
                )));
            }
            Ok(())
        })
}

pub fn content_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// One row per sample: radii columns `r1..rL` then `t_<freq>` columns.
pub fn export_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let mut header: Vec<String> = (1..=dataset.layers()).map(|i| format!("r{i}")).collect();
    header.extend(dataset.setup.grid.frequencies().map(|f| format!("t_{f}")));
    writeln!(w, "{}", header.join(","))?;
    for s in &dataset.samples {
        let row: Vec<String> =
            s.y.iter()
                .chain(&s.x)
                .map(|v| format!("{v:.16e}"))
                .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// True when no radii vector of `test` lies within the coincidence
/// tolerance (max-norm) of one in `train`.
pub fn disjoint(train: &Dataset, test: &Dataset) -> bool {
    test.samples.par_iter().all(|t| {
        train
            .samples
            .iter()
            .all(|s| max_norm(&s.y, &t.y) > COINCIDENCE_TOLERANCE_MM)
    })
}

pub fn max_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_setup() -> ForwardSetup {
        ForwardSetup {
            grid: FrequencyGrid::new(100.0, 100.0, 12).unwrap(),
            ..ForwardSetup::default()
        }
    }

    #[test]
    fn eight_default_levels_step_by_the_minimum_radius() {
        let levels = RadiusBounds::default().levels(8);
        let expected = [1.8125, 3.625, 5.4375, 7.25, 9.0625, 10.875, 12.6875, 14.5];
        for (a, b) in levels.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn grid_corpus_sizes_and_order() {
        let setup = small_setup();
        let bounds = RadiusBounds::default();
        let one = generate_grid_corpus(&[14.5], 5, &setup, &bounds).unwrap();
        assert_eq!(one.len(), 1);
        let levels = bounds.levels(4);
        let d = generate_grid_corpus(&levels, 5, &setup, &bounds).unwrap();
        assert_eq!(d.len(), 1024);
        assert_eq!(d.samples[0].y, vec![levels[0]; 5]);
        assert_eq!(d.samples[1].y[4], levels[1]);
        assert_eq!(d.samples[4].y[3], levels[1]);
        assert_eq!(d.samples[1023].y, vec![levels[3]; 5]);
    }

    #[test]
    fn grid_corpus_rejects_out_of_bounds_level() {
        let err = generate_grid_corpus(&[1.0], 5, &small_setup(), &RadiusBounds::default());
        assert!(matches!(err, Err(PdnError::InvalidConfig(_))));
    }

    #[test]
    fn random_corpus_is_deterministic_and_rejects_zero() {
        let setup = small_setup();
        let bounds = RadiusBounds::default();
        let a = generate_random_corpus(20, 7, 5, &setup, &bounds, &[]).unwrap();
        let b = generate_random_corpus(20, 7, 5, &setup, &bounds, &[]).unwrap();
        assert_eq!(to_bytes(&a).unwrap(), to_bytes(&b).unwrap());
        assert!(a
            .samples
            .iter()
            .all(|s| s.y.iter().all(|&r| bounds.contains(r))));
        assert!(matches!(
            generate_random_corpus(0, 7, 5, &setup, &bounds, &[]),
            Err(PdnError::InvalidArgument(_))
        ));
    }

    #[test]
    fn grid_coincidence_predicate() {
        assert!(coincides_with_grid(&[1.0, 2.0 + 5e-10], &[1.0, 2.0]));
        assert!(!coincides_with_grid(&[1.0, 1.1], &[1.0, 2.0]));
        assert!(!coincides_with_grid(&[1.0], &[]));
    }

    #[test]
    fn normalization_edges() {
        let bounds = RadiusBounds::default();
        let samples = vec![
            SamplePair {
                x: vec![1.0, 0.2],
                y: vec![bounds.min],
            },
            SamplePair {
                x: vec![1.0, 0.6],
                y: vec![bounds.max],
            },
        ];
        let stats = NormalizationStats::fit(&samples, &bounds).unwrap();
        assert_eq!(stats.constant_dims, vec![0]);
        assert_eq!(stats.input_std[0], 1.0);
        assert_eq!(stats.normalize_output(&[bounds.min]), vec![0.0]);
        assert_eq!(stats.normalize_output(&[bounds.max]), vec![1.0]);
        assert!(NormalizationStats::fit(&[], &bounds).is_err());
    }

    #[test]
    fn corrupt_containers_report_offsets() {
        let setup = small_setup();
        let d = generate_grid_corpus(&[14.5, 7.0], 2, &setup, &RadiusBounds::default()).unwrap();
        let bytes = to_bytes(&d).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            from_bytes(&bad),
            Err(PdnError::Format { offset: 0, .. })
        ));
        let short = &bytes[..bytes.len() - 3];
        match from_bytes(short) {
            Err(PdnError::Format { offset, .. }) => assert_eq!(offset, short.len() as u64),
            other => panic!("expected format error, got {other:?}"),
        }
        assert!(matches!(
            from_bytes(&bytes[..50]),
            Err(PdnError::Format { offset: 44, .. })
        ));
    }
}
