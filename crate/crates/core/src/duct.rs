//! Plane-wave transfer-matrix model of a stepped cylindrical duct.
//!
//! A structure is a stack of coaxial cylindrical layers of equal length
//! inserted into a uniform host duct. Each layer is a lossless four-pole
//! relating (pressure, volume velocity) at its inlet to its outlet. The
//! stack is terminated on both sides by the anechoic host duct.
//!
//! Geometry is given in millimetres; everything is converted to SI units
//! internally.

use std::f64::consts::PI;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PdnError, Result};

/// Allowance for transmittances numerically above one.
pub const PASSIVITY_TOLERANCE: f64 = 1e-9;

const MM: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalMedium {
    /// Speed of sound in m/s.
    pub sound_speed: f64,
    /// Mass density in kg/m³.
    pub density: f64,
}

impl PhysicalMedium {
    pub fn new(sound_speed: f64, density: f64) -> Result<Self> {
        let medium = Self {
            sound_speed,
            density,
        };
        medium.validate()?;
        Ok(medium)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sound_speed > 0.0 && self.sound_speed.is_finite())
            || !(self.density > 0.0 && self.density.is_finite())
        {
            return Err(PdnError::InvalidGeometry(format!(
                "medium needs positive sound speed and density, got c={} rho={}",
                self.sound_speed, self.density
            )));
        }
        Ok(())
    }

    /// Plane-wave acoustic impedance ρc/S of a circular duct, radius in mm.
    pub fn duct_impedance(&self, radius_mm: f64) -> f64 {
        let r = radius_mm * MM;
        self.density * self.sound_speed / (PI * r * r)
    }
}

impl Default for PhysicalMedium {
    /// Air at about 20 °C.
    fn default() -> Self {
        Self {
            sound_speed: 343.0,
            density: 1.21,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub start_hz: f64,
    pub step_hz: f64,
    pub count: usize,
}

impl FrequencyGrid {
    pub fn new(start_hz: f64, step_hz: f64, count: usize) -> Result<Self> {
        let grid = Self {
            start_hz,
            step_hz,
            count,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start_hz > 0.0) || !(self.step_hz > 0.0) || self.count == 0 {
            return Err(PdnError::InvalidArgument(format!(
                "frequency grid needs start > 0, step > 0, count >= 1 (got {}, {}, {})",
                self.start_hz, self.step_hz, self.count
            )));
        }
        Ok(())
    }

    pub fn frequency(&self, index: usize) -> f64 {
        self.start_hz + self.step_hz * index as f64
    }

    pub fn frequencies(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.count).map(|i| self.frequency(i))
    }
}

impl Default for FrequencyGrid {
    /// 20 Hz to 5000 Hz in 20 Hz steps.
    fn default() -> Self {
        Self {
            start_hz: 20.0,
            step_hz: 20.0,
            count: 250,
        }
    }
}

/// Layer radii of a stepped duct plus the fixed axial context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureGeometry {
    /// Layer radii in mm, in propagation order.
    pub radii: Vec<f64>,
    /// Axial length of every layer in mm.
    pub layer_length: f64,
    /// Radius of the surrounding host duct in mm.
    pub host_radius: f64,
}

impl StructureGeometry {
    pub fn new(radii: Vec<f64>, layer_length: f64, host_radius: f64) -> Result<Self> {
        let geometry = Self {
            radii,
            layer_length,
            host_radius,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() {
            return Err(PdnError::InvalidGeometry("structure has no layers".into()));
        }
        if !(self.layer_length > 0.0 && self.layer_length.is_finite()) {
            return Err(PdnError::InvalidGeometry(format!(
                "layer length must be positive, got {}",
                self.layer_length
            )));
        }
        if !(self.host_radius > 0.0 && self.host_radius.is_finite()) {
            return Err(PdnError::InvalidGeometry(format!(
                "host radius must be positive, got {}",
                self.host_radius
            )));
        }
        for (i, &r) in self.radii.iter().enumerate() {
            if !(r > 0.0 && r <= self.host_radius) {
                return Err(PdnError::InvalidGeometry(format!(
                    "layer {i} radius {r} mm outside (0, {}]",
                    self.host_radius
                )));
            }
        }
        Ok(())
    }

    /// The same layers traversed in the opposite direction.
    pub fn reversed(&self) -> Self {
        let mut radii = self.radii.clone();
        radii.reverse();
        Self { radii, ..*self }
    }
}

/// Power transmittances on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum(pub Vec<f64>);

impl Spectrum {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Mean squared difference against another spectrum of the same length.
    pub fn mse(&self, other: &Spectrum) -> Result<f64> {
        if self.len() != other.len() || self.is_empty() {
            return Err(PdnError::InvalidInput(format!(
                "spectrum lengths differ ({} vs {})",
                self.len(),
                other.len()
            )));
        }
        let sum: f64 = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum / self.len() as f64)
    }
}

/// 2×2 complex four-pole mapping (p, U) at the outlet to (p, U) at the inlet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPortMatrix(pub [[Complex64; 2]; 2]);

impl TwoPortMatrix {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self([[one, zero], [zero, one]])
    }

    pub fn det(&self) -> Complex64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det.norm() == 0.0 {
            return None;
        }
        let m = &self.0;
        Some(Self([
            [m[1][1] / det, -m[0][1] / det],
            [-m[1][0] / det, m[0][0] / det],
        ]))
    }

    /// Largest element-wise modulus of the difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        worst
    }
}

impl Mul for TwoPortMatrix {
    type Output = TwoPortMatrix;

    fn mul(self, rhs: TwoPortMatrix) -> TwoPortMatrix {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        TwoPortMatrix(out)
    }
}

/// Four-pole of one uniform cylindrical segment.
pub fn segment_matrix(
    radius_mm: f64,
    length_mm: f64,
    frequency_hz: f64,
    medium: &PhysicalMedium,
) -> Result<TwoPortMatrix> {
    if !(radius_mm > 0.0) || !(length_mm > 0.0) || !(frequency_hz > 0.0) {
        return Err(PdnError::InvalidGeometry(format!(
            "segment needs positive radius, length and frequency (got {radius_mm} mm, {length_mm} mm, {frequency_hz} Hz)"
        )));
    }
    let k = 2.0 * PI * frequency_hz / medium.sound_speed;
    let kl = k * length_mm * MM;
    let z = medium.duct_impedance(radius_mm);
    let (sin, cos) = kl.sin_cos();
    Ok(TwoPortMatrix([
        [Complex64::new(cos, 0.0), Complex64::new(0.0, z * sin)],
        [Complex64::new(0.0, sin / z), Complex64::new(cos, 0.0)],
    ]))
}

/// Product of the matrices in propagation order.
pub fn cascade(matrices: &[TwoPortMatrix]) -> Result<TwoPortMatrix> {
    let (first, rest) = matrices
        .split_first()
        .ok_or_else(|| PdnError::InvalidArgument("cascade of an empty segment list".into()))?;
    Ok(rest.iter().fold(*first, |acc, &m| acc * m))
}

/// Power transmittance of the structure at one frequency, host duct on
/// both sides.
pub fn transmittance(
    structure: &StructureGeometry,
    frequency_hz: f64,
    medium: &PhysicalMedium,
) -> Result<f64> {
    structure.validate()?;
    let segments = structure
        .radii
        .iter()
        .map(|&r| segment_matrix(r, structure.layer_length, frequency_hz, medium))
        .collect::<Result<Vec<_>>>()?;
    let total = cascade(&segments)?;
    transmittance_from_matrix(
        &total,
        medium.duct_impedance(structure.host_radius),
        frequency_hz,
    )
}

fn transmittance_from_matrix(total: &TwoPortMatrix, z0: f64, frequency_hz: f64) -> Result<f64> {
    let [[t11, t12], [t21, t22]] = total.0;
    let t = 2.0 / (t11 + t12 / z0 + t21 * z0 + t22);
    let power = t.norm_sqr();
    if !power.is_finite() || power > 1.0 + PASSIVITY_TOLERANCE {
        return Err(PdnError::NumericalConsistency {
            frequency_hz,
            value: power,
        });
    }
    Ok(power.min(1.0))
}

/// Transmittance at every frequency of the grid.
pub fn spectrum(
    structure: &StructureGeometry,
    grid: &FrequencyGrid,
    medium: &PhysicalMedium,
) -> Result<Spectrum> {
    structure.validate()?;
    grid.validate()?;
    let z0 = medium.duct_impedance(structure.host_radius);
    grid.frequencies()
        .map(|f| {
            let segments = structure
                .radii
                .iter()
                .map(|&r| segment_matrix(r, structure.layer_length, f, medium))
                .collect::<Result<Vec<_>>>()?;
            transmittance_from_matrix(&cascade(&segments)?, z0, f)
        })
        .collect::<Result<Vec<_>>>()
        .map(Spectrum)
}

/// Everything besides the radii that the forward model needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardSetup {
    pub medium: PhysicalMedium,
    pub grid: FrequencyGrid,
    /// mm
    pub layer_length: f64,
    /// mm
    pub host_radius: f64,
}

impl Default for ForwardSetup {
    fn default() -> Self {
        Self {
            medium: PhysicalMedium::default(),
            grid: FrequencyGrid::default(),
            layer_length: 10.0,
            host_radius: 14.5,
        }
    }
}

impl ForwardSetup {
    pub fn validate(&self) -> Result<()> {
        self.medium.validate()?;
        self.grid.validate()?;
        if !(self.layer_length > 0.0) || !(self.host_radius > 0.0) {
            return Err(PdnError::InvalidGeometry(format!(
                "layer length and host radius must be positive (got {}, {})",
                self.layer_length, self.host_radius
            )));
        }
        Ok(())
    }

    pub fn structure(&self, radii: &[f64]) -> Result<StructureGeometry> {
        StructureGeometry::new(radii.to_vec(), self.layer_length, self.host_radius)
    }

    pub fn spectrum(&self, radii: &[f64]) -> Result<Spectrum> {
        spectrum(&self.structure(radii)?, &self.grid, &self.medium)
    }
}
