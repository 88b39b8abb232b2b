//! Two-component PCA of the design space and density slices through the
//! principal plane.
//!
//! The map shows the full d-dimensional mixture density evaluated on the
//! plane `mean + a·c₁ + b·c₂` (a slice, not a marginal).

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PdnError, Result};
use crate::mixture::MixtureParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Two orthonormal rows of length d.
    pub components: [Vec<f64>; 2],
    pub explained_variance: [f64; 2],
}

pub fn fit_pca(points: &[Vec<f64>]) -> Result<PcaModel> {
    let weights = vec![1.0; points.len()];
    fit_pca_weighted(points, &weights)
}

/// PCA with non-negative per-point weights (normalized internally).
pub fn fit_pca_weighted(points: &[Vec<f64>], weights: &[f64]) -> Result<PcaModel> {
    if points.len() < 3 {
        return Err(PdnError::DegenerateData(format!(
            "PCA needs at least 3 points, got {}",
            points.len()
        )));
    }
    let d = points[0].len();
    if d < 2 || points.iter().any(|p| p.len() != d) {
        return Err(PdnError::DegenerateData(
            "PCA needs points of one dimension >= 2".into(),
        ));
    }
    if weights.len() != points.len() || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(PdnError::InvalidArgument(
            "PCA weights must be non-negative, one per point".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(PdnError::DegenerateData("PCA weights sum to zero".into()));
    }
    let mut mean = vec![0.0; d];
    for (p, w) in points.iter().zip(weights) {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += w * v / total;
        }
    }
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for (p, w) in points.iter().zip(weights) {
        let c: Vec<f64> = p.iter().zip(&mean).map(|(v, m)| v - m).collect();
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += w * c[i] * c[j] / total;
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let top = eig.eigenvalues[order[0]];
    let second = eig.eigenvalues[order[1]];
    if !(top > 0.0) || second <= 1e-12 * top {
        return Err(PdnError::DegenerateData(format!(
            "fewer than two non-zero principal variances ({top:e}, {second:e})"
        )));
    }
    let component = |k: usize| -> Vec<f64> {
        let col = eig.eigenvectors.column(order[k]);
        let mut v: Vec<f64> = col.iter().copied().collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        // sign convention: the largest-magnitude entry is positive
        let pivot = v
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(_, x)| x)
            .unwrap_or(1.0);
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    };
    Ok(PcaModel {
        mean,
        components: [component(0), component(1)],
        explained_variance: [top, second.max(0.0)],
    })
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn project(&self, point: &[f64]) -> [f64; 2] {
        let centered: Vec<f64> = point.iter().zip(&self.mean).map(|(p, m)| p - m).collect();
        let along = |c: &[f64]| c.iter().zip(&centered).map(|(a, b)| a * b).sum();
        [along(&self.components[0]), along(&self.components[1])]
    }

    pub fn lift(&self, q: [f64; 2]) -> Vec<f64> {
        self.mean
            .iter()
            .zip(self.components[0].iter().zip(&self.components[1]))
            .map(|(m, (a, b))| m + q[0] * a + q[1] * b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMarker {
    pub label: String,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMap {
    /// Cell-centre coordinates along the first principal axis.
    pub x: Vec<f64>,
    /// Cell-centre coordinates along the second principal axis.
    pub y: Vec<f64>,
    /// `values[row][col]` is the density at `lift(x[col], y[row])`.
    pub values: Vec<Vec<f64>>,
    pub markers: Vec<MapMarker>,
    /// Lower-left and upper-right corners of the map.
    pub extent: [[f64; 2]; 2],
}

/// Density slice on a `resolution × resolution` cell grid covering every
/// projected mean ± 4σ_max and every marker.
pub fn density_map(
    params: &MixtureParams,
    model: &PcaModel,
    resolution: usize,
    markers: &[(String, Vec<f64>)],
) -> Result<DensityMap> {
    params.validate(0.0)?;
    if resolution < 2 {
        return Err(PdnError::InvalidArgument(
            "map resolution must be >= 2".into(),
        ));
    }
    if params.dim() != model.dim() || markers.iter().any(|(_, p)| p.len() != model.dim()) {
        return Err(PdnError::InvalidInput(
            "mixture, markers and PCA dimensions differ".into(),
        ));
    }
    let sigma_max = params.sigma.iter().copied().fold(0.0, f64::max);
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut include = |p: [f64; 2], pad: f64| {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k] - pad);
            hi[k] = hi[k].max(p[k] + pad);
        }
    };
    for mu in &params.mu {
        include(model.project(mu), 4.0 * sigma_max);
    }
    let projected: Vec<MapMarker> = markers
        .iter()
        .map(|(label, p)| MapMarker {
            label: label.clone(),
            position: model.project(p),
        })
        .collect();
    for m in &projected {
        include(m.position, sigma_max);
    }
    let centres = |k: usize| -> Vec<f64> {
        let h = (hi[k] - lo[k]) / resolution as f64;
        (0..resolution)
            .map(|i| lo[k] + (i as f64 + 0.5) * h)
            .collect()
    };
    let x = centres(0);
    let y = centres(1);
    let values = y
        .par_iter()
        .map(|&b| {
            x.iter()
                .map(|&a| params.density(&model.lift([a, b])))
                .collect()
        })
        .collect();
    Ok(DensityMap {
        x,
        y,
        values,
        markers: projected,
        extent: [lo, hi],
    })
}

const PALETTE: [&str; 11] = [
    "#ffffff", "#f7fbff", "#deebf7", "#c6dbef", "#9ecae1", "#6baed6", "#4292c6", "#2171b5",
    "#08519c", "#08306b", "#041a3d",
];

impl DensityMap {
    /// Header row `y\x,<x…>`, then one row per y coordinate.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("y\\x");
        for a in &self.x {
            let _ = write!(out, ",{a:.16e}");
        }
        out.push('\n');
        for (b, row) in self.y.iter().zip(&self.values) {
            let _ = write!(out, "{b:.16e}");
            for v in row {
                let _ = write!(out, ",{v:.16e}");
            }
            out.push('\n');
        }
        out
    }

    /// Ten density levels at the deciles of the positive map values.
    pub fn quantile_levels(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .values
            .iter()
            .flatten()
            .copied()
            .filter(|v| *v > 0.0)
            .collect();
        if all.is_empty() {
            return vec![0.0; 10];
        }
        all.sort_by(f64::total_cmp);
        (0..10).map(|k| all[(k * (all.len() - 1)) / 10]).collect()
    }

    /// Filled bands between the quantile levels, plus the markers.
    pub fn to_svg(&self) -> String {
        let size = 600.0;
        let margin = 40.0;
        let cols = self.x.len();
        let rows = self.y.len();
        let cw = size / cols as f64;
        let ch = size / rows as f64;
        let levels = self.quantile_levels();
        let band = |v: f64| levels.iter().filter(|&&l| v >= l && l > 0.0).count();
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{w}" viewBox="0 0 {w} {w}">"#,
            w = size + 2.0 * margin
        );
        let _ = writeln!(
            out,
            "<!-- mixture density slice through the principal plane; x: [{:.6}, {:.6}], y: [{:.6}, {:.6}] -->",
            self.extent[0][0], self.extent[1][0], self.extent[0][1], self.extent[1][1]
        );
        let _ = writeln!(out, r#"<g shape-rendering="crispEdges">"#);
        for (r, row) in self.values.iter().enumerate() {
            // SVG y grows downwards
            let top = margin + size - (r as f64 + 1.0) * ch;
            let mut c = 0;
            while c < cols {
                let b = band(row[c]);
                let mut end = c + 1;
                while end < cols && band(row[end]) == b {
                    end += 1;
                }
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                    margin + c as f64 * cw,
                    top,
                    (end - c) as f64 * cw,
                    ch,
                    PALETTE[b]
                );
                c = end;
            }
        }
        let _ = writeln!(out, "</g>");
        let _ = writeln!(
            out,
            r#"<rect x="{margin}" y="{margin}" width="{size}" height="{size}" fill="none" stroke="black"/>"#
        );
        let [lo, hi] = self.extent;
        for m in &self.markers {
            let px = margin + (m.position[0] - lo[0]) / (hi[0] - lo[0]) * size;
            let py = margin + size - (m.position[1] - lo[1]) / (hi[1] - lo[1]) * size;
            let _ = writeln!(
                out,
                r##"<circle cx="{px:.3}" cy="{py:.3}" r="5" fill="#d62728" stroke="black"/><text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="12">{}</text>"##,
                px + 7.0,
                py - 7.0,
                escape(&m.label)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">PC1</text>"#,
            margin + size / 2.0,
            size + 1.7 * margin
        );
        let _ = writeln!(
            out,
            r#"<text x="12" y="{}" font-family="sans-serif" font-size="12" transform="rotate(-90 12 {})" text-anchor="middle">PC2</text>"#,
            margin + size / 2.0,
            margin + size / 2.0
        );
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_few_points_or_flat_data_is_degenerate() {
        assert!(matches!(
            fit_pca(&[vec![0.0, 1.0], vec![1.0, 0.0]]),
            Err(PdnError::DegenerateData(_))
        ));
        let collinear: Vec<Vec<f64>> = (0..5)
            .map(|i| vec![i as f64, 2.0 * i as f64, 0.0])
            .collect();
        assert!(matches!(
            fit_pca(&collinear),
            Err(PdnError::DegenerateData(_))
        ));
    }

    #[test]
    fn project_mean_is_origin() {
        let pts = vec![
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.5, 0.0],
            vec![2.0, -1.0, 0.3],
            vec![0.5, 2.0, -0.2],
        ];
        let model = fit_pca(&pts).unwrap();
        let q = model.project(&model.mean);
        assert!(q[0].abs() < 1e-15 && q[1].abs() < 1e-15);
    }

    #[test]
    fn single_component_peak_lands_in_argmax_cell() {
        let mu = vec![0.3, 0.6, 0.1, 0.9, 0.5];
        let params = MixtureParams::new(vec![1.0], vec![mu.clone()], vec![0.05]).unwrap();
        let pts = vec![
            mu.clone(),
            vec![0.0, 0.6, 0.1, 0.9, 0.5],
            vec![0.3, 0.0, 0.1, 0.9, 0.5],
            vec![0.6, 0.9, 0.1, 0.9, 0.5],
        ];
        let model = fit_pca(&pts).unwrap();
        let map = density_map(&params, &model, 41, &[("A1".into(), mu.clone())]).unwrap();
        let (mut best, mut at) = (0.0, (0, 0));
        for (r, row) in map.values.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v > best {
                    best = v;
                    at = (r, c);
                }
            }
        }
        let p = model.project(&mu);
        let hx = map.x[1] - map.x[0];
        let hy = map.y[1] - map.y[0];
        assert!((map.x[at.1] - p[0]).abs() <= hx / 2.0 + 1e-12);
        assert!((map.y[at.0] - p[1]).abs() <= hy / 2.0 + 1e-12);
        let svg = map.to_svg();
        assert!(svg.starts_with("<svg") && svg.contains("A1"));
        let csv = map.to_csv();
        assert_eq!(csv.lines().count(), 42);
    }
}
