//! Spectrum CSV files and built-in targets.

use std::path::Path;

use anyhow::{Context, Result};
use pdn_core::{FrequencyGrid, PdnError, Spectrum};

pub const HEADER: &str = "frequency_hz,transmittance";

/// Either `frequency_hz,transmittance` rows under that header, or one bare
/// value per line.
pub fn read(path: &Path, grid: &FrequencyGrid) -> Result<Spectrum> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read target {}", path.display()))?;
    parse(&text, grid).with_context(|| format!("bad target file {}", path.display()))
}

pub fn parse(text: &str, grid: &FrequencyGrid) -> pdn_core::Result<Spectrum> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .peekable();
    let annotated = lines.peek() == Some(&HEADER);
    if annotated {
        lines.next();
    }
    let mut values = Vec::with_capacity(grid.count);
    for (i, line) in lines.enumerate() {
        let number = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| {
                PdnError::InvalidInput(format!("line {}: {s:?} is not a number", i + 1))
            })
        };
        let value = if annotated {
            let (f, t) = line.split_once(',').ok_or_else(|| {
                PdnError::InvalidInput(format!(
                    "line {}: expected frequency_hz,transmittance",
                    i + 1
                ))
            })?;
            let f = number(f)?;
            let expected = grid.frequency(i.min(grid.count.saturating_sub(1)));
            if i < grid.count && (f - expected).abs() > 1e-6 * expected.abs().max(1.0) {
                return Err(PdnError::InvalidInput(format!(
                    "line {}: frequency {f} Hz, expected {expected} Hz",
                    i + 1
                )));
            }
            number(t)?
        } else {
            number(line)?
        };
        if !value.is_finite() {
            return Err(PdnError::InvalidInput(format!(
                "line {}: non-finite value",
                i + 1
            )));
        }
        values.push(value);
    }
    if values.len() != grid.count {
        return Err(PdnError::InvalidInput(format!(
            "target has {} values, expected {}",
            values.len(),
            grid.count
        )));
    }
    Ok(Spectrum(values))
}

pub fn to_csv(spectrum: &Spectrum, grid: &FrequencyGrid) -> String {
    let mut out = format!("{HEADER}\n");
    for (f, t) in grid.frequencies().zip(spectrum.values()) {
        out.push_str(&format!("{f:.16e},{t:.16e}\n"));
    }
    out
}

pub const BUILTINS: [&str; 1] = ["wide-bandgap"];

/// Named targets. `wide-bandgap` passes everything below 1500 Hz and above
/// 4500 Hz and transmits 1% between 2000 Hz and 4000 Hz, joined by
/// raised-cosine edges 500 Hz wide.
pub fn builtin(name: &str, grid: &FrequencyGrid) -> pdn_core::Result<Spectrum> {
    match name {
        "wide-bandgap" => Ok(Spectrum(grid.frequencies().map(wide_bandgap).collect())),
        _ => Err(PdnError::InvalidArgument(format!(
            "unknown built-in target {name:?}; available: {}",
            BUILTINS.join(", ")
        ))),
    }
}

fn wide_bandgap(f: f64) -> f64 {
    const FLOOR: f64 = 0.01;
    // fraction of the way into the stop band, 0 outside and 1 inside
    let depth = |edge_start: f64, edge_end: f64| {
        let u = ((f - edge_start) / (edge_end - edge_start)).clamp(0.0, 1.0);
        0.5 - 0.5 * (std::f64::consts::PI * u).cos()
    };
    let d = if f < 3000.0 {
        depth(1500.0, 2000.0)
    } else {
        1.0 - depth(4000.0, 4500.0)
    };
    1.0 - (1.0 - FLOOR) * d
}

/// Comma-separated radii in mm.
pub fn parse_radii(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("radius {s:?} is not a number"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_layouts_parse_to_the_same_spectrum() {
        let grid = FrequencyGrid::default();
        let s = builtin("wide-bandgap", &grid).unwrap();
        let annotated = to_csv(&s, &grid);
        let bare: String = s.values().iter().map(|v| format!("{v:.16e}\n")).collect();
        assert_eq!(parse(&annotated, &grid).unwrap(), s);
        assert_eq!(parse(&bare, &grid).unwrap(), s);
    }

    #[test]
    fn wrong_length_names_the_expected_count() {
        let grid = FrequencyGrid::default();
        let err = parse("0.5\n0.5\n", &grid).unwrap_err().to_string();
        assert!(err.contains("expected 250"), "{err}");
    }

    #[test]
    fn mismatched_frequencies_are_rejected() {
        let grid = FrequencyGrid::new(20.0, 20.0, 2).unwrap();
        assert!(parse("frequency_hz,transmittance\n20,0.5\n40,0.5\n", &grid).is_ok());
        assert!(parse("frequency_hz,transmittance\n20,0.5\n60,0.5\n", &grid).is_err());
        assert!(parse("0.5\nabc\n", &grid).is_err());
    }

    #[test]
    fn template_shape() {
        assert_eq!(wide_bandgap(100.0), 1.0);
        assert_eq!(wide_bandgap(4900.0), 1.0);
        assert!((wide_bandgap(3000.0) - 0.01).abs() < 1e-15);
        assert!((wide_bandgap(1750.0) - 0.505).abs() < 1e-12);
        assert!(builtin("narrow", &FrequencyGrid::default()).is_err());
    }

    #[test]
    fn radii_lists() {
        assert_eq!(parse_radii("14.5, 1.8125,3").unwrap(), [14.5, 1.8125, 3.0]);
        assert!(parse_radii("1,,2").is_err());
    }
}
