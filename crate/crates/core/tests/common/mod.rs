//! Independent oracles shared by the integration tests. The oracles share
//! no code with what they check; `mode_mismatch` and `worst_gradient_error`
//! are the harnesses that put the two side by side.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use pdn_core::{
    find_modes, ForwardSetup, MixtureParams, ModeSearchConfig, NetworkConfig, NetworkWeights,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// |a − b| / max(1, |a|, |b|).
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Forward model: scattering matrices joined by the Redheffer star product.

#[derive(Clone, Copy)]
struct Scatter {
    r: Complex64,
    t: Complex64,
    r_back: Complex64,
    t_back: Complex64,
}

fn star(a: Scatter, b: Scatter) -> Scatter {
    let den = Complex64::new(1.0, 0.0) - a.r_back * b.r;
    Scatter {
        r: a.r + a.t_back * b.r * a.t / den,
        t: b.t * a.t / den,
        r_back: b.r_back + b.t * a.r_back * b.t_back / den,
        t_back: a.t_back * b.t_back / den,
    }
}

fn step(za: f64, zb: f64) -> Scatter {
    let r = Complex64::new((zb - za) / (zb + za), 0.0);
    Scatter {
        r,
        t: Complex64::new(2.0 * zb / (za + zb), 0.0),
        r_back: -r,
        t_back: Complex64::new(2.0 * za / (za + zb), 0.0),
    }
}

fn delay(k: f64, length_m: f64) -> Scatter {
    let phase = Complex64::from_polar(1.0, -k * length_m);
    Scatter {
        r: Complex64::new(0.0, 0.0),
        t: phase,
        r_back: Complex64::new(0.0, 0.0),
        t_back: phase,
    }
}

pub fn smatrix_transmittance(radii_mm: &[f64], frequency_hz: f64, setup: &ForwardSetup) -> f64 {
    let c = setup.medium.sound_speed;
    let rho = setup.medium.density;
    let z = |r_mm: f64| rho * c / (PI * (r_mm * 1e-3).powi(2));
    let k = 2.0 * PI * frequency_hz / c;
    let mut zs = vec![z(setup.host_radius)];
    zs.extend(radii_mm.iter().map(|&r| z(r)));
    zs.push(z(setup.host_radius));
    let mut s = Scatter {
        r: Complex64::new(0.0, 0.0),
        t: Complex64::new(1.0, 0.0),
        r_back: Complex64::new(0.0, 0.0),
        t_back: Complex64::new(1.0, 0.0),
    };
    for i in 0..radii_mm.len() {
        s = star(s, step(zs[i], zs[i + 1]));
        s = star(s, delay(k, setup.layer_length * 1e-3));
    }
    s = star(s, step(zs[zs.len() - 2], zs[zs.len() - 1]));
    s.t.norm_sqr()
}

pub fn smatrix_spectrum(radii_mm: &[f64], setup: &ForwardSetup) -> Vec<f64> {
    (0..setup.grid.count)
        .map(|i| {
            let f = setup.grid.start_hz + setup.grid.step_hz * i as f64;
            smatrix_transmittance(radii_mm, f, setup)
        })
        .collect()
}

pub fn random_radii<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(1.8125..=14.5)).collect()
}

// ---------------------------------------------------------------------------
// Mixtures.

pub fn random_mixture<R: Rng>(rng: &mut R, m: usize, d: usize, sigma: (f64, f64)) -> MixtureParams {
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let pi = raw.iter().map(|w| w / total).collect();
    let mu = (0..m)
        .map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let sig = (0..m).map(|_| rng.random_range(sigma.0..sigma.1)).collect();
    MixtureParams::new(pi, mu, sig).unwrap()
}

/// Plain-space density, evaluated term by term.
pub fn naive_density(p: &MixtureParams, y: &[f64]) -> f64 {
    let d = y.len() as i32;
    let mut total = 0.0;
    for i in 0..p.pi.len() {
        let s2 = p.sigma[i] * p.sigma[i];
        let sq: f64 = y.iter().zip(&p.mu[i]).map(|(a, b)| (a - b).powi(2)).sum();
        total += p.pi[i] * (-0.5 * sq / s2).exp() / (2.0 * PI * s2).sqrt().powi(d);
    }
    total
}

/// Density gradient ∇p and Hessian ∇²p (row-major), computed directly.
fn density_derivatives(p: &MixtureParams, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = y.len();
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d * d];
    for i in 0..p.pi.len() {
        let s2 = p.sigma[i] * p.sigma[i];
        let sq: f64 = y.iter().zip(&p.mu[i]).map(|(a, b)| (a - b).powi(2)).sum();
        let w = p.pi[i] * (-0.5 * sq / s2).exp() / (2.0 * PI * s2).sqrt().powi(d as i32);
        let u: Vec<f64> = p.mu[i].iter().zip(y).map(|(m, v)| (m - v) / s2).collect();
        for a in 0..d {
            g[a] += w * u[a];
            for b in 0..d {
                h[a * d + b] += w * u[a] * u[b];
            }
            h[a * d + a] -= w / s2;
        }
    }
    (g, h)
}

fn span(p: &MixtureParams, axis: usize) -> (f64, f64) {
    let s = p.sigma.iter().copied().fold(0.0, f64::max);
    let lo = p.mu.iter().map(|m| m[axis]).fold(f64::INFINITY, f64::min) - 5.0 * s;
    let hi =
        p.mu.iter()
            .map(|m| m[axis])
            .fold(f64::NEG_INFINITY, f64::max)
            + 5.0 * s;
    (lo, hi)
}

/// Modes of a 1-D mixture: local maxima of a dense grid, then bisection on
/// the sign of p′ inside the bracketing cells.
pub fn grid_modes_1d(p: &MixtureParams, points: usize) -> Vec<Vec<f64>> {
    assert_eq!(p.dim(), 1);
    let (lo, hi) = span(p, 0);
    let h = (hi - lo) / (points - 1) as f64;
    let xs: Vec<f64> = (0..points).map(|i| lo + h * i as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| naive_density(p, &[x])).collect();
    let slope = |x: f64| density_derivatives(p, &[x]).0[0];
    let mut modes = Vec::new();
    for i in 1..points - 1 {
        if vals[i] >= vals[i - 1] && vals[i] > vals[i + 1] {
            let (mut a, mut b) = (xs[i - 1], xs[i + 1]);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if slope(mid) > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            modes.push(vec![0.5 * (a + b)]);
        }
    }
    modes
}

/// Modes of a 2-D mixture: 8-neighbour grid maxima, refined to full
/// precision.
pub fn grid_modes_2d(p: &MixtureParams, points: usize) -> Vec<Vec<f64>> {
    assert_eq!(p.dim(), 2);
    let (x0, x1) = span(p, 0);
    let (y0, y1) = span(p, 1);
    let hx = (x1 - x0) / (points - 1) as f64;
    let hy = (y1 - y0) / (points - 1) as f64;
    let grid: Vec<Vec<f64>> = (0..points)
        .map(|i| {
            (0..points)
                .map(|j| naive_density(p, &[x0 + hx * i as f64, y0 + hy * j as f64]))
                .collect()
        })
        .collect();
    let mut modes: Vec<Vec<f64>> = Vec::new();
    for i in 1..points - 1 {
        for j in 1..points - 1 {
            let v = grid[i][j];
            let mut is_max = true;
            for di in -1i32..=1 {
                for dj in -1i32..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let n = grid[(i as i32 + di) as usize][(j as i32 + dj) as usize];
                    // ties resolved towards the lower index so plateaus give one cell
                    if n > v || (n == v && (di, dj) < (0, 0)) {
                        is_max = false;
                    }
                }
            }
            if !is_max {
                continue;
            }
            let y = refine_2d(p, [x0 + hx * i as f64, y0 + hy * j as f64]);
            if !modes
                .iter()
                .any(|m| (m[0] - y[0]).hypot(m[1] - y[1]) < 1e-7)
            {
                modes.push(y.to_vec());
            }
        }
    }
    modes
}

/// Newton on ∇p = 0 where the Hessian is negative definite, backtracking
/// ascent elsewhere. A grid maximum on a ridge can sit next to a saddle,
/// which plain Newton would happily converge to.
fn refine_2d(p: &MixtureParams, start: [f64; 2]) -> [f64; 2] {
    let mut y = start;
    for _ in 0..10_000 {
        let (g, h) = density_derivatives(p, &y);
        let det = h[0] * h[3] - h[1] * h[2];
        if h[0] < 0.0 && det > 0.0 {
            let dx = (h[3] * g[0] - h[1] * g[1]) / det;
            let dy = (-h[2] * g[0] + h[0] * g[1]) / det;
            let next = [y[0] - dx, y[1] - dy];
            if naive_density(p, &next) >= naive_density(p, &y) || dx.abs() + dy.abs() < 1e-12 {
                y = next;
                if dx.abs() + dy.abs() < 1e-15 {
                    return y;
                }
                continue;
            }
        }
        let base = naive_density(p, &y);
        let mut t = 1e-2 / g[0].hypot(g[1]).max(1e-300);
        loop {
            let next = [y[0] + t * g[0], y[1] + t * g[1]];
            if naive_density(p, &next) > base || t < 1e-20 {
                y = next;
                break;
            }
            t *= 0.5;
        }
    }
    y
}

/// Compares `find_modes` with oracle modes: every oracle mode above the
/// reporting floor must be reported within `tol`, and every reported mode
/// must be an oracle mode. Returns a description of the first mismatch.
pub fn mode_mismatch(p: &MixtureParams, oracle: &[Vec<f64>], tol: f64) -> Option<String> {
    let config = ModeSearchConfig::default();
    let found = find_modes(p, &config).unwrap();
    let best = oracle
        .iter()
        .map(|y| naive_density(p, y))
        .fold(0.0, f64::max);
    let dist = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    for y in oracle {
        // modes within 1% of the cut-off could fall either side of it
        if naive_density(p, y) / best < config.min_relative_density * 1.01 {
            continue;
        }
        let nearest = found
            .iter()
            .map(|m| dist(&m.point, y))
            .fold(f64::INFINITY, f64::min);
        if nearest >= tol {
            return Some(format!("missed mode {y:?} (nearest {nearest:e}) in {p:?}"));
        }
    }
    for m in &found {
        let nearest = oracle
            .iter()
            .map(|y| dist(&m.point, y))
            .fold(f64::INFINITY, f64::min);
        if nearest >= tol || !m.converged {
            return Some(format!("spurious mode {:?} in {p:?}", m.point));
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Networks.

/// Weights with every parameter drawn uniformly, so no layer is trivially
/// zero the way biases are at initialization.
pub fn random_network<R: Rng>(rng: &mut R, config: &NetworkConfig, scale: f64) -> NetworkWeights {
    let n = NetworkWeights::init(config).unwrap().num_params();
    let params = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    NetworkWeights::from_params(config, params).unwrap()
}

/// Largest relative error between the analytic gradient and central
/// differences over every parameter.
pub fn worst_gradient_error(weights: &NetworkWeights, x: &[f64], y: &[f64], h: f64) -> f64 {
    let (_, analytic) = weights.backward(x, y).unwrap();
    let mut probe = weights.clone();
    let mut worst = 0.0f64;
    for (k, &a) in analytic.iter().enumerate() {
        let base = weights.params()[k];
        probe.params_mut()[k] = base + h;
        let up = probe.forward(x).unwrap().nll(y);
        probe.params_mut()[k] = base - h;
        let down = probe.forward(x).unwrap().nll(y);
        probe.params_mut()[k] = base;
        worst = worst.max(rel_err(a, (up - down) / (2.0 * h)));
    }
    worst
}

pub fn small_configs() -> Vec<NetworkConfig> {
    let base = NetworkConfig::default();
    vec![
        NetworkConfig {
            input_dim: 8,
            hidden_layers: vec![16],
            components: 3,
            output_dim: 2,
            seed: 1,
            ..base.clone()
        },
        NetworkConfig {
            input_dim: 6,
            hidden_layers: vec![9, 7],
            components: 4,
            output_dim: 3,
            seed: 2,
            ..base.clone()
        },
        NetworkConfig {
            input_dim: 12,
            hidden_layers: vec![5],
            components: 2,
            output_dim: 5,
            seed: 3,
            ..base
        },
    ]
}
