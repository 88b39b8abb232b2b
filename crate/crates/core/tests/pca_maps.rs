mod common;

use pdn_core::pca::{fit_pca_weighted, DensityMap};
use pdn_core::{density_map, fit_pca, PcaModel, PdnError};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use common::{naive_density, random_mixture};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two random orthonormal directions by Gram-Schmidt.
fn random_plane<R: Rng>(rng: &mut R, d: usize) -> [Vec<f64>; 2] {
    let mut u: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let n = dot(&u, &u).sqrt();
    u.iter_mut().for_each(|x| *x /= n);
    let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let p = dot(&u, &v);
    v.iter_mut().zip(&u).for_each(|(x, a)| *x -= p * a);
    let n = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    [u, v]
}

/// Entries of the rank-2 projector onto span{a, b}.
fn projector(basis: &[Vec<f64>; 2]) -> Vec<f64> {
    let d = basis[0].len();
    let mut p = vec![0.0; d * d];
    for b in basis {
        for i in 0..d {
            for j in 0..d {
                p[i * d + j] += b[i] * b[j];
            }
        }
    }
    p
}

fn residual(model: &PcaModel, points: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .map(|p| {
            let back = model.lift(model.project(p));
            back.iter()
                .zip(p)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
        })
        .sum()
}

fn assert_orthonormal(model: &PcaModel) {
    let [a, b] = &model.components;
    assert!((dot(a, a) - 1.0).abs() < 1e-10);
    assert!((dot(b, b) - 1.0).abs() < 1e-10);
    assert!(dot(a, b).abs() < 1e-10);
}

#[test]
fn recovers_a_planted_plane_exactly() {
    let mut rng = common::rng(31);
    for _ in 0..20 {
        let basis = random_plane(&mut rng, 5);
        let centre: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let points: Vec<Vec<f64>> = (0..300)
            .map(|_| {
                let a = rng.random_range(-3.0..3.0);
                let b = rng.random_range(-1.0..1.0);
                (0..5)
                    .map(|k| centre[k] + a * basis[0][k] + b * basis[1][k])
                    .collect()
            })
            .collect();
        let model = fit_pca(&points).unwrap();
        assert_orthonormal(&model);
        let diff = common::max_abs_diff(&projector(&model.components), &projector(&basis));
        assert!(diff < 1e-10, "projector mismatch {diff:e}");
        assert!(residual(&model, &points) < 1e-18 * points.len() as f64 + 1e-20);
        assert!(model.explained_variance[0] >= model.explained_variance[1]);
    }
}

#[test]
fn isotropic_cloud_has_equal_variances() {
    let mut rng = common::rng(32);
    let points: Vec<Vec<f64>> = (0..20_000)
        .map(|_| (0..5).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let model = fit_pca(&points).unwrap();
    assert_orthonormal(&model);
    for v in model.explained_variance {
        assert!((v - 1.0).abs() < 0.1, "variance {v}");
    }
}

#[test]
fn principal_plane_beats_random_planes() {
    let mut rng = common::rng(33);
    let scales = [3.0, 2.0, 0.7, 0.4, 0.2];
    let points: Vec<Vec<f64>> = (0..2000)
        .map(|_| {
            scales
                .iter()
                .map(|s| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    s * z
                })
                .collect()
        })
        .collect();
    let model = fit_pca(&points).unwrap();
    let best = residual(&model, &points);
    for _ in 0..200 {
        let other = PcaModel {
            components: random_plane(&mut rng, 5),
            ..model.clone()
        };
        assert!(best <= residual(&other, &points));
    }
}

#[test]
fn duplicate_points_equal_doubled_weights() {
    let mut rng = common::rng(34);
    let points: Vec<Vec<f64>> = (0..50)
        .map(|_| (0..4).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let mut doubled = points.clone();
    doubled.extend(points[..10].iter().cloned());
    let mut weights = vec![1.0; 50];
    weights[..10].iter_mut().for_each(|w| *w = 2.0);
    let a = fit_pca(&doubled).unwrap();
    let b = fit_pca_weighted(&points, &weights).unwrap();
    assert!(common::max_abs_diff(&a.mean, &b.mean) < 1e-12);
    for k in 0..2 {
        assert!(common::max_abs_diff(&a.components[k], &b.components[k]) < 1e-9);
    }
}

#[test]
fn sign_convention_makes_largest_entry_positive() {
    let mut rng = common::rng(35);
    let points: Vec<Vec<f64>> = (0..100)
        .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let negated: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().map(|v| -v).collect())
        .collect();
    let a = fit_pca(&points).unwrap();
    let b = fit_pca(&negated).unwrap();
    for model in [&a, &b] {
        for c in &model.components {
            let pivot = c
                .iter()
                .copied()
                .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(pivot > 0.0);
        }
    }
    for k in 0..2 {
        assert!(common::max_abs_diff(&a.components[k], &b.components[k]) < 1e-9);
    }
}

#[test]
fn degenerate_inputs_are_reported() {
    let line: Vec<Vec<f64>> = (0..10)
        .map(|i| vec![i as f64, 2.0 * i as f64, 0.0])
        .collect();
    assert!(matches!(fit_pca(&line), Err(PdnError::DegenerateData(_))));
    assert!(matches!(
        fit_pca(&line[..2]),
        Err(PdnError::DegenerateData(_))
    ));
}

fn map_for(seed: u64, resolution: usize) -> (pdn_core::MixtureParams, PcaModel, DensityMap) {
    let mut rng = common::rng(seed);
    let p = random_mixture(&mut rng, 10, 5, (0.05, 0.2));
    let model = fit_pca_weighted(&p.mu, &p.pi).unwrap();
    let markers = vec![
        ("A".to_string(), vec![0.5; 5]),
        ("B".to_string(), p.mu[0].clone()),
    ];
    let map = density_map(&p, &model, resolution, &markers).unwrap();
    (p, model, map)
}

#[test]
fn map_values_are_direct_density_evaluations() {
    let (p, model, map) = map_for(36, 41);
    assert_eq!(map.values.len(), 41);
    let mut rng = common::rng(37);
    for _ in 0..200 {
        let (r, c) = (rng.random_range(0..41), rng.random_range(0..41));
        let direct = naive_density(&p, &model.lift([map.x[c], map.y[r]]));
        let got = map.values[r][c];
        assert!(
            (got - direct).abs() <= 1e-12 * direct.max(1.0),
            "{got} vs {direct}"
        );
    }
}

#[test]
fn refined_map_contains_the_coarse_cell_centres() {
    let (_, _, coarse) = map_for(38, 15);
    let (_, _, fine) = map_for(38, 45);
    assert_eq!(coarse.extent, fine.extent);
    for (i, row) in coarse.values.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert!((coarse.x[j] - fine.x[3 * j + 1]).abs() < 1e-12);
            assert!((coarse.y[i] - fine.y[3 * i + 1]).abs() < 1e-12);
            let w = fine.values[3 * i + 1][3 * j + 1];
            assert!((v - w).abs() <= 1e-12 * v.max(1.0));
        }
    }
    let coarse_max = coarse.values.iter().flatten().copied().fold(0.0, f64::max);
    let fine_max = fine.values.iter().flatten().copied().fold(0.0, f64::max);
    assert!(fine_max >= coarse_max);
}

#[test]
fn exports_are_well_formed() {
    let (_, _, map) = map_for(39, 20);
    let csv = map.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 21);
    assert!(lines.iter().all(|l| l.split(',').count() == 21));
    let levels = map.quantile_levels();
    assert_eq!(levels.len(), 10);
    assert!(levels.windows(2).all(|w| w[0] <= w[1]));
    let svg = map.to_svg();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains(">A<") && svg.contains(">B<"));
}
