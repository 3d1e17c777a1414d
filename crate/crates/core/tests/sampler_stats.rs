//! Distributional checks of the obstacle samplers.

use std::f64::consts::{PI, TAU};

use hypervis_core::hypgeo::wrap_angle;
use hypervis_core::sampler::{
    sample_boolean_scene, sample_line_scene, BooleanModelConfig, BooleanScene, LineField, RadiusLaw,
    StreamKey,
};
use hypervis_core::visibility::{direction_visibility, visible_set};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

fn config(lambda: f64, window: f64) -> BooleanModelConfig {
    BooleanModelConfig {
        lambda,
        radius_law: RadiusLaw::constant(1.0).unwrap(),
        window_radius: window,
        seed: 21,
    }
}

fn scenes(cfg: &BooleanModelConfig, n: u64) -> Vec<BooleanScene> {
    (0..n)
        .map(|i| sample_boolean_scene(cfg, StreamKey::new(cfg.seed, i)).unwrap())
        .collect()
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Critical KS distance at significance 0.001.
fn ks_critical(n: usize) -> f64 {
    1.949 / (n as f64).sqrt()
}

#[test]
fn ball_counts_are_poisson() {
    let cfg = config(0.2, 3.0);
    let mean = 0.2 * TAU * (3f64.cosh() - 1.0);
    assert!((mean - 11.394_76).abs() < 1e-5);
    let n = 100_000;
    let counts: Vec<usize> = scenes(&cfg, n).iter().map(|s| s.balls.len()).collect();

    let avg = counts.iter().sum::<usize>() as f64 / n as f64;
    let var = counts.iter().map(|&c| (c as f64 - avg).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((avg - mean).abs() < 3.0 * (var / n as f64).sqrt(), "{avg}");

    // χ² over bins with expected count ≥ 5, tails pooled
    let pois = Poisson::new(mean).unwrap();
    let max = *counts.iter().max().unwrap();
    let mut observed = vec![0f64; max + 2];
    for &c in &counts {
        observed[c] += 1.0;
    }
    let expected: Vec<f64> = (0..=max).map(|k| n as f64 * pois.pmf(k as u64)).collect();
    let (mut bins, mut obs_acc, mut exp_acc) = (vec![], 0.0, 0.0);
    for k in 0..=max {
        obs_acc += observed[k];
        exp_acc += expected[k];
        if exp_acc >= 5.0 && n as f64 * (1.0 - cdf_upto(&pois, k)) >= 5.0 {
            bins.push((obs_acc, exp_acc));
            obs_acc = 0.0;
            exp_acc = 0.0;
        }
    }
    let rest_exp = n as f64 - bins.iter().map(|b| b.1).sum::<f64>();
    bins.push((obs_acc, rest_exp));
    let chi2: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let crit = ChiSquared::new((bins.len() - 1) as f64)
        .unwrap()
        .inverse_cdf(0.999);
    assert!(chi2 < crit, "χ² = {chi2} ≥ {crit} with {} bins", bins.len());
}

fn cdf_upto(p: &Poisson, k: usize) -> f64 {
    (0..=k as u64).map(|j| p.pmf(j)).sum()
}

#[test]
fn radial_law_matches_inversion_formula() {
    let window = 3.0;
    let cfg = config(0.2, window);
    let ts: Vec<f64> = scenes(&cfg, 5_000)
        .iter()
        .flat_map(|s| s.balls.iter().map(|b| b.t))
        .collect();
    let cdf = |t: f64| (t.cosh() - 1.0) / (window.cosh() - 1.0);
    let n = ts.len();
    let below = ts.iter().filter(|&&t| t <= window / 2.0).count() as f64 / n as f64;
    let p = cdf(window / 2.0);
    assert!(
        (below - p).abs() < 3.3 * (p * (1.0 - p) / n as f64).sqrt(),
        "{below} vs {p}"
    );
    let d = ks_distance(ts, cdf);
    assert!(d < ks_critical(n), "KS distance {d} with {n} points");
}

#[test]
fn directions_are_uniform() {
    let cfg = config(0.2, 3.0);
    let phis: Vec<f64> = scenes(&cfg, 5_000)
        .iter()
        .flat_map(|s| s.balls.iter().map(|b| b.phi))
        .collect();
    let n = phis.len();
    let d = ks_distance(phis, |x| x / TAU);
    assert!(d < ks_critical(n), "KS distance {d}");
}

#[test]
fn rotating_a_scene_rotates_its_visible_set() {
    let cfg = config(0.3, 5.0);
    for (i, scene) in scenes(&cfg, 200).into_iter().enumerate() {
        let offset = 0.37 + i as f64;
        let mut rotated = scene.clone();
        for b in &mut rotated.balls {
            b.phi = wrap_angle(b.phi + offset);
        }
        let a = visible_set(&scene, 4.0).unwrap();
        let b = visible_set(&rotated, 4.0).unwrap();
        assert!((a.y - b.y).abs() < 1e-12, "{} vs {}", a.y, b.y);
        assert_eq!(a.nonempty, b.nonempty);
    }
}

#[test]
fn line_count_matches_integrated_density() {
    let (lambda, p_max) = (0.5, 3.0f64);
    let field = LineField::new(lambda, StreamKey::new(0, 0)).unwrap();
    let closed = PI * p_max.sinh();
    assert!((closed - 31.47).abs() < 0.01);
    assert!((field.expected_count(p_max) - closed).abs() < 1e-9);
    // Euclidean footpoint density 2λ(1 + ρ²)/(1 − ρ²)² dρ dθ
    let rho_max = (p_max / 2.0).tanh();
    let quad = quadrature::double_exponential::integrate(
        |rho| 2.0 * lambda * TAU * (1.0 + rho * rho) / (1.0 - rho * rho).powi(2),
        0.0,
        rho_max,
        1e-12,
    )
    .integral;
    assert!((quad - closed).abs() < 1e-8, "{quad} vs {closed}");

    let n = 20_000;
    let counts: Vec<f64> = (0..n)
        .map(|i| {
            sample_line_scene(lambda, p_max, StreamKey::new(3, i))
                .unwrap()
                .lines
                .len() as f64
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / n as f64;
    assert!((mean - closed).abs() < 3.0 * (closed / n as f64).sqrt(), "{mean}");
}

#[test]
fn line_vacancy_matches_santalo() {
    let (lambda, r) = (0.5, 2.0);
    let n = 40_000;
    let clear = (0..n)
        .filter(|&i| {
            let scene = sample_line_scene(lambda, r, StreamKey::new(8, i)).unwrap();
            direction_visibility(&scene, 0.0, r).unwrap() >= r
        })
        .count() as f64;
    let p = (-2.0 * lambda * r).exp();
    let est = clear / n as f64;
    assert!(
        (est - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt(),
        "{est} vs {p}"
    );
}
