mod common;

use std::f64::consts::PI;

use common::{factorial, gauss_hermite_prob, gauss_legendre, hermite, legendre};
use pdd_gsa::measures::family_for;
use pdd_gsa::Distribution;
use proptest::prelude::*;

fn gram_error(dist: Distribution, nodes: &[f64], weights: &[f64], max_degree: usize) -> f64 {
    let fam = family_for(dist, max_degree).unwrap();
    let mut worst = 0.0f64;
    for i in 0..=max_degree {
        for j in 0..=max_degree {
            let inner: f64 = nodes
                .iter()
                .zip(weights)
                .map(|(&x, &w)| w * fam.eval(i, x).unwrap() * fam.eval(j, x).unwrap())
                .sum();
            let expected = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((inner - expected).abs());
        }
    }
    worst
}

#[test]
fn uniform_family_is_orthonormal_under_quadrature() {
    let (t, w) = gauss_legendre(64);
    for (lo, hi) in [(-1.0, 1.0), (-PI, PI), (2.0, 7.5)] {
        let dist = Distribution::uniform(lo, hi).unwrap();
        // Map the rule to [lo, hi] with the uniform density folded into the weights.
        let nodes: Vec<f64> = t.iter().map(|t| 0.5 * (lo + hi) + 0.5 * (hi - lo) * t).collect();
        let weights: Vec<f64> = w.iter().map(|w| 0.5 * w).collect();
        let err = gram_error(dist, &nodes, &weights, 11);
        assert!(err < 1e-12, "[{lo}, {hi}]: {err:e}");
    }
}

#[test]
fn normal_family_is_orthonormal_under_quadrature() {
    let (z, w) = gauss_hermite_prob(64);
    for (mu, sigma) in [(0.0, 1.0), (3.0, 0.25), (-1.0, 4.0)] {
        let dist = Distribution::normal(mu, sigma).unwrap();
        let nodes: Vec<f64> = z.iter().map(|z| mu + sigma * z).collect();
        let err = gram_error(dist, &nodes, &w, 11);
        assert!(err < 1e-10, "N({mu}, {sigma}): {err:e}");
    }
}

#[test]
fn quadrature_rules_are_sane() {
    let (_, w) = gauss_legendre(64);
    assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
    let (z, w) = gauss_hermite_prob(64);
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let fourth: f64 = z.iter().zip(&w).map(|(z, w)| w * z.powi(4)).sum();
    assert!((fourth - 3.0).abs() < 1e-10);
}

proptest! {
    #[test]
    fn uniform_matches_scaled_legendre(t in -1.0f64..1.0, k in 0usize..=11) {
        let fam = family_for(Distribution::uniform(-1.0, 1.0).unwrap(), 11).unwrap();
        let expected = (2.0 * k as f64 + 1.0).sqrt() * legendre(k, t);
        prop_assert!((fam.eval(k, t).unwrap() - expected).abs() < 1e-12 * expected.abs().max(1.0));
    }

    #[test]
    fn normal_matches_scaled_hermite(z in -5.0f64..5.0, k in 0usize..=11) {
        let fam = family_for(Distribution::standard_normal(), 11).unwrap();
        let expected = hermite(k, z) / factorial(k).sqrt();
        prop_assert!((fam.eval(k, z).unwrap() - expected).abs() < 1e-10 * expected.abs().max(1.0));
    }

    #[test]
    fn eval_all_agrees_with_eval(x in -3.0f64..3.0, lo in -5.0f64..0.0, width in 0.1f64..10.0) {
        for dist in [Distribution::uniform(lo, lo + width).unwrap(), Distribution::normal(lo, width).unwrap()] {
            let fam = family_for(dist, 8).unwrap();
            let x = if matches!(dist, Distribution::Uniform { .. }) { lo + width * (x + 3.0) / 6.0 } else { x };
            let mut all = vec![0.0; 9];
            fam.eval_all(x, &mut all).unwrap();
            for (k, v) in all.iter().enumerate() {
                prop_assert_eq!(*v, fam.eval(k, x).unwrap());
            }
        }
    }
}
