use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::distribution::{ChiSquared as StatChi2, ContinuousCDF, FisherSnedecor};

use subswap_core::distributions::{
    chi2_cdf, f_cdf, generalized_f_below_one, noncentral_chi2_cdf, noncentral_f_cdf, quadform_below_zero, Dof,
    Noncentrality, WeightedChiSquareMix,
};

fn dof(d: u32) -> Dof {
    Dof::new(d).unwrap()
}

fn nc(x: f64) -> Noncentrality {
    Noncentrality::new(x).unwrap()
}

/// Statistical properties use a fixed seed so a 3-sigma miss is reproducible.
fn seeded(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..Config::default()
    }
}

fn noncentral_chi2_draw(rng: &mut ChaCha8Rng, d: u32, delta: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    let shifted = (z + delta.sqrt()).powi(2);
    if d == 1 {
        shifted
    } else {
        shifted + ChiSquared::new(f64::from(d - 1)).unwrap().sample(rng)
    }
}

fn three_sigma(p: f64, hits: u64, trials: u64) -> bool {
    let freq = hits as f64 / trials as f64;
    let sd = (p * (1.0 - p) / trials as f64).sqrt().max(1.0 / trials as f64);
    (freq - p).abs() <= 3.0 * sd
}

proptest! {
    #[test]
    fn cdfs_are_monotone_and_bounded(d1 in 1u32..40, d2 in 1u32..60, delta in 0.0f64..50.0, top in 0.5f64..20.0) {
        let mut last = [0.0f64; 4];
        for k in 0..100 {
            let x = top * k as f64 / 99.0;
            let vals = [
                chi2_cdf(x, dof(d1)).unwrap().value(),
                noncentral_chi2_cdf(x, dof(d1), nc(delta)).unwrap().value(),
                f_cdf(x, dof(d1), dof(d2)).unwrap().value(),
                noncentral_f_cdf(x, dof(d1), dof(d2), nc(delta)).unwrap().value(),
            ];
            for (v, l) in vals.iter().zip(&mut last) {
                prop_assert!((0.0..=1.0).contains(v));
                prop_assert!(*v >= *l - 1e-14, "{v} < {l} at x={x}");
                *l = *v;
            }
        }
    }

    #[test]
    fn zero_noncentrality_is_central(d1 in 1u32..60, d2 in 1u32..80, x in 0.0f64..30.0) {
        let a = noncentral_chi2_cdf(x, dof(d1), nc(0.0)).unwrap().value();
        prop_assert!((a - chi2_cdf(x, dof(d1)).unwrap().value()).abs() <= 1e-12);
        let b = noncentral_f_cdf(x, dof(d1), dof(d2), nc(0.0)).unwrap().value();
        prop_assert!((b - f_cdf(x, dof(d1), dof(d2)).unwrap().value()).abs() <= 1e-12);
    }

    #[test]
    fn central_laws_match_statrs(d1 in 1u32..80, d2 in 1u32..80, x in 0.01f64..10.0) {
        let chi = StatChi2::new(f64::from(d1)).unwrap().cdf(x * f64::from(d1));
        prop_assert!((chi2_cdf(x * f64::from(d1), dof(d1)).unwrap().value() - chi).abs() <= 1e-10);
        let f = FisherSnedecor::new(f64::from(d1), f64::from(d2)).unwrap().cdf(x);
        prop_assert!((f_cdf(x, dof(d1), dof(d2)).unwrap().value() - f).abs() <= 1e-10);
    }

    #[test]
    fn quadform_scale_invariant(
        pos in prop::collection::vec((0.05f64..5.0, 1u32..8), 1..5),
        neg in prop::collection::vec((0.05f64..5.0, 1u32..8), 1..3),
        c in 1e-3f64..1e3,
    ) {
        let mix = |v: &[(f64, u32)], s: f64| {
            WeightedChiSquareMix::new(v.iter().map(|t| t.0 * s).collect(), v.iter().map(|t| dof(t.1)).collect()).unwrap()
        };
        let a = quadform_below_zero(&mix(&pos, 1.0), &mix(&neg, 1.0)).unwrap();
        let b = quadform_below_zero(&mix(&pos, c), &mix(&neg, c)).unwrap();
        prop_assert!((a.probability.value() - b.probability.value()).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(seeded(8))]

    #[test]
    fn noncentral_f_matches_monte_carlo(d1 in 1u32..12, d2 in 2u32..40, delta in 0.0f64..20.0, x in 0.3f64..3.0, seed: u64) {
        let p = noncentral_f_cdf(x, dof(d1), dof(d2), nc(delta)).unwrap().value();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let den = ChiSquared::new(f64::from(d2)).unwrap();
        let trials = 1_000_000u64;
        let hits = (0..trials)
            .filter(|_| {
                let num = noncentral_chi2_draw(&mut rng, d1, delta) / f64::from(d1);
                num / (den.sample(&mut rng) / f64::from(d2)) <= x
            })
            .count() as u64;
        prop_assert!(three_sigma(p, hits, trials), "p={p} freq={}", hits as f64 / trials as f64);
    }

    #[test]
    fn generalized_f_matches_monte_carlo(
        weights in prop::collection::vec(0.2f64..6.0, 1..4),
        k in 1u32..6,
        d2 in 2u32..30,
        seed: u64,
    ) {
        let p = generalized_f_below_one(&weights, dof(k), dof(d2)).unwrap().probability.value();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let each = ChiSquared::new(f64::from(k)).unwrap();
        let den = ChiSquared::new(f64::from(d2)).unwrap();
        let scale = weights.len() as f64 * f64::from(k);
        let trials = 1_000_000u64;
        let hits = (0..trials)
            .filter(|_| {
                let num: f64 = weights.iter().map(|w| w * each.sample(&mut rng)).sum::<f64>() / scale;
                num / (den.sample(&mut rng) / f64::from(d2)) < 1.0
            })
            .count() as u64;
        prop_assert!(three_sigma(p, hits, trials), "p={p} freq={}", hits as f64 / trials as f64);
    }
}

#[test]
fn known_values() {
    // Median of F(d, d) is exactly 1.
    for d in [1, 2, 7, 40, 400] {
        assert!((f_cdf(1.0, dof(d), dof(d)).unwrap().value() - 0.5).abs() <= 1e-12);
    }
    // chi2 with 2 dof is exponential with mean 2.
    let x = 3.7;
    assert!((chi2_cdf(x, dof(2)).unwrap().value() - (1.0 - (-x / 2.0f64).exp())).abs() < 1e-15);
    // Unit weights reduce the generalized F to the central F.
    for (p, k, d2) in [(1usize, 2u32, 10u32), (2, 4, 24), (3, 8, 40)] {
        let gf = generalized_f_below_one(&vec![1.0; p], dof(k), dof(d2)).unwrap().probability.value();
        let f = f_cdf(1.0, dof(p as u32 * k), dof(d2)).unwrap().value();
        assert!((gf - f).abs() <= 1e-10, "{gf} vs {f}");
    }
}
