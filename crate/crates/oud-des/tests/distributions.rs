use oud_des::dist::{categorical, inverse_normal_cdf, DistributionSpec};
use oud_des::estimation::{fit_lognormal_mode_quantile, ModeQuantileInput};
use oud_des::rng::{Keyed, Stream, StreamKey};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Exp, LogNormal, Normal, Triangular};

const N: u32 = 200_000;

fn draws(d: &DistributionSpec<f64>, seed: u64) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..N).map(|i| d.sample(StreamKey::new(seed, 0, Stream::OpioidDeath, i, 0)).unwrap()).collect();
    xs.sort_by(f64::total_cmp);
    xs
}

fn ks(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

#[test]
fn lognormal_matches_reference_cdf() {
    for (mu, sigma) in [(0.82, 0.48), (2.16, 1.47), (17.60, 4.19)] {
        let xs = draws(&DistributionSpec::lognormal(mu, sigma), 1);
        let r = LogNormal::new(mu, sigma).unwrap();
        let d = ks(&xs, |x| r.cdf(x));
        assert!(d <= 0.01, "LN({mu},{sigma}) KS {d}");
    }
}

#[test]
fn shifted_truncated_lognormal_matches_conditional_cdf() {
    let law = DistributionSpec::lognormal_shifted(2.08, 0.76, 12.0, 105.0);
    let xs = draws(&law, 2);
    assert!(xs.iter().all(|&x| x > 12.0 && x < 105.0));
    let r = LogNormal::new(2.08, 0.76).unwrap();
    let top = r.cdf(93.0);
    let d = ks(&xs, |x| r.cdf(x - 12.0) / top);
    assert!(d <= 0.01, "KS {d}");
}

#[test]
fn triangular_matches_reference_cdf() {
    for (a, c, b) in [(27_299.0, 34_224.0, 43_261.0), (0.2, 0.4, 0.8), (5.0, 5.0, 15.0)] {
        let xs = draws(&DistributionSpec::triangular(a, c, b), 3);
        let r = Triangular::new(a, b, c).unwrap();
        let d = ks(&xs, |x| r.cdf(x));
        assert!(d <= 0.01, "Tri({a},{c},{b}) KS {d}");
    }
}

#[test]
fn exponential_matches_reference_cdf() {
    for mean in [10.87, 1.0 / 10.87] {
        let xs = draws(&DistributionSpec::exponential(mean), 4);
        let r = Exp::new(1.0 / mean).unwrap();
        let d = ks(&xs, |x| r.cdf(x));
        assert!(d <= 0.01, "Exp({mean}) KS {d}");
    }
}

#[test]
fn inverse_normal_round_trip() {
    let n = Normal::new(0.0, 1.0).unwrap();
    for i in 1..100_000 {
        let p = i as f64 / 100_000.0;
        let z: f64 = inverse_normal_cdf(p).unwrap();
        assert!((n.cdf(z) - p).abs() < 1e-8, "p={p}");
    }
    for p in [1e-12, 1e-8, 1e-5, 1.0 - 1e-5, 1.0 - 1e-8] {
        let z: f64 = inverse_normal_cdf(p).unwrap();
        assert!(((n.cdf(z) - p) / p.min(1.0 - p)).abs() < 1e-8, "p={p}");
    }
}

#[test]
fn categorical_frequencies() {
    let probs = [0.1, 0.2, 0.3, 0.4];
    let k = Keyed::new(8, 0);
    let mut counts = [0u32; 4];
    for i in 0..N {
        counts[categorical(&probs, k.uniform(Stream::StartingState, i, 0))] += 1;
    }
    for (c, p) in counts.iter().zip(probs) {
        assert!((*c as f64 / N as f64 - p).abs() < 0.005);
    }
}

proptest! {
    #[test]
    fn quantile_is_monotone(mu in -2.0f64..12.0, sigma in 0.05f64..4.0, u in 0.001f64..0.998) {
        let d = DistributionSpec::<f64>::lognormal(mu, sigma);
        let a = d.quantile(u).unwrap();
        let b = d.quantile(u + 0.001).unwrap();
        prop_assert!(a > 0.0 && b >= a);
    }

    #[test]
    fn triangular_stays_in_support(a in 0.0f64..100.0, w1 in 0.0f64..50.0, w2 in 0.0f64..50.0, seed in any::<u64>()) {
        let d = DistributionSpec::<f64>::triangular(a, a + w1, a + w1 + w2);
        let x = d.sample(StreamKey::new(seed, 0, Stream::StartingPopulation, 0, 0)).unwrap();
        prop_assert!(x >= a && x <= a + w1 + w2);
    }

    #[test]
    fn truncation_is_respected(mu in 0.0f64..3.0, sigma in 0.1f64..1.5, seed in any::<u64>()) {
        let d = DistributionSpec::<f64>::lognormal_shifted(mu, sigma, 12.0, 105.0);
        let mut key = StreamKey::new(seed, 0, Stream::InitiationAge, 0, 0);
        let x = d.sample_with(&mut key).unwrap();
        prop_assert!(x > 12.0 && x < 105.0);
    }

    #[test]
    fn mode_quantile_fit_recovers_parameters(mu in 0.5f64..10.0, sigma in 0.2f64..3.0, q in 0.55f64..0.99) {
        // Build the inputs from a known law, then fit them back.
        let mode = (mu - sigma * sigma).exp();
        let z: f64 = inverse_normal_cdf(q).unwrap();
        let xq = (mu + sigma * z).exp();
        let (m2, s2) = fit_lognormal_mode_quantile(&ModeQuantileInput::<f64>::new(mode, 0.0, xq, q)).unwrap();
        prop_assert!((m2 - mu).abs() < 1e-6 && (s2 - sigma).abs() < 1e-6);
    }

    #[test]
    fn categorical_index_in_range(u in 0.0f64..1.0) {
        let probs = [0.25, 0.25, 0.5];
        prop_assert!(categorical(&probs, u) < 3);
    }
}
