use oud_des::dist::inverse_normal_cdf;
use oud_des::rng::{Keyed, Stream};
use oud_des::stats::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

fn normals(seed: u64, rep: u32, n: usize) -> Vec<f64> {
    let k = Keyed::new(seed, rep);
    (0..n).map(|i| inverse_normal_cdf(k.uniform(Stream::Arrival, 1, i as u32)).unwrap()).collect()
}

#[test]
fn mean_ci_covers_at_nominal_rate() {
    let trials = 1000;
    let covered = (0..trials)
        .filter(|&t| {
            let c = mean_ci(&normals(101, t, 10_000), 0.05).unwrap();
            c.lo <= 0.0 && 0.0 <= c.hi
        })
        .count();
    let rate = covered as f64 / trials as f64;
    assert!((0.93..=0.97).contains(&rate), "coverage {rate}");
}

#[test]
fn paired_t_matches_reference_distribution() {
    let a = normals(3, 0, 50);
    let b: Vec<f64> = normals(3, 1, 50).iter().map(|x| x + 0.3).collect();
    let r = paired_t_test(&a, &b).unwrap();
    let t = StudentsT::new(0.0, 1.0, 49.0).unwrap();
    assert!((r.p - 2.0 * t.cdf(-r.t.abs())).abs() < 1e-12);
}

#[test]
fn replications_monotone_in_inputs() {
    let mut last = u64::MAX;
    for h in [0.5, 1.0, 2.0, 5.0, 10.0] {
        let n = required_replications(30.0, h, 0.05, 600).unwrap();
        assert!(n <= last);
        last = n;
    }
    let mut last = 0;
    for s in [1.0, 10.0, 30.0, 60.0] {
        let n = required_replications(s, 5.0, 0.05, 600).unwrap();
        assert!(n >= last);
        last = n;
    }
}

#[test]
fn skewness_of_normal_sample() {
    assert!(skewness(&normals(9, 0, 100_000)).unwrap().abs() < 0.05);
}

#[test]
fn lilliefors_is_calibrated() {
    let null = LillieforsNull::new(600, 10_000, LILLIEFORS_SEED).unwrap();
    let trials = 100;
    let kept = (0..trials).filter(|&t| null.test(&normals(55, t, 600)).unwrap().1 > 0.05).count();
    assert!(kept >= 90, "kept {kept} of {trials}");
    let rejected = (0..trials)
        .filter(|&t| {
            let k = Keyed::new(56, t);
            let u: Vec<f64> = (0..600).map(|i| k.uniform(Stream::Arrival, 2, i)).collect();
            null.test(&u).unwrap().1 < 0.05
        })
        .count();
    assert!(rejected >= 99, "rejected {rejected} of {trials}");
}

#[test]
fn prediction_interval_contains_ci() {
    let xs: Vec<f64> = normals(4, 0, 600).iter().map(|x| 100.0 + 10.0 * x).collect();
    let ci = mean_ci(&xs, 0.05).unwrap();
    let (lo, hi) = prediction_interval(&xs, 0.05).unwrap();
    assert!(lo < ci.lo && ci.hi < hi);
}

#[test]
fn ols_null_slopes_are_rarely_significant() {
    let trials = 400;
    let mut significant = 0;
    for t in 0..trials {
        let x = normals(70, t, 100);
        let y = normals(71, t, 100);
        let design: Vec<Vec<f64>> = x.iter().map(|v| vec![1.0, *v]).collect();
        if ols(&design, &y).unwrap().p[1] < 0.05 {
            significant += 1;
        }
    }
    let rate = significant as f64 / trials as f64;
    assert!(rate < 0.08, "false positive rate {rate}");
}

#[test]
fn ols_recovers_known_coefficients() {
    let x1 = normals(80, 0, 500);
    let x2 = normals(80, 1, 500);
    let e = normals(80, 2, 500);
    let y: Vec<f64> = (0..500).map(|i| 1.0 - 2.0 * x1[i] + 0.5 * x2[i] + 0.1 * e[i]).collect();
    let design: Vec<Vec<f64>> = (0..500).map(|i| vec![1.0, x1[i], x2[i]]).collect();
    let f = ols(&design, &y).unwrap();
    for (got, want) in f.coefficients.iter().zip([1.0, -2.0, 0.5]) {
        assert!((got - want).abs() < 0.02, "{got} vs {want}");
    }
    assert!(f.p.iter().all(|p| *p < 1e-10));
}
