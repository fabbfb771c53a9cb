//! Sampling laws and the inverse normal CDF.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifetable::LifeTable;
use crate::real::Real;
use crate::rng::{uniform, StreamKey};

/// Default cap on rejection attempts for truncated laws.
pub const TRUNCATION_CAP: u32 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Days,
    Years,
    /// Head counts, fractions, probabilities.
    None,
}

/// Parametric family plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", bound(deserialize = "T: Deserialize<'de>"))]
pub enum Family<T> {
    Lognormal {
        mu: T,
        sigma: T,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        location: Option<T>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truncation: Option<T>,
    },
    Triangular {
        min: T,
        mode: T,
        max: T,
    },
    Exponential {
        mean: T,
    },
    Bernoulli {
        p: T,
    },
    Multinomial {
        probs: Vec<T>,
    },
    /// Residual life from `current_age` under a life table, in days.
    EmpiricalSurvival {
        table: LifeTable<T>,
        current_age: T,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct DistributionSpec<T> {
    #[serde(flatten)]
    pub family: Family<T>,
    #[serde(default)]
    pub units: Units,
}

impl<T: Real> DistributionSpec<T> {
    pub fn lognormal(mu: f64, sigma: f64) -> Self {
        Self::from_family(Family::Lognormal { mu: T::lit(mu), sigma: T::lit(sigma), location: None, truncation: None })
    }

    pub fn lognormal_shifted(mu: f64, sigma: f64, location: f64, truncation: f64) -> Self {
        Self::from_family(Family::Lognormal {
            mu: T::lit(mu),
            sigma: T::lit(sigma),
            location: Some(T::lit(location)),
            truncation: Some(T::lit(truncation)),
        })
    }

    pub fn triangular(min: f64, mode: f64, max: f64) -> Self {
        Self { family: Family::Triangular { min: T::lit(min), mode: T::lit(mode), max: T::lit(max) }, units: Units::None }
    }

    pub fn exponential(mean: f64) -> Self {
        Self::from_family(Family::Exponential { mean: T::lit(mean) })
    }

    pub fn from_family(family: Family<T>) -> Self {
        Self { family, units: Units::Days }
    }

    pub fn with_units(mut self, units: Units) -> Self {
        self.units = units;
        self
    }

    /// Lognormal parameters, if this is a lognormal.
    pub fn mu_sigma(&self) -> Option<(T, T)> {
        match self.family {
            Family::Lognormal { mu, sigma, .. } => Some((mu, sigma)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        match &self.family {
            Family::Lognormal { mu, sigma, location, truncation } => {
                if !mu.is_finite() || !sigma.is_finite() || *sigma <= T::zero() {
                    return bad("lognormal sigma must be > 0 and parameters finite");
                }
                if let (Some(g), Some(t)) = (location, truncation) {
                    if *t <= *g {
                        return bad("truncation must exceed location");
                    }
                }
                if let (None, Some(t)) = (location, truncation) {
                    if *t <= T::zero() {
                        return bad("truncation must be positive");
                    }
                }
            }
            Family::Triangular { min, mode, max } => {
                if !(min <= mode && mode <= max) {
                    return bad("triangular requires min <= mode <= max");
                }
            }
            Family::Exponential { mean } => {
                if !(*mean > T::zero()) {
                    return bad("exponential mean must be > 0");
                }
            }
            Family::Bernoulli { p } => {
                if !(*p >= T::zero() && *p <= T::one()) {
                    return bad("probability out of range");
                }
            }
            Family::Multinomial { probs } => {
                if probs.is_empty() || probs.iter().any(|p| !(*p >= T::zero())) {
                    return bad("multinomial needs non-negative probabilities");
                }
                let s = probs.iter().fold(T::zero(), |a, &b| a + b);
                if (s - T::one()).abs() > T::lit(1e-6) {
                    return bad("multinomial probabilities must sum to 1");
                }
            }
            Family::EmpiricalSurvival { table, current_age } => {
                table.validate()?;
                if *current_age < table.min_age() {
                    return bad("current age below life table");
                }
            }
        }
        Ok(())
    }

    /// Inverse CDF at `u`, ignoring any truncation. Only for the continuous
    /// parametric families.
    pub fn quantile(&self, u: T) -> Result<T> {
        self.validate()?;
        match &self.family {
            Family::Lognormal { mu, sigma, location, .. } => {
                Ok(location.unwrap_or_else(T::zero) + (*mu + *sigma * inverse_normal_cdf(u)?).exp())
            }
            Family::Triangular { min, mode, max } => Ok(triangular_inverse(*min, *mode, *max, u)),
            Family::Exponential { mean } => Ok(-*mean * (T::one() - u).ln()),
            _ => Err(Error::InvalidSpec("no closed-form quantile for this family".into())),
        }
    }

    /// Draws one value. Rejection steps advance `key.counter`; on return it
    /// points past the last uniform consumed.
    pub fn sample_with(&self, key: &mut StreamKey) -> Result<T> {
        self.sample_with_cap(key, TRUNCATION_CAP)
    }

    pub fn sample_with_cap(&self, key: &mut StreamKey, cap: u32) -> Result<T> {
        self.validate()?;
        Ok(match &self.family {
            Family::Lognormal { mu, sigma, location, truncation } => {
                let g = location.unwrap_or_else(T::zero);
                let mut attempts = 0;
                loop {
                    let u = T::lit(draw(key));
                    let v = g + (*mu + *sigma * inverse_normal_cdf(u)?).exp();
                    match truncation {
                        Some(t) if v > *t => {
                            attempts += 1;
                            if attempts >= cap {
                                return Err(Error::TruncationCap(cap));
                            }
                        }
                        _ => break v,
                    }
                }
            }
            Family::Triangular { min, mode, max } => triangular_inverse(*min, *mode, *max, T::lit(draw(key))),
            Family::Exponential { mean } => -*mean * (T::one() - T::lit(draw(key))).ln(),
            Family::Bernoulli { p } => {
                if T::lit(draw(key)) < *p {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Family::Multinomial { probs } => T::lit(categorical(probs, T::lit(draw(key))) as f64),
            Family::EmpiricalSurvival { table, current_age } => table.residual_days(*current_age, T::lit(draw(key)))?,
        })
    }

    /// Draws one value from a single key (the counter is not reported back).
    pub fn sample(&self, key: StreamKey) -> Result<T> {
        let mut k = key;
        self.sample_with(&mut k)
    }
}

#[inline]
fn draw(key: &mut StreamKey) -> f64 {
    let u = uniform(key);
    *key = key.next();
    u
}

/// Inverse CDF of Tri(a, c, b).
pub fn triangular_inverse<T: Real>(a: T, c: T, b: T, u: T) -> T {
    if b <= a {
        return a;
    }
    let fc = (c - a) / (b - a);
    if u < fc {
        a + (u * (b - a) * (c - a)).sqrt()
    } else {
        b - ((T::one() - u) * (b - a) * (b - c)).sqrt()
    }
}

/// Index of the category that `u` falls in. Mass left over after the last
/// probability goes to the last category.
pub fn categorical<T: Real>(probs: &[T], u: T) -> usize {
    let mut acc = T::zero();
    for (i, p) in probs.iter().enumerate() {
        acc = acc + *p;
        if u < acc {
            return i;
        }
    }
    probs.len().saturating_sub(1)
}

/// Standard normal quantile, Wichura's AS241 (PPND16).
///
/// Absolute error is about 1e-16 relative in `f64`; the `f32` instantiation
/// is limited by its own precision.
pub fn inverse_normal_cdf<T: Real>(q: T) -> Result<T> {
    if !(q > T::zero() && q < T::one()) {
        return Err(Error::Domain(format!("normal quantile needs 0 < q < 1, got {q}")));
    }
    let l = T::lit;
    let poly = |c: &[f64], x: T| c.iter().rev().fold(T::zero(), |acc, &k| acc * x + l(k));

    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        133.141_667_891_784_377_45,
        1_971.590_950_306_551_442_7,
        13_731.693_765_509_461_125,
        45_921.953_931_549_871_457,
        67_265.770_927_008_700_853,
        33_430.575_583_588_128_105,
        2_509.080_928_730_122_672_7,
    ];
    const B: [f64; 8] = [
        1.0,
        42.313_330_701_600_911_252,
        687.187_007_492_057_908_3,
        5_394.196_021_424_751_107_7,
        21_213.794_301_586_595_867,
        39_307.895_800_092_710_61,
        28_729.085_735_721_942_674,
        5_226.495_278_852_854_561,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        0.241_780_725_177_450_611_77,
        0.022_723_844_989_269_184_583_3,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        0.689_767_334_985_100_004_55,
        0.148_103_976_427_480_074_59,
        0.015_198_666_563_616_457_196_6,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        0.296_560_571_828_504_891_23,
        0.026_532_189_526_576_123_093,
        0.001_242_660_947_388_078_438_6,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        0.599_832_206_555_887_937_69,
        0.136_929_880_922_735_805_31,
        0.014_875_361_290_850_614_852_5,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];

    let half = l(0.5);
    let dq = q - half;
    if dq.abs() <= l(0.425) {
        let r = l(0.180_625) - dq * dq;
        return Ok(dq * poly(&A, r) / poly(&B, r));
    }
    let tail = if dq < T::zero() { q } else { T::one() - q };
    let mut r = (-tail.ln()).sqrt();
    let x = if r <= l(5.0) {
        r = r - l(1.6);
        poly(&C, r) / poly(&D, r)
    } else {
        r = r - l(5.0);
        poly(&E, r) / poly(&F, r)
    };
    Ok(if dq < T::zero() { -x } else { x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn key() -> StreamKey {
        StreamKey::new(1, 0, Stream::CjsStay, 1, 0)
    }

    #[test]
    fn closed_form_quantiles() {
        let d = DistributionSpec::<f64>::exponential(10.87);
        assert!((d.quantile(0.5).unwrap() - 7.535).abs() < 1e-3);
        let t = DistributionSpec::<f64>::triangular(3.0, 3.0, 3.0);
        for u in [0.01, 0.5, 0.99] {
            assert_eq!(t.quantile(u).unwrap(), 3.0);
        }
        let ln = DistributionSpec::<f64>::lognormal(2.16, 1.47);
        assert!((ln.quantile(0.5).unwrap() - 8.67).abs() < 0.01);
    }

    #[test]
    fn quantile_fixed_points() {
        assert_eq!(inverse_normal_cdf(0.5f64).unwrap(), 0.0);
        assert!((inverse_normal_cdf(0.9f64).unwrap() - 1.2816).abs() < 1e-4);
        assert!((inverse_normal_cdf(0.723f64).unwrap() - 0.591777).abs() < 1e-5);
        assert!(inverse_normal_cdf(0.0f64).is_err());
        assert!(inverse_normal_cdf(1.0f64).is_err());
        let z32 = inverse_normal_cdf(0.975f32).unwrap();
        assert!((z32 - 1.959_964).abs() < 1e-5);
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = DistributionSpec::<f64>::lognormal(1.0, 0.0);
        assert!(bad.sample(key()).is_err());
        let bad = DistributionSpec::<f64>::triangular(3.0, 1.0, 5.0);
        assert!(bad.sample(key()).is_err());
        let bad = DistributionSpec::<f64>::exponential(-1.0);
        assert!(bad.sample(key()).is_err());
        let bad = DistributionSpec::<f64>::lognormal_shifted(1.0, 1.0, 12.0, 10.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn truncation_cap_is_an_error() {
        // essentially all mass above the bound
        let d = DistributionSpec::<f64>::lognormal_shifted(10.0, 0.1, 0.0, 1.0);
        let mut k = key();
        assert!(matches!(d.sample_with_cap(&mut k, 50), Err(Error::TruncationCap(50))));
    }

    #[test]
    fn truncation_respected_and_counter_advances() {
        let d = DistributionSpec::<f64>::lognormal_shifted(3.74, 0.49, 12.0, 105.0);
        let mut k = key();
        for _ in 0..10_000 {
            let v = d.sample_with(&mut k).unwrap();
            assert!(v > 12.0 && v <= 105.0);
        }
        assert!(k.counter >= 10_000);
    }

    #[test]
    fn categorical_edges() {
        let p = [0.0218, 0.01, 0.2227];
        assert_eq!(categorical(&p, 0.0), 0);
        assert_eq!(categorical(&p, 0.03), 1);
        assert_eq!(categorical(&p, 0.2), 2);
        assert_eq!(categorical(&p, 0.999), 2);
    }
}
