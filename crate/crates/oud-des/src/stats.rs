//! Statistics across replications.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::dist::inverse_normal_cdf;
use crate::error::{Error, Result};
use crate::rng::{Keyed, Stream};

fn need(samples: &[f64], n: usize, what: &str) -> Result<()> {
    if samples.len() < n {
        return Err(Error::Domain(format!("{what} needs at least {n} samples, got {}", samples.len())));
    }
    Ok(())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with the n−1 divisor.
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

/// Two-sided Student-t critical value t_{1−α/2, df}.
pub fn t_critical(alpha: f64, df: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha {alpha} outside (0,1)")));
    }
    let t = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(t.inverse_cdf(1.0 - alpha / 2.0))
}

fn t_two_sided_p(t: f64, df: f64) -> f64 {
    let d = StudentsT::new(0.0, 1.0, df).expect("positive df");
    (2.0 * d.cdf(-t.abs())).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
    /// NaN for fewer than three samples.
    pub skewness: f64,
}

impl SampleSummary {
    pub fn of(samples: &[f64]) -> Result<Self> {
        need(samples, 2, "summary")?;
        let sd = std_dev(samples);
        let n = samples.len();
        Ok(Self { n, mean: mean(samples), sd, se: sd / (n as f64).sqrt(), skewness: skewness(samples).unwrap_or(f64::NAN) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCi {
    pub mean: f64,
    pub half_width: f64,
    pub lo: f64,
    pub hi: f64,
}

/// t-interval for the mean.
pub fn mean_ci(samples: &[f64], alpha: f64) -> Result<MeanCi> {
    need(samples, 2, "mean_ci")?;
    let n = samples.len() as f64;
    let m = mean(samples);
    let h = t_critical(alpha, n - 1.0)? * std_dev(samples) / n.sqrt();
    Ok(MeanCi { mean: m, half_width: h, lo: m - h, hi: m + h })
}

/// Linear-interpolation quantile (the usual "type 7" definition).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Empirical (α/2, 1−α/2) quantiles across replications.
pub fn prediction_interval(samples: &[f64], alpha: f64) -> Result<(f64, f64)> {
    need(samples, 2, "prediction_interval")?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha {alpha} outside (0,1)")));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("NaN sample".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok((quantile(&s, alpha / 2.0), quantile(&s, 1.0 - alpha / 2.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedT {
    pub mean_diff: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

/// Two-sided paired t-test of `a − b`, pairing by index.
///
/// Identical samples give t = 0 and p = 1. Differences that are constant but
/// non-zero have no variance and are an error.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedT> {
    if a.len() != b.len() {
        return Err(Error::Domain(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    need(a, 2, "paired_t_test")?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let md = mean(&d);
    let sd = std_dev(&d);
    if sd == 0.0 {
        if md == 0.0 {
            return Ok(PairedT { mean_diff: 0.0, se: 0.0, t: 0.0, p: 1.0 });
        }
        return Err(Error::ZeroVariance("paired differences are constant".into()));
    }
    let se = sd / n.sqrt();
    let t = md / se;
    Ok(PairedT { mean_diff: md, se, t, p: t_two_sided_p(t, n - 1.0) })
}

/// Replications needed for a CI half width of `h`, using the pilot's
/// degrees of freedom once (no iteration). Never below 2.
pub fn required_replications(s_hat: f64, h: f64, alpha: f64, pilot_n: usize) -> Result<u64> {
    if !(s_hat > 0.0) || !(h > 0.0) {
        return Err(Error::Domain("s_hat and h must be positive".into()));
    }
    if pilot_n < 2 {
        return Err(Error::Domain("pilot needs at least 2 replications".into()));
    }
    let t = t_critical(alpha, pilot_n as f64 - 1.0)?;
    let n = (s_hat * t / h).powi(2).ceil();
    Ok((n as u64).max(2))
}

/// Sample skewness g1 = m3 / m2^{3/2} with population (1/n) moments, no
/// small-sample correction.
pub fn skewness(samples: &[f64]) -> Result<f64> {
    need(samples, 3, "skewness")?;
    let n = samples.len() as f64;
    let m = mean(samples);
    let (m2, m3) = samples.iter().fold((0.0, 0.0), |(a, b), x| {
        let d = x - m;
        (a + d * d, b + d * d * d)
    });
    let (m2, m3) = (m2 / n, m3 / n);
    if m2 == 0.0 {
        return Err(Error::ZeroVariance("skewness of constant sample".into()));
    }
    Ok(m3 / m2.powf(1.5))
}

/// Kolmogorov–Smirnov distance to a normal with the sample's own mean and
/// standard deviation.
pub fn lilliefors_statistic(samples: &[f64]) -> Result<f64> {
    need(samples, 5, "lilliefors")?;
    let sd = std_dev(samples);
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance("lilliefors on constant sample".into()));
    }
    let norm = Normal::new(mean(samples), sd).map_err(|e| Error::Domain(e.to_string()))?;
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let d = s.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
        let f = norm.cdf(x);
        acc.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    });
    Ok(d)
}

/// Monte Carlo null distribution of the Lilliefors statistic for one sample
/// size. Build once and reuse for many tests of the same `n`.
#[derive(Debug, Clone)]
pub struct LillieforsNull {
    pub n: usize,
    sorted: Vec<f64>,
}

impl LillieforsNull {
    pub fn new(n: usize, rounds: usize, seed: u64) -> Result<Self> {
        if n < 5 {
            return Err(Error::Domain(format!("lilliefors needs at least 5 samples, got {n}")));
        }
        if rounds == 0 {
            return Err(Error::Domain("lilliefors needs at least one round".into()));
        }
        let mut buf = vec![0.0; n];
        let mut sorted = Vec::with_capacity(rounds);
        for r in 0..rounds {
            let k = Keyed::new(seed, r as u32);
            for (i, x) in buf.iter_mut().enumerate() {
                *x = inverse_normal_cdf(k.uniform(Stream::StartingState, 0, i as u32))?;
            }
            sorted.push(lilliefors_statistic(&buf)?);
        }
        sorted.sort_by(f64::total_cmp);
        Ok(Self { n, sorted })
    }

    pub fn rounds(&self) -> usize {
        self.sorted.len()
    }

    /// P(D_null ≥ d) with the +1 correction.
    pub fn p_value(&self, d: f64) -> f64 {
        let below = self.sorted.partition_point(|&x| x < d);
        let at_or_above = self.sorted.len() - below;
        (at_or_above as f64 + 1.0) / (self.sorted.len() as f64 + 1.0)
    }

    pub fn test(&self, samples: &[f64]) -> Result<(f64, f64)> {
        if samples.len() != self.n {
            return Err(Error::Domain(format!("null built for n={}, got {}", self.n, samples.len())));
        }
        let d = lilliefors_statistic(samples)?;
        Ok((d, self.p_value(d)))
    }
}

pub const LILLIEFORS_SEED: u64 = 0x11_11_EF_05;

/// Lilliefors normality test; returns (D, p).
pub fn lilliefors_test(samples: &[f64], mc_rounds: usize) -> Result<(f64, f64)> {
    LillieforsNull::new(samples.len(), mc_rounds, LILLIEFORS_SEED)?.test(samples)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub residual_df: usize,
    pub r_squared: f64,
}

/// Least squares via QR. `x` rows are observations and must already carry
/// the intercept column if one is wanted.
pub fn ols(x: &[Vec<f64>], y: &[f64]) -> Result<OlsFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Domain(format!("{n} design rows but {} responses", y.len())));
    }
    let p = x.first().map_or(0, Vec::len);
    if p == 0 || x.iter().any(|r| r.len() != p) {
        return Err(Error::Domain("design rows must be non-empty and equal length".into()));
    }
    if n < p {
        return Err(Error::RankDeficient);
    }
    let xm = DMatrix::from_fn(n, p, |i, j| x[i][j]);
    let yv = DVector::from_column_slice(y);
    let qr = xm.clone().qr();
    let r = qr.r();
    let scale = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..p).any(|i| r[(i, i)].abs() <= scale * 1e-10 * n as f64) {
        return Err(Error::RankDeficient);
    }
    let qty = qr.q().transpose() * &yv;
    let beta = r.solve_upper_triangular(&qty).ok_or(Error::RankDeficient)?;
    let resid = &yv - &xm * &beta;
    let rss = resid.dot(&resid);
    let df = n - p;
    let ybar = yv.mean();
    let tss: f64 = yv.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    let r_inv = r.clone().try_inverse().ok_or(Error::RankDeficient)?;
    let cov_unscaled = &r_inv * r_inv.transpose();
    let sigma2 = if df > 0 { rss / df as f64 } else { f64::NAN };
    let mut se = Vec::with_capacity(p);
    let mut t = Vec::with_capacity(p);
    let mut pv = Vec::with_capacity(p);
    for j in 0..p {
        let s = (sigma2 * cov_unscaled[(j, j)]).sqrt();
        let tj = beta[j] / s;
        se.push(s);
        t.push(tj);
        pv.push(if df == 0 || tj.is_nan() {
            f64::NAN
        } else if s == 0.0 {
            if beta[j] == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            t_two_sided_p(tj, df as f64)
        });
    }
    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        std_errors: se,
        t,
        p: pv,
        residual_df: df,
        r_squared: if tss > 0.0 { 1.0 - rss / tss } else { f64::NAN },
    })
}

/// Table-style p-value flag: `**` below 0.001, `*` below 0.05.
pub fn significance_flag(p: f64) -> &'static str {
    if p < 0.001 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// p-value with three significant digits, or `<0.001`.
pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".into()
    } else {
        format!("{:.3}", p)
    }
}
