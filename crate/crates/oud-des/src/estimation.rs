//! Parameter derivations: lognormal fits from a mode and one quantile,
//! event-rate location estimates, county prevalence shares and death
//! quantiles.

use serde::{Deserialize, Serialize};

use crate::dist::inverse_normal_cdf;
use crate::error::{Error, Result};
use crate::real::Real;

/// Mode `m`, location `gamma`, and one anchor quantile `x_q` at level `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct ModeQuantileInput<T> {
    pub mode: T,
    #[serde(default = "zero")]
    pub location: T,
    pub quantile_value: T,
    pub quantile_level: T,
}

fn zero<T: Real>() -> T {
    T::zero()
}

impl<T: Real> ModeQuantileInput<T> {
    pub fn new(mode: f64, location: f64, quantile_value: f64, quantile_level: f64) -> Self {
        Self {
            mode: T::lit(mode),
            location: T::lit(location),
            quantile_value: T::lit(quantile_value),
            quantile_level: T::lit(quantile_level),
        }
    }
}

/// Returns `(mu, sigma)` of the lognormal part (the location is added back
/// when sampling).
///
/// With `c = ln((m - g)/(x_q - g))` the mode and quantile conditions give
/// `sigma^2 + z_q sigma + c = 0`; the positive root is taken.
pub fn fit_lognormal_mode_quantile<T: Real>(inp: &ModeQuantileInput<T>) -> Result<(T, T)> {
    let ModeQuantileInput { mode: m, location: g, quantile_value: xq, quantile_level: q } = *inp;
    if !(q > T::zero() && q < T::one()) {
        return Err(Error::Domain(format!("quantile level {q} outside (0, 1)")));
    }
    if !(xq > g) {
        return Err(Error::Domain("quantile value must exceed the location".into()));
    }
    if !(m > g) {
        return Err(Error::Domain("mode must exceed the location (ln of m - gamma)".into()));
    }
    let z = inverse_normal_cdf(q)?;
    let c = ((m - g) / (xq - g)).ln();
    let disc = z * z - T::lit(4.0) * c;
    if disc < T::zero() {
        return Err(Error::NoRealRoot(disc.to_f64().unwrap_or(f64::NAN)));
    }
    let sigma = (-z + disc.sqrt()) / T::lit(2.0);
    if !(sigma > T::zero()) {
        return Err(Error::Domain("no positive sigma root".into()));
    }
    let mu = (m - g).ln() + sigma * sigma;
    Ok((mu, sigma))
}

/// `sigma = sqrt(mu - ln(m - gamma))`, from the mode identity.
pub fn sigma_from_mu_mode<T: Real>(mu: T, mode: T, location: T) -> Result<T> {
    if !(mode > location) {
        return Err(Error::Domain("mode must exceed the location".into()));
    }
    let v = mu - (mode - location).ln();
    // allow the boundary up to rounding
    if v < -T::epsilon() * T::lit(16.0) * mu.abs().max(T::one()) {
        return Err(Error::Domain(format!("mu {mu} must exceed ln(m - gamma)")));
    }
    Ok(v.max(T::zero()).sqrt())
}

/// Mean over years of `ln(D_i p_i / x_i)`: log mean days between events for
/// one person.
pub fn mu_from_event_rate<T: Real>(events: &[T], days_per_year: &[T], population: &[T]) -> Result<T> {
    if events.is_empty() || events.len() != days_per_year.len() || events.len() != population.len() {
        return Err(Error::Input("event, day and population series must be non-empty and equal length".into()));
    }
    let mut acc = T::zero();
    for ((x, d), p) in events.iter().zip(days_per_year).zip(population) {
        if *x == T::zero() {
            return Err(Error::DivisionByZero("yearly event count is zero".into()));
        }
        if !(*x > T::zero() && *p > T::zero() && *d > T::zero()) {
            return Err(Error::Domain("events, days and population must be positive".into()));
        }
        acc = acc + (*d * *p / *x).ln();
    }
    Ok(acc / T::lit(events.len() as f64))
}

/// One year of state prevalence and death counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceRecord<T> {
    pub year: i32,
    pub state_prevalence_heroin: T,
    pub state_prevalence_rx: T,
    pub county_deaths_heroin: T,
    pub state_deaths_heroin: T,
    pub county_deaths_rx: T,
    pub state_deaths_rx: T,
}

/// County prevalence per year: state prevalence scaled by the county share of
/// state deaths, heroin and prescription opioids separately.
pub fn county_prevalence<T: Real>(records: &[PrevalenceRecord<T>]) -> Result<Vec<(i32, T)>> {
    records
        .iter()
        .map(|r| {
            let counts = [
                r.state_prevalence_heroin,
                r.state_prevalence_rx,
                r.county_deaths_heroin,
                r.state_deaths_heroin,
                r.county_deaths_rx,
                r.state_deaths_rx,
            ];
            if counts.iter().any(|c| *c < T::zero()) {
                return Err(Error::Domain(format!("year {}: negative count", r.year)));
            }
            if r.county_deaths_heroin > r.state_deaths_heroin || r.county_deaths_rx > r.state_deaths_rx {
                return Err(Error::Domain(format!("year {}: county deaths exceed state deaths", r.year)));
            }
            if r.state_deaths_heroin == T::zero() || r.state_deaths_rx == T::zero() {
                return Err(Error::DivisionByZero(format!("year {}: state deaths are zero", r.year)));
            }
            let p = r.state_prevalence_heroin * (r.county_deaths_heroin / r.state_deaths_heroin)
                + r.state_prevalence_rx * (r.county_deaths_rx / r.state_deaths_rx);
            Ok((r.year, p))
        })
        .collect()
}

/// Mean over years of deaths / prevalence.
pub fn death_quantile<T: Real>(deaths: &[T], prevalence: &[T]) -> Result<T> {
    if deaths.is_empty() || deaths.len() != prevalence.len() {
        return Err(Error::Input("death and prevalence series must be non-empty and equal length".into()));
    }
    let mut acc = T::zero();
    for (d, p) in deaths.iter().zip(prevalence) {
        if *p == T::zero() {
            return Err(Error::DivisionByZero("prevalence is zero".into()));
        }
        acc = acc + *d / *p;
    }
    Ok(acc / T::lit(deaths.len() as f64))
}

/// A documented fit: which law it produces and the inputs behind it.
#[derive(Debug, Clone, Copy)]
pub struct DocumentedFit {
    pub arc: &'static str,
    pub input: ModeQuantileInput<f64>,
    pub mu: f64,
    pub sigma: f64,
}

/// Every mode/quantile fit with published inputs, location 0, in days.
pub fn documented_fits() -> Vec<DocumentedFit> {
    let f = |arc, m, xq, q, mu, sigma| DocumentedFit { arc, input: ModeQuantileInput::new(m, 0.0, xq, q), mu, sigma };
    vec![
        f("2-pre", 1.0, 365.25, 0.0027, 17.60, 4.19),
        f("2-post", 1.0, 365.25, 0.0033, 17.13, 4.14),
        f("5", 610.0, 365.25, 0.063, 7.48, 1.03),
        f("6", 1.0, 120.0, 0.494, 4.82, 2.20),
        f("A", 1.8, 3.0, 0.723, 0.82, 0.48),
        f("B", 1.0, 57.0, 0.9, 2.16, 1.47),
        f("C", 30.0, 90.0, 1.0 - 0.595, 4.78, 1.18),
        f("D", 2.0, 90.0, 0.774, 3.29, 1.61),
        f("E", 28.0, 182.0, 0.734, 4.52, 1.09),
        f("F", 1.0, 30.0, 0.85, 1.95, 1.40),
        f("G", 1.0, 5.5 * 365.25, 0.7, 6.29, 2.51),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arc_a_and_b() {
        let (mu, s) = fit_lognormal_mode_quantile(&ModeQuantileInput::<f64>::new(1.8, 0.0, 3.0, 0.723)).unwrap();
        assert!((mu - 0.82).abs() < 0.01 && (s - 0.48).abs() < 0.01);
        let (mu, s) = fit_lognormal_mode_quantile(&ModeQuantileInput::<f64>::new(1.0, 0.0, 57.0, 0.9)).unwrap();
        assert!((mu - 2.16).abs() < 0.01 && (s - 1.47).abs() < 0.01);
    }

    #[test]
    fn f32_instantiation_agrees() {
        let (mu, s) = fit_lognormal_mode_quantile(&ModeQuantileInput::<f32>::new(1.0, 0.0, 2008.875, 0.7)).unwrap();
        assert!((mu - 6.29).abs() < 0.01 && (s - 2.51).abs() < 0.01);
    }

    #[test]
    fn fit_errors() {
        // mode equal to location
        assert!(matches!(fit_lognormal_mode_quantile(&ModeQuantileInput::<f64>::new(0.0, 0.0, 5.0, 0.5)), Err(Error::Domain(_))));
        // quantile far below a large mode at a high level: c large and positive
        assert!(matches!(fit_lognormal_mode_quantile(&ModeQuantileInput::<f64>::new(1000.0, 0.0, 1.0, 0.6)), Err(Error::NoRealRoot(_))));
    }

    #[test]
    fn sigma_from_mode() {
        assert!((sigma_from_mu_mode(9.07f64, 1.0, 0.0).unwrap() - 3.01).abs() < 0.01);
        assert!((sigma_from_mu_mode(10.04f64, 90.0, 0.0).unwrap() - 2.35).abs() < 0.01);
        assert!(sigma_from_mu_mode(2f64.ln(), 2.0, 0.0).unwrap().abs() < 1e-7);
        assert!(sigma_from_mu_mode(0.5f64, 2.0, 0.0).is_err());
    }

    #[test]
    fn event_rate() {
        assert_eq!(mu_from_event_rate(&[365.25f64], &[365.25], &[1.0]).unwrap(), 0.0);
        let mu = mu_from_event_rate(&[500.0f64], &[365.25], &[500.0]).unwrap();
        assert!((mu - 365.25f64.ln()).abs() < 1e-12);
        let mu = mu_from_event_rate(&[100.0f64, 400.0], &[365.0, 366.0], &[1000.0, 2000.0]).unwrap();
        let want = ((365.0f64 * 1000.0 / 100.0).ln() + (366.0f64 * 2000.0 / 400.0).ln()) / 2.0;
        assert!((mu - want).abs() < 1e-12);
        assert!(matches!(mu_from_event_rate(&[0.0f64], &[365.25], &[1.0]), Err(Error::DivisionByZero(_))));
    }

    fn rec(ph: f64, pp: f64, ch: f64, sh: f64, cp: f64, sp: f64) -> PrevalenceRecord<f64> {
        PrevalenceRecord {
            year: 2016,
            state_prevalence_heroin: ph,
            state_prevalence_rx: pp,
            county_deaths_heroin: ch,
            state_deaths_heroin: sh,
            county_deaths_rx: cp,
            state_deaths_rx: sp,
        }
    }

    #[test]
    fn prevalence() {
        let p = county_prevalence(&[rec(100.0, 200.0, 10.0, 100.0, 5.0, 100.0)]).unwrap();
        assert!((p[0].1 - 20.0).abs() < 1e-12);
        let p = county_prevalence(&[rec(100.0, 200.0, 7.0, 7.0, 9.0, 9.0)]).unwrap();
        assert_eq!(p[0].1, 300.0);
        let p = county_prevalence(&[rec(100.0, 200.0, 0.0, 7.0, 0.0, 9.0)]).unwrap();
        assert_eq!(p[0].1, 0.0);
        assert!(county_prevalence(&[rec(1.0, 1.0, 0.0, 0.0, 0.0, 1.0)]).is_err());
        assert!(county_prevalence(&[rec(1.0, 1.0, 5.0, 4.0, 0.0, 1.0)]).is_err());
    }

    #[test]
    fn deaths() {
        assert!((death_quantile(&[27.0f64], &[10_000.0]).unwrap() - 0.0027).abs() < 1e-15);
        assert_eq!(death_quantile(&[0.0f64, 0.0], &[5.0, 6.0]).unwrap(), 0.0);
        let q = death_quantile(&[2.0f64, 3.0, 3.1], &[1000.0, 1000.0, 1000.0]).unwrap();
        assert!((q - 0.0027).abs() < 1e-12);
        assert!(death_quantile(&[1.0f64], &[0.0]).is_err());
    }
}
