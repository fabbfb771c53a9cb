//! Calibration targets and prediction-interval coverage.

use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::stats::{mean, prediction_interval};
use crate::tally::YearlyTally;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Deaths,
    Arrests,
    Treatment,
    Hospital,
}

impl OutputKind {
    /// Opioid arrests count diverted ones too; before any diversion the two
    /// agree.
    pub fn value(self, t: &YearlyTally) -> f64 {
        match self {
            OutputKind::Deaths => t.deaths_opioid as f64,
            OutputKind::Arrests => t.arrests_opioid_total() as f64,
            OutputKind::Treatment => t.treatment_starts as f64,
            OutputKind::Hospital => t.hospital_encounters as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub year: i32,
    pub output: OutputKind,
    pub observed: f64,
}

/// Observed county counts, pre-2018 only.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CalibrationTargets {
    pub targets: Vec<Target>,
}

impl CalibrationTargets {
    /// The 2017 counts. Earlier years must be supplied from a file.
    pub fn known_2017() -> Self {
        let t = |output, observed| Target { year: 2017, output, observed };
        Self {
            targets: vec![
                t(OutputKind::Deaths, 88.0),
                t(OutputKind::Arrests, 545.0),
                t(OutputKind::Treatment, 2026.0),
                t(OutputKind::Hospital, 1718.0),
            ],
        }
    }

    /// CSV with header `year,output,observed`.
    pub fn from_csv_reader<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let targets = rdr.deserialize().collect::<std::result::Result<Vec<Target>, _>>()?;
        let t = Self { targets };
        t.validate()?;
        Ok(t)
    }

    pub fn from_csv_path(p: &Path) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(p)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::Input("no calibration targets".into()));
        }
        for t in &self.targets {
            if t.year >= 2018 {
                return Err(Error::Input(format!("target year {} is not before 2018", t.year)));
            }
            if !(t.observed > 0.0) {
                return Err(Error::Input(format!("target {} {:?} must be positive", t.year, t.output)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetCheck {
    pub year: i32,
    pub output: OutputKind,
    pub observed: f64,
    pub simulated_mean: f64,
    pub pi_lo: f64,
    pub pi_hi: f64,
    pub inside: bool,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub checks: Vec<TargetCheck>,
    pub inside: usize,
    pub average_relative_error: f64,
}

/// Checks every target against the empirical PI across replications.
/// `replications` holds each replication's yearly tallies.
pub fn coverage(targets: &CalibrationTargets, replications: &[Vec<YearlyTally>], alpha: f64) -> Result<CoverageReport> {
    targets.validate()?;
    let mut checks = Vec::with_capacity(targets.targets.len());
    for t in &targets.targets {
        let xs = replications
            .iter()
            .map(|rep| {
                rep.iter()
                    .find(|y| y.year == t.year)
                    .map(|y| t.output.value(y))
                    .ok_or_else(|| Error::Input(format!("no simulated year {}", t.year)))
            })
            .collect::<Result<Vec<f64>>>()?;
        let (lo, hi) = prediction_interval(&xs, alpha)?;
        let m = mean(&xs);
        checks.push(TargetCheck {
            year: t.year,
            output: t.output,
            observed: t.observed,
            simulated_mean: m,
            pi_lo: lo,
            pi_hi: hi,
            inside: lo <= t.observed && t.observed <= hi,
            relative_error: (m - t.observed).abs() / t.observed,
        });
    }
    let inside = checks.iter().filter(|c| c.inside).count();
    let average_relative_error = checks.iter().map(|c| c.relative_error).sum::<f64>() / checks.len() as f64;
    Ok(CoverageReport { checks, inside, average_relative_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reps(values: &[u32]) -> Vec<Vec<YearlyTally>> {
        values.iter().map(|&v| vec![YearlyTally { year: 2017, deaths_opioid: v, ..Default::default() }]).collect()
    }

    fn deaths(observed: f64) -> CalibrationTargets {
        CalibrationTargets { targets: vec![Target { year: 2017, output: OutputKind::Deaths, observed }] }
    }

    #[test]
    fn target_at_mean_is_inside() {
        let r = reps(&(80..=120).collect::<Vec<_>>());
        let c = coverage(&deaths(100.0), &r, 0.05).unwrap();
        assert_eq!(c.inside, 1);
        assert_eq!(c.average_relative_error, 0.0);
    }

    #[test]
    fn shifted_target_is_outside() {
        let r = reps(&(80..=120).collect::<Vec<_>>());
        let c = coverage(&deaths(150.0), &r, 0.05).unwrap();
        assert_eq!(c.inside, 0);
        assert!((c.average_relative_error - 50.0 / 150.0).abs() < 1e-12);
    }

    #[test]
    fn csv_and_validation() {
        let t = CalibrationTargets::from_csv_reader("year,output,observed\n2016,hospital,1500\n".as_bytes()).unwrap();
        assert_eq!(t.targets[0].output, OutputKind::Hospital);
        assert!(CalibrationTargets::from_csv_reader("year,output,observed\n2019,deaths,10\n".as_bytes()).is_err());
        assert!(CalibrationTargets::from_csv_reader("year,output,observed\n2016,births,10\n".as_bytes()).is_err());
    }

    #[test]
    fn missing_year() {
        let r = reps(&[1, 2, 3]);
        let t = CalibrationTargets { targets: vec![Target { year: 2014, output: OutputKind::Deaths, observed: 1.0 }] };
        assert!(coverage(&t, &r, 0.05).is_err());
    }
}
