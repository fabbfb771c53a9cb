//! Abridged life tables and residual-life sampling.
//!
//! Survival is piecewise linear between the tabulated ages (deaths spread
//! uniformly inside each interval), which is what the product-limit estimator
//! gives on interval data.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::DAYS_PER_YEAR;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifeRow<T> {
    pub age_low: T,
    pub age_high: T,
    /// Survivors at `age_low` per 100,000 born.
    pub survivors: T,
}

/// Rows must be contiguous; everybody left in the last row dies before its
/// `age_high`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifeTable<T> {
    pub rows: Vec<LifeRow<T>>,
}

/// US abridged table, drug-induced causes removed, rounded.
const DEFAULT_ROWS: &[(f64, f64, f64)] = &[
    (0.0, 1.0, 100_000.0),
    (1.0, 5.0, 99_307.0),
    (5.0, 10.0, 99_177.0),
    (10.0, 15.0, 99_095.0),
    (15.0, 20.0, 98_992.0),
    (20.0, 25.0, 98_653.0),
    (25.0, 30.0, 98_185.0),
    (30.0, 35.0, 97_715.0),
    (35.0, 40.0, 97_158.0),
    (40.0, 45.0, 96_396.0),
    (45.0, 50.0, 95_262.0),
    (50.0, 55.0, 93_631.0),
    (55.0, 60.0, 91_222.0),
    (60.0, 65.0, 87_654.0),
    (65.0, 70.0, 82_419.0),
    (70.0, 75.0, 75_134.0),
    (75.0, 80.0, 65_142.0),
    (80.0, 85.0, 52_034.0),
    (85.0, 90.0, 36_329.0),
    (90.0, 95.0, 20_239.0),
    (95.0, 100.0, 7_841.0),
    (100.0, 110.0, 1_858.0),
];

#[derive(Deserialize)]
struct CsvRow {
    age_low: f64,
    age_high: f64,
    survivors: f64,
}

impl<T: Real> Default for LifeTable<T> {
    fn default() -> Self {
        Self::from_tuples(DEFAULT_ROWS)
    }
}

impl<T: Real> LifeTable<T> {
    pub fn from_tuples(rows: &[(f64, f64, f64)]) -> Self {
        Self { rows: rows.iter().map(|&(a, b, s)| LifeRow { age_low: T::lit(a), age_high: T::lit(b), survivors: T::lit(s) }).collect() }
    }

    /// Reads a CSV with header `age_low,age_high,survivors`.
    pub fn from_csv_reader<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut rows = Vec::new();
        for rec in rdr.deserialize::<CsvRow>() {
            let rec = rec?;
            rows.push(LifeRow { age_low: T::lit(rec.age_low), age_high: T::lit(rec.age_high), survivors: T::lit(rec.survivors) });
        }
        let t = Self { rows };
        t.validate()?;
        Ok(t)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::InvalidSpec(format!("life table: {m}")));
        let Some(first) = self.rows.first() else { return err("no rows".into()) };
        if first.age_low > T::lit(12.0) {
            return err("first row must start at or below age 12".into());
        }
        if !(first.survivors > T::zero()) {
            return err("first row needs survivors".into());
        }
        for (i, r) in self.rows.iter().enumerate() {
            if !(r.age_high > r.age_low) {
                return err(format!("row {i}: age_high must exceed age_low"));
            }
            if r.survivors < T::zero() {
                return err(format!("row {i}: negative survivors"));
            }
            if let Some(next) = self.rows.get(i + 1) {
                if next.age_low != r.age_high {
                    return err(format!("row {i}: rows must be contiguous"));
                }
                if next.survivors > r.survivors {
                    return err(format!("row {}: survivors must be non-increasing", i + 1));
                }
            }
        }
        Ok(())
    }

    pub fn min_age(&self) -> T {
        self.rows[0].age_low
    }

    pub fn max_age(&self) -> T {
        self.rows[self.rows.len() - 1].age_high
    }

    /// Knots (age, survivors) including the terminal zero.
    fn knots(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.rows.iter().map(|r| (r.age_low, r.survivors)).chain(std::iter::once((self.max_age(), T::zero())))
    }

    /// Survivors at `age` by linear interpolation.
    pub fn survival(&self, age: T) -> T {
        let mut prev: Option<(T, T)> = None;
        for (a, s) in self.knots() {
            if age <= a {
                return match prev {
                    None => s,
                    Some((a0, s0)) => s0 + (s - s0) * (age - a0) / (a - a0),
                };
            }
            prev = Some((a, s));
        }
        T::zero()
    }

    /// Age at death for someone alive at `current_age`, given uniform `u`.
    /// Past the end of the table the answer is `current_age` plus half the
    /// last interval width.
    pub fn death_age(&self, current_age: T, u: T) -> Result<T> {
        if current_age < self.min_age() {
            return Err(Error::Domain(format!("age {current_age} below life table start")));
        }
        let s0 = self.survival(current_age);
        if current_age >= self.max_age() || !(s0 > T::zero()) {
            let last = &self.rows[self.rows.len() - 1];
            return Ok(current_age + (last.age_high - last.age_low) / T::lit(2.0));
        }
        let target = s0 * (T::one() - u);
        let mut prev = (current_age, s0);
        for (a, s) in self.knots() {
            if a <= current_age {
                continue;
            }
            if s <= target {
                let (a0, sp) = prev;
                let frac = if sp > s { (sp - target) / (sp - s) } else { T::zero() };
                return Ok(a0 + frac * (a - a0));
            }
            prev = (a, s);
        }
        Ok(self.max_age())
    }

    /// Days until non-opioid death, strictly positive.
    pub fn residual_days(&self, current_age: T, u: T) -> Result<T> {
        let a = self.death_age(current_age, u)?;
        let days = (a - current_age) * T::lit(DAYS_PER_YEAR);
        Ok(days.max(T::lit(1e-9)))
    }

    /// Expected residual life in years from `current_age`, exact for the
    /// piecewise-linear survival curve.
    pub fn expected_residual_years(&self, current_age: T) -> T {
        let s0 = self.survival(current_age);
        if !(s0 > T::zero()) {
            let last = &self.rows[self.rows.len() - 1];
            return (last.age_high - last.age_low) / T::lit(2.0);
        }
        let mut area = T::zero();
        let mut prev = (current_age, s0);
        for (a, s) in self.knots() {
            if a <= current_age {
                continue;
            }
            area = area + (a - prev.0) * (prev.1 + s) / T::lit(2.0);
            prev = (a, s);
        }
        area / s0
    }
}
