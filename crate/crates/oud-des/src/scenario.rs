//! Parameter set, policy scenarios and per-event costs.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::dist::Family;
use crate::error::{Error, Result};
use crate::{Distribution, LifeTable, DAYS_PER_YEAR};

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date")
}

/// Every sampled law and probability of the model. An empty JSON object
/// deserialises to the base model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParameterSet {
    /// Age in years of newly arriving users.
    pub initiation_age: Distribution,
    /// Age in years of the starting population.
    pub prevalence_age: Distribution,
    pub starting_population: Distribution,
    /// Days between arrivals.
    pub arrival: Distribution,
    pub arc2_pre: Distribution,
    pub arc2_post: Distribution,
    pub arc3: Distribution,
    pub arc4: Distribution,
    pub arc5: Distribution,
    pub arc6: Distribution,
    pub life_table: LifeTable,
    pub arc8: Distribution,
    pub arc_a: Distribution,
    pub arc_b: Distribution,
    pub arc_c: Distribution,
    pub arc_d: Distribution,
    pub arc_e: Distribution,
    pub arc_f: Distribution,
    pub arc_g: Distribution,
    pub p_d: f64,
    pub p_a: f64,
    pub p_od: f64,
    /// Expected head counts at the start, then the active fraction.
    pub start_hospital: Distribution,
    pub start_cjs: Distribution,
    pub start_treatment: Distribution,
    pub start_active_fraction: Distribution,
    pub fentanyl_switch: NaiveDate,
}

impl Default for ParameterSet {
    fn default() -> Self {
        use crate::dist::Units;
        let ln = Distribution::lognormal;
        Self {
            initiation_age: Distribution::lognormal_shifted(2.08, 0.76, 12.0, 105.0).with_units(Units::Years),
            prevalence_age: Distribution::lognormal_shifted(3.74, 0.49, 12.0, 105.0).with_units(Units::Years),
            starting_population: Distribution::triangular(27_299.0, 34_224.0, 43_261.0),
            // 10.87 initiations per day.
            arrival: Distribution::exponential(1.0 / 10.87),
            arc2_pre: ln(17.60, 4.19),
            arc2_post: ln(17.13, 4.14),
            arc3: ln(9.07, 3.01),
            arc4: ln(10.04, 2.35),
            arc5: ln(7.48, 1.03),
            arc6: ln(4.82, 2.20),
            life_table: LifeTable::default(),
            arc8: ln(7.88, 2.38),
            arc_a: ln(0.82, 0.48),
            arc_b: ln(2.16, 1.47),
            arc_c: ln(4.78, 1.18),
            arc_d: ln(3.29, 1.61),
            arc_e: ln(4.52, 1.09),
            arc_f: ln(1.95, 1.40),
            arc_g: ln(6.29, 2.51),
            p_d: 0.0218,
            p_a: 0.01,
            p_od: 0.2227,
            start_hospital: Distribution::triangular(5.0, 11.0, 15.0),
            start_cjs: Distribution::triangular(15.0, 25.0, 50.0),
            start_treatment: Distribution::triangular(300.0, 450.0, 500.0),
            start_active_fraction: Distribution::triangular(0.2, 0.4, 0.8),
            fentanyl_switch: date(2019, 1, 1),
        }
    }
}

impl ParameterSet {
    /// Starting population with the alternative triangular maximum (44,087).
    pub fn with_large_start_max(mut self) -> Self {
        self.starting_population = Distribution::triangular(27_299.0, 34_224.0, 44_087.0);
        self
    }

    /// Mean days between arrivals.
    pub fn arrival_mean(&self) -> Option<f64> {
        match self.arrival.family {
            Family::Exponential { mean } => Some(mean),
            _ => None,
        }
    }

    fn named_laws(&self) -> Vec<(&'static str, &Distribution)> {
        vec![
            ("initiation_age", &self.initiation_age),
            ("prevalence_age", &self.prevalence_age),
            ("starting_population", &self.starting_population),
            ("arrival", &self.arrival),
            ("arc2_pre", &self.arc2_pre),
            ("arc2_post", &self.arc2_post),
            ("arc3", &self.arc3),
            ("arc4", &self.arc4),
            ("arc5", &self.arc5),
            ("arc6", &self.arc6),
            ("arc8", &self.arc8),
            ("arc_a", &self.arc_a),
            ("arc_b", &self.arc_b),
            ("arc_c", &self.arc_c),
            ("arc_d", &self.arc_d),
            ("arc_e", &self.arc_e),
            ("arc_f", &self.arc_f),
            ("arc_g", &self.arc_g),
            ("start_hospital", &self.start_hospital),
            ("start_cjs", &self.start_cjs),
            ("start_treatment", &self.start_treatment),
            ("start_active_fraction", &self.start_active_fraction),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gate {
    Ad,
    Od,
    Cm,
}

/// One policy triplet plus run settings. Percentages are 0-100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    pub ad: f64,
    /// 22 means the base hospital-to-treatment probability (22.27%).
    pub od: f64,
    pub cm: f64,
    pub ad_start: NaiveDate,
    pub od_start: NaiveDate,
    pub cm_start: NaiveDate,
    pub sim_start: NaiveDate,
    pub warmup_years: u32,
    pub horizon_end: NaiveDate,
    pub replications: u32,
    pub master_seed: u64,
    /// Multiplies starting head counts and the arrival rate.
    pub population_scale: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            id: "0-22-0".into(),
            ad: 0.0,
            od: 22.0,
            cm: 0.0,
            ad_start: date(2017, 1, 1),
            od_start: date(2017, 1, 1),
            cm_start: date(2023, 1, 1),
            sim_start: date(2009, 1, 1),
            warmup_years: 5,
            horizon_end: date(2033, 1, 1),
            replications: 600,
            master_seed: 20_090_101,
            population_scale: 1.0,
        }
    }
}

/// Scenario `od` value that stands for the base probability.
pub const BASE_OD_LABEL: f64 = 22.0;

impl ScenarioConfig {
    /// Scenario with the given triplet and default everything else.
    pub fn triplet(ad: f64, od: f64, cm: f64) -> Self {
        Self { id: format!("{ad}-{od}-{cm}"), ad, od, cm, ..Self::default() }
    }

    pub fn with_replications(mut self, n: u32) -> Self {
        self.replications = n;
        self
    }

    pub fn with_scale(mut self, s: f64) -> Self {
        self.population_scale = s;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    /// OD probability once the policy is active.
    pub fn od_probability(&self, params: &ParameterSet) -> f64 {
        if (self.od - BASE_OD_LABEL).abs() < 1e-9 {
            params.p_od
        } else {
            self.od / 100.0
        }
    }

    /// Days from `sim_start` on the 365.25-day block calendar.
    pub fn sim_day(&self, d: NaiveDate) -> f64 {
        let years = (d.year() - self.sim_start.year()) as f64;
        years * DAYS_PER_YEAR + d.ordinal0() as f64 - self.sim_start.ordinal0() as f64
    }

    pub fn horizon_days(&self) -> f64 {
        self.sim_day(self.horizon_end)
    }

    /// Calendar years simulated, the last one possibly partial.
    pub fn n_years(&self) -> usize {
        (self.horizon_days() / DAYS_PER_YEAR - 1e-9).ceil().max(0.0) as usize
    }

    pub fn first_year(&self) -> i32 {
        self.sim_start.year()
    }
}

/// Gate probability in force on date `at`.
pub fn effective_gate(scenario: &ScenarioConfig, params: &ParameterSet, gate: Gate, at: NaiveDate) -> f64 {
    match gate {
        Gate::Ad if at >= scenario.ad_start => scenario.ad / 100.0,
        Gate::Ad => 0.0,
        Gate::Cm if at >= scenario.cm_start => scenario.cm / 100.0,
        Gate::Cm => 0.0,
        Gate::Od if at >= scenario.od_start => scenario.od_probability(params),
        Gate::Od => params.p_od,
    }
}

/// Per-event societal costs in 2017 USD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostTable {
    pub opioid_death: f64,
    pub opioid_arrest: f64,
    pub treatment_start: f64,
    pub hospital_encounter: f64,
    pub active_at_year_end: f64,
    pub inactive_at_year_end: f64,
}

impl Default for CostTable {
    fn default() -> Self {
        Self {
            opioid_death: 11_548_462.0,
            opioid_arrest: 55_726.0,
            treatment_start: 8_224.0,
            hospital_encounter: 12_051.0,
            active_at_year_end: 34_106.0,
            inactive_at_year_end: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Every violated invariant, each with the path of the offending field.
pub fn validate(params: &ParameterSet, scenario: &ScenarioConfig) -> Vec<ValidationError> {
    let mut out = Vec::new();
    let mut push = |path: &str, message: &str| out.push(ValidationError { path: path.into(), message: message.into() });

    for (name, law) in params.named_laws() {
        if let Err(e) = law.validate() {
            push(&format!("params.{name}"), &e.to_string());
        }
    }
    if let Err(e) = params.life_table.validate() {
        push("params.life_table", &e.to_string());
    }
    if params.arrival_mean().is_none() {
        push("params.arrival", "arrival law must be exponential");
    }
    for (name, p) in [("p_d", params.p_d), ("p_a", params.p_a), ("p_od", params.p_od)] {
        if !(0.0..=1.0).contains(&p) {
            push(&format!("params.{name}"), "probability out of range");
        }
    }
    if params.p_d + params.p_a + params.p_od > 1.0 + 1e-12 {
        push("params.p_od", "hospital outcome probabilities exceed 1");
    }
    for (name, v) in [("ad", scenario.ad), ("od", scenario.od), ("cm", scenario.cm)] {
        if !(0.0..=100.0).contains(&v) {
            push(&format!("scenario.{name}"), "percentage out of range");
        }
    }
    if params.p_d + params.p_a + scenario.od_probability(params) > 1.0 + 1e-12 {
        push("scenario.od", "hospital outcome probabilities exceed 1");
    }
    for (name, d) in [("ad_start", scenario.ad_start), ("od_start", scenario.od_start), ("cm_start", scenario.cm_start)] {
        if d < scenario.sim_start || d > scenario.horizon_end {
            push(&format!("scenario.{name}"), "policy start outside [sim_start, horizon_end]");
        }
    }
    if scenario.horizon_end <= scenario.sim_start {
        push("scenario.horizon_end", "horizon must follow sim_start");
    }
    if scenario.replications == 0 {
        push("scenario.replications", "need at least one replication");
    }
    if !(scenario.population_scale > 0.0 && scenario.population_scale.is_finite()) {
        push("scenario.population_scale", "scale must be positive");
    }
    if params.fentanyl_switch < scenario.sim_start {
        push("params.fentanyl_switch", "switch date precedes sim_start");
    }
    out
}

/// [`validate`] as a `Result`.
pub fn check(params: &ParameterSet, scenario: &ScenarioConfig) -> Result<()> {
    let errs = validate(params, scenario);
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(errs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_model_is_valid() {
        assert!(validate(&ParameterSet::default(), &ScenarioConfig::default()).is_empty());
    }

    #[test]
    fn bad_probability() {
        let p = ParameterSet { p_d: 1.2, ..Default::default() };
        let errs = validate(&p, &ScenarioConfig::default());
        assert!(errs.iter().any(|e| e.path == "params.p_d" && e.message == "probability out of range"));
    }

    #[test]
    fn od_ninety_fits() {
        let s = ScenarioConfig::triplet(0.0, 90.0, 0.0);
        assert!(validate(&ParameterSet::default(), &s).is_empty());
        let s = ScenarioConfig::triplet(0.0, 97.5, 0.0);
        assert!(!validate(&ParameterSet::default(), &s).is_empty());
    }

    #[test]
    fn gates() {
        let p = ParameterSet::default();
        let s = ScenarioConfig::triplet(60.0, 80.0, 60.0);
        let d = date(2016, 6, 1);
        assert_eq!(effective_gate(&s, &p, Gate::Ad, d), 0.0);
        assert_eq!(effective_gate(&s, &p, Gate::Od, d), 0.2227);
        assert_eq!(effective_gate(&s, &p, Gate::Cm, date(2025, 1, 1)), 0.60);
        assert_eq!(effective_gate(&s, &p, Gate::Od, date(2017, 1, 1)), 0.80);
        let base = ScenarioConfig::default();
        for g in [Gate::Ad, Gate::Od, Gate::Cm] {
            assert_eq!(effective_gate(&base, &p, g, date(2010, 1, 1)), effective_gate(&base, &p, g, date(2030, 1, 1)));
        }
    }

    #[test]
    fn empty_json_is_base_model() {
        let p: ParameterSet = serde_json::from_str("{}").unwrap();
        assert_eq!(p, ParameterSet::default());
        let p: ParameterSet = serde_json::from_str(r#"{"arc_b": {"family": "lognormal", "mu": 2.0, "sigma": 1.0}}"#).unwrap();
        assert_eq!(p.arc_b.mu_sigma(), Some((2.0, 1.0)));
        let round: ParameterSet = serde_json::from_str(&serde_json::to_string(&ParameterSet::default()).unwrap()).unwrap();
        assert_eq!(round, ParameterSet::default());
    }

    #[test]
    fn calendar() {
        let s = ScenarioConfig::default();
        assert_eq!(s.sim_day(date(2017, 1, 1)), 8.0 * 365.25);
        assert_eq!(s.n_years(), 24);
        assert_eq!(s.horizon_days(), 24.0 * 365.25);
    }
}
