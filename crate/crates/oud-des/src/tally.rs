//! Yearly counts and what is derived from them: windows, costs, reuse rates.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scenario::CostTable;

/// Counts for one replication and one calendar year.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct YearlyTally {
    pub year: i32,
    pub deaths_opioid: u32,
    pub deaths_natural: u32,
    pub arrests_opioid_nondiverted: u32,
    pub arrests_opioid_diverted: u32,
    pub arrests_nonopioid: u32,
    pub hospital_encounters: u32,
    pub treatment_starts: u32,
    pub active_year_end: u32,
    pub inactive_year_end: u32,
    pub occ_cjs_midyear: u32,
    pub occ_treat_midyear: u32,
    pub occ_hosp_midyear: u32,
    pub max_cjs: u32,
    pub max_treat: u32,
    pub max_hosp: u32,
    pub persons_arrested: u32,
    pub persons_hospitalized: u32,
    pub persons_treated: u32,
    pub new_arrivals: u32,
}

/// Output field selectable by name in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    DeathsOpioid,
    DeathsNatural,
    ArrestsOpioidNondiverted,
    ArrestsOpioidDiverted,
    ArrestsNonopioid,
    HospitalEncounters,
    TreatmentStarts,
    ActiveYearEnd,
    InactiveYearEnd,
    OccCjsMidyear,
    OccTreatMidyear,
    OccHospMidyear,
    MaxCjs,
    MaxTreat,
    MaxHosp,
    PersonsArrested,
    PersonsHospitalized,
    PersonsTreated,
    NewArrivals,
}

impl Metric {
    pub const ALL: [Metric; 19] = [
        Metric::DeathsOpioid,
        Metric::DeathsNatural,
        Metric::ArrestsOpioidNondiverted,
        Metric::ArrestsOpioidDiverted,
        Metric::ArrestsNonopioid,
        Metric::HospitalEncounters,
        Metric::TreatmentStarts,
        Metric::ActiveYearEnd,
        Metric::InactiveYearEnd,
        Metric::OccCjsMidyear,
        Metric::OccTreatMidyear,
        Metric::OccHospMidyear,
        Metric::MaxCjs,
        Metric::MaxTreat,
        Metric::MaxHosp,
        Metric::PersonsArrested,
        Metric::PersonsHospitalized,
        Metric::PersonsTreated,
        Metric::NewArrivals,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::DeathsOpioid => "deaths_opioid",
            Metric::DeathsNatural => "deaths_natural",
            Metric::ArrestsOpioidNondiverted => "arrests_opioid_nondiverted",
            Metric::ArrestsOpioidDiverted => "arrests_opioid_diverted",
            Metric::ArrestsNonopioid => "arrests_nonopioid",
            Metric::HospitalEncounters => "hospital_encounters",
            Metric::TreatmentStarts => "treatment_starts",
            Metric::ActiveYearEnd => "active_year_end",
            Metric::InactiveYearEnd => "inactive_year_end",
            Metric::OccCjsMidyear => "occ_cjs_midyear",
            Metric::OccTreatMidyear => "occ_treat_midyear",
            Metric::OccHospMidyear => "occ_hosp_midyear",
            Metric::MaxCjs => "max_cjs",
            Metric::MaxTreat => "max_treat",
            Metric::MaxHosp => "max_hosp",
            Metric::PersonsArrested => "persons_arrested",
            Metric::PersonsHospitalized => "persons_hospitalized",
            Metric::PersonsTreated => "persons_treated",
            Metric::NewArrivals => "new_arrivals",
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl YearlyTally {
    pub fn get(&self, m: Metric) -> u32 {
        match m {
            Metric::DeathsOpioid => self.deaths_opioid,
            Metric::DeathsNatural => self.deaths_natural,
            Metric::ArrestsOpioidNondiverted => self.arrests_opioid_nondiverted,
            Metric::ArrestsOpioidDiverted => self.arrests_opioid_diverted,
            Metric::ArrestsNonopioid => self.arrests_nonopioid,
            Metric::HospitalEncounters => self.hospital_encounters,
            Metric::TreatmentStarts => self.treatment_starts,
            Metric::ActiveYearEnd => self.active_year_end,
            Metric::InactiveYearEnd => self.inactive_year_end,
            Metric::OccCjsMidyear => self.occ_cjs_midyear,
            Metric::OccTreatMidyear => self.occ_treat_midyear,
            Metric::OccHospMidyear => self.occ_hosp_midyear,
            Metric::MaxCjs => self.max_cjs,
            Metric::MaxTreat => self.max_treat,
            Metric::MaxHosp => self.max_hosp,
            Metric::PersonsArrested => self.persons_arrested,
            Metric::PersonsHospitalized => self.persons_hospitalized,
            Metric::PersonsTreated => self.persons_treated,
            Metric::NewArrivals => self.new_arrivals,
        }
    }

    fn get_mut(&mut self, m: Metric) -> &mut u32 {
        match m {
            Metric::DeathsOpioid => &mut self.deaths_opioid,
            Metric::DeathsNatural => &mut self.deaths_natural,
            Metric::ArrestsOpioidNondiverted => &mut self.arrests_opioid_nondiverted,
            Metric::ArrestsOpioidDiverted => &mut self.arrests_opioid_diverted,
            Metric::ArrestsNonopioid => &mut self.arrests_nonopioid,
            Metric::HospitalEncounters => &mut self.hospital_encounters,
            Metric::TreatmentStarts => &mut self.treatment_starts,
            Metric::ActiveYearEnd => &mut self.active_year_end,
            Metric::InactiveYearEnd => &mut self.inactive_year_end,
            Metric::OccCjsMidyear => &mut self.occ_cjs_midyear,
            Metric::OccTreatMidyear => &mut self.occ_treat_midyear,
            Metric::OccHospMidyear => &mut self.occ_hosp_midyear,
            Metric::MaxCjs => &mut self.max_cjs,
            Metric::MaxTreat => &mut self.max_treat,
            Metric::MaxHosp => &mut self.max_hosp,
            Metric::PersonsArrested => &mut self.persons_arrested,
            Metric::PersonsHospitalized => &mut self.persons_hospitalized,
            Metric::PersonsTreated => &mut self.persons_treated,
            Metric::NewArrivals => &mut self.new_arrivals,
        }
    }

    /// Component-wise sum; `year` is kept from `self`.
    pub fn add(&self, other: &YearlyTally) -> YearlyTally {
        let mut out = self.clone();
        for m in Metric::ALL {
            *out.get_mut(m) += other.get(m);
        }
        out
    }

    /// All opioid-related arrests, diverted or not.
    pub fn arrests_opioid_total(&self) -> u32 {
        self.arrests_opioid_nondiverted + self.arrests_opioid_diverted
    }
}

/// Sum of every field over `start_year..=end_year`. Year-end active counts
/// are summed across the window too. Maxima and occupancies are summed as
/// well, which is rarely meaningful.
pub fn cumulative_window(tallies: &[YearlyTally], start_year: i32, end_year: i32) -> Result<YearlyTally> {
    if start_year > end_year {
        return Err(Error::Input(format!("empty window {start_year}:{end_year}")));
    }
    let mut acc = YearlyTally { year: end_year, ..Default::default() };
    let mut seen = 0;
    for t in tallies.iter().filter(|t| (start_year..=end_year).contains(&t.year)) {
        acc = acc.add(t);
        seen += 1;
    }
    if seen != (end_year - start_year + 1) as usize {
        return Err(Error::Input(format!("window {start_year}:{end_year} not covered by the tallies")));
    }
    Ok(acc)
}

/// Societal cost of one year of counts. Diverted arrests carry no arrest
/// cost; they are already counted as treatment starts.
pub fn yearly_cost(t: &YearlyTally, c: &CostTable) -> f64 {
    t.deaths_opioid as f64 * c.opioid_death
        + t.arrests_opioid_nondiverted as f64 * c.opioid_arrest
        + t.treatment_starts as f64 * c.treatment_start
        + t.hospital_encounters as f64 * c.hospital_encounter
        + t.active_year_end as f64 * c.active_at_year_end
        + t.inactive_year_end as f64 * c.inactive_at_year_end
}

/// Percent of extra episodes per person: `(episodes / individuals - 1) * 100`.
pub fn reuse_rate(episodes: f64, individuals: f64) -> Result<f64> {
    if individuals == 0.0 {
        return Err(Error::DivisionByZero("no individuals".into()));
    }
    Ok((episodes / individuals - 1.0) * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reuse {
    Arrest,
    Hospital,
    Treatment,
}

/// Reuse rate for one year of counts. Re-arrest counts diverted arrests.
pub fn reuse(t: &YearlyTally, kind: Reuse) -> Result<f64> {
    match kind {
        Reuse::Arrest => reuse_rate(t.arrests_opioid_total() as f64, t.persons_arrested as f64),
        Reuse::Hospital => reuse_rate(t.hospital_encounters as f64, t.persons_hospitalized as f64),
        Reuse::Treatment => reuse_rate(t.treatment_starts as f64, t.persons_treated as f64),
    }
}

/// One engine CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TallyRow {
    pub scenario_id: String,
    pub replication: u32,
    #[serde(flatten)]
    pub tally: YearlyTally,
}

pub fn write_rows<W: std::io::Write>(w: W, rows: &[TallyRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["scenario_id", "replication", "year"];
    header.extend(Metric::ALL.iter().map(|m| m.name()));
    wtr.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.scenario_id.clone(), r.replication.to_string(), r.tally.year.to_string()];
        rec.extend(Metric::ALL.iter().map(|m| r.tally.get(*m).to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_rows<R: std::io::Read>(r: R) -> Result<Vec<TallyRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.deserialize::<RawRow>() {
        out.push(rec?.into());
    }
    Ok(out)
}

pub fn read_rows_path(p: &Path) -> Result<Vec<TallyRow>> {
    read_rows(std::fs::File::open(p)?)
}

// csv cannot deserialise through `flatten`, so rows are read flat.
#[derive(Deserialize)]
struct RawRow {
    scenario_id: String,
    replication: u32,
    year: i32,
    deaths_opioid: u32,
    deaths_natural: u32,
    arrests_opioid_nondiverted: u32,
    arrests_opioid_diverted: u32,
    arrests_nonopioid: u32,
    hospital_encounters: u32,
    treatment_starts: u32,
    active_year_end: u32,
    inactive_year_end: u32,
    occ_cjs_midyear: u32,
    occ_treat_midyear: u32,
    occ_hosp_midyear: u32,
    max_cjs: u32,
    max_treat: u32,
    max_hosp: u32,
    persons_arrested: u32,
    persons_hospitalized: u32,
    persons_treated: u32,
    new_arrivals: u32,
}

impl From<RawRow> for TallyRow {
    fn from(r: RawRow) -> Self {
        TallyRow {
            scenario_id: r.scenario_id,
            replication: r.replication,
            tally: YearlyTally {
                year: r.year,
                deaths_opioid: r.deaths_opioid,
                deaths_natural: r.deaths_natural,
                arrests_opioid_nondiverted: r.arrests_opioid_nondiverted,
                arrests_opioid_diverted: r.arrests_opioid_diverted,
                arrests_nonopioid: r.arrests_nonopioid,
                hospital_encounters: r.hospital_encounters,
                treatment_starts: r.treatment_starts,
                active_year_end: r.active_year_end,
                inactive_year_end: r.inactive_year_end,
                occ_cjs_midyear: r.occ_cjs_midyear,
                occ_treat_midyear: r.occ_treat_midyear,
                occ_hosp_midyear: r.occ_hosp_midyear,
                max_cjs: r.max_cjs,
                max_treat: r.max_treat,
                max_hosp: r.max_hosp,
                persons_arrested: r.persons_arrested,
                persons_hospitalized: r.persons_hospitalized,
                persons_treated: r.persons_treated,
                new_arrivals: r.new_arrivals,
            },
        }
    }
}

/// Rows grouped by replication (sorted), each a year-ordered series.
pub fn by_replication(rows: &[TallyRow]) -> Vec<(u32, Vec<YearlyTally>)> {
    let mut map: std::collections::BTreeMap<u32, Vec<YearlyTally>> = Default::default();
    for r in rows {
        map.entry(r.replication).or_default().push(r.tally.clone());
    }
    map.into_iter()
        .map(|(k, mut v)| {
            v.sort_by_key(|t| t.year);
            (k, v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn only(f: impl FnOnce(&mut YearlyTally)) -> YearlyTally {
        let mut t = YearlyTally { year: 2017, ..Default::default() };
        f(&mut t);
        t
    }

    #[test]
    fn table3_costs() {
        let c = CostTable::default();
        let m = |t: YearlyTally| yearly_cost(&t, &c);
        assert_eq!(m(only(|t| t.deaths_opioid = 88)), 1_016_264_656.0);
        assert_eq!(m(only(|t| t.arrests_opioid_nondiverted = 545)), 30_370_670.0);
        assert_eq!(m(only(|t| t.active_year_end = 17_630)), 601_288_780.0);
        assert_eq!(m(only(|t| t.arrests_opioid_diverted = 10)), 0.0);
    }

    #[test]
    fn windows() {
        let a = only(|t| t.deaths_opioid = 3);
        let mut b = only(|t| t.deaths_opioid = 4);
        b.year = 2018;
        assert_eq!(cumulative_window(&[a.clone(), b.clone()], 2017, 2017).unwrap().deaths_opioid, 3);
        assert_eq!(cumulative_window(&[a.clone(), b.clone()], 2017, 2018).unwrap().deaths_opioid, 7);
        assert!(cumulative_window(&[a, b], 2017, 2019).is_err());
    }

    #[test]
    fn reuse() {
        assert_eq!(reuse_rate(100.0, 100.0).unwrap(), 0.0);
        assert!((reuse_rate(105.0, 100.0).unwrap() - 5.0).abs() < 1e-12);
        assert!(reuse_rate(1.0, 0.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![TallyRow { scenario_id: "x".into(), replication: 2, tally: only(|t| t.max_hosp = 9) }];
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows).unwrap();
        let header = String::from_utf8(buf.clone()).unwrap();
        assert!(header.starts_with("scenario_id,replication,year,deaths_opioid,deaths_natural,arrests_opioid_nondiverted"));
        assert_eq!(read_rows(&buf[..]).unwrap(), rows);
    }
}
