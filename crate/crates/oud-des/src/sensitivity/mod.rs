//! Global sensitivity analysis: a Sobol design over perturbed parameters,
//! engine runs per design point, then PRCC and effect sizes.

mod prcc;

pub use prcc::{effect_sizes, prcc, ranks, Effect, Prcc};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sobol::params::JoeKuoD6;
use sobol::Sobol;
use std::io::{Read, Write};

use crate::dist::{DistributionSpec, Family};
use crate::engine::run_replication;
use crate::error::{Error, Result};
use crate::scenario::{check, ParameterSet, ScenarioConfig};
use crate::tally::Metric;

pub const MAX_SOBOL_DIM: usize = 64;

/// First `n` points of the Joe–Kuo Sobol sequence in `[0,1)^dim`,
/// starting with the origin.
pub fn sobol_points(dim: usize, n: usize) -> Result<Vec<Vec<f64>>> {
    if dim == 0 || dim > MAX_SOBOL_DIM {
        return Err(Error::Domain(format!("sobol dimension {dim} not in 1..={MAX_SOBOL_DIM}")));
    }
    if !n.is_power_of_two() {
        return Err(Error::Domain(format!("sobol point count {n} is not a power of two")));
    }
    let params = JoeKuoD6::minimal();
    Ok(Sobol::<f64>::new(dim, &params).take(n).collect())
}

/// Which lognormal a parameter row perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Law {
    InitiationAge,
    PrevalenceAge,
    Arc2Pre,
    Arc2Post,
    Arc3,
    Arc4,
    Arc5,
    Arc6,
    Arc8,
    ArcA,
    ArcB,
    ArcC,
    ArcD,
    ArcE,
    ArcF,
    ArcG,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "law")]
pub enum Target {
    Mu(Law),
    Sigma(Law),
    StartingPopulation,
    StartHospital,
    StartCjs,
    StartTreatment,
    StartActiveFraction,
    /// Initiations per day; the arrival mean becomes its reciprocal.
    ArrivalRate,
    PA,
    POd,
    PD,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensParam {
    pub id: u8,
    pub name: &'static str,
    pub base: f64,
    pub low: f64,
    pub high: f64,
    pub target: Target,
}

impl SensParam {
    /// Affine map from `[0,1]` onto the range.
    pub fn value(&self, u: f64) -> f64 {
        self.low + u * (self.high - self.low)
    }

    /// Inverse of [`value`](Self::value); 0 for a collapsed range.
    pub fn unit(&self, v: f64) -> f64 {
        if self.high > self.low {
            (v - self.low) / (self.high - self.low)
        } else {
            0.0
        }
    }
}

const fn row(id: u8, name: &'static str, base: f64, low: f64, high: f64, target: Target) -> SensParam {
    SensParam { id, name, base, low, high, target }
}

use Law::*;
use Target::*;

/// The 41 perturbed parameters. Rows 5-9 replace a triangular law with a
/// fixed value anywhere from 5% under its minimum to 5% over its maximum.
pub const PARAMETERS: [SensParam; 41] = [
    row(1, "initiation_age_mu", 2.08, 1.98, 2.18, Mu(InitiationAge)),
    row(2, "initiation_age_sigma", 0.76, 0.72, 0.80, Sigma(InitiationAge)),
    row(3, "prevalence_age_mu", 3.74, 3.55, 3.93, Mu(PrevalenceAge)),
    row(4, "prevalence_age_sigma", 0.49, 0.47, 0.51, Sigma(PrevalenceAge)),
    row(5, "starting_population", 34_224.0, 25_934.05, 46_291.35, StartingPopulation),
    row(6, "start_hospital", 11.0, 4.75, 15.75, StartHospital),
    row(7, "start_cjs", 25.0, 14.25, 52.50, StartCjs),
    row(8, "start_treatment", 450.0, 285.0, 525.0, StartTreatment),
    row(9, "start_active_fraction", 0.4, 0.19, 0.84, StartActiveFraction),
    row(10, "arrival_rate", 10.87, 10.32, 11.41, ArrivalRate),
    row(11, "arc2_pre_mu", 17.60, 16.72, 18.47, Mu(Arc2Pre)),
    row(12, "arc2_pre_sigma", 4.19, 3.98, 4.40, Sigma(Arc2Pre)),
    row(13, "arc2_post_mu", 17.13, 16.28, 17.99, Mu(Arc2Post)),
    row(14, "arc2_post_sigma", 4.14, 3.93, 4.35, Sigma(Arc2Post)),
    row(15, "arc3_mu", 9.07, 8.62, 9.53, Mu(Arc3)),
    row(16, "arc3_sigma", 3.01, 2.86, 3.16, Sigma(Arc3)),
    row(17, "arc4_mu", 10.04, 9.54, 10.55, Mu(Arc4)),
    row(18, "arc4_sigma", 2.35, 2.24, 2.47, Sigma(Arc4)),
    row(19, "arc5_mu", 7.48, 7.10, 7.85, Mu(Arc5)),
    row(20, "arc5_sigma", 1.03, 0.98, 1.08, Sigma(Arc5)),
    row(21, "arc6_mu", 4.82, 4.58, 5.06, Mu(Arc6)),
    row(22, "arc6_sigma", 2.20, 2.09, 2.31, Sigma(Arc6)),
    row(23, "arc8_mu", 7.88, 7.49, 8.27, Mu(Arc8)),
    row(24, "arc8_sigma", 2.38, 2.26, 2.50, Sigma(Arc8)),
    row(25, "p_a", 0.0100, 0.0095, 0.0105, PA),
    row(26, "p_od", 0.2227, 0.2116, 0.2338, POd),
    row(27, "p_d", 0.0218, 0.0207, 0.0229, PD),
    row(28, "arc_a_mu", 0.82, 0.78, 0.86, Mu(ArcA)),
    row(29, "arc_a_sigma", 0.48, 0.45, 0.50, Sigma(ArcA)),
    row(30, "arc_b_mu", 2.16, 2.05, 2.27, Mu(ArcB)),
    row(31, "arc_b_sigma", 1.47, 1.40, 1.54, Sigma(ArcB)),
    row(32, "arc_c_mu", 4.78, 4.54, 5.02, Mu(ArcC)),
    row(33, "arc_c_sigma", 1.18, 1.12, 1.23, Sigma(ArcC)),
    row(34, "arc_d_mu", 3.29, 3.12, 3.45, Mu(ArcD)),
    row(35, "arc_d_sigma", 1.61, 1.53, 1.69, Sigma(ArcD)),
    row(36, "arc_e_mu", 4.52, 4.30, 4.75, Mu(ArcE)),
    row(37, "arc_e_sigma", 1.09, 1.04, 1.15, Sigma(ArcE)),
    row(38, "arc_f_mu", 1.95, 1.86, 2.05, Mu(ArcF)),
    row(39, "arc_f_sigma", 1.40, 1.33, 1.47, Sigma(ArcF)),
    row(40, "arc_g_mu", 6.29, 5.98, 6.61, Mu(ArcG)),
    row(41, "arc_g_sigma", 2.51, 2.38, 2.63, Sigma(ArcG)),
];

pub fn parameter(id: u8) -> Option<&'static SensParam> {
    PARAMETERS.iter().find(|p| p.id == id)
}

fn law_mut(p: &mut ParameterSet, law: Law) -> &mut DistributionSpec<f64> {
    match law {
        InitiationAge => &mut p.initiation_age,
        PrevalenceAge => &mut p.prevalence_age,
        Arc2Pre => &mut p.arc2_pre,
        Arc2Post => &mut p.arc2_post,
        Arc3 => &mut p.arc3,
        Arc4 => &mut p.arc4,
        Arc5 => &mut p.arc5,
        Arc6 => &mut p.arc6,
        Arc8 => &mut p.arc8,
        ArcA => &mut p.arc_a,
        ArcB => &mut p.arc_b,
        ArcC => &mut p.arc_c,
        ArcD => &mut p.arc_d,
        ArcE => &mut p.arc_e,
        ArcF => &mut p.arc_f,
        ArcG => &mut p.arc_g,
    }
}

fn fixed(v: f64) -> DistributionSpec<f64> {
    DistributionSpec::triangular(v, v, v)
}

/// Writes one parameter value into `p`.
pub fn apply(p: &mut ParameterSet, target: Target, v: f64) -> Result<()> {
    match target {
        Mu(law) | Sigma(law) => {
            let d = law_mut(p, law);
            match &mut d.family {
                Family::Lognormal { mu, sigma, .. } => {
                    if matches!(target, Mu(_)) {
                        *mu = v
                    } else {
                        *sigma = v
                    }
                }
                _ => return Err(Error::InvalidSpec(format!("{law:?} is not lognormal"))),
            }
        }
        StartingPopulation => p.starting_population = fixed(v),
        StartHospital => p.start_hospital = fixed(v),
        StartCjs => p.start_cjs = fixed(v),
        StartTreatment => p.start_treatment = fixed(v),
        StartActiveFraction => p.start_active_fraction = fixed(v),
        ArrivalRate => {
            let units = p.arrival.units;
            p.arrival = DistributionSpec::exponential(1.0 / v).with_units(units);
        }
        PA => p.p_a = v,
        POd => p.p_od = v,
        PD => p.p_d = v,
    }
    Ok(())
}

/// Parameter rows plus unit-cube points, one column per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityDesign {
    pub parameters: Vec<SensParam>,
    pub points: Vec<Vec<f64>>,
    pub replications_per_point: u32,
}

impl SensitivityDesign {
    /// Sobol design over all 41 rows.
    pub fn sobol(n: usize, replications_per_point: u32) -> Result<Self> {
        Self::sobol_over(PARAMETERS.to_vec(), n, replications_per_point)
    }

    pub fn sobol_over(parameters: Vec<SensParam>, n: usize, replications_per_point: u32) -> Result<Self> {
        let points = sobol_points(parameters.len(), n)?;
        Ok(Self { parameters, points, replications_per_point })
    }

    pub fn values(&self, point: usize) -> Vec<f64> {
        self.parameters.iter().zip(&self.points[point]).map(|(p, &u)| p.value(u)).collect()
    }

    /// Base parameters with one design point applied.
    pub fn parameter_set(&self, base: &ParameterSet, point: usize) -> Result<ParameterSet> {
        let mut p = base.clone();
        for (sp, v) in self.parameters.iter().zip(self.values(point)) {
            apply(&mut p, sp.target, v)?;
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications_per_point == 0 {
            return Err(Error::Domain("need at least one replication per point".into()));
        }
        for (i, pt) in self.points.iter().enumerate() {
            if pt.len() != self.parameters.len() {
                return Err(Error::Domain(format!("point {i} has {} coordinates, expected {}", pt.len(), self.parameters.len())));
            }
            if pt.iter().any(|u| !(0.0..=1.0).contains(u)) {
                return Err(Error::Domain(format!("point {i} leaves the unit cube")));
            }
        }
        for p in &self.parameters {
            if !(p.low <= p.high) {
                return Err(Error::Domain(format!("parameter {}: low exceeds high", p.id)));
            }
        }
        Ok(())
    }

    /// `point,p1,...` with actual parameter values.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["point".to_string()];
        header.extend(self.parameters.iter().map(|p| format!("p{}", p.id)));
        wtr.write_record(&header)?;
        for i in 0..self.points.len() {
            let mut rec = vec![i.to_string()];
            rec.extend(self.values(i).iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads what [`write_csv`](Self::write_csv) wrote. Columns name the
    /// parameter rows, so a subset design round-trips.
    pub fn read_csv<R: Read>(r: R, replications_per_point: u32) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        let mut parameters = Vec::new();
        for h in header.iter().skip(1) {
            let id: u8 =
                h.strip_prefix('p').and_then(|s| s.parse().ok()).ok_or_else(|| Error::Input(format!("bad design column {h:?}")))?;
            parameters.push(*parameter(id).ok_or_else(|| Error::Input(format!("unknown parameter {id}")))?);
        }
        let mut points = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let mut pt = Vec::with_capacity(parameters.len());
            for (p, field) in parameters.iter().zip(rec.iter().skip(1)) {
                let v: f64 = field.trim().parse().map_err(|_| Error::Input(format!("bad value {field:?}")))?;
                pt.push(p.unit(v));
            }
            points.push(pt);
        }
        let d = Self { parameters, points, replications_per_point };
        d.validate()?;
        Ok(d)
    }
}

/// Outputs analysed per year.
pub const OUTPUTS: [(&str, Metric); 5] = [
    ("deaths", Metric::DeathsOpioid),
    ("arrests", Metric::ArrestsOpioidNondiverted),
    ("hospital", Metric::HospitalEncounters),
    ("treatment", Metric::TreatmentStarts),
    ("active", Metric::ActiveYearEnd),
];

pub const YEARS: [i32; 3] = [2016, 2018, 2032];

/// Tests in one Bonferroni family: every parameter, output and year.
pub const BONFERRONI_FAMILY: usize = 41 * OUTPUTS.len() * YEARS.len();

/// Replication-averaged outputs per design point, indexed
/// `[point][output * YEARS.len() + year]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRun {
    pub responses: Vec<Vec<f64>>,
}

impl SensitivityRun {
    pub fn column(&self, output: usize, year: usize) -> Vec<f64> {
        self.responses.iter().map(|r| r[output * YEARS.len() + year]).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["point".to_string()];
        for (name, _) in OUTPUTS {
            for y in YEARS {
                header.push(format!("{name}_{y}"));
            }
        }
        wtr.write_record(&header)?;
        for (i, r) in self.responses.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(r.iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let width = OUTPUTS.len() * YEARS.len();
        let mut responses = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row: std::result::Result<Vec<f64>, _> = rec.iter().skip(1).map(|f| f.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| Error::Input(format!("bad response value: {e}")))?;
            if row.len() != width {
                return Err(Error::Input(format!("expected {width} response columns, got {}", row.len())));
            }
            responses.push(row);
        }
        Ok(Self { responses })
    }
}

/// Runs every design point. Replication `r` of every point shares seeds,
/// so points differ only through their parameters.
pub fn run_sensitivity(design: &SensitivityDesign, scenario: &ScenarioConfig, base: &ParameterSet) -> Result<SensitivityRun> {
    design.validate()?;
    let at = |point: usize| move |e: Error| Error::AtPoint { point, source: Box::new(e) };
    let responses = (0..design.points.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let params = design.parameter_set(base, i).map_err(at(i))?;
            check(&params, scenario).map_err(at(i))?;
            let mut acc = vec![0.0; OUTPUTS.len() * YEARS.len()];
            for r in 0..design.replications_per_point {
                let out = run_replication(scenario, &params, r).map_err(at(i))?;
                for (o, (_, m)) in OUTPUTS.iter().enumerate() {
                    for (y, year) in YEARS.iter().enumerate() {
                        let t = out
                            .tallies
                            .iter()
                            .find(|t| t.year == *year)
                            .ok_or_else(|| at(i)(Error::Engine(format!("no tally for {year}"))))?;
                        acc[o * YEARS.len() + y] += t.get(*m) as f64;
                    }
                }
            }
            let n = design.replications_per_point as f64;
            Ok(acc.into_iter().map(|v| v / n).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityRun { responses })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensRow {
    pub parameter: u8,
    pub output: String,
    pub year: i32,
    pub prcc: f64,
    pub prcc_p: f64,
    pub effect: f64,
    pub effect_significant: bool,
}

/// PRCC and effect size for every parameter, output and year. `prcc_p` is
/// Bonferroni-adjusted; both tests are significant below 0.05.
pub fn analyze(design: &SensitivityDesign, run: &SensitivityRun) -> Result<Vec<SensRow>> {
    if run.responses.len() != design.points.len() {
        return Err(Error::Input(format!("{} responses for {} design points", run.responses.len(), design.points.len())));
    }
    let values: Vec<Vec<f64>> = (0..design.points.len()).map(|i| design.values(i)).collect();
    let mut rows = Vec::new();
    for (o, (name, _)) in OUTPUTS.iter().enumerate() {
        for (y, year) in YEARS.iter().enumerate() {
            let col = run.column(o, y);
            // A heavily tied column (sparse counts at small scale) gets NaN
            // PRCCs instead of sinking the whole table.
            let pr = match prcc(&values, &col, BONFERRONI_FAMILY) {
                Err(Error::Domain(_)) => {
                    vec![Prcc { coefficient: f64::NAN, t: f64::NAN, p: f64::NAN, p_bonferroni: f64::NAN }; design.parameters.len()]
                }
                r => r?,
            };
            let ef = effect_sizes(&design.points, &col, BONFERRONI_FAMILY)?;
            for ((p, a), e) in design.parameters.iter().zip(pr).zip(ef) {
                rows.push(SensRow {
                    parameter: p.id,
                    output: name.to_string(),
                    year: *year,
                    prcc: a.coefficient,
                    prcc_p: a.p_bonferroni,
                    effect: e.coefficient,
                    effect_significant: e.p_bonferroni < 0.05,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_results<W: Write>(w: W, rows: &[SensRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}
