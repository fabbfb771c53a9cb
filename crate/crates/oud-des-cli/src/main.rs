mod report;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use oud_des::calibration::{coverage, CalibrationTargets};
use oud_des::engine::run_scenario;
use oud_des::estimation::{fit_lognormal_mode_quantile, ModeQuantileInput};
use oud_des::scenario::{check, CostTable, ParameterSet, ScenarioConfig};
use oud_des::sensitivity::{analyze, run_sensitivity, write_results, SensitivityDesign, SensitivityRun};
use oud_des::stats::required_replications;
use oud_des::tally::{read_rows_path, write_rows, yearly_cost, TallyRow, YearlyTally};
use oud_des::LifeTable;

#[derive(Parser)]
#[command(name = "oud-des", version, about = "Opioid-use discrete-event simulator")]
struct Cli {
    /// Worker threads; defaults to all hardware threads.
    #[arg(long, global = true, env = "OUD_DES_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ModelArgs {
    /// Parameter set as JSON; missing fields keep their defaults.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Life table CSV (age_low,age_high,survivors) replacing the built-in one.
    #[arg(long)]
    life_table: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run scenarios and write yearly tallies plus a manifest.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// JSON array of scenarios.
        #[arg(long)]
        scenarios: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Master seed for every scenario.
        #[arg(long)]
        seed: Option<u64>,
        /// Replications for every scenario.
        #[arg(long)]
        reps: Option<u32>,
        /// Arrival and starting-population scale for every scenario.
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Compare scenarios in a tallies CSV against a base scenario.
    Analyze {
        /// Tallies CSV files; rows are pooled.
        #[arg(required = true)]
        tallies: Vec<PathBuf>,
        #[arg(long, default_value = "0-22-0")]
        base: String,
        /// Inclusive year window, e.g. 2023:2032.
        #[arg(long, default_value = "2023:2032", value_parser = parse_window)]
        window: (i32, i32),
        /// Years for re-arrest, re-hospitalisation and treatment re-start rates.
        #[arg(long, value_delimiter = ',', default_value = "2023,2027,2032")]
        reuse_years: Vec<i32>,
        /// Report CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check calibration targets against the prediction intervals of a run.
    CalibrateCheck {
        tallies: PathBuf,
        /// Targets CSV (year,output,observed); the 2017 counts when absent.
        #[arg(long)]
        targets: Option<PathBuf>,
        /// Scenario to check; the first one in the file when absent.
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Fit a lognormal from its mode and one quantile.
    Estimate {
        #[arg(long)]
        mode: f64,
        #[arg(long)]
        xq: f64,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 0.0)]
        location: f64,
    },
    /// Replications needed for a target CI half width.
    Reps {
        #[arg(long)]
        s: f64,
        #[arg(long)]
        h: f64,
        #[arg(long, default_value_t = 600)]
        pilot: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    #[command(subcommand)]
    Sensitivity(SensCmd),
    /// Societal cost of yearly counts, in millions of 2017 USD.
    Cost {
        /// Tallies CSV; prints the mean cost per scenario for `--year`.
        #[arg(long)]
        tallies: Option<PathBuf>,
        #[arg(long, default_value_t = 2017)]
        year: i32,
        #[arg(long, default_value_t = 0)]
        deaths: u32,
        #[arg(long, default_value_t = 0)]
        arrests: u32,
        #[arg(long, default_value_t = 0)]
        treatment: u32,
        #[arg(long, default_value_t = 0)]
        hospital: u32,
        #[arg(long, default_value_t = 0)]
        active: u32,
    },
}

#[derive(Subcommand)]
enum SensCmd {
    /// Write a Sobol design over the 41 parameters.
    Design {
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every design point at (60,80,60).
    Run {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        reps: u32,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// PRCC and effect sizes from a design and its responses.
    Analyze {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_window(s: &str) -> std::result::Result<(i32, i32), String> {
    let (a, b) = s.split_once(':').ok_or("window must look like 2023:2032")?;
    let a: i32 = a.trim().parse().map_err(|_| format!("bad start year {a:?}"))?;
    let b: i32 = b.trim().parse().map_err(|_| format!("bad end year {b:?}"))?;
    if a > b {
        return Err(format!("window {a}:{b} is empty"));
    }
    Ok((a, b))
}

fn load_params(m: &ModelArgs) -> Result<ParameterSet> {
    let mut p = match &m.params {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("{}", path.display()))?
        }
        None => ParameterSet::default(),
    };
    if let Some(path) = &m.life_table {
        p.life_table = LifeTable::from_csv_path(path).with_context(|| format!("{}", path.display()))?;
    }
    Ok(p)
}

fn load_scenarios(path: &Path) -> Result<Vec<ScenarioConfig>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let s: Vec<ScenarioConfig> = serde_json::from_str(&text).with_context(|| format!("{}", path.display()))?;
    if s.is_empty() {
        bail!("{}: no scenarios", path.display());
    }
    Ok(s)
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool_version: &'a str,
    parameter_hash: String,
    scenarios: Vec<ManifestScenario<'a>>,
    rows: usize,
}

#[derive(Serialize)]
struct ManifestScenario<'a> {
    id: &'a str,
    master_seed: u64,
    replications: u32,
    population_scale: f64,
}

/// SHA-256 over the canonical JSON of the parameters and scenarios.
fn parameter_hash(params: &ParameterSet, scenarios: &[ScenarioConfig]) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(params)?);
    h.update(serde_json::to_vec(scenarios)?);
    Ok(hex::encode(h.finalize()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn simulate(model: &ModelArgs, scenarios: &Path, out: &Path, seed: Option<u64>, reps: Option<u32>, scale: Option<f64>) -> Result<()> {
    let params = load_params(model)?;
    let mut list = load_scenarios(scenarios)?;
    for s in &mut list {
        if let Some(v) = seed {
            s.master_seed = v;
        }
        if let Some(v) = reps {
            s.replications = v;
        }
        if let Some(v) = scale {
            s.population_scale = v;
        }
        check(&params, s).map_err(|e| anyhow!("{}: scenario {:?}: {e}", scenarios.display(), s.id))?;
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut rows = Vec::new();
    for s in &list {
        for o in run_scenario(s, &params).with_context(|| format!("scenario {:?}", s.id))? {
            rows.extend(o.tallies.into_iter().map(|tally| TallyRow { scenario_id: s.id.clone(), replication: o.replication, tally }));
        }
    }
    write_rows(create(&out.join("tallies.csv"))?, &rows)?;
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        parameter_hash: parameter_hash(&params, &list)?,
        scenarios: list
            .iter()
            .map(|s| ManifestScenario {
                id: &s.id,
                master_seed: s.master_seed,
                replications: s.replications,
                population_scale: s.population_scale,
            })
            .collect(),
        rows: rows.len(),
    };
    let mut w = create(&out.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w)?;
    eprintln!("wrote {} rows to {}", rows.len(), out.join("tallies.csv").display());
    Ok(())
}

fn read_all(paths: &[PathBuf]) -> Result<Vec<TallyRow>> {
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(read_rows_path(p).with_context(|| format!("{}", p.display()))?);
    }
    Ok(rows)
}

fn write_csv<T: Serialize>(out: Option<&Path>, rows: &[T]) -> Result<()> {
    let w: Box<dyn Write> = match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

fn calibrate_check(tallies: &Path, targets: Option<&Path>, scenario: Option<&str>) -> Result<()> {
    let rows = read_rows_path(tallies).with_context(|| format!("{}", tallies.display()))?;
    let targets = match targets {
        Some(p) => CalibrationTargets::from_csv_path(p).with_context(|| format!("{}", p.display()))?,
        None => CalibrationTargets::known_2017(),
    };
    let groups = report::group(&rows);
    let (id, series) = match scenario {
        Some(id) => groups.get_key_value(id).ok_or_else(|| anyhow!("scenario {id:?} not in {}", tallies.display()))?,
        None => groups.iter().next().ok_or_else(|| anyhow!("{} has no rows", tallies.display()))?,
    };
    let reps: Vec<Vec<YearlyTally>> = series.values().cloned().collect();
    let c = coverage(&targets, &reps, 0.05)?;
    println!("scenario {id}: {} of {} targets inside the 95% PI", c.inside, c.checks.len());
    println!("year,output,observed,mean,pi_low,pi_high,inside,relative_error");
    for k in &c.checks {
        println!(
            "{},{:?},{},{:.2},{:.2},{:.2},{},{:.4}",
            k.year, k.output, k.observed, k.simulated_mean, k.pi_lo, k.pi_hi, k.inside, k.relative_error
        );
    }
    println!("average relative error {:.2}%", 100.0 * c.average_relative_error);
    Ok(())
}

fn cost(args: &Cmd) -> Result<()> {
    let Cmd::Cost { tallies, year, deaths, arrests, treatment, hospital, active } = args else { unreachable!() };
    let costs = CostTable::default();
    if let Some(path) = tallies {
        let rows = read_rows_path(path).with_context(|| format!("{}", path.display()))?;
        for (id, series) in report::group(&rows) {
            let per_rep: Vec<f64> =
                series.values().filter_map(|ts| ts.iter().find(|t| t.year == *year)).map(|t| yearly_cost(t, &costs) / 1e6).collect();
            if per_rep.is_empty() {
                bail!("scenario {id:?} has no year {year}");
            }
            println!("{id},{year},{:.1}", oud_des::stats::mean(&per_rep));
        }
        return Ok(());
    }
    let t = YearlyTally {
        year: *year,
        deaths_opioid: *deaths,
        arrests_opioid_nondiverted: *arrests,
        treatment_starts: *treatment,
        hospital_encounters: *hospital,
        active_year_end: *active,
        ..Default::default()
    };
    let one = |f: fn(&mut YearlyTally)| {
        let mut only = YearlyTally { year: *year, ..Default::default() };
        f(&mut only);
        only
    };
    let parts = [
        ("deaths", one(|x| x.deaths_opioid = 1), *deaths),
        ("arrests", one(|x| x.arrests_opioid_nondiverted = 1), *arrests),
        ("treatment", one(|x| x.treatment_starts = 1), *treatment),
        ("hospital", one(|x| x.hospital_encounters = 1), *hospital),
        ("active", one(|x| x.active_year_end = 1), *active),
    ];
    for (name, unit, n) in parts {
        println!("{name}: {n} -> ${:.1}M", yearly_cost(&unit, &costs) * n as f64 / 1e6);
    }
    println!("total: ${:.1}M", yearly_cost(&t, &costs) / 1e6);
    Ok(())
}

fn sensitivity(cmd: &SensCmd) -> Result<()> {
    match cmd {
        SensCmd::Design { n, out } => {
            let d = SensitivityDesign::sobol(*n, 3)?;
            d.write_csv(create(out)?)?;
            eprintln!("wrote {} points to {}", n, out.display());
        }
        SensCmd::Run { model, design, out, reps, scale, seed } => {
            let base = load_params(model)?;
            let d = SensitivityDesign::read_csv(File::open(design).with_context(|| format!("{}", design.display()))?, *reps)
                .with_context(|| format!("{}", design.display()))?;
            let mut sc = ScenarioConfig::triplet(60.0, 80.0, 60.0).with_scale(*scale);
            if let Some(s) = seed {
                sc.master_seed = *s;
            }
            let run = run_sensitivity(&d, &sc, &base)?;
            run.write_csv(create(out)?)?;
        }
        SensCmd::Analyze { design, responses, out } => {
            let d = SensitivityDesign::read_csv(File::open(design).with_context(|| format!("{}", design.display()))?, 1)?;
            let run = SensitivityRun::read_csv(File::open(responses).with_context(|| format!("{}", responses.display()))?)?;
            let rows = analyze(&d, &run)?;
            write_results(create(out)?, &rows)?;
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring threads")?;
    }
    match &cli.cmd {
        Cmd::Simulate { model, scenarios, out, seed, reps, scale } => simulate(model, scenarios, out, *seed, *reps, *scale),
        Cmd::Analyze { tallies, base, window, reuse_years, out } => {
            let rows = read_all(tallies)?;
            let report = report::compare(&rows, base, *window, reuse_years, &CostTable::default())?;
            write_csv(out.as_deref(), &report)
        }
        Cmd::CalibrateCheck { tallies, targets, scenario } => calibrate_check(tallies, targets.as_deref(), scenario.as_deref()),
        Cmd::Estimate { mode, xq, q, location } => {
            let (mu, sigma) = fit_lognormal_mode_quantile(&ModeQuantileInput::<f64>::new(*mode, *location, *xq, *q))?;
            println!("mu={mu:.2} sigma={sigma:.2}");
            Ok(())
        }
        Cmd::Reps { s, h, pilot, alpha } => {
            println!("{}", required_replications(*s, *h, *alpha, *pilot)?);
            Ok(())
        }
        Cmd::Sensitivity(c) => sensitivity(c),
        c @ Cmd::Cost { .. } => cost(c),
    }
}
