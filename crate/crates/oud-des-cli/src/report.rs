//! Scenario comparison report over a window of years.

use anyhow::{bail, Context, Result};
use serde::Serialize;
use std::collections::BTreeMap;

use oud_des::scenario::CostTable;
use oud_des::stats::{mean_ci, paired_t_test, prediction_interval, significance_flag, std_dev};
use oud_des::tally::{by_replication, cumulative_window, reuse, yearly_cost, Reuse, TallyRow, YearlyTally};

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub scenario: String,
    pub statistic: String,
    pub mean: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub pi_low: f64,
    pub pi_high: f64,
    pub diff_vs_base: f64,
    pub p_value: f64,
    pub flag: String,
}

type Series = BTreeMap<u32, Vec<YearlyTally>>;

pub fn group(rows: &[TallyRow]) -> BTreeMap<String, Series> {
    let mut ids: Vec<&str> = rows.iter().map(|r| r.scenario_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.into_iter()
        .map(|id| {
            let sub: Vec<TallyRow> = rows.iter().filter(|r| r.scenario_id == id).cloned().collect();
            (id.to_string(), by_replication(&sub).into_iter().collect())
        })
        .collect()
}

/// Per-replication values of each statistic, in replication order.
fn statistics(series: &Series, window: (i32, i32), reuse_years: &[i32], costs: &CostTable) -> Result<Vec<(String, Vec<f64>)>> {
    let mut out: Vec<(String, Vec<f64>)> =
        ["deaths_opioid", "arrests_opioid_nondiverted", "hospital_encounters", "treatment_starts", "active_year_end", "cost_millions"]
            .iter()
            .map(|s| (s.to_string(), Vec::new()))
            .collect();
    for (r, tallies) in series {
        let w = cumulative_window(tallies, window.0, window.1).with_context(|| format!("replication {r}"))?;
        let cost: f64 = tallies.iter().filter(|t| (window.0..=window.1).contains(&t.year)).map(|t| yearly_cost(t, costs)).sum();
        let vals = [
            w.deaths_opioid as f64,
            w.arrests_opioid_nondiverted as f64,
            w.hospital_encounters as f64,
            w.treatment_starts as f64,
            w.active_year_end as f64,
            cost / 1e6,
        ];
        for (slot, v) in out.iter_mut().zip(vals) {
            slot.1.push(v);
        }
    }
    for &y in reuse_years {
        for (kind, name) in [(Reuse::Arrest, "rearrest"), (Reuse::Hospital, "rehospital"), (Reuse::Treatment, "retreatment")] {
            let vals: Vec<f64> =
                series.values().map(|ts| ts.iter().find(|t| t.year == y).and_then(|t| reuse(t, kind).ok()).unwrap_or(f64::NAN)).collect();
            out.push((format!("{name}_{y}"), vals));
        }
    }
    Ok(out)
}

fn finite(xs: &[f64]) -> Vec<f64> {
    xs.iter().copied().filter(|x| x.is_finite()).collect()
}

pub fn compare(rows: &[TallyRow], base_id: &str, window: (i32, i32), reuse_years: &[i32], costs: &CostTable) -> Result<Vec<ReportRow>> {
    let groups = group(rows);
    let Some(base) = groups.get(base_id) else {
        bail!("base scenario {base_id:?} not found in the tallies");
    };
    let base_stats = statistics(base, window, reuse_years, costs)?;
    let mut out = Vec::new();
    for (id, series) in &groups {
        if series.keys().ne(base.keys()) {
            bail!("scenario {id:?} has different replications from the base; pairing impossible");
        }
        let stats = statistics(series, window, reuse_years, costs)?;
        for ((name, xs), (_, bs)) in stats.iter().zip(&base_stats) {
            let xs_f = finite(xs);
            if xs_f.len() < 2 {
                continue;
            }
            let ci = mean_ci(&xs_f, 0.05)?;
            let (pi_low, pi_high) = prediction_interval(&xs_f, 0.05)?;
            let paired: (Vec<f64>, Vec<f64>) = xs.iter().zip(bs).filter(|(a, b)| a.is_finite() && b.is_finite()).unzip();
            let p = match paired_t_test(&paired.0, &paired.1) {
                Ok(t) => t.p,
                Err(_) => 0.0,
            };
            out.push(ReportRow {
                scenario: id.clone(),
                statistic: name.clone(),
                mean: ci.mean,
                se: std_dev(&xs_f) / (xs_f.len() as f64).sqrt(),
                ci_low: ci.lo,
                ci_high: ci.hi,
                pi_low,
                pi_high,
                diff_vs_base: ci.mean - oud_des::stats::mean(&finite(bs)),
                p_value: p,
                flag: significance_flag(p).to_string(),
            });
        }
    }
    Ok(out)
}
