use oud_des::engine::{run_replication, run_scenario, schedule_active_entry, EventKind, Person, Sojourn};
use oud_des::rng::Keyed;
use oud_des::scenario::{ParameterSet, ScenarioConfig};
use oud_des::tally::cumulative_window;
use statrs::distribution::{Continuous, ContinuousCDF, LogNormal};

fn small(ad: f64, od: f64, cm: f64) -> ScenarioConfig {
    ScenarioConfig::triplet(ad, od, cm).with_scale(0.1).with_replications(4)
}

#[test]
fn people_are_conserved() {
    let params = ParameterSet::default();
    for sc in [small(0.0, 22.0, 0.0), small(60.0, 80.0, 60.0)] {
        for r in 0..3 {
            let o = run_replication(&sc, &params, r).unwrap();
            let deaths: u32 = o.tallies.iter().map(|t| t.deaths_opioid + t.deaths_natural).sum();
            let last = o.tallies.last().unwrap();
            let f = o.flows.last().unwrap();
            let alive = last.active_year_end + last.inactive_year_end + f.occupancy_end.iter().sum::<u32>();
            assert_eq!(deaths + alive, o.persons, "scenario {} rep {r}", sc.id);
            for (y, f) in o.flows.iter().enumerate() {
                for s in 0..3 {
                    assert_eq!(f.occupancy_start[s] + f.entries[s], f.occupancy_end[s] + f.exits[s], "year {y} state {s}");
                }
                if let Some(next) = o.flows.get(y + 1) {
                    assert_eq!(f.occupancy_end, next.occupancy_start);
                }
            }
            let arrivals: u32 = o.tallies.iter().map(|t| t.new_arrivals).sum();
            assert!(arrivals < o.persons);
        }
    }
}

#[test]
fn replications_are_bit_reproducible() {
    let params = ParameterSet::default();
    let sc = small(40.0, 60.0, 40.0);
    let a = run_scenario(&sc, &params).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| run_scenario(&sc, &params).unwrap());
    let c: Vec<_> = (0..sc.replications).map(|r| run_replication(&sc, &params, r).unwrap()).collect();
    for ((x, y), z) in a.iter().zip(&b).zip(&c) {
        assert_eq!(x.tallies, y.tallies);
        assert_eq!(x.tallies, z.tallies);
        assert_eq!(x.sojourns, z.sojourns);
    }
    let other = run_replication(&sc.clone().with_seed(7), &params, 0).unwrap();
    assert_ne!(other.tallies, a[0].tallies);
}

#[test]
fn inert_gates_leave_runs_identical() {
    let params = ParameterSet::default();
    let base = small(0.0, 22.0, 0.0);
    let mut late = small(80.0, 90.0, 100.0);
    late.ad_start = late.horizon_end;
    late.od_start = late.ad_start;
    late.cm_start = late.ad_start;
    let zero = small(0.0, 22.0, 0.0);
    let mut zero = zero;
    zero.id = "renamed".into();
    for r in 0..2 {
        let a = run_replication(&base, &params, r).unwrap();
        let b = run_replication(&late, &params, r).unwrap();
        let n = a.tallies.len() - 1;
        assert_eq!(a.tallies[..n], b.tallies[..n]);
        assert_eq!(a.tallies, run_replication(&zero, &params, r).unwrap().tallies);
    }
}

#[test]
fn policies_share_the_pre_policy_years() {
    let params = ParameterSet::default();
    let a = run_replication(&small(0.0, 22.0, 0.0), &params, 1).unwrap();
    let b = run_replication(&small(60.0, 80.0, 60.0), &params, 1).unwrap();
    let pre = |o: &oud_des::engine::ReplicationOutput| o.tallies.iter().filter(|t| t.year < 2017).cloned().collect::<Vec<_>>();
    assert_eq!(pre(&a), pre(&b));
    assert_ne!(a.tallies, b.tallies);
}

#[test]
fn full_arrest_diversion_leaves_no_nondiverted_arrests() {
    let params = ParameterSet::default();
    let sc = small(100.0, 22.0, 0.0).with_replications(10);
    for o in run_scenario(&sc, &params).unwrap() {
        let w = cumulative_window(&o.tallies, 2023, 2032).unwrap();
        assert_eq!(w.arrests_opioid_nondiverted, 0);
        assert!(w.arrests_opioid_diverted > 0);
    }
}

/// P(arc `j` wins) among independent lognormal competitors, by quadrature.
fn win_probability(laws: &[LogNormal], j: usize) -> f64 {
    let (mut acc, mut prev) = (0.0f64, 0.0f64);
    let f = |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        laws[j].pdf(t) * laws.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, l)| l.sf(t)).product::<f64>()
    };
    // Log-spaced trapezoid from 1e-4 to 1e9 days.
    let steps = 200_000;
    let (a, b) = (1e-4f64.ln(), 1e9f64.ln());
    let mut fp = f(1e-4);
    for i in 1..=steps {
        let t = (a + (b - a) * i as f64 / steps as f64).exp();
        let ft = f(t);
        acc += (t - prev.max(1e-4)) * (ft + fp) / 2.0;
        prev = t;
        fp = ft;
    }
    acc
}

#[test]
fn competing_draws_match_quadrature() {
    let params = ParameterSet::default();
    let k = Keyed::new(11, 0);
    let kinds =
        [EventKind::OpioidDeath, EventKind::HospitalEncounter, EventKind::OpioidArrest, EventKind::StartTreatment, EventKind::StopUse];
    let mut counts = [0u32; 5];
    let n = 100_000u32;
    for id in 0..n {
        let mut p = Person::new(id, 0.0, 30.0);
        let (_, kind) = schedule_active_entry(&params, f64::INFINITY, &k, &mut p, 0.0).unwrap();
        counts[kinds.iter().position(|x| *x == kind).unwrap()] += 1;
    }
    let laws: Vec<LogNormal> = [&params.arc2_pre, &params.arc3, &params.arc4, &params.arc5, &params.arc6]
        .iter()
        .map(|d| {
            let (m, s) = d.mu_sigma().unwrap();
            LogNormal::new(m, s).unwrap()
        })
        .collect();
    for j in 0..5 {
        let want = win_probability(&laws, j);
        let got = counts[j] as f64 / n as f64;
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((got - want).abs() < 4.0 * se + 1e-4, "{:?}: {got} vs {want}", kinds[j]);
    }
}

#[test]
fn sampled_sojourns_follow_their_laws() {
    let params = ParameterSet::default();
    let o = run_replication(&ScenarioConfig::default().with_scale(0.25), &params, 0).unwrap();
    let mean = |d: &oud_des::Distribution| {
        let (m, s) = d.mu_sigma().unwrap();
        (m + s * s / 2.0).exp()
    };
    for (kind, law, tol) in [
        (Sojourn::Hospital, &params.arc_a, 0.02),
        (Sojourn::Treatment, &params.arc_c, 0.05),
        (Sojourn::InactiveAfterHospital, &params.arc_f, 0.10),
    ] {
        let got = o.sojourns.mean(kind).unwrap();
        let want = mean(law);
        assert!((got / want - 1.0).abs() < tol, "{}: {got} vs {want}", kind.name());
    }
}
