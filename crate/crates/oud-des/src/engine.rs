//! Event-driven core.
//!
//! Every live person holds exactly one pending event. Competing clocks are
//! resolved when the event is scheduled, so nothing ever has to be
//! cancelled: the scheduled event is the minimum of the state's own exit and
//! whichever persistent clocks (natural death, non-opioid arrest) apply.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::dist::categorical;
use crate::error::{Error, Result};
use crate::rng::{Keyed, Stream};
use crate::scenario::{check, ParameterSet, ScenarioConfig};
use crate::tally::YearlyTally;
use crate::{Distribution, DAYS_PER_YEAR};

/// Day of the year on which mid-year occupancy is read.
pub const MIDYEAR_DAY: f64 = 182.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum State {
    Active,
    Inactive,
    Cjs,
    Hospital,
    Treatment,
    DeadOpioid,
    DeadNatural,
}

impl State {
    pub fn is_dead(self) -> bool {
        matches!(self, State::DeadOpioid | State::DeadNatural)
    }
}

/// A new arrival starts use at its arrival instant, so `Arrival` also plays
/// the part of the first start-use event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    OpioidDeath,
    NaturalDeath,
    OpioidArrest,
    NonOpioidArrest,
    HospitalEncounter,
    StartTreatment,
    StopUse,
    ExitCjs,
    ExitHospital,
    ExitTreatment,
    ExitInactive,
    Arrival,
}

impl EventKind {
    /// Tie order at equal times, lowest first.
    pub fn rank(self) -> u8 {
        use EventKind::*;
        match self {
            NaturalDeath => 0,
            OpioidDeath => 1,
            OpioidArrest | NonOpioidArrest => 2,
            HospitalEncounter => 3,
            StartTreatment => 4,
            StopUse => 5,
            ExitCjs | ExitHospital | ExitTreatment | ExitInactive => 6,
            Arrival => 7,
        }
    }
}

/// Scheduled event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub person: u32,
    pub kind: EventKind,
}

impl Eq for Event {}

impl Ord for Event {
    // reversed: BinaryHeap pops the maximum
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.kind.rank().cmp(&self.kind.rank())).then(other.person.cmp(&self.person))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Earliest candidate by (time, tie rank); the first listed wins exact ties.
pub fn earliest(candidates: &[(f64, EventKind)]) -> (f64, EventKind) {
    let mut best = candidates[0];
    for &c in &candidates[1..] {
        if c.0 < best.0 || (c.0 == best.0 && c.1.rank() < best.1.rank()) {
            best = c;
        }
    }
    best
}

/// Whether a persistent clock cuts a timed state short. Returns the
/// preempting event, or `None` when the state runs to `exit`.
pub fn preemption_check(state: State, exit: f64, natural_death: f64, nonopioid_arrest: f64) -> Option<(f64, EventKind)> {
    let arrest = if state == State::Cjs { f64::INFINITY } else { nonopioid_arrest };
    let (t, k) = earliest(&[(natural_death, EventKind::NaturalDeath), (arrest, EventKind::NonOpioidArrest)]);
    (t < exit).then_some((t, k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Person {
    pub id: u32,
    pub entry_time: f64,
    pub age_at_entry: f64,
    pub state: State,
    /// Set whenever `state` is `Inactive`.
    pub previous_state: Option<State>,
    pub natural_death_time: f64,
    pub nonopioid_arrest_time: f64,
    pub counters: [u32; Stream::COUNT],
    /// Current CJS episode began with an opioid-related arrest.
    pub cjs_opioid: bool,
    /// Last year index with an opioid arrest / hospital encounter / treatment start.
    marks: [i32; 3],
    in_first_spell: bool,
}

impl Person {
    pub fn new(id: u32, entry_time: f64, age_at_entry: f64) -> Self {
        Self {
            id,
            entry_time,
            age_at_entry,
            state: State::Active,
            previous_state: None,
            natural_death_time: f64::INFINITY,
            nonopioid_arrest_time: f64::INFINITY,
            counters: [0; Stream::COUNT],
            cjs_opioid: false,
            marks: [-1; 3],
            in_first_spell: false,
        }
    }

    /// Next uniform on one of this person's streams.
    pub fn uniform(&mut self, k: &Keyed, s: Stream) -> f64 {
        let c = &mut self.counters[s.index()];
        let u = k.uniform(s, self.id, *c);
        *c += 1;
        u
    }

    /// Next draw from `law` on one of this person's streams.
    pub fn draw(&mut self, k: &Keyed, s: Stream, law: &Distribution) -> Result<f64> {
        let mut key = k.key(s, self.id, self.counters[s.index()]);
        let v = law.sample_with(&mut key)?;
        self.counters[s.index()] = key.counter;
        Ok(v)
    }
}

/// Draws arcs (2)-(6) for a person entering active use at `now` and returns
/// the earliest of them and the two persistent clocks.
pub fn schedule_active_entry(params: &ParameterSet, switch_day: f64, k: &Keyed, p: &mut Person, now: f64) -> Result<(f64, EventKind)> {
    let arc2 = if now < switch_day { &params.arc2_pre } else { &params.arc2_post };
    let d2 = p.draw(k, Stream::OpioidDeath, arc2)?;
    let d3 = p.draw(k, Stream::HospitalEncounter, &params.arc3)?;
    let d4 = p.draw(k, Stream::OpioidArrest, &params.arc4)?;
    let d5 = p.draw(k, Stream::StartTreatment, &params.arc5)?;
    let d6 = p.draw(k, Stream::StopUse, &params.arc6)?;
    Ok(earliest(&[
        (p.natural_death_time, EventKind::NaturalDeath),
        (now + d2, EventKind::OpioidDeath),
        (now + d4, EventKind::OpioidArrest),
        (p.nonopioid_arrest_time, EventKind::NonOpioidArrest),
        (now + d3, EventKind::HospitalEncounter),
        (now + d5, EventKind::StartTreatment),
        (now + d6, EventKind::StopUse),
    ]))
}

/// Sojourn categories, each a sampled duration in days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sojourn {
    ActiveAfterInitiation,
    Treatment,
    Cjs,
    Hospital,
    InactiveAfterActive,
    InactiveAfterTreatment,
    InactiveAfterCjs,
    InactiveAfterHospital,
}

impl Sojourn {
    pub const ALL: [Sojourn; 8] = [
        Sojourn::ActiveAfterInitiation,
        Sojourn::Treatment,
        Sojourn::Cjs,
        Sojourn::Hospital,
        Sojourn::InactiveAfterActive,
        Sojourn::InactiveAfterTreatment,
        Sojourn::InactiveAfterCjs,
        Sojourn::InactiveAfterHospital,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Sojourn::ActiveAfterInitiation => "active_after_initiation",
            Sojourn::Treatment => "treatment",
            Sojourn::Cjs => "cjs",
            Sojourn::Hospital => "hospital",
            Sojourn::InactiveAfterActive => "inactive_after_active",
            Sojourn::InactiveAfterTreatment => "inactive_after_treatment",
            Sojourn::InactiveAfterCjs => "inactive_after_cjs",
            Sojourn::InactiveAfterHospital => "inactive_after_hospital",
        }
    }
}

/// Sums and counts of sampled sojourns for entries after the start.
/// The active-after-initiation entry is the winning competing time of a new
/// arrival's first spell.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SojournStats {
    pub sum: [f64; 8],
    pub count: [u64; 8],
}

impl SojournStats {
    fn add(&mut self, s: Sojourn, days: f64) {
        self.sum[s as usize] += days;
        self.count[s as usize] += 1;
    }

    pub fn mean(&self, s: Sojourn) -> Option<f64> {
        let n = self.count[s as usize];
        (n > 0).then(|| self.sum[s as usize] / n as f64)
    }
}

/// Entries and exits per year for the three service states, for the
/// conservation check.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub year: i32,
    /// Cjs, Hospital, Treatment.
    pub entries: [u32; 3],
    pub exits: [u32; 3],
    pub occupancy_start: [u32; 3],
    pub occupancy_end: [u32; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutput {
    pub replication: u32,
    pub tallies: Vec<YearlyTally>,
    pub sojourns: SojournStats,
    pub flows: Vec<Flow>,
    pub persons: u32,
    pub events: u64,
}

#[derive(Debug, Clone, Copy)]
enum Checkpoint {
    MidYear(usize),
    YearEnd(usize),
}

const S_CJS: usize = 0;
const S_HOSP: usize = 1;
const S_TREAT: usize = 2;

fn service_slot(s: State) -> Option<usize> {
    match s {
        State::Cjs => Some(S_CJS),
        State::Hospital => Some(S_HOSP),
        State::Treatment => Some(S_TREAT),
        _ => None,
    }
}

struct Sim<'a> {
    params: &'a ParameterSet,
    k: Keyed,
    horizon: f64,
    n_years: usize,
    switch_day: f64,
    ad_day: f64,
    od_day: f64,
    cm_day: f64,
    p_ad: f64,
    p_od_after: f64,
    p_cm: f64,
    arrival_mean: f64,
    arrivals_drawn: u32,
    people: Vec<Person>,
    heap: BinaryHeap<Event>,
    tallies: Vec<YearlyTally>,
    flows: Vec<Flow>,
    sojourns: SojournStats,
    n_active: u32,
    n_inactive: u32,
    /// Cjs (all), Hospital, Treatment.
    occ: [u32; 3],
    occ_cjs_opioid: u32,
    cur_year: usize,
    events: u64,
}

impl<'a> Sim<'a> {
    fn new(scenario: &ScenarioConfig, params: &'a ParameterSet, replication: u32) -> Result<Self> {
        check(params, scenario)?;
        let n_years = scenario.n_years();
        let first_year = scenario.first_year();
        let tallies = (0..n_years).map(|i| YearlyTally { year: first_year + i as i32, ..Default::default() }).collect();
        let flows = (0..n_years).map(|i| Flow { year: first_year + i as i32, ..Default::default() }).collect();
        Ok(Self {
            params,
            k: Keyed::new(scenario.master_seed, replication),
            horizon: scenario.horizon_days(),
            n_years,
            switch_day: scenario.sim_day(params.fentanyl_switch),
            ad_day: scenario.sim_day(scenario.ad_start),
            od_day: scenario.sim_day(scenario.od_start),
            cm_day: scenario.sim_day(scenario.cm_start),
            p_ad: scenario.ad / 100.0,
            p_od_after: scenario.od_probability(params),
            p_cm: scenario.cm / 100.0,
            arrival_mean: params.arrival_mean().expect("validated") / scenario.population_scale,
            arrivals_drawn: 0,
            people: Vec::new(),
            heap: BinaryHeap::new(),
            tallies,
            flows,
            sojourns: SojournStats::default(),
            n_active: 0,
            n_inactive: 0,
            occ: [0; 3],
            occ_cjs_opioid: 0,
            cur_year: 0,
            events: 0,
        })
    }

    fn year_of(&self, t: f64) -> usize {
        ((t / DAYS_PER_YEAR).floor().max(0.0) as usize).min(self.n_years - 1)
    }

    fn schedule(&mut self, person: u32, time: f64, kind: EventKind) {
        if time < self.horizon {
            self.heap.push(Event { time, person, kind });
        }
    }

    fn tally(&mut self, t: f64) -> &mut YearlyTally {
        let y = self.year_of(t);
        &mut self.tallies[y]
    }

    fn bump_max(&mut self) {
        let y = self.cur_year;
        let t = &mut self.tallies[y];
        t.max_cjs = t.max_cjs.max(self.occ_cjs_opioid);
        t.max_hosp = t.max_hosp.max(self.occ[S_HOSP]);
        t.max_treat = t.max_treat.max(self.occ[S_TREAT]);
    }

    fn leave(&mut self, idx: usize, now: f64) {
        let s = self.people[idx].state;
        match s {
            State::Active => self.n_active -= 1,
            State::Inactive => self.n_inactive -= 1,
            _ => {}
        }
        if let Some(slot) = service_slot(s) {
            self.occ[slot] -= 1;
            if s == State::Cjs && self.people[idx].cjs_opioid {
                self.occ_cjs_opioid -= 1;
            }
            let y = self.year_of(now);
            self.flows[y].exits[slot] += 1;
        }
    }

    fn enter(&mut self, idx: usize, s: State, now: f64) {
        self.people[idx].state = s;
        match s {
            State::Active => self.n_active += 1,
            State::Inactive => self.n_inactive += 1,
            _ => {}
        }
        if let Some(slot) = service_slot(s) {
            self.occ[slot] += 1;
            if s == State::Cjs && self.people[idx].cjs_opioid {
                self.occ_cjs_opioid += 1;
            }
            let y = self.year_of(now);
            self.flows[y].entries[slot] += 1;
            self.bump_max();
        }
    }

    fn mark(&mut self, idx: usize, which: usize, now: f64) -> bool {
        let y = self.year_of(now) as i32;
        let p = &mut self.people[idx];
        if p.marks[which] != y {
            p.marks[which] = y;
            true
        } else {
            false
        }
    }

    // --- state entries -------------------------------------------------

    fn enter_active(&mut self, idx: usize, now: f64) -> Result<()> {
        self.enter(idx, State::Active, now);
        self.people[idx].previous_state = None;
        let (t, kind) = schedule_active_entry(self.params, self.switch_day, &self.k, &mut self.people[idx], now)?;
        if std::mem::take(&mut self.people[idx].in_first_spell) {
            self.sojourns.add(Sojourn::ActiveAfterInitiation, t - now);
        }
        let id = self.people[idx].id;
        self.schedule(id, t, kind);
        Ok(())
    }

    /// Timed state with its own exit, subject to preemption.
    fn enter_timed(&mut self, idx: usize, state: State, dur: f64, exit_kind: EventKind, now: f64) {
        self.enter(idx, state, now);
        let p = &self.people[idx];
        let exit = now + dur;
        let (t, kind) = preemption_check(state, exit, p.natural_death_time, p.nonopioid_arrest_time).unwrap_or((exit, exit_kind));
        let id = p.id;
        self.schedule(id, t, kind);
    }

    fn enter_cjs(&mut self, idx: usize, opioid: bool, now: f64, record: bool) -> Result<()> {
        let dur = self.people[idx].draw(&self.k, Stream::CjsStay, &self.params.arc_b)?;
        if record {
            self.sojourns.add(Sojourn::Cjs, dur);
        }
        let p = &mut self.people[idx];
        p.cjs_opioid = opioid;
        p.nonopioid_arrest_time = f64::INFINITY;
        self.enter_timed(idx, State::Cjs, dur, EventKind::ExitCjs, now);
        Ok(())
    }

    fn enter_hospital(&mut self, idx: usize, now: f64, record: bool) -> Result<()> {
        let dur = self.people[idx].draw(&self.k, Stream::HospitalStay, &self.params.arc_a)?;
        if record {
            self.sojourns.add(Sojourn::Hospital, dur);
        }
        self.enter_timed(idx, State::Hospital, dur, EventKind::ExitHospital, now);
        Ok(())
    }

    fn enter_treatment(&mut self, idx: usize, now: f64, record: bool) -> Result<()> {
        let dur = self.people[idx].draw(&self.k, Stream::TreatmentStay, &self.params.arc_c)?;
        if record {
            self.sojourns.add(Sojourn::Treatment, dur);
        }
        self.enter_timed(idx, State::Treatment, dur, EventKind::ExitTreatment, now);
        Ok(())
    }

    fn enter_inactive(&mut self, idx: usize, prev: State, now: f64, record: bool) -> Result<()> {
        let (stream, law, which) = match prev {
            State::Active => (Stream::InactiveAfterActive, &self.params.arc_g, Sojourn::InactiveAfterActive),
            State::Treatment => (Stream::InactiveAfterTreatment, &self.params.arc_e, Sojourn::InactiveAfterTreatment),
            State::Cjs => (Stream::InactiveAfterCjs, &self.params.arc_d, Sojourn::InactiveAfterCjs),
            State::Hospital => (Stream::InactiveAfterHospital, &self.params.arc_f, Sojourn::InactiveAfterHospital),
            s => return Err(Error::Engine(format!("no inactive law after {s:?}"))),
        };
        let dur = self.people[idx].draw(&self.k, stream, law)?;
        if record {
            self.sojourns.add(which, dur);
        }
        self.people[idx].previous_state = Some(prev);
        self.enter_timed(idx, State::Inactive, dur, EventKind::ExitInactive, now);
        Ok(())
    }

    // --- compound transitions ------------------------------------------

    fn start_treatment(&mut self, idx: usize, now: f64) -> Result<()> {
        self.tally(now).treatment_starts += 1;
        if self.mark(idx, 2, now) {
            self.tally(now).persons_treated += 1;
        }
        self.enter_treatment(idx, now, true)
    }

    /// Opioid-related arrest, from active use or at hospital discharge.
    fn opioid_arrest(&mut self, idx: usize, now: f64) -> Result<()> {
        if self.mark(idx, 0, now) {
            self.tally(now).persons_arrested += 1;
        }
        let u = self.people[idx].uniform(&self.k, Stream::GateAd);
        let p_ad = if now >= self.ad_day { self.p_ad } else { 0.0 };
        if u < p_ad {
            self.tally(now).arrests_opioid_diverted += 1;
            self.start_treatment(idx, now)
        } else {
            self.tally(now).arrests_opioid_nondiverted += 1;
            self.enter_cjs(idx, true, now, true)
        }
    }

    fn die(&mut self, idx: usize, opioid: bool, now: f64) {
        self.leave(idx, now);
        self.record_death(idx, opioid, now);
    }

    /// Death of someone already taken out of the occupancy counts.
    fn record_death(&mut self, idx: usize, opioid: bool, now: f64) {
        let t = self.tally(now);
        if opioid {
            t.deaths_opioid += 1;
        } else {
            t.deaths_natural += 1;
        }
        self.people[idx].state = if opioid { State::DeadOpioid } else { State::DeadNatural };
    }

    fn resolve(&mut self, ev: Event) -> Result<()> {
        use EventKind::*;
        let now = ev.time;
        if ev.kind == Arrival {
            return self.arrival(now);
        }
        let idx = (ev.person - 1) as usize;
        let state = self.people[idx].state;
        let bad = || Err(Error::Engine(format!("{:?} for person {} in state {state:?}", ev.kind, ev.person)));
        match (ev.kind, state) {
            (_, s) if s.is_dead() => return bad(),
            (NaturalDeath, _) => self.die(idx, false, now),
            (OpioidDeath, State::Active) => self.die(idx, true, now),
            (OpioidArrest, State::Active) => {
                self.leave(idx, now);
                self.opioid_arrest(idx, now)?;
            }
            (NonOpioidArrest, State::Active | State::Inactive | State::Treatment | State::Hospital) => {
                self.leave(idx, now);
                self.tally(now).arrests_nonopioid += 1;
                self.enter_cjs(idx, false, now, true)?;
            }
            (HospitalEncounter, State::Active) => {
                self.leave(idx, now);
                self.tally(now).hospital_encounters += 1;
                if self.mark(idx, 1, now) {
                    self.tally(now).persons_hospitalized += 1;
                }
                self.enter_hospital(idx, now, true)?;
            }
            (StartTreatment, State::Active) => {
                self.leave(idx, now);
                self.start_treatment(idx, now)?;
            }
            (StopUse, State::Active) => {
                self.leave(idx, now);
                self.enter_inactive(idx, State::Active, now, true)?;
            }
            (ExitCjs, State::Cjs) => {
                self.leave(idx, now);
                let d8 = self.people[idx].draw(&self.k, Stream::NonOpioidArrest, &self.params.arc8)?;
                self.people[idx].nonopioid_arrest_time = now + d8;
                let u = self.people[idx].uniform(&self.k, Stream::GateCm);
                let p_cm = if now >= self.cm_day { self.p_cm } else { 0.0 };
                if u < p_cm {
                    self.start_treatment(idx, now)?;
                } else {
                    self.enter_inactive(idx, State::Cjs, now, true)?;
                }
            }
            (ExitHospital, State::Hospital) => {
                self.leave(idx, now);
                let p_od = if now >= self.od_day { self.p_od_after } else { self.params.p_od };
                let u = self.people[idx].uniform(&self.k, Stream::HospitalOutcome);
                match hospital_outcome(u, self.params.p_d, self.params.p_a, p_od) {
                    HospitalOutcome::Death => self.record_death(idx, true, now),
                    HospitalOutcome::Arrest => self.opioid_arrest(idx, now)?,
                    HospitalOutcome::Treatment => self.start_treatment(idx, now)?,
                    HospitalOutcome::Inactive => self.enter_inactive(idx, State::Hospital, now, true)?,
                }
            }
            (ExitTreatment, State::Treatment) => {
                self.leave(idx, now);
                self.enter_inactive(idx, State::Treatment, now, true)?;
            }
            (ExitInactive, State::Inactive) => {
                self.leave(idx, now);
                self.enter_active(idx, now)?;
            }
            _ => return bad(),
        }
        Ok(())
    }

    fn new_person(&mut self, now: f64, age_law: &Distribution, age_stream: Stream) -> Result<usize> {
        let id = self.people.len() as u32 + 1;
        let mut p = Person::new(id, now, 0.0);
        let age = p.draw(&self.k, age_stream, age_law)?;
        p.age_at_entry = age;
        let u = p.uniform(&self.k, Stream::NaturalDeath);
        p.natural_death_time = now + self.params.life_table.residual_days(age, u)?;
        p.nonopioid_arrest_time = now + p.draw(&self.k, Stream::NonOpioidArrest, &self.params.arc8)?;
        self.people.push(p);
        Ok(self.people.len() - 1)
    }

    fn arrival(&mut self, now: f64) -> Result<()> {
        let idx = self.new_person(now, &self.params.initiation_age, Stream::InitiationAge)?;
        self.tally(now).new_arrivals += 1;
        self.people[idx].in_first_spell = true;
        self.enter_active(idx, now)?;
        self.schedule_arrival(now);
        Ok(())
    }

    fn schedule_arrival(&mut self, now: f64) {
        let u = self.k.uniform(Stream::Arrival, 0, self.arrivals_drawn);
        self.arrivals_drawn += 1;
        let gap = -self.arrival_mean * (1.0 - u).ln();
        self.schedule(0, now + gap, EventKind::Arrival);
    }

    fn starting_population(&mut self, scale: f64) -> Result<()> {
        let pr = self.params;
        let pop = |s: Stream, c: u32, law: &Distribution| -> Result<f64> { law.sample(self.k.key(s, 0, c)) };
        let n = (pop(Stream::StartingPopulation, 0, &pr.starting_population)? * scale).round().max(1.0);
        let h = pop(Stream::StartingStateCounts, 0, &pr.start_hospital)? * scale;
        let c = pop(Stream::StartingStateCounts, 1, &pr.start_cjs)? * scale;
        let t = pop(Stream::StartingStateCounts, 2, &pr.start_treatment)? * scale;
        let a = pop(Stream::StartingStateCounts, 3, &pr.start_active_fraction)?;
        let probs = starting_probabilities(n, h, c, t, a);
        let prev = {
            let s = probs[0] + probs[1] + probs[2] + probs[3];
            [probs[3] / s, probs[0] / s, probs[1] / s, probs[2] / s]
        };
        self.people.reserve(n as usize + (self.horizon / self.arrival_mean * 1.2) as usize);
        for _ in 0..n as u32 {
            let idx = self.new_person(0.0, &pr.prevalence_age, Stream::PrevalenceAge)?;
            let u = self.people[idx].uniform(&self.k, Stream::StartingState);
            match categorical(&probs, u) {
                0 => self.enter_hospital(idx, 0.0, false)?,
                1 => self.enter_cjs(idx, true, 0.0, false)?,
                2 => self.enter_treatment(idx, 0.0, false)?,
                3 => self.enter_active(idx, 0.0)?,
                _ => {
                    let v = self.people[idx].uniform(&self.k, Stream::StartingState);
                    let prev_state = [State::Active, State::Hospital, State::Cjs, State::Treatment][categorical(&prev, v)];
                    self.enter_inactive(idx, prev_state, 0.0, false)?;
                }
            }
        }
        Ok(())
    }

    fn checkpoint(&mut self, c: Checkpoint) {
        match c {
            Checkpoint::MidYear(y) => {
                let t = &mut self.tallies[y];
                t.occ_cjs_midyear = self.occ_cjs_opioid;
                t.occ_hosp_midyear = self.occ[S_HOSP];
                t.occ_treat_midyear = self.occ[S_TREAT];
            }
            Checkpoint::YearEnd(y) => {
                let t = &mut self.tallies[y];
                t.active_year_end = self.n_active;
                t.inactive_year_end = self.n_inactive;
                self.flows[y].occupancy_end = self.occ;
                if y + 1 < self.n_years {
                    self.flows[y + 1].occupancy_start = self.occ;
                    self.cur_year = y + 1;
                    self.bump_max();
                }
            }
        }
    }

    fn run(mut self, scale: f64, replication: u32) -> Result<ReplicationOutput> {
        self.starting_population(scale)?;
        self.schedule_arrival(0.0);

        let mut checkpoints = Vec::with_capacity(2 * self.n_years);
        for y in 0..self.n_years {
            let start = y as f64 * DAYS_PER_YEAR;
            let mid = start + MIDYEAR_DAY;
            if mid < self.horizon {
                checkpoints.push((mid, Checkpoint::MidYear(y)));
            }
            checkpoints.push((((y + 1) as f64 * DAYS_PER_YEAR).min(self.horizon), Checkpoint::YearEnd(y)));
        }
        let mut next_cp = 0;

        while let Some(ev) = self.heap.pop() {
            while next_cp < checkpoints.len() && checkpoints[next_cp].0 <= ev.time {
                self.checkpoint(checkpoints[next_cp].1);
                next_cp += 1;
            }
            self.events += 1;
            self.resolve(ev)?;
        }
        for &(_, c) in &checkpoints[next_cp..] {
            self.checkpoint(c);
        }
        Ok(ReplicationOutput {
            replication,
            tallies: self.tallies,
            sojourns: self.sojourns,
            flows: self.flows,
            persons: self.people.len() as u32,
            events: self.events,
        })
    }
}

/// Starting-state probabilities (hospital, CJS, treatment, active, inactive)
/// from expected head counts `h`, `c`, `t` out of `n` and active fraction `a`.
pub fn starting_probabilities(n: f64, h: f64, c: f64, t: f64, a: f64) -> [f64; 5] {
    let (ph, pc, pt) = (h / n, c / n, t / n);
    let pa = a.min((1.0 - ph - pc - pt).max(0.0));
    [ph, pc, pt, pa, (1.0 - ph - pc - pt - pa).max(0.0)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HospitalOutcome {
    Death,
    Arrest,
    Treatment,
    Inactive,
}

/// One multinomial draw at discharge: death, arrest, treatment, otherwise
/// inactive use.
pub fn hospital_outcome(u: f64, p_d: f64, p_a: f64, p_od: f64) -> HospitalOutcome {
    match categorical(&[p_d, p_a, p_od, (1.0 - p_d - p_a - p_od).max(0.0)], u) {
        0 => HospitalOutcome::Death,
        1 => HospitalOutcome::Arrest,
        2 => HospitalOutcome::Treatment,
        _ => HospitalOutcome::Inactive,
    }
}

/// One replication from `sim_start` to `horizon_end`.
pub fn run_replication(scenario: &ScenarioConfig, params: &ParameterSet, replication: u32) -> Result<ReplicationOutput> {
    Sim::new(scenario, params, replication)?.run(scenario.population_scale, replication)
}

/// Replications `0..scenario.replications`, in parallel on the current rayon
/// pool, returned in replication order.
pub fn run_scenario(scenario: &ScenarioConfig, params: &ParameterSet) -> Result<Vec<ReplicationOutput>> {
    check(params, scenario)?;
    (0..scenario.replications).into_par_iter().map(|r| run_replication(scenario, params, r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tie_order() {
        use EventKind::*;
        let got = earliest(&[(5.0, StopUse), (5.0, HospitalEncounter), (5.0, NaturalDeath), (6.0, OpioidDeath)]);
        assert_eq!(got, (5.0, NaturalDeath));
        let mut heap = BinaryHeap::new();
        heap.push(Event { time: 1.0, person: 2, kind: StopUse });
        heap.push(Event { time: 1.0, person: 1, kind: StopUse });
        heap.push(Event { time: 1.0, person: 9, kind: OpioidArrest });
        heap.push(Event { time: 0.5, person: 9, kind: Arrival });
        let order: Vec<_> = std::iter::from_fn(|| heap.pop()).map(|e| (e.person, e.kind)).collect();
        assert_eq!(order, vec![(9, Arrival), (9, OpioidArrest), (1, StopUse), (2, StopUse)]);
    }

    #[test]
    fn preemption() {
        assert_eq!(preemption_check(State::Treatment, 500.0, 1e9, 450.0), Some((450.0, EventKind::NonOpioidArrest)));
        assert_eq!(preemption_check(State::Treatment, 500.0, 1e9, 600.0), None);
        // every ordering of the three times
        let times = [449.0, 450.0, 500.0];
        for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let (d, a, x) = (times[perm[0]], times[perm[1]], times[perm[2]]);
            let got = preemption_check(State::Inactive, x, d, a);
            let m = d.min(a);
            if m < x {
                let kind = if d <= a { EventKind::NaturalDeath } else { EventKind::NonOpioidArrest };
                assert_eq!(got, Some((m, kind)));
            } else {
                assert_eq!(got, None);
            }
        }
        // the arrest clock is ignored inside the CJS
        assert_eq!(preemption_check(State::Cjs, 500.0, 1e9, 10.0), None);
    }

    #[test]
    fn discharge_remainder_is_inactive() {
        assert_eq!(hospital_outcome(0.999, 0.0218, 0.01, 0.2227), HospitalOutcome::Inactive);
        assert_eq!(hospital_outcome(0.01, 0.0218, 0.01, 0.2227), HospitalOutcome::Death);
        assert_eq!(hospital_outcome(0.025, 0.0218, 0.01, 0.2227), HospitalOutcome::Arrest);
        assert_eq!(hospital_outcome(0.25, 0.0218, 0.01, 0.2227), HospitalOutcome::Treatment);
        assert_eq!(hospital_outcome(0.2546, 0.0218, 0.01, 0.2227), HospitalOutcome::Inactive);
    }

    #[test]
    fn censoring_and_minimum() {
        let mut params = ParameterSet::default();
        // push every fresh draw far away
        for law in [&mut params.arc2_pre, &mut params.arc3, &mut params.arc4, &mut params.arc5, &mut params.arc6] {
            *law = Distribution::lognormal(40.0, 0.01);
        }
        let k = Keyed::new(1, 0);
        let mut p = Person::new(1, 0.0, 30.0);
        p.natural_death_time = 1e30;
        p.nonopioid_arrest_time = 1e30;
        let (t, _) = schedule_active_entry(&params, 1e9, &k, &mut p, 0.0).unwrap();
        assert!(t > 24.0 * 365.25);
        let mut p = Person::new(2, 0.0, 30.0);
        p.natural_death_time = 101.0;
        p.nonopioid_arrest_time = 1e30;
        assert_eq!(schedule_active_entry(&params, 1e9, &k, &mut p, 100.0).unwrap(), (101.0, EventKind::NaturalDeath));
    }

    #[test]
    fn starting_probabilities_sum_to_one() {
        let p = starting_probabilities(34_000.0, 11.0, 25.0, 450.0, 0.4);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|x| *x >= 0.0));
    }
}
