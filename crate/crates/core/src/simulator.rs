//! Event-driven simulation of a hybrid net as a sequence of constant-speed
//! phases.
//!
//! Each step settles the discrete part (fires every transition whose timer
//! has run out), solves the speeds, and jumps straight to the earliest
//! event: a continuous place emptying, a timer expiring, a speed-schedule
//! breakpoint, a continuous input of a discrete transition crossing its arc
//! weight, the target being reached, or the horizon.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{validate, HybridMarking, HybridNet, Id, Violation};
use crate::scalar::Scalar;
use crate::scenario::{ScenarioConfig, ScenarioError, SpeedSchedule};
use crate::solver::{balance_vector, solve, speed_vector, BalanceVector, SolveError, SpeedVector};
use crate::structure::{Structure, TransKind};

/// More phases than this is treated as a livelock.
pub const MAX_PHASES: usize = 10_000;

/// More zero-time discrete firings than this at one instant is treated as unstable.
const MAX_FIRINGS_PER_INSTANT: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum EventKind {
    TargetReached,
    PlaceEmptied { place: Id },
    DiscreteFired { transition: Id },
    EnablingChanged { transition: Id },
    Horizon,
    SteadyState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event<S = f64> {
    pub time: S,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Phase<S = f64> {
    pub start: S,
    pub end: S,
    pub speeds: SpeedVector<S>,
    pub balances: BalanceVector<S>,
    pub start_marking: HybridMarking<S>,
    pub terminator: Event<S>,
    /// Other events falling on the same boundary.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coincident: Vec<EventKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Outcome<S = f64> {
    Delivered { at: S },
    DeadlineMissed,
    HorizonReached,
    Error { error: String, message: String },
}

impl<S> Outcome<S> {
    pub fn delivered_at(&self) -> Option<&S> {
        match self {
            Outcome::Delivered { at } => Some(at),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Trace<S = f64> {
    pub scenario: ScenarioConfig,
    pub initial_marking: HybridMarking<S>,
    pub phases: Vec<Phase<S>>,
    pub outcome: Outcome<S>,
}

impl<S: Scalar> Trace<S> {
    pub fn end_time(&self) -> S {
        self.phases.last().map_or_else(S::zero, |p| p.end.clone())
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SimulationError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("net is not valid ({} violations)", .0.len())]
    InvalidNet(Vec<Violation>),
    #[error("at t = {time}: {source}")]
    Solve { time: f64, source: SolveError },
    #[error("more than {phases} phases elapsed without reaching an end")]
    LivelockDetected { phases: usize },
    #[error("discrete transition `{transition}` keeps firing at t = {time}")]
    UnstableDiscreteMarking { transition: Id, time: f64 },
}

impl SimulationError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            SimulationError::Scenario(_) => "InvalidScenario",
            SimulationError::InvalidNet(_) => "InvalidNet",
            SimulationError::Solve { source, .. } => match source {
                SolveError::NonConvergence { .. } => "NonConvergence",
                SolveError::UnstableDiscreteMarking { .. } => "UnstableDiscreteMarking",
                SolveError::UnknownPlace(_) | SolveError::UnknownTransition(_) => "UnknownId",
                SolveError::InvalidNet(_) => "InvalidNet",
            },
            SimulationError::LivelockDetected { .. } => "LivelockDetected",
            SimulationError::UnstableDiscreteMarking { .. } => "UnstableDiscreteMarking",
        }
    }

    pub fn to_outcome<S>(&self) -> Outcome<S> {
        Outcome::Error {
            error: self.kind().to_string(),
            message: self.to_string(),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
#[error("time {time} lies outside the trace span [0, {end}]")]
pub struct OutOfRange {
    pub time: f64,
    pub end: f64,
}

/// Inputs of [`next_event`] beyond the marking and balances.
#[derive(Clone, Debug)]
pub struct EventContext<S = f64> {
    pub now: S,
    /// Remaining delay of each running discrete timer.
    pub timers: BTreeMap<Id, S>,
    /// Next speed-schedule breakpoint per transition.
    pub breakpoints: BTreeMap<Id, S>,
    /// Target place and amount.
    pub target: Option<(Id, S)>,
    pub horizon: S,
}

/// Earliest event reachable from `marking` moving at `balances`.
pub fn next_event<S: Scalar>(
    net: &HybridNet,
    marking: &HybridMarking<S>,
    balances: &BalanceVector<S>,
    ctx: &EventContext<S>,
) -> Event<S> {
    let st: Structure<S> = Structure::build(net);
    let np = st.place_ids.len();
    let nt = st.trans_ids.len();
    let mut m = vec![S::zero(); np];
    let mut b = vec![S::zero(); np];
    for (id, v) in marking.iter() {
        if let Some(&p) = st.place_index.get(id) {
            m[p] = v.clone();
        }
    }
    for (id, v) in balances.iter() {
        if let Some(&p) = st.place_index.get(id) {
            b[p] = v.clone();
        }
    }
    let mut timers = vec![None; nt];
    for (id, v) in &ctx.timers {
        if let Some(&t) = st.trans_index.get(id) {
            timers[t] = Some(v.clone());
        }
    }
    let breakpoints: Vec<(usize, S)> = ctx
        .breakpoints
        .iter()
        .filter_map(|(id, v)| st.trans_index.get(id).map(|&t| (t, v.clone())))
        .collect();
    let target = ctx
        .target
        .as_ref()
        .and_then(|(id, amount)| st.place_index.get(id).map(|&p| (p, amount.clone())));
    let view = Snapshot {
        st: &st,
        now: &ctx.now,
        marking: &m,
        balances: &b,
        timers: &timers,
        breakpoints: &breakpoints,
        target: target.as_ref().map(|(p, a)| (*p, a)),
        horizon: &ctx.horizon,
    };
    view.next().0
}

struct Snapshot<'a, S> {
    st: &'a Structure<S>,
    now: &'a S,
    marking: &'a [S],
    balances: &'a [S],
    timers: &'a [Option<S>],
    breakpoints: &'a [(usize, S)],
    target: Option<(usize, &'a S)>,
    horizon: &'a S,
}

impl<S: Scalar> Snapshot<'_, S> {
    fn candidates(&self) -> Vec<(S, EventKind)> {
        let st = self.st;
        let now = self.now.clone();
        let mut out = Vec::new();
        for p in (0..st.place_ids.len()).filter(|&p| st.is_continuous_place(p)) {
            let (m, b) = (&self.marking[p], &self.balances[p]);
            if b.below_zero() && m.above_zero() {
                out.push((
                    now.clone() + m.clone() / -b.clone(),
                    EventKind::PlaceEmptied {
                        place: st.place_ids[p].clone(),
                    },
                ));
            }
        }
        for (t, timer) in self.timers.iter().enumerate() {
            if let Some(remaining) = timer {
                out.push((
                    now.clone() + remaining.clone(),
                    EventKind::DiscreteFired {
                        transition: st.trans_ids[t].clone(),
                    },
                ));
            }
        }
        for (t, at) in self.breakpoints {
            out.push((
                at.clone(),
                EventKind::EnablingChanged {
                    transition: st.trans_ids[*t].clone(),
                },
            ));
        }
        // A continuous input of a discrete transition crossing its arc weight.
        for t in (0..st.trans_ids.len()).filter(|&t| !st.is_continuous_transition(t)) {
            for (p, w) in st.pre[t].iter().filter(|(p, _)| st.is_continuous_place(*p)) {
                let (m, b) = (&self.marking[*p], &self.balances[*p]);
                let crossing = if m < w && b.above_zero() {
                    Some((w.clone() - m.clone()) / b.clone())
                } else if m > w && b.below_zero() && self.timers[t].is_some() {
                    Some((m.clone() - w.clone()) / -b.clone())
                } else {
                    None
                };
                if let Some(dt) = crossing {
                    out.push((
                        now.clone() + dt,
                        EventKind::EnablingChanged {
                            transition: st.trans_ids[t].clone(),
                        },
                    ));
                }
            }
        }
        if let Some((p, amount)) = self.target {
            let (m, b) = (&self.marking[p], &self.balances[p]);
            if m < amount && b.above_zero() {
                out.push((
                    now.clone() + (amount.clone() - m.clone()) / b.clone(),
                    EventKind::TargetReached,
                ));
            }
        }
        out
    }

    fn steady(&self) -> bool {
        let eps = S::convergence_eps();
        self.timers.iter().all(Option::is_none)
            && self.breakpoints.is_empty()
            && self.balances.iter().all(|b| b.abs() <= eps)
    }

    /// The primary event and the other events coalesced with it.
    fn next(&self) -> (Event<S>, Vec<EventKind>) {
        if self.steady() {
            return (
                Event {
                    time: self.now.clone(),
                    kind: EventKind::SteadyState,
                },
                Vec::new(),
            );
        }
        let mut cands = self.candidates();
        cands.push((self.horizon.clone(), EventKind::Horizon));
        let earliest = cands
            .iter()
            .map(|(t, _)| t.clone())
            .reduce(S::min_of)
            .expect("horizon is always a candidate");
        let tol = S::time_tolerance(&earliest);
        let mut hits: Vec<EventKind> = cands
            .into_iter()
            .filter(|(t, _)| *t <= earliest.clone() + tol.clone())
            .map(|(_, k)| k)
            .collect();
        hits.sort();
        hits.dedup();
        let primary = hits.remove(0);
        (
            Event {
                time: earliest,
                kind: primary,
            },
            hits,
        )
    }
}

pub(crate) fn schedules_for<S: Scalar>(
    st: &Structure<S>,
    scenario: &ScenarioConfig,
) -> Vec<Option<Schedule<S>>> {
    let declared = st.declared_bounds();
    (0..st.trans_ids.len())
        .map(|t| match scenario.speed_overrides.get(&st.trans_ids[t]) {
            Some(SpeedSchedule::Piecewise(points)) => Some(Schedule::Piecewise {
                declared: declared[t].clone(),
                points: points
                    .iter()
                    .map(|b| (S::from_f64(b.from), S::from_f64(b.speed)))
                    .collect(),
            }),
            Some(SpeedSchedule::Random(r)) => {
                // One stream per transition so draws do not depend on each other.
                let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
                rng.set_stream(t as u64);
                Some(Schedule::Random {
                    interval: S::from_f64(r.interval),
                    low: r.min,
                    high: r.max,
                    rng,
                    drawn: Vec::new(),
                })
            }
            _ => None,
        })
        .collect()
}

pub(crate) enum Schedule<S> {
    Piecewise {
        declared: Option<S>,
        points: Vec<(S, S)>,
    },
    Random {
        interval: S,
        low: f64,
        high: f64,
        rng: ChaCha8Rng,
        drawn: Vec<S>,
    },
}

impl<S: Scalar> Schedule<S> {
    pub(crate) fn bound_at(&mut self, now: &S) -> Option<S> {
        let probe = now.clone() + S::time_tolerance(now);
        match self {
            Schedule::Piecewise { declared, points } => points
                .iter()
                .take_while(|(from, _)| *from <= probe)
                .last()
                .map(|(_, v)| Some(v.clone()))
                .unwrap_or_else(|| declared.clone()),
            Schedule::Random {
                interval,
                low,
                high,
                rng,
                drawn,
            } => {
                let k = (probe / interval.clone()).floor_value().to_f64() as usize;
                while drawn.len() <= k {
                    let v = if low < high {
                        rng.random_range(*low..=*high)
                    } else {
                        *low
                    };
                    drawn.push(S::from_f64(v));
                }
                Some(drawn[k].clone())
            }
        }
    }

    fn next_breakpoint(&self, now: &S) -> Option<S> {
        let probe = now.clone() + S::time_tolerance(now);
        match self {
            Schedule::Piecewise { points, .. } => points
                .iter()
                .map(|(from, _)| from)
                .find(|from| **from > probe)
                .cloned(),
            Schedule::Random { interval, .. } => {
                let k = (probe / interval.clone()).floor_value();
                Some((k + S::one()) * interval.clone())
            }
        }
    }
}

struct Engine<S> {
    st: Structure<S>,
    marking: Vec<S>,
    timers: Vec<Option<S>>,
    schedules: Vec<Option<Schedule<S>>>,
    now: S,
    target: (usize, S),
    horizon: S,
}

impl<S: Scalar> Engine<S> {
    fn new(net: &HybridNet, scenario: &ScenarioConfig) -> Self {
        let st: Structure<S> = Structure::build(net);
        let marking = st
            .place_ids
            .iter()
            .map(|id| S::from_f64(net.place(id.as_str()).map_or(0.0, |p| p.initial)))
            .collect();
        let schedules = schedules_for(&st, scenario);
        let target = st.place_index[&scenario.target.place];
        Engine {
            marking,
            timers: vec![None; st.trans_ids.len()],
            schedules,
            now: S::zero(),
            target: (target, S::from_f64(scenario.target.amount)),
            horizon: S::from_f64(scenario.horizon),
            st,
        }
    }

    fn snapshot(&self) -> HybridMarking<S> {
        self.st
            .place_ids
            .iter()
            .cloned()
            .zip(self.marking.iter().cloned())
            .collect()
    }

    /// Starts and cancels timers, then fires expired ones until nothing is due.
    fn settle(&mut self) -> Result<(), SimulationError> {
        let mut fired = 0;
        loop {
            for t in 0..self.st.trans_ids.len() {
                let TransKind::Discrete { delay } = &self.st.trans_kind[t] else {
                    continue;
                };
                if self.st.discrete_enabled(t, &self.marking) {
                    if self.timers[t].is_none() {
                        self.timers[t] = Some(delay.clone());
                    }
                } else {
                    self.timers[t] = None;
                }
            }
            let due = self
                .timers
                .iter()
                .position(|timer| timer.as_ref().is_some_and(|r| r.is_zero()));
            let Some(t) = due else {
                return Ok(());
            };
            fired += 1;
            if fired > MAX_FIRINGS_PER_INSTANT {
                return Err(SimulationError::UnstableDiscreteMarking {
                    transition: self.st.trans_ids[t].clone(),
                    time: self.now.to_f64(),
                });
            }
            for (p, w) in &self.st.pre[t] {
                self.marking[*p] = self.marking[*p].clone() - w.clone();
            }
            for (p, w) in &self.st.post[t] {
                self.marking[*p] = self.marking[*p].clone() + w.clone();
            }
            self.timers[t] = None;
        }
    }

    fn bounds(&mut self) -> Vec<Option<S>> {
        let mut bounds = self.st.declared_bounds();
        for (t, schedule) in self.schedules.iter_mut().enumerate() {
            if let Some(s) = schedule {
                bounds[t] = s.bound_at(&self.now);
            }
        }
        bounds
    }

    fn breakpoints(&self) -> Vec<(usize, S)> {
        self.schedules
            .iter()
            .enumerate()
            .filter_map(|(t, s)| {
                s.as_ref()
                    .and_then(|s| s.next_breakpoint(&self.now))
                    .map(|at| (t, at))
            })
            .filter(|(_, at)| *at <= self.horizon)
            .collect()
    }

    fn advance(&mut self, to: &S, balances: &[S], events: &[EventKind]) {
        let dt = to.clone() - self.now.clone();
        let tol = S::empty_tolerance();
        for p in 0..self.marking.len() {
            if !self.st.is_continuous_place(p) {
                continue;
            }
            let m = self.marking[p].clone() + balances[p].clone() * dt.clone();
            self.marking[p] = if (m <= tol && balances[p].below_zero()) || m.below_zero() {
                S::zero()
            } else {
                m
            };
        }
        for event in events {
            if let EventKind::PlaceEmptied { place } = event {
                self.marking[self.st.place_index[place]] = S::zero();
            }
        }
        // Land exactly on the arc weights of discrete transitions' continuous inputs.
        for t in (0..self.st.trans_ids.len()).filter(|&t| !self.st.is_continuous_transition(t)) {
            for (p, w) in &self.st.pre[t] {
                if self.st.is_continuous_place(*p)
                    && (self.marking[*p].clone() - w.clone()).abs() <= tol
                {
                    self.marking[*p] = w.clone();
                }
            }
        }
        let time_tol = S::time_tolerance(to);
        for timer in self.timers.iter_mut().flatten() {
            let left = timer.clone() - dt.clone();
            *timer = if left <= time_tol { S::zero() } else { left };
        }
        self.now = to.clone();
    }

    fn run(mut self, scenario: &ScenarioConfig) -> Result<Trace<S>, SimulationError> {
        let initial_marking = self.snapshot();
        let mut phases: Vec<Phase<S>> = Vec::new();
        let not_delivered = || {
            if scenario.deadline.is_some() {
                Outcome::DeadlineMissed
            } else {
                Outcome::HorizonReached
            }
        };
        let outcome = loop {
            self.settle()?;
            let (tp, amount) = &self.target;
            if self.marking[*tp] >= *amount {
                break Outcome::Delivered {
                    at: self.now.clone(),
                };
            }
            if self.now >= self.horizon {
                break not_delivered();
            }
            if phases.len() >= MAX_PHASES {
                return Err(SimulationError::LivelockDetected { phases: MAX_PHASES });
            }
            let bounds = self.bounds();
            let solution =
                solve(&self.st, &self.marking, &bounds).map_err(|source| SimulationError::Solve {
                    time: self.now.to_f64(),
                    source,
                })?;
            let balances = self.st.balances(&solution.speeds);
            let breakpoints = self.breakpoints();
            let (terminator, coincident) = Snapshot {
                st: &self.st,
                now: &self.now,
                marking: &self.marking,
                balances: &balances,
                timers: &self.timers,
                breakpoints: &breakpoints,
                target: Some((self.target.0, &self.target.1)),
                horizon: &self.horizon,
            }
            .next();
            let start_marking = self.snapshot();
            let start = self.now.clone();
            let steady = terminator.kind == EventKind::SteadyState;
            let end = if steady {
                S::max_of(self.horizon.clone(), start.clone())
            } else {
                terminator.time.clone()
            };
            phases.push(Phase {
                start,
                end: end.clone(),
                speeds: speed_vector(&self.st, &solution.speeds),
                balances: balance_vector(&self.st, &balances),
                start_marking,
                terminator: terminator.clone(),
                coincident: coincident.clone(),
            });
            if steady {
                break not_delivered();
            }
            let mut events = coincident;
            events.push(terminator.kind.clone());
            self.advance(&terminator.time, &balances, &events);
            if events.contains(&EventKind::TargetReached) {
                break Outcome::Delivered { at: terminator.time };
            }
            if events.contains(&EventKind::Horizon) {
                break not_delivered();
            }
        };
        Ok(Trace {
            scenario: scenario.clone(),
            initial_marking,
            phases,
            outcome,
        })
    }
}

/// Runs `scenario` on `net` until delivery, horizon or steady state.
pub fn simulate<S: Scalar>(
    net: &HybridNet,
    scenario: &ScenarioConfig,
) -> Result<Trace<S>, SimulationError> {
    scenario.check(net)?;
    let effective = scenario.effective_net(net);
    let validation = validate(&effective);
    if !validation.is_ok() {
        return Err(SimulationError::InvalidNet(validation.violations));
    }
    Engine::<S>::new(&effective, scenario).run(scenario)
}

/// Marking at time `t`, interpolated within the phase covering it.
pub fn marking_at<S: Scalar>(trace: &Trace<S>, t: &S) -> Result<HybridMarking<S>, OutOfRange> {
    let end = trace.end_time();
    let out_of_range = || OutOfRange {
        time: t.to_f64(),
        end: end.to_f64(),
    };
    let tol = S::time_tolerance(&end);
    if t.below_zero() || *t > end.clone() + tol.clone() {
        return Err(out_of_range());
    }
    let Some(phase) = trace
        .phases
        .iter()
        .find(|p| *t <= p.end.clone() + tol.clone())
        .or(trace.phases.last())
    else {
        return Ok(trace.initial_marking.clone());
    };
    let dt = S::max_of(t.clone() - phase.start.clone(), S::zero());
    Ok(phase
        .start_marking
        .iter()
        .map(|(id, m)| {
            let value = match phase.balances.get(id.as_str()) {
                Some(b) => S::max_of(m.clone() + b.clone() * dt.clone(), S::zero()),
                None => m.clone(),
            };
            (id.clone(), value)
        })
        .collect())
}

/// One row per (phase, element): start marking and balance for places,
/// speed for continuous transitions.
pub fn trace_csv(trace: &Trace<f64>) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "phase_index",
            "t_start",
            "t_end",
            "element_kind",
            "element_id",
            "value",
            "slope",
        ])
        .expect("in-memory write");
    for (i, phase) in trace.phases.iter().enumerate() {
        let index = i.to_string();
        let (start, end) = (phase.start.to_string(), phase.end.to_string());
        for (id, m) in phase.start_marking.iter() {
            let slope = phase
                .balances
                .get(id.as_str())
                .map(f64::to_string)
                .unwrap_or_default();
            writer
                .write_record([&index, &start, &end, "place", id.as_str(), &m.to_string(), &slope])
                .expect("in-memory write");
        }
        for (id, v) in phase.speeds.iter() {
            writer
                .write_record([&index, &start, &end, "transition", id.as_str(), &v.to_string(), ""])
                .expect("in-memory write");
        }
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{ArcDef, MaxSpeed, PlaceDef, TransitionDef};
    use crate::scenario::Breakpoint;

    fn drain(initial: f64, speed: f64) -> HybridNet {
        let mut net = HybridNet::new("drain");
        net.places.push(PlaceDef::continuous("A", initial));
        net.places.push(PlaceDef::continuous("B", 0.0));
        net.transitions.push(TransitionDef::continuous("T", MaxSpeed::Finite(speed)));
        net.arcs.push(ArcDef::new("A", "T", 1.0));
        net.arcs.push(ArcDef::new("T", "B", 1.0));
        net
    }

    #[test]
    fn zero_target_delivers_immediately() {
        let s = ScenarioConfig::new("s", "drain", "B", 0.0, 10.0);
        let trace = simulate::<f64>(&drain(5.0, 1.0), &s).unwrap();
        assert!(trace.phases.is_empty());
        assert_eq!(trace.outcome, Outcome::Delivered { at: 0.0 });
    }

    #[test]
    fn drain_empties_then_reaches_steady_state() {
        let s = ScenarioConfig::new("s", "drain", "B", 10.0, 20.0);
        let trace = simulate::<f64>(&drain(5.0, 2.0), &s).unwrap();
        assert_eq!(trace.phases.len(), 2);
        assert_eq!(trace.phases[0].terminator.kind, EventKind::PlaceEmptied { place: "A".into() });
        assert_eq!(trace.phases[0].end, 2.5);
        assert_eq!(trace.phases[1].terminator.kind, EventKind::SteadyState);
        assert_eq!(trace.phases[1].end, 20.0);
        assert_eq!(trace.outcome, Outcome::HorizonReached);
        let mut with_deadline = s.clone();
        with_deadline.deadline = Some(15.0);
        let trace = simulate::<f64>(&drain(5.0, 2.0), &with_deadline).unwrap();
        assert_eq!(trace.outcome, Outcome::DeadlineMissed);
    }

    #[test]
    fn piecewise_schedule_splits_phases() {
        let mut s = ScenarioConfig::new("s", "drain", "B", 4.0, 20.0);
        s.speed_overrides.insert(
            "T".into(),
            SpeedSchedule::Piecewise(vec![Breakpoint { from: 1.0, speed: 3.0 }]),
        );
        let trace = simulate::<f64>(&drain(10.0, 1.0), &s).unwrap();
        assert_eq!(trace.phases[0].end, 1.0);
        assert_eq!(
            trace.phases[0].terminator.kind,
            EventKind::EnablingChanged { transition: "T".into() }
        );
        assert_eq!(trace.outcome, Outcome::Delivered { at: 2.0 });
    }

    #[test]
    fn discrete_timer_opens_a_connection() {
        let mut net = drain(10.0, 1.0);
        net.places.push(PlaceDef::discrete("Off", 1));
        net.places.push(PlaceDef::discrete("On", 0));
        net.transitions.push(TransitionDef::discrete("Up", 3.0));
        net.arcs.push(ArcDef::new("Off", "Up", 1.0));
        net.arcs.push(ArcDef::new("Up", "On", 1.0));
        net.arcs.push(ArcDef::new("On", "T", 1.0));
        net.arcs.push(ArcDef::new("T", "On", 1.0));
        let s = ScenarioConfig::new("s", "drain", "B", 2.0, 20.0);
        let trace = simulate::<f64>(&net, &s).unwrap();
        assert_eq!(
            trace.phases[0].terminator,
            Event {
                time: 3.0,
                kind: EventKind::DiscreteFired { transition: "Up".into() }
            }
        );
        assert_eq!(trace.phases[1].start_marking.get("On"), Some(&1.0));
        assert_eq!(trace.outcome, Outcome::Delivered { at: 5.0 });
    }

    #[test]
    fn marking_at_interpolates_and_rejects_out_of_range() {
        let s = ScenarioConfig::new("s", "drain", "B", 10.0, 20.0);
        let trace = simulate::<f64>(&drain(5.0, 2.0), &s).unwrap();
        let m = marking_at(&trace, &1.0).unwrap();
        assert_eq!(m.get("A"), Some(&3.0));
        assert_eq!(m.get("B"), Some(&2.0));
        assert!(marking_at(&trace, &-1.0).is_err());
        assert!(marking_at(&trace, &21.0).is_err());
    }

    #[test]
    fn next_event_reports_steady_state_at_the_current_time() {
        let net = drain(0.0, 1.0);
        let marking: HybridMarking = [("A".into(), 0.0), ("B".into(), 1.0)].into_iter().collect();
        let balances: BalanceVector = [("A".into(), 0.0), ("B".into(), 0.0)].into_iter().collect();
        let ctx = EventContext {
            now: 4.0,
            timers: BTreeMap::new(),
            breakpoints: BTreeMap::new(),
            target: None,
            horizon: 10.0,
        };
        let e = next_event(&net, &marking, &balances, &ctx);
        assert_eq!(e, Event { time: 4.0, kind: EventKind::SteadyState });
    }

    #[test]
    fn csv_has_header_and_rows() {
        let s = ScenarioConfig::new("s", "drain", "B", 1.0, 20.0);
        let trace = simulate::<f64>(&drain(5.0, 2.0), &s).unwrap();
        let csv = trace_csv(&trace);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("phase_index,t_start,t_end,element_kind,element_id,value,slope")
        );
        assert_eq!(lines.next(), Some("0,0,0.5,place,A,5,-2"));
        assert_eq!(lines.next(), Some("0,0,0.5,place,B,0,2"));
        assert_eq!(lines.next(), Some("0,0,0.5,transition,T,2,"));
    }
}
