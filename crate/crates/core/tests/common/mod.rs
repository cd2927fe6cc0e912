//! Random small nets for the property suites.

#![allow(dead_code)]

use proptest::prelude::*;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hpn_core::scenario::RandomSpeed;
use hpn_core::{
    ArcDef, ConflictPolicy, HybridNet, MaxSpeed, PlaceDef, ScenarioConfig, ShareEntry,
    SpeedSchedule, TransitionDef,
};

#[derive(Clone, Debug)]
pub struct RandomNet {
    pub seed: u64,
    pub net: HybridNet,
    pub scenario: ScenarioConfig,
    /// Every continuous transition moves one unit from one continuous place
    /// to another, so the total continuous marking is invariant.
    pub conservative: bool,
}

pub const HORIZON: f64 = 5.0;

const SPEEDS: [f64; 6] = [0.5, 1.0, 1.5, 2.0, 3.0, 4.0];
const WEIGHTS: [f64; 3] = [0.5, 1.0, 2.0];
const DELAYS: [f64; 4] = [0.5, 1.0, 2.0, 3.0];

/// At most 6 continuous places and 8 continuous transitions, optionally
/// with up to two timed on/off connections guarding some transitions and a
/// seeded random speed schedule.
pub fn build(seed: u64, conservative: bool) -> RandomNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = HybridNet::new("random");
    let nc = rng.random_range(if conservative { 2 } else { 1 }..=6);
    let nt = rng.random_range(1..=8);
    for p in 0..nc {
        let initial = if rng.random_bool(0.35) {
            0.0
        } else {
            rng.random_range(1..=20) as f64 / 2.0
        };
        net.places.push(PlaceDef::continuous(&format!("P{p}"), initial));
    }
    let place = |i: usize| format!("P{i}");
    let mut outputs: Vec<Vec<String>> = vec![Vec::new(); nc];
    for t in 0..nt {
        let id = format!("T{t}");
        let (ins, outs): (Vec<usize>, Vec<usize>) = if conservative {
            let mut all: Vec<usize> = (0..nc).collect();
            all.shuffle(&mut rng);
            (vec![all[0]], vec![all[1]])
        } else {
            let mut all: Vec<usize> = (0..nc).collect();
            all.shuffle(&mut rng);
            let n_in = rng.random_range(0..=2.min(nc));
            let ins = all[..n_in].to_vec();
            all.shuffle(&mut rng);
            let mut n_out = rng.random_range(0..=2.min(nc));
            if n_in == 0 && n_out == 0 {
                n_out = 1;
            }
            (ins, all[..n_out].to_vec())
        };
        let unbounded = !ins.is_empty() && rng.random_bool(0.15);
        let speed = if unbounded {
            MaxSpeed::Unbounded
        } else {
            MaxSpeed::Finite(*SPEEDS.choose(&mut rng).unwrap())
        };
        net.transitions.push(TransitionDef::continuous(&id, speed));
        for p in &ins {
            let w = if conservative { 1.0 } else { *WEIGHTS.choose(&mut rng).unwrap() };
            net.arcs.push(ArcDef::new(&place(*p), &id, w));
            outputs[*p].push(id.clone());
        }
        for p in &outs {
            let w = if conservative { 1.0 } else { *WEIGHTS.choose(&mut rng).unwrap() };
            net.arcs.push(ArcDef::new(&id, &place(*p), w));
        }
    }

    for k in 0..rng.random_range(0..=2) {
        let (on, off) = (format!("On{k}"), format!("Off{k}"));
        let up = rng.random_bool(0.5);
        net.places.push(PlaceDef::discrete(&on, up as u64));
        net.places.push(PlaceDef::discrete(&off, !up as u64));
        let (open, close) = (format!("Open{k}"), format!("Close{k}"));
        net.transitions
            .push(TransitionDef::discrete(&open, *DELAYS.choose(&mut rng).unwrap()));
        net.transitions
            .push(TransitionDef::discrete(&close, *DELAYS.choose(&mut rng).unwrap()));
        net.arcs.push(ArcDef::new(&off, &open, 1.0));
        net.arcs.push(ArcDef::new(&open, &on, 1.0));
        net.arcs.push(ArcDef::new(&on, &close, 1.0));
        net.arcs.push(ArcDef::new(&close, &off, 1.0));
        let guarded = format!("T{}", rng.random_range(0..nt));
        net.arcs.push(ArcDef::new(&on, &guarded, 1.0));
        net.arcs.push(ArcDef::new(&guarded, &on, 1.0));
    }

    for (p, outs) in outputs.iter().enumerate() {
        if outs.len() < 2 {
            continue;
        }
        let mut order = outs.clone();
        order.shuffle(&mut rng);
        let refs: Vec<&str> = order.iter().map(String::as_str).collect();
        let policy = match rng.random_range(0..3) {
            0 => ConflictPolicy::priority(&place(p), &refs),
            1 => {
                let members: Vec<(&str, f64)> = refs
                    .iter()
                    .map(|&t| (t, rng.random_range(1..=3) as f64))
                    .collect();
                ConflictPolicy::sharing(&place(p), &members)
            }
            _ => {
                let split = rng.random_range(1..order.len());
                let mut policy = ConflictPolicy::sharing(&place(p), &[]);
                policy.mode = hpn_core::PolicyMode::PriorityThenSharing;
                policy.groups = vec![
                    order[..split]
                        .iter()
                        .map(|t| ShareEntry { id: t.as_str().into(), weight: 1.0 })
                        .collect(),
                    order[split..]
                        .iter()
                        .map(|t| ShareEntry { id: t.as_str().into(), weight: 2.0 })
                        .collect(),
                ];
                policy
            }
        };
        net.policies.push(policy);
    }

    let target = place(rng.random_range(0..nc));
    let mut scenario = ScenarioConfig::new("random", "random", &target, 1e6, HORIZON);
    scenario.seed = rng.random();
    if rng.random_bool(0.3) {
        let t = format!("T{}", rng.random_range(0..nt));
        scenario.speed_overrides.insert(
            t.as_str().into(),
            SpeedSchedule::Random(RandomSpeed { interval: 1.25, min: 0.5, max: 2.0 }),
        );
    }
    RandomNet { seed, net, scenario, conservative }
}

pub fn random_net() -> impl Strategy<Value = RandomNet> {
    (any::<u64>(), prop::bool::weighted(0.3)).prop_map(|(seed, conservative)| build(seed, conservative))
}

/// 100 evenly spaced times covering `[0, end]`.
/// Euler step used by the oracle checks.
pub const STEP: f64 = 1e-3;

pub fn sample_times(end: f64) -> Vec<f64> {
    (0..100).map(|i| end * i as f64 / 99.0).collect()
}

#[allow(unused_imports)]
pub use checks::*;

mod checks {
    use hpn_core::document::to_json;
    use hpn_core::oracle::euler_oracle;
    use hpn_core::simulator::marking_at;
    use hpn_core::{
        enabling, simulate, solve_speeds, Enabling, MaxSpeed, PlaceKind, SimulationError,
        SolveError, SpeedSchedule, Trace,
    };

    use super::{sample_times, RandomNet, STEP};

    /// `Ok(true)` when the property held, `Ok(false)` when the net is outside
    /// the engine's scope (the solver reported non-convergence or the run
    /// livelocked), `Err` on a violation.
    pub type Verdict = Result<bool, String>;

    fn run(rn: &RandomNet) -> Result<Option<Trace>, String> {
        match simulate::<f64>(&rn.net, &rn.scenario) {
            Ok(trace) => Ok(Some(trace)),
            Err(SimulationError::Solve {
                source: SolveError::NonConvergence { .. },
                ..
            })
            | Err(SimulationError::LivelockDetected { .. }) => Ok(None),
            Err(e) => Err(format!("seed {}: {e}", rn.seed)),
        }
    }

    /// 0 <= v <= V, stopped when not enabled, and no empty place drained
    /// faster than it is fed, at the initial marking and at every phase.
    pub fn speed_bounds(rn: &RandomNet) -> Verdict {
        let net = rn.scenario.effective_net(&rn.net);
        let marking = net.initial_marking();
        match solve_speeds(&net, &marking) {
            Err(SolveError::NonConvergence { .. }) => return Ok(false),
            Err(e) => return Err(format!("seed {}: {e}", rn.seed)),
            Ok(v) => {
                let state = enabling(&net, &marking).map_err(|e| e.to_string())?;
                for (id, speed) in v.iter() {
                    if state.get(id.as_str()) == Some(Enabling::NotEnabled) && *speed != 0.0 {
                        return Err(format!("seed {}: {id} disabled but runs at {speed}", rn.seed));
                    }
                }
            }
        }
        let Some(trace) = run(rn)? else { return Ok(false) };
        for (i, phase) in trace.phases.iter().enumerate() {
            for (id, v) in phase.speeds.iter() {
                let cap = match rn.scenario.speed_overrides.get(id) {
                    Some(SpeedSchedule::Random(r)) => Some(r.max),
                    _ => net.transition(id.as_str()).and_then(|t| t.max_speed()).and_then(|s| match s {
                        MaxSpeed::Finite(v) => Some(v),
                        MaxSpeed::Unbounded => None,
                    }),
                };
                if !v.is_finite() || *v < 0.0 || cap.is_some_and(|c| *v > c + 1e-12) {
                    return Err(format!("seed {}: phase {i}: {id} = {v} outside [0, {cap:?}]", rn.seed));
                }
            }
            for (id, b) in phase.balances.iter() {
                let m = phase.start_marking.get(id.as_str()).copied().unwrap_or(0.0);
                if m == 0.0 && *b < -1e-9 {
                    return Err(format!("seed {}: phase {i}: empty {id} has balance {b}", rn.seed));
                }
            }
        }
        Ok(true)
    }

    /// Total continuous marking is constant when every transition moves one
    /// unit between continuous places.
    pub fn conservation(rn: &RandomNet) -> Verdict {
        if !rn.conservative {
            return Ok(false);
        }
        let Some(trace) = run(rn)? else { return Ok(false) };
        let total = |m: &hpn_core::HybridMarking| -> f64 {
            rn.net
                .places
                .iter()
                .filter(|p| p.kind == PlaceKind::Continuous)
                .map(|p| m.get(p.id.as_str()).copied().unwrap_or(0.0))
                .sum()
        };
        let reference = total(&trace.initial_marking);
        let mut checkpoints: Vec<hpn_core::HybridMarking> =
            trace.phases.iter().map(|p| p.start_marking.clone()).collect();
        checkpoints.push(marking_at(&trace, &trace.end_time()).map_err(|e| e.to_string())?);
        for (i, m) in checkpoints.iter().enumerate() {
            let now = total(m);
            if (now - reference).abs() > 1e-9 * reference.max(1.0) {
                return Err(format!("seed {}: checkpoint {i}: total {now} != {reference}", rn.seed));
            }
        }
        Ok(true)
    }

    /// Discrete places hold non-negative integers throughout.
    pub fn integrality(rn: &RandomNet) -> Verdict {
        let Some(trace) = run(rn)? else { return Ok(false) };
        for (i, phase) in trace.phases.iter().enumerate() {
            for p in rn.net.places.iter().filter(|p| p.kind == PlaceKind::Discrete) {
                let m = phase.start_marking.get(p.id.as_str()).copied().unwrap_or(-1.0);
                if m < 0.0 || m.fract() != 0.0 {
                    return Err(format!("seed {}: phase {i}: {} = {m}", rn.seed, p.id));
                }
            }
        }
        Ok(true)
    }

    /// Largest relative gap between the event-driven trace and a step-1e-3
    /// Euler integration at 100 sample times.
    pub fn oracle_gap(rn: &RandomNet) -> Result<Option<f64>, String> {
        let Some(trace) = run(rn)? else { return Ok(None) };
        let times = sample_times(trace.end_time());
        let euler = match euler_oracle(&rn.net, &rn.scenario, STEP, &times) {
            Ok(e) => e,
            Err(SimulationError::Solve {
                source: SolveError::NonConvergence { .. },
                ..
            }) => return Ok(None),
            Err(e) => return Err(format!("seed {}: oracle: {e}", rn.seed)),
        };
        // Discrete markings jump at phase boundaries, so a sample that lands
        // within a step of one may sit on either side in the oracle.
        let near_boundary = |t: f64| {
            trace.phases.iter().any(|p| (p.end - t).abs() <= 2.0 * STEP)
        };
        let mut worst: f64 = 0.0;
        for sample in euler.samples.iter().filter(|s| !near_boundary(s.time)) {
            let exact = marking_at(&trace, &sample.time).map_err(|e| e.to_string())?;
            for (id, e) in sample.marking.iter() {
                let x = exact.get(id.as_str()).copied().unwrap_or(0.0);
                worst = worst.max((x - e).abs() / e.abs().max(1.0));
            }
        }
        Ok(Some(worst))
    }

    pub fn oracle_agreement(rn: &RandomNet) -> Verdict {
        match oracle_gap(rn)? {
            None => Ok(false),
            Some(gap) if gap <= 1e-2 => Ok(true),
            Some(gap) => Err(format!("seed {}: engine and oracle differ by {gap}", rn.seed)),
        }
    }

    /// Two runs of the same scenario serialize to the same bytes.
    pub fn reproducible(rn: &RandomNet) -> Verdict {
        let (a, b) = (run(rn)?, run(rn)?);
        match (a, b) {
            (Some(a), Some(b)) if to_json(&a) == to_json(&b) => Ok(true),
            (None, None) => Ok(false),
            _ => Err(format!("seed {}: reruns differ", rn.seed)),
        }
    }
}
