//! Fixed-step explicit Euler integration of a scenario, used to cross-check
//! the event-driven simulator. It shares only the speed solver with it.

use crate::net::{validate, HybridMarking};
use crate::scenario::{ScenarioConfig, ScenarioError};
use crate::simulator::{schedules_for, SimulationError};
use crate::solver::solve;
use crate::structure::{Structure, TransKind};
use crate::HybridNet;

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub marking: HybridMarking,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub step: f64,
    /// One entry per requested sample time inside the integrated span.
    pub samples: Vec<Sample>,
    /// Target crossing, linearly interpolated inside the step where it occurs.
    pub delivered_at: Option<f64>,
    pub steps: usize,
}

const CLAMP: f64 = 1e-9;

/// Integrates `scenario` with step `step` until the horizon, or until the
/// target is met and every sample time has been passed.
pub fn euler_oracle(
    net: &HybridNet,
    scenario: &ScenarioConfig,
    step: f64,
    sample_times: &[f64],
) -> Result<Trajectory, SimulationError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(ScenarioError::Invalid(format!("step must be positive, got {step}")).into());
    }
    scenario.check(net)?;
    let net = scenario.effective_net(net);
    let validation = validate(&net);
    if !validation.is_ok() {
        return Err(SimulationError::InvalidNet(validation.violations));
    }
    let st: Structure<f64> = Structure::build(&net);
    let np = st.place_ids.len();
    let nt = st.trans_ids.len();
    let mut schedules = schedules_for(&st, scenario);
    let target = st.place_index[&scenario.target.place];
    let amount = scenario.target.amount;

    let mut m: Vec<f64> = st
        .place_ids
        .iter()
        .map(|id| net.place(id.as_str()).map_or(0.0, |p| p.initial))
        .collect();
    let mut timers: Vec<Option<f64>> = vec![None; nt];
    let mut times: Vec<f64> = sample_times.to_vec();
    times.sort_by(f64::total_cmp);
    let mut pending = times.into_iter().peekable();
    let mut samples = Vec::new();
    let mut delivered_at = None;
    let mut previous: Option<(f64, Vec<f64>)> = None;
    let mut k = 0usize;

    let snapshot = |values: &[f64]| -> HybridMarking {
        st.place_ids.iter().cloned().zip(values.iter().copied()).collect()
    };

    loop {
        let t = k as f64 * step;

        // Discrete part: timers run while enabled; fire what is due.
        let mut firings = 0;
        loop {
            for j in 0..nt {
                if let TransKind::Discrete { delay } = st.trans_kind[j] {
                    let enabled = st.pre[j].iter().all(|(p, w)| m[*p] >= *w - CLAMP);
                    match (enabled, timers[j]) {
                        (true, None) => timers[j] = Some(delay),
                        (false, _) => timers[j] = None,
                        _ => {}
                    }
                }
            }
            let Some(j) = (0..nt).find(|&j| timers[j].is_some_and(|r| r <= 1e-12)) else {
                break;
            };
            firings += 1;
            if firings > 10_000 {
                return Err(SimulationError::UnstableDiscreteMarking {
                    transition: st.trans_ids[j].clone(),
                    time: t,
                });
            }
            for (p, w) in &st.pre[j] {
                m[*p] = (m[*p] - w).max(0.0);
            }
            for (p, w) in &st.post[j] {
                m[*p] += w;
            }
            timers[j] = None;
        }

        let interpolate = |at: f64| -> Vec<f64> {
            match &previous {
                Some((t0, m0)) if at < t => {
                    let f = (at - t0) / (t - t0);
                    (0..np)
                        .map(|p| {
                            if st.is_continuous_place(p) {
                                m0[p] + f * (m[p] - m0[p])
                            } else {
                                m0[p]
                            }
                        })
                        .collect()
                }
                _ => m.clone(),
            }
        };
        while let Some(&at) = pending.peek() {
            if at > t + 1e-12 {
                break;
            }
            samples.push(Sample {
                time: at,
                marking: snapshot(&interpolate(at)),
            });
            pending.next();
        }
        if delivered_at.is_none() && m[target] >= amount {
            delivered_at = Some(match &previous {
                Some((t0, m0)) if m0[target] < amount => {
                    t0 + step * (amount - m0[target]) / (m[target] - m0[target])
                }
                _ => t,
            });
        }
        if t >= scenario.horizon || (delivered_at.is_some() && pending.peek().is_none()) {
            break;
        }

        let mut bounds = st.declared_bounds();
        for (j, schedule) in schedules.iter_mut().enumerate() {
            if let Some(s) = schedule {
                bounds[j] = s.bound_at(&t);
            }
        }
        for p in 0..np {
            if st.is_continuous_place(p) && m[p] <= CLAMP {
                m[p] = 0.0;
            }
        }
        let solution = solve(&st, &m, &bounds)
            .map_err(|source| SimulationError::Solve { time: t, source })?;
        let balances = st.balances(&solution.speeds);
        previous = Some((t, m.clone()));
        for p in 0..np {
            if st.is_continuous_place(p) {
                m[p] = (m[p] + balances[p] * step).max(0.0);
            }
        }
        for r in timers.iter_mut().flatten() {
            *r -= step;
        }
        k += 1;
    }

    Ok(Trajectory {
        step,
        samples,
        delivered_at,
        steps: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{MaxSpeed, PlaceDef, TransitionDef};

    #[test]
    fn zero_speed_net_is_constant() {
        let mut net = HybridNet::new("still");
        net.places.push(PlaceDef::continuous("P", 3.0));
        net.transitions.push(TransitionDef::continuous("T", MaxSpeed::Finite(1.0)));
        net.places.push(PlaceDef::discrete("D", 0));
        net.arcs.push(crate::ArcDef::new("P", "T", 1.0));
        net.arcs.push(crate::ArcDef::new("D", "T", 1.0));
        net.arcs.push(crate::ArcDef::new("T", "D", 1.0));
        let s = ScenarioConfig::new("s", "still", "P", 10.0, 1.0);
        let traj = euler_oracle(&net, &s, 0.01, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(traj.samples.len(), 3);
        for sample in &traj.samples {
            assert_eq!(sample.marking.get("P"), Some(&3.0));
        }
        assert_eq!(traj.delivered_at, None);
    }

    #[test]
    fn non_positive_step_is_rejected() {
        let net = HybridNet::new("n");
        let s = ScenarioConfig::new("s", "n", "P", 1.0, 1.0);
        assert!(euler_oracle(&net, &s, 0.0, &[]).is_err());
    }
}
