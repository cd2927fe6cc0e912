//! Instantaneous firing speeds of continuous transitions.
//!
//! Every discretely enabled transition starts at its maximal speed. Each
//! empty continuous place then hands its inflow to its outputs according to
//! the place's conflict policy, and the passes repeat until the speed vector
//! stops moving. A transition consuming from several empty places runs at the
//! smallest grant it received. Unbounded transitions are capped by the inflow
//! reaching their input places.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::net::{validate, HybridMarking, HybridNet, Id, Valuation, Violation};
use crate::scalar::Scalar;
use crate::structure::{Structure, TransKind};

/// Per continuous transition speed.
pub type SpeedVector<S = f64> = Valuation<S>;

/// Per continuous place dm/dt.
pub type BalanceVector<S = f64> = Valuation<S>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Enabling {
    NotEnabled,
    StronglyEnabled,
    WeaklyEnabled,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct EnablingState(pub BTreeMap<Id, Enabling>);

impl EnablingState {
    pub fn get(&self, transition: &str) -> Option<Enabling> {
        self.0.get(transition).copied()
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("speed iteration did not converge after {iterations} passes")]
    NonConvergence {
        iterations: usize,
        previous: Vec<(Id, f64)>,
        last: Vec<(Id, f64)>,
    },
    #[error("discrete marking is not stable: `{transition}` is enabled with zero delay")]
    UnstableDiscreteMarking { transition: Id },
    #[error("unknown place `{0}`")]
    UnknownPlace(Id),
    #[error("unknown transition `{0}`")]
    UnknownTransition(Id),
    #[error("net is not valid ({} violations)", .0.len())]
    InvalidNet(Vec<Violation>),
}

pub(crate) struct Solution<S> {
    pub speeds: Vec<S>,
    pub enabled: Vec<bool>,
    pub empty: Vec<bool>,
}

/// Fixed-point speed computation on an indexed net.
///
/// `marking` must already be snapped (empty places exactly zero);
/// `bounds[t]` is the current maximal speed, `None` meaning unbounded.
pub(crate) fn solve<S: Scalar>(
    st: &Structure<S>,
    marking: &[S],
    bounds: &[Option<S>],
) -> Result<Solution<S>, SolveError> {
    let nt = st.trans_ids.len();
    let tol = S::empty_tolerance();
    let empty: Vec<bool> = (0..st.place_ids.len())
        .map(|p| st.is_continuous_place(p) && marking[p] <= tol)
        .collect();
    let enabled: Vec<bool> = (0..nt)
        .map(|t| {
            st.is_continuous_transition(t)
                && st.pre[t]
                    .iter()
                    .filter(|(p, _)| !st.is_continuous_place(*p))
                    .all(|(p, w)| marking[*p] >= *w)
        })
        .collect();

    let mut solver = Passes {
        st,
        bounds,
        empty: &empty,
        enabled: &enabled,
        grants: st.pre.iter().map(|ins| vec![None; ins.len()]).collect(),
        speeds: vec![S::zero(); nt],
    };
    for t in 0..nt {
        solver.speeds[t] = solver.speed_of(t);
    }

    let limit = 10 * nt.max(1);
    let eps = S::convergence_eps();
    let mut previous = solver.speeds.clone();
    for _ in 0..limit {
        solver.pass();
        let moved = previous
            .iter()
            .zip(&solver.speeds)
            .any(|(a, b)| (a.clone() - b.clone()).abs() > eps);
        if !moved {
            return Ok(Solution {
                speeds: solver.speeds,
                enabled,
                empty,
            });
        }
        previous = solver.speeds.clone();
    }
    let snapshot = |v: &[S]| -> Vec<(Id, f64)> {
        (0..nt)
            .filter(|&t| st.is_continuous_transition(t))
            .map(|t| (st.trans_ids[t].clone(), v[t].to_f64()))
            .collect()
    };
    let last = solver.speeds.clone();
    solver.pass();
    Err(SolveError::NonConvergence {
        iterations: limit,
        previous: snapshot(&last),
        last: snapshot(&solver.speeds),
    })
}

struct Passes<'a, S> {
    st: &'a Structure<S>,
    bounds: &'a [Option<S>],
    empty: &'a [bool],
    enabled: &'a [bool],
    /// grants[t][k]: speed granted to t by its k-th input place, when that place is empty.
    grants: Vec<Vec<Option<S>>>,
    speeds: Vec<S>,
}

impl<S: Scalar> Passes<'_, S> {
    /// Upper limit on the speed of `t` from everything except its input at
    /// position `skip`. `None` means no limit (unbounded transition).
    fn limit(&self, t: usize, skip: Option<usize>) -> Option<S> {
        if !self.enabled[t] {
            return Some(S::zero());
        }
        let unbounded = self.bounds[t].is_none();
        let mut cap = self.bounds[t].clone();
        let mut tighten = |value: S| {
            cap = Some(match cap.take() {
                Some(c) => S::min_of(c, value),
                None => value,
            });
        };
        for (k, (p, w)) in self.st.pre[t].iter().enumerate() {
            if Some(k) == skip || !self.st.is_continuous_place(*p) {
                continue;
            }
            match (&self.grants[t][k], self.empty[*p]) {
                (Some(g), true) => tighten(g.clone()),
                (None, true) if unbounded => {
                    tighten(self.st.inflow_rate(*p, &self.speeds) / w.clone())
                }
                (_, false) if unbounded => {
                    tighten(self.st.inflow_rate(*p, &self.speeds) / w.clone())
                }
                _ => {}
            }
        }
        cap
    }

    fn speed_of(&self, t: usize) -> S {
        if !matches!(self.st.trans_kind[t], TransKind::Continuous { .. }) {
            return S::zero();
        }
        self.limit(t, None).unwrap_or_else(S::zero)
    }

    fn pass(&mut self) {
        let st = self.st;
        for &p in &st.order {
            if !self.empty[p] {
                continue;
            }
            let mut remaining = st.inflow_rate(p, &self.speeds);
            for tier in &st.tiers[p] {
                let members: Vec<Member<S>> = tier
                    .iter()
                    .filter_map(|(t, share)| {
                        let k = st.pre[*t].iter().position(|(q, _)| *q == p)?;
                        Some(Member {
                            transition: *t,
                            input: k,
                            share: share.clone(),
                            weight: st.pre[*t][k].1.clone(),
                            demand: self.limit(*t, Some(k)),
                        })
                    })
                    .collect();
                let taken = water_fill(remaining.clone(), &members);
                // A member's grant is what the place could offer it if its
                // other inputs did not hold it back; recording the capped
                // value instead lets two empty places pin each other low.
                let offers: Vec<S> = (0..members.len())
                    .map(|i| {
                        if members[i].demand.as_ref().is_some_and(|d| taken[i] < *d) {
                            return taken[i].clone();
                        }
                        let mut free = members.clone();
                        free[i].demand = None;
                        water_fill(remaining.clone(), &free).swap_remove(i)
                    })
                    .collect();
                for ((member, used), offer) in members.iter().zip(taken).zip(offers) {
                    remaining = remaining - member.weight.clone() * used;
                    self.grants[member.transition][member.input] = Some(offer);
                    self.speeds[member.transition] = self.speed_of(member.transition);
                }
                if remaining < S::zero() {
                    remaining = S::zero();
                }
            }
        }
        for t in 0..st.trans_ids.len() {
            self.speeds[t] = self.speed_of(t);
        }
    }
}

#[derive(Clone)]
struct Member<S> {
    transition: usize,
    input: usize,
    share: S,
    weight: S,
    demand: Option<S>,
}

/// Splits `budget` (a flow) among members in proportion to their shares,
/// capping each at its demand and handing the surplus to the others until
/// nobody new is capped. Returns speeds.
fn water_fill<S: Scalar>(budget: S, members: &[Member<S>]) -> Vec<S> {
    let mut grants = vec![S::zero(); members.len()];
    let mut active: Vec<usize> = (0..members.len())
        .filter(|&i| members[i].demand.as_ref().is_none_or(|d| *d > S::zero()))
        .collect();
    let mut budget = budget;
    while !active.is_empty() && budget > S::zero() {
        let total = active
            .iter()
            .fold(S::zero(), |acc, &i| acc + members[i].share.clone());
        let fair = |i: usize, budget: &S| {
            budget.clone() * members[i].share.clone() / total.clone() / members[i].weight.clone()
        };
        let capped: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&i| members[i].demand.as_ref().is_some_and(|d| *d <= fair(i, &budget)))
            .collect();
        if capped.is_empty() {
            for &i in &active {
                grants[i] = fair(i, &budget);
            }
            break;
        }
        for &i in &capped {
            let d = members[i].demand.clone().unwrap_or_else(S::zero);
            budget = budget - members[i].weight.clone() * d.clone();
            grants[i] = d;
        }
        active.retain(|i| !capped.contains(i));
    }
    grants
}

fn marking_vector<S: Scalar>(
    st: &Structure<S>,
    marking: &HybridMarking<S>,
) -> Result<Vec<S>, SolveError> {
    let mut values = vec![S::zero(); st.place_ids.len()];
    for (id, value) in marking.iter() {
        let &p = st
            .place_index
            .get(id)
            .ok_or_else(|| SolveError::UnknownPlace(id.clone()))?;
        values[p] = if st.is_continuous_place(p) && *value <= S::empty_tolerance() {
            S::zero()
        } else {
            value.clone()
        };
    }
    Ok(values)
}

fn prepare<S: Scalar>(
    net: &HybridNet,
    marking: &HybridMarking<S>,
) -> Result<(Structure<S>, Vec<S>), SolveError> {
    let validation = validate(net);
    if !validation.is_ok() {
        return Err(SolveError::InvalidNet(validation.violations));
    }
    let st = Structure::build(net);
    let values = marking_vector(&st, marking)?;
    for t in 0..st.trans_ids.len() {
        if let TransKind::Discrete { delay } = &st.trans_kind[t] {
            if delay.is_zero() && st.discrete_enabled(t, &values) {
                return Err(SolveError::UnstableDiscreteMarking {
                    transition: st.trans_ids[t].clone(),
                });
            }
        }
    }
    Ok((st, values))
}

/// Speeds of all continuous transitions at `marking` under the net's
/// maximal speeds and conflict policies.
pub fn solve_speeds<S: Scalar>(
    net: &HybridNet,
    marking: &HybridMarking<S>,
) -> Result<SpeedVector<S>, SolveError> {
    let (st, values) = prepare(net, marking)?;
    let solution = solve(&st, &values, &st.declared_bounds())?;
    Ok(speed_vector(&st, &solution.speeds))
}

/// Strong/weak/no enabling of each continuous transition. Whether an empty
/// place is fed depends on the speeds, so this runs the solver.
pub fn enabling<S: Scalar>(
    net: &HybridNet,
    marking: &HybridMarking<S>,
) -> Result<EnablingState, SolveError> {
    let (st, values) = prepare(net, marking)?;
    let solution = solve(&st, &values, &st.declared_bounds())?;
    Ok(classify(&st, &solution))
}

pub(crate) fn classify<S: Scalar>(st: &Structure<S>, solution: &Solution<S>) -> EnablingState {
    let mut state = BTreeMap::new();
    for t in (0..st.trans_ids.len()).filter(|&t| st.is_continuous_transition(t)) {
        let mut status = if solution.enabled[t] {
            Enabling::StronglyEnabled
        } else {
            Enabling::NotEnabled
        };
        if status != Enabling::NotEnabled {
            for (p, _) in st.pre[t].iter().filter(|(p, _)| solution.empty[*p]) {
                if st.inflow_rate(*p, &solution.speeds) > S::zero() {
                    status = Enabling::WeaklyEnabled;
                } else {
                    status = Enabling::NotEnabled;
                    break;
                }
            }
        }
        state.insert(st.trans_ids[t].clone(), status);
    }
    EnablingState(state)
}

pub(crate) fn speed_vector<S: Scalar>(st: &Structure<S>, speeds: &[S]) -> SpeedVector<S> {
    (0..st.trans_ids.len())
        .filter(|&t| st.is_continuous_transition(t))
        .map(|t| (st.trans_ids[t].clone(), speeds[t].clone()))
        .collect()
}

pub(crate) fn balance_vector<S: Scalar>(st: &Structure<S>, balances: &[S]) -> BalanceVector<S> {
    (0..st.place_ids.len())
        .filter(|&p| st.is_continuous_place(p))
        .map(|p| (st.place_ids[p].clone(), balances[p].clone()))
        .collect()
}

/// Weighted flow sum of every continuous place: inputs minus outputs.
/// Transitions absent from `speeds` count as stopped.
pub fn balances<S: Scalar>(net: &HybridNet, speeds: &SpeedVector<S>) -> BalanceVector<S> {
    let st: Structure<S> = Structure::build(net);
    let mut values = vec![S::zero(); st.trans_ids.len()];
    for (id, v) in speeds.iter() {
        if let Some(&t) = st.trans_index.get(id) {
            values[t] = v.clone();
        }
    }
    balance_vector(&st, &st.balances(&values))
}
