//! Scenario documents: which net to run, with which overrides, until when.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::net::{ConflictPolicy, HybridNet, Id, MaxSpeed, PlaceKind, TransitionKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub place: Id,
    #[serde(deserialize_with = "non_negative")]
    pub amount: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Breakpoint {
    /// Time from which `speed` applies.
    #[serde(deserialize_with = "non_negative")]
    pub from: f64,
    #[serde(deserialize_with = "non_negative")]
    pub speed: f64,
}

/// Uniform resampling of the maximal speed every `interval` time units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpeed {
    #[serde(deserialize_with = "positive")]
    pub interval: f64,
    #[serde(deserialize_with = "non_negative")]
    pub min: f64,
    #[serde(deserialize_with = "non_negative")]
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SpeedSchedule {
    Constant(MaxSpeed),
    /// Before the first breakpoint the net's maximal speed applies.
    Piecewise(Vec<Breakpoint>),
    Random(RandomSpeed),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: Id,
    /// Name of the net this scenario runs on.
    pub net: Id,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub marking_overrides: BTreeMap<Id, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub speed_overrides: BTreeMap<Id, SpeedSchedule>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub policy_overrides: Vec<ConflictPolicy>,
    /// Latest acceptable delivery time; absent means no deadline criterion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<f64>,
    pub target: Target,
    #[serde(deserialize_with = "non_negative")]
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    /// Continuous transitions modelling transmission; the decision loop
    /// only reorders these.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transfer: Vec<Id>,
    /// Availability places the decision loop may mark to open extra routes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub optional_routes: Vec<Id>,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("unknown place `{0}`")]
    UnknownPlace(Id),
    #[error("unknown transition `{0}`")]
    UnknownTransition(Id),
    #[error("{0}")]
    Invalid(String),
}

impl ScenarioConfig {
    pub fn new(id: &str, net: &str, target: &str, amount: f64, horizon: f64) -> Self {
        ScenarioConfig {
            id: id.into(),
            net: net.into(),
            marking_overrides: BTreeMap::new(),
            speed_overrides: BTreeMap::new(),
            policy_overrides: Vec::new(),
            deadline: None,
            target: Target {
                place: target.into(),
                amount,
            },
            horizon,
            seed: 0,
            transfer: Vec::new(),
            optional_routes: Vec::new(),
        }
    }

    pub fn with_constant_speed(mut self, transition: &str, speed: MaxSpeed) -> Self {
        self.speed_overrides
            .insert(transition.into(), SpeedSchedule::Constant(speed));
        self
    }

    pub fn with_policy(mut self, policy: ConflictPolicy) -> Self {
        self.policy_overrides.retain(|p| p.place != policy.place);
        self.policy_overrides.push(policy);
        self
    }

    /// Checks references and ranges against `net`.
    pub fn check(&self, net: &HybridNet) -> Result<(), ScenarioError> {
        let place = |id: &Id| {
            net.place(id.as_str())
                .ok_or_else(|| ScenarioError::UnknownPlace(id.clone()))
        };
        let transition = |id: &Id| {
            net.transition(id.as_str())
                .ok_or_else(|| ScenarioError::UnknownTransition(id.clone()))
        };
        let target = place(&self.target.place)?;
        if target.kind != PlaceKind::Continuous {
            return Err(ScenarioError::Invalid(format!(
                "target place `{}` must be continuous",
                target.id
            )));
        }
        if let Some(deadline) = self.deadline {
            if !(deadline >= 0.0 && deadline <= self.horizon) {
                return Err(ScenarioError::Invalid(format!(
                    "deadline {deadline} must lie within [0, horizon = {}]",
                    self.horizon
                )));
            }
        }
        for (id, value) in &self.marking_overrides {
            let p = place(id)?;
            if !(value.is_finite() && *value >= 0.0) {
                return Err(ScenarioError::Invalid(format!("marking of `{id}` must be non-negative")));
            }
            if p.kind == PlaceKind::Discrete && value.fract() != 0.0 {
                return Err(ScenarioError::Invalid(format!("marking of `{id}` must be an integer")));
            }
        }
        for (id, schedule) in &self.speed_overrides {
            if !transition(id)?.is_continuous() {
                return Err(ScenarioError::Invalid(format!(
                    "speed override on discrete transition `{id}`"
                )));
            }
            match schedule {
                SpeedSchedule::Constant(_) => {}
                SpeedSchedule::Piecewise(points) => {
                    if points.windows(2).any(|w| w[0].from >= w[1].from) {
                        return Err(ScenarioError::Invalid(format!(
                            "breakpoints of `{id}` must be strictly increasing"
                        )));
                    }
                }
                SpeedSchedule::Random(r) => {
                    if r.min > r.max {
                        return Err(ScenarioError::Invalid(format!(
                            "random speed range of `{id}` is empty"
                        )));
                    }
                }
            }
        }
        for policy in &self.policy_overrides {
            place(&policy.place)?;
            for member in policy.members() {
                transition(&member)?;
            }
        }
        for id in &self.transfer {
            if !transition(id)?.is_continuous() {
                return Err(ScenarioError::Invalid(format!(
                    "transfer transition `{id}` must be continuous"
                )));
            }
        }
        for id in &self.optional_routes {
            if place(id)?.kind != PlaceKind::Discrete {
                return Err(ScenarioError::Invalid(format!(
                    "optional route `{id}` must be a discrete availability place"
                )));
            }
        }
        Ok(())
    }

    /// The net with marking, policy and constant-speed overrides applied.
    /// Time-varying schedules are left to the simulator.
    pub fn effective_net(&self, net: &HybridNet) -> HybridNet {
        let mut net = net.clone();
        for place in &mut net.places {
            if let Some(v) = self.marking_overrides.get(&place.id) {
                place.initial = *v;
            }
        }
        for t in &mut net.transitions {
            if let (Some(SpeedSchedule::Constant(speed)), TransitionKind::Continuous { max_speed }) =
                (self.speed_overrides.get(&t.id), &mut t.kind)
            {
                *max_speed = *speed;
            }
        }
        for policy in &self.policy_overrides {
            net.set_policy(policy.clone());
        }
        net
    }

    /// Maximal speed of `transition` in effect at time zero.
    pub fn initial_max_speed(&self, net: &HybridNet, transition: &str) -> Option<MaxSpeed> {
        let declared = net.transition(transition)?.max_speed()?;
        Some(match self.speed_overrides.get(transition) {
            None => declared,
            Some(SpeedSchedule::Constant(speed)) => *speed,
            Some(SpeedSchedule::Piecewise(points)) => points
                .iter()
                .take_while(|b| b.from <= 0.0)
                .last()
                .map_or(declared, |b| MaxSpeed::Finite(b.speed)),
            Some(SpeedSchedule::Random(r)) => MaxSpeed::Finite(0.5 * (r.min + r.max)),
        })
    }

    /// Sorted copy for canonical serialization.
    pub fn canonical(&self) -> ScenarioConfig {
        let mut s = self.clone();
        s.policy_overrides.sort_by(|a, b| a.place.cmp(&b.place));
        s.transfer.sort();
        s.transfer.dedup();
        s.optional_routes.sort();
        s.optional_routes.dedup();
        s
    }
}

fn non_negative<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
    let v = f64::deserialize(deserializer)?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(serde::de::Error::custom(format!("expected a non-negative number, got {v}")))
    }
}

fn positive<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
    let v = f64::deserialize(deserializer)?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(serde::de::Error::custom(format!("expected a positive number, got {v}")))
    }
}
