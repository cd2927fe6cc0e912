//! Decision loop: derive priority configurations for the transfer
//! transitions, simulate each, and keep the first one that delivers by the
//! deadline.
//!
//! The starting configuration ranks transfers by maximal speed. After a
//! miss, a place that kept accumulating gets its dominant input demoted one
//! rank; when no demotion applies, optional routes are opened one at a time,
//! and finally equal-weight sharing is tried at each conflict place.

use std::collections::{BTreeMap, HashSet, VecDeque};

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::net::{validate, ConflictPolicy, HybridNet, Id, MaxSpeed, PolicyMode, ShareEntry, Violation};
use crate::scenario::{ScenarioConfig, ScenarioError};
use crate::simulator::{simulate, Outcome, Trace};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Provenance {
    Initial,
    Demotion { of: Id },
    RouteExpansion { place: Id },
    Sharing { place: Id },
    /// Produced by exhaustive enumeration.
    Enumerated,
}

/// Policy and marking overrides applied on top of a scenario. The id is
/// derived from the overrides, so equal overrides share an id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Configuration {
    pub id: Id,
    pub policy_overrides: Vec<ConflictPolicy>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub marking_overrides: BTreeMap<Id, f64>,
    pub provenance: Provenance,
}

impl Configuration {
    pub fn new(
        mut policy_overrides: Vec<ConflictPolicy>,
        marking_overrides: BTreeMap<Id, f64>,
        provenance: Provenance,
    ) -> Self {
        policy_overrides.sort_by(|a, b| a.place.cmp(&b.place));
        let key = serde_json::to_string(&(&policy_overrides, &marking_overrides))
            .expect("overrides serialize");
        let digest = Sha256::digest(key.as_bytes());
        let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
        Configuration {
            id: Id::new(format!("cfg-{hex}")),
            policy_overrides,
            marking_overrides,
            provenance,
        }
    }

    /// `scenario` with this configuration's overrides layered on top.
    pub fn apply(&self, scenario: &ScenarioConfig) -> ScenarioConfig {
        let mut s = scenario.clone();
        for policy in &self.policy_overrides {
            s = s.with_policy(policy.clone());
        }
        for (place, value) in &self.marking_overrides {
            s.marking_overrides.insert(place.clone(), *value);
        }
        s
    }

    /// Human-readable orderings, e.g. `P1: T15 > T5 > T4 > T6 > T16`.
    pub fn summary(&self) -> String {
        let policies = self.policy_overrides.iter().map(|p| {
            let body = match p.mode {
                PolicyMode::Priority => p.order.iter().join(" > "),
                _ => p
                    .groups
                    .iter()
                    .map(|g| {
                        if g.len() == 1 {
                            g[0].id.to_string()
                        } else {
                            format!("{{{}}}", g.iter().map(|e| &e.id).join(", "))
                        }
                    })
                    .join(" > "),
            };
            format!("{}: {}", p.place, body)
        });
        let markings = self
            .marking_overrides
            .iter()
            .map(|(place, v)| format!("{place} = {v}"));
        policies.chain(markings).join("; ")
    }

    fn with_policy(&self, policy: ConflictPolicy, provenance: Provenance) -> Configuration {
        let mut policies = self.policy_overrides.clone();
        policies.retain(|p| p.place != policy.place);
        policies.push(policy);
        Configuration::new(policies, self.marking_overrides.clone(), provenance)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ExplorationMode {
    #[default]
    HeuristicOnly,
    ExhaustiveOrderings,
}

fn default_budget() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AnalysisRequest {
    /// Net name; must match the scenario's net.
    pub net: Id,
    pub scenario: ScenarioConfig,
    #[serde(default = "default_budget")]
    pub max_configurations: usize,
    #[serde(default)]
    pub exploration_mode: ExplorationMode,
}

impl AnalysisRequest {
    pub fn new(scenario: ScenarioConfig, mode: ExplorationMode) -> Self {
        AnalysisRequest {
            net: scenario.net.clone(),
            scenario,
            max_configurations: default_budget(),
            exploration_mode: mode,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Attempt {
    pub configuration: Configuration,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delivery_time: Option<f64>,
    pub meets_deadline: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Id of the stored trace, once the report is saved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Id>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum StopReason {
    FirstHit,
    Exhausted,
    Budget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisReport {
    /// Assigned when the report is stored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<Id>,
    pub net: Id,
    pub scenario: ScenarioConfig,
    pub deadline: f64,
    pub exploration_mode: ExplorationMode,
    pub max_configurations: usize,
    /// In execution order.
    pub attempts: Vec<Attempt>,
    pub selected: Option<Configuration>,
    pub stopped_because: StopReason,
}

impl AnalysisReport {
    pub fn selected_attempt(&self) -> Option<&Attempt> {
        let selected = self.selected.as_ref()?;
        self.attempts.iter().find(|a| a.configuration.id == selected.id)
    }
}

/// A report with the trace of each attempt (absent when the simulation failed).
#[derive(Clone, Debug)]
pub struct Analysis {
    pub report: AnalysisReport,
    pub traces: Vec<Option<Trace>>,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum DssError {
    #[error("analysis needs a deadline in the scenario")]
    MissingDeadline,
    #[error("request names net `{request}` but the scenario runs on `{scenario}`")]
    NetMismatch { request: Id, scenario: Id },
    #[error("maxConfigurations must be at least 1")]
    EmptyBudget,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("net is not valid ({} violations)", .0.len())]
    InvalidNet(Vec<Violation>),
}

/// Transfer transitions ranked by initial maximal speed, fastest first,
/// ties by id.
fn speed_ranking(net: &HybridNet, scenario: &ScenarioConfig) -> Vec<Id> {
    let speed = |id: &Id| match scenario.initial_max_speed(net, id.as_str()) {
        Some(MaxSpeed::Finite(v)) => v,
        Some(MaxSpeed::Unbounded) => f64::INFINITY,
        None => 0.0,
    };
    scenario
        .transfer
        .iter()
        .unique()
        .cloned()
        .sorted_by(|a, b| speed(b).total_cmp(&speed(a)).then_with(|| a.cmp(b)))
        .collect()
}

/// Refills the transfer slots of `order` following `ranking`; other
/// transitions keep their positions.
fn reorder_slots(order: &[Id], ranking: &[Id]) -> Vec<Id> {
    let mut present = ranking.iter().filter(|t| order.contains(t));
    order
        .iter()
        .map(|t| {
            if ranking.contains(t) {
                present.next().expect("slot count matches").clone()
            } else {
                t.clone()
            }
        })
        .collect()
}

/// Priority policies of the effective net that involve a transfer transition.
fn transfer_policies(net: &HybridNet, transfer: &[Id]) -> Vec<ConflictPolicy> {
    net.policies
        .iter()
        .filter(|p| p.mode == PolicyMode::Priority && p.order.iter().any(|t| transfer.contains(t)))
        .sorted_by(|a, b| a.place.cmp(&b.place))
        .cloned()
        .collect()
}

fn ordering_configuration(
    net: &HybridNet,
    scenario: &ScenarioConfig,
    ranking: &[Id],
    provenance: Provenance,
) -> Configuration {
    let effective = scenario.effective_net(net);
    let policies = transfer_policies(&effective, &scenario.transfer)
        .into_iter()
        .map(|p| ConflictPolicy {
            order: reorder_slots(&p.order, ranking),
            ..p
        })
        .collect();
    Configuration::new(policies, BTreeMap::new(), provenance)
}

/// Transfer transitions ordered by descending maximal speed at every
/// priority place that contains them.
pub fn initial_configuration(net: &HybridNet, scenario: &ScenarioConfig) -> Configuration {
    ordering_configuration(net, scenario, &speed_ranking(net, scenario), Provenance::Initial)
}

/// First accumulating phase of every place that builds up marking, with the
/// input transition contributing most to it. The target place and places
/// without continuous outputs are not routing bottlenecks and are skipped.
fn accumulations(net: &HybridNet, trace: &Trace) -> Vec<(Id, Id)> {
    let target = &trace.scenario.target.place;
    let mut found = Vec::new();
    let places = net
        .places
        .iter()
        .filter(|p| p.is_continuous() && p.id != *target)
        .filter(|p| !net.continuous_outputs(p.id.as_str()).is_empty())
        .map(|p| p.id.clone())
        .sorted();
    for place in places {
        let inputs: Vec<(Id, f64)> = net
            .arcs
            .iter()
            .filter(|a| a.to == place)
            .filter(|a| net.transition(a.from.as_str()).is_some_and(|t| t.is_continuous()))
            .map(|a| (a.from.clone(), a.weight))
            .collect();
        let accumulating = trace.phases.iter().find(|phase| {
            let b = phase.balances.get(place.as_str()).copied().unwrap_or(0.0);
            let m0 = phase.start_marking.get(place.as_str()).copied().unwrap_or(0.0);
            b > 1e-12 && m0 + b * (phase.end - phase.start) > 1e-9
        });
        let Some(phase) = accumulating else { continue };
        let dominant = inputs
            .iter()
            .map(|(t, w)| (t, w * phase.speeds.get(t.as_str()).copied().unwrap_or(0.0)))
            .filter(|(_, flow)| *flow > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(a.0)));
        if let Some((t, _)) = dominant {
            found.push((place, t.clone()));
        }
    }
    found
}

/// Moves `of` one rank down among the transfer transitions of `order`.
fn demote(order: &[Id], of: &Id, transfer: &[Id]) -> Option<Vec<Id>> {
    let slots: Vec<usize> = order
        .iter()
        .positions(|t| transfer.contains(t))
        .collect();
    let at = slots.iter().position(|&i| order[i] == *of)?;
    let below = *slots.get(at + 1)?;
    let mut order = order.to_vec();
    order.swap(slots[at], below);
    Some(order)
}

/// Equal-weight sharing among the transfer transitions of a priority order;
/// the shared group takes the slot of the first transfer transition.
fn share_transfers(policy: &ConflictPolicy, transfer: &[Id]) -> Option<ConflictPolicy> {
    let members: Vec<&Id> = policy.order.iter().filter(|t| transfer.contains(t)).collect();
    if members.len() < 2 {
        return None;
    }
    let mut groups: Vec<Vec<ShareEntry>> = Vec::new();
    let mut placed = false;
    for t in &policy.order {
        if !transfer.contains(t) {
            groups.push(vec![ShareEntry {
                id: t.clone(),
                weight: 1.0,
            }]);
        } else if !placed {
            placed = true;
            groups.push(
                members
                    .iter()
                    .sorted()
                    .map(|id| ShareEntry {
                        id: (*id).clone(),
                        weight: 1.0,
                    })
                    .collect(),
            );
        }
    }
    Some(ConflictPolicy {
        place: policy.place.clone(),
        mode: PolicyMode::PriorityThenSharing,
        order: Vec::new(),
        groups,
    })
}

fn sharing_variants(net: &HybridNet, scenario: &ScenarioConfig, base: &Configuration) -> Vec<Configuration> {
    let effective = base.apply(scenario).effective_net(net);
    transfer_policies(&effective, &scenario.transfer)
        .iter()
        .filter_map(|p| share_transfers(p, &scenario.transfer))
        .map(|shared| {
            let place = shared.place.clone();
            base.with_policy(shared, Provenance::Sharing { place })
        })
        .collect()
}

/// Candidates to try after `last` missed, given the configurations tried so
/// far (in order, including `last`). Already-tried configurations are
/// never proposed again.
pub fn next_configurations(
    net: &HybridNet,
    scenario: &ScenarioConfig,
    tried: &[Configuration],
    last: &Configuration,
    trace: &Trace,
) -> Vec<Configuration> {
    let mut seen: HashSet<Id> = tried.iter().map(|c| c.id.clone()).collect();
    seen.insert(last.id.clone());
    let mut fresh = |candidates: Vec<Configuration>| -> Vec<Configuration> {
        candidates
            .into_iter()
            .filter(|c| seen.insert(c.id.clone()))
            .collect()
    };
    let effective = last.apply(scenario).effective_net(net);

    // Demotions reorder priorities, so they only continue from a pure
    // ordering; a sharing variant is a leaf.
    let from_ordering = !matches!(last.provenance, Provenance::Sharing { .. });
    let demotions = accumulations(&effective, trace)
        .into_iter()
        .filter(|_| from_ordering)
        .filter(|(_, input)| scenario.transfer.contains(input))
        .filter_map(|(_, input)| {
            let changed: Vec<ConflictPolicy> = transfer_policies(&effective, &scenario.transfer)
                .into_iter()
                .filter_map(|p| {
                    demote(&p.order, &input, &scenario.transfer).map(|order| ConflictPolicy { order, ..p })
                })
                .collect();
            if changed.is_empty() {
                return None;
            }
            let mut policies = last.policy_overrides.clone();
            policies.retain(|p| !changed.iter().any(|c| c.place == p.place));
            policies.extend(changed);
            Some(Configuration::new(
                policies,
                last.marking_overrides.clone(),
                Provenance::Demotion { of: input },
            ))
        })
        .collect();
    let demotions = fresh(demotions);
    if !demotions.is_empty() {
        return demotions;
    }

    let expansions = scenario
        .optional_routes
        .iter()
        .unique()
        .sorted()
        .filter(|place| effective.place(place.as_str()).is_some_and(|p| p.initial == 0.0))
        .map(|place| {
            let mut markings = last.marking_overrides.clone();
            markings.insert(place.clone(), 1.0);
            Configuration::new(
                last.policy_overrides.clone(),
                markings,
                Provenance::RouteExpansion {
                    place: place.clone(),
                },
            )
        })
        .collect();
    let expansions = fresh(expansions);
    if !expansions.is_empty() {
        return expansions;
    }

    let base = tried
        .iter()
        .rev()
        .find(|c| {
            matches!(
                c.provenance,
                Provenance::Initial | Provenance::Demotion { .. } | Provenance::Enumerated
            )
        })
        .unwrap_or(last);
    fresh(sharing_variants(net, scenario, base))
}

/// Every ordering of the transfer set (starting with the speed ranking),
/// then equal-weight sharing at each conflict place of every ordering.
pub fn exhaustive_configurations(net: &HybridNet, scenario: &ScenarioConfig) -> Vec<Configuration> {
    let initial = initial_configuration(net, scenario);
    let mut transfer: Vec<Id> = scenario.transfer.iter().unique().cloned().collect();
    transfer.sort();
    let orderings: Vec<Configuration> = std::iter::once(initial)
        .chain(
            transfer
                .iter()
                .cloned()
                .permutations(transfer.len())
                .map(|ranking| ordering_configuration(net, scenario, &ranking, Provenance::Enumerated)),
        )
        .collect();
    let sharing: Vec<Configuration> = orderings
        .iter()
        .flat_map(|c| sharing_variants(net, scenario, c))
        .collect();
    let mut seen = HashSet::new();
    orderings
        .into_iter()
        .chain(sharing)
        .filter(|c| seen.insert(c.id.clone()))
        .collect()
}

fn attempt(
    net: &HybridNet,
    scenario: &ScenarioConfig,
    deadline: f64,
    configuration: Configuration,
) -> (Attempt, Option<Trace>) {
    match simulate::<f64>(net, &configuration.apply(scenario)) {
        Ok(trace) => {
            let delivery_time = trace.outcome.delivered_at().copied();
            let meets_deadline = delivery_time.is_some_and(|t| t <= deadline);
            let reason = match (&trace.outcome, delivery_time) {
                (_, Some(t)) if t > deadline => {
                    Some(format!("delivered at {t} after the deadline {deadline}"))
                }
                (Outcome::DeadlineMissed | Outcome::HorizonReached, _) => {
                    Some("target not reached before the horizon".to_string())
                }
                _ => None,
            };
            (
                Attempt {
                    configuration,
                    outcome: trace.outcome.clone(),
                    delivery_time,
                    meets_deadline,
                    reason,
                    trace: None,
                },
                Some(trace),
            )
        }
        Err(e) => (
            Attempt {
                configuration,
                outcome: e.to_outcome(),
                delivery_time: None,
                meets_deadline: false,
                reason: Some(e.to_string()),
                trace: None,
            },
            None,
        ),
    }
}

/// Checks that `request` can run on `net`; returns the deadline.
pub fn check_request(net: &HybridNet, request: &AnalysisRequest) -> Result<f64, DssError> {
    let scenario = &request.scenario;
    if request.net != scenario.net {
        return Err(DssError::NetMismatch {
            request: request.net.clone(),
            scenario: scenario.net.clone(),
        });
    }
    let deadline = scenario.deadline.ok_or(DssError::MissingDeadline)?;
    if request.max_configurations == 0 {
        return Err(DssError::EmptyBudget);
    }
    scenario.check(net)?;
    let validation = validate(&scenario.effective_net(net));
    if !validation.is_ok() {
        return Err(DssError::InvalidNet(validation.violations));
    }
    Ok(deadline)
}

/// Runs the decision loop and reports every attempt in order.
pub fn analyze(net: &HybridNet, request: &AnalysisRequest) -> Result<Analysis, DssError> {
    let deadline = check_request(net, request)?;
    let scenario = &request.scenario;
    let mut queue: VecDeque<Configuration> = match request.exploration_mode {
        ExplorationMode::HeuristicOnly => VecDeque::from([initial_configuration(net, scenario)]),
        ExplorationMode::ExhaustiveOrderings => exhaustive_configurations(net, scenario).into(),
    };
    let mut attempts: Vec<Attempt> = Vec::new();
    let mut traces: Vec<Option<Trace>> = Vec::new();
    let mut tried: Vec<Configuration> = Vec::new();
    let mut selected = None;
    let stopped_because = loop {
        let Some(configuration) = queue.pop_front() else {
            break StopReason::Exhausted;
        };
        if attempts.len() >= request.max_configurations {
            break StopReason::Budget;
        }
        let (result, trace) = attempt(net, scenario, deadline, configuration.clone());
        tried.push(configuration.clone());
        let hit = result.meets_deadline;
        attempts.push(result);
        if hit {
            selected = Some(configuration);
            traces.push(trace);
            break StopReason::FirstHit;
        }
        if request.exploration_mode == ExplorationMode::HeuristicOnly {
            if let Some(trace) = &trace {
                let queued: HashSet<Id> = queue.iter().map(|c| c.id.clone()).collect();
                for c in next_configurations(net, scenario, &tried, &configuration, trace) {
                    if !queued.contains(&c.id) {
                        queue.push_back(c);
                    }
                }
            }
        }
        traces.push(trace);
    };

    Ok(Analysis {
        report: AnalysisReport {
            id: None,
            net: request.net.clone(),
            scenario: scenario.clone(),
            deadline,
            exploration_mode: request.exploration_mode,
            max_configurations: request.max_configurations,
            attempts,
            selected,
            stopped_because,
        },
        traces,
    })
}
