//! Hybrid Petri net data model and structural validation.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Identifier of a net, place, transition or stored document.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Id(String);

impl Id {
    pub fn new(value: impl Into<String>) -> Self {
        Id(value.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Id {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        if value.trim().is_empty() {
            return Err("identifier must not be empty".into());
        }
        if value.chars().any(char::is_whitespace) {
            return Err(format!("identifier `{value}` contains whitespace"));
        }
        Ok(Id(value))
    }
}

impl From<Id> for String {
    fn from(id: Id) -> Self {
        id.0
    }
}

impl From<&str> for Id {
    fn from(value: &str) -> Self {
        Id(value.to_string())
    }
}

impl Borrow<str> for Id {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaceKind {
    Discrete,
    Continuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaceDef {
    pub id: Id,
    pub kind: PlaceKind,
    #[serde(deserialize_with = "non_negative")]
    pub initial: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
}

impl PlaceDef {
    pub fn continuous(id: &str, initial: f64) -> Self {
        PlaceDef {
            id: id.into(),
            kind: PlaceKind::Continuous,
            initial,
            label: String::new(),
        }
    }

    pub fn discrete(id: &str, initial: u64) -> Self {
        PlaceDef {
            id: id.into(),
            kind: PlaceKind::Discrete,
            initial: initial as f64,
            label: String::new(),
        }
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn is_continuous(&self) -> bool {
        self.kind == PlaceKind::Continuous
    }
}

/// Maximal firing speed of a continuous transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MaxSpeed {
    Finite(f64),
    /// Encoded as `"inf"`; such a transition only ever drains what flows in.
    Unbounded,
}

impl MaxSpeed {
    pub fn finite(&self) -> Option<f64> {
        match self {
            MaxSpeed::Finite(v) => Some(*v),
            MaxSpeed::Unbounded => None,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, MaxSpeed::Unbounded)
    }
}

impl fmt::Display for MaxSpeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaxSpeed::Finite(v) => write!(f, "{v}"),
            MaxSpeed::Unbounded => f.write_str("inf"),
        }
    }
}

impl Serialize for MaxSpeed {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            MaxSpeed::Finite(v) => serializer.serialize_f64(*v),
            MaxSpeed::Unbounded => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for MaxSpeed {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) if v.is_finite() && v > 0.0 => Ok(MaxSpeed::Finite(v)),
            Raw::Number(v) => Err(serde::de::Error::custom(format!(
                "maximal speed must be positive, got {v}"
            ))),
            Raw::Text(s) if s == "inf" => Ok(MaxSpeed::Unbounded),
            Raw::Text(s) => Err(serde::de::Error::custom(format!(
                "maximal speed must be a positive number or \"inf\", got \"{s}\""
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TransitionKind {
    DiscreteTimed { delay: f64 },
    Continuous { max_speed: MaxSpeed },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransitionDoc", into = "TransitionDoc")]
pub struct TransitionDef {
    pub id: Id,
    pub kind: TransitionKind,
    pub label: String,
}

impl TransitionDef {
    pub fn continuous(id: &str, max_speed: MaxSpeed) -> Self {
        TransitionDef {
            id: id.into(),
            kind: TransitionKind::Continuous { max_speed },
            label: String::new(),
        }
    }

    pub fn discrete(id: &str, delay: f64) -> Self {
        TransitionDef {
            id: id.into(),
            kind: TransitionKind::DiscreteTimed { delay },
            label: String::new(),
        }
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, TransitionKind::Continuous { .. })
    }

    pub fn max_speed(&self) -> Option<MaxSpeed> {
        match self.kind {
            TransitionKind::Continuous { max_speed } => Some(max_speed),
            TransitionKind::DiscreteTimed { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum TransitionTag {
    Discrete,
    Continuous,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct TransitionDoc {
    id: Id,
    kind: TransitionTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_speed: Option<MaxSpeed>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "optional_non_negative"
    )]
    delay: Option<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    label: String,
}

impl TryFrom<TransitionDoc> for TransitionDef {
    type Error = String;

    fn try_from(doc: TransitionDoc) -> Result<Self, Self::Error> {
        let kind = match (doc.kind, doc.max_speed, doc.delay) {
            (TransitionTag::Continuous, Some(max_speed), None) => {
                TransitionKind::Continuous { max_speed }
            }
            (TransitionTag::Discrete, None, Some(delay)) => TransitionKind::DiscreteTimed { delay },
            (TransitionTag::Continuous, _, _) => {
                return Err(format!(
                    "continuous transition `{}` needs `maxSpeed` and no `delay`",
                    doc.id
                ))
            }
            (TransitionTag::Discrete, _, _) => {
                return Err(format!(
                    "discrete transition `{}` needs `delay` and no `maxSpeed`",
                    doc.id
                ))
            }
        };
        Ok(TransitionDef {
            id: doc.id,
            kind,
            label: doc.label,
        })
    }
}

impl From<TransitionDef> for TransitionDoc {
    fn from(t: TransitionDef) -> Self {
        let (kind, max_speed, delay) = match t.kind {
            TransitionKind::Continuous { max_speed } => {
                (TransitionTag::Continuous, Some(max_speed), None)
            }
            TransitionKind::DiscreteTimed { delay } => (TransitionTag::Discrete, None, Some(delay)),
        };
        TransitionDoc {
            id: t.id,
            kind,
            max_speed,
            delay,
            label: t.label,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcDef {
    pub from: Id,
    pub to: Id,
    #[serde(deserialize_with = "positive")]
    pub weight: f64,
}

impl ArcDef {
    pub fn new(from: &str, to: &str, weight: f64) -> Self {
        ArcDef {
            from: from.into(),
            to: to.into(),
            weight,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PolicyMode {
    Priority,
    Sharing,
    PriorityThenSharing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShareEntry {
    pub id: Id,
    #[serde(deserialize_with = "positive")]
    pub weight: f64,
}

/// How the inflow of an empty continuous place is split among its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ConflictPolicy {
    pub place: Id,
    pub mode: PolicyMode,
    /// Highest priority first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub order: Vec<Id>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<Vec<ShareEntry>>,
}

impl ConflictPolicy {
    pub fn priority(place: &str, order: &[&str]) -> Self {
        ConflictPolicy {
            place: place.into(),
            mode: PolicyMode::Priority,
            order: order.iter().map(|&t| Id::from(t)).collect(),
            groups: Vec::new(),
        }
    }

    pub fn sharing(place: &str, members: &[(&str, f64)]) -> Self {
        ConflictPolicy {
            place: place.into(),
            mode: PolicyMode::Sharing,
            order: Vec::new(),
            groups: vec![members
                .iter()
                .map(|&(id, weight)| ShareEntry {
                    id: id.into(),
                    weight,
                })
                .collect()],
        }
    }

    pub fn priority_then_sharing(place: &str, groups: &[&[(&str, f64)]]) -> Self {
        ConflictPolicy {
            place: place.into(),
            mode: PolicyMode::PriorityThenSharing,
            order: Vec::new(),
            groups: groups
                .iter()
                .map(|g| {
                    g.iter()
                        .map(|&(id, weight)| ShareEntry {
                            id: id.into(),
                            weight,
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// Tiers in decreasing priority; members of one tier share.
    pub fn tiers(&self) -> Vec<Vec<(Id, f64)>> {
        match self.mode {
            PolicyMode::Priority => self.order.iter().map(|t| vec![(t.clone(), 1.0)]).collect(),
            PolicyMode::Sharing | PolicyMode::PriorityThenSharing => self
                .groups
                .iter()
                .map(|g| g.iter().map(|e| (e.id.clone(), e.weight)).collect())
                .collect(),
        }
    }

    pub fn members(&self) -> Vec<Id> {
        self.tiers()
            .into_iter()
            .flatten()
            .map(|(id, _)| id)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridNet {
    pub name: Id,
    #[serde(default)]
    pub places: Vec<PlaceDef>,
    #[serde(default)]
    pub transitions: Vec<TransitionDef>,
    #[serde(default)]
    pub arcs: Vec<ArcDef>,
    #[serde(default)]
    pub policies: Vec<ConflictPolicy>,
}

impl HybridNet {
    pub fn new(name: &str) -> Self {
        HybridNet {
            name: name.into(),
            places: Vec::new(),
            transitions: Vec::new(),
            arcs: Vec::new(),
            policies: Vec::new(),
        }
    }

    pub fn place(&self, id: &str) -> Option<&PlaceDef> {
        self.places.iter().find(|p| p.id.as_str() == id)
    }

    pub fn transition(&self, id: &str) -> Option<&TransitionDef> {
        self.transitions.iter().find(|t| t.id.as_str() == id)
    }

    pub fn policy(&self, place: &str) -> Option<&ConflictPolicy> {
        self.policies.iter().find(|p| p.place.as_str() == place)
    }

    /// Replaces (or inserts) the policy of `policy.place`.
    pub fn set_policy(&mut self, policy: ConflictPolicy) {
        match self.policies.iter_mut().find(|p| p.place == policy.place) {
            Some(slot) => *slot = policy,
            None => self.policies.push(policy),
        }
    }

    /// Continuous transitions consuming from `place`, sorted by id.
    pub fn continuous_outputs(&self, place: &str) -> Vec<Id> {
        let mut out: Vec<Id> = self
            .arcs
            .iter()
            .filter(|a| a.from.as_str() == place)
            .filter(|a| self.transition(a.to.as_str()).is_some_and(|t| t.is_continuous()))
            .map(|a| a.to.clone())
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Transitions producing into `place`, sorted by id.
    pub fn input_transitions(&self, place: &str) -> Vec<Id> {
        let mut out: Vec<Id> = self
            .arcs
            .iter()
            .filter(|a| a.to.as_str() == place && self.transition(a.from.as_str()).is_some())
            .map(|a| a.from.clone())
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn initial_marking(&self) -> HybridMarking {
        self.places.iter().map(|p| (p.id.clone(), p.initial)).collect()
    }

    /// Sorted copy: places, transitions and policies by id, arcs by endpoints.
    /// Policy orders and group contents keep their meaning-bearing order.
    pub fn canonical(&self) -> HybridNet {
        let mut net = self.clone();
        net.places.sort_by(|a, b| a.id.cmp(&b.id));
        net.transitions.sort_by(|a, b| a.id.cmp(&b.id));
        net.arcs
            .sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
        net.policies.sort_by(|a, b| a.place.cmp(&b.place));
        net
    }

    /// Equality up to element ordering.
    pub fn structurally_eq(&self, other: &HybridNet) -> bool {
        self.canonical() == other.canonical()
    }
}

/// Association from element id to a quantity (marking, speed or balance).
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Valuation<S = f64>(pub BTreeMap<Id, S>);

/// Marking of every place, discrete entries integral.
pub type HybridMarking<S = f64> = Valuation<S>;

impl<S: Clone> Valuation<S> {
    pub fn get(&self, id: &str) -> Option<&S> {
        self.0.get(id)
    }

    pub fn set(&mut self, id: &str, value: S) {
        self.0.insert(Id::from(id), value);
    }

    pub fn map<T>(&self, f: impl Fn(&S) -> T) -> Valuation<T> {
        Valuation(self.0.iter().map(|(k, v)| (k.clone(), f(v))).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Id, &S)> {
        self.0.iter()
    }
}

impl<S> FromIterator<(Id, S)> for Valuation<S> {
    fn from_iter<I: IntoIterator<Item = (Id, S)>>(iter: I) -> Self {
        Valuation(iter.into_iter().collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum ViolationKind {
    DuplicateId,
    DanglingArc,
    NonBipartiteArc,
    DuplicateArc,
    InvalidWeight,
    InvalidInitial,
    InvalidDelay,
    InvalidSpeed,
    UnboundedSource,
    MissingSelfLoop,
    MissingPolicy,
    InvalidPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub element: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.element, self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Validation {
    pub violations: Vec<Violation>,
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, element: impl fmt::Display, message: impl Into<String>) {
        self.violations.push(Violation {
            kind,
            element: element.to_string(),
            message: message.into(),
        });
    }
}

enum Node<'a> {
    Place(&'a PlaceDef),
    Transition(&'a TransitionDef),
}

/// Checks every structural invariant and reports all violations found.
pub fn validate(net: &HybridNet) -> Validation {
    let mut report = Validation::default();
    let mut nodes: HashMap<&str, Node<'_>> = HashMap::new();

    for p in &net.places {
        if nodes.insert(p.id.as_str(), Node::Place(p)).is_some() {
            report.push(ViolationKind::DuplicateId, &p.id, "duplicate identifier");
        }
        if !(p.initial.is_finite() && p.initial >= 0.0) {
            report.push(ViolationKind::InvalidInitial, &p.id, "initial marking must be non-negative");
        } else if p.kind == PlaceKind::Discrete && p.initial.fract() != 0.0 {
            report.push(ViolationKind::InvalidInitial, &p.id, "discrete marking must be an integer");
        }
    }
    for t in &net.transitions {
        if nodes.insert(t.id.as_str(), Node::Transition(t)).is_some() {
            report.push(ViolationKind::DuplicateId, &t.id, "duplicate identifier");
        }
        match t.kind {
            TransitionKind::DiscreteTimed { delay } if !(delay.is_finite() && delay >= 0.0) => {
                report.push(ViolationKind::InvalidDelay, &t.id, "delay must be non-negative");
            }
            TransitionKind::Continuous {
                max_speed: MaxSpeed::Finite(v),
            } if !(v.is_finite() && v > 0.0) => {
                report.push(ViolationKind::InvalidSpeed, &t.id, "maximal speed must be positive");
            }
            _ => {}
        }
    }

    let mut seen_arcs = BTreeSet::new();
    // (place, transition) -> weight, split by direction
    let mut place_to_trans: HashMap<(&str, &str), f64> = HashMap::new();
    let mut trans_to_place: HashMap<(&str, &str), f64> = HashMap::new();
    for arc in &net.arcs {
        let label = format!("{}->{}", arc.from, arc.to);
        let (from, to) = match (nodes.get(arc.from.as_str()), nodes.get(arc.to.as_str())) {
            (Some(f), Some(t)) => (f, t),
            _ => {
                report.push(ViolationKind::DanglingArc, &label, "arc endpoint does not resolve");
                continue;
            }
        };
        if !seen_arcs.insert((arc.from.as_str(), arc.to.as_str())) {
            report.push(ViolationKind::DuplicateArc, &label, "duplicate arc");
        }
        let place = match (from, to) {
            (Node::Place(p), Node::Transition(t)) => {
                place_to_trans.insert((p.id.as_str(), t.id.as_str()), arc.weight);
                p
            }
            (Node::Transition(t), Node::Place(p)) => {
                trans_to_place.insert((p.id.as_str(), t.id.as_str()), arc.weight);
                p
            }
            _ => {
                report.push(ViolationKind::NonBipartiteArc, &label, "non-bipartite arc");
                continue;
            }
        };
        if !(arc.weight.is_finite() && arc.weight > 0.0) {
            report.push(ViolationKind::InvalidWeight, &label, "arc weight must be positive");
        } else if place.kind == PlaceKind::Discrete && arc.weight.fract() != 0.0 {
            report.push(
                ViolationKind::InvalidWeight,
                &label,
                "arc weight at a discrete place must be an integer",
            );
        }
    }

    // Discrete place <-> continuous transition arcs must form equal-weight self-loops.
    let is_discrete_place = |id: &str| {
        matches!(nodes.get(id), Some(Node::Place(p)) if p.kind == PlaceKind::Discrete)
    };
    let is_continuous_trans = |id: &str| {
        matches!(nodes.get(id), Some(Node::Transition(t)) if t.is_continuous())
    };
    let mut loops: Vec<_> = place_to_trans
        .iter()
        .chain(trans_to_place.iter())
        .filter(|((p, t), _)| is_discrete_place(p) && is_continuous_trans(t))
        .map(|(&(p, t), _)| (p, t))
        .collect();
    loops.sort();
    loops.dedup();
    for (p, t) in loops {
        let pre = place_to_trans.get(&(p, t));
        let post = trans_to_place.get(&(p, t));
        if pre.is_none() || pre != post {
            report.push(
                ViolationKind::MissingSelfLoop,
                format!("{p}<->{t}"),
                "discrete place and continuous transition must be joined by an equal-weight self-loop",
            );
        }
    }

    for t in &net.transitions {
        if t.max_speed().is_some_and(|s| s.is_unbounded()) {
            let fed = net.arcs.iter().any(|a| {
                a.to == t.id
                    && matches!(nodes.get(a.from.as_str()), Some(Node::Place(p)) if p.is_continuous())
            });
            if !fed {
                report.push(
                    ViolationKind::UnboundedSource,
                    &t.id,
                    "unbounded transition needs a continuous input place",
                );
            }
        }
    }

    validate_policies(net, &nodes, &mut report);
    report
}

fn validate_policies(net: &HybridNet, nodes: &HashMap<&str, Node<'_>>, report: &mut Validation) {
    let mut covered = BTreeSet::new();
    for policy in &net.policies {
        let place = policy.place.as_str();
        match nodes.get(place) {
            Some(Node::Place(p)) if p.is_continuous() => {}
            _ => {
                report.push(
                    ViolationKind::InvalidPolicy,
                    place,
                    "policy must name a continuous place",
                );
                continue;
            }
        }
        if !covered.insert(place) {
            report.push(ViolationKind::InvalidPolicy, place, "more than one policy for place");
        }
        match policy.mode {
            PolicyMode::Priority if policy.order.is_empty() || !policy.groups.is_empty() => {
                report.push(
                    ViolationKind::InvalidPolicy,
                    place,
                    "priority policy needs `order` and no `groups`",
                );
            }
            PolicyMode::Sharing if policy.groups.len() != 1 || !policy.order.is_empty() => {
                report.push(
                    ViolationKind::InvalidPolicy,
                    place,
                    "sharing policy needs exactly one group and no `order`",
                );
            }
            PolicyMode::PriorityThenSharing
                if policy.groups.is_empty()
                    || policy.groups.iter().any(Vec::is_empty)
                    || !policy.order.is_empty() =>
            {
                report.push(
                    ViolationKind::InvalidPolicy,
                    place,
                    "priority-then-sharing policy needs non-empty `groups` and no `order`",
                );
            }
            _ => {}
        }
        for group in &policy.groups {
            for entry in group {
                if !(entry.weight.is_finite() && entry.weight > 0.0) {
                    report.push(
                        ViolationKind::InvalidPolicy,
                        format!("{place}/{}", entry.id),
                        "sharing weight must be positive",
                    );
                }
            }
        }
        let outputs = net.continuous_outputs(place);
        let mut members = policy.members();
        for m in &members {
            if !outputs.contains(m) {
                report.push(
                    ViolationKind::InvalidPolicy,
                    format!("{place}/{m}"),
                    "policy member is not a continuous output of the place",
                );
            }
        }
        members.sort();
        let before = members.len();
        members.dedup();
        if members.len() != before {
            report.push(ViolationKind::InvalidPolicy, place, "transition listed twice in policy");
        }
        for out in &outputs {
            if !members.contains(out) {
                report.push(
                    ViolationKind::InvalidPolicy,
                    format!("{place}/{out}"),
                    "continuous output missing from policy",
                );
            }
        }
    }
    for p in net.places.iter().filter(|p| p.is_continuous()) {
        if net.continuous_outputs(p.id.as_str()).len() >= 2 && !covered.contains(p.id.as_str()) {
            report.push(
                ViolationKind::MissingPolicy,
                &p.id,
                "place with several continuous outputs needs a conflict policy",
            );
        }
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

fn optional_non_negative<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Option<f64>, D::Error> {
    non_negative(deserializer).map(Some)
}

fn positive<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
    let v = f64::deserialize(deserializer)?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(serde::de::Error::custom(format!("expected a positive number, got {v}")))
    }
}
