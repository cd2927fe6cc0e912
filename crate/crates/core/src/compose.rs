//! Building larger nets from smaller ones by disjoint union and fusion.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use thiserror::Error;

use crate::net::{
    validate, ArcDef, ConflictPolicy, HybridNet, Id, PlaceDef, PlaceKind, PolicyMode, ShareEntry,
    TransitionDef, TransitionKind, Violation,
};

/// `model.element`
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElementRef {
    pub model: Id,
    pub element: Id,
}

impl fmt::Display for ElementRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.model, self.element)
    }
}

impl FromStr for ElementRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (model, element) = s
            .split_once('.')
            .ok_or_else(|| format!("`{s}` is not of the form model.element"))?;
        Ok(ElementRef {
            model: Id::try_from(model.to_string())?,
            element: Id::try_from(element.to_string())?,
        })
    }
}

/// Two elements to merge into one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fusion {
    pub left: ElementRef,
    pub right: ElementRef,
}

impl Fusion {
    pub fn new(left: (&str, &str), right: (&str, &str)) -> Self {
        Fusion {
            left: ElementRef {
                model: left.0.into(),
                element: left.1.into(),
            },
            right: ElementRef {
                model: right.0.into(),
                element: right.1.into(),
            },
        }
    }
}

/// `a.P4=b.P5`
impl FromStr for Fusion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (left, right) = s
            .split_once('=')
            .ok_or_else(|| format!("`{s}` is not of the form a.X=b.Y"))?;
        Ok(Fusion {
            left: left.trim().parse()?,
            right: right.trim().parse()?,
        })
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ComposeError {
    #[error("cannot fuse `{left}` with `{right}`: element kinds differ")]
    FusionKindMismatch { left: ElementRef, right: ElementRef },
    #[error("unknown element `{0}`")]
    UnknownId(String),
    #[error("model name `{0}` appears twice")]
    DuplicateModel(Id),
    #[error("fused id `{0}` collides with another element")]
    IdCollision(Id),
    #[error("composed net is not valid ({} violations)", .0.len())]
    Invalid(Vec<Violation>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Shape {
    Place(crate::net::PlaceKind),
    Continuous,
    Discrete,
}

type Key = (usize, Id);

/// Disjoint union of `models` with the listed pairs merged.
///
/// Unfused elements are renamed `model.id`. A fused group takes the
/// unprefixed id of the left member of the first fusion that touched it.
/// Fused places add their initial markings; fused transitions keep the
/// parameters of that first member. Arcs that coincide after fusion are kept
/// once, and two priority policies landing on the same place are concatenated.
pub fn compose(models: &[HybridNet], fusions: &[Fusion]) -> Result<HybridNet, ComposeError> {
    let mut model_index = HashMap::new();
    for (i, m) in models.iter().enumerate() {
        if model_index.insert(m.name.clone(), i).is_some() {
            return Err(ComposeError::DuplicateModel(m.name.clone()));
        }
    }

    let shape_of = |key: &ElementRef| -> Result<(Key, Shape), ComposeError> {
        let &mi = model_index
            .get(&key.model)
            .ok_or_else(|| ComposeError::UnknownId(key.to_string()))?;
        let model = &models[mi];
        let shape = if let Some(p) = model.place(key.element.as_str()) {
            Shape::Place(p.kind)
        } else if let Some(t) = model.transition(key.element.as_str()) {
            if t.is_continuous() {
                Shape::Continuous
            } else {
                Shape::Discrete
            }
        } else {
            return Err(ComposeError::UnknownId(key.to_string()));
        };
        Ok(((mi, key.element.clone()), shape))
    };

    // Union-find over fused keys; the root carries the group's id.
    let mut parent: HashMap<Key, Key> = HashMap::new();
    let mut group_id: HashMap<Key, Id> = HashMap::new();
    fn find(parent: &mut HashMap<Key, Key>, k: &Key) -> Key {
        let mut cur = k.clone();
        while let Some(next) = parent.get(&cur) {
            if *next == cur {
                break;
            }
            cur = next.clone();
        }
        cur
    }
    for fusion in fusions {
        let (lk, ls) = shape_of(&fusion.left)?;
        let (rk, rs) = shape_of(&fusion.right)?;
        if ls != rs {
            return Err(ComposeError::FusionKindMismatch {
                left: fusion.left.clone(),
                right: fusion.right.clone(),
            });
        }
        for k in [&lk, &rk] {
            parent.entry(k.clone()).or_insert_with(|| k.clone());
        }
        let (lr, rr) = (find(&mut parent, &lk), find(&mut parent, &rk));
        if lr != rr {
            let id = group_id
                .get(&lr)
                .cloned()
                .unwrap_or_else(|| fusion.left.element.clone());
            group_id.remove(&rr);
            group_id.insert(lr.clone(), id);
            parent.insert(rr, lr);
        } else {
            group_id
                .entry(lr)
                .or_insert_with(|| fusion.left.element.clone());
        }
    }

    let keys: Vec<Key> = parent.keys().cloned().collect();
    let fused: HashMap<Key, Id> = keys
        .into_iter()
        .map(|k| {
            let root = find(&mut parent, &k);
            (k, group_id[&root].clone())
        })
        .collect();
    let rename = |mi: usize, id: &Id| -> Id {
        match fused.get(&(mi, id.clone())) {
            Some(group) => group.clone(),
            None => Id::new(format!("{}.{}", models[mi].name, id)),
        }
    };

    let name = models.iter().map(|m| m.name.as_str()).join("+");
    let mut net = HybridNet::new(if name.is_empty() { "composed" } else { &name });

    let mut places: BTreeMap<Id, PlaceDef> = BTreeMap::new();
    let mut transitions: BTreeMap<Id, TransitionDef> = BTreeMap::new();
    let mut origin: HashMap<Id, Key> = HashMap::new();
    for (mi, model) in models.iter().enumerate() {
        for p in &model.places {
            let id = rename(mi, &p.id);
            claim(&mut origin, &id, (mi, p.id.clone()), &fused)?;
            places
                .entry(id.clone())
                .and_modify(|existing| existing.initial += p.initial)
                .or_insert_with(|| PlaceDef { id, ..p.clone() });
        }
        for t in &model.transitions {
            let id = rename(mi, &t.id);
            claim(&mut origin, &id, (mi, t.id.clone()), &fused)?;
            transitions
                .entry(id.clone())
                .or_insert_with(|| TransitionDef { id, ..t.clone() });
        }
    }
    net.places = places.into_values().collect();
    net.transitions = transitions.into_values().collect();

    let mut arcs: BTreeMap<(Id, Id), f64> = BTreeMap::new();
    for (mi, model) in models.iter().enumerate() {
        for a in &model.arcs {
            arcs.entry((rename(mi, &a.from), rename(mi, &a.to)))
                .or_insert(a.weight);
        }
    }
    net.arcs = arcs
        .into_iter()
        .map(|((from, to), weight)| ArcDef { from, to, weight })
        .collect();

    let mut policies: BTreeMap<Id, ConflictPolicy> = BTreeMap::new();
    for (mi, model) in models.iter().enumerate() {
        for policy in &model.policies {
            let renamed = ConflictPolicy {
                place: rename(mi, &policy.place),
                mode: policy.mode,
                order: policy.order.iter().map(|t| rename(mi, t)).collect(),
                groups: policy
                    .groups
                    .iter()
                    .map(|g| {
                        g.iter()
                            .map(|e| ShareEntry {
                                id: rename(mi, &e.id),
                                weight: e.weight,
                            })
                            .collect()
                    })
                    .collect(),
            };
            match policies.get_mut(&renamed.place) {
                None => {
                    policies.insert(renamed.place.clone(), renamed);
                }
                Some(existing) => merge_policy(existing, renamed),
            }
        }
    }
    net.policies = policies.into_values().collect();

    // Fused outputs may leave a conflict place without a policy entry for
    // the other model's transitions; they go below the declared ones. A
    // fused place that had a single output on each side gets a priority
    // policy in model order.
    let unguarded = net
        .places
        .iter()
        .filter(|p| p.kind == PlaceKind::Continuous)
        .filter(|p| net.policies.iter().all(|c| c.place != p.id))
        .filter(|p| net.continuous_outputs(p.id.as_str()).len() > 1)
        .map(|p| p.id.clone())
        .collect_vec();
    for place in unguarded {
        net.policies.push(ConflictPolicy {
            place,
            mode: PolicyMode::Priority,
            order: Vec::new(),
            groups: Vec::new(),
        });
    }
    for policy in &mut net.policies {
        let outputs = net
            .arcs
            .iter()
            .filter(|a| a.from == policy.place)
            .filter(|a| {
                net.transitions
                    .iter()
                    .any(|t| t.id == a.to && matches!(t.kind, TransitionKind::Continuous { .. }))
            })
            .map(|a| a.to.clone())
            .unique()
            .collect_vec();
        let known = policy.members();
        let missing = outputs.into_iter().filter(|t| !known.contains(t)).collect_vec();
        if missing.is_empty() {
            continue;
        }
        if policy.mode == PolicyMode::Priority {
            policy.order.extend(missing);
        } else {
            let rest = ConflictPolicy {
                place: policy.place.clone(),
                mode: PolicyMode::Sharing,
                order: Vec::new(),
                groups: vec![missing.into_iter().map(|id| ShareEntry { id, weight: 1.0 }).collect()],
            };
            merge_policy(policy, rest);
        }
    }

    let validation = validate(&net);
    if validation.is_ok() {
        Ok(net)
    } else {
        Err(ComposeError::Invalid(validation.violations))
    }
}

fn claim(
    origin: &mut HashMap<Id, Key>,
    id: &Id,
    key: Key,
    fused: &HashMap<Key, Id>,
) -> Result<(), ComposeError> {
    match origin.get(id) {
        None => {
            origin.insert(id.clone(), key);
            Ok(())
        }
        Some(previous) if fused.contains_key(previous) && fused.contains_key(&key) => Ok(()),
        Some(_) => Err(ComposeError::IdCollision(id.clone())),
    }
}

fn merge_policy(existing: &mut ConflictPolicy, other: ConflictPolicy) {
    if existing.mode == PolicyMode::Priority && other.mode == PolicyMode::Priority {
        for t in other.order {
            if !existing.order.contains(&t) {
                existing.order.push(t);
            }
        }
        return;
    }
    // Mixed modes: keep the first policy's tiers and append the other's as
    // lower-priority groups.
    let mut groups: Vec<Vec<ShareEntry>> = existing
        .tiers()
        .into_iter()
        .map(|tier| tier.into_iter().map(|(id, weight)| ShareEntry { id, weight }).collect())
        .collect();
    let seen: Vec<Id> = existing.members();
    for tier in other.tiers() {
        let tier: Vec<ShareEntry> = tier
            .into_iter()
            .filter(|(id, _)| !seen.contains(id))
            .map(|(id, weight)| ShareEntry { id, weight })
            .collect();
        if !tier.is_empty() {
            groups.push(tier);
        }
    }
    existing.mode = PolicyMode::PriorityThenSharing;
    existing.order.clear();
    existing.groups = groups;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::MaxSpeed;

    fn one_place(name: &str, initial: f64) -> HybridNet {
        let mut net = HybridNet::new(name);
        net.places.push(PlaceDef::continuous("P", initial));
        net
    }

    #[test]
    fn identity_composition_prefixes_ids() {
        let mut n = one_place("n", 1.0);
        n.transitions.push(TransitionDef::continuous("T", MaxSpeed::Finite(1.0)));
        n.arcs.push(ArcDef::new("T", "P", 1.0));
        let c = compose(&[n], &[]).unwrap();
        assert_eq!(c.name.as_str(), "n");
        assert_eq!(c.places[0].id.as_str(), "n.P");
        assert_eq!(c.arcs[0].from.as_str(), "n.T");
    }

    #[test]
    fn fused_places_add_initials() {
        let c = compose(
            &[one_place("a", 2.0), one_place("b", 3.0)],
            &[Fusion::new(("a", "P"), ("b", "P"))],
        )
        .unwrap();
        assert_eq!(c.places.len(), 1);
        assert_eq!(c.places[0].id.as_str(), "P");
        assert_eq!(c.places[0].initial, 5.0);
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let mut b = HybridNet::new("b");
        b.places.push(PlaceDef::discrete("P", 1));
        let err = compose(&[one_place("a", 0.0), b], &[Fusion::new(("a", "P"), ("b", "P"))]);
        assert!(matches!(err, Err(ComposeError::FusionKindMismatch { .. })));
    }

    #[test]
    fn unknown_ids_are_reported() {
        let err = compose(&[one_place("a", 0.0)], &[Fusion::new(("a", "Q"), ("a", "P"))]);
        assert_eq!(err, Err(ComposeError::UnknownId("a.Q".into())));
        let err = compose(&[one_place("a", 0.0)], &[Fusion::new(("z", "P"), ("a", "P"))]);
        assert_eq!(err, Err(ComposeError::UnknownId("z.P".into())));
    }

    #[test]
    fn fusion_syntax_parses() {
        let f: Fusion = "west.P4=east.P5".parse().unwrap();
        assert_eq!(f, Fusion::new(("west", "P4"), ("east", "P5")));
        assert!("west.P4".parse::<Fusion>().is_err());
    }
}
