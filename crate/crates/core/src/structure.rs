//! Index-based view of a net used by the solver, the simulator and the
//! oracle. Places and transitions are stored sorted by id so that index
//! order is lexicographic order.

use std::collections::{BTreeSet, HashMap};

use crate::net::{HybridNet, Id, PlaceKind, TransitionKind};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub(crate) enum TransKind<S> {
    Continuous { bound: Option<S> },
    Discrete { delay: S },
}

#[derive(Clone, Debug)]
pub(crate) struct Structure<S> {
    pub place_ids: Vec<Id>,
    pub place_kind: Vec<PlaceKind>,
    pub place_index: HashMap<Id, usize>,
    pub trans_ids: Vec<Id>,
    pub trans_kind: Vec<TransKind<S>>,
    pub trans_index: HashMap<Id, usize>,
    /// Input places of each transition with arc weights.
    pub pre: Vec<Vec<(usize, S)>>,
    /// Output places of each transition with arc weights.
    pub post: Vec<Vec<(usize, S)>>,
    /// Continuous transitions producing into each place.
    pub inflow: Vec<Vec<(usize, S)>>,
    /// Continuous transitions consuming from each place.
    pub outflow: Vec<Vec<(usize, S)>>,
    /// Per place: allocation tiers in decreasing priority, members with share weights.
    pub tiers: Vec<Vec<Vec<(usize, S)>>>,
    /// Continuous places with continuous outputs, topological then lexicographic.
    pub order: Vec<usize>,
}

impl<S: Scalar> Structure<S> {
    /// Builds the indexed view. Elements that do not resolve are skipped;
    /// callers are expected to have validated the net.
    pub fn build(net: &HybridNet) -> Self {
        let mut places: Vec<_> = net.places.iter().collect();
        places.sort_by(|a, b| a.id.cmp(&b.id));
        let mut transitions: Vec<_> = net.transitions.iter().collect();
        transitions.sort_by(|a, b| a.id.cmp(&b.id));

        let place_ids: Vec<Id> = places.iter().map(|p| p.id.clone()).collect();
        let place_kind: Vec<PlaceKind> = places.iter().map(|p| p.kind).collect();
        let place_index: HashMap<Id, usize> =
            place_ids.iter().cloned().enumerate().map(|(i, id)| (id, i)).collect();
        let trans_ids: Vec<Id> = transitions.iter().map(|t| t.id.clone()).collect();
        let trans_kind: Vec<TransKind<S>> = transitions
            .iter()
            .map(|t| match t.kind {
                TransitionKind::Continuous { max_speed } => TransKind::Continuous {
                    bound: max_speed.finite().map(S::from_f64),
                },
                TransitionKind::DiscreteTimed { delay } => TransKind::Discrete {
                    delay: S::from_f64(delay),
                },
            })
            .collect();
        let trans_index: HashMap<Id, usize> =
            trans_ids.iter().cloned().enumerate().map(|(i, id)| (id, i)).collect();

        let np = place_ids.len();
        let nt = trans_ids.len();
        let mut pre = vec![Vec::new(); nt];
        let mut post = vec![Vec::new(); nt];
        let mut inflow = vec![Vec::new(); np];
        let mut outflow = vec![Vec::new(); np];
        for arc in &net.arcs {
            let w = S::from_f64(arc.weight);
            if let (Some(&p), Some(&t)) = (place_index.get(&arc.from), trans_index.get(&arc.to)) {
                pre[t].push((p, w.clone()));
                if matches!(trans_kind[t], TransKind::Continuous { .. }) {
                    outflow[p].push((t, w));
                }
            } else if let (Some(&t), Some(&p)) =
                (trans_index.get(&arc.from), place_index.get(&arc.to))
            {
                post[t].push((p, w.clone()));
                if matches!(trans_kind[t], TransKind::Continuous { .. }) {
                    inflow[p].push((t, w));
                }
            }
        }
        for list in pre.iter_mut().chain(post.iter_mut()) {
            list.sort_by_key(|(i, _)| *i);
        }
        for list in inflow.iter_mut().chain(outflow.iter_mut()) {
            list.sort_by_key(|(i, _)| *i);
        }

        let mut tiers = vec![Vec::new(); np];
        for (p, slot) in tiers.iter_mut().enumerate() {
            if place_kind[p] != PlaceKind::Continuous || outflow[p].is_empty() {
                continue;
            }
            *slot = match net.policy(place_ids[p].as_str()) {
                Some(policy) => policy
                    .tiers()
                    .into_iter()
                    .map(|tier| {
                        tier.into_iter()
                            .filter_map(|(id, share)| {
                                trans_index.get(&id).map(|&t| (t, S::from_f64(share)))
                            })
                            .collect::<Vec<_>>()
                    })
                    .filter(|tier| !tier.is_empty())
                    .collect(),
                // A single output, or an unvalidated net: lexicographic priority.
                None => outflow[p].iter().map(|(t, _)| vec![(*t, S::one())]).collect(),
            };
        }

        let order = topological_order(&place_kind, &pre, &post, &trans_kind, &outflow);

        Structure {
            place_ids,
            place_kind,
            place_index,
            trans_ids,
            trans_kind,
            trans_index,
            pre,
            post,
            inflow,
            outflow,
            tiers,
            order,
        }
    }

    pub fn is_continuous_place(&self, p: usize) -> bool {
        self.place_kind[p] == PlaceKind::Continuous
    }

    pub fn is_continuous_transition(&self, t: usize) -> bool {
        matches!(self.trans_kind[t], TransKind::Continuous { .. })
    }

    /// Maximal speeds as declared by the net (`None` = unbounded).
    pub fn declared_bounds(&self) -> Vec<Option<S>> {
        self.trans_kind
            .iter()
            .map(|k| match k {
                TransKind::Continuous { bound } => bound.clone(),
                TransKind::Discrete { .. } => Some(S::zero()),
            })
            .collect()
    }

    /// Weighted continuous inflow of place `p` under `speeds`.
    pub fn inflow_rate(&self, p: usize, speeds: &[S]) -> S {
        self.inflow[p]
            .iter()
            .fold(S::zero(), |acc, (t, w)| acc + w.clone() * speeds[*t].clone())
    }

    /// dm/dt of every continuous place; zero for discrete places.
    pub fn balances(&self, speeds: &[S]) -> Vec<S> {
        (0..self.place_ids.len())
            .map(|p| {
                if !self.is_continuous_place(p) {
                    return S::zero();
                }
                let out = self.outflow[p]
                    .iter()
                    .fold(S::zero(), |acc, (t, w)| acc + w.clone() * speeds[*t].clone());
                self.inflow_rate(p, speeds) - out
            })
            .collect()
    }

    /// Enabling of a discrete transition: every input place holds at least the arc weight.
    pub fn discrete_enabled(&self, t: usize, marking: &[S]) -> bool {
        self.pre[t].iter().all(|(p, w)| marking[*p] >= *w)
    }
}

/// Kahn's algorithm over the continuous-place graph (p -> q when a continuous
/// transition consumes p and produces q); ready places are taken in index
/// order, and places on cycles are appended in index order.
fn topological_order<S>(
    kinds: &[PlaceKind],
    pre: &[Vec<(usize, S)>],
    post: &[Vec<(usize, S)>],
    trans_kind: &[TransKind<S>],
    outflow: &[Vec<(usize, S)>],
) -> Vec<usize> {
    let np = kinds.len();
    let continuous = |p: usize| kinds[p] == PlaceKind::Continuous;
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); np];
    for (t, kind) in trans_kind.iter().enumerate() {
        if !matches!(kind, TransKind::Continuous { .. }) {
            continue;
        }
        for (p, _) in pre[t].iter().filter(|(p, _)| continuous(*p)) {
            for (q, _) in post[t].iter().filter(|(q, _)| continuous(*q)) {
                if p != q {
                    succ[*p].insert(*q);
                }
            }
        }
    }
    let mut indegree = vec![0usize; np];
    for edges in &succ {
        for &q in edges {
            indegree[q] += 1;
        }
    }
    let mut ready: BTreeSet<usize> = (0..np).filter(|&p| continuous(p) && indegree[p] == 0).collect();
    let mut sorted = Vec::with_capacity(np);
    let mut done = vec![false; np];
    while let Some(p) = ready.pop_first() {
        sorted.push(p);
        done[p] = true;
        for &q in &succ[p] {
            indegree[q] -= 1;
            if indegree[q] == 0 {
                ready.insert(q);
            }
        }
    }
    sorted.extend((0..np).filter(|&p| continuous(p) && !done[p]));
    sorted.retain(|&p| !outflow[p].is_empty());
    sorted
}
