use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Policy, Provenance};
use crate::formulations::action_universe_index as action_universe;
use crate::formulations::{has_idle, ListEntry, PriorityLists};
use crate::mdp::MdpModel;

/// Per-type evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TypeWitness {
    /// A total order consistent with every revealed preference.
    Order(Vec<ListEntry>),
    /// A preference cycle `a -> b -> ... -> a`.
    Cycle(Vec<ListEntry>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceResult {
    pub conforms: bool,
    /// Witness per arrival type (index `t - 1`).
    pub witnesses: Vec<TypeWitness>,
    /// Event-states whose occupation mass is randomized.
    pub randomized: Vec<usize>,
}

impl ConformanceResult {
    /// The witness orders as lists, when the policy conforms.
    pub fn lists(&self, policy: &Policy) -> Option<PriorityLists> {
        if !self.conforms {
            return None;
        }
        let lists = self
            .witnesses
            .iter()
            .map(|w| match w {
                TypeWitness::Order(o) => o.clone(),
                TypeWitness::Cycle(_) => unreachable!(),
            })
            .collect();
        Some(PriorityLists { kind: list_kind(policy), m: policy.m, n: policy.n, lists })
    }
}

fn list_kind(policy: &Policy) -> crate::mdp::ModelKind {
    use crate::mdp::ModelKind;
    if policy.kind == ModelKind::PLI {
        ModelKind::PLI
    } else {
        ModelKind::PL
    }
}

/// Tests whether the revealed preferences of a policy extend to priority
/// lists. Evidence comes only from `FromY` entries in event-states with at
/// least two available actions: the chosen action dominates every other
/// available one.
pub fn conforms(model: &MdpModel, policy: &Policy) -> ConformanceResult {
    let n = model.n();
    let mut witnesses = Vec::with_capacity(2 * n);
    let mut acyclic = true;
    let mut acts = Vec::new();
    for t in 1..model.num_types() {
        let idle = has_idle(policy.kind, n, t);
        let size = model.m() + usize::from(idle);
        let mut edges: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); size];
        for s in 0..model.space.len() {
            let e = model.event_index(s, t);
            if policy.provenance[e] != Provenance::FromY {
                continue;
            }
            model.action_set_into(s, t, &mut acts);
            if acts.len() < 2 {
                continue;
            }
            let chosen = action_universe(policy.actions[e], idle);
            for &a in &acts {
                let u = action_universe(a, idle);
                if u != chosen {
                    edges[chosen].insert(u);
                }
            }
        }
        match topo_order(&edges) {
            Ok(order) => witnesses
                .push(TypeWitness::Order(order.into_iter().map(|u| ListEntry::from_universe_index(u, idle)).collect())),
            Err(cycle) => {
                acyclic = false;
                witnesses.push(TypeWitness::Cycle(
                    cycle.into_iter().map(|u| ListEntry::from_universe_index(u, idle)).collect(),
                ));
            }
        }
    }
    ConformanceResult {
        conforms: acyclic && policy.randomized.is_empty(),
        witnesses,
        randomized: policy.randomized.clone(),
    }
}

/// Kahn's algorithm taking the lowest available node first; on failure
/// returns a directed cycle.
fn topo_order(edges: &[BTreeSet<usize>]) -> Result<Vec<usize>, Vec<usize>> {
    let k = edges.len();
    let mut indeg = vec![0usize; k];
    for out in edges {
        for &v in out {
            indeg[v] += 1;
        }
    }
    let mut ready: BTreeSet<usize> = (0..k).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(k);
    while let Some(&v) = ready.iter().next() {
        ready.remove(&v);
        order.push(v);
        for &w in &edges[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.insert(w);
            }
        }
    }
    if order.len() == k {
        return Ok(order);
    }
    // Every remaining node has a remaining predecessor: walk backwards.
    let remaining: Vec<bool> = (0..k).map(|v| indeg[v] > 0).collect();
    let pred = |v: usize| (0..k).find(|&u| remaining[u] && edges[u].contains(&v)).unwrap();
    let mut seen = vec![usize::MAX; k];
    let mut path = Vec::new();
    let mut v = (0..k).find(|&v| remaining[v]).unwrap();
    while seen[v] == usize::MAX {
        seen[v] = path.len();
        path.push(v);
        v = pred(v);
    }
    let mut cycle: Vec<usize> = path[seen[v]..].to_vec();
    cycle.reverse();
    Err(cycle)
}
