use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{stationary, Policy};
use crate::mdp::{Action, MdpModel};
use crate::scenario::Scenario;
use crate::Result;

/// A location permutation preserving distances and arrival probabilities,
/// with the ambulance permutation it induces through home bases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Automorphism {
    /// Location `i` maps to `locations[i]`.
    pub locations: Vec<usize>,
    /// Ambulance `j` maps to `ambulances[j]`.
    pub ambulances: Vec<usize>,
}

fn index_permutations(k: usize) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..k).collect();
    let mut out = Vec::new();
    loop {
        out.push(idx.clone());
        let Some(a) = (1..k).rev().find(|&a| idx[a - 1] < idx[a]) else {
            return out;
        };
        let a = a - 1;
        let b = (a + 1..k).rev().find(|&b| idx[a] < idx[b]).unwrap();
        idx.swap(a, b);
        idx[a + 1..].reverse();
    }
}

/// All symmetries of the scenario, by brute force over location
/// permutations. The identity comes first.
pub fn region_automorphisms(scenario: &Scenario) -> Vec<Automorphism> {
    let n = scenario.n();
    let m = scenario.m;
    let mut out = Vec::new();
    for sigma in index_permutations(n) {
        let geometric = (0..n).all(|i| {
            (0..n).all(|k| (scenario.region.dist(sigma[i], sigma[k]) - scenario.region.dist(i, k)).abs() <= 1e-9)
        });
        let demand = (0..n).all(|i| (scenario.case.p[sigma[i]] - scenario.case.p[i]).abs() <= 1e-12);
        if !geometric || !demand {
            continue;
        }
        let mut taken = vec![false; m];
        let mut tau = Vec::with_capacity(m);
        for j in 0..m {
            let target = sigma[scenario.homes[j]];
            match (0..m).find(|&k| !taken[k] && scenario.homes[k] == target) {
                Some(k) => {
                    taken[k] = true;
                    tau.push(k);
                }
                None => break,
            }
        }
        if tau.len() == m {
            out.push(Automorphism { locations: sigma, ambulances: tau });
        }
    }
    out
}

/// Share of decision epochs on which two policies act alike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    /// `None` when no compared event-state carries weight.
    pub score: Option<f64>,
    pub total_weight: f64,
}

/// Compares `a` and `b` over arrival event-states with at least two
/// available actions, weighted by the stationary probability of those
/// event-states under `a` (or uniformly when `weighted` is false). Two
/// dispatches agree when equal or when a symmetry fixing the customer's
/// location maps one ambulance onto the other.
pub fn similarity(
    model: &MdpModel,
    a: &Policy,
    b: &Policy,
    automorphisms: &[Automorphism],
    weighted: bool,
) -> Result<Similarity> {
    let occ = if weighted { Some(stationary(model, &a.actions)?) } else { None };
    let mut total = 0.0;
    let mut agree = 0.0;
    let mut acts = Vec::new();
    for s in 0..model.space.len() {
        for t in 1..model.num_types() {
            model.action_set_into(s, t, &mut acts);
            if acts.len() < 2 {
                continue;
            }
            let w = occ.as_ref().map_or(1.0, |o| o.arrival_event(model, s, t));
            if w == 0.0 {
                continue;
            }
            let e = model.event_index(s, t);
            total += w;
            if equivalent(a.actions[e], b.actions[e], model.location(t), automorphisms) {
                agree += w;
            }
        }
    }
    Ok(Similarity { score: (total > 0.0).then(|| agree / total), total_weight: total })
}

fn equivalent(x: Action, y: Action, location: usize, automorphisms: &[Automorphism]) -> bool {
    if x == y {
        return true;
    }
    match (x, y) {
        (Action::Dispatch(j), Action::Dispatch(k)) => {
            automorphisms.iter().any(|g| g.locations[location] == location && g.ambulances[j] == k)
        }
        _ => false,
    }
}
