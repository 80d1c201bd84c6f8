//! Policies: extraction from occupation measures, exact evaluation,
//! heuristics, conformance to priority lists, symmetry and similarity.

mod conform;
mod search;
mod symmetry;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use conform::{conforms, ConformanceResult, TypeWitness};
pub use search::{
    enumerate_oracle, enumerate_oracle_capped, local_search, local_search_from, OracleResult, DEFAULT_ENUMERATION_CAP,
};
pub use symmetry::{region_automorphisms, similarity, Automorphism, Similarity};

use crate::formulations::{has_idle, ListEntry, MipProblem, PriorityLists};
use crate::mdp::{Action, MdpModel, ModelKind};
use crate::scenario::Scenario;
use crate::{Error, Result};

/// Where a policy entry came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// Supported by positive occupation mass.
    FromY,
    /// Filled from known priority lists.
    FromList,
    /// Filled with the lowest-index available ambulance.
    Default,
}

/// A deterministic decision rule over all event-states.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub kind: ModelKind,
    pub m: usize,
    pub n: usize,
    /// Action per event-state index.
    pub actions: Vec<Action>,
    pub provenance: Vec<Provenance>,
    /// Event-states whose occupation mass is split over several actions.
    pub randomized: Vec<usize>,
}

impl Policy {
    /// Policy induced by priority lists; every entry is `FromList`.
    pub fn from_lists(model: &MdpModel, lists: &PriorityLists) -> Policy {
        let actions = lists.policy_actions(model);
        Policy {
            kind: model.kind,
            m: model.m(),
            n: model.n(),
            provenance: vec![Provenance::FromList; actions.len()],
            actions,
            randomized: Vec::new(),
        }
    }
}

/// Reads a deterministic policy off an occupation measure `y` over the
/// problem's `y` columns. Event-states without mass are filled from
/// `lists` when given, otherwise with the lowest-index available ambulance.
pub fn extract_policy(problem: &MipProblem, y: &[f64], lists: Option<&PriorityLists>, tol: f64) -> Result<Policy> {
    if y.len() != problem.num_y() {
        return Err(Error::Contract(format!("expected {} occupation values, got {}", problem.num_y(), y.len())));
    }
    let model = &problem.model;
    let n_events = model.num_event_states();
    let mut actions = Vec::with_capacity(n_events);
    let mut provenance = Vec::with_capacity(n_events);
    let mut randomized = Vec::new();
    for e in 0..n_events {
        let cols = problem.event_start[e]..problem.event_start[e + 1];
        let mut best = cols.start;
        let mut support = 0;
        for k in cols.clone() {
            if y[k] > tol {
                support += 1;
            }
            if y[k] > y[best] {
                best = k;
            }
        }
        let (s, t) = model.split_event(e);
        if support > 0 {
            if support > 1 {
                randomized.push(e);
            }
            actions.push(problem.y_cols[best].action);
            provenance.push(Provenance::FromY);
        } else if let Some(l) = lists {
            actions.push(l.action(&model.space, s, t));
            provenance.push(Provenance::FromList);
        } else {
            let a = model.action_set(s, t).into_iter().find(|a| !matches!(a, Action::Idle)).unwrap_or(Action::Null);
            actions.push(a);
            provenance.push(Provenance::Default);
        }
    }
    Ok(Policy { kind: problem.kind, m: model.m(), n: model.n(), actions, provenance, randomized })
}

/// Long-run average reward of a policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gain {
    /// Average reward per uniformized stage.
    pub per_stage: f64,
    /// Uniformization rate; `per_stage * gamma` is reward per unit time.
    pub gamma: f64,
}

impl Gain {
    pub fn per_time(&self) -> f64 {
        self.per_stage * self.gamma
    }
}

/// Stationary behaviour of a deterministic policy.
#[derive(Debug, Clone)]
pub struct Stationary {
    /// Probability of each post-decision configuration at the start of a stage.
    pub configuration: Vec<f64>,
    pub gain: Gain,
}

impl Stationary {
    /// Stationary probability of arrival event-state `(s, t)`, `t >= 1`.
    pub fn arrival_event(&self, model: &MdpModel, s: usize, t: usize) -> f64 {
        self.configuration[s] * model.lambda_w[t] / model.gamma
    }
}

/// Solves for the stationary distribution of the configuration chain the
/// policy induces (configuration after each decision) and its gain. Dense
/// LU, so intended for the small configuration spaces of the library.
pub fn stationary(model: &MdpModel, actions: &[Action]) -> Result<Stationary> {
    let nc = model.space.len();
    let nt = model.num_types();
    if actions.len() != model.num_event_states() {
        return Err(Error::Contract(format!(
            "policy covers {} event-states, model has {}",
            actions.len(),
            model.num_event_states()
        )));
    }
    for (e, &a) in actions.iter().enumerate() {
        let (s, t) = model.split_event(e);
        if !model.action_set(s, t).contains(&a) {
            return Err(Error::Contract(format!("action {a} unavailable in event-state {e}")));
        }
    }
    // Row-stochastic P over configurations; solve (P^T - I) p = 0 with the
    // last equation replaced by sum(p) = 1.
    let mut a = DMatrix::<f64>::zeros(nc, nc);
    let mut next = Vec::new();
    for c in 0..nc {
        model.next_events(c, &mut next);
        for &(e, pr) in &next {
            let (s, t) = model.split_event(e);
            let c2 = model.post_decision(s, t, actions[e]);
            a[(c2, c)] += pr;
        }
        a[(c, c)] -= 1.0;
    }
    for c in 0..nc {
        a[(nc - 1, c)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(nc);
    b[nc - 1] = 1.0;
    let p = a.lu().solve(&b).ok_or_else(|| Error::Internal("stationary system is singular".into()))?;
    let configuration: Vec<f64> = p.iter().copied().collect();
    let mut per_stage = 0.0;
    for (s, &ps) in configuration.iter().enumerate() {
        if ps == 0.0 {
            continue;
        }
        for t in 1..nt {
            let e = model.event_index(s, t);
            per_stage += ps * model.lambda_w[t] / model.gamma * model.reward(t, actions[e]);
        }
    }
    Ok(Stationary { configuration, gain: Gain { per_stage, gamma: model.gamma } })
}

/// Exact gain of the policy induced by `lists`. Lists typed for PLI allow
/// idling on low-level types; other lists are evaluated without idling.
pub fn evaluate_lists(scenario: &Scenario, lists: &PriorityLists) -> Result<Gain> {
    let kind = if lists.kind == ModelKind::PLI { ModelKind::PLI } else { ModelKind::PL };
    lists.validate()?;
    if lists.m != scenario.m || lists.n != scenario.n() {
        return Err(Error::Input(format!(
            "lists for m={}, n={} do not fit scenario {} (m={}, n={})",
            lists.m,
            lists.n,
            scenario.id,
            scenario.m,
            scenario.n()
        )));
    }
    let model = MdpModel::new(scenario, kind)?;
    evaluate_on(&model, lists)
}

pub(crate) fn evaluate_on(model: &MdpModel, lists: &PriorityLists) -> Result<Gain> {
    Ok(stationary(model, &lists.policy_actions(model))?.gain)
}

/// Closest-ambulance lists: ambulances by distance from home to the
/// customer's location, ties by lower id. Under PLI, low-level lists end
/// with `Idle`.
pub fn closest_lists(scenario: &Scenario, kind: ModelKind) -> PriorityLists {
    let (m, n) = (scenario.m, scenario.n());
    let lists = (1..=2 * n)
        .map(|t| {
            let i = (t - 1) % n;
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| scenario.travel(a, i).partial_cmp(&scenario.travel(b, i)).unwrap().then(a.cmp(&b)));
            let mut list: Vec<ListEntry> = order.into_iter().map(ListEntry::Ambulance).collect();
            if has_idle(kind, n, t) {
                list.push(ListEntry::Idle);
            }
            list
        })
        .collect();
    let kind = if kind == ModelKind::U { ModelKind::PL } else { kind };
    PriorityLists { kind, m, n, lists }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{make_scenario, ArrivalCase, RegionId, RegionMap, Scenario, ScenarioOptions};
    use ListEntry::Ambulance as A;

    fn single(lambda: f64) -> Scenario {
        let region = RegionMap::from_centers(None, vec![[0.5, 0.5]]).unwrap();
        let opts = ScenarioOptions { time_scale: 1.0, ..ScenarioOptions::default() };
        Scenario::new(region, ArrivalCase::from_probabilities(None, vec![1.0]).unwrap(), lambda, 1, opts).unwrap()
    }

    #[test]
    fn single_ambulance_hand_solution() {
        // Free with prob 1/(1 + 12 lambda) in continuous time; per stage the
        // reward rate lambda * (1 * 1/2 + 1/8 * 1/2) * P(free) is divided by gamma.
        let sc = single(3.0);
        let lists = PriorityLists::new(ModelKind::PL, 1, 1, vec![vec![A(0)], vec![A(0)]]).unwrap();
        let g = evaluate_lists(&sc, &lists).unwrap();
        let gamma = 3.0 + 1.0 / 12.0;
        let p_free = 1.0 / (1.0 + 12.0 * 3.0);
        let expect = 3.0 * (0.5 + 0.0625) * p_free / gamma;
        assert!((g.per_stage - expect).abs() < 1e-12, "{} vs {expect}", g.per_stage);
        assert!((g.gamma - gamma).abs() < 1e-12);
    }

    #[test]
    fn zero_rewards_give_zero_gain() {
        let mut sc = make_scenario(RegionId::R1, crate::scenario::CaseId::C1, 6.0, 2).unwrap();
        sc.rewards.breakpoints = vec![(0.0, 0.0), (3.0, 0.0)];
        let g = evaluate_lists(&sc, &closest_lists(&sc, ModelKind::PL)).unwrap();
        assert_eq!(g.per_stage, 0.0);
    }

    #[test]
    fn closest_examples() {
        let r1 = make_scenario(RegionId::R1, crate::scenario::CaseId::C1, 3.0, 4).unwrap();
        assert_eq!(closest_lists(&r1, ModelKind::PL).lists[0], vec![A(0), A(1), A(2), A(3)]);
        let r2 = make_scenario(RegionId::R2, crate::scenario::CaseId::C1, 3.0, 4).unwrap();
        assert_eq!(closest_lists(&r2, ModelKind::PL).lists[0], vec![A(0), A(1), A(2), A(3)]);
        let pli = closest_lists(&r2, ModelKind::PLI);
        assert_eq!(pli.lists[4].last(), Some(&ListEntry::Idle));
        assert_eq!(pli.lists[0].len(), 4);
        for (k, l) in pli.lists.iter().enumerate() {
            assert_eq!(l[0], A(k % 4));
        }
    }
}
