use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{closest_lists, evaluate_on, Gain};
use crate::formulations::{has_idle, ListEntry, PriorityLists};
use crate::mdp::{MdpModel, ModelKind};
use crate::scenario::Scenario;
use crate::{Error, Result};

/// Default cap on the number of list combinations enumerated.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

const RANDOM_RESTARTS: usize = 3;

fn lists_kind(kind: ModelKind) -> ModelKind {
    if kind == ModelKind::PLI {
        ModelKind::PLI
    } else {
        ModelKind::PL
    }
}

fn universe(kind: ModelKind, m: usize, n: usize, t: usize) -> Vec<ListEntry> {
    let idle = has_idle(kind, n, t);
    (0..m + usize::from(idle)).map(|u| ListEntry::from_universe_index(u, idle)).collect()
}

/// All permutations of `items` in lexicographic order of positions.
fn permutations(items: &[ListEntry]) -> Vec<Vec<ListEntry>> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    let mut out = Vec::new();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let Some(k) = (1..idx.len()).rev().find(|&k| idx[k - 1] < idx[k]) else {
            return out;
        };
        let k = k - 1;
        let l = (k + 1..idx.len()).rev().find(|&l| idx[k] < idx[l]).unwrap();
        idx.swap(k, l);
        idx[k + 1..].reverse();
    }
}

/// Exhaustive maximization over all list combinations.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub lists: PriorityLists,
    pub gain: Gain,
    pub evaluated: u64,
    /// Combinations whose gain ties the maximum within 1e-12.
    pub maximizers: u64,
}

pub fn enumerate_oracle(scenario: &Scenario, kind: ModelKind) -> Result<OracleResult> {
    enumerate_oracle_capped(scenario, kind, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_oracle_capped(scenario: &Scenario, kind: ModelKind, cap: u64) -> Result<OracleResult> {
    let kind = lists_kind(kind);
    let (m, n) = (scenario.m, scenario.n());
    let per_type: Vec<Vec<Vec<ListEntry>>> = (1..=2 * n).map(|t| permutations(&universe(kind, m, n, t))).collect();
    let total = per_type.iter().try_fold(1u64, |acc, p| acc.checked_mul(p.len() as u64)).unwrap_or(u64::MAX);
    if total > cap {
        return Err(Error::Resource { what: "list enumeration", required: total, cap });
    }
    let model = MdpModel::new(scenario, kind)?;
    let mut digits = alloc::vec![0usize; per_type.len()];
    let mut gains = Vec::with_capacity(total as usize);
    let mut best: Option<(PriorityLists, Gain)> = None;
    for _ in 0..total {
        let lists = PriorityLists {
            kind,
            m,
            n,
            lists: digits.iter().enumerate().map(|(k, &d)| per_type[k][d].clone()).collect(),
        };
        let g = evaluate_on(&model, &lists)?;
        gains.push(g.per_stage);
        if best.as_ref().map_or(true, |b| g.per_stage > b.1.per_stage) {
            best = Some((lists, g));
        }
        for k in (0..digits.len()).rev() {
            digits[k] += 1;
            if digits[k] < per_type[k].len() {
                break;
            }
            digits[k] = 0;
        }
    }
    let (lists, gain) = best.expect("at least one combination");
    let maximizers = gains.iter().filter(|&&g| gain.per_stage - g <= 1e-12).count() as u64;
    Ok(OracleResult { lists, gain, evaluated: total, maximizers })
}

/// First-improvement hill climbing over adjacent transpositions, started
/// from the closest-ambulance lists and then from random lists.
pub fn local_search(scenario: &Scenario, kind: ModelKind, seed: u64) -> Result<(PriorityLists, Gain)> {
    let kind = lists_kind(kind);
    let model = MdpModel::new(scenario, kind)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = alloc::vec![closest_lists(scenario, kind)];
    for _ in 0..RANDOM_RESTARTS {
        let mut l = starts[0].clone();
        for list in &mut l.lists {
            list.shuffle(&mut rng);
        }
        starts.push(l);
    }
    let mut best: Option<(PriorityLists, Gain)> = None;
    for start in starts {
        let (l, g) = climb(&model, start)?;
        if best.as_ref().map_or(true, |b| g.per_stage > b.1.per_stage) {
            best = Some((l, g));
        }
    }
    Ok(best.unwrap())
}

/// Hill climbing from the given lists only.
pub fn local_search_from(scenario: &Scenario, start: PriorityLists) -> Result<(PriorityLists, Gain)> {
    start.validate()?;
    let model = MdpModel::new(scenario, lists_kind(start.kind))?;
    climb(&model, start)
}

/// Hill climbing from `start` on a prepared model.
pub(crate) fn climb(model: &MdpModel, start: PriorityLists) -> Result<(PriorityLists, Gain)> {
    let mut cur = start;
    let mut g = evaluate_on(model, &cur)?;
    'outer: loop {
        for k in 0..cur.lists.len() {
            for p in 0..cur.lists[k].len() - 1 {
                let mut cand = cur.clone();
                cand.lists[k].swap(p, p + 1);
                let cg = evaluate_on(model, &cand)?;
                if cg.per_stage > g.per_stage + 1e-12 {
                    cur = cand;
                    g = cg;
                    continue 'outer;
                }
            }
        }
        return Ok((cur, g));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ListEntry::Ambulance as A;

    #[test]
    fn permutation_counts() {
        let p = permutations(&[A(0), A(1), A(2)]);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], alloc::vec![A(0), A(1), A(2)]);
        assert_eq!(p[5], alloc::vec![A(2), A(1), A(0)]);
        assert_eq!(permutations(&[A(0), A(1), A(2), A(3)]).len(), 24);
    }
}
