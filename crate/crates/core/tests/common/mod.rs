#![allow(dead_code)]

use pldispatch_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exact B&B: no gap tolerance.
pub fn exact() -> BnbParams {
    BnbParams { abs_gap: 0.0, rel_gap: 0.0, ..BnbParams::default() }
}

/// A random small instance with `n` locations inside a 2 x 2 box.
pub fn tiny(seed: u64, m: usize, n: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)]).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let p: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let lambda = rng.random_range(1.0..12.0);
    let region = RegionMap::from_centers(None, centers).unwrap();
    let case = ArrivalCase::from_probabilities(None, p).unwrap();
    Scenario::new(region, case, lambda, m, ScenarioOptions::default()).unwrap()
}

pub fn random_lists(seed: u64, scenario: &Scenario, kind: ModelKind) -> PriorityLists {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lists = closest_lists(scenario, kind);
    for l in &mut lists.lists {
        l.shuffle(&mut rng);
    }
    lists
}
