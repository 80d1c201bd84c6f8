use pldispatch::sim::{simulate, ServiceDistribution, SimConfig};
use pldispatch_core::scenario::{load_region, ArrivalCase, RewardCurve, ScenarioOptions};
use pldispatch_core::{closest_lists, evaluate_lists, make_scenario, CaseId, ModelKind, RegionId, Scenario};

fn config(replications: usize, horizon: f64) -> SimConfig {
    SimConfig { horizon, replications, ..SimConfig::default() }
}

#[test]
fn zero_rewards_give_zero() {
    let opts = ScenarioOptions {
        rewards: RewardCurve { breakpoints: vec![(0.0, 0.0), (3.0, 0.0)], low_level_factor: 0.0 },
        ..ScenarioOptions::default()
    };
    let sc =
        Scenario::new(load_region(RegionId::R1), ArrivalCase::builtin(RegionId::R1, CaseId::C1), 6.0, 3, opts).unwrap();
    let est = simulate(&sc, &closest_lists(&sc, ModelKind::PL), &config(4, 2_000.0)).unwrap();
    assert_eq!(est.mean, 0.0);
    assert_eq!(est.half_width, Some(0.0));
}

#[test]
fn light_traffic_loses_almost_nobody() {
    let sc = make_scenario(RegionId::R3, CaseId::C2, 0.01, 4).unwrap();
    let est = simulate(&sc, &closest_lists(&sc, ModelKind::PL), &config(10, 1e5)).unwrap();
    let arrivals: u64 = est.per_type.iter().map(|t| t.arrivals).sum();
    assert!(arrivals > 5_000);
    assert!(est.loss_fraction < 1e-3, "loss {}", est.loss_fraction);
    assert_eq!(est.idle_fraction, 0.0);
}

#[test]
fn same_seed_same_bits() {
    let sc = make_scenario(RegionId::R2, CaseId::C3, 9.0, 4).unwrap();
    let lists = closest_lists(&sc, ModelKind::PLI);
    let cfg = SimConfig { seed: 7, ..config(3, 5_000.0) };
    let a = simulate(&sc, &lists, &cfg).unwrap();
    let b = simulate(&sc, &lists, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    let c = simulate(&sc, &lists, &SimConfig { seed: 8, ..cfg }).unwrap();
    assert_ne!(a.mean, c.mean);
}

#[test]
fn estimate_brackets_the_exact_gain() {
    let sc = make_scenario(RegionId::R4, CaseId::C1, 12.0, 4).unwrap();
    let lists = closest_lists(&sc, ModelKind::PL);
    let exact = evaluate_lists(&sc, &lists).unwrap().per_time();
    let est = simulate(&sc, &lists, &config(20, 2e4)).unwrap();
    let h = est.half_width.unwrap();
    assert!((est.mean - exact).abs() <= 3.0 * h, "{} +/- {h} vs {exact}", est.mean);
}

#[test]
fn lognormal_service_shifts_little_at_unit_cv() {
    let sc = make_scenario(RegionId::R1, CaseId::C2, 6.0, 4).unwrap();
    let lists = closest_lists(&sc, ModelKind::PL);
    let exact = evaluate_lists(&sc, &lists).unwrap().per_time();
    let cfg = SimConfig { service: ServiceDistribution::Lognormal { cv: 1.0 }, ..config(10, 2e4) };
    let est = simulate(&sc, &lists, &cfg).unwrap();
    assert!((est.mean - exact).abs() / exact < 0.05, "{} vs {exact}", est.mean);
}
