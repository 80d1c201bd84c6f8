mod common;

use common::{exact, random_lists, tiny};
use pldispatch_core::*;

#[test]
fn mip_matches_enumeration_on_tiny_instances() {
    for seed in 0..24u64 {
        let m = if seed % 2 == 0 { 2 } else { 3 };
        let sc = tiny(seed, m, 2);
        let oracle = enumerate_oracle(&sc, ModelKind::PL).unwrap();
        let expected = if m == 2 { 16 } else { 1296 };
        assert_eq!(oracle.evaluated, expected);
        let report = solve_mip(&build_model(&sc, ModelKind::PL).unwrap(), &exact()).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        assert!(
            (report.objective - oracle.gain.per_stage).abs() <= 1e-8,
            "seed {seed}: mip {} oracle {}",
            report.objective,
            oracle.gain.per_stage
        );
        let lists = report.lists.unwrap();
        let g = evaluate_lists(&sc, &lists).unwrap();
        assert!((g.per_stage - report.objective).abs() <= 1e-8);
    }
}

#[test]
fn idling_mip_matches_enumeration() {
    for seed in 100..106u64 {
        let sc = tiny(seed, 2, 2);
        let oracle = enumerate_oracle(&sc, ModelKind::PLI).unwrap();
        assert_eq!(oracle.evaluated, 4 * 36);
        let report = solve_mip(&build_model(&sc, ModelKind::PLI).unwrap(), &exact()).unwrap();
        assert!(
            (report.objective - oracle.gain.per_stage).abs() <= 1e-8,
            "seed {seed}: mip {} oracle {}",
            report.objective,
            oracle.gain.per_stage
        );
    }
}

#[test]
fn fixed_list_lp_agrees_with_direct_evaluation() {
    for seed in 0..6u64 {
        let sc = tiny(seed + 40, 3, 2);
        for kind in [ModelKind::PL, ModelKind::PLI] {
            let problem = build_model(&sc, kind).unwrap();
            let lists = random_lists(seed, &sc, kind);
            let fixed = fix_lists(&problem, &lists).unwrap();
            let lp = solve_lp(&fixed.lp, &SimplexParams::default()).unwrap();
            assert_eq!(lp.status, SimplexStatus::Optimal);
            let direct = evaluate_lists(&sc, &lists).unwrap();
            assert!((lp.objective - direct.per_stage).abs() <= 1e-8, "{} vs {}", lp.objective, direct.per_stage);
            let via_mip = solve_mip(&fixed, &BnbParams::default()).unwrap();
            assert_eq!(via_mip.nodes, 1);
            assert!((via_mip.objective - direct.per_stage).abs() <= 1e-8);
        }
    }
}

#[test]
fn unrestricted_dominates_every_fixed_list() {
    let sc = make_scenario(RegionId::R1, CaseId::C1, 3.0, 4).unwrap();
    let u = solve_mip(&build_model(&sc, ModelKind::U).unwrap(), &BnbParams::default()).unwrap();
    let problem = build_model(&sc, ModelKind::U).unwrap();
    let (flow, norm) = problem.flow_residual(&u.y_dense(&problem));
    assert!(flow <= 1e-7 && norm <= 1e-9);
    for seed in 0..10u64 {
        let lists = random_lists(seed, &sc, ModelKind::PL);
        let g = evaluate_lists(&sc, &lists).unwrap();
        assert!(u.objective >= g.per_stage - 1e-9);
    }
}

#[test]
fn extracted_policy_follows_the_optimal_lists() {
    let sc = tiny(7, 3, 2);
    let problem = build_model(&sc, ModelKind::PL).unwrap();
    let report = solve_mip(&problem, &exact()).unwrap();
    let lists = report.lists.clone().unwrap();
    let policy = extract_policy(&problem, &report.y_dense(&problem), Some(&lists), 1e-9).unwrap();
    let prescribed = lists.policy_actions(&problem.model);
    let mut from_y = 0;
    for e in 0..policy.actions.len() {
        if policy.provenance[e] == Provenance::FromY {
            from_y += 1;
            assert_eq!(policy.actions[e], prescribed[e], "event-state {e}");
        }
    }
    assert!(from_y > 0);
    let verdict = conforms(&problem.model, &policy);
    assert!(verdict.conforms);
    let witness = verdict.lists(&policy).unwrap();
    let g = evaluate_lists(&sc, &witness).unwrap();
    assert!((g.per_stage - report.objective).abs() <= 1e-8);
}

#[test]
fn conforming_unrestricted_optimum_is_reached_by_lists() {
    let mut hits = 0;
    for seed in 0..12u64 {
        let sc = tiny(seed + 200, 3, 2);
        let u_problem = build_model(&sc, ModelKind::U).unwrap();
        let u = solve_mip(&u_problem, &BnbParams::default()).unwrap();
        let policy = extract_policy(&u_problem, &u.y_dense(&u_problem), None, 1e-9).unwrap();
        let verdict = conforms(&u_problem.model, &policy);
        let pl = solve_mip(&build_model(&sc, ModelKind::PL).unwrap(), &exact()).unwrap();
        assert!(u.objective >= pl.objective - 1e-9);
        if verdict.conforms {
            hits += 1;
            assert!((u.objective - pl.objective).abs() <= 1e-7, "seed {seed}");
            let g = evaluate_lists(&sc, &verdict.lists(&policy).unwrap()).unwrap();
            assert!((g.per_stage - u.objective).abs() <= 1e-8, "seed {seed}");
        }
    }
    assert!(hits > 0);
}

#[test]
fn local_search_is_sandwiched() {
    for seed in 0..5u64 {
        let sc = tiny(seed + 300, 3, 2);
        let pl = solve_mip(&build_model(&sc, ModelKind::PL).unwrap(), &exact()).unwrap();
        let closest = evaluate_lists(&sc, &closest_lists(&sc, ModelKind::PL)).unwrap();
        let (_, found) = local_search(&sc, ModelKind::PL, seed).unwrap();
        assert!(found.per_stage >= closest.per_stage - 1e-12);
        assert!(found.per_stage <= pl.objective + 1e-9);
        let (again, g) = local_search_from(&sc, pl.lists.clone().unwrap()).unwrap();
        assert_eq!(again, pl.lists.clone().unwrap());
        assert!((g.per_stage - pl.objective).abs() <= 1e-9);
    }
}

#[test]
fn interchangeable_ambulances_give_several_maximizers() {
    // Ambulances 1 and 3 share a home, so swapping them in every list is
    // a symmetry of the problem.
    let sc = tiny(11, 3, 2);
    assert_eq!(sc.homes[0], sc.homes[2]);
    let oracle = enumerate_oracle(&sc, ModelKind::PL).unwrap();
    assert!(oracle.maximizers >= 2, "{}", oracle.maximizers);
}

#[test]
fn enumeration_cap_is_enforced() {
    let sc = make_scenario(RegionId::R5, CaseId::C2, 9.0, 4).unwrap();
    match enumerate_oracle(&sc, ModelKind::PL) {
        Err(Error::Resource { required, cap, .. }) => {
            assert_eq!(cap, DEFAULT_ENUMERATION_CAP);
            assert_eq!(required, 24u64.pow(8));
        }
        other => panic!("expected a resource error, got {other:?}"),
    }
}

#[test]
fn reference_scale_example() {
    // Restricting to lists costs little on the concentrated R5/C2 case.
    let sc = make_scenario(RegionId::R5, CaseId::C2, 9.0, 4).unwrap();
    let u = solve_mip(&build_model(&sc, ModelKind::U).unwrap(), &BnbParams::default()).unwrap();
    let pl = solve_mip(&build_model(&sc, ModelKind::PL).unwrap(), &BnbParams::default()).unwrap();
    assert!(pl.objective <= u.objective + 1e-9);
    assert!((u.objective - pl.objective) / u.objective <= 0.0066);
    let g = evaluate_lists(&sc, pl.lists.as_ref().unwrap()).unwrap();
    assert!((g.per_stage - pl.objective).abs() <= 1e-8);
}
