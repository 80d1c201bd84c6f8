mod common;

use common::{exact, random_lists, tiny};
use pldispatch_core::*;
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn list_binaries_round_trip(seed in any::<u64>(), m in 2usize..5, idle in any::<bool>()) {
        let sc = tiny(seed, m, 2);
        let kind = if idle { ModelKind::PLI } else { ModelKind::PL };
        let problem = build_model(&sc, kind).unwrap();
        let lists = random_lists(seed, &sc, kind);
        let z = problem.z_values(&lists);
        prop_assert_eq!(extract_lists(&problem, &z).unwrap(), lists.clone());
        let fixed = fix_lists(&problem, &lists).unwrap();
        let n_y = problem.num_y();
        prop_assert_eq!(extract_lists(&fixed, &fixed.lp.col_lb[n_y..]).unwrap(), lists);
    }

    #[test]
    fn fixed_lists_leave_one_action_per_event_state(seed in any::<u64>(), idle in any::<bool>()) {
        let sc = tiny(seed, 3, 2);
        let kind = if idle { ModelKind::PLI } else { ModelKind::PL };
        let problem = build_model(&sc, kind).unwrap();
        let fixed = fix_lists(&problem, &random_lists(seed ^ 1, &sc, kind)).unwrap();
        for e in 0..problem.model.num_event_states() {
            let cols = problem.event_start[e]..problem.event_start[e + 1];
            let open = cols.clone().filter(|&c| fixed.lp.col_ub[c] > 0.0).count();
            prop_assert!(open == 1 || cols.len() < 2);
        }
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn objective_ordering_chain(seed in any::<u64>()) {
        let sc = tiny(seed, 3, 2);
        let u = solve_mip(&build_model(&sc, ModelKind::U).unwrap(), &BnbParams::default()).unwrap();
        let pl = solve_mip(&build_model(&sc, ModelKind::PL).unwrap(), &exact()).unwrap();
        let pli = solve_mip(&build_model(&sc, ModelKind::PLI).unwrap(), &exact()).unwrap();
        let (_, local) = local_search(&sc, ModelKind::PL, seed).unwrap();
        let closest = evaluate_lists(&sc, &closest_lists(&sc, ModelKind::PL)).unwrap();
        prop_assert!(u.objective >= pl.objective - 1e-9);
        prop_assert!(pl.objective >= local.per_stage - 1e-9);
        prop_assert!(local.per_stage >= closest.per_stage - 1e-12);
        prop_assert!(pli.objective >= pl.objective - 1e-9);
    }

    #[test]
    fn relabeling_locations_preserves_objectives(seed in any::<u64>(), rot in 1usize..3) {
        let sc = tiny(seed, 2, 3);
        let sigma: Vec<usize> = (0..3).map(|i| (i + rot) % 3).collect();
        let moved = sc.relabel(&sigma).unwrap();
        for kind in [ModelKind::U, ModelKind::PL, ModelKind::PLI] {
            let params = if kind == ModelKind::U { BnbParams::default() } else { exact() };
            let a = solve_mip(&build_model(&sc, kind).unwrap(), &params).unwrap();
            let b = solve_mip(&build_model(&moved, kind).unwrap(), &params).unwrap();
            prop_assert!((a.objective - b.objective).abs() <= 1e-8, "{} {} vs {}", kind, a.objective, b.objective);
        }
    }

    #[test]
    fn scaling_rewards_scales_the_optimum(seed in any::<u64>(), c in 0.1f64..10.0) {
        let sc = tiny(seed, 3, 2);
        let mut scaled = sc.clone();
        for bp in &mut scaled.rewards.breakpoints {
            bp.1 *= c;
        }
        let base_problem = build_model(&sc, ModelKind::U).unwrap();
        let scaled_problem = build_model(&scaled, ModelKind::U).unwrap();
        let a = solve_mip(&base_problem, &BnbParams::default()).unwrap();
        let b = solve_mip(&scaled_problem, &BnbParams::default()).unwrap();
        prop_assert!((b.objective - c * a.objective).abs() <= 1e-9 * c.max(1.0));
        let pa = extract_policy(&base_problem, &a.y_dense(&base_problem), None, 1e-9).unwrap();
        let pb = extract_policy(&scaled_problem, &b.y_dense(&scaled_problem), None, 1e-9).unwrap();
        let ga = policy_gain(&sc, &pa);
        let gb = policy_gain(&sc, &pb);
        prop_assert!((ga - gb).abs() <= 1e-9);
    }

    #[test]
    fn bounds_never_increase_down_the_tree(seed in any::<u64>(), rule in prop_oneof![Just(BranchRule::AssignmentRow), Just(BranchRule::MostFractional)]) {
        let sc = tiny(seed, 3, 2);
        let params = BnbParams { branch_rule: rule, ..exact() };
        let (report, log) = solve_mip_logged(&build_model(&sc, ModelKind::PL).unwrap(), &params).unwrap();
        for rec in &log {
            if let Some(parent) = rec.parent {
                let p = log.iter().find(|r| r.id == parent).unwrap();
                prop_assert!(rec.bound <= p.bound + 1e-12);
            }
        }
        prop_assert!(log[0].bound >= report.objective - 1e-9);
        let closest = evaluate_lists(&sc, &closest_lists(&sc, ModelKind::PL)).unwrap();
        prop_assert!(report.objective >= closest.per_stage - 1e-12);
    }
}

/// Gain of an arbitrary deterministic policy on the unrestricted model.
fn policy_gain(sc: &Scenario, policy: &Policy) -> f64 {
    let model = MdpModel::new(sc, ModelKind::U).unwrap();
    pldispatch_core::policy::stationary(&model, &policy.actions).unwrap().gain.per_stage
}
