mod common;

use nalgebra::{Matrix3, Vector3};
use pldispatch_core::lp::{CscMatrix, Direction, RowSense};
use pldispatch_core::*;
use proptest::prelude::*;

/// Best vertex of `max c.x, A x <= b, 0 <= x <= ub` in three variables,
/// by solving every 3 x 3 system of active constraints.
fn vertex_oracle(c: &[f64; 3], rows: &[([f64; 3], f64)], ub: f64) -> Option<f64> {
    let mut planes: Vec<([f64; 3], f64)> = rows.to_vec();
    for k in 0..3 {
        let mut e = [0.0; 3];
        e[k] = 1.0;
        planes.push((e, ub));
        e[k] = -1.0;
        planes.push((e, 0.0));
    }
    let mut best: Option<f64> = None;
    for i in 0..planes.len() {
        for j in i + 1..planes.len() {
            for k in j + 1..planes.len() {
                let a = Matrix3::from_rows(
                    &[planes[i].0.into(), planes[j].0.into(), planes[k].0.into()]
                        .map(|r: [f64; 3]| nalgebra::RowVector3::from(r)),
                );
                let b = Vector3::new(planes[i].1, planes[j].1, planes[k].1);
                let Some(x) = a.lu().solve(&b) else { continue };
                if a.determinant().abs() < 1e-9 {
                    continue;
                }
                if planes.iter().all(|(r, rhs)| r[0] * x[0] + r[1] * x[1] + r[2] * x[2] <= rhs + 1e-7) {
                    let v = c[0] * x[0] + c[1] * x[1] + c[2] * x[2];
                    best = Some(best.map_or(v, |w: f64| w.max(v)));
                }
            }
        }
    }
    best
}

fn small_lp(c: &[f64; 3], rows: &[([f64; 3], f64)], ub: f64) -> SparseLp {
    let mut trip = Vec::new();
    for (r, (coef, _)) in rows.iter().enumerate() {
        for (k, &v) in coef.iter().enumerate() {
            if v != 0.0 {
                trip.push((r, k, v));
            }
        }
    }
    SparseLp::new(
        Direction::Maximize,
        c.to_vec(),
        vec![0.0; 3],
        vec![ub; 3],
        CscMatrix::from_triplets(rows.len(), 3, &trip).unwrap(),
        vec![RowSense::Le; rows.len()],
        rows.iter().map(|r| r.1).collect(),
    )
    .unwrap()
}

fn coef() -> impl Strategy<Value = f64> {
    (-4i32..=4).prop_map(f64::from)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn small_lps_match_vertex_enumeration(
        c in [coef(), coef(), coef()],
        rows in prop::collection::vec(([coef(), coef(), coef()], 0i32..8), 1..5),
    ) {
        let rows: Vec<([f64; 3], f64)> = rows.into_iter().map(|(r, b)| (r, f64::from(b))).collect();
        let lp = small_lp(&c, &rows, 5.0);
        let sol = solve_lp(&lp, &SimplexParams::default()).unwrap();
        // The origin is feasible (b >= 0) and the box is bounded.
        prop_assert_eq!(sol.status, SimplexStatus::Optimal);
        let want = vertex_oracle(&c, &rows, 5.0).unwrap();
        prop_assert!((sol.objective - want).abs() <= 1e-7, "{} vs {}", sol.objective, want);
        prop_assert!(lp.max_violation(&sol.x) <= 1e-7);
    }
}

#[test]
fn objective_trace_never_exceeds_the_optimum() {
    let sc = make_scenario(RegionId::R2, CaseId::C3, 6.0, 4).unwrap();
    let problem = build_model(&sc, ModelKind::U).unwrap();
    let params = SimplexParams { record_trace: true, ..SimplexParams::default() };
    // Start from the basis of a feasible policy so every iterate is feasible.
    let start = closest_lists(&sc, ModelKind::PL).policy_actions(&problem.model);
    let basis = problem.policy_basis(&problem.lp, &start);
    let sol = pldispatch_core::lp::solve_lp_from(&problem.lp, &params, Some(&basis)).unwrap();
    assert!(sol.trace.len() > 10);
    let closest = evaluate_lists(&sc, &closest_lists(&sc, ModelKind::PL)).unwrap();
    assert!((sol.trace[0] - closest.per_stage).abs() <= 1e-6 || sol.trace[0] >= closest.per_stage);
    assert_eq!(sol.status, SimplexStatus::Optimal);
    for w in sol.trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-9, "phase-two objective decreased: {} -> {}", w[0], w[1]);
    }
    for &v in &sol.trace {
        assert!(v <= sol.objective + 1e-9);
    }
    let (flow, norm) = problem.flow_residual(&sol.x[..problem.num_y()]);
    assert!(flow <= 1e-7 && norm <= 1e-9);
}

#[test]
fn slack_start_reaches_the_same_optimum() {
    let sc = make_scenario(RegionId::R2, CaseId::C3, 6.0, 3).unwrap();
    let problem = build_model(&sc, ModelKind::U).unwrap();
    let cold = solve_lp(&problem.lp, &SimplexParams::default()).unwrap();
    let warm = solve_mip(&problem, &BnbParams::default()).unwrap();
    assert_eq!(cold.status, SimplexStatus::Optimal);
    assert!((cold.objective - warm.objective).abs() <= 1e-9);
    let (flow, norm) = problem.flow_residual(&cold.x[..problem.num_y()]);
    assert!(flow <= 1e-7 && norm <= 1e-9);
}

#[test]
fn repeated_solves_are_identical() {
    let sc = make_scenario(RegionId::R3, CaseId::C4, 12.0, 3).unwrap();
    for kind in [ModelKind::U, ModelKind::PL, ModelKind::PLI] {
        let problem = build_model(&sc, kind).unwrap();
        let a = solve_mip(&problem, &BnbParams::default()).unwrap();
        let b = solve_mip(&problem, &BnbParams::default()).unwrap();
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.y, b.y);
        assert_eq!(a.lists, b.lists);
        assert_eq!(a.nodes, b.nodes);
    }
    let problem = build_model(&sc, ModelKind::U).unwrap();
    let a = solve_lp(&problem.lp, &SimplexParams::default()).unwrap();
    let b = solve_lp(&problem.lp, &SimplexParams::default()).unwrap();
    assert_eq!(a.basis, b.basis);
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
}

#[test]
fn optimal_solutions_are_clean() {
    for (r, c, l) in [(RegionId::R1, CaseId::C1, 3.0), (RegionId::R4, CaseId::C5, 15.0)] {
        let sc = make_scenario(r, c, l, 3).unwrap();
        for kind in [ModelKind::U, ModelKind::PL] {
            let problem = build_model(&sc, kind).unwrap();
            let report = solve_mip(&problem, &BnbParams::default()).unwrap();
            assert_eq!(report.status, SolveStatus::Optimal);
            let y = report.y_dense(&problem);
            assert!(y.iter().all(|&v| v >= -1e-9));
            let (flow, norm) = problem.flow_residual(&y);
            assert!(flow <= 1e-7, "{kind}: flow residual {flow}");
            assert!(norm <= 1e-9, "{kind}: normalization residual {norm}");
            assert!((problem.objective_of_y(&y) - report.objective).abs() <= 1e-9);
        }
    }
}
