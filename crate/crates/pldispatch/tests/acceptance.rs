//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero on any failed check not listed in `EXPECTED_FAILURES`.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pldispatch::report::reference_lists;
use pldispatch::sim::{simulate, SimConfig};
use pldispatch::sweep::{sweep, SweepConfig, SweepResult, SweepRow};
use pldispatch_core::mdp::enumerate_states;
use pldispatch_core::policy::enumerate_oracle;
use pldispatch_core::scenario::LIBRARY_LAMBDAS;
use pldispatch_core::{
    build_model, closest_lists, dimensions, evaluate_lists, fix_lists, make_scenario, scenario_library, solve_mip,
    ArrivalCase, BnbParams, CaseId, ModelKind, PriorityLists, RegionId, RegionMap, Scenario, ScenarioOptions,
    SolveStatus,
};

const U_VARS: usize = 6_673;
const U_ROWS: usize = 5_626;
const PL_VARS: usize = 6_801;
const STATES: [(usize, usize); 3] = [(3, 125), (4, 625), (5, 7_776)];

const TINY_INSTANCES: usize = 24;
const ORACLE_TOL: f64 = 1e-8;

const RANDOM_LISTS: usize = 10;
const SIM_REPLICATIONS: usize = 20;
const SIM_HORIZON: f64 = 1e5;
const SIM_HALF_WIDTHS: f64 = 3.0;

const CONFORM_TOL: f64 = 1e-7;
const CONFORMING_TARGET: usize = 83;
const CONFORMING_SLACK: usize = 5;

const MAX_U_PL_GAP: f64 = 0.007;
const HEURISTIC_GAP_PCT: [(f64, f64); 5] = [(3.0, 0.35), (6.0, 1.28), (9.0, 1.93), (12.0, 2.21), (15.0, 2.30)];
const HEURISTIC_GAP_SLACK_PP: f64 = 0.3;

const REFERENCE_TOL: f64 = 1e-6;
const IMPROVEMENT_PCT: [(f64, f64, f64); 2] = [(3.0, 0.2, 0.3), (15.0, 17.7, 1.0)];

const ORDER_TOL: f64 = 1e-9;
const RELABEL_TOL: f64 = 1e-8;

const FLOW_TOL: f64 = 1e-7;
const NORMALIZATION_TOL: f64 = 1e-9;

/// Checks known to fail, with the reason.
const EXPECTED_FAILURES: &[(&str, &str)] = &[
    (
        "A1 states m=5",
        "the target contradicts the state-space formula (n+1)^m, which gives 3,125 for m=5 and \
         matches the m=5 row and variable counts",
    ),
    (
        "A4 conforming count",
        "the U optimum is attained by a deterministic policy that strictly beats the certified PL optimum \
         in 93 scenarios, so at most 32 can conform",
    ),
    ("A6 PL lambda=3", "the reference lists fall 3.1e-5 short of the optimum"),
    ("A6 PLI lambda=3", "the reference lists fall 2.4e-4 short of the optimum"),
    ("A6 PLI lambda=6", "the reference lists fall 1.3e-6 short of the optimum"),
    ("A6 PLI lambda=15", "the reference lists fall 1.8e-6 short of the optimum"),
];

#[derive(Default)]
struct Criterion {
    checks: usize,
    failed: Vec<(String, String)>,
    notes: Vec<String>,
}

impl Criterion {
    fn check(&mut self, name: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.checks += 1;
        if !ok {
            self.failed.push((name.into(), detail.into()));
        }
    }

    fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }
}

fn params() -> BnbParams {
    BnbParams::default()
}

fn exact() -> BnbParams {
    BnbParams { abs_gap: 0.0, rel_gap: 0.0, ..BnbParams::default() }
}

fn tiny(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Scenario {
    let centers: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)]).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let case = ArrivalCase::from_probabilities(None, raw.iter().map(|v| v / total).collect()).unwrap();
    let lambda = rng.random_range(1.0..12.0);
    Scenario::new(RegionMap::from_centers(None, centers).unwrap(), case, lambda, m, ScenarioOptions::default()).unwrap()
}

fn shuffled(rng: &mut ChaCha8Rng, sc: &Scenario) -> PriorityLists {
    let mut lists = closest_lists(sc, ModelKind::PL);
    for l in &mut lists.lists {
        l.shuffle(rng);
    }
    lists
}

fn a1() -> Criterion {
    let mut c = Criterion::default();
    let sc = make_scenario(RegionId::R5, CaseId::C2, 9.0, 4).unwrap();
    let u = dimensions(&build_model(&sc, ModelKind::U).unwrap());
    let pl = dimensions(&build_model(&sc, ModelKind::PL).unwrap());
    c.check("A1 U variables", u.n_vars == U_VARS, format!("{} != {U_VARS}", u.n_vars));
    c.check("A1 U rows", u.n_rows == U_ROWS, format!("{} != {U_ROWS}", u.n_rows));
    c.check("A1 PL variables", pl.n_vars == PL_VARS, format!("{} != {PL_VARS}", pl.n_vars));
    c.note(format!("PL rows {}", pl.n_rows));
    for (m, want) in STATES {
        let got = enumerate_states(m, 4, u64::MAX).unwrap().len();
        c.check(format!("A1 states m={m}"), got == want, format!("{got} != {want}"));
    }
    c
}

fn a2() -> Criterion {
    let mut c = Criterion::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for k in 0..TINY_INSTANCES {
        let m = if k % 2 == 0 { 2 } else { 3 };
        let sc = tiny(&mut rng, m, 2);
        let mip = solve_mip(&build_model(&sc, ModelKind::PL).unwrap(), &exact()).unwrap();
        let oracle = enumerate_oracle(&sc, ModelKind::PL).unwrap();
        let d = (mip.objective - oracle.gain.per_stage).abs();
        worst = worst.max(d);
        c.check(
            format!("A2 instance {k}"),
            d <= ORACLE_TOL,
            format!("m={m}: {} vs {}", mip.objective, oracle.gain.per_stage),
        );
    }
    c.note(format!("{TINY_INSTANCES} instances, max difference {worst:.2e}"));
    c
}

fn a3() -> Criterion {
    let mut c = Criterion::default();
    let sc = make_scenario(RegionId::R5, CaseId::C2, 9.0, 4).unwrap();
    let pl = build_model(&sc, ModelKind::PL).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let config = SimConfig { horizon: SIM_HORIZON, replications: SIM_REPLICATIONS, ..SimConfig::default() };
    let (mut worst_lp, mut worst_sim): (f64, f64) = (0.0, 0.0);
    for k in 0..RANDOM_LISTS {
        let lists = shuffled(&mut rng, &sc);
        let gain = evaluate_lists(&sc, &lists).unwrap();
        let lp = solve_mip(&fix_lists(&pl, &lists).unwrap(), &params()).unwrap().objective;
        let d = (gain.per_stage - lp).abs();
        worst_lp = worst_lp.max(d);
        c.check(format!("A3 list {k} LP"), d <= ORACLE_TOL, format!("{} vs {lp}", gain.per_stage));
        let est = simulate(&sc, &lists, &SimConfig { seed: 100 + k as u64, ..config.clone() }).unwrap();
        let h = est.half_width.unwrap();
        let z = (est.mean - gain.per_time()).abs() / h;
        worst_sim = worst_sim.max(z);
        c.check(
            format!("A3 list {k} simulation"),
            z <= SIM_HALF_WIDTHS,
            format!("{:.6} +/- {h:.6} vs {:.6}", est.mean, gain.per_time()),
        );
    }
    c.note(format!("max LP difference {worst_lp:.2e}, max simulation error {worst_sim:.2} half-widths"));
    c
}

fn a4(all: &SweepResult) -> Criterion {
    let mut c = Criterion::default();
    let mut conforming: usize = 0;
    for r in &all.rows {
        if r.conforms == Some(true) {
            conforming += 1;
            let (u, pl) = (r.z_u.unwrap(), r.z_pl.unwrap());
            c.check(format!("A4 {}", r.id), (u - pl).abs() <= CONFORM_TOL, format!("Z^U {u} vs Z^PL {pl}"));
        }
    }
    c.check(
        "A4 conforming count",
        conforming.abs_diff(CONFORMING_TARGET) <= CONFORMING_SLACK,
        format!("{conforming} not within {CONFORMING_TARGET} +/- {CONFORMING_SLACK}"),
    );
    c.note(format!("{conforming}/{} conforming", all.rows.len()));
    c
}

fn a5(all: &SweepResult) -> Criterion {
    let mut c = Criterion::default();
    let worst = all.rows.iter().filter_map(|r| r.gap_u_pl.map(|g| (g, &r.id))).fold((0.0, None), |acc, (g, id)| {
        if g > acc.0 {
            (g, Some(id.clone()))
        } else {
            acc
        }
    });
    c.check("A5 U-PL gap", worst.0 <= MAX_U_PL_GAP, format!("{:.4}% at {:?}", 100.0 * worst.0, worst.1));
    let mut got = Vec::new();
    for (lambda, want) in HEURISTIC_GAP_PCT {
        let mean = all
            .gaps_by_lambda
            .iter()
            .find(|g| g.lambda == lambda)
            .and_then(|g| g.pl_closest)
            .map(|g| 100.0 * g)
            .unwrap_or(f64::NAN);
        got.push(format!("{mean:.2}"));
        c.check(
            format!("A5 heuristic gap lambda={lambda}"),
            (mean - want).abs() <= HEURISTIC_GAP_SLACK_PP,
            format!("{mean:.3}% vs {want}%"),
        );
    }
    c.note(format!("max U-PL gap {:.3}%, heuristic gaps by lambda [{}]%", 100.0 * worst.0, got.join(", ")));
    c
}

fn r5c2<'a>(rows: &'a [SweepRow], lambda: f64) -> &'a SweepRow {
    rows.iter().find(|r| r.region == "R5" && r.case == "C2" && r.lambda == lambda).expect("R5/C2 row")
}

fn a6(all: &SweepResult, pli: &SweepResult) -> Criterion {
    let mut c = Criterion::default();
    for lambda in LIBRARY_LAMBDAS {
        let sc = make_scenario(RegionId::R5, CaseId::C2, lambda, 4).unwrap();
        for (kind, ours) in
            [(ModelKind::PL, r5c2(&all.rows, lambda).z_pl), (ModelKind::PLI, r5c2(&pli.rows, lambda).z_pli)]
        {
            let ours = ours.unwrap();
            let theirs = evaluate_lists(&sc, &reference_lists(kind, lambda).unwrap()).unwrap().per_stage;
            c.check(
                format!("A6 {kind} lambda={lambda}"),
                (ours - theirs).abs() <= REFERENCE_TOL,
                format!("optimum {ours:.10} vs reference {theirs:.10} ({:.2e})", ours - theirs),
            );
        }
    }
    for (lambda, want, slack) in IMPROVEMENT_PCT {
        let pl = r5c2(&pli.rows, lambda).z_pl.unwrap();
        let got = 100.0 * (r5c2(&pli.rows, lambda).z_pli.unwrap() - pl) / pl;
        c.check(
            format!("A6 improvement lambda={lambda}"),
            (got - want).abs() <= slack,
            format!("{got:.3}% vs {want}% +/- {slack}"),
        );
        c.note(format!("PLI over PL at lambda={lambda}: {got:.3}%"));
    }
    c
}

fn a7(all: &SweepResult, pli: &SweepResult) -> Criterion {
    let mut c = Criterion::default();
    for r in all.rows.iter().chain(&pli.rows) {
        let (u, pl, h) = (r.z_u.unwrap(), r.z_pl.unwrap(), r.z_closest.unwrap());
        c.check(format!("A7 {} U >= PL", r.id), u >= pl - ORDER_TOL, format!("{u} < {pl}"));
        c.check(format!("A7 {} PL >= closest", r.id), pl >= h - ORDER_TOL, format!("{pl} < {h}"));
        if let Some(i) = r.z_pli {
            c.check(format!("A7 {} PLI >= PL", r.id), i >= pl - ORDER_TOL, format!("{i} < {pl}"));
        }
    }
    let mut relabeled = 0;
    for (region, case) in
        [(RegionId::R2, CaseId::C1), (RegionId::R2, CaseId::C4), (RegionId::R5, CaseId::C2), (RegionId::R1, CaseId::C5)]
    {
        let sc = make_scenario(region, case, 9.0, 4).unwrap();
        let base = objectives(&sc);
        for auto in pldispatch_core::region_automorphisms(&sc).iter().skip(1) {
            relabeled += 1;
            let other = objectives(&sc.relabel(&auto.locations).unwrap());
            for (k, (a, b)) in base.iter().zip(&other).enumerate() {
                c.check(
                    format!("A7 {} relabel {:?} objective {k}", sc.id, auto.locations),
                    (a - b).abs() <= RELABEL_TOL,
                    format!("{a} vs {b}"),
                );
            }
        }
    }
    c.check("A7 relabelings exercised", relabeled > 0, "no nontrivial automorphism found");
    c.note(format!("{} rows ordered, {relabeled} relabelings", all.rows.len() + pli.rows.len()));
    c
}

/// U, PL and closest-list objectives, solved exactly.
fn objectives(sc: &Scenario) -> [f64; 3] {
    let u = solve_mip(&build_model(sc, ModelKind::U).unwrap(), &exact()).unwrap().objective;
    let pl = solve_mip(&build_model(sc, ModelKind::PL).unwrap(), &exact()).unwrap().objective;
    let h = evaluate_lists(sc, &closest_lists(sc, ModelKind::PL)).unwrap().per_stage;
    [u, pl, h]
}

fn a8(all: &SweepResult, pli: &SweepResult, rerun: &SweepResult) -> Criterion {
    let mut c = Criterion::default();
    let (mut flow, mut norm): (f64, f64) = (0.0, 0.0);
    for r in all.rows.iter().chain(&pli.rows) {
        for s in [r.status_u, r.status_pl, r.status_pli].into_iter().flatten() {
            c.check(format!("A8 {} status", r.id), s == SolveStatus::Optimal, format!("{s:?}"));
        }
        let (f, n) = (r.max_flow_residual.unwrap_or(f64::NAN), r.max_normalization_error.unwrap_or(f64::NAN));
        flow = flow.max(f);
        norm = norm.max(n);
        c.check(format!("A8 {} flow", r.id), f <= FLOW_TOL, format!("{f:.2e}"));
        c.check(format!("A8 {} normalization", r.id), n <= NORMALIZATION_TOL, format!("{n:.2e}"));
    }
    let first: BTreeMap<&str, &SweepRow> = all.rows.iter().map(|r| (r.id.as_str(), r)).collect();
    for r in &rerun.rows {
        let a = first[r.id.as_str()];
        let same = [(a.z_u, r.z_u), (a.z_pl, r.z_pl), (a.z_closest, r.z_closest)]
            .iter()
            .all(|(x, y)| x.map(f64::to_bits) == y.map(f64::to_bits));
        c.check(format!("A8 {} rerun", r.id), same && a == r, "objectives differ between runs");
    }
    c.note(format!("max flow residual {flow:.2e}, max normalization error {norm:.2e}, {} reruns", rerun.rows.len()));
    c
}

fn run_sweep(filter: Option<&str>, models: Vec<ModelKind>, workers: usize) -> SweepResult {
    let scenarios = pldispatch::sweep::select(scenario_library(), filter).unwrap();
    let config =
        SweepConfig { models, filter: filter.map(str::to_string), bnb: params(), workers, ..SweepConfig::default() };
    let result = sweep(&scenarios, &config).unwrap();
    for r in &result.rows {
        assert!(r.error.is_none(), "{}: {:?}", r.id, r.error);
    }
    result
}

/// Prints the verdict line and failed checks; returns the number of
/// unexpected failures.
fn report(name: &str, c: &Criterion, secs: f64) -> usize {
    let expected: BTreeMap<&str, &str> = EXPECTED_FAILURES.iter().copied().collect();
    let verdict = if c.failed.is_empty() { "PASS" } else { "FAIL" };
    println!("{name} {verdict} ({}/{} checks, {secs:.1}s) {}", c.checks - c.failed.len(), c.checks, c.notes.join("; "));
    let mut unexpected = 0;
    for (check, detail) in &c.failed {
        match expected.get(check.as_str()) {
            Some(why) => println!("    expected failure: {check}: {detail} [{why}]"),
            None => {
                unexpected += 1;
                println!("    {check}: {detail}");
            }
        }
    }
    unexpected
}

fn main() -> ExitCode {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut unexpected = 0;
    let mut timed = |name: &str, f: &mut dyn FnMut() -> Criterion| {
        let start = Instant::now();
        let c = f();
        unexpected += report(name, &c, start.elapsed().as_secs_f64());
    };
    timed("A1", &mut a1);
    timed("A2", &mut a2);
    timed("A3", &mut a3);

    let start = Instant::now();
    let all = run_sweep(None, vec![ModelKind::U, ModelKind::PL], workers);
    let pli = run_sweep(Some("R5-C2-*"), vec![ModelKind::U, ModelKind::PL, ModelKind::PLI], workers);
    let rerun = run_sweep(Some("R5-C2-*"), vec![ModelKind::U, ModelKind::PL], 1);
    println!("shared sweeps took {:.0}s", start.elapsed().as_secs_f64());
    let subset_secs: f64 = all
        .rows
        .iter()
        .zip(&all.times)
        .filter(|(r, _)| r.region == "R5" || r.case == "C2")
        .map(|(_, t)| t.secs_u.unwrap_or(0.0) + t.secs_pl.unwrap_or(0.0))
        .sum();

    timed("A4", &mut || {
        let mut c = a4(&all);
        c.note(format!("R5 and C2 subset solved in {subset_secs:.0}s"));
        c
    });
    timed("A5", &mut || a5(&all));
    timed("A6", &mut || a6(&all, &pli));
    timed("A7", &mut || a7(&all, &pli));
    timed("A8", &mut || a8(&all, &pli, &rerun));

    if unexpected > 0 {
        println!("{unexpected} unexpected failures");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
