//! Batch solves over the scenario library and their aggregate tables.

use std::time::Instant;

use pldispatch_core::policy::{region_automorphisms, Policy};
use pldispatch_core::{
    build_model, closest_lists, conforms, evaluate_lists, extract_policy, similarity, solve_mip, BnbParams, MipProblem,
    ModelKind, PriorityLists, Scenario, SolveReport, SolveStatus,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-scenario time limit applied to every model solve by default.
pub const DEFAULT_TIME_LIMIT_SECS: f64 = 600.0;

/// Occupation values above this count as policy support.
const SUPPORT_TOL: f64 = 1e-9;

/// Solver settings echoed into run manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverEcho {
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub node_limit: usize,
    pub time_limit_secs: f64,
    pub branch_rule: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Models to solve; closest-ambulance lists are always evaluated.
    pub models: Vec<ModelKind>,
    /// Glob over scenario ids, e.g. `R5-C2-*`.
    pub filter: Option<String>,
    pub bnb: BnbParams,
    pub time_limit_secs: f64,
    pub workers: usize,
    /// Weight similarity by stationary occupation rather than uniformly.
    pub weighted_similarity: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            models: vec![ModelKind::U, ModelKind::PL],
            filter: None,
            bnb: BnbParams::default(),
            time_limit_secs: DEFAULT_TIME_LIMIT_SECS,
            workers: 1,
            weighted_similarity: true,
        }
    }
}

impl SweepConfig {
    pub fn echo(&self) -> SolverEcho {
        SolverEcho {
            abs_gap: self.bnb.abs_gap,
            rel_gap: self.bnb.rel_gap,
            node_limit: self.bnb.node_limit,
            time_limit_secs: self.time_limit_secs,
            branch_rule: format!("{:?}", self.bnb.branch_rule),
        }
    }

    fn wants(&self, kind: ModelKind) -> bool {
        self.models.contains(&kind)
    }
}

/// One scenario's results. Wall times live in [`RowTimes`] so that rows of
/// repeated runs compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub id: String,
    pub region: String,
    pub case: String,
    pub lambda: f64,
    pub gamma: Option<f64>,
    pub z_u: Option<f64>,
    pub z_pl: Option<f64>,
    pub z_pli: Option<f64>,
    pub z_closest: Option<f64>,
    pub conforms: Option<bool>,
    /// `(Z^U - Z^PL) / Z^U`.
    pub gap_u_pl: Option<f64>,
    /// `(Z^PL - Z^H) / Z^PL` for the closest-ambulance lists.
    pub gap_pl_closest: Option<f64>,
    /// `(Z^U - Z^H) / Z^U`.
    pub gap_u_closest: Option<f64>,
    pub sim_pl_u: Option<f64>,
    pub sim_pl_closest: Option<f64>,
    pub status_u: Option<SolveStatus>,
    pub status_pl: Option<SolveStatus>,
    pub status_pli: Option<SolveStatus>,
    pub bound_pl: Option<f64>,
    pub bound_pli: Option<f64>,
    pub nodes_pl: Option<usize>,
    pub nodes_pli: Option<usize>,
    pub time_limit_secs: f64,
    pub max_flow_residual: Option<f64>,
    pub max_normalization_error: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowTimes {
    pub id: String,
    pub secs_u: Option<f64>,
    pub secs_pl: Option<f64>,
    pub secs_pli: Option<f64>,
}

/// Optimal lists found for a scenario, kept for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowLists {
    pub id: String,
    pub pl: Option<PriorityLists>,
    pub pli: Option<PriorityLists>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceCell {
    pub region: String,
    pub case: String,
    pub conforming: usize,
    pub solved: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCell {
    pub region: String,
    pub lambda: f64,
    pub rows: usize,
    pub u_pl: Option<f64>,
    pub pl_closest: Option<f64>,
    pub u_closest: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityCell {
    pub key: String,
    pub rows: usize,
    pub pl_vs_u: Option<f64>,
    pub pl_vs_closest: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTables {
    pub by_region: Vec<SimilarityCell>,
    pub by_case: Vec<SimilarityCell>,
    pub by_lambda: Vec<SimilarityCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub solver: SolverEcho,
    pub models: Vec<ModelKind>,
    pub filter: Option<String>,
    pub weighted_similarity: bool,
    pub rows: Vec<SweepRow>,
    pub times: Vec<RowTimes>,
    pub lists: Vec<RowLists>,
    pub conformance: Vec<ConformanceCell>,
    pub gaps: Vec<GapCell>,
    /// Gap means over all rows sharing an arrival rate.
    pub gaps_by_lambda: Vec<GapCell>,
    pub similarity: SimilarityTables,
}

/// Library scenarios whose id matches `filter`.
pub fn select(scenarios: Vec<Scenario>, filter: Option<&str>) -> Result<Vec<Scenario>> {
    let Some(f) = filter else {
        return Ok(scenarios);
    };
    let pattern = glob::Pattern::new(f).map_err(|e| Error::Format(format!("bad scenario filter `{f}`: {e}")))?;
    let out: Vec<Scenario> = scenarios.into_iter().filter(|s| pattern.matches(&s.id)).collect();
    if out.is_empty() {
        return Err(Error::Format(format!("no scenario id matches `{f}`")));
    }
    Ok(out)
}

/// Runs the sweep over `scenarios` (already filtered).
pub fn sweep(scenarios: &[Scenario], config: &SweepConfig) -> Result<SweepResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| Error::Format(format!("worker pool: {e}")))?;
    let outcomes: Vec<RowOutcome> = pool.install(|| scenarios.par_iter().map(|sc| run_row(sc, config)).collect());
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut times = Vec::with_capacity(outcomes.len());
    let mut lists = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        rows.push(o.row);
        times.push(o.times);
        lists.push(o.lists);
    }
    Ok(aggregate(rows, times, lists, config))
}

struct RowOutcome {
    row: SweepRow,
    times: RowTimes,
    lists: RowLists,
}

fn blank_row(sc: &Scenario, config: &SweepConfig) -> SweepRow {
    let label = |x: Option<String>| x.unwrap_or_else(|| "custom".into());
    SweepRow {
        id: sc.id.clone(),
        region: label(sc.region.id.map(|r| r.to_string())),
        case: label(sc.case.id.map(|c| c.to_string())),
        lambda: sc.lambda,
        gamma: None,
        z_u: None,
        z_pl: None,
        z_pli: None,
        z_closest: None,
        conforms: None,
        gap_u_pl: None,
        gap_pl_closest: None,
        gap_u_closest: None,
        sim_pl_u: None,
        sim_pl_closest: None,
        status_u: None,
        status_pl: None,
        status_pli: None,
        bound_pl: None,
        bound_pli: None,
        nodes_pl: None,
        nodes_pli: None,
        time_limit_secs: config.time_limit_secs,
        max_flow_residual: None,
        max_normalization_error: None,
        error: None,
    }
}

struct Solved {
    problem: MipProblem,
    report: SolveReport,
    secs: f64,
}

fn solve(sc: &Scenario, kind: ModelKind, config: &SweepConfig) -> Result<Solved> {
    let start = Instant::now();
    let problem = build_model(sc, kind)?;
    let params = BnbParams { time_limit_secs: Some(config.time_limit_secs), ..config.bnb.clone() };
    let report = solve_mip(&problem, &params)?;
    Ok(Solved { problem, report, secs: start.elapsed().as_secs_f64() })
}

fn run_row(sc: &Scenario, config: &SweepConfig) -> RowOutcome {
    let mut row = blank_row(sc, config);
    let mut times = RowTimes { id: sc.id.clone(), secs_u: None, secs_pl: None, secs_pli: None };
    let mut lists = RowLists { id: sc.id.clone(), pl: None, pli: None };
    if let Err(e) = fill_row(sc, config, &mut row, &mut times, &mut lists) {
        row.error = Some(e.to_string());
    }
    RowOutcome { row, times, lists }
}

fn fill_row(
    sc: &Scenario,
    config: &SweepConfig,
    row: &mut SweepRow,
    times: &mut RowTimes,
    lists: &mut RowLists,
) -> Result<()> {
    let closest = closest_lists(sc, ModelKind::PL);
    let gain = evaluate_lists(sc, &closest)?;
    row.gamma = Some(gain.gamma);
    row.z_closest = Some(gain.per_stage);
    let mut residual = (0.0f64, 0.0f64);
    let mut track = |s: &Solved| {
        if s.report.status == SolveStatus::Optimal {
            let (f, n) = s.problem.flow_residual(&s.report.y_dense(&s.problem));
            residual = (residual.0.max(f), residual.1.max(n));
        }
    };

    let u = if config.wants(ModelKind::U) { Some(solve(sc, ModelKind::U, config)?) } else { None };
    let pl = if config.wants(ModelKind::PL) { Some(solve(sc, ModelKind::PL, config)?) } else { None };
    let pli = if config.wants(ModelKind::PLI) { Some(solve(sc, ModelKind::PLI, config)?) } else { None };
    for s in [&u, &pl, &pli].into_iter().flatten() {
        track(s);
    }
    if u.is_some() || pl.is_some() || pli.is_some() {
        row.max_flow_residual = Some(residual.0);
        row.max_normalization_error = Some(residual.1);
    }

    let mut u_policy = None;
    if let Some(s) = &u {
        row.z_u = Some(s.report.objective);
        row.status_u = Some(s.report.status);
        times.secs_u = Some(s.secs);
        let policy = extract_policy(&s.problem, &s.report.y_dense(&s.problem), None, SUPPORT_TOL)?;
        row.conforms = Some(conforms(&s.problem.model, &policy).conforms);
        row.gap_u_closest = Some(rel_gap(s.report.objective, gain.per_stage));
        u_policy = Some(policy);
    }
    if let Some(s) = &pl {
        row.z_pl = Some(s.report.objective);
        row.status_pl = Some(s.report.status);
        row.bound_pl = Some(s.report.bound);
        row.nodes_pl = Some(s.report.nodes);
        times.secs_pl = Some(s.secs);
        row.gap_pl_closest = Some(rel_gap(s.report.objective, gain.per_stage));
        if let Some(zu) = row.z_u {
            row.gap_u_pl = Some(rel_gap(zu, s.report.objective));
        }
        if let Some(l) = &s.report.lists {
            let model = &s.problem.model;
            let autos = region_automorphisms(sc);
            let mine = Policy::from_lists(model, l);
            if let Some(up) = &u_policy {
                row.sim_pl_u = similarity(model, &mine, up, &autos, config.weighted_similarity)?.score;
            }
            let heuristic = Policy::from_lists(model, &closest);
            row.sim_pl_closest = similarity(model, &mine, &heuristic, &autos, config.weighted_similarity)?.score;
        }
        lists.pl = s.report.lists.clone();
    }
    if let Some(s) = &pli {
        row.z_pli = Some(s.report.objective);
        row.status_pli = Some(s.report.status);
        row.bound_pli = Some(s.report.bound);
        row.nodes_pli = Some(s.report.nodes);
        times.secs_pli = Some(s.secs);
        lists.pli = s.report.lists.clone();
    }
    Ok(())
}

fn rel_gap(best: f64, other: f64) -> f64 {
    (best - other) / best
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (mut sum, mut k) = (0.0, 0usize);
    for v in values.flatten() {
        sum += v;
        k += 1;
    }
    (k > 0).then(|| sum / k as f64)
}

/// Distinct keys in first-seen order.
fn keys<T: PartialEq + Clone>(rows: &[SweepRow], f: impl Fn(&SweepRow) -> T) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for r in rows {
        let k = f(r);
        if !out.contains(&k) {
            out.push(k);
        }
    }
    out
}

fn similarity_by<T: PartialEq + Clone + ToString>(
    rows: &[SweepRow],
    f: impl Fn(&SweepRow) -> T,
) -> Vec<SimilarityCell> {
    keys(rows, &f)
        .into_iter()
        .map(|k| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| f(r) == k).collect();
            SimilarityCell {
                key: k.to_string(),
                rows: group.len(),
                pl_vs_u: mean(group.iter().map(|r| r.sim_pl_u)),
                pl_vs_closest: mean(group.iter().map(|r| r.sim_pl_closest)),
            }
        })
        .collect()
}

fn gap_cell(region: &str, lambda: f64, group: &[&SweepRow]) -> GapCell {
    GapCell {
        region: region.to_string(),
        lambda,
        rows: group.len(),
        u_pl: mean(group.iter().map(|r| r.gap_u_pl)),
        pl_closest: mean(group.iter().map(|r| r.gap_pl_closest)),
        u_closest: mean(group.iter().map(|r| r.gap_u_closest)),
    }
}

fn aggregate(rows: Vec<SweepRow>, times: Vec<RowTimes>, lists: Vec<RowLists>, config: &SweepConfig) -> SweepResult {
    let mut conformance = Vec::new();
    for region in keys(&rows, |r| r.region.clone()) {
        for case in keys(&rows, |r| r.case.clone()) {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.region == region && r.case == case).collect();
            if group.is_empty() {
                continue;
            }
            conformance.push(ConformanceCell {
                region: region.clone(),
                case,
                conforming: group.iter().filter(|r| r.conforms == Some(true)).count(),
                solved: group.iter().filter(|r| r.conforms.is_some()).count(),
            });
        }
    }
    let lambdas = keys(&rows, |r| r.lambda);
    let mut gaps = Vec::new();
    for region in keys(&rows, |r| r.region.clone()) {
        for &lambda in &lambdas {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.region == region && r.lambda == lambda).collect();
            if !group.is_empty() {
                gaps.push(gap_cell(&region, lambda, &group));
            }
        }
    }
    let gaps_by_lambda = lambdas
        .iter()
        .map(|&lambda| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.lambda == lambda).collect();
            gap_cell("all", lambda, &group)
        })
        .collect();
    let similarity = SimilarityTables {
        by_region: similarity_by(&rows, |r| r.region.clone()),
        by_case: similarity_by(&rows, |r| r.case.clone()),
        by_lambda: similarity_by(&rows, |r| r.lambda),
    };
    SweepResult {
        solver: config.echo(),
        models: config.models.clone(),
        filter: config.filter.clone(),
        weighted_similarity: config.weighted_similarity,
        rows,
        times,
        lists,
        conformance,
        gaps,
        gaps_by_lambda,
        similarity,
    }
}

/// Row-wise ordering checks: `Z^H <= Z^PL <= Z^U` and `Z^PL <= Z^PLI`,
/// within `tol`. Returns one message per violation.
pub fn ordering_violations(rows: &[SweepRow], tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    for r in rows {
        let mut check = |lo: Option<f64>, hi: Option<f64>, what: &str| {
            if let (Some(a), Some(b)) = (lo, hi) {
                if a > b + tol {
                    out.push(format!("{}: {what} ({a} > {b})", r.id));
                }
            }
        };
        check(r.z_pl, r.z_u, "Z^PL exceeds Z^U");
        check(r.z_closest, r.z_pl, "closest lists beat Z^PL");
        check(r.z_pl, r.z_pli, "Z^PL exceeds Z^PLI");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use pldispatch_core::scenario_library;

    #[test]
    fn filter_selects_by_glob() {
        let five = select(scenario_library(), Some("R5-C2-*")).unwrap();
        assert_eq!(five.len(), 5);
        assert!(five.iter().all(|s| s.id.starts_with("R5-C2-")));
        assert_eq!(select(scenario_library(), None).unwrap().len(), 125);
        assert!(select(scenario_library(), Some("R9-*")).is_err());
    }

    #[test]
    fn ordering_check_flags_inversions() {
        let sc = &scenario_library()[0];
        let mut r = blank_row(sc, &SweepConfig::default());
        r.z_u = Some(1.0);
        r.z_pl = Some(1.0 + 1e-6);
        r.z_closest = Some(0.5);
        assert_eq!(ordering_violations(&[r.clone()], 1e-9).len(), 1);
        r.z_pl = Some(0.9);
        assert!(ordering_violations(&[r], 1e-9).is_empty());
    }
}
