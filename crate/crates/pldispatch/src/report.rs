//! Priority-list tables for region R5 under arrival case C2, next to the
//! reference lists for the same five scenarios.

use pldispatch_core::scenario::LIBRARY_LAMBDAS;
use pldispatch_core::{
    build_model, evaluate_lists, make_scenario, solve_mip, BnbParams, CaseId, CustomerType, ListEntry, ModelKind,
    PriorityLists, RegionId, SolveStatus,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reference PL lists: per arrival rate, priority rows 1..4, columns
/// `1H 2H 3H 4H 1L 2L 3L 4L`.
pub const REFERENCE_PL: [(f64, [&str; 4]); 5] = [
    (3.0, ["1 2 3 4 3 2 3 4", "3 3 4 3 4 4 2 3", "4 1 1 1 1 3 1 2", "2 4 2 2 2 1 4 1"]),
    (6.0, ["1 2 3 4 3 2 3 4", "3 3 2 3 2 3 4 3", "2 1 4 1 4 4 2 2", "4 4 1 2 1 1 1 1"]),
    (9.0, ["1 2 3 4 2 2 3 4", "3 3 4 3 4 3 2 3", "4 4 2 2 3 4 4 2", "2 1 1 1 1 1 1 1"]),
    (12.0, ["1 2 3 4 2 2 3 4", "3 3 4 3 4 3 2 3", "2 4 2 2 3 4 4 2", "4 1 1 1 1 1 1 1"]),
    (15.0, ["1 2 3 4 2 2 3 4", "3 3 2 3 4 3 4 3", "2 4 4 2 3 4 2 2", "4 1 1 1 1 1 1 1"]),
];

/// Reference PLI lists, same layout; `I` marks idling.
pub const REFERENCE_PLI: [(f64, [&str; 4]); 5] = [
    (3.0, ["1 2 3 4 1 2 3 4", "3 3 2 3 3 3 4 3", "4 4 1 1 4 4 2 2", "2 1 4 2 I 1 I 1"]),
    (6.0, ["1 2 3 4 3 2 3 4", "3 3 2 3 I I 4 I", "4 4 4 2 I I I I", "2 1 1 1 I I I I"]),
    (9.0, ["1 2 3 4 I 2 3 4", "3 3 4 3 I I I I", "2 4 2 2 I I I I", "4 1 1 1 I I I I"]),
    (12.0, ["1 2 3 4 I 2 3 4", "3 3 4 3 I I I I", "4 4 2 2 I I I I", "2 1 1 1 I I I I"]),
    (15.0, ["1 2 3 4 I I I 4", "3 3 4 3 I I I I", "4 4 2 2 I I I I", "2 1 1 1 I I I I"]),
];

/// Turns a reference table block into full lists for four ambulances and
/// four locations. Repeated entries (shown where a list has already ended
/// in `Idle` or where the table pads with ambulance 1) are dropped, and
/// the unshown tail is completed: ambulances in id order, then `Idle`.
pub fn parse_reference(rows: &[&str; 4], kind: ModelKind) -> Result<PriorityLists> {
    let (m, n) = (4, 4);
    let cols: Vec<Vec<&str>> = rows.iter().map(|r| r.split_whitespace().collect()).collect();
    if cols.iter().any(|c| c.len() != 2 * n) {
        return Err(Error::Format("reference rows need eight entries".into()));
    }
    let mut lists = Vec::with_capacity(2 * n);
    for t in 0..2 * n {
        let mut list: Vec<ListEntry> = Vec::new();
        for row in &cols {
            let e = match row[t] {
                "I" => ListEntry::Idle,
                s => ListEntry::Ambulance(
                    s.parse::<usize>()
                        .ok()
                        .filter(|&j| (1..=m).contains(&j))
                        .ok_or_else(|| Error::Format(format!("bad reference entry `{s}`")))?
                        - 1,
                ),
            };
            if !list.contains(&e) {
                list.push(e);
            }
        }
        for j in 0..m {
            if !list.contains(&ListEntry::Ambulance(j)) {
                list.push(ListEntry::Ambulance(j));
            }
        }
        if kind == ModelKind::PLI && t >= n && !list.contains(&ListEntry::Idle) {
            list.push(ListEntry::Idle);
        }
        lists.push(list);
    }
    Ok(PriorityLists::new(kind, m, n, lists)?)
}

/// Reference lists for `kind` at `lambda`.
pub fn reference_lists(kind: ModelKind, lambda: f64) -> Result<PriorityLists> {
    let table = match kind {
        ModelKind::PLI => &REFERENCE_PLI,
        _ => &REFERENCE_PL,
    };
    let (_, rows) = table
        .iter()
        .find(|(l, _)| *l == lambda)
        .ok_or_else(|| Error::Format(format!("no reference lists at lambda {lambda}")))?;
    parse_reference(rows, if kind == ModelKind::PLI { ModelKind::PLI } else { ModelKind::PL })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBlock {
    pub lambda: f64,
    pub status: SolveStatus,
    pub objective: f64,
    pub bound: f64,
    pub nodes: usize,
    pub lists: PriorityLists,
    /// `cells[p][t]`: entry at priority `p + 1` for type `t + 1`, in
    /// parentheses when an earlier `Idle` makes it unreachable.
    pub cells: Vec<Vec<String>>,
    pub reference_gain: f64,
    /// Our optimum minus the reference lists' gain.
    pub reference_shortfall: f64,
    /// PL optimum, reported with PLI blocks.
    pub pl_objective: Option<f64>,
    /// Percent improvement of PLI over PL.
    pub improvement_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub kind: ModelKind,
    pub types: Vec<String>,
    pub blocks: Vec<ReportBlock>,
}

fn cells(lists: &PriorityLists) -> Vec<Vec<String>> {
    let rows = lists.lists.iter().map(Vec::len).max().unwrap_or(0);
    (0..rows)
        .map(|p| {
            lists
                .lists
                .iter()
                .enumerate()
                .map(|(k, l)| match l.get(p) {
                    None => String::new(),
                    Some(e) if p >= lists.reachable_len(k + 1) => format!("({e})"),
                    Some(e) => e.to_string(),
                })
                .collect()
        })
        .collect()
}

/// Solves the five R5/C2 scenarios under `kind` (PL or PLI) and tabulates
/// the optimal lists.
pub fn report_r5c2(kind: ModelKind, params: &BnbParams) -> Result<Report> {
    if kind == ModelKind::U {
        return Err(Error::Format("the list report needs model PL or PLI".into()));
    }
    let mut blocks = Vec::new();
    for lambda in LIBRARY_LAMBDAS {
        let sc = make_scenario(RegionId::R5, CaseId::C2, lambda, 4)?;
        let rep = solve_mip(&build_model(&sc, kind)?, params)?;
        let lists = rep.lists.clone().ok_or_else(|| Error::Format(format!("{} returned no lists", sc.id)))?;
        let reference_gain = evaluate_lists(&sc, &reference_lists(kind, lambda)?)?.per_stage;
        let pl_objective = if kind == ModelKind::PLI {
            Some(solve_mip(&build_model(&sc, ModelKind::PL)?, params)?.objective)
        } else {
            None
        };
        blocks.push(ReportBlock {
            lambda,
            status: rep.status,
            objective: rep.objective,
            bound: rep.bound,
            nodes: rep.nodes,
            cells: cells(&lists),
            lists,
            reference_gain,
            reference_shortfall: rep.objective - reference_gain,
            improvement_pct: pl_objective.map(|pl| 100.0 * (rep.objective - pl) / pl),
            pl_objective,
        });
    }
    let types = (1..=8).map(|t| CustomerType::from_index(t, 4).label()).collect();
    Ok(Report { kind, types, blocks })
}

impl Report {
    pub fn render(&self) -> String {
        let mut out = format!("Model {} priority lists, region R5, case C2\n", self.kind);
        for b in &self.blocks {
            out.push_str(&format!(
                "\nlambda = {}  objective {:.10}  ({:?}, {} nodes)\n",
                b.lambda, b.objective, b.status, b.nodes
            ));
            out.push_str("  p ");
            for t in &self.types {
                out.push_str(&format!("{t:>6}"));
            }
            out.push('\n');
            for (p, row) in b.cells.iter().enumerate() {
                out.push_str(&format!("  {} ", p + 1));
                for c in row {
                    out.push_str(&format!("{c:>6}"));
                }
                out.push('\n');
            }
            out.push_str(&format!(
                "  reference lists: gain {:.10}, {:.3e} below the optimum\n",
                b.reference_gain, b.reference_shortfall
            ));
            if let (Some(pl), Some(imp)) = (b.pl_objective, b.improvement_pct) {
                out.push_str(&format!("  PL optimum {pl:.10}; idling improves it by {imp:.3}%\n"));
            }
        }
        out
    }
}
