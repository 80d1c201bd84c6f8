//! Models U, PL and PLI as sparse optimization problems.
//!
//! Column order is deterministic: occupation columns `y(s, w, a)` sorted by
//! (configuration, type, action key), then list binaries `z(w, u, p)` sorted
//! by (type, universe entry, priority). Rows are flow balance per event-state,
//! the normalization row, per-type assignment rows (one per universe entry,
//! then one per priority), and finally the variable-upper-bound rows ordered
//! by (configuration, type, action, priority).

mod lists;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use crate::mdp::ModelKind;
pub use lists::{ListEntry, PriorityLists};

use crate::lp::{Basis, CscMatrix, Direction, RowSense, SparseLp, VarState};
use crate::mdp::{Action, MdpModel, DEFAULT_STATE_CAP};
use crate::scenario::Scenario;
use crate::{Error, Result};
pub(crate) use lists::has_idle;

/// Occupation-measure column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct YColumn {
    pub event: usize,
    pub action: Action,
}

/// List binary: `entry` holds priority `priority` (1-based) for type `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZColumn {
    pub t: usize,
    pub entry: ListEntry,
    pub priority: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowClass {
    Flow,
    Normalization,
    /// Each universe entry takes exactly one priority.
    EntryAssignment,
    /// Each priority holds exactly one entry.
    PriorityAssignment,
    Vub,
}

/// Variable-upper-bound row
/// `y(s,w,a) + sum_{a' in X(s,w), a' != a} z(w,a',p) - sum_{p' < p} z(w,a,p') <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VubRow {
    pub row: usize,
    pub y: usize,
    pub t: usize,
    /// Universe index of the row's own action.
    pub u: usize,
    pub priority: usize,
}

/// A model instance: the full sparse problem plus the metadata needed to
/// map solutions back to policies and lists.
#[derive(Debug, Clone)]
pub struct MipProblem {
    pub kind: ModelKind,
    pub scenario: Scenario,
    pub model: MdpModel,
    /// Full problem (maximization) over `y` then `z` columns.
    pub lp: SparseLp,
    /// Binary columns; empty for a pure LP.
    pub binaries: Vec<usize>,
    pub y_cols: Vec<YColumn>,
    /// `y` columns of event `e` are `event_start[e]..event_start[e + 1]`.
    pub event_start: Vec<usize>,
    pub z_cols: Vec<ZColumn>,
    z_base: Vec<usize>,
    pub row_class: Vec<RowClass>,
    pub vub_rows: Vec<VubRow>,
    /// Lists whose binaries were fixed by [`fix_lists`].
    pub fixed_lists: Option<PriorityLists>,
}

/// Exact counts by row and column class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub n_vars: usize,
    pub n_y: usize,
    pub n_binaries: usize,
    pub n_rows: usize,
    pub n_flow_rows: usize,
    pub n_normalization_rows: usize,
    pub n_assignment_rows: usize,
    pub n_vub_rows: usize,
    pub n_states: usize,
    pub nnz: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NodeLimit,
    TimeLimit,
    IterLimit,
}

/// Outcome of solving a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub kind: ModelKind,
    pub status: SolveStatus,
    /// Average reward per stage of the incumbent.
    pub objective: f64,
    /// Proven upper bound on the optimum.
    pub bound: f64,
    /// Nonzero `y` entries as `(column, value)`.
    pub y: Vec<(usize, f64)>,
    pub lists: Option<PriorityLists>,
    pub nodes: usize,
    pub simplex_iterations: usize,
    pub wall_time_secs: Option<f64>,
}

impl SolveReport {
    /// Dense `y` over the problem's occupation columns.
    pub fn y_dense(&self, problem: &MipProblem) -> Vec<f64> {
        let mut y = vec![0.0; problem.num_y()];
        for &(k, v) in &self.y {
            y[k] = v;
        }
        y
    }
}

/// Builds the model with the default state cap.
pub fn build_model(scenario: &Scenario, kind: ModelKind) -> Result<MipProblem> {
    build_model_capped(scenario, kind, DEFAULT_STATE_CAP)
}

pub fn build_model_capped(scenario: &Scenario, kind: ModelKind, cap: u64) -> Result<MipProblem> {
    let model = MdpModel::with_cap(scenario, kind, cap)?;
    let nt = model.num_types();
    let n_events = model.num_event_states();
    let (m, n) = (model.m(), model.n());

    let mut y_cols = Vec::new();
    let mut event_start = Vec::with_capacity(n_events + 1);
    let mut acts = Vec::new();
    for e in 0..n_events {
        event_start.push(y_cols.len());
        let (s, t) = (e / nt, e % nt);
        model.action_set_into(s, t, &mut acts);
        for &a in &acts {
            y_cols.push(YColumn { event: e, action: a });
        }
    }
    event_start.push(y_cols.len());
    let n_y = y_cols.len();

    let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(n_y * 12);
    let mut obj = Vec::with_capacity(n_y);
    let norm_row = n_events;
    let mut next = Vec::new();
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for (k, yc) in y_cols.iter().enumerate() {
        let (s, t) = (yc.event / nt, yc.event % nt);
        obj.push(model.reward(t, yc.action));
        model.next_events(model.post_decision(s, t, yc.action), &mut next);
        entries.clear();
        entries.push((yc.event, 1.0));
        for &(e2, p) in &next {
            if let Some(x) = entries.iter_mut().find(|x| x.0 == e2) {
                x.1 -= p;
            } else {
                entries.push((e2, -p));
            }
        }
        for &(r, v) in &entries {
            trip.push((r, k, v));
        }
        trip.push((norm_row, k, 1.0));
    }
    let mut sense = vec![RowSense::Eq; n_events + 1];
    let mut rhs = vec![0.0; n_events];
    rhs.push(1.0);
    let mut row_class = vec![RowClass::Flow; n_events];
    row_class.push(RowClass::Normalization);
    let mut col_lb = vec![0.0; n_y];
    let mut col_ub = vec![f64::INFINITY; n_y];

    let mut z_cols = Vec::new();
    let mut z_base = Vec::new();
    let mut vub_rows = Vec::new();
    if kind.has_lists() {
        for t in 1..nt {
            let idle = has_idle(kind, n, t);
            let size = m + usize::from(idle);
            z_base.push(n_y + z_cols.len());
            for u in 0..size {
                for p in 1..=size {
                    z_cols.push(ZColumn { t, entry: ListEntry::from_universe_index(u, idle), priority: p });
                }
            }
        }
        let mut row = n_events + 1;
        for t in 1..nt {
            let size = m + usize::from(has_idle(kind, n, t));
            let base = z_base[t - 1];
            for u in 0..size {
                for p in 1..=size {
                    trip.push((row, base + u * size + p - 1, 1.0));
                }
                row_class.push(RowClass::EntryAssignment);
                row += 1;
            }
            for p in 1..=size {
                for u in 0..size {
                    trip.push((row, base + u * size + p - 1, 1.0));
                }
                row_class.push(RowClass::PriorityAssignment);
                row += 1;
            }
        }
        let n_assign = row - n_events - 1;
        sense.extend(core::iter::repeat(RowSense::Eq).take(n_assign));
        rhs.extend(core::iter::repeat(1.0).take(n_assign));

        for s in 0..model.space.len() {
            for t in 1..nt {
                let e = model.event_index(s, t);
                let cols = event_start[e]..event_start[e + 1];
                if cols.len() < 2 {
                    continue;
                }
                let idle = has_idle(kind, n, t);
                let size = m + usize::from(idle);
                let base = z_base[t - 1];
                let uidx: Vec<usize> = cols.clone().map(|k| action_universe_index(y_cols[k].action, idle)).collect();
                let top = size - cols.len() + 1;
                for (a_pos, k) in cols.clone().enumerate() {
                    let u = uidx[a_pos];
                    for p in 1..=top {
                        trip.push((row, k, 1.0));
                        for (b_pos, &u2) in uidx.iter().enumerate() {
                            if b_pos != a_pos {
                                trip.push((row, base + u2 * size + p - 1, 1.0));
                            }
                        }
                        for p2 in 1..p {
                            trip.push((row, base + u * size + p2 - 1, -1.0));
                        }
                        vub_rows.push(VubRow { row, y: k, t, u, priority: p });
                        row_class.push(RowClass::Vub);
                        sense.push(RowSense::Le);
                        rhs.push(1.0);
                        row += 1;
                    }
                }
            }
        }
        obj.extend(core::iter::repeat(0.0).take(z_cols.len()));
        col_lb.extend(core::iter::repeat(0.0).take(z_cols.len()));
        col_ub.extend(core::iter::repeat(1.0).take(z_cols.len()));
    }

    let n_cols = n_y + z_cols.len();
    let a = CscMatrix::from_triplets(row_class.len(), n_cols, &trip)?;
    let lp = SparseLp::new(Direction::Maximize, obj, col_lb, col_ub, a, sense, rhs)?;
    Ok(MipProblem {
        kind,
        scenario: scenario.clone(),
        model,
        lp,
        binaries: (n_y..n_cols).collect(),
        y_cols,
        event_start,
        z_cols,
        z_base,
        row_class,
        vub_rows,
        fixed_lists: None,
    })
}

pub(crate) fn action_universe_index(a: Action, with_idle: bool) -> usize {
    match a {
        Action::Idle => 0,
        Action::Dispatch(j) => j + usize::from(with_idle),
        Action::Null => usize::MAX,
    }
}

impl MipProblem {
    pub fn num_y(&self) -> usize {
        self.y_cols.len()
    }

    pub fn num_flow_rows(&self) -> usize {
        self.model.num_event_states()
    }

    /// Size of the list universe of type `t`.
    pub fn universe_size(&self, t: usize) -> usize {
        self.model.m() + usize::from(has_idle(self.kind, self.model.n(), t))
    }

    /// Column of `z(t, entry at universe index u, priority p)`.
    pub fn z_col(&self, t: usize, u: usize, p: usize) -> usize {
        self.z_base[t - 1] + u * self.universe_size(t) + p - 1
    }

    /// Column of `y(e, a)`, if `a` is available in event `e`.
    pub fn y_col(&self, e: usize, a: Action) -> Option<usize> {
        (self.event_start[e]..self.event_start[e + 1]).find(|&k| self.y_cols[k].action == a)
    }

    /// The flow and normalization rows over the `y` columns only, with
    /// the given column upper bounds.
    pub fn y_block(&self, y_ub: Vec<f64>) -> SparseLp {
        let rows = self.num_flow_rows() + 1;
        let trip: Vec<(usize, usize, f64)> =
            self.lp.a.triplets().filter(|&(r, c, _)| r < rows && c < self.num_y()).collect();
        SparseLp {
            direction: Direction::Maximize,
            obj: self.lp.obj[..self.num_y()].to_vec(),
            col_lb: vec![0.0; self.num_y()],
            col_ub: y_ub,
            a: CscMatrix::from_triplets(rows, self.num_y(), &trip).expect("sub-block of a valid matrix"),
            sense: self.lp.sense[..rows].to_vec(),
            rhs: self.lp.rhs[..rows].to_vec(),
        }
    }

    /// Basis of an LP whose leading columns and rows are this problem's
    /// `y` block and whose `y` columns of `actions` form the basic set:
    /// feasible with `y` equal to the policy's stationary measure.
    pub fn policy_basis(&self, lp: &SparseLp, actions: &[Action]) -> Basis {
        let n = lp.num_cols();
        let mut states = vec![VarState::Lower; n + lp.num_rows()];
        for (e, &a) in actions.iter().enumerate() {
            if let Some(k) = self.y_col(e, a) {
                states[k] = VarState::Basic;
            }
        }
        states[n] = VarState::Basic;
        for j in self.num_y()..n {
            if lp.col_lb[j] == lp.col_ub[j] && lp.col_ub[j] > 0.0 {
                states[j] = VarState::Upper;
            }
        }
        Basis { states }
    }

    /// Objective of a `y` vector.
    pub fn objective_of_y(&self, y: &[f64]) -> f64 {
        self.lp.obj[..self.num_y()].iter().zip(y).map(|(c, v)| c * v).sum()
    }

    /// Largest flow-balance violation of `y`, and `|sum y - 1|`.
    pub fn flow_residual(&self, y: &[f64]) -> (f64, f64) {
        let rows = self.num_flow_rows();
        let mut act = vec![0.0; self.lp.num_rows()];
        for (k, &v) in y.iter().enumerate() {
            if v != 0.0 {
                let (r, a) = self.lp.a.col(k);
                for (i, c) in r.iter().zip(a) {
                    act[*i] += c * v;
                }
            }
        }
        let flow = act[..rows].iter().fold(0.0f64, |w, v| w.max(v.abs()));
        (flow, (act[rows] - 1.0).abs())
    }

    /// `y` upper bounds implied by fixed lists: actions other than the
    /// prescribed one are closed in every event-state with two or more.
    pub fn list_y_bounds(&self, lists: &PriorityLists) -> Vec<f64> {
        let actions = lists.policy_actions(&self.model);
        let mut ub = vec![f64::INFINITY; self.num_y()];
        for e in 0..self.model.num_event_states() {
            let cols = self.event_start[e]..self.event_start[e + 1];
            if cols.len() >= 2 {
                for k in cols {
                    if self.y_cols[k].action != actions[e] {
                        ub[k] = 0.0;
                    }
                }
            }
        }
        ub
    }

    /// 0/1 values of the list binaries encoding `lists`.
    pub fn z_values(&self, lists: &PriorityLists) -> Vec<f64> {
        let mut z = vec![0.0; self.z_cols.len()];
        for t in 1..self.model.num_types() {
            let idle = has_idle(self.kind, self.model.n(), t);
            for (p0, &entry) in lists.for_type(t).iter().enumerate() {
                z[self.z_col(t, entry.universe_index(idle), p0 + 1) - self.num_y()] = 1.0;
            }
        }
        z
    }

    fn check_lists(&self, lists: &PriorityLists) -> Result<()> {
        lists.validate()?;
        let want_kind = if self.kind == ModelKind::PLI { ModelKind::PLI } else { ModelKind::PL };
        let got_kind = if lists.kind == ModelKind::PLI { ModelKind::PLI } else { ModelKind::PL };
        if lists.m != self.model.m() || lists.n != self.model.n() || want_kind != got_kind {
            return Err(Error::Input(format!(
                "lists for {} with m={}, n={} do not fit a {} model with m={}, n={}",
                lists.kind,
                lists.m,
                lists.n,
                self.kind,
                self.model.m(),
                self.model.n()
            )));
        }
        Ok(())
    }
}

/// Counts by row class.
pub fn dimensions(problem: &MipProblem) -> Dimensions {
    let count = |c: RowClass| problem.row_class.iter().filter(|&&r| r == c).count();
    Dimensions {
        n_vars: problem.lp.num_cols(),
        n_y: problem.num_y(),
        n_binaries: problem.binaries.len(),
        n_rows: problem.lp.num_rows(),
        n_flow_rows: count(RowClass::Flow),
        n_normalization_rows: count(RowClass::Normalization),
        n_assignment_rows: count(RowClass::EntryAssignment) + count(RowClass::PriorityAssignment),
        n_vub_rows: count(RowClass::Vub),
        n_states: problem.model.space.len(),
        nnz: problem.lp.a.nnz(),
    }
}

/// Fixes every list binary to the pattern of `lists`. The result is a pure
/// LP: assignment rows are dropped (they hold identically) and VUB rows
/// become zero upper bounds on the closed `y` columns.
pub fn fix_lists(problem: &MipProblem, lists: &PriorityLists) -> Result<MipProblem> {
    if !problem.kind.has_lists() {
        return Err(Error::Input(format!("model {} has no priority lists", problem.kind)));
    }
    problem.check_lists(lists)?;
    let keep = problem.num_flow_rows() + 1;
    let n_y = problem.num_y();
    let z = problem.z_values(lists);
    let trip: Vec<(usize, usize, f64)> = problem.lp.a.triplets().filter(|&(r, _, _)| r < keep).collect();
    let mut col_ub = problem.list_y_bounds(lists);
    col_ub.extend_from_slice(&z);
    let mut col_lb = vec![0.0; n_y];
    col_lb.extend_from_slice(&z);
    let lp = SparseLp::new(
        Direction::Maximize,
        problem.lp.obj.clone(),
        col_lb,
        col_ub,
        CscMatrix::from_triplets(keep, problem.lp.num_cols(), &trip)?,
        problem.lp.sense[..keep].to_vec(),
        problem.lp.rhs[..keep].to_vec(),
    )?;
    Ok(MipProblem {
        lp,
        binaries: Vec::new(),
        row_class: problem.row_class[..keep].to_vec(),
        vub_rows: Vec::new(),
        fixed_lists: Some(lists.clone()),
        ..problem.clone()
    })
}

/// Reads priority lists off integral list binaries (`z[k]` is the value of
/// the `k`-th list column).
pub fn extract_lists(problem: &MipProblem, z: &[f64]) -> Result<PriorityLists> {
    const TOL: f64 = 1e-6;
    if z.len() != problem.z_cols.len() {
        return Err(Error::Contract(format!("expected {} list values, got {}", problem.z_cols.len(), z.len())));
    }
    let n_y = problem.num_y();
    let (m, n) = (problem.model.m(), problem.model.n());
    let mut lists = Vec::with_capacity(2 * n);
    for t in 1..problem.model.num_types() {
        let idle = has_idle(problem.kind, n, t);
        let size = problem.universe_size(t);
        let mut list = Vec::with_capacity(size);
        let mut used = vec![false; size];
        for p in 1..=size {
            let mut chosen = None;
            for u in 0..size {
                let v = z[problem.z_col(t, u, p) - n_y];
                if (v - crate::math::round(v)).abs() > TOL || !(-TOL..=1.0 + TOL).contains(&v) {
                    return Err(Error::Contract(format!("list value {v} is not integral")));
                }
                if v > 0.5 {
                    if chosen.is_some() || used[u] {
                        return Err(Error::Contract(format!(
                            "inconsistent list assignment for type {t} at priority {p}"
                        )));
                    }
                    chosen = Some(u);
                }
            }
            let u = chosen.ok_or_else(|| Error::Contract(format!("priority {p} of type {t} is empty")))?;
            used[u] = true;
            list.push(ListEntry::from_universe_index(u, idle));
        }
        lists.push(list);
    }
    PriorityLists::new(problem.kind, m, n, lists)
}
