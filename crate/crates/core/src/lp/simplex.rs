//! Bounded revised primal simplex.

use alloc::vec;
use alloc::vec::Vec;

use super::lu::{BasisInverse, LuFactors};
use super::{Basis, Direction, RowSense, SparseLp, VarState};
use crate::{Error, Result};

const NO_VAR: usize = usize::MAX;

/// Tuning knobs for [`solve_lp`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexParams {
    pub max_iter: usize,
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub pivot_tol: f64,
    pub refactor_every: usize,
    /// Consecutive degenerate pivots before the bounds are perturbed, and
    /// after that before switching to Bland's rule.
    pub bland_after: usize,
    /// Record the objective after each iteration that ends primal feasible
    /// for the original bounds.
    pub record_trace: bool,
}

impl Default for SimplexParams {
    fn default() -> Self {
        SimplexParams {
            max_iter: 1_000_000,
            feas_tol: 1e-7,
            opt_tol: 1e-9,
            pivot_tol: 1e-9,
            refactor_every: 100,
            bland_after: 200,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimplexStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub status: SimplexStatus,
    /// Objective in the caller's direction.
    pub objective: f64,
    pub x: Vec<f64>,
    pub row_activity: Vec<f64>,
    /// Row prices for the caller's objective: `d objective / d rhs`.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
    pub basis: Basis,
    pub trace: Vec<f64>,
}

/// Solves from an all-slack starting basis.
pub fn solve_lp(lp: &SparseLp, params: &SimplexParams) -> Result<SimplexSolution> {
    solve_lp_from(lp, params, None)
}

/// Solves starting from `hint` when given. The hint need not be a valid
/// basis: missing or dependent columns are patched with slacks.
pub fn solve_lp_from(lp: &SparseLp, params: &SimplexParams, hint: Option<&Basis>) -> Result<SimplexSolution> {
    let mut s = Solver::new(lp, params);
    s.install(hint)?;
    s.run()
}

struct Solver<'a> {
    lp: &'a SparseLp,
    p: &'a SimplexParams,
    m: usize,
    n: usize,
    cost: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    x: Vec<f64>,
    head: Vec<usize>,
    pos_of: Vec<usize>,
    inv: BasisInverse,
    iterations: usize,
    trace: Vec<f64>,
    /// Original bounds while a perturbation is active.
    saved_bounds: Option<(Vec<f64>, Vec<f64>)>,
    perturbed_once: bool,
    // scratch
    alpha: Vec<f64>,
    y: Vec<f64>,
    cb: Vec<f64>,
    d: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn new(lp: &'a SparseLp, p: &'a SimplexParams) -> Self {
        let m = lp.num_rows();
        let n = lp.num_cols();
        let sign = match lp.direction {
            Direction::Minimize => 1.0,
            Direction::Maximize => -1.0,
        };
        let mut cost: Vec<f64> = lp.obj.iter().map(|c| sign * c).collect();
        cost.resize(n + m, 0.0);
        let mut lb = lp.col_lb.clone();
        let mut ub = lp.col_ub.clone();
        for sense in &lp.sense {
            let (l, u) = match sense {
                RowSense::Eq => (0.0, 0.0),
                RowSense::Le => (0.0, f64::INFINITY),
                RowSense::Ge => (f64::NEG_INFINITY, 0.0),
            };
            lb.push(l);
            ub.push(u);
        }
        Solver {
            lp,
            p,
            m,
            n,
            cost,
            lb,
            ub,
            x: vec![0.0; n + m],
            head: vec![NO_VAR; m],
            pos_of: vec![NO_VAR; n + m],
            inv: BasisInverse::default(),
            iterations: 0,
            trace: Vec::new(),
            saved_bounds: None,
            perturbed_once: false,
            alpha: vec![0.0; m],
            y: vec![0.0; m],
            cb: vec![0.0; m],
            d: vec![0.0; n + m],
        }
    }

    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j == NO_VAR {
            Vec::new()
        } else if j < self.n {
            let (r, v) = self.lp.a.col(j);
            r.iter().copied().zip(v.iter().copied()).collect()
        } else {
            vec![(j - self.n, 1.0)]
        }
    }

    fn nonbasic_value(&self, j: usize, state: VarState) -> f64 {
        let (l, u) = (self.lb[j], self.ub[j]);
        match state {
            VarState::Upper if u.is_finite() => u,
            VarState::Lower if l.is_finite() => l,
            _ => {
                if l.is_finite() {
                    l
                } else if u.is_finite() {
                    u
                } else {
                    0.0
                }
            }
        }
    }

    fn install(&mut self, hint: Option<&Basis>) -> Result<()> {
        let total = self.n + self.m;
        let mut states = vec![VarState::Lower; total];
        match hint {
            Some(b) if b.states.len() == total => {
                states.copy_from_slice(&b.states);
            }
            Some(b) => {
                return Err(Error::Input(alloc::format!("basis hint has {} entries, expected {total}", b.states.len())))
            }
            None => {
                for i in 0..self.m {
                    states[self.n + i] = VarState::Basic;
                }
            }
        }
        let mut k = 0;
        for j in 0..total {
            if states[j] == VarState::Basic {
                if k < self.m {
                    self.head[k] = j;
                    self.pos_of[j] = k;
                    k += 1;
                } else {
                    states[j] = VarState::Lower;
                }
            }
        }
        for j in 0..total {
            if states[j] != VarState::Basic {
                self.x[j] = self.nonbasic_value(j, states[j]);
            }
        }
        self.refactor()
    }

    fn refactor(&mut self) -> Result<()> {
        for _attempt in 0..3 {
            let cols: Vec<Vec<(usize, f64)>> = self.head.iter().map(|&j| self.column(j)).collect();
            match LuFactors::factorize(self.m, &cols) {
                Ok(lu) => {
                    self.inv = BasisInverse::new(lu);
                    self.recompute_primal();
                    return Ok(());
                }
                Err(sing) => {
                    for (&pos, &row) in sing.positions.iter().zip(&sing.rows) {
                        let out = self.head[pos];
                        if out != NO_VAR {
                            self.pos_of[out] = NO_VAR;
                            self.x[out] = self.nonbasic_value(out, VarState::Lower);
                        }
                        let slack = self.n + row;
                        self.head[pos] = slack;
                        self.pos_of[slack] = pos;
                    }
                }
            }
        }
        Err(Error::Internal("basis repair failed".into()))
    }

    /// Widens every finite bound by a small, index-dependent amount and
    /// moves nonbasic variables onto the widened bounds, so that ties in
    /// the ratio test become unlikely.
    fn perturb(&mut self) {
        self.saved_bounds = Some((self.lb.clone(), self.ub.clone()));
        self.perturbed_once = true;
        let base = 100.0 * self.p.feas_tol;
        for j in 0..self.n + self.m {
            let at_upper = self.pos_of[j] == NO_VAR
                && self.ub[j].is_finite()
                && self.x[j] == self.ub[j]
                && self.lb[j] != self.ub[j];
            let jitter = ((j as u64).wrapping_mul(2_654_435_761) % 1024) as f64 / 1024.0;
            let delta = base * (1.0 + jitter);
            if self.lb[j].is_finite() {
                self.lb[j] -= delta * (1.0 + self.lb[j].abs());
            }
            if self.ub[j].is_finite() {
                self.ub[j] += delta * (1.0 + self.ub[j].abs());
            }
            if self.pos_of[j] == NO_VAR {
                let state = if at_upper { VarState::Upper } else { VarState::Lower };
                self.x[j] = self.nonbasic_value(j, state);
            }
        }
        self.recompute_primal();
    }

    /// Undoes [`Self::perturb`]; returns false when no perturbation is active.
    fn restore_bounds(&mut self) -> bool {
        let Some((lb, ub)) = self.saved_bounds.take() else {
            return false;
        };
        for j in 0..self.n + self.m {
            if self.pos_of[j] == NO_VAR {
                let at_upper = self.ub[j].is_finite() && self.x[j] == self.ub[j] && self.lb[j] != self.ub[j];
                self.lb[j] = lb[j];
                self.ub[j] = ub[j];
                let state = if at_upper { VarState::Upper } else { VarState::Lower };
                self.x[j] = self.nonbasic_value(j, state);
            }
        }
        self.lb = lb;
        self.ub = ub;
        self.recompute_primal();
        true
    }

    fn recompute_primal(&mut self) {
        let mut r = self.lp.rhs.clone();
        for j in 0..self.n + self.m {
            if self.pos_of[j] == NO_VAR && self.x[j] != 0.0 {
                if j < self.n {
                    let (rows, vals) = self.lp.a.col(j);
                    for (i, v) in rows.iter().zip(vals) {
                        r[*i] -= v * self.x[j];
                    }
                } else {
                    r[j - self.n] -= self.x[j];
                }
            }
        }
        let mut xb = vec![0.0; self.m];
        self.inv.ftran_dense(&r, &mut xb);
        for (k, &j) in self.head.iter().enumerate() {
            self.x[j] = xb[k];
        }
    }

    /// Fills `cb` with phase costs; returns true when some basic variable
    /// is infeasible (phase one).
    fn phase_costs(&mut self) -> bool {
        let tol = self.p.feas_tol;
        let mut infeasible = false;
        for k in 0..self.m {
            let j = self.head[k];
            let v = self.x[j];
            self.cb[k] = if v < self.lb[j] - tol {
                infeasible = true;
                -1.0
            } else if v > self.ub[j] + tol {
                infeasible = true;
                1.0
            } else {
                0.0
            };
        }
        if !infeasible {
            for k in 0..self.m {
                self.cb[k] = self.cost[self.head[k]];
            }
        }
        infeasible
    }

    fn run(mut self) -> Result<SimplexSolution> {
        let tol = self.p.feas_tol;
        let mut degenerate_streak = 0usize;
        let status = loop {
            if self.iterations >= self.p.max_iter {
                self.restore_bounds();
                break SimplexStatus::IterLimit;
            }
            if degenerate_streak >= self.p.bland_after && !self.perturbed_once {
                self.perturb();
                degenerate_streak = 0;
            }
            let phase1 = self.phase_costs();
            let mut c = self.cb.clone();
            self.inv.btran(&mut c, &mut self.y);

            // Pricing.
            let bland = degenerate_streak >= self.p.bland_after;
            let mut best = NO_VAR;
            let mut best_score = 0.0;
            let mut best_dir = 0.0;
            for j in 0..self.n + self.m {
                if self.pos_of[j] != NO_VAR {
                    continue;
                }
                let cj = if phase1 { 0.0 } else { self.cost[j] };
                let dj = if j < self.n { cj - self.lp.a.col_dot(j, &self.y) } else { cj - self.y[j - self.n] };
                self.d[j] = dj;
                let can_up = self.x[j] < self.ub[j] - tol || self.ub[j] == f64::INFINITY;
                let can_down = self.x[j] > self.lb[j] + tol || self.lb[j] == f64::NEG_INFINITY;
                let dir = if dj < -self.p.opt_tol && can_up {
                    1.0
                } else if dj > self.p.opt_tol && can_down {
                    -1.0
                } else {
                    continue;
                };
                if self.lb[j] == self.ub[j] {
                    continue;
                }
                if bland {
                    best = j;
                    best_dir = dir;
                    break;
                }
                if dj.abs() > best_score {
                    best_score = dj.abs();
                    best = j;
                    best_dir = dir;
                }
            }
            if best == NO_VAR {
                if self.restore_bounds() {
                    degenerate_streak = 0;
                    continue;
                }
                if phase1 {
                    break SimplexStatus::Infeasible;
                }
                break SimplexStatus::Optimal;
            }
            let q = best;
            let dir = best_dir;
            {
                let col = self.column(q);
                let rows: Vec<usize> = col.iter().map(|e| e.0).collect();
                let vals: Vec<f64> = col.iter().map(|e| e.1).collect();
                self.inv.ftran_sparse(&rows, &vals, &mut self.alpha);
            }

            // Ratio test (two-pass Harris). Basic k moves by -dir*alpha_k per unit step.
            let mut theta_max = f64::INFINITY;
            for k in 0..self.m {
                let a = self.alpha[k];
                if a.abs() <= self.p.pivot_tol {
                    continue;
                }
                let j = self.head[k];
                let rate = -dir * a;
                let v = self.x[j];
                let lim = self.block_limit(j, v, rate, phase1, 0.5 * tol);
                if lim < theta_max {
                    theta_max = lim;
                }
            }
            let span = self.ub[q] - self.lb[q];
            let mut leave = NO_VAR;
            let mut theta;
            if span == f64::INFINITY && theta_max == f64::INFINITY {
                if self.restore_bounds() {
                    degenerate_streak = 0;
                    continue;
                }
                if phase1 {
                    return Err(Error::Internal("unbounded phase-one ray".into()));
                }
                break SimplexStatus::Unbounded;
            } else if span <= theta_max {
                theta = span;
            } else {
                let mut best_piv = 0.0;
                theta = 0.0;
                for k in 0..self.m {
                    let a = self.alpha[k];
                    if a.abs() <= self.p.pivot_tol {
                        continue;
                    }
                    let j = self.head[k];
                    let rate = -dir * a;
                    let exact = self.block_limit(j, self.x[j], rate, phase1, 0.0);
                    if exact <= theta_max {
                        let better = if bland { leave == NO_VAR || j < self.head[leave] } else { a.abs() > best_piv };
                        if better {
                            best_piv = a.abs();
                            leave = k;
                            theta = exact;
                        }
                    }
                }
                if leave == NO_VAR {
                    return Err(Error::Internal("ratio test found no leaving row".into()));
                }
                theta = theta.max(0.0);
            }

            // Apply the step.
            if theta != 0.0 {
                for k in 0..self.m {
                    let a = self.alpha[k];
                    if a != 0.0 {
                        self.x[self.head[k]] -= dir * theta * a;
                    }
                }
                self.x[q] += dir * theta;
            }
            if theta < 1e-12 {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            self.iterations += 1;
            if leave == NO_VAR {
                self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
            } else {
                let out = self.head[leave];
                let rate = -dir * self.alpha[leave];
                let v = self.x[out];
                // Snap the leaving variable to the bound it reached.
                self.x[out] = if rate < 0.0 {
                    if phase1 && v > self.ub[out] + tol {
                        self.ub[out]
                    } else {
                        self.lb[out]
                    }
                } else if phase1 && v < self.lb[out] - tol {
                    self.lb[out]
                } else {
                    self.ub[out]
                };
                if !self.x[out].is_finite() {
                    self.x[out] = v;
                }
                self.pos_of[out] = NO_VAR;
                self.head[leave] = q;
                self.pos_of[q] = leave;
                self.inv.update(leave, &self.alpha);
                if self.inv.num_updates() >= self.p.refactor_every || self.inv.eta_growth() > 2.0 {
                    self.refactor()?;
                }
            }
            if self.p.record_trace && !phase1 && self.saved_bounds.is_none() {
                let caller: f64 = self.lp.obj.iter().zip(&self.x).map(|(c, x)| c * x).sum();
                self.trace.push(caller);
            }
        };

        self.refactor()?;
        let phase1 = self.phase_costs();
        let status = if status == SimplexStatus::Optimal && phase1 { SimplexStatus::Infeasible } else { status };
        if !phase1 {
            let mut c = self.cb.clone();
            self.inv.btran(&mut c, &mut self.y);
        }
        Ok(self.finish(status))
    }

    /// Largest step before basic variable `j` (value `v`, moving at `rate`)
    /// hits a bound, with `tol` slack.
    fn block_limit(&self, j: usize, v: f64, rate: f64, phase1: bool, tol: f64) -> f64 {
        let (l, u) = (self.lb[j], self.ub[j]);
        let ftol = self.p.feas_tol;
        if rate < 0.0 {
            if phase1 && v > u + ftol {
                ((v - u) + tol) / -rate
            } else if v < l - ftol {
                f64::INFINITY
            } else if l.is_finite() {
                ((v - l) + tol).max(0.0) / -rate
            } else {
                f64::INFINITY
            }
        } else if phase1 && v < l - ftol {
            ((l - v) + tol) / rate
        } else if v > u + ftol {
            f64::INFINITY
        } else if u.is_finite() {
            ((u - v) + tol).max(0.0) / rate
        } else {
            f64::INFINITY
        }
    }

    fn finish(self, status: SimplexStatus) -> SimplexSolution {
        let sign = match self.lp.direction {
            Direction::Minimize => 1.0,
            Direction::Maximize => -1.0,
        };
        let x: Vec<f64> = self.x[..self.n].to_vec();
        let mut row_activity = vec![0.0; self.m];
        self.lp.a.mul_add(&x, 1.0, &mut row_activity);
        let duals: Vec<f64> = self.y.iter().map(|v| sign * v).collect();
        let reduced_costs: Vec<f64> =
            (0..self.n).map(|j| sign * (self.cost[j] - self.lp.a.col_dot(j, &self.y))).collect();
        let objective = self.lp.obj.iter().zip(&x).map(|(c, v)| c * v).sum();
        let states = (0..self.n + self.m)
            .map(|j| {
                if self.pos_of[j] != NO_VAR {
                    VarState::Basic
                } else if self.ub[j].is_finite() && self.x[j] == self.ub[j] && self.lb[j] != self.ub[j] {
                    VarState::Upper
                } else {
                    VarState::Lower
                }
            })
            .collect();
        SimplexSolution {
            status,
            objective,
            x,
            row_activity,
            duals,
            reduced_costs,
            iterations: self.iterations,
            basis: Basis { states },
            trace: self.trace,
        }
    }
}
