//! Branch-and-bound over the priority-list binaries.
//!
//! Nodes fix a prefix of each type's list. The relaxation at a node is the
//! occupation LP with every action closed that the fixed prefixes rule
//! out: in an event-state whose available actions include a prefix entry,
//! only the first such entry stays open. This is exactly what the VUB rows
//! enforce once their binaries are fixed; rows that still involve free
//! binaries are relaxed away, and the relaxation is exact at leaves.
//! Branching fixes the next position of one type's list to a candidate
//! (propagation removes that entry from later positions) or forbids it.

use alloc::collections::BTreeMap;
use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::formulations::{
    action_universe_index, has_idle, ListEntry, MipProblem, PriorityLists, SolveReport, SolveStatus,
};
use crate::lp::{solve_lp_from, Basis, SimplexParams, SimplexStatus, SparseLp};
use crate::mdp::ModelKind;
use crate::policy::{closest_lists, stationary};
use crate::{Error, Result};

/// Event-state spaces up to this size get a final cross-check of the
/// incumbent against the dense evaluation oracle.
const ORACLE_CHECK_MAX_STATES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchRule {
    /// Branch on the type whose next list position carries the most
    /// conflicting occupation mass, at its heaviest candidate.
    AssignmentRow,
    /// Branch on the candidate whose implied binary is closest to 1/2.
    MostFractional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnbParams {
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub node_limit: usize,
    /// Wall-clock limit; honoured only with the `std` feature.
    pub time_limit_secs: Option<f64>,
    pub branch_rule: BranchRule,
    pub simplex: SimplexParams,
    pub integrality_tol: f64,
}

impl Default for BnbParams {
    fn default() -> Self {
        BnbParams {
            abs_gap: 1e-6,
            rel_gap: 1e-6,
            node_limit: 1_000_000,
            time_limit_secs: None,
            branch_rule: BranchRule::AssignmentRow,
            simplex: SimplexParams::default(),
            integrality_tol: 1e-6,
        }
    }
}

/// One processed node, for auditing the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    /// Relaxation value (the parent's for nodes that reuse it).
    pub bound: f64,
}

struct Timer {
    #[cfg(feature = "std")]
    start: std::time::Instant,
}

impl Timer {
    fn new() -> Self {
        Timer {
            #[cfg(feature = "std")]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed(&self) -> Option<f64> {
        #[cfg(feature = "std")]
        {
            Some(self.start.elapsed().as_secs_f64())
        }
        #[cfg(not(feature = "std"))]
        {
            None
        }
    }
}

/// Solves a model. Pure LPs (Model U, or problems from `fix_lists`) are
/// solved directly; otherwise branch-and-bound runs over the lists.
pub fn solve_mip(problem: &MipProblem, params: &BnbParams) -> Result<SolveReport> {
    solve_mip_logged(problem, params).map(|r| r.0)
}

/// As [`solve_mip`], also returning every processed node.
pub fn solve_mip_logged(problem: &MipProblem, params: &BnbParams) -> Result<(SolveReport, Vec<NodeRecord>)> {
    if params.abs_gap < 0.0 || params.rel_gap < 0.0 {
        return Err(Error::Input("gaps must be nonnegative".into()));
    }
    let timer = Timer::new();
    if problem.binaries.is_empty() {
        let report = solve_pure(problem, params, &timer)?;
        let rec = NodeRecord { id: 0, parent: None, depth: 0, bound: report.bound };
        return Ok((report, vec![rec]));
    }
    Search::new(problem, params, timer)?.run()
}

fn lp_status(s: SimplexStatus) -> SolveStatus {
    match s {
        SimplexStatus::Optimal => SolveStatus::Optimal,
        SimplexStatus::Infeasible => SolveStatus::Infeasible,
        SimplexStatus::Unbounded => SolveStatus::Infeasible,
        SimplexStatus::IterLimit => SolveStatus::IterLimit,
    }
}

fn sparse_y(x: &[f64]) -> Vec<(usize, f64)> {
    x.iter().enumerate().filter(|(_, v)| v.abs() > 1e-15).map(|(k, v)| (k, *v)).collect()
}

fn solve_pure(problem: &MipProblem, params: &BnbParams, timer: &Timer) -> Result<SolveReport> {
    let start_lists = problem.fixed_lists.clone().unwrap_or_else(|| closest_lists(&problem.scenario, problem.kind));
    let basis = problem.policy_basis(&problem.lp, &start_lists.policy_actions(&problem.model));
    let sol = solve_lp_from(&problem.lp, &params.simplex, Some(&basis))?;
    let status = lp_status(sol.status);
    if status == SolveStatus::Optimal && sol.status != SimplexStatus::Optimal {
        return Err(Error::Internal("unexpected LP status".into()));
    }
    Ok(SolveReport {
        kind: problem.kind,
        status,
        objective: sol.objective,
        bound: sol.objective,
        y: sparse_y(&sol.x[..problem.num_y()]),
        lists: problem.fixed_lists.clone(),
        nodes: 1,
        simplex_iterations: sol.iterations,
        wall_time_secs: timer.elapsed(),
    })
}

/// Fixed list prefixes of every type, in universe indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Prefixes {
    lists: Vec<Vec<u8>>,
    /// Universe entries forbidden at the next position, per type.
    forbid: Vec<u64>,
}

struct Node {
    id: usize,
    parent: Option<usize>,
    depth: usize,
    bound: f64,
    fix: Prefixes,
    /// Relaxation solution inherited unchanged from the parent.
    reuse: Option<Rc<(Vec<f64>, f64)>>,
    warm: Option<Rc<Basis>>,
}

struct Queued(Node);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.bound.total_cmp(&other.0.bound).then(other.0.id.cmp(&self.0.id))
    }
}

/// Outcome of scanning a relaxation solution for list consistency.
struct Scan {
    /// Completed lists implied greedily by the occupation mass.
    chain: Vec<Vec<u8>>,
    /// Per type: occupation mass on actions the chain disagrees with.
    conflict: Vec<f64>,
    /// Per type: mass per candidate at the next open position.
    next_mass: Vec<Vec<f64>>,
}

struct Search<'a> {
    problem: &'a MipProblem,
    params: &'a BnbParams,
    timer: Timer,
    lp: SparseLp,
    /// Per type: event-states with two or more actions, and their
    /// available universe entries.
    events: Vec<Vec<(usize, Vec<u8>)>>,
    sizes: Vec<usize>,
    /// Per type and position: entries excluded by the problem's own bounds.
    bound_forbid: Vec<Vec<u64>>,
    incumbent: Option<(Vec<Vec<u8>>, f64, Vec<f64>)>,
    evaluated: BTreeMap<Vec<Vec<u8>>, f64>,
    iterations: usize,
    next_id: usize,
    log: Vec<NodeRecord>,
    pruned_bound: f64,
}

impl<'a> Search<'a> {
    fn new(problem: &'a MipProblem, params: &'a BnbParams, timer: Timer) -> Result<Self> {
        let model = &problem.model;
        let n = model.n();
        let nt = model.num_types();
        let mut events = vec![Vec::new(); nt - 1];
        let mut sizes = Vec::with_capacity(nt - 1);
        for t in 1..nt {
            sizes.push(problem.universe_size(t));
        }
        if sizes.iter().any(|&s| s > 64) {
            return Err(Error::Resource {
                what: "list universe",
                required: sizes.iter().copied().max().unwrap() as u64,
                cap: 64,
            });
        }
        for s in 0..model.space.len() {
            for t in 1..nt {
                let e = model.event_index(s, t);
                let cols = problem.event_start[e]..problem.event_start[e + 1];
                if cols.len() >= 2 {
                    let idle = has_idle(problem.kind, n, t);
                    let avail = cols.map(|k| action_universe_index(problem.y_cols[k].action, idle) as u8).collect();
                    events[t - 1].push((e, avail));
                }
            }
        }
        let n_y = problem.num_y();
        let mut bound_forbid = Vec::with_capacity(nt - 1);
        for t in 1..nt {
            let size = sizes[t - 1];
            let mut per_pos = vec![0u64; size];
            for (p, mask) in per_pos.iter_mut().enumerate() {
                for u in 0..size {
                    let c = problem.z_col(t, u, p + 1);
                    if problem.lp.col_ub[c] < 0.5 {
                        *mask |= 1 << u;
                    }
                }
                // A binary fixed to one excludes every other entry here.
                for u in 0..size {
                    let c = problem.z_col(t, u, p + 1);
                    if problem.lp.col_lb[c] > 0.5 {
                        *mask |= !(1u64 << u) & ((1u64 << size) - 1);
                    }
                }
            }
            bound_forbid.push(per_pos);
        }
        let lp = problem.y_block(vec![f64::INFINITY; n_y]);
        Ok(Search {
            problem,
            params,
            timer,
            lp,
            events,
            sizes,
            bound_forbid,
            incumbent: None,
            evaluated: BTreeMap::new(),
            iterations: 0,
            next_id: 0,
            log: Vec::new(),
            pruned_bound: f64::NEG_INFINITY,
        })
    }

    fn idle_type(&self, t: usize) -> bool {
        has_idle(self.problem.kind, self.problem.model.n(), t)
    }

    /// Whether the prefix of type index `k` determines every decision.
    fn complete(&self, k: usize, prefix: &[u8]) -> bool {
        prefix.len() + 1 >= self.sizes[k] || (self.idle_type(k + 1) && prefix.contains(&0))
    }

    fn set_bounds(&mut self, lists: &[Vec<u8>]) {
        let p = self.problem;
        for v in self.lp.col_ub.iter_mut() {
            *v = f64::INFINITY;
        }
        for (k, evs) in self.events.iter().enumerate() {
            let prefix = &lists[k];
            if prefix.is_empty() {
                continue;
            }
            let idle = has_idle(p.kind, p.model.n(), k + 1);
            for (e, avail) in evs {
                if let Some(&first) = prefix.iter().find(|u| avail.contains(u)) {
                    for c in p.event_start[*e]..p.event_start[e + 1] {
                        if action_universe_index(p.y_cols[c].action, idle) as u8 != first {
                            self.lp.col_ub[c] = 0.0;
                        }
                    }
                }
            }
        }
    }

    fn policy_of(&self, lists: &[Vec<u8>]) -> PriorityLists {
        let n = self.problem.model.n();
        let out = lists
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let idle = self.idle_type(k + 1);
                l.iter().map(|&u| ListEntry::from_universe_index(u as usize, idle)).collect()
            })
            .collect();
        let kind = if self.problem.kind == ModelKind::PLI { ModelKind::PLI } else { ModelKind::PL };
        PriorityLists { kind, m: self.problem.model.m(), n, lists: out }
    }

    fn respects_bounds(&self, lists: &[Vec<u8>]) -> bool {
        lists
            .iter()
            .enumerate()
            .all(|(k, l)| l.iter().enumerate().all(|(p, &u)| self.bound_forbid[k][p] & (1 << u) == 0))
    }

    /// Value and occupation measure of complete lists.
    fn evaluate(&mut self, lists: &[Vec<u8>]) -> Result<(f64, Vec<f64>)> {
        self.set_bounds(lists);
        let actions = self.policy_of(lists).policy_actions(&self.problem.model);
        let basis = self.problem.policy_basis(&self.lp, &actions);
        let sol = solve_lp_from(&self.lp, &self.params.simplex, Some(&basis))?;
        self.iterations += sol.iterations;
        if sol.status != SimplexStatus::Optimal {
            return Err(Error::Internal(format!("fixed-list LP ended {:?}", sol.status)));
        }
        Ok((sol.objective, sol.x))
    }

    fn offer(&mut self, lists: Vec<Vec<u8>>) -> Result<()> {
        if self.evaluated.contains_key(&lists) || !self.respects_bounds(&lists) {
            return Ok(());
        }
        let (v, y) = self.evaluate(&lists)?;
        self.evaluated.insert(lists.clone(), v);
        if self.incumbent.as_ref().map_or(true, |inc| v > inc.1) {
            self.incumbent = Some((lists, v, y));
        }
        Ok(())
    }

    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            Some((_, v, _)) => v + self.params.abs_gap.max(self.params.rel_gap * v.abs()),
            None => f64::NEG_INFINITY,
        }
    }

    fn scan(&self, y: &[f64], fix: &Prefixes) -> Scan {
        let p = self.problem;
        let nk = self.sizes.len();
        let mut chain = Vec::with_capacity(nk);
        let mut conflict = vec![0.0; nk];
        let mut next_mass = vec![Vec::new(); nk];
        for k in 0..nk {
            let size = self.sizes[k];
            let mut list = fix.lists[k].clone();
            let mut open: Vec<(usize, &Vec<u8>)> = self.events[k]
                .iter()
                .filter(|(_, avail)| !list.iter().any(|u| avail.contains(u)))
                .map(|(e, a)| (*e, a))
                .collect();
            let mut first = true;
            while list.len() < size {
                let mut mass = vec![0.0; size];
                for (e, avail) in &open {
                    for (c, u) in (p.event_start[*e]..p.event_start[e + 1]).zip(avail.iter()) {
                        mass[*u as usize] += y[c];
                    }
                }
                let pos = list.len();
                let excluded = |u: usize| {
                    list.contains(&(u as u8))
                        || self.bound_forbid[k][pos] & (1 << u) != 0
                        || (first && fix.forbid[k] & (1 << u) != 0)
                };
                let mut pick = None;
                for u in 0..size {
                    if excluded(u) {
                        continue;
                    }
                    if pick.map_or(true, |b: usize| mass[u] > mass[b]) {
                        pick = Some(u);
                    }
                }
                let pick = match pick {
                    Some(u) => u,
                    // Only bound-excluded entries remain; take the lowest unused.
                    None => (0..size).find(|&u| !list.contains(&(u as u8))).unwrap(),
                };
                if first {
                    for u in 0..size {
                        if excluded(u) {
                            mass[u] = 0.0;
                        }
                    }
                    next_mass[k] = mass;
                    first = false;
                }
                list.push(pick as u8);
                open.retain(|(e, avail)| {
                    if let Some(i) = avail.iter().position(|&u| u as usize == pick) {
                        let cols = p.event_start[*e]..p.event_start[e + 1];
                        let total: f64 = cols.clone().map(|c| y[c]).sum();
                        conflict[k] += total - y[cols.start + i];
                        false
                    } else {
                        true
                    }
                });
            }
            chain.push(list);
        }
        Scan { chain, conflict, next_mass }
    }

    fn new_node(
        &mut self,
        parent: &Node,
        fix: Prefixes,
        bound: f64,
        reuse: Option<Rc<(Vec<f64>, f64)>>,
        warm: Option<Rc<Basis>>,
    ) -> Node {
        self.next_id += 1;
        Node { id: self.next_id, parent: Some(parent.id), depth: parent.depth + 1, bound, fix, reuse, warm }
    }

    /// Children of a node for branching on position `pos` of type index
    /// `k` at candidate `u`: fix it, or forbid it.
    fn branch(&mut self, node: &Node, k: usize, u: usize, y: Rc<(Vec<f64>, f64)>, warm: Rc<Basis>) -> Vec<Node> {
        let size = self.sizes[k];
        let pos = node.fix.lists[k].len();
        let mut out = Vec::with_capacity(2);

        let mut fixed = node.fix.clone();
        fixed.lists[k].push(u as u8);
        fixed.forbid[k] = 0;
        out.push(self.new_node(node, fixed, node.bound, None, Some(warm.clone())));

        let mut forbidden = node.fix.clone();
        forbidden.forbid[k] |= 1 << u;
        let blocked = forbidden.forbid[k] | self.bound_forbid[k][pos];
        let left: Vec<usize> =
            (0..size).filter(|&v| !node.fix.lists[k].contains(&(v as u8)) && blocked & (1 << v) == 0).collect();
        match left.len() {
            0 => {}
            1 => {
                forbidden.lists[k].push(left[0] as u8);
                forbidden.forbid[k] = 0;
                out.push(self.new_node(node, forbidden, node.bound, None, Some(warm)));
            }
            _ => out.push(self.new_node(node, forbidden, node.bound, Some(y), Some(warm))),
        }
        out
    }

    fn out_of_time(&self) -> bool {
        match (self.params.time_limit_secs, self.timer.elapsed()) {
            (Some(limit), Some(t)) => t > limit,
            _ => false,
        }
    }

    fn run(mut self) -> Result<(SolveReport, Vec<NodeRecord>)> {
        let nk = self.sizes.len();
        let start = closest_lists(&self.problem.scenario, self.problem.kind);
        let start_u: Vec<Vec<u8>> = (0..nk)
            .map(|k| {
                let idle = self.idle_type(k + 1);
                start.lists[k].iter().map(|e| e.universe_index(idle) as u8).collect()
            })
            .collect();
        self.offer(start_u)?;

        let mut root_fix = Prefixes { lists: vec![Vec::new(); nk], forbid: vec![0; nk] };
        // Positions pinned by the problem's own bounds extend the prefixes.
        for k in 0..nk {
            while root_fix.lists[k].len() < self.sizes[k] {
                let pos = root_fix.lists[k].len();
                let allowed: Vec<usize> = (0..self.sizes[k])
                    .filter(|&u| self.bound_forbid[k][pos] & (1 << u) == 0 && !root_fix.lists[k].contains(&(u as u8)))
                    .collect();
                if allowed.len() == 1 {
                    root_fix.lists[k].push(allowed[0] as u8);
                } else {
                    break;
                }
            }
        }
        let root = Node { id: 0, parent: None, depth: 0, bound: f64::INFINITY, fix: root_fix, reuse: None, warm: None };
        let mut heap = BinaryHeap::new();
        let mut dive: Option<Node> = Some(root);
        let mut processed = 0usize;
        let mut status = SolveStatus::Optimal;

        loop {
            let node = match dive.take() {
                Some(n) => n,
                None => match heap.pop() {
                    Some(Queued(n)) => n,
                    None => break,
                },
            };
            if node.bound <= self.cutoff() {
                self.pruned_bound = self.pruned_bound.max(node.bound);
                continue;
            }
            if processed >= self.params.node_limit {
                heap.push(Queued(node));
                status = SolveStatus::NodeLimit;
                break;
            }
            if self.out_of_time() {
                heap.push(Queued(node));
                status = SolveStatus::TimeLimit;
                break;
            }
            processed += 1;

            let leaf = (0..nk).all(|k| self.complete(k, &node.fix.lists[k]));
            let (y, value, basis) = match &node.reuse {
                Some(r) => (r.clone(), r.1, node.warm.clone().unwrap()),
                None => {
                    self.set_bounds(&node.fix.lists);
                    let hint = match &node.warm {
                        Some(b) => Some((**b).clone()),
                        None => {
                            let inc = &self.incumbent.as_ref().unwrap().0;
                            let lists = self.policy_of(inc);
                            Some(self.problem.policy_basis(&self.lp, &lists.policy_actions(&self.problem.model)))
                        }
                    };
                    let sol = solve_lp_from(&self.lp, &self.params.simplex, hint.as_ref())?;
                    self.iterations += sol.iterations;
                    match sol.status {
                        SimplexStatus::Optimal => {}
                        SimplexStatus::Infeasible => continue,
                        other => return Err(Error::Internal(format!("node relaxation ended {other:?}"))),
                    }
                    let b = Rc::new(sol.basis);
                    let v = sol.objective.min(node.bound);
                    (Rc::new((sol.x, v)), v, b)
                }
            };
            self.log.push(NodeRecord { id: node.id, parent: node.parent, depth: node.depth, bound: value });
            let node = Node { bound: value, ..node };
            if value <= self.cutoff() {
                self.pruned_bound = self.pruned_bound.max(value);
                continue;
            }

            let scan = self.scan(&y.0, &node.fix);
            if leaf {
                self.offer(scan.chain)?;
                continue;
            }
            let consistent = scan.conflict.iter().all(|&c| c <= 1e-10);
            self.offer(scan.chain.clone())?;
            if consistent {
                continue;
            }

            let (k, u) = self.pick_branch(&node, &scan);
            let mut children = self.branch(&node, k, u, y, basis);
            if children.is_empty() {
                continue;
            }
            let first = children.remove(0);
            for c in children {
                heap.push(Queued(c));
            }
            dive = Some(first);
        }

        let (lists_u, value, y) = self.incumbent.take().ok_or_else(|| Error::Internal("no incumbent".into()))?;
        let open_bound = heap.iter().map(|q| q.0.bound).fold(f64::NEG_INFINITY, f64::max);
        let mut bound = value.max(self.pruned_bound);
        if status != SolveStatus::Optimal {
            bound = bound.max(open_bound);
        }
        let lists = self.policy_of(&lists_u);
        if self.problem.model.space.len() <= ORACLE_CHECK_MAX_STATES {
            let g = stationary(&self.problem.model, &lists.policy_actions(&self.problem.model))?.gain;
            if (g.per_stage - value).abs() > 1e-7 {
                return Err(Error::Internal(format!(
                    "incumbent value {value} disagrees with direct evaluation {}",
                    g.per_stage
                )));
            }
        }
        let n_y = self.problem.num_y();
        let report = SolveReport {
            kind: self.problem.kind,
            status,
            objective: value,
            bound,
            y: sparse_y(&y[..n_y]),
            lists: Some(lists),
            nodes: processed,
            simplex_iterations: self.iterations,
            wall_time_secs: self.timer.elapsed(),
        };
        Ok((report, self.log))
    }

    fn pick_branch(&self, node: &Node, scan: &Scan) -> (usize, usize) {
        let nk = self.sizes.len();
        let open: Vec<usize> = (0..nk).filter(|&k| !self.complete(k, &node.fix.lists[k])).collect();
        let heaviest = |k: usize| scan.chain[k][node.fix.lists[k].len()] as usize;
        match self.params.branch_rule {
            BranchRule::AssignmentRow => {
                let k = *open
                    .iter()
                    .max_by(|&&a, &&b| scan.conflict[a].total_cmp(&scan.conflict[b]).then(b.cmp(&a)))
                    .unwrap();
                (k, heaviest(k))
            }
            BranchRule::MostFractional => {
                let mut best = (open[0], heaviest(open[0]), f64::INFINITY);
                for &k in &open {
                    let mass = &scan.next_mass[k];
                    let total: f64 = mass.iter().sum();
                    if total <= 0.0 {
                        continue;
                    }
                    for (u, &v) in mass.iter().enumerate() {
                        let frac = v / total;
                        let dist = (frac - 0.5).abs();
                        if v > 0.0 && frac < 1.0 - 1e-9 && dist < best.2 {
                            best = (k, u, dist);
                        }
                    }
                }
                (best.0, best.1)
            }
        }
    }
}
