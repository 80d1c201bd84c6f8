//! The uniformized discrete-time dispatch MDP.
//!
//! A state records, per ambulance, either 0 (available) or the 1-based
//! location it is serving. Decision epochs are event-states `(s, w)`: the
//! configuration together with the customer type that triggered the stage,
//! where type 0 is the null customer (no arrival: a service completion or a
//! uniformization self-loop).
//!
//! Service rates are rates on the arrival clock:
//! `mu[i][j] = time_scale / (on_scene + dist(home_j, i))`,
//! `beta_j = max_i mu[i][j]`, `gamma = lambda + sum_j beta_j`, and a busy
//! ambulance completes within a stage with probability `mu / gamma`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub use crate::scenario::Level;
use crate::scenario::Scenario;
use crate::{Error, Result};

/// Default cap on the number of configurations.
pub const DEFAULT_STATE_CAP: u64 = 200_000;

/// Which optimization model the action sets are built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// Unrestricted LP.
    U,
    /// Priority lists, every customer served when possible.
    PL,
    /// Priority lists where low-level customers may be idled.
    PLI,
}

impl ModelKind {
    pub fn allows_idle(self) -> bool {
        matches!(self, ModelKind::PLI)
    }

    pub fn has_lists(self) -> bool {
        !matches!(self, ModelKind::U)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::U => "U",
            ModelKind::PL => "PL",
            ModelKind::PLI => "PLI",
        })
    }
}

impl core::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "u" => Ok(ModelKind::U),
            "pl" => Ok(ModelKind::PL),
            "pli" => Ok(ModelKind::PLI),
            _ => Err(Error::Input(format!("unknown model `{s}` (expected u, pl or pli)"))),
        }
    }
}

/// Dense base-(n+1) indexing of ambulance configurations. Ambulance 0 is
/// the most significant digit, so indices follow lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    m: usize,
    n: usize,
    size: usize,
    place: Vec<usize>,
}

impl StateSpace {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// Status of ambulance `j` in state `s`: 0 if available, else `i + 1`
    /// for a customer at location `i`.
    #[inline]
    pub fn digit(&self, s: usize, j: usize) -> usize {
        (s / self.place[j]) % (self.n + 1)
    }

    #[inline]
    pub fn with_digit(&self, s: usize, j: usize, d: usize) -> usize {
        s - self.digit(s, j) * self.place[j] + d * self.place[j]
    }

    pub fn decode(&self, s: usize) -> Vec<usize> {
        (0..self.m).map(|j| self.digit(s, j)).collect()
    }

    pub fn encode(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.m || digits.iter().any(|&d| d > self.n) {
            return Err(Error::Input(format!(
                "{digits:?} is not a configuration of {} ambulances over {} locations",
                self.m, self.n
            )));
        }
        Ok(digits.iter().zip(&self.place).map(|(d, p)| d * p).sum())
    }

    pub fn is_available(&self, s: usize, j: usize) -> bool {
        self.digit(s, j) == 0
    }

    pub fn available(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.m).filter(move |&j| self.is_available(s, j))
    }

    pub fn num_available(&self, s: usize) -> usize {
        self.available(s).count()
    }
}

/// All `(n+1)^m` configurations.
pub fn enumerate_states(m: usize, n: usize, cap: u64) -> Result<StateSpace> {
    if m == 0 || n == 0 {
        return Err(Error::Input("need at least one ambulance and one location".into()));
    }
    let mut size: u64 = 1;
    for _ in 0..m {
        size = size.saturating_mul(n as u64 + 1);
    }
    if size > cap {
        return Err(Error::Resource { what: "state space", required: size, cap });
    }
    let mut place = vec![1usize; m];
    for j in (0..m.saturating_sub(1)).rev() {
        place[j] = place[j + 1] * (n + 1);
    }
    Ok(StateSpace { m, n, size: size as usize, place })
}

/// Customer type. Indexing: 0 = null, `1..=n` high-level at location
/// `t - 1`, `n+1..=2n` low-level at location `t - n - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CustomerType {
    Null,
    Arrival { location: usize, level: Level },
}

impl CustomerType {
    pub fn from_index(t: usize, n: usize) -> CustomerType {
        match t {
            0 => CustomerType::Null,
            t if t <= n => CustomerType::Arrival { location: t - 1, level: Level::High },
            t => CustomerType::Arrival { location: t - n - 1, level: Level::Low },
        }
    }

    pub fn index(self, n: usize) -> usize {
        match self {
            CustomerType::Null => 0,
            CustomerType::Arrival { location, level: Level::High } => location + 1,
            CustomerType::Arrival { location, level: Level::Low } => n + location + 1,
        }
    }

    /// Label such as `1H` or `3L` (1-based location); `null` for the null type.
    pub fn label(self) -> String {
        match self {
            CustomerType::Null => "null".into(),
            CustomerType::Arrival { location, level } => format!("{}{}", location + 1, level.suffix()),
        }
    }

    pub fn parse_label(label: &str, n: usize) -> Result<CustomerType> {
        let t = label.trim();
        let bad = || Error::Input(format!("bad customer type label `{label}`"));
        let (num, lvl) = t.split_at(t.len().checked_sub(1).ok_or_else(bad)?);
        let level = match lvl {
            "H" | "h" => Level::High,
            "L" | "l" => Level::Low,
            _ => return Err(bad()),
        };
        let loc: usize = num.parse().map_err(|_| bad())?;
        if loc == 0 || loc > n {
            return Err(bad());
        }
        Ok(CustomerType::Arrival { location: loc - 1, level })
    }
}

/// A decision. `Idle` deliberately loses a low-level customer under PLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Null,
    Idle,
    Dispatch(usize),
}

impl Action {
    /// Column-ordering key: null and idle take id 0, ambulance `j` takes `j + 1`.
    pub fn order_key(self) -> usize {
        match self {
            Action::Null | Action::Idle => 0,
            Action::Dispatch(j) => j + 1,
        }
    }

    pub fn ambulance(self) -> Option<usize> {
        match self {
            Action::Dispatch(j) => Some(j),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Null => f.write_str("null"),
            Action::Idle => f.write_str("Idle"),
            Action::Dispatch(j) => write!(f, "{}", j + 1),
        }
    }
}

/// Uniformized MDP of one scenario.
#[derive(Debug, Clone)]
pub struct MdpModel {
    pub space: StateSpace,
    pub kind: ModelKind,
    /// Uniformization rate.
    pub gamma: f64,
    /// `mu[i * m + j]`: rate of ambulance `j` serving location `i`.
    mu: Vec<f64>,
    pub beta: Vec<f64>,
    /// Arrival rate per type index (entry 0, the null type, is zero).
    pub lambda_w: Vec<f64>,
    pub lambda: f64,
    /// `reward[t * m + j]`: utility of sending `j` to type `t`.
    reward: Vec<f64>,
}

impl MdpModel {
    pub fn new(scenario: &Scenario, kind: ModelKind) -> Result<Self> {
        Self::with_cap(scenario, kind, DEFAULT_STATE_CAP)
    }

    pub fn with_cap(scenario: &Scenario, kind: ModelKind, cap: u64) -> Result<Self> {
        let (m, n) = (scenario.m, scenario.n());
        let space = enumerate_states(m, n, cap)?;
        let mut mu = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                mu[i * m + j] = scenario.service_rate(i, j);
            }
        }
        let beta: Vec<f64> = (0..m).map(|j| (0..n).map(|i| mu[i * m + j]).fold(0.0, f64::max)).collect();
        let gamma = scenario.lambda + beta.iter().sum::<f64>();
        let num_types = 2 * n + 1;
        let mut lambda_w = vec![0.0; num_types];
        let mut reward = vec![0.0; num_types * m];
        for t in 1..num_types {
            if let CustomerType::Arrival { location, level } = CustomerType::from_index(t, n) {
                lambda_w[t] = scenario.arrival_rate(location, level);
                for j in 0..m {
                    reward[t * m + j] = scenario.reward(location, level, j);
                }
            }
        }
        Ok(MdpModel { space, kind, gamma, mu, beta, lambda: lambda_w.iter().sum(), lambda_w, reward })
    }

    pub fn m(&self) -> usize {
        self.space.m()
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    /// `|W|`, including the null type.
    pub fn num_types(&self) -> usize {
        2 * self.n() + 1
    }

    pub fn num_event_states(&self) -> usize {
        self.space.len() * self.num_types()
    }

    #[inline]
    pub fn event_index(&self, s: usize, t: usize) -> usize {
        s * self.num_types() + t
    }

    #[inline]
    pub fn split_event(&self, e: usize) -> (usize, usize) {
        (e / self.num_types(), e % self.num_types())
    }

    pub fn customer(&self, t: usize) -> CustomerType {
        CustomerType::from_index(t, self.n())
    }

    pub fn is_low(&self, t: usize) -> bool {
        t > self.n()
    }

    /// Location (zero-based) of arrival type `t >= 1`.
    pub fn location(&self, t: usize) -> usize {
        debug_assert!(t >= 1);
        (t - 1) % self.n()
    }

    pub fn mu(&self, i: usize, j: usize) -> f64 {
        self.mu[i * self.m() + j]
    }

    pub fn reward(&self, t: usize, a: Action) -> f64 {
        match a {
            Action::Dispatch(j) if t > 0 => self.reward[t * self.m() + j],
            _ => 0.0,
        }
    }

    /// Whether type `t` may be idled in configurations with a free ambulance.
    pub fn idle_allowed(&self, t: usize) -> bool {
        self.kind.allows_idle() && self.is_low(t)
    }

    /// Available actions in ascending column order.
    pub fn action_set(&self, s: usize, t: usize) -> Vec<Action> {
        let mut out = Vec::new();
        self.action_set_into(s, t, &mut out);
        out
    }

    pub fn action_set_into(&self, s: usize, t: usize, out: &mut Vec<Action>) {
        out.clear();
        if t == 0 {
            out.push(Action::Null);
            return;
        }
        for j in self.space.available(s) {
            out.push(Action::Dispatch(j));
        }
        if out.is_empty() {
            out.push(Action::Null);
        } else if self.idle_allowed(t) {
            out.insert(0, Action::Idle);
        }
    }

    /// Configuration right after taking `a` in `(s, t)`.
    pub fn post_decision(&self, s: usize, t: usize, a: Action) -> usize {
        match a {
            Action::Dispatch(j) => self.space.with_digit(s, j, self.location(t) + 1),
            _ => s,
        }
    }

    /// Next-event distribution from post-decision configuration `c`, as
    /// `(event index, probability)` with strictly positive probabilities.
    pub fn next_events(&self, c: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let mut stay = 1.0 - self.lambda / self.gamma;
        for j in 0..self.m() {
            let d = self.space.digit(c, j);
            if d > 0 {
                let p = self.mu(d - 1, j) / self.gamma;
                stay -= p;
                out.push((self.event_index(self.space.with_digit(c, j, 0), 0), p));
            }
        }
        for t in 1..self.num_types() {
            let p = self.lambda_w[t] / self.gamma;
            if p > 0.0 {
                out.push((self.event_index(c, t), p));
            }
        }
        if stay > 1e-15 {
            out.push((self.event_index(c, 0), stay));
        }
    }

    /// `Pr(. | s, t, a)` as a sparse row.
    pub fn transition_row(&self, s: usize, t: usize, a: Action) -> Result<Vec<(usize, f64)>> {
        if s >= self.space.len() || t >= self.num_types() {
            return Err(Error::Contract(format!("event-state ({s}, {t}) out of range")));
        }
        if !self.action_set(s, t).contains(&a) {
            return Err(Error::Contract(format!(
                "action {a} not available in state {:?} for type {}",
                self.space.decode(s),
                self.customer(t).label()
            )));
        }
        let mut out = Vec::new();
        self.next_events(self.post_decision(s, t, a), &mut out);
        Ok(out)
    }
}
