use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::mdp::{Action, CustomerType, MdpModel, ModelKind, StateSpace};
use crate::{Error, Result};

/// One position of a priority list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ListEntry {
    Idle,
    /// Zero-based ambulance id.
    Ambulance(usize),
}

impl ListEntry {
    /// Position in a list universe: idle first when present, then ambulances.
    pub(crate) fn universe_index(self, with_idle: bool) -> usize {
        match self {
            ListEntry::Idle => 0,
            ListEntry::Ambulance(j) => j + usize::from(with_idle),
        }
    }

    pub(crate) fn from_universe_index(u: usize, with_idle: bool) -> ListEntry {
        if with_idle {
            if u == 0 {
                ListEntry::Idle
            } else {
                ListEntry::Ambulance(u - 1)
            }
        } else {
            ListEntry::Ambulance(u)
        }
    }

    pub fn action(self) -> Action {
        match self {
            ListEntry::Idle => Action::Idle,
            ListEntry::Ambulance(j) => Action::Dispatch(j),
        }
    }
}

impl fmt::Display for ListEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ListEntry::Idle => f.write_str("Idle"),
            ListEntry::Ambulance(j) => write!(f, "{}", j + 1),
        }
    }
}

/// One priority list per arrival type, indexed by `type index - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PriorityLists {
    pub kind: ModelKind,
    pub m: usize,
    pub n: usize,
    pub lists: Vec<Vec<ListEntry>>,
}

/// Whether type `t` uses the ambulance-plus-idle universe under `kind`.
pub(crate) fn has_idle(kind: ModelKind, n: usize, t: usize) -> bool {
    kind.allows_idle() && t > n
}

impl PriorityLists {
    /// Validates and wraps `lists`. Under U the lists follow the PL shape.
    pub fn new(kind: ModelKind, m: usize, n: usize, lists: Vec<Vec<ListEntry>>) -> Result<Self> {
        let out = PriorityLists { kind, m, n, lists };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lists.len() != 2 * self.n {
            return Err(Error::Input(format!("expected {} lists, got {}", 2 * self.n, self.lists.len())));
        }
        for (k, list) in self.lists.iter().enumerate() {
            let t = k + 1;
            let idle = has_idle(self.kind, self.n, t);
            let size = self.m + usize::from(idle);
            let label = CustomerType::from_index(t, self.n).label();
            if list.len() != size {
                return Err(Error::Input(format!("list for {label} has {} entries, expected {size}", list.len())));
            }
            let mut seen = alloc::vec![false; size];
            for &e in list {
                if let ListEntry::Ambulance(j) = e {
                    if j >= self.m {
                        return Err(Error::Input(format!("list for {label} names unknown ambulance {}", j + 1)));
                    }
                } else if !idle {
                    return Err(Error::Input(format!("list for {label} may not contain Idle")));
                }
                let u = e.universe_index(idle);
                if seen[u] {
                    return Err(Error::Input(format!("list for {label} repeats {e}")));
                }
                seen[u] = true;
            }
        }
        Ok(())
    }

    /// List of arrival type `t >= 1`.
    pub fn for_type(&self, t: usize) -> &[ListEntry] {
        &self.lists[t - 1]
    }

    /// Number of leading entries of type `t` that can ever be selected:
    /// everything after the first `Idle` is unreachable.
    pub fn reachable_len(&self, t: usize) -> usize {
        let list = self.for_type(t);
        list.iter().position(|&e| e == ListEntry::Idle).map_or(list.len(), |k| k + 1)
    }

    /// Action the lists prescribe in configuration `s` for type `t`.
    pub fn action(&self, space: &StateSpace, s: usize, t: usize) -> Action {
        if t == 0 || space.num_available(s) == 0 {
            return Action::Null;
        }
        for &e in self.for_type(t) {
            match e {
                ListEntry::Idle => return Action::Idle,
                ListEntry::Ambulance(j) if space.is_available(s, j) => return Action::Dispatch(j),
                _ => {}
            }
        }
        Action::Null
    }

    /// Prescribed action for every event-state, indexed like the model.
    pub fn policy_actions(&self, model: &MdpModel) -> Vec<Action> {
        let nt = model.num_types();
        (0..model.num_event_states()).map(|e| self.action(&model.space, e / nt, e % nt)).collect()
    }

    /// Re-types the lists for another model. PL lists gain a trailing
    /// `Idle` on low-level types under PLI; PLI lists lose their `Idle`
    /// entries under PL/U.
    pub fn convert(&self, kind: ModelKind) -> PriorityLists {
        let lists = self
            .lists
            .iter()
            .enumerate()
            .map(|(k, list)| {
                let mut l: Vec<ListEntry> = list.iter().copied().filter(|e| *e != ListEntry::Idle).collect();
                if has_idle(kind, self.n, k + 1) {
                    let pos = list.iter().position(|e| *e == ListEntry::Idle).unwrap_or(self.m);
                    l.insert(pos.min(l.len()), ListEntry::Idle);
                }
                l
            })
            .collect();
        PriorityLists { kind, m: self.m, n: self.n, lists }
    }

    /// Display form, e.g. `1H: 1 3 4 2`.
    pub fn describe(&self) -> Vec<String> {
        self.lists
            .iter()
            .enumerate()
            .map(|(k, list)| {
                let mut s = CustomerType::from_index(k + 1, self.n).label();
                s.push(':');
                for e in list {
                    s.push_str(&format!(" {e}"));
                }
                s
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use ListEntry::{Ambulance as A, Idle};

    #[test]
    fn validation() {
        let ok = PriorityLists::new(ModelKind::PL, 2, 1, vec![vec![A(1), A(0)], vec![A(0), A(1)]]);
        assert!(ok.is_ok());
        assert!(PriorityLists::new(ModelKind::PL, 2, 1, vec![vec![A(1), A(1)], vec![A(0), A(1)]]).is_err());
        assert!(PriorityLists::new(ModelKind::PL, 2, 1, vec![vec![A(1), Idle], vec![A(0), A(1)]]).is_err());
        let pli = PriorityLists::new(ModelKind::PLI, 2, 1, vec![vec![A(1), A(0)], vec![A(0), Idle, A(1)]]).unwrap();
        assert_eq!(pli.reachable_len(2), 2);
        assert_eq!(pli.reachable_len(1), 2);
        assert!(PriorityLists::new(ModelKind::PLI, 2, 1, vec![vec![A(1), A(0), Idle], vec![A(0), Idle, A(1)]]).is_err());
    }

    #[test]
    fn conversion_round_trip() {
        let pl = PriorityLists::new(ModelKind::PL, 2, 1, vec![vec![A(1), A(0)], vec![A(0), A(1)]]).unwrap();
        let pli = pl.convert(ModelKind::PLI);
        assert_eq!(pli.lists[1], vec![A(0), A(1), Idle]);
        assert_eq!(pli.convert(ModelKind::PL), pl);
    }
}
