//! JSON file formats: scenario specs, priority lists and solutions.
//!
//! Ambulances and locations are 1-based in every file; `"Idle"` names the
//! idling entry of a priority list.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use pldispatch_core::formulations::dimensions;
use pldispatch_core::{
    build_model, extract_policy, Action, ArrivalCase, CaseId, CustomerType, ListEntry, MdpModel, MipProblem, ModelKind,
    Policy, PriorityLists, RegionId, RegionMap, RewardCurve, Scenario, ScenarioOptions, SolveReport, SolveStatus,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

/// Occupation values at or below this are left out of solution files.
pub const SUPPORT_TOL: f64 = 1e-9;

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_path_buf(), source })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|source| Error::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegionSpec {
    Id(RegionId),
    Centers(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CaseSpec {
    Id(CaseId),
    Probabilities(Vec<f64>),
}

fn default_ambulances() -> usize {
    4
}

/// Compact scenario description as stored in `scenario.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub region: RegionSpec,
    pub case: CaseSpec,
    pub lambda: f64,
    #[serde(default = "default_ambulances")]
    pub m: usize,
    /// Home location per ambulance, 1-based.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_scene_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high_share: Option<f64>,
    /// Service-time units per unit of the arrival-rate clock.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewards: Option<RewardCurve>,
}

impl ScenarioSpec {
    /// File contents for a built-in library cell.
    pub fn builtin(region: RegionId, case: CaseId, lambda: f64, m: usize) -> Self {
        ScenarioSpec {
            id: None,
            region: RegionSpec::Id(region),
            case: CaseSpec::Id(case),
            lambda,
            m,
            homes: None,
            on_scene_time: None,
            high_share: None,
            time_scale: None,
            rewards: None,
        }
    }

    /// Validates the fields and builds the scenario.
    pub fn to_scenario(&self) -> Result<Scenario> {
        let (region, region_id) = match &self.region {
            RegionSpec::Id(r) => (pldispatch_core::scenario::load_region(*r), Some(*r)),
            RegionSpec::Centers(c) => (RegionMap::from_centers(None, c.clone())?, None),
        };
        let case = match (&self.case, region_id) {
            (CaseSpec::Id(c), Some(r)) => ArrivalCase::builtin(r, *c),
            (CaseSpec::Id(c), None) => {
                return Err(Error::Format(format!("case {c} needs a built-in region id")));
            }
            (CaseSpec::Probabilities(p), _) => ArrivalCase::from_probabilities(None, p.clone())?,
        };
        let defaults = ScenarioOptions::default();
        let homes = match &self.homes {
            Some(h) => Some(
                h.iter()
                    .map(|&x| x.checked_sub(1).ok_or_else(|| Error::Format("home locations are 1-based".into())))
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        let opts = ScenarioOptions {
            homes,
            on_scene_time: self.on_scene_time.unwrap_or(defaults.on_scene_time),
            high_share: self.high_share.unwrap_or(defaults.high_share),
            time_scale: self.time_scale.unwrap_or(defaults.time_scale),
            rewards: self.rewards.clone().unwrap_or(defaults.rewards),
            id: self.id.clone(),
        };
        Ok(Scenario::new(region, case, self.lambda, self.m, opts)?)
    }
}

pub fn read_scenario(path: &Path) -> Result<Scenario> {
    read_json::<ScenarioSpec>(path)?.to_scenario()
}

pub fn write_scenario_spec(path: &Path, spec: &ScenarioSpec) -> Result<()> {
    spec.to_scenario()?;
    write_json(path, spec)
}

/// One list position in a file: a 1-based ambulance or `"Idle"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EntryToken {
    Ambulance(usize),
    Name(String),
}

impl EntryToken {
    fn from_entry(e: ListEntry) -> Self {
        match e {
            ListEntry::Idle => EntryToken::Name("Idle".into()),
            ListEntry::Ambulance(j) => EntryToken::Ambulance(j + 1),
        }
    }

    fn to_entry(&self) -> Result<ListEntry> {
        match self {
            EntryToken::Ambulance(0) => Err(Error::Format("ambulance ids are 1-based".into())),
            EntryToken::Ambulance(j) => Ok(ListEntry::Ambulance(j - 1)),
            EntryToken::Name(s) if s.eq_ignore_ascii_case("idle") => Ok(ListEntry::Idle),
            EntryToken::Name(s) => match s.trim().parse::<usize>() {
                Ok(j) if j > 0 => Ok(ListEntry::Ambulance(j - 1)),
                _ => Err(Error::Format(format!("bad list entry `{s}`"))),
            },
        }
    }
}

/// Priority lists keyed by customer type label (`"1H"`, `"3L"`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ListsFile {
    pub model: ModelKind,
    pub ambulances: usize,
    pub locations: usize,
    pub lists: BTreeMap<String, Vec<EntryToken>>,
}

impl ListsFile {
    pub fn from_lists(lists: &PriorityLists) -> Self {
        let map = lists
            .lists
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let label = CustomerType::from_index(k + 1, lists.n).label();
                (label, l.iter().map(|&e| EntryToken::from_entry(e)).collect())
            })
            .collect();
        ListsFile { model: lists.kind, ambulances: lists.m, locations: lists.n, lists: map }
    }

    pub fn to_lists(&self) -> Result<PriorityLists> {
        let n = self.locations;
        if self.lists.len() != 2 * n {
            return Err(Error::Format(format!("expected {} customer types, found {}", 2 * n, self.lists.len())));
        }
        let mut out = vec![Vec::new(); 2 * n];
        for (label, tokens) in &self.lists {
            let t = CustomerType::parse_label(label, n)?.index(n);
            out[t - 1] = tokens.iter().map(EntryToken::to_entry).collect::<Result<_>>()?;
        }
        Ok(PriorityLists::new(self.model, self.ambulances, n, out)?)
    }
}

pub fn read_lists(path: &Path) -> Result<PriorityLists> {
    read_json::<ListsFile>(path)?.to_lists()
}

/// Accepts a lists file or a solution file carrying lists.
pub fn read_lists_or_solution(path: &Path) -> Result<PriorityLists> {
    let value: serde_json::Value = read_json(path)?;
    let lists = if value.get("y_support").is_some() { value.get("lists").cloned() } else { Some(value) };
    match lists {
        Some(v) if !v.is_null() => serde_json::from_value::<ListsFile>(v)
            .map_err(|source| Error::Json { path: path.to_path_buf(), source })?
            .to_lists(),
        _ => Err(Error::Format(format!("{} holds no priority lists", path.display()))),
    }
}

pub fn write_lists(path: &Path, lists: &PriorityLists) -> Result<()> {
    write_json(path, &ListsFile::from_lists(lists))
}

/// One positive occupation value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportEntry {
    /// Per ambulance: 0 when free, otherwise the 1-based location served.
    pub state: Vec<usize>,
    pub customer: String,
    /// `"1"`..`"m"`, `"Idle"` or `"null"`.
    pub action: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub nodes: usize,
    pub simplex_iterations: usize,
    pub wall_time_secs: Option<f64>,
    pub variables: usize,
    pub rows: usize,
    pub binaries: usize,
    pub states: usize,
    /// Largest flow-balance violation of the returned occupation measure.
    pub flow_residual: f64,
    /// `|sum y - 1|`.
    pub normalization_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub scenario: String,
    pub model: ModelKind,
    pub status: SolveStatus,
    /// Average reward per uniformized stage.
    pub objective: f64,
    pub bound: f64,
    /// Uniformization rate; `objective * gamma` is reward per unit time.
    pub gamma: f64,
    pub reward_per_time: f64,
    pub lists: Option<ListsFile>,
    pub y_support: Vec<SupportEntry>,
    pub diagnostics: Diagnostics,
}

impl SolutionFile {
    pub fn from_report(problem: &MipProblem, report: &SolveReport) -> Self {
        let model = &problem.model;
        let y = report.y_dense(problem);
        let (flow, norm) = problem.flow_residual(&y);
        let dims = dimensions(problem);
        let y_support = report
            .y
            .iter()
            .filter(|&&(_, v)| v > SUPPORT_TOL)
            .map(|&(k, value)| {
                let col = &problem.y_cols[k];
                let (s, t) = model.split_event(col.event);
                SupportEntry {
                    state: model.space.decode(s),
                    customer: model.customer(t).label(),
                    action: col.action.to_string(),
                    value,
                }
            })
            .collect();
        SolutionFile {
            scenario: problem.scenario.id.clone(),
            model: report.kind,
            status: report.status,
            objective: report.objective,
            bound: report.bound,
            gamma: model.gamma,
            reward_per_time: report.objective * model.gamma,
            lists: report.lists.as_ref().map(ListsFile::from_lists),
            y_support,
            diagnostics: Diagnostics {
                nodes: report.nodes,
                simplex_iterations: report.simplex_iterations,
                wall_time_secs: report.wall_time_secs,
                variables: dims.n_vars,
                rows: dims.n_rows,
                binaries: dims.n_binaries,
                states: dims.n_states,
                flow_residual: flow,
                normalization_error: norm,
            },
        }
    }
}

impl SolutionFile {
    /// Deterministic policy of the solution: from its lists when present,
    /// otherwise from the occupation support.
    pub fn policy(&self, scenario: &Scenario) -> Result<Policy> {
        let kind = if self.model == ModelKind::PLI { ModelKind::PLI } else { ModelKind::PL };
        if let Some(l) = &self.lists {
            let model = MdpModel::new(scenario, kind)?;
            return Ok(Policy::from_lists(&model, &l.to_lists()?));
        }
        let problem = build_model(scenario, self.model)?;
        let model = &problem.model;
        let mut y = vec![0.0; problem.num_y()];
        for entry in &self.y_support {
            let s = model.space.encode(&entry.state)?;
            let t = match entry.customer.as_str() {
                "null" => 0,
                label => CustomerType::parse_label(label, model.n())?.index(model.n()),
            };
            let action = match entry.action.as_str() {
                "Idle" => Action::Idle,
                "null" => Action::Null,
                a => Action::Dispatch(
                    a.parse::<usize>()
                        .ok()
                        .and_then(|j| j.checked_sub(1))
                        .ok_or_else(|| Error::Format(format!("bad action `{a}`")))?,
                ),
            };
            let col = problem
                .y_col(model.event_index(s, t), action)
                .ok_or_else(|| Error::Format(format!("action {action} unavailable for {}", entry.customer)))?;
            y[col] = entry.value;
        }
        Ok(extract_policy(&problem, &y, None, SUPPORT_TOL)?)
    }
}

pub fn read_solution(path: &Path) -> Result<SolutionFile> {
    read_json(path)
}

pub fn write_solution(path: &Path, solution: &SolutionFile) -> Result<()> {
    write_json(path, solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pldispatch_core::closest_lists;

    #[test]
    fn spec_accepts_ids_or_explicit_data() {
        let by_id: ScenarioSpec = serde_json::from_str(r#"{"region":"R5","case":"C2","lambda":9,"m":4}"#).unwrap();
        let sc = by_id.to_scenario().unwrap();
        assert_eq!(sc.id, "R5-C2-L9");
        let explicit: ScenarioSpec = serde_json::from_str(
            r#"{"region":[[0.5,0.5],[1.5,0.5]],"case":[0.3,0.7],"lambda":2.5,"m":2,"homes":[2,1],"time_scale":1}"#,
        )
        .unwrap();
        let sc = explicit.to_scenario().unwrap();
        assert_eq!(sc.homes, vec![1, 0]);
        assert_eq!(sc.time_scale, 1.0);
        assert!(serde_json::from_str::<ScenarioSpec>(r#"{"region":"R5","case":"C2","lambda":9,"x":1}"#).is_err());
        let bad: ScenarioSpec = serde_json::from_str(r#"{"region":[[0,0]],"case":"C1","lambda":1}"#).unwrap();
        assert!(bad.to_scenario().is_err());
    }

    #[test]
    fn lists_file_is_one_based() {
        let sc = pldispatch_core::make_scenario(RegionId::R2, CaseId::C1, 3.0, 4).unwrap();
        let lists = closest_lists(&sc, ModelKind::PLI);
        let file = ListsFile::from_lists(&lists);
        assert_eq!(
            file.lists["1H"],
            vec![
                EntryToken::Ambulance(1),
                EntryToken::Ambulance(2),
                EntryToken::Ambulance(3),
                EntryToken::Ambulance(4)
            ]
        );
        assert_eq!(file.lists["4L"].last(), Some(&EntryToken::Name("Idle".into())));
        assert_eq!(file.to_lists().unwrap(), lists);
        let text = r#"{"model":"PL","ambulances":1,"locations":1,"lists":{"1H":[0],"1L":[1]}}"#;
        assert!(serde_json::from_str::<ListsFile>(text).unwrap().to_lists().is_err());
    }
}
