//! Priority-list constrained ambulance dispatch.
//!
//! The crate builds the uniformized average-reward MDP for dispatching
//! distinguishable ambulances to prioritized, spatially located customers,
//! assembles it as an LP (unrestricted policies) or a MIP whose binary block
//! encodes one priority list per customer type, and solves both with an
//! in-house revised simplex and branch-and-bound. Independent policy
//! evaluation, heuristics and symmetry tools live in [`policy`].
//!
//! The crate is `no_std` (with `alloc`). The default `std` feature only adds
//! wall-clock time limits and timing diagnostics to the MIP solver.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod error;
mod math;

pub mod formulations;
pub mod lp;
pub mod mdp;
pub mod mip;
pub mod policy;
pub mod scenario;

pub use error::{Error, Result};
pub use formulations::{
    build_model, dimensions, extract_lists, fix_lists, Dimensions, ListEntry, MipProblem, ModelKind, PriorityLists,
    SolveReport, SolveStatus,
};
pub use lp::{solve_lp, SimplexParams, SimplexSolution, SimplexStatus, SparseLp};
pub use mdp::{Action, CustomerType, Level, MdpModel, StateSpace};
pub use mip::{solve_mip, solve_mip_logged, BnbParams, BranchRule, NodeRecord};
pub use policy::{
    closest_lists, conforms, enumerate_oracle, evaluate_lists, extract_policy, local_search, local_search_from,
    region_automorphisms, similarity, Gain, Policy, Provenance, DEFAULT_ENUMERATION_CAP,
};
pub use scenario::{
    make_scenario, scenario_library, ArrivalCase, CaseId, RegionId, RegionMap, RewardCurve, Scenario, ScenarioOptions,
};
