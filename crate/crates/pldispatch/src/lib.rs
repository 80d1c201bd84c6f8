//! File formats, simulation and experiment running for priority-list
//! ambulance dispatch, on top of [`pldispatch_core`].

pub mod emit;
pub mod error;
pub mod io;
pub mod mps;
pub mod report;
pub mod sim;
pub mod sweep;

pub use error::{Error, Result};
