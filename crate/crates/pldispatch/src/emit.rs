//! Writes sweep results into append-only run directories.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::io::{read_json, write_json};
use crate::sweep::{ordering_violations, SimilarityCell, SweepResult};

/// Header of `results.csv`.
pub const CSV_HEADER: &str = "id,region,case,lambda,gamma,z_u,z_pl,z_pli,z_closest,conforms,gap_u_pl,gap_pl_closest,\
gap_u_closest,sim_pl_u,sim_pl_closest,status_u,status_pl,status_pli,bound_pl,bound_pli,nodes_pl,nodes_pli,\
time_limit_secs,max_flow_residual,max_normalization_error,error";

/// Header of the figure-ready similarity tables.
pub const FIGURE_HEADER: &str = "group,rows,pl_vs_u,pl_vs_closest";

/// Ordering checks run before anything is written use this slack.
pub const ORDERING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub workers: usize,
    pub scenarios: usize,
    pub config: serde_json::Value,
    pub files: Vec<String>,
}

/// Creates the next unused `run-NNNN` directory under `base`.
pub fn create_run_dir(base: &Path) -> Result<PathBuf> {
    fs::create_dir_all(base).map_err(io_err(base))?;
    for k in 1..100_000u32 {
        let dir = base.join(format!("run-{k:04}"));
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::Io { path: dir, source: e }),
        }
    }
    Err(Error::Format(format!("{} holds too many runs", base.display())))
}

fn write_new(path: &Path, text: &str) -> Result<()> {
    use std::io::Write;
    let mut f = fs::OpenOptions::new().write(true).create_new(true).open(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

/// One row per scenario with the fixed [`CSV_HEADER`].
pub fn results_csv(result: &SweepResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &result.rows {
        w.serialize(row)?;
    }
    if result.rows.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn timings_csv(result: &SweepResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for t in &result.times {
        w.serialize(t)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Figure-ready similarity bars: one row per group, two comparisons.
pub fn figure_csv(cells: &[SimilarityCell]) -> String {
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from(FIGURE_HEADER);
    out.push('\n');
    for c in cells {
        out.push_str(&format!("{},{},{},{}\n", c.key, c.rows, cell(c.pl_vs_u), cell(c.pl_vs_closest)));
    }
    out
}

/// Refuses results whose rows break the model ordering.
pub fn check(result: &SweepResult) -> Result<()> {
    let bad = ordering_violations(&result.rows, ORDERING_TOL);
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Check(bad.join("; ")))
    }
}

/// Checks `result` and writes it into a fresh run directory under `base`.
/// Returns the directory.
pub fn emit(result: &SweepResult, base: &Path, mut manifest: Manifest) -> Result<PathBuf> {
    check(result)?;
    let dir = create_run_dir(base)?;
    let files = [
        ("results.csv", results_csv(result)?),
        ("timings.csv", timings_csv(result)?),
        ("similarity_by_region.csv", figure_csv(&result.similarity.by_region)),
        ("similarity_by_case.csv", figure_csv(&result.similarity.by_case)),
        ("similarity_by_lambda.csv", figure_csv(&result.similarity.by_lambda)),
    ];
    for (name, text) in &files {
        write_new(&dir.join(name), text)?;
    }
    let json = dir.join("results.json");
    write_json(&json, result)?;
    manifest.files = files.iter().map(|f| f.0.to_string()).collect();
    manifest.files.push("results.json".into());
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(dir)
}

pub fn read_results(path: &Path) -> Result<SweepResult> {
    read_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_dirs_never_repeat() {
        let tmp = tempfile::tempdir().unwrap();
        let a = create_run_dir(tmp.path()).unwrap();
        let b = create_run_dir(tmp.path()).unwrap();
        assert_ne!(a, b);
        assert!(a.ends_with("run-0001") && b.ends_with("run-0002"));
        write_new(&a.join("x"), "1").unwrap();
        assert!(write_new(&a.join("x"), "2").is_err());
    }

    #[test]
    fn figure_rows() {
        let cells = vec![SimilarityCell { key: "R1".into(), rows: 25, pl_vs_u: Some(0.5), pl_vs_closest: None }];
        assert_eq!(figure_csv(&cells), "group,rows,pl_vs_u,pl_vs_closest\nR1,25,0.5,\n");
    }
}
