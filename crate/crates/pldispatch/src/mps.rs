//! MPS export and import.
//!
//! Output uses the fixed-field column layout with 8-character names.
//! Numbers are written in shortest round-trip form; a value longer than its
//! 12-character field pushes the rest of the line right, so files stay exact
//! and remain readable by whitespace-splitting parsers (this one included).

use std::collections::HashMap;
use std::fmt::Write as _;

use pldispatch_core::lp::{CscMatrix, Direction, RowSense};
use pldispatch_core::{MipProblem, ModelKind, SparseLp};

use crate::error::{Error, Result};

const OBJ_ROW: &str = "OBJ";

/// A parsed MPS model.
#[derive(Debug, Clone, PartialEq)]
pub struct MpsModel {
    pub name: String,
    pub lp: SparseLp,
    /// Columns declared between integer markers.
    pub integer: Vec<usize>,
    pub row_names: Vec<String>,
    pub col_names: Vec<String>,
}

fn row_name(r: usize) -> String {
    format!("R{r:07}")
}

fn col_name(c: usize) -> String {
    format!("C{c:07}")
}

fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn line(out: &mut String, fields: [&str; 6]) {
    let [f1, f2, f3, f4, f5, f6] = fields;
    let l = format!(" {f1:<2} {f2:<8}  {f3:<8}  {f4:<12}   {f5:<8}  {f6:<12}");
    out.push_str(l.trim_end());
    out.push('\n');
}

/// Name used for a model's file header.
pub fn problem_name(problem: &MipProblem) -> String {
    let kind = match problem.kind {
        ModelKind::U => "U",
        ModelKind::PL => "PL",
        ModelKind::PLI => "PLI",
    };
    format!("{}-{kind}", problem.scenario.id).replace(char::is_whitespace, "_")
}

/// Writes a model with its list binaries marked integer.
pub fn write_problem(problem: &MipProblem) -> String {
    write_mps(&problem.lp, &problem.binaries, &problem_name(problem))
}

pub fn write_mps(lp: &SparseLp, integer: &[usize], name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {name}");
    if lp.direction == Direction::Maximize {
        out.push_str("OBJSENSE\n    MAX\n");
    }
    out.push_str("ROWS\n");
    line(&mut out, ["N", OBJ_ROW, "", "", "", ""]);
    for (r, sense) in lp.sense.iter().enumerate() {
        let code = match sense {
            RowSense::Eq => "E",
            RowSense::Le => "L",
            RowSense::Ge => "G",
        };
        line(&mut out, [code, &row_name(r), "", "", "", ""]);
    }
    out.push_str("COLUMNS\n");
    let mut is_int = vec![false; lp.num_cols()];
    for &c in integer {
        is_int[c] = true;
    }
    let mut in_int = false;
    for c in 0..lp.num_cols() {
        if is_int[c] != in_int {
            let tag = if is_int[c] { "'INTORG'" } else { "'INTEND'" };
            line(&mut out, ["", "MARKER", "'MARKER'", "", tag, ""]);
            in_int = is_int[c];
        }
        let name = col_name(c);
        let (rows, vals) = lp.a.col(c);
        if lp.obj[c] != 0.0 || rows.is_empty() {
            line(&mut out, ["", &name, OBJ_ROW, &num(lp.obj[c]), "", ""]);
        }
        for (r, v) in rows.iter().zip(vals) {
            line(&mut out, ["", &name, &row_name(*r), &num(*v), "", ""]);
        }
    }
    if in_int {
        line(&mut out, ["", "MARKER", "'MARKER'", "", "'INTEND'", ""]);
    }
    out.push_str("RHS\n");
    for (r, &v) in lp.rhs.iter().enumerate() {
        if v != 0.0 {
            line(&mut out, ["", "RHS", &row_name(r), &num(v), "", ""]);
        }
    }
    out.push_str("BOUNDS\n");
    for c in 0..lp.num_cols() {
        let (lo, up) = (lp.col_lb[c], lp.col_ub[c]);
        let name = col_name(c);
        let mut bound = |code: &str, v: Option<f64>| {
            let v = v.map(num).unwrap_or_default();
            line(&mut out, [code, "BND", &name, &v, "", ""]);
        };
        if lo == up {
            bound("FX", Some(lo));
            continue;
        }
        match (lo == f64::NEG_INFINITY, up == f64::INFINITY) {
            (true, true) => bound("FR", None),
            (true, false) => {
                bound("MI", None);
                bound("UP", Some(up));
            }
            (false, _) => {
                if lo != 0.0 {
                    bound("LO", Some(lo));
                }
                if up != f64::INFINITY {
                    bound("UP", Some(up));
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Bounds,
}

fn bad(lineno: usize, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("MPS line {lineno}: {msg}"))
}

/// Parses an MPS file (fixed or free layout, names without spaces).
pub fn read_mps(text: &str) -> Result<MpsModel> {
    let mut name = String::new();
    let mut direction = Direction::Minimize;
    let mut obj_name: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut row_names = Vec::new();
    let mut sense = Vec::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut col_names: Vec<String> = Vec::new();
    let mut obj: Vec<f64> = Vec::new();
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut integer = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut lb: Vec<f64> = Vec::new();
    let mut ub: Vec<f64> = Vec::new();
    let mut in_int = false;
    let mut section = Section::None;
    let mut ended = false;

    for (k, raw) in text.lines().enumerate() {
        let lineno = k + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let tok: Vec<&str> = raw.split_whitespace().collect();
        let parse = |s: &str| s.parse::<f64>().map_err(|_| bad(lineno, format!("bad number `{s}`")));
        if !raw.starts_with(char::is_whitespace) {
            section = match tok[0] {
                "NAME" => {
                    name = tok.get(1).copied().unwrap_or("").to_string();
                    Section::None
                }
                "OBJSENSE" => {
                    if let Some(s) = tok.get(1) {
                        direction = parse_sense(s).ok_or_else(|| bad(lineno, "bad objective sense"))?;
                        Section::None
                    } else {
                        Section::ObjSense
                    }
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => {
                    ended = true;
                    break;
                }
                other => return Err(bad(lineno, format!("unsupported section `{other}`"))),
            };
            continue;
        }
        match section {
            Section::None => return Err(bad(lineno, "data outside a section")),
            Section::ObjSense => {
                direction = parse_sense(tok[0]).ok_or_else(|| bad(lineno, "bad objective sense"))?;
            }
            Section::Rows => {
                let [code, rname] = tok[..] else {
                    return Err(bad(lineno, "expected row type and name"));
                };
                let s = match code {
                    "N" => {
                        if obj_name.is_none() {
                            obj_name = Some(rname.to_string());
                        }
                        continue;
                    }
                    "E" => RowSense::Eq,
                    "L" => RowSense::Le,
                    "G" => RowSense::Ge,
                    _ => return Err(bad(lineno, format!("unknown row type `{code}`"))),
                };
                if row_index.insert(rname.to_string(), sense.len()).is_some() {
                    return Err(bad(lineno, format!("duplicate row `{rname}`")));
                }
                row_names.push(rname.to_string());
                sense.push(s);
            }
            Section::Columns => {
                if tok.len() >= 3 && tok[1] == "'MARKER'" {
                    in_int = match tok[2] {
                        "'INTORG'" => true,
                        "'INTEND'" => false,
                        _ => return Err(bad(lineno, "unknown marker")),
                    };
                    continue;
                }
                if tok.len() != 3 && tok.len() != 5 {
                    return Err(bad(lineno, "expected column, row, value pairs"));
                }
                let c = match col_index.get(tok[0]) {
                    Some(&c) if c + 1 == col_names.len() => c,
                    Some(_) => return Err(bad(lineno, format!("column `{}` is not contiguous", tok[0]))),
                    None => {
                        let c = col_names.len();
                        col_index.insert(tok[0].to_string(), c);
                        col_names.push(tok[0].to_string());
                        obj.push(0.0);
                        lb.push(0.0);
                        ub.push(f64::INFINITY);
                        if in_int {
                            integer.push(c);
                        }
                        c
                    }
                };
                for pair in tok[1..].chunks(2) {
                    let v = parse(pair[1])?;
                    if Some(pair[0]) == obj_name.as_deref() {
                        obj[c] = v;
                    } else {
                        let r =
                            *row_index.get(pair[0]).ok_or_else(|| bad(lineno, format!("unknown row `{}`", pair[0])))?;
                        trip.push((r, c, v));
                    }
                }
            }
            Section::Rhs => {
                if rhs.len() < sense.len() {
                    rhs.resize(sense.len(), 0.0);
                }
                let pairs = if tok.len() % 2 == 1 { &tok[1..] } else { &tok[..] };
                for pair in pairs.chunks(2) {
                    let v = parse(pair[1])?;
                    if Some(pair[0]) == obj_name.as_deref() {
                        if v != 0.0 {
                            return Err(bad(lineno, "objective constants are not supported"));
                        }
                        continue;
                    }
                    let r = *row_index.get(pair[0]).ok_or_else(|| bad(lineno, format!("unknown row `{}`", pair[0])))?;
                    rhs[r] = v;
                }
            }
            Section::Bounds => {
                if tok.len() < 3 {
                    return Err(bad(lineno, "short bound line"));
                }
                let c = *col_index.get(tok[2]).ok_or_else(|| bad(lineno, format!("unknown column `{}`", tok[2])))?;
                let value = || tok.get(3).ok_or_else(|| bad(lineno, "missing bound value")).and_then(|s| parse(s));
                match tok[0] {
                    "UP" => ub[c] = value()?,
                    "LO" => lb[c] = value()?,
                    "FX" => {
                        let v = value()?;
                        lb[c] = v;
                        ub[c] = v;
                    }
                    "FR" => {
                        lb[c] = f64::NEG_INFINITY;
                        ub[c] = f64::INFINITY;
                    }
                    "MI" => lb[c] = f64::NEG_INFINITY,
                    "PL" => ub[c] = f64::INFINITY,
                    "BV" => {
                        lb[c] = 0.0;
                        ub[c] = 1.0;
                        if !integer.contains(&c) {
                            integer.push(c);
                        }
                    }
                    other => return Err(bad(lineno, format!("unsupported bound type `{other}`"))),
                }
            }
        }
    }
    if !ended {
        return Err(Error::Format("MPS file ends without ENDATA".into()));
    }
    rhs.resize(sense.len(), 0.0);
    integer.sort_unstable();
    let a = CscMatrix::from_triplets(sense.len(), col_names.len(), &trip)?;
    let lp = SparseLp::new(direction, obj, lb, ub, a, sense, rhs)?;
    Ok(MpsModel { name, lp, integer, row_names, col_names })
}

fn parse_sense(s: &str) -> Option<Direction> {
    match s.to_ascii_uppercase().as_str() {
        "MAX" | "MAXIMIZE" => Some(Direction::Maximize),
        "MIN" | "MINIMIZE" => Some(Direction::Minimize),
        _ => None,
    }
}
