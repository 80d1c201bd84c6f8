//! Sparse linear programs and a revised simplex solver.

mod lu;
mod simplex;
mod sparse;

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use simplex::{solve_lp, solve_lp_from, SimplexParams, SimplexSolution, SimplexStatus};
pub use sparse::CscMatrix;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

/// Status of one variable in a basis. Slack variables follow the
/// structural columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarState {
    Basic,
    Lower,
    Upper,
}

/// A simplex basis over structural columns followed by row slacks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Basis {
    pub states: Vec<VarState>,
}

/// `optimize obj.x  s.t.  a x (sense) rhs,  col_lb <= x <= col_ub`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseLp {
    pub direction: Direction,
    pub obj: Vec<f64>,
    pub col_lb: Vec<f64>,
    pub col_ub: Vec<f64>,
    pub a: CscMatrix,
    pub sense: Vec<RowSense>,
    pub rhs: Vec<f64>,
}

impl SparseLp {
    pub fn new(
        direction: Direction,
        obj: Vec<f64>,
        col_lb: Vec<f64>,
        col_ub: Vec<f64>,
        a: CscMatrix,
        sense: Vec<RowSense>,
        rhs: Vec<f64>,
    ) -> Result<Self> {
        let lp = SparseLp { direction, obj, col_lb, col_ub, a, sense, rhs };
        lp.validate()?;
        Ok(lp)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.n_cols();
        let m = self.a.n_rows();
        if self.obj.len() != n || self.col_lb.len() != n || self.col_ub.len() != n {
            return Err(Error::Input(format!("column data does not match {n} columns")));
        }
        if self.sense.len() != m || self.rhs.len() != m {
            return Err(Error::Input(format!("row data does not match {m} rows")));
        }
        for j in 0..n {
            if !self.obj[j].is_finite() {
                return Err(Error::Input(format!("objective coefficient {j} is not finite")));
            }
            if self.col_lb[j].is_nan() || self.col_ub[j].is_nan() || self.col_lb[j] > self.col_ub[j] {
                return Err(Error::Input(format!("column {j} has inconsistent bounds")));
            }
        }
        if let Some(i) = self.rhs.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("right-hand side {i} is not finite")));
        }
        Ok(())
    }

    pub fn num_rows(&self) -> usize {
        self.a.n_rows()
    }

    pub fn num_cols(&self) -> usize {
        self.a.n_cols()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut act = alloc::vec![0.0; self.num_rows()];
        self.a.mul_add(x, 1.0, &mut act);
        let mut worst = 0.0f64;
        for (i, (&a, &b)) in act.iter().zip(&self.rhs).enumerate() {
            let v = match self.sense[i] {
                RowSense::Le => a - b,
                RowSense::Ge => b - a,
                RowSense::Eq => (a - b).abs(),
            };
            worst = worst.max(v);
        }
        for j in 0..x.len() {
            worst = worst.max(self.col_lb[j] - x[j]).max(x[j] - self.col_ub[j]);
        }
        worst
    }

    pub fn objective_of(&self, x: &[f64]) -> f64 {
        self.obj.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}
