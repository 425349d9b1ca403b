//! A small self-contained LP/MILP engine.
//!
//! [`solve_lp`] is a dense bounded-variable primal simplex that reports row
//! duals. [`solve_milp`] runs best-bound branch-and-bound on top of it and
//! offers every candidate solution to a [`CandidateHandler`], which may add
//! rows (lazy constraints or user cuts), columns, sibling branches, or
//! heuristic incumbents. All models are maximization problems.

mod bnb;
mod lp;

use thiserror::Error;

pub use crate::model::Sense;
pub use bnb::{
    solve_milp, solve_milp_with_start, Branching, CandidateEvent, CandidateHandler, CandidateKind,
    FractionalCuts, MilpOptions, MilpResult, MilpStatus, NoCallback, NodeSelection,
};
pub use lp::{solve_lp, LpSolution, LpStatus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variable {
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
    pub integer: bool,
}

impl Variable {
    pub fn binary(objective: f64) -> Self {
        Self {
            lower: 0.0,
            upper: 1.0,
            objective,
            integer: true,
        }
    }

    pub fn continuous(lower: f64, upper: f64, objective: f64) -> Self {
        Self {
            lower,
            upper,
            objective,
            integer: false,
        }
    }
}

/// A sparse linear row `sum coef * x[col] (sense) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn new(coefs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Self { coefs, sense, rhs }
    }

    pub fn le(coefs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self::new(coefs, Sense::Le, rhs)
    }

    pub fn ge(coefs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self::new(coefs, Sense::Ge, rhs)
    }

    pub fn eq(coefs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self::new(coefs, Sense::Eq, rhs)
    }

    /// Value of the left-hand side; columns beyond `values` count as zero.
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coefs
            .iter()
            .map(|&(j, a)| a * values.get(j).copied().unwrap_or(0.0))
            .sum()
    }

    /// Amount by which `values` violates the row (zero when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }

    pub(crate) fn validate(&self, columns: usize) -> Result<(), MilpError> {
        if !self.rhs.is_finite() {
            return Err(MilpError::InvalidArgument("non-finite row rhs".into()));
        }
        for &(j, a) in &self.coefs {
            if j >= columns {
                return Err(MilpError::InvalidArgument(format!(
                    "row references column {j} but the model has {columns}"
                )));
            }
            if !a.is_finite() {
                return Err(MilpError::InvalidArgument("non-finite row coefficient".into()));
            }
        }
        Ok(())
    }
}

/// A maximization model with bounded variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpModel {
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
}

impl LpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, v: Variable) -> usize {
        self.vars.push(v);
        self.vars.len() - 1
    }

    pub fn add_row(&mut self, r: Row) -> usize {
        self.rows.push(r);
        self.rows.len() - 1
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.vars
            .iter()
            .zip(values)
            .map(|(v, x)| v.objective * x)
            .sum()
    }

    /// Largest objective attainable from the variable bounds alone.
    pub fn trivial_bound(&self) -> f64 {
        self.vars
            .iter()
            .map(|v| {
                if v.objective >= 0.0 {
                    v.objective * v.upper
                } else {
                    v.objective * v.lower
                }
            })
            .sum()
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        for (j, v) in self.vars.iter().enumerate() {
            if !(v.lower.is_finite() && v.upper.is_finite() && v.objective.is_finite()) {
                return Err(MilpError::InvalidArgument(format!(
                    "variable {j}: bounds and objective must be finite"
                )));
            }
            if v.lower > v.upper {
                return Err(MilpError::InvalidArgument(format!(
                    "variable {j}: lower bound above upper bound"
                )));
            }
        }
        for r in &self.rows {
            r.validate(self.vars.len())?;
        }
        Ok(())
    }

    /// Whether `values` satisfies bounds, rows and integrality within `tol`.
    pub fn is_feasible(&self, values: &[f64], tol: f64) -> bool {
        values.len() >= self.vars.len()
            && self.vars.iter().zip(values).all(|(v, &x)| {
                x >= v.lower - tol
                    && x <= v.upper + tol
                    && (!v.integer || (x - x.round()).abs() <= tol)
            })
            && self.rows.iter().all(|r| r.violation(values) <= tol)
    }
}
