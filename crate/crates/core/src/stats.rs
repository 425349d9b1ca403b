//! Solver-independent result and option types.

use std::fmt;

use crate::milp::MilpStatus;
use crate::model::Solution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    TimeLimit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::TimeLimit => "time_limit",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<MilpStatus> for SolveStatus {
    fn from(s: MilpStatus) -> Self {
        match s {
            MilpStatus::Optimal => SolveStatus::Optimal,
            MilpStatus::Feasible => SolveStatus::Feasible,
            MilpStatus::Infeasible => SolveStatus::Infeasible,
            MilpStatus::TimeLimit => SolveStatus::TimeLimit,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub instance: String,
    pub method: String,
    pub features: String,
    pub status: SolveStatus,
    pub solution: Option<Solution>,
    /// Exact coverage of `solution`.
    pub objective: Option<f64>,
    pub bound: f64,
    /// `(bound - objective) / max(1e-10, |bound|)`.
    pub gap: f64,
    pub nodes: usize,
    pub lazy_cuts: usize,
    pub user_cuts: usize,
    pub restricted_subproblems: usize,
    pub diversified_subproblems: usize,
    pub branches: usize,
    pub wall_seconds: f64,
}

impl SolveResult {
    pub fn new(instance: &str, method: &str, features: &str) -> Self {
        Self {
            instance: instance.to_string(),
            method: method.to_string(),
            features: features.to_string(),
            status: SolveStatus::Infeasible,
            solution: None,
            objective: None,
            bound: f64::NEG_INFINITY,
            gap: f64::INFINITY,
            nodes: 0,
            lazy_cuts: 0,
            user_cuts: 0,
            restricted_subproblems: 0,
            diversified_subproblems: 0,
            branches: 0,
            wall_seconds: 0.0,
        }
    }

    /// Recomputes `gap` from `objective` and `bound`.
    pub fn refresh_gap(&mut self) {
        self.gap = relative_gap(self.objective, self.bound);
    }

    pub fn gap_percent(&self) -> f64 {
        self.gap * 100.0
    }
}

pub fn relative_gap(objective: Option<f64>, bound: f64) -> f64 {
    match objective {
        Some(o) if bound.is_finite() => ((bound - o) / bound.abs().max(1e-10)).max(0.0),
        Some(_) => f64::INFINITY,
        None => f64::INFINITY,
    }
}

/// Limits shared by every driver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub time_limit_seconds: Option<f64>,
    pub node_limit: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            time_limit_seconds: None,
            node_limit: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_definition() {
        assert_eq!(relative_gap(Some(30.0), 30.0), 0.0);
        assert!((relative_gap(Some(27.0), 30.0) - 0.1).abs() < 1e-12);
        assert_eq!(relative_gap(None, 30.0), f64::INFINITY);
        assert_eq!(relative_gap(Some(0.0), 0.0), 0.0);
    }
}
