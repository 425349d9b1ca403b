//! Benders dual decomposition: Lagrangian subproblems over copies `y` of the
//! location variables and the cuts they induce.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::benders::{Cut, CutKind, ThetaIndex};
use crate::formulation::domain_rows;
use crate::milp::{
    solve_lp, solve_milp, LpModel, LpStatus, MilpError, MilpOptions, MilpStatus, NoCallback, Row,
    Variable,
};
use crate::model::{fractional_coverage_counts, FracSolution, Instance, ModelError, Solution};

pub const DEFAULT_LSP2_ITERATIONS: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BddError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("the domain is empty")]
    EmptyDomain,
    #[error("linear relaxation not solved: {0:?}")]
    Relaxation(LpStatus),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Milp(#[from] MilpError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LspSolution {
    pub y: Solution,
    /// Indexed `j * T + t`.
    pub z: Vec<f64>,
    /// `Σ d z - Σ λ (y - x̃)`.
    pub value: f64,
    /// Upper bound on the subproblem optimum; equals `value` when `exact`.
    pub bound: f64,
    pub exact: bool,
    /// Indexed `i * T + t`.
    pub lambda: Vec<f64>,
}

impl LspSolution {
    /// Bound on `Σ d z - Σ λ y` over the subproblem, used as cut constant.
    fn inner_bound(&self, x_tilde: &FracSolution) -> f64 {
        let shift: f64 = self
            .lambda
            .iter()
            .zip(x_tilde.values())
            .map(|(l, x)| l * x)
            .sum();
        self.bound - shift
    }
}

fn check_lambda(inst: &Instance, x: &FracSolution, lambda: &[f64]) -> Result<(), BddError> {
    inst.check_dims(x.facilities(), x.periods())?;
    if !x.in_unit_box(1e-9) {
        return Err(BddError::InvalidArgument("x̃ must lie in [0,1]".into()));
    }
    if lambda.len() != inst.var_count() || lambda.iter().any(|l| !l.is_finite()) {
        return Err(BddError::InvalidArgument(
            "λ must have one finite entry per (facility, period)".into(),
        ));
    }
    Ok(())
}

/// Columns: `y` at `i * T + t` then `z_j^t` at `|I| T + j T + t`.
fn lsp_model(inst: &Instance, y_integer: bool, y_objective: &[f64]) -> LpModel {
    let periods = inst.periods();
    let n = inst.var_count();
    let mut model = LpModel::new();
    for &c in y_objective {
        model.add_var(Variable {
            lower: 0.0,
            upper: 1.0,
            objective: c,
            integer: y_integer,
        });
    }
    for u in inst.users() {
        for &d in &u.demands {
            model.add_var(Variable::continuous(0.0, 1.0, d));
        }
    }
    for (j, u) in inst.users().iter().enumerate() {
        for (t, cov) in u.covering.iter().enumerate() {
            let mut coefs = vec![(n + j * periods + t, 1.0)];
            coefs.extend(cov.iter().map(|&i| (i * periods + t, -1.0)));
            model.add_row(Row::le(coefs, 0.0));
        }
    }
    for r in domain_rows(inst, |i, t| i * periods + t) {
        model.add_row(r);
    }
    model
}

pub fn lsp1(inst: &Instance, x_tilde: &FracSolution, lambda: &[f64]) -> Result<LspSolution, BddError> {
    lsp1_with_limit(inst, x_tilde, lambda, None)
}

/// LSP1 with a time limit; on timeout the best point found is returned with
/// `exact = false` and a valid `bound`.
pub fn lsp1_with_limit(
    inst: &Instance,
    x_tilde: &FracSolution,
    lambda: &[f64],
    time_limit_seconds: Option<f64>,
) -> Result<LspSolution, BddError> {
    check_lambda(inst, x_tilde, lambda)?;
    let neg: Vec<f64> = lambda.iter().map(|l| -l).collect();
    let model = lsp_model(inst, true, &neg);
    let opts = MilpOptions {
        time_limit_seconds,
        ..MilpOptions::default()
    };
    let r = solve_milp(&model, &mut NoCallback, &opts)?;
    let shift: f64 = lambda.iter().zip(x_tilde.values()).map(|(l, x)| l * x).sum();
    let Some(values) = r.values else {
        return match r.status {
            MilpStatus::Infeasible => Err(BddError::EmptyDomain),
            _ => Err(BddError::InvalidArgument("no LSP1 solution within the limit".into())),
        };
    };
    let n = inst.var_count();
    let y = Solution::from_flat(
        inst.facility_count(),
        inst.periods(),
        values[..n].iter().map(|&v| v > 0.5).collect(),
    )
    .expect("sized to the instance");
    // z̄ at its bound min{1, Σ a ȳ}
    let counts = fractional_coverage_counts(inst, &y.to_point())?;
    let z: Vec<f64> = counts.iter().map(|&c| c.min(1.0)).collect();
    let covered: f64 = inst
        .users()
        .iter()
        .enumerate()
        .flat_map(|(j, u)| {
            let z = &z;
            u.demands
                .iter()
                .enumerate()
                .map(move |(t, d)| d * z[j * inst.periods() + t])
        })
        .sum();
    let penalty: f64 = lambda
        .iter()
        .zip(y.as_flat())
        .filter(|(_, &b)| b)
        .map(|(l, _)| l)
        .sum();
    let value = covered - penalty + shift;
    let exact = r.status == MilpStatus::Optimal;
    let bound = if exact { value } else { r.bound + shift };
    Ok(LspSolution {
        y,
        z,
        value,
        bound: bound.max(value),
        exact,
        lambda: lambda.to_vec(),
    })
}

/// `θ <= (Σ d z̄ - Σ λ ȳ) + Σ λ x`, aggregated over periods.
pub fn strengthened_cut(x_tilde: &FracSolution, lsp: &LspSolution) -> Cut {
    let periods = x_tilde.periods();
    let coefs: BTreeMap<(usize, usize), f64> = lsp
        .lambda
        .iter()
        .enumerate()
        .filter(|(_, &l)| l != 0.0)
        .map(|(k, &l)| ((k / periods, k % periods), l))
        .collect();
    Cut {
        theta: ThetaIndex::Aggregate,
        coefs,
        constant: lsp.inner_bound(x_tilde),
        kind: CutKind::Lagrangian,
        source: x_tilde.clone(),
    }
}

/// Duals of the copy rows `y = x̃` in the relaxation with `y` in `[0,1]`.
pub fn lambda_from_lp(inst: &Instance, x_tilde: &FracSolution) -> Result<Vec<f64>, BddError> {
    check_lambda(inst, x_tilde, &vec![0.0; inst.var_count()])?;
    let n = inst.var_count();
    let base = lsp_model(inst, false, &vec![0.0; n]);
    let mut model = LpModel {
        vars: base.vars,
        rows: Vec::with_capacity(n + base.rows.len()),
    };
    for (k, &x) in x_tilde.values().iter().enumerate() {
        model.add_row(Row::eq(vec![(k, 1.0)], x));
    }
    model.rows.extend(base.rows);
    let lp = solve_lp(&model);
    if lp.status != LpStatus::Optimal {
        return Err(BddError::Relaxation(lp.status));
    }
    Ok(lp.duals[..n].to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lsp2Result {
    /// Subproblem solution at the best multipliers found.
    pub solution: LspSolution,
    pub cut: Cut,
    /// Best bound after each iteration.
    pub history: Vec<f64>,
}

/// Approximate `min_λ LSP1(x̃, λ)` by subgradient steps from `λ = 0`.
///
/// Step: `(value - target) / ||g||²` with `g = x̃ - ȳ`. The target is the
/// classical subproblem value at `x̃` while the best bound exceeds it, and a
/// small decrease below the best bound afterwards.
pub fn lsp2(inst: &Instance, x_tilde: &FracSolution, iterations: usize) -> Result<Lsp2Result, BddError> {
    if iterations == 0 {
        return Err(BddError::InvalidArgument("iterations must be at least 1".into()));
    }
    let counts = fractional_coverage_counts(inst, x_tilde)?;
    let periods = inst.periods();
    let classical: f64 = inst
        .users()
        .iter()
        .enumerate()
        .flat_map(|(j, u)| {
            let counts = &counts;
            u.demands
                .iter()
                .enumerate()
                .map(move |(t, d)| d * counts[j * periods + t].min(1.0))
        })
        .sum();
    let mut lambda = vec![0.0; inst.var_count()];
    let mut best: Option<LspSolution> = None;
    let mut history = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let s = lsp1(inst, x_tilde, &lambda)?;
        if best.as_ref().is_none_or(|b| s.bound < b.bound) {
            best = Some(s.clone());
        }
        let best_bound = best.as_ref().map(|b| b.bound).expect("set above");
        history.push(best_bound);
        let g: Vec<f64> = x_tilde
            .values()
            .iter()
            .zip(s.y.as_flat())
            .map(|(x, &y)| x - if y { 1.0 } else { 0.0 })
            .collect();
        let norm2: f64 = g.iter().map(|v| v * v).sum();
        if norm2 < 1e-12 {
            break;
        }
        let target = if classical < best_bound - 1e-9 {
            classical
        } else {
            best_bound - 0.05 * best_bound.abs().max(1.0)
        };
        let mut step = (s.value - target) / norm2;
        if !(step > 0.0) {
            step = 0.05 * s.value.abs().max(1.0) / norm2;
        }
        for (l, gk) in lambda.iter_mut().zip(&g) {
            *l -= step * gk;
        }
    }
    let solution = best.expect("at least one iteration");
    let cut = strengthened_cut(x_tilde, &solution);
    Ok(Lsp2Result {
        solution,
        cut,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benders::evaluate_cut;
    use crate::model::{coverage, fig1};

    #[test]
    fn zero_multipliers_maximize_coverage() {
        let inst = fig1();
        let x = FracSolution::single_period(&[0.0, 0.75, 0.75]);
        let s = lsp1(&inst, &x, &[0.0; 3]).unwrap();
        assert_eq!(s.value, 30.0);
        assert_eq!(s.y, Solution::single_period(&[1, 0, 1]));
        let cut = strengthened_cut(&x, &s);
        assert!(cut.coefs.is_empty());
        assert_eq!(cut.constant, 30.0);
    }

    #[test]
    fn huge_multipliers_close_everything() {
        let inst = fig1();
        let x = FracSolution::single_period(&[0.5, 0.25, 1.0]);
        let s = lsp1(&inst, &x, &[1000.0; 3]).unwrap();
        assert_eq!(s.y.open_count(), 0);
        assert!((s.value - 1000.0 * 1.75).abs() < 1e-9);
        assert!(s.z.iter().all(|&z| z == 0.0));
    }

    #[test]
    fn lp_multipliers_are_tight_at_integers() {
        let inst = fig1();
        for bits in [[1u8, 0, 0], [0, 1, 0], [1, 0, 1], [0, 1, 1], [0, 0, 0]] {
            let x = Solution::single_period(&bits);
            let lambda = lambda_from_lp(&inst, &x.to_point()).unwrap();
            let s = lsp1(&inst, &x.to_point(), &lambda).unwrap();
            let cut = strengthened_cut(&x.to_point(), &s);
            let cov = coverage(&inst, &x).unwrap();
            assert!((evaluate_cut(&cut, &x.to_point()) - cov).abs() < 1e-6, "{bits:?}");
        }
    }

    #[test]
    fn lsp2_single_iteration_and_monotone_history() {
        let inst = fig1();
        let x = FracSolution::single_period(&[0.0, 0.75, 0.75]);
        let one = lsp2(&inst, &x, 1).unwrap();
        assert_eq!(one.cut.constant, 30.0);
        let many = lsp2(&inst, &x, DEFAULT_LSP2_ITERATIONS).unwrap();
        assert!(many.solution.bound <= 30.0);
        assert!(many.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(lsp2(&inst, &x, 0).is_err());
    }
}
