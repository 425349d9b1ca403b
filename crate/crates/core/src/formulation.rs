//! Linear formulations over the location variables and the monolithic
//! covering model solved directly by branch-and-bound.

use std::time::Instant;

use crate::milp::{solve_milp_with_start, LpModel, MilpError, MilpOptions, NoCallback, Row, Variable};
use crate::model::{coverage, Instance, Solution};
use crate::stats::{SolveOptions, SolveResult, SolveStatus};

/// Domain rows with `x_i^t` mapped to column `col(i, t)`.
pub fn domain_rows(inst: &Instance, col: impl Fn(usize, usize) -> usize) -> Vec<Row> {
    inst.domain_rows()
        .iter()
        .map(|r| {
            Row::new(
                r.terms
                    .iter()
                    .map(|t| (col(t.facility, t.period), t.coef))
                    .collect(),
                r.sense,
                r.rhs,
            )
        })
        .collect()
}

/// Reads the location block `0..|I|*T` of a column vector as a solution.
pub fn solution_from_values(inst: &Instance, values: &[f64]) -> Solution {
    let x = values[..inst.var_count()].iter().map(|&v| v > 0.5).collect();
    Solution::from_flat(inst.facility_count(), inst.periods(), x).expect("sized to the instance")
}

/// The full model: binary `x` (columns `0..|I|*T`), continuous `z_j^t` in
/// `[0,1]` with `z_j^t <= Σ_i a_ij^t x_i^t`, objective `Σ d z`.
pub fn monolithic_model(inst: &Instance) -> LpModel {
    let periods = inst.periods();
    let mut model = LpModel::new();
    for _ in 0..inst.var_count() {
        model.add_var(Variable::binary(0.0));
    }
    for u in inst.users() {
        for t in 0..periods {
            let z = model.add_var(Variable::continuous(0.0, 1.0, u.demands[t]));
            let mut coefs = vec![(z, 1.0)];
            coefs.extend(u.covering[t].iter().map(|&i| (i * periods + t, -1.0)));
            model.add_row(Row::le(coefs, 0.0));
        }
    }
    for r in domain_rows(inst, |i, t| i * periods + t) {
        model.add_row(r);
    }
    model
}

/// Column values of the monolithic model for a given `x`.
pub fn monolithic_values(inst: &Instance, x: &Solution) -> Vec<f64> {
    let mut values: Vec<f64> = x.as_flat().iter().map(|&b| b as u8 as f64).collect();
    for u in inst.users() {
        for (t, cov) in u.covering.iter().enumerate() {
            values.push(if cov.iter().any(|&i| x.get(i, t)) { 1.0 } else { 0.0 });
        }
    }
    values
}

/// Solves the monolithic model with plain branch-and-bound.
pub fn solve_bc(inst: &Instance, opts: &SolveOptions) -> Result<SolveResult, MilpError> {
    let started = Instant::now();
    let model = monolithic_model(inst);
    let milp_opts = MilpOptions {
        time_limit_seconds: opts.time_limit_seconds,
        node_limit: opts.node_limit,
        ..MilpOptions::default()
    };
    let r = solve_milp_with_start(&model, &mut NoCallback, &milp_opts, None)?;
    let mut out = SolveResult::new(inst.name(), "bc", "");
    out.status = SolveStatus::from(r.status);
    if let Some(values) = &r.values {
        let x = solution_from_values(inst, values);
        out.objective = Some(coverage(inst, &x).expect("sized to the instance"));
        out.solution = Some(x);
    }
    out.bound = r.bound;
    out.nodes = r.nodes;
    out.wall_seconds = started.elapsed().as_secs_f64();
    out.refresh_gap();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve_lp, LpStatus};
    use crate::model::fig1;

    #[test]
    fn fig1_relaxation_is_thirty() {
        let model = monolithic_model(&fig1());
        let lp = solve_lp(&model);
        assert_eq!(lp.status, LpStatus::Optimal);
        assert!((lp.objective - 30.0).abs() < 1e-9);
    }

    #[test]
    fn fig1_bc() {
        let r = solve_bc(&fig1(), &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.objective, Some(30.0));
        assert_eq!(r.solution.unwrap(), Solution::single_period(&[1, 0, 1]));
    }

    #[test]
    fn values_are_feasible() {
        let inst = fig1();
        let x = Solution::single_period(&[1, 0, 1]);
        let v = monolithic_values(&inst, &x);
        let model = monolithic_model(&inst);
        assert!(model.is_feasible(&v, 1e-9));
        assert_eq!(model.objective_value(&v), 30.0);
    }
}
