//! Problem data for the dynamic maximum covering location problem.
//!
//! Facilities are indexed `0..facility_count`, periods `0..periods` and users
//! `0..users.len()`. Decision matrices over (facility, period) are stored
//! facility-major: entry `(i, t)` lives at `i * periods + t`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const ROW_TOLERANCE: f64 = 1e-9;
const FRACTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected_facilities}x{expected_periods}, got {facilities}x{periods}")]
    DimensionMismatch {
        expected_facilities: usize,
        expected_periods: usize,
        facilities: usize,
        periods: usize,
    },
}

/// Position of `(facility, period)` in a facility-major matrix.
#[inline]
pub fn var_index(facility: usize, period: usize, periods: usize) -> usize {
    facility * periods + period
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sense::Le => f.write_str("<="),
            Sense::Eq => f.write_str("="),
            Sense::Ge => f.write_str(">="),
        }
    }
}

/// One coefficient of a domain row: `coef * x[facility][period]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub facility: usize,
    pub period: usize,
    pub coef: f64,
}

/// A structured constraint of the feasible domain. Every variant lowers to
/// plain [`LinearRow`]s over the location variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DomainConstraint {
    /// At most `limit` facilities open in `period`.
    Cardinality { period: usize, limit: f64 },
    Knapsack { terms: Vec<Term>, rhs: f64 },
    /// `x[after] <= x[before]`, each given as `(facility, period)`.
    Precedence {
        before: (usize, usize),
        after: (usize, usize),
    },
    /// Open facilities stay open: `x[i][t] <= x[i][t+1]`.
    Persistence,
    /// Opening costs in `period` limited by `rhs`, with `x[i][-1] = 0`.
    Budget {
        period: usize,
        costs: Vec<f64>,
        rhs: f64,
    },
    Linear {
        terms: Vec<Term>,
        sense: Sense,
        rhs: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DomainSpec {
    pub constraints: Vec<DomainConstraint>,
}

/// A lowered domain row.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub terms: Vec<Term>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearRow {
    pub fn activity(&self, value: impl Fn(usize, usize) -> f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * value(t.facility, t.period))
            .sum()
    }

    fn is_integral(&self) -> bool {
        self.rhs.fract() == 0.0 && self.terms.iter().all(|t| t.coef.fract() == 0.0)
    }

    /// Exact check for binary points; integer arithmetic when every
    /// coefficient is integral.
    pub fn satisfied_by(&self, x: &Solution) -> bool {
        if self.is_integral() && self.rhs.abs() < 1e15 {
            let lhs: i128 = self
                .terms
                .iter()
                .filter(|t| x.get(t.facility, t.period))
                .map(|t| t.coef as i128)
                .sum();
            let rhs = self.rhs as i128;
            match self.sense {
                Sense::Le => lhs <= rhs,
                Sense::Eq => lhs == rhs,
                Sense::Ge => lhs >= rhs,
            }
        } else {
            let lhs = self.activity(|i, t| if x.get(i, t) { 1.0 } else { 0.0 });
            sense_holds(self.sense, lhs, self.rhs, ROW_TOLERANCE)
        }
    }
}

pub(crate) fn sense_holds(sense: Sense, lhs: f64, rhs: f64, tol: f64) -> bool {
    match sense {
        Sense::Le => lhs <= rhs + tol,
        Sense::Eq => (lhs - rhs).abs() <= tol,
        Sense::Ge => lhs >= rhs - tol,
    }
}

impl DomainSpec {
    pub fn new(constraints: Vec<DomainConstraint>) -> Self {
        Self { constraints }
    }

    pub fn has_persistence(&self) -> bool {
        self.constraints
            .iter()
            .any(|c| matches!(c, DomainConstraint::Persistence))
    }

    /// Lowers every structured constraint, in declaration order.
    pub fn lower(&self, facilities: usize, periods: usize) -> Vec<LinearRow> {
        let mut rows = Vec::new();
        for c in &self.constraints {
            match c {
                DomainConstraint::Cardinality { period, limit } => rows.push(LinearRow {
                    terms: (0..facilities)
                        .map(|i| Term {
                            facility: i,
                            period: *period,
                            coef: 1.0,
                        })
                        .collect(),
                    sense: Sense::Le,
                    rhs: *limit,
                }),
                DomainConstraint::Knapsack { terms, rhs } => rows.push(LinearRow {
                    terms: terms.clone(),
                    sense: Sense::Le,
                    rhs: *rhs,
                }),
                DomainConstraint::Precedence { before, after } => rows.push(LinearRow {
                    terms: vec![
                        Term {
                            facility: after.0,
                            period: after.1,
                            coef: 1.0,
                        },
                        Term {
                            facility: before.0,
                            period: before.1,
                            coef: -1.0,
                        },
                    ],
                    sense: Sense::Le,
                    rhs: 0.0,
                }),
                DomainConstraint::Persistence => {
                    for i in 0..facilities {
                        for t in 0..periods.saturating_sub(1) {
                            rows.push(LinearRow {
                                terms: vec![
                                    Term {
                                        facility: i,
                                        period: t,
                                        coef: 1.0,
                                    },
                                    Term {
                                        facility: i,
                                        period: t + 1,
                                        coef: -1.0,
                                    },
                                ],
                                sense: Sense::Le,
                                rhs: 0.0,
                            });
                        }
                    }
                }
                DomainConstraint::Budget { period, costs, rhs } => {
                    let mut terms = Vec::new();
                    for (i, &c) in costs.iter().enumerate() {
                        if c == 0.0 {
                            continue;
                        }
                        terms.push(Term {
                            facility: i,
                            period: *period,
                            coef: c,
                        });
                        if *period > 0 {
                            terms.push(Term {
                                facility: i,
                                period: period - 1,
                                coef: -c,
                            });
                        }
                    }
                    rows.push(LinearRow {
                        terms,
                        sense: Sense::Le,
                        rhs: *rhs,
                    });
                }
                DomainConstraint::Linear { terms, sense, rhs } => rows.push(LinearRow {
                    terms: terms.clone(),
                    sense: *sense,
                    rhs: *rhs,
                }),
            }
        }
        rows
    }

    fn validate(&self, facilities: usize, periods: usize) -> Result<(), ModelError> {
        let check = |i: usize, t: usize, what: &str| {
            if i >= facilities || t >= periods {
                Err(ModelError::InvalidArgument(format!(
                    "{what}: (facility {i}, period {t}) out of range"
                )))
            } else {
                Ok(())
            }
        };
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ModelError::InvalidArgument(format!("{what}: non-finite value")))
            }
        };
        for c in &self.constraints {
            match c {
                DomainConstraint::Cardinality { period, limit } => {
                    check(0, *period, "cardinality")?;
                    finite(*limit, "cardinality")?;
                }
                DomainConstraint::Knapsack { terms, rhs }
                | DomainConstraint::Linear { terms, rhs, .. } => {
                    for t in terms {
                        check(t.facility, t.period, "linear term")?;
                        finite(t.coef, "linear term")?;
                    }
                    finite(*rhs, "rhs")?;
                }
                DomainConstraint::Precedence { before, after } => {
                    check(before.0, before.1, "precedence")?;
                    check(after.0, after.1, "precedence")?;
                }
                DomainConstraint::Persistence => {}
                DomainConstraint::Budget { period, costs, rhs } => {
                    check(0, *period, "budget")?;
                    if costs.len() != facilities {
                        return Err(ModelError::InvalidArgument(format!(
                            "budget: expected {facilities} costs, got {}",
                            costs.len()
                        )));
                    }
                    for &c in costs {
                        finite(c, "budget cost")?;
                    }
                    finite(*rhs, "budget")?;
                }
            }
        }
        Ok(())
    }
}

/// A (possibly aggregated) user: per-period demand and covering facilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub demands: Vec<f64>,
    pub covering: Vec<Vec<usize>>,
}

impl UserRecord {
    pub fn new(demands: Vec<f64>, covering: Vec<Vec<usize>>) -> Self {
        Self { demands, covering }
    }

    /// Total number of covering (facility, period) pairs.
    pub fn coverage_size(&self) -> usize {
        self.covering.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    name: String,
    periods: usize,
    facility_count: usize,
    users: Vec<UserRecord>,
    domain: DomainSpec,
    rows: Vec<LinearRow>,
}

impl Instance {
    pub fn new(
        name: impl Into<String>,
        periods: usize,
        facility_count: usize,
        users: Vec<UserRecord>,
        domain: DomainSpec,
    ) -> Result<Self, ModelError> {
        if periods == 0 {
            return Err(ModelError::InvalidArgument("periods must be positive".into()));
        }
        if facility_count == 0 {
            return Err(ModelError::InvalidArgument(
                "facility_count must be positive".into(),
            ));
        }
        for (j, u) in users.iter().enumerate() {
            if u.demands.len() != periods || u.covering.len() != periods {
                return Err(ModelError::InvalidArgument(format!(
                    "user {j}: expected {periods} periods of demand and coverage"
                )));
            }
            for (t, &d) in u.demands.iter().enumerate() {
                if !(d > 0.0 && d.is_finite()) {
                    return Err(ModelError::InvalidArgument(format!(
                        "user {j}, period {t}: demand must satisfy d_j^t > 0 (got {d})"
                    )));
                }
            }
            for (t, cov) in u.covering.iter().enumerate() {
                let mut seen = vec![false; facility_count];
                for &i in cov {
                    if i >= facility_count {
                        return Err(ModelError::InvalidArgument(format!(
                            "user {j}, period {t}: facility index {i} out of range"
                        )));
                    }
                    if seen[i] {
                        return Err(ModelError::InvalidArgument(format!(
                            "user {j}, period {t}: duplicate facility {i}"
                        )));
                    }
                    seen[i] = true;
                }
            }
        }
        domain.validate(facility_count, periods)?;
        let rows = domain.lower(facility_count, periods);
        Ok(Self {
            name: name.into(),
            periods,
            facility_count,
            users,
            domain,
            rows,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn facility_count(&self) -> usize {
        self.facility_count
    }

    pub fn users(&self) -> &[UserRecord] {
        &self.users
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    /// The domain lowered to linear rows.
    pub fn domain_rows(&self) -> &[LinearRow] {
        &self.rows
    }

    /// Number of location variables, `|I| * T`.
    pub fn var_count(&self) -> usize {
        self.facility_count * self.periods
    }

    pub fn total_demand(&self) -> f64 {
        (0..self.periods).map(|t| self.period_demand(t)).sum()
    }

    pub fn period_demand(&self, t: usize) -> f64 {
        self.users.iter().map(|u| u.demands[t]).sum()
    }

    /// Same data with a different user list (domain and dimensions kept).
    pub fn with_users(&self, users: Vec<UserRecord>) -> Result<Self, ModelError> {
        Self::new(
            self.name.clone(),
            self.periods,
            self.facility_count,
            users,
            self.domain.clone(),
        )
    }

    /// Same data with a different domain.
    pub fn with_domain(&self, domain: DomainSpec) -> Result<Self, ModelError> {
        Self::new(
            self.name.clone(),
            self.periods,
            self.facility_count,
            self.users.clone(),
            domain,
        )
    }

    pub fn check_dims(&self, facilities: usize, periods: usize) -> Result<(), ModelError> {
        if facilities != self.facility_count || periods != self.periods {
            Err(ModelError::DimensionMismatch {
                expected_facilities: self.facility_count,
                expected_periods: self.periods,
                facilities,
                periods,
            })
        } else {
            Ok(())
        }
    }
}

/// Binary open/close decisions indexed by (facility, period).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Solution {
    facilities: usize,
    periods: usize,
    x: Vec<bool>,
}

impl Solution {
    pub fn zeros(facilities: usize, periods: usize) -> Self {
        Self {
            facilities,
            periods,
            x: vec![false; facilities * periods],
        }
    }

    pub fn for_instance(inst: &Instance) -> Self {
        Self::zeros(inst.facility_count(), inst.periods())
    }

    /// Builds from a facility-major flat vector.
    pub fn from_flat(facilities: usize, periods: usize, x: Vec<bool>) -> Result<Self, ModelError> {
        if x.len() != facilities * periods {
            return Err(ModelError::InvalidArgument(format!(
                "expected {} entries, got {}",
                facilities * periods,
                x.len()
            )));
        }
        Ok(Self {
            facilities,
            periods,
            x,
        })
    }

    /// Builds from rows of per-period 0/1 values, one row per facility.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self, ModelError> {
        let facilities = rows.len();
        let periods = rows.first().map_or(0, Vec::len);
        let mut x = Vec::with_capacity(facilities * periods);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != periods {
                return Err(ModelError::InvalidArgument(format!(
                    "facility {i}: expected {periods} periods"
                )));
            }
            for &v in r {
                match v {
                    0 => x.push(false),
                    1 => x.push(true),
                    _ => {
                        return Err(ModelError::InvalidArgument(format!(
                            "facility {i}: entries must be 0 or 1"
                        )))
                    }
                }
            }
        }
        Ok(Self {
            facilities,
            periods,
            x,
        })
    }

    /// Single-period convenience constructor.
    pub fn single_period(open: &[u8]) -> Self {
        let rows: Vec<Vec<u8>> = open.iter().map(|&v| vec![v]).collect();
        Self::from_rows(&rows).expect("0/1 entries")
    }

    /// Rounds a fractional point, which must be integral within `tol`.
    pub fn from_point(p: &FracSolution, tol: f64) -> Option<Self> {
        let mut x = Vec::with_capacity(p.values.len());
        for &v in &p.values {
            if (v - 1.0).abs() <= tol {
                x.push(true);
            } else if v.abs() <= tol {
                x.push(false);
            } else {
                return None;
            }
        }
        Some(Self {
            facilities: p.facilities,
            periods: p.periods,
            x,
        })
    }

    pub fn facilities(&self) -> usize {
        self.facilities
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    #[inline]
    pub fn get(&self, i: usize, t: usize) -> bool {
        self.x[var_index(i, t, self.periods)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, t: usize, v: bool) {
        self.x[var_index(i, t, self.periods)] = v;
    }

    pub fn flip(&mut self, i: usize, t: usize) {
        let k = var_index(i, t, self.periods);
        self.x[k] = !self.x[k];
    }

    pub fn as_flat(&self) -> &[bool] {
        &self.x
    }

    pub fn open_count(&self) -> usize {
        self.x.iter().filter(|&&b| b).count()
    }

    pub fn to_point(&self) -> FracSolution {
        FracSolution {
            facilities: self.facilities,
            periods: self.periods,
            values: self.x.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Per-facility rows of 0/1 values.
    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.facilities)
            .map(|i| (0..self.periods).map(|t| self.get(i, t) as u8).collect())
            .collect()
    }
}

impl fmt::Display for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in 0..self.periods {
            if t > 0 {
                f.write_str(" | ")?;
            }
            f.write_str("(")?;
            for i in 0..self.facilities {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{}", self.get(i, t) as u8)?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Real-valued point over the location variables, e.g. an LP solution.
#[derive(Debug, Clone, PartialEq)]
pub struct FracSolution {
    facilities: usize,
    periods: usize,
    values: Vec<f64>,
}

impl FracSolution {
    pub fn new(facilities: usize, periods: usize, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != facilities * periods {
            return Err(ModelError::InvalidArgument(format!(
                "expected {} entries, got {}",
                facilities * periods,
                values.len()
            )));
        }
        Ok(Self {
            facilities,
            periods,
            values,
        })
    }

    pub fn filled(facilities: usize, periods: usize, v: f64) -> Self {
        Self {
            facilities,
            periods,
            values: vec![v; facilities * periods],
        }
    }

    pub fn single_period(values: &[f64]) -> Self {
        Self {
            facilities: values.len(),
            periods: 1,
            values: values.to_vec(),
        }
    }

    pub fn facilities(&self) -> usize {
        self.facilities
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    #[inline]
    pub fn get(&self, i: usize, t: usize) -> f64 {
        self.values[var_index(i, t, self.periods)]
    }

    pub fn set(&mut self, i: usize, t: usize, v: f64) {
        self.values[var_index(i, t, self.periods)] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Whether every entry lies in `[0, 1]` up to `tol`.
    pub fn in_unit_box(&self, tol: f64) -> bool {
        self.values.iter().all(|&v| v >= -tol && v <= 1.0 + tol)
    }
}

/// Integer coverage counts `I_j^t(x)`, indexed (user, period).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageCount {
    periods: usize,
    counts: Vec<u32>,
}

impl CoverageCount {
    pub fn get(&self, j: usize, t: usize) -> u32 {
        self.counts[j * self.periods + t]
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    /// Counts for one period, in user order.
    pub fn period(&self, t: usize) -> Vec<u32> {
        self.counts
            .iter()
            .skip(t)
            .step_by(self.periods)
            .copied()
            .collect()
    }
}

pub fn coverage_counts(inst: &Instance, x: &Solution) -> Result<CoverageCount, ModelError> {
    inst.check_dims(x.facilities(), x.periods())?;
    let t_count = inst.periods();
    let mut counts = Vec::with_capacity(inst.user_count() * t_count);
    for u in inst.users() {
        for (t, cov) in u.covering.iter().enumerate() {
            counts.push(cov.iter().filter(|&&i| x.get(i, t)).count() as u32);
        }
    }
    Ok(CoverageCount {
        periods: t_count,
        counts,
    })
}

/// Covered demand `sum_t sum_j min{1, I_j^t(x)} d_j^t`.
pub fn coverage(inst: &Instance, x: &Solution) -> Result<f64, ModelError> {
    Ok(coverage_by_period(inst, x)?.iter().sum())
}

/// Covered demand split by period.
pub fn coverage_by_period(inst: &Instance, x: &Solution) -> Result<Vec<f64>, ModelError> {
    inst.check_dims(x.facilities(), x.periods())?;
    let mut per = vec![0.0; inst.periods()];
    for u in inst.users() {
        for (t, cov) in u.covering.iter().enumerate() {
            if cov.iter().any(|&i| x.get(i, t)) {
                per[t] += u.demands[t];
            }
        }
    }
    Ok(per)
}

/// Real-valued coverage `I_j^t(x) = sum_i a_ij^t x_i^t`, indexed `j * T + t`.
pub fn fractional_coverage_counts(
    inst: &Instance,
    x: &FracSolution,
) -> Result<Vec<f64>, ModelError> {
    inst.check_dims(x.facilities(), x.periods())?;
    if let Some(v) = x
        .values()
        .iter()
        .find(|&&v| !(v >= -FRACTION_TOLERANCE && v <= 1.0 + FRACTION_TOLERANCE))
    {
        return Err(ModelError::InvalidArgument(format!(
            "entry {v} outside [0, 1]"
        )));
    }
    let t_count = inst.periods();
    let mut out = Vec::with_capacity(inst.user_count() * t_count);
    for u in inst.users() {
        for (t, cov) in u.covering.iter().enumerate() {
            out.push(cov.iter().map(|&i| x.get(i, t)).sum());
        }
    }
    Ok(out)
}

/// Whether `x` lies in the domain. Returns false on a dimension mismatch.
pub fn check_domain(inst: &Instance, x: &Solution) -> bool {
    if inst.check_dims(x.facilities(), x.periods()).is_err() {
        return false;
    }
    inst.domain_rows().iter().all(|r| r.satisfied_by(x))
}

/// The three-facility single-period example used throughout the tests:
/// six users with demands 10, 5, 7 on single regions and 8, 2, 3 on the
/// pairwise overlaps, at most two facilities open.
pub fn fig1() -> Instance {
    let users = [
        (10.0, vec![0]),
        (5.0, vec![1]),
        (7.0, vec![2]),
        (8.0, vec![0, 1]),
        (2.0, vec![0, 2]),
        (3.0, vec![1, 2]),
    ]
    .into_iter()
    .map(|(d, cov)| UserRecord::new(vec![d], vec![cov]))
    .collect();
    Instance::new(
        "fig1",
        1,
        3,
        users,
        DomainSpec::new(vec![DomainConstraint::Cardinality {
            period: 0,
            limit: 2.0,
        }]),
    )
    .expect("fig1 is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_coverage_values() {
        let inst = fig1();
        assert_eq!(coverage(&inst, &Solution::single_period(&[1, 0, 0])).unwrap(), 20.0);
        assert_eq!(coverage(&inst, &Solution::single_period(&[0, 0, 0])).unwrap(), 0.0);
        assert_eq!(coverage(&inst, &Solution::single_period(&[1, 1, 0])).unwrap(), 28.0);
        assert_eq!(coverage(&inst, &Solution::single_period(&[1, 0, 1])).unwrap(), 30.0);
    }

    #[test]
    fn fig1_counts() {
        let inst = fig1();
        let c = coverage_counts(&inst, &Solution::single_period(&[1, 0, 0])).unwrap();
        assert_eq!(c.period(0), vec![1, 0, 0, 1, 1, 0]);
        let c = coverage_counts(&inst, &Solution::single_period(&[1, 1, 1])).unwrap();
        assert_eq!(c.period(0), vec![1, 1, 1, 2, 2, 2]);
        let c = coverage_counts(&inst, &Solution::single_period(&[0, 0, 0])).unwrap();
        assert!(c.period(0).iter().all(|&v| v == 0));
    }

    #[test]
    fn fractional_counts() {
        let inst = fig1();
        let c = fractional_coverage_counts(&inst, &FracSolution::single_period(&[0.0, 0.75, 0.75]))
            .unwrap();
        assert_eq!(c[5], 1.5);
        let c = fractional_coverage_counts(&inst, &FracSolution::single_period(&[0.4, 0.4, 0.4]))
            .unwrap();
        assert!((c[3] - 0.8).abs() < 1e-12);
        let c = fractional_coverage_counts(&inst, &FracSolution::single_period(&[0.0; 3])).unwrap();
        assert!(c.iter().all(|&v| v == 0.0));
        assert!(fractional_coverage_counts(&inst, &FracSolution::single_period(&[1.1, 0.0, 0.0]))
            .is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let inst = fig1();
        let x = Solution::zeros(2, 1);
        assert!(matches!(
            coverage(&inst, &x),
            Err(ModelError::DimensionMismatch { .. })
        ));
        assert!(coverage_counts(&inst, &x).is_err());
        assert!(!check_domain(&inst, &x));
    }

    #[test]
    fn domain_checks() {
        let inst = fig1();
        assert!(check_domain(&inst, &Solution::single_period(&[1, 0, 1])));
        assert!(!check_domain(&inst, &Solution::single_period(&[1, 1, 1])));

        let persist = Instance::new(
            "p",
            2,
            1,
            vec![UserRecord::new(vec![1.0, 1.0], vec![vec![0], vec![0]])],
            DomainSpec::new(vec![DomainConstraint::Persistence]),
        )
        .unwrap();
        let x = Solution::from_rows(&[vec![1, 0]]).unwrap();
        assert!(!check_domain(&persist, &x));
        let x = Solution::from_rows(&[vec![0, 1]]).unwrap();
        assert!(check_domain(&persist, &x));
    }

    #[test]
    fn budget_lowering_uses_previous_period() {
        let dom = DomainSpec::new(vec![DomainConstraint::Budget {
            period: 1,
            costs: vec![2.0, 3.0],
            rhs: 3.0,
        }]);
        let rows = dom.lower(2, 2);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].terms.len(), 4);
        let inst = Instance::new(
            "b",
            2,
            2,
            vec![UserRecord::new(vec![1.0, 1.0], vec![vec![0], vec![1]])],
            dom,
        )
        .unwrap();
        // facility 0 already open in period 0: only facility 1 costs in period 1
        let x = Solution::from_rows(&[vec![1, 1], vec![0, 1]]).unwrap();
        assert!(check_domain(&inst, &x));
        let x = Solution::from_rows(&[vec![0, 1], vec![0, 1]]).unwrap();
        assert!(!check_domain(&inst, &x));
    }

    #[test]
    fn instance_invariants() {
        let bad_demand = Instance::new(
            "x",
            1,
            1,
            vec![UserRecord::new(vec![0.0], vec![vec![0]])],
            DomainSpec::default(),
        );
        assert!(bad_demand.is_err());
        let bad_index = Instance::new(
            "x",
            1,
            1,
            vec![UserRecord::new(vec![1.0], vec![vec![1]])],
            DomainSpec::default(),
        );
        assert!(bad_index.is_err());
        let dup = Instance::new(
            "x",
            1,
            2,
            vec![UserRecord::new(vec![1.0], vec![vec![1, 1]])],
            DomainSpec::default(),
        );
        assert!(dup.is_err());
        let wrong_len = Instance::new(
            "x",
            2,
            1,
            vec![UserRecord::new(vec![1.0], vec![vec![0]])],
            DomainSpec::default(),
        );
        assert!(wrong_len.is_err());
    }
}
