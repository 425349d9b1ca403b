//! Exhaustive ground truth.
//!
//! Walks every binary matrix in Gray-code order, updating coverage counts
//! and row activities one flip at a time. Deliberately shares nothing with
//! the solvers beyond the model types.

use thiserror::Error;

use crate::model::{check_domain, coverage, Instance, Sense, Solution};
use crate::par::{self, Execution};

/// Largest `|I| * T` the oracle will enumerate.
pub const MAX_ORACLE_VARS: usize = 24;

const CHUNK_BITS: usize = 6;
const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance has {0} binaries; the oracle enumerates at most {MAX_ORACLE_VARS}")]
    TooLarge(usize),
    #[error("dimension mismatch between instance and center")]
    DimensionMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Largest per-period Hamming distance.
    PerPeriod,
    /// Hamming distance over all entries.
    Hamming,
}

struct Tables<'a> {
    inst: &'a Instance,
    n: usize,
    periods: usize,
    /// Per variable: coverage slots `j * T + t` it touches.
    slots: Vec<Vec<usize>>,
    demand: Vec<f64>,
    /// Per variable: `(row, coef)`.
    row_terms: Vec<Vec<(usize, f64)>>,
    rows: Vec<(Sense, f64)>,
}

struct Neighborhood<'a> {
    center: &'a [bool],
    kappa: usize,
    metric: Metric,
}

impl<'a> Tables<'a> {
    fn new(inst: &'a Instance) -> Self {
        let periods = inst.periods();
        let n = inst.var_count();
        let mut slots = vec![Vec::new(); n];
        let mut demand = vec![0.0; inst.user_count() * periods];
        for (j, u) in inst.users().iter().enumerate() {
            for (t, cov) in u.covering.iter().enumerate() {
                demand[j * periods + t] = u.demands[t];
                for &i in cov {
                    slots[i * periods + t].push(j * periods + t);
                }
            }
        }
        let mut row_terms = vec![Vec::new(); n];
        let mut rows = Vec::new();
        for (r, row) in inst.domain_rows().iter().enumerate() {
            for term in &row.terms {
                row_terms[term.facility * periods + term.period].push((r, term.coef));
            }
            rows.push((row.sense, row.rhs));
        }
        Self {
            inst,
            n,
            periods,
            slots,
            demand,
            row_terms,
            rows,
        }
    }

    /// Enumerates all points whose top `n - low` bits equal `high`.
    fn walk(&self, high: u64, low: usize, hood: Option<&Neighborhood<'_>>) -> Option<(Solution, f64)> {
        let n = self.n;
        let mut x = vec![false; n];
        for (k, v) in x.iter_mut().enumerate().skip(low) {
            *v = (high >> (k - low)) & 1 == 1;
        }
        let mut counts = vec![0u32; self.demand.len()];
        let mut value = 0.0;
        let mut activity = vec![0.0; self.rows.len()];
        let mut dist = vec![0usize; self.periods];
        for k in 0..n {
            if x[k] {
                for &s in &self.slots[k] {
                    if counts[s] == 0 {
                        value += self.demand[s];
                    }
                    counts[s] += 1;
                }
                for &(r, a) in &self.row_terms[k] {
                    activity[r] += a;
                }
            }
            if let Some(h) = hood {
                if x[k] != h.center[k] {
                    dist[k % self.periods] += 1;
                }
            }
        }

        let mut best: Option<(Solution, f64)> = None;
        let total: u64 = 1 << low;
        for step in 0..total {
            if step > 0 {
                let k = step.trailing_zeros() as usize;
                x[k] = !x[k];
                let sign = if x[k] { 1.0 } else { -1.0 };
                for &s in &self.slots[k] {
                    if x[k] {
                        if counts[s] == 0 {
                            value += self.demand[s];
                        }
                        counts[s] += 1;
                    } else {
                        counts[s] -= 1;
                        if counts[s] == 0 {
                            value -= self.demand[s];
                        }
                    }
                }
                for &(r, a) in &self.row_terms[k] {
                    activity[r] += sign * a;
                }
                if let Some(h) = hood {
                    let t = k % self.periods;
                    if x[k] != h.center[k] {
                        dist[t] += 1;
                    } else {
                        dist[t] -= 1;
                    }
                }
            }
            if let Some((_, b)) = &best {
                if value < b - 1e-6 {
                    continue;
                }
            }
            if let Some(h) = hood {
                let d = match h.metric {
                    Metric::PerPeriod => dist.iter().copied().max().unwrap_or(0),
                    Metric::Hamming => dist.iter().sum(),
                };
                if d > h.kappa {
                    continue;
                }
            }
            let loosely_feasible = self.rows.iter().zip(&activity).all(|(&(s, rhs), &a)| {
                let tol = 1e-7 * (1.0 + rhs.abs());
                match s {
                    Sense::Le => a <= rhs + tol,
                    Sense::Eq => (a - rhs).abs() <= tol,
                    Sense::Ge => a >= rhs - tol,
                }
            });
            if !loosely_feasible {
                continue;
            }
            // fresh exact evaluation for anything that might become the best
            let sol = Solution::from_flat(self.inst.facility_count(), self.periods, x.clone())
                .expect("sized to the instance");
            if !check_domain(self.inst, &sol) {
                continue;
            }
            let exact = coverage(self.inst, &sol).expect("sized to the instance");
            best = Some(better(best, (sol, exact)));
        }
        best
    }
}

fn better(cur: Option<(Solution, f64)>, cand: (Solution, f64)) -> (Solution, f64) {
    match cur {
        None => cand,
        Some(c) => {
            if cand.1 > c.1 + TIE_TOL || ((cand.1 - c.1).abs() <= TIE_TOL && cand.0 < c.0) {
                cand
            } else {
                c
            }
        }
    }
}

fn search(
    inst: &Instance,
    hood: Option<&Neighborhood<'_>>,
    exec: Execution,
) -> Result<Option<(Solution, f64)>, OracleError> {
    let n = inst.var_count();
    if n > MAX_ORACLE_VARS {
        return Err(OracleError::TooLarge(n));
    }
    let tables = Tables::new(inst);
    let high_bits = CHUNK_BITS.min(n);
    let low = n - high_bits;
    let chunks = par::map_range(exec, 1usize << high_bits, |h| tables.walk(h as u64, low, hood));
    Ok(chunks.into_iter().flatten().fold(None, |acc, c| Some(better(acc, c))))
}

/// Exact optimum over `Ω`, ties broken by the smallest `x`. `Ok(None)` when
/// the domain is empty.
pub fn enumerate_optimum(inst: &Instance) -> Result<Option<(Solution, f64)>, OracleError> {
    enumerate_optimum_with(inst, Execution::default())
}

pub fn enumerate_optimum_with(
    inst: &Instance,
    exec: Execution,
) -> Result<Option<(Solution, f64)>, OracleError> {
    search(inst, None, exec)
}

/// Exact optimum over `Ω` restricted to points within `kappa` of `center`.
pub fn enumerate_neighborhood_optimum(
    inst: &Instance,
    center: &Solution,
    kappa: usize,
    metric: Metric,
) -> Result<Option<(Solution, f64)>, OracleError> {
    if inst.check_dims(center.facilities(), center.periods()).is_err() {
        return Err(OracleError::DimensionMismatch);
    }
    let hood = Neighborhood {
        center: center.as_flat(),
        kappa,
        metric,
    };
    search(inst, Some(&hood), Execution::default())
}

/// Every point of `{0,1}^{I x T}` in `Ω`, in increasing order. For tests on
/// tiny instances.
pub fn feasible_points(inst: &Instance) -> Result<Vec<Solution>, OracleError> {
    let n = inst.var_count();
    if n > MAX_ORACLE_VARS {
        return Err(OracleError::TooLarge(n));
    }
    let mut out = Vec::new();
    for bits in 0u64..(1 << n) {
        let x: Vec<bool> = (0..n).map(|k| (bits >> k) & 1 == 1).collect();
        let sol = Solution::from_flat(inst.facility_count(), inst.periods(), x)
            .expect("sized to the instance");
        if check_domain(inst, &sol) {
            out.push(sol);
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fig1, DomainConstraint, DomainSpec, Term, UserRecord};

    #[test]
    fn fig1_optimum() {
        let (x, v) = enumerate_optimum(&fig1()).unwrap().unwrap();
        assert_eq!(x, Solution::single_period(&[1, 0, 1]));
        assert_eq!(v, 30.0);
    }

    #[test]
    fn empty_domain() {
        let inst = fig1()
            .with_domain(DomainSpec::new(vec![
                DomainConstraint::Linear {
                    terms: vec![Term {
                        facility: 0,
                        period: 0,
                        coef: 1.0,
                    }],
                    sense: Sense::Ge,
                    rhs: 1.0,
                },
                DomainConstraint::Linear {
                    terms: vec![Term {
                        facility: 0,
                        period: 0,
                        coef: 1.0,
                    }],
                    sense: Sense::Le,
                    rhs: 0.0,
                },
            ]))
            .unwrap();
        assert!(enumerate_optimum(&inst).unwrap().is_none());
    }

    #[test]
    fn no_users() {
        let inst = fig1().with_users(Vec::new()).unwrap();
        let (x, v) = enumerate_optimum(&inst).unwrap().unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(x.open_count(), 0);
    }

    #[test]
    fn size_bound() {
        let inst = Instance::new(
            "big",
            5,
            5,
            vec![UserRecord::new(vec![1.0; 5], vec![vec![0]; 5])],
            DomainSpec::default(),
        )
        .unwrap();
        assert_eq!(enumerate_optimum(&inst), Err(OracleError::TooLarge(25)));
    }

    #[test]
    fn neighborhoods() {
        let inst = fig1();
        let center = Solution::single_period(&[1, 0, 0]);
        let (_, v) = enumerate_neighborhood_optimum(&inst, &center, 2, Metric::PerPeriod)
            .unwrap()
            .unwrap();
        assert_eq!(v, 30.0);
        let (x, v) = enumerate_neighborhood_optimum(&inst, &center, 0, Metric::PerPeriod)
            .unwrap()
            .unwrap();
        assert_eq!(x, center);
        assert_eq!(v, 20.0);
    }

    #[test]
    fn metrics_differ_on_spread_flips() {
        // T=4, one extra facility opened in every period
        let user = UserRecord::new(vec![1.0; 4], vec![vec![1]; 4]);
        let inst = Instance::new("m", 4, 3, vec![user], DomainSpec::default()).unwrap();
        let center = Solution::from_rows(&[vec![1; 4], vec![0; 4], vec![0; 4]]).unwrap();
        let (_, per) = enumerate_neighborhood_optimum(&inst, &center, 1, Metric::PerPeriod)
            .unwrap()
            .unwrap();
        let (_, ham) = enumerate_neighborhood_optimum(&inst, &center, 1, Metric::Hamming)
            .unwrap()
            .unwrap();
        assert_eq!(per, 4.0);
        assert_eq!(ham, 1.0);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let inst = fig1();
        assert_eq!(
            enumerate_optimum_with(&inst, Execution::Sequential).unwrap(),
            enumerate_optimum_with(&inst, Execution::Parallel).unwrap()
        );
    }
}
