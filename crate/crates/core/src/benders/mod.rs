//! Benders optimality cuts for the covering subproblem and the
//! branch-and-Benders-cut drivers.
//!
//! For a candidate `x`, users in the set `Γ^t` contribute their demand to the
//! coefficient of every facility covering them; the others contribute to the
//! constant:
//!
//! ```text
//! θ^t <= Σ_i (Σ_{j in Γ^t} d_j^t a_ij^t) x_i^t + Σ_{j not in Γ^t} d_j^t
//! ```

mod driver;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::milp::MilpError;
use crate::model::{fractional_coverage_counts, FracSolution, Instance, ModelError, Solution};
use crate::preprocess::singles_set;

pub use driver::{
    build_master, solve_abbc, solve_benders, solve_ubbc, AbbcFeatures, BendersConfig, CutPool,
    MasterLayout,
};
pub(crate) use driver::{fill_result, CutGenerator};

/// Coverage values within this distance of 1 count as exactly 1.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BendersError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Milp(#[from] MilpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GammaVariant {
    B0,
    B1,
    B2,
    ParetoB1,
}

impl GammaVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            GammaVariant::B0 => "b0",
            GammaVariant::B1 => "b1",
            GammaVariant::B2 => "b2",
            GammaVariant::ParetoB1 => "pareto",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ThetaIndex {
    /// The single θ, or `Σ_t θ^t` in a multi-cut model.
    Aggregate,
    Period(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CutKind {
    Optimality(GammaVariant),
    /// Lagrangian cut; coefficients may be negative.
    Lagrangian,
}

/// `θ <= Σ coef(i,t) x_i^t + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub theta: ThetaIndex,
    pub coefs: BTreeMap<(usize, usize), f64>,
    pub constant: f64,
    pub kind: CutKind,
    /// Point the cut was generated at.
    pub source: FracSolution,
}

impl Cut {
    pub fn coefficient(&self, i: usize, t: usize) -> f64 {
        self.coefs.get(&(i, t)).copied().unwrap_or(0.0)
    }
}

/// Right-hand side of the cut at `x`.
pub fn evaluate_cut(cut: &Cut, x: &FracSolution) -> f64 {
    cut.coefs
        .iter()
        .map(|(&(i, t), &c)| c * x.get(i, t))
        .sum::<f64>()
        + cut.constant
}

/// Dual values `(π, σ)` of the covering subproblem, indexed `j * T + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualInspection {
    pub periods: usize,
    pub pi: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl DualInspection {
    pub fn get(&self, j: usize, t: usize) -> (f64, f64) {
        let k = j * self.periods + t;
        (self.pi[k], self.sigma[k])
    }
}

/// Running average of feasible solutions, used as a core-point estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CorePoint {
    point: FracSolution,
    updates: usize,
}

impl CorePoint {
    pub fn new(start: &Solution) -> Self {
        Self {
            point: start.to_point(),
            updates: 0,
        }
    }

    pub fn from_point(point: FracSolution) -> Self {
        Self { point, updates: 0 }
    }

    pub fn point(&self) -> &FracSolution {
        &self.point
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    /// `x̊ <- (x̊ + x) / 2`.
    pub fn update(&mut self, candidate: &Solution) {
        for (v, &b) in self.point.values_mut().iter_mut().zip(candidate.as_flat()) {
            *v = 0.5 * (*v + if b { 1.0 } else { 0.0 });
        }
        self.updates += 1;
    }

    pub fn updated(&self, candidate: &Solution) -> Self {
        let mut c = self.clone();
        c.update(candidate);
        c
    }
}

fn below_one(v: f64) -> bool {
    v < 1.0 - TIE_TOLERANCE
}

fn at_most_one(v: f64) -> bool {
    v <= 1.0 + TIE_TOLERANCE
}

/// Membership rule for one (user, period). `core` is the core-point
/// coverage, needed only by `ParetoB1`.
fn in_gamma(variant: GammaVariant, it: f64, single: bool, core: Option<f64>) -> bool {
    match variant {
        GammaVariant::B0 => below_one(it),
        GammaVariant::B2 => at_most_one(it),
        GammaVariant::B1 => {
            if single {
                at_most_one(it)
            } else {
                below_one(it)
            }
        }
        GammaVariant::ParetoB1 => {
            if below_one(it) {
                true
            } else if !at_most_one(it) {
                false
            } else {
                let ic = core.expect("checked by caller");
                if below_one(ic) {
                    true
                } else if !at_most_one(ic) {
                    false
                } else {
                    // double tie: B1 rule
                    single
                }
            }
        }
    }
}

struct Prepared {
    counts: Vec<f64>,
    core_counts: Option<Vec<f64>>,
}

fn prepare(
    inst: &Instance,
    x: &FracSolution,
    variant: GammaVariant,
    core: Option<&CorePoint>,
) -> Result<Prepared, BendersError> {
    let counts = fractional_coverage_counts(inst, x)?;
    let core_counts = match (variant, core) {
        (GammaVariant::ParetoB1, Some(c)) => Some(fractional_coverage_counts(inst, c.point())?),
        (GammaVariant::ParetoB1, None) => {
            return Err(BendersError::InvalidArgument(
                "ParetoB1 requires a core point".into(),
            ))
        }
        _ => None,
    };
    Ok(Prepared {
        counts,
        core_counts,
    })
}

fn member(
    prep: &Prepared,
    variant: GammaVariant,
    singles: &BTreeSet<usize>,
    periods: usize,
    j: usize,
    t: usize,
) -> bool {
    let k = j * periods + t;
    in_gamma(
        variant,
        prep.counts[k],
        singles.contains(&j),
        prep.core_counts.as_ref().map(|c| c[k]),
    )
}

/// `Γ^t(x)` for one period.
pub fn gamma_set(
    inst: &Instance,
    x: &FracSolution,
    t: usize,
    variant: GammaVariant,
    singles: &BTreeSet<usize>,
    core: Option<&CorePoint>,
) -> Result<BTreeSet<usize>, BendersError> {
    if t >= inst.periods() {
        return Err(BendersError::InvalidArgument(format!("period {t} out of range")));
    }
    let prep = prepare(inst, x, variant, core)?;
    Ok((0..inst.user_count())
        .filter(|&j| member(&prep, variant, singles, inst.periods(), j, t))
        .collect())
}

fn period_cut(
    inst: &Instance,
    prep: &Prepared,
    x: &FracSolution,
    t: usize,
    variant: GammaVariant,
    singles: &BTreeSet<usize>,
    theta: ThetaIndex,
) -> Cut {
    let mut coefs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut constant = 0.0;
    for (j, u) in inst.users().iter().enumerate() {
        let d = u.demands[t];
        if member(prep, variant, singles, inst.periods(), j, t) {
            for &i in &u.covering[t] {
                *coefs.entry((i, t)).or_insert(0.0) += d;
            }
        } else {
            constant += d;
        }
    }
    Cut {
        theta,
        coefs,
        constant,
        kind: CutKind::Optimality(variant),
        source: x.clone(),
    }
}

/// One cut per period, each bounding `θ^t`.
pub fn multi_cuts(
    inst: &Instance,
    x: &FracSolution,
    variant: GammaVariant,
    singles: &BTreeSet<usize>,
    core: Option<&CorePoint>,
) -> Result<Vec<Cut>, BendersError> {
    let prep = prepare(inst, x, variant, core)?;
    Ok((0..inst.periods())
        .map(|t| period_cut(inst, &prep, x, t, variant, singles, ThetaIndex::Period(t)))
        .collect())
}

/// The aggregate cut: the sum of the per-period cuts.
pub fn single_cut(
    inst: &Instance,
    x: &FracSolution,
    variant: GammaVariant,
    singles: &BTreeSet<usize>,
    core: Option<&CorePoint>,
) -> Result<Cut, BendersError> {
    let cuts = multi_cuts(inst, x, variant, singles, core)?;
    Ok(sum_cuts(cuts, ThetaIndex::Aggregate, x))
}

/// The B1 cut bounding `θ^t` at an integer point, given that period's
/// coverage counts per user. Same cut as `multi_cuts(.., B1, ..)[t]`.
pub(crate) fn b1_period_cut(
    inst: &Instance,
    counts: &[u32],
    t: usize,
    singles: &BTreeSet<usize>,
    x: &Solution,
) -> Cut {
    let mut coefs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut constant = 0.0;
    for (j, u) in inst.users().iter().enumerate() {
        let d = u.demands[t];
        if counts[j] == 0 || (counts[j] == 1 && singles.contains(&j)) {
            for &i in &u.covering[t] {
                *coefs.entry((i, t)).or_insert(0.0) += d;
            }
        } else {
            constant += d;
        }
    }
    Cut {
        theta: ThetaIndex::Period(t),
        coefs,
        constant,
        kind: CutKind::Optimality(GammaVariant::B1),
        source: x.to_point(),
    }
}

pub(crate) fn sum_cuts(cuts: Vec<Cut>, theta: ThetaIndex, x: &FracSolution) -> Cut {
    let mut coefs = BTreeMap::new();
    let mut constant = 0.0;
    let mut kind = CutKind::Lagrangian;
    for c in cuts {
        for (k, v) in c.coefs {
            *coefs.entry(k).or_insert(0.0) += v;
        }
        constant += c.constant;
        kind = c.kind;
    }
    Cut {
        theta,
        coefs,
        constant,
        kind,
        source: x.clone(),
    }
}

/// Pareto-optimal duals, pointwise. The tie `Ĩ = 1, I̊ = 1` uses the B1
/// rule with the instance's singly-covered users.
pub fn pareto_dual(
    inst: &Instance,
    x: &FracSolution,
    core: &CorePoint,
) -> Result<DualInspection, BendersError> {
    let singles = singles_set(inst);
    let prep = prepare(inst, x, GammaVariant::ParetoB1, Some(core))?;
    let periods = inst.periods();
    let mut pi = Vec::with_capacity(inst.user_count() * periods);
    let mut sigma = Vec::with_capacity(pi.capacity());
    for (j, u) in inst.users().iter().enumerate() {
        for (t, &d) in u.demands.iter().enumerate() {
            if member(&prep, GammaVariant::ParetoB1, &singles, periods, j, t) {
                pi.push(d);
                sigma.push(0.0);
            } else {
                pi.push(0.0);
                sigma.push(d);
            }
        }
    }
    Ok(DualInspection { periods, pi, sigma })
}

/// Users kept in the main problem and the objective they fold into `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialBendersPlan {
    pub retained: BTreeSet<usize>,
    /// Indexed `i * T + t`.
    pub folded: Vec<f64>,
}

pub fn partial_plan(inst: &Instance, singles: &BTreeSet<usize>) -> PartialBendersPlan {
    let periods = inst.periods();
    let mut folded = vec![0.0; inst.var_count()];
    for &j in singles {
        let u = &inst.users()[j];
        for (t, cov) in u.covering.iter().enumerate() {
            for &i in cov {
                folded[i * periods + t] += u.demands[t];
            }
        }
    }
    PartialBendersPlan {
        retained: singles.clone(),
        folded,
    }
}

impl PartialBendersPlan {
    pub fn folded_coef(&self, i: usize, t: usize, periods: usize) -> f64 {
        self.folded[i * periods + t]
    }

    /// Folded objective at `x`.
    pub fn folded_value(&self, x: &Solution) -> f64 {
        self.folded
            .iter()
            .zip(x.as_flat())
            .filter(|(_, &b)| b)
            .map(|(c, _)| c)
            .sum()
    }

    /// The instance left to the Benders subproblem.
    pub fn subproblem_instance(&self, inst: &Instance) -> Instance {
        let users = inst
            .users()
            .iter()
            .enumerate()
            .filter(|(j, _)| !self.retained.contains(j))
            .map(|(_, u)| u.clone())
            .collect();
        inst.with_users(users).expect("subset of valid users")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{coverage, coverage_counts, fig1};

    fn x100() -> FracSolution {
        Solution::single_period(&[1, 0, 0]).to_point()
    }

    fn coefs(c: &Cut) -> Vec<f64> {
        (0..3).map(|i| c.coefficient(i, 0)).collect()
    }

    #[test]
    fn period_cut_from_counts_matches_multi_cut() {
        let inst = fig1();
        let singles = singles_set(&inst);
        for m in 0..8u8 {
            let x = Solution::single_period(&[m & 1, m >> 1 & 1, m >> 2 & 1]);
            let counts = coverage_counts(&inst, &x).unwrap().period(0);
            let fast = b1_period_cut(&inst, &counts, 0, &singles, &x);
            let slow = multi_cuts(&inst, &x.to_point(), GammaVariant::B1, &singles, None).unwrap();
            assert_eq!(fast, slow[0]);
        }
    }

    #[test]
    fn gamma_sets_fig1() {
        let inst = fig1();
        let s = singles_set(&inst);
        let g = |v| gamma_set(&inst, &x100(), 0, v, &s, None).unwrap();
        assert_eq!(g(GammaVariant::B0), BTreeSet::from([1, 2, 5]));
        assert_eq!(g(GammaVariant::B2), (0..6).collect());
        assert_eq!(g(GammaVariant::B1), BTreeSet::from([0, 1, 2, 5]));
        assert!(gamma_set(&inst, &x100(), 0, GammaVariant::ParetoB1, &s, None).is_err());
    }

    #[test]
    fn golden_single_cuts() {
        let inst = fig1();
        let s = singles_set(&inst);
        let cut = |v| single_cut(&inst, &x100(), v, &s, None).unwrap();
        let b0 = cut(GammaVariant::B0);
        assert_eq!((coefs(&b0), b0.constant), (vec![0.0, 8.0, 10.0], 20.0));
        let b1 = cut(GammaVariant::B1);
        assert_eq!((coefs(&b1), b1.constant), (vec![10.0, 8.0, 10.0], 10.0));
        let b2 = cut(GammaVariant::B2);
        assert_eq!((coefs(&b2), b2.constant), (vec![20.0, 16.0, 12.0], 0.0));

        let xbar = FracSolution::single_period(&[0.0, 0.75, 0.75]);
        assert!((evaluate_cut(&b0, &xbar) - 33.5).abs() < 1e-9);
        assert!((evaluate_cut(&b1, &xbar) - 23.5).abs() < 1e-9);
        assert!((evaluate_cut(&b2, &xbar) - 21.0).abs() < 1e-9);
        for c in [&b0, &b1, &b2] {
            assert_eq!(evaluate_cut(c, &x100()), 20.0);
        }
    }

    #[test]
    fn pareto_cases() {
        let inst = fig1();
        let hi = CorePoint::from_point(FracSolution::single_period(&[0.6, 0.6, 0.6]));
        let d = pareto_dual(&inst, &x100(), &hi).unwrap();
        assert_eq!(d.get(3, 0), (0.0, 8.0));
        // u2 has coverage 0: π = d regardless of the core
        assert_eq!(d.get(1, 0), (5.0, 0.0));
        let lo = CorePoint::from_point(FracSolution::single_period(&[0.4, 0.4, 0.4]));
        let d = pareto_dual(&inst, &x100(), &lo).unwrap();
        assert_eq!(d.get(3, 0), (8.0, 0.0));
        for k in 0..6 {
            assert_eq!(d.pi[k] + d.sigma[k], inst.users()[k].demands[0]);
        }
    }

    #[test]
    fn core_point_averaging() {
        let mut c = CorePoint::new(&Solution::single_period(&[1, 0, 0]));
        c.update(&Solution::single_period(&[0, 1, 0]));
        assert_eq!(c.point().values(), &[0.5, 0.5, 0.0]);
        assert_eq!(c.updates(), 1);
        let target = Solution::single_period(&[0, 0, 1]);
        for _ in 0..40 {
            c.update(&target);
        }
        assert!(c.point().values()[2] > 1.0 - 1e-9);
    }

    #[test]
    fn partial_plan_fig1() {
        let inst = fig1();
        let plan = partial_plan(&inst, &singles_set(&inst));
        assert_eq!(plan.folded, vec![10.0, 5.0, 7.0]);
        assert_eq!(partial_plan(&inst, &BTreeSet::new()).folded, vec![0.0; 3]);
        let x = Solution::single_period(&[1, 0, 1]);
        let sub = plan.subproblem_instance(&inst);
        assert_eq!(sub.user_count(), 3);
        assert_eq!(
            plan.folded_value(&x) + coverage(&sub, &x).unwrap(),
            coverage(&inst, &x).unwrap()
        );
    }

    #[test]
    fn multi_cut_sum_matches_single() {
        let inst = fig1();
        let s = singles_set(&inst);
        let cuts = multi_cuts(&inst, &x100(), GammaVariant::B1, &s, None).unwrap();
        assert_eq!(cuts.len(), 1);
        assert_eq!(cuts[0].theta, ThetaIndex::Period(0));
        let single = single_cut(&inst, &x100(), GammaVariant::B1, &s, None).unwrap();
        assert_eq!(cuts[0].coefs, single.coefs);
    }
}
