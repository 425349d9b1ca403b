//! Local branching on top of branch-and-Benders-cut: per-period distance
//! neighborhoods, the restricted and diversified subproblems, and the two
//! ways of excluding explored neighborhoods from the main problem.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::benders::{
    b1_period_cut, build_master, evaluate_cut, fill_result, multi_cuts, BendersError, Cut, CutGenerator,
    GammaVariant, MasterLayout,
};
use crate::formulation::solution_from_values;
use crate::greedy::greedy_warmstart;
use crate::milp::{
    solve_lp, solve_milp_with_start, CandidateEvent, CandidateHandler, CandidateKind,
    FractionalCuts, LpModel, LpStatus, MilpError, MilpOptions, MilpStatus, NoCallback, Row,
    Variable,
};
use crate::model::{coverage, DomainConstraint, Instance, ModelError, Solution};
use crate::preprocess::{reduce, singles_set};
use crate::stats::{SolveOptions, SolveResult};

const ROOT_ROUNDS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LbError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Benders(#[from] BendersError),
}

fn same_dims(x: &Solution, y: &Solution) -> Result<(), LbError> {
    if x.facilities() != y.facilities() || x.periods() != y.periods() {
        return Err(LbError::Model(ModelError::DimensionMismatch {
            expected_facilities: y.facilities(),
            expected_periods: y.periods(),
            facilities: x.facilities(),
            periods: x.periods(),
        }));
    }
    Ok(())
}

/// Number of differing entries over all `(i, t)`.
pub fn hamming_distance(x: &Solution, x_tilde: &Solution) -> Result<usize, LbError> {
    same_dims(x, x_tilde)?;
    Ok(x.as_flat()
        .iter()
        .zip(x_tilde.as_flat())
        .filter(|(a, b)| a != b)
        .count())
}

/// Hamming distance in each period; the metric value is the maximum.
pub fn per_period_distance(x: &Solution, x_tilde: &Solution) -> Result<Vec<usize>, LbError> {
    same_dims(x, x_tilde)?;
    Ok((0..x.periods())
        .map(|t| {
            (0..x.facilities())
                .filter(|&i| x.get(i, t) != x_tilde.get(i, t))
                .count()
        })
        .collect())
}

/// `Σ_{open}(1 - x) + Σ_{closed} x` in period `t` as `(terms, constant)`.
fn distance_terms(
    center: &Solution,
    t: usize,
    col: &impl Fn(usize, usize) -> usize,
) -> (Vec<(usize, f64)>, f64) {
    let mut terms = Vec::with_capacity(center.facilities());
    let mut constant = 0.0;
    for i in 0..center.facilities() {
        if center.get(i, t) {
            terms.push((col(i, t), -1.0));
            constant += 1.0;
        } else {
            terms.push((col(i, t), 1.0));
        }
    }
    (terms, constant)
}

/// `Dist_t(x) <= kappa`.
fn distance_at_most(center: &Solution, t: usize, kappa: usize, col: &impl Fn(usize, usize) -> usize) -> Row {
    let (terms, c) = distance_terms(center, t, col);
    Row::le(terms, kappa as f64 - c)
}

/// `Dist_t(x) >= kappa`.
fn distance_at_least(center: &Solution, t: usize, kappa: usize, col: &impl Fn(usize, usize) -> usize) -> Row {
    let (terms, c) = distance_terms(center, t, col);
    Row::ge(terms, kappa as f64 - c)
}

/// Hamming distance over all periods `>= 1`.
fn differs_somewhere(center: &Solution, col: &impl Fn(usize, usize) -> usize) -> Row {
    let mut terms = Vec::new();
    let mut c = 0.0;
    for t in 0..center.periods() {
        let (tt, ct) = distance_terms(center, t, col);
        terms.extend(tt);
        c += ct;
    }
    Row::ge(terms, 1.0 - c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NeighborhoodMove {
    Add { facility: usize, period: usize },
    Swap { remove: usize, add: usize, period: usize },
    Add2 { first: usize, second: usize, period: usize },
}

impl NeighborhoodMove {
    pub fn period(&self) -> usize {
        match *self {
            NeighborhoodMove::Add { period, .. }
            | NeighborhoodMove::Swap { period, .. }
            | NeighborhoodMove::Add2 { period, .. } => period,
        }
    }

    pub fn apply(&self, x: &Solution) -> Solution {
        let mut y = x.clone();
        match *self {
            NeighborhoodMove::Add { facility, period } => y.set(facility, period, true),
            NeighborhoodMove::Swap { remove, add, period } => {
                y.set(remove, period, false);
                y.set(add, period, true);
            }
            NeighborhoodMove::Add2 {
                first,
                second,
                period,
            } => {
                y.set(first, period, true);
                y.set(second, period, true);
            }
        }
        y
    }
}

/// Moves within per-period distance `kappa <= 2` that can raise coverage:
/// single adds, pairs of adds and swaps. Removal-only moves are left out and
/// feasibility is not checked.
pub fn enumerate_moves(
    inst: &Instance,
    x_tilde: &Solution,
    kappa: usize,
) -> Result<Vec<NeighborhoodMove>, LbError> {
    inst.check_dims(x_tilde.facilities(), x_tilde.periods())?;
    if kappa > 2 {
        return Err(LbError::InvalidArgument(format!(
            "moves are enumerated for kappa <= 2, got {kappa}"
        )));
    }
    let mut out = Vec::new();
    if kappa == 0 {
        return Ok(out);
    }
    for t in 0..inst.periods() {
        let (open, closed): (Vec<usize>, Vec<usize>) =
            (0..inst.facility_count()).partition(|&i| x_tilde.get(i, t));
        out.extend(closed.iter().map(|&i| NeighborhoodMove::Add {
            facility: i,
            period: t,
        }));
        if kappa < 2 {
            continue;
        }
        for (k, &a) in closed.iter().enumerate() {
            for &b in &closed[k + 1..] {
                out.push(NeighborhoodMove::Add2 {
                    first: a,
                    second: b,
                    period: t,
                });
            }
        }
        for &r in &open {
            for &a in &closed {
                out.push(NeighborhoodMove::Swap {
                    remove: r,
                    add: a,
                    period: t,
                });
            }
        }
    }
    Ok(out)
}

/// Big-M exclusion of the per-period neighborhood `{x : Dist_t(x) <= kappa
/// for all t}`; with `kappa = 0` a single no-good row.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SepDBlock {
    pub center: Solution,
    pub kappa: usize,
}

impl SepDBlock {
    /// Auxiliary binaries `δ^t` the block needs.
    pub fn delta_count(&self) -> usize {
        if self.kappa == 0 {
            0
        } else {
            self.center.periods()
        }
    }

    /// Rows with `x_i^t` at `col(i, t)` and `δ^t` at `deltas[t]`.
    pub fn rows(&self, col: impl Fn(usize, usize) -> usize, deltas: &[usize]) -> Vec<Row> {
        assert_eq!(deltas.len(), self.delta_count(), "one column per δ");
        if self.kappa == 0 {
            return vec![differs_somewhere(&self.center, &col)];
        }
        let m = (self.kappa + 1) as f64;
        let periods = self.center.periods();
        let mut rows = Vec::with_capacity(periods + 1);
        for (t, &d) in deltas.iter().enumerate() {
            let (mut terms, c) = distance_terms(&self.center, t, &col);
            terms.push((d, m));
            rows.push(Row::ge(terms, m - c));
        }
        rows.push(Row::le(
            deltas.iter().map(|&d| (d, 1.0)).collect(),
            periods as f64 - 1.0,
        ));
        rows
    }

    /// Whether `x` lies outside the excluded neighborhood.
    pub fn satisfied_by(&self, x: &Solution) -> bool {
        let d = per_period_distance(x, &self.center).expect("same dimensions");
        if self.kappa == 0 {
            d.iter().any(|&v| v > 0)
        } else {
            d.iter().any(|&v| v > self.kappa)
        }
    }

    /// `δ` values completing a feasible `x`: zero in one far period.
    pub fn delta_values(&self, x: &Solution) -> Vec<f64> {
        if self.kappa == 0 {
            return Vec::new();
        }
        let d = per_period_distance(x, &self.center).expect("same dimensions");
        let free = d.iter().position(|&v| v > self.kappa);
        (0..d.len())
            .map(|t| if Some(t) == free { 0.0 } else { 1.0 })
            .collect()
    }
}

pub fn sepd_block(x_tilde: &Solution, kappa: usize) -> SepDBlock {
    SepDBlock {
        center: x_tilde.clone(),
        kappa,
    }
}

/// Row sets of the `T` branches excluding the neighborhood: branch `t'`
/// requires distance `>= kappa + 1` in `t'` and `<= kappa` in every earlier
/// period.
pub fn sepb_branch_rows(
    x_tilde: &Solution,
    kappa: usize,
    col: impl Fn(usize, usize) -> usize,
) -> Vec<Vec<Row>> {
    (0..x_tilde.periods())
        .map(|tp| {
            let mut rows = vec![distance_at_least(x_tilde, tp, kappa + 1, &col)];
            rows.extend((0..tp).map(|t| distance_at_most(x_tilde, t, kappa, &col)));
            rows
        })
        .collect()
}

/// `base_model` with each branch's rows appended; `x_i^t` is column
/// `i * T + t`.
pub fn sepb_branch_problems(base_model: &LpModel, x_tilde: &Solution, kappa: usize) -> Vec<LpModel> {
    let periods = x_tilde.periods();
    sepb_branch_rows(x_tilde, kappa, |i, t| i * periods + t)
        .into_iter()
        .map(|rows| {
            let mut m = base_model.clone();
            m.rows.extend(rows);
            m
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubMode {
    /// Closed-form reformulation with trust cuts.
    SubD,
    /// Branch-and-Benders-cut over the neighborhood.
    SubB,
}

impl SubMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SubMode::SubD => "subd",
            SubMode::SubB => "subb",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SepMode {
    SepD,
    SepB,
}

impl SepMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SepMode::SepD => "sepd",
            SepMode::SepB => "sepb",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SepBTrigger {
    /// Local branching at every integer candidate.
    All,
    /// Only at candidates better than the incumbent.
    Improving,
}

impl SepBTrigger {
    pub fn as_str(self) -> &'static str {
        match self {
            SepBTrigger::All => "all",
            SepBTrigger::Improving => "improving",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbFeatures {
    pub sub: SubMode,
    pub sep: SepMode,
    pub kappa: usize,
    pub subproblem_time_limit: Option<f64>,
    pub sepb_trigger: SepBTrigger,
}

impl Default for LbFeatures {
    fn default() -> Self {
        Self {
            sub: SubMode::SubD,
            sep: SepMode::SepD,
            kappa: 2,
            subproblem_time_limit: Some(60.0),
            sepb_trigger: SepBTrigger::All,
        }
    }
}

impl LbFeatures {
    pub fn label(&self) -> String {
        let mut s = format!("{}+{}+k{}", self.sub.as_str(), self.sep.as_str(), self.kappa);
        if self.sep == SepMode::SepB {
            s.push('+');
            s.push_str(self.sepb_trigger.as_str());
        }
        s
    }
}

/// An explored center: solutions with `Dist_t < threshold` in every period
/// have been searched.
#[derive(Debug, Clone, PartialEq)]
pub struct Center {
    pub solution: Solution,
    pub threshold: usize,
    pub separation: SepMode,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LbState {
    pub centers: Vec<Center>,
    pub restricted_subproblems: usize,
    pub diversified_subproblems: usize,
    pub branches: usize,
    pub incumbent: Option<(Solution, f64)>,
    pub bound: f64,
}

impl LbState {
    fn offer(&mut self, x: &Solution, value: f64) -> bool {
        if self.incumbent.as_ref().is_none_or(|(_, v)| value > *v) {
            self.incumbent = Some((x.clone(), value));
            true
        } else {
            false
        }
    }
}

/// Constraints a neighborhood subproblem inherits from the main problem.
#[derive(Debug, Clone, Copy, Default)]
pub struct SubContext<'a> {
    pub inherited_cuts: &'a [Cut],
    pub blocks: &'a [SepDBlock],
    /// Rows over `x_i^t` at column `i * T + t`.
    pub extra_rows: &'a [Row],
}

/// Trust-cut counts of a restricted reformulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrustCutCounts {
    pub center: usize,
    pub add: usize,
    pub remove: usize,
    pub remove_pair: usize,
}

#[derive(Debug, Clone)]
pub struct RestrictedModel {
    pub model: LpModel,
    pub layout: MasterLayout,
    pub trust_cuts: TrustCutCounts,
}

/// Multi-cut main problem over a neighborhood: x, θ^t, then the δ columns
/// of each block in order.
fn neighborhood_base(
    inst: &Instance,
    center: &Solution,
    kappa: usize,
    ctx: &SubContext<'_>,
) -> (LpModel, MasterLayout) {
    let (mut model, layout) = build_master(inst, inst, None, true);
    let col = |i: usize, t: usize| layout.x_col(i, t);
    for block in ctx.blocks {
        let deltas: Vec<usize> = (0..block.delta_count())
            .map(|_| model.add_var(Variable::binary(0.0)))
            .collect();
        for r in block.rows(col, &deltas) {
            model.add_row(r);
        }
    }
    for r in ctx.extra_rows {
        model.add_row(r.clone());
    }
    for cut in ctx.inherited_cuts {
        model.add_row(layout.cut_row(cut));
    }
    for t in 0..inst.periods() {
        model.add_row(distance_at_most(center, t, kappa, &col));
    }
    (model, layout)
}

/// Column values for `x` in a neighborhood model.
fn neighborhood_values(inst: &Instance, layout: &MasterLayout, ctx: &SubContext<'_>, x: &Solution) -> Vec<f64> {
    let mut v = layout.values_for(inst, x, 0);
    for b in ctx.blocks {
        v.extend(b.delta_values(x));
    }
    v
}

fn adding_breaks_precedence(inst: &Instance, x: &Solution, i: usize, t: usize) -> bool {
    inst.domain().constraints.iter().any(|c| match c {
        DomainConstraint::Precedence { before, after } => *after == (i, t) && !x.get(before.0, before.1),
        _ => false,
    })
}

/// The restricted subproblem at `kappa = 2` as a single model whose trust
/// cuts evaluate every neighbor exactly: B1 cuts at `x̃`, at each `x̃ + e^i`
/// and `x̃ - e^i`, and at each `x̃ - e^a - e^b`.
pub fn build_restricted_reformulation(
    inst: &Instance,
    x_tilde: &Solution,
    singles: &BTreeSet<usize>,
    ctx: &SubContext<'_>,
) -> Result<RestrictedModel, LbError> {
    inst.check_dims(x_tilde.facilities(), x_tilde.periods())?;
    let (mut model, layout) = neighborhood_base(inst, x_tilde, 2, ctx);
    let mut counts = TrustCutCounts::default();
    for cut in multi_cuts(inst, &x_tilde.to_point(), GammaVariant::B1, singles, None)? {
        model.add_row(layout.cut_row(&cut));
        counts.center += 1;
    }
    for t in 0..inst.periods() {
        let mut users_of = vec![Vec::new(); inst.facility_count()];
        let mut base = vec![0u32; inst.user_count()];
        for (j, u) in inst.users().iter().enumerate() {
            for &i in &u.covering[t] {
                users_of[i].push(j);
                base[j] += u32::from(x_tilde.get(i, t));
            }
        }
        let mut cut_at = |moves: &[(usize, bool)]| {
            let mut c = base.clone();
            let mut y = x_tilde.clone();
            for &(i, open) in moves {
                y.set(i, t, open);
                for &j in &users_of[i] {
                    if open {
                        c[j] += 1;
                    } else {
                        c[j] -= 1;
                    }
                }
            }
            model.add_row(layout.cut_row(&b1_period_cut(inst, &c, t, singles, &y)));
        };
        let (open, closed): (Vec<usize>, Vec<usize>) =
            (0..inst.facility_count()).partition(|&i| x_tilde.get(i, t));
        for &i in &closed {
            if adding_breaks_precedence(inst, x_tilde, i, t) {
                continue;
            }
            cut_at(&[(i, true)]);
            counts.add += 1;
        }
        for (k, &i) in open.iter().enumerate() {
            cut_at(&[(i, false)]);
            counts.remove += 1;
            for &b in &open[k + 1..] {
                cut_at(&[(i, false), (b, false)]);
                counts.remove_pair += 1;
            }
        }
    }
    Ok(RestrictedModel {
        model,
        layout,
        trust_cuts: counts,
    })
}

/// Result of a neighborhood solve. `value` is the exact coverage of
/// `solution`; `solved` is false when the time limit stopped the search.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemOutcome {
    pub solution: Option<Solution>,
    pub value: f64,
    pub solved: bool,
}

fn outcome(inst: &Instance, status: MilpStatus, values: Option<&Vec<f64>>) -> SubproblemOutcome {
    let solution = values.map(|v| solution_from_values(inst, v));
    let value = solution
        .as_ref()
        .map_or(f64::NEG_INFINITY, |x| coverage(inst, x).expect("sized to the instance"));
    SubproblemOutcome {
        solution,
        value,
        solved: matches!(status, MilpStatus::Optimal | MilpStatus::Infeasible),
    }
}

fn sub_options(time_limit: Option<f64>) -> MilpOptions {
    MilpOptions {
        time_limit_seconds: time_limit,
        fractional_cuts: FractionalCuts::Off,
        ..MilpOptions::default()
    }
}

/// Branch-and-Benders-cut over `model` with B1 multi-cuts at integer points.
fn solve_by_benders(
    inst: &Instance,
    model: &LpModel,
    layout: &MasterLayout,
    start: Option<(Vec<f64>, f64)>,
    time_limit: Option<f64>,
) -> Result<(MilpStatus, Option<Vec<f64>>), LbError> {
    let mut gen = CutGenerator::new(inst, layout.clone(), GammaVariant::B1, None);
    let mut handler = |ev: &mut CandidateEvent<'_>| {
        if ev.kind != CandidateKind::Integer {
            return;
        }
        let x = gen.layout.x_point(ev.values);
        let (cuts, stale) = gen.violated_cuts(ev.values, &x);
        for c in &cuts {
            ev.add_lazy(gen.layout.cut_row(c)).expect("layout columns");
        }
        if stale && cuts.is_empty() {
            ev.reject();
        }
    };
    let r = solve_milp_with_start(model, &mut handler, &sub_options(time_limit), start)?;
    Ok((r.status, r.values))
}

pub(crate) fn restricted_with(
    inst: &Instance,
    x_tilde: &Solution,
    kappa: usize,
    mode: SubMode,
    time_limit: Option<f64>,
    ctx: &SubContext<'_>,
) -> Result<SubproblemOutcome, LbError> {
    inst.check_dims(x_tilde.facilities(), x_tilde.periods())?;
    let start_value = coverage(inst, x_tilde)?;
    let (status, values) = match mode {
        SubMode::SubD => {
            if kappa != 2 {
                return Err(LbError::InvalidArgument(format!(
                    "the reformulated subproblem needs kappa = 2, got {kappa}"
                )));
            }
            let rm = build_restricted_reformulation(inst, x_tilde, &singles_set(inst), ctx)?;
            let start = neighborhood_values(inst, &rm.layout, ctx, x_tilde);
            let r = solve_milp_with_start(
                &rm.model,
                &mut NoCallback,
                &sub_options(time_limit),
                Some((start, start_value)),
            )?;
            if let (Some(o), Some(v)) = (r.objective, &r.values) {
                let exact = coverage(inst, &solution_from_values(inst, v))?;
                if (o - exact).abs() > 1e-6 * (1.0 + exact) {
                    log::warn!("restricted model value {o} differs from coverage {exact}");
                }
            }
            (r.status, r.values)
        }
        SubMode::SubB => {
            let (model, layout) = neighborhood_base(inst, x_tilde, kappa, ctx);
            let start = neighborhood_values(inst, &layout, ctx, x_tilde);
            solve_by_benders(inst, &model, &layout, Some((start, start_value)), time_limit)?
        }
    };
    Ok(outcome(inst, status, values.as_ref()))
}

/// Best solution within per-period distance `kappa` of `x_tilde`.
pub fn solve_restricted(
    inst: &Instance,
    x_tilde: &Solution,
    kappa: usize,
    mode: SubMode,
    time_limit: Option<f64>,
) -> Result<SubproblemOutcome, LbError> {
    restricted_with(inst, x_tilde, kappa, mode, time_limit, &SubContext::default())
}

pub(crate) fn diversified_with(
    inst: &Instance,
    x_tilde: &Solution,
    kappa_prime: usize,
    time_limit: Option<f64>,
    ctx: &SubContext<'_>,
) -> Result<SubproblemOutcome, LbError> {
    inst.check_dims(x_tilde.facilities(), x_tilde.periods())?;
    let (mut model, layout) = neighborhood_base(inst, x_tilde, kappa_prime, ctx);
    model.add_row(differs_somewhere(x_tilde, &|i, t| layout.x_col(i, t)));
    let (status, values) = solve_by_benders(inst, &model, &layout, None, time_limit)?;
    Ok(outcome(inst, status, values.as_ref()))
}

/// Best solution other than `x_tilde` within per-period distance
/// `kappa_prime`, solved by branch-and-Benders-cut.
pub fn solve_diversified(
    inst: &Instance,
    x_tilde: &Solution,
    kappa_prime: usize,
    time_limit: Option<f64>,
) -> Result<SubproblemOutcome, LbError> {
    diversified_with(inst, x_tilde, kappa_prime, time_limit, &SubContext::default())
}

/// Solves the root relaxation by adding violated cuts until none remain.
fn root_cut_loop(model: &mut LpModel, gen: &mut CutGenerator<'_>, deadline: Option<Instant>) {
    for _ in 0..ROOT_ROUNDS {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return;
        }
        let lp = solve_lp(model);
        if lp.status != LpStatus::Optimal {
            return;
        }
        let x = gen.layout.x_point(&lp.x);
        let (cuts, _) = gen.violated_cuts(&lp.x, &x);
        if cuts.is_empty() {
            return;
        }
        for c in &cuts {
            model.add_row(gen.layout.cut_row(c));
        }
    }
}

struct LbHandler<'a> {
    work: &'a Instance,
    gen: CutGenerator<'a>,
    features: LbFeatures,
    state: LbState,
    /// SepD blocks in the main problem with their δ columns.
    blocks: Vec<(SepDBlock, Vec<usize>)>,
    explored: HashSet<Solution>,
    values_cache: HashMap<Solution, f64>,
    deadline: Option<Instant>,
}

impl LbHandler<'_> {
    fn value(&mut self, x: &Solution) -> f64 {
        if let Some(&v) = self.values_cache.get(x) {
            return v;
        }
        let v = coverage(self.work, x).expect("sized to the instance");
        self.values_cache.insert(x.clone(), v);
        v
    }

    fn sub_limit(&self) -> Option<Option<f64>> {
        let remaining = self
            .deadline
            .map(|d| d.saturating_duration_since(Instant::now()).as_secs_f64());
        if remaining.is_some_and(|r| r <= 0.0) {
            return None;
        }
        Some(match (remaining, self.features.subproblem_time_limit) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        })
    }

    /// Restricted solves from `start`, recentering on strict improvement,
    /// then one diversified solve. Returns the centers whose neighborhoods
    /// were searched to optimality.
    fn chain(&mut self, start: &Solution, extra_rows: &[Row]) -> Result<Vec<Center>, LbError> {
        let kappa = self.features.kappa;
        let mut recorded = Vec::new();
        let mut center = start.clone();
        let mut center_value = self.value(&center);
        let mut diversified = false;
        loop {
            let Some(limit) = self.sub_limit() else { break };
            let blocks: Vec<SepDBlock> = self.blocks.iter().map(|(b, _)| b.clone()).collect();
            let ctx = SubContext {
                inherited_cuts: self.gen.pool.cuts(),
                blocks: &blocks,
                extra_rows,
            };
            let r = restricted_with(self.work, &center, kappa, self.features.sub, limit, &ctx)?;
            self.state.restricted_subproblems += 1;
            if r.solved {
                recorded.push(Center {
                    solution: center.clone(),
                    threshold: kappa + 1,
                    separation: self.features.sep,
                });
            }
            if let Some(x) = &r.solution {
                if r.value > center_value + 1e-9 {
                    self.state.offer(x, r.value);
                    center = x.clone();
                    center_value = r.value;
                    continue;
                }
            }
            if diversified {
                break;
            }
            diversified = true;
            let Some(limit) = self.sub_limit() else { break };
            let ctx = SubContext {
                inherited_cuts: self.gen.pool.cuts(),
                blocks: &blocks,
                extra_rows,
            };
            let d = diversified_with(self.work, &center, kappa + 1, limit, &ctx)?;
            self.state.diversified_subproblems += 1;
            if d.solved {
                recorded.push(Center {
                    solution: center.clone(),
                    threshold: kappa + 2,
                    separation: self.features.sep,
                });
            }
            match &d.solution {
                Some(x) if d.value > center_value + 1e-9 => {
                    self.state.offer(x, d.value);
                    center = x.clone();
                    center_value = d.value;
                }
                _ => break,
            }
        }
        Ok(recorded)
    }

    fn main_values(&self, x: &Solution) -> Vec<f64> {
        let mut v = self.gen.layout.values_for(self.work, x, 0);
        for (b, cols) in &self.blocks {
            let dv = b.delta_values(x);
            for (&c, d) in cols.iter().zip(dv) {
                if v.len() <= c {
                    v.resize(c + 1, 0.0);
                }
                v[c] = d;
            }
        }
        v
    }
}

impl CandidateHandler for LbHandler<'_> {
    fn on_candidate(&mut self, ev: &mut CandidateEvent<'_>) {
        if ev.kind != CandidateKind::Integer {
            return;
        }
        let xf = self.gen.layout.x_point(ev.values);
        let x = Solution::from_point(&xf, 1e-6).expect("integer candidate");
        let (cuts, stale) = self.gen.violated_cuts(ev.values, &xf);
        for c in &cuts {
            ev.add_lazy(self.gen.layout.cut_row(c)).expect("layout columns");
        }
        self.gen.absorb_candidate(&x);
        let value = self.value(&x);
        self.state.offer(&x, value);
        let improving = ev.incumbent.is_none_or(|inc| value > inc + 1e-9);
        let run = match self.features.sep {
            SepMode::SepD => true,
            SepMode::SepB => self.features.sepb_trigger == SepBTrigger::All || improving,
        };
        let mut separated = false;
        if run && self.explored.insert(x.clone()) {
            let local: Vec<Row> = match self.features.sep {
                SepMode::SepB => ev.local_rows().to_vec(),
                SepMode::SepD => Vec::new(),
            };
            match self.chain(&x, &local) {
                Ok(centers) => {
                    if let Some((best, v)) = self.state.incumbent.clone() {
                        if best != x {
                            for c in self.gen.cuts_at(&best.to_point()) {
                                if self.gen.pool.insert(c.clone()) {
                                    ev.add_lazy(self.gen.layout.cut_row(&c)).expect("layout columns");
                                }
                            }
                        }
                        if ev.incumbent.is_none_or(|inc| v > inc + 1e-9) {
                            ev.post_incumbent(self.main_values(&best), v);
                        }
                    }
                    separated = self.separate(ev, &x, centers);
                }
                Err(e) => log::warn!("local branching skipped: {e}"),
            }
        }
        if !separated && stale && cuts.is_empty() {
            ev.reject();
        }
    }
}

impl LbHandler<'_> {
    /// Excludes searched neighborhoods; returns whether the candidate is
    /// cut off.
    fn separate(&mut self, ev: &mut CandidateEvent<'_>, x: &Solution, centers: Vec<Center>) -> bool {
        let layout = self.gen.layout.clone();
        let col = |i: usize, t: usize| layout.x_col(i, t);
        match self.features.sep {
            SepMode::SepD => {
                let mut cut_off = false;
                for c in centers {
                    let block = sepd_block(&c.solution, c.threshold - 1);
                    let deltas: Vec<usize> = (0..block.delta_count())
                        .map(|_| ev.add_column(Variable::binary(0.0)).expect("finite bounds"))
                        .collect();
                    for r in block.rows(col, &deltas) {
                        ev.add_lazy(r).expect("new columns are registered");
                    }
                    cut_off |= !block.satisfied_by(x);
                    self.blocks.push((block, deltas));
                    self.state.centers.push(c);
                }
                cut_off
            }
            SepMode::SepB => {
                let Some(own) = centers
                    .into_iter()
                    .filter(|c| &c.solution == x)
                    .max_by_key(|c| c.threshold)
                else {
                    return false;
                };
                let children = sepb_branch_rows(x, own.threshold - 1, col);
                self.state.branches += children.len();
                ev.branch(children).expect("rows over layout columns");
                self.state.centers.push(own);
                true
            }
        }
    }
}

/// Branch-and-Benders-cut with local branching around integer candidates.
pub fn solve_lb(inst: &Instance, opts: &SolveOptions, features: &LbFeatures) -> Result<SolveResult, LbError> {
    let started = Instant::now();
    if features.kappa == 0 {
        return Err(LbError::InvalidArgument("kappa must be at least 1".into()));
    }
    if features.sub == SubMode::SubD && features.kappa != 2 {
        return Err(LbError::InvalidArgument(format!(
            "the reformulated subproblem needs kappa = 2, got {}",
            features.kappa
        )));
    }
    let deadline = opts
        .time_limit_seconds
        .map(|s| started + Duration::from_secs_f64(s.clamp(0.0, 1e9)));
    let work = reduce(inst, &BTreeSet::new())?.0;
    let (mut model, layout) = build_master(&work, &work, None, true);
    let greedy = greedy_warmstart(&work);
    let mut gen = CutGenerator::new(&work, layout.clone(), GammaVariant::ParetoB1, greedy.as_ref());
    root_cut_loop(&mut model, &mut gen, deadline);
    let start = greedy
        .as_ref()
        .map(|x| (layout.values_for(&work, x, 0), coverage(&work, x).expect("sized")));
    let mut handler = LbHandler {
        work: &work,
        gen,
        features: *features,
        state: LbState {
            bound: f64::INFINITY,
            ..LbState::default()
        },
        blocks: Vec::new(),
        explored: HashSet::new(),
        values_cache: HashMap::new(),
        deadline,
    };
    if let Some(g) = &greedy {
        let v = handler.value(g);
        handler.state.offer(g, v);
    }
    let milp_opts = MilpOptions {
        time_limit_seconds: deadline.map(|d| d.saturating_duration_since(Instant::now()).as_secs_f64()),
        node_limit: opts.node_limit,
        fractional_cuts: FractionalCuts::Off,
        ..MilpOptions::default()
    };
    let r = solve_milp_with_start(&model, &mut handler, &milp_opts, start)?;
    let mut out = SolveResult::new(inst.name(), "lb", &features.label());
    fill_result(&mut out, inst, &r);
    out.restricted_subproblems = handler.state.restricted_subproblems;
    out.diversified_subproblems = handler.state.diversified_subproblems;
    out.branches = handler.state.branches;
    out.wall_seconds = started.elapsed().as_secs_f64();
    Ok(out)
}

/// Right-hand side of the B-variant cut generated at `x` for period `t`,
/// evaluated at `x + e^î`.
pub fn trust_value(
    inst: &Instance,
    x: &Solution,
    i_hat: usize,
    t: usize,
    variant: GammaVariant,
) -> Result<f64, LbError> {
    inst.check_dims(x.facilities(), x.periods())?;
    if i_hat >= x.facilities() || t >= x.periods() {
        return Err(LbError::InvalidArgument("index out of range".into()));
    }
    let cuts = multi_cuts(inst, &x.to_point(), variant, &singles_set(inst), None)?;
    let mut y = x.clone();
    y.set(i_hat, t, true);
    Ok(evaluate_cut(&cuts[t], &y.to_point()))
}
