use std::collections::{BTreeSet, HashSet};
use std::time::Instant;

use super::{
    evaluate_cut, multi_cuts, partial_plan, single_cut, BendersError, CorePoint, Cut,
    GammaVariant, PartialBendersPlan, ThetaIndex,
};
use crate::bdd;
use crate::formulation::{domain_rows, solution_from_values};
use crate::greedy::greedy_warmstart;
use crate::milp::{
    solve_milp_with_start, CandidateEvent, CandidateHandler, CandidateKind, FractionalCuts,
    LpModel, MilpOptions, MilpResult, Row, Variable,
};
use crate::model::{coverage, coverage_by_period, FracSolution, Instance, Solution};
use crate::preprocess::{reduce, singles_set};
use crate::stats::{SolveOptions, SolveResult, SolveStatus};

const CUT_TOL: f64 = 1e-6;

/// Column layout of a Benders main problem: `x_i^t` at `i * T + t`, then one
/// θ (single cut) or `T` θ's (multi-cut).
#[derive(Debug, Clone, PartialEq)]
pub struct MasterLayout {
    pub facilities: usize,
    pub periods: usize,
    pub multicut: bool,
}

impl MasterLayout {
    pub fn new(inst: &Instance, multicut: bool) -> Self {
        Self {
            facilities: inst.facility_count(),
            periods: inst.periods(),
            multicut,
        }
    }

    pub fn x_col(&self, i: usize, t: usize) -> usize {
        i * self.periods + t
    }

    pub fn x_count(&self) -> usize {
        self.facilities * self.periods
    }

    pub fn theta_cols(&self) -> Vec<usize> {
        let n = if self.multicut { self.periods } else { 1 };
        (0..n).map(|k| self.x_count() + k).collect()
    }

    /// First column after the θ block.
    pub fn end(&self) -> usize {
        self.x_count() + if self.multicut { self.periods } else { 1 }
    }

    fn theta_terms(&self, theta: ThetaIndex) -> Vec<(usize, f64)> {
        match theta {
            ThetaIndex::Aggregate => self.theta_cols().into_iter().map(|c| (c, 1.0)).collect(),
            ThetaIndex::Period(t) => {
                assert!(self.multicut, "period cut in a single-cut layout");
                vec![(self.x_count() + t, 1.0)]
            }
        }
    }

    /// `θ - Σ coef x <= constant`.
    pub fn cut_row(&self, cut: &Cut) -> Row {
        let mut coefs = self.theta_terms(cut.theta);
        coefs.extend(
            cut.coefs
                .iter()
                .filter(|(_, &c)| c != 0.0)
                .map(|(&(i, t), &c)| (self.x_col(i, t), -c)),
        );
        Row::le(coefs, cut.constant)
    }

    pub fn theta_value(&self, values: &[f64], theta: ThetaIndex) -> f64 {
        self.theta_terms(theta).iter().map(|&(c, _)| values[c]).sum()
    }

    /// The location block, clamped into `[0, 1]`.
    pub fn x_point(&self, values: &[f64]) -> FracSolution {
        FracSolution::new(
            self.facilities,
            self.periods,
            values[..self.x_count()].iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        )
        .expect("sized to the layout")
    }

    /// Column values for an integer `x` with θ set to the subproblem
    /// coverage, followed by `extra` zeros.
    pub fn values_for(&self, sub: &Instance, x: &Solution, extra: usize) -> Vec<f64> {
        let mut v: Vec<f64> = x.as_flat().iter().map(|&b| b as u8 as f64).collect();
        let per = coverage_by_period(sub, x).expect("sized to the instance");
        if self.multicut {
            v.extend(per);
        } else {
            v.push(per.iter().sum());
        }
        v.extend(std::iter::repeat_n(0.0, extra));
        v
    }
}

/// Builds the main problem. `sub` holds the users left to the subproblem;
/// `plan` supplies folded objective coefficients when partial Benders is on.
pub fn build_master(
    inst: &Instance,
    sub: &Instance,
    plan: Option<&PartialBendersPlan>,
    multicut: bool,
) -> (LpModel, MasterLayout) {
    let layout = MasterLayout::new(inst, multicut);
    let mut model = LpModel::new();
    for i in 0..inst.facility_count() {
        for t in 0..inst.periods() {
            let c = plan.map_or(0.0, |p| p.folded_coef(i, t, inst.periods()));
            model.add_var(Variable::binary(c));
        }
    }
    if multicut {
        for t in 0..inst.periods() {
            model.add_var(Variable::continuous(0.0, sub.period_demand(t), 1.0));
        }
    } else {
        model.add_var(Variable::continuous(0.0, sub.total_demand(), 1.0));
    }
    for r in domain_rows(inst, |i, t| layout.x_col(i, t)) {
        model.add_row(r);
    }
    (model, layout)
}

/// Deduplicating store of generated cuts.
#[derive(Debug, Clone, Default)]
pub struct CutPool {
    keys: HashSet<Vec<i64>>,
    cuts: Vec<Cut>,
}

fn grid(v: f64) -> i64 {
    (v * 1e9).round() as i64
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores the cut unless an identical one is present; returns whether it
    /// was new.
    pub fn insert(&mut self, cut: Cut) -> bool {
        let mut key = vec![match cut.theta {
            ThetaIndex::Aggregate => -1,
            ThetaIndex::Period(t) => t as i64,
        }];
        key.push(grid(cut.constant));
        for (&(i, t), &c) in &cut.coefs {
            if grid(c) != 0 {
                key.extend([i as i64, t as i64, grid(c)]);
            }
        }
        if self.keys.insert(key) {
            self.cuts.push(cut);
            true
        } else {
            false
        }
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }
}

/// Which accelerations an A-B&BC run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AbbcFeatures {
    pub multicut: bool,
    pub pareto: bool,
    pub partial: bool,
    pub warmstart: bool,
    pub root_only_fractional: bool,
}

impl AbbcFeatures {
    pub fn all() -> Self {
        Self {
            multicut: true,
            pareto: true,
            partial: true,
            warmstart: true,
            root_only_fractional: true,
        }
    }

    pub fn none() -> Self {
        Self {
            multicut: false,
            pareto: false,
            partial: false,
            warmstart: false,
            root_only_fractional: false,
        }
    }
}

impl Default for AbbcFeatures {
    fn default() -> Self {
        Self::all()
    }
}

/// Full configuration of a branch-and-Benders-cut run.
#[derive(Debug, Clone, PartialEq)]
pub struct BendersConfig {
    pub variant: GammaVariant,
    pub multicut: bool,
    pub partial: bool,
    pub warmstart: bool,
    pub preprocess: bool,
    pub fractional: FractionalCuts,
    /// Lagrangian cuts at fractional candidates, with this many
    /// subgradient iterations.
    pub bdd_iterations: Option<usize>,
}

impl BendersConfig {
    pub fn ubbc() -> Self {
        Self {
            variant: GammaVariant::B1,
            multicut: false,
            partial: false,
            warmstart: false,
            preprocess: false,
            fractional: FractionalCuts::AllNodes,
            bdd_iterations: None,
        }
    }

    pub fn abbc(f: &AbbcFeatures) -> Self {
        Self {
            variant: if f.pareto {
                GammaVariant::ParetoB1
            } else {
                GammaVariant::B1
            },
            multicut: f.multicut,
            partial: f.partial,
            warmstart: f.warmstart,
            preprocess: true,
            fractional: if f.root_only_fractional {
                FractionalCuts::RootOnly
            } else {
                FractionalCuts::AllNodes
            },
            bdd_iterations: None,
        }
    }

    /// Short feature label for reports.
    pub fn label(&self) -> String {
        let mut parts = vec![self.variant.as_str().to_string()];
        if self.multicut {
            parts.push("multicut".into());
        }
        if self.partial {
            parts.push("partial".into());
        }
        if self.warmstart {
            parts.push("warmstart".into());
        }
        parts.push(
            match self.fractional {
                FractionalCuts::Off => "nofrac",
                FractionalCuts::RootOnly => "rootfrac",
                FractionalCuts::AllNodes => "allfrac",
            }
            .into(),
        );
        if self.bdd_iterations.is_some() {
            parts.push("bdd".into());
        }
        parts.join("+")
    }
}

/// Cut generation shared by the Benders and local-branching drivers.
pub(crate) struct CutGenerator<'a> {
    pub sub: &'a Instance,
    pub singles: BTreeSet<usize>,
    pub layout: MasterLayout,
    pub variant: GammaVariant,
    pub core: Option<CorePoint>,
    pub pool: CutPool,
}

impl<'a> CutGenerator<'a> {
    pub fn new(
        sub: &'a Instance,
        layout: MasterLayout,
        variant: GammaVariant,
        core_start: Option<&Solution>,
    ) -> Self {
        let core = match variant {
            GammaVariant::ParetoB1 => Some(CorePoint::new(
                &core_start
                    .cloned()
                    .unwrap_or_else(|| Solution::zeros(layout.facilities, layout.periods)),
            )),
            _ => None,
        };
        Self {
            sub,
            singles: singles_set(sub),
            layout,
            variant,
            core,
            pool: CutPool::new(),
        }
    }

    /// Pareto cuts start once the core point has absorbed one candidate.
    fn effective(&self) -> (GammaVariant, Option<&CorePoint>) {
        match (&self.core, self.variant) {
            (Some(c), GammaVariant::ParetoB1) if c.updates() > 0 => {
                (GammaVariant::ParetoB1, Some(c))
            }
            (_, GammaVariant::ParetoB1) => (GammaVariant::B1, None),
            (_, v) => (v, None),
        }
    }

    pub fn cuts_at(&self, x: &FracSolution) -> Vec<Cut> {
        let (variant, core) = self.effective();
        if self.layout.multicut {
            multi_cuts(self.sub, x, variant, &self.singles, core).expect("point in the unit box")
        } else {
            vec![single_cut(self.sub, x, variant, &self.singles, core).expect("point in the unit box")]
        }
    }

    pub fn absorb_candidate(&mut self, x: &Solution) {
        if let Some(c) = &mut self.core {
            c.update(x);
        }
    }

    /// Cuts at `x` violated by `values`, recorded in the pool. The flag
    /// reports a violated cut that was already pooled.
    pub fn violated_cuts(&mut self, values: &[f64], x: &FracSolution) -> (Vec<Cut>, bool) {
        let mut out = Vec::new();
        let mut stale = false;
        for cut in self.cuts_at(x) {
            let viol = self.layout.theta_value(values, cut.theta) - evaluate_cut(&cut, x);
            if viol > CUT_TOL {
                if self.pool.insert(cut.clone()) {
                    out.push(cut);
                } else {
                    stale = true;
                }
            }
        }
        (out, stale)
    }
}

struct BendersHandler<'a> {
    gen: CutGenerator<'a>,
    bdd_iterations: Option<usize>,
}

impl CandidateHandler for BendersHandler<'_> {
    fn on_candidate(&mut self, ev: &mut CandidateEvent<'_>) {
        let x = self.gen.layout.x_point(ev.values);
        let (cuts, stale) = self.gen.violated_cuts(ev.values, &x);
        let added = !cuts.is_empty();
        for cut in &cuts {
            let row = self.gen.layout.cut_row(cut);
            let res = match ev.kind {
                CandidateKind::Integer => ev.add_lazy(row),
                CandidateKind::Fractional => ev.add_user_cut(row),
            };
            res.expect("cut rows reference layout columns");
        }
        match ev.kind {
            CandidateKind::Integer => {
                let xi = Solution::from_point(&x, 1e-6).expect("integer candidate");
                self.gen.absorb_candidate(&xi);
                if stale && !added {
                    log::warn!("violated cut already pooled; candidate rejected");
                    ev.reject();
                }
            }
            CandidateKind::Fractional => {
                if let Some(iters) = self.bdd_iterations {
                    if let Ok(out) = bdd::lsp2(self.gen.sub, &x, iters) {
                        let viol = self.gen.layout.theta_value(ev.values, out.cut.theta)
                            - evaluate_cut(&out.cut, &x);
                        if viol > CUT_TOL && self.gen.pool.insert(out.cut.clone()) {
                            ev.add_user_cut(self.gen.layout.cut_row(&out.cut))
                                .expect("cut rows reference layout columns");
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn milp_options(opts: &SolveOptions, fractional: FractionalCuts) -> MilpOptions {
    MilpOptions {
        time_limit_seconds: opts.time_limit_seconds,
        node_limit: opts.node_limit,
        fractional_cuts: fractional,
        ..MilpOptions::default()
    }
}

/// Copies solver statistics into a result; the objective is the exact
/// coverage of the incumbent on `original`.
pub(crate) fn fill_result(out: &mut SolveResult, original: &Instance, r: &MilpResult) {
    out.status = SolveStatus::from(r.status);
    if let Some(values) = &r.values {
        let x = solution_from_values(original, values);
        let exact = coverage(original, &x).expect("sized to the instance");
        if let Some(o) = r.objective {
            if (o - exact).abs() > 1e-6 * (1.0 + exact.abs()) {
                log::warn!("incumbent objective {o} differs from its coverage {exact}");
            }
        }
        out.objective = Some(exact);
        out.solution = Some(x);
    }
    out.bound = r.bound;
    if let (Some(o), SolveStatus::Optimal) = (out.objective, out.status) {
        out.bound = o;
    }
    out.nodes += r.nodes;
    out.lazy_cuts += r.lazy_cuts;
    out.user_cuts += r.user_cuts;
    out.refresh_gap();
}

pub fn solve_benders(
    inst: &Instance,
    opts: &SolveOptions,
    cfg: &BendersConfig,
    method: &str,
) -> Result<SolveResult, BendersError> {
    let started = Instant::now();
    let work = if cfg.preprocess {
        reduce(inst, &BTreeSet::new())?.0
    } else {
        inst.clone()
    };
    let plan = cfg.partial.then(|| partial_plan(&work, &singles_set(&work)));
    let sub = match &plan {
        Some(p) => p.subproblem_instance(&work),
        None => work.clone(),
    };
    let (model, layout) = build_master(&work, &sub, plan.as_ref(), cfg.multicut);
    let greedy = greedy_warmstart(&work);
    let start = if cfg.warmstart {
        greedy
            .as_ref()
            .map(|x| (layout.values_for(&sub, x, 0), coverage(&work, x).expect("sized")))
    } else {
        None
    };
    let mut handler = BendersHandler {
        gen: CutGenerator::new(&sub, layout, cfg.variant, greedy.as_ref()),
        bdd_iterations: cfg.bdd_iterations,
    };
    let r = solve_milp_with_start(&model, &mut handler, &milp_options(opts, cfg.fractional), start)?;
    let mut out = SolveResult::new(inst.name(), method, &cfg.label());
    fill_result(&mut out, inst, &r);
    out.wall_seconds = started.elapsed().as_secs_f64();
    Ok(out)
}

/// Single-cut B1 branch-and-Benders-cut with cuts at every integer and
/// fractional candidate.
pub fn solve_ubbc(inst: &Instance, opts: &SolveOptions) -> Result<SolveResult, BendersError> {
    solve_benders(inst, opts, &BendersConfig::ubbc(), "ubbc")
}

/// Accelerated branch-and-Benders-cut.
pub fn solve_abbc(
    inst: &Instance,
    opts: &SolveOptions,
    features: &AbbcFeatures,
) -> Result<SolveResult, BendersError> {
    solve_benders(inst, opts, &BendersConfig::abbc(features), "abbc")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fig1, DomainConstraint, DomainSpec, Sense, Term};

    #[test]
    fn fig1_drivers() {
        let opts = SolveOptions::default();
        let r = solve_ubbc(&fig1(), &opts).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.objective, Some(30.0));
        let r = solve_abbc(&fig1(), &opts, &AbbcFeatures::all()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.objective, Some(30.0));
        assert_eq!(r.gap, 0.0);
    }

    #[test]
    fn contradictory_domain_is_infeasible() {
        let term = Term {
            facility: 0,
            period: 0,
            coef: 1.0,
        };
        let inst = fig1()
            .with_domain(DomainSpec::new(vec![
                DomainConstraint::Linear {
                    terms: vec![term],
                    sense: Sense::Ge,
                    rhs: 1.0,
                },
                DomainConstraint::Linear {
                    terms: vec![term],
                    sense: Sense::Le,
                    rhs: 0.0,
                },
            ]))
            .unwrap();
        let r = solve_ubbc(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.solution.is_none());
    }

    #[test]
    fn pool_deduplicates() {
        let inst = fig1();
        let s = singles_set(&inst);
        let x = Solution::single_period(&[1, 0, 0]).to_point();
        let c = single_cut(&inst, &x, GammaVariant::B1, &s, None).unwrap();
        let mut pool = CutPool::new();
        assert!(pool.insert(c.clone()));
        assert!(!pool.insert(c));
        assert_eq!(pool.len(), 1);
    }

    #[test]
    fn cut_row_matches_evaluation() {
        let inst = fig1();
        let layout = MasterLayout::new(&inst, false);
        let x = Solution::single_period(&[1, 0, 0]).to_point();
        let c = single_cut(&inst, &x, GammaVariant::B0, &singles_set(&inst), None).unwrap();
        let row = layout.cut_row(&c);
        // θ = 20 at x = (1,0,0) sits exactly on the cut
        let values = [1.0, 0.0, 0.0, 20.0];
        assert!(row.violation(&values) < 1e-12);
        let values = [1.0, 0.0, 0.0, 20.5];
        assert!(row.violation(&values) > 0.4);
    }
}
