use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use super::lp::{solve_bounded, LpStatus};
use super::{LpModel, MilpError, Row, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateKind {
    Integer,
    Fractional,
}

/// Where fractional LP solutions are offered to the handler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FractionalCuts {
    Off,
    RootOnly,
    AllNodes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NodeSelection {
    /// Highest LP bound first, FIFO among equal bounds.
    #[default]
    BestBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branching {
    /// Most fractional integer variable, lowest index on ties.
    #[default]
    MostFractional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpOptions {
    pub time_limit_seconds: Option<f64>,
    pub node_limit: Option<usize>,
    pub integrality_tolerance: f64,
    pub cut_violation_tolerance: f64,
    pub node_selection: NodeSelection,
    pub branching: Branching,
    pub fractional_cuts: FractionalCuts,
    /// Cap on consecutive fractional cut rounds at one node.
    pub max_cut_rounds: usize,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            time_limit_seconds: None,
            node_limit: None,
            integrality_tolerance: 1e-6,
            cut_violation_tolerance: 1e-6,
            node_selection: NodeSelection::BestBound,
            branching: Branching::MostFractional,
            fractional_cuts: FractionalCuts::Off,
            max_cut_rounds: 50,
        }
    }
}

impl MilpOptions {
    fn validate(&self) -> Result<(), MilpError> {
        if !(self.integrality_tolerance > 0.0 && self.cut_violation_tolerance > 0.0) {
            return Err(MilpError::InvalidArgument("tolerances must be positive".into()));
        }
        if let Some(t) = self.time_limit_seconds {
            if !(t >= 0.0) {
                return Err(MilpError::InvalidArgument("time limit must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    /// Search finished but some node could not be resolved numerically; the
    /// bound accounts for it.
    Feasible,
    Infeasible,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpResult {
    pub status: MilpStatus,
    pub values: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub lazy_cuts: usize,
    pub user_cuts: usize,
    pub wall_seconds: f64,
    /// Column count at the end of the solve (columns may be added).
    pub columns: usize,
}

/// A candidate LP solution offered to a [`CandidateHandler`], together with
/// the sink through which the handler reacts.
pub struct CandidateEvent<'a> {
    pub kind: CandidateKind,
    pub values: &'a [f64],
    pub objective: f64,
    pub depth: usize,
    pub incumbent: Option<f64>,
    columns: usize,
    local_rows: &'a [Row],
    lazy: Vec<Row>,
    user: Vec<Row>,
    local: Vec<Row>,
    new_columns: Vec<Variable>,
    branches: Option<Vec<Vec<Row>>>,
    posted: Vec<(Vec<f64>, f64)>,
    rejected: bool,
}

impl<'a> CandidateEvent<'a> {
    fn new(
        kind: CandidateKind,
        values: &'a [f64],
        objective: f64,
        depth: usize,
        incumbent: Option<f64>,
        local_rows: &'a [Row],
    ) -> Self {
        Self {
            kind,
            values,
            objective,
            depth,
            incumbent,
            columns: values.len(),
            local_rows,
            lazy: Vec::new(),
            user: Vec::new(),
            local: Vec::new(),
            new_columns: Vec::new(),
            branches: None,
            posted: Vec::new(),
            rejected: false,
        }
    }

    /// Rows local to the current node (inherited branch rows).
    pub fn local_rows(&self) -> &[Row] {
        self.local_rows
    }

    /// Number of columns including any added during this event.
    pub fn columns(&self) -> usize {
        self.columns
    }

    /// Adds a globally valid row that cuts off infeasible integer points.
    pub fn add_lazy(&mut self, row: Row) -> Result<(), MilpError> {
        row.validate(self.columns)?;
        self.lazy.push(row);
        Ok(())
    }

    /// Adds a globally valid row that only tightens the relaxation.
    pub fn add_user_cut(&mut self, row: Row) -> Result<(), MilpError> {
        row.validate(self.columns)?;
        self.user.push(row);
        Ok(())
    }

    /// Adds a row valid only in the subtree of the current node.
    pub fn add_local_row(&mut self, row: Row) -> Result<(), MilpError> {
        row.validate(self.columns)?;
        self.local.push(row);
        Ok(())
    }

    /// Appends a column with zero coefficients in all existing rows and
    /// returns its index.
    pub fn add_column(&mut self, var: Variable) -> Result<usize, MilpError> {
        if !(var.lower.is_finite() && var.upper.is_finite() && var.lower <= var.upper) {
            return Err(MilpError::InvalidArgument("column bounds must be finite".into()));
        }
        self.new_columns.push(var);
        self.columns += 1;
        Ok(self.columns - 1)
    }

    /// Replaces the current node by one child per entry, each inheriting the
    /// node's rows plus the given local rows. The candidate is not accepted.
    pub fn branch(&mut self, children: Vec<Vec<Row>>) -> Result<(), MilpError> {
        for c in &children {
            for r in c {
                r.validate(self.columns)?;
            }
        }
        self.branches = Some(children);
        Ok(())
    }

    /// Offers a heuristic solution with its objective value. The caller
    /// guarantees it is feasible for the intended problem.
    pub fn post_incumbent(&mut self, values: Vec<f64>, objective: f64) {
        self.posted.push((values, objective));
    }

    /// Refuses an integer candidate without adding a row.
    pub fn reject(&mut self) {
        self.rejected = true;
    }

    fn into_reaction(self) -> Reaction {
        Reaction {
            lazy: self.lazy,
            user: self.user,
            local: self.local,
            new_columns: self.new_columns,
            branches: self.branches,
            posted: self.posted,
            rejected: self.rejected,
        }
    }
}

struct Reaction {
    lazy: Vec<Row>,
    user: Vec<Row>,
    local: Vec<Row>,
    new_columns: Vec<Variable>,
    branches: Option<Vec<Vec<Row>>>,
    posted: Vec<(Vec<f64>, f64)>,
    rejected: bool,
}

pub trait CandidateHandler {
    fn on_candidate(&mut self, event: &mut CandidateEvent<'_>);
}

impl<F: FnMut(&mut CandidateEvent<'_>)> CandidateHandler for F {
    fn on_candidate(&mut self, event: &mut CandidateEvent<'_>) {
        self(event)
    }
}

/// A handler that accepts every candidate.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoCallback;

impl CandidateHandler for NoCallback {
    fn on_candidate(&mut self, _: &mut CandidateEvent<'_>) {}
}

struct Node {
    bound: f64,
    seq: u64,
    depth: usize,
    bounds: Vec<(usize, f64, f64)>,
    local: Vec<Row>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn prune_tol(incumbent: f64) -> f64 {
    1e-6f64.max(1e-9 * incumbent.abs())
}

pub fn solve_milp(
    model: &LpModel,
    handler: &mut dyn CandidateHandler,
    opts: &MilpOptions,
) -> Result<MilpResult, MilpError> {
    solve_milp_with_start(model, handler, opts, None)
}

/// Like [`solve_milp`], seeded with an incumbent `(values, objective)`. A
/// start violating the model rows is ignored.
pub fn solve_milp_with_start(
    model: &LpModel,
    handler: &mut dyn CandidateHandler,
    opts: &MilpOptions,
    start: Option<(Vec<f64>, f64)>,
) -> Result<MilpResult, MilpError> {
    model.validate()?;
    opts.validate()?;
    let started = Instant::now();
    let deadline = opts
        .time_limit_seconds
        .map(|s| started + Duration::from_secs_f64(s.min(1e9)));
    let mut search = Search {
        vars: model.vars.clone(),
        rows: model.rows.clone(),
        opts,
        deadline,
        incumbent: None,
        lazy_cuts: 0,
        user_cuts: 0,
        seq: 0,
        unresolved: f64::NEG_INFINITY,
    };
    if let Some((values, obj)) = start {
        let check = LpModel {
            vars: search.vars.clone(),
            rows: search.rows.clone(),
        };
        if values.len() == check.vars.len() && check.is_feasible(&values, 1e-6) {
            search.incumbent = Some((values, obj));
        } else {
            log::debug!("warm start rejected: infeasible for the initial rows");
        }
    }

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::INFINITY,
        seq: search.next_seq(),
        depth: 0,
        bounds: Vec::new(),
        local: Vec::new(),
    });
    let mut nodes = 0usize;
    let mut limited = false;
    while let Some(node) = heap.pop() {
        if let Some(inc) = search.incumbent_value() {
            if node.bound <= inc + prune_tol(inc) {
                continue;
            }
        }
        let out_of_time = deadline.is_some_and(|d| Instant::now() >= d);
        let out_of_nodes = opts.node_limit.is_some_and(|l| nodes >= l);
        if out_of_time || out_of_nodes {
            heap.push(node);
            limited = true;
            break;
        }
        nodes += 1;
        match search.process(node, handler, &mut heap) {
            NodeOutcome::Done => {}
            NodeOutcome::Interrupted(node) => {
                heap.push(node);
                limited = true;
                break;
            }
        }
    }

    let trivial = LpModel {
        vars: search.vars.clone(),
        rows: Vec::new(),
    }
    .trivial_bound();
    let inc_value = search.incumbent_value();
    let open_bound = heap
        .iter()
        .map(|n| n.bound.min(trivial))
        .fold(search.unresolved.min(trivial), f64::max);
    let (status, bound) = if limited {
        (
            MilpStatus::TimeLimit,
            open_bound.max(inc_value.unwrap_or(f64::NEG_INFINITY)),
        )
    } else {
        match inc_value {
            None if search.unresolved > f64::NEG_INFINITY => {
                (MilpStatus::Feasible, search.unresolved.min(trivial))
            }
            None => (MilpStatus::Infeasible, f64::NEG_INFINITY),
            Some(v) if search.unresolved > v + prune_tol(v) => {
                (MilpStatus::Feasible, search.unresolved.min(trivial))
            }
            Some(v) => (MilpStatus::Optimal, v),
        }
    };
    let (values, objective) = match search.incumbent {
        Some((v, o)) => (Some(v), Some(o)),
        None => (None, None),
    };
    let gap = match objective {
        Some(o) if bound.is_finite() => ((bound - o) / bound.abs().max(1e-10)).max(0.0),
        Some(_) => 0.0,
        None => f64::INFINITY,
    };
    Ok(MilpResult {
        status,
        values,
        objective,
        bound,
        gap,
        nodes,
        lazy_cuts: search.lazy_cuts,
        user_cuts: search.user_cuts,
        wall_seconds: started.elapsed().as_secs_f64(),
        columns: search.vars.len(),
    })
}

enum NodeOutcome {
    Done,
    Interrupted(Node),
}

struct Search<'o> {
    vars: Vec<Variable>,
    rows: Vec<Row>,
    opts: &'o MilpOptions,
    deadline: Option<Instant>,
    incumbent: Option<(Vec<f64>, f64)>,
    lazy_cuts: usize,
    user_cuts: usize,
    seq: u64,
    /// Largest bound of nodes dropped after an LP failure.
    unresolved: f64,
}

impl Search<'_> {
    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn incumbent_value(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|(_, o)| *o)
    }

    fn offer_incumbent(&mut self, values: Vec<f64>, objective: f64) {
        if self.incumbent_value().is_none_or(|v| objective > v) {
            self.incumbent = Some((values, objective));
        }
    }

    fn fractional_allowed(&self, depth: usize) -> bool {
        match self.opts.fractional_cuts {
            FractionalCuts::Off => false,
            FractionalCuts::RootOnly => depth == 0,
            FractionalCuts::AllNodes => true,
        }
    }

    /// Applies an event's rows and columns. Returns whether any added row is
    /// violated by the candidate.
    fn absorb(
        &mut self,
        ev: Reaction,
        values: &[f64],
        node: &mut Node,
    ) -> (bool, bool, Option<Vec<Vec<Row>>>) {
        let tol = self.opts.cut_violation_tolerance;
        self.vars.extend(ev.new_columns.iter().copied());
        // a new column changes the relaxation, so the node is re-solved
        let mut violated = !ev.new_columns.is_empty();
        for r in ev.lazy {
            violated |= r.violation(values) > tol;
            self.lazy_cuts += 1;
            self.rows.push(r);
        }
        for r in ev.user {
            violated |= r.violation(values) > tol;
            self.user_cuts += 1;
            self.rows.push(r);
        }
        for r in ev.local {
            violated |= r.violation(values) > tol;
            node.local.push(r);
        }
        for (v, o) in ev.posted {
            let mut v = v;
            v.resize(self.vars.len(), 0.0);
            self.offer_incumbent(v, o);
        }
        (violated, ev.rejected, ev.branches)
    }

    fn process(
        &mut self,
        mut node: Node,
        handler: &mut dyn CandidateHandler,
        heap: &mut BinaryHeap<Node>,
    ) -> NodeOutcome {
        let mut rounds = 0usize;
        loop {
            let n = self.vars.len();
            let mut lower: Vec<f64> = self.vars.iter().map(|v| v.lower).collect();
            let mut upper: Vec<f64> = self.vars.iter().map(|v| v.upper).collect();
            for &(j, l, u) in &node.bounds {
                lower[j] = lower[j].max(l);
                upper[j] = upper[j].min(u);
            }
            let cost: Vec<f64> = self.vars.iter().map(|v| v.objective).collect();
            let rows: Vec<&Row> = self.rows.iter().chain(node.local.iter()).collect();
            let lp = solve_bounded(&cost, &lower, &upper, &rows, self.deadline);
            match lp.status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => return NodeOutcome::Done,
                LpStatus::IterationLimit | LpStatus::Unbounded => {
                    if self.deadline.is_some_and(|d| Instant::now() >= d) {
                        return NodeOutcome::Interrupted(node);
                    }
                    log::debug!("node LP failed ({:?}); node dropped", lp.status);
                    self.unresolved = self.unresolved.max(node.bound);
                    return NodeOutcome::Done;
                }
            }
            let obj = lp.objective;
            node.bound = node.bound.min(obj);
            if let Some(inc) = self.incumbent_value() {
                if obj <= inc + prune_tol(inc) {
                    return NodeOutcome::Done;
                }
            }
            let itol = self.opts.integrality_tolerance;
            let mut branch_var = None;
            let mut best_frac = itol;
            for j in 0..n {
                if !self.vars[j].integer {
                    continue;
                }
                let f = (lp.x[j] - lp.x[j].floor()).min(lp.x[j].ceil() - lp.x[j]);
                if f > best_frac + 1e-12 {
                    best_frac = f;
                    branch_var = Some(j);
                }
            }

            let Some(k) = branch_var else {
                let mut values = lp.x.clone();
                for j in 0..n {
                    if self.vars[j].integer {
                        values[j] = values[j].round();
                    }
                }
                let inc = self.incumbent_value();
                let mut ev =
                    CandidateEvent::new(CandidateKind::Integer, &values, obj, node.depth, inc, &node.local);
                handler.on_candidate(&mut ev);
                let reaction = ev.into_reaction();
                let (violated, rejected, branches) = self.absorb(reaction, &values, &mut node);
                if let Some(children) = branches {
                    self.push_children(&node, children, heap);
                    return NodeOutcome::Done;
                }
                if violated {
                    continue;
                }
                if rejected {
                    return NodeOutcome::Done;
                }
                let objective = self
                    .vars
                    .iter()
                    .zip(&values)
                    .map(|(v, x)| v.objective * x)
                    .sum();
                self.offer_incumbent(values, objective);
                return NodeOutcome::Done;
            };

            if self.fractional_allowed(node.depth) && rounds < self.opts.max_cut_rounds {
                rounds += 1;
                let inc = self.incumbent_value();
                let mut ev = CandidateEvent::new(
                    CandidateKind::Fractional,
                    &lp.x,
                    obj,
                    node.depth,
                    inc,
                    &node.local,
                );
                handler.on_candidate(&mut ev);
                let reaction = ev.into_reaction();
                let (violated, _, branches) = self.absorb(reaction, &lp.x, &mut node);
                if let Some(children) = branches {
                    self.push_children(&node, children, heap);
                    return NodeOutcome::Done;
                }
                if violated {
                    if let Some(inc) = self.incumbent_value() {
                        if node.bound <= inc + prune_tol(inc) {
                            return NodeOutcome::Done;
                        }
                    }
                    continue;
                }
            }

            let v = lp.x[k];
            let up = Node {
                bound: obj,
                seq: self.next_seq(),
                depth: node.depth + 1,
                bounds: with_bound(&node.bounds, k, v.ceil(), f64::INFINITY),
                local: node.local.clone(),
            };
            let down = Node {
                bound: obj,
                seq: self.next_seq(),
                depth: node.depth + 1,
                bounds: with_bound(&node.bounds, k, f64::NEG_INFINITY, v.floor()),
                local: std::mem::take(&mut node.local),
            };
            heap.push(up);
            heap.push(down);
            return NodeOutcome::Done;
        }
    }

    fn push_children(&mut self, node: &Node, children: Vec<Vec<Row>>, heap: &mut BinaryHeap<Node>) {
        for rows in children {
            let mut local = node.local.clone();
            local.extend(rows);
            heap.push(Node {
                bound: node.bound,
                seq: self.next_seq(),
                depth: node.depth + 1,
                bounds: node.bounds.clone(),
                local,
            });
        }
    }
}

fn with_bound(bounds: &[(usize, f64, f64)], j: usize, l: f64, u: f64) -> Vec<(usize, f64, f64)> {
    let mut out = bounds.to_vec();
    out.push((j, l, u));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Row, Variable};

    fn knapsack() -> LpModel {
        LpModel {
            vars: vec![Variable::binary(2.0), Variable::binary(3.0)],
            rows: vec![Row::le(vec![(0, 1.0), (1, 1.0)], 1.0)],
        }
    }

    #[test]
    fn binary_knapsack() {
        let r = solve_milp(&knapsack(), &mut NoCallback, &MilpOptions::default()).unwrap();
        assert_eq!(r.status, MilpStatus::Optimal);
        assert_eq!(r.objective, Some(3.0));
        assert_eq!(r.values.unwrap(), vec![0.0, 1.0]);
        assert_eq!(r.gap, 0.0);
    }

    #[test]
    fn lazy_rows_enforced() {
        // forbid b via a lazy row on first sight
        let mut cb = |ev: &mut CandidateEvent<'_>| {
            if ev.kind == CandidateKind::Integer && ev.values[1] > 0.5 {
                ev.add_lazy(Row::le(vec![(1, 1.0)], 0.0)).unwrap();
            }
        };
        let r = solve_milp(&knapsack(), &mut cb, &MilpOptions::default()).unwrap();
        assert_eq!(r.objective, Some(2.0));
        assert_eq!(r.lazy_cuts, 1);
    }

    #[test]
    fn satisfied_row_keeps_candidate() {
        let mut cb = |ev: &mut CandidateEvent<'_>| {
            ev.add_lazy(Row::le(vec![(0, 1.0)], 1.0)).unwrap();
        };
        let r = solve_milp(&knapsack(), &mut cb, &MilpOptions::default()).unwrap();
        assert_eq!(r.objective, Some(3.0));
    }

    #[test]
    fn rejecting_everything_is_infeasible() {
        let mut cb = |ev: &mut CandidateEvent<'_>| ev.reject();
        let r = solve_milp(&knapsack(), &mut cb, &MilpOptions::default()).unwrap();
        assert_eq!(r.status, MilpStatus::Infeasible);
        assert!(r.objective.is_none());
    }

    #[test]
    fn malformed_row_is_rejected() {
        let mut cb = |ev: &mut CandidateEvent<'_>| {
            assert!(ev.add_lazy(Row::le(vec![(7, 1.0)], 1.0)).is_err());
        };
        solve_milp(&knapsack(), &mut cb, &MilpOptions::default()).unwrap();
    }

    #[test]
    fn branching_children_cover_space() {
        // split on a+b: children {a+b <= 0} and {a+b >= 1}
        let mut done = false;
        let mut cb = |ev: &mut CandidateEvent<'_>| {
            if !done {
                done = true;
                ev.branch(vec![
                    vec![Row::le(vec![(0, 1.0), (1, 1.0)], 0.0)],
                    vec![Row::ge(vec![(0, 1.0), (1, 1.0)], 1.0)],
                ])
                .unwrap();
            }
        };
        let r = solve_milp(&knapsack(), &mut cb, &MilpOptions::default()).unwrap();
        assert_eq!(r.objective, Some(3.0));
    }

    #[test]
    fn zero_time_limit() {
        let opts = MilpOptions {
            time_limit_seconds: Some(0.0),
            ..Default::default()
        };
        let r = solve_milp(&knapsack(), &mut NoCallback, &opts).unwrap();
        assert_eq!(r.status, MilpStatus::TimeLimit);
        assert!(r.bound >= 3.0);
    }

    #[test]
    fn columns_added_during_solve() {
        // add a column y <= a with objective 1 once
        let mut added = false;
        let mut cb = |ev: &mut CandidateEvent<'_>| {
            if !added {
                added = true;
                let y = ev.add_column(Variable::continuous(0.0, 1.0, 5.0)).unwrap();
                ev.add_user_cut(Row::le(vec![(y, 1.0), (0, -1.0)], 0.0)).unwrap();
            }
        };
        let r = solve_milp(&knapsack(), &mut cb, &MilpOptions::default()).unwrap();
        assert_eq!(r.columns, 3);
        assert_eq!(r.objective, Some(7.0));
    }
}
