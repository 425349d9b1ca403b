use std::time::Instant;

use super::{LpModel, Row, Sense};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const REFRESH_EVERY: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Pivot budget or deadline exhausted, or the final basis failed its
    /// accuracy checks.
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    /// `d objective / d rhs` per row: nonnegative on `<=` rows and
    /// nonpositive on `>=` rows at an optimum.
    pub duals: Vec<f64>,
    /// `c_j - y^T A_j` per structural column.
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    /// Rows whose artificial stayed positive when infeasibility was proven.
    pub infeasible_rows: Vec<usize>,
    pub iterations: usize,
}

impl LpSolution {
    fn failed(status: LpStatus, n: usize, m: usize, iterations: usize) -> Self {
        Self {
            status,
            x: vec![0.0; n],
            duals: vec![0.0; m],
            reduced_costs: vec![0.0; n],
            objective: f64::NAN,
            infeasible_rows: Vec::new(),
            iterations,
        }
    }
}

pub fn solve_lp(model: &LpModel) -> LpSolution {
    let lower: Vec<f64> = model.vars.iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = model.vars.iter().map(|v| v.upper).collect();
    let cost: Vec<f64> = model.vars.iter().map(|v| v.objective).collect();
    let rows: Vec<&Row> = model.rows.iter().collect();
    solve_bounded(&cost, &lower, &upper, &rows, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
}

struct Tableau<'a> {
    m: usize,
    n: usize,
    cols: usize,
    tab: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    lo: Vec<f64>,
    up: Vec<f64>,
    value: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    /// Coefficient of the slack column in each row (+1, -1, or +1 for `=`
    /// rows whose slack is fixed at zero).
    slack_sign: Vec<f64>,
    art_sign: Vec<f64>,
    rows: &'a [&'a Row],
    rhs: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
    deadline: Option<Instant>,
}

enum Outcome {
    Optimal,
    Unbounded,
    Limit,
}

impl<'a> Tableau<'a> {
    fn slack(&self, r: usize) -> usize {
        self.n + r
    }

    fn art(&self, r: usize) -> usize {
        self.n + self.m + r
    }

    fn is_art(&self, j: usize) -> bool {
        j >= self.n + self.m
    }

    fn new(
        lower: &[f64],
        upper: &[f64],
        rows: &'a [&'a Row],
        deadline: Option<Instant>,
    ) -> Self {
        let n = lower.len();
        let m = rows.len();
        let cols = n + 2 * m;
        let mut t = Tableau {
            m,
            n,
            cols,
            tab: vec![0.0; m * cols],
            beta: vec![0.0; m],
            basis: vec![0; m],
            state: vec![State::Lower; cols],
            lo: vec![0.0; cols],
            up: vec![0.0; cols],
            value: vec![0.0; cols],
            cost: vec![0.0; cols],
            d: vec![0.0; cols],
            slack_sign: vec![1.0; m],
            art_sign: vec![1.0; m],
            rows,
            rhs: rows.iter().map(|r| r.rhs).collect(),
            iterations: 0,
            max_iterations: 50 * (m + n) + 1000,
            deadline,
        };
        for j in 0..n {
            t.lo[j] = lower[j];
            t.up[j] = upper[j];
            if lower[j].is_finite() {
                t.value[j] = lower[j];
                t.state[j] = State::Lower;
            } else {
                t.value[j] = upper[j];
                t.state[j] = State::Upper;
            }
        }
        for (r, row) in rows.iter().enumerate() {
            let base = r * cols;
            for &(j, a) in &row.coefs {
                t.tab[base + j] += a;
            }
            let (sign, up) = match row.sense {
                Sense::Le => (1.0, f64::INFINITY),
                Sense::Ge => (-1.0, f64::INFINITY),
                Sense::Eq => (1.0, 0.0),
            };
            t.slack_sign[r] = sign;
            let s = t.slack(r);
            t.tab[base + s] = sign;
            t.lo[s] = 0.0;
            t.up[s] = up;
        }
        for r in 0..m {
            let base = r * cols;
            let mut res = t.rhs[r];
            for j in 0..n {
                let a = t.tab[base + j];
                if a != 0.0 {
                    res -= a * t.value[j];
                }
            }
            let s = t.slack(r);
            let a = t.art(r);
            let slack_ok = match rows[r].sense {
                Sense::Le => res >= 0.0,
                Sense::Ge => res <= 0.0,
                Sense::Eq => false,
            };
            t.art_sign[r] = if res >= 0.0 { 1.0 } else { -1.0 };
            t.tab[base + a] = t.art_sign[r];
            t.lo[a] = 0.0;
            if slack_ok {
                t.basis[r] = s;
                t.state[s] = State::Basic;
                t.beta[r] = res * t.slack_sign[r];
                t.up[a] = 0.0;
                // B = diag(slack sign): scale the row into B^{-1} A
                if t.slack_sign[r] < 0.0 {
                    for v in &mut t.tab[base..base + cols] {
                        *v = -*v;
                    }
                }
            } else {
                t.basis[r] = a;
                t.state[a] = State::Basic;
                t.beta[r] = res.abs();
                t.up[a] = f64::INFINITY;
                if t.art_sign[r] < 0.0 {
                    for v in &mut t.tab[base..base + cols] {
                        *v = -*v;
                    }
                }
            }
        }
        t
    }

    fn compute_reduced_costs(&mut self) {
        self.d.copy_from_slice(&self.cost);
        for k in 0..self.m {
            let cb = self.cost[self.basis[k]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.tab[k * self.cols..(k + 1) * self.cols];
            for (dj, &a) in self.d.iter_mut().zip(row) {
                *dj -= cb * a;
            }
        }
    }

    /// Column `r` of `B^{-1}`, read from the artificial columns.
    fn binv(&self, k: usize, r: usize) -> f64 {
        self.tab[k * self.cols + self.art(r)] * self.art_sign[r]
    }

    /// Recomputes basic values from the nonbasic ones.
    fn refresh(&mut self) {
        let mut res = self.rhs.clone();
        for (r, row) in self.rows.iter().enumerate() {
            for &(j, a) in &row.coefs {
                if self.state[j] != State::Basic {
                    res[r] -= a * self.value[j];
                }
            }
            let s = self.slack(r);
            if self.state[s] != State::Basic {
                res[r] -= self.slack_sign[r] * self.value[s];
            }
            let a = self.art(r);
            if self.state[a] != State::Basic {
                res[r] -= self.art_sign[r] * self.value[a];
            }
        }
        for k in 0..self.m {
            let mut v = 0.0;
            for (r, &rr) in res.iter().enumerate() {
                if rr != 0.0 {
                    v += self.binv(k, r) * rr;
                }
            }
            self.beta[k] = v;
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let piv = self.tab[r * cols + q];
        {
            let row = &mut self.tab[r * cols..(r + 1) * cols];
            for v in row.iter_mut() {
                *v /= piv;
            }
            row[q] = 1.0;
        }
        let (before, rest) = self.tab.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        for chunk in before.chunks_mut(cols).chain(after.chunks_mut(cols)) {
            let f = chunk[q];
            if f != 0.0 {
                for (v, &p) in chunk.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
                chunk[q] = 0.0;
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for (v, &p) in self.d.iter_mut().zip(prow.iter()) {
                *v -= f * p;
            }
            self.d[q] = 0.0;
        }
    }

    fn run(&mut self) -> Outcome {
        let mut degenerate_run = 0usize;
        let bland_after = 10 * (self.m + self.n);
        loop {
            self.iterations += 1;
            if self.iterations > self.max_iterations {
                return Outcome::Limit;
            }
            if self.iterations % 64 == 0 {
                if let Some(dl) = self.deadline {
                    if Instant::now() >= dl {
                        return Outcome::Limit;
                    }
                }
            }
            if self.iterations % REFRESH_EVERY == 0 {
                self.refresh();
                self.compute_reduced_costs();
            }
            let bland = degenerate_run > bland_after;

            let mut entering = None;
            let mut best_gain = 0.0;
            for j in 0..self.cols {
                let gain = match self.state[j] {
                    State::Basic => continue,
                    _ if self.up[j] - self.lo[j] <= 0.0 => continue,
                    State::Lower => self.d[j],
                    State::Upper => -self.d[j],
                };
                if gain > COST_TOL {
                    if bland {
                        entering = Some(j);
                        break;
                    }
                    if gain > best_gain {
                        best_gain = gain;
                        entering = Some(j);
                    }
                }
            }
            let Some(q) = entering else {
                return Outcome::Optimal;
            };
            let dir = if self.state[q] == State::Lower { 1.0 } else { -1.0 };

            let mut leave: Option<usize> = None;
            let mut best = f64::INFINITY;
            let mut best_rate = 0.0f64;
            for k in 0..self.m {
                let rate = dir * self.tab[k * self.cols + q];
                let b = self.basis[k];
                let lim = if rate > PIVOT_TOL {
                    if !self.lo[b].is_finite() {
                        continue;
                    }
                    ((self.beta[k] - self.lo[b]) / rate).max(0.0)
                } else if rate < -PIVOT_TOL {
                    if !self.up[b].is_finite() {
                        continue;
                    }
                    ((self.up[b] - self.beta[k]) / -rate).max(0.0)
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some(cur) => {
                        if lim < best - 1e-12 {
                            true
                        } else if lim <= best + 1e-12 {
                            if bland {
                                b < self.basis[cur]
                            } else {
                                rate.abs() > best_rate.abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    best = lim.min(best);
                    leave = Some(k);
                    best_rate = rate;
                }
            }
            let flip = self.up[q] - self.lo[q];
            if leave.is_none() && !flip.is_finite() {
                return Outcome::Unbounded;
            }
            let (theta, do_flip) = if flip <= best { (flip, true) } else { (best, false) };
            if theta <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            if theta != 0.0 {
                for k in 0..self.m {
                    let a = self.tab[k * self.cols + q];
                    if a != 0.0 {
                        self.beta[k] -= theta * dir * a;
                    }
                }
            }
            if do_flip {
                if self.state[q] == State::Lower {
                    self.state[q] = State::Upper;
                    self.value[q] = self.up[q];
                } else {
                    self.state[q] = State::Lower;
                    self.value[q] = self.lo[q];
                }
                continue;
            }
            let r = leave.expect("leaving row when no flip");
            let entering_value = self.value[q] + dir * theta;
            let out = self.basis[r];
            if best_rate > 0.0 {
                self.state[out] = State::Lower;
                self.value[out] = self.lo[out];
            } else {
                self.state[out] = State::Upper;
                self.value[out] = self.up[out];
            }
            if self.is_art(out) {
                self.up[out] = 0.0;
                self.state[out] = State::Lower;
                self.value[out] = 0.0;
            }
            self.pivot(r, q);
            self.basis[r] = q;
            self.state[q] = State::Basic;
            self.beta[r] = entering_value;
            self.value[q] = entering_value;
        }
    }

    /// Pivots basic artificials out of the basis where some other column has
    /// a usable entry in their row.
    fn drive_out_artificials(&mut self) {
        for r in 0..self.m {
            let b = self.basis[r];
            if !self.is_art(b) {
                continue;
            }
            let mut pick = None;
            let mut best = 1e-7;
            for j in 0..self.n + self.m {
                if self.state[j] == State::Basic {
                    continue;
                }
                let a = self.tab[r * self.cols + j].abs();
                if a > best {
                    best = a;
                    pick = Some(j);
                }
            }
            if let Some(q) = pick {
                let v = self.value[q];
                self.pivot(r, q);
                self.basis[r] = q;
                self.state[q] = State::Basic;
                self.beta[r] = v;
                self.state[b] = State::Lower;
                self.value[b] = 0.0;
                self.up[b] = 0.0;
            }
        }
    }

    fn sync_values(&mut self) {
        for k in 0..self.m {
            self.value[self.basis[k]] = self.beta[k];
        }
    }
}

pub(crate) fn solve_bounded(
    cost: &[f64],
    lower: &[f64],
    upper: &[f64],
    rows: &[&Row],
    deadline: Option<Instant>,
) -> LpSolution {
    let n = cost.len();
    let m = rows.len();
    for j in 0..n {
        if lower[j] > upper[j] + FEAS_TOL {
            let mut s = LpSolution::failed(LpStatus::Infeasible, n, m, 0);
            s.infeasible_rows.clear();
            return s;
        }
    }
    let mut t = Tableau::new(lower, upper, rows, deadline);

    // phase 1: drive artificials to zero
    let has_art = (0..m).any(|r| t.is_art(t.basis[r]));
    if has_art {
        for r in 0..m {
            let a = t.art(r);
            t.cost[a] = if t.state[a] == State::Basic { -1.0 } else { 0.0 };
        }
        t.compute_reduced_costs();
        match t.run() {
            Outcome::Optimal => {}
            Outcome::Unbounded | Outcome::Limit => {
                return LpSolution::failed(LpStatus::IterationLimit, n, m, t.iterations)
            }
        }
        t.refresh();
        let scale = 1.0 + t.rhs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let mut infeasibility = 0.0;
        let mut certificate = Vec::new();
        for k in 0..m {
            let b = t.basis[k];
            if t.is_art(b) && t.beta[k] > FEAS_TOL * scale {
                infeasibility += t.beta[k];
                certificate.push(b - n - m);
            }
        }
        if infeasibility > 0.0 {
            certificate.sort_unstable();
            let mut s = LpSolution::failed(LpStatus::Infeasible, n, m, t.iterations);
            s.infeasible_rows = certificate;
            return s;
        }
        for r in 0..m {
            let a = t.art(r);
            t.up[a] = 0.0;
            t.cost[a] = 0.0;
        }
        for k in 0..m {
            if t.is_art(t.basis[k]) {
                t.beta[k] = 0.0;
            }
        }
        t.drive_out_artificials();
        t.refresh();
    }

    // phase 2
    for j in 0..t.cols {
        t.cost[j] = if j < n { cost[j] } else { 0.0 };
    }
    t.compute_reduced_costs();
    match t.run() {
        Outcome::Optimal => {}
        Outcome::Unbounded => return LpSolution::failed(LpStatus::Unbounded, n, m, t.iterations),
        Outcome::Limit => {
            return LpSolution::failed(LpStatus::IterationLimit, n, m, t.iterations)
        }
    }
    t.refresh();
    t.sync_values();

    let x: Vec<f64> = t.value[..n].to_vec();
    let mut duals = vec![0.0; m];
    for (r, y) in duals.iter_mut().enumerate() {
        let mut v = 0.0;
        for k in 0..m {
            let cb = t.cost[t.basis[k]];
            if cb != 0.0 {
                v += cb * t.binv(k, r);
            }
        }
        *y = v;
    }
    let mut reduced_costs = cost.to_vec();
    for (r, row) in rows.iter().enumerate() {
        if duals[r] != 0.0 {
            for &(j, a) in &row.coefs {
                reduced_costs[j] -= duals[r] * a;
            }
        }
    }
    let objective: f64 = cost.iter().zip(&x).map(|(c, v)| c * v).sum();

    // accuracy checks on the final basis
    let scale = 1.0 + x.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let bounds_ok = (0..n).all(|j| {
        x[j] >= lower[j] - FEAS_TOL * scale && x[j] <= upper[j] + FEAS_TOL * scale
    });
    let rows_ok = rows.iter().all(|r| {
        let tol = FEAS_TOL * (scale + r.rhs.abs());
        r.violation(&x) <= tol * 10.0
    });
    let cscale = 1.0 + cost.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let duals_ok = rows.iter().zip(&duals).all(|(r, &y)| match r.sense {
        Sense::Le => y >= -1e-6 * cscale,
        Sense::Ge => y <= 1e-6 * cscale,
        Sense::Eq => true,
    }) && (0..n).all(|j| {
        let dj = reduced_costs[j];
        let at_lower = (x[j] - lower[j]).abs() <= FEAS_TOL * scale;
        let at_upper = (x[j] - upper[j]).abs() <= FEAS_TOL * scale;
        (at_lower && dj <= 1e-6 * cscale)
            || (at_upper && dj >= -1e-6 * cscale)
            || dj.abs() <= 1e-6 * cscale
    });
    if !(bounds_ok && rows_ok && duals_ok) {
        log::debug!(
            "lp accuracy check failed (bounds {bounds_ok}, rows {rows_ok}, duals {duals_ok})"
        );
        return LpSolution::failed(LpStatus::IterationLimit, n, m, t.iterations);
    }
    // clean tiny bound drift
    let x = x
        .iter()
        .enumerate()
        .map(|(j, &v)| v.clamp(lower[j], upper[j]))
        .collect();

    LpSolution {
        status: LpStatus::Optimal,
        x,
        duals,
        reduced_costs,
        objective,
        infeasible_rows: Vec::new(),
        iterations: t.iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{LpModel, Row, Variable};

    fn model(vars: &[(f64, f64, f64)], rows: Vec<Row>) -> LpModel {
        LpModel {
            vars: vars
                .iter()
                .map(|&(l, u, c)| Variable::continuous(l, u, c))
                .collect(),
            rows,
        }
    }

    #[test]
    fn single_bound() {
        let m = model(&[(0.0, 1.0, 1.0)], vec![Row::le(vec![(0, 1.0)], 0.5)]);
        let s = solve_lp(&m);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 0.5).abs() < 1e-9);
        assert!((s.duals[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sum_constraint() {
        let m = model(
            &[(0.0, 1.0, 1.0), (0.0, 1.0, 1.0)],
            vec![Row::le(vec![(0, 1.0), (1, 1.0)], 1.0)],
        );
        let s = solve_lp(&m);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_reports_rows() {
        let m = model(
            &[(0.0, 1.0, 1.0)],
            vec![Row::ge(vec![(0, 1.0)], 2.0)],
        );
        let s = solve_lp(&m);
        assert_eq!(s.status, LpStatus::Infeasible);
        assert_eq!(s.infeasible_rows, vec![0]);
    }

    #[test]
    fn equality_and_ge_rows() {
        // max x + 2y, x + y = 1, x >= 0.25
        let m = model(
            &[(0.0, 1.0, 1.0), (0.0, 1.0, 2.0)],
            vec![
                Row::eq(vec![(0, 1.0), (1, 1.0)], 1.0),
                Row::ge(vec![(0, 1.0)], 0.25),
            ],
        );
        let s = solve_lp(&m);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 0.25).abs() < 1e-9);
        assert!((s.objective - 1.75).abs() < 1e-9);
        assert!((s.duals[0] - 2.0).abs() < 1e-9);
        assert!((s.duals[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn negative_lower_bounds() {
        let m = model(
            &[(-2.0, 3.0, -1.0), (-1.0, 1.0, 1.0)],
            vec![Row::ge(vec![(0, 1.0), (1, 1.0)], -0.5)],
        );
        let s = solve_lp(&m);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] + 1.5).abs() < 1e-9);
        assert!((s.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_model() {
        let s = solve_lp(&LpModel::new());
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.objective, 0.0);
    }
}
