//! Greedy warmstart: keep opening whatever adds the most coverage.

use crate::model::{check_domain, Instance, Solution};

/// Users covered by each (facility, period), as `(user, period)` pairs.
fn cover_lists(inst: &Instance) -> Vec<Vec<usize>> {
    let periods = inst.periods();
    let mut lists = vec![Vec::new(); inst.var_count()];
    for (j, u) in inst.users().iter().enumerate() {
        for (t, cov) in u.covering.iter().enumerate() {
            for &i in cov {
                lists[i * periods + t].push(j);
            }
        }
    }
    lists
}

/// Entries a move would open: `(i, t)` alone, or `(i, t..T)` under
/// persistence.
fn move_entries(x: &Solution, i: usize, t: usize, persistent: bool) -> Vec<(usize, usize)> {
    if persistent {
        (t..x.periods()).filter(|&s| !x.get(i, s)).map(|s| (i, s)).collect()
    } else {
        vec![(i, t)]
    }
}

/// Returns `None` when the all-closed solution is outside the domain.
pub fn greedy_warmstart(inst: &Instance) -> Option<Solution> {
    let mut x = Solution::for_instance(inst);
    if !check_domain(inst, &x) {
        return None;
    }
    let periods = inst.periods();
    let persistent = inst.domain().has_persistence();
    let lists = cover_lists(inst);
    let mut counts = vec![0u32; inst.user_count() * periods];

    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for t in 0..periods {
            for i in 0..inst.facility_count() {
                if x.get(i, t) {
                    continue;
                }
                let entries = move_entries(&x, i, t, persistent);
                let mut gain = 0.0;
                for &(fi, ft) in &entries {
                    for &j in &lists[fi * periods + ft] {
                        if counts[j * periods + ft] == 0 {
                            gain += inst.users()[j].demands[ft];
                        }
                    }
                }
                if gain <= 0.0 || best.is_some_and(|(g, _, _)| gain <= g) {
                    continue;
                }
                let mut y = x.clone();
                for &(fi, ft) in &entries {
                    y.set(fi, ft, true);
                }
                if check_domain(inst, &y) {
                    best = Some((gain, i, t));
                }
            }
        }
        let Some((gain, i, t)) = best else { break };
        log::trace!("greedy: open facility {i} from period {t}, gain {gain}");
        for (fi, ft) in move_entries(&x, i, t, persistent) {
            x.set(fi, ft, true);
            for &j in &lists[fi * periods + ft] {
                counts[j * periods + ft] += 1;
            }
        }
    }
    Some(x)
}
