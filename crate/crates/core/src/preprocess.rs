//! Exact instance reductions and the set of singly-covered users.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{Instance, ModelError, UserRecord};

/// What a reduction removed or merged. Indices in `removed_*` refer to the
/// input instance; `aggregation_map` sends every surviving input user to its
/// index in the output instance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreprocessReport {
    pub removed_uncoverable: Vec<usize>,
    pub removed_precovered: Vec<usize>,
    pub aggregation_map: BTreeMap<usize, usize>,
    pub singles: BTreeSet<usize>,
    pub constant_offset: f64,
}

fn finish(inst: &Instance, users: Vec<UserRecord>, mut report: PreprocessReport) -> (Instance, PreprocessReport) {
    let out = inst
        .with_users(users)
        .expect("reductions keep users valid");
    report.singles = singles_set(&out);
    (out, report)
}

/// Removes users no facility covers in any period.
pub fn drop_uncoverable(inst: &Instance) -> (Instance, PreprocessReport) {
    let mut report = PreprocessReport::default();
    let mut users = Vec::new();
    for (j, u) in inst.users().iter().enumerate() {
        if u.coverage_size() == 0 {
            report.removed_uncoverable.push(j);
        } else {
            report.aggregation_map.insert(j, users.len());
            users.push(u.clone());
        }
    }
    finish(inst, users, report)
}

/// Removes users whose coverage is guaranteed regardless of `x`; their total
/// demand becomes `constant_offset`.
pub fn drop_precovered(
    inst: &Instance,
    precovered: &BTreeSet<usize>,
) -> Result<(Instance, PreprocessReport), ModelError> {
    if let Some(&j) = precovered.iter().find(|&&j| j >= inst.user_count()) {
        return Err(ModelError::InvalidArgument(format!(
            "precovered user {j} out of range"
        )));
    }
    let mut report = PreprocessReport::default();
    let mut users = Vec::new();
    for (j, u) in inst.users().iter().enumerate() {
        if precovered.contains(&j) {
            report.removed_precovered.push(j);
            report.constant_offset += u.demands.iter().sum::<f64>();
        } else {
            report.aggregation_map.insert(j, users.len());
            users.push(u.clone());
        }
    }
    Ok(finish(inst, users, report))
}

/// Merges users with identical coverage signatures over all periods. The
/// merged user keeps the position of the first member; demands add up.
pub fn aggregate_users(inst: &Instance) -> (Instance, PreprocessReport) {
    let mut report = PreprocessReport::default();
    let mut by_signature: BTreeMap<Vec<Vec<usize>>, usize> = BTreeMap::new();
    let mut users: Vec<UserRecord> = Vec::new();
    for (j, u) in inst.users().iter().enumerate() {
        let signature: Vec<Vec<usize>> = u
            .covering
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.sort_unstable();
                c
            })
            .collect();
        match by_signature.get(&signature) {
            Some(&k) => {
                for (acc, d) in users[k].demands.iter_mut().zip(&u.demands) {
                    *acc += d;
                }
                report.aggregation_map.insert(j, k);
            }
            None => {
                by_signature.insert(signature, users.len());
                report.aggregation_map.insert(j, users.len());
                users.push(u.clone());
            }
        }
    }
    finish(inst, users, report)
}

/// Users covered by exactly one (facility, period) pair overall.
pub fn singles_set(inst: &Instance) -> BTreeSet<usize> {
    inst.users()
        .iter()
        .enumerate()
        .filter(|(_, u)| u.coverage_size() == 1)
        .map(|(j, _)| j)
        .collect()
}

/// Applies `drop_uncoverable`, `drop_precovered` and `aggregate_users` in that
/// order. `precovered` refers to the input instance.
pub fn reduce(
    inst: &Instance,
    precovered: &BTreeSet<usize>,
) -> Result<(Instance, PreprocessReport), ModelError> {
    let (a, ra) = drop_uncoverable(inst);
    let mapped: BTreeSet<usize> = precovered
        .iter()
        .filter_map(|j| ra.aggregation_map.get(j).copied())
        .collect();
    if let Some(&j) = precovered.iter().find(|&&j| j >= inst.user_count()) {
        return Err(ModelError::InvalidArgument(format!(
            "precovered user {j} out of range"
        )));
    }
    let (b, rb) = drop_precovered(&a, &mapped)?;
    let (c, rc) = aggregate_users(&b);

    let mut aggregation_map = BTreeMap::new();
    for (&orig, &mid) in &ra.aggregation_map {
        if let Some(&after) = rb.aggregation_map.get(&mid) {
            aggregation_map.insert(orig, rc.aggregation_map[&after]);
        }
    }
    let inverse_a: BTreeMap<usize, usize> = ra.aggregation_map.iter().map(|(&o, &m)| (m, o)).collect();
    let report = PreprocessReport {
        removed_uncoverable: ra.removed_uncoverable,
        removed_precovered: rb
            .removed_precovered
            .iter()
            .map(|m| inverse_a[m])
            .collect(),
        aggregation_map,
        singles: rc.singles,
        constant_offset: rb.constant_offset,
    };
    Ok((c, report))
}
