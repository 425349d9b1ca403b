mod common;

use dyncover::benders::{solve_abbc, solve_benders, solve_ubbc, AbbcFeatures, BendersConfig};
use dyncover::formulation::solve_bc;
use dyncover::localbranching::{solve_diversified, solve_lb, LbFeatures, SepBTrigger, SepMode, SubMode};
use dyncover::model::{check_domain, coverage, fig1, Solution};
use dyncover::oracle::{enumerate_neighborhood_optimum, enumerate_optimum, Metric};
use dyncover::stats::{SolveOptions, SolveStatus};

fn opts() -> SolveOptions {
    SolveOptions::default()
}

fn assert_optimal(inst: &dyncover::model::Instance, r: &dyncover::stats::SolveResult, opt: f64) {
    assert_eq!(r.status, SolveStatus::Optimal, "{} {}", r.method, r.features);
    assert_eq!(r.objective, Some(opt), "{} {}", r.method, r.features);
    let x = r.solution.as_ref().expect("optimal runs carry a solution");
    assert!(check_domain(inst, x));
    assert_eq!(coverage(inst, x).unwrap(), opt);
    assert!(r.bound >= opt - 1e-6);
}

#[test]
fn fig1_every_method() {
    let inst = fig1();
    for r in [
        solve_bc(&inst, &opts()).unwrap(),
        solve_ubbc(&inst, &opts()).unwrap(),
        solve_abbc(&inst, &opts(), &AbbcFeatures::all()).unwrap(),
        solve_lb(&inst, &opts(), &LbFeatures::default()).unwrap(),
    ] {
        assert_optimal(&inst, &r, 30.0);
        assert_eq!(r.solution.as_ref().unwrap(), &Solution::single_period(&[1, 0, 1]));
    }
}

#[test]
fn abbc_feature_subsets_match_oracle() {
    let subsets = [
        AbbcFeatures { multicut: false, ..AbbcFeatures::all() },
        AbbcFeatures { pareto: false, ..AbbcFeatures::all() },
        AbbcFeatures { partial: false, ..AbbcFeatures::all() },
        AbbcFeatures { warmstart: false, ..AbbcFeatures::all() },
        AbbcFeatures { root_only_fractional: false, ..AbbcFeatures::all() },
    ];
    for seed in 0..30 {
        let inst = common::small_instance(seed);
        let (_, opt) = enumerate_optimum(&inst).unwrap().unwrap();
        assert_optimal(&inst, &solve_bc(&inst, &opts()).unwrap(), opt);
        for f in &subsets {
            assert_optimal(&inst, &solve_abbc(&inst, &opts(), f).unwrap(), opt);
        }
    }
}

#[test]
fn abbc_with_lagrangian_cuts_matches_oracle() {
    for seed in 0..20 {
        let inst = common::tiny_instance(seed);
        let (_, opt) = enumerate_optimum(&inst).unwrap().unwrap();
        let mut cfg = BendersConfig::abbc(&AbbcFeatures::all());
        cfg.bdd_iterations = Some(5);
        let r = solve_benders(&inst, &opts(), &cfg, "abbc").unwrap();
        assert_optimal(&inst, &r, opt);
    }
}

#[test]
fn lb_variants_match_oracle() {
    for seed in 200..230 {
        let inst = common::small_instance(seed);
        let (_, opt) = enumerate_optimum(&inst).unwrap().unwrap();
        for (sub, sep, kappa) in [
            (SubMode::SubD, SepMode::SepB, 2),
            (SubMode::SubB, SepMode::SepD, 2),
            (SubMode::SubB, SepMode::SepD, 1),
            (SubMode::SubB, SepMode::SepB, 1),
        ] {
            for trig in [SepBTrigger::All, SepBTrigger::Improving] {
                let f = LbFeatures { sub, sep, kappa, sepb_trigger: trig, ..LbFeatures::default() };
                assert_optimal(&inst, &solve_lb(&inst, &opts(), &f).unwrap(), opt);
            }
        }
    }
}

#[test]
fn reformulated_subproblem_needs_kappa_two() {
    let f = LbFeatures { kappa: 1, ..LbFeatures::default() };
    assert!(solve_lb(&fig1(), &opts(), &f).is_err());
}

#[test]
fn diversified_subproblem_excludes_center() {
    for seed in 0..20 {
        let inst = common::small_instance(seed);
        let (center, _) = enumerate_optimum(&inst).unwrap().unwrap();
        let r = solve_diversified(&inst, &center, 3, None).unwrap();
        let want = enumerate_neighborhood_optimum(&inst, &center, 3, Metric::PerPeriod)
            .unwrap()
            .map(|(_, v)| v);
        match r.solution {
            Some(x) => {
                assert_ne!(x, center);
                assert!(check_domain(&inst, &x));
                assert!(Some(r.value) <= want);
            }
            None => assert!(r.solved),
        }
    }
}

#[test]
fn node_and_time_limits_stop_early() {
    let inst = common::small_instance(7);
    let zero = SolveOptions { time_limit_seconds: Some(0.0), node_limit: None };
    let r = solve_ubbc(&inst, &zero).unwrap();
    assert_eq!(r.status, SolveStatus::TimeLimit);
    if let Some(obj) = r.objective {
        assert!(obj <= r.bound + 1e-6);
    }
    let one = SolveOptions { time_limit_seconds: None, node_limit: Some(1) };
    let r = solve_bc(&inst, &one).unwrap();
    assert!(r.nodes <= 1 || r.status == SolveStatus::Optimal);
}
