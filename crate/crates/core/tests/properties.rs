mod common;

use dyncover::benders::{evaluate_cut, multi_cuts, single_cut, GammaVariant};
use dyncover::formulation::{monolithic_model, solve_bc};
use dyncover::greedy::greedy_warmstart;
use dyncover::io::{parse_instance, parse_solution, write_instance, write_solution};
use dyncover::milp::solve_lp;
use dyncover::model::{check_domain, coverage, coverage_by_period, FracSolution, Solution};
use dyncover::oracle::{enumerate_optimum, feasible_points};
use dyncover::preprocess::{reduce, singles_set};
use dyncover::stats::{SolveOptions, SolveStatus};
use proptest::prelude::*;
use std::collections::BTreeSet;

fn bits_for(seed: u64, n: usize) -> Vec<bool> {
    (0..n).map(|k| (seed.rotate_left(k as u32 * 7) >> k) & 1 == 1).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coverage_is_monotone(seed in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        let inst = common::small_instance(seed % 500);
        let (n, t) = (inst.facility_count(), inst.periods());
        let lo = bits_for(a & b, n * t);
        let hi: Vec<bool> = lo.iter().zip(bits_for(b, n * t)).map(|(&x, y)| x || y).collect();
        let lo = Solution::from_flat(n, t, lo).unwrap();
        let hi = Solution::from_flat(n, t, hi).unwrap();
        prop_assert!(coverage(&inst, &lo).unwrap() <= coverage(&inst, &hi).unwrap());
        let per: f64 = coverage_by_period(&inst, &hi).unwrap().iter().sum();
        prop_assert_eq!(per, coverage(&inst, &hi).unwrap());
    }

    #[test]
    fn instance_text_round_trips(seed in any::<u64>()) {
        let inst = common::small_instance(seed);
        let text = write_instance(&inst);
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(write_instance(&back), text);
    }

    #[test]
    fn solution_text_round_trips(seed in any::<u64>(), t in 1usize..4, n in 1usize..9) {
        let x = Solution::from_flat(n, t, bits_for(seed, n * t)).unwrap();
        prop_assert_eq!(parse_solution(&write_solution(&x)).unwrap(), x);
    }

    #[test]
    fn reduction_preserves_optimum(seed in 0u64..2000) {
        let inst = common::tiny_instance(seed);
        let (red, report) = reduce(&inst, &BTreeSet::new()).unwrap();
        let (_, a) = enumerate_optimum(&inst).unwrap().unwrap();
        let (x, b) = enumerate_optimum(&red).unwrap().unwrap();
        prop_assert_eq!(a, b + report.constant_offset);
        prop_assert_eq!(coverage(&inst, &x).unwrap(), a);
    }

    #[test]
    fn greedy_is_feasible_and_below_optimum(seed in 0u64..2000) {
        let inst = common::small_instance(seed);
        let x = greedy_warmstart(&inst).unwrap();
        prop_assert!(check_domain(&inst, &x));
        let (_, opt) = enumerate_optimum(&inst).unwrap().unwrap();
        prop_assert!(coverage(&inst, &x).unwrap() <= opt);
    }

    #[test]
    fn monolithic_milp_matches_enumeration(seed in 0u64..2000) {
        let inst = common::tiny_instance(seed);
        let (_, opt) = enumerate_optimum(&inst).unwrap().unwrap();
        let lp = solve_lp(&monolithic_model(&inst));
        prop_assert!(lp.objective >= opt - 1e-6);
        let r = solve_bc(&inst, &SolveOptions::default()).unwrap();
        prop_assert_eq!(r.status, SolveStatus::Optimal);
        prop_assert_eq!(r.objective, Some(opt));
        prop_assert!(r.bound >= opt - 1e-6);
    }

    #[test]
    fn cuts_at_fractional_points_are_valid(seed in 0u64..2000, vals in prop::collection::vec(0.0f64..=1.0, 10)) {
        let inst = common::tiny_instance(seed);
        let (n, t) = (inst.facility_count(), inst.periods());
        let x = FracSolution::new(n, t, vals[..n * t].to_vec()).unwrap();
        let singles = singles_set(&inst);
        let points = feasible_points(&inst).unwrap();
        for v in [GammaVariant::B0, GammaVariant::B1, GammaVariant::B2] {
            let single = single_cut(&inst, &x, v, &singles, None).unwrap();
            let multi = multi_cuts(&inst, &x, v, &singles, None).unwrap();
            for p in &points {
                let pp = p.to_point();
                prop_assert!(evaluate_cut(&single, &pp) >= coverage(&inst, p).unwrap() - 1e-9);
                for (c, want) in multi.iter().zip(coverage_by_period(&inst, p).unwrap()) {
                    prop_assert!(evaluate_cut(c, &pp) >= want - 1e-9);
                }
            }
        }
    }
}
