use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dyncover::benders::{single_cut, GammaVariant};
use dyncover::io::{generate_instance, DomainTemplate, GeneratorParams};
use dyncover::model::{FracSolution, Instance};
use dyncover::oracle::enumerate_optimum_with;
use dyncover::par::{self, Execution};
use dyncover::preprocess::singles_set;

fn instance(facilities: usize, periods: usize, users: usize) -> Instance {
    generate_instance(&GeneratorParams {
        seed: 11,
        periods,
        facilities,
        users,
        radius: 0.3,
        demand_low: 1.0,
        demand_high: 10.0,
        growth: 1.1,
        domain: DomainTemplate::Cardinality { limit: 3 },
    })
    .unwrap()
}

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn enumeration(c: &mut Criterion) {
    let mut g = c.benchmark_group("enumerate_optimum");
    g.sample_size(10);
    for (f, t) in [(6, 3), (8, 2), (7, 3)] {
        let inst = instance(f, t, 200);
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, format!("{f}x{t}")), &inst, |b, inst| {
                b.iter(|| enumerate_optimum_with(black_box(inst), exec).unwrap())
            });
        }
    }
    g.finish();
}

fn cut_batch(c: &mut Criterion) {
    let inst = instance(30, 4, 2000);
    let singles = singles_set(&inst);
    let points: Vec<FracSolution> = (0..64)
        .map(|k| {
            let v = (0..inst.var_count()).map(|i| ((i * 7 + k * 13) % 10) as f64 / 9.0).collect();
            FracSolution::new(inst.facility_count(), inst.periods(), v).unwrap()
        })
        .collect();
    let mut g = c.benchmark_group("single_cut_batch");
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| {
                par::map(exec, &points, |x| {
                    single_cut(&inst, x, GammaVariant::B1, &singles, None).unwrap().constant
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, enumeration, cut_batch);
criterion_main!(benches);
