//! Seeded random instances shared by the integration suites.
#![allow(dead_code)]

use dyncover::io::{generate_instance, DomainTemplate, GeneratorParams};
use dyncover::model::Instance;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// `T <= 3`, `|I| <= 8`, `|J| <= 40`; cardinality and ev-style domains
/// alternate with the seed.
pub fn small_instance(seed: u64) -> Instance {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed ^ 0x5eed);
    let periods = rng.random_range(1..=3);
    let facilities = rng.random_range(3..=8);
    let domain = if seed % 2 == 0 {
        DomainTemplate::Cardinality {
            limit: rng.random_range(1..=3),
        }
    } else {
        DomainTemplate::EvStyle {
            budget: rng.random_range(2..=4) as f64,
        }
    };
    generate_instance(&GeneratorParams {
        seed,
        periods,
        facilities,
        users: rng.random_range(10..=40),
        radius: rng.random_range(0.2..0.45),
        demand_low: 1.0,
        demand_high: 10.0,
        growth: 1.1,
        domain,
    })
    .expect("valid parameters")
}

/// At most 10 binaries.
pub fn tiny_instance(seed: u64) -> Instance {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed ^ 0x717);
    let periods = rng.random_range(1..=2);
    let facilities = rng.random_range(2..=10 / periods);
    let domain = match seed % 3 {
        0 => DomainTemplate::Cardinality {
            limit: rng.random_range(1..=3),
        },
        1 => DomainTemplate::Knapsack,
        _ => DomainTemplate::EvStyle { budget: 3.0 },
    };
    generate_instance(&GeneratorParams {
        seed,
        periods,
        facilities,
        users: rng.random_range(4..=15),
        radius: rng.random_range(0.25..0.6),
        demand_low: 1.0,
        demand_high: 10.0,
        growth: 1.2,
        domain,
    })
    .expect("valid parameters")
}

/// `T = 3`, `|I| = 7`, a few hundred users: large enough that restricted
/// subproblems take measurable time, small enough to enumerate.
pub fn neighborhood_instance(seed: u64) -> Instance {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed ^ 0xb10c);
    let domain = if seed % 2 == 0 {
        DomainTemplate::Cardinality {
            limit: rng.random_range(2..=4),
        }
    } else {
        DomainTemplate::EvStyle {
            budget: rng.random_range(3..=5) as f64,
        }
    };
    generate_instance(&GeneratorParams {
        seed,
        periods: 3,
        facilities: 7,
        users: rng.random_range(150..=300),
        radius: rng.random_range(0.2..0.35),
        demand_low: 1.0,
        demand_high: 10.0,
        growth: 1.1,
        domain,
    })
    .expect("valid parameters")
}
