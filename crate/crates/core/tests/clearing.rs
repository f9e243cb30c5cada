mod common;

use kidney_exchange::clearing::{brute_force_clear, solve_max_cardinality, solve_weighted_with_floor, WeightedCycleSet};
use kidney_exchange::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    raw: Vec<Vec<u64>>,
    weights: Vec<f64>,
    set: WeightedCycleSet,
}

fn instance(seed: u64, n: usize, max_len: usize, density: f64, integer_weights: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let adj = common::random_digraph(&mut rng, n, density);
    let raw = common::cycles_by_permutation(&adj, max_len);
    let weights: Vec<f64> = raw
        .iter()
        .map(|_| if integer_weights { rng.random_range(0..3) as f64 } else { rng.random::<f64>() * 4.0 - 1.0 })
        .collect();
    let set = WeightedCycleSet::from_cycle_weights(common::to_cycles(&raw), weights.clone()).unwrap();
    Instance { raw, weights, set }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn branch_and_bound_matches_exhaustive_search(
        seed in any::<u64>(), n in 2usize..=7, max_len in 2usize..=3, density in 0.1f64..0.9, ints in any::<bool>()
    ) {
        let inst = instance(seed, n, max_len, density, ints);
        let (max_card, q) = solve_max_cardinality(&inst.set, seed);
        let oracle = common::exhaustive_packings(&inst.raw, &inst.weights, q);
        prop_assert_eq!(q, oracle.max_cardinality);
        prop_assert_eq!(max_card.cardinality, q);
        prop_assert!(max_card.is_disjoint());

        let m = solve_weighted_with_floor(&inst.set, q, seed).unwrap();
        prop_assert!(m.is_disjoint());
        prop_assert_eq!(m.cardinality, q);
        prop_assert!((m.total_weight - oracle.best_weight.unwrap_or(0.0)).abs() < 1e-9);

        // below the maximum the floor may admit heavier, smaller matchings
        for floor in 0..=q {
            let oracle = common::exhaustive_packings(&inst.raw, &inst.weights, floor);
            let m = solve_weighted_with_floor(&inst.set, floor, seed).unwrap();
            prop_assert!(m.cardinality >= floor);
            prop_assert!((m.total_weight - oracle.best_weight.unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn brute_force_agrees_on_small_sets(seed in any::<u64>(), n in 2usize..=5, density in 0.1f64..0.8) {
        let inst = instance(seed, n, 3, density, false);
        prop_assume!(inst.set.len() <= 20);
        let (_, q) = solve_max_cardinality(&inst.set, seed);
        let b = brute_force_clear(&inst.set, q).unwrap();
        let m = solve_weighted_with_floor(&inst.set, q, seed).unwrap();
        prop_assert!((b.total_weight - m.total_weight).abs() < 1e-9);
        prop_assert_eq!(b.cardinality, q);
    }

    #[test]
    fn tie_seed_does_not_change_the_optimum(seed in any::<u64>(), other in any::<u64>(), n in 3usize..=7) {
        let inst = instance(seed, n, 3, 0.6, true);
        let (_, q) = solve_max_cardinality(&inst.set, seed);
        let a = solve_weighted_with_floor(&inst.set, q, seed).unwrap();
        let b = solve_weighted_with_floor(&inst.set, q, other).unwrap();
        prop_assert_eq!(a.total_weight, b.total_weight);
        prop_assert_eq!(a.cardinality, b.cardinality);
    }
}

#[test]
fn unreachable_floor_is_an_error() {
    let inst = instance(3, 6, 3, 0.5, false);
    let (_, q) = solve_max_cardinality(&inst.set, 0);
    match solve_weighted_with_floor(&inst.set, q + 1, 0) {
        Err(Error::Infeasible { floor, best }) => assert_eq!((floor, best), (q + 1, q)),
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn daily_size_pools_clear() {
    // fresh 30-pair pools, a few hundred cycles each
    let start = std::time::Instant::now();
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (graph, _) = common::random_pool(&mut rng, 30, seed, |_| nalgebra::Vector3::zeros());
        let cycles = graph.enumerate_cycles(3);
        let set = WeightedCycleSet::new(cycles, |u, v| ((u * 7 + v * 3) % 5) as f64 / 4.0);
        let (_, q) = solve_max_cardinality(&set, seed);
        let m = solve_weighted_with_floor(&set, q, seed).unwrap();
        assert_eq!(m.cardinality, q);
        assert!(m.is_disjoint());
    }
    assert!(start.elapsed().as_secs() < 120);
}
