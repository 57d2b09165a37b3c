use ims_core::dataset::generate_cascade;
use ims_core::graph::random_graph;
use ims_core::inference::{collect_stats_slice, OneStepStats};
use ims_core::influence::{greedy_on_pool, WorldPool};
use ims_core::oracle::{exact_sigma_by_process, LiveEdgeTable, OracleLimits};
use ims_core::{Graph, Model, SeedDistribution};
use proptest::prelude::*;

fn model() -> impl Strategy<Value = Model> {
    prop_oneof![Just(Model::Ic), Just(Model::Lt)]
}

prop_compose! {
    fn small_graph(max_n: usize)(n in 2..=max_n, density in 0.1f64..0.6, m in model(), seed in any::<u64>()) -> Graph {
        random_graph(n, density, (0.05, 1.0), m, seed).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cascades_partition_the_final_set(g in small_graph(9), q in 0.0f64..=1.0, seed in any::<u64>(), idx in 0u64..1000) {
        let dist = SeedDistribution::uniform(g.n(), q).unwrap();
        let c = generate_cascade(&g, &dist, seed, idx).unwrap();
        let mut seen = vec![false; g.n()];
        for step in c.deltas() {
            for &v in step {
                prop_assert!(!seen[v]);
                seen[v] = true;
            }
        }
        prop_assert_eq!(c.final_size(), seen.iter().filter(|&&s| s).count());
        // Every activation after the seeds has an active in-neighbor one step earlier.
        for (tau, step) in c.deltas().iter().enumerate().skip(1) {
            let before = c.deltas()[tau - 1].clone();
            for &v in step {
                prop_assert!(before.iter().any(|&u| g.param(u, v) > 0.0));
            }
        }
    }

    #[test]
    fn stats_merge_matches_single_pass(g in small_graph(7), seed in any::<u64>(), split in 1usize..60) {
        let dist = SeedDistribution::uniform(g.n(), 0.3).unwrap();
        let cascades: Vec<_> = (0..60).map(|i| generate_cascade(&g, &dist, seed, i).unwrap()).collect();
        let whole = collect_stats_slice(g.n(), &cascades).unwrap();
        let mut left = OneStepStats::empty(g.n());
        cascades[..split].iter().for_each(|c| left.add(c));
        let right = collect_stats_slice(g.n(), &cascades[split..]).unwrap();
        prop_assert_eq!(left.merge(&right), whole);
    }

    #[test]
    fn live_edge_table_matches_process_recursion(g in small_graph(6), mask in any::<u64>()) {
        let limits = OracleLimits::default();
        prop_assume!(LiveEdgeTable::build(&g, &limits).is_ok());
        let seeds: Vec<usize> = (0..g.n()).filter(|&v| mask >> v & 1 == 1).collect();
        let table = LiveEdgeTable::build(&g, &limits).unwrap();
        let by_process = exact_sigma_by_process(&g, &seeds, &limits).unwrap();
        prop_assert!((table.sigma(&seeds) - by_process).abs() < 1e-9);
    }

    #[test]
    fn greedy_gains_shrink_and_sum_to_spread(g in small_graph(10), seed in any::<u64>(), k in 1usize..5) {
        let pool = WorldPool::sample(&g, 300, seed).unwrap();
        let k = k.min(g.n());
        let trace = greedy_on_pool(&pool, k).unwrap();
        prop_assert_eq!(trace.order.len(), k);
        for w in trace.marginal_gains.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
        let total: f64 = trace.marginal_gains.iter().sum();
        prop_assert!((total - pool.spread(&trace.order)).abs() < 1e-9);
        prop_assert!((trace.estimated_spread - total).abs() < 1e-9);
    }
}
