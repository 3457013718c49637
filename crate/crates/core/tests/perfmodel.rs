// SPDX-License-Identifier: Apache-2.0

use mwjoin_core::datagen::HashPlan;
use mwjoin_core::machine::{default_config, MachineConfig};
use mwjoin_core::perfmodel::{
    build_loop_tree, compare_strategies, cyclic_cost, cyclic_min_cost, estimate, evaluate_runtime, optimal_h,
    tuples_read_linear, Body, Construct, CostInputs, Direction, Leaf, LoopNode, Pairing,
};
use mwjoin_core::Strategy as JoinStrategy;
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 200,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

/// Tiny machine with round constants for hand-evaluated trees: 1 byte per
/// cycle, 10-cycle DRAM latency, 5-cycle compute latency, 1-byte granule.
fn hand_machine() -> MachineConfig {
    MachineConfig {
        units: 2,
        lanes: 2,
        dram_bw: 1e9,
        ssd_bw: 1e8,
        clock_hz: 1e9,
        net_latency_cycles: 3,
        pcu_latency_cycles: 2,
        dram_latency_ns: 10.0,
        dram_granule_bytes: 1,
        double_buffered: false,
        ..default_config()
    }
}

#[test]
fn cascaded_self_tree_by_hand() {
    // |R| = |S| = |T| = 8, |I| = 4, H = G = 2, h = g = U = 2.
    // partition: 8 streams of 64,64,64,64,64,64,48,48 bytes, combined
    //   DRAM time 480 plus 8 latencies of 10 -> 560.
    // join1, per R partition: load_R 32 + 10; the S stream (32 B), the
    //   I store (24 B) and a 2x2 compare on each PMU overlap, bounded by
    //   DRAM 56, plus latencies 10 + 5 + 10 -> 42 + 81 = 123, twice -> 246.
    // join2, per T partition: load_T 42; stream_RS 24 B vs a 1x2 compare,
    //   24 + 10 + 5 -> 42 + 39 = 81, twice -> 162.
    let cfg = hand_machine();
    let shape = CostInputs::new(8.0, 8.0, 8.0, 4.0, 16.0).with_intermediate(4.0);
    let plan = HashPlan::new(2, 2, 2, 2, 1);
    let tree = build_loop_tree(JoinStrategy::Cascaded, &shape, &plan, &cfg).unwrap();
    let est = evaluate_runtime(&tree, &cfg).unwrap();
    assert_eq!(est.breakdown.partition, 560.0);
    assert_eq!(est.breakdown.join1, 246.0);
    assert_eq!(est.breakdown.join2, 162.0);
    assert_eq!(est.cycles, 968.0);
    assert_eq!(est.seconds, 968e-9);
    assert_eq!(tree.dram_tuple_volume(), 8.0 * 3.0 + 4.0);
}

#[test]
fn linear_tree_volume_and_ops() {
    let cfg = default_config();
    let (r, s, t, d) = (4e6, 3e6, 5e6, 1e5);
    let shape = CostInputs::new(r, s, t, 1e6, d);
    let plan = HashPlan::new(4, 1, 64, 512, 1);
    let tree = build_loop_tree(JoinStrategy::Linear3, &shape, &plan, &cfg).unwrap();
    let volume = tree.dram_tuple_volume();
    assert!((volume - (r + s + 4.0 * t)).abs() < 1e-6);
    // S against each streamed T bucket, then every S-T hit against local R.
    let ops = s * t / 512.0 + r * s * t / (d * 4.0 * 64.0);
    assert!((tree.total_ops() - ops).abs() <= 1e-9 * ops);
}

#[test]
fn star_tree_volume_and_ops() {
    let cfg = default_config();
    let (r, s, t, d) = (1e5, 5e7, 2e5, 1e4);
    let shape = CostInputs::new(r, s, t, 1e6, d);
    let tree = build_loop_tree(JoinStrategy::Star3, &shape, &HashPlan::new(1, 1, 4, 16, 1), &cfg).unwrap();
    assert!((tree.dram_tuple_volume() - (r + s + t)).abs() < 1e-6);
    let ops = r * s / 4.0 + (r * s / d) * t / 16.0;
    assert!((tree.total_ops() - ops).abs() <= 1e-9 * ops);
}

#[test]
fn no_step_without_storage_penalty() {
    let mut cfg = default_config();
    cfg.ssd_bw = cfg.dram_bw;
    let d = 1e6;
    let mut prev: Option<f64> = None;
    let mut n = 1.2e8;
    while n < 1.8e8 {
        let shape = CostInputs::new(n, n, n, 1.0, d);
        let plan3 = HashPlan::new(1024, 1, 64, 4096, 1);
        let plan2 = HashPlan::new(256, 256, 64, 64, 1);
        let cmp = compare_strategies(Pairing::SelfLinear, &shape, &plan3, &plan2, &cfg).unwrap();
        if let Some(p) = prev {
            assert!((cmp.speedup / p - 1.0).abs() < 0.05, "jump at N = {n}");
        }
        prev = Some(cmp.speedup);
        n *= 1.01;
    }
}

#[test]
fn spill_produces_upward_step() {
    let cfg = default_config();
    let d = 1e6;
    let plan3 = HashPlan::new(1024, 1, 64, 4096, 1);
    let plan2 = HashPlan::new(256, 256, 64, 64, 1);
    let at = |n: f64| compare_strategies(Pairing::SelfLinear, &CostInputs::new(n, n, n, 1.0, d), &plan3, &plan2, &cfg).unwrap();
    let crossing = (cfg.dram_capacity_bytes as f64 / 12.0 * d).sqrt();
    let (below, above) = (at(crossing * 0.999), at(crossing * 1.001));
    assert!(!below.spilled && above.spilled);
    assert!(above.speedup > 2.0 * below.speedup);
}

#[test]
fn infeasible_plans_rejected() {
    let cfg = default_config();
    let shape = CostInputs::new(1e8, 1e8, 1e8, 1.0, 1e6);
    let err = estimate(JoinStrategy::Linear3, &shape, &HashPlan::new(2, 1, 64, 64, 1), &cfg).unwrap_err();
    assert!(err.is_infeasible());
}

fn leaf_tree(trips: [f64; 3], costs: [f64; 3], p: f64, par: f64, spill: bool) -> LoopNode {
    LoopNode::new(
        "root",
        1.0,
        Construct::Sequential,
        vec![
            LoopNode::new(
                "outer",
                trips[0],
                Construct::Pipeline,
                vec![
                    LoopNode::dram("load", costs[0], 8, Direction::Read, spill),
                    LoopNode::new(
                        "inner",
                        trips[1],
                        Construct::Streaming,
                        vec![
                            LoopNode::dram("stream", costs[1], 8, Direction::Read, false),
                            LoopNode::leaf("comp", trips[2], Construct::Parallel(par), Leaf::Compute { ops: costs[2] })
                                .with_prob(p),
                        ],
                    ),
                ],
            ),
            LoopNode::leaf("tail", trips[2], Construct::Sequential, Leaf::Cycles { cycles: costs[2] }),
        ],
    )
}

fn cycles(tree: &LoopNode, cfg: &MachineConfig) -> f64 {
    evaluate_runtime(tree, cfg).unwrap().cycles
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn linear_rereads_symmetric_in_r_and_t(r in 0.0f64..1e12, s in 0.0f64..1e12, t in 0.0f64..1e12, m in 1.0f64..1e9) {
        // The T re-read term is symmetric; the single pass over R is not, so
        // the smaller relation should play R.
        let a = tuples_read_linear(&CostInputs::new(r, s, t, m, 1.0)).unwrap();
        let b = tuples_read_linear(&CostInputs::new(t, s, r, m, 1.0)).unwrap();
        let tol = 1e-12 * a.max(b).max(1.0);
        prop_assert!(((a - r - s) - (b - t - s)).abs() <= tol);
        prop_assert!((a - b - (r - t)).abs() <= tol);
        if r <= t {
            prop_assert!(a <= b + tol);
        }
    }

    #[test]
    fn cyclic_min_symmetric_and_smallest_r(x in 1.0f64..1e12, y in 1.0f64..1e12, z in 1.0f64..1e12, m in 1.0f64..1e9) {
        let f = |r, s, t| cyclic_min_cost(&CostInputs::new(r, s, t, m, 1.0)).unwrap();
        let base = f(x, y, z);
        prop_assert!((base - f(x, z, y)).abs() <= 1e-12 * base);
        let mut sizes = [x, y, z];
        sizes.sort_by(f64::total_cmp);
        let best = f(sizes[0], sizes[1], sizes[2]);
        for (r, s, t) in [(x, y, z), (y, x, z), (z, x, y)] {
            prop_assert!(best <= f(r, s, t) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn optimal_h_is_stationary(r in 1.0f64..1e12, s in 1.0f64..1e12, t in 1.0f64..1e12, m in 1.0f64..1e9, eps in 1e-4f64..0.5) {
        let inp = CostInputs::new(r, s, t, m, 1.0);
        let h = optimal_h(&inp).unwrap();
        let at = |h: f64| cyclic_cost(&inp.with_buckets(h, 1.0)).unwrap();
        let c = at(h);
        prop_assert!(at(h * (1.0 + eps)) >= c * (1.0 - 1e-12));
        prop_assert!(at(h * (1.0 - eps)) >= c * (1.0 - 1e-12));
        prop_assert!((c - cyclic_min_cost(&inp).unwrap()).abs() <= 1e-9 * c);
    }

    #[test]
    fn runtime_monotone_in_trips_and_costs(
        trips in prop::array::uniform3(0.0f64..1e4),
        costs in prop::array::uniform3(0.0f64..1e4),
        p in 0.0f64..=1.0,
        par in 1.0f64..64.0,
        which in 0usize..6,
        grow in 1.0f64..4.0,
        spill in any::<bool>(),
    ) {
        let cfg = default_config();
        let base = cycles(&leaf_tree(trips, costs, p, par, spill), &cfg);
        let (mut t2, mut c2) = (trips, costs);
        if which < 3 { t2[which] *= grow } else { c2[which - 3] *= grow }
        let bigger = cycles(&leaf_tree(t2, c2, p, par, spill), &cfg);
        prop_assert!(bigger >= base * (1.0 - 1e-12), "{bigger} < {base}");
        let p2 = (p * grow).min(1.0);
        prop_assert!(cycles(&leaf_tree(trips, costs, p2, par, spill), &cfg) >= base * (1.0 - 1e-12));
    }

    #[test]
    fn runtime_non_increasing_in_bandwidth(
        trips in prop::array::uniform3(0.0f64..1e4),
        costs in prop::array::uniform3(0.0f64..1e4),
        bw in 1e9f64..1e11,
        grow in 1.0f64..10.0,
    ) {
        let mut cfg = default_config();
        cfg.dram_bw = bw;
        let tree = leaf_tree(trips, costs, 0.5, 16.0, false);
        let slow = cycles(&tree, &cfg);
        cfg.dram_bw = bw * grow;
        prop_assert!(cycles(&tree, &cfg) <= slow * (1.0 + 1e-12));
    }

    #[test]
    fn built_trees_monotone_in_bandwidth(n in 1e6f64..1e9, d in 1e3f64..1e8, which in 0usize..4, grow in 1.0f64..8.0) {
        let strategy = [JoinStrategy::Linear3, JoinStrategy::Cascaded, JoinStrategy::Star3, JoinStrategy::CascadedStar][which];
        let mut cfg = default_config();
        let small = 4e5;
        let (r, t) = if which >= 2 { (small, small) } else { (n, n) };
        let shape = CostInputs::new(r, n, t, 1.0, d);
        let plan = mwjoin_core::perfmodel::default_plan(strategy, &shape, &cfg).unwrap();
        let tree = build_loop_tree(strategy, &shape, &plan, &cfg).unwrap();
        let slow = cycles(&tree, &cfg);
        cfg.dram_bw *= grow;
        let tree = build_loop_tree(strategy, &shape, &plan, &cfg).unwrap();
        prop_assert!(cycles(&tree, &cfg) <= slow * (1.0 + 1e-12));
    }

    #[test]
    fn breakdown_sums_to_cycles(n in 1e5f64..1e9, d in 1e2f64..1e8, intermediate in prop::option::of(0.0f64..1e12)) {
        let cfg = default_config();
        let mut shape = CostInputs::new(n, n, n, 1.0, d);
        shape.intermediate = intermediate;
        for strategy in [JoinStrategy::Linear3, JoinStrategy::Cascaded] {
            let plan = mwjoin_core::perfmodel::default_plan(strategy, &shape, &cfg).unwrap();
            let est = evaluate_runtime(&build_loop_tree(strategy, &shape, &plan, &cfg).unwrap(), &cfg).unwrap();
            prop_assert!((est.breakdown.total() - est.cycles).abs() <= 1e-9 * est.cycles);
            prop_assert!((est.seconds - est.cycles / cfg.clock_hz).abs() <= 1e-12 * est.seconds.max(1.0));
        }
    }
}

#[test]
fn leaf_body_kinds_are_visible() {
    let tree = leaf_tree([2.0, 3.0, 4.0], [1.0, 1.0, 1.0], 0.5, 2.0, false);
    let mut leaves = 0;
    tree.visit(&mut |node, _| leaves += matches!(node.body, Body::Leaf(_)) as usize);
    assert_eq!(leaves, 4);
    assert_eq!(tree.total_ops(), 2.0 * 3.0 * 4.0 * 0.5);
}
