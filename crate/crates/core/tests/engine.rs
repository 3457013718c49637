// SPDX-License-Identifier: Apache-2.0

mod common;

use common::{cyclic_instance, linear_cells_hit, linear_instance, machine, rel, self_instance};
use mwjoin_core::datagen::HashPlan;
use mwjoin_core::engine::{run_cascaded_binary, run_cyclic3, run_linear3, run_star3, Engine, UnitOrder};
use mwjoin_core::oracle::{oracle_cyclic3, oracle_linear3};
use mwjoin_core::{Relation, Role, Strategy as JoinStrategy};
use proptest::prelude::*;

fn singleton(columns: [Role; 2], pair: (u32, u32)) -> Relation {
    Relation::from_pairs("x", columns, &[pair])
}

#[test]
fn singleton_chains() {
    let cfg = machine(64, 1 << 20);
    let r = singleton([Role::A, Role::B], (1, 2));
    let s = singleton([Role::B, Role::C], (2, 3));
    let t = singleton([Role::C, Role::D], (3, 4));

    let (agg, stats) = run_linear3(&r, &s, &t, &HashPlan::new(1, 1, 64, 1, 1), &cfg).unwrap();
    assert_eq!(agg.iter().collect::<Vec<_>>(), vec![(1, 1)]);
    assert_eq!(stats.dram_tuples_read, 3);

    let (agg, stats) = run_star3(&r, &s, &t, &HashPlan::new(1, 1, 8, 8, 1), &cfg).unwrap();
    assert_eq!(agg.iter().collect::<Vec<_>>(), vec![(1, 1)]);
    assert_eq!(stats.dram_tuples_read, 3);

    for star in [false, true] {
        let (agg, stats) = run_cascaded_binary(&r, &s, &t, &HashPlan::new(1, 1, 64, 64, 1), &cfg, star).unwrap();
        assert_eq!(agg.iter().collect::<Vec<_>>(), vec![(1, 1)]);
        assert_eq!(stats.intermediate_tuples, 1);
        assert!(!stats.spilled);
    }

    let tc = singleton([Role::C, Role::A], (3, 1));
    let (agg, _) = run_cyclic3(&r, &s, &tc, &HashPlan::new(1, 1, 8, 8, 1), &cfg).unwrap();
    assert_eq!(agg.iter().collect::<Vec<_>>(), vec![(1, 1)]);
}

#[test]
fn t_broadcast_counts_once_off_chip() {
    let cfg = machine(64, 1 << 20);
    let r = singleton([Role::A, Role::B], (1, 2));
    let s = singleton([Role::B, Role::C], (2, 3));
    let t = singleton([Role::C, Role::D], (3, 4));
    let (_, stats) = run_linear3(&r, &s, &t, &HashPlan::new(1, 1, 64, 1, 1), &cfg).unwrap();
    assert_eq!(stats.onchip_broadcasts, 1 + 1 + 64);
}

#[test]
fn linear_reads_match_small_formula() {
    // |R|=100, |S|=200, |T|=50, H_bkt=10: reads are 100 + 200 + 10 * 50.
    let cfg = machine(64, 1 << 20);
    let plan = HashPlan::new(10, 1, 64, 2, 1);
    let (r, s, t) = (0..)
        .map(|seed| linear_instance([100, 200, 50], 100_000, seed))
        .find(|(_, s, _)| linear_cells_hit(s, &plan))
        .unwrap();
    let (_, stats) = run_linear3(&r, &s, &t, &plan, &cfg).unwrap();
    assert_eq!(stats.dram_tuples_read, 800);
}

#[test]
fn cyclic_reads_are_n_plus_kn_plus_kn() {
    let cfg = machine(64, 1 << 20);
    let n = 3000;
    for k in [1u32, 2, 3] {
        let plan = HashPlan::new(k, k, 8, 8, 4);
        let (r, s, t) = cyclic_instance([n, n, n], 1 << 20, 7);
        assert!(common::cyclic_cells_hit(&s, &plan));
        let (agg, stats) = run_cyclic3(&r, &s, &t, &plan, &cfg).unwrap();
        assert_eq!(stats.dram_tuples_read, n + 2 * k as u64 * n);
        assert_eq!(agg, oracle_cyclic3(&r, &s, &t).unwrap());
    }
}

#[test]
fn star_reads_each_tuple_once() {
    let cfg = machine(64, 1 << 20);
    let (k, n) = (500u64, 20_000u64);
    let r = rel(k, 50, 3, [Role::A, Role::B]);
    let s = rel(n, 50, 3, [Role::B, Role::C]);
    let t = rel(k, 50, 3, [Role::C, Role::D]);
    let expect = oracle_linear3(&r, &s, &t).unwrap();
    for (h, g) in [(1, 64), (8, 8), (64, 1), (2, 32)] {
        let (agg, stats) = run_star3(&r, &s, &t, &HashPlan::new(1, 1, h, g, 1), &cfg).unwrap();
        assert_eq!(stats.dram_tuples_read, n + 2 * k);
        assert_eq!(agg, expect);
    }
}

#[test]
fn cascaded_intermediate_is_near_expectation() {
    let cfg = machine(64, 1 << 20);
    let (n, d) = (10_000u64, 100u64);
    let (r, s, t) = self_instance(n, d, 5);
    let (agg, stats) = run_cascaded_binary(&r, &s, &t, &HashPlan::new(1, 1, 64, 64, 1), &cfg, false).unwrap();
    let mean = (n * n / d) as f64;
    let sigma = n as f64 * ((d - 1) as f64).sqrt() / d as f64;
    assert!((stats.intermediate_tuples as f64 - mean).abs() <= 3.0 * sigma);
    assert_eq!(agg, oracle_linear3(&r, &s, &t).unwrap());
    assert_eq!(stats.dram_tuples_read, 3 * n + stats.intermediate_tuples);
}

#[test]
fn spill_flag_follows_dram_capacity() {
    let r = singleton([Role::A, Role::B], (1, 2));
    let s = Relation::from_pairs("S", [Role::B, Role::C], &[(2, 3), (2, 4)]);
    let t = singleton([Role::C, Role::D], (3, 4));
    let plan = HashPlan::new(1, 1, 64, 64, 1);
    let mut cfg = machine(64, 1 << 20);
    cfg.dram_capacity_bytes = 24;
    let (_, stats) = run_cascaded_binary(&r, &s, &t, &plan, &cfg, false).unwrap();
    assert!(!stats.spilled);
    cfg.dram_capacity_bytes = 23;
    let (_, stats) = run_cascaded_binary(&r, &s, &t, &plan, &cfg, false).unwrap();
    assert!(stats.spilled);
}

#[test]
fn infeasible_plans_are_reported() {
    let cfg = machine(64, 1024);
    let (r, s, t) = linear_instance([5000, 100, 100], 1000, 1);
    let low_h = HashPlan::new(2, 1, 64, 4, 1);
    assert!(run_linear3(&r, &s, &t, &low_h, &cfg).unwrap_err().is_infeasible());
    let wrong_h = HashPlan::new(8, 1, 32, 4, 1);
    assert!(run_linear3(&r, &s, &t, &wrong_h, &cfg).unwrap_err().is_infeasible());
    let star = HashPlan::new(1, 1, 8, 8, 1);
    assert!(run_star3(&r, &s, &t, &star, &cfg).unwrap_err().is_infeasible());
    let cyclic = HashPlan::new(1, 1, 8, 8, 1);
    let (cr, cs, ct) = cyclic_instance([5000, 10, 10], 1000, 1);
    assert!(run_cyclic3(&cr, &cs, &ct, &cyclic, &cfg).unwrap_err().is_infeasible());
    assert!(run_cyclic3(&cr, &cs, &ct, &cyclic, &machine(48, 1 << 16)).unwrap_err().is_infeasible());
    // Role mismatch is not an infeasibility.
    let err = run_linear3(&s, &r, &t, &HashPlan::new(1, 1, 64, 1, 1), &machine(64, 1 << 20)).unwrap_err();
    assert!(!err.is_infeasible());
}

#[test]
fn per_unit_capacity_is_enforced() {
    // Nominal H_bkt is enough but every tuple lands on one PMU.
    let cfg = machine(64, 64 * 4);
    let pairs: Vec<(u32, u32)> = (0..10).map(|a| (a, 7)).collect();
    let r = Relation::from_pairs("R", [Role::A, Role::B], &pairs);
    let s = singleton([Role::B, Role::C], (7, 1));
    let t = singleton([Role::C, Role::D], (1, 1));
    let err = run_linear3(&r, &s, &t, &HashPlan::new(1, 1, 64, 1, 1), &cfg).unwrap_err();
    assert!(err.is_infeasible());
}

fn engine_results(order: UnitOrder, strategy: JoinStrategy, rst: &(Relation, Relation, Relation), plan: &HashPlan) -> String {
    let cfg = machine(64, 1 << 20);
    let out = Engine::new(&cfg).with_order(order).run(strategy, &rst.0, &rst.1, &rst.2, plan).unwrap();
    format!("{out:?}")
}

#[test]
fn schedule_does_not_change_results() {
    let lin = linear_instance([2000, 2000, 2000], 40, 9);
    let cyc = cyclic_instance([1500, 1500, 1500], 40, 9);
    let cases = [
        (JoinStrategy::Linear3, &lin, HashPlan::new(4, 1, 64, 8, 1)),
        (JoinStrategy::Star3, &lin, HashPlan::new(1, 1, 8, 8, 1)),
        (JoinStrategy::Cascaded, &lin, HashPlan::new(2, 3, 64, 64, 1)),
        (JoinStrategy::CascadedStar, &lin, HashPlan::new(1, 1, 64, 64, 1)),
        (JoinStrategy::Cyclic3, &cyc, HashPlan::new(2, 2, 8, 8, 5)),
    ];
    for (strategy, rst, plan) in cases {
        let base = engine_results(UnitOrder::Forward, strategy, rst, &plan);
        assert_eq!(base, engine_results(UnitOrder::Reverse, strategy, rst, &plan));
        for seed in 0..3 {
            assert_eq!(base, engine_results(UnitOrder::Shuffled(seed), strategy, rst, &plan));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn linear_matches_oracle(n in 1u64..3000, d in 4u64..=64, seed in any::<u64>(), h in 1u32..6, g in 1u32..40) {
        let (r, s, t) = linear_instance([n, n, n], d, seed);
        let (agg, _) = run_linear3(&r, &s, &t, &HashPlan::new(h, 1, 64, g, 1), &machine(64, 1 << 20)).unwrap();
        prop_assert_eq!(agg, oracle_linear3(&r, &s, &t).unwrap());
    }

    #[test]
    fn cyclic_matches_oracle(n in 1u64..2000, d in 4u64..=64, seed in any::<u64>(), h in 1u32..4, g in 1u32..4, f in 1u32..40) {
        let (r, s, t) = cyclic_instance([n, n, n], d, seed);
        let (agg, _) = run_cyclic3(&r, &s, &t, &HashPlan::new(h, g, 8, 8, f), &machine(64, 1 << 20)).unwrap();
        prop_assert_eq!(agg, oracle_cyclic3(&r, &s, &t).unwrap());
    }

    #[test]
    fn cascaded_matches_oracle(n in 1u64..2000, d in 4u64..=64, seed in any::<u64>(), h in 1u32..5, g in 1u32..5, star in any::<bool>()) {
        let (r, s, t) = linear_instance([n, n, n], d, seed);
        let (agg, stats) = run_cascaded_binary(&r, &s, &t, &HashPlan::new(h, g, 64, 64, 1), &machine(64, 1 << 20), star).unwrap();
        prop_assert_eq!(stats.dram_tuples_read, 3 * n + stats.intermediate_tuples);
        prop_assert_eq!(agg, oracle_linear3(&r, &s, &t).unwrap());
    }

    #[test]
    fn results_are_plan_invariant(n in 1u64..1500, d in 4u64..=64, seed in any::<u64>(), h in 1u32..5, g in 1u32..50) {
        let cfg = machine(64, 1 << 20);
        let (r, s, t) = linear_instance([n, n, n], d, seed);
        let base = run_linear3(&r, &s, &t, &HashPlan::new(1, 1, 64, 1, 1), &cfg).unwrap().0;
        prop_assert_eq!(&run_linear3(&r, &s, &t, &HashPlan::new(h, 1, 64, g, 1), &cfg).unwrap().0, &base);
        prop_assert_eq!(&run_star3(&r, &s, &t, &HashPlan::new(1, 1, 4, 16, 1), &cfg).unwrap().0, &base);
        prop_assert_eq!(&run_cascaded_binary(&r, &s, &t, &HashPlan::new(h, g, 64, 64, 1), &cfg, false).unwrap().0, &base);
        let (cr, cs, ct) = cyclic_instance([n, n, n], d, seed);
        let cyc = run_cyclic3(&cr, &cs, &ct, &HashPlan::new(1, 1, 8, 8, 1), &cfg).unwrap().0;
        prop_assert_eq!(run_cyclic3(&cr, &cs, &ct, &HashPlan::new(h, 2, 8, 8, g), &cfg).unwrap().0, cyc);
    }

    #[test]
    fn linear_reads_bounded_by_formula(n in 1u64..2000, d in 4u64..=256, seed in any::<u64>(), h in 1u32..6, g in 1u32..64) {
        let (r, s, t) = linear_instance([n, n, n], d, seed);
        let (_, stats) = run_linear3(&r, &s, &t, &HashPlan::new(h, 1, 64, g, 1), &machine(64, 1 << 20)).unwrap();
        prop_assert!(stats.dram_tuples_read <= 2 * n + h as u64 * n);
        prop_assert!(stats.dram_tuples_read >= 2 * n);
    }
}
