// SPDX-License-Identifier: Apache-2.0

use alloc::format;

use hashbrown::HashMap;

use super::{require, require_fine_buckets_equal_units, Engine, PmuState, RunStats};
use crate::datagen::{partition_by, two_level_partition_s, HashLevel, HashPlan};
use crate::error::Result;
use crate::oracle::JoinAggregate;
use crate::relation::{Relation, Role};

/// Linear 3-way join: for each `R_i` resident on chip (by `h(b)`), every
/// non-empty `S_ij` is loaded by `h(b)` and `T_j` broadcast to all PMUs.
pub(super) fn run(eng: &Engine<'_>, r: &Relation, s: &Relation, t: &Relation, plan: &HashPlan) -> Result<(JoinAggregate, RunStats)> {
    r.expect_roles([Role::A, Role::B])?;
    s.expect_roles([Role::B, Role::C])?;
    t.expect_roles([Role::C, Role::D])?;
    let cfg = eng.config();
    require_fine_buckets_equal_units(plan, cfg.units, "linear join")?;
    let need = eng.min_partitions(r.size())?;
    require(plan.coarse_h as u64 >= need, || {
        format!("H_bkt = {} but |R| = {} needs at least {need} partitions", plan.coarse_h, r.size())
    })?;

    let r_parts = partition_by(r, Role::B, plan.bucket_fn(HashLevel::CoarseH))?;
    let s_cells = two_level_partition_s(s, plan)?;
    let t_parts = partition_by(t, Role::C, plan.bucket_fn(HashLevel::FineG))?;
    let route = plan.bucket_fn(HashLevel::FineH);
    let units = cfg.units as u64;
    let order = eng.unit_order(cfg.units as usize);

    let mut grid = eng.grid();
    let mut stats = RunStats::default();
    let mut agg = JoinAggregate::new();
    let mut t_count: HashMap<u32, u64> = HashMap::new();
    let mut weights: HashMap<u32, u64> = HashMap::new();

    for (r_i, s_row) in r_parts.iter().zip(&s_cells) {
        grid.clear();
        for &tup in &r_i.tuples {
            grid.store_r(route.bucket(tup.key2), tup)?;
        }
        stats.dram_tuples_read += r_i.size() as u64;
        stats.onchip_broadcasts += r_i.size() as u64;

        for (s_ij, t_j) in s_row.iter().zip(&t_parts) {
            stats.dram_tuples_read += s_ij.size() as u64;
            stats.onchip_broadcasts += s_ij.size() as u64;
            if s_ij.is_empty() {
                continue;
            }
            grid.clear_s();
            for &tup in &s_ij.tuples {
                grid.store_s(route.bucket(tup.key1), tup)?;
            }
            stats.dram_tuples_read += t_j.size() as u64;
            stats.onchip_broadcasts += t_j.size() as u64 * units;

            t_count.clear();
            for tup in &t_j.tuples {
                *t_count.entry(tup.key1).or_insert(0) += 1;
            }
            for &p in &order {
                join_unit(&grid.units[p], &t_count, t_j.size() as u64, &mut weights, &mut agg, &mut stats);
            }
        }
    }
    Ok((agg, stats))
}

/// `R_p ⋈ S_p ⋈ T_j` on one PMU. T arrives as a value histogram.
fn join_unit(
    pmu: &PmuState,
    t_count: &HashMap<u32, u64>,
    t_len: u64,
    weights: &mut HashMap<u32, u64>,
    agg: &mut JoinAggregate,
    stats: &mut RunStats,
) {
    if pmu.stored_s.is_empty() {
        return;
    }
    weights.clear();
    let mut st_matches = 0u64;
    for s in &pmu.stored_s {
        stats.hash_probes += 1;
        if let Some(&w) = t_count.get(&s.key2) {
            *weights.entry(s.key1).or_insert(0) += w;
            st_matches += w;
        }
    }
    // Each streamed t is compared with every local s; each (s, t) hit is
    // then compared with every local r.
    stats.comparisons += pmu.stored_s.len() as u64 * t_len + st_matches * pmu.stored_r.len() as u64;
    if weights.is_empty() {
        return;
    }
    for r in &pmu.stored_r {
        stats.hash_probes += 1;
        if let Some(&w) = weights.get(&r.key2) {
            agg.add(r.key1, w);
        }
    }
}
