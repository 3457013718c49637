// SPDX-License-Identifier: Apache-2.0

use alloc::format;
use alloc::vec::Vec;

use hashbrown::HashMap;

use super::{require, Engine, RunStats};
use crate::datagen::{partition_by, BucketFn, HashLevel, HashPlan};
use crate::error::Result;
use crate::oracle::JoinAggregate;
use crate::relation::{Relation, Role, WIDE_TUPLE_BYTES};

/// One `I(ABC)` tuple.
#[derive(Debug, Clone, Copy)]
struct Wide {
    a: u32,
    c: u32,
}

/// Two binary hash joins: `I = R ⋈_B S` is written to DRAM, then `I ⋈_C T`.
///
/// With `star` both joins run unpartitioned (`H_bkt = G_bkt = 1`), so R and
/// T must each fit on chip.
pub(super) fn run(
    eng: &Engine<'_>,
    r: &Relation,
    s: &Relation,
    t: &Relation,
    plan: &HashPlan,
    star: bool,
) -> Result<(JoinAggregate, RunStats)> {
    r.expect_roles([Role::A, Role::B])?;
    s.expect_roles([Role::B, Role::C])?;
    t.expect_roles([Role::C, Role::D])?;
    let cfg = eng.config();
    let units = cfg.units;
    require(plan.fine_h == units && plan.fine_g == units, || {
        format!(
            "cascaded join needs h_bkt = g_bkt = U = {units}, plan has {} and {}",
            plan.fine_h, plan.fine_g
        )
    })?;
    let (big_h, big_g) = if star { (1, 1) } else { (plan.coarse_h, plan.coarse_g) };
    let need_h = eng.min_partitions(r.size())?;
    let need_g = eng.min_partitions(t.size())?;
    require(big_h as u64 >= need_h && big_g as u64 >= need_g, || {
        format!(
            "cascaded join uses H_bkt = {big_h}, G_bkt = {big_g} but needs at least {need_h} and {need_g}"
        )
    })?;
    let part_h = BucketFn::new(plan.salt(HashLevel::CoarseH), big_h);
    let part_g = BucketFn::new(plan.salt(HashLevel::CoarseG), big_g);
    let route_h = plan.bucket_fn(HashLevel::FineH);
    let route_g = plan.bucket_fn(HashLevel::FineG);
    let order = eng.unit_order(units as usize);

    let mut grid = eng.grid();
    let mut stats = RunStats::default();
    let mut streamed: Vec<Vec<(u32, u32)>> = (0..grid.len()).map(|_| Vec::new()).collect();
    let mut index: HashMap<u32, Vec<u32>> = HashMap::new();

    // Join 1 over B.
    let r_parts = partition_by(r, Role::B, part_h)?;
    let s_parts = partition_by(s, Role::B, part_h)?;
    let mut inter: Vec<Vec<Wide>> = (0..big_g as usize).map(|_| Vec::new()).collect();
    let mut inter_len = 0u64;
    for (r_i, s_i) in r_parts.iter().zip(&s_parts) {
        stats.dram_tuples_read += (r_i.size() + s_i.size()) as u64;
        if s_i.is_empty() {
            continue;
        }
        grid.clear();
        for &tup in &r_i.tuples {
            grid.store_r(route_h.bucket(tup.key2), tup)?;
        }
        stats.onchip_broadcasts += (r_i.size() + s_i.size()) as u64;
        streamed.iter_mut().for_each(Vec::clear);
        for tup in &s_i.tuples {
            streamed[route_h.bucket(tup.key1)].push((tup.key1, tup.key2));
        }
        for &p in &order {
            let (pmu, s_p) = (&grid.units[p], &streamed[p]);
            if s_p.is_empty() {
                continue;
            }
            index.clear();
            for r in &pmu.stored_r {
                index.entry(r.key2).or_default().push(r.key1);
            }
            stats.comparisons += s_p.len() as u64 * pmu.stored_r.len() as u64;
            for &(b, c) in s_p {
                stats.hash_probes += 1;
                if let Some(a_values) = index.get(&b) {
                    let dest = &mut inter[part_g.bucket(c)];
                    dest.extend(a_values.iter().map(|&a| Wide { a, c }));
                    inter_len += a_values.len() as u64;
                }
            }
        }
    }
    stats.intermediate_tuples = inter_len;
    stats.spilled = inter_len.saturating_mul(WIDE_TUPLE_BYTES) > cfg.dram_capacity_bytes;

    // Join 2 over C.
    let t_parts = partition_by(t, Role::C, part_g)?;
    let mut agg = JoinAggregate::new();
    let mut t_count: HashMap<u32, u64> = HashMap::new();
    let mut wide_streams: Vec<Vec<Wide>> = (0..grid.len()).map(|_| Vec::new()).collect();
    for (t_j, i_j) in t_parts.iter().zip(&inter) {
        stats.dram_tuples_read += (t_j.size() + i_j.len()) as u64;
        if i_j.is_empty() {
            continue;
        }
        grid.clear();
        for &tup in &t_j.tuples {
            grid.store_r(route_g.bucket(tup.key1), tup)?;
        }
        stats.onchip_broadcasts += (t_j.size() + i_j.len()) as u64;
        wide_streams.iter_mut().for_each(Vec::clear);
        for w in i_j {
            wide_streams[route_g.bucket(w.c)].push(*w);
        }
        for &p in &order {
            let (pmu, i_p) = (&grid.units[p], &wide_streams[p]);
            if i_p.is_empty() {
                continue;
            }
            t_count.clear();
            for t in &pmu.stored_r {
                *t_count.entry(t.key1).or_insert(0) += 1;
            }
            stats.comparisons += i_p.len() as u64 * pmu.stored_r.len() as u64;
            for w in i_p {
                stats.hash_probes += 1;
                if let Some(&n) = t_count.get(&w.c) {
                    agg.add(w.a, n);
                }
            }
        }
    }
    Ok((agg, stats))
}
