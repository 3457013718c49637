// SPDX-License-Identifier: Apache-2.0

use alloc::format;
use alloc::vec::Vec;

use hashbrown::HashMap;

use super::{require, Engine, RunStats};
use crate::datagen::{HashLevel, HashPlan};
use crate::error::Result;
use crate::oracle::JoinAggregate;
use crate::relation::{Relation, Role, Tuple};

/// Star 3-way join: PMU `(x, y)` owns the hash pair `(h(b) = x, g(c) = y)`
/// with `h_bkt * g_bkt = U`. R is replicated along its row, T along its
/// column (kept in `stored_s`), and S is streamed once.
pub(super) fn run(eng: &Engine<'_>, r: &Relation, s: &Relation, t: &Relation, plan: &HashPlan) -> Result<(JoinAggregate, RunStats)> {
    r.expect_roles([Role::A, Role::B])?;
    s.expect_roles([Role::B, Role::C])?;
    t.expect_roles([Role::C, Role::D])?;
    let cfg = eng.config();
    let (rows, cols) = (plan.fine_h as usize, plan.fine_g as usize);
    require(plan.fine_h as u64 * plan.fine_g as u64 == cfg.units as u64, || {
        format!(
            "star join needs h_bkt * g_bkt = U = {}, plan has {} * {}",
            cfg.units, plan.fine_h, plan.fine_g
        )
    })?;
    let m = cfg.tuple_capacity();
    require((r.size() + t.size()) as u64 <= m, || {
        format!("|R| + |T| = {} exceeds on-chip capacity of {m} tuples", r.size() + t.size())
    })?;

    let h = plan.bucket_fn(HashLevel::FineH);
    let g = plan.bucket_fn(HashLevel::FineG);
    let mut grid = eng.grid();
    let mut stats = RunStats::default();

    for &tup in &r.tuples {
        let x = h.bucket(tup.key2);
        for y in 0..cols {
            grid.store_r(x * cols + y, tup)?;
        }
    }
    stats.dram_tuples_read += r.size() as u64;
    stats.onchip_broadcasts += (r.size() * cols) as u64;

    for &tup in &t.tuples {
        let y = g.bucket(tup.key1);
        for x in 0..rows {
            grid.store_s(x * cols + y, tup)?;
        }
    }
    stats.dram_tuples_read += t.size() as u64;
    stats.onchip_broadcasts += (t.size() * rows) as u64;

    let mut streamed: Vec<Vec<Tuple>> = (0..grid.len()).map(|_| Vec::new()).collect();
    for &tup in &s.tuples {
        streamed[h.bucket(tup.key1) * cols + g.bucket(tup.key2)].push(tup);
    }
    stats.dram_tuples_read += s.size() as u64;
    stats.onchip_broadcasts += s.size() as u64;

    let mut agg = JoinAggregate::new();
    let mut r_by_b: HashMap<u32, Vec<u32>> = HashMap::new();
    let mut t_by_c: HashMap<u32, u64> = HashMap::new();
    for p in eng.unit_order(grid.len()) {
        let pmu = &grid.units[p];
        let s_p = &streamed[p];
        if s_p.is_empty() {
            continue;
        }
        r_by_b.clear();
        t_by_c.clear();
        for r in &pmu.stored_r {
            r_by_b.entry(r.key2).or_default().push(r.key1);
        }
        for t in &pmu.stored_s {
            *t_by_c.entry(t.key1).or_insert(0) += 1;
        }
        let (r_len, t_len) = (pmu.stored_r.len() as u64, pmu.stored_s.len() as u64);
        for s in s_p {
            stats.hash_probes += 1;
            let a_values = r_by_b.get(&s.key1).map(Vec::as_slice).unwrap_or(&[]);
            // s against every local r, then each (r, s) hit against every local t.
            stats.comparisons += r_len + a_values.len() as u64 * t_len;
            if a_values.is_empty() {
                continue;
            }
            stats.hash_probes += 1;
            if let Some(&w) = t_by_c.get(&s.key2) {
                for &a in a_values {
                    agg.add(a, w);
                }
            }
        }
    }
    Ok((agg, stats))
}
