// SPDX-License-Identifier: Apache-2.0

use alloc::format;
use alloc::vec::Vec;

use hashbrown::HashMap;

use super::{require, Engine, PmuState, RunStats};
use crate::datagen::{two_level_partition, HashLevel, HashPlan};
use crate::error::Result;
use crate::oracle::JoinAggregate;
use crate::relation::{Relation, Role, Tuple};

/// Cyclic 3-way join on a `sqrt(U) x sqrt(U)` grid.
///
/// `R'` (fixed `H(a)`, `G(b)`) is stored at PMU `(h(a), g(b))`. Per `f(c)`
/// bucket, `S'` tuples are replicated down column `g(b)` and `T'` tuples
/// along row `h(a)`, so each triangle meets at exactly one PMU.
pub(super) fn run(eng: &Engine<'_>, r: &Relation, s: &Relation, t: &Relation, plan: &HashPlan) -> Result<(JoinAggregate, RunStats)> {
    r.expect_roles([Role::A, Role::B])?;
    s.expect_roles([Role::B, Role::C])?;
    t.expect_roles([Role::C, Role::A])?;
    let cfg = eng.config();
    let side = match cfg.grid_side() {
        Some(side) => side,
        None => return Err(super::infeasible(format!("cyclic join needs a square PMU count, U = {}", cfg.units))),
    };
    require(plan.fine_h == side && plan.fine_g == side, || {
        format!(
            "cyclic join needs h_bkt = g_bkt = sqrt(U) = {side}, plan has {} and {}",
            plan.fine_h, plan.fine_g
        )
    })?;
    let need = eng.min_partitions(r.size())?;
    require(plan.coarse_h as u64 * plan.coarse_g as u64 >= need, || {
        format!(
            "H_bkt * G_bkt = {} but |R| = {} needs at least {need} partitions",
            plan.coarse_h as u64 * plan.coarse_g as u64,
            r.size()
        )
    })?;

    let big_h = plan.bucket_fn(HashLevel::CoarseH);
    let big_g = plan.bucket_fn(HashLevel::CoarseG);
    let f = plan.bucket_fn(HashLevel::FineF);
    let r_cells = two_level_partition(r, (Role::A, big_h), (Role::B, big_g))?;
    let s_cells = two_level_partition(s, (Role::B, big_g), (Role::C, f))?;
    let t_cells = two_level_partition(t, (Role::A, big_h), (Role::C, f))?;
    let row_of = plan.bucket_fn(HashLevel::FineH);
    let col_of = plan.bucket_fn(HashLevel::FineG);
    let side = side as usize;
    let order = eng.unit_order(cfg.units as usize);

    let mut grid = eng.grid();
    let mut stats = RunStats::default();
    let mut agg = JoinAggregate::new();
    let mut rows: Vec<RowStream> = (0..side).map(|_| RowStream::default()).collect();
    let mut r_index: Vec<HashMap<u32, Vec<u32>>> = (0..side * side).map(|_| HashMap::new()).collect();

    for (r_row, t_row) in r_cells.iter().zip(&t_cells) {
        for (r_ij, s_row) in r_row.iter().zip(&s_cells) {
            grid.clear();
            for &tup in &r_ij.tuples {
                grid.store_r(row_of.bucket(tup.key1) * side + col_of.bucket(tup.key2), tup)?;
            }
            stats.dram_tuples_read += r_ij.size() as u64;
            stats.onchip_broadcasts += r_ij.size() as u64;
            for (unit, index) in grid.units.iter().zip(r_index.iter_mut()) {
                index.clear();
                for r in &unit.stored_r {
                    index.entry(r.key2).or_default().push(r.key1);
                }
            }

            for (s_jk, t_ik) in s_row.iter().zip(t_row) {
                stats.dram_tuples_read += s_jk.size() as u64;
                if s_jk.is_empty() {
                    continue;
                }
                grid.clear_s();
                for &tup in &s_jk.tuples {
                    let col = col_of.bucket(tup.key1);
                    for row in 0..side {
                        grid.store_s(row * side + col, tup)?;
                    }
                }
                stats.onchip_broadcasts += (s_jk.size() * side) as u64;

                stats.dram_tuples_read += t_ik.size() as u64;
                stats.onchip_broadcasts += (t_ik.size() * side) as u64;
                rows.iter_mut().for_each(RowStream::clear);
                for tup in &t_ik.tuples {
                    rows[row_of.bucket(tup.key2)].push(*tup);
                }

                for &p in &order {
                    join_unit(&grid.units[p], &r_index[p], &rows[p / side], &mut agg, &mut stats);
                }
            }
        }
    }
    Ok((agg, stats))
}

/// T tuples delivered to one grid row, as histograms.
#[derive(Debug, Default)]
struct RowStream {
    len: u64,
    by_c: HashMap<u32, u64>,
    by_ca: HashMap<(u32, u32), u64>,
}

impl RowStream {
    fn clear(&mut self) {
        self.len = 0;
        self.by_c.clear();
        self.by_ca.clear();
    }

    fn push(&mut self, t: Tuple) {
        self.len += 1;
        *self.by_c.entry(t.key1).or_insert(0) += 1;
        *self.by_ca.entry((t.key1, t.key2)).or_insert(0) += 1;
    }
}

fn join_unit(
    pmu: &PmuState,
    r_by_b: &HashMap<u32, Vec<u32>>,
    t_row: &RowStream,
    agg: &mut JoinAggregate,
    stats: &mut RunStats,
) {
    if pmu.stored_s.is_empty() || t_row.len == 0 {
        stats.comparisons += pmu.stored_s.len() as u64 * t_row.len;
        return;
    }
    let mut st_matches = 0u64;
    for s in &pmu.stored_s {
        stats.hash_probes += 1;
        let Some(&hits) = t_row.by_c.get(&s.key2) else {
            continue;
        };
        st_matches += hits;
        let Some(a_values) = r_by_b.get(&s.key1) else {
            continue;
        };
        for &a in a_values {
            stats.hash_probes += 1;
            if let Some(&w) = t_row.by_ca.get(&(s.key2, a)) {
                agg.add(a, w);
            }
        }
    }
    stats.comparisons += pmu.stored_s.len() as u64 * t_row.len + st_matches * pmu.stored_r.len() as u64;
}
