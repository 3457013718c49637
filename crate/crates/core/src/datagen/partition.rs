// SPDX-License-Identifier: Apache-2.0

use alloc::format;
use alloc::vec::Vec;

use super::hash::{BucketFn, HashLevel, HashPlan};
use crate::error::Result;
use crate::relation::{Relation, Role};

/// Splits `rel` into `buckets` partitions on `column` using the default salt
/// of `level`.
pub fn partition(rel: &Relation, column: Role, level: HashLevel, buckets: u32) -> Result<Vec<Relation>> {
    partition_by(rel, column, BucketFn::new(level.default_salt(), buckets))
}

/// Tuple `t` lands in partition `f.bucket(t[column])`; input order is kept
/// within each partition.
pub fn partition_by(rel: &Relation, column: Role, f: BucketFn) -> Result<Vec<Relation>> {
    let idx = rel.column_index(column)?;
    let mut parts: Vec<Relation> = (0..f.buckets.max(1))
        .map(|i| Relation::empty(format!("{}[{}]", rel.name, i), rel.columns))
        .collect();
    for t in &rel.tuples {
        parts[f.bucket(t.get(idx))].tuples.push(*t);
    }
    Ok(parts)
}

/// Two-level split: `out[i][j]` holds the tuples whose outer column hashes to
/// `i` and inner column hashes to `j`.
pub fn two_level_partition(
    rel: &Relation,
    outer: (Role, BucketFn),
    inner: (Role, BucketFn),
) -> Result<Vec<Vec<Relation>>> {
    let oi = rel.column_index(outer.0)?;
    let ii = rel.column_index(inner.0)?;
    let (of, inf) = (outer.1, inner.1);
    let mut cells: Vec<Vec<Relation>> = (0..of.buckets.max(1))
        .map(|i| {
            (0..inf.buckets.max(1))
                .map(|j| Relation::empty(format!("{}[{}][{}]", rel.name, i, j), rel.columns))
                .collect()
        })
        .collect();
    for t in &rel.tuples {
        cells[of.bucket(t.get(oi))][inf.bucket(t.get(ii))].tuples.push(*t);
    }
    Ok(cells)
}

/// `S_ij` of the linear join: i = H(b), j = g(c), iterated i-major.
pub fn two_level_partition_s(s: &Relation, plan: &HashPlan) -> Result<Vec<Vec<Relation>>> {
    s.expect_roles([Role::B, Role::C])?;
    two_level_partition(
        s,
        (Role::B, plan.bucket_fn(HashLevel::CoarseH)),
        (Role::C, plan.bucket_fn(HashLevel::FineG)),
    )
}
