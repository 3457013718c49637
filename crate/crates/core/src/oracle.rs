// SPDX-License-Identifier: Apache-2.0

//! Brute-force reference joins.
//!
//! Everything here is nested loops over tuples and ordered maps; no hashing,
//! no partitioning, nothing shared with the engine. The `*_naive` variants
//! are literal triple loops. The default variants loop over `R x S` and look
//! the third relation up in an exact histogram, which keeps them usable at a
//! few thousand tuples per relation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relation::{Relation, Role};

/// Join cardinality grouped by the A value of the R tuple.
///
/// Only groups with a non-zero count are stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinAggregate {
    counts: BTreeMap<u32, u64>,
}

impl JoinAggregate {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, a: u32, count: u64) {
        if count > 0 {
            *self.counts.entry(a).or_insert(0) += count;
        }
    }

    pub fn merge(&mut self, other: &JoinAggregate) {
        for (&a, &c) in &other.counts {
            self.add(a, c);
        }
    }

    pub fn get(&self, a: u32) -> u64 {
        self.counts.get(&a).copied().unwrap_or(0)
    }

    /// Total number of joined tuples.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `(a_value, count)` rows in increasing `a_value` order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.counts.iter().map(|(&a, &c)| (a, c))
    }
}

impl FromIterator<(u32, u64)> for JoinAggregate {
    fn from_iter<I: IntoIterator<Item = (u32, u64)>>(iter: I) -> Self {
        let mut agg = JoinAggregate::new();
        for (a, c) in iter {
            agg.add(a, c);
        }
        agg
    }
}

/// Row-major relation of arbitrary width, used for materialized joins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub roles: Vec<Role>,
    data: Vec<u32>,
}

impl Table {
    pub fn new(roles: Vec<Role>) -> Self {
        Table { roles, data: Vec::new() }
    }

    pub fn width(&self) -> usize {
        self.roles.len()
    }

    pub fn len(&self) -> usize {
        if self.roles.is_empty() {
            0
        } else {
            self.data.len() / self.roles.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, row: &[u32]) {
        assert_eq!(row.len(), self.width());
        self.data.extend_from_slice(row);
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.data.chunks_exact(self.width().max(1))
    }

    pub fn column_index(&self, role: Role) -> Option<usize> {
        self.roles.iter().position(|&r| r == role)
    }

    /// Rows sorted lexicographically, for multiset comparison.
    pub fn sorted_rows(&self) -> Vec<Vec<u32>> {
        let mut rows: Vec<Vec<u32>> = self.rows().map(<[u32]>::to_vec).collect();
        rows.sort();
        rows
    }
}

impl From<&Relation> for Table {
    fn from(rel: &Relation) -> Self {
        let mut t = Table::new(rel.columns.to_vec());
        t.data.reserve(rel.size() * 2);
        for tup in &rel.tuples {
            t.data.push(tup.key1);
            t.data.push(tup.key2);
        }
        t
    }
}

fn roles_check(rel: &Relation, want: [Role; 2]) -> Result<()> {
    rel.expect_roles(want)
}

/// `R(AB) ⋈ S(BC) ⋈ T(CD)` grouped by R.a.
pub fn oracle_linear3(r: &Relation, s: &Relation, t: &Relation) -> Result<JoinAggregate> {
    roles_check(r, [Role::A, Role::B])?;
    roles_check(s, [Role::B, Role::C])?;
    roles_check(t, [Role::C, Role::D])?;
    let mut t_by_c: BTreeMap<u32, u64> = BTreeMap::new();
    for tt in &t.tuples {
        *t_by_c.entry(tt.key1).or_insert(0) += 1;
    }
    let mut agg = JoinAggregate::new();
    for rr in &r.tuples {
        let mut count = 0u64;
        for ss in &s.tuples {
            if rr.key2 == ss.key1 {
                count += t_by_c.get(&ss.key2).copied().unwrap_or(0);
            }
        }
        agg.add(rr.key1, count);
    }
    Ok(agg)
}

/// Literal triple loop over `R x S x T`; desk-scale only.
pub fn oracle_linear3_naive(r: &Relation, s: &Relation, t: &Relation) -> Result<JoinAggregate> {
    roles_check(r, [Role::A, Role::B])?;
    roles_check(s, [Role::B, Role::C])?;
    roles_check(t, [Role::C, Role::D])?;
    let mut agg = JoinAggregate::new();
    for rr in &r.tuples {
        for ss in &s.tuples {
            for tt in &t.tuples {
                if rr.key2 == ss.key1 && ss.key2 == tt.key1 {
                    agg.add(rr.key1, 1);
                }
            }
        }
    }
    Ok(agg)
}

/// `R(AB) ⋈ S(BC) ⋈ T(CA)` grouped by R.a.
pub fn oracle_cyclic3(r: &Relation, s: &Relation, t: &Relation) -> Result<JoinAggregate> {
    roles_check(r, [Role::A, Role::B])?;
    roles_check(s, [Role::B, Role::C])?;
    roles_check(t, [Role::C, Role::A])?;
    let mut t_by_ca: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    for tt in &t.tuples {
        *t_by_ca.entry((tt.key1, tt.key2)).or_insert(0) += 1;
    }
    let mut agg = JoinAggregate::new();
    for rr in &r.tuples {
        let mut count = 0u64;
        for ss in &s.tuples {
            if rr.key2 == ss.key1 {
                count += t_by_ca.get(&(ss.key2, rr.key1)).copied().unwrap_or(0);
            }
        }
        agg.add(rr.key1, count);
    }
    Ok(agg)
}

/// Literal triple loop for the cyclic join; desk-scale only.
pub fn oracle_cyclic3_naive(r: &Relation, s: &Relation, t: &Relation) -> Result<JoinAggregate> {
    roles_check(r, [Role::A, Role::B])?;
    roles_check(s, [Role::B, Role::C])?;
    roles_check(t, [Role::C, Role::A])?;
    let mut agg = JoinAggregate::new();
    for rr in &r.tuples {
        for ss in &s.tuples {
            for tt in &t.tuples {
                if rr.key2 == ss.key1 && ss.key2 == tt.key1 && tt.key2 == rr.key1 {
                    agg.add(rr.key1, 1);
                }
            }
        }
    }
    Ok(agg)
}

/// Materialized equi-join of `x` and `y` on `col`.
///
/// Output columns are `x`'s columns followed by `y`'s minus the join column.
pub fn oracle_binary(x: &Table, y: &Table, col: Role) -> Result<Table> {
    let xi = x.column_index(col);
    let yi = y.column_index(col);
    let (xi, yi) = match (xi, yi) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::RoleMismatch(format!(
                "join column {col} must appear in both inputs"
            )))
        }
    };
    let mut roles = x.roles.clone();
    roles.extend(y.roles.iter().enumerate().filter(|&(i, _)| i != yi).map(|(_, &r)| r));
    let mut out = Table::new(roles);
    let mut row = Vec::with_capacity(out.width());
    for xr in x.rows() {
        for yr in y.rows() {
            if xr[xi] == yr[yi] {
                row.clear();
                row.extend_from_slice(xr);
                row.extend(yr.iter().enumerate().filter(|&(i, _)| i != yi).map(|(_, &v)| v));
                out.push(&row);
            }
        }
    }
    Ok(out)
}

/// Number of rows per value of `role`.
pub fn group_count(table: &Table, role: Role) -> Result<JoinAggregate> {
    let idx = table
        .column_index(role)
        .ok_or_else(|| Error::RoleMismatch(format!("table has no column {role}")))?;
    let mut agg = JoinAggregate::new();
    for row in table.rows() {
        agg.add(row[idx], 1);
    }
    Ok(agg)
}
