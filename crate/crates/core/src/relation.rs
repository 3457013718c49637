// SPDX-License-Identifier: Apache-2.0

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bytes per stored tuple: two 4-byte keys.
pub const TUPLE_BYTES: u64 = 8;

/// Bytes per intermediate `I(ABC)` tuple: three 4-byte keys.
pub const WIDE_TUPLE_BYTES: u64 = 12;

/// Join-column role of a relation column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    A,
    B,
    C,
    D,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::A => "A",
            Role::B => "B",
            Role::C => "C",
            Role::D => "D",
        };
        f.write_str(s)
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Role::A),
            "B" | "b" => Ok(Role::B),
            "C" | "c" => Ok(Role::C),
            "D" | "d" => Ok(Role::D),
            other => Err(Error::InvalidInput(format!("unknown column role {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Tuple {
    pub key1: u32,
    pub key2: u32,
}

impl Tuple {
    pub const fn new(key1: u32, key2: u32) -> Self {
        Tuple { key1, key2 }
    }

    /// Value in column position `idx` (0 or 1).
    #[inline]
    pub fn get(&self, idx: usize) -> u32 {
        if idx == 0 {
            self.key1
        } else {
            self.key2
        }
    }
}

impl From<(u32, u32)> for Tuple {
    fn from((key1, key2): (u32, u32)) -> Self {
        Tuple { key1, key2 }
    }
}

/// A multiset of two-column tuples. Duplicates are kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub name: String,
    pub columns: [Role; 2],
    pub tuples: Vec<Tuple>,
}

impl Relation {
    pub fn new(name: impl Into<String>, columns: [Role; 2], tuples: Vec<Tuple>) -> Self {
        Relation {
            name: name.into(),
            columns,
            tuples,
        }
    }

    pub fn empty(name: impl Into<String>, columns: [Role; 2]) -> Self {
        Self::new(name, columns, Vec::new())
    }

    /// Builds a relation from `(key1, key2)` pairs.
    pub fn from_pairs(name: impl Into<String>, columns: [Role; 2], pairs: &[(u32, u32)]) -> Self {
        Self::new(name, columns, pairs.iter().copied().map(Tuple::from).collect())
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Position of `role` among this relation's columns.
    pub fn column_index(&self, role: Role) -> Result<usize> {
        self.columns
            .iter()
            .position(|&c| c == role)
            .ok_or_else(|| Error::UnknownColumn {
                relation: self.name.clone(),
                role,
            })
    }

    /// Same tuples under new name and column roles, e.g. to use one friends
    /// relation as all three inputs of a self-join.
    pub fn relabeled(&self, name: impl Into<String>, columns: [Role; 2]) -> Relation {
        Relation {
            name: name.into(),
            columns,
            tuples: self.tuples.clone(),
        }
    }

    pub fn has_roles(&self, columns: [Role; 2]) -> bool {
        self.columns == columns
    }

    pub(crate) fn expect_roles(&self, columns: [Role; 2]) -> Result<()> {
        if self.has_roles(columns) {
            Ok(())
        } else {
            Err(Error::RoleMismatch(format!(
                "{} has columns ({},{}), expected ({},{})",
                self.name, self.columns[0], self.columns[1], columns[0], columns[1]
            )))
        }
    }
}
