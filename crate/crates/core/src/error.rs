// SPDX-License-Identifier: Apache-2.0

use alloc::string::String;

use crate::relation::Role;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("distinct-value count must be in [1, 2^32], got {0}")]
    DistinctOutOfRange(u64),

    #[error("relation {relation} has no column {role}")]
    UnknownColumn { relation: String, role: Role },

    #[error("column roles do not match the join shape: {0}")]
    RoleMismatch(String),

    /// The hash plan or machine cannot execute the join as requested.
    #[error("infeasible plan: {0}")]
    Infeasible(String),

    #[error("invalid machine configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed loop tree: {0}")]
    MalformedTree(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_))
    }
}
