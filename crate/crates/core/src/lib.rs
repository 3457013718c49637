// SPDX-License-Identifier: Apache-2.0

//! Multiway hash joins on a Plasticine-like spatial accelerator.
//!
//! The crate has two halves that are checked against each other:
//!
//! * a functional simulator ([`engine`]) that routes tuples through a grid of
//!   pattern memory units (PMUs) exactly as the linear, cyclic, star and
//!   cascaded-binary join algorithms prescribe, producing exact aggregates and
//!   chip-boundary traffic counters;
//! * an analytical side ([`perfmodel`]) with the closed-form tuples-read cost
//!   functions and a loop-tree runtime model of the accelerator.
//!
//! [`oracle`] holds brute-force reference joins used as ground truth, and
//! [`datagen`] the synthetic relations and the hash family shared by every
//! algorithm.
//!
//! The crate is `no_std` and needs only `alloc`. File formats and the CLI
//! live in the companion `mwjoin` crate.

#![no_std]
// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod datagen;
pub mod engine;
mod error;
pub mod machine;
pub mod oracle;
pub mod perfmodel;
mod relation;
mod strategy;

pub use error::{Error, Result};
pub use relation::{Relation, Role, Tuple, TUPLE_BYTES, WIDE_TUPLE_BYTES};
pub use strategy::Strategy;
