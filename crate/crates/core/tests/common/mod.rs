// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use mwjoin_core::datagen::{generate_relation, two_level_partition, two_level_partition_s, DataProfile, HashLevel, HashPlan};
use mwjoin_core::machine::{default_config, MachineConfig};
use mwjoin_core::{Relation, Role};

/// Default machine with `units` PMUs and exactly `capacity` on-chip tuples.
pub fn machine(units: u32, capacity: u64) -> MachineConfig {
    MachineConfig {
        units,
        onchip_bytes: capacity * 8 * 2,
        double_buffered: true,
        ..default_config()
    }
}

pub fn rel(n: u64, d: u64, seed: u64, columns: [Role; 2]) -> Relation {
    generate_relation(DataProfile::new(n, d, seed), columns).unwrap()
}

/// Independent uniform `R(AB)`, `S(BC)`, `T(CD)`.
pub fn linear_instance(sizes: [u64; 3], d: u64, seed: u64) -> (Relation, Relation, Relation) {
    (
        rel(sizes[0], d, seed, [Role::A, Role::B]),
        rel(sizes[1], d, seed, [Role::B, Role::C]),
        rel(sizes[2], d, seed, [Role::C, Role::D]),
    )
}

/// Independent uniform `R(AB)`, `S(BC)`, `T(CA)`.
pub fn cyclic_instance(sizes: [u64; 3], d: u64, seed: u64) -> (Relation, Relation, Relation) {
    (
        rel(sizes[0], d, seed, [Role::A, Role::B]),
        rel(sizes[1], d, seed, [Role::B, Role::C]),
        rel(sizes[2], d, seed, [Role::C, Role::A]),
    )
}

/// One friend relation used as all three inputs of the linear self join.
pub fn self_instance(n: u64, d: u64, seed: u64) -> (Relation, Relation, Relation) {
    let f = rel(n, d, seed, [Role::A, Role::B]);
    let s = f.relabeled("S", [Role::B, Role::C]);
    let t = f.relabeled("T", [Role::C, Role::D]);
    (f, s, t)
}

/// Every `S_ij` cell of the linear plan holds at least one tuple.
pub fn linear_cells_hit(s: &Relation, plan: &HashPlan) -> bool {
    two_level_partition_s(s, plan).unwrap().iter().flatten().all(|c| !c.is_empty())
}

/// Every `S_jk` cell of the cyclic plan holds at least one tuple.
pub fn cyclic_cells_hit(s: &Relation, plan: &HashPlan) -> bool {
    let cells = two_level_partition(
        s,
        (Role::B, plan.bucket_fn(HashLevel::CoarseG)),
        (Role::C, plan.bucket_fn(HashLevel::FineF)),
    )
    .unwrap();
    cells.iter().flatten().all(|c| !c.is_empty())
}
