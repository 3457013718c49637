// SPDX-License-Identifier: Apache-2.0

//! Functional simulation of the join algorithms on a PMU grid.
//!
//! Every strategy partitions its inputs with the plan's hash functions,
//! routes tuples to PMUs the way the accelerator would and joins the
//! per-PMU fragments with small in-memory hash joins. The aggregate is exact.
//! [`RunStats`] counts traffic across the chip boundary (`dram_tuples_read`),
//! on-chip deliveries and the comparisons a nested-loop PCU kernel would do.
//!
//! Empty `g(C)`/`f(C)` buckets of S are skipped together with their T bucket,
//! so the linear and cyclic read counts equal the closed-form costs only when
//! every such bucket holds at least one S tuple; otherwise they are smaller.

mod cascaded;
mod cyclic;
mod linear;
mod pmu;
mod star;

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::HashPlan;
use crate::error::{Error, Result};
use crate::machine::MachineConfig;
use crate::oracle::JoinAggregate;
use crate::relation::Relation;
use crate::strategy::Strategy;

pub use pmu::{PmuGrid, PmuState};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    /// Tuples transferred from DRAM onto the chip (intermediate tuples included).
    pub dram_tuples_read: u64,
    /// `(tuple, destination PMU)` deliveries on the on-chip network.
    pub onchip_broadcasts: u64,
    /// Key comparisons a nested-loop kernel performs on the PMU fragments.
    pub comparisons: u64,
    /// Hash-table operations the engine actually performed.
    pub hash_probes: u64,
    /// Tuples of `I(ABC)` written to DRAM; zero for the 3-way joins.
    pub intermediate_tuples: u64,
    /// Set when the intermediate relation no longer fits in DRAM.
    pub spilled: bool,
}

/// Order in which PMUs process their fragments. Results never depend on it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum UnitOrder {
    #[default]
    Forward,
    Reverse,
    Shuffled(u64),
}

#[derive(Debug, Clone, Copy)]
pub struct Engine<'a> {
    cfg: &'a MachineConfig,
    order: UnitOrder,
}

impl<'a> Engine<'a> {
    pub fn new(cfg: &'a MachineConfig) -> Self {
        Engine {
            cfg,
            order: UnitOrder::Forward,
        }
    }

    pub fn with_order(mut self, order: UnitOrder) -> Self {
        self.order = order;
        self
    }

    pub fn config(&self) -> &MachineConfig {
        self.cfg
    }

    fn unit_order(&self, units: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..units).collect();
        match self.order {
            UnitOrder::Forward => {}
            UnitOrder::Reverse => order.reverse(),
            UnitOrder::Shuffled(seed) => order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
        }
        order
    }

    fn grid(&self) -> PmuGrid {
        PmuGrid::new(self.cfg.units as usize, self.cfg.unit_capacity())
    }

    fn prepare(&self, plan: &HashPlan) -> Result<()> {
        self.cfg.validate()?;
        plan.validate()
    }

    /// Top-level partitions needed so one partition of `tuples` fits on chip.
    fn min_partitions(&self, tuples: usize) -> Result<u64> {
        let m = self.cfg.tuple_capacity();
        if tuples == 0 {
            return Ok(1);
        }
        if m == 0 {
            return Err(Error::Infeasible("on-chip capacity is zero tuples".into()));
        }
        Ok((tuples as u64).div_ceil(m).max(1))
    }

    pub fn linear3(&self, r: &Relation, s: &Relation, t: &Relation, plan: &HashPlan) -> Result<(JoinAggregate, RunStats)> {
        self.prepare(plan)?;
        linear::run(self, r, s, t, plan)
    }

    pub fn cyclic3(&self, r: &Relation, s: &Relation, t: &Relation, plan: &HashPlan) -> Result<(JoinAggregate, RunStats)> {
        self.prepare(plan)?;
        cyclic::run(self, r, s, t, plan)
    }

    pub fn star3(&self, r: &Relation, s: &Relation, t: &Relation, plan: &HashPlan) -> Result<(JoinAggregate, RunStats)> {
        self.prepare(plan)?;
        star::run(self, r, s, t, plan)
    }

    pub fn cascaded(
        &self,
        r: &Relation,
        s: &Relation,
        t: &Relation,
        plan: &HashPlan,
        star: bool,
    ) -> Result<(JoinAggregate, RunStats)> {
        self.prepare(plan)?;
        cascaded::run(self, r, s, t, plan, star)
    }

    pub fn run(
        &self,
        strategy: Strategy,
        r: &Relation,
        s: &Relation,
        t: &Relation,
        plan: &HashPlan,
    ) -> Result<(JoinAggregate, RunStats)> {
        match strategy {
            Strategy::Linear3 => self.linear3(r, s, t, plan),
            Strategy::Cyclic3 => self.cyclic3(r, s, t, plan),
            Strategy::Star3 => self.star3(r, s, t, plan),
            Strategy::Cascaded => self.cascaded(r, s, t, plan, false),
            Strategy::CascadedStar => self.cascaded(r, s, t, plan, true),
        }
    }
}

pub fn run_linear3(
    r: &Relation,
    s: &Relation,
    t: &Relation,
    plan: &HashPlan,
    cfg: &MachineConfig,
) -> Result<(JoinAggregate, RunStats)> {
    Engine::new(cfg).linear3(r, s, t, plan)
}

pub fn run_cyclic3(
    r: &Relation,
    s: &Relation,
    t: &Relation,
    plan: &HashPlan,
    cfg: &MachineConfig,
) -> Result<(JoinAggregate, RunStats)> {
    Engine::new(cfg).cyclic3(r, s, t, plan)
}

pub fn run_star3(
    r: &Relation,
    s: &Relation,
    t: &Relation,
    plan: &HashPlan,
    cfg: &MachineConfig,
) -> Result<(JoinAggregate, RunStats)> {
    Engine::new(cfg).star3(r, s, t, plan)
}

pub fn run_cascaded_binary(
    r: &Relation,
    s: &Relation,
    t: &Relation,
    plan: &HashPlan,
    cfg: &MachineConfig,
    star: bool,
) -> Result<(JoinAggregate, RunStats)> {
    Engine::new(cfg).cascaded(r, s, t, plan, star)
}

fn infeasible(msg: alloc::string::String) -> Error {
    Error::Infeasible(msg)
}

fn require(cond: bool, msg: impl FnOnce() -> alloc::string::String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(infeasible(msg()))
    }
}

fn require_fine_buckets_equal_units(plan: &HashPlan, units: u32, strategy: &str) -> Result<()> {
    require(plan.fine_h == units, || {
        format!("{strategy} needs h_bkt = U = {units}, plan has {}", plan.fine_h)
    })
}
