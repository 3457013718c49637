// SPDX-License-Identifier: Apache-2.0

//! Default plans, feasibility and exhaustive bucket-count search.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::build::{build_loop_tree, intermediate_spills};
use super::formulas::{optimal_h, CostInputs};
use super::tree::{evaluate_runtime, RuntimeEstimate};
use crate::datagen::HashPlan;
use crate::error::{Error, Result};
use crate::machine::MachineConfig;
use crate::strategy::Strategy;

/// Outer-bucket counts tried above the minimum: `min * 2^k` for `k < 7`.
pub const OUTER_DOUBLINGS: u32 = 7;
/// Largest `log2(g_bkt)` tried for the linear 3-way join.
pub const MAX_FINE_LOG2: u32 = 24;
/// Target expected tuples per `g(C)` or `f(C)` bucket of one S partition.
pub const FINE_BUCKET_TUPLES: f64 = 64.0;

fn clamp_u32(x: f64) -> u32 {
    if x >= u32::MAX as f64 {
        u32::MAX
    } else if x >= 1.0 {
        x as u32
    } else {
        1
    }
}

fn ceil_div(tuples: f64, capacity: f64) -> Result<u32> {
    if !(capacity >= 1.0) {
        return Err(Error::Infeasible("on-chip capacity is below one tuple".into()));
    }
    Ok(clamp_u32(libm::ceil(tuples / capacity)))
}

/// Largest power of two dividing `units` that does not exceed `sqrt(units)`.
pub fn star_split(units: u32) -> (u32, u32) {
    let mut h = 1u32;
    while units.is_multiple_of(h * 2) && (h as u64 * 2).pow(2) <= units as u64 {
        h *= 2;
    }
    (h, units / h)
}

/// Bucket counts the strategy would use by default, with partitions sized
/// to `fill` of the on-chip capacity (1.0 gives `H = ceil(|R|/M)`).
pub fn default_plan_with_fill(strategy: Strategy, shape: &CostInputs, cfg: &MachineConfig, fill: f64) -> Result<HashPlan> {
    if !(fill > 0.0 && fill <= 1.0) {
        return Err(Error::InvalidInput(format!("fill factor {fill} outside (0, 1]")));
    }
    let m = cfg.tuple_capacity() as f64 * fill;
    let u = cfg.units;
    let plan = match strategy {
        Strategy::Linear3 => {
            let big_h = ceil_div(shape.size_r, m)?;
            let g = clamp_u32(libm::ceil(shape.size_s / (FINE_BUCKET_TUPLES * big_h as f64)));
            HashPlan::new(big_h, 1, u, g, 1)
        }
        Strategy::Cyclic3 => {
            let side = cfg
                .grid_side()
                .ok_or_else(|| Error::Infeasible(format!("cyclic join needs a square PMU count, U = {u}")))?;
            let parts = ceil_div(shape.size_r, m)?;
            let h_star = if shape.size_r > 0.0 && shape.size_s > 0.0 && shape.size_t > 0.0 {
                optimal_h(&CostInputs { m, ..*shape })?
            } else {
                1.0
            };
            let big_h = clamp_u32(libm::round(h_star)).min(parts);
            let big_g = parts.div_ceil(big_h);
            let f = clamp_u32(libm::ceil(shape.size_s / (FINE_BUCKET_TUPLES * big_g as f64)));
            HashPlan::new(big_h, big_g, side, side, f)
        }
        Strategy::Star3 => {
            let (h, g) = star_split(u);
            HashPlan::new(1, 1, h, g, 1)
        }
        Strategy::Cascaded => HashPlan::new(ceil_div(shape.size_r, m)?, ceil_div(shape.size_t, m)?, u, u, 1),
        Strategy::CascadedStar => HashPlan::new(1, 1, u, u, 1),
    };
    Ok(plan)
}

pub fn default_plan(strategy: Strategy, shape: &CostInputs, cfg: &MachineConfig) -> Result<HashPlan> {
    default_plan_with_fill(strategy, shape, cfg, 1.0)
}

/// Capacity preconditions of a plan, in expected tuples.
pub fn check_feasible(strategy: Strategy, shape: &CostInputs, plan: &HashPlan, cfg: &MachineConfig) -> Result<()> {
    let m = cfg.tuple_capacity() as f64;
    let fail = |msg: alloc::string::String| Err(Error::Infeasible(msg));
    match strategy {
        Strategy::Linear3 if shape.size_r > plan.coarse_h as f64 * m => {
            fail(format!("H_bkt = {} leaves R partitions above M = {m}", plan.coarse_h))
        }
        Strategy::Cyclic3 if shape.size_r > plan.coarse_h as f64 * plan.coarse_g as f64 * m => fail(format!(
            "H_bkt * G_bkt = {} leaves R cells above M = {m}",
            plan.coarse_h as u64 * plan.coarse_g as u64
        )),
        Strategy::Star3 if shape.size_r + shape.size_t > m => {
            fail(format!("|R| + |T| = {} exceeds M = {m}", shape.size_r + shape.size_t))
        }
        Strategy::Cascaded
            if shape.size_r > plan.coarse_h as f64 * m || shape.size_t > plan.coarse_g as f64 * m =>
        {
            fail(format!("H_bkt = {}, G_bkt = {} leave partitions above M = {m}", plan.coarse_h, plan.coarse_g))
        }
        Strategy::CascadedStar if shape.size_r > m || shape.size_t > m => {
            fail(format!("R or T exceeds M = {m} for the unpartitioned cascaded join"))
        }
        _ => Ok(()),
    }
}

/// Feasibility check, loop tree and evaluation in one step.
pub fn estimate(strategy: Strategy, shape: &CostInputs, plan: &HashPlan, cfg: &MachineConfig) -> Result<RuntimeEstimate> {
    check_feasible(strategy, shape, plan, cfg)?;
    evaluate_runtime(&build_loop_tree(strategy, shape, plan, cfg)?, cfg)
}

/// Candidate plans searched by [`best_plan`]: powers of two for the
/// bucket counts the strategy leaves free, bounded below by feasibility.
pub fn candidate_plans(strategy: Strategy, shape: &CostInputs, cfg: &MachineConfig) -> Result<Vec<HashPlan>> {
    let base = default_plan(strategy, shape, cfg)?;
    let outer = |min: u32| -> Vec<u32> {
        (0..OUTER_DOUBLINGS)
            .filter_map(|k| min.checked_mul(1 << k))
            .collect()
    };
    let mut out = Vec::new();
    match strategy {
        Strategy::Linear3 => {
            out.push(base);
            for big_h in outer(base.coarse_h) {
                for k in 0..=MAX_FINE_LOG2 {
                    out.push(HashPlan { coarse_h: big_h, fine_g: 1 << k, ..base });
                }
            }
        }
        Strategy::Star3 => {
            let mut h = 1u32;
            while h <= cfg.units {
                if cfg.units.is_multiple_of(h) {
                    out.push(HashPlan {
                        fine_h: h,
                        fine_g: cfg.units / h,
                        ..base
                    });
                }
                h *= 2;
            }
        }
        Strategy::Cascaded => {
            for big_h in outer(base.coarse_h) {
                for big_g in outer(base.coarse_g) {
                    out.push(HashPlan {
                        coarse_h: big_h,
                        coarse_g: big_g,
                        ..base
                    });
                }
            }
        }
        Strategy::CascadedStar => out.push(base),
        Strategy::Cyclic3 => {
            return Err(Error::Unsupported("the cyclic 3-way join has no runtime model".into()));
        }
    }
    Ok(out)
}

/// Fastest candidate plan; ties keep the earliest candidate.
pub fn best_plan(strategy: Strategy, shape: &CostInputs, cfg: &MachineConfig) -> Result<(HashPlan, RuntimeEstimate)> {
    let mut best: Option<(HashPlan, RuntimeEstimate)> = None;
    let mut last_err = None;
    for plan in candidate_plans(strategy, shape, cfg)? {
        match estimate(strategy, shape, &plan, cfg) {
            Ok(est) => {
                if best.as_ref().is_none_or(|(_, b)| est.cycles < b.cycles) {
                    best = Some((plan, est));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::Infeasible(format!("no feasible plan for {}", strategy.name()))))
}

/// A 3-way strategy and the cascaded pair it replaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    SelfLinear,
    Star,
}

impl Pairing {
    pub fn three_way(self) -> Strategy {
        match self {
            Pairing::SelfLinear => Strategy::Linear3,
            Pairing::Star => Strategy::Star3,
        }
    }

    pub fn binary(self) -> Strategy {
        match self {
            Pairing::SelfLinear => Strategy::Cascaded,
            Pairing::Star => Strategy::CascadedStar,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub three_way: RuntimeEstimate,
    pub binary: RuntimeEstimate,
    /// Cascaded runtime over 3-way runtime.
    pub speedup: f64,
    pub spilled: bool,
}

pub fn compare_strategies(
    pairing: Pairing,
    shape: &CostInputs,
    plan3: &HashPlan,
    plan2: &HashPlan,
    cfg: &MachineConfig,
) -> Result<Comparison> {
    let three_way = estimate(pairing.three_way(), shape, plan3, cfg)?;
    let binary = estimate(pairing.binary(), shape, plan2, cfg)?;
    Ok(Comparison {
        speedup: binary.cycles / three_way.cycles,
        spilled: intermediate_spills(shape, cfg)?,
        three_way,
        binary,
    })
}

/// [`compare_strategies`] with each side's plan chosen by [`best_plan`].
pub fn compare_best(pairing: Pairing, shape: &CostInputs, cfg: &MachineConfig) -> Result<(HashPlan, HashPlan, Comparison)> {
    let (plan3, _) = best_plan(pairing.three_way(), shape, cfg)?;
    let (plan2, _) = best_plan(pairing.binary(), shape, cfg)?;
    let cmp = compare_strategies(pairing, shape, &plan3, &plan2, cfg)?;
    Ok((plan3, plan2, cmp))
}
