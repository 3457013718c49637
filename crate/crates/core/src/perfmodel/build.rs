// SPDX-License-Identifier: Apache-2.0

//! Loop trees for the modeled strategies.
//!
//! Expected sizes per loop level under uniform keys, with `U` PMUs and `L`
//! lanes:
//! - linear 3-way: `R_loc = |R|/(H U)` tuples of R and `S_loc = |S|/(H U g)`
//!   tuples of `S_ij` per PMU, `|T|/g` T tuples per `g(C)` bucket. A local
//!   s matches a streamed t with probability `g/d` (both already share the
//!   `g(C)` bucket). Only `min(g, d)` buckets can be occupied, so `g` is
//!   capped at `d`.
//! - star 3-way: `|R|/h` R and `|T|/g` T tuples per PMU, `|S|/U` streamed S
//!   tuples per PMU. A local r matches a streamed s with probability `h/d`.
//! - cascaded: the first join compares `|S|/(H U)` streamed S tuples with
//!   `|R|/(H U)` local R tuples per PMU and writes `|I|/H` wide tuples per R
//!   partition; the second compares `|I|/(G U)` streamed I tuples with
//!   `|T|/(G U)` local T tuples.
//!
//! Every stored match is counted by its own write leaf, so no branch is
//! needed in the cascaded trees.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::formulas::CostInputs;
use super::tree::{Construct, Direction, LoopNode, PHASE_JOIN1, PHASE_JOIN2, PHASE_PARTITION};
use crate::datagen::HashPlan;
use crate::error::{Error, Result};
use crate::machine::MachineConfig;
use crate::relation::{TUPLE_BYTES, WIDE_TUPLE_BYTES};
use crate::strategy::Strategy;

/// Whether `I(ABC)` overflows DRAM for this shape and machine.
pub fn intermediate_spills(shape: &CostInputs, cfg: &MachineConfig) -> Result<bool> {
    Ok(shape.intermediate_tuples()? * WIDE_TUPLE_BYTES as f64 > cfg.dram_capacity_bytes as f64)
}

pub fn build_loop_tree(strategy: Strategy, shape: &CostInputs, plan: &HashPlan, cfg: &MachineConfig) -> Result<LoopNode> {
    cfg.validate()?;
    plan.validate()?;
    if !(shape.d >= 1.0) {
        return Err(Error::InvalidInput(format!("d must be at least 1, got {}", shape.d)));
    }
    if shape.size_r < 0.0 || shape.size_s < 0.0 || shape.size_t < 0.0 {
        return Err(Error::InvalidInput("relation sizes must be non-negative".into()));
    }
    let b = Builder { shape, plan, cfg };
    match strategy {
        Strategy::Linear3 => b.linear3(),
        Strategy::Star3 => b.star3(),
        Strategy::Cascaded => b.cascaded(false),
        Strategy::CascadedStar => b.cascaded(true),
        Strategy::Cyclic3 => Err(Error::Unsupported(
            "the cyclic 3-way join is covered by the tuples-read formulas only".into(),
        )),
    }
}

struct Builder<'a> {
    shape: &'a CostInputs,
    plan: &'a HashPlan,
    cfg: &'a MachineConfig,
}

fn read(label: &str, tuples: f64) -> LoopNode {
    LoopNode::dram(label, tuples, TUPLE_BYTES, Direction::Read, false)
}

impl Builder<'_> {
    fn units(&self) -> f64 {
        self.cfg.units as f64
    }

    fn lanes(&self) -> f64 {
        self.cfg.lanes as f64
    }

    /// Loop over reused tiles: overlapped with prefetch when double buffered.
    fn tiled(&self) -> Construct {
        if self.cfg.double_buffered {
            Construct::Pipeline
        } else {
            Construct::Sequential
        }
    }

    fn need(&self, ok: bool, msg: impl FnOnce() -> alloc::string::String) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::Infeasible(msg()))
        }
    }

    /// One streaming read and one streaming write of each listed relation.
    fn partition(&self, parts: &[(f64, u64, bool)]) -> LoopNode {
        let mut children = Vec::new();
        for &(tuples, width, spill) in parts {
            children.push(LoopNode::dram("partition_read", tuples, width, Direction::Read, spill));
            children.push(LoopNode::dram("partition_write", tuples, width, Direction::Write, spill));
        }
        LoopNode::new(PHASE_PARTITION, 1.0, Construct::Streaming, children)
    }

    fn linear3(&self) -> Result<LoopNode> {
        let (r, s, t, d) = (self.shape.size_r, self.shape.size_s, self.shape.size_t, self.shape.d);
        let units = self.units();
        self.need(self.plan.fine_h == self.cfg.units, || {
            format!("linear join needs h_bkt = U = {}, plan has {}", self.cfg.units, self.plan.fine_h)
        })?;
        let big_h = self.plan.coarse_h as f64;
        // At most `d` of the `g(C)` buckets can be occupied; empty ones are skipped.
        let g = (self.plan.fine_g as f64).min(d);
        let r_loc = r / (big_h * units);
        let s_loc = s / (big_h * units * g);

        let st_hit = LoopNode::new("match_R", s_loc, Construct::Streaming, vec![LoopNode::compare(r_loc, self.lanes())])
            .with_prob((g / d).min(1.0));
        let t_loop = LoopNode::new(
            "t_loop",
            t / g,
            Construct::Streaming,
            vec![LoopNode::compare(s_loc, self.lanes()), st_hit],
        );
        let pmus = LoopNode::new("pmu", units, Construct::Parallel(units), vec![t_loop]);
        let join = LoopNode::new("join_T", 1.0, Construct::Streaming, vec![read("stream_T", t / g), pmus]);
        let load_s = LoopNode::leaf(
            "load_S",
            units,
            Construct::Parallel(units),
            super::tree::Leaf::Dram {
                tuples: s_loc,
                tuple_bytes: TUPLE_BYTES as f64,
                direction: Direction::Read,
                spill: false,
            },
        );
        let j_loop = LoopNode::new("j_loop", g, self.tiled(), vec![load_s, join]);
        let i_loop = LoopNode::new(PHASE_JOIN1, big_h, self.tiled(), vec![read("load_R", r / big_h), j_loop]);
        let w = TUPLE_BYTES;
        Ok(LoopNode::new(
            "linear3",
            1.0,
            Construct::Sequential,
            vec![self.partition(&[(r, w, false), (s, w, false), (t, w, false)]), i_loop],
        ))
    }

    fn star3(&self) -> Result<LoopNode> {
        let (r, s, t, d) = (self.shape.size_r, self.shape.size_s, self.shape.size_t, self.shape.d);
        let units = self.units();
        let (h, g) = (self.plan.fine_h as f64, self.plan.fine_g as f64);
        self.need(self.plan.fine_h as u64 * self.plan.fine_g as u64 == self.cfg.units as u64, || {
            format!(
                "star join needs h_bkt * g_bkt = U = {}, plan has {} * {}",
                self.cfg.units, self.plan.fine_h, self.plan.fine_g
            )
        })?;
        let rs_hit = LoopNode::new("match_T", r / h, Construct::Streaming, vec![LoopNode::compare(t / g, self.lanes())])
            .with_prob((h / d).min(1.0));
        let s_loop = LoopNode::new(
            "s_loop",
            s / units,
            Construct::Streaming,
            vec![LoopNode::compare(r / h, self.lanes()), rs_hit],
        );
        let pmus = LoopNode::new("pmu", units, Construct::Parallel(units), vec![s_loop]);
        let join = LoopNode::new("join_S", 1.0, Construct::Streaming, vec![read("stream_S", s), pmus]);
        let phase = LoopNode::new(
            PHASE_JOIN1,
            1.0,
            Construct::Sequential,
            vec![read("load_R", r), read("load_T", t), join],
        );
        Ok(LoopNode::new("star3", 1.0, Construct::Sequential, vec![phase]))
    }

    fn cascaded(&self, star: bool) -> Result<LoopNode> {
        let (r, s, t) = (self.shape.size_r, self.shape.size_s, self.shape.size_t);
        let units = self.units();
        self.need(self.plan.fine_h == self.cfg.units && self.plan.fine_g == self.cfg.units, || {
            format!(
                "cascaded join needs h_bkt = g_bkt = U = {}, plan has {} and {}",
                self.cfg.units, self.plan.fine_h, self.plan.fine_g
            )
        })?;
        let (big_h, big_g) = if star {
            (1.0, 1.0)
        } else {
            (self.plan.coarse_h as f64, self.plan.coarse_g as f64)
        };
        let inter = self.shape.intermediate_tuples()?;
        let spill = intermediate_spills(self.shape, self.cfg)?;
        let wide = WIDE_TUPLE_BYTES;

        let s_loop = LoopNode::new(
            "s_loop",
            s / (big_h * units),
            Construct::Streaming,
            vec![LoopNode::compare(r / (big_h * units), self.lanes())],
        );
        let join1 = LoopNode::new(
            "join_S",
            1.0,
            Construct::Streaming,
            vec![
                read("stream_S", s / big_h),
                LoopNode::new("pmu", units, Construct::Parallel(units), vec![s_loop]),
                LoopNode::dram("store_RS", inter / big_h, wide, Direction::Write, spill),
            ],
        );
        let phase1 = LoopNode::new(PHASE_JOIN1, big_h, self.tiled(), vec![read("load_R", r / big_h), join1]);

        let i_loop = LoopNode::new(
            "i_loop",
            inter / (big_g * units),
            Construct::Streaming,
            vec![LoopNode::compare(t / (big_g * units), self.lanes())],
        );
        let join2 = LoopNode::new(
            "join_RS",
            1.0,
            Construct::Streaming,
            vec![
                LoopNode::dram("stream_RS", inter / big_g, wide, Direction::Read, spill),
                LoopNode::new("pmu", units, Construct::Parallel(units), vec![i_loop]),
            ],
        );
        let phase2 = LoopNode::new(PHASE_JOIN2, big_g, self.tiled(), vec![read("load_T", t / big_g), join2]);

        let mut phases = Vec::new();
        if !star {
            let w = TUPLE_BYTES;
            phases.push(self.partition(&[(r, w, false), (s, w, false), (t, w, false), (inter, wide, spill)]));
        }
        phases.push(phase1);
        phases.push(phase2);
        let name = if star { "cascaded_star" } else { "cascaded" };
        Ok(LoopNode::new(name, 1.0, Construct::Sequential, phases))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::default_config;
    use crate::perfmodel::tree::{Body, Leaf};

    fn find<'a>(node: &'a LoopNode, label: &str) -> Option<&'a LoopNode> {
        if node.label == label {
            return Some(node);
        }
        node.children().iter().find_map(|c| find(c, label))
    }

    #[test]
    fn linear_branch_carries_g_over_d() {
        let cfg = default_config();
        let shape = CostInputs::new(1e8, 1e8, 1e8, 1e6, 1e6);
        let plan = HashPlan::new(128, 1, 64, 256, 1);
        let tree = build_loop_tree(Strategy::Linear3, &shape, &plan, &cfg).unwrap();
        assert_eq!(find(&tree, "match_R").unwrap().branch_prob, 256.0 / 1e6);
    }

    #[test]
    fn single_outer_trip() {
        let cfg = default_config();
        let shape = CostInputs::new(1e5, 1e5, 1e5, 1e6, 1e3);
        let plan = HashPlan::new(1, 1, 64, 16, 1);
        let tree = build_loop_tree(Strategy::Linear3, &shape, &plan, &cfg).unwrap();
        assert_eq!(find(&tree, PHASE_JOIN1).unwrap().trips, 1.0);
    }

    #[test]
    fn cascaded_comparisons_match_closed_form() {
        let cfg = default_config();
        let (r, s, t, d) = (3e7, 5e7, 2e7, 4e5);
        let shape = CostInputs::new(r, s, t, 1e6, d);
        let plan = HashPlan::new(32, 32, 64, 64, 1);
        for star in [false, true] {
            let strategy = if star { Strategy::CascadedStar } else { Strategy::Cascaded };
            let tree = build_loop_tree(strategy, &shape, &plan, &cfg).unwrap();
            let (big_h, big_g) = if star { (1.0, 1.0) } else { (32.0, 32.0) };
            let expect = r * s / (big_h * 64.0) + (r * s / d) * t / (big_g * 64.0);
            let got = tree.total_ops();
            assert!((got - expect).abs() <= 1e-9 * expect, "{got} vs {expect}");
        }
    }

    #[test]
    fn intermediate_leaves_spill_together() {
        let cfg = default_config();
        let shape = CostInputs::new(1e9, 1e9, 1e9, 1e6, 1e6);
        let plan = HashPlan::new(1024, 1024, 64, 64, 1);
        let tree = build_loop_tree(Strategy::Cascaded, &shape, &plan, &cfg).unwrap();
        for label in ["store_RS", "stream_RS"] {
            let node = find(&tree, label).unwrap();
            assert!(matches!(node.body, Body::Leaf(Leaf::Dram { spill: true, .. })));
        }
    }

    #[test]
    fn plan_shape_checked() {
        let cfg = default_config();
        let shape = CostInputs::new(1e5, 1e5, 1e5, 1e6, 1e3);
        let bad = HashPlan::new(1, 1, 32, 16, 1);
        assert!(build_loop_tree(Strategy::Linear3, &shape, &bad, &cfg).unwrap_err().is_infeasible());
        assert!(build_loop_tree(Strategy::Star3, &shape, &bad, &cfg).unwrap_err().is_infeasible());
        assert!(matches!(
            build_loop_tree(Strategy::Cyclic3, &shape, &bad, &cfg),
            Err(Error::Unsupported(_))
        ));
    }
}
