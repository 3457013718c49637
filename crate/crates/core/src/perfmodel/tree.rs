// SPDX-License-Identifier: Apache-2.0

//! Loop-tree runtime model.
//!
//! A node is a loop of `trips` iterations. Its body is either a leaf cost
//! paid once per iteration or a list of child loops combined by the node's
//! [`Construct`]. Evaluation returns, per node, the steady-state busy
//! cycles over all trips, the share of those cycles spent on DRAM transfers
//! and a latency paid once.
//!
//! Rules, with `c_k = busy_k + lat_k` per child and one parent iteration:
//! - sequential: `busy = trips * sum(c_k)`, no residual latency.
//! - parallel(P): iterations spread over `P` units, `trips_eff =
//!   max(trips / P, min(trips, 1))`; DRAM time is not divided because all
//!   units share one memory channel: `busy = max(trips_eff * sum(busy_k),
//!   trips * sum(dram_k))`, `lat = sum(lat_k)`.
//! - pipeline: the next iteration's children overlap with the current one,
//!   so for `trips >= 1` the time is `(trips - 1) * max(max c_k, sum dram_k)
//!   + sum(c_k)`.
//! - streaming: children run concurrently over the same stream; every trip
//!   costs the slowest child or the combined DRAM time, whichever is larger,
//!   and each child's latency is paid once.
//!
//! `branch_prob` scales the whole subtree, so a branch taken with
//! probability `p` contributes `p` times its cost.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machine::MachineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "p")]
pub enum Construct {
    Sequential,
    Parallel(f64),
    Pipeline,
    Streaming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Read,
    Write,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "leaf")]
pub enum Leaf {
    /// A fixed number of cycles with no latency.
    Cycles { cycles: f64 },
    /// Comparisons on one PCU lane.
    Compute { ops: f64 },
    /// A DRAM (or, when `spill`, persistent storage) transfer.
    Dram {
        tuples: f64,
        tuple_bytes: f64,
        direction: Direction,
        spill: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Body {
    Leaf(Leaf),
    Children(Vec<LoopNode>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopNode {
    pub label: String,
    pub trips: f64,
    pub construct: Construct,
    #[serde(default = "one")]
    pub branch_prob: f64,
    pub body: Body,
}

fn one() -> f64 {
    1.0
}

impl LoopNode {
    pub fn new(label: impl Into<String>, trips: f64, construct: Construct, children: Vec<LoopNode>) -> Self {
        LoopNode {
            label: label.into(),
            trips,
            construct,
            branch_prob: 1.0,
            body: Body::Children(children),
        }
    }

    pub fn leaf(label: impl Into<String>, trips: f64, construct: Construct, leaf: Leaf) -> Self {
        LoopNode {
            label: label.into(),
            trips,
            construct,
            branch_prob: 1.0,
            body: Body::Leaf(leaf),
        }
    }

    /// One streamed DRAM transfer of `tuples` tuples; the response latency
    /// is paid once.
    pub fn dram(label: impl Into<String>, tuples: f64, tuple_bytes: u64, direction: Direction, spill: bool) -> Self {
        Self::leaf(
            label,
            1.0,
            Construct::Streaming,
            Leaf::Dram {
                tuples,
                tuple_bytes: tuple_bytes as f64,
                direction,
                spill,
            },
        )
    }

    /// One comparison per iteration, spread over `lanes`.
    pub fn compare(trips: f64, lanes: f64) -> Self {
        Self::leaf("comp", trips, Construct::Parallel(lanes), Leaf::Compute { ops: 1.0 })
    }

    pub fn with_prob(mut self, p: f64) -> Self {
        self.branch_prob = p;
        self
    }

    pub fn children(&self) -> &[LoopNode] {
        match &self.body {
            Body::Children(c) => c,
            Body::Leaf(_) => &[],
        }
    }

    /// Depth-first visit with the expected number of executions of each node
    /// (the product of enclosing trip counts and branch probabilities).
    pub fn visit(&self, f: &mut impl FnMut(&LoopNode, f64)) {
        fn go(node: &LoopNode, outer: f64, f: &mut impl FnMut(&LoopNode, f64)) {
            let here = outer * node.branch_prob * node.trips;
            f(node, here);
            for c in node.children() {
                go(c, here, f);
            }
        }
        go(self, 1.0, f);
    }

    /// Expected tuples read from DRAM outside the partitioning phase.
    pub fn dram_tuple_volume(&self) -> f64 {
        let mut total = 0.0;
        for phase in self.phases() {
            if phase.label == PHASE_PARTITION {
                continue;
            }
            phase.visit(&mut |node, times| {
                if let Body::Leaf(Leaf::Dram {
                    tuples,
                    direction: Direction::Read,
                    ..
                }) = node.body
                {
                    total += times * tuples;
                }
            });
        }
        total
    }

    /// Expected comparisons over the whole tree.
    pub fn total_ops(&self) -> f64 {
        let mut total = 0.0;
        self.visit(&mut |node, times| {
            if let Body::Leaf(Leaf::Compute { ops }) = node.body {
                total += times * ops;
            }
        });
        total
    }

    /// Top-level phases: the root's children when the root is a single
    /// sequential pass, otherwise the root itself.
    fn phases(&self) -> Vec<&LoopNode> {
        match (&self.body, self.construct) {
            (Body::Children(c), Construct::Sequential) if self.trips == 1.0 && self.branch_prob == 1.0 => {
                c.iter().collect()
            }
            _ => alloc::vec![self],
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::MalformedTree(what));
        if !(self.trips >= 0.0) || !self.trips.is_finite() {
            return bad(alloc::format!("{}: trips {} must be finite and non-negative", self.label, self.trips));
        }
        if !(0.0..=1.0).contains(&self.branch_prob) {
            return bad(alloc::format!("{}: branch probability {} outside [0, 1]", self.label, self.branch_prob));
        }
        if let Construct::Parallel(p) = self.construct {
            if !(p >= 1.0) {
                return bad(alloc::format!("{}: parallelism {p} below 1", self.label));
            }
        }
        match &self.body {
            Body::Leaf(Leaf::Cycles { cycles: x }) | Body::Leaf(Leaf::Compute { ops: x }) if !(*x >= 0.0) => {
                bad(alloc::format!("{}: negative leaf cost", self.label))
            }
            Body::Leaf(Leaf::Dram { tuples, tuple_bytes, .. }) if !(*tuples >= 0.0 && *tuple_bytes >= 0.0) => {
                bad(alloc::format!("{}: negative transfer size", self.label))
            }
            Body::Leaf(_) => Ok(()),
            Body::Children(c) => c.iter().try_for_each(LoopNode::validate),
        }
    }
}

pub const PHASE_PARTITION: &str = "partition";
pub const PHASE_JOIN1: &str = "join1";
pub const PHASE_JOIN2: &str = "join2";

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub partition: f64,
    pub join1: f64,
    pub join2: f64,
}

impl Breakdown {
    pub fn total(&self) -> f64 {
        self.partition + self.join1 + self.join2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeEstimate {
    pub cycles: f64,
    pub seconds: f64,
    /// Label of the stage that limits throughput in the costliest phase.
    pub bottleneck: String,
    pub breakdown: Breakdown,
}

#[derive(Debug, Clone)]
struct Cost {
    busy: f64,
    dram: f64,
    lat: f64,
    bottleneck: String,
    /// Largest DRAM contributor, reported when DRAM contention dominates.
    dram_label: Option<(f64, String)>,
}

impl Cost {
    fn total(&self) -> f64 {
        self.busy + self.lat
    }

    fn scaled(mut self, p: f64) -> Self {
        self.busy *= p;
        self.dram *= p;
        self.lat *= p;
        if let Some((d, _)) = &mut self.dram_label {
            *d *= p;
        }
        self
    }
}

fn biggest_dram(children: &[Cost]) -> Option<(f64, String)> {
    children
        .iter()
        .filter_map(|c| c.dram_label.clone())
        .fold(None, |best: Option<(f64, String)>, cur| match best {
            Some(b) if b.0 >= cur.0 => Some(b),
            _ => Some(cur),
        })
}

fn argmax(children: &[Cost], key: impl Fn(&Cost) -> f64) -> Option<&Cost> {
    children.iter().fold(None, |best: Option<&Cost>, c| match best {
        Some(b) if key(b) >= key(c) => Some(b),
        _ => Some(c),
    })
}

fn eval(node: &LoopNode, cfg: &MachineConfig) -> Cost {
    let trips = node.trips;
    let trips_eff = match node.construct {
        Construct::Parallel(p) => (trips / p).max(trips.min(1.0)),
        _ => trips,
    };
    let cost = match &node.body {
        Body::Leaf(leaf) => {
            let (busy, dram, lat) = match *leaf {
                Leaf::Cycles { cycles } => (cycles, 0.0, 0.0),
                Leaf::Compute { ops } => (ops, 0.0, cfg.compute_latency_cycles()),
                Leaf::Dram {
                    tuples,
                    tuple_bytes,
                    spill,
                    ..
                } => {
                    let bytes = tuples * tuple_bytes;
                    let charged = if bytes > 0.0 { bytes.max(cfg.dram_granule_bytes as f64) } else { 0.0 };
                    let t = charged / cfg.bytes_per_cycle(spill);
                    (t, t, cfg.dram_latency_cycles())
                }
            };
            let (busy, lat) = match node.construct {
                Construct::Sequential => (trips * (busy + lat), 0.0),
                _ => ((trips_eff * busy).max(trips * dram), lat),
            };
            let dram_total = trips * dram;
            Cost {
                busy,
                dram: dram_total,
                lat,
                bottleneck: node.label.clone(),
                dram_label: (dram > 0.0).then(|| (dram_total, node.label.clone())),
            }
        }
        Body::Children(children) => {
            let cs: Vec<Cost> = children.iter().map(|c| eval(c, cfg)).collect();
            let sum_total: f64 = cs.iter().map(Cost::total).sum();
            let sum_busy: f64 = cs.iter().map(|c| c.busy).sum();
            let sum_lat: f64 = cs.iter().map(|c| c.lat).sum();
            let sum_dram: f64 = cs.iter().map(|c| c.dram).sum();
            let dram_label = biggest_dram(&cs).map(|(d, l)| (d * trips, l));
            let label_of = |pick: Option<&Cost>| pick.map(|c| c.bottleneck.clone()).unwrap_or_else(|| node.label.clone());
            let dram_name = || dram_label.as_ref().map(|(_, l)| l.clone()).unwrap_or_else(|| node.label.clone());
            let (busy, lat, bottleneck) = match node.construct {
                Construct::Sequential => (trips * sum_total, 0.0, label_of(argmax(&cs, Cost::total))),
                Construct::Parallel(_) => {
                    let compute = trips_eff * sum_busy;
                    let dram = trips * sum_dram;
                    if dram > compute {
                        (dram, sum_lat, dram_name())
                    } else {
                        (compute, sum_lat, label_of(argmax(&cs, |c| c.busy)))
                    }
                }
                Construct::Pipeline => {
                    let stage = cs.iter().map(Cost::total).fold(0.0, f64::max);
                    let (steady, name) = if sum_dram > stage {
                        (sum_dram, dram_name())
                    } else {
                        (stage, label_of(argmax(&cs, Cost::total)))
                    };
                    let busy = if trips >= 1.0 { (trips - 1.0) * steady + sum_total } else { trips * sum_total };
                    (busy, 0.0, name)
                }
                Construct::Streaming => {
                    let stage = cs.iter().map(|c| c.busy).fold(0.0, f64::max);
                    let (steady, name) = if sum_dram > stage {
                        (sum_dram, dram_name())
                    } else {
                        (stage, label_of(argmax(&cs, |c| c.busy)))
                    };
                    (trips * steady, sum_lat, name)
                }
            };
            Cost {
                busy,
                dram: trips * sum_dram,
                lat,
                bottleneck,
                dram_label,
            }
        }
    };
    cost.scaled(node.branch_prob)
}

/// Cycles of one subtree, latency included.
pub fn evaluate_cycles(tree: &LoopNode, cfg: &MachineConfig) -> Result<f64> {
    tree.validate()?;
    Ok(eval(tree, cfg).total())
}

fn phase_slot<'a>(b: &'a mut Breakdown, label: &str) -> &'a mut f64 {
    match label {
        PHASE_PARTITION => &mut b.partition,
        PHASE_JOIN2 => &mut b.join2,
        _ => &mut b.join1,
    }
}

pub fn evaluate_runtime(tree: &LoopNode, cfg: &MachineConfig) -> Result<RuntimeEstimate> {
    tree.validate()?;
    cfg.validate()?;
    let mut breakdown = Breakdown::default();
    let mut worst: Option<(f64, String)> = None;
    for phase in tree.phases() {
        let c = eval(phase, cfg);
        let t = c.total();
        *phase_slot(&mut breakdown, &phase.label) += t;
        if worst.as_ref().is_none_or(|(w, _)| t > *w) {
            worst = Some((t, c.bottleneck));
        }
    }
    let cycles = breakdown.total();
    Ok(RuntimeEstimate {
        cycles,
        seconds: cycles / cfg.clock_hz,
        bottleneck: worst.map(|(_, l)| l).unwrap_or_else(|| tree.label.to_string()),
        breakdown,
    })
}
