// SPDX-License-Identifier: Apache-2.0

//! Subcommand bodies. Each takes a resolved [`ExperimentSpec`] and returns
//! the data the caller writes out; nothing here parses arguments.

use std::fs;
use std::path::{Path, PathBuf};

use mwjoin_core::datagen::HashPlan;
use mwjoin_core::engine::{Engine, RunStats};
use mwjoin_core::oracle::{oracle_cyclic3, oracle_linear3, JoinAggregate};
use mwjoin_core::perfmodel::{
    best_plan, build_loop_tree, compare_best, cyclic_cost_hg, cyclic_min_cost, estimate, intermediate_spills, optimal_h,
    CostInputs, LoopNode, RuntimeEstimate,
};
use mwjoin_core::{Error, Relation, Strategy};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::io::{read_relation, sha256_hex, write_relation, Table};
use crate::spec::{ExperimentSpec, Shape};

/// On-chip fill used to size engine plans. Real partitions are only
/// uniform in expectation, so the engine plans for half the capacity.
pub const ENGINE_FILL: f64 = 0.5;

pub const RELATION_FILES: [&str; 3] = ["R.csv", "S.csv", "T.csv"];

/// Writes `R.csv`, `S.csv`, `T.csv` into `dir`; returns each path with its SHA-256.
pub fn gen(spec: &ExperimentSpec, dir: &Path) -> Result<Vec<(PathBuf, String)>> {
    spec.validate()?;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    for (rel, file) in spec.relations()?.iter().zip(RELATION_FILES) {
        let path = dir.join(file);
        let mut buf = Vec::new();
        write_relation(rel, &mut buf).map_err(|e| CliError::csv(&path, e))?;
        fs::write(&path, &buf).map_err(|e| CliError::io(&path, e))?;
        written.push((path, sha256_hex(&buf)));
    }
    Ok(written)
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub strategy: Strategy,
    /// Directory holding `R.csv`, `S.csv`, `T.csv`; generated from the experiment when unset.
    pub input: Option<PathBuf>,
    pub verify: bool,
    pub oracle_limit: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Sizes {
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "T")]
    pub t: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub strategy: Strategy,
    pub sizes: Sizes,
    pub plan: HashPlan,
    #[serde(flatten)]
    pub stats: RunStats,
    /// Distinct A values in the result.
    pub groups: usize,
    /// Result cardinality.
    pub result_tuples: u64,
    /// Oracle agreement; null when not requested or over the size limit.
    pub verified: Option<bool>,
    pub spec: ExperimentSpec,
}

fn load_relations(spec: &ExperimentSpec, input: Option<&Path>) -> Result<[Relation; 3]> {
    match input {
        Some(dir) => {
            let [r, s, t] = RELATION_FILES.map(|f| read_relation(&dir.join(f)));
            Ok([r?, s?, t?])
        }
        None => {
            spec.validate()?;
            spec.relations()
        }
    }
}

/// Runs the engine once. A failed verification is reported in the result,
/// not as an error, so the caller can still write the report.
pub fn run(spec: &ExperimentSpec, opts: &RunOptions) -> Result<(RunReport, JoinAggregate)> {
    if opts.input.is_none() {
        spec.shape.check_strategy(opts.strategy)?;
    }
    let [r, s, t] = load_relations(spec, opts.input.as_deref())?;
    let cfg = &spec.machine;
    let shape = CostInputs::new(r.size() as f64, s.size() as f64, t.size() as f64, cfg.tuple_capacity() as f64, spec.d as f64);
    let plan = spec.plan(opts.strategy, &shape, ENGINE_FILL)?;
    let (agg, stats) = Engine::new(cfg).run(opts.strategy, &r, &s, &t, &plan)?;
    let total = (r.size() + s.size() + t.size()) as u64;
    let verified = if !opts.verify {
        None
    } else if total > opts.oracle_limit {
        eprintln!("warning: {total} tuples exceed the oracle limit of {}; skipping --verify", opts.oracle_limit);
        None
    } else {
        let expect = match opts.strategy {
            Strategy::Cyclic3 => oracle_cyclic3(&r, &s, &t)?,
            _ => oracle_linear3(&r, &s, &t)?,
        };
        Some(expect == agg)
    };
    let report = RunReport {
        strategy: opts.strategy,
        sizes: Sizes {
            r: r.size(),
            s: s.size(),
            t: t.size(),
        },
        plan,
        stats,
        groups: agg.len(),
        result_tuples: agg.total(),
        verified,
        spec: spec.clone(),
    };
    Ok((report, agg))
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelReport {
    pub strategy: Strategy,
    pub inputs: CostInputs,
    pub plan: HashPlan,
    /// True when the plan came from the bucket-count search.
    pub searched: bool,
    /// Null for the cyclic join, which has only the tuples-read formulas.
    pub estimate: Option<RuntimeEstimate>,
    /// DRAM tuples read by the join phases.
    pub dram_tuples: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intermediate_tuples: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spilled: Option<bool>,
    #[serde(rename = "optimal_H", skip_serializing_if = "Option::is_none")]
    pub optimal_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_dram_tuples: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<LoopNode>,
}

/// Model evaluation of one point. `plan` pins the bucket counts; `None`
/// searches them unless the experiment overrides any.
pub fn model(spec: &ExperimentSpec, strategy: Strategy, plan: Option<HashPlan>, with_tree: bool) -> Result<ModelReport> {
    spec.validate()?;
    spec.shape.check_strategy(strategy)?;
    let inputs = spec.cost_inputs()?;
    let cfg = &spec.machine;
    if strategy == Strategy::Cyclic3 {
        let plan = match plan {
            Some(p) => p,
            None => spec.plan(strategy, &inputs, 1.0)?,
        };
        let with_hg = inputs.with_buckets(plan.coarse_h as f64, plan.coarse_g as f64);
        return Ok(ModelReport {
            strategy,
            inputs,
            plan,
            searched: false,
            estimate: None,
            dram_tuples: cyclic_cost_hg(&with_hg)?,
            intermediate_tuples: None,
            spilled: None,
            optimal_h: Some(optimal_h(&inputs)?),
            min_dram_tuples: Some(cyclic_min_cost(&inputs)?),
            tree: None,
        });
    }
    let (plan, searched) = match plan {
        Some(p) => (p, false),
        None if !spec.plan.is_empty() => (spec.plan(strategy, &inputs, 1.0)?, false),
        None => (best_plan(strategy, &inputs, cfg)?.0, true),
    };
    let est = estimate(strategy, &inputs, &plan, cfg)?;
    let tree = build_loop_tree(strategy, &inputs, &plan, cfg)?;
    let cascaded = strategy.is_cascaded();
    Ok(ModelReport {
        strategy,
        inputs,
        plan,
        searched,
        estimate: Some(est),
        dram_tuples: tree.dram_tuple_volume(),
        intermediate_tuples: if cascaded { Some(inputs.intermediate_tuples()?) } else { None },
        spilled: if cascaded { Some(intermediate_spills(&inputs, cfg)?) } else { None },
        optimal_h: None,
        min_dram_tuples: None,
        tree: with_tree.then_some(tree),
    })
}

/// One model point, optionally with engine counters; the row shared by
/// `model --format csv` and `sweep`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PointRow {
    pub axis: String,
    pub value: String,
    pub strategy: String,
    #[serde(rename = "N")]
    pub n: u64,
    pub d: u64,
    pub dram_bw: f64,
    #[serde(rename = "H_bkt")]
    pub coarse_h: Option<u32>,
    #[serde(rename = "G_bkt")]
    pub coarse_g: Option<u32>,
    #[serde(rename = "h_bkt")]
    pub fine_h: Option<u32>,
    #[serde(rename = "g_bkt")]
    pub fine_g: Option<u32>,
    #[serde(rename = "f_bkt")]
    pub fine_f: Option<u32>,
    pub cycles: Option<f64>,
    pub seconds: Option<f64>,
    pub partition_cycles: Option<f64>,
    pub join1_cycles: Option<f64>,
    pub join2_cycles: Option<f64>,
    pub bottleneck: Option<String>,
    pub dram_tuples: Option<f64>,
    pub spilled: Option<bool>,
    pub engine_dram_tuples_read: Option<u64>,
    pub engine_onchip_broadcasts: Option<u64>,
    pub engine_comparisons: Option<u64>,
    pub engine_intermediate_tuples: Option<u64>,
    pub note: String,
}

impl Table for PointRow {
    const COLUMNS: &'static [&'static str] = &[
        "axis",
        "value",
        "strategy",
        "N",
        "d",
        "dram_bw",
        "H_bkt",
        "G_bkt",
        "h_bkt",
        "g_bkt",
        "f_bkt",
        "cycles",
        "seconds",
        "partition_cycles",
        "join1_cycles",
        "join2_cycles",
        "bottleneck",
        "dram_tuples",
        "spilled",
        "engine_dram_tuples_read",
        "engine_onchip_broadcasts",
        "engine_comparisons",
        "engine_intermediate_tuples",
        "note",
    ];
}

impl PointRow {
    fn new(spec: &ExperimentSpec, strategy: Strategy) -> Self {
        PointRow {
            strategy: strategy.name().into(),
            n: spec.n,
            d: spec.d,
            dram_bw: spec.machine.dram_bw,
            ..PointRow::default()
        }
    }

    fn set_plan(&mut self, plan: &HashPlan) {
        self.coarse_h = Some(plan.coarse_h);
        self.coarse_g = Some(plan.coarse_g);
        self.fine_h = Some(plan.fine_h);
        self.fine_g = Some(plan.fine_g);
        self.fine_f = Some(plan.fine_f);
    }

    pub fn from_model(spec: &ExperimentSpec, report: &ModelReport) -> Self {
        let mut row = PointRow::new(spec, report.strategy);
        row.set_plan(&report.plan);
        if let Some(est) = &report.estimate {
            row.cycles = Some(est.cycles);
            row.seconds = Some(est.seconds);
            row.partition_cycles = Some(est.breakdown.partition);
            row.join1_cycles = Some(est.breakdown.join1);
            row.join2_cycles = Some(est.breakdown.join2);
            row.bottleneck = Some(est.bottleneck.clone());
        } else {
            row.note = format!("no runtime model for {}", report.strategy);
        }
        row.dram_tuples = Some(report.dram_tuples);
        row.spilled = report.spilled;
        row
    }

    fn add_note(&mut self, note: String) {
        if !self.note.is_empty() {
            self.note.push_str("; ");
        }
        self.note.push_str(&note);
    }

    fn set_engine(&mut self, stats: &RunStats) {
        self.engine_dram_tuples_read = Some(stats.dram_tuples_read);
        self.engine_onchip_broadcasts = Some(stats.onchip_broadcasts);
        self.engine_comparisons = Some(stats.comparisons);
        self.engine_intermediate_tuples = Some(stats.intermediate_tuples);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
pub enum Axis {
    #[value(name = "H_bkt")]
    #[serde(rename = "H_bkt")]
    CoarseH,
    #[value(name = "g_bkt")]
    #[serde(rename = "g_bkt")]
    FineG,
    #[value(name = "dram_bw")]
    #[serde(rename = "dram_bw")]
    DramBw,
    #[value(name = "N")]
    #[serde(rename = "N")]
    N,
    #[value(name = "d")]
    #[serde(rename = "d")]
    D,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::CoarseH => "H_bkt",
            Axis::FineG => "g_bkt",
            Axis::DramBw => "dram_bw",
            Axis::N => "N",
            Axis::D => "d",
        }
    }

    fn is_plan_axis(self) -> bool {
        matches!(self, Axis::CoarseH | Axis::FineG)
    }

    pub fn check(self, strategy: Strategy) -> Result<()> {
        let ok = match self {
            Axis::CoarseH => matches!(strategy, Strategy::Linear3 | Strategy::Cascaded | Strategy::Cyclic3),
            Axis::FineG => matches!(strategy, Strategy::Linear3 | Strategy::Star3),
            Axis::DramBw | Axis::N | Axis::D => true,
        };
        if ok {
            Ok(())
        } else {
            Err(CliError::Usage(format!("axis {} does not apply to strategy {strategy}", self.name())))
        }
    }
}

fn parse_count(axis: Axis, text: &str) -> Result<u64> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{} value {text:?} is not a number", axis.name())))?;
    if !(v >= 1.0 && v.fract() == 0.0 && v <= u64::MAX as f64) {
        return Err(CliError::Usage(format!("{} value {text:?} must be a positive integer", axis.name())));
    }
    Ok(v as u64)
}

#[derive(Debug, Clone, Copy)]
enum AxisValue {
    Count(u64),
    Bandwidth(f64),
}

fn parse_value(axis: Axis, text: &str) -> Result<AxisValue> {
    match axis {
        Axis::DramBw => {
            let bw: f64 = text
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("dram_bw value {text:?} is not a number")))?;
            if !(bw > 0.0 && bw.is_finite()) {
                return Err(CliError::Usage(format!("dram_bw value {text:?} must be positive")));
            }
            Ok(AxisValue::Bandwidth(bw))
        }
        Axis::CoarseH | Axis::FineG => {
            let v = parse_count(axis, text)?;
            u32::try_from(v)
                .map(|v| AxisValue::Count(v as u64))
                .map_err(|_| CliError::Usage(format!("{} value {v} exceeds u32", axis.name())))
        }
        Axis::N | Axis::D => Ok(AxisValue::Count(parse_count(axis, text)?)),
    }
}

/// Applies a plan axis value to a default plan.
fn pin_plan(axis: Axis, strategy: Strategy, value: u64, mut plan: HashPlan, units: u32) -> Result<HashPlan> {
    let v = value as u32;
    match axis {
        Axis::CoarseH => plan.coarse_h = v,
        Axis::FineG if strategy == Strategy::Star3 => {
            // Star plans keep h * g = U.
            if !units.is_multiple_of(v) {
                return Err(Error::Infeasible(format!("g_bkt = {v} does not divide U = {units}")).into());
            }
            plan.fine_g = v;
            plan.fine_h = units / v;
        }
        Axis::FineG => plan.fine_g = v,
        _ => {}
    }
    Ok(plan)
}

pub struct SweepOptions {
    pub strategy: Strategy,
    pub axis: Axis,
    pub values: Vec<String>,
    /// Run the engine at every point as well; needs materialized data.
    pub engine: bool,
}

/// One row per value, in input order. Infeasible points keep their row
/// with the reason in `note`.
pub fn sweep(spec: &ExperimentSpec, opts: &SweepOptions) -> Result<Vec<PointRow>> {
    opts.axis.check(opts.strategy)?;
    spec.shape.check_strategy(opts.strategy)?;
    let values: Vec<(String, AxisValue)> = opts
        .values
        .iter()
        .filter(|v| !v.trim().is_empty())
        .map(|v| parse_value(opts.axis, v).map(|parsed| (v.trim().to_string(), parsed)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(values.len());
    for (text, value) in values {
        let mut point = spec.clone();
        match (opts.axis, value) {
            (Axis::DramBw, AxisValue::Bandwidth(bw)) => point.machine.dram_bw = bw,
            (Axis::N, AxisValue::Count(n)) => point.n = n,
            (Axis::D, AxisValue::Count(d)) => point.d = d,
            _ => {}
        }
        point.validate()?;
        let mut row = PointRow::new(&point, opts.strategy);
        let pinned = match (opts.axis.is_plan_axis(), value) {
            (true, AxisValue::Count(v)) => {
                let base = point.plan(opts.strategy, &point.cost_inputs()?, 1.0)?;
                match pin_plan(opts.axis, opts.strategy, v, base, point.machine.units) {
                    Ok(p) => Some(p),
                    Err(e) => {
                        row.add_note(e.to_string());
                        row.set_plan(&base);
                        None
                    }
                }
            }
            _ => None,
        };
        if !(opts.axis.is_plan_axis() && pinned.is_none()) {
            match model(&point, opts.strategy, pinned, false) {
                Ok(report) => {
                    let note = std::mem::take(&mut row.note);
                    row = PointRow::from_model(&point, &report);
                    if !note.is_empty() {
                        row.add_note(note);
                    }
                    if opts.engine {
                        run_engine_point(&point, opts.strategy, &report.plan, &mut row)?;
                    }
                }
                Err(CliError::Core(e)) if e.is_infeasible() => row.add_note(e.to_string()),
                Err(e) => return Err(e),
            }
        }
        row.axis = opts.axis.name().into();
        row.value = text;
        rows.push(row);
    }
    Ok(rows)
}

fn run_engine_point(spec: &ExperimentSpec, strategy: Strategy, plan: &HashPlan, row: &mut PointRow) -> Result<()> {
    let [r, s, t] = spec.relations()?;
    match Engine::new(&spec.machine).run(strategy, &r, &s, &t, plan) {
        Ok((_, stats)) => row.set_engine(&stats),
        Err(e) if e.is_infeasible() => row.add_note(format!("engine: {e}")),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CompareRow {
    #[serde(rename = "N")]
    pub n: u64,
    pub d: u64,
    #[serde(rename = "K")]
    pub k: Option<u64>,
    pub dram_bw: f64,
    pub three_way: String,
    pub binary: String,
    #[serde(rename = "three_way_H_bkt")]
    pub three_way_coarse_h: Option<u32>,
    pub three_way_h_bkt: Option<u32>,
    pub three_way_g_bkt: Option<u32>,
    #[serde(rename = "binary_H_bkt")]
    pub binary_coarse_h: Option<u32>,
    #[serde(rename = "binary_G_bkt")]
    pub binary_coarse_g: Option<u32>,
    pub three_way_cycles: Option<f64>,
    pub binary_cycles: Option<f64>,
    pub three_way_seconds: Option<f64>,
    pub binary_seconds: Option<f64>,
    pub speedup: Option<f64>,
    pub intermediate_tuples: Option<f64>,
    pub spilled: Option<bool>,
    pub note: String,
}

impl Table for CompareRow {
    const COLUMNS: &'static [&'static str] = &[
        "N",
        "d",
        "K",
        "dram_bw",
        "three_way",
        "binary",
        "three_way_H_bkt",
        "three_way_h_bkt",
        "three_way_g_bkt",
        "binary_H_bkt",
        "binary_G_bkt",
        "three_way_cycles",
        "binary_cycles",
        "three_way_seconds",
        "binary_seconds",
        "speedup",
        "intermediate_tuples",
        "spilled",
        "note",
    ];
}

pub struct CompareGrid {
    pub ns: Vec<u64>,
    pub ds: Vec<u64>,
    pub bandwidths: Vec<f64>,
}

/// Best-plan 3-way against best-plan cascaded runtime for every
/// `(N, d, dram_bw)`, nested in that order.
pub fn compare(spec: &ExperimentSpec, grid: &CompareGrid) -> Result<Vec<CompareRow>> {
    let pairing = spec.shape.pairing()?;
    if !spec.plan.is_empty() {
        return Err(CliError::Usage("compare searches bucket counts itself; drop the bucket flags".into()));
    }
    let mut rows = Vec::new();
    for &n in &grid.ns {
        for &d in &grid.ds {
            for &bw in &grid.bandwidths {
                let mut point = spec.clone();
                point.n = n;
                point.d = d;
                point.machine.dram_bw = bw;
                point.validate()?;
                let inputs = point.cost_inputs()?;
                let mut row = CompareRow {
                    n,
                    d,
                    k: if point.shape == Shape::Star { point.k } else { None },
                    dram_bw: bw,
                    three_way: pairing.three_way().name().into(),
                    binary: pairing.binary().name().into(),
                    intermediate_tuples: Some(inputs.intermediate_tuples()?),
                    ..CompareRow::default()
                };
                match compare_best(pairing, &inputs, &point.machine) {
                    Ok((plan3, plan2, cmp)) => {
                        row.three_way_coarse_h = Some(plan3.coarse_h);
                        row.three_way_h_bkt = Some(plan3.fine_h);
                        row.three_way_g_bkt = Some(plan3.fine_g);
                        row.binary_coarse_h = Some(plan2.coarse_h);
                        row.binary_coarse_g = Some(plan2.coarse_g);
                        row.three_way_cycles = Some(cmp.three_way.cycles);
                        row.binary_cycles = Some(cmp.binary.cycles);
                        row.three_way_seconds = Some(cmp.three_way.seconds);
                        row.binary_seconds = Some(cmp.binary.seconds);
                        row.speedup = Some(cmp.speedup);
                        row.spilled = Some(cmp.spilled);
                    }
                    Err(e) if e.is_infeasible() => row.note = e.to_string(),
                    Err(e) => return Err(e.into()),
                }
                rows.push(row);
            }
        }
    }
    Ok(rows)
}
