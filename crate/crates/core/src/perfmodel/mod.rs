// SPDX-License-Identifier: Apache-2.0

//! Closed-form tuples-read costs and the loop-tree runtime model.

mod build;
mod formulas;
mod search;
mod tree;

pub use build::{build_loop_tree, intermediate_spills};
pub use formulas::{
    cyclic_cost, cyclic_cost_hg, cyclic_min_cost, intermediate_size, optimal_h, solve_crossover, tuples_read_linear,
    CostInputs,
};
pub use search::{
    best_plan, candidate_plans, check_feasible, compare_best, compare_strategies, default_plan, default_plan_with_fill,
    estimate, star_split, Comparison, Pairing, FINE_BUCKET_TUPLES, MAX_FINE_LOG2, OUTER_DOUBLINGS,
};
pub use tree::{
    evaluate_cycles, evaluate_runtime, Body, Breakdown, Construct, Direction, Leaf, LoopNode, RuntimeEstimate,
    PHASE_JOIN1, PHASE_JOIN2, PHASE_PARTITION,
};
