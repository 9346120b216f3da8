//! A-posteriori simplification of collision rules and operation counting.

mod cse;
mod opcount;
mod pipeline;
mod report;
mod steps;

pub use cse::eliminate_common_subexpressions;
pub use opcount::{count_collection, count_ops, OpCount};
pub use pipeline::{run_pipeline, simplify, PipelineReport, SimplificationConfig, Step};
pub use report::{opcount_table, regularization_savings, render_savings, OpCountRow, OpCountTable, SavingsRow};
pub use steps::{
    collapse_conserved_central_moments, conserved_quantity_rewrite, eliminate_unused, expression_propagation,
    propagate_expressions, propagate_logarithms, unused_elimination,
};
