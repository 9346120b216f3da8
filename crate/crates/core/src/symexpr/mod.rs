//! Minimal computer algebra: canonical expression trees over exact rationals,
//! substitution, expansion, differentiation, numeric evaluation and
//! single-assignment collections.

mod assign;
mod calculus;
mod eval;
mod expr;

pub use assign::{Assignment, AssignmentCollection};
pub use calculus::{
    contains_symbol, degree_in, differentiate, differentiate_with, expand, free_symbols, rebuild,
    replace_subtree, substitute, substitute_one,
};
pub use eval::{evaluate, Env};
pub(crate) use eval::{negated_product, product_parts};
pub use expr::{int, normalize, rat, rational_to_f64, Expr, Node, Rational, Symbol};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymError {
    #[error("division by literal zero")]
    DivisionByZero,
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
    #[error("logarithm of non-positive value {0}")]
    LogDomain(f64),
}
