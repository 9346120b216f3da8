//! Binding collision rules to periodic fields, executing them through a
//! compiled tape, and emitting equivalent C.

mod emit;
mod field;
mod tape;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::method::CollisionRule;

pub use emit::emit_c;
pub use field::Field;
pub use tape::{compile_tape, BinaryOp, Instr, KernelTape, Reg, UnaryOp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("streaming pattern `{0}` works in place and is not supported; use pull or push")]
    InPlacePattern(String),
    #[error("unknown streaming pattern `{0}` (expected pull or push)")]
    UnknownPattern(String),
    #[error("field dimensions {0:?}: need 2 or 3 extents, each at least 4")]
    BadDimensions(Vec<usize>),
    #[error("source and destination fields do not match the kernel")]
    DimensionMismatch,
    #[error("symbol `{0}` is neither assigned, an input, nor a parameter")]
    UnboundSymbol(String),
    #[error("no value given for parameter `{0}`")]
    MissingParameter(String),
    #[error("assignments are not in dependency order")]
    NotTopological,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StreamingPattern {
    #[default]
    Pull,
    Push,
}

impl FromStr for StreamingPattern {
    type Err = KernelError;
    fn from_str(s: &str) -> Result<Self, KernelError> {
        let l = s.to_ascii_lowercase();
        match l.as_str() {
            "pull" => Ok(StreamingPattern::Pull),
            "push" => Ok(StreamingPattern::Push),
            "aa" | "esotwist" | "esopull" | "esopush" | "esoteric" | "in-place" => Err(KernelError::InPlacePattern(s.into())),
            _ if l.starts_with("eso") => Err(KernelError::InPlacePattern(s.into())),
            _ => Err(KernelError::UnknownPattern(s.into())),
        }
    }
}

impl fmt::Display for StreamingPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StreamingPattern::Pull => "pull",
            StreamingPattern::Push => "push",
        })
    }
}

/// A population slot relative to the current cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldAccess {
    pub index: usize,
    pub offset: [i32; 3],
}

/// A collision rule with its inputs bound to source-field reads and its
/// outputs to destination-field writes.
#[derive(Debug, Clone)]
pub struct BoundRule {
    pub rule: CollisionRule,
    pub pattern: StreamingPattern,
    pub reads: Vec<FieldAccess>,
    pub writes: Vec<FieldAccess>,
}

/// Pull reads `f_i` at `-ξ_i` and writes locally; push reads locally and
/// writes at `+ξ_i`.
pub fn apply_streaming(rule: &CollisionRule, pattern: StreamingPattern) -> BoundRule {
    let st = &rule.method.stencil;
    let here = [0; 3];
    let mut reads = Vec::with_capacity(st.q());
    let mut writes = Vec::with_capacity(st.q());
    for (i, c) in st.velocities.iter().enumerate() {
        let back = [-c[0], -c[1], -c[2]];
        let (r, w) = match pattern {
            StreamingPattern::Pull => (back, here),
            StreamingPattern::Push => (here, *c),
        };
        reads.push(FieldAccess { index: i, offset: r });
        writes.push(FieldAccess { index: i, offset: w });
    }
    BoundRule { rule: rule.clone(), pattern, reads, writes }
}
