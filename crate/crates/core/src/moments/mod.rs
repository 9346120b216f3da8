//! Collision-space transforms: moment matrices, the staged ("chimera")
//! population/raw-moment and raw/central-moment transforms, cumulant
//! relations derived from generating functions, and polynomial recombination.

mod binomial;
mod chimera;
mod cumulant;
mod matrix;
mod names;
mod recombine;

pub use binomial::binomial_chimera;
pub use chimera::{chimera_backward_raw, chimera_forward_raw, matrix_backward_raw};
pub use cumulant::{central_from_cumulant, cumulant_from_central, CumulantNames};
pub use matrix::{central_moment_matrix, raw_moment_matrix};
pub use names::MomentNames;
pub use recombine::{exponent_set, monomialize, polynomialize};

use thiserror::Error;

use crate::lattice::Exponent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MomentError {
    #[error("moment matrix is singular; dependent rows {0:?}")]
    Singular(Vec<usize>),
    #[error("basis polynomial {index} uses monomial {monomial:?} outside the exponent set")]
    MonomialOutsideSet { index: usize, monomial: Exponent },
    #[error("basis spans {rank} of {needed} monomial quantities; cannot decompose")]
    NotInvertible { rank: usize, needed: usize },
}
