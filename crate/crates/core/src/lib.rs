//! Symbolic derivation, simplification, execution and C emission of
//! multiple-relaxation-time lattice Boltzmann collision kernels.

pub mod symexpr;
pub mod linalg;
pub mod lattice;
pub mod moments;
pub mod simplify;
pub mod equilibrium;
pub mod method;
pub mod kernelgen;
pub mod harness;
