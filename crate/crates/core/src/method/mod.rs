//! Abstract method model and collision-rule derivation.
//!
//! A [`MethodSpec`] fixes the stencil, storage format, collision space,
//! basis, relaxation rates and equilibrium. [`derive_collision_rule`] turns
//! it into a single-assignment program for one of three regimes:
//!
//! * absolute storage, absolute equilibrium:
//!   `f* = T⁻¹(q + S(q^eq − q))`;
//! * zero-centered storage, deviation equilibrium (linear `T` only):
//!   `δf* = T⁻¹(δq + S(δq^eq − δq))`;
//! * zero-centered storage, absolute equilibrium:
//!   `q = T(δf + f⁰)`, `δf* = T⁻¹(q + S(q^eq − q)) − f⁰`.

mod derive;
mod presets;

pub use derive::{conserved_quantity_equations, derive_collision_rule, CollisionRule, PhaseCounts, RuleInfo};
pub use presets::{preset, MethodPreset};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::{Equilibrium, EquilibriumError};
use crate::lattice::{moment_order, CollisionSpaceBasis, LatticeError, MomentPolynomial, SpaceKind, Stencil};
use crate::moments::MomentError;
use crate::symexpr::{int, Expr, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StorageFormat {
    Absolute,
    ZeroCentered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConservedMode {
    DensityVelocity,
    HeightVelocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "order")]
pub enum Regularization {
    /// All rates but the shear rates set to one.
    Full,
    /// Rates of polynomials of at least this order set to one.
    HigherOrder(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub stencil: Stencil,
    pub storage: StorageFormat,
    pub space: SpaceKind,
    /// Collision-space basis; in population space only its exponent set is
    /// used (to build the discrete equilibrium).
    pub basis: CollisionSpaceBasis,
    /// One rate per basis polynomial, or a single rate in population space.
    pub rates: Vec<Expr>,
    pub equilibrium: Equilibrium,
    /// Source term in collision space; `None` means no force.
    pub source: Option<Vec<Expr>>,
    pub conserved: ConservedMode,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MethodError {
    #[error("equilibrium: deviation-only equilibria require zero-centered storage")]
    DeltaRequiresZeroCentered,
    #[error("equilibrium: cumulant space is incompatible with deviation-only equilibria")]
    CumulantWithDelta,
    #[error("relaxation: expected {expected} rates, got {got}")]
    RateCount { expected: usize, got: usize },
    #[error("basis: {0}")]
    Basis(#[from] LatticeError),
    #[error("stencil: equilibrium is {eq}-dimensional, stencil is {stencil}-dimensional")]
    Dimension { eq: usize, stencil: usize },
    #[error("source term: expected {expected} entries, got {got}")]
    SourceLength { expected: usize, got: usize },
    #[error("conserved quantities: mode {mode:?} does not match equilibrium density `{density}`")]
    ConservedMismatch { mode: ConservedMode, density: String },
    #[error("equilibrium: {0}")]
    Equilibrium(#[from] EquilibriumError),
    #[error("transform: {0}")]
    Transform(#[from] MomentError),
    #[error("invalid method: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<MethodError>),
}

/// Checks the structural restrictions on a method; reports every violation.
pub fn validate(spec: &MethodSpec) -> Result<(), Vec<MethodError>> {
    let mut errs = Vec::new();
    let eq = &spec.equilibrium;
    if eq.deviation_only && spec.storage == StorageFormat::Absolute {
        errs.push(MethodError::DeltaRequiresZeroCentered);
    }
    if eq.deviation_only && spec.space == SpaceKind::Cumulant {
        errs.push(MethodError::CumulantWithDelta);
    }
    if eq.dim != spec.stencil.dim {
        errs.push(MethodError::Dimension { eq: eq.dim, stencil: spec.stencil.dim });
    }
    let expected = if spec.space == SpaceKind::Population { 1 } else { spec.basis.len() };
    if spec.rates.len() != expected {
        errs.push(MethodError::RateCount { expected, got: spec.rates.len() });
    }
    if let Err(e) = spec.basis.check_independent(&spec.stencil) {
        errs.push(e.into());
    }
    if let Some(src) = &spec.source {
        let n = if spec.space == SpaceKind::Population { spec.stencil.q() } else { spec.basis.len() };
        if src.len() != n {
            errs.push(MethodError::SourceLength { expected: n, got: src.len() });
        }
    }
    let density = eq.symbols.density.name();
    let mode_ok = match spec.conserved {
        ConservedMode::DensityVelocity => density != "h",
        ConservedMode::HeightVelocity => density == "h",
    };
    if !mode_ok {
        errs.push(MethodError::ConservedMismatch { mode: spec.conserved, density: density.to_string() });
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}

/// Second-order polynomial with trace-free diagonal part.
pub fn is_shear(p: &MomentPolynomial) -> bool {
    if moment_order(p).ok() != Some(2) {
        return false;
    }
    let has_second = p.exponents().any(|e| e.iter().sum::<u32>() == 2);
    let trace: Rational = [[2, 0, 0], [0, 2, 0], [0, 0, 2]].iter().map(|e| p.coefficient(e)).sum();
    has_second && trace == int(0) && p.exponents().all(|e| e.iter().sum::<u32>() != 1)
}

/// Symbolic rates `omega_r`, with conserved (order ≤ 1) rates fixed at one.
pub fn default_rates(basis: &CollisionSpaceBasis) -> Vec<Expr> {
    basis
        .polynomials
        .iter()
        .enumerate()
        .map(|(r, p)| {
            if moment_order(p).unwrap_or(0) <= 1 {
                Expr::one()
            } else {
                Expr::sym(format!("omega_{r}"))
            }
        })
        .collect()
}

pub fn regularize(spec: &MethodSpec, mode: Regularization) -> MethodSpec {
    let mut out = spec.clone();
    if spec.space == SpaceKind::Population {
        return out;
    }
    for (rate, p) in out.rates.iter_mut().zip(&spec.basis.polynomials) {
        let order = moment_order(p).unwrap_or(0);
        let reset = match mode {
            Regularization::Full => order <= 1 || !is_shear(p),
            Regularization::HigherOrder(k) => order >= k,
        };
        if reset {
            *rate = Expr::one();
        }
    }
    out
}
