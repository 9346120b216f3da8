use std::collections::BTreeSet;

use num_traits::Zero;

use super::{MomentError, MomentNames};
use crate::lattice::{graded_lex_cmp, CollisionSpaceBasis, Exponent};
use crate::linalg::RatMatrix;
use crate::symexpr::{Assignment, AssignmentCollection, Expr, Rational, Symbol};

/// Union of all monomials of the basis, closed downward, in graded-lex order.
pub fn exponent_set(basis: &CollisionSpaceBasis) -> Vec<Exponent> {
    let mut set: BTreeSet<Exponent> = BTreeSet::new();
    let mut stack: Vec<Exponent> = basis.polynomials.iter().flat_map(|p| p.exponents().copied()).collect();
    while let Some(e) = stack.pop() {
        if set.insert(e) {
            for a in 0..3 {
                if e[a] > 0 {
                    let mut f = e;
                    f[a] -= 1;
                    stack.push(f);
                }
            }
        }
    }
    let mut out: Vec<Exponent> = set.into_iter().collect();
    out.sort_by(graded_lex_cmp);
    out
}

fn coefficient_matrix(basis: &CollisionSpaceBasis, exps: &[Exponent]) -> Result<RatMatrix, MomentError> {
    let mut rows = Vec::with_capacity(basis.len());
    for (index, p) in basis.polynomials.iter().enumerate() {
        if let Some(e) = p.exponents().find(|e| !exps.contains(e)) {
            return Err(MomentError::MonomialOutsideSet { index, monomial: *e });
        }
        rows.push(exps.iter().map(|e| p.coefficient(e)).collect());
    }
    Ok(RatMatrix::from_rows(rows))
}

fn combine(row: &[Rational], values: &[Expr]) -> Expr {
    Expr::add(row.iter().zip(values).filter(|(c, _)| !c.is_zero()).map(|(c, v)| v.scale(c)))
}

/// Polynomial moments `m_p = Σ_e coeff_p(e) m_e` from monomial moments.
pub fn polynomialize(
    basis: &CollisionSpaceBasis,
    exps: &[Exponent],
    monomials: &MomentNames,
    outputs: &[Symbol],
) -> Result<AssignmentCollection, MomentError> {
    let c = coefficient_matrix(basis, exps)?;
    let vals: Vec<Expr> = exps.iter().map(|e| monomials.mono_expr(e)).collect();
    let main = outputs
        .iter()
        .enumerate()
        .map(|(r, s)| Assignment::new(s.clone(), combine(c.row(r), &vals)))
        .collect();
    Ok(AssignmentCollection::new(Vec::new(), main))
}

/// Monomial moments recovered from polynomial moment values by solving the
/// exact recombination system.
pub fn monomialize(
    basis: &CollisionSpaceBasis,
    exps: &[Exponent],
    values: &[Expr],
    monomials: &MomentNames,
) -> Result<AssignmentCollection, MomentError> {
    let c = coefficient_matrix(basis, exps)?;
    let rank = c.rank();
    if c.rows() != c.cols() || rank != exps.len() {
        return Err(MomentError::NotInvertible { rank, needed: exps.len() });
    }
    let inv = c.inverse().map_err(MomentError::Singular)?;
    let main = exps
        .iter()
        .enumerate()
        .map(|(j, e)| Assignment::new(monomials.mono(e), combine(inv.row(j), values)))
        .collect();
    Ok(AssignmentCollection::new(Vec::new(), main))
}
