use super::MomentError;
use crate::lattice::{CollisionSpaceBasis, Stencil};
use crate::linalg::RatMatrix;
use crate::symexpr::Expr;

/// `M[r][i] = p_r(ξ_i)`; errors if `M` is singular.
pub fn raw_moment_matrix(st: &Stencil, basis: &CollisionSpaceBasis) -> Result<RatMatrix, MomentError> {
    let m = basis.moment_matrix(st);
    if m.rows() != m.cols() {
        return Err(MomentError::Singular(Vec::new()));
    }
    if m.rank() != m.rows() {
        return Err(MomentError::Singular(m.dependent_rows()));
    }
    Ok(m)
}

/// `K[r][i] = p_r(ξ_i - u)` with symbolic frame velocity `u`.
pub fn central_moment_matrix(
    st: &Stencil,
    basis: &CollisionSpaceBasis,
    u: &[Expr; 3],
) -> Result<Vec<Vec<Expr>>, MomentError> {
    raw_moment_matrix(st, basis)?;
    Ok(basis
        .polynomials
        .iter()
        .map(|p| st.velocities.iter().map(|&xi| p.eval_shifted(xi, u)).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_stencil, monomial_basis, MomentPolynomial, SpaceKind, StencilName};
    use crate::symexpr::{expand, rat, substitute, Rational, Symbol};
    use num_traits::One;
    use std::collections::HashMap;

    #[test]
    fn density_row_and_second_moment_of_weights() {
        let st = make_stencil(StencilName::D2Q9);
        let basis = monomial_basis(&st);
        let m = raw_moment_matrix(&st, &basis).unwrap();
        let moments = m.mul_vec(&st.weights);
        let idx = |e: [u32; 3]| basis.polynomials.iter().position(|p| *p == MomentPolynomial::monomial(e)).unwrap();
        assert!(m.row(idx([0, 0, 0])).iter().all(|v| v.is_one()));
        assert!(moments[idx([0, 0, 0])].is_one());
        assert_eq!(moments[idx([2, 0, 0])], rat(1, 3));
        let x = idx([1, 0, 0]);
        for i in 0..st.q() {
            assert_eq!(m[(x, i)], Rational::from_integer(st.velocities[i][0].into()));
        }
    }

    #[test]
    fn singular_basis_rejected() {
        let st = make_stencil(StencilName::D2Q9);
        let mut basis = monomial_basis(&st);
        basis.polynomials[8] = MomentPolynomial::monomial([3, 0, 0]);
        assert!(matches!(raw_moment_matrix(&st, &basis), Err(MomentError::Singular(_))));
    }

    #[test]
    fn central_matrix_reduces_to_raw_at_rest() {
        let st = make_stencil(StencilName::D2Q9);
        let basis = monomial_basis(&st).with_kind(SpaceKind::CentralMoment);
        let u = [Expr::sym("u_x"), Expr::sym("u_y"), Expr::zero()];
        let k = central_moment_matrix(&st, &basis, &u).unwrap();
        let m = raw_moment_matrix(&st, &basis).unwrap();
        let mut zero = HashMap::new();
        zero.insert(Symbol::new("u_x"), Expr::zero());
        zero.insert(Symbol::new("u_y"), Expr::zero());
        for r in 0..st.q() {
            for i in 0..st.q() {
                let at_rest = substitute(&k[r][i], &zero);
                assert_eq!(at_rest, Expr::num(m[(r, i)].clone()));
            }
        }
        let x = basis.polynomials.iter().position(|p| *p == MomentPolynomial::monomial([1, 0, 0])).unwrap();
        for i in 0..st.q() {
            let expect = Expr::integer(st.velocities[i][0].into()) - Expr::sym("u_x");
            assert_eq!(expand(&k[x][i]), expect);
            assert!(k[0][i].is_one());
        }
    }
}
