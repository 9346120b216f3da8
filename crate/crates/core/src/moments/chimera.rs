use std::collections::{BTreeSet, HashMap};

use num_traits::Zero;

use super::{MomentError, MomentNames};
use crate::lattice::{Exponent, Stencil};
use crate::linalg::RatMatrix;
use crate::symexpr::{rat, Assignment, AssignmentCollection, Expr, Rational, Symbol};

fn coord_prefixes(k: usize) -> Vec<Vec<i32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::with_capacity(out.len() * 3);
        for p in &out {
            for v in [-1, 0, 1] {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Staged population-to-raw-moment transform.
///
/// Each stage sums the previous one over a single lattice axis (last axis
/// first), so every combination of a population with a velocity power is
/// evaluated exactly once. Populations absent from the stencil and terms
/// multiplied by `0^γ` (γ > 0) are dropped; stage sums that vanish are not
/// emitted. Subexpressions hold the stage sums, main assignments the
/// monomial moments in `exps` order.
pub fn chimera_forward_raw(
    st: &Stencil,
    exps: &[Exponent],
    f: &[Expr],
    names: &MomentNames,
) -> AssignmentCollection {
    let d = st.dim;
    let mut level: HashMap<(Vec<i32>, Vec<u32>), Expr> = HashMap::new();
    for coords in coord_prefixes(d) {
        let mut v = [0i32; 3];
        v[..d].copy_from_slice(&coords);
        let val = st.index_of(v).map(|i| f[i].clone()).unwrap_or_else(Expr::zero);
        level.insert((coords, Vec::new()), val);
    }
    let mut subexpressions = Vec::new();
    let mut main = Vec::new();
    for k in (0..d).rev() {
        let suffixes: BTreeSet<Vec<u32>> = exps.iter().map(|e| e[k..d].to_vec()).collect();
        let mut next: HashMap<(Vec<i32>, Vec<u32>), Expr> = HashMap::new();
        let prefixes = if k == 0 { vec![Vec::new()] } else { coord_prefixes(k) };
        let stage_sum = |coords: &[i32], s: &[u32]| -> Expr {
            let mut terms = Vec::with_capacity(3);
            for v in [-1, 0, 1] {
                if v == 0 && s[0] > 0 {
                    continue;
                }
                let mut c = coords.to_vec();
                c.push(v);
                let src = &level[&(c, s[1..].to_vec())];
                if src.is_zero() {
                    continue;
                }
                if v == -1 && s[0] % 2 == 1 {
                    terms.push(-src.clone());
                } else {
                    terms.push(src.clone());
                }
            }
            Expr::add(terms)
        };
        if k == 0 {
            for e in exps {
                main.push(Assignment::new(names.mono(e), stage_sum(&[], &e[..d])));
            }
            break;
        }
        for coords in &prefixes {
            for s in &suffixes {
                let value = stage_sum(coords, s);
                let entry = if value.is_zero() {
                    value
                } else {
                    let sym = names.coord_stage(coords, s);
                    subexpressions.push(Assignment::new(sym.clone(), value));
                    Expr::from_symbol(&sym)
                };
                next.insert((coords.clone(), s.clone()), entry);
            }
        }
        level = next;
    }
    AssignmentCollection::new(subexpressions, main)
}

fn monomial_matrix_inverse(st: &Stencil, exps: &[Exponent]) -> Result<RatMatrix, MomentError> {
    let rows: Vec<Vec<Rational>> = exps
        .iter()
        .map(|e| (0..st.q()).map(|i| Rational::from_integer(st.monomial_at(i, e).into())).collect())
        .collect();
    let m = RatMatrix::from_rows(rows);
    if m.rows() != m.cols() {
        return Err(MomentError::NotInvertible { rank: m.rank(), needed: st.q() });
    }
    m.inverse().map_err(MomentError::Singular)
}

fn linear_combination(coeffs: impl Iterator<Item = Rational>, values: &[Expr]) -> Expr {
    Expr::add(
        coeffs
            .zip(values)
            .filter(|(c, _)| !c.is_zero())
            .map(|(c, v)| v.scale(&c)),
    )
}

/// Unsplit backward transform `f* = M⁻¹ m*` over the monomial set.
pub fn matrix_backward_raw(
    st: &Stencil,
    exps: &[Exponent],
    m_post: &[Expr],
    f_out: &[Symbol],
) -> Result<AssignmentCollection, MomentError> {
    let inv = monomial_matrix_inverse(st, exps)?;
    let main = (0..st.q())
        .map(|i| Assignment::new(f_out[i].clone(), linear_combination(inv.row(i).iter().cloned(), m_post)))
        .collect();
    Ok(AssignmentCollection::new(Vec::new(), main))
}

/// Backward raw-moment transform with each opposite pair `(i, ī)` rewritten
/// through its even part `f⁺` and odd part `f⁻`:
/// `f*_i = f⁺ + f⁻`, `f*_ī = f⁺ - f⁻`.
pub fn chimera_backward_raw(
    st: &Stencil,
    exps: &[Exponent],
    m_post: &[Expr],
    f_out: &[Symbol],
) -> Result<AssignmentCollection, MomentError> {
    let inv = monomial_matrix_inverse(st, exps)?;
    let half = rat(1, 2);
    let mut subexpressions = Vec::new();
    let mut parts: HashMap<usize, (Expr, Expr)> = HashMap::new();
    for i in 0..st.q() {
        let o = st.opposite_index(i);
        if o <= i {
            continue;
        }
        let even = (0..st.q()).map(|j| (&inv[(i, j)] + &inv[(o, j)]) * &half);
        let odd = (0..st.q()).map(|j| (&inv[(i, j)] - &inv[(o, j)]) * &half);
        let ps = Symbol::new(format!("{}_even", f_out[i]));
        let ms = Symbol::new(format!("{}_odd", f_out[i]));
        subexpressions.push(Assignment::new(ps.clone(), linear_combination(even, m_post)));
        subexpressions.push(Assignment::new(ms.clone(), linear_combination(odd, m_post)));
        parts.insert(i, (Expr::from_symbol(&ps), Expr::from_symbol(&ms)));
    }
    let mut main = Vec::with_capacity(st.q());
    for i in 0..st.q() {
        let o = st.opposite_index(i);
        let rhs = if o == i {
            linear_combination(inv.row(i).iter().cloned(), m_post)
        } else if i < o {
            let (p, m) = &parts[&i];
            p + m
        } else {
            let (p, m) = &parts[&o];
            p - m
        };
        main.push(Assignment::new(f_out[i].clone(), rhs));
    }
    Ok(AssignmentCollection::new(subexpressions, main))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_stencil, monomial_exponents, StencilName};
    use crate::simplify::count_ops;
    use crate::symexpr::{Env, Node};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pops(q: usize) -> (Vec<Symbol>, Vec<Expr>) {
        let s: Vec<Symbol> = (0..q).map(|i| Symbol::new(format!("f_{i}"))).collect();
        let e = s.iter().map(Expr::from_symbol).collect();
        (s, e)
    }

    #[test]
    fn rest_population_has_only_even_moments() {
        let st = make_stencil(StencilName::D3Q27);
        let exps = monomial_exponents(&st);
        let (syms, f) = pops(st.q());
        let ac = chimera_forward_raw(&st, &exps, &f, &MomentNames::new("m", 3));
        let mut env = Env::new();
        for (i, s) in syms.iter().enumerate() {
            env.insert(s.clone(), if i == 0 { 1.0 } else { 0.0 });
        }
        let out = ac.evaluate_outputs(&env).unwrap();
        for (e, v) in exps.iter().zip(&out) {
            let expect = if *e == [0, 0, 0] { 1.0 } else { 0.0 };
            assert_eq!(*v, expect, "{e:?}");
        }
    }

    #[test]
    fn matches_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for name in [StencilName::D2Q9, StencilName::D3Q19, StencilName::D3Q27] {
            let st = make_stencil(name);
            let exps = monomial_exponents(&st);
            let (syms, f) = pops(st.q());
            let ac = chimera_forward_raw(&st, &exps, &f, &MomentNames::new("m", st.dim));
            assert!(ac.toposort_check());
            let vals: Vec<f64> = (0..st.q()).map(|_| rng.gen_range(0.0..1.0)).collect();
            let env: Env = syms.iter().cloned().zip(vals.iter().copied()).collect();
            let out = ac.evaluate_outputs(&env).unwrap();
            for (e, v) in exps.iter().zip(&out) {
                let direct: f64 = (0..st.q()).map(|i| vals[i] * st.monomial_at(i, e) as f64).sum();
                assert!((direct - v).abs() < 1e-14, "{name} {e:?}");
            }
        }
    }

    #[test]
    fn each_population_power_pair_used_once() {
        let st = make_stencil(StencilName::D3Q27);
        let exps = monomial_exponents(&st);
        let (syms, f) = pops(st.q());
        let ac = chimera_forward_raw(&st, &exps, &f, &MomentNames::new("m", 3));
        // first stage: names m_<xy>_c<γ>, two coordinate letters
        let first: Vec<&Assignment> = ac
            .subexpressions
            .iter()
            .filter(|a| a.lhs.name().split('_').nth(1).is_some_and(|c| c.len() == 2))
            .collect();
        for s in &syms {
            for g in 0..=2u32 {
                let n = first
                    .iter()
                    .filter(|a| a.lhs.name().ends_with(&format!("_c{g}")))
                    .filter(|a| crate::symexpr::contains_symbol(&a.rhs, s))
                    .count();
                let z = st.velocities[syms.iter().position(|x| x == s).unwrap()][2];
                let expect = usize::from(!(z == 0 && g > 0));
                assert_eq!(n, expect, "{s} power {g}");
            }
        }
        // chimera forward is addition-only
        for a in ac.iter() {
            assert!(!matches!(a.rhs.node(), Node::Mul(fs) if !fs[0].as_num().is_some()));
        }
    }

    #[test]
    fn forward_cheaper_than_dense_matrix() {
        let st = make_stencil(StencilName::D3Q27);
        let exps = monomial_exponents(&st);
        let (_, f) = pops(st.q());
        let ac = chimera_forward_raw(&st, &exps, &f, &MomentNames::new("m", 3));
        let chim: usize = ac.iter().map(|a| count_ops(&a.rhs).multiplications).sum();
        // a dense 27x27 product needs one multiplication per nonzero entry
        let dense_mults: usize = exps
            .iter()
            .map(|e| (0..st.q()).filter(|&i| st.monomial_at(i, e).abs() > 1).count())
            .sum::<usize>()
            + 27 * 27;
        assert!(chim < dense_mults);
    }

    #[test]
    fn split_backward_roundtrip_and_is_cheaper() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for name in [StencilName::D2Q9, StencilName::D3Q19, StencilName::D3Q27] {
            let st = make_stencil(name);
            let exps = monomial_exponents(&st);
            let (syms, f) = pops(st.q());
            let names = MomentNames::new("m", st.dim);
            let fwd = chimera_forward_raw(&st, &exps, &f, &names);
            let m_post: Vec<Expr> = exps.iter().map(|e| names.mono_expr(e)).collect();
            let out: Vec<Symbol> = (0..st.q()).map(|i| Symbol::new(format!("fp_{i}"))).collect();
            let split = chimera_backward_raw(&st, &exps, &m_post, &out).unwrap();
            let dense = matrix_backward_raw(&st, &exps, &m_post, &out).unwrap();
            let both = fwd.clone().then(split.clone());
            assert!(both.toposort_check());
            let vals: Vec<f64> = (0..st.q()).map(|_| rng.gen_range(0.0..1.0)).collect();
            let env: Env = syms.iter().cloned().zip(vals.iter().copied()).collect();
            let res = both.evaluate_outputs(&env).unwrap();
            for (a, b) in res.iter().zip(&vals) {
                assert!((a - b).abs() < 1e-13);
            }
            let ops = |ac: &AssignmentCollection| ac.iter().map(|a| count_ops(&a.rhs).total).sum::<usize>();
            assert!(ops(&split) < ops(&dense), "{name}: {} vs {}", ops(&split), ops(&dense));
            // rest population never gets an odd part
            assert!(split.subexpressions.iter().all(|a| !a.lhs.name().starts_with("fp_0_")));
        }
    }
}
