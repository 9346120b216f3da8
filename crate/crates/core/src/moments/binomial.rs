use std::collections::{BTreeMap, BTreeSet};

use super::{Direction, MomentNames};
use crate::lattice::Exponent;
use crate::symexpr::{int, Assignment, AssignmentCollection, Expr};

fn binom(n: u32, k: u32) -> i64 {
    (0..k).fold(1i64, |acc, j| acc * i64::from(n - j) / i64::from(j + 1))
}

/// Staged binomial transform between raw and central moments.
///
/// Forward (`src` = raw, `dst` = central):
/// `κ_αβγ = Σ C(α,a)C(β,b)C(γ,c) (-u_x)^(α-a) (-u_y)^(β-b) (-u_z)^(γ-c) m_abc`,
/// evaluated one axis at a time (last axis first) so that each pair of
/// source quantity and velocity power appears exactly once. Backward maps
/// central to raw moments with `+u`. Stages that reduce to a single symbol
/// are aliased instead of assigned. `exps` must be closed downward.
pub fn binomial_chimera(
    direction: Direction,
    dim: usize,
    exps: &[Exponent],
    u: &[Expr; 3],
    src: &MomentNames,
    dst: &MomentNames,
) -> AssignmentCollection {
    let shift: Vec<Expr> = match direction {
        Direction::Forward => u.iter().map(|x| -x.clone()).collect(),
        Direction::Backward => u.to_vec(),
    };
    // needed[k]: (prefix exponents, suffix exponents) pairs at stage k
    let mut needed: Vec<BTreeSet<(Vec<u32>, Vec<u32>)>> = vec![BTreeSet::new(); dim + 1];
    for e in exps {
        needed[0].insert((Vec::new(), e[..dim].to_vec()));
    }
    for k in 0..dim {
        let next: BTreeSet<_> = needed[k]
            .iter()
            .flat_map(|(p, s)| {
                (0..=s[0]).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    (q, s[1..].to_vec())
                })
            })
            .collect();
        needed[k + 1] = next;
    }
    let mut values: BTreeMap<(Vec<u32>, Vec<u32>), Expr> = BTreeMap::new();
    for (p, s) in &needed[dim] {
        let mut e = [0u32; 3];
        e[..dim].copy_from_slice(p);
        values.insert((p.clone(), s.clone()), src.mono_expr(&e));
    }
    let mut subexpressions = Vec::new();
    for k in (1..dim).rev() {
        for (p, s) in &needed[k] {
            let value = stage_sum(&values, p, s, &shift[k]);
            let entry = if value.is_atom() {
                value
            } else {
                let sym = dst.exponent_stage(p, s);
                subexpressions.push(Assignment::new(sym.clone(), value));
                Expr::from_symbol(&sym)
            };
            values.insert((p.clone(), s.clone()), entry);
        }
    }
    let main = exps
        .iter()
        .map(|e| Assignment::new(dst.mono(e), stage_sum(&values, &[], &e[..dim], &shift[0])))
        .collect();
    AssignmentCollection::new(subexpressions, main)
}

fn stage_sum(
    values: &BTreeMap<(Vec<u32>, Vec<u32>), Expr>,
    prefix: &[u32],
    suffix: &[u32],
    shift: &Expr,
) -> Expr {
    let g = suffix[0];
    Expr::add((0..=g).map(|c| {
        let mut q = prefix.to_vec();
        q.push(c);
        let v = &values[&(q, suffix[1..].to_vec())];
        Expr::mul([Expr::num(int(binom(g, c))), shift.pow(i64::from(g - c)), v.clone()])
    }))
}
