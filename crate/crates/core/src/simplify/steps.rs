//! The individual rewriting steps. Each maps a collision rule to an
//! equivalent one; none of them changes the rule's inputs or outputs.

use std::collections::{BTreeSet, HashMap, HashSet};

use num_traits::Signed;

use super::count_ops;
use crate::method::CollisionRule;
use crate::symexpr::{
    expand, free_symbols, rebuild, substitute, substitute_one, Assignment, AssignmentCollection, Expr, Node, Symbol,
};

/// Replaces the direct population sums for the conserved quantities by
/// references to the forward transform's monomial moments.
pub fn conserved_quantity_rewrite(rule: &CollisionRule) -> CollisionRule {
    if rule.info.conserved_rewrites.is_empty() {
        return rule.clone();
    }
    let mut ac = rule.assignments.clone();
    for (lhs, rhs) in &rule.info.conserved_rewrites {
        let needed = free_symbols(rhs);
        let mut defined: HashSet<&Symbol> = HashSet::new();
        for a in ac.subexpressions.iter_mut().chain(ac.main_assignments.iter_mut()) {
            if &a.lhs == lhs {
                if needed.iter().all(|s| defined.contains(s)) {
                    a.rhs = rhs.clone();
                }
                break;
            }
            defined.insert(&a.lhs);
        }
    }
    rule.with_assignments(ac)
}

fn macroscopic_symbols(rule: &CollisionRule) -> HashSet<Symbol> {
    let m = &rule.info.macroscopic;
    let mut out: HashSet<Symbol> = m.velocity.iter().cloned().collect();
    out.insert(m.density.clone());
    out.insert(m.delta_density.clone());
    out.insert(rule.info.density_inv.clone());
    out
}

/// Replaces the zeroth- and first-order central moments by closed forms in
/// the macroscopic quantities (density and zero for vanishing forces).
pub fn collapse_conserved_central_moments(rule: &CollisionRule) -> CollisionRule {
    if rule.info.central_low_order.is_empty() {
        return rule.clone();
    }
    let macro_syms = macroscopic_symbols(rule);
    let closed = &rule.info.raw_closed_forms;
    let defs: HashMap<Symbol, Expr> = rule.assignments.iter().map(|a| (a.lhs.clone(), a.rhs.clone())).collect();
    let targets: HashSet<&Symbol> = rule.info.central_low_order.iter().collect();
    let mac = &rule.info.macroscopic;
    let rho = Expr::from_symbol(&mac.density);
    let drho = Expr::from_symbol(&mac.delta_density);
    let rho0 = Expr::num(rule.info.background_density.clone());

    let collapse = |rhs: &Expr| -> Option<Expr> {
        let mut e = rhs.clone();
        // Inline intermediate definitions down to the raw monomials.
        for _ in 0..16 {
            let binds: HashMap<Symbol, Expr> = free_symbols(&e)
                .into_iter()
                .filter(|s| !macro_syms.contains(s) && !closed.contains_key(s))
                .filter_map(|s| defs.get(&s).map(|d| (s, d.clone())))
                .collect();
            if binds.is_empty() {
                break;
            }
            e = substitute(&e, &binds);
        }
        let e = expand(&substitute(&e, closed));
        if !free_symbols(&e).iter().all(|s| macro_syms.contains(s)) {
            return None;
        }
        let mut candidates = vec![e.clone()];
        if rule.info.zero_centered {
            candidates.push(expand(&substitute_one(&e, &mac.density, &(&rho0 + &drho))));
            candidates.push(expand(&substitute_one(&e, &mac.delta_density, &(&rho - &rho0))));
        }
        candidates.into_iter().min_by_key(|c| (count_ops(c).total, c.tree_size()))
    };

    let ac = rule.assignments.map_rhs_with_lhs(|lhs, rhs| {
        if targets.contains(lhs) {
            collapse(rhs).unwrap_or_else(|| rhs.clone())
        } else {
            rhs.clone()
        }
    });
    rule.with_assignments(ac)
}

fn contains_log(e: &Expr) -> bool {
    match e.node() {
        Node::Log(_) => true,
        Node::Num(_) | Node::Sym(_) => false,
        _ => e.children().iter().any(contains_log),
    }
}

/// Inlines subexpressions containing logarithms into their uses, so that
/// `exp(log x)` pairs cancel on normalization.
pub fn propagate_logarithms(rule: &CollisionRule) -> CollisionRule {
    let ac = &rule.assignments;
    if !ac.iter().any(|a| contains_log(&a.rhs)) {
        return rule.clone();
    }
    let mut binds: HashMap<Symbol, Expr> = HashMap::new();
    let mut subs = Vec::with_capacity(ac.subexpressions.len());
    for a in &ac.subexpressions {
        let rhs = substitute(&a.rhs, &binds);
        if contains_log(&rhs) {
            binds.insert(a.lhs.clone(), rhs);
        } else {
            subs.push(Assignment { lhs: a.lhs.clone(), rhs });
        }
    }
    let mains = ac
        .main_assignments
        .iter()
        .map(|a| Assignment { lhs: a.lhs.clone(), rhs: substitute(&a.rhs, &binds) })
        .collect();
    rule.with_assignments(AssignmentCollection::new(subs, mains))
}

/// Temporaries introduced by common subexpression elimination; they are only
/// propagated when they become aliases or constants.
pub(crate) fn is_cse_temp(s: &Symbol) -> bool {
    s.name().strip_prefix("xi_").is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
}

/// Whether `e` is a constant, a symbol, or a product of at most three factors
/// drawn from `atoms` and constants.
pub(crate) fn propagatable(e: &Expr, atoms: &HashSet<Symbol>) -> bool {
    match e.node() {
        Node::Num(_) | Node::Sym(_) => true,
        Node::Mul(fs) => {
            let mut factors = 0i64;
            for f in fs {
                match f.node() {
                    Node::Num(c) => {
                        if c.abs() != num_traits::One::one() {
                            factors += 1;
                        }
                    }
                    Node::Sym(s) if atoms.contains(s) => factors += 1,
                    Node::Pow(b, n) if *n > 0 && b.as_symbol().is_some_and(|s| atoms.contains(s)) => factors += n,
                    _ => return false,
                }
            }
            factors <= 3
        }
        _ => false,
    }
}

fn reciprocal_base(e: &Expr) -> Option<&Symbol> {
    match e.node() {
        Node::Pow(b, -1) => b.as_symbol(),
        _ => None,
    }
}

/// Rewrites `x^-n` as `r^n` where `r` holds `1/x`.
fn reuse_reciprocals(e: &Expr, holders: &HashMap<Symbol, Expr>) -> Expr {
    if holders.is_empty() || e.is_atom() {
        return e.clone();
    }
    if let Node::Pow(b, n) = e.node() {
        if *n < 0 {
            if let Some(r) = b.as_symbol().and_then(|x| holders.get(x)) {
                return r.pow(-n);
            }
        }
    }
    let kids: Vec<Expr> = e.children().iter().map(|c| reuse_reciprocals(c, holders)).collect();
    if kids.iter().zip(e.children()).all(|(a, b)| a.ptr_eq(b)) {
        return e.clone();
    }
    rebuild(e, kids)
}

/// One forward pass of expression propagation over a collection.
///
/// Reciprocals of single symbols are substituted as `x^-1` so that products
/// such as `x^2·(1/x)` cancel; the first assignment holding `1/x` is kept and
/// reused for the remaining negative powers of `x`.
fn propagate_pass(ac: &AssignmentCollection, atoms: &HashSet<Symbol>) -> AssignmentCollection {
    let mut binds: HashMap<Symbol, Expr> = HashMap::new();
    let mut holders: HashMap<Symbol, Expr> = HashMap::new();
    let mut subs = Vec::with_capacity(ac.subexpressions.len());
    for a in &ac.subexpressions {
        let rhs = substitute(&a.rhs, &binds);
        if let Some(x) = reciprocal_base(&rhs) {
            binds.insert(a.lhs.clone(), rhs.clone());
            if !holders.contains_key(x) {
                holders.insert(x.clone(), Expr::from_symbol(&a.lhs));
                subs.push(Assignment { lhs: a.lhs.clone(), rhs });
            }
            continue;
        }
        let eligible = if is_cse_temp(&a.lhs) { rhs.is_atom() } else { propagatable(&rhs, atoms) };
        if eligible {
            binds.insert(a.lhs.clone(), rhs);
        } else {
            subs.push(Assignment { lhs: a.lhs.clone(), rhs: reuse_reciprocals(&rhs, &holders) });
        }
    }
    let mains = ac
        .main_assignments
        .iter()
        .map(|a| Assignment { lhs: a.lhs.clone(), rhs: reuse_reciprocals(&substitute(&a.rhs, &binds), &holders) })
        .collect();
    AssignmentCollection::new(subs, mains)
}

/// Propagates constants, aliases and short products of `atoms` into their
/// uses, to a fixed point. Main assignments are never removed.
pub fn propagate_expressions(ac: &AssignmentCollection, atoms: &HashSet<Symbol>) -> AssignmentCollection {
    let mut cur = ac.clone();
    loop {
        let next = propagate_pass(&cur, atoms);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

/// Symbols eligible as product factors: the macroscopic quantities and any
/// symbol of the source term (body force components).
fn propagation_atoms(rule: &CollisionRule) -> HashSet<Symbol> {
    let mut atoms = macroscopic_symbols(rule);
    atoms.remove(&rule.info.density_inv);
    if let Some(src) = &rule.method.source {
        for s in src {
            atoms.extend(free_symbols(s));
        }
    }
    atoms
}

pub fn expression_propagation(rule: &CollisionRule) -> CollisionRule {
    rule.with_assignments(propagate_expressions(&rule.assignments, &propagation_atoms(rule)))
}

/// Drops subexpressions not transitively needed by the main assignments.
pub fn eliminate_unused(ac: &AssignmentCollection) -> AssignmentCollection {
    let mut live: BTreeSet<Symbol> = BTreeSet::new();
    for a in &ac.main_assignments {
        live.extend(free_symbols(&a.rhs));
    }
    let mut keep = vec![false; ac.subexpressions.len()];
    for (k, a) in ac.subexpressions.iter().enumerate().rev() {
        if live.contains(&a.lhs) {
            keep[k] = true;
            live.extend(free_symbols(&a.rhs));
        }
    }
    let subexpressions = ac.subexpressions.iter().zip(keep).filter(|(_, k)| *k).map(|(a, _)| a.clone()).collect();
    AssignmentCollection::new(subexpressions, ac.main_assignments.clone())
}

pub fn unused_elimination(rule: &CollisionRule) -> CollisionRule {
    rule.with_assignments(eliminate_unused(&rule.assignments))
}
