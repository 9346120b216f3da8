use std::collections::{BTreeSet, HashMap};

use super::expr::{int, Expr, Node, Symbol};

/// Simultaneous substitution followed by normalization of every rebuilt node.
pub fn substitute(e: &Expr, bindings: &HashMap<Symbol, Expr>) -> Expr {
    if bindings.is_empty() {
        return e.clone();
    }
    subs_rec(e, &|s| bindings.get(s).cloned()).unwrap_or_else(|| e.clone())
}

/// Substitutes a single symbol.
pub fn substitute_one(e: &Expr, sym: &Symbol, value: &Expr) -> Expr {
    subs_rec(e, &|s| (s == sym).then(|| value.clone())).unwrap_or_else(|| e.clone())
}

/// Rebuilds `e` (normalized) with new children of the same arity.
pub fn rebuild(e: &Expr, children: Vec<Expr>) -> Expr {
    match e.node() {
        Node::Add(_) => Expr::add(children),
        Node::Mul(_) => Expr::mul(children),
        Node::Pow(_, n) => children[0].pow(*n),
        Node::Log(_) => children[0].log(),
        Node::Exp(_) => children[0].exp(),
        Node::Num(_) | Node::Sym(_) => e.clone(),
    }
}

/// Maps children through `f`; returns `None` when no child changed.
fn map_children(e: &Expr, f: &mut dyn FnMut(&Expr) -> Option<Expr>) -> Option<Expr> {
    let kids = e.children();
    let mut out: Option<Vec<Expr>> = None;
    for (k, c) in kids.iter().enumerate() {
        if let Some(n) = f(c) {
            let v = out.get_or_insert_with(|| kids[..k].to_vec());
            v.push(n);
        } else if let Some(v) = out.as_mut() {
            v.push(c.clone());
        }
    }
    out.map(|v| rebuild(e, v))
}

fn subs_rec(e: &Expr, lookup: &dyn Fn(&Symbol) -> Option<Expr>) -> Option<Expr> {
    match e.node() {
        Node::Num(_) => None,
        Node::Sym(s) => lookup(s),
        _ => map_children(e, &mut |c| subs_rec(c, lookup)),
    }
}

/// Replaces every occurrence of the subtree `from` by `to`.
pub fn replace_subtree(e: &Expr, from: &Expr, to: &Expr) -> Expr {
    fn rec(e: &Expr, from: &Expr, to: &Expr) -> Option<Expr> {
        if e == from {
            return Some(to.clone());
        }
        if e.is_atom() {
            return None;
        }
        map_children(e, &mut |c| rec(c, from, to))
    }
    rec(e, from, to).unwrap_or_else(|| e.clone())
}

pub fn free_symbols(e: &Expr) -> BTreeSet<Symbol> {
    let mut out = BTreeSet::new();
    collect_symbols(e, &mut out);
    out
}

pub(crate) fn collect_symbols(e: &Expr, out: &mut BTreeSet<Symbol>) {
    match e.node() {
        Node::Sym(s) => {
            out.insert(s.clone());
        }
        Node::Num(_) => {}
        _ => {
            for c in e.children() {
                collect_symbols(c, out);
            }
        }
    }
}

pub fn contains_symbol(e: &Expr, s: &Symbol) -> bool {
    match e.node() {
        Node::Sym(x) => x == s,
        Node::Num(_) => false,
        _ => e.children().iter().any(|c| contains_symbol(c, s)),
    }
}

/// Total polynomial degree of `e` in the given symbols (maximum over terms).
/// Non-polynomial subtrees containing one of the symbols count as degree 0
/// of their own; they only arise outside the truncation use case.
pub fn degree_in(e: &Expr, syms: &[Symbol]) -> i64 {
    match e.node() {
        Node::Num(_) => 0,
        Node::Sym(s) => i64::from(syms.contains(s)),
        Node::Pow(b, n) => degree_in(b, syms) * n,
        Node::Mul(fs) => fs.iter().map(|f| degree_in(f, syms)).sum(),
        Node::Add(ts) => ts.iter().map(|t| degree_in(t, syms)).max().unwrap_or(0),
        Node::Log(_) | Node::Exp(_) => 0,
    }
}

/// Distributes products over sums and expands positive integer powers of sums.
/// Negative powers are kept as they are (their bases are expanded).
pub fn expand(e: &Expr) -> Expr {
    match e.node() {
        Node::Num(_) | Node::Sym(_) => e.clone(),
        Node::Add(ts) => Expr::add(ts.iter().map(expand)),
        Node::Mul(fs) => {
            let parts: Vec<Expr> = fs.iter().map(expand).collect();
            multiply_out(&parts)
        }
        Node::Pow(b, n) => {
            let b = expand(b);
            if *n > 0 && matches!(b.node(), Node::Add(_)) {
                let parts = vec![b; *n as usize];
                multiply_out(&parts)
            } else {
                b.pow(*n)
            }
        }
        Node::Log(a) => expand(a).log(),
        Node::Exp(a) => expand(a).exp(),
    }
}

fn multiply_out(parts: &[Expr]) -> Expr {
    let mut terms: Vec<Expr> = vec![Expr::one()];
    for p in parts {
        match p.node() {
            Node::Add(ts) => {
                let mut next = Vec::with_capacity(terms.len() * ts.len());
                for a in &terms {
                    for b in ts {
                        next.push(a * b);
                    }
                }
                // Collect like terms early to keep the product small.
                let sum = Expr::add(next);
                if sum.is_zero() {
                    return Expr::zero();
                }
                terms = match sum.node() {
                    Node::Add(c) => c.clone(),
                    _ => vec![sum.clone()],
                };
            }
            _ => {
                for t in terms.iter_mut() {
                    *t = &*t * p;
                }
            }
        }
    }
    Expr::add(terms)
}

/// Exact partial derivative with respect to `s`.
pub fn differentiate(e: &Expr, s: &Symbol) -> Expr {
    differentiate_with(e, s, &|_| None)
}

/// Partial derivative where `dependent` supplies the derivative with respect
/// to `s` of symbols that implicitly depend on it (`None` means independent).
pub fn differentiate_with(
    e: &Expr,
    s: &Symbol,
    dependent: &dyn Fn(&Symbol) -> Option<Expr>,
) -> Expr {
    match e.node() {
        Node::Num(_) => Expr::zero(),
        Node::Sym(x) => {
            if x == s {
                Expr::one()
            } else {
                dependent(x).unwrap_or_else(Expr::zero)
            }
        }
        Node::Add(ts) => Expr::add(ts.iter().map(|t| differentiate_with(t, s, dependent))),
        Node::Mul(fs) => {
            let mut terms = Vec::new();
            for k in 0..fs.len() {
                let d = differentiate_with(&fs[k], s, dependent);
                if d.is_zero() {
                    continue;
                }
                let mut prod: Vec<Expr> = Vec::with_capacity(fs.len());
                prod.extend(fs[..k].iter().cloned());
                prod.push(d);
                prod.extend(fs[k + 1..].iter().cloned());
                terms.push(Expr::mul(prod));
            }
            Expr::add(terms)
        }
        Node::Pow(b, n) => {
            let d = differentiate_with(b, s, dependent);
            if d.is_zero() {
                return Expr::zero();
            }
            Expr::mul([Expr::num(int(*n)), b.pow(n - 1), d])
        }
        Node::Log(a) => {
            let d = differentiate_with(a, s, dependent);
            Expr::mul([d, a.recip()])
        }
        Node::Exp(a) => {
            let d = differentiate_with(a, s, dependent);
            Expr::mul([e.clone(), d])
        }
    }
}
