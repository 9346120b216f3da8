//! Common subexpression elimination over an assignment collection.
//!
//! A subtree is hoisted when it appears more than once across all right-hand
//! sides (occurrences inside an already repeated subtree are not counted
//! separately). Products are also matched with their numeric coefficient
//! stripped, so `2·a·b` and `-a·b` share `a·b`.

use std::collections::{HashMap, HashSet};

use num_traits::One;

use super::count_ops;
use crate::symexpr::{rebuild, Assignment, AssignmentCollection, Expr, Node, Symbol};

fn stripped_product(e: &Expr) -> Option<(Expr, Expr)> {
    let Node::Mul(fs) = e.node() else { return None };
    if fs.len() < 3 {
        return None;
    }
    let (c, rest) = e.split_coeff();
    if c.is_one() {
        return None;
    }
    rest.map(|r| (Expr::num(c), r))
}

struct Finder {
    seen: HashSet<Expr>,
    repeated: HashSet<Expr>,
}

impl Finder {
    fn visit(&mut self, e: &Expr) {
        if e.is_atom() {
            return;
        }
        if !self.seen.insert(e.clone()) {
            if count_ops(e).total > 0 {
                self.repeated.insert(e.clone());
            }
            return;
        }
        if let Some((_, rest)) = stripped_product(e) {
            self.visit(&rest);
        } else {
            for c in e.children() {
                self.visit(c);
            }
        }
    }
}

struct Builder<'a> {
    repeated: &'a HashSet<Expr>,
    temps: HashMap<Expr, Expr>,
    next: usize,
    emitted: Vec<Assignment>,
}

impl Builder<'_> {
    fn rec(&mut self, e: &Expr) -> Expr {
        if e.is_atom() {
            return e.clone();
        }
        if let Some(t) = self.temps.get(e) {
            return t.clone();
        }
        let new = if let Some((c, rest)) = stripped_product(e) {
            Expr::mul([c, self.rec(&rest)])
        } else {
            let kids: Vec<Expr> = e.children().iter().map(|c| self.rec(c)).collect();
            rebuild(e, kids)
        };
        if !self.repeated.contains(e) {
            return new;
        }
        let sym = Symbol::new(format!("xi_{}", self.next));
        self.next += 1;
        self.emitted.push(Assignment { lhs: sym.clone(), rhs: new });
        let t = Expr::from_symbol(&sym);
        self.temps.insert(e.clone(), t.clone());
        t
    }
}

/// Hoists repeated compound subtrees into fresh `xi_N` subexpressions,
/// numbered after any existing temporaries.
pub fn eliminate_common_subexpressions(ac: &AssignmentCollection) -> AssignmentCollection {
    let mut finder = Finder { seen: HashSet::new(), repeated: HashSet::new() };
    for a in ac.iter() {
        finder.visit(&a.rhs);
    }
    if finder.repeated.is_empty() {
        return ac.clone();
    }
    let next = ac
        .iter()
        .filter_map(|a| a.lhs.name().strip_prefix("xi_").and_then(|n| n.parse::<usize>().ok()))
        .max()
        .map_or(0, |m| m + 1);
    let mut b = Builder { repeated: &finder.repeated, temps: HashMap::new(), next, emitted: Vec::new() };
    let mut subs = Vec::new();
    for a in &ac.subexpressions {
        let rhs = b.rec(&a.rhs);
        subs.append(&mut b.emitted);
        subs.push(Assignment { lhs: a.lhs.clone(), rhs });
    }
    let mut mains = Vec::new();
    for a in &ac.main_assignments {
        let rhs = b.rec(&a.rhs);
        subs.append(&mut b.emitted);
        mains.push(Assignment { lhs: a.lhs.clone(), rhs });
    }
    AssignmentCollection::new(subs, mains)
}
