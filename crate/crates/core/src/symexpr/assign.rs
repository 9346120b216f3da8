use std::collections::{BTreeSet, HashSet};
use std::fmt;

use super::calculus::collect_symbols;
use super::eval::{evaluate, Env};
use super::expr::{Expr, Symbol};
use super::SymError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub lhs: Symbol,
    pub rhs: Expr,
}

impl Assignment {
    pub fn new(lhs: impl Into<Symbol>, rhs: Expr) -> Self {
        Assignment { lhs: lhs.into(), rhs }
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Symbol {
        Symbol::new(s)
    }
}

impl From<String> for Symbol {
    fn from(s: String) -> Symbol {
        Symbol::new(s)
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.lhs, self.rhs)
    }
}

/// Ordered single-assignment program: intermediate subexpressions followed by
/// the main (output) assignments.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AssignmentCollection {
    pub subexpressions: Vec<Assignment>,
    pub main_assignments: Vec<Assignment>,
}

impl AssignmentCollection {
    pub fn new(subexpressions: Vec<Assignment>, main_assignments: Vec<Assignment>) -> Self {
        AssignmentCollection { subexpressions, main_assignments }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Assignment> {
        self.subexpressions.iter().chain(self.main_assignments.iter())
    }

    pub fn len(&self) -> usize {
        self.subexpressions.len() + self.main_assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bound_symbols(&self) -> BTreeSet<Symbol> {
        self.iter().map(|a| a.lhs.clone()).collect()
    }

    /// Symbols read by some right-hand side but never assigned.
    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let bound = self.bound_symbols();
        let mut used = BTreeSet::new();
        for a in self.iter() {
            collect_symbols(&a.rhs, &mut used);
        }
        used.retain(|s| !bound.contains(s));
        used
    }

    pub fn main_symbols(&self) -> Vec<Symbol> {
        self.main_assignments.iter().map(|a| a.lhs.clone()).collect()
    }

    /// True iff no symbol is assigned twice and every symbol read by an
    /// assignment is either a free input or assigned earlier.
    pub fn toposort_check(&self) -> bool {
        let all: Vec<&Assignment> = self.iter().collect();
        let assigned: HashSet<&Symbol> = all.iter().map(|a| &a.lhs).collect();
        if assigned.len() != all.len() {
            return false;
        }
        let mut defined: HashSet<&Symbol> = HashSet::new();
        for a in &all {
            let mut used = BTreeSet::new();
            collect_symbols(&a.rhs, &mut used);
            for s in &used {
                if assigned.contains(s) && !defined.contains(s) {
                    return false;
                }
            }
            defined.insert(&a.lhs);
        }
        true
    }

    /// Evaluates every assignment in order; the returned environment holds the
    /// inputs plus every assigned symbol.
    pub fn evaluate(&self, inputs: &Env) -> Result<Env, SymError> {
        let mut env = inputs.clone();
        for a in self.iter() {
            let v = evaluate(&a.rhs, &env)?;
            env.insert(a.lhs.clone(), v);
        }
        Ok(env)
    }

    /// Values of the main assignments in order.
    pub fn evaluate_outputs(&self, inputs: &Env) -> Result<Vec<f64>, SymError> {
        let env = self.evaluate(inputs)?;
        Ok(self.main_assignments.iter().map(|a| env[&a.lhs]).collect())
    }

    pub fn find(&self, s: &Symbol) -> Option<&Assignment> {
        self.iter().find(|a| &a.lhs == s)
    }

    /// Applies `f` to every right-hand side.
    pub fn map_rhs(&self, mut f: impl FnMut(&Expr) -> Expr) -> Self {
        let m = |v: &Vec<Assignment>, f: &mut dyn FnMut(&Expr) -> Expr| {
            v.iter().map(|a| Assignment { lhs: a.lhs.clone(), rhs: f(&a.rhs) }).collect()
        };
        AssignmentCollection {
            subexpressions: m(&self.subexpressions, &mut f),
            main_assignments: m(&self.main_assignments, &mut f),
        }
    }

    /// Applies `f(lhs, rhs)` to every right-hand side.
    pub fn map_rhs_with_lhs(&self, mut f: impl FnMut(&Symbol, &Expr) -> Expr) -> Self {
        let m = |v: &Vec<Assignment>, f: &mut dyn FnMut(&Symbol, &Expr) -> Expr| {
            v.iter().map(|a| Assignment { lhs: a.lhs.clone(), rhs: f(&a.lhs, &a.rhs) }).collect()
        };
        AssignmentCollection {
            subexpressions: m(&self.subexpressions, &mut f),
            main_assignments: m(&self.main_assignments, &mut f),
        }
    }

    /// Sequential composition: this collection's main assignments become
    /// subexpressions feeding `next`, whose outputs become the outputs.
    pub fn then(mut self, next: AssignmentCollection) -> AssignmentCollection {
        self.subexpressions.append(&mut self.main_assignments);
        self.subexpressions.extend(next.subexpressions);
        self.main_assignments = next.main_assignments;
        self
    }

    /// Appends another collection's assignments (subexpressions first).
    pub fn extend(&mut self, other: AssignmentCollection) {
        self.subexpressions.extend(other.subexpressions);
        self.main_assignments.extend(other.main_assignments);
    }
}

impl fmt::Display for AssignmentCollection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.subexpressions {
            writeln!(f, "{a}")?;
        }
        if !self.subexpressions.is_empty() && !self.main_assignments.is_empty() {
            writeln!(f, "--")?;
        }
        for a in &self.main_assignments {
            writeln!(f, "{a}")?;
        }
        Ok(())
    }
}
