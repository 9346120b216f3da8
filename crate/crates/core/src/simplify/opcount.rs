use std::fmt;
use std::ops::{Add, AddAssign};

use num_traits::{One, Signed};
use serde::Serialize;

use crate::symexpr::{AssignmentCollection, Expr, Node, Rational};

/// Arithmetic operations needed to evaluate an expression in the fixed
/// evaluation order (see `symexpr::evaluate`).
///
/// Each binary node counts once; `x^n` costs `n − 1` multiplications; a
/// coefficient of `±1` is free; `log` and `exp` count as transcendentals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OpCount {
    pub additions: usize,
    pub subtractions: usize,
    pub multiplications: usize,
    pub divisions: usize,
    pub transcendentals: usize,
    pub total: usize,
}

impl OpCount {
    fn with_total(mut self) -> Self {
        self.total = self.additions + self.subtractions + self.multiplications + self.divisions + self.transcendentals;
        self
    }
}

impl Add for OpCount {
    type Output = OpCount;
    fn add(self, o: OpCount) -> OpCount {
        OpCount {
            additions: self.additions + o.additions,
            subtractions: self.subtractions + o.subtractions,
            multiplications: self.multiplications + o.multiplications,
            divisions: self.divisions + o.divisions,
            transcendentals: self.transcendentals + o.transcendentals,
            total: 0,
        }
        .with_total()
    }
}

impl AddAssign for OpCount {
    fn add_assign(&mut self, o: OpCount) {
        *self = *self + o;
    }
}

impl std::iter::Sum for OpCount {
    fn sum<I: Iterator<Item = OpCount>>(iter: I) -> OpCount {
        iter.fold(OpCount::default(), |a, b| a + b)
    }
}

impl fmt::Display for OpCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (+{} -{} *{} /{} f{})",
            self.total, self.additions, self.subtractions, self.multiplications, self.divisions, self.transcendentals
        )
    }
}

pub fn count_ops(e: &Expr) -> OpCount {
    let mut c = OpCount::default();
    count(e, &mut c);
    c.with_total()
}

pub fn count_collection(ac: &AssignmentCollection) -> OpCount {
    ac.iter().map(|a| count_ops(&a.rhs)).sum()
}

fn count(e: &Expr, c: &mut OpCount) {
    match e.node() {
        Node::Num(_) | Node::Sym(_) => {}
        Node::Add(ts) => {
            count(&ts[0], c);
            for t in &ts[1..] {
                match t.node() {
                    Node::Mul(fs) if fs[0].as_num().is_some_and(|x| x.is_negative()) => {
                        c.subtractions += 1;
                        count_product(fs, c);
                    }
                    _ => {
                        c.additions += 1;
                        count(t, c);
                    }
                }
            }
        }
        Node::Mul(fs) => count_product(fs, c),
        Node::Pow(b, n) => {
            count(b, c);
            c.multiplications += (n.unsigned_abs() as usize).saturating_sub(1);
            if *n < 0 {
                c.divisions += 1;
            }
        }
        Node::Log(a) | Node::Exp(a) => {
            c.transcendentals += 1;
            count(a, c);
        }
    }
}

fn count_product(fs: &[Expr], c: &mut OpCount) {
    let mut operands = 0usize;
    for f in fs {
        match f.node() {
            Node::Num(r) => {
                if !is_unit(r) {
                    operands += 1;
                }
            }
            Node::Pow(b, n) if *n < 0 => {
                count(b, c);
                c.multiplications += (n.unsigned_abs() as usize) - 1;
                c.divisions += 1;
            }
            _ => {
                operands += 1;
                count(f, c);
            }
        }
    }
    c.multiplications += operands.saturating_sub(1);
}

fn is_unit(r: &Rational) -> bool {
    r.abs().is_one()
}
