//! Double-precision evaluation with a fixed operation order.
//!
//! The order is part of the contract; the tape compiler and the C emitter
//! reproduce it exactly so results agree bit for bit:
//!
//! * sums accumulate left to right over the stored children; a term with a
//!   negative coefficient is subtracted as its positive counterpart;
//! * products start from the coefficient (unless it is ±1), multiply the
//!   positive-power factors left to right, then divide by each
//!   negative-power factor in turn; a coefficient of −1 negates at the end;
//! * `x^n` for `n > 0` is `n − 1` successive multiplications by `x`, and a
//!   standalone `x^-n` is `1 / x^n`.

use std::collections::HashMap;

use num_traits::{One, Signed};

use super::expr::{rational_to_f64, Expr, Node, Rational, Symbol};
use super::SymError;

pub type Env = HashMap<Symbol, f64>;

pub fn evaluate(e: &Expr, env: &Env) -> Result<f64, SymError> {
    match e.node() {
        Node::Num(r) => Ok(rational_to_f64(r)),
        Node::Sym(s) => env
            .get(s)
            .copied()
            .ok_or_else(|| SymError::UnboundSymbol(s.name().to_string())),
        Node::Add(ts) => {
            let mut acc = evaluate(&ts[0], env)?;
            for t in &ts[1..] {
                match negated_product(t) {
                    Some(fs) => acc -= eval_product(fs, true, env)?,
                    None => acc += evaluate(t, env)?,
                }
            }
            Ok(acc)
        }
        Node::Mul(fs) => eval_product(fs, false, env),
        Node::Pow(b, n) => {
            let v = evaluate(b, env)?;
            if *n > 0 {
                Ok(int_pow(v, *n))
            } else {
                Ok(1.0 / int_pow(v, -n))
            }
        }
        Node::Log(a) => {
            let v = evaluate(a, env)?;
            if v <= 0.0 {
                return Err(SymError::LogDomain(v));
            }
            Ok(v.ln())
        }
        Node::Exp(a) => Ok(evaluate(a, env)?.exp()),
    }
}

/// Factors of a product with a negative leading coefficient.
pub(crate) fn negated_product(t: &Expr) -> Option<&[Expr]> {
    match t.node() {
        Node::Mul(fs) => match fs[0].as_num() {
            Some(c) if c.is_negative() => Some(fs),
            _ => None,
        },
        _ => None,
    }
}

pub(crate) fn int_pow(v: f64, n: i64) -> f64 {
    let mut acc = v;
    for _ in 1..n {
        acc *= v;
    }
    acc
}

/// Splits product factors into (coefficient, numerator factors, denominator
/// factors as (base, positive exponent)).
pub(crate) fn product_parts(fs: &[Expr]) -> (Option<&Rational>, Vec<&Expr>, Vec<(&Expr, i64)>) {
    let (coeff, rest) = match fs[0].as_num() {
        Some(c) => (Some(c), &fs[1..]),
        None => (None, fs),
    };
    let mut num = Vec::new();
    let mut den = Vec::new();
    for f in rest {
        match f.node() {
            Node::Pow(b, n) if *n < 0 => den.push((b, -n)),
            _ => num.push(f),
        }
    }
    (coeff, num, den)
}

fn eval_product(fs: &[Expr], absolute: bool, env: &Env) -> Result<f64, SymError> {
    let (coeff, num, den) = product_parts(fs);
    let mut c = coeff.cloned().unwrap_or_else(Rational::one);
    if absolute {
        c = c.abs();
    }
    let neg_one = -Rational::one();
    let negate = c == neg_one;
    let mut acc: Option<f64> = if c.is_one() || negate {
        None
    } else {
        Some(rational_to_f64(&c))
    };
    for f in num {
        let v = evaluate(f, env)?;
        acc = Some(match acc {
            Some(a) => a * v,
            None => v,
        });
    }
    for (b, n) in den {
        let v = int_pow(evaluate(b, env)?, n);
        acc = Some(match acc {
            Some(a) => a / v,
            None => 1.0 / v,
        });
    }
    let v = acc.unwrap_or(1.0);
    Ok(if negate { -v } else { v })
}
