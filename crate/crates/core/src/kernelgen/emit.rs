//! C source emission. Expressions are printed fully parenthesized in the
//! same operation order as the tape, so with floating-point contraction
//! disabled a compiled kernel reproduces tape results.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_traits::{One, Signed};

use super::BoundRule;
use crate::symexpr::{free_symbols, negated_product, product_parts, rational_to_f64, Expr, Node, Rational, Symbol};

fn literal(v: f64) -> String {
    let s = format!("{v:?}");
    if v < 0.0 {
        format!("({s})")
    } else {
        s
    }
}

fn int_pow(base: &str, n: i64) -> String {
    let mut acc = base.to_string();
    for _ in 1..n {
        acc = format!("({acc} * {base})");
    }
    acc
}

fn expr(e: &Expr) -> String {
    match e.node() {
        Node::Num(r) => literal(rational_to_f64(r)),
        Node::Sym(s) => s.name().to_string(),
        Node::Add(ts) => {
            let mut acc = expr(&ts[0]);
            for t in &ts[1..] {
                acc = match negated_product(t) {
                    Some(fs) => format!("({acc} - {})", product(fs, true)),
                    None => format!("({acc} + {})", expr(t)),
                };
            }
            acc
        }
        Node::Mul(fs) => product(fs, false),
        Node::Pow(b, n) => {
            let v = expr(b);
            if *n > 0 {
                int_pow(&v, *n)
            } else {
                format!("(1.0 / {})", int_pow(&v, -n))
            }
        }
        Node::Log(a) => format!("log({})", expr(a)),
        Node::Exp(a) => format!("exp({})", expr(a)),
    }
}

fn product(fs: &[Expr], absolute: bool) -> String {
    let (coeff, num, den) = product_parts(fs);
    let mut c = coeff.cloned().unwrap_or_else(Rational::one);
    if absolute {
        c = c.abs();
    }
    let negate = c == -Rational::one();
    let mut acc = if c.is_one() || negate { None } else { Some(literal(rational_to_f64(&c))) };
    for f in num {
        let v = expr(f);
        acc = Some(match acc {
            Some(a) => format!("({a} * {v})"),
            None => v,
        });
    }
    for (b, n) in den {
        let v = int_pow(&expr(b), n);
        acc = Some(format!("({} / {v})", acc.unwrap_or_else(|| "1.0".into())));
    }
    let v = acc.unwrap_or_else(|| "1.0".into());
    if negate {
        format!("(-{v})")
    } else {
        v
    }
}

fn index_expr(offset: [i32; 3], dim: usize) -> String {
    let axis = |a: usize, var: &str, n: &str| -> String {
        match offset[a] {
            0 => var.to_string(),
            o => format!("(({var} + {o} + {n}) % {n})"),
        }
    };
    let x = axis(0, "ix", "nx");
    let y = axis(1, "iy", "ny");
    if dim == 2 {
        format!("{x} + nx * {y}")
    } else {
        let z = axis(2, "iz", "nz");
        format!("{x} + nx * ({y} + ny * {z})")
    }
}

/// Emits a self-contained C function
/// `void name(double* src, double* dst, <params>, int nx, int ny[, int nz])`.
pub fn emit_c(bound: &BoundRule, name: &str) -> String {
    let rule = &bound.rule;
    let st = &rule.method.stencil;
    let dim = st.dim;
    let params = rule.parameters();
    let mut out = String::new();
    let _ = writeln!(out, "/* {} collision kernel, {} streaming, {} populations.", st.name, bound.pattern, st.q());
    let _ = writeln!(out, " * Layout: structure of arrays; population i of cell (x, y[, z]) is stored at");
    let _ = writeln!(out, " * i * n_cells + x + nx * (y + ny * z). Periodic in all directions. */");
    let _ = writeln!(out, "#include <math.h>\n");
    let mut sig = vec!["double* src".to_string(), "double* dst".to_string()];
    sig.extend(params.iter().map(|p| format!("double {}", p.name())));
    sig.push("int nx".into());
    sig.push("int ny".into());
    if dim == 3 {
        sig.push("int nz".into());
    }
    let _ = writeln!(out, "void {name}({})\n{{", sig.join(", "));
    let n_cells = if dim == 3 { "(long)nx * ny * nz" } else { "(long)nx * ny" };
    let _ = writeln!(out, "    const long n_cells = {n_cells};");
    let mut indent = String::from("    ");
    if dim == 3 {
        let _ = writeln!(out, "{indent}for (int iz = 0; iz < nz; ++iz) {{");
        indent.push_str("    ");
    }
    let _ = writeln!(out, "{indent}for (int iy = 0; iy < ny; ++iy) {{");
    indent.push_str("    ");
    let _ = writeln!(out, "{indent}for (int ix = 0; ix < nx; ++ix) {{");
    indent.push_str("    ");
    for (s, acc) in rule.inputs.iter().zip(&bound.reads) {
        let _ = writeln!(out, "{indent}const double {s} = src[{} * n_cells + {}];", acc.index, index_expr(acc.offset, dim));
    }
    for a in &rule.assignments.subexpressions {
        let _ = writeln!(out, "{indent}const double {} = {};", a.lhs, expr(&a.rhs));
    }
    let referenced: BTreeSet<Symbol> =
        rule.assignments.main_assignments.iter().flat_map(|a| free_symbols(&a.rhs)).collect();
    for a in &rule.assignments.main_assignments {
        match rule.outputs.iter().position(|o| *o == a.lhs) {
            Some(k) => {
                let acc = bound.writes[k];
                let target = format!("dst[{} * n_cells + {}]", acc.index, index_expr(acc.offset, dim));
                if referenced.contains(&a.lhs) {
                    let _ = writeln!(out, "{indent}const double {} = {}; {target} = {};", a.lhs, expr(&a.rhs), a.lhs);
                } else {
                    let _ = writeln!(out, "{indent}{target} = {};", expr(&a.rhs));
                }
            }
            None => {
                let _ = writeln!(out, "{indent}const double {} = {};", a.lhs, expr(&a.rhs));
            }
        }
    }
    let closing = if dim == 3 { 3 } else { 2 };
    for _ in 0..closing {
        indent.truncate(indent.len() - 4);
        let _ = writeln!(out, "{indent}}}");
    }
    let _ = writeln!(out, "}}");
    out
}
