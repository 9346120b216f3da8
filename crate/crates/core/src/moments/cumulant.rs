use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use super::{Direction, MomentNames};
use crate::lattice::Exponent;
use crate::symexpr::{differentiate_with, expand, substitute, Assignment, AssignmentCollection, Expr, Node, Symbol};

/// Symbols used by the cumulant transforms.
///
/// Forward: reads central moments named by `central`, writes rescaled
/// cumulants `C_e = ρ c_e` named by `cumulant` (the zeroth entry is the
/// unscaled `c_000 = log κ_000`) and introduces `density_inv = 1/κ_000`.
/// Backward: reads the post-collision cumulants in the same convention,
/// writes post-collision central moments, and introduces
/// `density = exp(c*_000)` and `density_inv = 1/density`.
#[derive(Clone, Debug)]
pub struct CumulantNames {
    pub central: MomentNames,
    pub cumulant: MomentNames,
    pub density: Symbol,
    pub density_inv: Symbol,
}

const ZERO: Exponent = [0, 0, 0];

fn placeholder(tag: &str, e: &Exponent) -> Symbol {
    Symbol::new(format!("__{tag}_{}{}{}", e[0], e[1], e[2]))
}

fn unit(a: usize) -> Exponent {
    let mut e = [0; 3];
    e[a] = 1;
    e
}

fn plus(e: &Exponent, a: usize) -> Exponent {
    let mut f = *e;
    f[a] += 1;
    f
}

fn velocity_placeholder(a: usize) -> Symbol {
    Symbol::new(format!("__U{a}"))
}

/// Visits `exps` so that each entry is reached from an earlier one by a
/// single unit step; returns `(target, source, axis)` triples.
fn derivation_steps(exps: &[Exponent]) -> Vec<(Exponent, Exponent, usize)> {
    let mut sorted: Vec<Exponent> = exps.iter().copied().filter(|e| *e != ZERO).collect();
    sorted.sort_by_key(|e| e.iter().sum::<u32>());
    sorted
        .into_iter()
        .map(|e| {
            let a = (0..3).rev().find(|&a| e[a] > 0).unwrap();
            let mut src = e;
            src[a] -= 1;
            (e, src, a)
        })
        .collect()
}

/// `(x^-n) → inv^n` for every negative power of `x`.
fn reciprocal_powers(e: &Expr, x: &Symbol, inv: &Expr) -> Expr {
    match e.node() {
        Node::Pow(b, n) if *n < 0 && b.as_symbol() == Some(x) => inv.pow(-n),
        Node::Num(_) | Node::Sym(_) => e.clone(),
        Node::Add(ts) => Expr::add(ts.iter().map(|t| reciprocal_powers(t, x, inv))),
        Node::Mul(fs) => Expr::mul(fs.iter().map(|f| reciprocal_powers(f, x, inv))),
        Node::Pow(b, n) => reciprocal_powers(b, x, inv).pow(*n),
        Node::Log(a) => reciprocal_powers(a, x, inv).log(),
        Node::Exp(a) => reciprocal_powers(a, x, inv).exp(),
    }
}

type Derivation = Vec<(Exponent, Expr)>;

fn cache() -> &'static Mutex<HashMap<(usize, Vec<Exponent>, Direction), std::sync::Arc<Derivation>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, Vec<Exponent>, Direction), std::sync::Arc<Derivation>>>> =
        OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(dim: usize, exps: &[Exponent], dir: Direction) -> std::sync::Arc<Derivation> {
    let key = (dim, exps.to_vec(), dir);
    if let Some(d) = cache().lock().unwrap().get(&key) {
        return d.clone();
    }
    let d = std::sync::Arc::new(match dir {
        Direction::Forward => derive_forward(dim, exps),
        Direction::Backward => derive_backward(exps),
    });
    cache().lock().unwrap().insert(key, d.clone());
    d
}

/// Derivatives of `C(Ξ) = Ξ·u + log K(Ξ)` at `Ξ = 0`, rescaled by `κ_000`,
/// over placeholders `__K_e` (central moments), `__KI` (1/κ_000), `__U_a`.
fn derive_forward(dim: usize, exps: &[Exponent]) -> Derivation {
    let k = |e: &Exponent| Expr::from_symbol(&placeholder("K", e));
    let k0 = placeholder("K", &ZERO);
    let xi: Vec<Symbol> = (0..dim).map(|a| Symbol::new(format!("__X{a}"))).collect();
    let mut derivs: HashMap<Exponent, Expr> = HashMap::new();
    let gen = Expr::add(
        (0..dim)
            .map(|a| Expr::from_symbol(&xi[a]) * Expr::from_symbol(&velocity_placeholder(a)))
            .chain([k(&ZERO).log()]),
    );
    derivs.insert(ZERO, gen);
    for (e, src, a) in derivation_steps(exps) {
        let hook = |s: &Symbol| -> Option<Expr> {
            let n = s.name().strip_prefix("__K_")?;
            let d: Vec<u32> = n.chars().map(|c| c.to_digit(10).unwrap()).collect();
            Some(k(&plus(&[d[0], d[1], d[2]], a)))
        };
        let d = differentiate_with(&derivs[&src], &xi[a], &hook);
        derivs.insert(e, d);
    }
    let at_zero: HashMap<Symbol, Expr> = xi.iter().map(|x| (x.clone(), Expr::zero())).collect();
    let inv = Expr::from_symbol(&Symbol::new("__KI"));
    exps.iter()
        .map(|e| {
            let c = substitute(&derivs[e], &at_zero);
            let out = if *e == ZERO {
                c
            } else {
                reciprocal_powers(&expand(&(k(&ZERO) * c)), &k0, &inv)
            };
            (*e, out)
        })
        .collect()
}

/// Derivatives of `K(Ξ) = exp(G(Ξ) - Ξ·u)` at `Ξ = 0`, written as
/// `κ_e = κ_000 · P_e(c, u)` with `c_e = C_e / κ_000`; placeholders
/// `__C_e` (rescaled cumulants), `__D` (κ_000), `__DI` (1/κ_000), `__U_a`.
fn derive_backward(exps: &[Exponent]) -> Derivation {
    let g = |e: &Exponent| Expr::from_symbol(&placeholder("G", e));
    // K = E·P with dE/dX_a = E·(G_a - u_a), so P_{e+a} = (G_a - u_a)·P_e + dP_e/dX_a.
    let mut polys: HashMap<Exponent, Expr> = HashMap::new();
    polys.insert(ZERO, Expr::one());
    for (e, src, a) in derivation_steps(exps) {
        let hook = |s: &Symbol| -> Option<Expr> {
            let n = s.name().strip_prefix("__G_")?;
            let d: Vec<u32> = n.chars().map(|c| c.to_digit(10).unwrap()).collect();
            Some(g(&plus(&[d[0], d[1], d[2]], a)))
        };
        // P depends on Ξ only through the G placeholders.
        let ghost = Symbol::new("__Xghost");
        let dp = differentiate_with(&polys[&src], &ghost, &hook);
        let p = expand(&((g(&unit(a)) - Expr::from_symbol(&velocity_placeholder(a))) * polys[&src].clone() + dp));
        polys.insert(e, p);
    }
    let d = Symbol::new("__D");
    let d_inv_sym = Expr::from_symbol(&Symbol::new("__DI"));
    let scaled: HashMap<Symbol, Expr> = exps
        .iter()
        .filter(|e| **e != ZERO)
        .map(|e| {
            (placeholder("G", e), Expr::from_symbol(&placeholder("C", e)) * Expr::from_symbol(&d).pow(-1))
        })
        .collect();
    exps.iter()
        .map(|e| {
            let out = if *e == ZERO {
                Expr::from_symbol(&d)
            } else {
                let p = substitute(&polys[e], &scaled);
                reciprocal_powers(&expand(&(Expr::from_symbol(&d) * p)), &d, &d_inv_sym)
            };
            (*e, out)
        })
        .collect()
}

fn velocity_bindings(dim: usize, u: &[Expr; 3], out: &mut HashMap<Symbol, Expr>) {
    for (a, ua) in u.iter().enumerate().take(dim) {
        out.insert(velocity_placeholder(a), ua.clone());
    }
}

/// Rescaled cumulants from central moments. The only transcendental is the
/// logarithm in the `c_000` assignment; every division by `κ_000` goes
/// through the single reciprocal subexpression.
pub fn cumulant_from_central(
    dim: usize,
    exps: &[Exponent],
    u: &[Expr; 3],
    names: &CumulantNames,
) -> AssignmentCollection {
    let derivation = cached(dim, exps, Direction::Forward);
    let mut b = HashMap::new();
    velocity_bindings(dim, u, &mut b);
    for e in exps {
        b.insert(placeholder("K", e), names.central.mono_expr(e));
    }
    b.insert(Symbol::new("__KI"), Expr::from_symbol(&names.density_inv));
    let sub = vec![Assignment::new(names.density_inv.clone(), names.central.mono_expr(&ZERO).recip())];
    let main = derivation
        .iter()
        .map(|(e, rhs)| Assignment::new(names.cumulant.mono(e), substitute(rhs, &b)))
        .collect();
    AssignmentCollection::new(sub, main)
}

/// Post-collision central moments from post-collision cumulants; the only
/// transcendental is `density = exp(c*_000)`.
pub fn central_from_cumulant(
    dim: usize,
    exps: &[Exponent],
    u: &[Expr; 3],
    names: &CumulantNames,
) -> AssignmentCollection {
    let derivation = cached(dim, exps, Direction::Backward);
    let mut b = HashMap::new();
    velocity_bindings(dim, u, &mut b);
    for e in exps {
        b.insert(placeholder("C", e), names.cumulant.mono_expr(e));
    }
    b.insert(Symbol::new("__D"), Expr::from_symbol(&names.density));
    b.insert(Symbol::new("__DI"), Expr::from_symbol(&names.density_inv));
    let sub = vec![
        Assignment::new(names.density.clone(), names.cumulant.mono_expr(&ZERO).exp()),
        Assignment::new(names.density_inv.clone(), Expr::from_symbol(&names.density).recip()),
    ];
    let main = derivation
        .iter()
        .map(|(e, rhs)| Assignment::new(names.central.mono(e), substitute(rhs, &b)))
        .collect();
    AssignmentCollection::new(sub, main)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_stencil, monomial_exponents, StencilName};
    use crate::symexpr::{evaluate, Env};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(d: usize, post: bool) -> CumulantNames {
        let s = if post { "p" } else { "" };
        CumulantNames {
            central: MomentNames::new(format!("k{s}"), d),
            cumulant: MomentNames::new(format!("C{s}"), d),
            density: Symbol::new(format!("rho{s}_k")),
            density_inv: Symbol::new(format!("rhoinv{s}")),
        }
    }

    fn u3() -> [Expr; 3] {
        [Expr::sym("u_x"), Expr::sym("u_y"), Expr::sym("u_z")]
    }

    fn count_kind(ac: &AssignmentCollection, f: fn(&Expr) -> bool) -> usize {
        fn has(e: &Expr, f: fn(&Expr) -> bool) -> bool {
            f(e) || e.children().iter().any(|c| has(c, f))
        }
        ac.iter().filter(|a| has(&a.rhs, f)).count()
    }

    #[test]
    fn low_order_closed_forms() {
        let st = make_stencil(StencilName::D3Q27);
        let exps = monomial_exponents(&st);
        let n = names(3, false);
        let ac = cumulant_from_central(3, &exps, &u3(), &n);
        let get = |e: Exponent| ac.find(&n.cumulant.mono(&e)).unwrap().rhs.clone();
        assert_eq!(get(ZERO), Expr::sym("k_000").log());
        let inv = Expr::sym("rhoinv");
        assert_eq!(get([1, 0, 0]), Expr::sym("k_000") * Expr::sym("u_x") + Expr::sym("k_100"));
        assert_eq!(get([2, 0, 0]), Expr::sym("k_200") - Expr::sym("k_100").pow(2) * inv);
        assert_eq!(count_kind(&ac, |e| matches!(e.node(), Node::Log(_))), 1);
        assert_eq!(count_kind(&ac, |e| matches!(e.node(), Node::Exp(_))), 0);
    }

    #[test]
    fn second_cumulant_matches_raw_moment_form() {
        // c_200 from raw moments of a concrete distribution
        let st = make_stencil(StencilName::D2Q9);
        let exps = monomial_exponents(&st);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f: Vec<f64> = (0..9).map(|_| rng.gen_range(0.05..0.2)).collect();
        let mom = |a: u32, b: u32| -> f64 {
            (0..9).map(|i| f[i] * st.monomial_at(i, &[a, b, 0]) as f64).sum()
        };
        let (ux, uy) = (0.03, -0.02);
        let central = |a: u32, b: u32| -> f64 {
            (0..9)
                .map(|i| {
                    let v = st.velocities[i];
                    f[i] * (v[0] as f64 - ux).powi(a as i32) * (v[1] as f64 - uy).powi(b as i32)
                })
                .sum()
        };
        let n = names(2, false);
        let ac = cumulant_from_central(2, &exps, &u3(), &n);
        let mut env = Env::new();
        env.insert(Symbol::new("u_x"), ux);
        env.insert(Symbol::new("u_y"), uy);
        for e in &exps {
            env.insert(n.central.mono(e), central(e[0], e[1]));
        }
        let out = ac.evaluate(&env).unwrap();
        let rho = mom(0, 0);
        let c200 = mom(2, 0) / rho - (mom(1, 0) / rho).powi(2);
        assert!((out[&n.cumulant.mono(&[2, 0, 0])] / rho - c200).abs() < 1e-14);
        let c100 = ux + central(1, 0) / rho;
        assert!((out[&n.cumulant.mono(&[1, 0, 0])] / rho - c100).abs() < 1e-14);
        assert!((out[&n.cumulant.mono(&ZERO)] - rho.ln()).abs() < 1e-15);
    }

    #[test]
    fn roundtrip_on_positive_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for name in [StencilName::D2Q9, StencilName::D3Q19, StencilName::D3Q27] {
            let st = make_stencil(name);
            let d = st.dim;
            let exps = monomial_exponents(&st);
            let fwd = cumulant_from_central(d, &exps, &u3(), &names(d, false));
            let mut back_names = names(d, true);
            back_names.cumulant = names(d, false).cumulant;
            let bwd = central_from_cumulant(d, &exps, &u3(), &back_names);
            assert_eq!(count_kind(&bwd, |e| matches!(e.node(), Node::Exp(_))), 1);
            assert_eq!(count_kind(&bwd, |e| matches!(e.node(), Node::Log(_))), 0);
            let ac = fwd.then(bwd);
            assert!(ac.toposort_check());
            for _ in 0..5 {
                let w: Vec<f64> = (0..st.q()).map(|_| rng.gen_range(0.02..0.2)).collect();
                let u = [rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)];
                let mut env = Env::new();
                for (a, s) in ["u_x", "u_y", "u_z"].iter().enumerate() {
                    env.insert(Symbol::new(s), u[a]);
                }
                let mut expect = Vec::new();
                for e in &exps {
                    let v: f64 = (0..st.q())
                        .map(|i| {
                            (0..d).fold(w[i], |acc, a| {
                                acc * (st.velocities[i][a] as f64 - u[a]).powi(e[a] as i32)
                            })
                        })
                        .sum();
                    env.insert(MomentNames::new("k", d).mono(e), v);
                    expect.push(v);
                }
                let out = ac.evaluate(&env).unwrap();
                for (e, v) in exps.iter().zip(&expect) {
                    let got = out[&MomentNames::new("kp", d).mono(e)];
                    assert!((got - v).abs() < 1e-11, "{name} {e:?}: {got} vs {v}");
                }
            }
        }
    }

    #[test]
    fn point_mass_cumulants() {
        let st = make_stencil(StencilName::D3Q19);
        let exps = monomial_exponents(&st);
        let n = names(3, true);
        let ac = central_from_cumulant(3, &exps, &u3(), &n);
        let rho: f64 = 1.07;
        let u = [0.04, -0.03, 0.02];
        let mut env = Env::new();
        for (a, s) in ["u_x", "u_y", "u_z"].iter().enumerate() {
            env.insert(Symbol::new(s), u[a]);
        }
        for e in &exps {
            let order: u32 = e.iter().sum();
            let v = match order {
                0 => rho.ln(),
                1 => rho * u[e.iter().position(|&x| x == 1).unwrap()],
                _ => 0.0,
            };
            env.insert(n.cumulant.mono(e), v);
        }
        let out = ac.evaluate(&env).unwrap();
        for e in &exps {
            let got = out[&n.central.mono(e)];
            let expect = if *e == ZERO { rho } else { 0.0 };
            assert!((got - expect).abs() < 1e-14, "{e:?}");
        }
        let rel = evaluate(&Expr::sym("rhop_k"), &out).unwrap();
        assert!((rel - rho).abs() < 1e-14);
    }
}
