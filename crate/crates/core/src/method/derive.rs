use std::collections::HashMap;

use super::{validate, MethodError, MethodSpec, StorageFormat};
use crate::equilibrium::Macroscopic;
use crate::lattice::{monomial_exponents, Exponent, SpaceKind};
use crate::moments::{
    binomial_chimera, central_from_cumulant, chimera_backward_raw, chimera_forward_raw, cumulant_from_central,
    exponent_set, monomialize, polynomialize, CumulantNames, Direction, MomentNames,
};
use crate::simplify::{count_collection, OpCount};
use crate::symexpr::{expand, Env, SymError, int, Assignment, AssignmentCollection, Expr, Rational, Symbol};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct PhaseCounts {
    pub conserved: OpCount,
    pub forward: OpCount,
    pub relaxation: OpCount,
    pub backward: OpCount,
}

/// Facts about a derived rule that the simplification steps rely on.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleInfo {
    pub macroscopic: Macroscopic,
    pub density_inv: Symbol,
    pub zero_centered: bool,
    pub background_density: Rational,
    /// Direct population sums that can be re-expressed through the forward
    /// transform's monomial moments: `(lhs, replacement rhs)`.
    pub conserved_rewrites: Vec<(Symbol, Expr)>,
    /// Closed forms of the forward transform's zeroth- and first-order
    /// monomial moments in macroscopic quantities.
    pub raw_closed_forms: HashMap<Symbol, Expr>,
    /// Raw moments derived from the transformed inputs by adding constants
    /// (zero-centered storage against an absolute equilibrium).
    pub shifted_raw: Vec<Symbol>,
    /// Zeroth- and first-order central moments eligible for collapsing.
    pub central_low_order: Vec<Symbol>,
}

#[derive(Debug, Clone)]
pub struct CollisionRule {
    pub assignments: AssignmentCollection,
    pub inputs: Vec<Symbol>,
    pub outputs: Vec<Symbol>,
    pub phases: PhaseCounts,
    pub info: RuleInfo,
    pub method: MethodSpec,
}

impl CollisionRule {
    pub fn op_count(&self) -> OpCount {
        count_collection(&self.assignments)
    }

    /// Free symbols other than the input populations (relaxation rates and
    /// other runtime parameters).
    pub fn parameters(&self) -> Vec<Symbol> {
        self.assignments.free_symbols().into_iter().filter(|s| !self.inputs.contains(s)).collect()
    }

    /// Numeric evaluation for one cell.
    pub fn evaluate(&self, pops: &[f64], params: &Env) -> Result<Vec<f64>, SymError> {
        let mut env = params.clone();
        for (s, v) in self.inputs.iter().zip(pops) {
            env.insert(s.clone(), *v);
        }
        self.assignments.evaluate_outputs(&env)
    }

    pub fn with_assignments(&self, assignments: AssignmentCollection) -> CollisionRule {
        CollisionRule { assignments, ..self.clone() }
    }
}

fn zero_centered(spec: &MethodSpec) -> bool {
    spec.storage == StorageFormat::ZeroCentered
}

fn input_symbols(spec: &MethodSpec) -> Vec<Symbol> {
    let p = if zero_centered(spec) { "df" } else { "f" };
    (0..spec.stencil.q()).map(|i| Symbol::new(format!("{p}_{i}"))).collect()
}

fn output_symbols(spec: &MethodSpec) -> Vec<Symbol> {
    let p = if zero_centered(spec) { "df_post" } else { "f_post" };
    (0..spec.stencil.q()).map(|i| Symbol::new(format!("{p}_{i}"))).collect()
}

fn density_inv_symbol(mac: &Macroscopic) -> Symbol {
    Symbol::new(format!("{}_inv", mac.density))
}

/// Density (or height) and velocity from the populations. Zero-centered
/// storage sums deviations and adds the background density; the density
/// reciprocal is computed once.
pub fn conserved_quantity_equations(spec: &MethodSpec) -> AssignmentCollection {
    let st = &spec.stencil;
    let mac = &spec.equilibrium.symbols;
    let f: Vec<Expr> = input_symbols(spec).iter().map(Expr::from_symbol).collect();
    let total = Expr::add(f.iter().cloned());
    let rho = Expr::from_symbol(&mac.density);
    let mut out = Vec::new();
    if zero_centered(spec) {
        out.push(Assignment::new(mac.delta_density.clone(), total));
        out.push(Assignment::new(
            mac.density.clone(),
            Expr::num(spec.equilibrium.background_density.clone()) + Expr::from_symbol(&mac.delta_density),
        ));
    } else {
        out.push(Assignment::new(mac.density.clone(), total));
    }
    let inv = density_inv_symbol(mac);
    out.push(Assignment::new(inv.clone(), rho.recip()));
    for a in 0..st.dim {
        let mom = Expr::add((0..st.q()).map(|i| f[i].scale(&int(st.velocities[i][a].into()))));
        out.push(Assignment::new(mac.velocity[a].clone(), Expr::from_symbol(&inv) * mom));
    }
    AssignmentCollection::new(Vec::new(), out)
}

fn unit(a: usize) -> Exponent {
    let mut e = [0; 3];
    e[a] = 1;
    e
}

fn relax(q: &Expr, rate: &Expr, q_eq: &Expr, src: Option<&Expr>) -> Expr {
    let mut terms = vec![q.clone(), rate.clone() * (q_eq.clone() - q.clone())];
    if let Some(s) = src {
        terms.push(s.clone());
    }
    Expr::add(terms)
}

/// Derives the collision rule of a valid method.
pub fn derive_collision_rule(spec: &MethodSpec) -> Result<CollisionRule, MethodError> {
    validate(spec).map_err(MethodError::Invalid)?;
    let st = &spec.stencil;
    let dim = st.dim;
    let q = st.q();
    let eq = &spec.equilibrium;
    let mac = eq.symbols.clone();
    let zc = zero_centered(spec);
    // zero-centered storage relaxed against the absolute equilibrium
    let shifted = zc && !eq.deviation_only;
    let inputs = input_symbols(spec);
    let outputs = output_symbols(spec);
    let f: Vec<Expr> = inputs.iter().map(Expr::from_symbol).collect();
    let exps = if spec.space == SpaceKind::Population { monomial_exponents(st) } else { exponent_set(&spec.basis) };
    let background = if zc { Some(eq.background(st, &exps)?) } else { None };
    let u = mac.velocity_exprs(dim);
    let conserved = conserved_quantity_equations(spec);
    let density_inv = density_inv_symbol(&mac);

    let mut info = RuleInfo {
        macroscopic: mac.clone(),
        density_inv: density_inv.clone(),
        zero_centered: zc,
        background_density: eq.background_density.clone(),
        conserved_rewrites: Vec::new(),
        raw_closed_forms: HashMap::new(),
        shifted_raw: Vec::new(),
        central_low_order: Vec::new(),
    };

    if spec.space == SpaceKind::Population {
        let feq = eq.quantities(st, SpaceKind::Population, &exps)?;
        let w: Vec<Rational> = background.map(|b| b.populations).unwrap_or_default();
        let rate = &spec.rates[0];
        let mut sub = Vec::new();
        let mut main = Vec::new();
        for i in 0..q {
            let src = spec.source.as_ref().map(|s| &s[i]);
            let rhs = if shifted {
                let fa = Symbol::new(format!("f_{i}"));
                sub.push(Assignment::new(fa.clone(), f[i].clone() + Expr::num(w[i].clone())));
                let fa = Expr::from_symbol(&fa);
                relax(&fa, rate, &feq[i], src) - Expr::num(w[i].clone())
            } else {
                relax(&f[i], rate, &feq[i], src)
            };
            main.push(Assignment::new(outputs[i].clone(), rhs));
        }
        let relaxation = AssignmentCollection::new(sub, main);
        let phases = PhaseCounts {
            conserved: count_collection(&conserved),
            relaxation: count_collection(&relaxation),
            ..Default::default()
        };
        let assignments = conserved.then(relaxation);
        return Ok(CollisionRule { assignments, inputs, outputs, phases, info, method: spec.clone() });
    }

    // Forward: populations -> monomial raw moments -> space quantities -> polynomials.
    let fwd_names = MomentNames::new(if zc { "dm" } else { "m" }, dim);
    let mut forward = chimera_forward_raw(st, &exps, &f, &fwd_names);
    let rho = Expr::from_symbol(&mac.density);
    info.raw_closed_forms.insert(
        fwd_names.mono(&[0, 0, 0]),
        Expr::from_symbol(if zc { &mac.delta_density } else { &mac.density }),
    );
    for a in 0..dim {
        info.raw_closed_forms.insert(fwd_names.mono(&unit(a)), rho.clone() * u[a].clone());
    }
    let density_lhs = if zc { &mac.delta_density } else { &mac.density };
    info.conserved_rewrites.push((density_lhs.clone(), fwd_names.mono_expr(&[0, 0, 0])));
    for a in 0..dim {
        info.conserved_rewrites
            .push((mac.velocity[a].clone(), Expr::from_symbol(&density_inv) * fwd_names.mono_expr(&unit(a))));
    }
    let chimera = std::mem::take(&mut forward);
    let raw_names = if shifted {
        let names = MomentNames::new("m", dim);
        let bg = background.as_ref().expect("zero-centered storage has a background");
        for e in &exps {
            let m0: Rational = (0..q)
                .map(|i| &bg.populations[i] * Rational::from_integer(st.monomial_at(i, e).into()))
                .sum();
            forward
                .subexpressions
                .push(Assignment::new(names.mono(e), fwd_names.mono_expr(e) + Expr::num(m0)));
            info.shifted_raw.push(names.mono(e));
        }
        names
    } else {
        fwd_names.clone()
    };

    let central_names = MomentNames::new("k", dim);
    let mono_names = match spec.space {
        SpaceKind::RawMoment => raw_names.clone(),
        SpaceKind::CentralMoment | SpaceKind::Cumulant => {
            let ac = binomial_chimera(Direction::Forward, dim, &exps, &u, &raw_names, &central_names);
            append_all(&mut forward, ac);
            for e in exps.iter().filter(|e| e.iter().sum::<u32>() <= 1) {
                info.central_low_order.push(central_names.mono(e));
            }
            if spec.space == SpaceKind::Cumulant {
                let names = CumulantNames {
                    central: central_names.clone(),
                    cumulant: MomentNames::new("C", dim),
                    density: Symbol::new("k_density"),
                    density_inv: Symbol::new("k_inv"),
                };
                append_all(&mut forward, cumulant_from_central(dim, &exps, &u, &names));
                names.cumulant
            } else {
                central_names.clone()
            }
        }
        SpaceKind::Population => unreachable!(),
    };
    let poly_syms: Vec<Symbol> = (0..spec.basis.len()).map(|r| Symbol::new(format!("q_{r}"))).collect();
    append_all(&mut forward, polynomialize(&spec.basis, &exps, &mono_names, &poly_syms)?);

    // Relaxation in polynomial space.
    let eq_mono = eq.quantities(st, spec.space, &exps)?;
    let mut relaxation = Vec::with_capacity(spec.basis.len());
    let post_syms: Vec<Symbol> = (0..spec.basis.len()).map(|r| Symbol::new(format!("q_post_{r}"))).collect();
    for (r, p) in spec.basis.polynomials.iter().enumerate() {
        let q_eq = expand(&Expr::add(
            exps.iter().zip(&eq_mono).map(|(e, v)| v.scale(&p.coefficient(e))).filter(|t| !t.is_zero()),
        ));
        let src = spec.source.as_ref().map(|s| &s[r]);
        let rhs = relax(&Expr::from_symbol(&poly_syms[r]), &spec.rates[r], &q_eq, src);
        relaxation.push(Assignment::new(post_syms[r].clone(), rhs));
    }
    let relaxation = AssignmentCollection::new(relaxation, Vec::new());

    // Backward: polynomials -> monomials -> raw moments -> populations.
    let post_prefix = match spec.space {
        SpaceKind::RawMoment => if zc && !shifted { "dm_post" } else { "m_post" },
        SpaceKind::CentralMoment => "k_post",
        SpaceKind::Cumulant => "C_post",
        SpaceKind::Population => unreachable!(),
    };
    let post_mono = MomentNames::new(post_prefix, dim);
    let post_vals: Vec<Expr> = post_syms.iter().map(Expr::from_symbol).collect();
    let mut backward = monomialize(&spec.basis, &exps, &post_vals, &post_mono)?;
    backward.subexpressions.append(&mut backward.main_assignments);
    let raw_post = match spec.space {
        SpaceKind::RawMoment => post_mono,
        SpaceKind::CentralMoment | SpaceKind::Cumulant => {
            let k_post = if spec.space == SpaceKind::Cumulant {
                let names = CumulantNames {
                    central: MomentNames::new("k_post", dim),
                    cumulant: post_mono.clone(),
                    density: Symbol::new(format!("{}_post", mac.density)),
                    density_inv: Symbol::new(format!("{}_post_inv", mac.density)),
                };
                append_all(&mut backward, central_from_cumulant(dim, &exps, &u, &names));
                names.central
            } else {
                post_mono
            };
            let names = MomentNames::new(if zc && !shifted { "dm_post" } else { "m_post" }, dim);
            append_all(&mut backward, binomial_chimera(Direction::Backward, dim, &exps, &u, &k_post, &names));
            names
        }
        SpaceKind::Population => unreachable!(),
    };
    let final_mono: Vec<Expr> = if shifted {
        let bg = background.as_ref().unwrap();
        let names = MomentNames::new("dm_post", dim);
        for e in &exps {
            let m0: Rational = (0..q)
                .map(|i| &bg.populations[i] * Rational::from_integer(st.monomial_at(i, e).into()))
                .sum();
            backward
                .subexpressions
                .push(Assignment::new(names.mono(e), raw_post.mono_expr(e) - Expr::num(m0)));
        }
        exps.iter().map(|e| names.mono_expr(e)).collect()
    } else {
        exps.iter().map(|e| raw_post.mono_expr(e)).collect()
    };
    let back_raw = chimera_backward_raw(st, &exps, &final_mono, &outputs)?;
    backward.subexpressions.extend(back_raw.subexpressions);
    backward.main_assignments = back_raw.main_assignments;

    let phases = PhaseCounts {
        conserved: count_collection(&conserved),
        forward: count_collection(&chimera) + count_collection(&forward),
        relaxation: count_collection(&relaxation),
        backward: count_collection(&backward),
    };
    let mut assignments = chimera.then(conserved);
    assignments.subexpressions.append(&mut assignments.main_assignments);
    append_all(&mut assignments, forward);
    assignments.subexpressions.extend(relaxation.subexpressions);
    assignments.subexpressions.extend(backward.subexpressions);
    assignments.main_assignments = backward.main_assignments;
    debug_assert!(assignments.toposort_check());
    Ok(CollisionRule { assignments, inputs, outputs, phases, info, method: spec.clone() })
}

fn append_all(target: &mut AssignmentCollection, ac: AssignmentCollection) {
    target.subexpressions.extend(ac.subexpressions);
    target.subexpressions.extend(ac.main_assignments);
}
