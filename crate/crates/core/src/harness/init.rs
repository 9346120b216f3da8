use std::collections::HashMap;

use super::{HarnessError, KahanSum};
use crate::kernelgen::Field;
use crate::lattice::{monomial_exponents, SpaceKind, Stencil};
use crate::method::{MethodSpec, StorageFormat};
use crate::moments::exponent_set;
use crate::symexpr::{evaluate, expand, substitute, Env, Expr, Symbol};

/// Equilibrium populations of a method as expressions in the density
/// deviation and velocity; for zero-centered storage the background is
/// subtracted symbolically so that stored values carry no rounding from
/// the constant part.
#[derive(Debug, Clone)]
pub struct EquilibriumInit {
    exprs: Vec<Expr>,
    delta: Symbol,
    velocity: [Symbol; 3],
}

impl EquilibriumInit {
    pub fn new(spec: &MethodSpec) -> Result<Self, HarnessError> {
        let st = &spec.stencil;
        let err = |e: crate::equilibrium::EquilibriumError| HarnessError::Derivation(e.to_string());
        let exps = if spec.space == SpaceKind::Population { monomial_exponents(st) } else { exponent_set(&spec.basis) };
        let eq = spec.equilibrium.clone().absolute();
        let sym = eq.symbols.clone();
        let rho0 = Expr::num(eq.background_density.clone());
        let mut b = HashMap::new();
        b.insert(sym.density.clone(), rho0 + Expr::from_symbol(&sym.delta_density));
        let pops = eq.populations(st, &exps).map_err(err)?;
        let background = match spec.storage {
            StorageFormat::ZeroCentered => Some(eq.background(st, &exps).map_err(err)?.populations),
            StorageFormat::Absolute => None,
        };
        let exprs = pops
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let shifted = substitute(p, &b);
                match &background {
                    Some(w) => expand(&(shifted - Expr::num(w[i].clone()))),
                    None => expand(&shifted),
                }
            })
            .collect();
        Ok(EquilibriumInit { exprs, delta: sym.delta_density, velocity: sym.velocity })
    }

    /// Stored populations at density `ρ⁰ + delta` and velocity `u`.
    pub fn populations(&self, delta: f64, u: [f64; 3], params: &Env) -> Result<Vec<f64>, HarnessError> {
        let mut env = params.clone();
        env.insert(self.delta.clone(), delta);
        for (s, v) in self.velocity.iter().zip(u) {
            env.insert(s.clone(), v);
        }
        self.exprs
            .iter()
            .map(|e| evaluate(e, &env).map_err(|e| HarnessError::Derivation(e.to_string())))
            .collect()
    }
}

/// Field initialized to equilibrium, with `state(cell)` giving the density
/// deviation from the background and the velocity.
pub fn equilibrium_field(
    spec: &MethodSpec,
    dims: &[usize],
    params: &Env,
    mut state: impl FnMut([usize; 3]) -> (f64, [f64; 3]),
) -> Result<Field, HarnessError> {
    let init = EquilibriumInit::new(spec)?;
    let mut f = Field::new(dims, spec.stencil.q())?;
    for c in 0..f.cells() {
        let (d, u) = state(f.coords(c));
        let v = init.populations(d, u, params)?;
        f.set_cell(c, &v);
    }
    Ok(f)
}

/// Density (or height) and momentum of one cell.
pub fn macroscopic(f: &Field, st: &Stencil, cell: usize, background_density: f64) -> (f64, [f64; 3]) {
    let mut rho = KahanSum::default();
    let mut j = [0.0; 3];
    for (i, xi) in st.velocities.iter().enumerate() {
        let v = f.get(i, cell);
        rho.add(v);
        for a in 0..st.dim {
            if xi[a] != 0 {
                j[a] += f64::from(xi[a]) * v;
            }
        }
    }
    (background_density + rho.value(), j)
}
