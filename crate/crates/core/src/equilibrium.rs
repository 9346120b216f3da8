//! Equilibrium distributions: the (optionally truncated) continuous
//! Maxwellian, discrete user-given equilibria, the rest-state background
//! distribution, and deviation ("delta") equilibria.

use std::collections::HashMap;

use num_traits::Zero;
use thiserror::Error;

use crate::lattice::{Exponent, SpaceKind, Stencil, StencilName};
use crate::linalg::RatMatrix;
use crate::moments::{binomial_chimera, cumulant_from_central, CumulantNames, Direction, MomentNames};
use crate::symexpr::{
    degree_in, expand, int, rat, substitute, AssignmentCollection, Expr, Node, Rational, Symbol,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error("cumulants of a deviation-only equilibrium are undefined")]
    CumulantOfDelta,
    #[error("deviation quantities are not defined in cumulant space")]
    DeltaInCumulantSpace,
    #[error("background distribution needs numeric parameters; `{0}` is symbolic")]
    SymbolicBackground(String),
    #[error("monomial moment matrix is singular")]
    Singular,
    #[error("discrete equilibrium has {got} entries, stencil needs {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("shallow-water equilibrium requires D2Q9")]
    NotD2Q9,
    #[error("equilibrium fails the {moment} check; residual {residual}")]
    Validation { moment: String, residual: Expr },
}

#[derive(Debug, Clone, PartialEq)]
pub enum EquilibriumForm {
    /// Maxwellian with squared speed of sound `cs2`; `truncation` drops all
    /// terms of higher total degree in the velocity.
    Continuous { cs2: Expr, truncation: Option<u32> },
    /// Per-direction expressions over the macroscopic symbols.
    Discrete(Vec<Expr>),
}

/// The macroscopic symbols an equilibrium is written in.
#[derive(Debug, Clone, PartialEq)]
pub struct Macroscopic {
    pub density: Symbol,
    pub delta_density: Symbol,
    pub velocity: [Symbol; 3],
}

impl Macroscopic {
    pub fn hydrodynamic() -> Self {
        Macroscopic {
            density: Symbol::new("rho"),
            delta_density: Symbol::new("delta_rho"),
            velocity: [Symbol::new("u_x"), Symbol::new("u_y"), Symbol::new("u_z")],
        }
    }

    pub fn shallow_water() -> Self {
        Macroscopic {
            density: Symbol::new("h"),
            delta_density: Symbol::new("delta_h"),
            ..Self::hydrodynamic()
        }
    }

    pub fn velocity_exprs(&self, dim: usize) -> [Expr; 3] {
        let mut u = [Expr::zero(), Expr::zero(), Expr::zero()];
        for (a, s) in self.velocity.iter().enumerate().take(dim) {
            u[a] = Expr::from_symbol(s);
        }
        u
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub form: EquilibriumForm,
    pub symbols: Macroscopic,
    pub dim: usize,
    /// Relax against `q^eq - q^0` rather than `q^eq`.
    pub deviation_only: bool,
    pub background_density: Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundDistribution {
    pub populations: Vec<Rational>,
    pub density: Rational,
}

impl Equilibrium {
    /// Second-order Maxwellian with `c_s² = 1/3`, background density 1.
    pub fn maxwellian(dim: usize) -> Self {
        Equilibrium {
            form: EquilibriumForm::Continuous { cs2: Expr::rational(1, 3), truncation: Some(2) },
            symbols: Macroscopic::hydrodynamic(),
            dim,
            deviation_only: false,
            background_density: int(1),
        }
    }

    pub fn delta(mut self) -> Self {
        self.deviation_only = true;
        self
    }

    pub fn absolute(mut self) -> Self {
        self.deviation_only = false;
        self
    }

    fn rho(&self) -> Expr {
        Expr::from_symbol(&self.symbols.density)
    }

    fn u(&self) -> [Expr; 3] {
        self.symbols.velocity_exprs(self.dim)
    }

    fn truncate(&self, e: &Expr) -> Expr {
        let order = match &self.form {
            EquilibriumForm::Continuous { truncation: Some(k), .. } => *k,
            _ => return expand(e),
        };
        let syms = &self.symbols.velocity[..self.dim];
        let e = expand(e);
        match e.node() {
            Node::Add(ts) => Expr::add(ts.iter().filter(|t| degree_in(t, syms) <= i64::from(order)).cloned()),
            _ if degree_in(&e, syms) > i64::from(order) => Expr::zero(),
            _ => e,
        }
    }

    /// Monomial raw moment of the absolute equilibrium.
    pub fn raw_moment(&self, st: &Stencil, e: &Exponent) -> Expr {
        match &self.form {
            EquilibriumForm::Continuous { cs2, .. } => {
                let u = self.u();
                let factors = (0..self.dim).map(|a| gaussian_moment(e[a], &u[a], cs2));
                self.truncate(&Expr::mul(std::iter::once(self.rho()).chain(factors)))
            }
            EquilibriumForm::Discrete(f) => expand(&Expr::add(
                (0..st.q()).map(|i| f[i].scale(&int(st.monomial_at(i, e)))),
            )),
        }
    }

    pub fn raw_moments(&self, st: &Stencil, exps: &[Exponent]) -> Vec<Expr> {
        exps.iter().map(|e| self.raw_moment(st, e)).collect()
    }

    /// Central moments obtained from the (truncated) raw moments through the
    /// binomial relation, so both spaces describe the same discrete state.
    pub fn central_moments(&self, st: &Stencil, exps: &[Exponent]) -> Vec<Expr> {
        let raw = self.raw_moments(st, exps);
        let src = MomentNames::new("__eqm", self.dim);
        let dst = MomentNames::new("__eqk", self.dim);
        let ac = binomial_chimera(Direction::Forward, self.dim, exps, &self.u(), &src, &dst);
        let mut b: HashMap<Symbol, Expr> = exps.iter().zip(&raw).map(|(e, v)| (src.mono(e), v.clone())).collect();
        inline_outputs(&ac, &mut b)
    }

    /// Rescaled cumulants `C_e = ρ c_e` (unscaled `c_000 = log ρ`).
    pub fn cumulants(&self, st: &Stencil, exps: &[Exponent]) -> Result<Vec<Expr>, EquilibriumError> {
        if self.deviation_only {
            return Err(EquilibriumError::CumulantOfDelta);
        }
        let central = self.central_moments(st, exps);
        let names = CumulantNames {
            central: MomentNames::new("__eqk", self.dim),
            cumulant: MomentNames::new("__eqc", self.dim),
            density: Symbol::new("__eqd"),
            density_inv: Symbol::new("__eqdi"),
        };
        let ac = cumulant_from_central(self.dim, exps, &self.u(), &names);
        let mut b: HashMap<Symbol, Expr> =
            exps.iter().zip(&central).map(|(e, v)| (names.central.mono(e), v.clone())).collect();
        // κ_000 = ρ exactly, which lets log and reciprocal collapse
        b.insert(names.central.mono(&[0, 0, 0]), self.rho());
        Ok(inline_outputs(&ac, &mut b))
    }

    /// Discrete equilibrium populations `f^eq = M⁻¹ m^eq` (or the given ones).
    pub fn populations(&self, st: &Stencil, exps: &[Exponent]) -> Result<Vec<Expr>, EquilibriumError> {
        match &self.form {
            EquilibriumForm::Discrete(f) => Ok(f.clone()),
            EquilibriumForm::Continuous { .. } => {
                let inv = monomial_inverse(st, exps)?;
                let m = self.raw_moments(st, exps);
                Ok((0..st.q())
                    .map(|i| {
                        expand(&Expr::add(
                            inv.row(i).iter().zip(&m).filter(|(c, _)| !c.is_zero()).map(|(c, v)| v.scale(c)),
                        ))
                    })
                    .collect())
            }
        }
    }

    /// Rest state `ρ = ρ⁰, u = 0` in population space.
    pub fn background(&self, st: &Stencil, exps: &[Exponent]) -> Result<BackgroundDistribution, EquilibriumError> {
        let mut b: HashMap<Symbol, Expr> = HashMap::new();
        b.insert(self.symbols.density.clone(), Expr::num(self.background_density.clone()));
        for s in &self.symbols.velocity {
            b.insert(s.clone(), Expr::zero());
        }
        let absolute = self.clone().absolute();
        let pops = absolute.populations(st, exps)?;
        let populations = pops
            .iter()
            .map(|p| {
                let v = expand(&substitute(p, &b));
                v.as_num().cloned().ok_or_else(|| EquilibriumError::SymbolicBackground(v.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BackgroundDistribution { populations, density: self.background_density.clone() })
    }

    /// Equilibrium quantities to relax against, in monomial form for the
    /// moment spaces and per population for population space. Deviation-only
    /// equilibria subtract the background representation in the same space
    /// and are rewritten in terms of `δρ`.
    pub fn quantities(
        &self,
        st: &Stencil,
        space: SpaceKind,
        exps: &[Exponent],
    ) -> Result<Vec<Expr>, EquilibriumError> {
        if !self.deviation_only {
            return match space {
                SpaceKind::Population => self.populations(st, exps),
                SpaceKind::RawMoment => Ok(self.raw_moments(st, exps)),
                SpaceKind::CentralMoment => Ok(self.central_moments(st, exps)),
                SpaceKind::Cumulant => self.cumulants(st, exps),
            };
        }
        delta_equilibrium_quantities(self, st, space, exps)
    }
}

fn inline_outputs(ac: &AssignmentCollection, b: &mut HashMap<Symbol, Expr>) -> Vec<Expr> {
    for a in &ac.subexpressions {
        let v = expand(&substitute(&a.rhs, b));
        b.insert(a.lhs.clone(), v);
    }
    ac.main_assignments.iter().map(|a| expand(&substitute(&a.rhs, b))).collect()
}

fn monomial_inverse(st: &Stencil, exps: &[Exponent]) -> Result<RatMatrix, EquilibriumError> {
    let rows: Vec<Vec<Rational>> =
        exps.iter().map(|e| (0..st.q()).map(|i| int(st.monomial_at(i, e))).collect()).collect();
    let m = RatMatrix::from_rows(rows);
    if m.rows() != m.cols() {
        return Err(EquilibriumError::Singular);
    }
    m.inverse().map_err(|_| EquilibriumError::Singular)
}

/// `E[X^n]` for `X ~ N(u, cs2)`: `Σ_k C(n,2k) u^(n-2k) cs2^k (2k-1)!!`.
fn gaussian_moment(n: u32, u: &Expr, cs2: &Expr) -> Expr {
    let mut terms = Vec::new();
    let mut binom: i64 = 1; // C(n, j)
    let mut double_fact: i64 = 1; // (j-1)!! for even j
    for j in 0..=n {
        if j > 0 {
            binom = binom * i64::from(n - j + 1) / i64::from(j);
        }
        if j % 2 == 0 {
            if j > 0 {
                double_fact *= i64::from(j - 1);
            }
            terms.push(Expr::mul([
                Expr::integer(binom * double_fact),
                u.pow(i64::from(n - j)),
                cs2.pow(i64::from(j / 2)),
            ]));
        }
    }
    Expr::add(terms)
}

/// Raw moment of the absolute Maxwellian (with its truncation).
pub fn maxwellian_raw_moment(eq: &Equilibrium, st: &Stencil, e: &Exponent) -> Expr {
    eq.raw_moment(st, e)
}

pub fn equilibrium_central_moments(eq: &Equilibrium, st: &Stencil, exps: &[Exponent]) -> Vec<Expr> {
    eq.central_moments(st, exps)
}

pub fn equilibrium_cumulants(eq: &Equilibrium, st: &Stencil, exps: &[Exponent]) -> Result<Vec<Expr>, EquilibriumError> {
    eq.cumulants(st, exps)
}

pub fn background_distribution(
    eq: &Equilibrium,
    st: &Stencil,
    exps: &[Exponent],
) -> Result<BackgroundDistribution, EquilibriumError> {
    eq.background(st, exps)
}

/// `δq^eq = q^eq − q⁰` in the requested space, with `ρ = ρ⁰ + δρ`
/// substituted so the background cancels symbolically. In central-moment
/// space the background is taken in the same co-moving frame, `K(u) f⁰`.
pub fn delta_equilibrium_quantities(
    eq: &Equilibrium,
    st: &Stencil,
    space: SpaceKind,
    exps: &[Exponent],
) -> Result<Vec<Expr>, EquilibriumError> {
    let abs = eq.clone().absolute();
    let f0 = abs.background(st, exps)?;
    let full = match space {
        SpaceKind::Cumulant => return Err(EquilibriumError::DeltaInCumulantSpace),
        SpaceKind::Population => abs.populations(st, exps)?,
        SpaceKind::RawMoment => abs.raw_moments(st, exps),
        SpaceKind::CentralMoment => abs.central_moments(st, exps),
    };
    let u = abs.u();
    let background: Vec<Expr> = match space {
        SpaceKind::Population => f0.populations.iter().cloned().map(Expr::num).collect(),
        _ => exps
            .iter()
            .map(|e| {
                let shift = |i: usize| -> Expr {
                    let xi = st.velocities[i];
                    Expr::mul((0..eq.dim).map(|a| {
                        let d = match space {
                            SpaceKind::CentralMoment => Expr::integer(xi[a].into()) - u[a].clone(),
                            _ => Expr::integer(xi[a].into()),
                        };
                        d.pow(i64::from(e[a]))
                    }))
                };
                expand(&Expr::add(
                    (0..st.q())
                        .filter(|&i| !f0.populations[i].is_zero())
                        .map(|i| shift(i).scale(&f0.populations[i])),
                ))
            })
            .collect(),
    };
    let mut b = HashMap::new();
    b.insert(
        eq.symbols.density.clone(),
        Expr::num(eq.background_density.clone()) + Expr::from_symbol(&eq.symbols.delta_density),
    );
    Ok(full
        .iter()
        .zip(&background)
        .map(|(q, q0)| expand(&(substitute(q, &b) - q0.clone())))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShallowWaterVariant {
    /// Coefficient `−u·u/3` in the moving directions, as commonly printed.
    Printed,
    /// Coefficient `−u·u/6`, which conserves mass exactly.
    MassConserving,
}

/// Zhou's discrete shallow-water equilibrium on D2Q9 with gravity `g`,
/// height `h` and `λ_i = 1` (axis) or `1/4` (diagonal). Validated against
/// the zeroth and first moments; the printed variant fails the zeroth.
pub fn shallow_water_equilibrium(
    st: &Stencil,
    g: &Expr,
    variant: ShallowWaterVariant,
) -> Result<Equilibrium, EquilibriumError> {
    let eq = shallow_water_unchecked(st, g, variant)?;
    let EquilibriumForm::Discrete(f) = &eq.form else { unreachable!() };
    let h = Expr::sym("h");
    let u = eq.symbols.velocity_exprs(2);
    let mass = expand(&(Expr::add(f.iter().cloned()) - h.clone()));
    if !mass.is_zero() {
        return Err(EquilibriumError::Validation { moment: "zeroth".into(), residual: mass });
    }
    for a in 0..2 {
        let mom = Expr::add((0..9).map(|i| f[i].scale(&int(st.velocities[i][a].into()))));
        let r = expand(&(mom - h.clone() * u[a].clone()));
        if !r.is_zero() {
            return Err(EquilibriumError::Validation { moment: "first".into(), residual: r });
        }
    }
    Ok(eq)
}

/// As [`shallow_water_equilibrium`] without validation.
pub fn shallow_water_unchecked(
    st: &Stencil,
    g: &Expr,
    variant: ShallowWaterVariant,
) -> Result<Equilibrium, EquilibriumError> {
    if st.name != StencilName::D2Q9 {
        return Err(EquilibriumError::NotD2Q9);
    }
    let symbols = Macroscopic::shallow_water();
    let h = Expr::from_symbol(&symbols.density);
    let u = symbols.velocity_exprs(2);
    let uu = u[0].pow(2) + u[1].pow(2);
    let gh = g.clone() * h.clone();
    let uu_coeff = match variant {
        ShallowWaterVariant::Printed => rat(1, 3),
        ShallowWaterVariant::MassConserving => rat(1, 6),
    };
    let f = (0..9)
        .map(|i| {
            let xi = st.velocities[i];
            if i == 0 {
                return expand(&(h.clone() * (Expr::one() - gh.scale(&rat(5, 6)) - uu.scale(&rat(2, 3)))));
            }
            let lambda = if xi[0].abs() + xi[1].abs() == 1 { int(1) } else { rat(1, 4) };
            let xu = Expr::integer(xi[0].into()) * u[0].clone() + Expr::integer(xi[1].into()) * u[1].clone();
            let inner = gh.scale(&rat(1, 6)) + xu.scale(&rat(1, 3)) + xu.pow(2).scale(&rat(1, 2)) - uu.scale(&uu_coeff);
            expand(&(h.clone() * inner).scale(&lambda))
        })
        .collect();
    Ok(Equilibrium {
        form: EquilibriumForm::Discrete(f),
        symbols,
        dim: 2,
        deviation_only: false,
        background_density: int(1),
    })
}

/// Continuous Maxwellian for shallow water: `c_s² = g h / 2`, density `h`.
pub fn shallow_water_maxwellian(g: &Expr) -> Equilibrium {
    let symbols = Macroscopic::shallow_water();
    let cs2 = (g.clone() * Expr::from_symbol(&symbols.density)).scale(&rat(1, 2));
    Equilibrium {
        form: EquilibriumForm::Continuous { cs2, truncation: Some(2) },
        symbols,
        dim: 2,
        deviation_only: false,
        background_density: int(1),
    }
}

/// Second-order discrete equilibrium at `(rho, u)` with `c_s² = 1/3`,
/// evaluated in double precision.
pub fn numeric_equilibrium(st: &Stencil, rho: f64, u: [f64; 3]) -> Vec<f64> {
    let uu: f64 = u.iter().map(|x| x * x).sum();
    (0..st.q())
        .map(|i| {
            let xi = st.velocities[i];
            let xu: f64 = (0..3).map(|a| f64::from(xi[a]) * u[a]).sum();
            crate::symexpr::rational_to_f64(&st.weights[i]) * rho * (1.0 + 3.0 * xu + 4.5 * xu * xu - 1.5 * uu)
        })
        .collect()
}

/// Random near-equilibrium state: `ρ ∈ [0.9, 1.1]`, `|u_a| ≤ 0.1/√3`, plus
/// a relative perturbation of each population of at most `noise`.
pub fn random_state<R: rand::Rng>(st: &Stencil, noise: f64, rng: &mut R) -> Vec<f64> {
    let rho = rng.gen_range(0.9..1.1);
    let bound = 0.1 / 3f64.sqrt();
    let mut u = [0.0; 3];
    for ua in u.iter_mut().take(st.dim) {
        *ua = rng.gen_range(-bound..bound);
    }
    numeric_equilibrium(st, rho, u)
        .into_iter()
        .map(|v| v * (1.0 + noise * rng.gen_range(-1.0..1.0)))
        .collect()
}
