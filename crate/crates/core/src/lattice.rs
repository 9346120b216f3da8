//! Velocity sets, moment polynomials and collision-space bases.
//!
//! Velocity ordering (fixed; emitted kernels and golden files depend on it):
//!
//! ```text
//! index  D2Q9     D3Q19/D3Q27 (D3Q15 skips 7..=18)
//!   0    C (0,0)  C  ( 0, 0, 0)
//!   1    N (0,1)  N  ( 0, 1, 0)
//!   2    S (0,-1) S  ( 0,-1, 0)
//!   3    W (-1,0) W  (-1, 0, 0)
//!   4    E (1,0)  E  ( 1, 0, 0)
//!   5    NW       T  ( 0, 0, 1)
//!   6    NE       B  ( 0, 0,-1)
//!   7    SW       NW NE SW SE  (xy edges)
//!   8    SE       TN TS TW TE  (top edges)
//!                 BN BS BW BE  (bottom edges)
//!                 TNE TNW TSE TSW BNE BNW BSE BSW  (corners, D3Q27/D3Q15 only)
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::RatMatrix;
use crate::symexpr::{int, rat, Expr, Rational};

/// Exponent tuple `(α, β, γ)` of the monomial `x^α y^β z^γ`.
pub type Exponent = [u32; 3];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("unknown stencil `{0}` (expected D2Q9, D3Q15, D3Q19 or D3Q27)")]
    UnknownStencil(String),
    #[error("moment order of the zero polynomial is undefined")]
    ZeroPolynomial,
    #[error("basis is not linearly independent over the stencil; dependent entries {0:?}")]
    Dependent(Vec<usize>),
    #[error("basis has {got} polynomials, stencil needs {expected}")]
    WrongSize { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StencilName {
    D2Q9,
    D3Q15,
    D3Q19,
    D3Q27,
}

impl FromStr for StencilName {
    type Err = LatticeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "D2Q9" => Ok(StencilName::D2Q9),
            "D3Q15" => Ok(StencilName::D3Q15),
            "D3Q19" => Ok(StencilName::D3Q19),
            "D3Q27" => Ok(StencilName::D3Q27),
            _ => Err(LatticeError::UnknownStencil(s.to_string())),
        }
    }
}

impl fmt::Display for StencilName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StencilName::D2Q9 => "D2Q9",
            StencilName::D3Q15 => "D3Q15",
            StencilName::D3Q19 => "D3Q19",
            StencilName::D3Q27 => "D3Q27",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub name: StencilName,
    pub dim: usize,
    /// Velocities padded to three components (z = 0 in 2D).
    pub velocities: Vec<[i32; 3]>,
    pub weights: Vec<Rational>,
}

const D3_ORDER: [[i32; 3]; 27] = [
    [0, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [-1, 0, 0],
    [1, 0, 0],
    [0, 0, 1],
    [0, 0, -1],
    [-1, 1, 0],
    [1, 1, 0],
    [-1, -1, 0],
    [1, -1, 0],
    [0, 1, 1],
    [0, -1, 1],
    [-1, 0, 1],
    [1, 0, 1],
    [0, 1, -1],
    [0, -1, -1],
    [-1, 0, -1],
    [1, 0, -1],
    [1, 1, 1],
    [-1, 1, 1],
    [1, -1, 1],
    [-1, -1, 1],
    [1, 1, -1],
    [-1, 1, -1],
    [1, -1, -1],
    [-1, -1, -1],
];

fn norm1(v: &[i32; 3]) -> i32 {
    v.iter().map(|c| c.abs()).sum()
}

pub fn make_stencil(name: StencilName) -> Stencil {
    let (dim, velocities): (usize, Vec<[i32; 3]>) = match name {
        StencilName::D2Q9 => (
            2,
            vec![
                [0, 0, 0],
                [0, 1, 0],
                [0, -1, 0],
                [-1, 0, 0],
                [1, 0, 0],
                [-1, 1, 0],
                [1, 1, 0],
                [-1, -1, 0],
                [1, -1, 0],
            ],
        ),
        StencilName::D3Q15 => (3, D3_ORDER.iter().copied().filter(|v| norm1(v) != 2).collect()),
        StencilName::D3Q19 => (3, D3_ORDER.iter().copied().filter(|v| norm1(v) <= 2).collect()),
        StencilName::D3Q27 => (3, D3_ORDER.to_vec()),
    };
    let weight = |v: &[i32; 3]| -> Rational {
        let n = norm1(v);
        match (name, n) {
            (StencilName::D2Q9, 0) => rat(4, 9),
            (StencilName::D2Q9, 1) => rat(1, 9),
            (StencilName::D2Q9, _) => rat(1, 36),
            (StencilName::D3Q15, 0) => rat(2, 9),
            (StencilName::D3Q15, 1) => rat(1, 9),
            (StencilName::D3Q15, _) => rat(1, 72),
            (StencilName::D3Q19, 0) => rat(1, 3),
            (StencilName::D3Q19, 1) => rat(1, 18),
            (StencilName::D3Q19, _) => rat(1, 36),
            (StencilName::D3Q27, 0) => rat(8, 27),
            (StencilName::D3Q27, 1) => rat(2, 27),
            (StencilName::D3Q27, 2) => rat(1, 54),
            (StencilName::D3Q27, _) => rat(1, 216),
        }
    };
    let weights = velocities.iter().map(weight).collect();
    Stencil { name, dim, velocities, weights }
}

impl Stencil {
    pub fn q(&self) -> usize {
        self.velocities.len()
    }

    pub fn from_name(name: &str) -> Result<Stencil, LatticeError> {
        Ok(make_stencil(name.parse()?))
    }

    /// Index of the population moving opposite to population `i`.
    pub fn opposite_index(&self, i: usize) -> usize {
        let v = self.velocities[i];
        let neg = [-v[0], -v[1], -v[2]];
        self.index_of(neg).expect("stencils are closed under inversion")
    }

    pub fn index_of(&self, v: [i32; 3]) -> Option<usize> {
        self.velocities.iter().position(|w| *w == v)
    }

    /// Value of the monomial `x^α y^β z^γ` at velocity `i`.
    pub fn monomial_at(&self, i: usize, e: &Exponent) -> i64 {
        let v = self.velocities[i];
        (0..3).map(|a| i64::from(v[a]).pow(e[a])).product()
    }
}

/// Polynomial in `x, y, z` with exact rational coefficients.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct MomentPolynomial {
    terms: BTreeMap<Exponent, Rational>,
}

impl MomentPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(e: Exponent) -> Self {
        Self::term(Rational::one(), e)
    }

    pub fn term(c: Rational, e: Exponent) -> Self {
        let mut p = Self::zero();
        p.add_term(c, e);
        p
    }

    /// Builds `Σ c·x^α y^β z^γ` from integer coefficients.
    pub fn from_terms(terms: &[(i64, Exponent)]) -> Self {
        let mut p = Self::zero();
        for (c, e) in terms {
            p.add_term(int(*c), *e);
        }
        p
    }

    pub fn add_term(&mut self, c: Rational, e: Exponent) {
        let entry = self.terms.entry(e).or_insert_with(Rational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&e);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &Rational)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, e: &Exponent) -> Rational {
        self.terms.get(e).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = self.clone();
        for (e, c) in &other.terms {
            p.add_term(c.clone(), *e);
        }
        p
    }

    pub fn scale(&self, f: &Rational) -> Self {
        let mut p = Self::zero();
        for (e, c) in &self.terms {
            p.add_term(c * f, *e);
        }
        p
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&int(-1)))
    }

    /// Maximum total degree over the terms.
    pub fn order(&self) -> Result<u32, LatticeError> {
        self.terms
            .keys()
            .map(|e| e.iter().sum())
            .max()
            .ok_or(LatticeError::ZeroPolynomial)
    }

    /// Exact value at stencil velocity `i`.
    pub fn eval_at(&self, st: &Stencil, i: usize) -> Rational {
        let mut acc = Rational::zero();
        for (e, c) in &self.terms {
            let v = st.monomial_at(i, e);
            if v != 0 {
                acc += c * int(v);
            }
        }
        acc
    }

    /// Values over all stencil velocities.
    pub fn values(&self, st: &Stencil) -> Vec<Rational> {
        (0..st.q()).map(|i| self.eval_at(st, i)).collect()
    }

    /// Symbolic value at the shifted point `(x, y, z) = ξ - shift`.
    pub fn eval_shifted(&self, xi: [i32; 3], shift: &[Expr; 3]) -> Expr {
        let comps: Vec<Expr> = (0..3).map(|a| Expr::integer(i64::from(xi[a])) - shift[a].clone()).collect();
        Expr::add(self.terms.iter().map(|(e, c)| {
            let mut fs = vec![Expr::num(c.clone())];
            for a in 0..3 {
                if e[a] > 0 {
                    fs.push(comps[a].pow(i64::from(e[a])));
                }
            }
            Expr::mul(fs)
        }))
    }

    /// Exponents of all monomials appearing in the polynomial.
    pub fn exponents(&self) -> impl Iterator<Item = &Exponent> {
        self.terms.keys()
    }
}

pub fn fmt_monomial(e: &Exponent) -> String {
    let mut parts = Vec::new();
    for (a, name) in ["x", "y", "z"].iter().enumerate() {
        match e[a] {
            0 => {}
            1 => parts.push(name.to_string()),
            n => parts.push(format!("{name}^{n}")),
        }
    }
    if parts.is_empty() {
        "1".to_string()
    } else {
        parts.join("*")
    }
}

impl fmt::Display for MomentPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut ordered: Vec<(&Exponent, &Rational)> = self.terms.iter().collect();
        ordered.sort_by(|a, b| graded_lex_cmp(a.0, b.0));
        for (k, (e, c)) in ordered.into_iter().enumerate() {
            let mono = fmt_monomial(e);
            let mag = c.abs();
            if k == 0 {
                if c.is_negative() {
                    f.write_str("-")?;
                }
            } else if c.is_negative() {
                f.write_str(" - ")?;
            } else {
                f.write_str(" + ")?;
            }
            if mag.is_one() {
                f.write_str(&mono)?;
            } else if mono == "1" {
                write!(f, "{mag}")?;
            } else {
                write!(f, "{mag}*{mono}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for MomentPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Graded lexicographic order with `x > y > z`.
pub fn graded_lex_cmp(a: &Exponent, b: &Exponent) -> std::cmp::Ordering {
    let da: u32 = a.iter().sum();
    let db: u32 = b.iter().sum();
    da.cmp(&db).then_with(|| b.cmp(a))
}

pub fn moment_order(p: &MomentPolynomial) -> Result<u32, LatticeError> {
    p.order()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    /// Population space itself (single-relaxation-time methods).
    Population,
    RawMoment,
    CentralMoment,
    Cumulant,
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceKind::Population => "population",
            SpaceKind::RawMoment => "raw-moment",
            SpaceKind::CentralMoment => "central-moment",
            SpaceKind::Cumulant => "cumulant",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionSpaceBasis {
    pub polynomials: Vec<MomentPolynomial>,
    pub kind: SpaceKind,
}

impl CollisionSpaceBasis {
    pub fn len(&self) -> usize {
        self.polynomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polynomials.is_empty()
    }

    pub fn with_kind(&self, kind: SpaceKind) -> Self {
        CollisionSpaceBasis { polynomials: self.polynomials.clone(), kind }
    }

    /// `M[r][i] = p_r(ξ_i)`.
    pub fn moment_matrix(&self, st: &Stencil) -> RatMatrix {
        RatMatrix::from_rows(self.polynomials.iter().map(|p| p.values(st)).collect())
    }

    pub fn check_independent(&self, st: &Stencil) -> Result<(), LatticeError> {
        if self.len() != st.q() {
            return Err(LatticeError::WrongSize { expected: st.q(), got: self.len() });
        }
        let m = self.moment_matrix(st);
        if m.rank() == st.q() {
            Ok(())
        } else {
            Err(LatticeError::Dependent(m.dependent_rows()))
        }
    }
}

/// Candidate monomials with every exponent at most 2, in graded-lex order.
fn candidate_monomials(dim: usize) -> Vec<Exponent> {
    let zmax = if dim == 3 { 2 } else { 0 };
    let mut out = Vec::new();
    for a in 0..=2 {
        for b in 0..=2 {
            for c in 0..=zmax {
                out.push([a, b, c]);
            }
        }
    }
    out.sort_by(graded_lex_cmp);
    out
}

/// Greedy graded-lex selection of `q` monomials whose moment matrix over the
/// stencil is invertible.
pub fn monomial_basis(st: &Stencil) -> CollisionSpaceBasis {
    let mut chosen: Vec<Exponent> = Vec::new();
    let mut rows: Vec<Vec<Rational>> = Vec::new();
    for e in candidate_monomials(st.dim) {
        if chosen.len() == st.q() {
            break;
        }
        let row: Vec<Rational> = (0..st.q()).map(|i| int(st.monomial_at(i, &e))).collect();
        if row.iter().all(|v| v.is_zero()) {
            continue;
        }
        rows.push(row);
        if RatMatrix::from_rows(rows.clone()).rank() == rows.len() {
            chosen.push(e);
        } else {
            rows.pop();
        }
    }
    debug_assert_eq!(chosen.len(), st.q());
    CollisionSpaceBasis {
        polynomials: chosen.into_iter().map(MomentPolynomial::monomial).collect(),
        kind: SpaceKind::RawMoment,
    }
}

/// Exponent list of a monomial basis, in basis order.
pub fn monomial_exponents(st: &Stencil) -> Vec<Exponent> {
    monomial_basis(st)
        .polynomials
        .iter()
        .map(|p| *p.exponents().next().unwrap())
        .collect()
}

/// Curated polynomial basis grouping second-order moments into shear
/// (trace-free) and bulk parts, and higher orders into symmetric
/// combinations. D3Q15 has no curated basis and falls back to monomials.
pub fn default_polynomial_basis(st: &Stencil) -> CollisionSpaceBasis {
    let p = MomentPolynomial::from_terms;
    let x = [1, 0, 0];
    let y = [0, 1, 0];
    let z = [0, 0, 1];
    let polys: Vec<MomentPolynomial> = match st.name {
        StencilName::D2Q9 => vec![
            p(&[(1, [0, 0, 0])]),
            p(&[(1, x)]),
            p(&[(1, y)]),
            p(&[(1, [1, 1, 0])]),
            p(&[(1, [2, 0, 0]), (-1, [0, 2, 0])]),
            p(&[(1, [2, 0, 0]), (1, [0, 2, 0])]),
            p(&[(1, [2, 1, 0])]),
            p(&[(1, [1, 2, 0])]),
            p(&[(1, [2, 2, 0])]),
        ],
        StencilName::D3Q15 => return monomial_basis(st),
        StencilName::D3Q19 | StencilName::D3Q27 => {
            let full = st.name == StencilName::D3Q27;
            let mut v = vec![
                p(&[(1, [0, 0, 0])]),
                p(&[(1, x)]),
                p(&[(1, y)]),
                p(&[(1, z)]),
                p(&[(1, [1, 1, 0])]),
                p(&[(1, [1, 0, 1])]),
                p(&[(1, [0, 1, 1])]),
                p(&[(1, [2, 0, 0]), (-1, [0, 2, 0])]),
                p(&[(1, [2, 0, 0]), (-1, [0, 0, 2])]),
                p(&[(1, [2, 0, 0]), (1, [0, 2, 0]), (1, [0, 0, 2])]),
                p(&[(1, [1, 2, 0]), (1, [1, 0, 2])]),
                p(&[(1, [2, 1, 0]), (1, [0, 1, 2])]),
                p(&[(1, [2, 0, 1]), (1, [0, 2, 1])]),
                p(&[(1, [1, 2, 0]), (-1, [1, 0, 2])]),
                p(&[(1, [2, 1, 0]), (-1, [0, 1, 2])]),
                p(&[(1, [2, 0, 1]), (-1, [0, 2, 1])]),
            ];
            if full {
                v.push(p(&[(1, [1, 1, 1])]));
            }
            v.extend([
                p(&[(1, [2, 2, 0]), (-2, [2, 0, 2]), (1, [0, 2, 2])]),
                p(&[(1, [2, 2, 0]), (1, [2, 0, 2]), (-2, [0, 2, 2])]),
                p(&[(1, [2, 2, 0]), (1, [2, 0, 2]), (1, [0, 2, 2])]),
            ]);
            if full {
                v.extend([
                    p(&[(1, [2, 1, 1])]),
                    p(&[(1, [1, 2, 1])]),
                    p(&[(1, [1, 1, 2])]),
                    p(&[(1, [2, 2, 1])]),
                    p(&[(1, [2, 1, 2])]),
                    p(&[(1, [1, 2, 2])]),
                    p(&[(1, [2, 2, 2])]),
                ]);
            }
            v
        }
    };
    CollisionSpaceBasis { polynomials: polys, kind: SpaceKind::RawMoment }
}

/// Exact inner product `Σ_i c_i p(ξ_i) r(ξ_i)`.
pub fn inner_product(st: &Stencil, p: &MomentPolynomial, r: &MomentPolynomial, weighted: bool) -> Rational {
    let mut acc = Rational::zero();
    for i in 0..st.q() {
        let a = p.eval_at(st, i);
        if a.is_zero() {
            continue;
        }
        let b = r.eval_at(st, i);
        if b.is_zero() {
            continue;
        }
        let term = a * b;
        acc += if weighted { term * &st.weights[i] } else { term };
    }
    acc
}

/// Gram-Schmidt orthogonalization (exact) of the default polynomial basis,
/// unweighted or weighted by the lattice weights.
pub fn orthogonalize_basis(st: &Stencil, weighted: bool) -> CollisionSpaceBasis {
    let start = default_polynomial_basis(st);
    let mut out: Vec<MomentPolynomial> = Vec::with_capacity(start.len());
    let mut norms: Vec<Rational> = Vec::with_capacity(start.len());
    for p in start.polynomials {
        let mut v = p.clone();
        for (b, nb) in out.iter().zip(&norms) {
            let proj = inner_product(st, &p, b, weighted);
            if !proj.is_zero() {
                v = v.sub(&b.scale(&(proj / nb)));
            }
        }
        norms.push(inner_product(st, &v, &v, weighted));
        out.push(v);
    }
    CollisionSpaceBasis { polynomials: out, kind: SpaceKind::RawMoment }
}
