use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::SymError;

/// Exact rational number used for every constant in the symbolic stage.
pub type Rational = BigRational;

/// Builds the rational `num/den`.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Integer rational.
pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Nearest double to an exact rational.
pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// A named scalar symbol.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: impl AsRef<str>) -> Self {
        Symbol(Arc::from(name.as_ref()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The node kinds of an expression tree.
#[derive(Clone, PartialEq, Eq)]
pub enum Node {
    Num(Rational),
    Sym(Symbol),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    /// Integer power; the exponent is never 0 or 1 in canonical form.
    Pow(Expr, i64),
    Log(Expr),
    Exp(Expr),
}

impl Node {
    fn rank(&self) -> u8 {
        match self {
            Node::Num(_) => 0,
            Node::Sym(_) => 1,
            Node::Pow(..) => 2,
            Node::Mul(_) => 3,
            Node::Add(_) => 4,
            Node::Log(_) => 5,
            Node::Exp(_) => 6,
        }
    }
}

struct Inner {
    node: Node,
    hash: u64,
}

/// Immutable, reference-counted expression tree with a cached structural hash.
///
/// Every constructor except [`Expr::raw`] returns the canonical form: sums and
/// products are flattened, children sorted, like terms and equal bases
/// collected, and constant subtrees folded exactly.
#[derive(Clone)]
pub struct Expr(Arc<Inner>);

impl Expr {
    /// Wraps a node without normalizing it.
    pub fn raw(node: Node) -> Expr {
        let mut h = DefaultHasher::new();
        node.rank().hash(&mut h);
        match &node {
            Node::Num(r) => r.hash(&mut h),
            Node::Sym(s) => s.hash(&mut h),
            Node::Add(c) | Node::Mul(c) => {
                c.len().hash(&mut h);
                for e in c {
                    e.0.hash.hash(&mut h);
                }
            }
            Node::Pow(b, n) => {
                b.0.hash.hash(&mut h);
                n.hash(&mut h);
            }
            Node::Log(a) | Node::Exp(a) => a.0.hash.hash(&mut h),
        }
        let hash = h.finish();
        Expr(Arc::new(Inner { node, hash }))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn num(r: Rational) -> Expr {
        Expr::raw(Node::Num(r))
    }

    pub fn integer(n: i64) -> Expr {
        Expr::num(int(n))
    }

    pub fn rational(num: i64, den: i64) -> Expr {
        Expr::num(rat(num, den))
    }

    pub fn zero() -> Expr {
        Expr::integer(0)
    }

    pub fn one() -> Expr {
        Expr::integer(1)
    }

    pub fn sym(name: impl AsRef<str>) -> Expr {
        Expr::raw(Node::Sym(Symbol::new(name)))
    }

    pub fn from_symbol(s: &Symbol) -> Expr {
        Expr::raw(Node::Sym(s.clone()))
    }

    pub fn as_num(&self) -> Option<&Rational> {
        match self.node() {
            Node::Num(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&Symbol> {
        match self.node() {
            Node::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_num().is_some_and(|r| r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.as_num().is_some_and(|r| r.is_one())
    }

    pub fn is_atom(&self) -> bool {
        matches!(self.node(), Node::Num(_) | Node::Sym(_))
    }

    /// Children in stored order.
    pub fn children(&self) -> &[Expr] {
        match self.node() {
            Node::Add(c) | Node::Mul(c) => c,
            Node::Pow(b, _) | Node::Log(b) | Node::Exp(b) => std::slice::from_ref(b),
            _ => &[],
        }
    }

    /// Canonical sum.
    pub fn add(terms: impl IntoIterator<Item = Expr>) -> Expr {
        canonical_add(terms.into_iter().collect())
    }

    /// Canonical product.
    pub fn mul(factors: impl IntoIterator<Item = Expr>) -> Expr {
        canonical_mul(factors.into_iter().collect())
    }

    /// Canonical integer power. Panics on a literal zero raised to a negative
    /// power; use [`Expr::try_pow`] to get an error instead.
    pub fn pow(&self, n: i64) -> Expr {
        self.try_pow(n).expect("division by literal zero")
    }

    pub fn try_pow(&self, n: i64) -> Result<Expr, SymError> {
        canonical_pow(self.clone(), n)
    }

    pub fn recip(&self) -> Expr {
        self.pow(-1)
    }

    pub fn log(&self) -> Expr {
        match self.node() {
            Node::Exp(a) => a.clone(),
            Node::Num(r) if r.is_one() => Expr::zero(),
            _ => Expr::raw(Node::Log(self.clone())),
        }
    }

    pub fn exp(&self) -> Expr {
        match self.node() {
            Node::Log(a) => a.clone(),
            Node::Num(r) if r.is_zero() => Expr::one(),
            _ => Expr::raw(Node::Exp(self.clone())),
        }
    }

    pub fn scale(&self, c: &Rational) -> Expr {
        Expr::mul([Expr::num(c.clone()), self.clone()])
    }

    /// Splits a canonical term into its numeric coefficient and the remaining
    /// factor (`None` for a pure constant).
    pub fn split_coeff(&self) -> (Rational, Option<Expr>) {
        match self.node() {
            Node::Num(r) => (r.clone(), None),
            Node::Mul(fs) => match fs[0].node() {
                Node::Num(c) => {
                    let rest = if fs.len() == 2 {
                        fs[1].clone()
                    } else {
                        Expr::raw(Node::Mul(fs[1..].to_vec()))
                    };
                    (c.clone(), Some(rest))
                }
                _ => (Rational::one(), Some(self.clone())),
            },
            _ => (Rational::one(), Some(self.clone())),
        }
    }

    /// Number of nodes in the tree, shared subtrees counted once per use.
    pub fn tree_size(&self) -> usize {
        1 + self.children().iter().map(|c| c.tree_size()).sum::<usize>()
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.ptr_eq(other) || (self.0.hash == other.0.hash && self.0.node == other.0.node)
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.hash.hash(state);
    }
}

impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.ptr_eq(other) {
            return Ordering::Equal;
        }
        let (a, b) = (self.node(), other.node());
        match a.rank().cmp(&b.rank()) {
            Ordering::Equal => {}
            o => return o,
        }
        match (a, b) {
            (Node::Num(x), Node::Num(y)) => x.cmp(y),
            (Node::Sym(x), Node::Sym(y)) => cmp_names(x.name(), y.name()),
            (Node::Pow(x, n), Node::Pow(y, m)) => x.cmp(y).then(n.cmp(m)),
            (Node::Add(x), Node::Add(y)) | (Node::Mul(x), Node::Mul(y)) => {
                for (p, q) in x.iter().zip(y) {
                    match p.cmp(q) {
                        Ordering::Equal => {}
                        o => return o,
                    }
                }
                x.len().cmp(&y.len())
            }
            (Node::Log(x), Node::Log(y)) | (Node::Exp(x), Node::Exp(y)) => x.cmp(y),
            _ => unreachable!("ranks already compared"),
        }
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Name order that sorts embedded digit runs numerically (`f_2 < f_10`).
fn cmp_names(a: &str, b: &str) -> Ordering {
    let (ab, bb) = (a.as_bytes(), b.as_bytes());
    let (mut i, mut j) = (0, 0);
    while i < ab.len() && j < bb.len() {
        if ab[i].is_ascii_digit() && bb[j].is_ascii_digit() {
            let si = i;
            while i < ab.len() && ab[i].is_ascii_digit() {
                i += 1;
            }
            let sj = j;
            while j < bb.len() && bb[j].is_ascii_digit() {
                j += 1;
            }
            let (na, nb) = (&a[si..i], &b[sj..j]);
            let o = na
                .trim_start_matches('0')
                .len()
                .cmp(&nb.trim_start_matches('0').len())
                .then_with(|| na.trim_start_matches('0').cmp(nb.trim_start_matches('0')))
                .then_with(|| na.len().cmp(&nb.len()));
            if o != Ordering::Equal {
                return o;
            }
        } else {
            match ab[i].cmp(&bb[j]) {
                Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
                o => return o,
            }
        }
    }
    (ab.len() - i).cmp(&(bb.len() - j))
}

fn canonical_add(terms: Vec<Expr>) -> Expr {
    let mut flat = Vec::with_capacity(terms.len());
    for t in terms {
        match t.node() {
            Node::Add(c) => flat.extend(c.iter().cloned()),
            _ => flat.push(t),
        }
    }
    let mut constant = Rational::zero();
    let mut parts: Vec<(Expr, Rational)> = Vec::with_capacity(flat.len());
    for t in flat {
        let (c, rest) = t.split_coeff();
        match rest {
            None => constant += c,
            Some(r) => parts.push((r, c)),
        }
    }
    parts.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out: Vec<Expr> = Vec::with_capacity(parts.len() + 1);
    if !constant.is_zero() {
        out.push(Expr::num(constant));
    }
    let mut iter = parts.into_iter().peekable();
    while let Some((rest, mut c)) = iter.next() {
        while let Some((next, _)) = iter.peek() {
            if *next == rest {
                c += iter.next().unwrap().1;
            } else {
                break;
            }
        }
        if !c.is_zero() {
            out.push(with_coeff(c, rest));
        }
    }
    match out.len() {
        0 => Expr::zero(),
        1 => out.pop().unwrap(),
        _ => Expr::raw(Node::Add(out)),
    }
}

/// `c * rest` where `rest` is a canonical non-constant, non-sum term.
fn with_coeff(c: Rational, rest: Expr) -> Expr {
    if c.is_one() {
        return rest;
    }
    let mut fs = vec![Expr::num(c)];
    match rest.node() {
        Node::Mul(inner) => fs.extend(inner.iter().cloned()),
        _ => fs.push(rest),
    }
    Expr::raw(Node::Mul(fs))
}

fn base_exp(e: &Expr) -> (Expr, i64) {
    match e.node() {
        Node::Pow(b, n) => (b.clone(), *n),
        _ => (e.clone(), 1),
    }
}

fn canonical_mul(factors: Vec<Expr>) -> Expr {
    let mut coeff = Rational::one();
    let mut bases: Vec<(Expr, i64)> = Vec::with_capacity(factors.len());
    let mut stack = factors;
    stack.reverse();
    while let Some(f) = stack.pop() {
        match f.node() {
            Node::Num(r) => {
                if r.is_zero() {
                    return Expr::zero();
                }
                coeff *= r;
            }
            Node::Mul(c) => {
                for x in c.iter().rev() {
                    stack.push(x.clone());
                }
            }
            _ => bases.push(base_exp(&f)),
        }
    }
    bases.sort_by(|a, b| a.0.cmp(&b.0));
    let mut merged: Vec<Expr> = Vec::with_capacity(bases.len());
    let mut iter = bases.into_iter().peekable();
    let mut pending: Vec<Expr> = Vec::new();
    while let Some((base, mut n)) = iter.next() {
        while let Some((next, _)) = iter.peek() {
            if *next == base {
                n += iter.next().unwrap().1;
            } else {
                break;
            }
        }
        if n == 0 {
            continue;
        }
        if n == 1 {
            merged.push(base);
        } else {
            // Merged powers of the same base may fold further, e.g. a sum base.
            let p = canonical_pow(base, n).expect("nonzero base");
            match p.node() {
                Node::Pow(..) | Node::Sym(_) | Node::Add(_) | Node::Log(_) | Node::Exp(_) => {
                    merged.push(p)
                }
                _ => pending.push(p),
            }
        }
    }
    if !pending.is_empty() {
        let mut all = merged;
        all.push(Expr::num(coeff));
        all.extend(pending);
        return canonical_mul(all);
    }
    if merged.is_empty() {
        return Expr::num(coeff);
    }
    if merged.len() == 1 {
        let only = merged.pop().unwrap();
        if coeff.is_one() {
            return only;
        }
        if let Node::Add(terms) = only.node() {
            let terms = terms.iter().map(|t| t.scale(&coeff)).collect();
            return canonical_add(terms);
        }
        return Expr::raw(Node::Mul(vec![Expr::num(coeff), only]));
    }
    if !coeff.is_one() {
        merged.insert(0, Expr::num(coeff));
    }
    Expr::raw(Node::Mul(merged))
}

fn rational_pow(r: &Rational, n: i64) -> Result<Rational, SymError> {
    if n < 0 && r.is_zero() {
        return Err(SymError::DivisionByZero);
    }
    let mut out = Rational::one();
    let base = if n < 0 { r.recip() } else { r.clone() };
    for _ in 0..n.unsigned_abs() {
        out *= &base;
    }
    Ok(out)
}

fn canonical_pow(base: Expr, n: i64) -> Result<Expr, SymError> {
    if n == 0 {
        return Ok(Expr::one());
    }
    if n == 1 {
        return Ok(base);
    }
    match base.node() {
        Node::Num(r) => Ok(Expr::num(rational_pow(r, n)?)),
        Node::Pow(b, m) => canonical_pow(b.clone(), m * n),
        Node::Mul(fs) => {
            let mut out = Vec::with_capacity(fs.len());
            for f in fs {
                out.push(canonical_pow(f.clone(), n)?);
            }
            Ok(canonical_mul(out))
        }
        _ => Ok(Expr::raw(Node::Pow(base, n))),
    }
}

/// Rebuilds an arbitrary (possibly non-canonical) tree in canonical form.
pub fn normalize(e: &Expr) -> Result<Expr, SymError> {
    Ok(match e.node() {
        Node::Num(_) | Node::Sym(_) => e.clone(),
        Node::Add(c) => {
            let mut v = Vec::with_capacity(c.len());
            for x in c {
                v.push(normalize(x)?);
            }
            canonical_add(v)
        }
        Node::Mul(c) => {
            let mut v = Vec::with_capacity(c.len());
            for x in c {
                v.push(normalize(x)?);
            }
            canonical_mul(v)
        }
        Node::Pow(b, n) => canonical_pow(normalize(b)?, *n)?,
        Node::Log(a) => normalize(a)?.log(),
        Node::Exp(a) => normalize(a)?.exp(),
    })
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add([self, rhs])
    }
}

impl std::ops::Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        Expr::add([self.clone(), rhs.clone()])
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::add([self, -rhs])
    }
}

impl std::ops::Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        Expr::add([self.clone(), -rhs.clone()])
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul([self, rhs])
    }
}

impl std::ops::Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        Expr::mul([self.clone(), rhs.clone()])
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::mul([self, rhs.recip()])
    }
}

impl std::ops::Div for &Expr {
    type Output = Expr;
    fn div(self, rhs: &Expr) -> Expr {
        Expr::mul([self.clone(), rhs.recip()])
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale(&int(-1))
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Expr {
        Expr::integer(n)
    }
}

impl From<Rational> for Expr {
    fn from(r: Rational) -> Expr {
        Expr::num(r)
    }
}

impl From<&Symbol> for Expr {
    fn from(s: &Symbol) -> Expr {
        Expr::from_symbol(s)
    }
}

fn fmt_rational(r: &Rational, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if r.is_integer() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

fn needs_parens_in_product(e: &Expr) -> bool {
    matches!(e.node(), Node::Add(_))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Num(r) => fmt_rational(r, f),
            Node::Sym(s) => write!(f, "{s}"),
            Node::Add(terms) => {
                for (k, t) in terms.iter().enumerate() {
                    let (c, rest) = t.split_coeff();
                    if k == 0 {
                        write!(f, "{t}")?;
                    } else if c.is_negative() {
                        let pos = match rest {
                            Some(r) => with_coeff(-c, r),
                            None => Expr::num(-c),
                        };
                        write!(f, " - {pos}")?;
                    } else {
                        write!(f, " + {t}")?;
                    }
                }
                Ok(())
            }
            Node::Mul(fs) => {
                let mut start = 0;
                if let Some(c) = fs[0].as_num() {
                    if *c == int(-1) {
                        f.write_str("-")?;
                        start = 1;
                    }
                }
                let (num, den): (Vec<&Expr>, Vec<&Expr>) = fs[start..]
                    .iter()
                    .partition(|x| !matches!(x.node(), Node::Pow(_, n) if *n < 0));
                if num.is_empty() {
                    f.write_str("1")?;
                }
                for (k, x) in num.iter().enumerate() {
                    if k > 0 {
                        f.write_str("*")?;
                    }
                    if needs_parens_in_product(x) {
                        write!(f, "({x})")?;
                    } else {
                        write!(f, "{x}")?;
                    }
                }
                for x in den {
                    if let Node::Pow(b, n) = x.node() {
                        let d = b.pow(-n);
                        if d.is_atom() {
                            write!(f, "/{d}")?;
                        } else {
                            write!(f, "/({d})")?;
                        }
                    }
                }
                Ok(())
            }
            Node::Pow(b, n) => {
                if *n < 0 {
                    let d = b.pow(-n);
                    if d.is_atom() {
                        write!(f, "1/{d}")
                    } else {
                        write!(f, "1/({d})")
                    }
                } else if b.is_atom() {
                    write!(f, "{b}^{n}")
                } else {
                    write!(f, "({b})^{n}")
                }
            }
            Node::Log(a) => write!(f, "log({a})"),
            Node::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
