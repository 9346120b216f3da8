use crate::lattice::Exponent;
use crate::symexpr::{Expr, Symbol};

/// Naming scheme for one family of statistical quantities and their
/// staged partial sums.
///
/// With prefix `m` in 3D: monomials are `m_200`, the innermost partial sums
/// over populations `m_np_c2` (`x = -1`, `y = +1`, `z`-power 2) and the
/// middle stage `m_p_c12`. For moment-to-moment transforms the stage names
/// carry exponents instead of coordinates: `k_20_c1`, `k_2_c01`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MomentNames {
    pub prefix: String,
    pub dim: usize,
}

fn digits(e: &[u32]) -> String {
    e.iter().map(|d| char::from_digit(*d, 10).unwrap_or('?')).collect()
}

fn coord_letter(c: i32) -> char {
    match c {
        -1 => 'n',
        0 => '0',
        _ => 'p',
    }
}

impl MomentNames {
    pub fn new(prefix: impl Into<String>, dim: usize) -> Self {
        MomentNames { prefix: prefix.into(), dim }
    }

    pub fn mono(&self, e: &Exponent) -> Symbol {
        Symbol::new(format!("{}_{}", self.prefix, digits(&e[..self.dim])))
    }

    pub fn mono_expr(&self, e: &Exponent) -> Expr {
        Expr::from_symbol(&self.mono(e))
    }

    /// Stage symbol indexed by lattice coordinates (population side).
    pub fn coord_stage(&self, coords: &[i32], suffix: &[u32]) -> Symbol {
        let c: String = coords.iter().map(|&c| coord_letter(c)).collect();
        Symbol::new(format!("{}_{}_c{}", self.prefix, c, digits(suffix)))
    }

    /// Stage symbol indexed by exponents on both sides of the bar.
    pub fn exponent_stage(&self, prefix: &[u32], suffix: &[u32]) -> Symbol {
        Symbol::new(format!("{}_{}_c{}", self.prefix, digits(prefix), digits(suffix)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_distinct_and_c_safe() {
        let n = MomentNames::new("m", 3);
        assert_eq!(n.mono(&[2, 0, 1]).name(), "m_201");
        assert_eq!(n.coord_stage(&[-1, 1], &[2]).name(), "m_np_c2");
        assert_eq!(n.exponent_stage(&[2], &[0, 1]).name(), "m_2_c01");
        let n2 = MomentNames::new("k", 2);
        assert_eq!(n2.mono(&[1, 2, 0]).name(), "k_12");
    }
}
