//! Exact rational dense matrices: just what basis construction and transform
//! inversion need.

use num_traits::{One, Zero};

use crate::symexpr::Rational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl RatMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMatrix { rows, cols, data: vec![Rational::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rational::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged matrix rows");
            data.extend(row);
        }
        RatMatrix { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[Rational] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn mul(&self, other: &RatMatrix) -> RatMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = RatMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = Rational::zero();
                for (a, b) in self.row(i).iter().zip(v) {
                    if !a.is_zero() && !b.is_zero() {
                        acc += a * b;
                    }
                }
                acc
            })
            .collect()
    }

    /// Row-echelon rank.
    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.eliminate(None).len()
    }

    /// Gauss-Jordan elimination; returns the pivot columns. When `aug` is
    /// given, the same row operations are applied to it.
    fn eliminate(&mut self, mut aug: Option<&mut RatMatrix>) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| !self[(i, c)].is_zero()) else {
                continue;
            };
            self.swap_rows(r, p);
            if let Some(a) = aug.as_deref_mut() {
                a.swap_rows(r, p);
            }
            let inv = self[(r, c)].recip();
            self.scale_row(r, &inv);
            if let Some(a) = aug.as_deref_mut() {
                a.scale_row(r, &inv);
            }
            for i in 0..self.rows {
                if i != r && !self[(i, c)].is_zero() {
                    let f = self[(i, c)].clone();
                    self.axpy_row(i, r, &f);
                    if let Some(a) = aug.as_deref_mut() {
                        a.axpy_row(i, r, &f);
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    fn scale_row(&mut self, r: usize, f: &Rational) {
        for j in 0..self.cols {
            let v = &mut self.data[r * self.cols + j];
            *v = &*v * f;
        }
    }

    /// row[i] -= f * row[r]
    fn axpy_row(&mut self, i: usize, r: usize, f: &Rational) {
        for j in 0..self.cols {
            let s = self.data[r * self.cols + j].clone();
            if !s.is_zero() {
                self.data[i * self.cols + j] -= f * s;
            }
        }
    }

    /// Exact inverse, or the indices of rows that are linearly dependent on
    /// earlier rows.
    pub fn inverse(&self) -> Result<RatMatrix, Vec<usize>> {
        assert_eq!(self.rows, self.cols, "inverse of non-square matrix");
        let mut m = self.clone();
        let mut aug = RatMatrix::identity(self.rows);
        let pivots = m.eliminate(Some(&mut aug));
        if pivots.len() == self.rows {
            Ok(aug)
        } else {
            Err(self.dependent_rows())
        }
    }

    /// Rows that do not increase the rank of the rows before them.
    pub fn dependent_rows(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut acc: Vec<Vec<Rational>> = Vec::new();
        let mut rank = 0;
        for i in 0..self.rows {
            acc.push(self.row(i).to_vec());
            let r = RatMatrix::from_rows(acc.clone()).rank();
            if r == rank {
                out.push(i);
                acc.pop();
            } else {
                rank = r;
            }
        }
        out
    }

    pub fn determinant(&self) -> Rational {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut m = self.clone();
        let mut det = Rational::one();
        for c in 0..n {
            let Some(p) = (c..n).find(|&i| !m[(i, c)].is_zero()) else {
                return Rational::zero();
            };
            if p != c {
                m.swap_rows(p, c);
                det = -det;
            }
            let piv = m[(c, c)].clone();
            det *= &piv;
            let inv = piv.recip();
            for i in c + 1..n {
                if !m[(i, c)].is_zero() {
                    let f = &m[(i, c)] * &inv;
                    m.axpy_row(i, c, &f);
                }
            }
        }
        det
    }

    pub fn transpose(&self) -> RatMatrix {
        let mut out = RatMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].clone();
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for RatMatrix {
    type Output = Rational;
    fn index(&self, (i, j): (usize, usize)) -> &Rational {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RatMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rational {
        &mut self.data[i * self.cols + j]
    }
}
