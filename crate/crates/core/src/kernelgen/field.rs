use super::KernelError;

/// Periodic population field, structure-of-arrays: population `i` of cell `c`
/// lives at `i * cells + c`, with `c = x + nx * (y + ny * z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    dims: [usize; 3],
    dim: usize,
    q: usize,
    data: Vec<f64>,
}

impl Field {
    /// Zero-filled field; `dims` has two or three entries, each at least 4.
    pub fn new(dims: &[usize], q: usize) -> Result<Field, KernelError> {
        if !(2..=3).contains(&dims.len()) || dims.iter().any(|&n| n < 4) {
            return Err(KernelError::BadDimensions(dims.to_vec()));
        }
        let mut d = [1; 3];
        d[..dims.len()].copy_from_slice(dims);
        let cells = d.iter().product::<usize>();
        Ok(Field { dims: d, dim: dims.len(), q, data: vec![0.0; q * cells] })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims[..self.dim]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn cells(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn slab(&self, i: usize) -> &[f64] {
        let n = self.cells();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn cell_index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    pub fn coords(&self, cell: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [cell % nx, (cell / nx) % ny, cell / (nx * ny)]
    }

    /// Index of the cell at `offset` from `cell`, wrapping periodically.
    pub fn neighbor(&self, cell: usize, offset: [i32; 3]) -> usize {
        let c = self.coords(cell);
        let mut out = [0usize; 3];
        for a in 0..3 {
            let n = self.dims[a] as i64;
            out[a] = (c[a] as i64 + i64::from(offset[a])).rem_euclid(n) as usize;
        }
        self.cell_index(out[0], out[1], out[2])
    }

    pub fn get(&self, i: usize, cell: usize) -> f64 {
        self.data[i * self.cells() + cell]
    }

    pub fn set(&mut self, i: usize, cell: usize, v: f64) {
        let n = self.cells();
        self.data[i * n + cell] = v;
    }

    /// Populations of one cell.
    pub fn cell(&self, cell: usize) -> Vec<f64> {
        (0..self.q).map(|i| self.get(i, cell)).collect()
    }

    pub fn set_cell(&mut self, cell: usize, values: &[f64]) {
        for (i, v) in values.iter().enumerate() {
            self.set(i, cell, *v);
        }
    }

    pub fn compatible(&self, other: &Field) -> bool {
        self.dims == other.dims && self.q == other.q
    }

    pub fn fill_with(&mut self, mut f: impl FnMut(usize, usize) -> f64) {
        let n = self.cells();
        for i in 0..self.q {
            for c in 0..n {
                self.data[i * n + c] = f(i, c);
            }
        }
    }
}
