//! Compressed-column sparse matrix with sorted row indices.

use super::pattern::SparsityPattern;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Zero-valued matrix with the structure of `pattern`.
    pub fn from_pattern(pattern: &SparsityPattern) -> Self {
        let mut col_ptr = Vec::with_capacity(pattern.ncols() + 1);
        let mut row_idx = Vec::with_capacity(pattern.nnz());
        col_ptr.push(0);
        for c in 0..pattern.ncols() {
            row_idx.extend_from_slice(pattern.col(c));
            col_ptr.push(row_idx.len());
        }
        let values = vec![0.0; row_idx.len()];
        SparseMatrix {
            nrows: pattern.nrows(),
            ncols: pattern.ncols(),
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Position of `(row, col)` in the value array, if structurally present.
    pub fn value_index(&self, row: usize, col: usize) -> Option<usize> {
        let range = self.col_ptr[col]..self.col_ptr[col + 1];
        self.row_idx[range.clone()]
            .binary_search(&row)
            .ok()
            .map(|k| range.start + k)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.value_index(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Structural nonzeros in column-major order with their values.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1])
                .map(move |k| (self.row_idx[k], c, self.values[k]))
        })
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m.set(r, c, v);
        }
        m
    }

    /// Same structure check (ignoring values).
    pub fn same_structure(&self, other: &SparseMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.col_ptr == other.col_ptr
            && self.row_idx == other.row_idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_and_lookup() {
        let p = SparsityPattern::from_pairs(3, 3, vec![(0, 0), (2, 0), (1, 1), (0, 2)]);
        let mut m = SparseMatrix::from_pattern(&p);
        assert_eq!(m.nnz(), 4);
        let k = m.value_index(2, 0).unwrap();
        m.values_mut()[k] = 7.0;
        assert_eq!(m.get(2, 0), 7.0);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.value_index(1, 0), None);

        let dense = m.to_dense();
        assert_eq!(dense.get(2, 0), 7.0);
        assert_eq!(dense.get(0, 0), 0.0);
    }
}
