//! Boolean structure of a Jacobian or Hessian.

use std::fmt::Write as _;

/// Sparsity pattern stored as per-column sorted row-index lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    nrows: usize,
    ncols: usize,
    cols: Vec<Vec<usize>>,
}

impl SparsityPattern {
    /// Build from (row, col) pairs; duplicates are merged.
    pub fn from_pairs(nrows: usize, ncols: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut cols = vec![Vec::new(); ncols];
        for (r, c) in pairs {
            assert!(r < nrows && c < ncols, "pattern index out of range");
            cols[c].push(r);
        }
        for col in &mut cols {
            col.sort_unstable();
            col.dedup();
        }
        SparsityPattern { nrows, ncols, cols }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    /// Sorted row indices of column `j`.
    pub fn col(&self, j: usize) -> &[usize] {
        &self.cols[j]
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.cols[col].binary_search(&row).is_ok()
    }

    /// Per-row sorted column lists (the transpose view).
    pub fn rows(&self) -> Vec<Vec<usize>> {
        let mut rows = vec![Vec::new(); self.nrows];
        for (c, col) in self.cols.iter().enumerate() {
            for &r in col {
                rows[r].push(c);
            }
        }
        rows
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        self.nrows == self.ncols
            && self
                .cols
                .iter()
                .enumerate()
                .all(|(c, rows)| rows.iter().all(|&r| self.contains(c, r)))
    }

    /// All nonzeros in column-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cols
            .iter()
            .enumerate()
            .flat_map(|(c, rows)| rows.iter().map(move |&r| (r, c)))
    }

    /// Plain-text export: first line `nrows ncols`, then one `row col` pair
    /// per nonzero, column-major.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.nrows, self.ncols);
        for (r, c) in self.iter() {
            let _ = writeln!(out, "{r} {c}");
        }
        out
    }
}
