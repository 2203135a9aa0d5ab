//! Greedy coloring of sparsity patterns and compressed-evaluation plans.
//!
//! Column colorings obey structural orthogonality: no two same-colored
//! columns share a nonzero row, so one pushforward along the summed basis
//! vectors of a color group evaluates all of its columns at once. Symmetric
//! (Hessian) colorings use a distance-2 rule on the adjacency graph, which
//! is a valid star coloring: every nonzero is directly recoverable from the
//! compressed product. The greedy vertex order is the natural index order,
//! which makes every coloring deterministic.

use super::pattern::SparsityPattern;

/// Which side(s) of the matrix get colored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partition {
    /// Color columns; one pushforward per color.
    Column,
    /// Color rows; one pullback per color.
    Row,
    /// Star coloring of a symmetric pattern; one HVP per color.
    Symmetric,
    /// Low-degree columns forward-colored, remaining rows reverse-colored.
    Bidirectional,
}

/// Where a recovered entry comes from in the compressed products.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoverySource {
    /// `forward_product[row, color]`
    Forward { color: usize },
    /// `reverse_product[color, col]`
    Reverse { color: usize },
}

/// One nonzero of the pattern and where its value is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecoveryEntry {
    pub row: usize,
    pub col: usize,
    pub source: RecoverySource,
}

/// A color assignment with its seed matrix and recovery map.
#[derive(Debug, Clone, PartialEq)]
pub struct Coloring {
    partition: Partition,
    col_colors: Vec<Option<usize>>,
    row_colors: Vec<Option<usize>>,
    n_col_colors: usize,
    n_row_colors: usize,
    /// One input-length seed vector per column color: the sum of the basis
    /// vectors of that color's columns.
    fwd_seeds: Vec<Vec<f64>>,
    /// One output-length seed vector per row color.
    rev_seeds: Vec<Vec<f64>>,
    recovery: Vec<RecoveryEntry>,
}

impl Coloring {
    pub fn partition(&self) -> Partition {
        self.partition
    }

    /// Total derivative passes needed per evaluation.
    pub fn n_colors(&self) -> usize {
        self.n_col_colors + self.n_row_colors
    }

    pub fn n_forward_colors(&self) -> usize {
        self.n_col_colors
    }

    pub fn n_reverse_colors(&self) -> usize {
        self.n_row_colors
    }

    pub fn column_colors(&self) -> &[Option<usize>] {
        &self.col_colors
    }

    pub fn row_colors(&self) -> &[Option<usize>] {
        &self.row_colors
    }

    pub fn forward_seeds(&self) -> &[Vec<f64>] {
        &self.fwd_seeds
    }

    pub fn reverse_seeds(&self) -> &[Vec<f64>] {
        &self.rev_seeds
    }

    pub fn recovery(&self) -> &[RecoveryEntry] {
        &self.recovery
    }

    /// Plain-text export: one `index color` line per colored column (or row
    /// for a row partition), in index order.
    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let side = match self.partition {
            Partition::Row => &self.row_colors,
            _ => &self.col_colors,
        };
        let mut out = String::new();
        for (i, c) in side.iter().enumerate() {
            if let Some(c) = c {
                let _ = writeln!(out, "{i} {c}");
            }
        }
        out
    }
}

/// Smallest color not marked in `forbidden` (entries equal to `stamp`).
fn first_free(forbidden: &[usize], stamp: usize) -> usize {
    forbidden
        .iter()
        .position(|&s| s != stamp)
        .unwrap_or(forbidden.len())
}

/// Greedy distance-2 coloring of the columns against shared rows.
/// `active` masks which columns participate (used by the bidirectional
/// split); inactive columns stay uncolored and claim no rows.
fn color_columns(pattern: &SparsityPattern, active: &[bool]) -> (Vec<Option<usize>>, usize) {
    let ncols = pattern.ncols();
    let mut colors: Vec<Option<usize>> = vec![None; ncols];
    let mut row_members: Vec<Vec<usize>> = vec![Vec::new(); pattern.nrows()];
    // forbidden[c] == current column marks color c as taken
    let mut forbidden = vec![usize::MAX; ncols + 1];
    let mut n_colors = 0;
    for j in 0..ncols {
        // empty columns need no pass at all
        if !active[j] || pattern.col(j).is_empty() {
            continue;
        }
        for &r in pattern.col(j) {
            for &k in &row_members[r] {
                forbidden[colors[k].unwrap()] = j;
            }
        }
        let c = first_free(&forbidden[..n_colors], j);
        colors[j] = Some(c);
        n_colors = n_colors.max(c + 1);
        for &r in pattern.col(j) {
            row_members[r].push(j);
        }
    }
    (colors, n_colors)
}

/// Greedy row coloring for the bidirectional reverse half: two rows conflict
/// when they share a nonzero in any column *not* covered by the forward set.
fn color_rows(
    pattern: &SparsityPattern,
    rows: &[Vec<usize>],
    fwd_col: &[bool],
    need_color: &[bool],
) -> (Vec<Option<usize>>, usize) {
    let nrows = pattern.nrows();
    let mut colors: Vec<Option<usize>> = vec![None; nrows];
    let mut col_members: Vec<Vec<usize>> = vec![Vec::new(); pattern.ncols()];
    let mut forbidden = vec![usize::MAX; nrows + 1];
    let mut n_colors = 0;
    for r in 0..nrows {
        if !need_color[r] || rows[r].iter().all(|&c| fwd_col[c]) {
            continue;
        }
        for &c in &rows[r] {
            if fwd_col[c] {
                continue;
            }
            for &k in &col_members[c] {
                forbidden[colors[k].unwrap()] = r;
            }
        }
        let color = first_free(&forbidden[..n_colors], r);
        colors[r] = Some(color);
        n_colors = n_colors.max(color + 1);
        for &c in &rows[r] {
            if !fwd_col[c] {
                col_members[c].push(r);
            }
        }
    }
    (colors, n_colors)
}

/// Greedy distance-2 coloring of the adjacency graph of a symmetric pattern.
/// Distance-2 is strictly stronger than star coloring, so direct recovery of
/// every entry from the compressed product is guaranteed.
fn color_symmetric(pattern: &SparsityPattern) -> (Vec<Option<usize>>, usize) {
    let n = pattern.ncols();
    let mut colors: Vec<Option<usize>> = vec![None; n];
    let mut forbidden = vec![usize::MAX; n + 1];
    let mut n_colors = 0;
    for v in 0..n {
        if pattern.col(v).is_empty() {
            continue;
        }
        for &w in pattern.col(v) {
            if w == v {
                continue;
            }
            if let Some(c) = colors[w] {
                forbidden[c] = v;
            }
            for &u in pattern.col(w) {
                if u == v {
                    continue;
                }
                if let Some(c) = colors[u] {
                    forbidden[c] = v;
                }
            }
        }
        let c = first_free(&forbidden[..n_colors], v);
        colors[v] = Some(c);
        n_colors = n_colors.max(c + 1);
    }
    (colors, n_colors)
}

fn build_fwd_seeds(
    input_len: usize,
    col_colors: &[Option<usize>],
    n_colors: usize,
) -> Vec<Vec<f64>> {
    let mut seeds = vec![vec![0.0; input_len]; n_colors];
    for (j, c) in col_colors.iter().enumerate() {
        if let Some(c) = c {
            seeds[*c][j] = 1.0;
        }
    }
    seeds
}

fn build_rev_seeds(
    output_len: usize,
    row_colors: &[Option<usize>],
    n_colors: usize,
) -> Vec<Vec<f64>> {
    let mut seeds = vec![vec![0.0; output_len]; n_colors];
    for (r, c) in row_colors.iter().enumerate() {
        if let Some(c) = c {
            seeds[*c][r] = 1.0;
        }
    }
    seeds
}

/// Deterministic greedy coloring of `pattern` for the requested partition.
pub fn greedy_color(pattern: &SparsityPattern, partition: Partition) -> Coloring {
    match partition {
        Partition::Column => {
            let active = vec![true; pattern.ncols()];
            let (col_colors, n) = color_columns(pattern, &active);
            let recovery = pattern
                .iter()
                .map(|(row, col)| RecoveryEntry {
                    row,
                    col,
                    source: RecoverySource::Forward {
                        color: col_colors[col].unwrap(),
                    },
                })
                .collect();
            Coloring {
                partition,
                fwd_seeds: build_fwd_seeds(pattern.ncols(), &col_colors, n),
                col_colors,
                row_colors: vec![None; pattern.nrows()],
                n_col_colors: n,
                n_row_colors: 0,
                rev_seeds: Vec::new(),
                recovery,
            }
        }
        Partition::Row => {
            let rows = pattern.rows();
            let fwd_col = vec![false; pattern.ncols()];
            let need = vec![true; pattern.nrows()];
            let (row_colors, n) = color_rows(pattern, &rows, &fwd_col, &need);
            let recovery = pattern
                .iter()
                .map(|(row, col)| RecoveryEntry {
                    row,
                    col,
                    source: RecoverySource::Reverse {
                        color: row_colors[row].unwrap(),
                    },
                })
                .collect();
            Coloring {
                partition,
                col_colors: vec![None; pattern.ncols()],
                rev_seeds: build_rev_seeds(pattern.nrows(), &row_colors, n),
                row_colors,
                n_col_colors: 0,
                n_row_colors: n,
                fwd_seeds: Vec::new(),
                recovery,
            }
        }
        Partition::Symmetric => {
            assert!(
                pattern.is_structurally_symmetric(),
                "symmetric coloring needs a structurally symmetric pattern"
            );
            let (col_colors, n) = color_symmetric(pattern);
            // recover (i, j) from column j's color at row i; with the
            // distance-2 rule this is always uncontaminated
            let recovery = pattern
                .iter()
                .map(|(row, col)| RecoveryEntry {
                    row,
                    col,
                    source: RecoverySource::Forward {
                        color: col_colors[col].unwrap(),
                    },
                })
                .collect();
            Coloring {
                partition,
                fwd_seeds: build_fwd_seeds(pattern.ncols(), &col_colors, n),
                col_colors,
                row_colors: vec![None; pattern.nrows()],
                n_col_colors: n,
                n_row_colors: 0,
                rev_seeds: Vec::new(),
                recovery,
            }
        }
        Partition::Bidirectional => {
            // columns at or below the median degree go forward
            let degrees: Vec<usize> = (0..pattern.ncols()).map(|j| pattern.col(j).len()).collect();
            let mut sorted = degrees.clone();
            sorted.sort_unstable();
            let median = sorted[(sorted.len().saturating_sub(1)) / 2];
            let fwd_col: Vec<bool> = degrees.iter().map(|&d| d <= median).collect();

            let (col_colors, n_fwd) = color_columns(pattern, &fwd_col);
            let rows = pattern.rows();
            // rows holding a nonzero in any reverse column need a color
            let need: Vec<bool> = rows
                .iter()
                .map(|cols| cols.iter().any(|&c| !fwd_col[c]))
                .collect();
            let (row_colors, n_rev) = color_rows(pattern, &rows, &fwd_col, &need);

            let recovery = pattern
                .iter()
                .map(|(row, col)| RecoveryEntry {
                    row,
                    col,
                    source: if fwd_col[col] {
                        RecoverySource::Forward {
                            color: col_colors[col].unwrap(),
                        }
                    } else {
                        RecoverySource::Reverse {
                            color: row_colors[row].unwrap(),
                        }
                    },
                })
                .collect();
            Coloring {
                partition,
                fwd_seeds: build_fwd_seeds(pattern.ncols(), &col_colors, n_fwd),
                rev_seeds: build_rev_seeds(pattern.nrows(), &row_colors, n_rev),
                col_colors,
                row_colors,
                n_col_colors: n_fwd,
                n_row_colors: n_rev,
                recovery,
            }
        }
    }
}
