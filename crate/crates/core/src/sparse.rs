//! Sparse direct solver for the stencil matrices produced by the
//! sparsifier.
//!
//! The column ordering is a geometric nested dissection of the periodic grid
//! graph: periodic axes are first cut open by a slab of `b` layers, then
//! boxes are bisected by slabs along their longest axis, and separators are
//! eliminated after the two halves they split. The numeric factorization is
//! a left-looking sparse LU (Gilbert–Peierls) with threshold partial
//! pivoting that prefers the diagonal, so the nested-dissection fill is kept
//! when pivoting is not needed.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::spectral::{Grid, MAX_DIM};

/// Compressed sparse column matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; ncols + 1];
        for &(_, c, _) in triplets {
            counts[c + 1] += 1;
        }
        for c in 0..ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let p = next[c];
            rows[p] = r;
            vals[p] = v;
            next[c] += 1;
        }
        // sort within columns and merge duplicates
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for c in 0..ncols {
            entries.clear();
            entries.extend((counts[c]..counts[c + 1]).map(|p| (rows[p], vals[p])));
            entries.sort_unstable_by_key(|e| e.0);
            for &(r, v) in &entries {
                if row_idx.len() > col_ptr[c] && *row_idx.last().unwrap() == r {
                    *values.last_mut().unwrap() += v;
                } else {
                    row_idx.push(r);
                    values.push(v);
                }
            }
            col_ptr[c + 1] = row_idx.len();
        }
        Self {
            nrows,
            ncols,
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
        self.values.len()
    }

    /// Row indices and values of column `c`.
    pub fn column(&self, c: usize) -> (&[usize], &[f64]) {
        let range = self.col_ptr[c]..self.col_ptr[c + 1];
        (&self.row_idx[range.clone()], &self.values[range])
    }

    /// Entry `(r, c)`, zero when not stored.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (rows, vals) = self.column(c);
        rows.binary_search(&r).map(|p| vals[p]).unwrap_or(0.0)
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for c in 0..self.ncols {
            let (rows, vals) = self.column(c);
            for (&r, &v) in rows.iter().zip(vals) {
                y[r] += v * x[c];
            }
        }
        y
    }

    /// Largest absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.ncols)
            .map(|c| self.column(c).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Dense copy, row-major. Intended for small matrices in checks.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for c in 0..self.ncols {
            let (rows, vals) = self.column(c);
            for (&r, &v) in rows.iter().zip(vals) {
                out[r][c] = v;
            }
        }
        out
    }
}

/// Column elimination order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ordering {
    /// Geometric nested dissection of the periodic grid graph.
    NestedDissection,
    /// Identity permutation.
    Natural,
}

/// Boxes at or below this many points are ordered lexicographically.
const DISSECTION_LEAF: usize = 64;

#[derive(Clone, Copy, Debug)]
struct Region {
    lo: [usize; MAX_DIM],
    len: [usize; MAX_DIM],
    /// Axis still wraps around (full periodic ring).
    periodic: [bool; MAX_DIM],
}

/// Nested dissection permutation for a grid graph whose edges connect points
/// within `‖m‖∞ ≤ half_width` (periodically).
pub fn nested_dissection(grid: &Grid, half_width: usize) -> Vec<usize> {
    let d = grid.dim();
    let n = grid.n();
    let mut order = Vec::with_capacity(grid.len());
    let mut root = Region {
        lo: [0; MAX_DIM],
        len: [1; MAX_DIM],
        periodic: [false; MAX_DIM],
    };
    for axis in 0..d {
        root.len[axis] = n;
        root.periodic[axis] = true;
    }
    if half_width == 0 {
        order.extend(0..grid.len());
        return order;
    }
    dissect(grid, half_width, root, &mut order);
    debug_assert_eq!(order.len(), grid.len());
    order
}

fn dissect(grid: &Grid, b: usize, region: Region, order: &mut Vec<usize>) {
    let d = grid.dim();
    let volume: usize = region.len[..d].iter().product();
    if volume == 0 {
        return;
    }
    // Cut periodic rings open first; otherwise bisect the longest axis.
    let periodic_axis = (0..d).find(|&a| region.periodic[a] && region.len[a] > 2 * b + 1);
    let longest = (0..d).max_by_key(|&a| region.len[a]).unwrap_or(0);
    if periodic_axis.is_none() && (volume <= DISSECTION_LEAF || region.len[longest] <= 2 * b + 1) {
        emit_box(grid, &region, order);
        return;
    }
    match periodic_axis {
        Some(axis) => {
            let mut sep = region;
            sep.len[axis] = b;
            sep.periodic[axis] = false;
            let mut rest = region;
            rest.lo[axis] = region.lo[axis] + b;
            rest.len[axis] = region.len[axis] - b;
            rest.periodic[axis] = false;
            dissect(grid, b, rest, order);
            emit_box(grid, &sep, order);
        }
        None => {
            let axis = longest;
            let half = (region.len[axis] - b) / 2;
            let mut left = region;
            left.len[axis] = half;
            let mut sep = region;
            sep.lo[axis] = region.lo[axis] + half;
            sep.len[axis] = b;
            let mut right = region;
            right.lo[axis] = region.lo[axis] + half + b;
            right.len[axis] = region.len[axis] - half - b;
            dissect(grid, b, left, order);
            dissect(grid, b, right, order);
            emit_box(grid, &sep, order);
        }
    }
}

fn emit_box(grid: &Grid, region: &Region, order: &mut Vec<usize>) {
    let d = grid.dim();
    let n = grid.n();
    let volume: usize = region.len[..d].iter().product();
    let mut idx = [0usize; MAX_DIM];
    for t in 0..volume {
        let mut rest = t;
        for axis in (0..d).rev() {
            idx[axis] = (region.lo[axis] + rest % region.len[axis]) % n;
            rest /= region.len[axis];
        }
        order.push(grid.flat_index(&idx));
    }
}

/// Statistics from a factorization.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FactorStats {
    pub nnz_matrix: usize,
    pub nnz_l: usize,
    pub nnz_u: usize,
    /// Rows pivoted off the diagonal.
    pub off_diagonal_pivots: usize,
    pub seconds: f64,
}

impl FactorStats {
    /// `(nnz(L) + nnz(U)) / nnz(A)`.
    pub fn fill_ratio(&self) -> f64 {
        (self.nnz_l + self.nnz_u) as f64 / self.nnz_matrix.max(1) as f64
    }
}

/// `P_r A Q = L U` with unit lower-triangular `L`.
#[derive(Clone, Debug)]
pub struct SparseLu {
    n: usize,
    /// Column permutation: step `k` eliminates column `col_perm[k]`.
    col_perm: Vec<usize>,
    /// Row permutation inverse: row `i` became pivot `row_pinv[i]`.
    row_pinv: Vec<usize>,
    l: CscMatrix,
    u: CscMatrix,
    stats: FactorStats,
}

/// Relative pivot magnitude below which the matrix is declared singular.
pub const SINGULAR_PIVOT: f64 = 1e-14;
/// A diagonal pivot is kept while `|a_jj| ≥ DIAGONAL_PREFERENCE · max_i |a_ij|`.
pub const DIAGONAL_PREFERENCE: f64 = 0.001;

impl SparseLu {
    /// Factorizes a square matrix with the given column order.
    pub fn factorize(a: &CscMatrix, col_perm: Vec<usize>) -> Result<Self> {
        let start = Instant::now();
        let n = a.ncols();
        if a.nrows() != n || col_perm.len() != n {
            return Err(Error::InvalidArgument(format!(
                "LU needs a square matrix and a full column order ({}x{}, order {})",
                a.nrows(),
                n,
                col_perm.len()
            )));
        }
        let threshold = SINGULAR_PIVOT * a.norm_one();
        const UNSET: usize = usize::MAX;

        // L columns keep original row indices until the end.
        let mut l_ptr = vec![0usize];
        let mut l_idx: Vec<usize> = Vec::with_capacity(4 * a.nnz());
        let mut l_val: Vec<f64> = Vec::with_capacity(4 * a.nnz());
        let mut u_ptr = vec![0usize];
        let mut u_idx: Vec<usize> = Vec::with_capacity(4 * a.nnz());
        let mut u_val: Vec<f64> = Vec::with_capacity(4 * a.nnz());

        let mut pinv = vec![UNSET; n];
        let mut x = vec![0.0f64; n];
        let mut mark = vec![0usize; n];
        let mut stamp = 0usize;
        let mut reach: Vec<usize> = Vec::with_capacity(n);
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut off_diag = 0usize;

        for k in 0..n {
            let col = col_perm[k];
            let (rows, vals) = a.column(col);

            // Symbolic: nodes reachable from the column pattern through L,
            // collected in reverse topological order.
            stamp += 1;
            reach.clear();
            for &start_row in rows {
                if mark[start_row] == stamp {
                    continue;
                }
                mark[start_row] = stamp;
                stack.push((start_row, 0));
                while let Some(top) = stack.last_mut() {
                    let node = top.0;
                    let lcol = pinv[node];
                    let mut next_child = None;
                    if lcol != UNSET {
                        let (begin, end) = (l_ptr[lcol] + 1, l_ptr[lcol + 1]);
                        while begin + top.1 < end {
                            let child = l_idx[begin + top.1];
                            top.1 += 1;
                            if mark[child] != stamp {
                                next_child = Some(child);
                                break;
                            }
                        }
                    }
                    match next_child {
                        Some(child) => {
                            mark[child] = stamp;
                            stack.push((child, 0));
                        }
                        None => {
                            stack.pop();
                            reach.push(node);
                        }
                    }
                }
            }

            // Numeric: sparse triangular solve x = L \ a(:, col).
            for (&r, &v) in rows.iter().zip(vals) {
                x[r] = v;
            }
            for &node in reach.iter().rev() {
                let lcol = pinv[node];
                if lcol == UNSET {
                    continue;
                }
                let xj = x[node];
                if xj == 0.0 {
                    continue;
                }
                for p in l_ptr[lcol] + 1..l_ptr[lcol + 1] {
                    x[l_idx[p]] -= l_val[p] * xj;
                }
            }

            // Pivot selection among rows not yet pivoted.
            let mut best = UNSET;
            let mut best_abs = -1.0f64;
            for &node in &reach {
                if pinv[node] == UNSET {
                    let v = x[node].abs();
                    if v > best_abs {
                        best_abs = v;
                        best = node;
                    }
                } else {
                    u_idx.push(pinv[node]);
                    u_val.push(x[node]);
                }
            }
            if best == UNSET || best_abs <= threshold {
                return Err(Error::SingularPivot {
                    step: k,
                    pivot: best_abs.max(0.0),
                    threshold,
                });
            }
            if pinv[col] == UNSET && mark[col] == stamp && x[col].abs() >= DIAGONAL_PREFERENCE * best_abs {
                best = col;
            } else {
                off_diag += 1;
            }
            let pivot = x[best];
            u_idx.push(k);
            u_val.push(pivot);
            u_ptr.push(u_idx.len());

            pinv[best] = k;
            l_idx.push(best);
            l_val.push(1.0);
            for &node in &reach {
                if pinv[node] == UNSET {
                    let v = x[node] / pivot;
                    if v != 0.0 {
                        l_idx.push(node);
                        l_val.push(v);
                    }
                }
                x[node] = 0.0;
            }
            l_ptr.push(l_idx.len());
        }

        for r in l_idx.iter_mut() {
            *r = pinv[*r];
        }
        let mut l = CscMatrix {
            nrows: n,
            ncols: n,
            col_ptr: l_ptr,
            row_idx: l_idx,
            values: l_val,
        };
        let mut u = CscMatrix {
            nrows: n,
            ncols: n,
            col_ptr: u_ptr,
            row_idx: u_idx,
            values: u_val,
        };
        sort_columns(&mut l);
        sort_columns(&mut u);
        let stats = FactorStats {
            nnz_matrix: a.nnz(),
            nnz_l: l.nnz(),
            nnz_u: u.nnz(),
            off_diagonal_pivots: off_diag,
            seconds: start.elapsed().as_secs_f64(),
        };
        Ok(Self {
            n,
            col_perm,
            row_pinv: pinv,
            l,
            u,
            stats,
        })
    }

    /// Factorizes a grid-stencil matrix using the requested ordering.
    pub fn factorize_on_grid(a: &CscMatrix, grid: &Grid, half_width: usize, ordering: Ordering) -> Result<Self> {
        let start = Instant::now();
        let perm = match ordering {
            Ordering::NestedDissection => nested_dissection(grid, half_width),
            Ordering::Natural => (0..grid.len()).collect(),
        };
        let mut lu = Self::factorize(a, perm)?;
        lu.stats.seconds = start.elapsed().as_secs_f64();
        Ok(lu)
    }

    pub fn stats(&self) -> &FactorStats {
        &self.stats
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for (i, &v) in b.iter().enumerate() {
            y[self.row_pinv[i]] = v;
        }
        // L has a unit diagonal stored first in each column.
        for k in 0..n {
            let yk = y[k];
            if yk == 0.0 {
                continue;
            }
            let (rows, vals) = self.l.column(k);
            for (&r, &v) in rows.iter().zip(vals).skip(1) {
                y[r] -= v * yk;
            }
        }
        for k in (0..n).rev() {
            let (rows, vals) = self.u.column(k);
            // diagonal is the last entry after sorting
            let last = rows.len() - 1;
            debug_assert_eq!(rows[last], k);
            let yk = y[k] / vals[last];
            y[k] = yk;
            if yk == 0.0 {
                continue;
            }
            for (&r, &v) in rows[..last].iter().zip(&vals[..last]) {
                y[r] -= v * yk;
            }
        }
        let mut x = vec![0.0; n];
        for (k, &c) in self.col_perm.iter().enumerate() {
            x[c] = y[k];
        }
        x
    }
}

fn sort_columns(m: &mut CscMatrix) {
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for c in 0..m.ncols {
        let range = m.col_ptr[c]..m.col_ptr[c + 1];
        entries.clear();
        entries.extend(
            m.row_idx[range.clone()]
                .iter()
                .copied()
                .zip(m.values[range.clone()].iter().copied()),
        );
        entries.sort_unstable_by_key(|e| e.0);
        for (p, (r, v)) in range.zip(entries.iter()) {
            m.row_idx[p] = *r;
            m.values[p] = *v;
        }
    }
}
