//! Envelope (skyline) Cholesky factorization of sparse SPD matrices under a
//! reverse Cuthill–McKee ordering.
//!
//! The envelope of row `i` spans from its first nonzero column to the
//! diagonal, so fill stays inside the profile. On 2D grids the profile grows
//! like `n^{3/2}`, which keeps exact solves cheap at desk scale.

use std::collections::VecDeque;

use super::sparse::CsrMatrix;
use super::vector::dot;
use crate::error::{Error, Result};

/// Reverse Cuthill–McKee permutation of the symmetrized sparsity graph.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.rows();
    let sym = structural_symmetrization(a);
    let degree: Vec<usize> = (0..n).map(|i| sym[i].len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let root = pseudo_peripheral(seed, &sym, &degree);
        let mut queue = VecDeque::new();
        visited[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = sym[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn structural_symmetrization(a: &CsrMatrix) -> Vec<Vec<usize>> {
    let n = a.rows();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for row in &mut adj {
        row.sort_unstable();
        row.dedup();
    }
    adj
}

fn bfs_levels(root: usize, adj: &[Vec<usize>]) -> (Vec<usize>, usize) {
    let mut level = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::new();
    level[root] = 0;
    queue.push_back(root);
    let mut last = root;
    while let Some(v) = queue.pop_front() {
        last = v;
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    let depth = level[last];
    (level, depth)
}

fn pseudo_peripheral(start: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut root = start;
    let (mut level, mut depth) = bfs_levels(root, adj);
    loop {
        let candidate = (0..adj.len())
            .filter(|&v| level[v] == depth)
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(root);
        let (lvl, d) = bfs_levels(candidate, adj);
        if d <= depth {
            return root;
        }
        root = candidate;
        level = lvl;
        depth = d;
    }
}

/// Envelope Cholesky factor of `P A Pᵀ`.
#[derive(Clone, Debug)]
pub struct SkylineCholesky {
    n: usize,
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    values: Vec<f64>,
}

impl SkylineCholesky {
    /// Factors a symmetric positive definite matrix (only the lower triangle is read).
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::DimensionMismatch(
                "Cholesky of a non-square matrix".into(),
            ));
        }
        let n = a.rows();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old_i in 0..n {
            let i = inv[old_i];
            for &old_j in a.row(old_i).0 {
                let j = inv[old_j];
                let (r, c) = if i >= j { (i, j) } else { (j, i) };
                first[r] = first[r].min(c);
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + (i - first[i] + 1));
        }
        let mut values = vec![0.0; offset[n]];
        for old_i in 0..n {
            let i = inv[old_i];
            let (c, v) = a.row(old_i);
            for (old_j, x) in c.iter().zip(v) {
                let j = inv[*old_j];
                if j <= i {
                    values[offset[i] + j - first[i]] = *x;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let lo = fi.max(fj);
                let (head, row_i) = values.split_at_mut(offset[i]);
                let s = if j < i {
                    let row_j = &head[offset[j]..offset[j + 1]];
                    dot(&row_i[lo - fi..j - fi], &row_j[lo - fj..j - fj])
                } else {
                    dot(&row_i[..i - fi], &row_i[..i - fi])
                };
                let entry = row_i[j - fi] - s;
                if j < i {
                    let ljj = head[offset[j + 1] - 1];
                    row_i[j - fi] = entry / ljj;
                } else {
                    if !(entry > 0.0) || !entry.is_finite() {
                        return Err(Error::NotSpd {
                            row: perm[i],
                            pivot: entry,
                        });
                    }
                    row_i[i - fi] = entry.sqrt();
                }
            }
        }
        Ok(Self {
            n,
            perm,
            first,
            offset,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch(
                "Cholesky solve right-hand side".into(),
            ));
        }
        let mut x = vec![0.0; self.n];
        self.solve_into(b, &mut x);
        Ok(x)
    }

    /// Solves into a caller buffer; lengths are checked in debug builds.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            let s = dot(&row[..i - fi], &y[fi..i]);
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (yk, l) in y[fi..i].iter_mut().zip(&row[..i - fi]) {
                *yk -= l * yi;
            }
        }
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
    }
}
