//! Minimum-cost assignment (Hungarian method with row and column potentials)
//! and the matched distance between two eigenvalue multisets.

use num_complex::Complex64;

/// Optimal assignment of every row of a `rows × cols` cost matrix
/// (`rows ≤ cols`) to a distinct column. Returns the column of each row and
/// the total cost.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let rows = cost.len();
    if rows == 0 {
        return (Vec::new(), 0.0);
    }
    let cols = cost[0].len();
    assert!(
        rows <= cols,
        "assignment needs at least as many columns as rows"
    );
    // One-based indices; index 0 is the virtual source.
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; rows];
    for j in 1..=cols {
        if owner[j] > 0 {
            assign[owner[j] - 1] = j - 1;
        }
    }
    let total = assign.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    (assign, total)
}

/// Mean of `|aᵢ − b_π(i)|` under the assignment `π` minimizing the sum.
/// The smaller multiset is matched into the larger one.
pub fn matched_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if small.is_empty() {
        return 0.0;
    }
    let cost: Vec<Vec<f64>> = small
        .iter()
        .map(|x| large.iter().map(|y| (x - y).norm()).collect())
        .collect();
    min_cost_assignment(&cost).1 / small.len() as f64
}
