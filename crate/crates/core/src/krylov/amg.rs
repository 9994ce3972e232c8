//! Smoothed-aggregation algebraic multigrid with a symmetric Gauss–Seidel
//! smoother and a dense direct solve on the coarsest level.

use super::Preconditioner;
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, LuFactorization};

/// Setup and cycle parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmgOptions {
    /// Connection `i–j` is strong when `|a_ij| ≥ θ √|a_ii a_jj|`.
    pub strength_threshold: f64,
    /// Levels at or below this size are solved directly.
    pub coarse_size: usize,
    pub max_levels: usize,
    /// Symmetric Gauss–Seidel sweeps before and after the coarse correction.
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    /// Prolongator damping `ω = omega_factor / ρ(D⁻¹A)`.
    pub omega_factor: f64,
}

impl Default for AmgOptions {
    fn default() -> Self {
        Self {
            strength_threshold: 1e-3,
            coarse_size: 200,
            max_levels: 20,
            pre_sweeps: 2,
            post_sweeps: 2,
            omega_factor: 4.0 / 3.0,
        }
    }
}

#[derive(Clone, Debug)]
struct Level {
    a: CsrMatrix,
    diag_pos: Vec<usize>,
    p: CsrMatrix,
    pt: CsrMatrix,
}

/// Multigrid hierarchy; one V-cycle is a fixed symmetric positive definite operator.
#[derive(Clone, Debug)]
pub struct AmgHierarchy {
    levels: Vec<Level>,
    coarse: LuFactorization,
    coarse_a: CsrMatrix,
    coarse_dim: usize,
    opts: AmgOptions,
}

/// Builds the hierarchy for an SPD matrix.
pub fn amg_setup(a: &CsrMatrix, opts: AmgOptions) -> Result<AmgHierarchy> {
    if a.rows() != a.cols() {
        return Err(Error::DimensionMismatch(
            "AMG of a non-square matrix".into(),
        ));
    }
    let mut levels = Vec::new();
    let mut current = a.clone();
    loop {
        let diag_pos = diagonal_positions(&current)?;
        let n = current.rows();
        if n <= opts.coarse_size || levels.len() + 1 >= opts.max_levels {
            break;
        }
        let aggregates = aggregate(&current, opts.strength_threshold);
        let n_agg = aggregates.iter().flatten().max().map_or(0, |m| m + 1);
        if n_agg == 0 || n_agg as f64 > 0.9 * n as f64 {
            break;
        }
        let p = smoothed_prolongator(&current, &diag_pos, &aggregates, n_agg, opts.omega_factor)?;
        let pt = p.transpose();
        let coarse = pt.matmul(&current.matmul(&p)?)?;
        let coarse = symmetrize(&coarse)?;
        levels.push(Level {
            a: current,
            diag_pos,
            p,
            pt,
        });
        current = coarse;
    }
    let coarse_dim = current.rows();
    let coarse = current.to_dense().lu()?;
    Ok(AmgHierarchy {
        levels,
        coarse,
        coarse_a: current,
        coarse_dim,
        opts,
    })
}

fn symmetrize(a: &CsrMatrix) -> Result<CsrMatrix> {
    a.linear_combination(0.5, &a.transpose(), 0.5)
}

fn diagonal_positions(a: &CsrMatrix) -> Result<Vec<usize>> {
    let mut pos = Vec::with_capacity(a.rows());
    for i in 0..a.rows() {
        let (c, v) = a.row(i);
        match c.binary_search(&i) {
            Ok(k) if v[k] > 0.0 => pos.push(a.row_ptr()[i] + k),
            Ok(k) => {
                return Err(Error::NotSpd {
                    row: i,
                    pivot: v[k],
                })
            }
            Err(_) => return Err(Error::NotSpd { row: i, pivot: 0.0 }),
        }
    }
    Ok(pos)
}

fn strong_neighbors(a: &CsrMatrix, theta: f64) -> Vec<Vec<usize>> {
    let d = a.diagonal();
    (0..a.rows())
        .map(|i| {
            let (c, v) = a.row(i);
            c.iter()
                .zip(v)
                .filter(|(j, x)| **j != i && x.abs() >= theta * (d[i] * d[**j]).abs().sqrt())
                .map(|(j, _)| *j)
                .collect()
        })
        .collect()
}

/// Greedy three-phase aggregation; nodes without strong neighbors stay unassigned.
fn aggregate(a: &CsrMatrix, theta: f64) -> Vec<Option<usize>> {
    let n = a.rows();
    let strong = strong_neighbors(a, theta);
    let mut agg: Vec<Option<usize>> = vec![None; n];
    let mut count = 0;
    for i in 0..n {
        if agg[i].is_some() || strong[i].is_empty() {
            continue;
        }
        if strong[i].iter().all(|&j| agg[j].is_none()) {
            agg[i] = Some(count);
            for &j in &strong[i] {
                agg[j] = Some(count);
            }
            count += 1;
        }
    }
    let snapshot = agg.clone();
    for i in 0..n {
        if agg[i].is_some() || strong[i].is_empty() {
            continue;
        }
        let (c, v) = a.row(i);
        let best = c
            .iter()
            .zip(v)
            .filter(|(j, _)| {
                **j != i && snapshot[**j].is_some() && strong[i].binary_search(j).is_ok()
            })
            .max_by(|p, q| p.1.abs().total_cmp(&q.1.abs()).then(q.0.cmp(p.0)));
        if let Some((j, _)) = best {
            agg[i] = snapshot[*j];
        }
    }
    for i in 0..n {
        if agg[i].is_some() || strong[i].is_empty() {
            continue;
        }
        agg[i] = Some(count);
        for &j in &strong[i] {
            if agg[j].is_none() {
                agg[j] = Some(count);
            }
        }
        count += 1;
    }
    agg
}

fn smoothed_prolongator(
    a: &CsrMatrix,
    diag_pos: &[usize],
    aggregates: &[Option<usize>],
    n_agg: usize,
    omega_factor: f64,
) -> Result<CsrMatrix> {
    let n = a.rows();
    let mut sizes = vec![0usize; n_agg];
    for g in aggregates.iter().flatten() {
        sizes[*g] += 1;
    }
    let triplets: Vec<(usize, usize, f64)> = aggregates
        .iter()
        .enumerate()
        .filter_map(|(i, g)| g.map(|g| (i, g, 1.0 / (sizes[g] as f64).sqrt())))
        .collect();
    let tentative = CsrMatrix::from_triplets(n, n_agg, &triplets)?;
    let d: Vec<f64> = diag_pos.iter().map(|&k| a.values()[k]).collect();
    let rho = spectral_radius_estimate(a, &d);
    let omega = omega_factor / rho;
    let inv_d: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
    let dinv = CsrMatrix::from_diagonal(&inv_d);
    let dinv_a = dinv.matmul(a)?;
    let smoother = CsrMatrix::identity(n).linear_combination(1.0, &dinv_a, -omega)?;
    smoother.matmul(&tentative)
}

/// Power iteration on `D^{-1/2} A D^{-1/2}` from a fixed start vector.
fn spectral_radius_estimate(a: &CsrMatrix, d: &[f64]) -> f64 {
    let n = a.rows();
    let s: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i * 7919) % 17) as f64 / 17.0)
        .collect();
    let mut y = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut rho = 1.0;
    for _ in 0..30 {
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= nrm);
        for i in 0..n {
            tmp[i] = s[i] * x[i];
        }
        a.spmv_into(&tmp, &mut y);
        for i in 0..n {
            y[i] *= s[i];
        }
        rho = x.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>();
        std::mem::swap(&mut x, &mut y);
    }
    rho.max(f64::MIN_POSITIVE)
}

impl AmgHierarchy {
    pub fn num_levels(&self) -> usize {
        self.levels.len() + 1
    }

    /// Sizes of every level, finest first.
    pub fn level_sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.levels.iter().map(|l| l.a.rows()).collect();
        s.push(self.coarse_dim);
        s
    }

    pub fn dim(&self) -> usize {
        self.levels.first().map_or(self.coarse_dim, |l| l.a.rows())
    }

    /// Operator of level `k`.
    pub fn operator(&self, k: usize) -> Option<&CsrMatrix> {
        self.levels.get(k).map(|l| &l.a)
    }

    /// Prolongation from level `k + 1` to level `k`.
    pub fn prolongation(&self, k: usize) -> Option<&CsrMatrix> {
        self.levels.get(k).map(|l| &l.p)
    }

    /// One V-cycle from a zero initial guess.
    pub fn vcycle(&self, r: &[f64]) -> Vec<f64> {
        self.cycle(0, r)
    }

    fn cycle(&self, k: usize, b: &[f64]) -> Vec<f64> {
        if k == self.levels.len() {
            return self
                .coarse
                .solve(b)
                .expect("coarse dimension matches by construction");
        }
        let lvl = &self.levels[k];
        let n = lvl.a.rows();
        let mut x = vec![0.0; n];
        for _ in 0..self.opts.pre_sweeps {
            symmetric_gauss_seidel(&lvl.a, &lvl.diag_pos, b, &mut x);
        }
        let mut r = vec![0.0; n];
        lvl.a.spmv_into(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let mut rc = vec![0.0; lvl.pt.rows()];
        lvl.pt.spmv_into(&r, &mut rc);
        let xc = self.cycle(k + 1, &rc);
        lvl.p.spmv_add(1.0, &xc, &mut x);
        for _ in 0..self.opts.post_sweeps {
            symmetric_gauss_seidel(&lvl.a, &lvl.diag_pos, b, &mut x);
        }
        x
    }

    /// Size of the directly solved coarsest level.
    pub fn coarse_operator_dim(&self) -> usize {
        self.coarse_dim
    }

    /// Galerkin defect `max |Pᵀ A P − A_c| / max |A_c|` over all levels.
    pub fn galerkin_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.levels.len() {
            let l = &self.levels[k];
            let pap =
                l.pt.matmul(&l.a.matmul(&l.p).expect("shapes"))
                    .expect("shapes");
            let coarse = match self.levels.get(k + 1) {
                Some(next) => next.a.to_dense(),
                None => self.coarse_a.to_dense(),
            };
            let diff = pap.to_dense().add_scaled(-1.0, &coarse).expect("shapes");
            worst = worst.max(diff.max_abs() / coarse.max_abs().max(f64::MIN_POSITIVE));
        }
        worst
    }
}

/// Forward then backward Gauss–Seidel sweep.
fn symmetric_gauss_seidel(a: &CsrMatrix, diag_pos: &[usize], b: &[f64], x: &mut [f64]) {
    let rp = a.row_ptr();
    let ci = a.col_idx();
    let va = a.values();
    let n = a.rows();
    let relax = |i: usize, x: &mut [f64]| {
        let mut s = b[i];
        for k in rp[i]..rp[i + 1] {
            s -= va[k] * x[ci[k]];
        }
        let dk = diag_pos[i];
        x[i] += s / va[dk];
    };
    for i in 0..n {
        relax(i, x);
    }
    for i in (0..n).rev() {
        relax(i, x);
    }
}

impl Preconditioner for AmgHierarchy {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(&self.vcycle(r));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::cg;
    use crate::linalg::vector::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q1_laplacian(k: usize) -> CsrMatrix {
        use crate::fem::{assemble_stiffness, FeSpace};
        use crate::mesh::build_box_mesh;
        let mesh = std::sync::Arc::new(build_box_mesh([0.0, 0.0], [1.0, 1.0], k - 1).unwrap());
        assemble_stiffness(&FeSpace::with_boundary_dirichlet(mesh), 1.0, true).unwrap()
    }

    #[test]
    fn small_matrix_is_single_level_direct_solve() {
        let a = q1_laplacian(8);
        let h = amg_setup(&a, AmgOptions::default()).unwrap();
        assert_eq!(h.num_levels(), 1);
        let b: Vec<f64> = (0..a.rows()).map(|i| (i as f64).sin()).collect();
        let x = h.vcycle(&b);
        let r = a.spmv(&x).unwrap();
        assert!(r.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12));
    }

    #[test]
    fn hierarchy_galerkin_and_coarse_size() {
        let a = q1_laplacian(33);
        let h = amg_setup(&a, AmgOptions::default()).unwrap();
        assert!(h.num_levels() >= 2);
        assert!(h.coarse_operator_dim() <= 200);
        assert!(h.galerkin_defect() <= 1e-12);
    }

    #[test]
    fn vcycle_is_symmetric() {
        let a = q1_laplacian(33);
        let h = amg_setup(&a, AmgOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = a.rows();
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lhs = dot(&z, &h.vcycle(&r));
        let rhs = dot(&r, &h.vcycle(&z));
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    fn five_point_laplacian(k: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for j in 0..k {
            for i in 0..k {
                let p = j * k + i;
                t.push((p, p, 4.0));
                if i > 0 {
                    t.push((p, p - 1, -1.0));
                }
                if i + 1 < k {
                    t.push((p, p + 1, -1.0));
                }
                if j > 0 {
                    t.push((p, p - k, -1.0));
                }
                if j + 1 < k {
                    t.push((p, p + k, -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(k * k, k * k, &t).unwrap()
    }

    #[test]
    fn cg_iterations_scale_mildly() {
        for rhs in [0usize, 1] {
            let mut its = Vec::new();
            for k in [33, 65] {
                let a = five_point_laplacian(k);
                let mut h = amg_setup(&a, AmgOptions::default()).unwrap();
                let b: Vec<f64> = (0..a.rows())
                    .map(|i| {
                        if rhs == 0 {
                            1.0
                        } else {
                            ((i * 31) % 17) as f64 - 8.0
                        }
                    })
                    .collect();
                let (_, rep) = cg(&a, &b, &mut h, 1e-10, 500).unwrap();
                assert!(rep.converged);
                its.push(rep.iterations as f64);
            }
            assert!(its[1] <= 1.3 * its[0], "{its:?}");
        }
    }

    #[test]
    fn q1_stiffness_iterations_stay_bounded() {
        let mut its = Vec::new();
        for k in [33, 65, 129] {
            let a = q1_laplacian(k);
            let mut h = amg_setup(&a, AmgOptions::default()).unwrap();
            let b: Vec<f64> = (0..a.rows())
                .map(|i| ((i * 31) % 17) as f64 - 8.0)
                .collect();
            let (_, rep) = cg(&a, &b, &mut h, 1e-10, 500).unwrap();
            its.push(rep.iterations);
        }
        assert!(its.iter().all(|&k| k <= 12), "{its:?}");
    }

    #[test]
    fn rejects_nonpositive_diagonal() {
        let a = CsrMatrix::from_diagonal(&[1.0, -2.0, 3.0]);
        assert!(matches!(
            amg_setup(&a, AmgOptions::default()),
            Err(Error::NotSpd { row: 1, .. })
        ));
    }
}
