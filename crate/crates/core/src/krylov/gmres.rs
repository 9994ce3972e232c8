//! Restarted GMRES with right preconditioning, in flexible (stored `Z_j`)
//! and standard form. Least squares via Givens rotations, orthogonalization
//! by modified Gram–Schmidt. Convergence is tested on the Arnoldi residual
//! estimate; the true residual of the final iterate is reported separately.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{LinearOperator, Preconditioner, SolveReport};
use crate::error::{Error, Result};
use crate::linalg::vector::{axpy, dot, norm2};

/// Arnoldi normalization coefficients below this value signal breakdown.
pub const BREAKDOWN_TOL: f64 = 1e-300;

/// Restart length, tolerances and iteration cap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmresOptions {
    pub restart: usize,
    pub rtol: f64,
    pub atol: f64,
    pub maxit: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            restart: 30,
            rtol: 1e-10,
            atol: 1e-10,
            maxit: 500,
        }
    }
}

/// Flexible GMRES: stores every preconditioned direction, so the
/// preconditioner may vary between applications.
pub fn fgmres(
    op: &dyn LinearOperator,
    b: &[f64],
    prec: &mut dyn Preconditioner,
    opts: GmresOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    run(op, b, prec, opts, true)
}

/// Right-preconditioned GMRES for a fixed preconditioner.
pub fn gmres(
    op: &dyn LinearOperator,
    b: &[f64],
    prec: &mut dyn Preconditioner,
    opts: GmresOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    run(op, b, prec, opts, false)
}

fn run(
    op: &dyn LinearOperator,
    b: &[f64],
    prec: &mut dyn Preconditioner,
    opts: GmresOptions,
    flexible: bool,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = op.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "GMRES on an operator of size {n} with a right-hand side of length {}",
            b.len()
        )));
    }
    if opts.restart == 0 {
        return Err(Error::InvalidArgument(
            "GMRES restart must be positive".into(),
        ));
    }
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    let mut report = SolveReport::default();
    let finish = |mut report: SolveReport, prec: &dyn Preconditioner| {
        report.absorb_inner(prec.inner_stats());
        report.wall_time = start.elapsed().as_secs_f64();
        report
    };
    if bnorm == 0.0 {
        report.converged = true;
        report.residual_history.push(0.0);
        report.true_residual = 0.0;
        return Ok((x, finish(report, prec)));
    }
    let tol = (opts.rtol * bnorm).max(opts.atol);
    let m = opts.restart;
    let mut r = b.to_vec();
    let mut beta = bnorm;
    report.residual_history.push(1.0);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut zs: Vec<Vec<f64>> = Vec::with_capacity(if flexible { m } else { 0 });
    let mut hess = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut total = 0usize;

    loop {
        basis.clear();
        zs.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut steps = 0;
        let mut breakdown = false;
        for j in 0..m {
            prec.apply(&basis[j], &mut z);
            op.apply(&z, &mut w);
            if flexible {
                zs.push(z.clone());
            }
            total += 1;
            for i in 0..=j {
                let hij = dot(&w, &basis[i]);
                hess[i][j] = hij;
                axpy(-hij, &basis[i], &mut w);
            }
            let hnext = norm2(&w);
            hess[j + 1][j] = hnext;
            for i in 0..j {
                let t = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i] * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = t;
            }
            let (c, s) = givens(hess[j][j], hess[j + 1][j]);
            cs[j] = c;
            sn[j] = s;
            hess[j][j] = c * hess[j][j] + s * hess[j + 1][j];
            hess[j + 1][j] = 0.0;
            g[j + 1] = -s * g[j];
            g[j] *= c;
            steps = j + 1;
            let est = g[j + 1].abs();
            report.residual_history.push(est / bnorm);
            if hnext < BREAKDOWN_TOL {
                breakdown = true;
                break;
            }
            if est <= tol || total >= opts.maxit {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }

        let y = back_solve(&hess, &g, steps);
        if flexible {
            for (yi, zi) in y.iter().zip(&zs) {
                axpy(*yi, zi, &mut x);
            }
        } else {
            let mut comb = vec![0.0; n];
            for (yi, vi) in y.iter().zip(&basis) {
                axpy(*yi, vi, &mut comb);
            }
            prec.apply(&comb, &mut z);
            axpy(1.0, &z, &mut x);
        }
        op.apply(&x, &mut w);
        for ((ri, bi), wi) in r.iter_mut().zip(b).zip(&w) {
            *ri = bi - wi;
        }
        beta = norm2(&r);
        report.true_residual = beta / bnorm;
        report.iterations = total;
        let estimate = g[steps].abs();
        if estimate <= tol || beta <= tol {
            report.converged = true;
            return Ok((x, finish(report, prec)));
        }
        if breakdown {
            return Err(Error::Breakdown(total));
        }
        if total >= opts.maxit {
            return Ok((x, finish(report, prec)));
        }
        report.residual_history.push(beta / bnorm);
    }
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else if a == 0.0 {
        (0.0, 1.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

fn back_solve(h: &[Vec<f64>], g: &[f64], k: usize) -> Vec<f64> {
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= h[i][j] * y[j];
        }
        y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::IdentityPreconditioner;
    use crate::linalg::{CsrMatrix, DenseMatrix, LuFactorization};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct LuPrec(LuFactorization);

    impl Preconditioner for LuPrec {
        fn apply(&mut self, r: &[f64], z: &mut [f64]) {
            z.copy_from_slice(&self.0.solve(r).unwrap());
        }
    }

    fn random_system(n: usize, seed: u64) -> (DenseMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        for i in 0..n {
            a[(i, i)] += n as f64 / 4.0;
        }
        let b = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        (a, b)
    }

    #[test]
    fn identity_takes_one_step() {
        let a = CsrMatrix::identity(7);
        let b = vec![2.0; 7];
        let (x, rep) =
            fgmres(&a, &b, &mut IdentityPreconditioner, GmresOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert!(x.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-15));
    }

    #[test]
    fn exact_preconditioner_converges_immediately() {
        let (a, b) = random_system(40, 1);
        let mut p = LuPrec(a.lu().unwrap());
        let (_, rep) = fgmres(&a, &b, &mut p, GmresOptions::default()).unwrap();
        assert!(rep.converged && rep.iterations <= 2);
    }

    #[test]
    fn unpreconditioned_matches_lu() {
        let (a, b) = random_system(50, 2);
        let opts = GmresOptions {
            restart: 50,
            ..Default::default()
        };
        for flexible in [true, false] {
            let (x, rep) = run(&a, &b, &mut IdentityPreconditioner, opts, flexible).unwrap();
            assert!(rep.converged);
            let xd = a.lu().unwrap().solve(&b).unwrap();
            for (p, q) in x.iter().zip(&xd) {
                assert!((p - q).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn residual_history_monotone_within_cycle() {
        let (a, b) = random_system(30, 3);
        let opts = GmresOptions {
            restart: 30,
            rtol: 1e-12,
            atol: 0.0,
            maxit: 30,
        };
        let (_, rep) = fgmres(&a, &b, &mut IdentityPreconditioner, opts).unwrap();
        let h = &rep.residual_history;
        for k in 1..h.len() - 1 {
            assert!(h[k] <= h[k - 1] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn restarts_and_iteration_cap() {
        let (a, b) = random_system(60, 4);
        let opts = GmresOptions {
            restart: 5,
            rtol: 1e-14,
            atol: 0.0,
            maxit: 12,
        };
        let (_, rep) = fgmres(&a, &b, &mut IdentityPreconditioner, opts).unwrap();
        assert_eq!(rep.iterations, 12);
        assert!(!rep.converged);
        let opts = GmresOptions {
            restart: 10,
            maxit: 1000,
            ..Default::default()
        };
        let (x, rep) = fgmres(&a, &b, &mut IdentityPreconditioner, opts).unwrap();
        assert!(rep.converged);
        let xd = a.lu().unwrap().solve(&b).unwrap();
        assert!(x.iter().zip(&xd).all(|(p, q)| (p - q).abs() < 1e-8));
    }

    #[test]
    fn zero_rhs() {
        let (a, _) = random_system(5, 5);
        let (x, rep) = fgmres(
            &a,
            &[0.0; 5],
            &mut IdentityPreconditioner,
            GmresOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(x.iter().all(|v| *v == 0.0));
    }
}
