//! Preconditioned conjugate gradients.

use std::time::Instant;

use super::{LinearOperator, Preconditioner, SolveReport};
use crate::error::{Error, Result};
use crate::linalg::vector::{axpy, dot, norm2};

/// Iteration count, convergence flag and final recursive relative residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub converged: bool,
    pub relative_residual: f64,
}

/// CG from a zero initial guess, writing the iterate into `x`. Stops when
/// `‖r‖ ≤ rtol‖b‖`. `history`, when given, receives `‖r_k‖/‖b‖` per step.
pub fn cg_solve_into(
    op: &dyn LinearOperator,
    b: &[f64],
    prec: &mut dyn Preconditioner,
    rtol: f64,
    maxit: usize,
    x: &mut [f64],
    mut history: Option<&mut Vec<f64>>,
) -> Result<CgOutcome> {
    let n = op.dim();
    if b.len() != n || x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "CG on an operator of size {n} with vectors of length {} and {}",
            b.len(),
            x.len()
        )));
    }
    x.iter_mut().for_each(|v| *v = 0.0);
    let bnorm = norm2(b);
    if let Some(h) = history.as_deref_mut() {
        h.push(if bnorm > 0.0 { 1.0 } else { 0.0 });
    }
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            iterations: 0,
            converged: true,
            relative_residual: 0.0,
        });
    }
    let target = rtol * bnorm;
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    prec.apply(&r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rnorm = bnorm;
    for k in 1..=maxit {
        op.apply(&p, &mut q);
        let curvature = dot(&p, &q);
        if !(curvature > 0.0) {
            return Err(Error::IndefiniteOperator(curvature));
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, x);
        axpy(-alpha, &q, &mut r);
        rnorm = norm2(&r);
        if let Some(h) = history.as_deref_mut() {
            h.push(rnorm / bnorm);
        }
        if rnorm <= target {
            return Ok(CgOutcome {
                iterations: k,
                converged: true,
                relative_residual: rnorm / bnorm,
            });
        }
        prec.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Ok(CgOutcome {
        iterations: maxit,
        converged: false,
        relative_residual: rnorm / bnorm,
    })
}

/// Preconditioned CG from a zero initial guess, reporting the recursive
/// residual history and the recomputed true residual.
pub fn cg(
    op: &dyn LinearOperator,
    b: &[f64],
    prec: &mut dyn Preconditioner,
    rtol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let mut x = vec![0.0; op.dim()];
    let mut history = Vec::new();
    let out = cg_solve_into(op, b, prec, rtol, maxit, &mut x, Some(&mut history))?;
    let mut ax = vec![0.0; op.dim()];
    op.apply(&x, &mut ax);
    let bnorm = norm2(b);
    let true_res = if bnorm > 0.0 {
        ax.iter()
            .zip(b)
            .map(|(p, q)| (q - p) * (q - p))
            .sum::<f64>()
            .sqrt()
            / bnorm
    } else {
        0.0
    };
    let mut report = SolveReport {
        iterations: out.iterations,
        converged: out.converged,
        residual_history: history,
        true_residual: true_res,
        wall_time: start.elapsed().as_secs_f64(),
        ..Default::default()
    };
    report.absorb_inner(prec.inner_stats());
    Ok((x, report))
}
