//! Iterative solvers: preconditioned CG, flexible and standard restarted
//! GMRES, and a smoothed-aggregation AMG preconditioner.

mod amg;
mod cg;
mod gmres;

use serde::{Deserialize, Serialize};

pub use amg::{amg_setup, AmgHierarchy, AmgOptions};
pub use cg::{cg, cg_solve_into, CgOutcome};
pub use gmres::{fgmres, gmres, GmresOptions, BREAKDOWN_TOL};

use crate::linalg::{CsrMatrix, DenseMatrix};

/// Square linear map applied to vectors.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// `y = Op x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv_into(x, y);
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = crate::linalg::vector::dot(self.row(i), x);
        }
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
}

/// Counters for nested (inner) solves performed by a preconditioner.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InnerStats {
    pub solves: usize,
    pub iterations: usize,
    pub failures: usize,
}

impl InnerStats {
    pub fn record(&mut self, iterations: usize, converged: bool) {
        self.solves += 1;
        self.iterations += iterations;
        if !converged {
            self.failures += 1;
        }
    }

    pub fn average(&self) -> f64 {
        if self.solves == 0 {
            0.0
        } else {
            self.iterations as f64 / self.solves as f64
        }
    }
}

/// Approximate inverse applied to residuals; may change between applications.
pub trait Preconditioner {
    /// `z ≈ Op⁻¹ r`.
    fn apply(&mut self, r: &[f64], z: &mut [f64]);

    /// Inner-solve counters accumulated since construction.
    fn inner_stats(&self) -> InnerStats {
        InnerStats::default()
    }
}

impl<P: Preconditioner + ?Sized> Preconditioner for &mut P {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        (**self).apply(r, z)
    }

    fn inner_stats(&self) -> InnerStats {
        (**self).inner_stats()
    }
}

/// `z = r`.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Diagonal scaling `z = D⁻¹ r`.
#[derive(Clone, Debug)]
pub struct JacobiPreconditioner {
    inv_diag: Vec<f64>,
}

impl JacobiPreconditioner {
    pub fn new(a: &CsrMatrix) -> crate::Result<Self> {
        let d = a.diagonal();
        if let Some((row, &pivot)) = d.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(crate::Error::NotSpd { row, pivot });
        }
        Ok(Self {
            inv_diag: d.iter().map(|v| 1.0 / v).collect(),
        })
    }
}

impl Preconditioner for JacobiPreconditioner {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    /// Relative residual norms as tracked by the iteration, one per step.
    pub residual_history: Vec<f64>,
    /// `‖b − Ax‖/‖b‖` recomputed from the returned iterate.
    pub true_residual: f64,
    pub inner_iterations_total: usize,
    pub inner_iterations_avg: f64,
    pub inner_failures: usize,
    /// Seconds.
    pub wall_time: f64,
}

impl SolveReport {
    /// Last tracked relative residual, zero for an empty history.
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }

    pub(crate) fn absorb_inner(&mut self, stats: InnerStats) {
        self.inner_iterations_total = stats.iterations;
        self.inner_iterations_avg = stats.average();
        self.inner_failures = stats.failures;
    }
}
