//! Outer solve of the interface problem with a chosen preconditioner.

use serde::{Deserialize, Serialize};

use super::augmented::AugmentedSystem;
use super::precond::{
    BaselinePreconditioner, IdealAlPreconditioner, MalPreconditioner, PrecVariant,
    PreconditionerSpec,
};
use crate::error::{Error, Result};
use crate::fem::{build_saddle_system, ProblemConfig, SaddleSystem};
use crate::krylov::{fgmres, gmres, IdentityPreconditioner, SolveReport};
use crate::linalg::vector::norm_inf;

/// Solution blocks with the outer solver report and a posteriori checks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InterfaceSolution {
    pub u: Vec<f64>,
    pub u2: Vec<f64>,
    pub lambda: Vec<f64>,
    pub report: SolveReport,
    /// `‖b − 𝒜x‖/‖b‖` for the unaugmented operator.
    pub original_residual: f64,
    /// `‖Cu − C₂u₂‖∞`.
    pub constraint_residual: f64,
}

impl InterfaceSolution {
    /// `(u, u₂, λ)` concatenated.
    pub fn stacked(&self) -> Vec<f64> {
        let mut x = self.u.clone();
        x.extend_from_slice(&self.u2);
        x.extend_from_slice(&self.lambda);
        x
    }
}

/// Runs the outer iteration and returns the iterate whether or not the
/// tolerance was reached; `report.converged` records the outcome.
pub fn run_solver(sys: &SaddleSystem, spec: &PreconditionerSpec) -> Result<InterfaceSolution> {
    spec.validate()?;
    let b = sys.rhs();
    let (x, report) = match spec.variant {
        PrecVariant::IdealAl | PrecVariant::InexactAl | PrecVariant::MalDiag => {
            let aug = AugmentedSystem::new(sys, spec.gamma1, spec.gamma2, spec.w_mode)?;
            if spec.variant == PrecVariant::MalDiag {
                let mut prec =
                    MalPreconditioner::new(&aug, spec.inner, spec.inner_rtol, spec.inner_maxit)?;
                fgmres(&aug, &b, &mut prec, spec.outer)?
            } else {
                let mut prec = IdealAlPreconditioner::new(
                    &aug,
                    spec.inner,
                    spec.inner_rtol,
                    spec.inner_maxit,
                )?;
                fgmres(&aug, &b, &mut prec, spec.outer)?
            }
        }
        PrecVariant::BaselineTriangular => {
            let mut prec = BaselinePreconditioner::new(sys)?;
            gmres(sys, &b, &mut prec, spec.outer)?
        }
        PrecVariant::None if spec.gamma1 == 0.0 && spec.gamma2 == 0.0 => {
            fgmres(sys, &b, &mut IdentityPreconditioner, spec.outer)?
        }
        PrecVariant::None => {
            let aug = AugmentedSystem::new(sys, spec.gamma1, spec.gamma2, spec.w_mode)?;
            fgmres(&aug, &b, &mut IdentityPreconditioner, spec.outer)?
        }
    };
    let (n, m) = (sys.n(), sys.m_dim());
    let original_residual = sys.relative_residual(&x);
    let mut cr = sys.c.spmv(&x[..n])?;
    sys.c2.spmv_add(-1.0, &x[n..n + m], &mut cr);
    Ok(InterfaceSolution {
        u: x[..n].to_vec(),
        u2: x[n..n + m].to_vec(),
        lambda: x[n + m..].to_vec(),
        report,
        original_residual,
        constraint_residual: norm_inf(&cr),
    })
}

/// As [`run_solver`], failing with `NonConvergence` when the iteration cap is hit.
pub fn solve_system(sys: &SaddleSystem, spec: &PreconditionerSpec) -> Result<InterfaceSolution> {
    let sol = run_solver(sys, spec)?;
    if !sol.report.converged {
        return Err(Error::NonConvergence {
            iterations: sol.report.iterations,
            residual: sol.report.final_residual(),
        });
    }
    Ok(sol)
}

/// Assembles the configuration and solves it.
pub fn solve_interface_problem(
    cfg: &ProblemConfig,
    spec: &PreconditionerSpec,
) -> Result<InterfaceSolution> {
    let sys = build_saddle_system(cfg)?;
    solve_system(&sys, spec)
}
