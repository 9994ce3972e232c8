//! Augmented Lagrangian reformulation of the saddle system, its block
//! preconditioners and the outer Krylov driver.

mod augmented;
mod precond;
mod solve;

pub use augmented::{diag_m_squared, AugmentedBlocks, AugmentedSystem, WMode};
pub use precond::{
    BaselinePreconditioner, BlockDiagonalAmg, BlockSolver, IdealAlPreconditioner, InnerSolver,
    MalPreconditioner, PrecVariant, PreconditionerSpec, DEFAULT_GAMMA, DEFAULT_GAMMA1,
    DEFAULT_GAMMA2, SMALL_JUMP_GAMMA2,
};
pub use solve::{run_solver, solve_interface_problem, solve_system, InterfaceSolution};
