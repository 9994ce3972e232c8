//! Fictitious-domain distributed Lagrange multiplier discretizations and
//! augmented Lagrangian preconditioners for interface problems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod al;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod io;
pub mod krylov;
pub mod linalg;
pub mod mesh;
pub mod spectral;

pub use error::{Error, Result};
pub use linalg::{CsrMatrix, DenseMatrix, EigenResult};
