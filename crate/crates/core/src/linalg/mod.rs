//! Dense and sparse linear algebra kernels.

pub mod dense;
pub mod eig;
pub mod skyline;
pub mod sparse;
pub mod vector;

pub use dense::{Cholesky, DenseMatrix, LuFactorization};
pub use eig::{gen_sym_eig, nonsym_eig, sym_eig, EigenResult};
pub use skyline::{reverse_cuthill_mckee, SkylineCholesky};
pub use sparse::{sparse_triple_diag, CsrMatrix};
