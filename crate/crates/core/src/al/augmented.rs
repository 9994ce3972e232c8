//! The augmented system obtained by adding weighted multiples of the
//! constraint row `Cu − C₂u₂ = 0` to the two leading block rows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::SaddleSystem;
use crate::krylov::LinearOperator;
use crate::linalg::vector::dot;
use crate::linalg::{sparse_triple_diag, CsrMatrix, DenseMatrix, SkylineCholesky};

/// Representation of the augmentation weight `W`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WMode {
    /// `W = M²`, applied through two Cholesky solves with `M`.
    #[default]
    ExactMSquared,
    /// `W = diag(M²)`, the row sums of the squared entries of `M`.
    Diag,
}

/// The four leading blocks of the augmented operator.
#[derive(Clone, Debug)]
pub struct AugmentedBlocks {
    pub a11: CsrMatrix,
    pub a12: CsrMatrix,
    pub a21: CsrMatrix,
    pub a22: CsrMatrix,
}

impl AugmentedBlocks {
    /// `[[A11, A12], [A21, A22]]`.
    pub fn top(&self) -> CsrMatrix {
        CsrMatrix::block(&[
            vec![Some(&self.a11), Some(&self.a12)],
            vec![Some(&self.a21), Some(&self.a22)],
        ])
        .expect("block shapes agree by construction")
    }
}

#[derive(Clone, Debug)]
enum WRep {
    Exact(SkylineCholesky),
    Diag(Vec<f64>),
}

/// Augmented operator
/// `[[A11, A12, Cᵀ], [A21, A22, −C₂ᵀ], [C, −C₂, 0]]` with
/// `A11 = A + γ₁CᵀW⁻¹C`, `A12 = −γ₁CᵀW⁻¹C₂`, `A21 = −γ₂C₂ᵀW⁻¹C`,
/// `A22 = A₂ + γ₂C₂ᵀW⁻¹C₂`. The right-hand side is that of the original system.
#[derive(Clone, Debug)]
pub struct AugmentedSystem<'a> {
    sys: &'a SaddleSystem,
    gamma1: f64,
    gamma2: f64,
    w_mode: WMode,
    w: WRep,
    blocks: Option<AugmentedBlocks>,
}

/// `diag(M²)_k = Σ_j M_kj²`.
pub fn diag_m_squared(m: &CsrMatrix) -> Vec<f64> {
    (0..m.rows())
        .map(|k| m.row(k).1.iter().map(|v| v * v).sum())
        .collect()
}

impl<'a> AugmentedSystem<'a> {
    /// Builds the augmentation; the blocks are stored as CSR in diagonal mode
    /// and materialized on request in exact mode.
    pub fn new(sys: &'a SaddleSystem, gamma1: f64, gamma2: f64, w_mode: WMode) -> Result<Self> {
        if !(gamma1 >= 0.0 && gamma2 >= 0.0 && gamma1.is_finite() && gamma2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "augmentation parameters must be finite and nonnegative, got ({gamma1}, {gamma2})"
            )));
        }
        let w = match w_mode {
            WMode::ExactMSquared => WRep::Exact(SkylineCholesky::new(&sys.m)?),
            WMode::Diag => WRep::Diag(diag_m_squared(&sys.m)),
        };
        let mut aug = Self {
            sys,
            gamma1,
            gamma2,
            w_mode,
            w,
            blocks: None,
        };
        if w_mode == WMode::Diag {
            aug.blocks = Some(aug.diag_blocks()?);
        }
        Ok(aug)
    }

    pub fn system(&self) -> &'a SaddleSystem {
        self.sys
    }

    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }

    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    pub fn w_mode(&self) -> WMode {
        self.w_mode
    }

    /// Total size `n + m + ℓ`.
    pub fn size(&self) -> usize {
        self.sys.size()
    }

    /// `(f, g, 0)`.
    pub fn rhs(&self) -> Vec<f64> {
        self.sys.rhs()
    }

    /// `W⁻¹ r` for a multiplier-space vector.
    pub fn apply_w_inv(&self, r: &[f64], out: &mut [f64]) {
        match &self.w {
            WRep::Exact(chol) => {
                let mut t = vec![0.0; r.len()];
                chol.solve_into(r, &mut t);
                chol.solve_into(&t, out);
            }
            WRep::Diag(d) => {
                for ((o, ri), di) in out.iter_mut().zip(r).zip(d) {
                    *o = ri / di;
                }
            }
        }
    }

    /// The diagonal of `W` in diagonal mode, `None` otherwise.
    pub fn w_diagonal(&self) -> Option<&[f64]> {
        match &self.w {
            WRep::Diag(d) => Some(d),
            WRep::Exact(_) => None,
        }
    }

    /// Stored blocks in diagonal mode.
    pub fn stored_blocks(&self) -> Option<&AugmentedBlocks> {
        self.blocks.as_ref()
    }

    /// The four leading blocks as CSR. In exact mode the augmented terms are
    /// dense on the columns of `C` that meet the immersed mesh.
    pub fn blocks(&self) -> Result<AugmentedBlocks> {
        match &self.blocks {
            Some(b) => Ok(b.clone()),
            None => self.exact_blocks(),
        }
    }

    fn diag_blocks(&self) -> Result<AugmentedBlocks> {
        let sys = self.sys;
        let d = match &self.w {
            WRep::Diag(d) => d,
            WRep::Exact(_) => unreachable!("diagonal blocks requested in exact mode"),
        };
        let ct = sys.c.transpose();
        let c2t = sys.c2.transpose();
        let a11 =
            sys.a
                .linear_combination(1.0, &sparse_triple_diag(&ct, d, &sys.c)?, self.gamma1)?;
        let a12 = sparse_triple_diag(&ct, d, &sys.c2)?.scaled(-self.gamma1);
        let a21 = sparse_triple_diag(&c2t, d, &sys.c)?.scaled(-self.gamma2);
        let a22 =
            sys.a2
                .linear_combination(1.0, &sparse_triple_diag(&c2t, d, &sys.c2)?, self.gamma2)?;
        Ok(AugmentedBlocks { a11, a12, a21, a22 })
    }

    /// With `C₂ = M` and `W = M²` the blocks reduce to `A + γ₁GᵀG`, `−γ₁Gᵀ`,
    /// `−γ₂G` and `A₂ + γ₂I`, where `G = M⁻¹C`.
    fn exact_blocks(&self) -> Result<AugmentedBlocks> {
        let sys = self.sys;
        let chol = match &self.w {
            WRep::Exact(c) => c,
            WRep::Diag(_) => unreachable!("exact blocks requested in diagonal mode"),
        };
        if sys.c2 != sys.m {
            return Err(Error::InvalidArgument(
                "exact augmentation requires the immersed coupling to equal the multiplier mass matrix".into(),
            ));
        }
        let (n, m, l) = (sys.n(), sys.m_dim(), sys.l());
        let ct = sys.c.transpose();
        let cols: Vec<usize> = (0..n).filter(|&j| !ct.row(j).0.is_empty()).collect();
        // Row a of `gt` is column cols[a] of G.
        let gt: Vec<Vec<f64>> = cols
            .par_iter()
            .map(|&j| {
                let mut rhs = vec![0.0; l];
                let (idx, val) = ct.row(j);
                for (k, v) in idx.iter().zip(val) {
                    rhs[*k] = *v;
                }
                let mut g = vec![0.0; l];
                chol.solve_into(&rhs, &mut g);
                g
            })
            .collect();
        let gram: Vec<Vec<f64>> = (0..cols.len())
            .into_par_iter()
            .map(|a| (0..cols.len()).map(|b| dot(&gt[a], &gt[b])).collect())
            .collect();

        let mut t11 = Vec::with_capacity(sys.a.nnz() + cols.len() * cols.len());
        push_csr(&sys.a, 1.0, &mut t11);
        for (a, row) in gram.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                t11.push((cols[a], cols[b], self.gamma1 * v));
            }
        }
        let mut t12 = Vec::with_capacity(cols.len() * l);
        let mut t21 = Vec::with_capacity(cols.len() * l);
        for (a, g) in gt.iter().enumerate() {
            for (k, v) in g.iter().enumerate() {
                t12.push((cols[a], k, -self.gamma1 * v));
                t21.push((k, cols[a], -self.gamma2 * v));
            }
        }
        let mut t22 = Vec::with_capacity(sys.a2.nnz() + m);
        push_csr(&sys.a2, 1.0, &mut t22);
        t22.extend((0..m).map(|i| (i, i, self.gamma2)));
        Ok(AugmentedBlocks {
            a11: CsrMatrix::from_triplets(n, n, &t11)?,
            a12: CsrMatrix::from_triplets(n, m, &t12)?,
            a21: CsrMatrix::from_triplets(m, n, &t21)?,
            a22: CsrMatrix::from_triplets(m, m, &t22)?,
        })
    }

    /// Dense copy of the full augmented operator, for small oracles.
    pub fn to_dense(&self) -> Result<DenseMatrix> {
        let size = self.size();
        let mut out = DenseMatrix::zeros(size, size);
        let mut e = vec![0.0; size];
        let mut col = vec![0.0; size];
        for j in 0..size {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            out.set_column(j, &col);
            e[j] = 0.0;
        }
        Ok(out)
    }
}

fn push_csr(a: &CsrMatrix, alpha: f64, t: &mut Vec<(usize, usize, f64)>) {
    for i in 0..a.rows() {
        let (idx, val) = a.row(i);
        t.extend(idx.iter().zip(val).map(|(j, v)| (i, *j, alpha * v)));
    }
}

impl LinearOperator for AugmentedSystem<'_> {
    fn dim(&self) -> usize {
        self.size()
    }

    /// Matrix-free product: the augmented rows add `±γ·(C or C₂)ᵀW⁻¹(Cu − C₂u₂)`.
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let sys = self.sys;
        let (n, m) = (sys.n(), sys.m_dim());
        sys.apply(x, y);
        let (g1, g2) = (self.gamma1, self.gamma2);
        if g1 == 0.0 && g2 == 0.0 {
            return;
        }
        let mut t = vec![0.0; sys.l()];
        self.apply_w_inv(&y[n + m..], &mut t);
        let (yu, rest) = y.split_at_mut(n);
        let y2 = &mut rest[..m];
        sys.c.transpose_spmv_add(g1, &t, yu);
        sys.c2.transpose_spmv_add(-g2, &t, y2);
    }
}

impl LinearOperator for SaddleSystem {
    fn dim(&self) -> usize {
        self.size()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        SaddleSystem::apply(self, x, y)
    }
}
