//! Block upper-triangular preconditioners: ideal augmented Lagrangian,
//! modified augmented Lagrangian and the unaugmented baseline.

use serde::{Deserialize, Serialize};

use super::augmented::AugmentedSystem;
use crate::error::{Error, Result};
use crate::fem::SaddleSystem;
use crate::krylov::{
    amg_setup, cg_solve_into, AmgHierarchy, AmgOptions, GmresOptions, InnerStats, Preconditioner,
};
use crate::linalg::{CsrMatrix, LuFactorization, SkylineCholesky};

use super::WMode;

/// Which preconditioner drives the outer iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecVariant {
    /// `[[A_γ, Bᵀ], [0, −W/γ]]` with exact solves for `A_γ`.
    IdealAl,
    /// As `IdealAl` with `A_γ` solved by CG and block-diagonal AMG.
    InexactAl,
    /// `[[A11, A12, Cᵀ], [0, A22, −C₂ᵀ], [0, 0, −W/γ₁]]`.
    MalDiag,
    /// `[[A, 0, Cᵀ], [0, K]]` with `K = [[A₂, −C₂ᵀ], [−C₂, 0]]` on the
    /// unaugmented system.
    BaselineTriangular,
    /// Unpreconditioned, on the augmented system when `γ₁` or `γ₂` is nonzero.
    None,
}

/// How a diagonal block is inverted inside a preconditioner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSolver {
    /// Sparse Cholesky.
    Exact,
    /// CG preconditioned by one AMG V-cycle, to `inner_rtol`.
    CgAmg,
}

/// Preconditioner choice with its parameters and the outer solver settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreconditionerSpec {
    pub variant: PrecVariant,
    pub gamma1: f64,
    pub gamma2: f64,
    pub w_mode: WMode,
    pub inner: InnerSolver,
    pub inner_rtol: f64,
    pub inner_maxit: usize,
    pub outer: GmresOptions,
}

/// Default augmentation for the ideal preconditioner.
pub const DEFAULT_GAMMA: f64 = 10.0;
/// Default `γ₁` for the modified preconditioner.
pub const DEFAULT_GAMMA1: f64 = 10.0;
/// Default `γ₂` for the modified preconditioner.
pub const DEFAULT_GAMMA2: f64 = 1e-2;
/// `γ₂` used for small coefficient jumps.
pub const SMALL_JUMP_GAMMA2: f64 = 1e-3;

impl PreconditionerSpec {
    fn base(
        variant: PrecVariant,
        gamma1: f64,
        gamma2: f64,
        w_mode: WMode,
        inner: InnerSolver,
    ) -> Self {
        Self {
            variant,
            gamma1,
            gamma2,
            w_mode,
            inner,
            inner_rtol: 1e-2,
            inner_maxit: 200,
            outer: GmresOptions::default(),
        }
    }

    /// Exact `W = M²` and exact `A_γ` solves.
    pub fn ideal_al(gamma: f64) -> Self {
        Self::base(
            PrecVariant::IdealAl,
            gamma,
            gamma,
            WMode::ExactMSquared,
            InnerSolver::Exact,
        )
    }

    /// `W = diag(M²)` and CG with block-diagonal AMG for `A_γ`.
    pub fn inexact_al(gamma: f64) -> Self {
        Self::base(
            PrecVariant::InexactAl,
            gamma,
            gamma,
            WMode::Diag,
            InnerSolver::CgAmg,
        )
    }

    /// `W = diag(M²)` in system and preconditioner, CG with AMG per block.
    pub fn mal_diag(gamma1: f64, gamma2: f64) -> Self {
        Self::base(
            PrecVariant::MalDiag,
            gamma1,
            gamma2,
            WMode::Diag,
            InnerSolver::CgAmg,
        )
    }

    /// Modified preconditioner with the default `γ₂`, or the small-jump value
    /// when `β₂ ≤ 10`.
    pub fn mal_diag_default(beta2: f64) -> Self {
        let g2 = if beta2 <= 10.0 {
            SMALL_JUMP_GAMMA2
        } else {
            DEFAULT_GAMMA2
        };
        Self::mal_diag(DEFAULT_GAMMA1, g2)
    }

    /// Block-triangular baseline with GMRES(50).
    pub fn baseline() -> Self {
        let mut s = Self::base(
            PrecVariant::BaselineTriangular,
            0.0,
            0.0,
            WMode::ExactMSquared,
            InnerSolver::Exact,
        );
        s.outer.restart = 50;
        s
    }

    pub fn unpreconditioned() -> Self {
        Self::base(
            PrecVariant::None,
            0.0,
            0.0,
            WMode::ExactMSquared,
            InnerSolver::Exact,
        )
    }

    /// Short label used in tables.
    pub fn label(&self) -> &'static str {
        match self.variant {
            PrecVariant::IdealAl => "ideal_al",
            PrecVariant::InexactAl => "inexact_al",
            PrecVariant::MalDiag => "mal_diag",
            PrecVariant::BaselineTriangular => "baseline_triangular",
            PrecVariant::None => "none",
        }
    }

    /// Checks that the parameters required by the variant are present.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let o = &self.outer;
        if o.restart == 0 || o.maxit == 0 || !(o.rtol >= 0.0) || !(o.atol >= 0.0) {
            return bad(format!("invalid outer solver settings {o:?}"));
        }
        if self.inner == InnerSolver::CgAmg
            && (!(self.inner_rtol > 0.0 && self.inner_rtol < 1.0) || self.inner_maxit == 0)
        {
            return bad(format!(
                "inner tolerance {} and iteration cap {} are invalid",
                self.inner_rtol, self.inner_maxit
            ));
        }
        match self.variant {
            PrecVariant::IdealAl | PrecVariant::InexactAl => {
                if !(self.gamma1 > 0.0) || self.gamma1 != self.gamma2 {
                    return bad(format!(
                        "the ideal preconditioner needs γ₁ = γ₂ > 0, got ({}, {})",
                        self.gamma1, self.gamma2
                    ));
                }
                if self.variant == PrecVariant::IdealAl && self.inner != InnerSolver::Exact {
                    return bad("the ideal preconditioner uses exact block solves".into());
                }
                if self.variant == PrecVariant::InexactAl
                    && (self.inner != InnerSolver::CgAmg || self.w_mode != WMode::Diag)
                {
                    return bad(
                        "the inexact preconditioner uses CG with AMG and W = diag(M²)".into(),
                    );
                }
            }
            PrecVariant::MalDiag => {
                if !(self.gamma1 > 0.0 && self.gamma2 > 0.0) {
                    return bad(format!(
                        "the modified preconditioner needs γ₁, γ₂ > 0, got ({}, {})",
                        self.gamma1, self.gamma2
                    ));
                }
                if self.inner == InnerSolver::CgAmg && self.w_mode != WMode::Diag {
                    return bad("AMG inner solves need the sparse blocks of W = diag(M²)".into());
                }
            }
            PrecVariant::BaselineTriangular => {
                if self.gamma1 != 0.0 || self.gamma2 != 0.0 {
                    return bad("the baseline acts on the unaugmented system".into());
                }
            }
            PrecVariant::None => {
                if !(self.gamma1 >= 0.0
                    && self.gamma2 >= 0.0
                    && self.gamma1.is_finite()
                    && self.gamma2.is_finite())
                {
                    return bad(format!(
                        "augmentation parameters must be finite and nonnegative, got ({}, {})",
                        self.gamma1, self.gamma2
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Inversion of one symmetric positive definite block.
pub enum BlockSolver {
    Direct(SkylineCholesky),
    Iterative {
        a: CsrMatrix,
        amg: Box<AmgHierarchy>,
        rtol: f64,
        maxit: usize,
    },
}

impl BlockSolver {
    pub fn new(a: CsrMatrix, inner: InnerSolver, rtol: f64, maxit: usize) -> Result<Self> {
        Ok(match inner {
            InnerSolver::Exact => Self::Direct(SkylineCholesky::new(&a)?),
            InnerSolver::CgAmg => {
                let amg = Box::new(amg_setup(&a, AmgOptions::default())?);
                Self::Iterative {
                    a,
                    amg,
                    rtol,
                    maxit,
                }
            }
        })
    }

    /// Solves into `x`; returns the iteration count and convergence flag
    /// (zero iterations for direct solves).
    pub fn solve(&mut self, b: &[f64], x: &mut [f64]) -> (usize, bool) {
        match self {
            Self::Direct(chol) => {
                chol.solve_into(b, x);
                (0, true)
            }
            Self::Iterative {
                a,
                amg,
                rtol,
                maxit,
            } => match cg_solve_into(&*a, b, amg.as_mut(), *rtol, *maxit, x, None) {
                Ok(out) => (out.iterations, out.converged),
                Err(_) => (*maxit, false),
            },
        }
    }

    pub fn is_direct(&self) -> bool {
        matches!(self, Self::Direct(_))
    }
}

/// One V-cycle on each of two diagonal blocks.
pub struct BlockDiagonalAmg {
    split: usize,
    first: AmgHierarchy,
    second: AmgHierarchy,
}

impl BlockDiagonalAmg {
    pub fn new(a11: &CsrMatrix, a22: &CsrMatrix) -> Result<Self> {
        let opts = AmgOptions::default();
        Ok(Self {
            split: a11.rows(),
            first: amg_setup(a11, opts)?,
            second: amg_setup(a22, opts)?,
        })
    }
}

impl Preconditioner for BlockDiagonalAmg {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        let (r1, r2) = r.split_at(self.split);
        let (z1, z2) = z.split_at_mut(self.split);
        self.first.apply(r1, z1);
        self.second.apply(r2, z2);
    }
}

enum TopSolver {
    Direct(SkylineCholesky),
    Iterative {
        a: CsrMatrix,
        prec: Box<BlockDiagonalAmg>,
        rtol: f64,
        maxit: usize,
    },
}

/// Ideal augmented Lagrangian preconditioner: `z_λ = −γW⁻¹r_λ`, then
/// `A_γ z_top = r_top − Bᵀz_λ`.
pub struct IdealAlPreconditioner<'a> {
    aug: &'a AugmentedSystem<'a>,
    top: TopSolver,
    stats: InnerStats,
}

impl<'a> IdealAlPreconditioner<'a> {
    pub fn new(
        aug: &'a AugmentedSystem<'a>,
        inner: InnerSolver,
        rtol: f64,
        maxit: usize,
    ) -> Result<Self> {
        if aug.gamma1() != aug.gamma2() || !(aug.gamma1() > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "the ideal preconditioner needs γ₁ = γ₂ > 0, got ({}, {})",
                aug.gamma1(),
                aug.gamma2()
            )));
        }
        let blocks = aug.blocks()?;
        let top = match inner {
            InnerSolver::Exact => TopSolver::Direct(SkylineCholesky::new(&blocks.top())?),
            InnerSolver::CgAmg => TopSolver::Iterative {
                prec: Box::new(BlockDiagonalAmg::new(&blocks.a11, &blocks.a22)?),
                a: blocks.top(),
                rtol,
                maxit,
            },
        };
        Ok(Self {
            aug,
            top,
            stats: InnerStats::default(),
        })
    }
}

impl Preconditioner for IdealAlPreconditioner<'_> {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        let sys = self.aug.system();
        let (n, m) = (sys.n(), sys.m_dim());
        let gamma = self.aug.gamma1();
        let (r_top, r_l) = r.split_at(n + m);
        let (z_top, z_l) = z.split_at_mut(n + m);
        let mut y = vec![0.0; r_l.len()];
        self.aug.apply_w_inv(r_l, &mut y);
        y.iter_mut().for_each(|v| *v *= gamma);
        let mut rhs = r_top.to_vec();
        {
            let (ru, r2) = rhs.split_at_mut(n);
            sys.c.transpose_spmv_add(1.0, &y, ru);
            sys.c2.transpose_spmv_add(-1.0, &y, r2);
        }
        match &mut self.top {
            TopSolver::Direct(chol) => chol.solve_into(&rhs, z_top),
            TopSolver::Iterative {
                a,
                prec,
                rtol,
                maxit,
            } => match cg_solve_into(&*a, &rhs, prec.as_mut(), *rtol, *maxit, z_top, None) {
                Ok(out) => self.stats.record(out.iterations, out.converged),
                Err(_) => self.stats.record(*maxit, false),
            },
        }
        for (zi, yi) in z_l.iter_mut().zip(&y) {
            *zi = -yi;
        }
    }

    fn inner_stats(&self) -> InnerStats {
        self.stats
    }
}

/// Modified augmented Lagrangian preconditioner solved by back substitution:
/// `z_λ = −γ₁W⁻¹r_λ`, `A22 z₂ = r₂ + C₂ᵀz_λ`, `A11 z₁ = r₁ − A12 z₂ − Cᵀz_λ`.
pub struct MalPreconditioner<'a> {
    aug: &'a AugmentedSystem<'a>,
    a12: CsrMatrix,
    s11: BlockSolver,
    s22: BlockSolver,
    stats11: InnerStats,
    stats22: InnerStats,
}

impl<'a> MalPreconditioner<'a> {
    pub fn new(
        aug: &'a AugmentedSystem<'a>,
        inner: InnerSolver,
        rtol: f64,
        maxit: usize,
    ) -> Result<Self> {
        let blocks = aug.blocks()?;
        Ok(Self {
            aug,
            a12: blocks.a12,
            s11: BlockSolver::new(blocks.a11, inner, rtol, maxit)?,
            s22: BlockSolver::new(blocks.a22, inner, rtol, maxit)?,
            stats11: InnerStats::default(),
            stats22: InnerStats::default(),
        })
    }

    /// Inner counters of the `A22` solves.
    pub fn inner_stats_22(&self) -> InnerStats {
        self.stats22
    }
}

impl Preconditioner for MalPreconditioner<'_> {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        let sys = self.aug.system();
        let (n, m) = (sys.n(), sys.m_dim());
        let (r1, rest) = r.split_at(n);
        let (r2, rl) = rest.split_at(m);
        let (z1, rest) = z.split_at_mut(n);
        let (z2, zl) = rest.split_at_mut(m);
        self.aug.apply_w_inv(rl, zl);
        let g1 = self.aug.gamma1();
        zl.iter_mut().for_each(|v| *v *= -g1);

        let mut b2 = r2.to_vec();
        sys.c2.transpose_spmv_add(1.0, zl, &mut b2);
        let (its, ok) = self.s22.solve(&b2, z2);
        if !self.s22.is_direct() {
            self.stats22.record(its, ok);
        }

        let mut b1 = r1.to_vec();
        self.a12.spmv_add(-1.0, z2, &mut b1);
        sys.c.transpose_spmv_add(-1.0, zl, &mut b1);
        let (its, ok) = self.s11.solve(&b1, z1);
        if !self.s11.is_direct() {
            self.stats11.record(its, ok);
        }
    }

    fn inner_stats(&self) -> InnerStats {
        self.stats11
    }
}

/// Block upper-triangular baseline on the unaugmented system: the coupled
/// `(u₂, λ)` block is factored by dense LU, then `A z₁ = r₁ − Cᵀz_λ`.
pub struct BaselinePreconditioner<'a> {
    sys: &'a SaddleSystem,
    a: SkylineCholesky,
    k: LuFactorization,
    /// Symmetric equilibration `D` with `K̂ = DKD`.
    scale: Vec<f64>,
}

impl<'a> BaselinePreconditioner<'a> {
    pub fn new(sys: &'a SaddleSystem) -> Result<Self> {
        let c2t = sys.c2.transpose().scaled(-1.0);
        let c2n = sys.c2.scaled(-1.0);
        let k = CsrMatrix::block(&[vec![Some(&sys.a2), Some(&c2t)], vec![Some(&c2n), None]])?;
        // Unit diagonal on the A₂ block and unit coupling diagonal on the
        // multiplier block; the Schur complement is otherwise tiny for large β₂.
        let d2: Vec<f64> = sys
            .a2
            .diagonal()
            .iter()
            .map(|v| 1.0 / v.abs().sqrt())
            .collect();
        let dl: Vec<f64> = sys
            .c2
            .diagonal()
            .iter()
            .zip(&d2)
            .map(|(c, d)| 1.0 / (c.abs() * d))
            .collect();
        let scale: Vec<f64> = d2.into_iter().chain(dl).collect();
        if scale.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix {
                column: 0,
                pivot: 0.0,
            });
        }
        let mut kd = k.to_dense();
        for i in 0..kd.rows() {
            for (j, v) in kd.row_mut(i).iter_mut().enumerate() {
                *v *= scale[i] * scale[j];
            }
        }
        Ok(Self {
            sys,
            a: SkylineCholesky::new(&sys.a)?,
            k: kd.lu()?,
            scale,
        })
    }
}

impl Preconditioner for BaselinePreconditioner<'_> {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        let n = self.sys.n();
        let (r1, rk) = r.split_at(n);
        let (z1, zk) = z.split_at_mut(n);
        let scaled: Vec<f64> = rk.iter().zip(&self.scale).map(|(a, b)| a * b).collect();
        let sol = self
            .k
            .solve(&scaled)
            .expect("dimensions fixed at construction");
        for ((zi, yi), di) in zk.iter_mut().zip(&sol).zip(&self.scale) {
            *zi = yi * di;
        }
        let zl = &zk[self.sys.m_dim()..];
        let mut b1 = r1.to_vec();
        self.sys.c.transpose_spmv_add(-1.0, zl, &mut b1);
        self.a.solve_into(&b1, z1);
    }
}
