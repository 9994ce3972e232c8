//! Dense spectral diagnostics: preconditioned spectra, the Rayleigh-quotient
//! form of the nonunit eigenvalues, the algebraic inf-sup pencil, the
//! Sherman–Morrison–Woodbury identity behind the modified preconditioner,
//! its lower-block spectrum and the `−LA₂` limit.

mod assignment;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use assignment::{matched_distance, min_cost_assignment};

use crate::al::{
    diag_m_squared, AugmentedSystem, BaselinePreconditioner, IdealAlPreconditioner, InnerSolver,
    MalPreconditioner, PrecVariant, PreconditionerSpec, WMode,
};
use crate::error::{Error, Result};
use crate::fem::SaddleSystem;
use crate::krylov::{LinearOperator, Preconditioner};
use crate::linalg::vector::dot;
use crate::linalg::{gen_sym_eig, nonsym_eig, sym_eig, CsrMatrix, DenseMatrix, SkylineCholesky};

/// Largest system order materialized densely.
pub const DENSE_LIMIT: usize = 2000;
/// Eigenvalues within this distance of one count as unit eigenvalues.
pub const UNIT_TOL: f64 = 1e-6;
/// Relative threshold separating zero from positive pencil eigenvalues.
pub const ZERO_TOL: f64 = 1e-10;

/// Parameters of the operator whose spectrum was computed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMetadata {
    pub label: String,
    pub gamma1: f64,
    pub gamma2: f64,
    pub beta: f64,
    pub beta2: f64,
    pub n: usize,
    pub m: usize,
    pub l: usize,
}

impl SpectrumMetadata {
    fn new(label: &str, sys: &SaddleSystem, gamma1: f64, gamma2: f64) -> Self {
        Self {
            label: label.to_string(),
            gamma1,
            gamma2,
            beta: sys.beta,
            beta2: sys.beta2,
            n: sys.n(),
            m: sys.m_dim(),
            l: sys.l(),
        }
    }
}

/// Eigenvalues with the summary quantities used by the spectral checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    /// Eigenvalues with `|λ − 1| ≤ UNIT_TOL`.
    pub count_at_one: usize,
    /// Smallest real part among eigenvalues with `Re λ < 1 − UNIT_TOL`, or
    /// the smallest real part overall when there is none.
    pub eta: f64,
    pub max_imag: f64,
    pub metadata: SpectrumMetadata,
}

impl SpectrumReport {
    pub fn from_eigenvalues(eigenvalues: Vec<Complex64>, metadata: SpectrumMetadata) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let count_at_one = eigenvalues
            .iter()
            .filter(|z| (*z - one).norm() <= UNIT_TOL)
            .count();
        let min_re = eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::INFINITY, f64::min);
        let eta = eigenvalues
            .iter()
            .map(|z| z.re)
            .filter(|re| *re < 1.0 - UNIT_TOL)
            .fold(f64::INFINITY, f64::min);
        let max_imag = eigenvalues.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        Self {
            eigenvalues,
            count_at_one,
            eta: if eta.is_finite() { eta } else { min_re },
            max_imag,
            metadata,
        }
    }

    /// Fraction of eigenvalues with `|λ − 1| < radius`.
    pub fn fraction_within(&self, radius: f64) -> f64 {
        if self.eigenvalues.is_empty() {
            return 0.0;
        }
        let one = Complex64::new(1.0, 0.0);
        let k = self
            .eigenvalues
            .iter()
            .filter(|z| (*z - one).norm() < radius)
            .count();
        k as f64 / self.eigenvalues.len() as f64
    }

    pub fn min_real(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_real(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The eigenvalue of largest real part.
    pub fn rightmost(&self) -> Option<Complex64> {
        self.eigenvalues
            .iter()
            .copied()
            .max_by(|a, b| a.re.total_cmp(&b.re))
    }
}

/// Result of the algebraic inf-sup pencil `Bᵀ(h₂²M)⁻¹B v = σ (Ã + M̃₂) v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfSupReport {
    /// Smallest eigenvalue above the zero threshold.
    pub sigma1: f64,
    /// Eigenvalues at or below the zero threshold.
    pub zero_count: usize,
    /// Lower constant `c₁ = h₂²/λ_max(M)` in `wᵀM⁻²w ≥ c₁ h₂⁻² wᵀM⁻¹w`.
    pub equivalence_lower: f64,
    /// `θ̄² = c₁ σ₁`, the inf-sup constant measured with `W = M²`.
    pub theta_bar_sq: f64,
}

impl InfSupReport {
    /// `γθ̄²/(1 + γθ̄²)`.
    pub fn eta_bound(&self, gamma: f64) -> f64 {
        gamma * self.theta_bar_sq / (1.0 + gamma * self.theta_bar_sq)
    }
}

fn check_size(size: usize) -> Result<()> {
    if size > DENSE_LIMIT {
        return Err(Error::SizeLimit {
            size,
            limit: DENSE_LIMIT,
        });
    }
    Ok(())
}

/// Dense `Op` built column by column.
fn materialize(op: &dyn LinearOperator) -> DenseMatrix {
    let n = op.dim();
    let mut out = DenseMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        out.set_column(j, &col);
        e[j] = 0.0;
    }
    out
}

/// Dense right-preconditioned `Op P⁻¹ = I + (Op − P)P⁻¹` for a
/// preconditioner that agrees with the operator outside the trailing rows
/// `start..`, where `Op − P` equals `defect`. The leading rows are exact
/// identity rows, so the unit eigenvalues carry no solve round-off.
fn materialize_right(
    prec: &mut dyn Preconditioner,
    start: usize,
    defect: &CsrMatrix,
) -> DenseMatrix {
    let size = defect.cols();
    debug_assert_eq!(start + defect.rows(), size);
    let mut out = DenseMatrix::identity(size);
    let mut e = vec![0.0; size];
    let mut z = vec![0.0; size];
    let mut t = vec![0.0; defect.rows()];
    for j in 0..size {
        e[j] = 1.0;
        prec.apply(&e, &mut z);
        defect.spmv_into(&z, &mut t);
        for (k, v) in t.iter().enumerate() {
            out[(start + k, j)] += v;
        }
        e[j] = 0.0;
    }
    out
}

/// `W` as CSR.
fn sparse_w(sys: &SaddleSystem, w_mode: WMode) -> Result<CsrMatrix> {
    match w_mode {
        WMode::ExactMSquared => sys.m.matmul(&sys.m),
        WMode::Diag => Ok(CsrMatrix::from_diagonal(&diag_m_squared(&sys.m))),
    }
}

/// Dense right-preconditioned operator `Op P⁻¹` for a spectrum computation
/// (similar to `P⁻¹Op`). Inner solves are always exact; the baseline acts on
/// the unaugmented system.
pub fn preconditioned_matrix(sys: &SaddleSystem, spec: &PreconditionerSpec) -> Result<DenseMatrix> {
    check_size(sys.size())?;
    let mut checked = *spec;
    if checked.variant == PrecVariant::MalDiag {
        checked.inner = InnerSolver::Exact;
    }
    checked.validate()?;
    let (n, m, l) = (sys.n(), sys.m_dim(), sys.l());
    let neg_c2 = sys.c2.scaled(-1.0);
    match spec.variant {
        PrecVariant::None => {
            let aug = AugmentedSystem::new(sys, spec.gamma1, spec.gamma2, spec.w_mode)?;
            Ok(materialize(&aug))
        }
        PrecVariant::BaselineTriangular => {
            // The multiplier rows of P omit C.
            let zero = CsrMatrix::zeros(l, m + l);
            let defect = CsrMatrix::block(&[vec![Some(&sys.c), Some(&zero)]])?;
            let mut prec = BaselinePreconditioner::new(sys)?;
            Ok(materialize_right(&mut prec, n + m, &defect))
        }
        PrecVariant::IdealAl | PrecVariant::InexactAl => {
            let aug = AugmentedSystem::new(sys, spec.gamma1, spec.gamma2, spec.w_mode)?;
            let w = sparse_w(sys, spec.w_mode)?.scaled(1.0 / spec.gamma1);
            let defect = CsrMatrix::block(&[vec![Some(&sys.c), Some(&neg_c2), Some(&w)]])?;
            let mut prec = IdealAlPreconditioner::new(
                &aug,
                InnerSolver::Exact,
                spec.inner_rtol,
                spec.inner_maxit,
            )?;
            Ok(materialize_right(&mut prec, n + m, &defect))
        }
        PrecVariant::MalDiag => {
            let aug = AugmentedSystem::new(sys, spec.gamma1, spec.gamma2, spec.w_mode)?;
            let a21 = aug.blocks()?.a21;
            let w = sparse_w(sys, spec.w_mode)?.scaled(1.0 / spec.gamma1);
            let zero = CsrMatrix::zeros(m, m + l);
            // The immersed rows of P omit A21; the multiplier rows omit B.
            let upper = CsrMatrix::block(&[vec![Some(&a21), Some(&zero)]])?;
            let lower = CsrMatrix::block(&[vec![Some(&sys.c), Some(&neg_c2), Some(&w)]])?;
            let defect = CsrMatrix::block(&[vec![Some(&upper)], vec![Some(&lower)]])?;
            let mut prec = MalPreconditioner::new(
                &aug,
                InnerSolver::Exact,
                spec.inner_rtol,
                spec.inner_maxit,
            )?;
            Ok(materialize_right(&mut prec, n, &defect))
        }
    }
}

/// Spectrum of the preconditioned operator (the raw augmented operator for
/// the unpreconditioned variant).
pub fn preconditioned_spectrum(
    sys: &SaddleSystem,
    spec: &PreconditionerSpec,
) -> Result<SpectrumReport> {
    let mat = preconditioned_matrix(sys, spec)?;
    let eig = nonsym_eig(&mat, false)?;
    Ok(SpectrumReport::from_eigenvalues(
        eig.values,
        SpectrumMetadata::new(spec.label(), sys, spec.gamma1, spec.gamma2),
    ))
}

/// `q = (Bx)ᴴ W⁻¹ (Bx)` and `a = xᴴ Ã x` for a complex top-block vector split
/// into real and imaginary parts.
fn rayleigh_parts(aug: &AugmentedSystem, x: &[Complex64]) -> (f64, f64) {
    let sys = aug.system();
    let n = sys.n();
    let mut q = 0.0;
    let mut a = 0.0;
    for part in [
        x.iter().map(|z| z.re).collect::<Vec<f64>>(),
        x.iter().map(|z| z.im).collect(),
    ] {
        let (u, u2) = part.split_at(n);
        let mut bx = sys.c.spmv(u).expect("block sizes are consistent");
        sys.c2.spmv_add(-1.0, u2, &mut bx);
        let mut wbx = vec![0.0; bx.len()];
        aug.apply_w_inv(&bx, &mut wbx);
        q += dot(&bx, &wbx);
        a += dot(u, &sys.a.spmv(u).expect("block sizes are consistent"));
        a += dot(u2, &sys.a2.spmv(u2).expect("block sizes are consistent"));
    }
    (q, a)
}

/// Largest deviation between each nonunit eigenvalue `λ` of the ideal
/// preconditioned operator (exact `W`) and `γq/(a + γq)` evaluated at the
/// top block `x` of its eigenvector. For an eigenvector `v` of `𝒜P⁻¹`,
/// `P⁻¹v` is the eigenvector of `P⁻¹𝒜`.
pub fn eta_formula_check(sys: &SaddleSystem, gamma: f64) -> Result<f64> {
    let spec = PreconditionerSpec::ideal_al(gamma);
    let mat = preconditioned_matrix(sys, &spec)?;
    let eig = nonsym_eig(&mat, true)?;
    let vectors = eig.vectors.as_ref().expect("eigenvectors were requested");
    let aug = AugmentedSystem::new(sys, gamma, gamma, WMode::ExactMSquared)?;
    let mut prec =
        IdealAlPreconditioner::new(&aug, InnerSolver::Exact, spec.inner_rtol, spec.inner_maxit)?;
    let size = sys.size();
    let top = sys.n() + sys.m_dim();
    let one = Complex64::new(1.0, 0.0);
    let mut worst: f64 = 0.0;
    let mut zr = vec![0.0; size];
    let mut zi = vec![0.0; size];
    for (lambda, v) in eig.values.iter().zip(vectors) {
        if (lambda - one).norm() <= UNIT_TOL {
            continue;
        }
        let vr: Vec<f64> = v.iter().map(|z| z.re).collect();
        let vi: Vec<f64> = v.iter().map(|z| z.im).collect();
        prec.apply(&vr, &mut zr);
        prec.apply(&vi, &mut zi);
        let x: Vec<Complex64> = zr[..top]
            .iter()
            .zip(&zi[..top])
            .map(|(r, i)| Complex64::new(*r, *i))
            .collect();
        let (q, a) = rayleigh_parts(&aug, &x);
        let predicted = gamma * q / (a + gamma * q);
        worst = worst.max((lambda - predicted).norm());
    }
    Ok(worst)
}

/// Observed range of `wᵀM⁻²w / (h⁻² wᵀM⁻¹w)` over random vectors.
pub fn spectral_equivalence_check(
    m: &CsrMatrix,
    h: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mesh size must be positive, got {h}"
        )));
    }
    let chol = m.to_dense().cholesky()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for _ in 0..samples {
        let w: Vec<f64> = (0..m.rows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = chol.solve(&w)?;
        let ratio = dot(&y, &y) / (dot(&w, &y) / (h * h));
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    Ok((lo, hi))
}

/// Dense `B = [C, −C₂]`.
fn dense_b(sys: &SaddleSystem) -> DenseMatrix {
    let (n, m, l) = (sys.n(), sys.m_dim(), sys.l());
    let mut b = DenseMatrix::zeros(l, n + m);
    for k in 0..l {
        let row = b.row_mut(k);
        let (idx, val) = sys.c.row(k);
        for (j, v) in idx.iter().zip(val) {
            row[*j] = *v;
        }
        let (idx, val) = sys.c2.row(k);
        for (j, v) in idx.iter().zip(val) {
            row[n + j] = -v;
        }
    }
    b
}

fn symmetrize(a: &mut DenseMatrix) {
    for i in 0..a.rows() {
        for j in 0..i {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
}

/// Algebraic inf-sup constant from the pencil
/// `Bᵀ(h₂²M)⁻¹B v = σ (Ã + M̃₂) v` with `Ã = diag(A, A₂)` and `M̃₂ = diag(0, M₂)`; the immersed
/// and multiplier spaces coincide, so `M₂ = M`.
pub fn infsup_sigma1(sys: &SaddleSystem, h2: f64) -> Result<InfSupReport> {
    check_size(sys.n() + sys.m_dim())?;
    if !(h2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mesh size must be positive, got {h2}"
        )));
    }
    let md = sys.m.to_dense();
    let b = dense_b(sys);
    let minv_b = md.cholesky()?.solve_matrix(&b)?;
    let mut q = b.transpose().matmul(&minv_b)?.scaled(1.0 / (h2 * h2));
    symmetrize(&mut q);
    let lower = sys.a2.linear_combination(1.0, &sys.m, 1.0)?;
    let top = CsrMatrix::block(&[vec![Some(&sys.a), None], vec![None, Some(&lower)]])?;
    let mut nmat = top.to_dense();
    symmetrize(&mut nmat);
    nmat.cholesky()?;
    let values = gen_sym_eig(&q, &nmat)?.real_values();
    let scale = values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let threshold = ZERO_TOL * scale.max(f64::MIN_POSITIVE);
    let zero_count = values.iter().filter(|v| **v <= threshold).count();
    let sigma1 = values
        .iter()
        .copied()
        .filter(|v| *v > threshold)
        .fold(f64::INFINITY, f64::min);
    let lambda_max = sym_eig(&md)?.real_values().into_iter().fold(0.0, f64::max);
    let equivalence_lower = h2 * h2 / lambda_max;
    Ok(InfSupReport {
        sigma1,
        zero_count,
        equivalence_lower,
        theta_bar_sq: equivalence_lower * sigma1,
    })
}

/// Dense `W⁻¹` for the chosen weight.
fn dense_w_inverse(sys: &SaddleSystem, w_mode: WMode) -> Result<DenseMatrix> {
    match w_mode {
        WMode::ExactMSquared => {
            let mi = sys.m.to_dense().cholesky()?.inverse();
            mi.matmul(&mi)
        }
        WMode::Diag => Ok(DenseMatrix::from_diagonal(
            &diag_m_squared(&sys.m)
                .iter()
                .map(|v| 1.0 / v)
                .collect::<Vec<f64>>(),
        )),
    }
}

/// Dense `X = A⁻¹Cᵀ` by sparse Cholesky solves, one per multiplier dof.
fn a_inv_ct(sys: &SaddleSystem) -> Result<DenseMatrix> {
    let chol = SkylineCholesky::new(&sys.a)?;
    let n = sys.n();
    let cols: Vec<Vec<f64>> = (0..sys.l())
        .into_par_iter()
        .map(|k| {
            let mut rhs = vec![0.0; n];
            let (idx, val) = sys.c.row(k);
            for (j, v) in idx.iter().zip(val) {
                rhs[*j] = *v;
            }
            let mut x = vec![0.0; n];
            chol.solve_into(&rhs, &mut x);
            x
        })
        .collect();
    Ok(DenseMatrix::from_fn(n, sys.l(), |i, k| cols[k][i]))
}

/// Relative Frobenius defect of
/// `γ₁CA₁₁⁻¹CᵀW⁻¹ = I − (I + γ₁CA⁻¹CᵀW⁻¹)⁻¹` with `A₁₁ = A + γ₁CᵀW⁻¹C`.
pub fn verify_smw_identity(sys: &SaddleSystem, gamma1: f64, w_mode: WMode) -> Result<f64> {
    check_size(sys.n())?;
    let l = sys.l();
    let winv = dense_w_inverse(sys, w_mode)?;
    let cd = sys.c.to_dense();
    let ct = cd.transpose();
    let a11 = sys
        .a
        .to_dense()
        .add_scaled(gamma1, &ct.matmul(&winv)?.matmul(&cd)?)?;
    let lhs = cd
        .matmul(&a11.lu()?.solve_matrix(&ct)?)?
        .matmul(&winv)?
        .scaled(gamma1);
    let cac = sys.c.mul_dense(&a_inv_ct(sys)?)?;
    let inner = DenseMatrix::identity(l).add_scaled(gamma1, &cac.matmul(&winv)?)?;
    let rhs = DenseMatrix::identity(l).add_scaled(-1.0, &inner.lu()?.inverse())?;
    let scale = lhs.norm_frobenius().max(rhs.norm_frobenius());
    let diff = lhs.add_scaled(-1.0, &rhs)?.norm_frobenius();
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// The factors `D`, `E`, `F`, `G` of the lower block of the modified
/// preconditioned operator.
#[derive(Clone, Debug)]
pub struct MalBlocks {
    /// `γ₂C₂ᵀW⁻¹(I − F)`, `m × ℓ`.
    pub d: DenseMatrix,
    /// `C₂A₂₂⁻¹`, `ℓ × m`.
    pub e: DenseMatrix,
    /// `(I + γ₁CA⁻¹CᵀW⁻¹)⁻¹`, `ℓ × ℓ`.
    pub f: DenseMatrix,
    /// `I − γ₁C₂A₂₂⁻¹C₂ᵀW⁻¹`, `ℓ × ℓ`.
    pub g: DenseMatrix,
}

impl MalBlocks {
    pub fn new(sys: &SaddleSystem, gamma1: f64, gamma2: f64, w_mode: WMode) -> Result<Self> {
        check_size(sys.m_dim() + sys.l())?;
        let l = sys.l();
        let winv = dense_w_inverse(sys, w_mode)?;
        let c2 = sys.c2.to_dense();
        let c2t = c2.transpose();
        let cac = sys.c.mul_dense(&a_inv_ct(sys)?)?;
        let f = DenseMatrix::identity(l)
            .add_scaled(gamma1, &cac.matmul(&winv)?)?
            .lu()?
            .inverse();
        let d = c2t
            .matmul(&winv)?
            .matmul(&DenseMatrix::identity(l).add_scaled(-1.0, &f)?)?
            .scaled(gamma2);
        let a22 = sys
            .a2
            .to_dense()
            .add_scaled(gamma2, &c2t.matmul(&winv)?.matmul(&c2)?)?;
        let e = a22.lu()?.solve_matrix(&c2t)?.transpose();
        let g = DenseMatrix::identity(l).add_scaled(-gamma1, &e.matmul(&c2t)?.matmul(&winv)?)?;
        Ok(Self { d, e, f, g })
    }

    /// `[[I − DE, −DG], [−FE, I − FG]]`.
    pub fn lower_block(&self) -> Result<DenseMatrix> {
        let (m, l) = (self.d.rows(), self.f.rows());
        let mut out = DenseMatrix::identity(m + l);
        let top = [self.d.matmul(&self.e)?, self.d.matmul(&self.g)?];
        let bottom = [self.f.matmul(&self.e)?, self.f.matmul(&self.g)?];
        out.set_block(0, 0, &out.submatrix(0, 0, m, m).add_scaled(-1.0, &top[0])?);
        out.set_block(0, m, &top[1].scaled(-1.0));
        out.set_block(m, 0, &bottom[0].scaled(-1.0));
        out.set_block(
            m,
            m,
            &out.submatrix(m, m, l, l).add_scaled(-1.0, &bottom[1])?,
        );
        Ok(out)
    }

    /// `ED + GF`, whose nonzero eigenvalues are those of the rank-`ℓ` part
    /// of the lower block.
    pub fn ed_plus_gf(&self) -> Result<DenseMatrix> {
        self.e
            .matmul(&self.d)?
            .add_scaled(1.0, &self.g.matmul(&self.f)?)
    }
}

/// Spectrum of the lower block of the modified preconditioned operator.
pub fn mal_block_spectrum(
    sys: &SaddleSystem,
    gamma1: f64,
    gamma2: f64,
    w_mode: WMode,
) -> Result<SpectrumReport> {
    let blocks = MalBlocks::new(sys, gamma1, gamma2, w_mode)?;
    let eig = nonsym_eig(&blocks.lower_block()?, false)?;
    Ok(SpectrumReport::from_eigenvalues(
        eig.values,
        SpectrumMetadata::new("mal_lower_block", sys, gamma1, gamma2),
    ))
}

/// Eigenvalues of `−LA₂`, `L = M⁻¹CA⁻¹CᵀM⁻¹`, ascending, via the symmetric
/// form `L^{1/2}A₂L^{1/2}`.
pub fn limit_spectrum_la2(sys: &SaddleSystem) -> Result<Vec<f64>> {
    check_size(sys.l())?;
    if sys.m_dim() != sys.l() {
        return Err(Error::InvalidArgument(
            "the limit spectrum needs matching immersed and multiplier spaces".into(),
        ));
    }
    let l = sys.l();
    let mi = sys.m.to_dense().cholesky()?.inverse();
    let cac = sys.c.mul_dense(&a_inv_ct(sys)?)?;
    let mut lmat = mi.matmul(&cac)?.matmul(&mi)?;
    symmetrize(&mut lmat);
    let eig = sym_eig(&lmat)?;
    let v = eig
        .real_vector_matrix()
        .expect("symmetric eigenvectors are always returned");
    let sqrt_vals: Vec<f64> = eig
        .real_values()
        .iter()
        .map(|x| x.max(0.0).sqrt())
        .collect();
    let vs = DenseMatrix::from_fn(l, l, |i, j| v[(i, j)] * sqrt_vals[j]);
    let half = vs.matmul(&v.transpose())?;
    let mut s = half.matmul(&sys.a2.to_dense())?.matmul(&half)?;
    symmetrize(&mut s);
    let mut values: Vec<f64> = sym_eig(&s)?.real_values().into_iter().map(|x| -x).collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Matched distance between the reciprocals of the nonzero eigenvalues of
/// `ED + GF` and the eigenvalues of `−LA₂`.
pub fn limit_distance(sys: &SaddleSystem, gamma1: f64, gamma2: f64) -> Result<f64> {
    let limit: Vec<Complex64> = limit_spectrum_la2(sys)?
        .into_iter()
        .map(|x| Complex64::new(x, 0.0))
        .collect();
    let blocks = MalBlocks::new(sys, gamma1, gamma2, WMode::ExactMSquared)?;
    let eig = nonsym_eig(&blocks.ed_plus_gf()?, false)?;
    let scale = eig.values.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    let recips: Vec<Complex64> = eig
        .values
        .iter()
        .filter(|z| z.norm() > ZERO_TOL * scale)
        .map(|z| z.inv())
        .collect();
    Ok(matched_distance(&recips, &limit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_saddle_system, Geometry, ProblemConfig, Refinement};

    fn system(r: (usize, usize), beta2: f64) -> SaddleSystem {
        build_saddle_system(&ProblemConfig::new(
            Geometry::UnitSquare41,
            Refinement::new(r.0, r.1),
            beta2,
        ))
        .unwrap()
    }

    /// `Op P⁻¹` by applying the preconditioner, then the operator, to unit vectors.
    fn brute_right(op: &dyn LinearOperator, prec: &mut dyn Preconditioner) -> DenseMatrix {
        let n = op.dim();
        let mut out = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            prec.apply(&e, &mut z);
            op.apply(&z, &mut col);
            out.set_column(j, &col);
            e[j] = 0.0;
        }
        out
    }

    fn assert_close(a: &DenseMatrix, b: &DenseMatrix, tol: f64) {
        let diff = a.add_scaled(-1.0, b).unwrap().max_abs();
        assert!(diff <= tol * b.max_abs(), "difference {diff:e}");
    }

    #[test]
    fn defect_materialization_matches_direct_products() {
        let sys = system((8, 2), 100.0);
        let ideal = PreconditionerSpec::ideal_al(10.0);
        let aug = AugmentedSystem::new(&sys, 10.0, 10.0, WMode::ExactMSquared).unwrap();
        let mut p = IdealAlPreconditioner::new(&aug, InnerSolver::Exact, 1e-2, 10).unwrap();
        assert_close(
            &preconditioned_matrix(&sys, &ideal).unwrap(),
            &brute_right(&aug, &mut p),
            1e-9,
        );

        let mut mal = PreconditionerSpec::mal_diag(10.0, 1e-2);
        mal.inner = InnerSolver::Exact;
        let aug = AugmentedSystem::new(&sys, 10.0, 1e-2, WMode::Diag).unwrap();
        let mut p = MalPreconditioner::new(&aug, InnerSolver::Exact, 1e-2, 10).unwrap();
        assert_close(
            &preconditioned_matrix(&sys, &mal).unwrap(),
            &brute_right(&aug, &mut p),
            1e-9,
        );

        let mut p = BaselinePreconditioner::new(&sys).unwrap();
        assert_close(
            &preconditioned_matrix(&sys, &PreconditionerSpec::baseline()).unwrap(),
            &brute_right(&sys, &mut p),
            1e-9,
        );
    }

    #[test]
    fn ideal_spectrum_is_real_and_bounded() {
        let sys = system((8, 2), 100.0);
        for gamma in [1.0, 10.0, 100.0] {
            let r = preconditioned_spectrum(&sys, &PreconditionerSpec::ideal_al(gamma)).unwrap();
            assert!(r.max_imag <= 1e-8);
            assert!(r.min_real() > 0.0 && r.max_real() <= 1.0 + 1e-8);
            assert!(r.count_at_one >= sys.n() + sys.m_dim());
            assert!(r.eta > 0.0 && r.eta < 1.0);
            assert_eq!(r.metadata.n, sys.n());
        }
    }

    #[test]
    fn unpreconditioned_spectrum_is_indefinite_and_scales_with_jump() {
        let mut spec = PreconditionerSpec::unpreconditioned();
        spec.gamma1 = 10.0;
        spec.gamma2 = 10.0;
        let lo = preconditioned_spectrum(&system((8, 2), 100.0), &spec).unwrap();
        let hi = preconditioned_spectrum(&system((8, 2), 1e6), &spec).unwrap();
        assert!(lo.min_real() < 0.0 && hi.min_real() < 0.0);
        assert!(hi.max_real() > 100.0 * lo.max_real());
    }

    #[test]
    fn eta_matches_rayleigh_formula() {
        let sys = system((8, 2), 100.0);
        assert!(eta_formula_check(&sys, 10.0).unwrap() <= 1e-7);
    }

    #[test]
    fn spectral_equivalence_of_scaled_identity_is_exact() {
        let h = 0.25;
        let m = CsrMatrix::from_diagonal(&[h * h; 6]);
        let (lo, hi) = spectral_equivalence_check(&m, h, 20, 3).unwrap();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 1.0).abs() < 1e-14);
        let sys = system((8, 2), 100.0);
        let (lo, hi) = spectral_equivalence_check(&sys.m, sys.h2(), 50, 1).unwrap();
        assert!(lo > 0.0 && hi >= lo);
    }

    #[test]
    fn infsup_pencil_kernel_and_bound() {
        let sys = system((8, 2), 100.0);
        let r = infsup_sigma1(&sys, sys.h2()).unwrap();
        assert_eq!(r.zero_count, sys.n() + sys.m_dim() - sys.l());
        assert!(r.sigma1 > 0.0 && r.theta_bar_sq > 0.0);
        for gamma in [1.0, 10.0, 100.0] {
            let eta = preconditioned_spectrum(&sys, &PreconditionerSpec::ideal_al(gamma))
                .unwrap()
                .eta;
            assert!(eta >= r.eta_bound(gamma));
        }
    }

    #[test]
    fn smw_identity_holds_for_both_weights() {
        let sys = system((8, 2), 100.0);
        for mode in [WMode::ExactMSquared, WMode::Diag] {
            assert_eq!(verify_smw_identity(&sys, 0.0, mode).unwrap(), 0.0);
            for g in [1.0, 10.0, 100.0] {
                assert!(verify_smw_identity(&sys, g, mode).unwrap() <= 1e-10);
            }
        }
    }

    #[test]
    fn mal_lower_block_carries_the_nonunit_spectrum() {
        let sys = system((8, 2), 100.0);
        let lower = mal_block_spectrum(&sys, 10.0, 1e-2, WMode::ExactMSquared).unwrap();
        assert!(lower.count_at_one >= sys.m_dim());
        let mut spec = PreconditionerSpec::mal_diag(10.0, 1e-2);
        spec.w_mode = WMode::ExactMSquared;
        spec.inner = InnerSolver::Exact;
        let full = preconditioned_spectrum(&sys, &spec).unwrap();
        assert!(full.count_at_one >= sys.n() + sys.m_dim());
        let nonunit = |r: &SpectrumReport| {
            let mut v: Vec<Complex64> = r
                .eigenvalues
                .iter()
                .copied()
                .filter(|z| (z - Complex64::new(1.0, 0.0)).norm() > UNIT_TOL)
                .collect();
            v.sort_by(|a, b| a.re.total_cmp(&b.re));
            v
        };
        let (a, b) = (nonunit(&lower), nonunit(&full));
        assert_eq!(a.len(), b.len());
        assert!(matched_distance(&a, &b) <= 1e-8 * lower.max_real());
    }

    #[test]
    fn limit_spectrum_has_one_zero_and_scales_with_jump() {
        let lo = limit_spectrum_la2(&system((8, 2), 101.0)).unwrap();
        let hi = limit_spectrum_la2(&system((8, 2), 10001.0)).unwrap();
        let scale = lo[0].abs();
        assert_eq!(lo.iter().filter(|v| v.abs() <= 1e-9 * scale).count(), 1);
        assert!(lo[..lo.len() - 1].iter().all(|v| *v < 0.0));
        for (a, b) in lo.iter().zip(&hi).take(lo.len() - 1) {
            let ratio = b / a;
            assert!((ratio / 100.0 - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn limit_distance_decreases_in_the_asymptotic_regime() {
        let sys = system((8, 2), 10.0);
        let d: Vec<f64> = [(10.0, 1e-1), (100.0, 1e-2), (1000.0, 1e-3)]
            .iter()
            .map(|(g1, g2)| limit_distance(&sys, *g1, *g2).unwrap())
            .collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
    }

    #[test]
    fn size_guard() {
        let sys = system((64, 16), 100.0);
        assert!(matches!(
            preconditioned_spectrum(&sys, &PreconditionerSpec::ideal_al(10.0)),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn report_summaries() {
        let vals = [0.5, 1.0, 1.0 + 1e-9, 0.95, 2.0]
            .map(|v| Complex64::new(v, 0.0))
            .to_vec();
        let r = SpectrumReport::from_eigenvalues(vals, SpectrumMetadata::default());
        assert_eq!(r.count_at_one, 2);
        assert_eq!(r.eta, 0.5);
        assert!((r.fraction_within(0.1) - 0.6).abs() < 1e-15);
        assert_eq!(r.rightmost().unwrap().re, 2.0);
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<SpectrumReport>(&json).unwrap(), r);
    }
}
