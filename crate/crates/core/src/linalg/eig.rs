//! Dense eigensolvers: cyclic Jacobi for symmetric matrices, Cholesky
//! reduction for symmetric-definite pencils, and balancing + Householder
//! Hessenberg reduction + Francis double-shift QR for general real matrices.

use num_complex::Complex64;

use super::dense::DenseMatrix;
use super::vector::{axpy, dot};
use crate::error::{Error, Result};

/// Largest order accepted by [`nonsym_eig`].
pub const NONSYM_MAX_DIM: usize = 4000;
/// Relative asymmetry accepted by [`sym_eig`].
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Jacobi stops when the off-diagonal Frobenius norm falls below this fraction of `‖M‖_F`.
pub const JACOBI_TOL: f64 = 1e-13;
/// Subdiagonal entries below this fraction of `‖H‖` are deflated.
pub const DEFLATION_TOL: f64 = 1e-13;
/// QR sweep budget per matrix order.
pub const SWEEPS_PER_ORDER: usize = 40;

/// Eigenvalues, optional unit-norm eigenvectors (one per eigenvalue), and per-value convergence flags.
#[derive(Clone, Debug)]
pub struct EigenResult {
    pub values: Vec<Complex64>,
    pub vectors: Option<Vec<Vec<Complex64>>>,
    pub converged: Vec<bool>,
}

impl EigenResult {
    /// Real parts of the eigenvalues.
    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    /// Real parts of the eigenvectors as the columns of a matrix.
    pub fn real_vector_matrix(&self) -> Option<DenseMatrix> {
        let vecs = self.vectors.as_ref()?;
        let n = vecs.first().map_or(0, Vec::len);
        Some(DenseMatrix::from_fn(n, vecs.len(), |i, j| vecs[j][i].re))
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues ascend; eigenvectors are orthonormal.
pub fn sym_eig(m: &DenseMatrix) -> Result<EigenResult> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(
            "eigenvalues of a non-square matrix".into(),
        ));
    }
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let n = m.rows();
    let mut a = m.clone();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
    let mut v = DenseMatrix::identity(n);
    let target = JACOBI_TOL * a.norm_frobenius();
    let mut converged = false;
    for _sweep in 0..100 {
        if off_diagonal_norm(&a) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                jacobi_rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&a) <= target {
        converged = true;
    }
    let mut order: Vec<usize> = (0..n).collect();
    let d = a.diagonal();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&i| Complex64::new(d[i], 0.0)).collect();
    let vectors = order
        .iter()
        .map(|&j| (0..n).map(|i| Complex64::new(v[(i, j)], 0.0)).collect())
        .collect();
    Ok(EigenResult {
        values,
        vectors: Some(vectors),
        converged: vec![converged; n],
    })
}

fn off_diagonal_norm(a: &DenseMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        let row = a.row(i);
        s += dot(&row[..i], &row[..i]);
    }
    (2.0 * s).sqrt()
}

fn jacobi_rotate(a: &mut DenseMatrix, v: &mut DenseMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let (app, aqq) = (a[(p, p)], a[(q, q)]);
    if apq.abs() < 1e-18 * (app.abs() + aqq.abs()) {
        a[(p, q)] = 0.0;
        a[(q, p)] = 0.0;
        return;
    }
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let tau = s / (1.0 + c);
    let n = a.rows();
    {
        let (rp, rq) = a.two_rows_mut(p, q);
        for k in 0..n {
            if k == p || k == q {
                continue;
            }
            let g = rp[k];
            let h = rq[k];
            rp[k] = g - s * (h + tau * g);
            rq[k] = h + s * (g - tau * h);
        }
    }
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        a[(k, p)] = a[(p, k)];
        a[(k, q)] = a[(q, k)];
    }
    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let row = v.row_mut(k);
        let g = row[p];
        let h = row[q];
        row[p] = g - s * (h + tau * g);
        row[q] = h + s * (g - tau * h);
    }
}

/// Generalized eigenproblem `Q v = λ N v` with `N` SPD, via `N = LLᵀ` and
/// the symmetric matrix `L⁻¹QL⁻ᵀ`. Eigenvectors are `N`-orthonormal.
pub fn gen_sym_eig(q: &DenseMatrix, n: &DenseMatrix) -> Result<EigenResult> {
    if q.rows() != n.rows() || !q.is_square() || !n.is_square() {
        return Err(Error::DimensionMismatch(
            "pencil blocks differ in shape".into(),
        ));
    }
    let ch = n.cholesky()?;
    let y = ch.solve_lower_matrix(q)?;
    let c = ch.solve_lower_matrix(&y.transpose())?;
    let mut c = c;
    let dim = c.rows();
    for i in 0..dim {
        for j in 0..i {
            let avg = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = avg;
            c[(j, i)] = avg;
        }
    }
    let mut res = sym_eig(&c)?;
    if let Some(vm) = res.real_vector_matrix() {
        let w = ch.solve_upper_matrix(&vm)?;
        res.vectors = Some(
            (0..w.cols())
                .map(|j| {
                    w.column(j)
                        .into_iter()
                        .map(|x| Complex64::new(x, 0.0))
                        .collect()
                })
                .collect(),
        );
    }
    Ok(res)
}

/// All eigenvalues of a general real matrix, optionally with eigenvectors.
/// Complex eigenvalues are returned in exact conjugate pairs.
pub fn nonsym_eig(m: &DenseMatrix, want_vectors: bool) -> Result<EigenResult> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(
            "eigenvalues of a non-square matrix".into(),
        ));
    }
    let n = m.rows();
    if n > NONSYM_MAX_DIM {
        return Err(Error::SizeLimit {
            size: n,
            limit: NONSYM_MAX_DIM,
        });
    }
    if n == 0 {
        return Ok(EigenResult {
            values: Vec::new(),
            vectors: want_vectors.then(Vec::new),
            converged: Vec::new(),
        });
    }
    let mut h = m.as_slice().to_vec();
    let scaling = balance(&mut h, n);
    let mut v = want_vectors.then(|| vec![0.0; n * n]);
    hessenberg(&mut h, n, v.as_deref_mut());
    let (wr, wi) = francis_qr(&mut h, n, v.as_deref_mut())?;
    let values: Vec<Complex64> = wr
        .iter()
        .zip(&wi)
        .map(|(r, i)| Complex64::new(*r, *i))
        .collect();
    let vectors = match v {
        Some(mut v) => {
            back_substitute(&mut h, n, &wr, &wi, &mut v);
            Some(assemble_vectors(&v, n, &wi, &scaling))
        }
        None => None,
    };
    Ok(EigenResult {
        values,
        vectors,
        converged: vec![true; n],
    })
}

/// Diagonal similarity scaling by powers of two so row and column norms are comparable.
fn balance(a: &mut [f64], n: usize) -> Vec<f64> {
    const RADIX: f64 = 2.0;
    let mut d = vec![1.0; n];
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j * n + i].abs();
                    r += a[i * n + j].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c >= g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                d[i] *= f;
                let inv = 1.0 / f;
                for j in 0..n {
                    a[i * n + j] *= inv;
                    a[j * n + i] *= f;
                }
            }
        }
        if done {
            return d;
        }
    }
}

/// Householder reduction to upper Hessenberg form; accumulates the
/// orthogonal factor into `v` when requested.
fn hessenberg(h: &mut [f64], n: usize, v: Option<&mut [f64]>) {
    let mut ort = vec![0.0; n];
    let mut f = vec![0.0; n];
    for m in 1..n.saturating_sub(1) {
        let scale: f64 = (m..n).map(|i| h[i * n + m - 1].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..n).rev() {
            ort[i] = h[i * n + m - 1] / scale;
            hh += ort[i] * ort[i];
        }
        let g = if ort[m] > 0.0 { -hh.sqrt() } else { hh.sqrt() };
        hh -= ort[m] * g;
        ort[m] -= g;

        f[m..].iter_mut().for_each(|x| *x = 0.0);
        for i in m..n {
            axpy(ort[i], &h[i * n + m..(i + 1) * n], &mut f[m..]);
        }
        let inv = 1.0 / hh;
        f[m..].iter_mut().for_each(|x| *x *= inv);
        for i in m..n {
            let oi = ort[i];
            axpy(-oi, &f[m..], &mut h[i * n + m..(i + 1) * n]);
        }
        for i in 0..n {
            let row = &mut h[i * n + m..(i + 1) * n];
            let s = dot(row, &ort[m..]) * inv;
            axpy(-s, &ort[m..], row);
        }
        ort[m] *= scale;
        h[m * n + m - 1] = scale * g;
    }

    if let Some(v) = v {
        v.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        let mut gv = vec![0.0; n];
        for m in (1..n.saturating_sub(1)).rev() {
            let hm = h[m * n + m - 1];
            if hm == 0.0 {
                continue;
            }
            for i in m + 1..n {
                ort[i] = h[i * n + m - 1];
            }
            gv[m..].iter_mut().for_each(|x| *x = 0.0);
            for i in m..n {
                axpy(ort[i], &v[i * n + m..(i + 1) * n], &mut gv[m..]);
            }
            let s = 1.0 / ort[m] / hm;
            gv[m..].iter_mut().for_each(|x| *x *= s);
            for i in m..n {
                let oi = ort[i];
                axpy(oi, &gv[m..], &mut v[i * n + m..(i + 1) * n]);
            }
        }
    }
    for i in 2..n {
        for j in 0..i - 1 {
            h[i * n + j] = 0.0;
        }
    }
}

/// Francis double-shift QR on a Hessenberg matrix. With `v` present the
/// full Schur form and Schur vectors are maintained; otherwise only the
/// active window is updated.
fn francis_qr(h: &mut [f64], nn: usize, mut v: Option<&mut [f64]>) -> Result<(Vec<f64>, Vec<f64>)> {
    let full = v.is_some();
    let mut wr = vec![0.0; nn];
    let mut wi = vec![0.0; nn];
    let eps = f64::EPSILON;
    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[i * nn + j].abs();
        }
    }
    let abs_tol = DEFLATION_TOL * norm;
    let budget = SWEEPS_PER_ORDER * nn;
    let mut sweeps = 0usize;
    let mut exshift = 0.0;
    let mut iter = 0usize;
    let mut n = nn as isize - 1;
    let (mut p, mut q, mut r, mut s, mut z);
    let (mut w, mut x, mut y);
    while n >= 0 {
        let nu = n as usize;
        let mut l = nu;
        while l > 0 {
            s = h[(l - 1) * nn + l - 1].abs() + h[l * nn + l].abs();
            if s == 0.0 {
                s = norm;
            }
            let sub = h[l * nn + l - 1].abs();
            if sub < eps * s || sub < abs_tol {
                break;
            }
            l -= 1;
        }
        if l == nu {
            h[nu * nn + nu] += exshift;
            wr[nu] = h[nu * nn + nu];
            wi[nu] = 0.0;
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            let n1 = nu - 1;
            w = h[nu * nn + n1] * h[n1 * nn + nu];
            p = (h[n1 * nn + n1] - h[nu * nn + nu]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[nu * nn + nu] += exshift;
            h[n1 * nn + n1] += exshift;
            x = h[nu * nn + nu];
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                wr[n1] = x + z;
                wr[nu] = if z != 0.0 { x - w / z } else { x + z };
                wi[n1] = 0.0;
                wi[nu] = 0.0;
                if full {
                    x = h[nu * nn + n1];
                    s = x.abs() + z.abs();
                    p = x / s;
                    q = z / s;
                    r = (p * p + q * q).sqrt();
                    p /= r;
                    q /= r;
                    for j in n1..nn {
                        z = h[n1 * nn + j];
                        h[n1 * nn + j] = q * z + p * h[nu * nn + j];
                        h[nu * nn + j] = q * h[nu * nn + j] - p * z;
                    }
                    for i in 0..=nu {
                        z = h[i * nn + n1];
                        h[i * nn + n1] = q * z + p * h[i * nn + nu];
                        h[i * nn + nu] = q * h[i * nn + nu] - p * z;
                    }
                    let vm = v.as_deref_mut().expect("full mode");
                    for i in 0..nn {
                        z = vm[i * nn + n1];
                        vm[i * nn + n1] = q * z + p * vm[i * nn + nu];
                        vm[i * nn + nu] = q * vm[i * nn + nu] - p * z;
                    }
                }
            } else {
                wr[n1] = x + p;
                wr[nu] = x + p;
                wi[n1] = z;
                wi[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            sweeps += 1;
            if sweeps > budget {
                return Err(Error::NoConvergence { lo: l, hi: nu });
            }
            x = h[nu * nn + nu];
            y = h[(nu - 1) * nn + nu - 1];
            w = h[nu * nn + nu - 1] * h[(nu - 1) * nn + nu];
            if iter == 10 {
                exshift += x;
                for i in l..=nu {
                    h[i * nn + i] -= x;
                }
                s = h[nu * nn + nu - 1].abs() + h[(nu - 1) * nn + nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in l..=nu {
                        h[i * nn + i] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;

            let mut m = nu - 2;
            loop {
                z = h[m * nn + m];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(m + 1) * nn + m] + h[m * nn + m + 1];
                q = h[(m + 1) * nn + m + 1] - z - r - s;
                r = h[(m + 2) * nn + m + 1];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let lhs = h[m * nn + m - 1].abs() * (q.abs() + r.abs());
                let rhs = eps
                    * (p.abs()
                        * (h[(m - 1) * nn + m - 1].abs()
                            + z.abs()
                            + h[(m + 1) * nn + m + 1].abs()));
                if lhs < rhs {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                h[i * nn + i - 2] = 0.0;
                if i > m + 2 {
                    h[i * nn + i - 3] = 0.0;
                }
            }

            let (col_lo, row_hi) = if full { (0, nn) } else { (l, nu + 1) };
            for k in m..nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[k * nn + k - 1];
                    q = h[(k + 1) * nn + k - 1];
                    r = if notlast {
                        h[(k + 2) * nn + k - 1]
                    } else {
                        0.0
                    };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                } else {
                    x = 0.0;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s == 0.0 {
                    continue;
                }
                if k != m {
                    h[k * nn + k - 1] = -s * x;
                } else if l != m {
                    h[k * nn + k - 1] = -h[k * nn + k - 1];
                }
                p += s;
                x = p / s;
                y = q / s;
                z = r / s;
                q /= p;
                r /= p;

                // Row modification on rows k..k+2.
                {
                    let rows = if notlast { 3 } else { 2 };
                    let block = &mut h[k * nn..(k + rows) * nn];
                    let (r0, rest) = block.split_at_mut(nn);
                    let (r1, r2) = rest.split_at_mut(nn);
                    if notlast {
                        for j in k..row_hi {
                            let pp = r0[j] + q * r1[j] + r * r2[j];
                            r0[j] -= pp * x;
                            r1[j] -= pp * y;
                            r2[j] -= pp * z;
                        }
                    } else {
                        for j in k..row_hi {
                            let pp = r0[j] + q * r1[j];
                            r0[j] -= pp * x;
                            r1[j] -= pp * y;
                        }
                    }
                }
                // Column modification on columns k..k+2.
                let i_hi = nu.min(k + 3);
                for i in col_lo..=i_hi {
                    let row = &mut h[i * nn + k..i * nn + k + 3.min(nn - k)];
                    let mut pp = x * row[0] + y * row[1];
                    if notlast {
                        pp += z * row[2];
                        row[2] -= pp * r;
                    }
                    row[0] -= pp;
                    row[1] -= pp * q;
                }
                if let Some(vm) = v.as_deref_mut() {
                    for i in 0..nn {
                        let row = &mut vm[i * nn + k..i * nn + k + 3.min(nn - k)];
                        let mut pp = x * row[0] + y * row[1];
                        if notlast {
                            pp += z * row[2];
                            row[2] -= pp * r;
                        }
                        row[0] -= pp;
                        row[1] -= pp * q;
                    }
                }
            }
        }
    }
    Ok((wr, wi))
}

fn cdiv(xr: f64, xi: f64, yr: f64, yi: f64) -> (f64, f64) {
    if yr.abs() > yi.abs() {
        let r = yi / yr;
        let d = yr + r * yi;
        ((xr + r * xi) / d, (xi - r * xr) / d)
    } else {
        let r = yr / yi;
        let d = yi + r * yr;
        ((r * xr + xi) / d, (r * xi - xr) / d)
    }
}

/// Eigenvectors of the quasi-triangular Schur form, mapped back by the Schur vectors.
fn back_substitute(h: &mut [f64], nn: usize, wr: &[f64], wi: &[f64], v: &mut [f64]) {
    let eps = f64::EPSILON;
    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[i * nn + j].abs();
        }
    }
    if norm == 0.0 {
        return;
    }
    let at = |i: usize, j: usize| i * nn + j;
    for n in (0..nn).rev() {
        let p = wr[n];
        let q = wi[n];
        if q == 0.0 {
            let mut l = n;
            h[at(n, n)] = 1.0;
            let (mut z, mut s) = (0.0, 0.0);
            for i in (0..n).rev() {
                let w = h[at(i, i)] - p;
                let mut r = 0.0;
                for j in l..=n {
                    r += h[at(i, j)] * h[at(j, n)];
                }
                if wi[i] < 0.0 {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if wi[i] == 0.0 {
                        h[at(i, n)] = if w != 0.0 { -r / w } else { -r / (eps * norm) };
                    } else {
                        let x = h[at(i, i + 1)];
                        let y = h[at(i + 1, i)];
                        let qq = (wr[i] - p) * (wr[i] - p) + wi[i] * wi[i];
                        let t = (x * s - z * r) / qq;
                        h[at(i, n)] = t;
                        h[at(i + 1, n)] = if x.abs() > z.abs() {
                            (-r - w * t) / x
                        } else {
                            (-s - y * t) / z
                        };
                    }
                    let t = h[at(i, n)].abs();
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            h[at(j, n)] /= t;
                        }
                    }
                }
            }
        } else if q < 0.0 {
            let mut l = n - 1;
            if h[at(n, n - 1)].abs() > h[at(n - 1, n)].abs() {
                h[at(n - 1, n - 1)] = q / h[at(n, n - 1)];
                h[at(n - 1, n)] = -(h[at(n, n)] - p) / h[at(n, n - 1)];
            } else {
                let (cr, ci) = cdiv(0.0, -h[at(n - 1, n)], h[at(n - 1, n - 1)] - p, q);
                h[at(n - 1, n - 1)] = cr;
                h[at(n - 1, n)] = ci;
            }
            h[at(n, n - 1)] = 0.0;
            h[at(n, n)] = 1.0;
            let (mut z, mut r, mut s) = (0.0, 0.0, 0.0);
            for i in (0..n.saturating_sub(1)).rev() {
                let mut ra = 0.0;
                let mut sa = 0.0;
                for j in l..=n {
                    ra += h[at(i, j)] * h[at(j, n - 1)];
                    sa += h[at(i, j)] * h[at(j, n)];
                }
                let w = h[at(i, i)] - p;
                if wi[i] < 0.0 {
                    z = w;
                    r = ra;
                    s = sa;
                } else {
                    l = i;
                    if wi[i] == 0.0 {
                        let (cr, ci) = cdiv(-ra, -sa, w, q);
                        h[at(i, n - 1)] = cr;
                        h[at(i, n)] = ci;
                    } else {
                        let x = h[at(i, i + 1)];
                        let y = h[at(i + 1, i)];
                        let mut vr = (wr[i] - p) * (wr[i] - p) + wi[i] * wi[i] - q * q;
                        let vi = (wr[i] - p) * 2.0 * q;
                        if vr == 0.0 && vi == 0.0 {
                            vr = eps * norm * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                        }
                        let (cr, ci) =
                            cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi);
                        h[at(i, n - 1)] = cr;
                        h[at(i, n)] = ci;
                        if x.abs() > z.abs() + q.abs() {
                            h[at(i + 1, n - 1)] = (-ra - w * h[at(i, n - 1)] + q * h[at(i, n)]) / x;
                            h[at(i + 1, n)] = (-sa - w * h[at(i, n)] - q * h[at(i, n - 1)]) / x;
                        } else {
                            let (cr, ci) =
                                cdiv(-r - y * h[at(i, n - 1)], -s - y * h[at(i, n)], z, q);
                            h[at(i + 1, n - 1)] = cr;
                            h[at(i + 1, n)] = ci;
                        }
                    }
                    let t = h[at(i, n - 1)].abs().max(h[at(i, n)].abs());
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            h[at(j, n - 1)] /= t;
                            h[at(j, n)] /= t;
                        }
                    }
                }
            }
        }
    }
    let mut tmp = vec![0.0; nn];
    for i in 0..nn {
        tmp.iter_mut().for_each(|x| *x = 0.0);
        for k in 0..nn {
            let vik = v[at(i, k)];
            if vik != 0.0 {
                axpy(vik, &h[at(k, k)..at(k, nn - 1) + 1], &mut tmp[k..]);
            }
        }
        v[at(i, 0)..at(i, nn - 1) + 1].copy_from_slice(&tmp);
    }
}

fn assemble_vectors(v: &[f64], n: usize, wi: &[f64], scaling: &[f64]) -> Vec<Vec<Complex64>> {
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    while j < n {
        if wi[j] == 0.0 {
            let col: Vec<Complex64> = (0..n)
                .map(|i| Complex64::new(scaling[i] * v[i * n + j], 0.0))
                .collect();
            out.push(normalize(col));
            j += 1;
        } else {
            let col: Vec<Complex64> = (0..n)
                .map(|i| Complex64::new(scaling[i] * v[i * n + j], scaling[i] * v[i * n + j + 1]))
                .collect();
            let col = normalize(col);
            let conj: Vec<Complex64> = col.iter().map(|c| c.conj()).collect();
            if wi[j] > 0.0 {
                out.push(col);
                out.push(conj);
            } else {
                out.push(conj);
                out.push(col);
            }
            j += 2;
        }
    }
    out
}

fn normalize(mut x: Vec<Complex64>) -> Vec<Complex64> {
    let nrm = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if nrm > 0.0 {
        x.iter_mut().for_each(|c| *c /= nrm);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sorted_re(r: &EigenResult) -> Vec<f64> {
        let mut v = r.real_values();
        v.sort_by(f64::total_cmp);
        v
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
        let mut a = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        for i in 0..n {
            for j in 0..i {
                a[(i, j)] = a[(j, i)];
            }
        }
        a
    }

    fn residual(a: &DenseMatrix, lambda: Complex64, x: &[Complex64]) -> f64 {
        let n = a.rows();
        (0..n)
            .map(|i| {
                let ax: Complex64 = (0..n).map(|j| x[j] * a[(i, j)]).sum();
                (ax - lambda * x[i]).norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn sym_eig_diagonal_and_swap() {
        let r = sym_eig(&DenseMatrix::from_diagonal(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(r.real_values(), vec![1.0, 2.0, 3.0]);
        let swap = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let r = sym_eig(&swap).unwrap();
        assert!((r.values[0].re + 1.0).abs() < 1e-15 && (r.values[1].re - 1.0).abs() < 1e-15);
        assert!(r.values.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn sym_eig_trace_determinant_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_symmetric(&mut rng, 30);
        let r = sym_eig(&a).unwrap();
        let trace: f64 = a.diagonal().iter().sum();
        let sum: f64 = r.real_values().iter().sum();
        assert!((trace - sum).abs() < 1e-11);
        let det = a.lu().unwrap().determinant();
        let prod: f64 = r.real_values().iter().product();
        assert!(((det - prod) / det).abs() < 1e-8);
        let v = r.real_vector_matrix().unwrap();
        let vtv = v.transpose().matmul(&v).unwrap();
        assert!(
            vtv.add_scaled(-1.0, &DenseMatrix::identity(30))
                .unwrap()
                .max_abs()
                < 1e-10
        );
    }

    #[test]
    fn sym_eig_rejects_asymmetric() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eig(&a), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn gen_sym_eig_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = DenseMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let n = b
            .matmul(&b.transpose())
            .unwrap()
            .add_scaled(1.0, &DenseMatrix::identity(5))
            .unwrap();
        let r = gen_sym_eig(&n, &n).unwrap();
        assert!(r.real_values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let r = gen_sym_eig(&DenseMatrix::zeros(5, 5), &n).unwrap();
        assert!(r.real_values().iter().all(|v| v.abs() < 1e-14));
        // det(Q − λN) = 0 for Q = [[2,1],[1,3]], N = [[2,0],[0,1]]:
        // 2λ² − 8λ + 5 = 0, so λ = 2 ∓ √(3/2).
        let q = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let nn = DenseMatrix::from_diagonal(&[2.0, 1.0]);
        let r = gen_sym_eig(&q, &nn).unwrap();
        assert!((r.values[0].re - (2.0 - 1.5f64.sqrt())).abs() < 1e-13);
        assert!((r.values[1].re - (2.0 + 1.5f64.sqrt())).abs() < 1e-13);
        let bad = DenseMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(gen_sym_eig(&q, &bad), Err(Error::NotSpd { .. })));
    }

    #[test]
    fn nonsym_triangular_rotation_companion() {
        let t = DenseMatrix::from_rows(&[
            vec![1.0, 5.0, -2.0],
            vec![0.0, 4.0, 3.0],
            vec![0.0, 0.0, -7.0],
        ])
        .unwrap();
        assert_eq!(
            sorted_re(&nonsym_eig(&t, false).unwrap()),
            vec![-7.0, 1.0, 4.0]
        );
        let rot = DenseMatrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        let r = nonsym_eig(&rot, false).unwrap();
        assert!(r
            .values
            .iter()
            .all(|z| z.re.abs() < 1e-15 && (z.im.abs() - 1.0).abs() < 1e-15));
        assert_eq!(r.values[0], r.values[1].conj());
        // (λ−1)(λ−2)(λ−3) = λ³ − 6λ² + 11λ − 6.
        let comp = DenseMatrix::from_rows(&[
            vec![6.0, -11.0, 6.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let ev = sorted_re(&nonsym_eig(&comp, false).unwrap());
        for (v, e) in ev.iter().zip([1.0, 2.0, 3.0]) {
            assert!((v - e).abs() < 1e-10);
        }
    }

    #[test]
    fn nonsym_matches_sym_on_symmetric_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_symmetric(&mut rng, 40);
        let s = sorted_re(&sym_eig(&a).unwrap());
        let r = nonsym_eig(&a, false).unwrap();
        assert!(r.values.iter().all(|z| z.im == 0.0));
        for (p, q) in sorted_re(&r).iter().zip(&s) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn nonsym_vectors_satisfy_eigen_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = DenseMatrix::from_fn(25, 25, |_, _| rng.gen_range(-1.0..1.0));
        let full = nonsym_eig(&a, true).unwrap();
        let vals = nonsym_eig(&a, false).unwrap();
        let vecs = full.vectors.as_ref().unwrap();
        assert!(full.values.iter().any(|z| z.im != 0.0));
        for (lambda, x) in full.values.iter().zip(vecs) {
            assert!(residual(&a, *lambda, x) < 1e-10, "{lambda}");
        }
        for (p, q) in full.values.iter().zip(&vals.values) {
            assert!((p - q).norm() < 1e-10);
        }
    }

    #[test]
    fn nonsym_badly_scaled_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 30;
        let base = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let d: Vec<f64> = (0..n).map(|i| 10f64.powi((i % 7) as i32 - 3)).collect();
        let scaled = DenseMatrix::from_fn(n, n, |i, j| d[i] * base[(i, j)] / d[j]);
        let r1 = nonsym_eig(&base, false).unwrap();
        let r2 = nonsym_eig(&scaled, true).unwrap();
        let key = |z: &Complex64| (z.re, z.im);
        let mut a: Vec<_> = r1.values.iter().map(key).collect();
        let mut b: Vec<_> = r2.values.iter().map(key).collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (p, q) in a.iter().zip(&b) {
            assert!((p.0 - q.0).abs() < 1e-9 && (p.1 - q.1).abs() < 1e-9);
        }
        for (lambda, x) in r2.values.iter().zip(r2.vectors.as_ref().unwrap()) {
            assert!(residual(&scaled, *lambda, x) < 1e-8);
        }
    }

    #[test]
    fn nonsym_size_guard() {
        let big = DenseMatrix::zeros(NONSYM_MAX_DIM + 1, NONSYM_MAX_DIM + 1);
        assert!(matches!(
            nonsym_eig(&big, false),
            Err(Error::SizeLimit { .. })
        ));
    }
}
