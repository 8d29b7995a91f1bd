//! Dense complex linear algebra helpers: rank-revealing kernels and column
//! spaces, minimum-norm solves, subspace angles and block exponentials.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::{CMat, CVec, C64};

pub const ZERO: C64 = Complex64::new(0.0, 0.0);
pub const ONE: C64 = Complex64::new(1.0, 0.0);

/// Thin singular value decomposition `m = u diag(s) v*`, `s` decreasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMat,
    pub singular: Vec<f64>,
    pub v: CMat,
}

impl Svd {
    fn reconstruction_error(&self, m: &CMat) -> f64 {
        let s = CMat::from_diagonal(&CVec::from_iterator(self.singular.len(), self.singular.iter().map(|&x| C64::new(x, 0.0))));
        let k = self.v.ncols();
        let gram = self.v.adjoint() * &self.v - CMat::identity(k, k);
        (&self.u * s * self.v.adjoint() - m).norm().max(gram.norm() * m.norm())
    }
}

/// nalgebra's bidiagonal SVD occasionally returns inconsistent factors for
/// rank-deficient complex input, so every result is checked and replaced by
/// one-sided Jacobi when the check fails.
pub fn svd(m: &CMat) -> Svd {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Svd {
            u: CMat::zeros(r, 0),
            singular: Vec::new(),
            v: CMat::zeros(c, 0),
        };
    }
    if r < c {
        let t = svd(&m.adjoint());
        return Svd {
            u: t.v,
            singular: t.singular,
            v: t.u,
        };
    }
    let raw = m.clone().svd(true, true);
    let candidate = Svd {
        u: raw.u.expect("u requested"),
        singular: raw.singular_values.iter().copied().collect(),
        v: raw.v_t.expect("v requested").adjoint(),
    };
    let ordered = candidate.singular.windows(2).all(|w| w[0] >= w[1]);
    if ordered && candidate.reconstruction_error(m) <= 1e-12 * (1.0 + m.norm()) {
        candidate
    } else {
        jacobi_svd(m)
    }
}

/// One-sided (Hestenes) Jacobi SVD of a tall matrix.
pub fn jacobi_svd(m: &CMat) -> Svd {
    let (rows, cols) = m.shape();
    assert!(rows >= cols, "jacobi_svd expects a tall matrix");
    let mut a = m.clone();
    let mut v = CMat::identity(cols, cols);
    for _sweep in 0..80 {
        let mut rotated = false;
        for i in 0..cols {
            for j in i + 1..cols {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dotc(&a.column(j));
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // rotate column j by the phase of gamma, then a real rotation
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for (mat, len) in [(&mut a, rows), (&mut v, cols)] {
                    for k in 0..len {
                        let x = mat[(k, i)];
                        let y = mat[(k, j)] * phase.conj();
                        mat[(k, i)] = x * cs - y * sn;
                        mat[(k, j)] = x * sn + y * cs;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..cols).map(|k| a.column(k).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let top = norms.iter().copied().fold(0.0, f64::max);
    let mut u = CMat::zeros(rows, cols);
    let mut vs = CMat::zeros(cols, cols);
    let mut singular = Vec::with_capacity(cols);
    let mut filled = 0;
    for (k, &idx) in order.iter().enumerate() {
        vs.set_column(k, &v.column(idx));
        singular.push(norms[idx]);
        if norms[idx] > f64::EPSILON * top * rows as f64 {
            u.set_column(k, &(a.column(idx) / C64::new(norms[idx], 0.0)));
            filled += 1;
        }
    }
    // complete u with the unit vectors that stick out furthest
    for k in filled..cols {
        let mut best = CVec::zeros(rows);
        for e in 0..rows {
            let mut cand = CVec::zeros(rows);
            cand[e] = ONE;
            for _ in 0..2 {
                for p in 0..k {
                    let col = u.column(p).into_owned();
                    cand -= &col * col.dotc(&cand);
                }
            }
            if cand.norm() > best.norm() {
                best = cand;
            }
        }
        let nrm = best.norm();
        u.set_column(k, &(best / C64::new(nrm, 0.0)));
    }
    Svd { u, singular, v: vs }
}

/// Singular values (decreasing) with a full right factor. Wide matrices are
/// padded with zero rows so that the returned `v` is always square.
pub struct FullSvd {
    pub singular: Vec<f64>,
    /// Columns are right singular vectors (`ncols x ncols`).
    pub v: CMat,
}

pub fn full_svd(m: &CMat) -> FullSvd {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return FullSvd {
            singular: Vec::new(),
            v: CMat::identity(c, c),
        };
    }
    let padded;
    let target = if r < c {
        let mut p = CMat::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        padded = p;
        &padded
    } else {
        m
    };
    let d = svd(target);
    FullSvd {
        singular: d.singular,
        v: d.v,
    }
}

pub fn rank_at(singular: &[f64], rel_tol: f64) -> usize {
    let smax = singular.iter().copied().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    singular.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Numerical rank, recomputed at `tol * 10` and `tol / 10`; the three must agree.
pub fn stable_rank(singular: &[f64], tol: f64, context: &str) -> Result<usize> {
    let ranks = [
        rank_at(singular, tol * 10.0),
        rank_at(singular, tol),
        rank_at(singular, tol / 10.0),
    ];
    if ranks[0] != ranks[1] || ranks[1] != ranks[2] {
        return Err(Error::RankUnstable {
            context: context.to_string(),
            ranks,
        });
    }
    Ok(ranks[1])
}

/// As [`stable_rank`], relative to `max(sigma_max, scale)`.
pub fn stable_rank_scaled(singular: &[f64], scale: f64, tol: f64, context: &str) -> Result<usize> {
    let top = singular.iter().copied().fold(scale, f64::max);
    if top == 0.0 {
        return Ok(0);
    }
    let count = |t: f64| singular.iter().filter(|&&s| s > t * top).count();
    let ranks = [count(tol * 10.0), count(tol), count(tol / 10.0)];
    if ranks[0] != ranks[1] || ranks[1] != ranks[2] {
        return Err(Error::RankUnstable {
            context: context.to_string(),
            ranks,
        });
    }
    Ok(ranks[1])
}

pub fn rank(m: &CMat, tol: f64, context: &str) -> Result<usize> {
    stable_rank(&full_svd(m).singular, tol, context)
}

/// Unit factor that makes the first entry of largest magnitude real positive.
pub fn phase_factor(v: &CVec) -> C64 {
    let mut best = 0usize;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        let a = z.norm();
        if a > best_abs * (1.0 + 1e-12) {
            best_abs = a;
            best = i;
        }
    }
    if best_abs > 0.0 {
        v[best].conj() / best_abs
    } else {
        ONE
    }
}

pub fn fix_phase(v: &mut CVec) {
    let p = phase_factor(v);
    *v *= p;
}

/// Orthonormal basis of `ker m` as columns.
pub fn kernel_basis(m: &CMat, tol: f64) -> Result<CMat> {
    kernel_basis_scaled(m, 0.0, tol)
}

/// Kernel with the rank threshold relative to `max(sigma_max, scale)`.
pub fn kernel_basis_scaled(m: &CMat, scale: f64, tol: f64) -> Result<CMat> {
    let c = m.ncols();
    let svd = full_svd(m);
    let r = stable_rank_scaled(&svd.singular, scale, tol, "kernel")?;
    let mut out = CMat::zeros(c, c - r);
    for (k, col) in (r..c).enumerate() {
        let mut v = svd.v.column(col).into_owned();
        fix_phase(&mut v);
        out.set_column(k, &v);
    }
    Ok(out)
}

/// Orthonormal basis `q` of the column space of `m` together with a
/// coefficient matrix `coef` such that `m * coef = q`.
///
/// Singular values count when above `tol * max(sigma_max, scale)`; a
/// positive `scale` keeps rounding noise out of the basis when `m` is
/// numerically zero.
pub fn column_space(m: &CMat, scale: f64, tol: f64, context: &str) -> Result<(CMat, CMat)> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok((CMat::zeros(rows, 0), CMat::zeros(cols, 0)));
    }
    let d = svd(m);
    let s = d.singular;
    let r = stable_rank_scaled(&s, scale, tol, context)?;
    let (u, v) = (d.u, d.v);
    let mut q = CMat::zeros(rows, r);
    let mut coef = CMat::zeros(cols, r);
    for k in 0..r {
        let qk = u.column(k).into_owned();
        let ck = v.column(k).into_owned() / C64::new(s[k], 0.0);
        // same phase on both so that m * coef = q survives
        let p = phase_factor(&qk);
        q.set_column(k, &(qk * p));
        coef.set_column(k, &(ck * p));
    }
    Ok((q, coef))
}

/// Minimum-norm least-squares solution of `m x = b` with singular values
/// below `tol * sigma_max` truncated.
pub fn lstsq(m: &CMat, b: &CVec, tol: f64) -> CVec {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return CVec::zeros(cols);
    }
    pinv(m, tol) * b
}

pub fn pinv(m: &CMat, tol: f64) -> CMat {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return CMat::zeros(cols, rows);
    }
    let d = svd(m);
    let smax = d.singular.iter().copied().fold(0.0, f64::max);
    let mut out = CMat::zeros(cols, rows);
    for (k, &s) in d.singular.iter().enumerate() {
        if smax > 0.0 && s > tol * smax {
            out += d.v.column(k) * d.u.column(k).adjoint() / C64::new(s, 0.0);
        }
    }
    out
}

pub fn spectral_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    svd(m).singular.first().copied().unwrap_or(0.0)
}

/// Sine of the largest principal angle between the column spans of two
/// orthonormal bases. Subspaces of different dimension give `1.0`.
pub fn max_angle_sine(q1: &CMat, q2: &CMat) -> f64 {
    if q1.ncols() != q2.ncols() {
        return 1.0;
    }
    if q1.ncols() == 0 {
        return 0.0;
    }
    let a = residual_outside(q1, q2);
    let b = residual_outside(q2, q1);
    a.max(b)
}

/// `|| (I - Q Q*) X ||_2` for orthonormal `q`: how far the columns of `x`
/// stick out of span `q`.
pub fn residual_outside(q: &CMat, x: &CMat) -> f64 {
    if x.ncols() == 0 {
        return 0.0;
    }
    let proj = if q.ncols() == 0 {
        x.clone()
    } else {
        x - q * (q.adjoint() * x)
    };
    spectral_norm(&proj)
}

/// Hermitian eigenvalues in increasing order and the matching eigenvectors.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Eigenvalues of a general complex square matrix (complex Schur form).
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let (_, t) = m.clone().schur().unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Determinant divided by the Hadamard bound (product of column norms).
/// Zero when some column vanishes.
pub fn relative_det(m: &CMat) -> f64 {
    let bound: f64 = m.column_iter().map(|c| c.norm()).product();
    if bound == 0.0 {
        return 0.0;
    }
    m.determinant().norm() / bound
}

pub fn block_diag(blocks: &[CMat]) -> CMat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn stack_rows(parts: &[&CMat]) -> CMat {
    let cols = parts.first().map(|p| p.ncols()).unwrap_or(0);
    let rows: usize = parts.iter().map(|p| p.nrows()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut r = 0;
    for p in parts {
        assert_eq!(p.ncols(), cols, "stack_rows: column mismatch");
        out.view_mut((r, 0), p.shape()).copy_from(*p);
        r += p.nrows();
    }
    out
}

pub fn stack_vectors(parts: &[CVec]) -> CVec {
    let len: usize = parts.iter().map(|p| p.len()).sum();
    let mut out = CVec::zeros(len);
    let mut r = 0;
    for p in parts {
        out.rows_mut(r, p.len()).copy_from(p);
        r += p.len();
    }
    out
}

pub fn split_vector(v: &CVec, block: usize) -> Vec<CVec> {
    assert!(block > 0 && v.len().is_multiple_of(block));
    (0..v.len() / block)
        .map(|k| v.rows(k * block, block).into_owned())
        .collect()
}

pub fn columns_to_matrix(rows: usize, cols: &[CVec]) -> CMat {
    let mut out = CMat::zeros(rows, cols.len());
    for (k, c) in cols.iter().enumerate() {
        out.set_column(k, c);
    }
    out
}

/// Blocks of `exp(L * [[A, I, 0], [0, 0, I], [0, 0, 0]])`:
/// `exp(LA)`, `int_0^L exp(tA) dt` and `int_0^L int_0^s exp(tA) dt ds`.
pub struct VanLoan {
    pub exp: CMat,
    pub phi1: CMat,
    pub phi2: CMat,
}

pub fn van_loan(a: &CMat, len: f64) -> VanLoan {
    let n = a.nrows();
    let mut big = CMat::zeros(3 * n, 3 * n);
    big.view_mut((0, 0), (n, n)).copy_from(a);
    for i in 0..n {
        big[(i, n + i)] = ONE;
        big[(n + i, 2 * n + i)] = ONE;
    }
    let e = (big * C64::new(len, 0.0)).exp();
    VanLoan {
        exp: e.view((0, 0), (n, n)).into_owned(),
        phi1: e.view((0, n), (n, n)).into_owned(),
        phi2: e.view((0, 2 * n), (n, n)).into_owned(),
    }
}

/// `exp(len * a)` and `int_0^len exp(t a) dt` from a 2x2 block exponential.
pub fn exp_and_integral(a: &CMat, len: f64) -> (CMat, CMat) {
    let n = a.nrows();
    let mut big = CMat::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(a);
    for i in 0..n {
        big[(i, n + i)] = ONE;
    }
    let e = (big * C64::new(len, 0.0)).exp();
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, n)).into_owned(),
    )
}

pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMat {
    DMatrix::from_row_slice(rows, cols, data).map(|x| C64::new(x, 0.0))
}

/// Largest entry modulus.
pub fn max_abs(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frob(m: &CMat) -> f64 {
    m.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_matrix, rng};

    fn check(d: &Svd, m: &CMat) -> f64 {
        let k = d.singular.len();
        let s = CMat::from_diagonal(&CVec::from_iterator(k, d.singular.iter().map(|&x| C64::new(x, 0.0))));
        let rec = (&d.u * s * d.v.adjoint() - m).norm();
        let uu = (d.u.adjoint() * &d.u - CMat::identity(k, k)).norm();
        let vv = (d.v.adjoint() * &d.v - CMat::identity(k, k)).norm();
        assert!(d.singular.windows(2).all(|w| w[0] >= w[1]));
        rec.max(uu).max(vv) / (1.0 + m.norm())
    }

    #[test]
    fn svd_of_rank_deficient_products() {
        let mut r = rng(1);
        let (mut worst, mut worst_jacobi): (f64, f64) = (0.0, 0.0);
        for t in 0..3000 {
            let (rows, cols, k) = (1 + t % 7, 1 + (t / 7) % 7, 1 + (t / 49) % 5);
            let m = random_matrix(rows, k, &mut r) * random_matrix(k, cols, &mut r);
            worst = worst.max(check(&svd(&m), &m));
            if rows >= cols {
                worst_jacobi = worst_jacobi.max(check(&jacobi_svd(&m), &m));
            }
        }
        assert!(worst < 1e-12, "{worst}");
        assert!(worst_jacobi < 1e-12, "{worst_jacobi}");
        let z = CMat::zeros(4, 2);
        assert!(check(&jacobi_svd(&z), &z) < 1e-15);
    }

    #[test]
    fn kernel_of_zero_and_identity() {
        let z = CMat::zeros(3, 3);
        assert_eq!(kernel_basis(&z, 1e-10).unwrap().ncols(), 3);
        let i = CMat::identity(3, 3);
        assert_eq!(kernel_basis(&i, 1e-10).unwrap().ncols(), 0);
    }

    #[test]
    fn kernel_of_wide_matrix_is_complete() {
        let m = real_matrix(1, 3, &[1.0, 1.0, 0.0]);
        let k = kernel_basis(&m, 1e-10).unwrap();
        assert_eq!(k.ncols(), 2);
        assert!((&m * &k).norm() < 1e-14);
        let g = k.adjoint() * &k;
        assert!((g - CMat::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn kernel_phase_convention() {
        let m = real_matrix(1, 2, &[1.0, -1.0]);
        let k = kernel_basis(&m, 1e-10).unwrap();
        let v = k.column(0);
        let (idx, _) = v
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, z)| if z.norm() > acc.1 + 1e-12 { (i, z.norm()) } else { acc });
        assert!(v[idx].im.abs() < 1e-15 && v[idx].re > 0.0);
    }

    #[test]
    fn unstable_rank_is_reported() {
        let s = [1.0, 5e-11];
        assert!(matches!(
            stable_rank(&s, 1e-10, "t"),
            Err(Error::RankUnstable { .. })
        ));
        assert_eq!(stable_rank(&[1.0, 1e-16], 1e-10, "t").unwrap(), 1);
    }

    #[test]
    fn column_space_coefficients_reproduce_basis() {
        let m = real_matrix(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0]);
        let (q, c) = column_space(&m, 0.0, 1e-10, "t").unwrap();
        assert_eq!(q.ncols(), 2);
        assert!((&m * &c - &q).norm() < 1e-12);
    }

    #[test]
    fn complex_schur_eigenvalues() {
        let m = real_matrix(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let mut ev = eigenvalues(&m);
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((ev[0] - C64::new(0.0, -1.0)).norm() < 1e-12);
        assert!((ev[1] - C64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn van_loan_blocks_for_zero_generator() {
        let a = CMat::zeros(2, 2);
        let vl = van_loan(&a, 2.0);
        assert!((vl.exp - CMat::identity(2, 2)).norm() < 1e-14);
        assert!((vl.phi1 - CMat::identity(2, 2) * C64::new(2.0, 0.0)).norm() < 1e-14);
        assert!((vl.phi2 - CMat::identity(2, 2) * C64::new(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn angles_between_equal_and_orthogonal_spans() {
        let e1 = real_matrix(2, 1, &[1.0, 0.0]);
        let e2 = real_matrix(2, 1, &[0.0, 1.0]);
        assert!(max_angle_sine(&e1, &e1) < 1e-15);
        assert!((max_angle_sine(&e1, &e2) - 1.0).abs() < 1e-15);
    }
}
