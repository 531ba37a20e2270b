//! Dense kernels shared by the TT algebra and the solvers.
//!
//! Everything is column-major `Complex64`, so TT block unfoldings can be
//! handed to faer as zero-copy views.

use faer::linalg::matmul::matmul;
use faer::prelude::*;
use faer::traits::Conjugate;
use faer::{Accum, Mat, MatMut, MatRef, Par};

use crate::{Error, Result, C64};

pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[inline]
pub(crate) fn view(data: &[C64], rows: usize, cols: usize) -> MatRef<'_, C64> {
    MatRef::from_column_major_slice(data, rows, cols)
}

#[inline]
pub(crate) fn view_mut(data: &mut [C64], rows: usize, cols: usize) -> MatMut<'_, C64> {
    MatMut::from_column_major_slice_mut(data, rows, cols)
}

/// `dst = a * b` (or `dst += a * b` when `accumulate`).
#[inline]
pub(crate) fn gemm<A, B>(dst: MatMut<'_, C64>, a: MatRef<'_, A>, b: MatRef<'_, B>, accumulate: bool)
where
    A: Conjugate<Canonical = C64>,
    B: Conjugate<Canonical = C64>,
{
    let beta = if accumulate { Accum::Add } else { Accum::Replace };
    matmul(dst, beta, a, b, ONE, Par::Seq);
}

/// Allocating product returning column-major storage.
pub(crate) fn mul<A, B>(a: MatRef<'_, A>, b: MatRef<'_, B>) -> Vec<C64>
where
    A: Conjugate<Canonical = C64>,
    B: Conjugate<Canonical = C64>,
{
    let mut out = vec![ZERO; a.nrows() * b.ncols()];
    if a.ncols() == 0 {
        return out;
    }
    gemm(view_mut(&mut out, a.nrows(), b.ncols()), a, b, false);
    out
}

pub(crate) fn to_vec(m: MatRef<'_, C64>) -> Vec<C64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub(crate) fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn dotc(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Thin QR: returns `(Q, R)` with `Q` of shape `rows × k`, `R` of shape `k × cols`,
/// `k = min(rows, cols)`.
pub(crate) fn qr(m: MatRef<'_, C64>) -> (Mat<C64>, Mat<C64>) {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return (Mat::zeros(m.nrows(), 0), Mat::zeros(0, m.ncols()));
    }
    let f = m.qr();
    let q = f.compute_thin_Q();
    let r = f.thin_R().to_owned();
    (q, r)
}

/// Rank-revealing truncated SVD `m ≈ U · diag(s) · Vh`.
pub(crate) struct TruncatedSvd {
    pub u: Mat<C64>,
    pub s: Vec<f64>,
    pub vh: Mat<C64>,
    /// Frobenius norm of the discarded part.
    pub discarded: f64,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `diag(s) · Vh`
    pub fn s_vh(&self) -> Mat<C64> {
        Mat::from_fn(self.vh.nrows(), self.vh.ncols(), |i, j| self.vh[(i, j)] * self.s[i])
    }

    /// `U · diag(s)`
    pub fn u_s(&self) -> Mat<C64> {
        Mat::from_fn(self.u.nrows(), self.u.ncols(), |i, j| self.u[(i, j)] * self.s[j])
    }
}

/// Keeps the smallest rank whose discarded tail has Frobenius norm `<= abs_tol`,
/// never below one and never above `max_rank`.
pub(crate) fn truncation_rank(s: &[f64], abs_tol: f64, max_rank: Option<usize>) -> usize {
    let mut tail = 0.0;
    let mut rank = s.len();
    let tol2 = abs_tol * abs_tol;
    while rank > 1 {
        let next = tail + s[rank - 1] * s[rank - 1];
        if next > tol2 {
            break;
        }
        tail = next;
        rank -= 1;
    }
    match max_rank {
        Some(cap) => rank.min(cap.max(1)),
        None => rank,
    }
}

pub(crate) fn svd_truncate(m: MatRef<'_, C64>, abs_tol: f64, max_rank: Option<usize>) -> Result<TruncatedSvd> {
    let (rows, cols) = (m.nrows(), m.ncols());
    // Tall or wide inputs go through a QR first; faer's SVD is much slower than QR.
    if rows > 2 * cols && cols > 0 {
        let (q, r) = qr(m);
        let mut t = svd_truncate(r.as_ref(), abs_tol, max_rank)?;
        let u = mul(q.as_ref(), t.u.as_ref());
        t.u = view(&u, rows, t.rank()).to_owned();
        return Ok(t);
    }
    if cols > 2 * rows && rows > 0 {
        let adj = m.adjoint().to_owned();
        let t = svd_truncate(adj.as_ref(), abs_tol, max_rank)?;
        return Ok(TruncatedSvd { u: t.vh.adjoint().to_owned(), s: t.s, vh: t.u.adjoint().to_owned(), discarded: t.discarded });
    }
    let (u, s, v) = svd_full(m)?;
    let k = truncation_rank(&s, abs_tol, max_rank);
    let discarded = s[k..].iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(TruncatedSvd {
        u: u.subcols(0, k).to_owned(),
        s: s[..k].to_vec(),
        vh: v.subcols(0, k).adjoint().to_owned(),
        discarded,
    })
}

/// Thin SVD returning `(U, s, V)`; empty matrices yield a single zero singular value.
fn svd_full(m: MatRef<'_, C64>) -> Result<(Mat<C64>, Vec<f64>, Mat<C64>)> {
    let (rows, cols) = (m.nrows(), m.ncols());
    if rows == 0 || cols == 0 {
        let mut u = Mat::zeros(rows, 1);
        let mut v = Mat::zeros(cols, 1);
        if rows > 0 {
            u[(0, 0)] = ONE;
        }
        if cols > 0 {
            v[(0, 0)] = ONE;
        }
        return Ok((u, vec![0.0], v));
    }
    let svd = m.thin_svd().map_err(|e| Error::Numerical(format!("svd failed: {e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
    Ok((svd.U().to_owned(), s, svd.V().to_owned()))
}

/// Solves `a x = b` by partially pivoted LU; fails if the result is not finite
/// or the relative residual is poor (singular system).
pub(crate) fn solve_dense(a: MatRef<'_, C64>, b: &[C64]) -> Option<Vec<C64>> {
    let n = a.nrows();
    let rhs = view(b, n, 1);
    let lu = a.partial_piv_lu();
    let x = lu.solve(rhs);
    let x = to_vec(x.as_ref());
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    let ax = mul(a, view(&x, n, 1));
    let res: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
    let bn = norm(b);
    if bn > 0.0 && res > 1e-6 * bn {
        return None;
    }
    Some(x)
}

/// Minimum-norm least-squares solution through a pseudo-inverse that drops
/// singular values below `1e-13·σ_max`.
pub(crate) fn solve_least_squares(a: MatRef<'_, C64>, b: &[C64]) -> Option<Vec<C64>> {
    let (u, s, v) = svd_full(a).ok()?;
    let cutoff = 1e-13 * s.first().copied().unwrap_or(0.0);
    let utb = mul(u.adjoint(), view(b, b.len(), 1));
    let scaled: Vec<C64> = utb.iter().zip(&s).map(|(z, &sv)| if sv > cutoff { z / sv } else { ZERO }).collect();
    let x = mul(v.as_ref(), view(&scaled, scaled.len(), 1));
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(x)
}

/// Inverse of `L ⊗ P ⊗ R` acting on a block `x[a + l(i + n b)]`, i.e.
/// `y[a', i', b'] = Σ L[a', a] P[i', i] R[b', b] x[a, i, b]` inverted factor
/// by factor.
pub(crate) struct KroneckerInverse {
    shape: (usize, usize, usize),
    factors: [faer::linalg::solvers::PartialPivLu<C64>; 3],
}

impl KroneckerInverse {
    pub(crate) fn new(left: MatRef<'_, C64>, mid: MatRef<'_, C64>, right: MatRef<'_, C64>) -> Self {
        let shape = (left.nrows(), mid.nrows(), right.nrows());
        let factors = [left.partial_piv_lu(), mid.partial_piv_lu(), right.partial_piv_lu()];
        Self { shape, factors }
    }

    /// `None` when a factor is numerically singular.
    pub(crate) fn apply(&self, x: &[C64]) -> Option<Vec<C64>> {
        let (l, n, r) = self.shape;
        let [fl, fm, fr] = &self.factors;
        // left factor acts on columns of the (l × nr) unfolding
        let y = fl.solve(view(x, l, n * r));
        // the other two act on rows: solve against the transposed slabs
        let mut y = to_vec(y.as_ref());
        for b in 0..r {
            let slab = &mut y[b * l * n..(b + 1) * l * n];
            let z = fm.solve(view(slab, l, n).transpose());
            let zt = z.transpose().to_owned();
            slab.copy_from_slice(&to_vec(zt.as_ref()));
        }
        let z = fr.solve(view(&y, l * n, r).transpose());
        let out = to_vec(z.transpose().to_owned().as_ref());
        out.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(out)
    }
}

/// Outcome of an iterative local solve.
pub(crate) struct KrylovOutcome {
    pub x: Vec<C64>,
    pub relative_residual: f64,
    pub iterations: usize,
}

/// Restarted right-preconditioned GMRES with modified Gram-Schmidt Arnoldi.
/// Stops early once a full restart cycle makes little progress.
pub(crate) fn gmres<A, P>(
    apply: A,
    precond: P,
    b: &[C64],
    x0: &[C64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> KrylovOutcome
where
    A: Fn(&[C64]) -> Vec<C64>,
    P: Fn(&[C64]) -> Vec<C64>,
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = x0.to_vec();
    if bnorm == 0.0 {
        return KrylovOutcome { x: vec![ZERO; n], relative_residual: 0.0, iterations: 0 };
    }
    let mut total = 0;
    let residual = |x: &[C64]| -> Vec<C64> {
        let ax = apply(x);
        b.iter().zip(&ax).map(|(p, q)| p - q).collect()
    };
    let mut r = residual(&x);
    let mut beta = norm(&r);
    while total < max_iter {
        if beta <= tol * bnorm {
            break;
        }
        let m = restart.min(max_iter - total).max(1);
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
        let mut z_basis: Vec<Vec<C64>> = Vec::with_capacity(m);
        basis.push(r.iter().map(|z| z / beta).collect());
        // Hessenberg columns, Givens rotations, rhs g
        let mut h: Vec<Vec<C64>> = Vec::with_capacity(m);
        let mut cs: Vec<C64> = Vec::with_capacity(m);
        let mut sn: Vec<C64> = Vec::with_capacity(m);
        let mut g = vec![ZERO; m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            let z = precond(&basis[k]);
            let mut w = apply(&z);
            z_basis.push(z);
            let mut col = vec![ZERO; k + 2];
            for (j, v) in basis.iter().enumerate() {
                let hij = dotc(v, &w);
                col[j] = hij;
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= hij * vi;
                }
            }
            let wn = norm(&w);
            col[k + 1] = C64::new(wn, 0.0);
            for j in 0..k {
                let t = cs[j].conj() * col[j] + sn[j].conj() * col[j + 1];
                col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1];
                col[j] = t;
            }
            let (c, s) = givens(col[k], col[k + 1]);
            col[k] = c.conj() * col[k] + s.conj() * col[k + 1];
            col[k + 1] = ZERO;
            g[k + 1] = -s * g[k];
            g[k] = c.conj() * g[k];
            cs.push(c);
            sn.push(s);
            h.push(col);
            k_used = k + 1;
            total += 1;
            if g[k + 1].norm() <= tol * bnorm || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|z| z / wn).collect());
        }
        // back substitution
        let mut y = vec![ZERO; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= h[j][i] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        for (yj, zj) in y.iter().zip(&z_basis) {
            for (xi, zi) in x.iter_mut().zip(zj) {
                *xi += yj * zi;
            }
        }
        r = residual(&x);
        let previous = beta;
        beta = norm(&r);
        // a restart cycle that fails to halve the residual has stagnated
        if !beta.is_finite() || beta > 0.5 * previous {
            break;
        }
    }
    KrylovOutcome { relative_residual: beta / bnorm, x, iterations: total }
}

/// Rotation `(c, s)` with `c̄ a + s̄ b = r`, `-s a + c b = 0`.
fn givens(a: C64, b: C64) -> (C64, C64) {
    let nrm = (a.norm_sqr() + b.norm_sqr()).sqrt();
    if nrm == 0.0 {
        return (ONE, ZERO);
    }
    (a / nrm, b / nrm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(n: usize, shift: f64) -> Mat<C64> {
        Mat::from_fn(n, n, |i, j| {
            let v = C64::new(((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5, ((i + 2 * j) % 5) as f64 / 10.0);
            if i == j {
                v + shift
            } else {
                v
            }
        })
    }

    #[test]
    fn truncation_rank_respects_tolerance() {
        let s = [3.0, 1.0, 0.1, 0.01];
        assert_eq!(truncation_rank(&s, 0.0, None), 4);
        assert_eq!(truncation_rank(&s, 0.02, None), 3);
        assert_eq!(truncation_rank(&s, 0.2, None), 2);
        assert_eq!(truncation_rank(&s, 100.0, None), 1);
        assert_eq!(truncation_rank(&s, 0.0, Some(2)), 2);
    }

    #[test]
    fn svd_truncate_reconstructs_tall_and_wide() {
        for &(r, c) in &[(12usize, 3usize), (3, 12), (5, 5)] {
            let m = Mat::from_fn(r, c, |i, j| C64::new((i as f64 + 1.0).sin() * (j as f64 + 0.5), (i * j) as f64 * 0.1));
            let t = svd_truncate(m.as_ref(), 1e-14, None).unwrap();
            let rec = mul(t.u.as_ref(), t.s_vh().as_ref());
            let orig = to_vec(m.as_ref());
            let err: f64 = rec.iter().zip(&orig).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            assert!(err < 1e-12, "{r}x{c}: {err}");
        }
    }

    #[test]
    fn gmres_matches_lu() {
        let n = 40;
        let a = test_matrix(n, 3.0);
        let b: Vec<C64> = (0..n).map(|i| C64::new(i as f64, 1.0)).collect();
        let direct = solve_dense(a.as_ref(), &b).unwrap();
        let apply = |x: &[C64]| mul(a.as_ref(), view(x, n, 1));
        let out = gmres(apply, |x: &[C64]| x.to_vec(), &b, &vec![ZERO; n], 1e-12, 15, 400);
        assert!(out.relative_residual < 1e-11);
        let err: f64 = out.x.iter().zip(&direct).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-9 * norm(&direct));
    }

    #[test]
    fn singular_system_is_rejected() {
        let a = Mat::<C64>::zeros(3, 3);
        assert!(solve_dense(a.as_ref(), &[ONE, ONE, ONE]).is_none());
    }

    #[test]
    fn least_squares_gives_minimum_norm_solution() {
        // rank one: [[1, 1], [1, 1]] x = [2, 2] has minimum-norm solution [1, 1]
        let a = Mat::from_fn(2, 2, |_, _| ONE);
        let x = solve_least_squares(a.as_ref(), &[ONE * 2.0, ONE * 2.0]).unwrap();
        assert!((x[0] - ONE).norm() < 1e-12 && (x[1] - ONE).norm() < 1e-12, "{x:?}");
        let z = Mat::<C64>::zeros(2, 2);
        assert_eq!(solve_least_squares(z.as_ref(), &[ONE, ONE]).unwrap(), vec![ZERO, ZERO]);
    }

    #[test]
    fn kronecker_inverse_undoes_factored_product() {
        let (l, n, r) = (3, 2, 4);
        let (a, b, c) = (test_matrix(l, 2.0), test_matrix(n, 1.5), test_matrix(r, 3.0));
        let x: Vec<C64> = (0..l * n * r).map(|k| C64::new(k as f64 * 0.1, 1.0 - k as f64 * 0.05)).collect();
        let mut y = vec![ZERO; x.len()];
        for bp in 0..r {
            for ip in 0..n {
                for ap in 0..l {
                    let mut acc = ZERO;
                    for bb in 0..r {
                        for i in 0..n {
                            for aa in 0..l {
                                acc += a[(ap, aa)] * b[(ip, i)] * c[(bp, bb)] * x[aa + l * (i + n * bb)];
                            }
                        }
                    }
                    y[ap + l * (ip + n * bp)] = acc;
                }
            }
        }
        let back = KroneckerInverse::new(a.as_ref(), b.as_ref(), c.as_ref()).apply(&y).unwrap();
        let err: f64 = back.iter().zip(&x).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }
}