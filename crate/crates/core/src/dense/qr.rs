use super::{DenseMatrix, MatMut};
use crate::scalar::{norm2, Scalar};

/// Builds the reflector `H = I - tau v v^*` with `v[0] = 1` such that
/// `H^* x = beta e_1`. On return `x[1..]` holds `v[1..]` and `x[0]` holds beta.
fn make_householder<T: Scalar>(x: &mut [T]) -> T {
    let alpha = x[0];
    let xnorm = norm2(&x[1..]);
    if xnorm == 0.0 && alpha.abs() == 0.0 {
        return T::zero();
    }
    if xnorm == 0.0 {
        // already a multiple of e_1
        return T::zero();
    }
    let norm = (alpha.abs2() + xnorm * xnorm).sqrt();
    let beta = if alpha.re() >= 0.0 { -norm } else { norm };
    let tau = (T::from_f64(beta) - alpha) / T::from_f64(beta);
    let inv = T::one() / (alpha - T::from_f64(beta));
    for v in &mut x[1..] {
        *v *= inv;
    }
    x[0] = T::from_f64(beta);
    tau
}

/// Applies `H^* = I - conj(tau) v v^*` from the left to `c` (rows aligned with `v`).
fn apply_householder_left<T: Scalar>(v_tail: &[T], tau: T, mut c: MatMut<'_, T>) {
    if tau == T::zero() {
        return;
    }
    let tau_c = tau.conj();
    for j in 0..c.cols() {
        let col = c.col_mut(j);
        // w = v^* c_j
        let mut w = col[0];
        for (vi, ci) in v_tail.iter().zip(&col[1..]) {
            w += vi.conj() * *ci;
        }
        let s = tau_c * w;
        col[0] -= s;
        for (vi, ci) in v_tail.iter().zip(col[1..].iter_mut()) {
            *ci -= s * *vi;
        }
    }
}

/// Applies `H = I - tau v v^*` from the left.
fn apply_householder_left_noconj<T: Scalar>(v_tail: &[T], tau: T, c: MatMut<'_, T>) {
    apply_householder_left(v_tail, tau.conj(), c)
}

/// Unpivoted Householder QR in compact form.
#[derive(Clone, Debug)]
pub struct HouseholderQr<T> {
    qr: DenseMatrix<T>,
    tau: Vec<T>,
}

pub fn householder_qr<T: Scalar>(mut a: DenseMatrix<T>) -> HouseholderQr<T> {
    let (m, n) = (a.rows(), a.cols());
    let kmax = m.min(n);
    let mut tau = Vec::with_capacity(kmax);
    for k in 0..kmax {
        let t = {
            let col = &mut a.col_mut(k)[k..];
            make_householder(col)
        };
        tau.push(t);
        if k + 1 < n {
            let v_tail: Vec<T> = a.col(k)[k + 1..].to_vec();
            let c = a.as_mut().sub(k, k + 1, m - k, n - k - 1);
            apply_householder_left(&v_tail, t, c);
        }
    }
    HouseholderQr { qr: a, tau }
}

impl<T: Scalar> HouseholderQr<T> {
    /// Upper-triangular (or trapezoidal) `min(m,n) x n` factor.
    pub fn r(&self) -> DenseMatrix<T> {
        let k = self.tau.len();
        DenseMatrix::from_fn(k, self.qr.cols(), |i, j| if i <= j { self.qr[(i, j)] } else { T::zero() })
    }

    /// Leading `ncols` columns of the orthogonal factor `Q = H_0 H_1 ...`.
    pub fn q(&self, ncols: usize) -> DenseMatrix<T> {
        let m = self.qr.rows();
        let mut q = DenseMatrix::zeros(m, ncols);
        for i in 0..ncols.min(m) {
            q[(i, i)] = T::one();
        }
        for k in (0..self.tau.len()).rev() {
            let v_tail: Vec<T> = self.qr.col(k)[k + 1..].to_vec();
            let c = q.as_mut().sub(k, 0, m - k, ncols);
            apply_householder_left_noconj(&v_tail, self.tau[k], c);
        }
        q
    }
}

/// `A = [L 0] Q` with `L` (`m x m`, lower triangular) and unitary `Q`
/// (`n x n`), for a wide or square `m x n` matrix. Computed from the QR
/// factorization of `A^*`.
pub fn lq<T: Scalar>(a: &DenseMatrix<T>) -> (DenseMatrix<T>, DenseMatrix<T>) {
    let (m, n) = (a.rows(), a.cols());
    assert!(m <= n, "lq needs a wide matrix, got {m}x{n}");
    let f = householder_qr(a.adjoint());
    let qhat = f.q(n);
    let r = f.r();
    let l = DenseMatrix::from_fn(m, m, |i, j| if i >= j { r[(j, i)].conj() } else { T::zero() });
    (l, qhat.adjoint())
}

/// Column-pivoted QR halted at the numerical rank.
#[derive(Clone, Debug)]
pub struct Rrqr<T> {
    qr: DenseMatrix<T>,
    tau: Vec<T>,
    /// `perm[i]` is the original index of the i-th pivoted column.
    pub perm: Vec<usize>,
    pub rank: usize,
}

/// Tolerance-stopped column-pivoted Householder QR.
///
/// Step `i` picks the remaining column with the largest residual norm (ties
/// go to the lowest original column index). The factorization halts before
/// step `i` when `|R_ii| / |R_00| <= eps` or `i == max_rank`; the detected
/// rank is `i`. Downdated column norms are recomputed from scratch once the
/// downdated square drops below a tenth of its last exact value.
pub fn rrqr_tolerance<T: Scalar>(mut a: DenseMatrix<T>, eps: f64, max_rank: usize) -> Rrqr<T> {
    let (m, n) = (a.rows(), a.cols());
    let kmax = m.min(n).min(max_rank);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut norms: Vec<f64> = (0..n).map(|j| norm2(a.col(j))).collect();
    let mut exact: Vec<f64> = norms.iter().map(|v| v * v).collect();
    let mut tau = Vec::with_capacity(kmax);
    let mut r00 = 0.0;
    let mut rank = 0;
    for i in 0..kmax {
        let mut p = i;
        for j in i + 1..n {
            if norms[j] > norms[p] || (norms[j] == norms[p] && perm[j] < perm[p]) {
                p = j;
            }
        }
        if i == 0 {
            r00 = norms[p];
            if r00 == 0.0 {
                break;
            }
        } else if norms[p] <= eps * r00 {
            break;
        }
        if p != i {
            swap_cols(&mut a, i, p);
            perm.swap(i, p);
            norms.swap(i, p);
            exact.swap(i, p);
        }
        let t = make_householder(&mut a.col_mut(i)[i..]);
        tau.push(t);
        if i + 1 < n {
            let v_tail: Vec<T> = a.col(i)[i + 1..].to_vec();
            let c = a.as_mut().sub(i, i + 1, m - i, n - i - 1);
            apply_householder_left(&v_tail, t, c);
        }
        for j in i + 1..n {
            if norms[j] == 0.0 {
                continue;
            }
            let r = a[(i, j)].abs() / norms[j];
            let factor = (1.0 - r * r).max(0.0);
            let downdated = norms[j] * norms[j] * factor;
            if downdated <= 0.1 * exact[j] {
                let fresh = norm2(&a.col(j)[i + 1..]);
                norms[j] = fresh;
                exact[j] = fresh * fresh;
            } else {
                norms[j] = downdated.sqrt();
            }
        }
        rank = i + 1;
    }
    Rrqr { qr: a, tau, perm, rank }
}

fn swap_cols<T: Scalar>(a: &mut DenseMatrix<T>, i: usize, j: usize) {
    if i == j {
        return;
    }
    let m = a.rows();
    let (lo, hi) = (i.min(j), i.max(j));
    let data = a.as_mut_slice();
    let (left, right) = data.split_at_mut(hi * m);
    left[lo * m..(lo + 1) * m].swap_with_slice(&mut right[..m]);
}

impl<T: Scalar> Rrqr<T> {
    /// Leading `rank x rank` upper triangle.
    pub fn r1(&self) -> DenseMatrix<T> {
        let k = self.rank;
        DenseMatrix::from_fn(k, k, |i, j| if i <= j { self.qr[(i, j)] } else { T::zero() })
    }

    /// `rank x (n - rank)` block to the right of `R1`.
    pub fn r2(&self) -> DenseMatrix<T> {
        let k = self.rank;
        self.qr.block(0, k, k, self.qr.cols() - k)
    }

    /// Explicit `m x rank` orthonormal factor.
    pub fn q(&self) -> DenseMatrix<T> {
        let m = self.qr.rows();
        let k = self.rank;
        let mut q = DenseMatrix::zeros(m, k);
        for i in 0..k {
            q[(i, i)] = T::one();
        }
        for i in (0..k).rev() {
            let v_tail: Vec<T> = self.qr.col(i)[i + 1..].to_vec();
            let c = q.as_mut().sub(i, 0, m - i, k);
            apply_householder_left_noconj(&v_tail, self.tau[i], c);
        }
        q
    }

    pub fn diag_r(&self) -> Vec<f64> {
        (0..self.rank).map(|i| self.qr[(i, i)].abs()).collect()
    }
}
