use super::{shape_err, DenseError, DenseMatrix, MatMut, MatRef, Par};
use crate::scalar::Scalar;

/// Problems with `m*n*k` at or below this run the sequential kernel.
pub const GEMM_THRESHOLD: usize = 64 * 64 * 64;

pub fn gemm_flops(m: usize, n: usize, k: usize) -> u64 {
    2 * (m as u64) * (n as u64) * (k as u64)
}

/// `C <- alpha*A*B + beta*C`, split recursively by shape:
///
/// 1. `m*n*k <= T`: sequential kernel,
/// 2. `n >= max(m,k)`: split the columns of B and C, two tasks,
/// 3. `m >= k`: split the rows of A and C, two tasks,
/// 4. otherwise split the inner dimension and run the halves one after
///    the other.
///
/// Once the depth budget is exhausted the sequential kernel handles the
/// whole remaining block.
pub fn gemm<T: Scalar>(
    alpha: T,
    a: MatRef<'_, T>,
    b: MatRef<'_, T>,
    beta: T,
    c: MatMut<'_, T>,
    par: Par,
) -> Result<(), DenseError> {
    if a.cols() != b.rows() || a.rows() != c.rows() || b.cols() != c.cols() {
        return Err(shape_err(
            "gemm",
            format!(
                "A is {}x{}, B is {}x{}, C is {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols(),
                c.rows(),
                c.cols()
            ),
        ));
    }
    gemm_rec(alpha, a, b, beta, c, par);
    Ok(())
}

/// Convenience `A*B` into a new matrix.
pub fn matmul<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> DenseMatrix<T> {
    let mut c = DenseMatrix::zeros(a.rows(), b.cols());
    gemm(T::one(), a.as_ref(), b.as_ref(), T::zero(), c.as_mut(), Par::current())
        .expect("matmul shape mismatch");
    c
}

pub(crate) fn gemm_rec<T: Scalar>(
    alpha: T,
    a: MatRef<'_, T>,
    b: MatRef<'_, T>,
    beta: T,
    c: MatMut<'_, T>,
    par: Par,
) {
    let (m, k) = (a.rows(), a.cols());
    let n = b.cols();
    if m == 0 || n == 0 {
        return;
    }
    if m * n * k <= GEMM_THRESHOLD || !par.can_spawn() {
        gemm_kernel(alpha, a, b, beta, c);
        return;
    }
    if n >= m.max(k) {
        let h = n / 2;
        let (b0, b1) = b.split_cols(h);
        let (c0, c1) = c.split_cols(h);
        par.join(
            move |p| gemm_rec(alpha, a, b0, beta, c0, p),
            move |p| gemm_rec(alpha, a, b1, beta, c1, p),
        );
    } else if m >= k {
        let h = m / 2;
        let (a0, a1) = a.split_rows(h);
        let (c0, c1) = c.split_rows(h);
        par.join(
            move |p| gemm_rec(alpha, a0, b, beta, c0, p),
            move |p| gemm_rec(alpha, a1, b, beta, c1, p),
        );
    } else {
        let h = k / 2;
        let (a0, a1) = a.split_cols(h);
        let (b0, b1) = b.split_rows(h);
        let mut c = c;
        gemm_rec(alpha, a0, b0, beta, c.rb_mut(), par.child());
        gemm_rec(alpha, a1, b1, T::one(), c, par.child());
    }
}

/// Sequential kernel: four columns of C at a time so each column of A is
/// reused from cache.
fn gemm_kernel<T: Scalar>(alpha: T, a: MatRef<'_, T>, b: MatRef<'_, T>, beta: T, mut c: MatMut<'_, T>) {
    let (m, k) = (a.rows(), a.cols());
    let n = b.cols();
    if beta == T::zero() {
        c.fill(T::zero());
    } else if beta != T::one() {
        for j in 0..n {
            for v in c.col_mut(j) {
                *v *= beta;
            }
        }
    }
    if alpha == T::zero() || k == 0 {
        return;
    }
    let mut j = 0;
    while j + 4 <= n {
        let (c01, c23) = c.rb_mut().sub(0, j, m, 4).split_cols(2);
        let (mut c0, mut c1) = c01.split_cols(1);
        let (mut c2, mut c3) = c23.split_cols(1);
        let (c0, c1, c2, c3) = (c0.col_mut(0), c1.col_mut(0), c2.col_mut(0), c3.col_mut(0));
        for l in 0..k {
            let al = a.col(l);
            let t0 = alpha * b.get(l, j);
            let t1 = alpha * b.get(l, j + 1);
            let t2 = alpha * b.get(l, j + 2);
            let t3 = alpha * b.get(l, j + 3);
            for i in 0..m {
                let x = al[i];
                c0[i] += t0 * x;
                c1[i] += t1 * x;
                c2[i] += t2 * x;
                c3[i] += t3 * x;
            }
        }
        j += 4;
    }
    while j < n {
        let cj = c.col_mut(j);
        for l in 0..k {
            let t = alpha * b.get(l, j);
            if t == T::zero() {
                continue;
            }
            for (ci, &x) in cj.iter_mut().zip(a.col(l)) {
                *ci += t * x;
            }
        }
        j += 1;
    }
}
