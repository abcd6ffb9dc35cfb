use super::gemm::gemm_rec;
use super::{shape_err, DenseError, MatMut, MatRef, Par};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Uplo {
    Lower,
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Diag {
    Unit,
    NonUnit,
}

const TRI_BASE: usize = 32;

/// Triangular solve with many right-hand sides: `B <- T^{-1} B` (left) or
/// `B <- B T^{-1}` (right). The triangle is split in half recursively; wide
/// right-hand sides are also split into independent column (or row) tasks.
pub fn trsm<T: Scalar>(
    side: Side,
    uplo: Uplo,
    diag: Diag,
    t: MatRef<'_, T>,
    b: MatMut<'_, T>,
    par: Par,
) -> Result<(), DenseError> {
    let n = t.rows();
    if t.cols() != n {
        return Err(shape_err("trsm", "triangular operand is not square"));
    }
    let dim = match side {
        Side::Left => b.rows(),
        Side::Right => b.cols(),
    };
    if dim != n {
        return Err(shape_err(
            "trsm",
            format!("triangle is {n}x{n}, right-hand side is {}x{}", b.rows(), b.cols()),
        ));
    }
    if diag == Diag::NonUnit {
        if let Some(column) = (0..n).find(|&i| t.get(i, i) == T::zero()) {
            return Err(DenseError::Singular { column });
        }
    }
    trsm_rec(side, uplo, diag, t, b, par);
    Ok(())
}

fn trsm_rec<T: Scalar>(side: Side, uplo: Uplo, diag: Diag, t: MatRef<'_, T>, b: MatMut<'_, T>, par: Par) {
    let n = t.rows();
    if n == 0 || b.rows() == 0 || b.cols() == 0 {
        return;
    }
    // independent right-hand sides
    let nrhs = match side {
        Side::Left => b.cols(),
        Side::Right => b.rows(),
    };
    if par.can_spawn() && nrhs > 2 * TRI_BASE && nrhs * n * n > super::GEMM_THRESHOLD {
        let h = nrhs / 2;
        let (b0, b1) = match side {
            Side::Left => b.split_cols(h),
            Side::Right => b.split_rows(h),
        };
        par.join(
            move |p| trsm_rec(side, uplo, diag, t, b0, p),
            move |p| trsm_rec(side, uplo, diag, t, b1, p),
        );
        return;
    }
    if n <= TRI_BASE {
        trsm_base(side, uplo, diag, t, b);
        return;
    }
    let h = n / 2;
    let t11 = t.sub(0, 0, h, h);
    let t22 = t.sub(h, h, n - h, n - h);
    let one = T::one();
    match (side, uplo) {
        (Side::Left, Uplo::Lower) => {
            let t21 = t.sub(h, 0, n - h, h);
            let (mut b1, mut b2) = b.split_rows(h);
            trsm_rec(side, uplo, diag, t11, b1.rb_mut(), par);
            gemm_rec(-one, t21, b1.rb(), one, b2.rb_mut(), par);
            trsm_rec(side, uplo, diag, t22, b2, par);
        }
        (Side::Left, Uplo::Upper) => {
            let t12 = t.sub(0, h, h, n - h);
            let (mut b1, mut b2) = b.split_rows(h);
            trsm_rec(side, uplo, diag, t22, b2.rb_mut(), par);
            gemm_rec(-one, t12, b2.rb(), one, b1.rb_mut(), par);
            trsm_rec(side, uplo, diag, t11, b1, par);
        }
        (Side::Right, Uplo::Upper) => {
            let t12 = t.sub(0, h, h, n - h);
            let (mut b1, mut b2) = b.split_cols(h);
            trsm_rec(side, uplo, diag, t11, b1.rb_mut(), par);
            gemm_rec(-one, b1.rb(), t12, one, b2.rb_mut(), par);
            trsm_rec(side, uplo, diag, t22, b2, par);
        }
        (Side::Right, Uplo::Lower) => {
            let t21 = t.sub(h, 0, n - h, h);
            let (mut b1, mut b2) = b.split_cols(h);
            trsm_rec(side, uplo, diag, t22, b2.rb_mut(), par);
            gemm_rec(-one, b2.rb(), t21, one, b1.rb_mut(), par);
            trsm_rec(side, uplo, diag, t11, b1, par);
        }
    }
}

fn trsm_base<T: Scalar>(side: Side, uplo: Uplo, diag: Diag, t: MatRef<'_, T>, mut b: MatMut<'_, T>) {
    let n = t.rows();
    let unit = diag == Diag::Unit;
    match (side, uplo) {
        (Side::Left, Uplo::Lower) => {
            for j in 0..b.cols() {
                let x = b.col_mut(j);
                for k in 0..n {
                    if !unit {
                        x[k] /= t.get(k, k);
                    }
                    let xk = x[k];
                    if xk != T::zero() {
                        let tk = t.col(k);
                        for i in k + 1..n {
                            x[i] -= xk * tk[i];
                        }
                    }
                }
            }
        }
        (Side::Left, Uplo::Upper) => {
            for j in 0..b.cols() {
                let x = b.col_mut(j);
                for k in (0..n).rev() {
                    if !unit {
                        x[k] /= t.get(k, k);
                    }
                    let xk = x[k];
                    if xk != T::zero() {
                        let tk = t.col(k);
                        for i in 0..k {
                            x[i] -= xk * tk[i];
                        }
                    }
                }
            }
        }
        (Side::Right, Uplo::Upper) => {
            // X T = B, column j of X depends on columns < j
            for j in 0..n {
                for k in 0..j {
                    let tkj = t.get(k, j);
                    if tkj != T::zero() {
                        for i in 0..b.rows() {
                            let v = b.get(i, k);
                            *b.at(i, j) -= v * tkj;
                        }
                    }
                }
                if !unit {
                    let d = t.get(j, j);
                    for v in b.col_mut(j) {
                        *v /= d;
                    }
                }
            }
        }
        (Side::Right, Uplo::Lower) => {
            for j in (0..n).rev() {
                for k in j + 1..n {
                    let tkj = t.get(k, j);
                    if tkj != T::zero() {
                        for i in 0..b.rows() {
                            let v = b.get(i, k);
                            *b.at(i, j) -= v * tkj;
                        }
                    }
                }
                if !unit {
                    let d = t.get(j, j);
                    for v in b.col_mut(j) {
                        *v /= d;
                    }
                }
            }
        }
    }
}

/// Triangular multiply: `B <- T B` (left) or `B <- B T` (right).
pub fn trmm<T: Scalar>(
    side: Side,
    uplo: Uplo,
    diag: Diag,
    t: MatRef<'_, T>,
    b: MatMut<'_, T>,
    par: Par,
) -> Result<(), DenseError> {
    let n = t.rows();
    if t.cols() != n {
        return Err(shape_err("trmm", "triangular operand is not square"));
    }
    let dim = match side {
        Side::Left => b.rows(),
        Side::Right => b.cols(),
    };
    if dim != n {
        return Err(shape_err(
            "trmm",
            format!("triangle is {n}x{n}, operand is {}x{}", b.rows(), b.cols()),
        ));
    }
    trmm_rec(side, uplo, diag, t, b, par);
    Ok(())
}

fn trmm_rec<T: Scalar>(side: Side, uplo: Uplo, diag: Diag, t: MatRef<'_, T>, b: MatMut<'_, T>, par: Par) {
    let n = t.rows();
    if n == 0 || b.rows() == 0 || b.cols() == 0 {
        return;
    }
    if n <= TRI_BASE {
        trmm_base(side, uplo, diag, t, b);
        return;
    }
    let h = n / 2;
    let t11 = t.sub(0, 0, h, h);
    let t22 = t.sub(h, h, n - h, n - h);
    let one = T::one();
    match (side, uplo) {
        (Side::Left, Uplo::Lower) => {
            // [B1; B2] <- [T11 B1; T21 B1 + T22 B2]
            let t21 = t.sub(h, 0, n - h, h);
            let (b1, mut b2) = b.split_rows(h);
            trmm_rec(side, uplo, diag, t22, b2.rb_mut(), par);
            gemm_rec(one, t21, b1.rb(), one, b2.rb_mut(), par);
            trmm_rec(side, uplo, diag, t11, b1, par);
        }
        (Side::Left, Uplo::Upper) => {
            let t12 = t.sub(0, h, h, n - h);
            let (mut b1, b2) = b.split_rows(h);
            trmm_rec(side, uplo, diag, t11, b1.rb_mut(), par);
            gemm_rec(one, t12, b2.rb(), one, b1.rb_mut(), par);
            trmm_rec(side, uplo, diag, t22, b2, par);
        }
        (Side::Right, Uplo::Upper) => {
            // [B1 B2] T = [B1 T11, B1 T12 + B2 T22]
            let t12 = t.sub(0, h, h, n - h);
            let (b1, mut b2) = b.split_cols(h);
            trmm_rec(side, uplo, diag, t22, b2.rb_mut(), par);
            gemm_rec(one, b1.rb(), t12, one, b2.rb_mut(), par);
            trmm_rec(side, uplo, diag, t11, b1, par);
        }
        (Side::Right, Uplo::Lower) => {
            // [B1 B2] T = [B1 T11 + B2 T21, B2 T22]
            let t21 = t.sub(h, 0, n - h, h);
            let (mut b1, b2) = b.split_cols(h);
            trmm_rec(side, uplo, diag, t11, b1.rb_mut(), par);
            gemm_rec(one, b2.rb(), t21, one, b1.rb_mut(), par);
            trmm_rec(side, uplo, diag, t22, b2, par);
        }
    }
}

fn trmm_base<T: Scalar>(side: Side, uplo: Uplo, diag: Diag, t: MatRef<'_, T>, mut b: MatMut<'_, T>) {
    let n = t.rows();
    let unit = diag == Diag::Unit;
    let entry = |i: usize, j: usize| -> T {
        if i == j {
            if unit {
                T::one()
            } else {
                t.get(i, i)
            }
        } else if (uplo == Uplo::Lower && i > j) || (uplo == Uplo::Upper && i < j) {
            t.get(i, j)
        } else {
            T::zero()
        }
    };
    match side {
        Side::Left => {
            let mut tmp = vec![T::zero(); n];
            for j in 0..b.cols() {
                for (i, ti) in tmp.iter_mut().enumerate() {
                    *ti = (0..n).map(|k| entry(i, k) * b.get(k, j)).sum();
                }
                b.col_mut(j).copy_from_slice(&tmp);
            }
        }
        Side::Right => {
            let mut tmp = vec![T::zero(); n];
            for i in 0..b.rows() {
                for (j, tj) in tmp.iter_mut().enumerate() {
                    *tj = (0..n).map(|k| b.get(i, k) * entry(k, j)).sum();
                }
                for (j, &v) in tmp.iter().enumerate() {
                    b.set(i, j, v);
                }
            }
        }
    }
}

/// Applies LAPACK-style row interchanges: row `i` is swapped with `piv[i]`,
/// for `i` ascending (`forward`) or descending (to undo them).
pub fn laswp<T: Scalar>(mut a: MatMut<'_, T>, piv: &[usize], forward: bool) {
    if forward {
        for (i, &p) in piv.iter().enumerate() {
            a.swap_rows(i, p);
        }
    } else {
        for (i, &p) in piv.iter().enumerate().rev() {
            a.swap_rows(i, p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{matmul, DenseMatrix};

    fn rand_matrix(m: usize, n: usize, seed: u64) -> DenseMatrix<f64> {
        let mut s = seed;
        DenseMatrix::from_fn(m, n, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    fn triangle(n: usize, uplo: Uplo, seed: u64) -> DenseMatrix<f64> {
        let r = rand_matrix(n, n, seed);
        DenseMatrix::from_fn(n, n, |i, j| match uplo {
            _ if i == j => 2.0 + r[(i, j)],
            Uplo::Lower if i > j => r[(i, j)] / n as f64,
            Uplo::Upper if i < j => r[(i, j)] / n as f64,
            _ => 0.0,
        })
    }

    #[test]
    fn unit_identity_leaves_rhs() {
        let t = DenseMatrix::<f64>::identity(5);
        let b0 = rand_matrix(5, 3, 1);
        let mut b = b0.clone();
        trsm(Side::Left, Uplo::Lower, Diag::NonUnit, t.as_ref(), b.as_mut(), Par::SEQ).unwrap();
        assert_eq!(b, b0);
    }

    #[test]
    fn bidiagonal_forward_substitution() {
        // L = I with -1 on the subdiagonal: L x = e1 gives x = ones
        let n = 6;
        let l = DenseMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0
            } else if i == j + 1 {
                -1.0
            } else {
                0.0
            }
        });
        let mut b = DenseMatrix::zeros(n, 1);
        b[(0, 0)] = 1.0;
        trsm(Side::Left, Uplo::Lower, Diag::NonUnit, l.as_ref(), b.as_mut(), Par::SEQ).unwrap();
        assert!(b.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn all_variants_multiply_back() {
        let n = 100;
        for side in [Side::Left, Side::Right] {
            for uplo in [Uplo::Lower, Uplo::Upper] {
                for diag in [Diag::Unit, Diag::NonUnit] {
                    let mut t = triangle(n, uplo, 3);
                    if diag == Diag::Unit {
                        for i in 0..n {
                            t[(i, i)] = 1.0;
                        }
                    }
                    let b0 = match side {
                        Side::Left => rand_matrix(n, 7, 4),
                        Side::Right => rand_matrix(7, n, 4),
                    };
                    let mut x = b0.clone();
                    trsm(side, uplo, diag, t.as_ref(), x.as_mut(), Par::for_threads(4)).unwrap();
                    let back = match side {
                        Side::Left => matmul(&t, &x),
                        Side::Right => matmul(&x, &t),
                    };
                    let res = back.sub_matrix(&b0).frobenius_norm() / b0.frobenius_norm();
                    assert!(res <= 1e-13, "{side:?} {uplo:?} {diag:?}: {res}");

                    let mut y = b0.clone();
                    trmm(side, uplo, diag, t.as_ref(), y.as_mut(), Par::for_threads(4)).unwrap();
                    let expect = match side {
                        Side::Left => matmul(&t, &b0),
                        Side::Right => matmul(&b0, &t),
                    };
                    let err = y.sub_matrix(&expect).frobenius_norm() / expect.frobenius_norm();
                    assert!(err <= 1e-13, "trmm {side:?} {uplo:?} {diag:?}: {err}");
                }
            }
        }
    }

    #[test]
    fn zero_diagonal_is_singular() {
        let mut t = triangle(4, Uplo::Upper, 5);
        t[(2, 2)] = 0.0;
        let mut b = rand_matrix(4, 1, 6);
        let err = trsm(Side::Left, Uplo::Upper, Diag::NonUnit, t.as_ref(), b.as_mut(), Par::SEQ);
        assert_eq!(err, Err(DenseError::Singular { column: 2 }));
    }

    #[test]
    fn laswp_round_trip() {
        let a0 = rand_matrix(5, 3, 7);
        let mut a = a0.clone();
        let piv = [3, 1, 4, 4, 4];
        laswp(a.as_mut(), &piv, true);
        assert_eq!(a[(0, 0)], a0[(3, 0)]);
        laswp(a.as_mut(), &piv, false);
        assert_eq!(a, a0);
    }
}
