use super::gemm::{gemm_rec, matmul};
use super::triangular::{laswp, trsm, Diag, Side, Uplo};
use super::{shape_err, DenseError, DenseMatrix, MatMut, Par};
use crate::scalar::Scalar;

/// `P A = L U` with unit-lower `L` and upper `U` packed into one matrix.
#[derive(Clone, Debug)]
pub struct LuFactors<T> {
    lu: DenseMatrix<T>,
    /// Row `i` was interchanged with row `piv[i]` (applied in order).
    piv: Vec<usize>,
}

const LU_BASE: usize = 16;

/// Recursive partial-pivoted LU. The left half of the columns is factored,
/// the pivots are applied to the right half, then a triangular solve and a
/// GEMM update precede the recursive factorization of the trailing block.
/// All parallelism comes from the tasked TRSM and GEMM.
pub fn lu_partial_pivot<T: Scalar>(mut a: DenseMatrix<T>, par: Par) -> Result<LuFactors<T>, DenseError> {
    if a.rows() != a.cols() {
        return Err(shape_err("lu", format!("{}x{} is not square", a.rows(), a.cols())));
    }
    let mut piv = vec![0; a.rows()];
    lu_rec(a.as_mut(), &mut piv, 0, par)?;
    Ok(LuFactors { lu: a, piv })
}

fn lu_rec<T: Scalar>(mut a: MatMut<'_, T>, piv: &mut [usize], col0: usize, par: Par) -> Result<(), DenseError> {
    let n = a.cols();
    if n <= LU_BASE {
        return lu_unblocked(a, piv, col0);
    }
    let h = n / 2;
    let (mut left, mut right) = a.rb_mut().split_cols(h);
    lu_rec(left.rb_mut(), &mut piv[..h], col0, par)?;
    laswp(right.rb_mut(), &piv[..h], true);
    let (l_top, l_bot) = left.rb().split_rows(h);
    let (mut r_top, mut r_bot) = right.split_rows(h);
    let l11 = l_top.sub(0, 0, h, h);
    trsm(Side::Left, Uplo::Lower, Diag::Unit, l11, r_top.rb_mut(), par)?;
    gemm_rec(-T::one(), l_bot, r_top.rb(), T::one(), r_bot.rb_mut(), par);
    lu_rec(r_bot, &mut piv[h..], col0 + h, par)?;
    for p in &mut piv[h..] {
        *p += h;
    }
    let (_, left_bot) = left.split_rows(h);
    // the trailing pivots are relative to row h
    let rel: Vec<usize> = piv[h..].iter().map(|p| p - h).collect();
    laswp(left_bot, &rel, true);
    Ok(())
}

fn lu_unblocked<T: Scalar>(mut a: MatMut<'_, T>, piv: &mut [usize], col0: usize) -> Result<(), DenseError> {
    let (m, n) = (a.rows(), a.cols());
    for k in 0..n {
        let col = a.col(k);
        let mut p = k;
        let mut best = col[k].abs();
        for (i, v) in col.iter().enumerate().skip(k + 1) {
            let x = v.abs();
            if x > best {
                best = x;
                p = i;
            }
        }
        if best == 0.0 {
            return Err(DenseError::Singular { column: col0 + k });
        }
        piv[k] = p;
        a.swap_rows(k, p);
        let d = a.get(k, k);
        {
            let ck = a.col_mut(k);
            for v in &mut ck[k + 1..m] {
                *v /= d;
            }
        }
        let lk: Vec<T> = a.col(k)[k + 1..m].to_vec();
        for j in k + 1..n {
            let akj = a.get(k, j);
            if akj == T::zero() {
                continue;
            }
            let cj = a.col_mut(j);
            for (c, l) in cj[k + 1..m].iter_mut().zip(&lk) {
                *c -= *l * akj;
            }
        }
    }
    Ok(())
}

impl<T: Scalar> LuFactors<T> {
    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn pivots(&self) -> &[usize] {
        &self.piv
    }

    pub fn packed(&self) -> &DenseMatrix<T> {
        &self.lu
    }

    pub fn l(&self) -> DenseMatrix<T> {
        let n = self.dim();
        DenseMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.lu[(i, j)],
            std::cmp::Ordering::Equal => T::one(),
            std::cmp::Ordering::Less => T::zero(),
        })
    }

    pub fn u(&self) -> DenseMatrix<T> {
        let n = self.dim();
        DenseMatrix::from_fn(n, n, |i, j| if i <= j { self.lu[(i, j)] } else { T::zero() })
    }

    /// `P A` reconstructed as `L U`, and `A` itself by undoing `P`.
    pub fn reconstruct(&self) -> DenseMatrix<T> {
        let mut pa = matmul(&self.l(), &self.u());
        laswp(pa.as_mut(), &self.piv, false);
        pa
    }

    /// `B <- L^{-1} P B`.
    pub fn forward(&self, mut b: MatMut<'_, T>, par: Par) -> Result<(), DenseError> {
        laswp(b.rb_mut(), &self.piv, true);
        trsm(Side::Left, Uplo::Lower, Diag::Unit, self.lu.as_ref(), b, par)
    }

    /// `B <- U^{-1} B`.
    pub fn backward(&self, b: MatMut<'_, T>, par: Par) -> Result<(), DenseError> {
        trsm(Side::Left, Uplo::Upper, Diag::NonUnit, self.lu.as_ref(), b, par)
    }

    /// `B <- A^{-1} B`.
    pub fn solve_in_place(&self, mut b: MatMut<'_, T>, par: Par) -> Result<(), DenseError> {
        if b.rows() != self.dim() {
            return Err(shape_err("lu solve", format!("rhs has {} rows, expected {}", b.rows(), self.dim())));
        }
        self.forward(b.rb_mut(), par)?;
        self.backward(b, par)
    }

    pub fn solve(&self, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>, DenseError> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut(), Par::current())?;
        Ok(x)
    }

    pub fn bytes(&self) -> usize {
        self.lu.bytes() + self.piv.len() * std::mem::size_of::<usize>()
    }

    /// Analytic flop count of the factorization of an `n x n` matrix.
    pub fn flops(n: usize) -> u64 {
        let n = n as u64;
        2 * n * n * n / 3
    }
}
