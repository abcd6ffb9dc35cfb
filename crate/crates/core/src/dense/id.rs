use super::qr::rrqr_tolerance;
use super::triangular::{trsm, Diag, Side, Uplo};
use super::{DenseMatrix, Par};
use crate::scalar::Scalar;

/// Column interpolative decomposition `Y ~ Y(:, J) X`.
#[derive(Clone, Debug)]
pub struct InterpolativeDecomposition<T> {
    /// Selected columns, in pivot order.
    pub cols: Vec<usize>,
    /// `k x n` coefficients with `X(:, cols) = I`.
    pub coeffs: DenseMatrix<T>,
}

impl<T: Scalar> InterpolativeDecomposition<T> {
    pub fn rank(&self) -> usize {
        self.cols.len()
    }
}

/// Computes the ID from a tolerance-stopped column-pivoted QR
/// `Y P = Q [R1 R2]`, as `X = [I, R1^{-1} R2] P^{-1}`.
pub fn interpolative_decomposition<T: Scalar>(y: &DenseMatrix<T>, eps: f64) -> InterpolativeDecomposition<T> {
    interpolative_decomposition_capped(y, eps, y.rows().min(y.cols()))
}

pub(crate) fn interpolative_decomposition_capped<T: Scalar>(
    y: &DenseMatrix<T>,
    eps: f64,
    max_rank: usize,
) -> InterpolativeDecomposition<T> {
    let n = y.cols();
    let f = rrqr_tolerance(y.clone(), eps, max_rank);
    let k = f.rank;
    let mut t = f.r2();
    if k > 0 && t.cols() > 0 {
        let r1 = f.r1();
        trsm(Side::Left, Uplo::Upper, Diag::NonUnit, r1.as_ref(), t.as_mut(), Par::SEQ)
            .expect("leading block of a rank-revealing QR has a nonzero diagonal");
    }
    let mut coeffs = DenseMatrix::zeros(k, n);
    for (i, &c) in f.perm[..k].iter().enumerate() {
        coeffs[(i, c)] = T::one();
    }
    for (j, &c) in f.perm[k..].iter().enumerate() {
        for i in 0..k {
            coeffs[(i, c)] = t[(i, j)];
        }
    }
    InterpolativeDecomposition {
        cols: f.perm[..k].to_vec(),
        coeffs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::matmul;

    #[test]
    fn rank_one_selects_larger_column() {
        let y = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let id = interpolative_decomposition(&y, 1e-12);
        assert_eq!(id.cols, vec![1]);
        assert!((id.coeffs[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(id.coeffs[(0, 1)], 1.0);
    }

    #[test]
    fn identity_keeps_all_columns() {
        let y = DenseMatrix::<f64>::identity(3);
        let id = interpolative_decomposition(&y, 1e-12);
        let mut sorted = id.cols.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2]);
        for (i, &c) in id.cols.iter().enumerate() {
            for j in 0..3 {
                assert_eq!(id.coeffs[(i, j)], if j == c { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn reconstruction_of_known_rank() {
        let mut s = 17u64;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = DenseMatrix::from_fn(60, 12, |_, _| next());
        let b = DenseMatrix::from_fn(12, 40, |_, _| next());
        let y = matmul(&a, &b);
        let id = interpolative_decomposition(&y, 1e-10);
        assert_eq!(id.rank(), 12);
        let approx = matmul(&y.select_cols(&id.cols), &id.coeffs);
        assert!(approx.sub_matrix(&y).frobenius_norm() <= 1e-8 * y.frobenius_norm());
    }
}
