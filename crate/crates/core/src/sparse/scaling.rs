use super::{SparseError, SparseMatrix};
use crate::scalar::Scalar;

/// Row scaling, column scaling and column permutation applied to `A`, so the
/// factored matrix is `Dr A Dc Qc`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingState {
    pub row_scale: Vec<f64>,
    pub col_scale: Vec<f64>,
    /// Column `j` of the scaled matrix is column `col_perm[j]` of `Dr A Dc`.
    pub col_perm: Vec<usize>,
}

/// Which side of `A x = b` a vector lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VectorSide {
    Rhs,
    Solution,
}

impl ScalingState {
    pub fn identity(n: usize) -> Self {
        ScalingState {
            row_scale: vec![1.0; n],
            col_scale: vec![1.0; n],
            col_perm: (0..n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.row_scale.len()
    }
}

const MAX_SWEEPS: usize = 10;

/// Max-norm equilibration followed by a greedy matching that moves a large
/// entry of every row onto the diagonal.
///
/// Rows and columns are alternately divided by their largest magnitude until
/// every row and column maximum lies in `[1/2, 2]` (at most ten sweeps). The
/// matching takes entries in order of decreasing scaled magnitude and any
/// rows left unmatched are completed through augmenting paths.
pub fn equilibrate_and_permute<T: Scalar>(
    a: &SparseMatrix<T>,
) -> Result<(SparseMatrix<T>, ScalingState), SparseError> {
    let n = a.n();
    let mut col_nnz = vec![0usize; n];
    for i in 0..n {
        let (cols, _) = a.row(i);
        if cols.is_empty() {
            return Err(SparseError::StructurallySingular(format!("row {i} is empty")));
        }
        for &c in cols {
            col_nnz[c] += 1;
        }
    }
    if let Some(c) = col_nnz.iter().position(|&k| k == 0) {
        return Err(SparseError::StructurallySingular(format!("column {c} is empty")));
    }

    let mut dr = vec![1.0f64; n];
    let mut dc = vec![1.0f64; n];
    for _ in 0..MAX_SWEEPS {
        let (rmax, cmax) = scaled_maxima(a, &dr, &dc);
        if rmax.iter().chain(&cmax).all(|&m| (0.5..=2.0).contains(&m)) {
            break;
        }
        for (d, m) in dr.iter_mut().zip(&rmax) {
            if *m > 0.0 {
                *d /= m;
            }
        }
        let (_, cmax) = scaled_maxima(a, &dr, &dc);
        for (d, m) in dc.iter_mut().zip(&cmax) {
            if *m > 0.0 {
                *d /= m;
            }
        }
    }
    if dr.iter().chain(&dc).any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(SparseError::StructurallySingular("scaling produced a non-finite factor".into()));
    }

    let mut scaled = a.clone();
    {
        let (row_ptr, col_idx) = (a.row_ptr().to_vec(), a.col_idx().to_vec());
        let vals = scaled.values_mut();
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                vals[k] = vals[k].scale(dr[i] * dc[col_idx[k]]);
            }
        }
    }

    let row_match = max_matching(&scaled)?;
    // scaled column row_match[j] becomes column j
    let mut new_of_old = vec![0; n];
    for (j, &c) in row_match.iter().enumerate() {
        new_of_old[c] = j;
    }
    let identity: Vec<usize> = (0..n).collect();
    let permuted = scaled.permute(&identity, &new_of_old);
    Ok((
        permuted,
        ScalingState {
            row_scale: dr,
            col_scale: dc,
            col_perm: row_match,
        },
    ))
}

fn scaled_maxima<T: Scalar>(a: &SparseMatrix<T>, dr: &[f64], dc: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = a.n();
    let mut rmax = vec![0.0f64; n];
    let mut cmax = vec![0.0f64; n];
    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (&c, v) in cols.iter().zip(vals) {
            let s = v.abs() * dr[i] * dc[c];
            rmax[i] = rmax[i].max(s);
            cmax[c] = cmax[c].max(s);
        }
    }
    (rmax, cmax)
}

/// Returns `m` with `m[row] = column`.
fn max_matching<T: Scalar>(a: &SparseMatrix<T>) -> Result<Vec<usize>, SparseError> {
    const NONE: usize = usize::MAX;
    let n = a.n();
    let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity(a.nnz());
    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (&c, v) in cols.iter().zip(vals) {
            if v.abs() > 0.0 {
                entries.push((v.abs(), i, c));
            }
        }
    }
    entries.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut row_match = vec![NONE; n];
    let mut col_match = vec![NONE; n];
    for &(_, i, c) in &entries {
        if row_match[i] == NONE && col_match[c] == NONE {
            row_match[i] = c;
            col_match[c] = i;
        }
    }

    // augmenting-path completion over nonzero entries
    let mut visited = vec![usize::MAX; n];
    for start in 0..n {
        if row_match[start] != NONE {
            continue;
        }
        // stack of (row, next position in its column list)
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        let mut found = NONE;
        'search: while let Some(&mut (row, ref mut pos)) = stack.last_mut() {
            let (cols, vals) = a.row(row);
            while *pos < cols.len() {
                let c = cols[*pos];
                *pos += 1;
                if vals[*pos - 1].abs() == 0.0 || visited[c] == start {
                    continue;
                }
                visited[c] = start;
                if col_match[c] == NONE {
                    found = c;
                    break 'search;
                }
                stack.push((col_match[c], 0));
                continue 'search;
            }
            stack.pop();
        }
        if found == NONE {
            return Err(SparseError::StructurallySingular(format!(
                "no perfect matching covers row {start}"
            )));
        }
        // flip the path: each row on the stack takes the column it reached
        let mut c = found;
        while let Some((row, _)) = stack.pop() {
            let prev = row_match[row];
            row_match[row] = c;
            col_match[c] = row;
            c = prev;
        }
    }
    Ok(row_match)
}

/// Maps a vector of the original system into the scaled one: `Dr b` for a
/// right-hand side and `Qc^T Dc^{-1} x` for a solution.
pub fn apply_scaling<T: Scalar>(v: &[T], s: &ScalingState, side: VectorSide) -> Result<Vec<T>, SparseError> {
    check_len(v, s)?;
    Ok(match side {
        VectorSide::Rhs => v.iter().zip(&s.row_scale).map(|(x, d)| x.scale(*d)).collect(),
        VectorSide::Solution => s.col_perm.iter().map(|&q| v[q].scale(1.0 / s.col_scale[q])).collect(),
    })
}

/// Inverse of [`apply_scaling`]: `Dr^{-1} b` for a right-hand side and
/// `Dc Qc y` for a solution of the scaled system.
pub fn undo_scaling<T: Scalar>(v: &[T], s: &ScalingState, side: VectorSide) -> Result<Vec<T>, SparseError> {
    check_len(v, s)?;
    Ok(match side {
        VectorSide::Rhs => v.iter().zip(&s.row_scale).map(|(x, d)| x.scale(1.0 / *d)).collect(),
        VectorSide::Solution => {
            let mut x = vec![T::zero(); v.len()];
            for (j, &q) in s.col_perm.iter().enumerate() {
                x[q] = v[j].scale(s.col_scale[q]);
            }
            x
        }
    })
}

fn check_len<T>(v: &[T], s: &ScalingState) -> Result<(), SparseError> {
    if v.len() != s.n() {
        return Err(SparseError::LengthMismatch {
            expected: s.n(),
            got: v.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{lu_partial_pivot, DenseMatrix, Par};

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    }

    #[test]
    fn antidiagonal_is_swapped() {
        let a = SparseMatrix::from_triplets(2, &[(0, 1, 2.0), (1, 0, 3.0)]).unwrap();
        let (b, s) = equilibrate_and_permute(&a).unwrap();
        assert_eq!(s.col_perm, vec![1, 0]);
        assert!((b.get(0, 0).abs() - 1.0).abs() < 1e-15);
        assert!((b.get(1, 1).abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_untouched() {
        let a = SparseMatrix::<f64>::identity(5);
        let (b, s) = equilibrate_and_permute(&a).unwrap();
        assert_eq!(s, ScalingState::identity(5));
        assert_eq!(b, a);
    }

    #[test]
    fn maxima_within_bounds_and_pattern_kept() {
        let mut seed = 3;
        let mut t = Vec::new();
        for i in 0..10 {
            t.push((i, i, 10f64.powf(6.0 * lcg(&mut seed))));
            for j in 0..10 {
                if j != i && lcg(&mut seed) > 0.2 {
                    t.push((i, j, lcg(&mut seed) * 10f64.powf(4.0 * lcg(&mut seed))));
                }
            }
        }
        let a = SparseMatrix::from_triplets(10, &t).unwrap();
        let (b, s) = equilibrate_and_permute(&a).unwrap();
        assert_eq!(b.nnz(), a.nnz());
        let ones = vec![1.0; 10];
        let (rmax, cmax) = scaled_maxima(&b, &ones, &ones);
        for m in rmax.iter().chain(&cmax) {
            assert!((0.5..=2.0).contains(m), "max {m}");
        }
        for (j, &q) in s.col_perm.iter().enumerate() {
            for i in 0..10 {
                assert_eq!(b.get(i, j) == 0.0, a.get(i, q) == 0.0);
            }
        }
    }

    #[test]
    fn augmenting_path_completes_matching() {
        // greedy takes (0,0) first, which blocks row 1 until rerouted
        let a = SparseMatrix::from_triplets(2, &[(0, 0, 9.0), (0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let (b, _) = equilibrate_and_permute(&a).unwrap();
        assert!(b.get(0, 0) != 0.0 && b.get(1, 1) != 0.0);
    }

    #[test]
    fn structurally_singular_reported() {
        let a = SparseMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        assert!(matches!(equilibrate_and_permute(&a), Err(SparseError::StructurallySingular(_))));
        let a = SparseMatrix::from_triplets(3, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0), (2, 0, 1.0), (2, 1, 1.0), (0, 2, 1.0)])
            .unwrap();
        // rows 1 and 2 only reach columns 0 and 1, and so does row 0 once column 2 is gone
        let r = equilibrate_and_permute(&a);
        assert!(r.is_ok());
        let a = SparseMatrix::from_triplets(3, &[(0, 0, 1.0), (1, 0, 1.0), (2, 0, 1.0), (0, 1, 1.0), (0, 2, 1.0)]).unwrap();
        assert!(matches!(equilibrate_and_permute(&a), Err(SparseError::StructurallySingular(_))));
    }

    #[test]
    fn scaled_solve_matches_dense_oracle() {
        let mut seed = 11;
        let n = 8;
        let dense = DenseMatrix::from_fn(n, n, |i, j| {
            let v = lcg(&mut seed) * 10f64.powf(3.0 * lcg(&mut seed));
            if i == j { v + 5.0 } else { v }
        });
        let a = SparseMatrix::from_dense(&dense);
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
        let oracle = lu_partial_pivot(dense.clone(), Par::SEQ)
            .unwrap()
            .solve(&DenseMatrix::from_col_major(n, 1, b.clone()))
            .unwrap();

        let (ahat, s) = equilibrate_and_permute(&a).unwrap();
        let bhat = apply_scaling(&b, &s, VectorSide::Rhs).unwrap();
        let y = lu_partial_pivot(ahat.to_dense(), Par::SEQ)
            .unwrap()
            .solve(&DenseMatrix::from_col_major(n, 1, bhat))
            .unwrap();
        let x = undo_scaling(y.as_slice(), &s, VectorSide::Solution).unwrap();
        let err: f64 = x.iter().zip(oracle.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = oracle.max_abs();
        assert!(err <= 1e-12 * scale, "err {err}");
    }

    #[test]
    fn round_trips_and_length_check() {
        let s = ScalingState {
            row_scale: vec![2.0, 0.5, 4.0],
            col_scale: vec![0.25, 8.0, 1.0],
            col_perm: vec![2, 0, 1],
        };
        let v = vec![1.0, -2.0, 3.0];
        for side in [VectorSide::Rhs, VectorSide::Solution] {
            let w = apply_scaling(&v, &s, side).unwrap();
            assert_eq!(undo_scaling(&w, &s, side).unwrap(), v);
        }
        assert!(matches!(
            apply_scaling(&[1.0], &s, VectorSide::Rhs),
            Err(SparseError::LengthMismatch { expected: 3, got: 1 })
        ));
        let id = ScalingState::identity(3);
        assert_eq!(apply_scaling(&v, &id, VectorSide::Solution).unwrap(), v);
    }
}
