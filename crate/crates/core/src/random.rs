//! Per-row seeded Gaussian streams.
//!
//! Row `r` owns a minstd stream `x <- 48271 x mod (2^31 - 1)` seeded with
//! `r + 1`. Consecutive uniforms `u = x / (2^31 - 1)` are paired through the
//! Box-Muller transform and column `c` takes the `c`-th normal variate, so an
//! entry depends only on `(r, c)` and any block can be regenerated anywhere.

use std::ops::Range;

use crate::dense::DenseMatrix;
use crate::scalar::Scalar;

const M: u64 = 2_147_483_647;
const A: u64 = 48_271;

fn pow_mod(mut b: u64, mut e: u64) -> u64 {
    let mut r = 1u64;
    b %= M;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % M;
        }
        b = b * b % M;
        e >>= 1;
    }
    r
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SeededRowSampler;

impl SeededRowSampler {
    /// Entry `(row, col)` of the conceptual infinite Gaussian matrix.
    pub fn value(row: usize, col: usize) -> f64 {
        let mut out = [0.0];
        Self::fill_row(row, col..col + 1, &mut out);
        out[0]
    }

    /// Writes columns `cols` of row `row` into `out`.
    pub fn fill_row(row: usize, cols: Range<usize>, out: &mut [f64]) {
        debug_assert_eq!(out.len(), cols.len());
        if cols.is_empty() {
            return;
        }
        let seed = (row as u64 + 1) % M;
        let seed = if seed == 0 { 1 } else { seed };
        let first_pair = cols.start / 2;
        // state just before the first uniform of that pair
        let mut x = pow_mod(A, 2 * first_pair as u64) * seed % M;
        let mut c = 2 * first_pair;
        let mut k = 0;
        while c < cols.end {
            x = x * A % M;
            let u1 = x as f64 / M as f64;
            x = x * A % M;
            let u2 = x as f64 / M as f64;
            let rad = (-2.0 * u1.ln()).sqrt();
            let theta = 2.0 * std::f64::consts::PI * u2;
            for z in [rad * theta.cos(), rad * theta.sin()] {
                if c >= cols.start && c < cols.end {
                    out[k] = z;
                    k += 1;
                }
                c += 1;
            }
        }
    }

    /// `rows.len() x cols.len()` block with row `i` drawn from stream `rows[i]`.
    pub fn block<T: Scalar>(rows: &[usize], cols: Range<usize>) -> DenseMatrix<T> {
        let nc = cols.len();
        let mut m = DenseMatrix::zeros(rows.len(), nc);
        let mut buf = vec![0.0; nc];
        for (i, &r) in rows.iter().enumerate() {
            Self::fill_row(r, cols.clone(), &mut buf);
            for (j, &v) in buf.iter().enumerate() {
                m[(i, j)] = T::from_f64(v);
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_matches_plain_recurrence() {
        let row = 41;
        let mut x = (row + 1) as u64;
        let mut expect = Vec::new();
        for _ in 0..4 {
            x = x * A % M;
            let u1 = x as f64 / M as f64;
            x = x * A % M;
            let u2 = x as f64 / M as f64;
            let rad = (-2.0 * u1.ln()).sqrt();
            expect.push(rad * (2.0 * std::f64::consts::PI * u2).cos());
            expect.push(rad * (2.0 * std::f64::consts::PI * u2).sin());
        }
        let mut got = vec![0.0; 8];
        SeededRowSampler::fill_row(row, 0..8, &mut got);
        assert_eq!(got, expect);
        for c in 0..8 {
            assert_eq!(SeededRowSampler::value(row, c), expect[c]);
        }
        let mut tail = vec![0.0; 5];
        SeededRowSampler::fill_row(row, 3..8, &mut tail);
        assert_eq!(tail, expect[3..].to_vec());
    }

    #[test]
    fn moments_are_roughly_standard() {
        // the first uniform of a small seed is about 2.2e-5 (r + 1), so the
        // opening pair is skipped
        let b: DenseMatrix<f64> = SeededRowSampler::block(&(0..200).collect::<Vec<_>>(), 2..52);
        let n = (b.rows() * b.cols()) as f64;
        let mean: f64 = b.as_slice().iter().sum::<f64>() / n;
        let var: f64 = b.as_slice().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }
}
