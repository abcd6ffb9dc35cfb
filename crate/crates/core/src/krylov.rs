//! Left-preconditioned restarted GMRES and iterative refinement. Both stop
//! on the preconditioned residual `u_i = M^{-1}(A x_i - b)`: when
//! `|u_i| / |u_0| <= rtol` or `|u_i| <= atol`. The initial guess is zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{dot, norm2, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KrylovError {
    #[error("non-finite value in iteration {iteration}")]
    Divergence { iteration: usize },
    #[error("operator returned {got} entries, expected {expected}")]
    Shape { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrylovOptions {
    pub restart: usize,
    pub rtol: f64,
    pub atol: f64,
    pub maxit: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions { restart: 30, rtol: 1e-6, atol: 1e-10, maxit: 500 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `|u| / |u_0|` at exit.
    pub rel_residual: f64,
    /// `|u|` at exit.
    pub abs_residual: f64,
    pub converged: bool,
    /// Refinement only: the residual fell by less than half over three steps.
    pub stagnated: bool,
    /// `|u_i|` for every iteration, starting with `|u_0|`.
    pub history: Vec<f64>,
}

fn check<T>(v: &[T], n: usize) -> Result<(), KrylovError> {
    if v.len() != n {
        return Err(KrylovError::Shape { expected: n, got: v.len() });
    }
    Ok(())
}

fn done(u: f64, u0: f64, o: &KrylovOptions) -> bool {
    u <= o.atol || u <= o.rtol * u0
}

/// Complex Givens rotation `(c, s)` with `[c s; -conj(s) c] [a; b] = [r; 0]`.
fn givens<T: Scalar>(a: T, b: T) -> (f64, T, T) {
    let (aa, bb) = (a.abs(), b.abs());
    if bb == 0.0 {
        return (1.0, T::zero(), a);
    }
    if aa == 0.0 {
        return (0.0, T::one(), b);
    }
    let rho = (aa * aa + bb * bb).sqrt();
    let phase = a.scale(1.0 / aa);
    (aa / rho, phase * b.conj().scale(1.0 / rho), phase.scale(rho))
}

/// One modified Gram-Schmidt Arnoldi step: orthogonalizes `w` against
/// `basis` and returns the Hessenberg column (length `basis.len() + 1`).
/// A second sweep runs when the first one cancels more than 30% of `|w|`.
pub(crate) fn mgs_step<T: Scalar>(basis: &[Vec<T>], w: &mut [T]) -> Vec<T> {
    let before = norm2(w);
    let mut h = vec![T::zero(); basis.len() + 1];
    for sweep in 0..2 {
        for (v, hj) in basis.iter().zip(h.iter_mut()) {
            let c = dot(v, w);
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= c * *vi;
            }
            *hj += c;
        }
        if sweep == 0 && norm2(w) > 0.7 * before {
            break;
        }
    }
    h[basis.len()] = T::from_f64(norm2(w));
    h
}

/// Restarted GMRES on `M^{-1} A x = M^{-1} b`.
pub fn gmres<T, A, M>(mut apply_a: A, mut apply_m: M, b: &[T], opts: &KrylovOptions) -> Result<(Vec<T>, SolveReport), KrylovError>
where
    T: Scalar,
    A: FnMut(&[T]) -> Vec<T>,
    M: FnMut(&[T]) -> Vec<T>,
{
    let n = b.len();
    let m = opts.restart.max(1);
    let mut x = vec![T::zero(); n];
    let mut r = apply_m(b);
    check(&r, n)?;
    let u0 = norm2(&r);
    let mut report = SolveReport { history: vec![u0], abs_residual: u0, rel_residual: 1.0, ..Default::default() };
    if !u0.is_finite() {
        return Err(KrylovError::Divergence { iteration: 0 });
    }
    if u0 == 0.0 || done(u0, u0, opts) {
        report.converged = true;
        report.rel_residual = if u0 == 0.0 { 0.0 } else { 1.0 };
        return Ok((x, report));
    }
    let mut beta = u0;
    let mut it = 0;
    while it < opts.maxit {
        let mut basis: Vec<Vec<T>> = vec![r.iter().map(|v| v.scale(1.0 / beta)).collect()];
        let mut hcols: Vec<Vec<T>> = Vec::new();
        let mut rot: Vec<(f64, T)> = Vec::new();
        let mut g = vec![T::from_f64(beta)];
        let mut stop = false;
        for j in 0..m {
            let av = apply_a(&basis[j]);
            check(&av, n)?;
            let mut w = apply_m(&av);
            check(&w, n)?;
            let mut h = mgs_step(&basis, &mut w);
            let hnext = h[j + 1].re();
            for (i, &(c, s)) in rot.iter().enumerate() {
                let (hi, hi1) = (h[i], h[i + 1]);
                h[i] = hi.scale(c) + s * hi1;
                h[i + 1] = hi1.scale(c) - s.conj() * hi;
            }
            let (c, s, rr) = givens(h[j], h[j + 1]);
            h[j] = rr;
            h[j + 1] = T::zero();
            rot.push((c, s));
            let gj = g[j];
            g[j] = gj.scale(c);
            g.push(-(s.conj() * gj));
            hcols.push(h);
            it += 1;
            let est = g[j + 1].abs();
            if !est.is_finite() || !hnext.is_finite() {
                return Err(KrylovError::Divergence { iteration: it });
            }
            report.history.push(est);
            let breakdown = hnext <= 1e-14 * u0;
            if done(est, u0, opts) || breakdown || it >= opts.maxit {
                stop = true;
                break;
            }
            basis.push(w.iter().map(|v| v.scale(1.0 / hnext)).collect());
        }
        // back substitution for the least-squares coefficients
        let k = hcols.len();
        let mut y = vec![T::zero(); k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for (l, yl) in y.iter().enumerate().skip(i + 1) {
                s -= hcols[l][i] * *yl;
            }
            y[i] = s / hcols[i][i];
        }
        for (l, yl) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[l]) {
                *xi += *yl * *vi;
            }
        }
        // true preconditioned residual
        let ax = apply_a(&x);
        check(&ax, n)?;
        let diff: Vec<T> = b.iter().zip(&ax).map(|(bi, ai)| *bi - *ai).collect();
        r = apply_m(&diff);
        check(&r, n)?;
        beta = norm2(&r);
        if !beta.is_finite() {
            return Err(KrylovError::Divergence { iteration: it });
        }
        if let Some(last) = report.history.last_mut() {
            *last = beta;
        }
        report.abs_residual = beta;
        report.rel_residual = beta / u0;
        if done(beta, u0, opts) {
            report.converged = true;
            break;
        }
        if beta == 0.0 || (stop && it >= opts.maxit) {
            break;
        }
    }
    report.iterations = it;
    Ok((x, report))
}

/// `x <- x + M^{-1}(b - A x)` until the stopping rule holds, `maxit` steps,
/// or stagnation.
pub fn iterative_refinement<T, A, M>(
    mut apply_a: A,
    mut apply_m: M,
    b: &[T],
    opts: &KrylovOptions,
) -> Result<(Vec<T>, SolveReport), KrylovError>
where
    T: Scalar,
    A: FnMut(&[T]) -> Vec<T>,
    M: FnMut(&[T]) -> Vec<T>,
{
    let n = b.len();
    let mut x = vec![T::zero(); n];
    let mut u = apply_m(b);
    check(&u, n)?;
    let u0 = norm2(&u);
    if !u0.is_finite() {
        return Err(KrylovError::Divergence { iteration: 0 });
    }
    let mut report = SolveReport { history: vec![u0], abs_residual: u0, rel_residual: 1.0, ..Default::default() };
    if u0 == 0.0 {
        report.converged = true;
        report.rel_residual = 0.0;
        return Ok((x, report));
    }
    let mut unorm = u0;
    for it in 1..=opts.maxit {
        if done(unorm, u0, opts) {
            report.converged = true;
            break;
        }
        for (xi, ui) in x.iter_mut().zip(&u) {
            *xi += *ui;
        }
        report.iterations = it;
        let ax = apply_a(&x);
        check(&ax, n)?;
        let r: Vec<T> = b.iter().zip(&ax).map(|(bi, ai)| *bi - *ai).collect();
        u = apply_m(&r);
        check(&u, n)?;
        unorm = norm2(&u);
        if !unorm.is_finite() {
            return Err(KrylovError::Divergence { iteration: it });
        }
        report.history.push(unorm);
        let h = &report.history;
        if h.len() >= 4 && unorm > 0.5 * h[h.len() - 4] && !done(unorm, u0, opts) {
            report.stagnated = true;
            break;
        }
    }
    report.converged = done(unorm, u0, opts);
    report.abs_residual = unorm;
    report.rel_residual = unorm / u0;
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{householder_qr, DenseMatrix};
    use crate::sparse::{generate_grid_problem, GridKind, GridProblem, SparseMatrix};

    fn p2d(k: usize) -> SparseMatrix<f64> {
        generate_grid_problem(&GridProblem::new(GridKind::P2D, k)).unwrap()
    }

    #[test]
    fn identity_converges_at_once() {
        let b: Vec<f64> = (0..20).map(|i| i as f64 - 4.0).collect();
        let (x, rep) = gmres(|v: &[f64]| v.to_vec(), |v: &[f64]| v.to_vec(), &b, &KrylovOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let b = vec![0.0; 7];
        let (x, rep) = gmres(|v: &[f64]| v.to_vec(), |v: &[f64]| v.to_vec(), &b, &KrylovOptions::default()).unwrap();
        assert!(x.iter().all(|&v| v == 0.0) && rep.iterations == 0 && rep.converged);
        let (x, rep) = iterative_refinement(|v: &[f64]| v.to_vec(), |v: &[f64]| v.to_vec(), &b, &KrylovOptions::default()).unwrap();
        assert!(x.iter().all(|&v| v == 0.0) && rep.iterations == 0);
    }

    #[test]
    fn unpreconditioned_p2d_converges_with_restarts() {
        let a = p2d(12);
        let b = a.mul_vec(&vec![1.0; a.n()]);
        let o = KrylovOptions { restart: 10, rtol: 1e-8, atol: 0.0, maxit: 2000 };
        let (x, rep) = gmres(|v: &[f64]| a.mul_vec(v), |v: &[f64]| v.to_vec(), &b, &o).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations > 10);
        let err = x.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
    }

    /// Minimal residual over growing Krylov spaces from an independent
    /// classical Gram-Schmidt basis with reorthogonalization and a dense
    /// least-squares solve.
    fn reference_residuals(a: &SparseMatrix<f64>, b: &[f64], steps: usize) -> Vec<f64> {
        let n = b.len();
        let bn = norm2(b);
        let mut q: Vec<Vec<f64>> = vec![b.iter().map(|v| v / bn).collect()];
        let mut out = Vec::new();
        for k in 1..=steps {
            let mut w = a.mul_vec(&q[k - 1]);
            for _ in 0..2 {
                let coef: Vec<f64> = q.iter().map(|v| dot(v, &w)).collect();
                for (c, v) in coef.iter().zip(&q) {
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi -= c * vi;
                    }
                }
            }
            let wn = norm2(&w);
            q.push(w.iter().map(|v| v / wn).collect());
            // min |b - A Q_k y|
            let aq = DenseMatrix::from_fn(n, k, |i, j| a.mul_vec(&q[j])[i]);
            let qr = householder_qr(aq);
            let qf = qr.q(k);
            let proj: Vec<f64> = (0..k).map(|j| dot(qf.col(j), b)).collect();
            let res2 = bn * bn - proj.iter().map(|p| p * p).sum::<f64>();
            out.push(res2.max(0.0).sqrt());
        }
        out
    }

    #[test]
    fn residual_curve_matches_reference() {
        let a = p2d(15);
        let b: Vec<f64> = (0..a.n()).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let o = KrylovOptions { restart: 30, rtol: 1e-14, atol: 0.0, maxit: 20 };
        let (_, rep) = gmres(|v: &[f64]| a.mul_vec(v), |v: &[f64]| v.to_vec(), &b, &o).unwrap();
        let reference = reference_residuals(&a, &b, 19);
        for (k, r) in reference.iter().enumerate() {
            let got = rep.history[k + 1];
            assert!((got - r).abs() <= 1e-10 * norm2(&b), "step {}: {got} vs {r}", k + 1);
        }
    }

    #[test]
    fn arnoldi_basis_is_orthonormal() {
        let a = p2d(20);
        let n = a.n();
        let v0: Vec<f64> = (0..n).map(|i| ((i * 13) % 17) as f64 + 1.0).collect();
        let v0n = norm2(&v0);
        let mut basis: Vec<Vec<f64>> = vec![v0.iter().map(|v| v / v0n).collect()];
        for j in 0..30 {
            let mut w = a.mul_vec(&basis[j]);
            let h = mgs_step(&basis, &mut w);
            let hn = h[j + 1].re();
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        for (i, u) in basis.iter().enumerate() {
            for (j, v) in basis.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(u, v) - want).abs() <= 1e-10, "({i},{j}) {}", dot(u, v) - want);
            }
        }
    }

    #[test]
    fn history_nonincreasing_within_cycle() {
        let a = p2d(10);
        let b = a.mul_vec(&vec![1.0; a.n()]);
        let o = KrylovOptions { restart: 30, rtol: 1e-10, atol: 0.0, maxit: 30 };
        let (_, rep) = gmres(|v: &[f64]| a.mul_vec(v), |v: &[f64]| v.to_vec(), &b, &o).unwrap();
        for w in rep.history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn refinement_with_exact_inverse_takes_one_step() {
        let a = DenseMatrix::from_rows(&[&[4.0, 1.0], &[2.0, 3.0]]);
        let inv = DenseMatrix::from_rows(&[&[0.3, -0.1], &[-0.2, 0.4]]);
        let mv = |m: &DenseMatrix<f64>, v: &[f64]| vec![m[(0, 0)] * v[0] + m[(0, 1)] * v[1], m[(1, 0)] * v[0] + m[(1, 1)] * v[1]];
        let b = [1.0, 2.0];
        let (x, rep) = iterative_refinement(|v: &[f64]| mv(&a, v), |v: &[f64]| mv(&inv, v), &b, &KrylovOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert!((x[0] - 0.1).abs() < 1e-15 && (x[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn refinement_reports_stagnation() {
        // M = 2A: each step halves nothing useful once the error is tiny,
        // and with M = -A the iteration never contracts
        let b = vec![1.0; 5];
        let (_, rep) =
            iterative_refinement(|v: &[f64]| v.to_vec(), |v: &[f64]| v.iter().map(|x| -x).collect(), &b, &KrylovOptions::default())
                .unwrap();
        assert!(rep.stagnated && !rep.converged);
    }

    #[test]
    fn nan_operator_is_divergence() {
        let b = vec![1.0; 4];
        let r = gmres(|v: &[f64]| v.iter().map(|_| f64::NAN).collect(), |v: &[f64]| v.to_vec(), &b, &KrylovOptions::default());
        assert!(matches!(r, Err(KrylovError::Divergence { .. })));
    }
}
