use super::matrix::HssNode;
use super::ulv::{ulv_factor, UlvFactors};
use super::{adj_mul, mul, HssError};
use crate::dense::{DenseMatrix, Par};
use crate::scalar::Scalar;

/// Low-rank Schur update `F21 F11^{-1} F12 = theta_t phi`.
#[derive(Clone, Debug)]
pub struct LowRankSchur<T> {
    /// `n_upd x k`.
    pub theta_t: DenseMatrix<T>,
    /// `k x n_upd`.
    pub phi: DenseMatrix<T>,
}

impl<T: Scalar> LowRankSchur<T> {
    pub fn rank(&self) -> usize {
        self.phi.rows()
    }

    pub fn bytes(&self) -> usize {
        self.theta_t.bytes() + self.phi.bytes()
    }
}

/// A front in HSS form with its separator block factored.
///
/// The front is `[F11 U_s B12 V_u^*; U_u B21 V_s^* F22]` where the first
/// child of the HSS root spans the separator. The update matrix is
/// `F22 - theta_t phi` with `theta_t = U_u B21 (V_s^* F11^{-1} U_s)` and
/// `phi = B12 V_u^*`.
#[derive(Clone, Debug)]
pub struct PartialUlv<T> {
    pub n_sep: usize,
    pub f11: UlvFactors<T>,
    pub schur: LowRankSchur<T>,
    /// `F11^{-1} U_s`.
    g: DenseMatrix<T>,
    /// `V_s^big`.
    vs: DenseMatrix<T>,
    /// `U_u^big B21`.
    ub21: DenseMatrix<T>,
}

/// Factors the separator part of `front` and forms the low-rank Schur pair.
/// The root of `front` must have two children with the first covering
/// exactly `n_sep` indices.
pub fn partial_ulv_and_schur<T: Scalar>(
    front: &HssNode<T>,
    n_sep: usize,
    par: Par,
) -> Result<PartialUlv<T>, HssError> {
    if front.is_leaf() {
        return Err(HssError::SplitMismatch { n_sep, boundary: front.size });
    }
    let (s, u) = (&front.children[0], &front.children[1]);
    if s.size != n_sep {
        return Err(HssError::SplitMismatch { n_sep, boundary: s.size });
    }
    let f11 = ulv_factor(s, par)?;
    let us = s.big_u();
    let vs = s.big_v();
    let uu = u.big_u();
    let vu = u.big_v();
    let g = f11.solve(&us, par)?;
    let m = adj_mul(&vs, g.as_ref(), par);
    let ub21 = mul(uu.as_ref(), front.b21.as_ref(), par);
    let theta_t = mul(ub21.as_ref(), m.as_ref(), par);
    let vut = vu.adjoint();
    let phi = mul(front.b12.as_ref(), vut.as_ref(), par);
    Ok(PartialUlv { n_sep, f11, schur: LowRankSchur { theta_t, phi }, g, vs, ub21 })
}

impl<T: Scalar> PartialUlv<T> {
    pub fn bytes(&self) -> usize {
        self.f11.bytes() + self.schur.bytes() + self.g.bytes() + self.vs.bytes() + self.ub21.bytes()
    }

    /// `update X` given the `F22` subtree.
    pub fn apply_update(
        &self,
        f22: &HssNode<T>,
        x: &DenseMatrix<T>,
        adjoint: bool,
        par: Par,
    ) -> Result<DenseMatrix<T>, HssError> {
        let mut y = f22.matvec(x, adjoint, par)?;
        let corr = if adjoint {
            let t = adj_mul(&self.schur.theta_t, x.as_ref(), par);
            adj_mul(&self.schur.phi, t.as_ref(), par)
        } else {
            let t = mul(self.schur.phi.as_ref(), x.as_ref(), par);
            mul(self.schur.theta_t.as_ref(), t.as_ref(), par)
        };
        y.axpy(-T::one(), &corr);
        Ok(y)
    }

    /// Entries `update(rows, cols)`, indices relative to the update block.
    pub fn update_entries(&self, f22: &HssNode<T>, rows: &[usize], cols: &[usize]) -> Result<DenseMatrix<T>, HssError> {
        let mut blk = f22.extract(rows, cols)?.block;
        let k = self.schur.rank();
        for (jj, &j) in cols.iter().enumerate() {
            for (ii, &i) in rows.iter().enumerate() {
                let mut s = T::zero();
                for l in 0..k {
                    s += self.schur.theta_t[(i, l)] * self.schur.phi[(l, j)];
                }
                blk[(ii, jj)] -= s;
            }
        }
        Ok(blk)
    }

    /// Forward step: returns `w = F11^{-1} b_s` and subtracts `F21 w` from `b_u`.
    pub fn forward(&self, b_s: &DenseMatrix<T>, b_u: &mut DenseMatrix<T>, par: Par) -> Result<DenseMatrix<T>, HssError> {
        let w = self.f11.solve(b_s, par)?;
        if b_u.rows() > 0 {
            let t = adj_mul(&self.vs, w.as_ref(), par);
            b_u.axpy(-T::one(), &mul(self.ub21.as_ref(), t.as_ref(), par));
        }
        Ok(w)
    }

    /// Backward step: `x_s = w - F11^{-1} F12 x_u`.
    pub fn backward(&self, w: &mut DenseMatrix<T>, x_u: &DenseMatrix<T>, par: Par) {
        if x_u.rows() == 0 {
            return;
        }
        let t = mul(self.schur.phi.as_ref(), x_u.as_ref(), par);
        w.axpy(-T::one(), &mul(self.g.as_ref(), t.as_ref(), par));
    }
}
