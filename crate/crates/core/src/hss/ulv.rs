use super::matrix::HssNode;
use super::{adj_mul, mul, HssError};
use crate::dense::{lq, lu_partial_pivot, trsm, DenseMatrix, Diag, LuFactors, Par, Side, Uplo};
use crate::scalar::Scalar;

/// ULV factors of an HSS matrix.
///
/// Every non-top node applies `Omega = [I -E; 0 I] Pi` to its reduced rows,
/// which zeroes the top of its row generator, and eliminates the top block
/// row with an LQ factorization `[L 0] Q`. The surviving `k_r` variables and
/// rows move to the parent. The top node's reduced block gets a partial
/// pivoting LU.
#[derive(Clone, Debug)]
pub struct UlvFactors<T> {
    root: UlvNode<T>,
    n: usize,
}

#[derive(Clone, Debug)]
struct UlvNode<T> {
    id: usize,
    size: usize,
    children: Vec<UlvNode<T>>,
    /// Non-top nodes.
    elim: Option<Elim<T>>,
    /// Top node.
    lu: Option<LuFactors<T>>,
    /// Copies of the inner-node coupling, needed by the solve.
    b12: DenseMatrix<T>,
    b21: DenseMatrix<T>,
    /// `V_tau` generator (inner, non-top nodes).
    v: DenseMatrix<T>,
}

#[derive(Clone, Debug)]
struct Elim<T> {
    sel: Vec<usize>,
    nonsel: Vec<usize>,
    e: DenseMatrix<T>,
    l: DenseMatrix<T>,
    q: DenseMatrix<T>,
    /// `(D~(sel,:) Q^*)(:, ..t)`.
    d_bot_left: DenseMatrix<T>,
    /// `(Q V~)(..t, :)`.
    v_top: DenseMatrix<T>,
}

impl<T> UlvNode<T> {
    fn bytes(&self) -> usize
    where
        T: Scalar,
    {
        let own = self.b12.bytes()
            + self.b21.bytes()
            + self.v.bytes()
            + self.lu.as_ref().map_or(0, |f| f.bytes())
            + self.elim.as_ref().map_or(0, |e| {
                e.e.bytes() + e.l.bytes() + e.q.bytes() + e.d_bot_left.bytes() + e.v_top.bytes()
            });
        own + self.children.iter().map(|c| c.bytes()).sum::<usize>()
    }
}

/// Reduced quantities handed to the parent.
struct Reduced<T> {
    d: DenseMatrix<T>,
    v: DenseMatrix<T>,
}

/// Factors the HSS matrix rooted at `top` (its own generators are ignored).
pub fn ulv_factor<T: Scalar>(top: &HssNode<T>, par: Par) -> Result<UlvFactors<T>, HssError> {
    let (root, _) = factor_node(top, true, par)?;
    Ok(UlvFactors { root, n: top.size })
}

fn factor_node<T: Scalar>(node: &HssNode<T>, top: bool, par: Par) -> Result<(UlvNode<T>, Reduced<T>), HssError> {
    let (children, dt, vt, vgen) = if node.is_leaf() {
        (Vec::new(), node.d.clone(), node.v.basis.clone(), DenseMatrix::zeros(0, 0))
    } else {
        let (c0, c1) = (&node.children[0], &node.children[1]);
        let (r0, r1) = par.join(|p| factor_node(c0, false, p), |p| factor_node(c1, false, p));
        let ((f0, red0), (f1, red1)) = (r0?, r1?);
        let k0 = red0.d.rows();
        let k1 = red1.d.rows();
        let mut dt = DenseMatrix::zeros(k0 + k1, k0 + k1);
        {
            let m = dt.as_mut();
            let (top_rows, bot_rows) = m.split_rows(k0);
            let (mut a, mut b) = top_rows.split_cols(k0);
            let (mut c, mut d) = bot_rows.split_cols(k0);
            a.copy_from(red0.d.as_ref());
            d.copy_from(red1.d.as_ref());
            let v1t = red1.v.adjoint();
            b.copy_from(mul(node.b12.as_ref(), v1t.as_ref(), par).as_ref());
            let v0t = red0.v.adjoint();
            c.copy_from(mul(node.b21.as_ref(), v0t.as_ref(), par).as_ref());
        }
        let vt = if top {
            DenseMatrix::zeros(k0 + k1, 0)
        } else {
            let kc0 = red0.v.cols();
            let top_v = node.v.basis.block(0, 0, kc0, node.v.rank());
            let bot_v = node.v.basis.block(kc0, 0, node.v.basis.rows() - kc0, node.v.rank());
            mul(red0.v.as_ref(), top_v.as_ref(), par).vstack(&mul(red1.v.as_ref(), bot_v.as_ref(), par))
        };
        let vgen = if top { DenseMatrix::zeros(0, 0) } else { node.v.basis.clone() };
        (vec![f0, f1], dt, vt, vgen)
    };
    let (b12, b21) = if node.is_leaf() {
        (DenseMatrix::zeros(0, 0), DenseMatrix::zeros(0, 0))
    } else {
        (node.b12.clone(), node.b21.clone())
    };
    if top {
        let lu = lu_partial_pivot(dt, par).map_err(|_| HssError::Singular { node: node.id })?;
        let f = UlvNode { id: node.id, size: node.size, children, elim: None, lu: Some(lu), b12, b21, v: vgen };
        return Ok((f, Reduced { d: DenseMatrix::zeros(0, 0), v: DenseMatrix::zeros(0, 0) }));
    }
    let n = dt.rows();
    let sel = node.u.sel.clone();
    let nonsel = node.u.nonsel();
    let e = node.u.e();
    let k = sel.len();
    let t = n - k;
    let d_sel = dt.select_rows(&sel);
    let (l, q) = if t == 0 {
        (DenseMatrix::zeros(0, 0), DenseMatrix::identity(n))
    } else {
        let mut omega_top = dt.select_rows(&nonsel);
        omega_top.axpy(-T::one(), &mul(e.as_ref(), d_sel.as_ref(), par));
        let (l, q) = lq(&omega_top);
        if (0..t).any(|i| l[(i, i)].abs() == 0.0) {
            return Err(HssError::Singular { node: node.id });
        }
        (l, q)
    };
    let qh = q.adjoint();
    let dq = mul(d_sel.as_ref(), qh.as_ref(), par);
    let d_bot_left = dq.block(0, 0, k, t);
    let d_next = dq.block(0, t, k, k);
    let vq = mul(q.as_ref(), vt.as_ref(), par);
    let kc = vt.cols();
    let v_top = vq.block(0, 0, t, kc);
    let v_next = vq.block(t, 0, k, kc);
    let f = UlvNode {
        id: node.id,
        size: node.size,
        children,
        elim: Some(Elim { sel, nonsel, e, l, q, d_bot_left, v_top }),
        lu: None,
        b12,
        b21,
        v: vgen,
    };
    Ok((f, Reduced { d: d_next, v: v_next }))
}

/// Forward-sweep record for one node.
struct Fwd<T> {
    z1: DenseMatrix<T>,
    children: Vec<Fwd<T>>,
}

impl<T: Scalar> UlvFactors<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bytes(&self) -> usize {
        self.root.bytes()
    }

    /// Analytic operation count of the factorization.
    pub fn flops(&self) -> u64 {
        node_flops(&self.root)
    }

    /// Solves `A X = B` for all columns of `B`.
    pub fn solve(&self, b: &DenseMatrix<T>, par: Par) -> Result<DenseMatrix<T>, HssError> {
        if b.rows() != self.n {
            return Err(HssError::Shape(format!("ulv solve: rhs has {} rows, matrix is {}", b.rows(), self.n)));
        }
        let mut x = DenseMatrix::zeros(b.rows(), b.cols());
        self.solve_into(b, &mut x, par)?;
        Ok(x)
    }

    fn solve_into(&self, b: &DenseMatrix<T>, x: &mut DenseMatrix<T>, par: Par) -> Result<(), HssError> {
        let root = &self.root;
        let (fwd, rhs, _) = forward(root, b, 0, true, par);
        let lu = root.lu.as_ref().expect("top node carries an LU");
        let mut xt = rhs;
        lu.solve_in_place(xt.as_mut(), par).map_err(|_| HssError::Singular { node: root.id })?;
        backward(root, &fwd, xt, x, 0, par);
        Ok(())
    }
}

/// Returns the forward record, the reduced right-hand side passed to the
/// parent and the known part of `V^big^* x` for the subtree.
fn forward<T: Scalar>(
    f: &UlvNode<T>,
    b: &DenseMatrix<T>,
    offset: usize,
    top: bool,
    par: Par,
) -> (Fwd<T>, DenseMatrix<T>, DenseMatrix<T>) {
    let nrhs = b.cols();
    let (children, bt, wt) = if f.children.is_empty() {
        (Vec::new(), b.block(offset, 0, f.size, nrhs), None)
    } else {
        let (c0, c1) = (&f.children[0], &f.children[1]);
        let ((f0, b0, w0), (f1, b1, w1)) = par.join(
            |p| forward(c0, b, offset, false, p),
            |p| forward(c1, b, offset + c0.size, false, p),
        );
        let mut top_rhs = b0;
        top_rhs.axpy(-T::one(), &mul(f.b12.as_ref(), w1.as_ref(), par));
        let mut bot_rhs = b1;
        bot_rhs.axpy(-T::one(), &mul(f.b21.as_ref(), w0.as_ref(), par));
        let known = if top { None } else { Some(adj_mul(&f.v, w0.vstack(&w1).as_ref(), par)) };
        (vec![f0, f1], top_rhs.vstack(&bot_rhs), known)
    };
    let Some(el) = &f.elim else {
        return (Fwd { z1: DenseMatrix::zeros(0, nrhs), children }, bt, DenseMatrix::zeros(0, nrhs));
    };
    let b_sel = bt.select_rows(&el.sel);
    let t = el.nonsel.len();
    let mut z1 = bt.select_rows(&el.nonsel);
    if t > 0 {
        z1.axpy(-T::one(), &mul(el.e.as_ref(), b_sel.as_ref(), par));
        trsm(Side::Left, Uplo::Lower, Diag::NonUnit, el.l.as_ref(), z1.as_mut(), par)
            .expect("ulv factors have matching shapes");
    }
    let mut b_next = b_sel;
    b_next.axpy(-T::one(), &mul(el.d_bot_left.as_ref(), z1.as_ref(), par));
    let mut w = adj_mul(&el.v_top, z1.as_ref(), par);
    if let Some(k) = wt {
        w.axpy(T::one(), &k);
    }
    (Fwd { z1, children }, b_next, w)
}

/// `xt` holds the node's reduced variables; leaves write into `x`.
fn backward<T: Scalar>(
    f: &UlvNode<T>,
    fwd: &Fwd<T>,
    xt: DenseMatrix<T>,
    x: &mut DenseMatrix<T>,
    offset: usize,
    par: Par,
) {
    let full = match &f.elim {
        Some(el) => {
            let stacked = fwd.z1.vstack(&xt);
            adj_mul(&el.q, stacked.as_ref(), par)
        }
        None => xt,
    };
    if f.children.is_empty() {
        x.as_mut().sub(offset, 0, f.size, full.cols()).copy_from(full.as_ref());
        return;
    }
    let (c0, c1) = (&f.children[0], &f.children[1]);
    let k0 = reduced_rows(c0);
    let x0 = full.block(0, 0, k0, full.cols());
    let x1 = full.block(k0, 0, full.rows() - k0, full.cols());
    backward(c0, &fwd.children[0], x0, x, offset, par);
    backward(c1, &fwd.children[1], x1, x, offset + c0.size, par);
}

fn node_flops<T: Scalar>(f: &UlvNode<T>) -> u64 {
    let mut total: u64 = f.children.iter().map(node_flops).sum();
    if let Some(el) = &f.elim {
        let (t, k) = (el.nonsel.len() as u64, el.sel.len() as u64);
        let n = t + k;
        let kc = el.v_top.cols() as u64;
        total += 4 * t * n * n + 2 * t * k * n + 2 * k * n * n + 2 * n * n * kc;
    }
    if let Some(lu) = &f.lu {
        total += LuFactors::<T>::flops(lu.dim());
    }
    total
}

fn reduced_rows<T>(f: &UlvNode<T>) -> usize {
    f.elim.as_ref().map_or(0, |e| e.sel.len())
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{lcg, low_rank_plus_blocks};
    use super::super::{compress, ClusterTree, CompressOptions, DenseSource};
    use super::*;
    use crate::dense::matmul;

    fn build(a: &DenseMatrix<f64>, leaf: usize, eps: f64) -> crate::hss::HssMatrix<f64> {
        let tree = ClusterTree::balanced(a.rows(), leaf);
        let o = CompressOptions { eps, d0: 32, dd: 32, p: 10, max_rank: None };
        compress(&DenseSource { a }, &tree, &o, Par::SEQ).unwrap().hss
    }

    #[test]
    fn diagonal_solve_is_division() {
        let diag: Vec<f64> = (0..64).map(|i| 2.0 + i as f64).collect();
        let a = DenseMatrix::from_diag(&diag);
        let h = build(&a, 8, 1e-10);
        let f = ulv_factor(&h.root, Par::SEQ).unwrap();
        let b = lcg(64, 1, 3);
        let x = f.solve(&b, Par::SEQ).unwrap();
        for i in 0..64 {
            assert!((x[(i, 0)] - b[(i, 0)] / diag[i]).abs() <= 1e-15 * b[(i, 0)].abs().max(1.0));
        }
    }

    #[test]
    fn matches_dense_lu() {
        let a = low_rank_plus_blocks(256, 32, 8, 21);
        let h = build(&a, 32, 1e-12);
        let f = ulv_factor(&h.root, Par::SEQ).unwrap();
        let b = lcg(256, 3, 4);
        let x = f.solve(&b, Par::SEQ).unwrap();
        let xd = lu_partial_pivot(a.clone(), Par::SEQ).unwrap().solve(&b).unwrap();
        let rel = x.sub_matrix(&xd).frobenius_norm() / xd.frobenius_norm();
        assert!(rel <= 1e-10, "{rel}");
        let res = matmul(&a, &x).sub_matrix(&b).frobenius_norm() / b.frobenius_norm();
        assert!(res <= 1e-10, "{res}");
    }

    #[test]
    fn zero_rhs_and_columnwise() {
        let a = low_rank_plus_blocks(128, 16, 3, 2);
        let h = build(&a, 16, 1e-12);
        let f = ulv_factor(&h.root, Par::SEQ).unwrap();
        let x0 = f.solve(&DenseMatrix::zeros(128, 1), Par::SEQ).unwrap();
        assert!(x0.as_slice().iter().all(|&v| v == 0.0));
        let b = lcg(128, 4, 8);
        let x = f.solve(&b, Par::SEQ).unwrap();
        for j in 0..4 {
            let xj = f.solve(&b.block(0, j, 128, 1), Par::SEQ).unwrap();
            assert_eq!(xj.col(0), x.col(j));
        }
    }

    #[test]
    fn omega_zeroes_top_of_generator() {
        let a = low_rank_plus_blocks(64, 16, 4, 6);
        let h = build(&a, 16, 1e-12);
        let leaf = &h.root.children[0].children[0];
        let e = leaf.u.e();
        let nonsel = leaf.u.nonsel();
        // Omega U = [U(nonsel) - E U(sel); U(sel)] = [0; I]
        let top = leaf.u.basis.select_rows(&nonsel).sub_matrix(&matmul(&e, &leaf.u.basis.select_rows(&leaf.u.sel)));
        assert_eq!(top.max_abs(), 0.0);
        assert_eq!(leaf.u.basis.select_rows(&leaf.u.sel), DenseMatrix::identity(leaf.u.rank()));
    }

    #[test]
    fn single_leaf_is_plain_lu() {
        let a = lcg(20, 20, 1);
        let h = build(&a, 32, 1e-12);
        let f = ulv_factor(&h.root, Par::SEQ).unwrap();
        let b = lcg(20, 1, 2);
        let x = f.solve(&b, Par::SEQ).unwrap();
        let res = matmul(&a, &x).sub_matrix(&b).frobenius_norm();
        assert!(res < 1e-12);
    }

    #[test]
    fn singular_is_reported() {
        let a = DenseMatrix::<f64>::zeros(32, 32);
        let h = build(&a, 8, 1e-12);
        assert!(matches!(ulv_factor(&h.root, Par::SEQ), Err(HssError::Singular { .. })));
    }
}
