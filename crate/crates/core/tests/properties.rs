use hssmf::dense::{lu_partial_pivot, matmul, DenseMatrix, Par};
use hssmf::hss::{compress, ClusterTree, CompressOptions, DenseSource};
use hssmf::krylov::{gmres, KrylovOptions};
use hssmf::multifrontal::{SeededRowSampler, Solver, SolverOptions};
use hssmf::order::{analyze, AnalysisOptions, NdStrategy};
use hssmf::scalar::norm_inf;
use hssmf::sparse::{equilibrate_and_permute, read_matrix_market_from, write_matrix_market_to, SparseMatrix};
use proptest::prelude::*;

/// Random sparse pattern with a dominant diagonal.
fn sparse_dd() -> impl Strategy<Value = SparseMatrix<f64>> {
    (2usize..120).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n, -1.0f64..1.0), 0..4 * n).prop_map(move |off| {
            let mut t: Vec<(usize, usize, f64)> = off.into_iter().filter(|(i, j, _)| i != j).collect();
            let mut rowsum = vec![0.0; n];
            for &(i, _, v) in &t {
                rowsum[i] += v.abs();
            }
            for (i, s) in rowsum.iter().enumerate() {
                t.push((i, i, 1.0 + s));
            }
            SparseMatrix::from_triplets(n, &t).unwrap()
        })
    })
}

fn dense(m: usize, n: usize, seed: u64) -> DenseMatrix<f64> {
    let mut s = seed.wrapping_add(1);
    DenseMatrix::from_fn(m, n, |_, _| {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn analysis_yields_valid_permutation_and_tree(a in sparse_dd(), ls in 0usize..4) {
        let opts = AnalysisOptions { strategy: NdStrategy::Graph, min_leaf: 8, ls, min_hss_size: 0, leaf_size: 16 };
        let an = analyze(&a, &opts, Par::SEQ).unwrap();
        prop_assert!(an.perm.is_valid());
        prop_assert_eq!(an.perm.len(), a.n());
        prop_assert!(an.tree.validate(a.n()).is_ok());
        let mut covered = vec![0; a.n()];
        for node in &an.tree.nodes {
            for i in node.sep.clone() {
                covered[i] += 1;
            }
            prop_assert!(node.upd.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(node.upd.iter().all(|&u| u >= node.sep.end));
            if let Some(c) = &node.hss_cluster {
                prop_assert_eq!(c.size, node.dim());
                prop_assert!(c.is_consistent());
            }
        }
        prop_assert!(covered.iter().all(|&c| c == 1));
    }

    #[test]
    fn equilibration_bounds_entries_and_fills_diagonal(a in sparse_dd()) {
        let (s, st) = equilibrate_and_permute(&a).unwrap();
        let mut seen = vec![false; st.col_perm.len()];
        for &q in &st.col_perm {
            prop_assert!(!seen[q]);
            seen[q] = true;
        }
        let mut cmax = vec![0.0f64; s.n()];
        for i in 0..s.n() {
            let (cols, vals) = s.row(i);
            let rmax = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!((0.5..=2.0).contains(&rmax), "row {} max {}", i, rmax);
            for (&c, v) in cols.iter().zip(vals) {
                cmax[c] = cmax[c].max(v.abs());
            }
            prop_assert!(s.get(i, i) != 0.0);
        }
        prop_assert!(cmax.iter().all(|m| (0.5..=2.0).contains(m)));
    }

    #[test]
    fn multifrontal_solves_diagonally_dominant_systems(a in sparse_dd()) {
        let s = Solver::new(&a, &SolverOptions::default(), Par::SEQ).unwrap();
        let b: Vec<f64> = (0..a.n()).map(|i| (i % 7) as f64 - 3.0).collect();
        let x = s.apply_inverse(&b, Par::SEQ).unwrap();
        let r: Vec<f64> = a.mul_vec(&x).iter().zip(&b).map(|(u, v)| u - v).collect();
        prop_assert!(norm_inf(&r) <= 1e-10 * norm_inf(&b).max(1.0));
    }

    #[test]
    fn matrix_market_round_trip(a in sparse_dd()) {
        let mut buf = Vec::new();
        write_matrix_market_to(&mut buf, &a).unwrap();
        let back = read_matrix_market_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn gmres_residual_matches_report(a in sparse_dd()) {
        let b: Vec<f64> = (0..a.n()).map(|i| 1.0 + (i % 3) as f64).collect();
        let o = KrylovOptions { rtol: 1e-10, atol: 0.0, ..KrylovOptions::default() };
        let (x, rep) = gmres(|v: &[f64]| a.mul_vec(v), |v: &[f64]| v.to_vec(), &b, &o).unwrap();
        prop_assert!(rep.converged);
        let r: Vec<f64> = a.mul_vec(&x).iter().zip(&b).map(|(u, v)| u - v).collect();
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((rn - rep.abs_residual).abs() <= 1e-12 * rep.history[0]);
    }

    #[test]
    fn lu_reconstructs(n in 1usize..80, seed in any::<u64>()) {
        let a = dense(n, n, seed);
        let f = lu_partial_pivot(a.clone(), Par::for_threads(2)).unwrap();
        let err = f.reconstruct().sub_matrix(&a).frobenius_norm() / a.frobenius_norm();
        prop_assert!(err <= 1e-13);
    }

    #[test]
    fn sampler_is_a_pure_function(rows in proptest::collection::btree_set(0usize..100_000, 1..20), c0 in 0usize..40, w in 1usize..20) {
        let rows: Vec<usize> = rows.into_iter().collect();
        let b: DenseMatrix<f64> = SeededRowSampler::block(&rows, c0..c0 + w);
        for (i, &r) in rows.iter().enumerate() {
            for c in 0..w {
                prop_assert_eq!(b[(i, c)].to_bits(), SeededRowSampler::value(r, c0 + c).to_bits());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn hss_matvec_is_linear_and_matches_dense(r in 1usize..8, seed in any::<u64>(), alpha in -2.0f64..2.0) {
        let n = 96;
        let mut a = matmul(&dense(n, r, seed), &dense(r, n, seed ^ 1));
        for i in 0..n {
            a[(i, i)] += 4.0;
        }
        let h = compress(&DenseSource { a: &a }, &ClusterTree::balanced(n, 16), &CompressOptions { eps: 1e-12, d0: 16, dd: 16, ..CompressOptions::default() }, Par::SEQ)
            .unwrap()
            .hss;
        let x = dense(n, 2, seed ^ 2);
        let y = dense(n, 2, seed ^ 3);
        let mut z = y.clone();
        z.axpy(alpha, &x);
        let hx = h.matvec(&x, Par::SEQ).unwrap();
        let hy = h.matvec(&y, Par::SEQ).unwrap();
        let mut lin = hy.clone();
        lin.axpy(alpha, &hx);
        let hz = h.matvec(&z, Par::SEQ).unwrap();
        prop_assert!(hz.sub_matrix(&lin).frobenius_norm() <= 1e-12 * lin.frobenius_norm());
        prop_assert!(hx.sub_matrix(&matmul(&a, &x)).frobenius_norm() <= 1e-10 * hx.frobenius_norm());
        // <H x, y> = <x, H^* y>
        let hty = h.matvec_adjoint(&y, Par::SEQ).unwrap();
        let l: f64 = hx.as_slice().iter().zip(y.as_slice()).map(|(p, q)| p * q).sum();
        let rgt: f64 = x.as_slice().iter().zip(hty.as_slice()).map(|(p, q)| p * q).sum();
        prop_assert!((l - rgt).abs() <= 1e-10 * l.abs().max(1.0));
    }
}
