use hssmf::dense::Par;
use hssmf::driver::{InputSource, RunConfig, SolverMode};
use hssmf::krylov::{gmres, iterative_refinement, KrylovOptions};
use hssmf::multifrontal::Solver;
use hssmf::sparse::{generate_grid_problem, GridKind, GridProblem};

fn setup(kind: GridKind, k: usize, f: impl FnOnce(&mut RunConfig)) -> (hssmf::sparse::SparseMatrix<f64>, Solver<f64>) {
    let p = GridProblem::new(kind, k);
    let a = generate_grid_problem(&p).unwrap();
    let mut cfg = RunConfig::new(InputSource::Gen(p));
    f(&mut cfg);
    let s = Solver::new(&a, &cfg.solver_options(a.n()), Par::SEQ).unwrap();
    (a, s)
}

#[test]
fn exact_preconditioner_converges_immediately() {
    let (a, s) = setup(GridKind::P2D, 10, |c| c.mode = SolverMode::Mf);
    let b = a.mul_vec(&vec![1.0; a.n()]);
    let (x, rep) =
        gmres(|v: &[f64]| a.mul_vec(v), |v: &[f64]| s.apply_inverse(v, Par::SEQ).unwrap(), &b, &KrylovOptions::default())
            .unwrap();
    assert!(rep.converged && rep.iterations <= 2, "{rep:?}");
    assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-10));
}

#[test]
fn loose_hss_preconditioner_on_p3d() {
    let (a, s) = setup(GridKind::P3D, 16, |c| {
        c.ls = 3;
        c.eps = 0.9;
        c.leaf = 32;
        c.min_hss_size = 0;
        c.mode = SolverMode::MfHss;
    });
    assert!(s.factorization.stats.hss_fronts > 0);
    let b = a.mul_vec(&vec![1.0; a.n()]);
    let (_, rep) =
        gmres(|v: &[f64]| a.mul_vec(v), |v: &[f64]| s.apply_inverse(v, Par::SEQ).unwrap(), &b, &KrylovOptions::default())
            .unwrap();
    assert!(rep.converged && rep.iterations <= 100, "{} iterations", rep.iterations);
}

#[test]
fn refinement_with_accurate_hss_factorization() {
    let (a, s) = setup(GridKind::P2D, 31, |c| {
        c.ls = 3;
        c.eps = 1e-6;
        c.leaf = 16;
        c.min_hss_size = 0;
        c.d0 = 32;
        c.dd = 32;
        c.mode = SolverMode::MfHss;
    });
    assert!(s.factorization.stats.hss_fronts > 0);
    let b = a.mul_vec(&vec![1.0; a.n()]);
    let (_, rep) = iterative_refinement(
        |v: &[f64]| a.mul_vec(v),
        |v: &[f64]| s.apply_inverse(v, Par::SEQ).unwrap(),
        &b,
        &KrylovOptions::default(),
    )
    .unwrap();
    assert!(rep.converged && rep.iterations <= 10, "{rep:?}");
    assert!(!rep.stagnated);
}

#[test]
fn looser_tolerance_needs_at_least_as_many_iterations() {
    let mut its = Vec::new();
    for eps in [1e-8, 1e-4, 1e-1] {
        let (a, s) = setup(GridKind::C2D, 40, |c| {
            c.ls = 3;
            c.eps = eps;
            c.leaf = 16;
            c.min_hss_size = 0;
            c.d0 = 32;
            c.dd = 32;
            c.mode = SolverMode::MfHss;
        });
        let b = a.mul_vec(&vec![1.0; a.n()]);
        let (_, rep) =
            gmres(|v: &[f64]| a.mul_vec(v), |v: &[f64]| s.apply_inverse(v, Par::SEQ).unwrap(), &b, &KrylovOptions::default())
                .unwrap();
        assert!(rep.converged);
        its.push(rep.iterations);
    }
    assert!(its.windows(2).all(|w| w[0] <= w[1]), "{its:?}");
}
