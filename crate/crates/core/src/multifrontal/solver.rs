use std::time::Instant;

use thiserror::Error;

use super::{factor, FactorOptions, Factorization, MfError};
use crate::dense::Par;
use crate::order::{analyze, AnalysisOptions, NdStrategy, OrderError, Permutation};
use crate::scalar::Scalar;
use crate::sparse::{apply_scaling, equilibrate_and_permute, undo_scaling, ScalingState, SparseError, SparseMatrix, VectorSide};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("scaling failed: {0}")]
    Scaling(#[from] SparseError),
    #[error("ordering failed: {0}")]
    Ordering(#[from] OrderError),
    #[error("factorization failed: {0}")]
    Factor(#[from] MfError),
}

#[derive(Clone, Debug, Default)]
pub struct SolverOptions {
    pub analysis: AnalysisOptions,
    pub factor: FactorOptions,
    /// Skip equilibration and matching.
    pub no_scaling: bool,
}

/// Wall-clock seconds of the setup phases.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SetupTimings {
    pub scaling: f64,
    pub analysis: f64,
    pub factor: f64,
}

/// Scaled, reordered and factored matrix. [`Solver::apply_inverse`] acts on
/// vectors of the original system.
#[derive(Clone, Debug)]
pub struct Solver<T> {
    pub scaling: ScalingState,
    pub perm: Permutation,
    pub factorization: Factorization<T>,
    pub timings: SetupTimings,
    /// Strategy actually used; geometric dissection is replaced by the graph
    /// one when the matching permuted columns.
    pub strategy: NdStrategy,
}

impl<T: Scalar> Solver<T> {
    pub fn new(a: &SparseMatrix<T>, opts: &SolverOptions, par: Par) -> Result<Self, SolverError> {
        let t0 = Instant::now();
        let (scaled, scaling) = if opts.no_scaling {
            (a.clone(), ScalingState::identity(a.n()))
        } else {
            equilibrate_and_permute(a)?
        };
        let t1 = Instant::now();
        let mut aopts = opts.analysis.clone();
        let moved = scaling.col_perm.iter().enumerate().any(|(j, &q)| j != q);
        if moved && matches!(aopts.strategy, NdStrategy::Geometric { .. }) {
            aopts.strategy = NdStrategy::Graph;
        }
        let analysis = analyze(&scaled, &aopts, par)?;
        let t2 = Instant::now();
        let permuted = scaled.permute_symmetric(analysis.perm.perm());
        let factorization = factor(&permuted, &analysis.tree, &opts.factor, par)?;
        let t3 = Instant::now();
        Ok(Solver {
            scaling,
            perm: analysis.perm,
            factorization,
            timings: SetupTimings {
                scaling: (t1 - t0).as_secs_f64(),
                analysis: (t2 - t1).as_secs_f64(),
                factor: (t3 - t2).as_secs_f64(),
            },
            strategy: aopts.strategy,
        })
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    /// `M^{-1} b`, where `M` is the (approximate) factorization of `A`.
    pub fn apply_inverse(&self, b: &[T], par: Par) -> Result<Vec<T>, MfError> {
        let n = self.n();
        if b.len() != n {
            return Err(MfError::Shape { expected: n, got: b.len() });
        }
        let scaled = apply_scaling(b, &self.scaling, VectorSide::Rhs).expect("length checked");
        let permuted = self.perm.apply(&scaled);
        let z = self.factorization.solve(&permuted, par)?;
        let y = self.perm.apply_inverse(&z);
        Ok(undo_scaling(&y, &self.scaling, VectorSide::Solution).expect("length checked"))
    }
}
