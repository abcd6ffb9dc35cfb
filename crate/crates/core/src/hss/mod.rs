//! Hierarchically semiseparable matrices: randomized adaptive compression,
//! matvec, pruned element extraction, ULV factorization and the partial
//! elimination used for HSS fronts.

mod cluster;
mod compress;
mod matrix;
mod schur;
mod ulv;

pub use cluster::ClusterTree;
pub use compress::{compress, CompressLog, CompressOptions, Compressed, DenseSource, HssSource};
pub use matrix::{Extracted, Generator, HssMatrix, HssNode};
pub use schur::{partial_ulv_and_schur, LowRankSchur, PartialUlv};
pub use ulv::{ulv_factor, UlvFactors};

use crate::dense::{gemm, DenseMatrix, MatRef, Par};
use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum HssError {
    #[error("rank explosion: {d} samples with oversampling still short of certifying ranks (max rank {max_rank})")]
    RankExplosion { d: usize, max_rank: usize },
    #[error("singular reduced block in HSS node {node}")]
    Singular { node: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("separator size {n_sep} does not match the first cluster of size {boundary}")]
    SplitMismatch { n_sep: usize, boundary: usize },
}

pub(crate) fn mul<T: Scalar>(a: MatRef<'_, T>, b: MatRef<'_, T>, par: Par) -> DenseMatrix<T> {
    let mut c = DenseMatrix::zeros(a.rows(), b.cols());
    gemm(T::one(), a, b, T::zero(), c.as_mut(), par).expect("inner dimensions agree");
    c
}

/// `a^* b`.
pub(crate) fn adj_mul<T: Scalar>(a: &DenseMatrix<T>, b: MatRef<'_, T>, par: Par) -> DenseMatrix<T> {
    let at = a.adjoint();
    mul(at.as_ref(), b, par)
}

/// Order-sensitive hash of a block, used to show that stored blocks stay put.
pub(crate) fn checksum<T: Scalar>(m: &DenseMatrix<T>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in m.as_slice() {
        for bits in [v.re().to_bits(), v.abs().to_bits()] {
            h ^= bits;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h ^ (m.rows() as u64) << 32 ^ m.cols() as u64
}
