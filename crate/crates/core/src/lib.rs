//! Multifrontal sparse LU factorization whose largest fronts are compressed
//! as hierarchically semiseparable (HSS) matrices through randomized
//! sampling, and used as a preconditioner for restarted GMRES.
//!
//! The pipeline is: equilibrate and permute ([`sparse`]), order with nested
//! dissection and build the front tree ([`order`]), factor ([`multifrontal`])
//! and solve with GMRES or iterative refinement ([`krylov`]).
//! [`driver`] strings the phases together.

pub mod dense;
pub mod scalar;
pub mod sparse;
pub mod hss;
pub mod order;
mod tree_par;
pub mod random;
pub mod multifrontal;
pub mod krylov;
pub mod driver;
