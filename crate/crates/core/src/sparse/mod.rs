//! Sparse matrices and linear solvers.

mod csr;
mod direct;
mod krylov;

pub use csr::{CsrBuilder, CsrMatrix};
pub use direct::SparseLu;
pub use krylov::{bicgstab, Ilu0, KrylovReport};
