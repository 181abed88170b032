//! Dense complex linear algebra used throughout the crate.

mod eig;
mod matrix;
mod subsystems;

pub use eig::{expi_hermitian, hermitian_eig, psd_sqrt, Spectrum, TOL_HERM};
pub use matrix::{ComplexMatrix, C64, ONE, ZERO};
pub use subsystems::{
    partial_trace, partial_transpose, permutation_map, permute_subsystems, permute_vector,
    tensor_all, tensor_product, trace_leading, trace_trailing,
};
