//! CSR storage, SpMV kernels, footprint arithmetic and file formats.

pub mod csr;
pub mod footprint;
pub mod io;
pub mod kernel;

pub use csr::CsrMatrix;
pub use footprint::{element_count, max_nnz_fitting, problem_bytes, FootprintModel};
pub use io::{load_matrix, save_matrix, MatrixFormat};
pub use kernel::{row_blocks, spmv, spmv_into, spmv_parallel, spmv_parallel_into, SpmvPool};
