//! Sparse matrix-vector multiplication laboratory.
//!
//! - [`gen`]: seeded R-MAT and 9-point stencil generators, random permutation.
//! - [`sparse`]: CSR storage, serial and row-blocked parallel SpMV, footprint
//!   arithmetic, binary and Matrix Market formats.
//! - [`sim`]: trace-driven cache hierarchy simulator with a streaming L2
//!   prefetcher, DRAM congestion shutoff and an L3 bypass mode.
//! - [`perf`]: raw counters from hardware or the simulator, and the derived
//!   miss-rate, stall and GFLOPS metrics.
//! - [`bench`]: constant-work benchmark harness, sweeps and reports.

pub mod bench;
pub mod error;
pub mod gen;
pub mod perf;
pub mod sim;
pub mod sparse;

pub use error::{Error, Result};
pub use gen::{GenSpec, MatrixKind, Permutation, TripletMatrix};
pub use sparse::CsrMatrix;
