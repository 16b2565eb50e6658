//! Partition functions of grid factor graphs whose factors may be negative
//! or complex.
//!
//! Configuration space is split into phase bins according to the argument of
//! `f(x)` (positive, negative, positive imaginary, negative imaginary). Each
//! bin's partial partition function is a sum of terms of a single phase, so
//! it can be estimated by ordinary Monte Carlo; the crate provides those
//! estimators, the samplers feeding them, exact engines to check them
//! against, and the dual-graph (Fourier/XOR) construction used to prove that
//! certain grids have `Z_f = 0`.

pub mod dual;
pub mod dump;
pub mod error;
pub mod estimate;
pub mod exact;
pub mod grid;
pub mod harness;
pub mod kernel;
pub mod numeric;
pub mod sampler;
pub mod value;

pub use error::{Error, Result};
pub use exact::{brute_force_summary, transfer_matrix_summary, ExactCaps, PartitionSummary};
pub use grid::{Assignment, GridModel};
pub use kernel::PairwiseKernel;
pub use value::{classify_phase, ComplexValue, PhaseBin};
