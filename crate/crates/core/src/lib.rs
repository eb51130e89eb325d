//! Masked matrix multiplication.
//!
//! Dense matrices whose zeros only appear at run time are multiplied by
//! first scanning B into per-region pattern codes and A into a blocked
//! sparse-row index, then running a recursive multiply whose base case
//! dispatches every region of B through a table of 2^P branch-free kernels.
//! Zero elements of A skip their B row entirely; zero vectors of B are
//! skipped by the kernel chosen for the region.
//!
//! ```
//! use mmm::{engine, matgen, DenseMatrix, LaneConfig, ElemKind};
//! use mmm::matgen::{SparsitySpec, Structure};
//!
//! let lanes = LaneConfig::default_for(ElemKind::F32);
//! let a: DenseMatrix<f32> = matgen::generate(300, 300, &SparsitySpec::new(Structure::Random, 0.8, 1), lanes).unwrap();
//! let b: DenseMatrix<f32> = matgen::generate(300, 300, &SparsitySpec::new(Structure::BlockRandom, 0.8, 2), lanes).unwrap();
//! let ctx = engine::MmmContext::new(&a, &b).unwrap();
//! let mut c = DenseMatrix::zeros(300, 300, lanes).unwrap();
//! let work = engine::multiply_mmm(&ctx, &mut c, &a, &b).unwrap();
//! assert!(work.lane_fma_ops < 300 * 300 * 300 / 10);
//! ```

pub mod baselines;
mod counters;
pub mod element;
pub mod engine;
pub mod error;
pub mod io;
pub mod kernel;
pub mod matgen;
pub mod matrix;
pub mod parallel;
pub mod plan;
pub mod simd;
pub mod verify;

pub use counters::WorkCounters;
pub use element::{ElemKind, Element};
pub use error::{Error, Result};
pub use kernel::{KernelTable, PatternCode};
pub use matrix::{AnyMatrix, DenseMatrix, LaneConfig};
pub use simd::Backend;
