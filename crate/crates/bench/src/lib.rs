//! Command-line harness for the masked multiply: matrix generation,
//! benchmarks, sparsity sweeps, verification and matrix analysis.

pub mod algo;
pub mod cli;
pub mod commands;
pub mod error;
pub mod operand;
pub mod record;
