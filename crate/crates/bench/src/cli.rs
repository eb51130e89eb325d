use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmm::matgen::Structure;
use mmm::plan::DEFAULT_LEAF_DIM;
use mmm::ElemKind;

use crate::algo::Algo;
use crate::operand::Operand;

#[derive(Debug, Parser)]
#[command(
    name = "mmm",
    version,
    about = "Generate, benchmark and verify masked matrix multiplication"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded random matrix to a file.
    Gen(GenArgs),
    /// Time algorithms on one input pair and write per-trial CSV rows.
    Bench(BenchArgs),
    /// Compare MMM with the best baseline over a sparsity grid.
    Sweep(SweepArgs),
    /// Check every algorithm against the simple product.
    Verify(VerifyArgs),
    /// Report the sparsity structure of a matrix.
    Analyze(AnalyzeArgs),
}

/// Lane geometry and blocking.
#[derive(Clone, Debug, Args)]
pub struct Geometry {
    /// Element type of generated operands (files carry their own).
    #[arg(long, default_value = "f32")]
    pub dtype: ElemKind,
    /// Vector groups per region, P.
    #[arg(long, default_value_t = 8)]
    pub pattern_bits: usize,
    /// Vectors per group, V.
    #[arg(long, default_value_t = 1)]
    pub group_vectors: usize,
    /// Recursion leaf side; a multiple of the region width.
    #[arg(long, default_value_t = DEFAULT_LEAF_DIM)]
    pub leaf_dim: usize,
    /// Block length for generated block structures.
    #[arg(long)]
    pub block_len: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
    #[arg(long, default_value = "random")]
    pub structure: Structure,
    #[arg(long)]
    pub sparsity: f64,
    #[arg(long)]
    pub block_len: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "f32")]
    pub dtype: ElemKind,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AlgoChoice {
    Mmm,
    Dense,
    #[value(name = "dense_recursive")]
    DenseRecursive,
    #[value(name = "skip_a")]
    SkipA,
    Spgemm,
    All,
}

impl AlgoChoice {
    pub fn expand(choices: &[AlgoChoice]) -> Vec<Algo> {
        let mut out = Vec::new();
        for c in choices {
            let algos: &[Algo] = match c {
                AlgoChoice::Mmm => &[Algo::Mmm],
                AlgoChoice::Dense => &[Algo::Dense],
                AlgoChoice::DenseRecursive => &[Algo::DenseRecursive],
                AlgoChoice::SkipA => &[Algo::SkipA],
                AlgoChoice::Spgemm => &[Algo::Spgemm],
                AlgoChoice::All => &Algo::ALL,
            };
            for &a in algos {
                if !out.contains(&a) {
                    out.push(a);
                }
            }
        }
        out
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// File path or generator spec `structure:sparsity[:seed]`.
    #[arg(long)]
    pub a: Operand,
    #[arg(long)]
    pub b: Operand,
    /// Side of generated operands.
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub algo: Vec<AlgoChoice>,
    /// Defaults to MMM_WORKERS, then the hardware thread count.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub trials: u32,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub geometry: Geometry,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    /// Spacing of the sparsity grid over [0, 1] for both operands.
    #[arg(long, default_value_t = 0.1)]
    pub grid_step: f64,
    #[arg(long, default_value = "block_random")]
    pub structure_b: Structure,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = 3)]
    pub trials: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub geometry: Geometry,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub a: Operand,
    #[arg(long)]
    pub b: Operand,
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    /// Largest accepted relative error; 1e-5 for f32 and 1e-12 for f64 by default.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Corrupt the MMM plan before multiplying (negative control).
    #[arg(long, hide = true)]
    pub mutate: bool,
    #[command(flatten)]
    pub geometry: Geometry,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// File path or generator spec.
    #[arg(long)]
    pub matrix: Operand,
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    #[command(flatten)]
    pub geometry: Geometry,
}
