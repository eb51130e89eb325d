//! The benchmarked algorithms behind one calling convention.

use std::fmt;
use std::time::{Duration, Instant};

use clap::ValueEnum;
use mmm::baselines::{
    csr_to_dense, dense_to_csr, multiply_skip_a_parallel, multiply_spgemm_parallel,
};
use mmm::engine::{
    dense_leaf, multiply_parallel, multiply_recursive_parallel, multiply_simple_parallel,
    MmmContext,
};
use mmm::{DenseMatrix, Element, KernelTable, LaneConfig, PatternCode, WorkCounters};

use crate::error::CliResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, ValueEnum)]
pub enum Algo {
    Mmm,
    Dense,
    #[value(name = "dense_recursive")]
    DenseRecursive,
    #[value(name = "skip_a")]
    SkipA,
    Spgemm,
}

impl Algo {
    pub const ALL: [Algo; 5] = [
        Algo::Mmm,
        Algo::Dense,
        Algo::DenseRecursive,
        Algo::SkipA,
        Algo::Spgemm,
    ];
    /// Baselines MMM is compared against in sweeps.
    pub const BASELINES: [Algo; 3] = [Algo::DenseRecursive, Algo::SkipA, Algo::Spgemm];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Mmm => "mmm",
            Algo::Dense => "dense",
            Algo::DenseRecursive => "dense_recursive",
            Algo::SkipA => "skip_a",
            Algo::Spgemm => "spgemm",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub workers: usize,
    pub leaf_dim: usize,
    pub lanes: LaneConfig,
    /// Clears one live pattern code of the MMM plan before multiplying.
    pub mutate: bool,
}

pub struct Run<T: Element> {
    /// MMM plan building, or CSR conversion in and out for SpGEMM.
    pub preprocess: Duration,
    pub multiply: Duration,
    pub counters: WorkCounters,
    pub output: DenseMatrix<T>,
}

impl<T: Element> Run<T> {
    pub fn total(&self) -> Duration {
        self.preprocess + self.multiply
    }
}

/// Drops the codes of the first B row that some non-zero of A reads.
fn corrupt_plan<T: Element>(ctx: &mut MmmContext<T>, a: &DenseMatrix<T>) {
    let a_reads = |k: usize| (0..a.rows()).any(|i| a.get(i, k) != T::ZERO);
    for plan in &mut ctx.b_plans.plans {
        for local in 0..plan.rows {
            if plan.row_active[local] > 0 && a_reads(plan.row0 + local) {
                let rpr = plan.regions_per_row;
                plan.codes[local * rpr..(local + 1) * rpr].fill(PatternCode::EMPTY);
                return;
            }
        }
    }
}

pub fn run<T: Element>(
    algo: Algo,
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    opts: &RunOptions,
) -> CliResult<Run<T>> {
    let mut c = DenseMatrix::<T>::zeros(a.rows(), b.cols(), opts.lanes)?;
    let dense_ops = (a.rows() * a.cols() * b.cols()) as u64;
    let w = opts.workers;
    let mut preprocess = Duration::ZERO;
    let start = Instant::now();
    let counters = match algo {
        Algo::Mmm => {
            let table = KernelTable::build(opts.lanes)?;
            let mut ctx = MmmContext::with_table(a, b, table, opts.leaf_dim)?;
            preprocess = start.elapsed();
            if opts.mutate {
                corrupt_plan(&mut ctx, a);
            }
            let t = Instant::now();
            let counters = multiply_parallel(&ctx, &mut c, a, b, w)?;
            return Ok(Run {
                preprocess,
                multiply: t.elapsed(),
                counters,
                output: c,
            });
        }
        Algo::Dense => {
            multiply_simple_parallel(&mut c, a, b, w)?;
            WorkCounters {
                lane_fma_ops: dense_ops,
                ..WorkCounters::default()
            }
        }
        Algo::DenseRecursive => {
            multiply_recursive_parallel(&mut c, a, b, opts.leaf_dim, dense_leaf, w)?
        }
        Algo::SkipA => multiply_skip_a_parallel(&mut c, a, b, w)?,
        Algo::Spgemm => {
            let (ca, cb) = (dense_to_csr(a), dense_to_csr(b));
            preprocess = start.elapsed();
            let t = Instant::now();
            let (prod, flops) = multiply_spgemm_parallel(&ca, &cb, w)?;
            let multiply = t.elapsed();
            let t = Instant::now();
            let output = csr_to_dense(&prod, opts.lanes)?;
            return Ok(Run {
                preprocess: preprocess + t.elapsed(),
                multiply,
                counters: WorkCounters {
                    lane_fma_ops: flops,
                    ..WorkCounters::default()
                },
                output,
            });
        }
    };
    Ok(Run {
        preprocess,
        multiply: start.elapsed(),
        counters,
        output: c,
    })
}
