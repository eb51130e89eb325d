//! Subcommand implementations.

use std::fs::File;
use std::io::{self, Write};

use mmm::io::write_file;
use mmm::matgen::{generate, zero_block_fraction, zero_column_group_fraction, SparsitySpec};
use mmm::parallel::resolve_workers;
use mmm::verify::{max_relative_error, product_magnitude, quantized_checksum};
use mmm::{engine, DenseMatrix, ElemKind, Element, LaneConfig};

use crate::algo::{run, Algo, RunOptions};
use crate::cli::{
    AlgoChoice, AnalyzeArgs, BenchArgs, Cli, Command, GenArgs, Geometry, SweepArgs, VerifyArgs,
};
use crate::error::{CliError, CliResult};
use crate::operand::{load_pair, resolve_kind, Operand};
use crate::record::{summarize, write_csv, BenchRecord, SweepRecord, Trial};

macro_rules! with_kind {
    ($kind:expr, $f:ident($($arg:expr),*)) => {
        match $kind {
            ElemKind::F32 => $f::<f32>($($arg),*),
            ElemKind::F64 => $f::<f64>($($arg),*),
        }
    };
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen(args) => with_kind!(args.dtype, gen(&args)),
        Command::Bench(args) => {
            let kind = resolve_kind(&[&args.a, &args.b], args.geometry.dtype)?;
            with_kind!(kind, bench(&args))
        }
        Command::Sweep(args) => with_kind!(args.geometry.dtype, sweep(&args)),
        Command::Verify(args) => {
            let kind = resolve_kind(&[&args.a, &args.b], args.geometry.dtype)?;
            with_kind!(kind, verify(&args))
        }
        Command::Analyze(args) => {
            let kind = resolve_kind(&[&args.matrix], args.geometry.dtype)?;
            with_kind!(kind, analyze(&args))
        }
    }
}

fn lanes_for<T: Element>(g: &Geometry) -> CliResult<LaneConfig> {
    let lanes = LaneConfig::new(T::KIND.default_lanes(), g.pattern_bits, g.group_vectors)?;
    lanes.check_kind(T::KIND)?;
    Ok(lanes)
}

fn workers(flag: Option<usize>) -> CliResult<usize> {
    if flag == Some(0) {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    Ok(resolve_workers(flag))
}

fn run_options<T: Element>(g: &Geometry, workers: usize) -> CliResult<RunOptions> {
    let lanes = lanes_for::<T>(g)?;
    if g.leaf_dim == 0 || !g.leaf_dim.is_multiple_of(lanes.region()) {
        return Err(CliError::Usage(format!(
            "--leaf-dim {} must be a positive multiple of the region width {}",
            g.leaf_dim,
            lanes.region()
        )));
    }
    Ok(RunOptions {
        workers,
        leaf_dim: g.leaf_dim,
        lanes,
        mutate: false,
    })
}

fn output(path: &Option<std::path::PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn gen<T: Element>(args: &GenArgs) -> CliResult<()> {
    let mut spec = SparsitySpec::new(args.structure, args.sparsity, args.seed);
    spec.block_len = args.block_len;
    let m = generate::<T>(
        args.rows,
        args.cols,
        &spec,
        LaneConfig::default_for(T::KIND),
    )?;
    write_file(&m, &args.out)?;
    println!(
        "wrote {}: {}x{} {} {}, measured sparsity {:.6}",
        args.out.display(),
        m.rows(),
        m.cols(),
        T::KIND,
        args.structure,
        m.elementwise_sparsity()
    );
    Ok(())
}

fn bench<T: Element>(args: &BenchArgs) -> CliResult<()> {
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let workers = workers(args.workers)?;
    let opts = run_options::<T>(&args.geometry, workers)?;
    let (a, b) = load_pair::<T>(
        &args.a,
        &args.b,
        args.n,
        opts.lanes,
        args.geometry.block_len,
    )?;
    let mut rows = Vec::new();
    for algo in AlgoChoice::expand(&args.algo) {
        let mut trials = Vec::new();
        for t in 0..args.trials {
            let r = run(algo, &a, &b, &opts)?;
            let mut rec = BenchRecord {
                algo: algo.name().into(),
                n: a.rows(),
                a_sparsity: a.elementwise_sparsity(),
                b_sparsity: b.elementwise_sparsity(),
                structure_b: args.b.structure_name(),
                dtype: T::KIND.to_string(),
                workers,
                trial: Trial::Index(t),
                preprocess_ns: r.preprocess.as_nanos() as u64,
                multiply_ns: r.multiply.as_nanos() as u64,
                total_ns: r.total().as_nanos() as u64,
                kernel_invocations: 0,
                lane_fma_ops: 0,
                rows_skipped: 0,
                regions_skipped: 0,
                checksum: quantized_checksum(&r.output),
            };
            rec.set_counters(&r.counters);
            trials.push(rec);
        }
        let summary = summarize(&trials);
        eprintln!(
            "{:<16} median multiply {:>12} ns  total {:>12} ns  checksum {:016x}",
            algo.name(),
            summary.multiply_ns,
            summary.total_ns,
            summary.checksum
        );
        rows.extend(trials);
        rows.push(summary);
    }
    write_csv(&rows, output(&args.out)?)?;
    Ok(())
}

/// `0, step, 2 step, ..., 1`.
pub fn grid(step: f64) -> CliResult<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(CliError::Usage(format!(
            "--grid-step {step} must be in (0, 1]"
        )));
    }
    let cells = (1.0 / step).round() as usize;
    Ok((0..=cells).map(|i| (i as f64 * step).min(1.0)).collect())
}

fn sweep<T: Element>(args: &SweepArgs) -> CliResult<()> {
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let workers = workers(args.workers)?;
    let opts = run_options::<T>(&args.geometry, workers)?;
    let values = grid(args.grid_step)?;
    let n = args.n;
    let mut rows = Vec::new();
    for &sa in &values {
        for &sb in &values {
            let a_op = Operand::Generated {
                structure: mmm::matgen::Structure::Random,
                sparsity: sa,
                seed: args.seed,
            };
            let b_op = Operand::Generated {
                structure: args.structure_b,
                sparsity: sb,
                seed: args.seed + 1,
            };
            let (a, b) = load_pair::<T>(&a_op, &b_op, n, opts.lanes, args.geometry.block_len)?;
            let mut checksums = Vec::new();
            let mut time = |algo: Algo| -> CliResult<(u64, u64, mmm::WorkCounters)> {
                let (mut mul, mut tot) = (Vec::new(), Vec::new());
                let mut counters = mmm::WorkCounters::default();
                for t in 0..args.trials {
                    let r = run(algo, &a, &b, &opts)?;
                    if t == 0 {
                        checksums.push(quantized_checksum(&r.output));
                        counters = r.counters;
                    }
                    mul.push(r.multiply.as_nanos() as u64);
                    tot.push(r.total().as_nanos() as u64);
                }
                Ok((
                    crate::record::median_ns(&mut mul),
                    crate::record::median_ns(&mut tot),
                    counters,
                ))
            };
            let (mmm_mul, mmm_tot, w) = time(Algo::Mmm)?;
            let mut best = (Algo::DenseRecursive, u64::MAX);
            for algo in Algo::BASELINES {
                let (_, total, _) = time(algo)?;
                if total < best.1 {
                    best = (algo, total);
                }
            }
            let visited = w.kernel_invocations + w.regions_skipped_by_zero_code;
            let rec = SweepRecord {
                n,
                a_sparsity: sa,
                b_sparsity: sb,
                structure_b: args.structure_b.to_string(),
                dtype: T::KIND.to_string(),
                workers,
                best_baseline: best.0.name().into(),
                best_baseline_ns: best.1,
                mmm_multiply_ns: mmm_mul,
                mmm_total_ns: mmm_tot,
                speedup_multiply: best.1 as f64 / mmm_mul.max(1) as f64,
                speedup_total: best.1 as f64 / mmm_tot.max(1) as f64,
                lane_fma_ops: w.lane_fma_ops,
                lane_fma_ratio: w.lane_fma_ops as f64 / (n as f64).powi(3),
                rows_skipped_ratio: w.rows_skipped as f64 / (n * n) as f64,
                regions_skipped_ratio: if visited == 0 {
                    0.0
                } else {
                    w.regions_skipped_by_zero_code as f64 / visited as f64
                },
                checksums_agree: checksums.windows(2).all(|p| p[0] == p[1]),
            };
            eprintln!(
                "A {sa:.2} B {sb:.2}: mmm {:.3} ms, best {} {:.3} ms, speedup {:.2}",
                mmm_mul as f64 / 1e6,
                rec.best_baseline,
                best.1 as f64 / 1e6,
                rec.speedup_multiply
            );
            rows.push(rec);
        }
    }
    write_csv(&rows, output(&args.out)?)?;
    Ok(())
}

fn verify<T: Element>(args: &VerifyArgs) -> CliResult<()> {
    let workers = workers(args.workers)?;
    let mut opts = run_options::<T>(&args.geometry, workers)?;
    opts.mutate = args.mutate;
    let (a, b) = load_pair::<T>(
        &args.a,
        &args.b,
        args.n,
        opts.lanes,
        args.geometry.block_len,
    )?;
    let tolerance = args.tolerance.unwrap_or(T::PRODUCT_TOLERANCE);
    let mut oracle = DenseMatrix::<T>::zeros(a.rows(), b.cols(), opts.lanes)?;
    engine::multiply_simple(&mut oracle, &a, &b)?;
    let magnitude = product_magnitude(&a, &b)?;
    let reference = quantized_checksum(&oracle);
    println!("{:<16} {:>12} {:>18}", "algo", "max_rel_err", "checksum");
    println!("{:<16} {:>12} {:>18x}", "simple", 0.0, reference);
    let mut ok = true;
    for algo in Algo::ALL {
        let r = run(algo, &a, &b, &opts)?;
        let err = max_relative_error(&r.output, &oracle, &magnitude);
        let checksum = quantized_checksum(&r.output);
        let within = err <= tolerance;
        ok &= within;
        println!(
            "{:<16} {:>12.3e} {:>18x}{}{}",
            algo.name(),
            err,
            checksum,
            if checksum == reference {
                ""
            } else {
                " (checksum differs)"
            },
            if within { "" } else { "  FAIL" }
        );
    }
    println!(
        "{} at tolerance {tolerance:e}",
        if ok { "PASS" } else { "FAIL" }
    );
    if ok {
        Ok(())
    } else {
        Err(CliError::Verification)
    }
}

/// Thresholds for [`predict_best`], read off a single-thread sweep at
/// n = 1024 (A random, B block_random) along the diagonal where both
/// operands share one sparsity.
const SPGEMM_FROM: f64 = 0.999;
const MMM_FROM: f64 = 0.6;
const MMM_FROM_ZERO_REGIONS: f64 = 0.5;
const SKIP_A_FROM: f64 = 0.4;

/// Algorithm expected to be fastest, preprocessing included, when both
/// operands look like this one.
pub fn predict_best(elementwise: f64, zero_region_fraction: f64) -> Algo {
    if elementwise >= SPGEMM_FROM {
        Algo::Spgemm
    } else if elementwise >= MMM_FROM || zero_region_fraction >= MMM_FROM_ZERO_REGIONS {
        Algo::Mmm
    } else if elementwise >= SKIP_A_FROM {
        Algo::SkipA
    } else {
        Algo::DenseRecursive
    }
}

fn analyze<T: Element>(args: &AnalyzeArgs) -> CliResult<()> {
    let lanes = lanes_for::<T>(&args.geometry)?;
    let m = args
        .matrix
        .load::<T>(args.n, args.n, lanes, args.geometry.block_len)?;
    let elementwise = m.elementwise_sparsity();
    let line = |label: String, value: String| println!("{label:<24}{value}");
    line(
        "matrix".into(),
        format!("{}x{} {}", m.rows(), m.cols(), T::KIND),
    );
    line("elementwise sparsity".into(), format!("{elementwise:.6}"));
    let mut widths = vec![lanes.lanes, lanes.group_len(), lanes.region()];
    widths.dedup();
    for w in &widths {
        line(
            format!("zero regions, width {w}"),
            format!("{:.6}", zero_block_fraction(&m, *w)),
        );
    }
    line(
        "zero columns".into(),
        format!("{:.6}", zero_column_group_fraction(&m, 1)),
    );
    line(
        format!("zero column blocks, {}", lanes.lanes),
        format!("{:.6}", zero_column_group_fraction(&m, lanes.lanes)),
    );
    let best = predict_best(elementwise, zero_block_fraction(&m, lanes.region()));
    line("predicted best".into(), best.to_string());
    Ok(())
}
