//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::time::{Duration, Instant};

use mmm::matgen::{generate, SparsitySpec, Structure};
use mmm::{DenseMatrix, Element, LaneConfig};

pub fn lanes<T: Element>() -> LaneConfig {
    LaneConfig::default_for(T::KIND)
}

pub fn gen<T: Element>(
    rows: usize,
    cols: usize,
    st: Structure,
    target: f64,
    seed: u64,
) -> DenseMatrix<T> {
    generate(
        rows,
        cols,
        &SparsitySpec::new(st, target, seed),
        lanes::<T>(),
    )
    .unwrap()
}

/// Textbook triple loop in f64 over logical elements.
pub fn naive_product<T: Element>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Vec<f64> {
    let (m, n, p) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; m * p];
    for i in 0..m {
        for k in 0..n {
            let av = a.get(i, k).to_f64();
            if av == 0.0 {
                continue;
            }
            for j in 0..p {
                out[i * p + j] += av * b.get(k, j).to_f64();
            }
        }
    }
    out
}

/// Largest |x - y| / (|A||B|)_ij over all entries, computed in f64.
pub fn naive_relative_error<T: Element>(
    c: &DenseMatrix<T>,
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
) -> f64 {
    let exact = naive_product(a, b);
    let (m, n, p) = (a.rows(), a.cols(), b.cols());
    let mut worst = 0.0f64;
    for i in 0..m {
        for j in 0..p {
            let scale: f64 = (0..n)
                .map(|k| (a.get(i, k).to_f64() * b.get(k, j).to_f64()).abs())
                .sum();
            let diff = (c.get(i, j).to_f64() - exact[i * p + j]).abs();
            let err = if diff == 0.0 {
                0.0
            } else if scale > 0.0 {
                diff / scale
            } else {
                f64::INFINITY
            };
            worst = worst.max(err);
        }
    }
    worst
}

/// One region multiply-add, lane by lane, reading the pattern bits MSB-first.
pub fn reference_region<T: Element>(code: u16, c: &mut [T], a: T, b: &[T], lanes: &LaneConfig) {
    let gl = lanes.group_len();
    for g in 0..lanes.pattern_bits {
        if code >> (lanes.pattern_bits - 1 - g) & 1 == 1 {
            for l in g * gl..(g + 1) * gl {
                c[l] = T::from_f64(c[l].to_f64() + a.to_f64() * b[l].to_f64());
            }
        }
    }
}

/// Number of lane groups in each padded row of `b` holding a non-zero.
pub fn nonzero_groups<T: Element>(b: &DenseMatrix<T>, lanes: &LaneConfig) -> Vec<u64> {
    (0..b.rows())
        .map(|k| {
            b.padded_row(k)
                .chunks(lanes.group_len())
                .filter(|g| g.iter().any(|&v| v != T::ZERO))
                .count() as u64
        })
        .collect()
}

/// Number of regions in each padded row of `b` holding a non-zero.
pub fn nonzero_regions<T: Element>(b: &DenseMatrix<T>, lanes: &LaneConfig) -> Vec<u64> {
    (0..b.rows())
        .map(|k| {
            b.padded_row(k)
                .chunks(lanes.region())
                .filter(|g| g.iter().any(|&v| v != T::ZERO))
                .count() as u64
        })
        .collect()
}

/// Counters predicted from the operands alone:
/// `(kernel_invocations, lane_fma_ops, rows_skipped, regions_skipped)`.
pub fn expected_work<T: Element>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    lanes: &LaneConfig,
) -> (u64, u64, u64, u64) {
    let groups = nonzero_groups(b, lanes);
    let regions = nonzero_regions(b, lanes);
    let per_row = (b.padded_cols() / lanes.region()) as u64;
    let gl = lanes.group_len() as u64;
    let (mut inv, mut ops, mut skipped, mut zero_regions) = (0, 0, 0, 0);
    for i in 0..a.rows() {
        for (k, &v) in a.row(i).iter().enumerate() {
            if v == T::ZERO {
                skipped += 1;
            } else {
                inv += regions[k];
                ops += groups[k] * gl;
                zero_regions += per_row - regions[k];
            }
        }
    }
    (inv, ops, skipped, zero_regions)
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

pub fn time<R>(f: impl FnOnce() -> R) -> (R, Duration) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed())
}
