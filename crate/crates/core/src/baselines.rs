//! Comparison algorithms: zero-skipping dense multiply and CSR x CSR SpGEMM.

use rayon::prelude::*;

use crate::counters::WorkCounters;
use crate::element::Element;
use crate::engine::check_product_dims;
use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, LaneConfig};
use crate::parallel;
use crate::simd::Backend;

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub row_starts: Vec<usize>,
    pub col_ids: Vec<u32>,
    pub values: Vec<T>,
}

impl<T: Element> CsrMatrix<T> {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[T]) {
        let r = self.row_starts[i]..self.row_starts[i + 1];
        (&self.col_ids[r.clone()], &self.values[r])
    }

    /// Checks the CSR structural invariants.
    pub fn is_well_formed(&self) -> bool {
        self.row_starts.len() == self.rows + 1
            && self.row_starts[0] == 0
            && self.row_starts[self.rows] == self.values.len()
            && self.col_ids.len() == self.values.len()
            && self.row_starts.windows(2).all(|w| w[0] <= w[1])
            && (0..self.rows).all(|i| {
                let (cols, _) = self.row(i);
                cols.windows(2).all(|w| w[0] < w[1])
                    && cols.iter().all(|&j| (j as usize) < self.cols)
            })
    }
}

pub fn dense_to_csr<T: Element>(m: &DenseMatrix<T>) -> CsrMatrix<T> {
    let mut row_starts = Vec::with_capacity(m.rows() + 1);
    let mut col_ids = Vec::new();
    let mut values = Vec::new();
    row_starts.push(0);
    for row in m.iter_rows() {
        for (j, &v) in row.iter().enumerate() {
            if v != T::ZERO {
                col_ids.push(j as u32);
                values.push(v);
            }
        }
        row_starts.push(values.len());
    }
    CsrMatrix {
        rows: m.rows(),
        cols: m.cols(),
        row_starts,
        col_ids,
        values,
    }
}

pub fn csr_to_dense<T: Element>(c: &CsrMatrix<T>, lanes: LaneConfig) -> Result<DenseMatrix<T>> {
    let mut m = DenseMatrix::zeros(c.rows, c.cols, lanes)?;
    for i in 0..c.rows {
        let (cols, vals) = c.row(i);
        let out = m.row_mut(i);
        for (&j, &v) in cols.iter().zip(vals) {
            out[j as usize] = v;
        }
    }
    Ok(m)
}

fn skip_a_row<T: Element>(
    backend: Backend,
    c_row: &mut [T],
    a_row: &[T],
    b: &DenseMatrix<T>,
) -> u64 {
    let mut nnz = 0;
    for (k, &av) in a_row.iter().enumerate() {
        if av == T::ZERO {
            continue;
        }
        nnz += 1;
        T::axpy(backend, c_row, av, b.row(k));
    }
    nnz
}

fn skip_a_counters(nnz: u64, a: (usize, usize), b_cols: usize) -> WorkCounters {
    WorkCounters {
        lane_fma_ops: nnz * b_cols as u64,
        rows_skipped: (a.0 * a.1) as u64 - nnz,
        ..WorkCounters::default()
    }
}

/// `c += a * b` in i-k-j order, skipping the inner loop when `A[i, k]` is zero.
pub fn multiply_skip_a<T: Element>(
    c: &mut DenseMatrix<T>,
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
) -> Result<WorkCounters> {
    check_product_dims(c, a, b)?;
    let backend = Backend::detect();
    let mut nnz = 0;
    for i in 0..a.rows() {
        nnz += skip_a_row(backend, c.row_mut(i), a.row(i), b);
    }
    Ok(skip_a_counters(nnz, (a.rows(), a.cols()), b.cols()))
}

pub fn multiply_skip_a_parallel<T: Element>(
    c: &mut DenseMatrix<T>,
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    workers: usize,
) -> Result<WorkCounters> {
    check_product_dims(c, a, b)?;
    let backend = Backend::detect();
    let (stride, cols) = (c.padded_cols(), c.cols());
    let nnz = parallel::pool(workers)?.install(|| {
        c.storage_mut()
            .par_chunks_mut(stride)
            .enumerate()
            .map(|(i, row)| skip_a_row(backend, &mut row[..cols], a.row(i), b))
            .sum::<u64>()
    });
    Ok(skip_a_counters(nnz, (a.rows(), a.cols()), b.cols()))
}

/// Row-wise (Gustavson) accumulation into a dense scratch row.
struct RowAccumulator<T> {
    acc: Vec<T>,
    touched: Vec<bool>,
}

impl<T: Element> RowAccumulator<T> {
    fn new(cols: usize) -> Self {
        RowAccumulator {
            acc: vec![T::ZERO; cols],
            touched: vec![false; cols],
        }
    }

    /// Product row `i`, appended to `cols_out`/`vals_out`. Returns the flop count.
    fn row(
        &mut self,
        backend: Backend,
        a: &CsrMatrix<T>,
        b: &CsrMatrix<T>,
        i: usize,
        cols_out: &mut Vec<u32>,
        vals_out: &mut Vec<T>,
    ) -> u64 {
        let (a_cols, a_vals) = a.row(i);
        let mut flops = 0;
        for (&k, &av) in a_cols.iter().zip(a_vals) {
            let (b_cols, b_vals) = b.row(k as usize);
            T::scatter_axpy(backend, &mut self.acc, av, b_cols, b_vals);
            for &j in b_cols {
                self.touched[j as usize] = true;
            }
            flops += b_cols.len() as u64;
        }
        if flops > 0 {
            for j in 0..self.acc.len() {
                if self.touched[j] {
                    cols_out.push(j as u32);
                    vals_out.push(self.acc[j]);
                    self.acc[j] = T::ZERO;
                    self.touched[j] = false;
                }
            }
        }
        flops
    }
}

fn check_spgemm_dims<T>(a: &CsrMatrix<T>, b: &CsrMatrix<T>) -> Result<()> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{} but B is {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    Ok(())
}

/// Sparse product `a * b` and its multiply-add count.
pub fn multiply_spgemm_counted<T: Element>(
    a: &CsrMatrix<T>,
    b: &CsrMatrix<T>,
) -> Result<(CsrMatrix<T>, u64)> {
    check_spgemm_dims(a, b)?;
    let backend = Backend::detect();
    let mut acc = RowAccumulator::new(b.cols);
    let mut row_starts = Vec::with_capacity(a.rows + 1);
    let mut col_ids = Vec::new();
    let mut values = Vec::new();
    let mut flops = 0;
    row_starts.push(0);
    for i in 0..a.rows {
        flops += acc.row(backend, a, b, i, &mut col_ids, &mut values);
        row_starts.push(values.len());
    }
    let product = CsrMatrix {
        rows: a.rows,
        cols: b.cols,
        row_starts,
        col_ids,
        values,
    };
    Ok((product, flops))
}

pub fn multiply_spgemm<T: Element>(a: &CsrMatrix<T>, b: &CsrMatrix<T>) -> Result<CsrMatrix<T>> {
    multiply_spgemm_counted(a, b).map(|(p, _)| p)
}

/// Row lengths, column ids, values and flops of one chunk of output rows.
type RowChunk<T> = (Vec<usize>, Vec<u32>, Vec<T>, u64);

/// [`multiply_spgemm_counted`] with output rows split across `workers` threads.
pub fn multiply_spgemm_parallel<T: Element>(
    a: &CsrMatrix<T>,
    b: &CsrMatrix<T>,
    workers: usize,
) -> Result<(CsrMatrix<T>, u64)> {
    check_spgemm_dims(a, b)?;
    let backend = Backend::detect();
    const CHUNK: usize = 16;
    let parts: Vec<RowChunk<T>> = parallel::pool(workers)?.install(|| {
        (0..a.rows.div_ceil(CHUNK))
            .into_par_iter()
            .map_init(
                || RowAccumulator::new(b.cols),
                |acc, chunk| {
                    let mut lens = Vec::with_capacity(CHUNK);
                    let mut cols = Vec::new();
                    let mut vals = Vec::new();
                    let mut flops = 0;
                    for i in chunk * CHUNK..((chunk + 1) * CHUNK).min(a.rows) {
                        flops += acc.row(backend, a, b, i, &mut cols, &mut vals);
                        lens.push(vals.len());
                    }
                    (lens, cols, vals, flops)
                },
            )
            .collect()
    });

    let nnz = parts.iter().map(|p| p.2.len()).sum();
    let mut row_starts = Vec::with_capacity(a.rows + 1);
    let mut col_ids = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    let mut flops = 0;
    row_starts.push(0);
    for (lens, cols, vals, f) in parts {
        let base = values.len();
        row_starts.extend(lens.into_iter().map(|l| base + l));
        col_ids.extend(cols);
        values.extend(vals);
        flops += f;
    }
    Ok((
        CsrMatrix {
            rows: a.rows,
            cols: b.cols,
            row_starts,
            col_ids,
            values,
        },
        flops,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::ElemKind;
    use crate::engine::multiply_simple;
    use crate::matgen::{generate, SparsitySpec, Structure};

    fn cfg() -> LaneConfig {
        LaneConfig::default_for(ElemKind::F32)
    }

    #[test]
    fn identity_to_csr() {
        let id = DenseMatrix::<f32>::identity(4, cfg()).unwrap();
        let c = dense_to_csr(&id);
        assert_eq!(c.row_starts, vec![0, 1, 2, 3, 4]);
        assert_eq!(c.col_ids, vec![0, 1, 2, 3]);
        assert!(c.is_well_formed());
    }

    #[test]
    fn zero_to_csr() {
        let z = DenseMatrix::<f64>::zeros_default(5, 3).unwrap();
        let c = dense_to_csr(&z);
        assert_eq!(c.nnz(), 0);
        assert_eq!(c.row_starts, vec![0; 6]);
    }

    #[test]
    fn csr_round_trip() {
        let m: DenseMatrix<f32> = generate(
            512,
            512,
            &SparsitySpec::new(Structure::Random, 0.8, 4),
            cfg(),
        )
        .unwrap();
        let back = csr_to_dense(&dense_to_csr(&m), cfg()).unwrap();
        assert!(back.logical_eq(&m));
    }

    #[test]
    fn skip_a_counts_and_matches_simple() {
        let a: DenseMatrix<f32> =
            generate(50, 40, &SparsitySpec::new(Structure::Random, 0.6, 4), cfg()).unwrap();
        let b: DenseMatrix<f32> =
            generate(40, 30, &SparsitySpec::new(Structure::Random, 0.0, 5), cfg()).unwrap();
        let mut c1 = DenseMatrix::zeros(50, 30, cfg()).unwrap();
        let mut c2 = c1.clone();
        let w = multiply_skip_a(&mut c1, &a, &b).unwrap();
        multiply_simple(&mut c2, &a, &b).unwrap();
        assert_eq!(w.lane_fma_ops, a.count_nonzeros() as u64 * 30);
        assert_eq!(w.rows_skipped + a.count_nonzeros() as u64, 50 * 40);
        assert!(c1.logical_eq(&c2));

        let mut c3 = DenseMatrix::zeros(50, 30, cfg()).unwrap();
        let w3 = multiply_skip_a_parallel(&mut c3, &a, &b, 3).unwrap();
        assert_eq!(w, w3);
        assert!(c1.logical_eq(&c3));
    }

    #[test]
    fn spgemm_identity_zero_and_mismatch() {
        let x: DenseMatrix<f32> =
            generate(20, 20, &SparsitySpec::new(Structure::Random, 0.7, 8), cfg()).unwrap();
        let xs = dense_to_csr(&x);
        let id = dense_to_csr(&DenseMatrix::<f32>::identity(20, cfg()).unwrap());
        assert_eq!(multiply_spgemm(&id, &xs).unwrap(), xs);
        let z = dense_to_csr(&DenseMatrix::<f32>::zeros(20, 20, cfg()).unwrap());
        let p = multiply_spgemm(&z, &xs).unwrap();
        assert_eq!(p.nnz(), 0);
        assert!(p.is_well_formed());
        let wide = dense_to_csr(&DenseMatrix::<f32>::zeros(21, 20, cfg()).unwrap());
        assert!(matches!(
            multiply_spgemm(&xs, &wide),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn spgemm_flops_equal_gustavson_bound() {
        let a: DenseMatrix<f32> =
            generate(64, 48, &SparsitySpec::new(Structure::Random, 0.6, 1), cfg()).unwrap();
        let b: DenseMatrix<f32> =
            generate(48, 80, &SparsitySpec::new(Structure::Random, 0.6, 2), cfg()).unwrap();
        let (acsr, bcsr) = (dense_to_csr(&a), dense_to_csr(&b));
        let (p, flops) = multiply_spgemm_counted(&acsr, &bcsr).unwrap();
        let bound: u64 = acsr
            .col_ids
            .iter()
            .map(|&k| (bcsr.row_starts[k as usize + 1] - bcsr.row_starts[k as usize]) as u64)
            .sum();
        assert_eq!(flops, bound);
        let (pp, fp) = multiply_spgemm_parallel(&acsr, &bcsr, 3).unwrap();
        assert_eq!((p.clone(), flops), (pp, fp));
        assert!(p.is_well_formed());
    }
}
