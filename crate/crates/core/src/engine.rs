//! Dense reference multiplies and the masked multiply.
//!
//! The masked multiply walks the recursion leaves of the block grid. Inside a
//! leaf it visits only the non-zeros of each A row; for every non-zero
//! `A[i, k]` it reads the codes of B row `k` in sequence and hands each region
//! to the kernel selected by its code.

use std::ops::Range;

use crate::element::Element;
use crate::error::{Error, Result};
use crate::kernel::{IndexedKernels, KernelFn, KernelTable, Realization};
use crate::matrix::{ContentTag, DenseMatrix, LaneConfig};
use crate::parallel::{self, drive, SharedOut, Span, Tile};
use crate::plan::{self, ABlockIndex, BPlanSet, DEFAULT_LEAF_DIM};
use crate::simd::Backend;

pub use crate::counters::WorkCounters;

pub(crate) fn check_product_dims<T: Element>(
    c: &DenseMatrix<T>,
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
) -> Result<()> {
    if a.cols() != b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{} but B is {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    if c.rows() != a.rows() || c.cols() != b.cols() {
        return Err(Error::DimensionMismatch(format!(
            "C is {}x{}, product is {}x{}",
            c.rows(),
            c.cols(),
            a.rows(),
            b.cols()
        )));
    }
    Ok(())
}

/// `c += a * b`, i-k-j loop order.
pub fn multiply_simple<T: Element>(
    c: &mut DenseMatrix<T>,
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
) -> Result<()> {
    check_product_dims(c, a, b)?;
    let backend = Backend::detect();
    for i in 0..a.rows() {
        let c_row = c.row_mut(i);
        for (k, &av) in a.row(i).iter().enumerate() {
            T::axpy(backend, c_row, av, b.row(k));
        }
    }
    Ok(())
}

/// [`multiply_simple`] with output rows split across `workers` threads.
pub fn multiply_simple_parallel<T: Element>(
    c: &mut DenseMatrix<T>,
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    workers: usize,
) -> Result<()> {
    use rayon::prelude::*;
    check_product_dims(c, a, b)?;
    let backend = Backend::detect();
    let (stride, cols) = (c.padded_cols(), c.cols());
    parallel::pool(workers)?.install(|| {
        c.storage_mut()
            .par_chunks_mut(stride)
            .enumerate()
            .for_each(|(i, row)| {
                let c_row = &mut row[..cols];
                for (k, &av) in a.row(i).iter().enumerate() {
                    T::axpy(backend, c_row, av, b.row(k));
                }
            })
    });
    Ok(())
}

/// Plain i-k-j leaf: every product term is computed.
pub fn dense_leaf<T: Element>(
    tile: &mut Tile<'_, T>,
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
) -> WorkCounters {
    let backend = Backend::detect();
    let cols = tile.cols.clone();
    let inner = tile.inner.clone();
    for i in tile.rows.clone() {
        let a_row = &a.row(i)[inner.clone()];
        let c_row = tile.c_row(i);
        for (k, &av) in inner.clone().zip(a_row) {
            T::axpy(backend, c_row, av, &b.row(k)[cols.clone()]);
        }
    }
    WorkCounters {
        lane_fma_ops: (tile.rows.len() * inner.len() * cols.len()) as u64,
        ..WorkCounters::default()
    }
}

fn recursive_impl<T, F>(
    c: &mut DenseMatrix<T>,
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    leaf_dim: usize,
    base_fn: F,
    parallel: bool,
) -> Result<WorkCounters>
where
    T: Element,
    F: Fn(&mut Tile<'_, T>, &DenseMatrix<T>, &DenseMatrix<T>) -> WorkCounters + Sync,
{
    check_product_dims(c, a, b)?;
    if leaf_dim == 0 {
        return Err(Error::InvalidLeafDim {
            leaf_dim,
            region: 1,
        });
    }
    let (m, n, p) = (a.rows(), a.cols(), b.cols());
    let stride = c.padded_cols();
    let out = SharedOut::new(c.storage_mut(), stride);
    let block = |idx: usize, len: usize| -> Range<usize> {
        idx * leaf_dim..((idx + 1) * leaf_dim).min(len)
    };
    let leaf = |ib: usize, kb: usize, jb: usize| {
        let mut tile = Tile::new(out, block(ib, m), block(kb, n), block(jb, p));
        base_fn(&mut tile, a, b)
    };
    Ok(drive(
        Span::new(0, m.div_ceil(leaf_dim)),
        Span::new(0, n.div_ceil(leaf_dim)),
        Span::new(0, p.div_ceil(leaf_dim)),
        parallel,
        &leaf,
    ))
}

/// Cache-oblivious `c += a * b`: quadrant recursion down to `leaf_dim`-sized
/// blocks, each handled by `base_fn`.
pub fn multiply_recursive<T, F>(
    c: &mut DenseMatrix<T>,
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    leaf_dim: usize,
    base_fn: F,
) -> Result<WorkCounters>
where
    T: Element,
    F: Fn(&mut Tile<'_, T>, &DenseMatrix<T>, &DenseMatrix<T>) -> WorkCounters + Sync,
{
    recursive_impl(c, a, b, leaf_dim, base_fn, false)
}

/// [`multiply_recursive`] with the quadrant tasks of each phase spread over
/// `workers` threads.
pub fn multiply_recursive_parallel<T, F>(
    c: &mut DenseMatrix<T>,
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    leaf_dim: usize,
    base_fn: F,
    workers: usize,
) -> Result<WorkCounters>
where
    T: Element,
    F: Fn(&mut Tile<'_, T>, &DenseMatrix<T>, &DenseMatrix<T>) -> WorkCounters + Sync,
{
    let base_fn = &base_fn;
    parallel::pool(workers)?.install(|| recursive_impl(c, a, b, leaf_dim, base_fn, true))
}

/// How the masked multiply finds the non-zeros of A.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ATraversal {
    /// Loop over the blocked sparse-row index.
    #[default]
    Indexed,
    /// Test every element and skip zeros.
    Branch,
}

/// Preprocessed state for multiplying one specific pair (A, B).
#[derive(Clone, Debug)]
pub struct MmmContext<T: Element> {
    pub kernel_table: KernelTable<T>,
    pub b_plans: BPlanSet,
    pub a_index: ABlockIndex,
    pub lane_config: LaneConfig,
    pub leaf_dim: usize,
    pub traversal: ATraversal,
    a_tag: ContentTag,
    b_tag: ContentTag,
}

impl<T: Element> MmmContext<T> {
    /// Preprocesses `a` and `b` with the lane configuration of `b` and the
    /// default leaf size.
    pub fn new(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<Self> {
        let table = KernelTable::build(b.lane_config())?;
        Self::with_table(a, b, table, DEFAULT_LEAF_DIM.max(b.lane_config().region()))
    }

    pub fn with_table(
        a: &DenseMatrix<T>,
        b: &DenseMatrix<T>,
        kernel_table: KernelTable<T>,
        leaf_dim: usize,
    ) -> Result<Self> {
        if a.cols() != b.rows() {
            return Err(Error::DimensionMismatch(format!(
                "A has {} columns, B has {} rows",
                a.cols(),
                b.rows()
            )));
        }
        let lanes = kernel_table.lane_config();
        let b_plans = plan::preprocess_b(b, lanes, leaf_dim)?;
        let a_index = plan::preprocess_a(a, leaf_dim)?;
        Ok(MmmContext {
            kernel_table,
            b_plans,
            a_index,
            lane_config: lanes,
            leaf_dim,
            traversal: ATraversal::Indexed,
            a_tag: a.content_tag(),
            b_tag: b.content_tag(),
        })
    }

    pub fn with_traversal(mut self, traversal: ATraversal) -> Self {
        self.traversal = traversal;
        self
    }

    /// Whether this context was built from exactly these operand contents.
    pub fn matches(&self, a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> bool {
        self.a_tag == a.content_tag() && self.b_tag == b.content_tag()
    }

    fn check(&self, c: &DenseMatrix<T>, a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<()> {
        if !self.matches(a, b) {
            return Err(Error::StaleContext);
        }
        check_product_dims(c, a, b)?;
        if c.padded_cols() != b.padded_cols() {
            return Err(Error::RegionMismatch {
                padded_cols: c.padded_cols(),
                region: b.padded_cols(),
            });
        }
        Ok(())
    }
}

/// Calls one kernel of a table. Implemented for both table realizations so
/// the leaf loop is monomorphised once per realization.
trait Dispatch<T>: Sync {
    /// # Safety
    /// `c` and `b` must be valid for one region and `code < 2^P`.
    unsafe fn call(&self, code: u16, c: *mut T, a: T, b: *const T);
}

struct Compiled<'a, T: 'static>(&'a [KernelFn<T>]);

impl<T: Element> Dispatch<T> for Compiled<'_, T> {
    #[inline(always)]
    unsafe fn call(&self, code: u16, c: *mut T, a: T, b: *const T) {
        (self.0.get_unchecked(code as usize))(c, a, b)
    }
}

impl<T: Element> Dispatch<T> for &IndexedKernels {
    #[inline(always)]
    unsafe fn call(&self, code: u16, c: *mut T, a: T, b: *const T) {
        self.run(code, c, a, b)
    }
}

struct LeafEnv<'a, T: Element, D> {
    ctx: &'a MmmContext<T>,
    dispatch: D,
    out: SharedOut<T>,
    a: &'a DenseMatrix<T>,
    b: &'a DenseMatrix<T>,
}

impl<T: Element, D: Dispatch<T>> LeafEnv<'_, T, D> {
    fn leaf(&self, ib: usize, kb: usize, jb: usize) -> WorkCounters {
        let ctx = self.ctx;
        let plan = ctx.b_plans.plan(kb, jb);
        let region = ctx.lane_config.region();
        let group_len = ctx.lane_config.group_len() as u64;
        let rpr = plan.regions_per_row;
        let leaf = ctx.leaf_dim;
        let rows = ib * leaf..((ib + 1) * leaf).min(self.a.rows());
        let k0 = plan.row0;
        let k1 = k0 + plan.rows;
        let b_base = self.b.as_slice().as_ptr();
        let b_stride = self.b.padded_cols();
        let mut counts = WorkCounters::default();
        let mut nonzeros = vec![0u32; leaf + plan::SEGMENT];

        for i in rows {
            let a_row = self.a.row(i);
            debug_assert!(i * self.out.stride + plan.col0 + rpr * region <= self.out.len);
            // SAFETY: the leaf's C tile lies inside the output; no other
            // running task touches this tile.
            let c_row = unsafe { self.out.ptr.add(i * self.out.stride + plan.col0) };
            let mut visited = 0u64;
            let mut visit = |k: usize| {
                let av = a_row[k];
                let local = k - k0;
                let codes = plan.row_codes(local);
                // SAFETY: row k of B has `padded_cols` elements and the plan
                // covers columns col0..col0 + rpr * region of it.
                let b_row = unsafe { b_base.add(k * b_stride + plan.col0) };
                for (r, code) in codes.iter().enumerate() {
                    // SAFETY: region r of both rows is in bounds, codes < 2^P.
                    unsafe {
                        self.dispatch
                            .call(code.0, c_row.add(r * region), av, b_row.add(r * region))
                    };
                }
                let active = plan.row_active[local] as u64;
                counts.kernel_invocations += active;
                counts.lane_fma_ops += plan.row_popcount[local] as u64 * group_len;
                counts.regions_skipped_by_zero_code += rpr as u64 - active;
                visited += 1;
            };
            match ctx.traversal {
                ATraversal::Indexed => {
                    let n = ctx.a_index.decode_row(i, kb, &mut nonzeros);
                    for &k in &nonzeros[..n] {
                        visit(k as usize);
                    }
                }
                ATraversal::Branch => {
                    for (k, &v) in a_row.iter().enumerate().take(k1).skip(k0) {
                        if v == T::ZERO {
                            continue;
                        }
                        visit(k);
                    }
                }
            }
            // Each element of A is accounted for once, on the first column block.
            if jb == 0 {
                counts.rows_skipped += (k1 - k0) as u64 - visited;
            }
        }
        counts
    }
}

fn run_mmm<T: Element>(
    ctx: &MmmContext<T>,
    c: &mut DenseMatrix<T>,
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    parallel: bool,
) -> Result<WorkCounters> {
    ctx.check(c, a, b)?;
    let stride = c.padded_cols();
    let out = SharedOut::new(c.storage_mut(), stride);
    let spans = (
        Span::new(0, a.rows().div_ceil(ctx.leaf_dim)),
        Span::new(0, ctx.b_plans.k_blocks),
        Span::new(0, ctx.b_plans.j_blocks),
    );
    fn go<T: Element, D: Dispatch<T>>(
        env: LeafEnv<'_, T, D>,
        spans: (Span, Span, Span),
        parallel: bool,
    ) -> WorkCounters {
        drive(spans.0, spans.1, spans.2, parallel, &|i, k, j| {
            env.leaf(i, k, j)
        })
    }
    Ok(match ctx.kernel_table.realization() {
        Realization::Compiled(fns) => go(
            LeafEnv {
                ctx,
                dispatch: Compiled(fns),
                out,
                a,
                b,
            },
            spans,
            parallel,
        ),
        Realization::Indexed(ix) => go(
            LeafEnv {
                ctx,
                dispatch: ix,
                out,
                a,
                b,
            },
            spans,
            parallel,
        ),
    })
}

/// Masked `c += a * b` on the calling thread.
pub fn multiply_mmm<T: Element>(
    ctx: &MmmContext<T>,
    c: &mut DenseMatrix<T>,
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
) -> Result<WorkCounters> {
    run_mmm(ctx, c, a, b, false)
}

/// Masked `c += a * b` on `workers` threads. Output and counters are
/// identical to [`multiply_mmm`].
pub fn multiply_parallel<T: Element>(
    ctx: &MmmContext<T>,
    c: &mut DenseMatrix<T>,
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    workers: usize,
) -> Result<WorkCounters> {
    let pool = parallel::pool(workers)?;
    pool.install(|| run_mmm(ctx, c, a, b, workers > 1))
}
