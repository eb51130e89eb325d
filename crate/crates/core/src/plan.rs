//! Preprocessing of the operands into the structures the multiply consumes.
//!
//! B is cut into `leaf_dim x leaf_dim` sub-blocks (the recursion leaves) and
//! each sub-block is scanned once, region by region, into a flat sequence of
//! pattern codes in the order the multiply reads them. A is cut into
//! `block_dim x block_dim` blocks whose rows are described by 8-wide segments
//! holding a non-zero count and the offsets of those non-zeros.

use rayon::prelude::*;

use crate::element::Element;
use crate::error::{Error, Result};
use crate::kernel::PatternCode;
use crate::matrix::{DenseMatrix, LaneConfig};

/// Default recursion leaf and A-block side.
pub const DEFAULT_LEAF_DIM: usize = 256;

/// Width of one A-index segment.
pub const SEGMENT: usize = 8;

/// Position of a leaf sub-block in the block grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SubmatrixId {
    pub k_block: usize,
    pub j_block: usize,
}

/// Pattern codes of one B sub-block, row-major, regions left to right.
#[derive(Clone, Debug)]
pub struct BPlan {
    pub id: SubmatrixId,
    /// First B row and first column covered.
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub regions_per_row: usize,
    pub codes: Vec<PatternCode>,
    /// Non-zero codes in each row.
    pub row_active: Vec<u32>,
    /// Sum of popcounts in each row.
    pub row_popcount: Vec<u32>,
}

impl BPlan {
    #[inline]
    pub fn row_codes(&self, local_row: usize) -> &[PatternCode] {
        let start = local_row * self.regions_per_row;
        &self.codes[start..start + self.regions_per_row]
    }
}

/// All leaf plans of one B matrix.
#[derive(Clone, Debug)]
pub struct BPlanSet {
    pub lanes: LaneConfig,
    pub leaf_dim: usize,
    pub rows: usize,
    pub padded_cols: usize,
    pub k_blocks: usize,
    pub j_blocks: usize,
    /// Indexed `k_block * j_blocks + j_block`.
    pub plans: Vec<BPlan>,
}

impl BPlanSet {
    #[inline]
    pub fn plan(&self, k_block: usize, j_block: usize) -> &BPlan {
        &self.plans[k_block * self.j_blocks + j_block]
    }
}

pub(crate) fn check_leaf_dim(leaf_dim: usize, lanes: &LaneConfig) -> Result<()> {
    let region = lanes.region();
    if leaf_dim == 0 || !leaf_dim.is_multiple_of(region) {
        return Err(Error::InvalidLeafDim { leaf_dim, region });
    }
    Ok(())
}

pub(crate) fn check_region<T: Element>(m: &DenseMatrix<T>, lanes: &LaneConfig) -> Result<()> {
    if !m.padded_cols().is_multiple_of(lanes.region()) {
        return Err(Error::RegionMismatch {
            padded_cols: m.padded_cols(),
            region: lanes.region(),
        });
    }
    Ok(())
}

fn scan_subblock<T: Element>(
    b: &DenseMatrix<T>,
    lanes: &LaneConfig,
    id: SubmatrixId,
    leaf_dim: usize,
) -> BPlan {
    let region = lanes.region();
    let row0 = id.k_block * leaf_dim;
    let col0 = id.j_block * leaf_dim;
    let rows = leaf_dim.min(b.rows() - row0);
    let width = leaf_dim.min(b.padded_cols() - col0);
    let regions_per_row = width / region;

    let mut codes = Vec::with_capacity(rows * regions_per_row);
    let mut row_active = Vec::with_capacity(rows);
    let mut row_popcount = Vec::with_capacity(rows);
    for k in row0..row0 + rows {
        let span = &b.padded_row(k)[col0..col0 + width];
        let mut active = 0;
        let mut pop = 0;
        for r in span.chunks_exact(region) {
            let code = PatternCode::of_region(r, lanes);
            active += (code.0 != 0) as u32;
            pop += code.popcount();
            codes.push(code);
        }
        row_active.push(active);
        row_popcount.push(pop);
    }
    BPlan {
        id,
        row0,
        col0,
        rows,
        regions_per_row,
        codes,
        row_active,
        row_popcount,
    }
}

/// Scans B into one plan per `leaf_dim` sub-block. Sub-blocks are scanned in
/// parallel on the current rayon pool.
pub fn preprocess_b<T: Element>(
    b: &DenseMatrix<T>,
    lanes: LaneConfig,
    leaf_dim: usize,
) -> Result<BPlanSet> {
    lanes.check_kind(T::KIND)?;
    check_leaf_dim(leaf_dim, &lanes)?;
    check_region(b, &lanes)?;
    let k_blocks = b.rows().div_ceil(leaf_dim);
    let j_blocks = b.padded_cols().div_ceil(leaf_dim);
    let plans = (0..k_blocks * j_blocks)
        .into_par_iter()
        .map(|t| {
            let id = SubmatrixId {
                k_block: t / j_blocks,
                j_block: t % j_blocks,
            };
            scan_subblock(b, &lanes, id, leaf_dim)
        })
        .collect();
    Ok(BPlanSet {
        lanes,
        leaf_dim,
        rows: b.rows(),
        padded_cols: b.padded_cols(),
        k_blocks,
        j_blocks,
        plans,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanStats {
    pub region_count: u64,
    pub zero_region_fraction: f64,
    pub mean_popcount: f64,
}

pub fn plan_stats(plans: &BPlanSet) -> PlanStats {
    let mut regions = 0u64;
    let mut zero = 0u64;
    let mut pop = 0u64;
    for p in &plans.plans {
        regions += p.codes.len() as u64;
        zero += p.codes.len() as u64 - p.row_active.iter().map(|&a| a as u64).sum::<u64>();
        pop += p.row_popcount.iter().map(|&c| c as u64).sum::<u64>();
    }
    PlanStats {
        region_count: regions,
        zero_region_fraction: if regions == 0 {
            0.0
        } else {
            zero as f64 / regions as f64
        },
        mean_popcount: if regions == 0 {
            0.0
        } else {
            pop as f64 / regions as f64
        },
    }
}

/// Offsets of the set bits of every 8-bit mask (bit `o` = position `o`),
/// zero-filled; the full mask maps to all zeros since full segments keep no
/// offsets.
static SEGMENT_OFFSETS: [[u8; SEGMENT]; 256] = {
    let mut table = [[0u8; SEGMENT]; 256];
    let mut mask = 0;
    while mask < 255 {
        let mut n = 0;
        let mut o = 0;
        while o < SEGMENT {
            if mask & (1 << o) != 0 {
                table[mask][n] = o as u8;
                n += 1;
            }
            o += 1;
        }
        mask += 1;
    }
    table
};

/// Blocked sparse-row index of A.
///
/// Counts and offsets are parallel arrays with one record per segment;
/// records are grouped block by block `(i_block, k_block)` and row-major
/// inside a block. A full segment keeps no offsets: its positions are
/// implicitly `0..SEGMENT`.
#[derive(Clone, Debug)]
pub struct ABlockIndex {
    pub block_dim: usize,
    pub rows: usize,
    pub cols: usize,
    pub i_blocks: usize,
    pub k_blocks: usize,
    counts: Vec<u8>,
    offsets: Vec<[u8; SEGMENT]>,
    /// First record of each block.
    block_start: Vec<usize>,
    /// Non-zeros of each (row, k_block) pair, indexed `i * k_blocks + kb`.
    row_block_nnz: Vec<u32>,
}

impl ABlockIndex {
    /// Segments in each row of block column `kb`.
    #[inline]
    pub fn segments_in_block(&self, kb: usize) -> usize {
        let width = self.block_dim.min(self.cols - kb * self.block_dim);
        width.div_ceil(SEGMENT)
    }

    #[inline]
    fn records(&self, i: usize, kb: usize) -> std::ops::Range<usize> {
        let ib = i / self.block_dim;
        let segs = self.segments_in_block(kb);
        let start = self.block_start[ib * self.k_blocks + kb] + (i - ib * self.block_dim) * segs;
        start..start + segs
    }

    /// Non-zeros of row `i` inside block column `kb`.
    #[inline]
    pub fn row_nnz(&self, i: usize, kb: usize) -> u32 {
        self.row_block_nnz[i * self.k_blocks + kb]
    }

    /// `(count, offsets)` of every segment of row `i` in block column `kb`.
    pub fn segments(&self, i: usize, kb: usize) -> impl Iterator<Item = (u8, &[u8])> + '_ {
        self.records(i, kb).map(move |r| {
            let count = self.counts[r];
            let offs: &[u8] = if count as usize == SEGMENT {
                &[]
            } else {
                &self.offsets[r][..count as usize]
            };
            (count, offs)
        })
    }

    /// Calls `f(k)` for every non-zero column `k` of row `i` inside block
    /// column `kb`, in increasing order.
    #[inline]
    pub fn for_each_nonzero(&self, i: usize, kb: usize, mut f: impl FnMut(usize)) {
        let mut k = kb * self.block_dim;
        for r in self.records(i, kb) {
            let count = self.counts[r] as usize;
            if count == SEGMENT {
                for o in 0..SEGMENT {
                    f(k + o);
                }
            } else {
                for &o in &self.offsets[r][..count] {
                    f(k + o as usize);
                }
            }
            k += SEGMENT;
        }
    }

    /// Writes the non-zero columns of row `i` inside block column `kb` to the
    /// front of `out` and returns how many there are. Every segment stores
    /// all `SEGMENT` candidate slots and then advances by its count, so the
    /// decode has no data-dependent branches. `out` needs room for
    /// `block_dim + SEGMENT` entries.
    #[inline]
    pub fn decode_row(&self, i: usize, kb: usize, out: &mut [u32]) -> usize {
        const IDENTITY: [u8; SEGMENT] = [0, 1, 2, 3, 4, 5, 6, 7];
        let records = self.records(i, kb);
        assert!(out.len() >= records.len() * SEGMENT + SEGMENT);
        let mut k = (kb * self.block_dim) as u32;
        let mut n = 0;
        for r in records {
            let count = self.counts[r] as usize;
            let offs = if count == SEGMENT {
                &IDENTITY
            } else {
                &self.offsets[r]
            };
            let slot = &mut out[n..n + SEGMENT];
            for (dst, &o) in slot.iter_mut().zip(offs) {
                *dst = k + o as u32;
            }
            n += count;
            k += SEGMENT as u32;
        }
        n
    }

    pub fn nnz(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }
}

/// Builds the blocked sparse-row index of `a` on `block_dim`-square blocks.
pub fn preprocess_a<T: Element>(a: &DenseMatrix<T>, block_dim: usize) -> Result<ABlockIndex> {
    if block_dim == 0 || !block_dim.is_multiple_of(SEGMENT) {
        return Err(Error::InvalidLeafDim {
            leaf_dim: block_dim,
            region: SEGMENT,
        });
    }
    let rows = a.rows();
    let cols = a.cols();
    let i_blocks = rows.div_ceil(block_dim);
    let k_blocks = cols.div_ceil(block_dim);

    let mut block_start = Vec::with_capacity(i_blocks * k_blocks + 1);
    let mut total = 0;
    for ib in 0..i_blocks {
        let block_rows = block_dim.min(rows - ib * block_dim);
        for kb in 0..k_blocks {
            block_start.push(total);
            let width = block_dim.min(cols - kb * block_dim);
            total += block_rows * width.div_ceil(SEGMENT);
        }
    }
    block_start.push(total);

    let mut counts = vec![0u8; total];
    let mut offsets = vec![[0u8; SEGMENT]; total];
    let mut row_block_nnz = vec![0u32; rows * k_blocks];

    // Each i-block owns a contiguous run of records and of row_block_nnz.
    let mut count_parts = Vec::with_capacity(i_blocks);
    let mut offset_parts = Vec::with_capacity(i_blocks);
    let mut nnz_parts = Vec::with_capacity(i_blocks);
    {
        let (mut cs, mut os, mut ns) = (&mut counts[..], &mut offsets[..], &mut row_block_nnz[..]);
        for ib in 0..i_blocks {
            let len = block_start[(ib + 1) * k_blocks] - block_start[ib * k_blocks];
            let block_rows = block_dim.min(rows - ib * block_dim);
            let (c0, c1) = cs.split_at_mut(len);
            let (o0, o1) = os.split_at_mut(len);
            let (n0, n1) = ns.split_at_mut(block_rows * k_blocks);
            count_parts.push(c0);
            offset_parts.push(o0);
            nnz_parts.push(n0);
            cs = c1;
            os = o1;
            ns = n1;
        }
    }

    count_parts
        .into_par_iter()
        .zip(offset_parts)
        .zip(nnz_parts)
        .enumerate()
        .for_each(|(ib, ((cnt, off), nnz))| {
            let r0 = ib * block_dim;
            let block_rows = block_dim.min(rows - r0);
            let mut rec = 0;
            for kb in 0..k_blocks {
                let k0 = kb * block_dim;
                let width = block_dim.min(cols - k0);
                for li in 0..block_rows {
                    let row = &a.row(r0 + li)[k0..k0 + width];
                    let mut row_total = 0;
                    for seg in row.chunks(SEGMENT) {
                        let mut mask = 0usize;
                        for (o, &v) in seg.iter().enumerate() {
                            mask |= ((v != T::ZERO) as usize) << o;
                        }
                        let n = mask.count_ones() as usize;
                        off[rec] = SEGMENT_OFFSETS[mask];
                        cnt[rec] = n as u8;
                        row_total += n as u32;
                        rec += 1;
                    }
                    nnz[li * k_blocks + kb] = row_total;
                }
            }
        });

    Ok(ABlockIndex {
        block_dim,
        rows,
        cols,
        i_blocks,
        k_blocks,
        counts,
        offsets,
        block_start,
        row_block_nnz,
    })
}
