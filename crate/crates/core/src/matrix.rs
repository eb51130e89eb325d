//! Row-major dense matrices whose rows are zero-padded to a whole number of
//! kernel regions.

use std::alloc::{self, Layout};
use std::fmt;
use std::ops::{Deref, DerefMut};
use std::ptr::NonNull;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::element::{ElemKind, Element};
use crate::error::{Error, Result};

/// Byte alignment of every matrix allocation. Covers 512-bit vectors.
pub const ALIGNMENT: usize = 64;

/// Vector geometry shared by matrices, kernels and plans.
///
/// A region is `lanes * pattern_bits * group_vectors` consecutive elements of
/// a row and is the unit handled by one kernel call. Each bit of a pattern
/// code covers one group of `group_vectors` vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LaneConfig {
    /// Lanes per hardware vector (W).
    pub lanes: usize,
    /// Bits per pattern code (P).
    pub pattern_bits: usize,
    /// Vectors covered by one pattern bit (V).
    pub group_vectors: usize,
}

impl LaneConfig {
    pub const MAX_PATTERN_BITS: usize = 16;

    pub fn new(lanes: usize, pattern_bits: usize, group_vectors: usize) -> Result<Self> {
        let cfg = LaneConfig {
            lanes,
            pattern_bits,
            group_vectors,
        };
        cfg.check()?;
        Ok(cfg)
    }

    /// W = 8 for f32, 4 for f64; P = 8; V = 1.
    pub fn default_for(kind: ElemKind) -> Self {
        LaneConfig {
            lanes: kind.default_lanes(),
            pattern_bits: 8,
            group_vectors: 1,
        }
    }

    pub fn with_group_vectors(self, group_vectors: usize) -> Result<Self> {
        LaneConfig::new(self.lanes, self.pattern_bits, group_vectors)
    }

    pub fn check(&self) -> Result<()> {
        if self.lanes == 0 || self.group_vectors == 0 {
            return Err(Error::InvalidLaneConfig(format!(
                "lanes ({}) and vectors per bit ({}) must be positive",
                self.lanes, self.group_vectors
            )));
        }
        if self.pattern_bits == 0 || self.pattern_bits > Self::MAX_PATTERN_BITS {
            return Err(Error::InvalidLaneConfig(format!(
                "pattern size {} outside 1..={}",
                self.pattern_bits,
                Self::MAX_PATTERN_BITS
            )));
        }
        self.region_width()
            .ok_or_else(|| Error::InvalidLaneConfig("region width overflows".into()))?;
        Ok(())
    }

    /// Validates that `lanes` elements of `kind` form a 128, 256 or 512-bit vector.
    pub fn check_kind(&self, kind: ElemKind) -> Result<()> {
        self.check()?;
        match self.lanes * kind.size() {
            16 | 32 | 64 => Ok(()),
            _ => Err(Error::UnsupportedLanes {
                lanes: self.lanes,
                kind,
            }),
        }
    }

    /// Elements covered by one pattern bit (W·V).
    pub fn group_len(&self) -> usize {
        self.lanes * self.group_vectors
    }

    /// Elements per region (R = W·P·V).
    pub fn region(&self) -> usize {
        self.lanes * self.pattern_bits * self.group_vectors
    }

    fn region_width(&self) -> Option<usize> {
        self.lanes
            .checked_mul(self.pattern_bits)?
            .checked_mul(self.group_vectors)
    }

    /// Number of distinct pattern codes, 2^P.
    pub fn pattern_count(&self) -> usize {
        1 << self.pattern_bits
    }

    /// Smallest multiple of the region width that holds `cols` columns.
    pub fn padded_cols(&self, cols: usize) -> usize {
        cols.div_ceil(self.region()) * self.region()
    }
}

/// Heap buffer aligned to [`ALIGNMENT`] bytes and zero-initialised.
pub(crate) struct AlignedBuf<T> {
    ptr: NonNull<T>,
    len: usize,
}

// SAFETY: AlignedBuf owns its allocation exclusively, like Vec<T>.
unsafe impl<T: Send> Send for AlignedBuf<T> {}
unsafe impl<T: Sync> Sync for AlignedBuf<T> {}

impl<T: Element> AlignedBuf<T> {
    fn layout(len: usize) -> Option<Layout> {
        let bytes = len.checked_mul(std::mem::size_of::<T>())?;
        if bytes > isize::MAX as usize {
            return None;
        }
        Layout::from_size_align(bytes, ALIGNMENT).ok()
    }

    /// `len` zero elements. All-zero bits is 0.0 for both element types.
    fn zeroed(len: usize) -> Option<Self> {
        assert!(len > 0);
        let layout = Self::layout(len)?;
        // SAFETY: layout has non-zero size.
        let raw = unsafe { alloc::alloc_zeroed(layout) } as *mut T;
        let ptr = NonNull::new(raw).unwrap_or_else(|| alloc::handle_alloc_error(layout));
        Some(AlignedBuf { ptr, len })
    }
}

impl<T> Deref for AlignedBuf<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        // SAFETY: ptr is valid for len initialised elements.
        unsafe { std::slice::from_raw_parts(self.ptr.as_ptr(), self.len) }
    }
}

impl<T> DerefMut for AlignedBuf<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        // SAFETY: as above, and we hold the unique reference.
        unsafe { std::slice::from_raw_parts_mut(self.ptr.as_ptr(), self.len) }
    }
}

impl<T> Drop for AlignedBuf<T> {
    fn drop(&mut self) {
        let bytes = self.len * std::mem::size_of::<T>();
        let layout =
            Layout::from_size_align(bytes, ALIGNMENT).expect("layout checked at allocation");
        // SAFETY: allocated in `zeroed` with this exact layout.
        unsafe { alloc::dealloc(self.ptr.as_ptr() as *mut u8, layout) }
    }
}

impl<T: Element> Clone for AlignedBuf<T> {
    fn clone(&self) -> Self {
        let mut out = AlignedBuf::zeroed(self.len).expect("layout already valid");
        out.copy_from_slice(self);
        out
    }
}

/// Identity of a matrix's contents. The version changes on every mutable
/// access, so a stale preprocessing product can be detected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ContentTag {
    pub id: u64,
    pub version: u64,
}

static NEXT_MATRIX_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_MATRIX_ID.fetch_add(1, Ordering::Relaxed)
}

/// Dense row-major matrix. Element (i, j) lives at `i * padded_cols + j`;
/// columns `cols..padded_cols` are always zero.
pub struct DenseMatrix<T: Element> {
    rows: usize,
    cols: usize,
    padded_cols: usize,
    lanes: LaneConfig,
    data: AlignedBuf<T>,
    tag: ContentTag,
}

impl<T: Element> DenseMatrix<T> {
    /// Zero matrix padded for `lanes`.
    pub fn zeros(rows: usize, cols: usize, lanes: LaneConfig) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::ZeroDimension { rows, cols });
        }
        lanes.check_kind(T::KIND)?;
        let padded_cols = cols
            .checked_next_multiple_of(lanes.region())
            .ok_or(Error::DimensionOverflow { rows, cols })?;
        let data = rows
            .checked_mul(padded_cols)
            .and_then(AlignedBuf::zeroed)
            .ok_or(Error::DimensionOverflow { rows, cols })?;
        Ok(DenseMatrix {
            rows,
            cols,
            padded_cols,
            lanes,
            data,
            tag: ContentTag {
                id: fresh_id(),
                version: 0,
            },
        })
    }

    /// Zero matrix with the default lane configuration for `T`.
    pub fn zeros_default(rows: usize, cols: usize) -> Result<Self> {
        Self::zeros(rows, cols, LaneConfig::default_for(T::KIND))
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        lanes: LaneConfig,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Result<Self> {
        let mut m = Self::zeros(rows, cols, lanes)?;
        for i in 0..rows {
            let row = m.row_mut(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(i, j);
            }
        }
        Ok(m)
    }

    /// Matrix from row-major logical data (`rows * cols` values).
    pub fn from_row_major(
        rows: usize,
        cols: usize,
        lanes: LaneConfig,
        values: &[T],
    ) -> Result<Self> {
        if values.len() != rows.saturating_mul(cols) {
            return Err(Error::DimensionMismatch(format!(
                "{} values supplied for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        Self::from_fn(rows, cols, lanes, |i, j| values[i * cols + j])
    }

    pub fn identity(n: usize, lanes: LaneConfig) -> Result<Self> {
        Self::from_fn(n, n, lanes, |i, j| if i == j { T::ONE } else { T::ZERO })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn padded_cols(&self) -> usize {
        self.padded_cols
    }

    pub fn lane_config(&self) -> LaneConfig {
        self.lanes
    }

    pub fn elem_kind(&self) -> ElemKind {
        T::KIND
    }

    pub fn content_tag(&self) -> ContentTag {
        self.tag
    }

    /// Linear storage index of (i, j).
    #[inline]
    pub fn index_of(&self, i: usize, j: usize) -> usize {
        i * self.padded_cols + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        assert!(i < self.rows && j < self.cols, "({i}, {j}) out of bounds");
        self.data[self.index_of(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        assert!(i < self.rows && j < self.cols, "({i}, {j}) out of bounds");
        let idx = self.index_of(i, j);
        self.touch();
        self.data[idx] = value;
    }

    /// Logical part of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        let start = i * self.padded_cols;
        &self.data[start..start + self.cols]
    }

    /// Logical part of row `i`, mutably. Padding is not exposed.
    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        self.touch();
        let start = i * self.padded_cols;
        &mut self.data[start..start + self.cols]
    }

    /// Row `i` including its zero padding.
    #[inline]
    pub fn padded_row(&self, i: usize) -> &[T] {
        let start = i * self.padded_cols;
        &self.data[start..start + self.padded_cols]
    }

    /// Whole backing store, padding included.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Mutable backing store for routines that preserve the zero padding.
    pub(crate) fn storage_mut(&mut self) -> &mut [T] {
        self.touch();
        &mut self.data
    }

    fn touch(&mut self) {
        self.tag.version = self.tag.version.wrapping_add(1);
    }

    /// Iterator over logical rows.
    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Values in row-major order without padding.
    pub fn to_row_major(&self) -> Vec<T> {
        self.iter_rows().flat_map(|r| r.iter().copied()).collect()
    }

    pub fn count_nonzeros(&self) -> usize {
        self.iter_rows()
            .map(|r| r.iter().filter(|&&v| v != T::ZERO).count())
            .sum()
    }

    /// Fraction of logical elements that are exactly zero.
    pub fn elementwise_sparsity(&self) -> f64 {
        let total = (self.rows * self.cols) as f64;
        1.0 - self.count_nonzeros() as f64 / total
    }

    pub fn padding_is_zero(&self) -> bool {
        (0..self.rows).all(|i| {
            let start = i * self.padded_cols;
            self.data[start + self.cols..start + self.padded_cols]
                .iter()
                .all(|&v| v == T::ZERO && v.to_bits_u64() == 0)
        })
    }

    /// Same geometry, re-padded for a different lane configuration.
    pub fn repad(&self, lanes: LaneConfig) -> Result<Self> {
        let mut out = Self::zeros(self.rows, self.cols, lanes)?;
        for i in 0..self.rows {
            out.row_mut(i).copy_from_slice(self.row(i));
        }
        Ok(out)
    }

    /// Sets every element to zero.
    pub fn clear(&mut self) {
        self.storage_mut().fill(T::ZERO);
    }

    /// Exact equality of logical values.
    pub fn logical_eq(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.iter_rows().zip(other.iter_rows()).all(|(a, b)| {
                a.iter()
                    .zip(b)
                    .all(|(x, y)| x.to_bits_u64() == y.to_bits_u64())
            })
    }
}

impl<T: Element> Clone for DenseMatrix<T> {
    fn clone(&self) -> Self {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            padded_cols: self.padded_cols,
            lanes: self.lanes,
            data: self.data.clone(),
            tag: ContentTag {
                id: fresh_id(),
                version: 0,
            },
        }
    }
}

impl<T: Element> fmt::Debug for DenseMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DenseMatrix")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("padded_cols", &self.padded_cols)
            .field("kind", &T::KIND)
            .finish_non_exhaustive()
    }
}

/// A matrix of either element kind, as read from a file.
#[derive(Clone, Debug)]
pub enum AnyMatrix {
    F32(DenseMatrix<f32>),
    F64(DenseMatrix<f64>),
}

impl AnyMatrix {
    pub fn create(rows: usize, cols: usize, kind: ElemKind, lanes: LaneConfig) -> Result<Self> {
        Ok(match kind {
            ElemKind::F32 => AnyMatrix::F32(DenseMatrix::zeros(rows, cols, lanes)?),
            ElemKind::F64 => AnyMatrix::F64(DenseMatrix::zeros(rows, cols, lanes)?),
        })
    }

    pub fn elem_kind(&self) -> ElemKind {
        match self {
            AnyMatrix::F32(_) => ElemKind::F32,
            AnyMatrix::F64(_) => ElemKind::F64,
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            AnyMatrix::F32(m) => m.rows(),
            AnyMatrix::F64(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            AnyMatrix::F32(m) => m.cols(),
            AnyMatrix::F64(m) => m.cols(),
        }
    }

    pub fn elementwise_sparsity(&self) -> f64 {
        match self {
            AnyMatrix::F32(m) => m.elementwise_sparsity(),
            AnyMatrix::F64(m) => m.elementwise_sparsity(),
        }
    }
}

impl From<DenseMatrix<f32>> for AnyMatrix {
    fn from(m: DenseMatrix<f32>) -> Self {
        AnyMatrix::F32(m)
    }
}

impl From<DenseMatrix<f64>> for AnyMatrix {
    fn from(m: DenseMatrix<f64>) -> Self {
        AnyMatrix::F64(m)
    }
}
