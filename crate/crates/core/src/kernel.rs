//! Pattern codes and the table of branch-free region kernels.
//!
//! A region of R = W·P·V elements is split into P groups of W·V lanes. Bit
//! `P-1-g` of a pattern code is set iff group `g` holds a non-zero, so the
//! leftmost bit describes the leftmost group. Kernel `k` performs
//! `c[l] += a * b[l]` on exactly the groups whose bit is set in `k` and leaves
//! every other lane untouched.

use std::fmt;

use crate::element::Element;
use crate::error::Result;
use crate::matrix::LaneConfig;
use crate::simd::Backend;

/// Raw region kernel: `(c_region, a_scalar, b_region)`.
///
/// Both pointers must be valid for one region of the table's configuration.
pub type KernelFn<T> = unsafe fn(*mut T, T, *const T);

/// P-bit mask of the non-zero vector groups in one region, MSB first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternCode(pub u16);

impl PatternCode {
    pub const EMPTY: PatternCode = PatternCode(0);

    pub fn full(pattern_bits: usize) -> PatternCode {
        PatternCode(((1u32 << pattern_bits) - 1) as u16)
    }

    /// Bit that marks group `group` of a `pattern_bits`-wide code.
    #[inline]
    pub fn group_bit(pattern_bits: usize, group: usize) -> u16 {
        1 << (pattern_bits - 1 - group)
    }

    #[inline]
    pub fn has_group(self, pattern_bits: usize, group: usize) -> bool {
        self.0 & Self::group_bit(pattern_bits, group) != 0
    }

    #[inline]
    pub fn popcount(self) -> u32 {
        self.0.count_ones()
    }

    /// Scans one region and returns its code.
    pub fn of_region<T: Element>(region: &[T], lanes: &LaneConfig) -> PatternCode {
        let gl = lanes.group_len();
        debug_assert_eq!(region.len(), lanes.region());
        let mut code = 0u16;
        for group in region.chunks_exact(gl) {
            let nonzero = group.iter().fold(false, |acc, &v| acc | (v != T::ZERO));
            code = (code << 1) | nonzero as u16;
        }
        PatternCode(code)
    }

    /// Groups set in the code, left to right.
    pub fn groups(self, pattern_bits: usize) -> impl Iterator<Item = usize> {
        (0..pattern_bits).filter(move |&g| self.has_group(pattern_bits, g))
    }

    pub fn display(self, pattern_bits: usize) -> String {
        format!("{:0width$b}", self.0, width = pattern_bits)
    }
}

/// Per-code offset lists for configurations without generated kernels. Each
/// code's loop runs over its own group list and never inspects values.
#[derive(Clone)]
pub struct IndexedKernels {
    group_len: usize,
    starts: Vec<u32>,
    offsets: Vec<u32>,
    backend: Backend,
}

impl IndexedKernels {
    fn new(lanes: &LaneConfig, backend: Backend) -> Self {
        let p = lanes.pattern_bits;
        let gl = lanes.group_len();
        let mut starts = Vec::with_capacity(lanes.pattern_count() + 1);
        let mut offsets = Vec::new();
        for code in 0..lanes.pattern_count() {
            starts.push(offsets.len() as u32);
            offsets.extend(PatternCode(code as u16).groups(p).map(|g| (g * gl) as u32));
        }
        starts.push(offsets.len() as u32);
        IndexedKernels {
            group_len: gl,
            starts,
            offsets,
            backend,
        }
    }

    pub fn group_offsets(&self, code: PatternCode) -> &[u32] {
        let k = code.0 as usize;
        &self.offsets[self.starts[k] as usize..self.starts[k + 1] as usize]
    }

    /// # Safety
    /// `c` and `b` must be valid for one region.
    #[inline]
    pub(crate) unsafe fn run<T: Element>(&self, code: u16, c: *mut T, a: T, b: *const T) {
        let gl = self.group_len;
        let k = code as usize;
        let list = self.offsets.get_unchecked(
            *self.starts.get_unchecked(k) as usize..*self.starts.get_unchecked(k + 1) as usize,
        );
        for &o in list {
            let o = o as usize;
            let cs = std::slice::from_raw_parts_mut(c.add(o), gl);
            let bs = std::slice::from_raw_parts(b.add(o), gl);
            T::axpy(self.backend, cs, a, bs);
        }
    }
}

/// How a table realises its kernels.
#[derive(Clone)]
pub enum Realization<T: 'static> {
    /// Generated straight-line routines, one per code.
    Compiled(&'static [KernelFn<T>]),
    /// One loop over a per-code group list.
    Indexed(IndexedKernels),
}

/// The 2^P region kernels for one lane configuration and element type.
#[derive(Clone)]
pub struct KernelTable<T: Element> {
    lanes: LaneConfig,
    backend: Backend,
    realization: Realization<T>,
}

impl<T: Element> fmt::Debug for KernelTable<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelTable")
            .field("lanes", &self.lanes)
            .field("backend", &self.backend)
            .field("compiled", &self.is_compiled())
            .finish()
    }
}

impl<T: Element> KernelTable<T> {
    /// Table for `lanes` on the best backend of this CPU.
    pub fn build(lanes: LaneConfig) -> Result<Self> {
        Self::build_with(lanes, Backend::detect())
    }

    /// Table for `lanes` on an explicit backend. Requesting a vector backend
    /// the CPU lacks yields the scalar kernels.
    pub fn build_with(lanes: LaneConfig, backend: Backend) -> Result<Self> {
        lanes.check_kind(T::KIND)?;
        let backend = if backend.is_vector() && !Backend::detect().is_vector() {
            Backend::Scalar
        } else {
            backend
        };
        let compiled = if lanes.pattern_bits == 8 && lanes.lanes == T::KIND.default_lanes() {
            T::compiled_kernels(backend, lanes.group_vectors)
        } else {
            None
        };
        let realization = match compiled {
            Some(fns) => Realization::Compiled(fns),
            None => Realization::Indexed(IndexedKernels::new(&lanes, backend)),
        };
        Ok(KernelTable {
            lanes,
            backend,
            realization,
        })
    }

    pub fn lane_config(&self) -> LaneConfig {
        self.lanes
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn len(&self) -> usize {
        self.lanes.pattern_count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_compiled(&self) -> bool {
        matches!(self.realization, Realization::Compiled(_))
    }

    pub fn realization(&self) -> &Realization<T> {
        &self.realization
    }

    /// Lane multiply-adds performed by kernel `code`.
    pub fn lane_ops(&self, code: PatternCode) -> u64 {
        code.popcount() as u64 * self.lanes.group_len() as u64
    }

    /// Masked multiply-add of one region through kernel `code`.
    pub fn apply(&self, code: PatternCode, c_region: &mut [T], a: T, b_region: &[T]) {
        let r = self.lanes.region();
        assert!(
            c_region.len() >= r && b_region.len() >= r,
            "regions must hold {r} elements"
        );
        assert!(
            (code.0 as usize) < self.len(),
            "code {} out of range",
            code.0
        );
        // SAFETY: both regions hold at least R elements; the code is in range.
        unsafe { self.apply_raw(code.0, c_region.as_mut_ptr(), a, b_region.as_ptr()) }
    }

    /// # Safety
    /// `c` and `b` must be valid for one region and `code < 2^P`.
    #[inline]
    pub(crate) unsafe fn apply_raw(&self, code: u16, c: *mut T, a: T, b: *const T) {
        match &self.realization {
            Realization::Compiled(fns) => (fns.get_unchecked(code as usize))(c, a, b),
            Realization::Indexed(ix) => ix.run(code, c, a, b),
        }
    }
}

/// Generated AVX2 kernels for P = 8 at the default lane counts.
pub(crate) mod compiled {
    use super::KernelFn;

    #[cfg(target_arch = "x86_64")]
    mod avx2 {
        use std::arch::x86_64::*;

        // With CODE and V constant every branch below folds away, leaving a
        // straight run of load/fma/store for the set groups only.
        #[target_feature(enable = "avx2,fma")]
        pub(super) unsafe fn region_f32<const CODE: usize, const V: usize>(
            c: *mut f32,
            a: f32,
            b: *const f32,
        ) {
            let av = _mm256_set1_ps(a);
            let mut g = 0;
            while g < 8 {
                if CODE & (0x80 >> g) != 0 {
                    let mut v = 0;
                    while v < V {
                        let o = (g * V + v) * 8;
                        let cv = _mm256_loadu_ps(c.add(o));
                        let bv = _mm256_loadu_ps(b.add(o));
                        _mm256_storeu_ps(c.add(o), _mm256_fmadd_ps(av, bv, cv));
                        v += 1;
                    }
                }
                g += 1;
            }
        }

        #[target_feature(enable = "avx2,fma")]
        pub(super) unsafe fn region_f64<const CODE: usize, const V: usize>(
            c: *mut f64,
            a: f64,
            b: *const f64,
        ) {
            let av = _mm256_set1_pd(a);
            let mut g = 0;
            while g < 8 {
                if CODE & (0x80 >> g) != 0 {
                    let mut v = 0;
                    while v < V {
                        let o = (g * V + v) * 4;
                        let cv = _mm256_loadu_pd(c.add(o));
                        let bv = _mm256_loadu_pd(b.add(o));
                        _mm256_storeu_pd(c.add(o), _mm256_fmadd_pd(av, bv, cv));
                        v += 1;
                    }
                }
                g += 1;
            }
        }

        macro_rules! table {
            ($name:ident, $t:ty, $f:ident, $v:literal) => {
                pub(super) static $name: [super::KernelFn<$t>; 256] =
    seq_macro::seq!(N in 0..256 { [ #( $f::<N, $v>, )* ] });
            };
        }

        table!(F32_V1, f32, region_f32, 1);
        table!(F32_V2, f32, region_f32, 2);
        table!(F32_V4, f32, region_f32, 4);
        table!(F64_V1, f64, region_f64, 1);
        table!(F64_V2, f64, region_f64, 2);
        table!(F64_V4, f64, region_f64, 4);
    }

    #[cfg(target_arch = "x86_64")]
    pub(crate) fn f32_table(group_vectors: usize) -> Option<&'static [KernelFn<f32>]> {
        match group_vectors {
            1 => Some(&avx2::F32_V1),
            2 => Some(&avx2::F32_V2),
            4 => Some(&avx2::F32_V4),
            _ => None,
        }
    }

    #[cfg(target_arch = "x86_64")]
    pub(crate) fn f64_table(group_vectors: usize) -> Option<&'static [KernelFn<f64>]> {
        match group_vectors {
            1 => Some(&avx2::F64_V1),
            2 => Some(&avx2::F64_V2),
            4 => Some(&avx2::F64_V4),
            _ => None,
        }
    }

    #[cfg(not(target_arch = "x86_64"))]
    pub(crate) fn f32_table(_: usize) -> Option<&'static [KernelFn<f32>]> {
        None
    }

    #[cfg(not(target_arch = "x86_64"))]
    pub(crate) fn f64_table(_: usize) -> Option<&'static [KernelFn<f64>]> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::ElemKind;

    fn cfg() -> LaneConfig {
        LaneConfig::default_for(ElemKind::F32)
    }

    fn tables() -> Vec<KernelTable<f32>> {
        vec![
            KernelTable::build(cfg()).unwrap(),
            KernelTable::build_with(cfg(), Backend::Scalar).unwrap(),
        ]
    }

    #[test]
    fn code_of_region_is_msb_first() {
        let mut region = vec![0.0f32; 64];
        region[8..16].fill(1.0);
        region[27] = -2.0;
        assert_eq!(
            PatternCode::of_region(&region, &cfg()),
            PatternCode(0b0101_0000)
        );
        assert_eq!(
            PatternCode::of_region(&[0.0f32; 64], &cfg()),
            PatternCode(0)
        );
        assert_eq!(
            PatternCode::of_region(&[1.0f32; 64], &cfg()),
            PatternCode(0xff)
        );
    }

    #[test]
    fn empty_case_leaves_c_untouched() {
        for t in tables() {
            let mut c: Vec<f32> = (0..64).map(|i| i as f32).collect();
            let before = c.clone();
            t.apply(PatternCode(0), &mut c, 3.0, &[1.0; 64]);
            assert_eq!(c, before);
        }
    }

    #[test]
    fn complete_case_with_unit_scalar_copies_b() {
        for t in tables() {
            let b: Vec<f32> = (0..64).map(|i| i as f32 - 20.5).collect();
            let mut c = vec![0.0f32; 64];
            t.apply(PatternCode(0xff), &mut c, 1.0, &b);
            assert_eq!(c, b);
        }
    }

    #[test]
    fn pattern_01010000_updates_second_and_fourth_vectors() {
        for t in tables() {
            let mut c = vec![0.0f32; 64];
            t.apply(PatternCode(0b0101_0000), &mut c, 1.0, &[1.0; 64]);
            let touched: Vec<usize> = (0..64).filter(|&l| c[l] != 0.0).collect();
            let expected: Vec<usize> = (8..16).chain(24..32).collect();
            assert_eq!(touched, expected);
        }
    }

    #[test]
    fn compiled_table_used_for_default_config_on_vector_cpu() {
        let t = KernelTable::<f32>::build(cfg()).unwrap();
        assert_eq!(t.is_compiled(), Backend::detect().is_vector());
        let t =
            KernelTable::<f32>::build_with(LaneConfig::new(8, 4, 1).unwrap(), Backend::detect())
                .unwrap();
        assert!(!t.is_compiled());
        assert_eq!(t.len(), 16);
    }

    #[test]
    fn indexed_offsets_follow_set_bits() {
        let ix = IndexedKernels::new(&LaneConfig::new(8, 8, 2).unwrap(), Backend::Scalar);
        assert_eq!(ix.group_offsets(PatternCode(0b1000_0001)), &[0, 112]);
        assert!(ix.group_offsets(PatternCode(0)).is_empty());
    }
}
