use std::fmt;
use std::ops::{Add, Mul, Sub};

use crate::kernel::{compiled, KernelFn};
use crate::simd::{self, Backend};

/// Element type of a matrix, as recorded in matrix files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElemKind {
    F32,
    F64,
}

impl ElemKind {
    /// Code used by the binary matrix format.
    pub fn code(self) -> u32 {
        match self {
            ElemKind::F32 => 0,
            ElemKind::F64 => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<ElemKind> {
        match code {
            0 => Some(ElemKind::F32),
            1 => Some(ElemKind::F64),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            ElemKind::F32 => 4,
            ElemKind::F64 => 8,
        }
    }

    pub fn default_lanes(self) -> usize {
        match self {
            ElemKind::F32 => 8,
            ElemKind::F64 => 4,
        }
    }
}

impl fmt::Display for ElemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElemKind::F32 => "f32",
            ElemKind::F64 => "f64",
        })
    }
}

impl std::str::FromStr for ElemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f32" => Ok(ElemKind::F32),
            "f64" => Ok(ElemKind::F64),
            other => Err(format!("unknown dtype {other:?} (expected f32 or f64)")),
        }
    }
}

/// Floating-point element of a dense matrix.
pub trait Element:
    Copy
    + Default
    + PartialEq
    + PartialOrd
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + 'static
{
    const KIND: ElemKind;
    const ZERO: Self;
    const ONE: Self;
    /// Relative tolerance for comparing a product against the dense oracle.
    const PRODUCT_TOLERANCE: f64;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn abs(self) -> Self;
    fn to_bits_u64(self) -> u64;

    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;

    /// `c[l] += a * b[l]` over the common length.
    fn axpy(backend: Backend, c: &mut [Self], a: Self, b: &[Self]);

    /// `acc[cols[t]] += a * vals[t]`.
    fn scatter_axpy(backend: Backend, acc: &mut [Self], a: Self, cols: &[u32], vals: &[Self]);

    /// Generated region kernels for pattern size 8 at the default lane count,
    /// if this build has them for `group_vectors` vectors per bit.
    fn compiled_kernels(
        backend: Backend,
        group_vectors: usize,
    ) -> Option<&'static [KernelFn<Self>]>;
}

macro_rules! impl_element {
    ($t:ty, $kind:expr, $tol:expr, $axpy:ident, $scatter:ident, $tables:ident) => {
        impl Element for $t {
            const KIND: ElemKind = $kind;
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            const PRODUCT_TOLERANCE: f64 = $tol;

            fn from_f64(v: f64) -> Self {
                v as $t
            }
            fn to_f64(self) -> f64 {
                self as f64
            }
            fn abs(self) -> Self {
                <$t>::abs(self)
            }
            fn to_bits_u64(self) -> u64 {
                self.to_bits() as u64
            }

            fn write_le(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }
            fn read_le(bytes: &[u8]) -> Self {
                let mut raw = [0u8; std::mem::size_of::<$t>()];
                raw.copy_from_slice(&bytes[..std::mem::size_of::<$t>()]);
                <$t>::from_le_bytes(raw)
            }

            fn axpy(backend: Backend, c: &mut [Self], a: Self, b: &[Self]) {
                match backend {
                    #[cfg(target_arch = "x86_64")]
                    Backend::Avx2Fma if Backend::detect() == Backend::Avx2Fma => {
                        // SAFETY: the CPU supports AVX2 and FMA.
                        unsafe { simd::avx2::$axpy(c, a, b) }
                    }
                    _ => simd::axpy_scalar(c, a, b),
                }
            }

            fn scatter_axpy(
                backend: Backend,
                acc: &mut [Self],
                a: Self,
                cols: &[u32],
                vals: &[Self],
            ) {
                match backend {
                    #[cfg(target_arch = "x86_64")]
                    Backend::Avx2Fma if Backend::detect() == Backend::Avx2Fma => {
                        // SAFETY: the CPU supports AVX2 and FMA.
                        unsafe { simd::avx2::$scatter(acc, a, cols, vals) }
                    }
                    _ => simd::scatter_axpy_scalar(acc, a, cols, vals),
                }
            }

            fn compiled_kernels(
                backend: Backend,
                group_vectors: usize,
            ) -> Option<&'static [KernelFn<Self>]> {
                match backend {
                    #[cfg(target_arch = "x86_64")]
                    Backend::Avx2Fma if Backend::detect() == Backend::Avx2Fma => {
                        compiled::$tables(group_vectors)
                    }
                    _ => {
                        let _ = group_vectors;
                        None
                    }
                }
            }
        }
    };
}

impl_element!(
    f32,
    ElemKind::F32,
    1e-5,
    axpy_f32,
    scatter_axpy_f32,
    f32_table
);
impl_element!(
    f64,
    ElemKind::F64,
    1e-12,
    axpy_f64,
    scatter_axpy_f64,
    f64_table
);
