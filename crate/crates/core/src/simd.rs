//! Vector backend selection and the multiply-add loops shared by every
//! multiply routine.
//!
//! Every routine in the crate accumulates through these helpers so that, on a
//! given backend, all algorithms perform the same (fused or unfused) operation
//! per output element. That makes their results comparable bit for bit.

use std::sync::OnceLock;

/// Instruction set used by kernels and multiply-add loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    /// Portable code, `c + a * b` with separate rounding.
    Scalar,
    /// 256-bit AVX2 vectors with fused multiply-add.
    Avx2Fma,
}

impl Backend {
    /// Best backend supported by the running CPU.
    pub fn detect() -> Backend {
        static DETECTED: OnceLock<Backend> = OnceLock::new();
        *DETECTED.get_or_init(|| {
            #[cfg(target_arch = "x86_64")]
            {
                if is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma") {
                    return Backend::Avx2Fma;
                }
            }
            Backend::Scalar
        })
    }

    pub fn is_vector(self) -> bool {
        self == Backend::Avx2Fma
    }

    pub fn name(self) -> &'static str {
        match self {
            Backend::Scalar => "scalar",
            Backend::Avx2Fma => "avx2+fma",
        }
    }
}

pub(crate) fn axpy_scalar<T>(c: &mut [T], a: T, b: &[T])
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<Output = T>,
{
    for (cv, &bv) in c.iter_mut().zip(b) {
        *cv = *cv + a * bv;
    }
}

pub(crate) fn scatter_axpy_scalar<T>(acc: &mut [T], a: T, cols: &[u32], vals: &[T])
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<Output = T>,
{
    for (&j, &v) in cols.iter().zip(vals) {
        let slot = &mut acc[j as usize];
        *slot = *slot + a * v;
    }
}

#[cfg(target_arch = "x86_64")]
pub(crate) mod avx2 {
    use std::arch::x86_64::*;

    /// # Safety
    /// The CPU must support AVX2 and FMA.
    #[target_feature(enable = "avx2,fma")]
    pub unsafe fn axpy_f32(c: &mut [f32], a: f32, b: &[f32]) {
        let n = c.len().min(b.len());
        let av = _mm256_set1_ps(a);
        let cp = c.as_mut_ptr();
        let bp = b.as_ptr();
        let mut i = 0;
        while i + 8 <= n {
            let cv = _mm256_loadu_ps(cp.add(i));
            let bv = _mm256_loadu_ps(bp.add(i));
            _mm256_storeu_ps(cp.add(i), _mm256_fmadd_ps(av, bv, cv));
            i += 8;
        }
        while i < n {
            *cp.add(i) = a.mul_add(*bp.add(i), *cp.add(i));
            i += 1;
        }
    }

    /// # Safety
    /// The CPU must support AVX2 and FMA.
    #[target_feature(enable = "avx2,fma")]
    pub unsafe fn axpy_f64(c: &mut [f64], a: f64, b: &[f64]) {
        let n = c.len().min(b.len());
        let av = _mm256_set1_pd(a);
        let cp = c.as_mut_ptr();
        let bp = b.as_ptr();
        let mut i = 0;
        while i + 4 <= n {
            let cv = _mm256_loadu_pd(cp.add(i));
            let bv = _mm256_loadu_pd(bp.add(i));
            _mm256_storeu_pd(cp.add(i), _mm256_fmadd_pd(av, bv, cv));
            i += 4;
        }
        while i < n {
            *cp.add(i) = a.mul_add(*bp.add(i), *cp.add(i));
            i += 1;
        }
    }

    /// # Safety
    /// The CPU must support FMA.
    #[target_feature(enable = "fma")]
    pub unsafe fn scatter_axpy_f32(acc: &mut [f32], a: f32, cols: &[u32], vals: &[f32]) {
        for (&j, &v) in cols.iter().zip(vals) {
            let slot = &mut acc[j as usize];
            *slot = a.mul_add(v, *slot);
        }
    }

    /// # Safety
    /// The CPU must support FMA.
    #[target_feature(enable = "fma")]
    pub unsafe fn scatter_axpy_f64(acc: &mut [f64], a: f64, cols: &[u32], vals: &[f64]) {
        for (&j, &v) in cols.iter().zip(vals) {
            let slot = &mut acc[j as usize];
            *slot = a.mul_add(v, *slot);
        }
    }
}
