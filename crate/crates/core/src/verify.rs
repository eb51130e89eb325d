//! Comparing products and fingerprinting them.

use crate::baselines::multiply_skip_a;
use crate::element::Element;
use crate::error::Result;
use crate::matrix::DenseMatrix;

/// Relative precision kept by [`quantized_checksum`]: 2^-16.
pub const CHECKSUM_MANTISSA_BITS: u32 = 16;

/// Element-wise `|A| * |B|`, the magnitude scale of each product element.
/// Zero terms add an exact `+0`, so skipping them changes nothing.
pub fn product_magnitude<T: Element>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
) -> Result<DenseMatrix<T>> {
    let abs = |m: &DenseMatrix<T>| {
        DenseMatrix::from_fn(m.rows(), m.cols(), m.lane_config(), |i, j| {
            m.get(i, j).abs()
        })
    };
    let (aa, ab) = (abs(a)?, abs(b)?);
    let mut out = DenseMatrix::zeros(a.rows(), b.cols(), b.lane_config())?;
    multiply_skip_a(&mut out, &aa, &ab)?;
    Ok(out)
}

/// Largest error of `result` against `oracle`, each element scaled by its
/// entry of `|A| * |B|`. Where that scale is zero the two values must agree
/// exactly (else the error is infinite).
pub fn max_relative_error<T: Element>(
    result: &DenseMatrix<T>,
    oracle: &DenseMatrix<T>,
    magnitude: &DenseMatrix<T>,
) -> f64 {
    assert_eq!(
        (result.rows(), result.cols()),
        (oracle.rows(), oracle.cols())
    );
    let mut worst = 0.0f64;
    for i in 0..oracle.rows() {
        for ((&x, &y), &s) in result
            .row(i)
            .iter()
            .zip(oracle.row(i))
            .zip(magnitude.row(i))
        {
            let diff = (x.to_f64() - y.to_f64()).abs();
            let err = if diff == 0.0 {
                0.0
            } else if s.to_f64() > 0.0 {
                diff / s.to_f64()
            } else {
                f64::INFINITY
            };
            if err.is_nan() {
                return f64::INFINITY;
            }
            worst = worst.max(err);
        }
    }
    worst
}

/// Rounds `v` to [`CHECKSUM_MANTISSA_BITS`] mantissa bits; both zeros map to 0.
pub fn quantize(v: f64) -> u64 {
    if v == 0.0 {
        return 0;
    }
    let drop = 52 - CHECKSUM_MANTISSA_BITS;
    let bits = v.to_bits();
    (bits.wrapping_add(1 << (drop - 1))) >> drop
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv(mut h: u64, word: u64) -> u64 {
    for byte in word.to_le_bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// FNV-1a hash of the dimensions and quantized logical elements.
pub fn quantized_checksum<T: Element>(m: &DenseMatrix<T>) -> u64 {
    let mut h = fnv(fnv(FNV_OFFSET, m.rows() as u64), m.cols() as u64);
    for row in m.iter_rows() {
        for &v in row {
            h = fnv(h, quantize(v.to_f64()));
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::LaneConfig;

    #[test]
    fn quantize_merges_nearby_values_and_signed_zeros() {
        assert_eq!(quantize(0.0), quantize(-0.0));
        assert_eq!(quantize(1.0), quantize(1.0 + 1e-9));
        assert_ne!(quantize(1.0), quantize(1.0 + 1e-3));
        assert_ne!(quantize(1.0), quantize(-1.0));
    }

    #[test]
    fn checksum_depends_on_dims_and_values() {
        let cfg = LaneConfig::default_for(crate::element::ElemKind::F32);
        let a = DenseMatrix::<f32>::identity(4, cfg).unwrap();
        let mut b = a.clone();
        assert_eq!(quantized_checksum(&a), quantized_checksum(&b));
        b.set(0, 1, 0.5);
        assert_ne!(quantized_checksum(&a), quantized_checksum(&b));
        let z1 = DenseMatrix::<f32>::zeros(2, 8, cfg).unwrap();
        let z2 = DenseMatrix::<f32>::zeros(4, 4, cfg).unwrap();
        assert_ne!(quantized_checksum(&z1), quantized_checksum(&z2));
    }

    #[test]
    fn relative_error_scaled_by_magnitude() {
        let cfg = LaneConfig::default_for(crate::element::ElemKind::F64);
        let a = DenseMatrix::<f64>::from_row_major(1, 2, cfg, &[1.0, -1.0]).unwrap();
        let b = DenseMatrix::<f64>::from_row_major(2, 1, cfg, &[2.0, 2.0]).unwrap();
        let mag = product_magnitude(&a, &b).unwrap();
        assert_eq!(mag.get(0, 0), 4.0);
        let oracle = DenseMatrix::<f64>::from_row_major(1, 1, cfg, &[0.0]).unwrap();
        let off = DenseMatrix::<f64>::from_row_major(1, 1, cfg, &[4e-6]).unwrap();
        assert!((max_relative_error(&off, &oracle, &mag) - 1e-6).abs() < 1e-18);
        let zero_scale = DenseMatrix::<f64>::from_row_major(1, 1, cfg, &[0.0]).unwrap();
        assert_eq!(
            max_relative_error(&off, &oracle, &zero_scale),
            f64::INFINITY
        );
        assert_eq!(max_relative_error(&oracle, &oracle, &zero_scale), 0.0);
    }
}
