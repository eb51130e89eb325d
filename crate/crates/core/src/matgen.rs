//! Seeded generators for the four sparsity structures.
//!
//! Every row draws from its own ChaCha8 stream (stream id = row index), and
//! column masks draw from a reserved stream, so output depends only on
//! `(dims, spec)` and never on how many threads fill it.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::element::{ElemKind, Element};
use crate::error::{Error, Result};
use crate::matrix::{AnyMatrix, DenseMatrix, LaneConfig};

const COLUMN_MASK_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Structure {
    /// Each element independently zero.
    Random,
    /// Each aligned `block_len` run of a row zero or not.
    BlockRandom,
    /// Whole columns zero (an exact `target` share of them).
    Column,
    /// Aligned groups of `block_len` columns zero (an exact `target` share).
    BlockColumn,
}

impl Structure {
    pub const ALL: [Structure; 4] = [
        Structure::Random,
        Structure::BlockRandom,
        Structure::Column,
        Structure::BlockColumn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Structure::Random => "random",
            Structure::BlockRandom => "block_random",
            Structure::Column => "column",
            Structure::BlockColumn => "block_column",
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Structure {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Structure::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                format!("unknown structure {s:?} (random, block_random, column, block_column)")
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparsitySpec {
    pub structure: Structure,
    /// Probability that an element, block or column is zeroed.
    pub target: f64,
    /// Block width for block structures; `None` picks the default (region
    /// width for `BlockRandom`, vector width for `BlockColumn`).
    pub block_len: Option<usize>,
    pub seed: u64,
}

impl SparsitySpec {
    pub fn new(structure: Structure, target: f64, seed: u64) -> Self {
        SparsitySpec {
            structure,
            target,
            block_len: None,
            seed,
        }
    }

    pub fn with_block_len(mut self, block_len: usize) -> Self {
        self.block_len = Some(block_len);
        self
    }

    /// Block width actually used under `lanes`.
    pub fn effective_block_len(&self, lanes: &LaneConfig) -> usize {
        match (self.block_len, self.structure) {
            (Some(len), _) => len,
            (None, Structure::BlockRandom) => lanes.region(),
            (None, Structure::BlockColumn) => lanes.lanes,
            (None, _) => 1,
        }
    }

    fn validate(&self, padded_cols: usize, lanes: &LaneConfig) -> Result<usize> {
        if !(0.0..=1.0).contains(&self.target) || self.target.is_nan() {
            return Err(Error::InvalidSparsity(self.target));
        }
        let len = self.effective_block_len(lanes);
        let blocked = matches!(
            self.structure,
            Structure::BlockRandom | Structure::BlockColumn
        );
        if blocked && (len == 0 || !padded_cols.is_multiple_of(len)) {
            return Err(Error::InvalidBlockLen {
                block_len: len,
                padded_cols,
            });
        }
        Ok(len)
    }
}

fn nonzero_value(rng: &mut ChaCha8Rng) -> f64 {
    let magnitude = rng.random_range(0.5..=1.5);
    if rng.random::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}

fn zeroed(rng: &mut ChaCha8Rng, target: f64) -> bool {
    rng.random::<f64>() < target
}

fn row_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Which column groups are forced to zero, one flag per `group` columns.
///
/// Exactly `round(target * groups)` groups are zeroed, chosen by a seeded
/// shuffle: every group is still zero with probability `target`, but the
/// measured fraction does not carry the binomial noise of so few draws.
fn column_mask(spec: &SparsitySpec, cols: usize, group: usize) -> Vec<bool> {
    let mut rng = row_rng(spec.seed, COLUMN_MASK_STREAM);
    let groups = cols.div_ceil(group);
    let zero = ((spec.target * groups as f64).round() as usize).min(groups);
    let mut order: Vec<usize> = (0..groups).collect();
    order.shuffle(&mut rng);
    let mut mask = vec![false; groups];
    for &g in &order[..zero] {
        mask[g] = true;
    }
    mask
}

pub fn generate<T: Element>(
    rows: usize,
    cols: usize,
    spec: &SparsitySpec,
    lanes: LaneConfig,
) -> Result<DenseMatrix<T>> {
    let mut m = DenseMatrix::<T>::zeros(rows, cols, lanes)?;
    let block_len = spec.validate(m.padded_cols(), &lanes)?;
    let padded = m.padded_cols();
    let mask = match spec.structure {
        Structure::Column => column_mask(spec, cols, 1),
        Structure::BlockColumn => column_mask(spec, cols, block_len),
        _ => Vec::new(),
    };
    let spec = *spec;

    m.storage_mut()
        .par_chunks_mut(padded)
        .enumerate()
        .for_each(|(i, row)| {
            let mut rng = row_rng(spec.seed, i as u64);
            let row = &mut row[..cols];
            match spec.structure {
                Structure::Random => {
                    for v in row.iter_mut() {
                        if !zeroed(&mut rng, spec.target) {
                            *v = T::from_f64(nonzero_value(&mut rng));
                        }
                    }
                }
                Structure::BlockRandom => {
                    for block in row.chunks_mut(block_len) {
                        if !zeroed(&mut rng, spec.target) {
                            for v in block.iter_mut() {
                                *v = T::from_f64(nonzero_value(&mut rng));
                            }
                        }
                    }
                }
                Structure::Column | Structure::BlockColumn => {
                    let group = if spec.structure == Structure::Column {
                        1
                    } else {
                        block_len
                    };
                    for (j, v) in row.iter_mut().enumerate() {
                        if !mask[j / group] {
                            *v = T::from_f64(nonzero_value(&mut rng));
                        }
                    }
                }
            }
        });
    Ok(m)
}

pub fn generate_any(
    rows: usize,
    cols: usize,
    kind: ElemKind,
    spec: &SparsitySpec,
    lanes: LaneConfig,
) -> Result<AnyMatrix> {
    Ok(match kind {
        ElemKind::F32 => AnyMatrix::F32(generate(rows, cols, spec, lanes)?),
        ElemKind::F64 => AnyMatrix::F64(generate(rows, cols, spec, lanes)?),
    })
}

/// Fraction of aligned `block_len`-wide row blocks (over the padded width)
/// that are entirely zero.
pub fn zero_block_fraction<T: Element>(m: &DenseMatrix<T>, block_len: usize) -> f64 {
    let mut zero = 0usize;
    let mut total = 0usize;
    for i in 0..m.rows() {
        for block in m.padded_row(i).chunks(block_len) {
            total += 1;
            zero += block.iter().all(|&v| v == T::ZERO) as usize;
        }
    }
    zero as f64 / total as f64
}

/// Fraction of aligned `group`-wide column groups (over the logical width)
/// that are entirely zero.
pub fn zero_column_group_fraction<T: Element>(m: &DenseMatrix<T>, group: usize) -> f64 {
    let groups = m.cols().div_ceil(group);
    let mut nonzero = vec![false; groups];
    for row in m.iter_rows() {
        for (j, &v) in row.iter().enumerate() {
            nonzero[j / group] |= v != T::ZERO;
        }
    }
    nonzero.iter().filter(|&&nz| !nz).count() as f64 / groups as f64
}
