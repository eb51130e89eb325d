//! CSV rows written by `bench` and `sweep`.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use mmm::WorkCounters;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Trial index, or the per-algorithm median summary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trial {
    Index(u32),
    Median,
}

impl fmt::Display for Trial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trial::Index(i) => write!(f, "{i}"),
            Trial::Median => f.write_str("median"),
        }
    }
}

impl FromStr for Trial {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "median" => Ok(Trial::Median),
            _ => s
                .parse()
                .map(Trial::Index)
                .map_err(|_| format!("bad trial {s:?}")),
        }
    }
}

impl Serialize for Trial {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Trial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub algo: String,
    /// Rows of A.
    pub n: usize,
    pub a_sparsity: f64,
    pub b_sparsity: f64,
    pub structure_b: String,
    pub dtype: String,
    pub workers: usize,
    pub trial: Trial,
    pub preprocess_ns: u64,
    pub multiply_ns: u64,
    pub total_ns: u64,
    pub kernel_invocations: u64,
    pub lane_fma_ops: u64,
    pub rows_skipped: u64,
    pub regions_skipped: u64,
    pub checksum: u64,
}

impl BenchRecord {
    pub fn counters(&self) -> WorkCounters {
        WorkCounters {
            kernel_invocations: self.kernel_invocations,
            lane_fma_ops: self.lane_fma_ops,
            rows_skipped: self.rows_skipped,
            regions_skipped_by_zero_code: self.regions_skipped,
        }
    }

    pub fn set_counters(&mut self, w: &WorkCounters) {
        self.kernel_invocations = w.kernel_invocations;
        self.lane_fma_ops = w.lane_fma_ops;
        self.rows_skipped = w.rows_skipped;
        self.regions_skipped = w.regions_skipped_by_zero_code;
    }
}

/// Median of `xs`; the mean of the middle pair for even lengths.
pub fn median_ns(xs: &mut [u64]) -> u64 {
    assert!(!xs.is_empty());
    xs.sort_unstable();
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2
    }
}

/// Summary row over the trials of one algorithm: timings are per-field
/// medians; counters and checksum come from the first trial.
pub fn summarize(trials: &[BenchRecord]) -> BenchRecord {
    let pick =
        |f: fn(&BenchRecord) -> u64| median_ns(&mut trials.iter().map(f).collect::<Vec<_>>());
    BenchRecord {
        trial: Trial::Median,
        preprocess_ns: pick(|r| r.preprocess_ns),
        multiply_ns: pick(|r| r.multiply_ns),
        total_ns: pick(|r| r.total_ns),
        ..trials[0].clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub n: usize,
    pub a_sparsity: f64,
    pub b_sparsity: f64,
    pub structure_b: String,
    pub dtype: String,
    pub workers: usize,
    pub best_baseline: String,
    pub best_baseline_ns: u64,
    pub mmm_multiply_ns: u64,
    pub mmm_total_ns: u64,
    /// Best baseline time over MMM multiply time.
    pub speedup_multiply: f64,
    /// Best baseline time over MMM time including preprocessing.
    pub speedup_total: f64,
    pub lane_fma_ops: u64,
    /// `lane_fma_ops / (m * k * n)`.
    pub lane_fma_ratio: f64,
    /// Zero elements of A over all elements of A.
    pub rows_skipped_ratio: f64,
    /// Zero-code regions over all regions visited.
    pub regions_skipped_ratio: f64,
    pub checksums_agree: bool,
}

pub fn write_csv<R: Serialize>(rows: &[R], w: impl Write) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: for<'de> Deserialize<'de>>(r: impl Read) -> csv::Result<Vec<R>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

pub const BENCH_HEADER: &str = "algo,n,a_sparsity,b_sparsity,structure_b,dtype,workers,trial,preprocess_ns,multiply_ns,total_ns,kernel_invocations,lane_fma_ops,rows_skipped,regions_skipped,checksum";

#[cfg(test)]
mod tests {
    use super::*;

    fn record(trial: u32, multiply_ns: u64) -> BenchRecord {
        BenchRecord {
            algo: "mmm".into(),
            n: 4,
            a_sparsity: 0.5,
            b_sparsity: 0.25,
            structure_b: "random".into(),
            dtype: "f32".into(),
            workers: 1,
            trial: Trial::Index(trial),
            preprocess_ns: 10,
            multiply_ns,
            total_ns: 10 + multiply_ns,
            kernel_invocations: 1,
            lane_fma_ops: 2,
            rows_skipped: 3,
            regions_skipped: 4,
            checksum: u64::MAX,
        }
    }

    #[test]
    fn header_is_stable() {
        let mut buf = Vec::new();
        write_csv(&[record(0, 5)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), BENCH_HEADER);
    }

    #[test]
    fn rows_parse_back() {
        let rows = vec![
            record(0, 5),
            record(1, 7),
            summarize(&[record(0, 5), record(1, 7)]),
        ];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let back: Vec<BenchRecord> = read_csv(&buf[..]).unwrap();
        assert_eq!(back, rows);
        assert_eq!(back[2].trial, Trial::Median);
    }

    #[test]
    fn summary_takes_medians() {
        let trials: Vec<_> = (0..10)
            .map(|t| record(t, [9, 1, 8, 2, 7, 3, 6, 4, 5, 100][t as usize]))
            .collect();
        let s = summarize(&trials);
        assert_eq!(s.multiply_ns, 5);
        assert_eq!(s.total_ns, 15);
        assert_eq!(median_ns(&mut [3, 1, 2]), 2);
    }
}
