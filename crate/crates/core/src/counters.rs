use std::ops::{Add, AddAssign};

/// Exact operation counts of one multiply.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct WorkCounters {
    /// Kernel calls with a non-zero pattern code.
    pub kernel_invocations: u64,
    /// Multiply-adds on single elements.
    pub lane_fma_ops: u64,
    /// Zero elements of A whose row of B was never touched.
    pub rows_skipped: u64,
    /// Regions visited for a non-zero A element whose code was zero.
    pub regions_skipped_by_zero_code: u64,
}

impl Add for WorkCounters {
    type Output = WorkCounters;

    fn add(self, o: WorkCounters) -> WorkCounters {
        WorkCounters {
            kernel_invocations: self.kernel_invocations + o.kernel_invocations,
            lane_fma_ops: self.lane_fma_ops + o.lane_fma_ops,
            rows_skipped: self.rows_skipped + o.rows_skipped,
            regions_skipped_by_zero_code: self.regions_skipped_by_zero_code
                + o.regions_skipped_by_zero_code,
        }
    }
}

impl AddAssign for WorkCounters {
    fn add_assign(&mut self, o: WorkCounters) {
        *self = *self + o;
    }
}
