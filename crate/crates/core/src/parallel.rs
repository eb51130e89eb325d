//! Worker pools and the recursive block driver shared by the engine and the
//! recursive baseline.

use std::collections::HashMap;
use std::marker::PhantomData;
use std::ops::Range;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::counters::WorkCounters;
use crate::error::{Error, Result};

/// Environment variable that overrides the default worker count.
pub const WORKERS_ENV: &str = "MMM_WORKERS";

/// Pool with exactly `workers` threads, created once per size.
pub fn pool(workers: usize) -> Result<Arc<ThreadPool>> {
    if workers == 0 {
        return Err(Error::ZeroWorkers);
    }
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<ThreadPool>>>> = OnceLock::new();
    let mut pools = POOLS.get_or_init(Default::default).lock().unwrap();
    if let Some(p) = pools.get(&workers) {
        return Ok(p.clone());
    }
    let p = Arc::new(
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("mmm-worker-{i}"))
            .build()
            .map_err(|e| Error::Io(std::io::Error::other(e)))?,
    );
    pools.insert(workers, p.clone());
    Ok(p)
}

/// Worker count: explicit flag, then `MMM_WORKERS`, then hardware threads.
pub fn resolve_workers(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var(WORKERS_ENV).ok()?.trim().parse().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Raw pointer to a row-major output shared by tasks that write disjoint tiles.
#[derive(Clone, Copy)]
pub(crate) struct SharedOut<T> {
    pub ptr: *mut T,
    pub stride: usize,
    pub len: usize,
}

// SAFETY: the driver only hands out tiles that are disjoint within a phase,
// and phases are separated by joins.
unsafe impl<T: Send> Send for SharedOut<T> {}
unsafe impl<T: Send> Sync for SharedOut<T> {}

impl<T> SharedOut<T> {
    pub fn new(data: &mut [T], stride: usize) -> Self {
        SharedOut {
            ptr: data.as_mut_ptr(),
            stride,
            len: data.len(),
        }
    }
}

/// One leaf of the recursive multiply: `C[rows, cols] += A[rows, inner] * B[inner, cols]`.
pub struct Tile<'a, T> {
    pub rows: Range<usize>,
    pub inner: Range<usize>,
    pub cols: Range<usize>,
    out: SharedOut<T>,
    _owner: PhantomData<&'a mut T>,
}

impl<T> Tile<'_, T> {
    pub(crate) fn new(
        out: SharedOut<T>,
        rows: Range<usize>,
        inner: Range<usize>,
        cols: Range<usize>,
    ) -> Self {
        Tile {
            rows,
            inner,
            cols,
            out,
            _owner: PhantomData,
        }
    }

    /// The tile's part of output row `i`.
    pub fn c_row(&mut self, i: usize) -> &mut [T] {
        assert!(
            self.rows.contains(&i),
            "row {i} outside tile {:?}",
            self.rows
        );
        let start = i * self.out.stride + self.cols.start;
        assert!(start + self.cols.len() <= self.out.len);
        // SAFETY: in bounds, and no other live tile overlaps this one.
        unsafe { std::slice::from_raw_parts_mut(self.out.ptr.add(start), self.cols.len()) }
    }
}

/// Half-open range of block indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Span {
    pub lo: usize,
    pub hi: usize,
}

impl Span {
    pub fn new(lo: usize, hi: usize) -> Self {
        Span { lo, hi }
    }

    fn halves(self) -> ([Span; 2], usize) {
        let n = self.hi - self.lo;
        if n <= 1 {
            ([self, self], 1)
        } else {
            let mid = self.lo + n.div_ceil(2);
            ([Span::new(self.lo, mid), Span::new(mid, self.hi)], 2)
        }
    }
}

/// Recursive quadrant decomposition over block grids.
///
/// Each level halves every dimension that spans more than one block. The
/// products sharing the first half of the inner dimension run first (up to 4
/// tasks writing disjoint output quadrants), then those for the second half,
/// so each output element sees its inner blocks in increasing order no
/// matter how many workers run the tasks.
pub(crate) fn drive<F>(i: Span, k: Span, j: Span, parallel: bool, leaf: &F) -> WorkCounters
where
    F: Fn(usize, usize, usize) -> WorkCounters + Sync,
{
    if i.hi - i.lo == 1 && k.hi - k.lo == 1 && j.hi - j.lo == 1 {
        return leaf(i.lo, k.lo, j.lo);
    }
    let (ih, ni) = i.halves();
    let (kh, nk) = k.halves();
    let (jh, nj) = j.halves();
    let mut total = WorkCounters::default();
    for &kpart in &kh[..nk] {
        let mut tasks = [(i, j); 4];
        let mut n = 0;
        for &ipart in &ih[..ni] {
            for &jpart in &jh[..nj] {
                tasks[n] = (ipart, jpart);
                n += 1;
            }
        }
        let tasks = &tasks[..n];
        total += if parallel && n > 1 {
            tasks
                .par_iter()
                .map(|&(ip, jp)| drive(ip, kpart, jp, parallel, leaf))
                .reduce(WorkCounters::default, |a, b| a + b)
        } else {
            tasks
                .iter()
                .map(|&(ip, jp)| drive(ip, kpart, jp, parallel, leaf))
                .fold(WorkCounters::default(), |a, b| a + b)
        };
    }
    total
}
