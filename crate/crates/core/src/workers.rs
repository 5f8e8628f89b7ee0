//! Fixed pool of worker threads. Each parallel section runs one closure per
//! worker index and returns when every worker is done (a full barrier).

use std::time::{Duration, Instant};

use parking_lot::Mutex;
use rayon::{ThreadPool, ThreadPoolBuilder};

pub struct Workers {
    pool: ThreadPool,
    count: usize,
    busy: Mutex<Vec<Duration>>,
}

/// Results of one parallel section together with per-worker busy time.
pub struct Section<R> {
    pub results: Vec<R>,
    pub busy: Vec<Duration>,
}

impl<R> Section<R> {
    /// min/max busy time; 1.0 when perfectly balanced.
    pub fn load_balance(&self) -> f64 {
        load_balance(&self.busy)
    }
}

pub fn load_balance(busy: &[Duration]) -> f64 {
    let max = busy.iter().max().copied().unwrap_or_default();
    let min = busy.iter().min().copied().unwrap_or_default();
    if max.is_zero() {
        1.0
    } else {
        min.as_secs_f64() / max.as_secs_f64()
    }
}

impl Workers {
    pub fn new(count: usize) -> Self {
        let count = count.max(1);
        let pool = ThreadPoolBuilder::new()
            .num_threads(count)
            .thread_name(|i| format!("worker-{i}"))
            .build()
            .expect("worker pool");
        Workers {
            pool,
            count,
            busy: Mutex::new(vec![Duration::ZERO; count]),
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Runs `f(worker)` on every worker; results are ordered by worker index.
    pub fn run<R, F>(&self, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync,
    {
        self.run_timed(f).results
    }

    pub fn run_timed<R, F>(&self, f: F) -> Section<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync,
    {
        let out: Vec<(R, Duration)> = self.pool.broadcast(|ctx| {
            let t = Instant::now();
            let r = f(ctx.index());
            (r, t.elapsed())
        });
        let (results, busy): (Vec<R>, Vec<Duration>) = out.into_iter().unzip();
        for (acc, b) in self.busy.lock().iter_mut().zip(&busy) {
            *acc += *b;
        }
        Section { results, busy }
    }

    /// Busy time per worker summed over all sections since the last call.
    pub fn take_busy(&self) -> Vec<Duration> {
        std::mem::replace(&mut *self.busy.lock(), vec![Duration::ZERO; self.count])
    }
}

/// Splits `0..n` into `parts` contiguous ranges of near-equal size.
pub fn chunk_range(n: usize, parts: usize, i: usize) -> std::ops::Range<usize> {
    let start = n * i / parts;
    let end = n * (i + 1) / parts;
    start..end
}
