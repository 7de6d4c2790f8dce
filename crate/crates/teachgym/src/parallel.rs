//! Thread-pool realization batches and a wall clock for std builds.

use std::time::Instant;

use rayon::prelude::*;
use teachgym_core::metrics::RealizationRecord;
use teachgym_core::session::{BatchRealizer, Clock};
use teachgym_core::Result;

/// Realizes test items on the current rayon pool, results in index order.
pub struct Parallel;

impl BatchRealizer for Parallel {
    fn run(
        &self,
        n: usize,
        f: &(dyn Fn(usize) -> Result<RealizationRecord> + Sync),
    ) -> Vec<Result<RealizationRecord>> {
        (0..n).into_par_iter().map(f).collect()
    }
}

/// Seconds since construction.
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        WallClock(Instant::now())
    }
}

impl Clock for WallClock {
    fn elapsed_secs(&self) -> Option<f64> {
        Some(self.0.elapsed().as_secs_f64())
    }
}
