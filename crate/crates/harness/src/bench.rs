//! Prepared-versus-unprepared micro-benchmarking.
//!
//! Timing uses the monotonic clock; each cell collects samples until it has
//! `max_samples` or the budget elapses, whichever comes first, after a short
//! warmup. The median is the primary statistic. Correctness is evaluated on
//! the same in-place call path that was timed. Allocation counts are
//! recorded when the binary runs with the counting allocator installed.

use crate::check::{default_tolerance, CheckStatus};
use crate::drive::{self, IntoBuffers};
use crate::scenario::Scenario;
use adkit_core::alloccount;
use adkit_core::{Backend, Function, Op};
use std::time::{Duration, Instant};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Stop after this many timed samples.
    pub max_samples: usize,
    /// Or when this much time has been spent sampling.
    pub budget: Duration,
    pub warmup: usize,
    /// Correctness tolerance override; per-backend default otherwise.
    pub tolerance: Option<f64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            max_samples: 100,
            budget: Duration::from_millis(1000),
            warmup: 3,
            tolerance: None,
        }
    }
}

/// One benchmark cell: scenario x backend x prepared flag.
#[derive(Debug, Clone)]
pub struct BenchmarkRecord {
    pub scenario: String,
    pub backend: String,
    pub op: Op,
    pub size: usize,
    pub prepared: bool,
    pub samples: usize,
    pub time_ns_min: u64,
    pub time_ns_median: u64,
    /// Heap allocations per call (0 when no counting allocator is active).
    pub allocs: u64,
    pub status: CheckStatus,
    pub max_abs_err: f64,
}

fn median(sorted: &[u64]) -> u64 {
    let n = sorted.len();
    if n == 0 {
        return 0;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2
    }
}

pub(crate) fn run_bench<F: Function>(
    scenario: &Scenario<F>,
    backend: &Backend,
    prepared: bool,
    cfg: &BenchConfig,
) -> BenchmarkRecord {
    let mut record = BenchmarkRecord {
        scenario: scenario.name.clone(),
        backend: backend.id(),
        op: scenario.op,
        size: scenario.func.input_len(),
        prepared,
        samples: 0,
        time_ns_min: 0,
        time_ns_median: 0,
        allocs: 0,
        status: CheckStatus::Pass,
        max_abs_err: 0.0,
    };

    // a preparation to size the output buffers (and the reused one when
    // prepared=true)
    let mut prep = match drive::prepare_scenario(scenario, backend) {
        Ok(p) => p,
        Err(err) => {
            record.status = CheckStatus::Skip(err.to_string());
            return record;
        }
    };
    let mut bufs = IntoBuffers::for_scenario(scenario, &prep);

    let one_call = |prep: &mut adkit_core::Preparation, bufs: &mut IntoBuffers| {
        drive::run_into(scenario, prep, backend, bufs)
    };
    let one_unprepared_call = |bufs: &mut IntoBuffers| -> adkit_core::Result<()> {
        let mut fresh = drive::prepare_scenario(scenario, backend)?;
        drive::run_into(scenario, &mut fresh, backend, bufs)
    };

    // warmup
    for _ in 0..cfg.warmup {
        let result = if prepared {
            one_call(&mut prep, &mut bufs)
        } else {
            one_unprepared_call(&mut bufs)
        };
        if let Err(err) = result {
            record.status = CheckStatus::Fail;
            record.max_abs_err = f64::NAN;
            let _ = err;
            return record;
        }
    }

    let mut samples = Vec::with_capacity(cfg.max_samples);
    let allocs_before = alloccount::current();
    let started = Instant::now();
    while samples.len() < cfg.max_samples && started.elapsed() < cfg.budget {
        let t0 = Instant::now();
        let result = if prepared {
            one_call(&mut prep, &mut bufs)
        } else {
            one_unprepared_call(&mut bufs)
        };
        let dt = t0.elapsed().as_nanos() as u64;
        debug_assert!(result.is_ok());
        let _ = result;
        samples.push(dt);
    }
    let allocs_total = alloccount::current() - allocs_before;

    samples.sort_unstable();
    record.samples = samples.len();
    record.time_ns_min = samples.first().copied().unwrap_or(0);
    record.time_ns_median = median(&samples);
    record.allocs = if samples.is_empty() {
        0
    } else {
        allocs_total / samples.len() as u64
    };

    // correctness on the very path that was timed
    let tolerance = cfg.tolerance.unwrap_or_else(|| default_tolerance(backend));
    match one_call(&mut prep, &mut bufs) {
        Ok(()) => {
            let got = bufs.flattened(scenario);
            let reference = scenario.reference_values();
            let max_abs = got
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            record.max_abs_err = max_abs;
            if got.len() != reference.len() || max_abs > tolerance {
                record.status = CheckStatus::Fail;
            }
        }
        Err(_) => {
            record.status = CheckStatus::Fail;
            record.max_abs_err = f64::NAN;
        }
    }
    record
}
