//! Per-step latency of the storage models across pack sizes.
//!
//! Each (model, cell count) pair is warmed up and then timed over a fixed
//! number of samples. Requests are drawn from a seeded generator so every
//! run sees the same workload. Models whose update is too cheap for the
//! clock are timed in batches and the batch mean is recorded per sample.

use std::hint::black_box;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::StorageConfig;
use crate::error::{Error, Result};
use crate::models::{c_rate_power_w, ModelKind};
use crate::storage::Storage;
use crate::units::{DurationS, PowerW, Soc};

pub const MIN_ITERATIONS: usize = 100;
/// Largest request magnitude, as a C-rate.
pub const MAX_REQUEST_C_RATE: f64 = 0.7;
const TARGET_SAMPLE: Duration = Duration::from_micros(20);
const MAX_BATCH: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub models: Vec<ModelKind>,
    pub cell_counts: Vec<usize>,
    pub iterations: usize,
    pub warmup: usize,
    pub step: DurationS,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            models: ModelKind::ALL.to_vec(),
            cell_counts: vec![16, 64, 256, 1024],
            iterations: 1000,
            warmup: 100,
            step: DurationS::new(60.0).expect("positive"),
            seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < MIN_ITERATIONS {
            return Err(Error::invalid("iterations", format!("must be >= {MIN_ITERATIONS}")));
        }
        if self.cell_counts.iter().any(|&n| n == 0) {
            return Err(Error::invalid("cell_counts", "must be >= 1"));
        }
        Ok(())
    }
}

/// Latency distribution in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub p95: f64,
    pub max: f64,
}

/// Linear-interpolated quantile of sorted data, `q` in `[0, 1]`.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl LatencySummary {
    /// `None` for an empty sample.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        Some(Self {
            min: s[0],
            p25: quantile(&s, 0.25),
            median: quantile(&s, 0.5),
            p75: quantile(&s, 0.75),
            p95: quantile(&s, 0.95),
            max: s[s.len() - 1],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub model: ModelKind,
    pub cells: usize,
    pub iterations: usize,
    /// Update calls per timed sample.
    pub batch: usize,
    pub summary: LatencySummary,
}

/// Alternating-sign requests with magnitudes uniform up to
/// [`MAX_REQUEST_C_RATE`], so the SoC wanders around its start value.
pub fn request_sequence(num_cells: usize, count: usize, seed: u64) -> Vec<PowerW> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let peak = c_rate_power_w(MAX_REQUEST_C_RATE, num_cells);
    (0..count)
        .map(|i| {
            let sign = if i % 2 == 0 { -1.0 } else { 1.0 };
            PowerW::new(sign * rng.gen_range(0.0..=peak)).expect("finite")
        })
        .collect()
}

/// Storage used for timing: default parameters, half charged.
pub fn bench_storage(model: ModelKind, num_cells: usize) -> Result<Box<dyn Storage>> {
    let soc = Soc::new(0.5).expect("in range");
    StorageConfig::for_model(model, num_cells, soc).build(Path::new("."))
}

fn time_batch(storage: &mut dyn Storage, requests: &[PowerW], step: DurationS) -> Result<Duration> {
    let start = Instant::now();
    for &p in requests {
        black_box(storage.update(black_box(p), step)?);
    }
    Ok(start.elapsed())
}

/// Times one (model, cell count) pair. Only the update calls are inside the
/// timed region.
pub fn measure(model: ModelKind, num_cells: usize, config: &BenchConfig) -> Result<BenchRow> {
    let mut storage = bench_storage(model, num_cells)?;
    let warmup = request_sequence(num_cells, config.warmup.max(1), config.seed ^ 0x5eed);
    let spent = time_batch(storage.as_mut(), &warmup, config.step)?;
    let per_call = spent.as_secs_f64() / warmup.len() as f64;
    let batch = if per_call > 0.0 {
        ((TARGET_SAMPLE.as_secs_f64() / per_call).ceil() as usize).clamp(1, MAX_BATCH)
    } else {
        MAX_BATCH
    };

    let requests = request_sequence(num_cells, config.iterations * batch, config.seed);
    let mut samples = Vec::with_capacity(config.iterations);
    for chunk in requests.chunks(batch) {
        let t = time_batch(storage.as_mut(), chunk, config.step)?;
        samples.push(t.as_secs_f64() / chunk.len() as f64);
    }
    Ok(BenchRow {
        model,
        cells: num_cells,
        iterations: config.iterations,
        batch,
        summary: LatencySummary::from_samples(&samples).expect("iterations >= 100"),
    })
}

/// Runs every (model, cell count) pair one after another.
pub fn sweep(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for &model in &config.models {
        for &n in &config.cell_counts {
            log::info!("bench {model} with {n} cells");
            rows.push(measure(model, n, config)?);
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "model", "cells", "iterations", "batch", "min_us", "p25_us", "median_us", "p75_us",
        "p95_us", "max_us",
    ])?;
    for r in rows {
        let s = r.summary;
        let us = |v: f64| format!("{:.4}", v * 1e6);
        w.write_record([
            r.model.name().to_owned(),
            r.cells.to_string(),
            r.iterations.to_string(),
            r.batch.to_string(),
            us(s.min),
            us(s.p25),
            us(s.median),
            us(s.p75),
            us(s.p95),
            us(s.max),
        ])?;
    }
    w.flush().map_err(Error::Write)?;
    Ok(())
}
