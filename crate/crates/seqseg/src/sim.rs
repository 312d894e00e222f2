//! Synthetic benchmark signals, parameter sweeps, and scan timing.
//!
//! A [`SimSpec`] describes a piecewise-stationary Gaussian signal by its
//! segment boundaries and per-segment variance factors. [`sweep`] replays
//! segmentation over a grid of (spec, beta, alpha) cells with repeated
//! derived seeds and reports segment-count ranges per cell; [`bench_resolution`]
//! times the MAP scan across grid resolutions.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::changepoint::{map_changepoint, GridSpec};
use crate::error::{Error, Result};
use crate::rng::mix;
use crate::segmenter::{segment, SegConfig};
use crate::signal::Signal;

/// Specification of a piecewise-stationary zero-mean Gaussian signal.
/// Segment k covers `[boundaries[k], boundaries[k+1])` and has standard
/// deviation `sigma0 * sqrt(deltas[k])`, i.e. `deltas` are variance factors
/// relative to the base variance `sigma0^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSpec {
    /// Strictly increasing, starting at 0; the last entry is the length.
    pub boundaries: Vec<usize>,
    /// One variance factor per segment: `deltas.len() == boundaries.len() - 1`.
    pub deltas: Vec<f64>,
    pub sigma0: f64,
    pub seed: u64,
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.boundaries.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "boundaries",
                reason: "need at least a start and an end".into(),
            });
        }
        if self.boundaries[0] != 0 {
            return Err(Error::InvalidParameter {
                name: "boundaries",
                reason: format!("must start at 0, got {}", self.boundaries[0]),
            });
        }
        if self.boundaries.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter {
                name: "boundaries",
                reason: "must be strictly increasing".into(),
            });
        }
        if self.deltas.len() != self.boundaries.len() - 1 {
            return Err(Error::InvalidParameter {
                name: "deltas",
                reason: format!(
                    "need one variance factor per segment: {} segments, {} factors",
                    self.boundaries.len() - 1,
                    self.deltas.len()
                ),
            });
        }
        if self.deltas.iter().any(|&d| !(d.is_finite() && d > 0.0)) {
            return Err(Error::InvalidParameter {
                name: "deltas",
                reason: "variance factors must be positive and finite".into(),
            });
        }
        if !(self.sigma0.is_finite() && self.sigma0 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma0",
                reason: format!(
                    "base scale must be positive and finite, got {}",
                    self.sigma0
                ),
            });
        }
        Ok(())
    }

    /// Signal length.
    pub fn n(&self) -> usize {
        *self.boundaries.last().unwrap_or(&0)
    }

    /// Compact label for reports: "1" for an all-unity profile, the single
    /// distinct non-unity factor when there is exactly one, otherwise all
    /// factors joined with '|'.
    pub fn delta_label(&self) -> String {
        let mut distinct: Vec<f64> = Vec::new();
        for &d in &self.deltas {
            if d != 1.0 && !distinct.contains(&d) {
                distinct.push(d);
            }
        }
        match distinct.len() {
            0 => "1".to_string(),
            1 => format!("{}", distinct[0]),
            _ => {
                let parts: Vec<String> = self.deltas.iter().map(|d| format!("{d}")).collect();
                parts.join("|")
            }
        }
    }
}

/// Draws the signal: one ChaCha stream per spec seed, segment k scaled by
/// `sigma0 * sqrt(deltas[k])`. The underlying standard normal draws do not
/// depend on the deltas, so specs differing only in variance factors share
/// the same base noise.
pub fn simulate_signal(spec: &SimSpec) -> Result<Signal> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = Vec::with_capacity(spec.n());
    for (k, w) in spec.boundaries.windows(2).enumerate() {
        let scale = spec.sigma0 * spec.deltas[k].sqrt();
        for _ in w[0]..w[1] {
            samples.push(scale * rng.sample::<f64, _>(StandardNormal));
        }
    }
    Signal::from_samples(samples, None)
}

/// One sweep cell: a (spec, beta, alpha) combination over `runs` repeats.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta: String,
    pub beta: f64,
    pub alpha: f64,
    /// Minimum segment count over successful runs; None when all failed.
    pub min_segments: Option<usize>,
    pub max_segments: Option<usize>,
    pub mean_time_s: Option<f64>,
    /// Successful runs contributing to the statistics.
    pub runs: usize,
    /// Failed runs in this cell.
    pub errors: usize,
    /// Segment count of every successful run, in repeat order. Not part of
    /// the CSV; kept for distributional assertions in tests.
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Renders the fixed-header CSV. Cells where every run failed carry NA
    /// markers and `runs` 0.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,beta,alpha,min_segments,max_segments,mean_time_s,runs\n");
        for r in &self.rows {
            let min = r.min_segments.map_or("NA".to_string(), |v| v.to_string());
            let max = r.max_segments.map_or("NA".to_string(), |v| v.to_string());
            let time = r
                .mean_time_s
                .map_or("NA".to_string(), |v| format!("{v:.6}"));
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.delta, r.beta, r.alpha, min, max, time, r.runs
            );
        }
        out
    }
}

/// Runs `segment` for every (spec, beta, alpha) combination `repeats` times
/// and aggregates segment counts per cell. The signal is simulated once per
/// spec. When `vary_seed` is set (the usual case), repeat r of spec i derives
/// its segmentation seed from `(cfg.seed, i, r)`; otherwise every run uses
/// `cfg.seed` as is and repeats are exact replays. Individual run failures
/// are recorded in the row and the sweep continues.
pub fn sweep(
    specs: &[SimSpec],
    beta_grid: &[f64],
    alpha_grid: &[f64],
    repeats: usize,
    cfg: &SegConfig,
    vary_seed: bool,
) -> Result<SweepReport> {
    if specs.is_empty() || beta_grid.is_empty() || alpha_grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "sweep",
            reason: "specs, beta grid and alpha grid must be nonempty".into(),
        });
    }
    if repeats == 0 {
        return Err(Error::InvalidParameter {
            name: "repeats",
            reason: "need at least one repeat".into(),
        });
    }
    let mut rows = Vec::with_capacity(specs.len() * beta_grid.len() * alpha_grid.len());
    for (si, spec) in specs.iter().enumerate() {
        let signal = simulate_signal(spec)?;
        let label = spec.delta_label();
        for &beta in beta_grid {
            for &alpha in alpha_grid {
                let mut counts = Vec::with_capacity(repeats);
                let mut errors = 0usize;
                let mut total_time = 0.0_f64;
                for r in 0..repeats {
                    let run_cfg = SegConfig {
                        beta,
                        alpha,
                        seed: if vary_seed {
                            mix(cfg.seed, &[si as u64, r as u64])
                        } else {
                            cfg.seed
                        },
                        ..*cfg
                    };
                    let started = Instant::now();
                    match segment(&signal, &run_cfg) {
                        Ok(res) => {
                            total_time += started.elapsed().as_secs_f64();
                            counts.push(res.segments.len());
                        }
                        Err(_) => errors += 1,
                    }
                }
                let runs = counts.len();
                rows.push(SweepRow {
                    delta: label.clone(),
                    beta,
                    alpha,
                    min_segments: counts.iter().min().copied(),
                    max_segments: counts.iter().max().copied(),
                    mean_time_s: (runs > 0).then(|| total_time / runs as f64),
                    runs,
                    errors,
                    counts,
                });
            }
        }
    }
    Ok(SweepReport { rows })
}

/// One scan timing cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub size: usize,
    pub resolution: usize,
    pub time_s: f64,
    pub evaluations: usize,
}

/// Times the full-interval MAP scan for each (size, resolution) pair, best
/// of three runs each, one cell at a time. A homogeneous unit-variance
/// signal is simulated once per size from `(seed, size)`.
pub fn bench_resolution(
    sizes: &[usize],
    resolutions: &[usize],
    seed: u64,
) -> Result<Vec<BenchRow>> {
    if sizes.is_empty() || resolutions.is_empty() {
        return Err(Error::InvalidParameter {
            name: "bench",
            reason: "sizes and resolutions must be nonempty".into(),
        });
    }
    if let Some(&n) = sizes.iter().find(|&&n| n < 7) {
        return Err(Error::InvalidParameter {
            name: "sizes",
            reason: format!("scan needs at least 7 samples, got {n}"),
        });
    }
    let mut rows = Vec::with_capacity(sizes.len() * resolutions.len());
    for &size in sizes {
        let spec = SimSpec {
            boundaries: vec![0, size],
            deltas: vec![1.0],
            sigma0: 1.0,
            seed: mix(seed, &[size as u64]),
        };
        let signal = simulate_signal(&spec)?;
        for &l in resolutions {
            let grid = GridSpec::new(0, size, l)?;
            let mut best = f64::INFINITY;
            let mut evaluations = 0;
            for _ in 0..3 {
                let started = Instant::now();
                let scan = map_changepoint(&signal, &grid)?;
                let elapsed = started.elapsed().as_secs_f64();
                best = best.min(elapsed);
                evaluations = scan.evaluations;
            }
            rows.push(BenchRow {
                size,
                resolution: l,
                time_s: best,
                evaluations,
            });
        }
    }
    Ok(rows)
}

/// Renders bench rows with the fixed `size,resolution,time_s` header.
pub fn bench_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("size,resolution,time_s\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{:.6}", r.size, r.resolution, r.time_s);
    }
    out
}
