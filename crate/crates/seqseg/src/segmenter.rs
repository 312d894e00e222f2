//! Recursive binary segmentation driver.
//!
//! Each interval gets one MAP change-point scan. If the best cut leaves both
//! sides at least `minlength` samples long, the FBST evidence for equal
//! variances decides: evidence below `alpha` splits the interval and recurses
//! into both halves, anything else stops. Short intervals, cuts failing the
//! length floor, and zero-energy intervals stop without evidence, so the
//! number of evidence computations is at most `2 * segments - 1`.

use chrono::NaiveDateTime;
use serde::Serialize;

use crate::changepoint::{map_changepoint, GridSpec, ScanOutcome};
use crate::error::{Error, Result};
use crate::evidence::{fbst_evidence, McmcConfig, SegmentStats};
use crate::rng::mix;
use crate::signal::{load_signal, RecordingMeta, Signal, DEFAULT_FS};

/// Segmentation parameters. `beta` and `alpha` control the evidence decision,
/// `minlength` and `tres` the scan geometry, and the rest the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegConfig {
    /// Laplace prior scale on the variance ratio. The main sensitivity knob:
    /// smaller values demand stronger contrasts before splitting.
    pub beta: f64,
    /// Evidence threshold in (0, 1); split when ev_h0 < alpha.
    pub alpha: f64,
    pub mciter: usize,
    pub mcburn: usize,
    pub nchains: usize,
    pub t0: usize,
    /// Minimum segment length in samples; cuts leaving a shorter side stop
    /// the recursion for that interval.
    pub minlength: usize,
    /// Scan grid step in samples (time resolution of candidate cuts).
    pub tres: usize,
    /// Base seed; every node derives its own MCMC stream from
    /// (seed, interval), so results do not depend on traversal order.
    pub seed: u64,
}

impl Default for SegConfig {
    fn default() -> Self {
        Self {
            beta: 0.01,
            alpha: 0.1,
            mciter: 10_000,
            mcburn: 10_000,
            nchains: 4,
            t0: 1000,
            minlength: default_minlength(None),
            tres: 1,
            seed: 0,
        }
    }
}

/// Half a second of samples at the sampling rate, the conventional floor for
/// acoustic events; falls back to half a second at [`DEFAULT_FS`] when the
/// rate is unknown. Never below the 7-sample scan minimum.
pub fn default_minlength(fs: Option<f64>) -> usize {
    let rate = fs.unwrap_or(DEFAULT_FS);
    ((rate / 2.0).floor() as usize).max(7)
}

/// Default warm-up length for a given burn-in: 1000 steps, but never more
/// than half the burn-in and never zero.
pub fn default_t0(mcburn: usize) -> usize {
    1000.min((mcburn / 2).max(1))
}

impl SegConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!(
                    "evidence threshold must lie in the open interval (0, 1), got {}",
                    self.alpha
                ),
            });
        }
        if self.minlength < 7 {
            return Err(Error::InvalidParameter {
                name: "minlength",
                reason: format!(
                    "minimum segment length must be at least 7, got {}",
                    self.minlength
                ),
            });
        }
        if self.tres == 0 {
            return Err(Error::InvalidParameter {
                name: "tres",
                reason: "time resolution must be at least 1".into(),
            });
        }
        self.mcmc(0).validate()
    }

    /// MCMC configuration for one node, keyed by its own stream seed.
    fn mcmc(&self, node_seed: u64) -> McmcConfig {
        McmcConfig {
            mciter: self.mciter,
            mcburn: self.mcburn,
            nchains: self.nchains,
            t0: self.t0,
            beta: self.beta,
            seed: node_seed,
        }
    }
}

/// Why the recursion stopped (or split) at one interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionReason {
    /// Evidence below alpha: the interval was split at the cut.
    Split,
    /// Evidence at or above alpha: the interval is one segment.
    EvidenceStop,
    /// The MAP cut left a side shorter than minlength.
    MinLength,
    /// Interval shorter than 7 samples has no candidate cut.
    TooShort,
    /// All candidate cuts had a zero-energy side.
    ZeroEnergy,
}

/// One node of the recursion: the interval, the MAP cut when one exists, the
/// evidence when it was computed, and the decision taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeDecision {
    pub start: usize,
    pub end: usize,
    pub cut: Option<usize>,
    pub evidence: Option<f64>,
    pub reason: DecisionReason,
}

/// A final segment with its empirical power (mean squared sample).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentInfo {
    pub start: usize,
    pub end: usize,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentationResult {
    /// Accepted cut positions, sorted ascending.
    pub changepoints: Vec<usize>,
    /// The `changepoints.len() + 1` segments tiling the signal.
    pub segments: Vec<SegmentInfo>,
    /// Every visited interval in depth-first (left first) order.
    pub decisions: Vec<NodeDecision>,
}

/// Segments a signal. Deterministic for a fixed config: node seeds derive
/// from (config seed, interval), chains from (node seed, chain index), and
/// the scan reduction is order-independent, so neither thread count nor
/// traversal order affects the result.
pub fn segment(signal: &Signal, cfg: &SegConfig) -> Result<SegmentationResult> {
    cfg.validate()?;
    let n = signal.n();
    let mut cuts: Vec<usize> = Vec::new();
    let mut decisions: Vec<NodeDecision> = Vec::new();
    let mut stack: Vec<(usize, usize)> = vec![(0, n)];

    while let Some((start, end)) = stack.pop() {
        let node = |cut, evidence, reason| NodeDecision {
            start,
            end,
            cut,
            evidence,
            reason,
        };
        if end - start < 7 {
            decisions.push(node(None, None, DecisionReason::TooShort));
            continue;
        }
        let grid = GridSpec {
            start,
            end,
            l: cfg.tres,
        };
        let scan = map_changepoint(signal, &grid)?;
        match scan.outcome {
            ScanOutcome::TooShort => {
                decisions.push(node(None, None, DecisionReason::TooShort));
            }
            ScanOutcome::ZeroEnergy => {
                decisions.push(node(None, None, DecisionReason::ZeroEnergy));
            }
            ScanOutcome::Found(c) => {
                if c.t - start < cfg.minlength || end - c.t < cfg.minlength {
                    decisions.push(node(Some(c.t), None, DecisionReason::MinLength));
                    continue;
                }
                let left = SegmentStats::from_signal(signal, start, c.t)?;
                let right = SegmentStats::from_signal(signal, c.t, end)?;
                let node_seed = mix(cfg.seed, &[start as u64, end as u64]);
                let ev = fbst_evidence(&left, &right, &cfg.mcmc(node_seed))?;
                if ev.ev_h0 < cfg.alpha {
                    decisions.push(node(Some(c.t), Some(ev.ev_h0), DecisionReason::Split));
                    cuts.push(c.t);
                    stack.push((c.t, end));
                    stack.push((start, c.t));
                } else {
                    decisions.push(node(
                        Some(c.t),
                        Some(ev.ev_h0),
                        DecisionReason::EvidenceStop,
                    ));
                }
            }
        }
    }

    cuts.sort_unstable();
    let mut bounds = Vec::with_capacity(cuts.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(&cuts);
    bounds.push(n);
    let segments = bounds
        .windows(2)
        .map(|w| SegmentInfo {
            start: w[0],
            end: w[1],
            power: signal.power(w[0], w[1]).unwrap_or(0.0),
        })
        .collect();
    Ok(SegmentationResult {
        changepoints: cuts,
        segments,
        decisions,
    })
}

/// A file segmentation: the result plus wall-clock times for each cut when
/// the source carried a start timestamp and sampling rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileSegmentation {
    pub result: SegmentationResult,
    /// Aligned with `result.changepoints`; None when the file name carried
    /// no timestamp.
    pub changepoint_times: Vec<Option<NaiveDateTime>>,
    pub n: usize,
    pub fs: Option<f64>,
    pub origin: Option<NaiveDateTime>,
    pub warnings: Vec<String>,
}

/// Loads a file (WAV, CSV, or raw f64), segments it with the given config
/// as is, and attaches wall-clock times to the cuts when possible.
pub fn segment_file(path: &std::path::Path, cfg: &SegConfig) -> Result<FileSegmentation> {
    let signal = load_signal(path)?;
    let result = segment(&signal, cfg)?;
    let meta = match (signal.origin(), signal.fs()) {
        (Some(start_time), Some(fs)) => Some(RecordingMeta { start_time, fs }),
        _ => None,
    };
    let changepoint_times = result
        .changepoints
        .iter()
        .map(|&t| meta.as_ref().map(|m| m.index_to_time(t)))
        .collect();
    Ok(FileSegmentation {
        changepoint_times,
        n: signal.n(),
        fs: signal.fs(),
        origin: signal.origin(),
        warnings: signal.warnings().to_vec(),
        result,
    })
}
