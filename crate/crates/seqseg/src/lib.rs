//! SeqSeg: sequential Bayesian segmentation of 1-D signals into
//! variance-homogeneous pieces.
//!
//! The driver ([`segmenter`]) recursively bisects the signal. For each
//! interval a closed-form marginal posterior locates the single best cut
//! ([`changepoint`]); a full Bayesian significance test run by adaptive MCMC
//! then decides whether the two halves genuinely differ in variance
//! ([`evidence`]). Splitting continues until segments hit the length floor or
//! the evidence favors homogeneity. [`signal`] handles ingestion and the
//! prefix-sum-of-squares preprocessing that makes every scan O(1) per
//! candidate; [`sim`] generates synthetic benchmark signals and runs
//! parameter sweeps.
//!
//! All stochastic components draw from counter-based RNG streams keyed by
//! user seed and component coordinates, so any result is reproducible
//! bit-for-bit regardless of thread count.

#![forbid(unsafe_code)]

pub mod changepoint;
pub mod error;
pub mod evidence;
pub mod segmenter;
pub mod signal;
pub mod sim;

mod rng;

pub use error::{Error, Result};
pub use segmenter::{segment, segment_file, SegConfig, SegmentationResult};
pub use signal::Signal;
