//! Full Bayesian significance test (FBST) for equality of two segment
//! variances, computed by adaptive Metropolis MCMC.
//!
//! Model: left segment samples are N(0, s^2), right segment samples are
//! N(0, d * s^2), with a Laplace prior exp(-|d - 1| / beta) on the variance
//! ratio and a 1/s prior on the common scale. The null hypothesis is d = 1.
//! The test computes the posterior probability of the region where the
//! posterior density is at or below the supremum over the null set; the
//! reported `ev_h0` is the evidence in favor of d = 1, so segmentation splits
//! when `ev_h0` falls below a significance threshold.
//!
//! The sampler has three phases: a per-coordinate random-walk warm-up whose
//! states seed a proposal covariance, an adaptive phase that updates the
//! covariance by a running-mean recursion, and a fixed-proposal sampling
//! phase from which the evidence is estimated.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::chain_rng;
use crate::signal::Signal;

/// ln(2*pi), used by the Gaussian log likelihood.
const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Adaptive-phase scaling constant for a 2-D target, (2.24)^2 / 2.
const S_D: f64 = 2.24 * 2.24 / 2.0;

/// Ridge added inside the covariance recursion and during repair.
const COV_EPS: f64 = 1e-30;

/// Sufficient statistics of one candidate segment: sample count and sum of
/// squares. This is the only input the evidence computation needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentStats {
    n: u64,
    ssq: f64,
}

impl SegmentStats {
    pub fn new(n: u64, ssq: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: "segment must contain at least one sample".into(),
            });
        }
        if !(ssq.is_finite() && ssq >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "ssq",
                reason: format!("sum of squares must be finite and nonnegative, got {ssq}"),
            });
        }
        Ok(Self { n, ssq })
    }

    /// Statistics of `signal[start..end)`.
    pub fn from_signal(signal: &Signal, start: usize, end: usize) -> Result<Self> {
        let ssq = signal.sumsq(start, end)?;
        Self::new((end - start) as u64, ssq)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn ssq(&self) -> f64 {
        self.ssq
    }
}

/// MCMC settings for one evidence computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McmcConfig {
    /// Sampling-phase iterations (evidence estimate resolution).
    pub mciter: usize,
    /// Burn-in iterations, including the warm-up.
    pub mcburn: usize,
    /// Number of independent chains.
    pub nchains: usize,
    /// Warm-up iterations within the burn-in (per-coordinate phase).
    pub t0: usize,
    /// Laplace prior scale for the variance ratio; smaller values pull the
    /// posterior harder toward d = 1.
    pub beta: f64,
    /// Base seed; each chain derives its own stream from (seed, chain id).
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            mciter: 10_000,
            mcburn: 10_000,
            nchains: 4,
            t0: 1000,
            beta: 0.01,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mciter == 0 || self.mcburn == 0 || self.nchains == 0 || self.t0 == 0 {
            return Err(Error::InvalidParameter {
                name: "mcmc",
                reason: "mciter, mcburn, nchains and t0 must all be at least 1".into(),
            });
        }
        if self.t0 > self.mcburn {
            return Err(Error::InvalidParameter {
                name: "t0",
                reason: format!(
                    "warm-up length {} exceeds burn-in length {}",
                    self.t0, self.mcburn
                ),
            });
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("prior scale must be positive and finite, got {}", self.beta),
            });
        }
        Ok(())
    }
}

/// Joint log posterior of (d, s) given the two segment statistics. Returns
/// `-inf` outside the support d > 0, s > 0.
pub fn log_full_posterior(
    d: f64,
    s: f64,
    left: &SegmentStats,
    right: &SegmentStats,
    beta: f64,
) -> f64 {
    if d <= 0.0 || s <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let n1 = left.n as f64;
    let n2 = right.n as f64;
    let s2 = s * s;
    let ln_s = s.ln();
    -(d - 1.0).abs() / beta
        - ln_s
        - 0.5 * (n1 + n2) * (LN_2PI + 2.0 * ln_s)
        - 0.5 * n2 * d.ln()
        - left.ssq / (2.0 * s2)
        - right.ssq / (2.0 * d * s2)
}

/// Supremum of the log posterior over the null set d = 1, attained at
/// `s0 = sqrt((ssq1 + ssq2) / (n1 + n2 + 1))`. Returns `(s0, log posterior)`.
///
/// Derivation: at d = 1 the posterior reduces to
/// `-(n1 + n2 + 1) ln s - (ssq1 + ssq2) / (2 s^2)` up to constants, whose
/// stationary point in s is the value above.
pub fn h0_max_posterior(
    left: &SegmentStats,
    right: &SegmentStats,
    beta: f64,
) -> Result<(f64, f64)> {
    let total = left.ssq + right.ssq;
    if total <= 0.0 {
        return Err(Error::DegenerateSegments);
    }
    let s0 = (total / (left.n + right.n + 1) as f64).sqrt();
    Ok((s0, log_full_posterior(1.0, s0, left, right, beta)))
}

/// Result of one MCMC chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainResult {
    /// Evidence in favor of d = 1 from this chain: the fraction of sampling
    /// states whose posterior does not exceed the null supremum.
    pub ev_h0: f64,
    /// Acceptance fraction during the sampling phase.
    pub accept_rate: f64,
    pub d_mean: f64,
    pub d_var: f64,
    pub s_mean: f64,
    pub s_var: f64,
    /// False when the proposal covariance could not be initialized; all other
    /// fields are NaN in that case.
    pub valid: bool,
}

/// Per-step trace record exposed to in-crate tests. Production runs observe
/// with a no-op closure, so the fields are only read under cfg(test).
#[derive(Debug, Clone, Copy)]
#[allow(dead_code)]
pub(crate) struct StepRecord {
    pub phase: u8,
    pub acc_d: bool,
    pub acc_s: bool,
    pub d: f64,
    pub s: f64,
    /// Sampling phase only: whether the state's posterior exceeds the null
    /// supremum (the complement of the evidence indicator).
    pub exceeds: bool,
}

struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn new() -> Self {
        Self {
            n: 0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn var(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

/// Running bivariate mean and covariance (Welford form), tracking the mean
/// vector before the latest push for the adaptive recursion.
struct BiMoments {
    n: u64,
    mean: [f64; 2],
    prev_mean: [f64; 2],
    c_dd: f64,
    c_ds: f64,
    c_ss: f64,
}

impl BiMoments {
    fn new() -> Self {
        Self {
            n: 0,
            mean: [0.0; 2],
            prev_mean: [0.0; 2],
            c_dd: 0.0,
            c_ds: 0.0,
            c_ss: 0.0,
        }
    }

    fn push(&mut self, x: f64, y: f64) {
        self.prev_mean = self.mean;
        self.n += 1;
        let nf = self.n as f64;
        let dx = x - self.mean[0];
        let dy = y - self.mean[1];
        self.mean[0] += dx / nf;
        self.mean[1] += dy / nf;
        self.c_dd += dx * (x - self.mean[0]);
        self.c_ss += dy * (y - self.mean[1]);
        self.c_ds += dx * (y - self.mean[1]);
    }

    fn covariance(&self) -> [[f64; 2]; 2] {
        if self.n < 2 {
            return [[0.0; 2]; 2];
        }
        let denom = (self.n - 1) as f64;
        [
            [self.c_dd / denom, self.c_ds / denom],
            [self.c_ds / denom, self.c_ss / denom],
        ]
    }
}

/// Cholesky factor (l11, l21, l22) of a symmetric 2x2 matrix, or None when
/// the matrix is not (numerically) positive definite.
fn cholesky2(m: &[[f64; 2]; 2]) -> Option<[f64; 3]> {
    if !(m[0][0] > 0.0 && m[0][0].is_finite()) {
        return None;
    }
    let l11 = m[0][0].sqrt();
    let l21 = m[1][0] / l11;
    let rest = m[1][1] - l21 * l21;
    if !(rest > 0.0 && rest.is_finite()) {
        return None;
    }
    Some([l11, l21, rest.sqrt()])
}

/// Attempts a Cholesky factorization, adding a small ridge up to three times,
/// then falling back to the diagonal of the last valid covariance. Returns
/// None only when no fallback exists or the fallback itself is degenerate.
fn cholesky_repair(
    sigma: &mut [[f64; 2]; 2],
    fallback: Option<&[[f64; 2]; 2]>,
) -> Option<[f64; 3]> {
    for _ in 0..3 {
        if let Some(l) = cholesky2(sigma) {
            return Some(l);
        }
        sigma[0][0] += COV_EPS;
        sigma[1][1] += COV_EPS;
    }
    if let Some(l) = cholesky2(sigma) {
        return Some(l);
    }
    let f = fallback?;
    *sigma = [[f[0][0], 0.0], [0.0, f[1][1]]];
    cholesky2(sigma)
}

fn invalid_chain() -> ChainResult {
    ChainResult {
        ev_h0: f64::NAN,
        accept_rate: f64::NAN,
        d_mean: f64::NAN,
        d_var: f64::NAN,
        s_mean: f64::NAN,
        s_var: f64::NAN,
        valid: false,
    }
}

/// Runs one chain of the three-phase sampler. The chain's RNG stream depends
/// only on `(cfg.seed, chain_id)`, so results are reproducible regardless of
/// how chains are scheduled.
pub fn run_chain(
    left: &SegmentStats,
    right: &SegmentStats,
    cfg: &McmcConfig,
    chain_id: u64,
) -> Result<ChainResult> {
    run_chain_observed(left, right, cfg, chain_id, |_| {})
}

pub(crate) fn run_chain_observed<F: FnMut(&StepRecord)>(
    left: &SegmentStats,
    right: &SegmentStats,
    cfg: &McmcConfig,
    chain_id: u64,
    mut observe: F,
) -> Result<ChainResult> {
    cfg.validate()?;
    if left.ssq <= 0.0 || right.ssq <= 0.0 {
        return Err(Error::DegenerateSegments);
    }
    let mut rng = chain_rng(cfg.seed, chain_id);
    let beta = cfg.beta;
    let (_, log_p0) = h0_max_posterior(left, right, beta)?;

    let n1 = (left.n.max(2) - 1) as f64;
    let n2 = (right.n.max(2) - 1) as f64;
    // Method-of-moments centers: s_tilde from the left segment alone, d_tilde
    // as the ratio of the two variance estimates.
    let s_tilde = (left.ssq / n1).sqrt();
    let d_tilde = (right.ssq / n2) * (n1 / left.ssq);

    // Initial state: Gaussian around the centers with a third of their size,
    // redrawn while outside the support, clamped to the centers after 100
    // attempts.
    let mut d = d_tilde;
    let mut s = s_tilde;
    for _ in 0..100 {
        let zd: f64 = rng.sample(StandardNormal);
        let zs: f64 = rng.sample(StandardNormal);
        let cd = d_tilde + d_tilde / 3.0 * zd;
        let cs = s_tilde + s_tilde / 3.0 * zs;
        if cd > 0.0 && cs > 0.0 {
            d = cd;
            s = cs;
            break;
        }
    }
    let mut lp = log_full_posterior(d, s, left, right, beta);

    // Warm-up proposal scales: 2.4 times the large-sample posterior standard
    // deviations of d and s.
    let n1f = left.n as f64;
    let n2f = right.n as f64;
    let sd_d = 2.4 * d_tilde * (2.0 / n1f + 2.0 / n2f).sqrt();
    let sd_s = 2.4 * s_tilde * (0.5 / (n1f + n2f)).sqrt();

    let mut moments = BiMoments::new();
    for _ in 0..cfg.t0 {
        let zd: f64 = rng.sample(StandardNormal);
        let cand = d + sd_d * zd;
        let mut acc_d = false;
        if cand > 0.0 {
            let clp = log_full_posterior(cand, s, left, right, beta);
            let u: f64 = rng.gen();
            if u < (clp - lp).exp() {
                d = cand;
                lp = clp;
                acc_d = true;
            }
        }
        let zs: f64 = rng.sample(StandardNormal);
        let cand = s + sd_s * zs;
        let mut acc_s = false;
        if cand > 0.0 {
            let clp = log_full_posterior(d, cand, left, right, beta);
            let u: f64 = rng.gen();
            if u < (clp - lp).exp() {
                s = cand;
                lp = clp;
                acc_s = true;
            }
        }
        moments.push(d, s);
        observe(&StepRecord {
            phase: 1,
            acc_d,
            acc_s,
            d,
            s,
            exceeds: false,
        });
    }

    let mut sigma = moments.covariance();
    let Some(mut chol) = cholesky_repair(&mut sigma, None) else {
        return Ok(invalid_chain());
    };
    let mut last_valid = sigma;

    // Adaptive phase: joint Gaussian proposals; the covariance follows the
    // running-mean recursion
    //   Sigma_{t+1} = ((t-1)/t) Sigma_t
    //               + (S_D/t) (t m_{t-1} m_{t-1}^T - (t+1) m_t m_t^T + eps I)
    // where m_t is the running state mean (warm-up included) and t counts
    // states seen so far.
    for _ in cfg.t0..cfg.mcburn {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let cand_d = d + chol[0] * z1;
        let cand_s = s + chol[1] * z1 + chol[2] * z2;
        let mut accepted = false;
        if cand_d > 0.0 && cand_s > 0.0 {
            let clp = log_full_posterior(cand_d, cand_s, left, right, beta);
            let u: f64 = rng.gen();
            if u < (clp - lp).exp() {
                d = cand_d;
                s = cand_s;
                lp = clp;
                accepted = true;
            }
        }
        let t = moments.n as f64;
        let mp = moments.prev_mean;
        let mc = moments.mean;
        let w = (t - 1.0) / t;
        let f = S_D / t;
        sigma = [
            [
                w * sigma[0][0] + f * (t * mp[0] * mp[0] - (t + 1.0) * mc[0] * mc[0] + COV_EPS),
                w * sigma[0][1] + f * (t * mp[0] * mp[1] - (t + 1.0) * mc[0] * mc[1]),
            ],
            [
                w * sigma[1][0] + f * (t * mp[1] * mp[0] - (t + 1.0) * mc[1] * mc[0]),
                w * sigma[1][1] + f * (t * mp[1] * mp[1] - (t + 1.0) * mc[1] * mc[1] + COV_EPS),
            ],
        ];
        match cholesky_repair(&mut sigma, Some(&last_valid)) {
            Some(l) => {
                chol = l;
                last_valid = sigma;
            }
            None => return Ok(invalid_chain()),
        }
        moments.push(d, s);
        observe(&StepRecord {
            phase: 2,
            acc_d: accepted,
            acc_s: accepted,
            d,
            s,
            exceeds: false,
        });
    }

    // Sampling phase: fixed proposal; count states whose posterior exceeds
    // the null supremum.
    let mut exceed_count = 0usize;
    let mut accepts = 0usize;
    let mut wd = Welford::new();
    let mut ws = Welford::new();
    for _ in 0..cfg.mciter {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let cand_d = d + chol[0] * z1;
        let cand_s = s + chol[1] * z1 + chol[2] * z2;
        let mut accepted = false;
        if cand_d > 0.0 && cand_s > 0.0 {
            let clp = log_full_posterior(cand_d, cand_s, left, right, beta);
            let u: f64 = rng.gen();
            if u < (clp - lp).exp() {
                d = cand_d;
                s = cand_s;
                lp = clp;
                accepted = true;
            }
        }
        let exceeds = lp > log_p0;
        if exceeds {
            exceed_count += 1;
        }
        if accepted {
            accepts += 1;
        }
        wd.push(d);
        ws.push(s);
        observe(&StepRecord {
            phase: 3,
            acc_d: accepted,
            acc_s: accepted,
            d,
            s,
            exceeds,
        });
    }

    Ok(ChainResult {
        ev_h0: 1.0 - exceed_count as f64 / cfg.mciter as f64,
        accept_rate: accepts as f64 / cfg.mciter as f64,
        d_mean: wd.mean,
        d_var: wd.var(),
        s_mean: ws.mean,
        s_var: ws.var(),
        valid: true,
    })
}

/// Potential scale reduction estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Rhat {
    Value(f64),
    /// Within-chain variance is exactly zero (all chains constant); the
    /// statistic is undefined.
    Degenerate,
}

/// Potential scale reduction from per-chain (mean, variance) moments over
/// chains of length n. Computed as
/// `(n-1)/n + (M+1)/(M n) * (B/W)` with `B = n/(M-1) sum (mean_m - mean)^2`
/// and `W` the average within-chain variance, which equals `V_hat / W` for
/// `V_hat = ((n-1)/n) W + ((M+1)/(M n)) B` but stays exact when B vanishes.
fn rhat_from_moments(moments: &[(f64, f64)], n: usize) -> Rhat {
    let m = moments.len() as f64;
    let grand = moments.iter().map(|x| x.0).sum::<f64>() / m;
    let b = moments
        .iter()
        .map(|x| (x.0 - grand) * (x.0 - grand))
        .sum::<f64>()
        * n as f64
        / (m - 1.0);
    let w = moments.iter().map(|x| x.1).sum::<f64>() / m;
    if w == 0.0 {
        return Rhat::Degenerate;
    }
    let nf = n as f64;
    Rhat::Value((nf - 1.0) / nf + (m + 1.0) / (m * nf) * (b / w))
}

/// Gelman-Rubin potential scale reduction over explicit chains.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> Result<Rhat> {
    if chains.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "chains",
            reason: "need at least two chains".into(),
        });
    }
    let n = chains[0].len();
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "chains",
            reason: "chains must contain at least two draws".into(),
        });
    }
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidParameter {
            name: "chains",
            reason: "chains must have equal length".into(),
        });
    }
    let moments: Vec<(f64, f64)> = chains
        .iter()
        .map(|c| {
            let mut w = Welford::new();
            for &x in c {
                w.push(x);
            }
            (w.mean, w.var())
        })
        .collect();
    Ok(rhat_from_moments(&moments, n))
}

/// Aggregated FBST evidence across chains.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidenceResult {
    /// Evidence in favor of d = 1, averaged over valid chains.
    pub ev_h0: f64,
    /// Per-chain evidence, NaN for invalid chains.
    pub per_chain_ev: Vec<f64>,
    /// Per-chain sampling-phase acceptance rates, NaN for invalid chains.
    pub accept_rates: Vec<f64>,
    pub d_mean: f64,
    pub s_mean: f64,
    /// Potential scale reduction of d and s across valid chains; None when
    /// fewer than two chains are valid or the statistic is degenerate.
    pub rhat_d: Option<f64>,
    pub rhat_s: Option<f64>,
    pub valid_chains: usize,
    pub total_chains: usize,
}

/// Runs `cfg.nchains` independent chains in parallel and averages the
/// per-chain evidence over the valid ones. Errors only when every chain
/// fails initialization; individual failures are carried in the result.
pub fn fbst_evidence(
    left: &SegmentStats,
    right: &SegmentStats,
    cfg: &McmcConfig,
) -> Result<EvidenceResult> {
    cfg.validate()?;
    let chains: Vec<ChainResult> = (0..cfg.nchains)
        .into_par_iter()
        .map(|cid| run_chain(left, right, cfg, cid as u64))
        .collect::<Result<Vec<_>>>()?;

    let valid: Vec<&ChainResult> = chains.iter().filter(|c| c.valid).collect();
    if valid.is_empty() {
        return Err(Error::AllChainsInvalid(cfg.nchains));
    }
    let vn = valid.len() as f64;
    let ev_h0 = valid.iter().map(|c| c.ev_h0).sum::<f64>() / vn;
    let d_mean = valid.iter().map(|c| c.d_mean).sum::<f64>() / vn;
    let s_mean = valid.iter().map(|c| c.s_mean).sum::<f64>() / vn;
    let rhat = |pick: fn(&ChainResult) -> (f64, f64)| -> Option<f64> {
        if valid.len() < 2 {
            return None;
        }
        let moments: Vec<(f64, f64)> = valid.iter().map(|c| pick(c)).collect();
        match rhat_from_moments(&moments, cfg.mciter) {
            Rhat::Value(v) => Some(v),
            Rhat::Degenerate => None,
        }
    };
    Ok(EvidenceResult {
        ev_h0,
        per_chain_ev: chains.iter().map(|c| c.ev_h0).collect(),
        accept_rates: chains.iter().map(|c| c.accept_rate).collect(),
        d_mean,
        s_mean,
        rhat_d: rhat(|c| (c.d_mean, c.d_var)),
        rhat_s: rhat(|c| (c.s_mean, c.s_var)),
        valid_chains: valid.len(),
        total_chains: cfg.nchains,
    })
}
