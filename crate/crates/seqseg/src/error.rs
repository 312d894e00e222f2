//! Error type shared across the crate.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty input: signal must contain at least one sample")]
    EmptyInput,

    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },

    #[error("interval [{start}, {end}) is invalid for a signal of length {n}")]
    IndexOutOfRange { start: usize, end: usize, n: usize },

    #[error("cut {t} lies outside the admissible range [{lo}, {hi}] of interval [{start}, {end})")]
    CutOutsideSupport {
        t: usize,
        lo: usize,
        hi: usize,
        start: usize,
        end: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate segment statistics: sum of squares is zero on both sides")]
    DegenerateSegments,

    #[error("all {0} MCMC chains failed initialization; evidence is undefined")]
    AllChainsInvalid(usize),

    #[error("unsupported WAV format: {0}")]
    UnsupportedWav(String),

    #[error("{}: line {line}: {reason}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Wav(#[from] hound::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
