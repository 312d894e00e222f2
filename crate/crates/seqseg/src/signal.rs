//! Signal ingestion and prefix-energy preprocessing.
//!
//! Every downstream computation reduces to sums of squares over intervals, so
//! a [`Signal`] stores a compensated prefix sum of squared samples once and
//! answers `sumsq(start, end)` in O(1). Loaders exist for WAV audio, single
//! column CSV, and raw little-endian `f64` files.

use std::fs;
use std::path::Path;

use chrono::{Duration, NaiveDateTime};

use crate::error::{Error, Result};

/// Sampling rate assumed when a source carries no rate of its own (half of
/// the common hydrophone rate convention used throughout the tooling).
pub const DEFAULT_FS: f64 = 11025.0;

/// A 1-D signal with a precomputed prefix sum of squares.
///
/// Invariants: `cumsq.len() == samples.len() + 1`, `cumsq[0] == 0`, and the
/// prefix is nondecreasing. The prefix is accumulated with Neumaier
/// compensation so interval energies stay accurate to a relative error of
/// about 1e-12 even for tens of millions of samples, then snapped to a
/// fixed-point grid of the total (see [`exact_grid`]) so that interval
/// energies tile exactly: for any split, the two parts sum to the whole
/// without rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    cumsq: Vec<f64>,
    fs: Option<f64>,
    origin: Option<NaiveDateTime>,
    warnings: Vec<String>,
}

impl Signal {
    /// Builds a signal from raw samples, validating finiteness and computing
    /// the compensated energy prefix.
    pub fn from_samples(samples: Vec<f64>, fs: Option<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(f) = fs {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "fs",
                    reason: format!("sampling rate must be positive and finite, got {f}"),
                });
            }
        }
        let mut cumsq = Vec::with_capacity(samples.len() + 1);
        cumsq.push(0.0);
        let mut sum = 0.0_f64;
        let mut comp = 0.0_f64;
        let mut prev = 0.0_f64;
        for (index, &x) in samples.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFiniteSample { index });
            }
            let sq = x * x;
            // Neumaier summation: track the rounding error of each addition.
            let t = sum + sq;
            if sum.abs() >= sq {
                comp += (sum - t) + sq;
            } else {
                comp += (sq - t) + sum;
            }
            sum = t;
            // Store the compensated value, clamped so the prefix never dips.
            let mut value = sum + comp;
            if value < prev {
                value = prev;
            }
            cumsq.push(value);
            prev = value;
        }
        // Snap every prefix onto a fixed-point grid of the total so that
        // interval energies telescope exactly: each prefix becomes m * grid
        // with m an integer below 2^52, hence every difference of prefixes
        // and every re-sum of adjacent intervals is computed without
        // rounding. The snap moves each prefix by at most half a grid step,
        // i.e. about one ulp of the total.
        let grid = exact_grid(*cumsq.last().expect("cumsq is never empty"));
        if grid > 0.0 {
            for value in &mut cumsq {
                *value = (*value / grid).round() * grid;
            }
        }
        Ok(Self {
            samples,
            cumsq,
            fs,
            origin: None,
            warnings: Vec::new(),
        })
    }

    /// Number of samples.
    pub fn n(&self) -> usize {
        self.samples.len()
    }

    /// Raw samples.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Sampling rate in Hz, when known.
    pub fn fs(&self) -> Option<f64> {
        self.fs
    }

    /// Recording start time parsed from the source file name, when available.
    pub fn origin(&self) -> Option<NaiveDateTime> {
        self.origin
    }

    /// Non-fatal notes gathered while loading (channel folding and the like).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn set_origin(&mut self, origin: Option<NaiveDateTime>) {
        self.origin = origin;
    }

    /// Validates `0 <= start < end <= n`.
    pub(crate) fn check_range(&self, start: usize, end: usize) -> Result<()> {
        if start >= end || end > self.samples.len() {
            return Err(Error::IndexOutOfRange {
                start,
                end,
                n: self.samples.len(),
            });
        }
        Ok(())
    }

    /// Sum of squared samples over `[start, end)`.
    pub fn sumsq(&self, start: usize, end: usize) -> Result<f64> {
        self.check_range(start, end)?;
        Ok(self.sumsq_unchecked(start, end))
    }

    /// As [`Signal::sumsq`] without bounds checking; callers guarantee the
    /// range is valid. The monotone prefix makes the result nonnegative.
    #[inline]
    pub(crate) fn sumsq_unchecked(&self, start: usize, end: usize) -> f64 {
        self.cumsq[end] - self.cumsq[start]
    }

    /// Mean squared sample value (signal power) over `[start, end)`.
    pub fn power(&self, start: usize, end: usize) -> Result<f64> {
        self.check_range(start, end)?;
        Ok(self.sumsq_unchecked(start, end) / (end - start) as f64)
    }

    #[cfg(test)]
    pub(crate) fn cumsq(&self) -> &[f64] {
        &self.cumsq
    }
}

/// Power-of-two grid step `2^(floor(log2(total)) - 51)` used to snap the
/// prefix sums. Multiples of this step up to `total` fit in 52 integer bits,
/// which is what makes prefix differences and their re-sums exact. Returns
/// 0.0 (no snapping) for zero or subnormal totals, whose arithmetic is
/// already exact on the subnormal fixed-point grid.
fn exact_grid(total: f64) -> f64 {
    if !total.is_finite() {
        return 0.0;
    }
    let biased_exp = (total.to_bits() >> 52) & 0x7ff;
    if biased_exp <= 51 {
        return 0.0;
    }
    f64::from_bits((biased_exp - 51) << 52)
}

/// Loads a WAV file. Integer PCM of 8/16/24/32 bits is scaled to [-1, 1);
/// 32-bit float is taken as is. Multichannel files keep channel 0 and record
/// a warning. The sampling rate comes from the header and the recording start
/// time from the file name when it matches the timestamped naming scheme.
pub fn load_wav(path: &Path) -> Result<Signal> {
    // Open the file ourselves so I/O failures name the path.
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = hound::WavReader::new(std::io::BufReader::new(file))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::UnsupportedWav("zero channels".into()));
    }

    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .step_by(channels)
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / f64::from(1u32 << (bits - 1));
            reader
                .samples::<i32>()
                .step_by(channels)
                .map(|s| s.map(|v| f64::from(v) * scale))
                .collect::<std::result::Result<_, _>>()?
        }
        (format, bits) => {
            return Err(Error::UnsupportedWav(format!(
                "{bits}-bit {format:?} samples"
            )))
        }
    };

    let mut signal = Signal::from_samples(samples, Some(f64::from(spec.sample_rate)))?;
    if channels > 1 {
        signal
            .warnings
            .push(format!("{channels} channels in input; kept channel 0"));
    }
    signal.origin = path
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(parse_filename_timestamp);
    Ok(signal)
}

/// Writes samples as mono 16-bit PCM, rounding and clamping to the integer
/// range. Values in [-1, 1) survive a round trip within one quantization step.
pub fn write_wav(path: &Path, samples: &[f64], fs: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: fs,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &x in samples {
        let q = (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q)?;
    }
    writer.finalize()?;
    Ok(())
}

/// Loads a single-column CSV of floating point samples. Blank lines are
/// skipped; anything unparseable reports the file and 1-based line number.
pub fn load_csv(path: &Path) -> Result<Signal> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.trim();
        if field.is_empty() {
            continue;
        }
        let value: f64 = field.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            reason: format!("expected a number, got {field:?}"),
        })?;
        samples.push(value);
    }
    Signal::from_samples(samples, None)
}

/// Loads raw little-endian `f64` samples.
pub fn load_f64le(path: &Path) -> Result<Signal> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            reason: format!("file length {} is not a multiple of 8", bytes.len()),
        });
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Signal::from_samples(samples, None)
}

/// Loads a signal by file extension: `wav` for audio, `csv`/`txt` for one
/// column of text, anything else as raw little-endian `f64`.
pub fn load_signal(path: &Path) -> Result<Signal> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("wav") => load_wav(path),
        Some("csv") | Some("txt") => load_csv(path),
        _ => load_f64le(path),
    }
}

/// Parses the hydrophone archive naming scheme `YYYY.MM.DD_HH.MM.SS.wav`
/// into a timestamp. Returns `None` for names in any other shape.
pub fn parse_filename_timestamp(name: &str) -> Option<NaiveDateTime> {
    let stem = name
        .strip_suffix(".wav")
        .or_else(|| name.strip_suffix(".WAV"))?;
    NaiveDateTime::parse_from_str(stem, "%Y.%m.%d_%H.%M.%S").ok()
}

/// Recording context used to express sample indices as wall-clock times.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingMeta {
    pub start_time: NaiveDateTime,
    pub fs: f64,
}

impl RecordingMeta {
    /// Wall-clock time of a sample index, at nanosecond resolution.
    pub fn index_to_time(&self, index: usize) -> NaiveDateTime {
        let nanos = (index as f64 / self.fs * 1e9).round() as i64;
        self.start_time + Duration::nanoseconds(nanos)
    }
}
