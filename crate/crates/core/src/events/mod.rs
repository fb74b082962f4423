//! Event data model, stream I/O, synthetic stream generation and noise injection.
//!
//! An event stream is a sequence of [`EventRecord`]s sorted by timestamp
//! (ties keep input order) together with a [`StreamHeader`] declaring the
//! sensor resolution. Timestamps are unsigned 64-bit microseconds; finite
//! counter widths are emulated only in the digital surface, never here.

mod io;
mod synth;

pub use io::{read_stream, write_stream, ReadOptions, StreamFormat};
pub use synth::{generate_synthetic, EdgeOrientation, SceneConfig};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EventError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at {context}: {msg}")]
    Parse { context: String, msg: String },
    #[error("record {index}: coordinate ({x},{y}) out of bounds for {width}x{height}")]
    OutOfBounds { index: usize, x: u16, y: u16, width: u16, height: u16 },
    #[error("record {index}: timestamp {t} precedes previous timestamp {prev} (pass allow_unsorted to sort)")]
    Unsorted { index: usize, t: u64, prev: u64 },
    #[error("config error: {0}")]
    Config(String),
}

/// Event polarity: OFF = brightness decrease, ON = increase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Polarity {
    Off = 0,
    On = 1,
}

impl Polarity {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Polarity::Off),
            1 => Some(Polarity::On),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }
}

/// Ground-truth label for evaluation streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Label {
    Noise = 0,
    Signal = 1,
}

impl Label {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Noise),
            1 => Some(Label::Signal),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }
}

/// One DVS event: position, microsecond timestamp, polarity, optional label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventRecord {
    /// Timestamp in microseconds, monotone non-decreasing within a stream.
    pub t_us: u64,
    /// Pixel column, `0..width`.
    pub x: u16,
    /// Pixel row, `0..height`.
    pub y: u16,
    pub p: Polarity,
    pub label: Option<Label>,
}

impl EventRecord {
    pub fn new(t_us: u64, x: u16, y: u16, p: Polarity) -> Self {
        Self { t_us, x, y, p, label: None }
    }

    pub fn labeled(t_us: u64, x: u16, y: u16, p: Polarity, label: Label) -> Self {
        Self { t_us, x, y, p, label: Some(label) }
    }
}

/// Whether per-polarity state is kept separately or merged into one plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PolarityMode {
    #[default]
    Merged,
    Split,
}

/// Stream metadata. The binary and CSV formats carry only resolution and the
/// label flag; `duration_us` is inferred from the last record on read and
/// `polarity_mode` describes downstream processing intent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamHeader {
    pub width: u16,
    pub height: u16,
    pub duration_us: u64,
    pub polarity_mode: PolarityMode,
    pub has_labels: bool,
}

impl StreamHeader {
    pub fn new(width: u16, height: u16, duration_us: u64) -> Self {
        Self { width, height, duration_us, polarity_mode: PolarityMode::Merged, has_labels: false }
    }

    pub fn with_labels(mut self, has_labels: bool) -> Self {
        self.has_labels = has_labels;
        self
    }

    pub fn pixel_count(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn validate(&self) -> Result<(), EventError> {
        if self.width == 0 || self.height == 0 {
            return Err(EventError::Config(format!("resolution {}x{} invalid", self.width, self.height)));
        }
        Ok(())
    }
}

/// Checks bounds and ordering for a full stream. With `allow_unsorted` the
/// stream is stably sorted by timestamp instead of failing.
pub fn validate_stream(header: &StreamHeader, events: &mut [EventRecord], allow_unsorted: bool) -> Result<(), EventError> {
    header.validate()?;
    for (i, ev) in events.iter().enumerate() {
        if ev.x >= header.width || ev.y >= header.height {
            return Err(EventError::OutOfBounds { index: i, x: ev.x, y: ev.y, width: header.width, height: header.height });
        }
    }
    let mut prev = 0u64;
    for (i, ev) in events.iter().enumerate() {
        if ev.t_us < prev {
            if allow_unsorted {
                events.sort_by_key(|e| e.t_us);
                return Ok(());
            }
            return Err(EventError::Unsorted { index: i, t: ev.t_us, prev });
        }
        prev = ev.t_us;
    }
    Ok(())
}

/// Merges a homogeneous Poisson noise process (`rate_hz_per_pixel` per pixel,
/// uniform position and polarity) into the stream. Injected events are labeled
/// noise; original events keep their label, defaulting to signal when absent.
/// The output is re-sorted by timestamp with original order kept among ties.
pub fn inject_noise(
    events: &[EventRecord],
    header: &StreamHeader,
    rate_hz_per_pixel: f64,
    seed: u64,
) -> Result<(StreamHeader, Vec<EventRecord>), EventError> {
    header.validate()?;
    if rate_hz_per_pixel.is_nan() || rate_hz_per_pixel < 0.0 {
        return Err(EventError::Config(format!("noise rate {rate_hz_per_pixel} must be >= 0")));
    }
    let mut out: Vec<EventRecord> = events
        .iter()
        .map(|e| EventRecord { label: Some(e.label.unwrap_or(Label::Signal)), ..*e })
        .collect();
    if rate_hz_per_pixel > 0.0 && header.duration_us > 0 {
        let duration_s = header.duration_us as f64 * 1e-6;
        let mean = rate_hz_per_pixel * header.pixel_count() as f64 * duration_s;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = Poisson::new(mean)
            .map_err(|e| EventError::Config(format!("noise mean invalid: {e}")))?
            .sample(&mut rng) as u64;
        let mut noise = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let t_us = rng.random_range(0..header.duration_us);
            let x = rng.random_range(0..header.width);
            let y = rng.random_range(0..header.height);
            let p = if rng.random_bool(0.5) { Polarity::On } else { Polarity::Off };
            noise.push(EventRecord::labeled(t_us, x, y, p, Label::Noise));
        }
        out.extend(noise);
    }
    out.sort_by_key(|e| e.t_us);
    let header = StreamHeader { has_labels: true, ..header.clone() };
    Ok((header, out))
}
