//! Time-surface frame export for downstream CV pipelines: fixed-interval or
//! explicit-instant windowing, bilinear resizing, quantization, and index
//! files.
//!
//! Resizing convention, pinned by fixtures: integer-ratio minification takes
//! exact block means (a 2x downscale averages each 2x2 block); every other
//! size change is edge-aligned bilinear point sampling (corner pixels map to
//! corners). 8-bit frames go out as binary PGM, float frames as TSF1 dumps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::array_sim::{AnalogArray, ArrayError};
use crate::cell_model::ModelError;
use crate::digital_surface::{PlaneSel, SaeMap, SurfaceError};
use crate::events::{EventRecord, Polarity, StreamHeader};
use crate::formats::{self, FormatError};
use crate::surface::Surface;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Array(#[from] ArrayError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Windowing {
    /// Frame at every multiple of the window; trailing partial windows are
    /// dropped unless `emit_partial` is set.
    FixedUs(u64),
    /// Frame at each listed instant (reconstruction-style alignment).
    Explicit(Vec<u64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channels {
    /// One frame per window.
    Merged,
    /// One frame per polarity per window.
    Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantization {
    /// TSF1 float dumps.
    Float32,
    /// PGM, `round(255 * V / V_reset)`.
    U8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSpec {
    pub windowing: Windowing,
    pub out_width: usize,
    pub out_height: usize,
    pub channels: Channels,
    pub quantization: Quantization,
    pub emit_partial: bool,
}

impl FrameSpec {
    /// Classification-style export: 50 ms windows, 224x224, 8-bit, merged.
    pub fn classification() -> Self {
        Self {
            windowing: Windowing::FixedUs(50_000),
            out_width: 224,
            out_height: 224,
            channels: Channels::Merged,
            quantization: Quantization::U8,
            emit_partial: false,
        }
    }

    /// Reconstruction-style export: explicit instants, 256x256 grayscale.
    pub fn reconstruction(instants: Vec<u64>) -> Self {
        Self {
            windowing: Windowing::Explicit(instants),
            out_width: 256,
            out_height: 256,
            channels: Channels::Merged,
            quantization: Quantization::U8,
            emit_partial: false,
        }
    }

    pub fn validate(&self) -> Result<(), FrameError> {
        if self.out_width == 0 || self.out_height == 0 {
            return Err(FrameError::Config("output dimensions must be >= 1".into()));
        }
        if let Windowing::FixedUs(0) = self.windowing {
            return Err(FrameError::Config("window must be > 0".into()));
        }
        Ok(())
    }

    /// Frame instants for a stream of the given duration.
    pub fn frame_times(&self, duration_us: u64) -> Vec<u64> {
        match &self.windowing {
            Windowing::Explicit(ts) => {
                let mut ts = ts.clone();
                ts.sort_unstable();
                ts
            }
            Windowing::FixedUs(w) => {
                let mut ts: Vec<u64> = (1..=duration_us / w).map(|k| k * w).collect();
                if self.emit_partial && !duration_us.is_multiple_of(*w) {
                    ts.push(duration_us);
                }
                ts
            }
        }
    }
}

/// Surface provider driven by the event replay: the digital SAE reference or
/// the analog array.
pub enum SurfaceSource {
    Digital { map: SaeMap, tau_us: f64 },
    Analog(AnalogArray),
}

impl SurfaceSource {
    pub fn write(&mut self, ev: &EventRecord) -> Result<(), FrameError> {
        match self {
            SurfaceSource::Digital { map, .. } => map.sae_write(ev)?,
            SurfaceSource::Analog(array) => array.write_event(ev)?,
        }
        Ok(())
    }

    /// Surface normalized to `[0, 1]` (voltages divide by `V_reset`).
    pub fn read(&self, t: u64, plane: Option<Polarity>) -> Result<Surface, FrameError> {
        match self {
            SurfaceSource::Digital { map, tau_us } => {
                let sel = match plane {
                    None => PlaneSel::Merged,
                    Some(p) => PlaneSel::Plane(p),
                };
                Ok(map.global_ts(t, *tau_us, sel)?)
            }
            SurfaceSource::Analog(array) => {
                let s = array.read_surface(t, plane)?;
                let v_reset = array.v_reset();
                Ok(Surface::from_data(
                    s.width(),
                    s.height(),
                    s.iter().map(|v| v / v_reset).collect(),
                ))
            }
        }
    }
}

/// One exported frame file.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameIndexEntry {
    pub frame_id: u64,
    pub t_us: u64,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Default)]
pub struct FrameIndex {
    pub entries: Vec<FrameIndexEntry>,
    pub index_path: PathBuf,
}

/// Replays the stream into the source, reads the surface at every frame
/// instant, resizes, quantizes, and writes one file per frame (two in split
/// mode) plus an index CSV `frame_id,t_us,path`. Deterministic.
pub fn export_frames(
    events: &[EventRecord],
    header: &StreamHeader,
    source: &mut SurfaceSource,
    spec: &FrameSpec,
    out_dir: &Path,
) -> Result<FrameIndex, FrameError> {
    spec.validate()?;
    let io_err = |path: &Path| {
        let p = path.display().to_string();
        move |source: std::io::Error| FrameError::Io { path: p.clone(), source }
    };
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let frame_times = spec.frame_times(header.duration_us.max(events.last().map_or(0, |e| e.t_us)));
    let mut index = FrameIndex::default();
    let mut ev_iter = events.iter().peekable();
    for (frame_id, &t_f) in frame_times.iter().enumerate() {
        while let Some(ev) = ev_iter.peek() {
            if ev.t_us <= t_f {
                source.write(ev)?;
                ev_iter.next();
            } else {
                break;
            }
        }
        let planes: &[(Option<Polarity>, &str)] = match spec.channels {
            Channels::Merged => &[(None, "")],
            Channels::Split => &[(Some(Polarity::Off), "_off"), (Some(Polarity::On), "_on")],
        };
        for (plane, suffix) in planes {
            let surface = source.read(t_f, *plane)?;
            let resized = resize_bilinear(&surface, spec.out_width, spec.out_height)?;
            let path = match spec.quantization {
                Quantization::U8 => {
                    let path = out_dir.join(format!("frame_{frame_id:06}{suffix}.pgm"));
                    let pixels = quantize_u8(&resized);
                    let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
                    formats::write_pgm8(&mut w, resized.width(), resized.height(), &pixels)?;
                    w.flush().map_err(io_err(&path))?;
                    path
                }
                Quantization::Float32 => {
                    let path = out_dir.join(format!("frame_{frame_id:06}{suffix}.tsf"));
                    let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
                    formats::write_tsf1(&mut w, &resized)?;
                    w.flush().map_err(io_err(&path))?;
                    path
                }
            };
            index.entries.push(FrameIndexEntry { frame_id: frame_id as u64, t_us: t_f, path });
        }
    }

    let index_path = out_dir.join("index.csv");
    let mut w = BufWriter::new(File::create(&index_path).map_err(io_err(&index_path))?);
    writeln!(w, "frame_id,t_us,path").map_err(io_err(&index_path))?;
    for e in &index.entries {
        writeln!(w, "{},{},{}", e.frame_id, e.t_us, e.path.display()).map_err(io_err(&index_path))?;
    }
    w.flush().map_err(io_err(&index_path))?;
    index.index_path = index_path;
    Ok(index)
}

/// `round(255 * v)` of a `[0,1]` surface.
pub fn quantize_u8(surface: &Surface) -> Vec<u8> {
    surface.iter().map(|v| (255.0 * v.clamp(0.0, 1.0)).round() as u8).collect()
}

/// Resizes a surface. Identity sizes copy; integer-ratio minification takes
/// block means; anything else is edge-aligned bilinear (corners map to
/// corners).
pub fn resize_bilinear(surface: &Surface, out_w: usize, out_h: usize) -> Result<Surface, FrameError> {
    if out_w == 0 || out_h == 0 {
        return Err(FrameError::Config("output dimensions must be >= 1".into()));
    }
    let (in_w, in_h) = (surface.width(), surface.height());
    if (in_w, in_h) == (out_w, out_h) {
        return Ok(surface.clone());
    }
    if in_w % out_w == 0 && in_h % out_h == 0 {
        return Ok(block_mean(surface, out_w, out_h));
    }
    let mut out = Surface::new(out_w, out_h);
    let src_x = edge_aligned_coords(in_w, out_w);
    let src_y = edge_aligned_coords(in_h, out_h);
    for (j, &(y0, y1, fy)) in src_y.iter().enumerate() {
        for (i, &(x0, x1, fx)) in src_x.iter().enumerate() {
            let v00 = surface.get(x0, y0);
            let v10 = surface.get(x1, y0);
            let v01 = surface.get(x0, y1);
            let v11 = surface.get(x1, y1);
            let top = v00 + (v10 - v00) * fx;
            let bottom = v01 + (v11 - v01) * fx;
            out.set(i, j, top + (bottom - top) * fy);
        }
    }
    Ok(out)
}

fn edge_aligned_coords(in_dim: usize, out_dim: usize) -> Vec<(usize, usize, f64)> {
    (0..out_dim)
        .map(|i| {
            let pos = if out_dim == 1 {
                0.0
            } else {
                i as f64 * (in_dim - 1) as f64 / (out_dim - 1) as f64
            };
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(in_dim - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

fn block_mean(surface: &Surface, out_w: usize, out_h: usize) -> Surface {
    let bx = surface.width() / out_w;
    let by = surface.height() / out_h;
    let inv = 1.0 / (bx * by) as f64;
    let mut out = Surface::new(out_w, out_h);
    for j in 0..out_h {
        for i in 0..out_w {
            let mut sum = 0.0;
            for y in j * by..(j + 1) * by {
                for x in i * bx..(i + 1) * bx {
                    sum += surface.get(x, y);
                }
            }
            out.set(i, j, sum * inv);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{Label, PolarityMode};
    use tempfile::tempdir;

    fn surface(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> Surface {
        let mut s = Surface::new(w, h);
        for y in 0..h {
            for x in 0..w {
                s.set(x, y, f(x, y));
            }
        }
        s
    }

    #[test]
    fn identity_resize_is_bit_identical() {
        let s = surface(7, 5, |x, y| (x * y) as f64 * 0.01);
        let r = resize_bilinear(&s, 7, 5).unwrap();
        assert_eq!(r, s);
    }

    #[test]
    fn constant_surface_stays_constant() {
        let s = surface(4, 4, |_, _| 0.37);
        for (w, h) in [(9, 9), (2, 2), (31, 7)] {
            let r = resize_bilinear(&s, w, h).unwrap();
            assert!(r.iter().all(|v| (v - 0.37).abs() < 1e-12), "{w}x{h}");
        }
    }

    #[test]
    fn upsample_2x2_to_4x4_interpolates_columns() {
        // columns [0,1] upsampled to 4: 0, 1/3, 2/3, 1 under edge alignment
        let s = surface(2, 2, |x, _| x as f64);
        let r = resize_bilinear(&s, 4, 4).unwrap();
        for y in 0..4 {
            for (x, expect) in [(0usize, 0.0), (1, 1.0 / 3.0), (2, 2.0 / 3.0), (3, 1.0)] {
                assert!((r.get(x, y) - expect).abs() < 1e-12, "({x},{y})");
            }
        }
    }

    #[test]
    fn exact_downscale_averages_blocks() {
        // checkerboard 224 -> 112: every 2x2 block averages to 0.5
        let s = surface(224, 224, |x, y| ((x + y) % 2) as f64);
        let r = resize_bilinear(&s, 112, 112).unwrap();
        assert!(r.iter().all(|v| (v - 0.5).abs() < 1e-6));
        // oracle on a non-uniform surface
        let s = surface(8, 8, |x, y| (x * 8 + y) as f64);
        let r = resize_bilinear(&s, 4, 4).unwrap();
        for j in 0..4 {
            for i in 0..4 {
                let mut sum = 0.0;
                for dy in 0..2 {
                    for dx in 0..2 {
                        sum += s.get(2 * i + dx, 2 * j + dy);
                    }
                }
                assert!((r.get(i, j) - sum / 4.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_output_dims_rejected() {
        let s = surface(4, 4, |_, _| 0.0);
        assert!(resize_bilinear(&s, 0, 4).is_err());
    }

    #[test]
    fn u8_quantization_round_trips_within_half_lsb() {
        let s = surface(16, 16, |x, y| (x as f64 * 16.0 + y as f64) / 255.0);
        let q = quantize_u8(&s);
        for (v, q) in s.iter().zip(q) {
            let back = q as f64 / 255.0;
            assert!((v - back).abs() <= 1.0 / 510.0 + 1e-12);
        }
    }

    fn edge_stream() -> (StreamHeader, Vec<EventRecord>) {
        let events: Vec<EventRecord> = (0..120)
            .map(|i| EventRecord::labeled(i * 1_000, (i % 16) as u16, (i / 16 % 16) as u16, Polarity::On, Label::Signal))
            .collect();
        let header = StreamHeader { duration_us: 120_000, has_labels: true, ..StreamHeader::new(16, 16, 0) };
        (header, events)
    }

    #[test]
    fn windowing_drops_trailing_partial() {
        let spec = FrameSpec { windowing: Windowing::FixedUs(50_000), ..FrameSpec::classification() };
        assert_eq!(spec.frame_times(120_000), vec![50_000, 100_000]);
        let spec = FrameSpec { emit_partial: true, ..spec };
        assert_eq!(spec.frame_times(120_000), vec![50_000, 100_000, 120_000]);
    }

    #[test]
    fn export_writes_frames_and_index() {
        let dir = tempdir().unwrap();
        let (header, events) = edge_stream();
        let spec = FrameSpec {
            windowing: Windowing::FixedUs(50_000),
            out_width: 32,
            out_height: 32,
            channels: Channels::Merged,
            quantization: Quantization::U8,
            emit_partial: false,
        };
        let mut source = SurfaceSource::Digital { map: SaeMap::new(16, 16, PolarityMode::Merged), tau_us: 10_000.0 };
        let index = export_frames(&events, &header, &mut source, &spec, dir.path()).unwrap();
        assert_eq!(index.entries.len(), 2);
        assert_eq!(index.entries[0].t_us, 50_000);
        for e in &index.entries {
            let bytes = std::fs::read(&e.path).unwrap();
            let (w, h, px) = formats::read_pgm8(&mut bytes.as_slice()).unwrap();
            assert_eq!((w, h), (32, 32));
            assert_eq!(px.len(), 32 * 32);
        }
        let idx_text = std::fs::read_to_string(&index.index_path).unwrap();
        assert!(idx_text.starts_with("frame_id,t_us,path\n"));
        assert_eq!(idx_text.lines().count(), 3);
    }

    #[test]
    fn reconstruction_mode_emits_one_frame_per_instant() {
        let dir = tempdir().unwrap();
        let (header, events) = edge_stream();
        let spec = FrameSpec {
            quantization: Quantization::Float32,
            out_width: 16,
            out_height: 16,
            ..FrameSpec::reconstruction(vec![30_000, 60_000, 90_000])
        };
        let mut source = SurfaceSource::Digital { map: SaeMap::new(16, 16, PolarityMode::Merged), tau_us: 10_000.0 };
        let index = export_frames(&events, &header, &mut source, &spec, dir.path()).unwrap();
        assert_eq!(index.entries.len(), 3);
        let bytes = std::fs::read(&index.entries[1].path).unwrap();
        let s = formats::read_tsf1(&mut bytes.as_slice()).unwrap();
        assert!(s.max() <= 1.0 && s.min() >= 0.0);
        assert!(s.max() > 0.0, "window with events is non-empty");
    }

    #[test]
    fn empty_window_still_emits_frame() {
        let dir = tempdir().unwrap();
        let header = StreamHeader { duration_us: 60_000, ..StreamHeader::new(8, 8, 0) };
        let spec = FrameSpec {
            windowing: Windowing::FixedUs(50_000),
            out_width: 8,
            out_height: 8,
            channels: Channels::Merged,
            quantization: Quantization::U8,
            emit_partial: false,
        };
        let mut source = SurfaceSource::Digital { map: SaeMap::new(8, 8, PolarityMode::Merged), tau_us: 10_000.0 };
        let index = export_frames(&[], &header, &mut source, &spec, dir.path()).unwrap();
        assert_eq!(index.entries.len(), 1);
        let bytes = std::fs::read(&index.entries[0].path).unwrap();
        let (_, _, px) = formats::read_pgm8(&mut bytes.as_slice()).unwrap();
        assert!(px.iter().all(|&p| p == 0), "all-zero frame");
    }

    #[test]
    fn split_channels_write_two_files_per_frame() {
        let dir = tempdir().unwrap();
        let events = vec![
            EventRecord::new(1_000, 2, 2, Polarity::On),
            EventRecord::new(2_000, 5, 5, Polarity::Off),
        ];
        let header = StreamHeader { duration_us: 50_000, ..StreamHeader::new(8, 8, 0) };
        let spec = FrameSpec {
            windowing: Windowing::FixedUs(50_000),
            out_width: 8,
            out_height: 8,
            channels: Channels::Split,
            quantization: Quantization::U8,
            emit_partial: false,
        };
        let mut source = SurfaceSource::Digital { map: SaeMap::new(8, 8, PolarityMode::Split), tau_us: 10_000.0 };
        let index = export_frames(&events, &header, &mut source, &spec, dir.path()).unwrap();
        assert_eq!(index.entries.len(), 2);
        assert!(index.entries[0].path.to_string_lossy().contains("_off"));
        assert!(index.entries[1].path.to_string_lossy().contains("_on"));
    }
}
