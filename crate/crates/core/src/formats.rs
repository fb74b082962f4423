//! On-disk formats: TSF1 raw float surfaces, binary PGM images, key-value files.
//!
//! TSF1 is this project's surface dump: an ASCII header line `TSF1 <W> <H>\n`
//! followed by W*H little-endian 32-bit floats in row-major order. PGM is the
//! standard binary (P5) graymap with maxval 255. Key-value files are plain
//! `key=value` lines with `#` comments, used for calibration data, cost-model
//! constant overrides and CLI config echoes.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use thiserror::Error;

use crate::surface::Surface;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad header: {0}")]
    Header(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("truncated payload: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
}

// ---------------------------------------------------------------------------
// TSF1

pub fn write_tsf1<W: Write>(w: &mut W, surface: &Surface) -> Result<(), FormatError> {
    writeln!(w, "TSF1 {} {}", surface.width(), surface.height())?;
    for v in surface.iter() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tsf1<R: Read>(r: &mut R) -> Result<Surface, FormatError> {
    let mut header = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte)?;
        if byte[0] == b'\n' {
            break;
        }
        header.push(byte[0]);
        if header.len() > 64 {
            return Err(FormatError::Header("header line too long".into()));
        }
    }
    let header = String::from_utf8(header).map_err(|_| FormatError::Header("non-utf8 header".into()))?;
    let mut parts = header.split_ascii_whitespace();
    if parts.next() != Some("TSF1") {
        return Err(FormatError::Header(format!("bad magic in {header:?}")));
    }
    let w: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| FormatError::Header("missing width".into()))?;
    let h: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| FormatError::Header("missing height".into()))?;
    let mut raw = vec![0u8; w * h * 4];
    read_fully(r, &mut raw)?;
    let data = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(Surface::from_data(w, h, data))
}

// ---------------------------------------------------------------------------
// PGM (P5, maxval 255)

pub fn write_pgm8<W: Write>(w: &mut W, width: usize, height: usize, pixels: &[u8]) -> Result<(), FormatError> {
    assert_eq!(pixels.len(), width * height, "pgm pixel count mismatch");
    write!(w, "P5\n{} {}\n255\n", width, height)?;
    w.write_all(pixels)?;
    Ok(())
}

pub fn read_pgm8<R: Read>(r: &mut R) -> Result<(usize, usize, Vec<u8>), FormatError> {
    let mut all = Vec::new();
    r.read_to_end(&mut all)?;
    // Header: three whitespace-separated tokens after the magic.
    if !all.starts_with(b"P5") {
        return Err(FormatError::Header("not a P5 pgm".into()));
    }
    let mut pos = 2usize;
    let mut tokens = Vec::new();
    while tokens.len() < 3 {
        while pos < all.len() && all[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < all.len() && !all[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(FormatError::Header("truncated pgm header".into()));
        }
        tokens.push(std::str::from_utf8(&all[start..pos]).map_err(|_| FormatError::Header("non-utf8".into()))?.to_string());
    }
    pos += 1; // single whitespace after maxval
    let w: usize = tokens[0].parse().map_err(|_| FormatError::Header("bad width".into()))?;
    let h: usize = tokens[1].parse().map_err(|_| FormatError::Header("bad height".into()))?;
    if tokens[2] != "255" {
        return Err(FormatError::Header(format!("unsupported maxval {}", tokens[2])));
    }
    let need = w * h;
    if all.len() < pos + need {
        return Err(FormatError::Truncated { expected: need, got: all.len().saturating_sub(pos) });
    }
    Ok((w, h, all[pos..pos + need].to_vec()))
}

// ---------------------------------------------------------------------------
// Key-value files

pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, FormatError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| FormatError::Parse { line: i + 1, msg: format!("expected key=value, got {line:?}") })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Writes keys in sorted order, one `key=value` per line.
pub fn write_kv<W: Write>(w: &mut W, map: &BTreeMap<String, String>) -> Result<(), FormatError> {
    for (k, v) in map {
        writeln!(w, "{k}={v}")?;
    }
    Ok(())
}

pub fn kv_f64(map: &BTreeMap<String, String>, key: &str) -> Result<f64, FormatError> {
    let s = map
        .get(key)
        .ok_or_else(|| FormatError::Header(format!("missing key {key:?}")))?;
    s.parse()
        .map_err(|_| FormatError::Header(format!("key {key:?}: bad float {s:?}")))
}

fn read_fully<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), FormatError> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..])? {
            0 => return Err(FormatError::Truncated { expected: buf.len(), got }),
            n => got += n,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsf1_round_trip() {
        let mut s = Surface::new(3, 2);
        s.set(0, 0, 0.25);
        s.set(2, 1, 1.0);
        let mut buf = Vec::new();
        write_tsf1(&mut buf, &s).unwrap();
        assert!(buf.starts_with(b"TSF1 3 2\n"));
        assert_eq!(buf.len(), 9 + 6 * 4);
        let back = read_tsf1(&mut buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn pgm_round_trip() {
        let px: Vec<u8> = (0..12).collect();
        let mut buf = Vec::new();
        write_pgm8(&mut buf, 4, 3, &px).unwrap();
        let (w, h, back) = read_pgm8(&mut buf.as_slice()).unwrap();
        assert_eq!((w, h), (4, 3));
        assert_eq!(back, px);
    }

    #[test]
    fn kv_parse_and_write() {
        let text = "# comment\n a1 = 0.5 \nlabel=20fF\n\n";
        let map = parse_kv(text).unwrap();
        assert_eq!(map.get("a1").unwrap(), "0.5");
        assert_eq!(kv_f64(&map, "a1").unwrap(), 0.5);
        assert!(kv_f64(&map, "nope").is_err());
        let mut out = Vec::new();
        write_kv(&mut out, &map).unwrap();
        assert_eq!(std::str::from_utf8(&out).unwrap(), "a1=0.5\nlabel=20fF\n");
    }

    #[test]
    fn kv_rejects_garbage() {
        let err = parse_kv("a1 0.5").unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 1, .. }));
    }
}
