//! Event stream file I/O.
//!
//! CSV: optional comment header `# w=<W> h=<H> labels=<0|1>`, then one event
//! per line `t_us,x,y,p[,label]`, ASCII decimal, LF-terminated. Without the
//! header line the resolution is inferred from the coordinate maxima.
//!
//! Binary (`EVS1`): 16-byte little-endian header (magic `EVS1`, u16 width,
//! u16 height, u8 flags with bit0 = has_labels, 7 reserved zero bytes),
//! followed by fixed 16-byte records: u64 t_us, u16 x, u16 y, u8 p, u8 label,
//! 2 reserved zero bytes. Neither format stores the stream duration; readers
//! set it to the last record's timestamp.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{validate_stream, EventError, EventRecord, Label, Polarity, StreamHeader};

const BINARY_MAGIC: &[u8; 4] = b"EVS1";
const HEADER_LEN: usize = 16;
const RECORD_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamFormat {
    Csv,
    Binary,
}

impl StreamFormat {
    /// Picks the format from a file extension: `.csv` is CSV, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => StreamFormat::Csv,
            _ => StreamFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReadOptions {
    /// Stable-sort by timestamp instead of failing on non-monotone input.
    pub allow_unsorted: bool,
}

pub fn read_stream(path: &Path, format: StreamFormat, opts: ReadOptions) -> Result<(StreamHeader, Vec<EventRecord>), EventError> {
    let file = File::open(path).map_err(|source| EventError::Io { path: path.display().to_string(), source })?;
    let ctx = path.display().to_string();
    let (mut header, mut events) = match format {
        StreamFormat::Csv => read_csv(BufReader::new(file), &ctx)?,
        StreamFormat::Binary => read_binary(BufReader::new(file), &ctx)?,
    };
    validate_stream(&header, &mut events, opts.allow_unsorted)?;
    header.duration_us = events.last().map_or(0, |e| e.t_us);
    Ok((header, events))
}

pub fn write_stream(header: &StreamHeader, events: &[EventRecord], path: &Path, format: StreamFormat) -> Result<(), EventError> {
    header.validate()?;
    if header.has_labels {
        if let Some(i) = events.iter().position(|e| e.label.is_none()) {
            return Err(EventError::Config(format!("header declares labels but record {i} has none")));
        }
    }
    let file = File::create(path).map_err(|source| EventError::Io { path: path.display().to_string(), source })?;
    let mut w = BufWriter::new(file);
    let res = match format {
        StreamFormat::Csv => write_csv(&mut w, header, events),
        StreamFormat::Binary => write_binary(&mut w, header, events),
    };
    res.and_then(|_| w.flush())
        .map_err(|source| EventError::Io { path: path.display().to_string(), source })
}

fn write_csv<W: Write>(w: &mut W, header: &StreamHeader, events: &[EventRecord]) -> std::io::Result<()> {
    writeln!(w, "# w={} h={} labels={}", header.width, header.height, header.has_labels as u8)?;
    for ev in events {
        if header.has_labels {
            writeln!(w, "{},{},{},{},{}", ev.t_us, ev.x, ev.y, ev.p.as_u8(), ev.label.unwrap().as_u8())?;
        } else {
            writeln!(w, "{},{},{},{}", ev.t_us, ev.x, ev.y, ev.p.as_u8())?;
        }
    }
    Ok(())
}

fn read_csv<R: BufRead>(r: R, ctx: &str) -> Result<(StreamHeader, Vec<EventRecord>), EventError> {
    let mut events = Vec::new();
    let mut declared: Option<(u16, u16, bool)> = None;
    let mut saw_labels = false;
    // Label arity must be uniform: fixed by the header when present,
    // otherwise by the first data line.
    let mut expect_fields: Option<usize> = None;
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|source| EventError::Io { path: ctx.to_string(), source })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if declared.is_none() && events.is_empty() {
                declared = parse_csv_header(line);
                if let Some((_, _, labels)) = declared {
                    expect_fields = Some(if labels { 5 } else { 4 });
                }
            }
            continue;
        }
        let parse = |msg: String| EventError::Parse { context: format!("{ctx}:{}", lineno + 1), msg };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 && fields.len() != 5 {
            return Err(parse(format!("expected 4 or 5 fields, got {}", fields.len())));
        }
        match expect_fields {
            None => expect_fields = Some(fields.len()),
            Some(n) if n != fields.len() => {
                return Err(parse(format!("expected {n} fields (stream label arity), got {}", fields.len())))
            }
            Some(_) => {}
        }
        let t_us: u64 = fields[0].trim().parse().map_err(|_| parse(format!("bad timestamp {:?}", fields[0])))?;
        let x: u16 = fields[1].trim().parse().map_err(|_| parse(format!("bad x {:?}", fields[1])))?;
        let y: u16 = fields[2].trim().parse().map_err(|_| parse(format!("bad y {:?}", fields[2])))?;
        let p_raw: u8 = fields[3].trim().parse().map_err(|_| parse(format!("bad polarity {:?}", fields[3])))?;
        let p = Polarity::from_u8(p_raw).ok_or_else(|| parse(format!("polarity {p_raw} not in {{0,1}}")))?;
        let label = if fields.len() == 5 {
            saw_labels = true;
            let raw: u8 = fields[4].trim().parse().map_err(|_| parse(format!("bad label {:?}", fields[4])))?;
            Some(Label::from_u8(raw).ok_or_else(|| parse(format!("label {raw} not in {{0,1}}")))?)
        } else {
            None
        };
        events.push(EventRecord { t_us, x, y, p, label });
    }
    let (width, height, has_labels) = match declared {
        Some((w, h, l)) => (w, h, l),
        None => {
            let w = events.iter().map(|e| e.x).max().map_or(1, |m| m + 1);
            let h = events.iter().map(|e| e.y).max().map_or(1, |m| m + 1);
            (w, h, saw_labels)
        }
    };
    let header = StreamHeader::new(width, height, 0).with_labels(has_labels);
    Ok((header, events))
}

fn parse_csv_header(line: &str) -> Option<(u16, u16, bool)> {
    let mut w = None;
    let mut h = None;
    let mut labels = false;
    for token in line.trim_start_matches('#').split_ascii_whitespace() {
        if let Some(v) = token.strip_prefix("w=") {
            w = v.parse().ok();
        } else if let Some(v) = token.strip_prefix("h=") {
            h = v.parse().ok();
        } else if let Some(v) = token.strip_prefix("labels=") {
            labels = v == "1";
        }
    }
    Some((w?, h?, labels))
}

fn write_binary<W: Write>(w: &mut W, header: &StreamHeader, events: &[EventRecord]) -> std::io::Result<()> {
    let mut head = [0u8; HEADER_LEN];
    head[..4].copy_from_slice(BINARY_MAGIC);
    head[4..6].copy_from_slice(&header.width.to_le_bytes());
    head[6..8].copy_from_slice(&header.height.to_le_bytes());
    head[8] = header.has_labels as u8;
    w.write_all(&head)?;
    for ev in events {
        let mut rec = [0u8; RECORD_LEN];
        rec[..8].copy_from_slice(&ev.t_us.to_le_bytes());
        rec[8..10].copy_from_slice(&ev.x.to_le_bytes());
        rec[10..12].copy_from_slice(&ev.y.to_le_bytes());
        rec[12] = ev.p.as_u8();
        rec[13] = if header.has_labels { ev.label.unwrap().as_u8() } else { 0 };
        w.write_all(&rec)?;
    }
    Ok(())
}

fn read_binary<R: Read>(mut r: R, ctx: &str) -> Result<(StreamHeader, Vec<EventRecord>), EventError> {
    let io_err = |source| EventError::Io { path: ctx.to_string(), source };
    let mut head = [0u8; HEADER_LEN];
    r.read_exact(&mut head).map_err(io_err)?;
    if &head[..4] != BINARY_MAGIC {
        return Err(EventError::Parse { context: format!("{ctx}:header"), msg: format!("bad magic {:?}", &head[..4]) });
    }
    let width = u16::from_le_bytes([head[4], head[5]]);
    let height = u16::from_le_bytes([head[6], head[7]]);
    let has_labels = head[8] & 1 == 1;
    let mut events = Vec::new();
    let mut rec = [0u8; RECORD_LEN];
    let mut index = 0usize;
    loop {
        match read_record(&mut r, &mut rec) {
            Ok(false) => break,
            Ok(true) => {}
            Err(source) => return Err(io_err(source)),
        }
        let ctx_rec = || format!("{ctx}:record {index}");
        let t_us = u64::from_le_bytes(rec[..8].try_into().unwrap());
        let x = u16::from_le_bytes([rec[8], rec[9]]);
        let y = u16::from_le_bytes([rec[10], rec[11]]);
        let p = Polarity::from_u8(rec[12])
            .ok_or_else(|| EventError::Parse { context: ctx_rec(), msg: format!("polarity {} not in {{0,1}}", rec[12]) })?;
        let label = if has_labels {
            Some(Label::from_u8(rec[13]).ok_or_else(|| EventError::Parse { context: ctx_rec(), msg: format!("label {} not in {{0,1}}", rec[13]) })?)
        } else {
            None
        };
        events.push(EventRecord { t_us, x, y, p, label });
        index += 1;
    }
    let header = StreamHeader::new(width, height, 0).with_labels(has_labels);
    Ok((header, events))
}

/// Reads one full record; Ok(false) on clean EOF, error on a partial record.
fn read_record<R: Read>(r: &mut R, rec: &mut [u8; RECORD_LEN]) -> std::io::Result<bool> {
    let mut got = 0;
    while got < RECORD_LEN {
        let n = r.read(&mut rec[got..])?;
        if n == 0 {
            if got == 0 {
                return Ok(false);
            }
            return Err(std::io::Error::new(std::io::ErrorKind::UnexpectedEof, format!("partial record ({got} bytes)")));
        }
        got += n;
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn stream() -> (StreamHeader, Vec<EventRecord>) {
        let header = StreamHeader { duration_us: 1_000, ..StreamHeader::new(10, 10, 0) };
        let events = vec![
            EventRecord::new(0, 0, 0, Polarity::Off),
            EventRecord::new(7, 3, 9, Polarity::On),
            EventRecord::new(1_000, 5, 7, Polarity::On),
        ];
        (header, events)
    }

    #[test]
    fn csv_line_maps_fields() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "# w=10 h=10 labels=0\n1000,5,7,1\n").unwrap();
        let (header, events) = read_stream(&path, StreamFormat::Csv, ReadOptions::default()).unwrap();
        assert_eq!((header.width, header.height), (10, 10));
        assert_eq!(events, vec![EventRecord::new(1000, 5, 7, Polarity::On)]);
    }

    #[test]
    fn empty_file_with_header_is_empty_stream() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "# w=4 h=4 labels=1\n").unwrap();
        let (header, events) = read_stream(&path, StreamFormat::Csv, ReadOptions::default()).unwrap();
        assert!(events.is_empty());
        assert!(header.has_labels);
        assert_eq!(header.duration_us, 0);
    }

    #[test]
    fn out_of_bounds_names_record() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "# w=10 h=10 labels=0\n5,1,1,0\n10,10,0,1\n").unwrap();
        let err = read_stream(&path, StreamFormat::Csv, ReadOptions::default()).unwrap_err();
        assert!(matches!(err, EventError::OutOfBounds { index: 1, x: 10, .. }), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "# w=4 h=4 labels=0\n1,2,3,1\nbogus\n").unwrap();
        let err = read_stream(&path, StreamFormat::Csv, ReadOptions::default()).unwrap_err();
        match err {
            EventError::Parse { context, .. } => assert!(context.ends_with(":3"), "{context}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn mixed_label_arity_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "1,2,3,1,1\n5,2,3,0\n").unwrap();
        let err = read_stream(&path, StreamFormat::Csv, ReadOptions::default()).unwrap_err();
        assert!(matches!(err, EventError::Parse { .. }), "{err}");
        let path2 = dir.path().join("s2.csv");
        std::fs::write(&path2, "# w=4 h=4 labels=1\n1,2,3,1\n").unwrap();
        let err = read_stream(&path2, StreamFormat::Csv, ReadOptions::default()).unwrap_err();
        assert!(matches!(err, EventError::Parse { .. }), "{err}");
    }

    #[test]
    fn unsorted_rejected_then_sorted_with_flag() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "# w=4 h=4 labels=0\n100,1,1,1\n50,2,2,0\n").unwrap();
        assert!(matches!(
            read_stream(&path, StreamFormat::Csv, ReadOptions::default()).unwrap_err(),
            EventError::Unsorted { index: 1, .. }
        ));
        let (_, events) = read_stream(&path, StreamFormat::Csv, ReadOptions { allow_unsorted: true }).unwrap();
        assert_eq!(events[0].t_us, 50);
    }

    #[test]
    fn binary_file_size_is_fixed_records() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.evb");
        let (header, events) = stream();
        write_stream(&header, &events, &path, StreamFormat::Binary).unwrap();
        let len = std::fs::metadata(&path).unwrap().len();
        assert_eq!(len, (HEADER_LEN + 3 * RECORD_LEN) as u64);
    }

    #[test]
    fn binary_round_trip_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.evb");
        let (header, events) = stream();
        write_stream(&header, &events, &path, StreamFormat::Binary).unwrap();
        let (h2, e2) = read_stream(&path, StreamFormat::Binary, ReadOptions::default()).unwrap();
        assert_eq!(h2, header);
        assert_eq!(e2, events);
        // file-level idempotence
        let bytes1 = std::fs::read(&path).unwrap();
        let path2 = dir.path().join("s2.evb");
        write_stream(&h2, &e2, &path2, StreamFormat::Binary).unwrap();
        assert_eq!(bytes1, std::fs::read(&path2).unwrap());
    }

    #[test]
    fn csv_round_trip_preserves_fields() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let (mut header, mut events) = stream();
        header.has_labels = true;
        for (i, e) in events.iter_mut().enumerate() {
            e.label = Some(if i % 2 == 0 { Label::Signal } else { Label::Noise });
        }
        write_stream(&header, &events, &path, StreamFormat::Csv).unwrap();
        let (h2, e2) = read_stream(&path, StreamFormat::Csv, ReadOptions::default()).unwrap();
        assert_eq!(h2, header);
        assert_eq!(e2, events);
    }

    #[test]
    fn labels_flag_requires_labels() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.evb");
        let (mut header, events) = stream();
        header.has_labels = true;
        let err = write_stream(&header, &events, &path, StreamFormat::Binary).unwrap_err();
        assert!(matches!(err, EventError::Config(_)));
    }
}
