//! File formats.
//!
//! * `RADF` — float images (radiance maps, correction maps): text header
//!   `RADF\n<width> <height>\n` followed by row-major little-endian f64.
//!   Round-trips are bit-exact.
//! * `P5` PGM with maxval 65535 (big-endian samples) for display exports.
//! * `AEVT` — binary event streams; CSV export/import mirrors it in text.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::radiance::{DisplayImage, RadianceMap};
use crate::reconstruct::CMap;
use crate::scalar::{fl, to_f64, Scalar};
use crate::sim::{Event, EventStream, Polarity, Provenance};

const RADF_MAGIC: &[u8] = b"RADF\n";
const AEVT_MAGIC: &[u8] = b"AEVT";

fn display_path(path: &Path) -> String {
    path.display().to_string()
}

/// Write a radiance map in the RADF float format.
pub fn save_radiance_map<F: Scalar>(map: &RadianceMap<F>, path: &Path) -> Result<()> {
    write_radf(path, map.width(), map.height(), map.values())
}

/// Load a radiance map, validating dimensions and value range.
pub fn load_radiance_map<F: Scalar>(path: &Path) -> Result<RadianceMap<F>> {
    let (width, height, values) = read_radf::<F>(path)?;
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() || *v < F::zero() {
            return Err(Error::format(
                display_path(path),
                format!("radiance value at index {i} is negative or not finite"),
            ));
        }
    }
    RadianceMap::from_values(width, height, values)
}

/// Write a correction map; gains share the RADF image format.
pub fn save_cmap<F: Scalar>(cmap: &CMap<F>, path: &Path) -> Result<()> {
    write_radf(path, cmap.width(), cmap.height(), cmap.gains())
}

/// Load a correction map, additionally requiring strictly positive gains.
pub fn load_cmap<F: Scalar>(path: &Path) -> Result<CMap<F>> {
    let (width, height, gains) = read_radf::<F>(path)?;
    for (i, g) in gains.iter().enumerate() {
        if !(*g > F::zero()) || !g.is_finite() {
            return Err(Error::format(
                display_path(path),
                format!("correction gain at index {i} must be positive and finite"),
            ));
        }
    }
    CMap::from_gains(width, height, gains)
}

fn write_radf<F: Scalar>(path: &Path, width: usize, height: usize, values: &[F]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(display_path(path), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(display_path(path), e);
    w.write_all(RADF_MAGIC).map_err(io_err)?;
    w.write_all(format!("{width} {height}\n").as_bytes())
        .map_err(io_err)?;
    for v in values {
        w.write_all(&to_f64(*v).to_le_bytes()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn read_radf<F: Scalar>(path: &Path) -> Result<(usize, usize, Vec<F>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(display_path(path), e))?;
    let mut r = BufReader::new(file);
    let io_err = |e| Error::io(display_path(path), e);

    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)
        .map_err(|_| Error::format(display_path(path), "file shorter than the RADF magic"))?;
    if magic != RADF_MAGIC {
        return Err(Error::format(
            display_path(path),
            format!("bad magic at offset 0: expected \"RADF\\n\", got {magic:?}"),
        ));
    }
    let mut line = String::new();
    r.read_line(&mut line).map_err(io_err)?;
    let mut parts = line.split_whitespace();
    let parse = |s: Option<&str>| -> Result<usize> {
        s.and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| Error::format(display_path(path), format!("bad dimension line {line:?}")))
    };
    let width = parse(parts.next())?;
    let height = parse(parts.next())?;
    if parts.next().is_some() {
        return Err(Error::format(display_path(path), "trailing tokens in dimension line"));
    }
    if width == 0 || height == 0 {
        return Err(Error::format(display_path(path), "zero dimension"));
    }

    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::format(display_path(path), "dimension overflow"))?;
    let mut values = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for i in 0..count {
        r.read_exact(&mut buf).map_err(|_| {
            Error::format(
                display_path(path),
                format!("truncated payload: expected {count} values, failed at {i}"),
            )
        })?;
        values.push(fl::<F>(f64::from_le_bytes(buf)));
    }
    if r.read(&mut buf).map_err(io_err)? != 0 {
        return Err(Error::format(display_path(path), "trailing bytes after payload"));
    }
    Ok((width, height, values))
}

/// Write a 16-bit binary PGM (`P5`, maxval 65535, big-endian samples).
pub fn save_pgm16(img: &DisplayImage, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(display_path(path), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(display_path(path), e);
    w.write_all(format!("P5\n{} {}\n65535\n", img.width, img.height).as_bytes())
        .map_err(io_err)?;
    for s in &img.samples {
        w.write_all(&s.to_be_bytes()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn provenance_code(p: Option<Provenance>) -> u8 {
    match p {
        None => 0,
        Some(Provenance::Valid) => 1,
        Some(Provenance::Pseudo) => 2,
    }
}

fn provenance_from_code(code: u8) -> Result<Option<Provenance>> {
    match code {
        0 => Ok(None),
        1 => Ok(Some(Provenance::Valid)),
        2 => Ok(Some(Provenance::Pseudo)),
        other => Err(Error::argument(format!("provenance code {other} out of range"))),
    }
}

/// Write the binary event-stream format:
/// magic `AEVT`, u32 width, u32 height, f64 threshold, f64 duration,
/// u64 count, then per event u16 x, u16 y, f64 t, i8 polarity, u8 provenance
/// (0 unlabeled / 1 valid / 2 pseudo), all little-endian.
pub fn save_events_binary<F: Scalar>(stream: &EventStream<F>, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(display_path(path), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(display_path(path), e);
    w.write_all(AEVT_MAGIC).map_err(io_err)?;
    w.write_all(&(stream.width() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(stream.height() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&to_f64(stream.threshold()).to_le_bytes()).map_err(io_err)?;
    w.write_all(&to_f64(stream.duration()).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(stream.len() as u64).to_le_bytes()).map_err(io_err)?;
    for e in stream.events() {
        w.write_all(&e.x.to_le_bytes()).map_err(io_err)?;
        w.write_all(&e.y.to_le_bytes()).map_err(io_err)?;
        w.write_all(&to_f64(e.t).to_le_bytes()).map_err(io_err)?;
        w.write_all(&e.polarity.as_i8().to_le_bytes()).map_err(io_err)?;
        w.write_all(&provenance_code(e.provenance).to_le_bytes())
            .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Read the binary event-stream format, validating every field.
pub fn load_events_binary<F: Scalar>(path: &Path) -> Result<EventStream<F>> {
    let file = fs::File::open(path).map_err(|e| Error::io(display_path(path), e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::format(display_path(path), "file shorter than the AEVT magic"))?;
    if magic != AEVT_MAGIC {
        return Err(Error::format(
            display_path(path),
            format!("bad magic at offset 0: expected \"AEVT\", got {magic:?}"),
        ));
    }

    let mut u32buf = [0u8; 4];
    let mut u64buf = [0u8; 8];
    let mut read_u32 = |r: &mut BufReader<fs::File>, what: &str| -> Result<u32> {
        r.read_exact(&mut u32buf)
            .map_err(|_| Error::format(display_path(path), format!("truncated {what}")))?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let width = read_u32(&mut r, "width")? as usize;
    let height = read_u32(&mut r, "height")? as usize;

    let mut read_f64 = |r: &mut BufReader<fs::File>, what: &str| -> Result<f64> {
        r.read_exact(&mut u64buf)
            .map_err(|_| Error::format(display_path(path), format!("truncated {what}")))?;
        Ok(f64::from_le_bytes(u64buf))
    };
    let threshold = read_f64(&mut r, "threshold")?;
    let duration = read_f64(&mut r, "duration")?;
    r.read_exact(&mut u64buf)
        .map_err(|_| Error::format(display_path(path), "truncated event count"))?;
    let count = u64::from_le_bytes(u64buf) as usize;

    if !(threshold > 0.0 && threshold.is_finite()) || !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::format(display_path(path), "non-positive threshold or duration"));
    }

    let mut events = Vec::with_capacity(count.min(1 << 24));
    let mut record = [0u8; 14];
    for i in 0..count {
        r.read_exact(&mut record).map_err(|_| {
            Error::format(
                display_path(path),
                format!("truncated payload: expected {count} events, failed at {i}"),
            )
        })?;
        let x = u16::from_le_bytes([record[0], record[1]]);
        let y = u16::from_le_bytes([record[2], record[3]]);
        let t = f64::from_le_bytes(record[4..12].try_into().expect("slice is 8 bytes"));
        let polarity = Polarity::from_i8(record[12] as i8)
            .map_err(|e| Error::format(display_path(path), format!("event {i}: {e}")))?;
        let provenance = provenance_from_code(record[13])
            .map_err(|e| Error::format(display_path(path), format!("event {i}: {e}")))?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::format(
                display_path(path),
                format!("event {i}: timestamp {t} outside [0, 1]"),
            ));
        }
        events.push(Event {
            x,
            y,
            t: fl::<F>(t),
            polarity,
            provenance,
        });
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe).map_err(|e| Error::io(display_path(path), e))? != 0 {
        return Err(Error::format(display_path(path), "trailing bytes after payload"));
    }
    EventStream::from_parts(width, height, fl::<F>(threshold), fl::<F>(duration), events)
        .map_err(|e| Error::format(display_path(path), e.to_string()))
}

/// Write the CSV event format: header `x,y,t,p[,provenance]`, timestamps in
/// normalized units with 13 significant digits.
pub fn save_events_csv<F: Scalar>(
    stream: &EventStream<F>,
    path: &Path,
    include_provenance: bool,
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(display_path(path), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(display_path(path), e);
    if include_provenance {
        w.write_all(b"x,y,t,p,provenance\n").map_err(io_err)?;
    } else {
        w.write_all(b"x,y,t,p\n").map_err(io_err)?;
    }
    for e in stream.events() {
        let t = to_f64(e.t);
        if include_provenance {
            let prov = match e.provenance {
                None => "",
                Some(Provenance::Valid) => "valid",
                Some(Provenance::Pseudo) => "pseudo",
            };
            writeln!(w, "{},{},{:.12e},{},{}", e.x, e.y, t, e.polarity.as_i8(), prov)
                .map_err(io_err)?;
        } else {
            writeln!(w, "{},{},{:.12e},{}", e.x, e.y, t, e.polarity.as_i8()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

/// Read the CSV event format. Stream metadata (dimensions, threshold,
/// duration) is not part of the CSV and must be supplied.
pub fn load_events_csv<F: Scalar>(
    path: &Path,
    width: usize,
    height: usize,
    threshold: F,
    duration: F,
) -> Result<EventStream<F>> {
    let file = fs::File::open(path).map_err(|e| Error::io(display_path(path), e))?;
    let r = BufReader::new(file);
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(display_path(path), "empty file"))?
        .map_err(|e| Error::io(display_path(path), e))?;
    let with_provenance = match header.trim() {
        "x,y,t,p" => false,
        "x,y,t,p,provenance" => true,
        other => {
            return Err(Error::format(
                display_path(path),
                format!("unexpected header {other:?}"),
            ))
        }
    };

    let mut events = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(display_path(path), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| {
            Error::format(
                display_path(path),
                format!("line {}: {what}: {line:?}", lineno + 2),
            )
        };
        let fields: Vec<&str> = line.split(',').collect();
        let expected = if with_provenance { 5 } else { 4 };
        if fields.len() != expected {
            return Err(bad("wrong field count"));
        }
        let x: u16 = fields[0].parse().map_err(|_| bad("bad x"))?;
        let y: u16 = fields[1].parse().map_err(|_| bad("bad y"))?;
        let t: f64 = fields[2].parse().map_err(|_| bad("bad t"))?;
        let p: i8 = fields[3].parse().map_err(|_| bad("bad polarity"))?;
        let provenance = if with_provenance {
            match fields[4].trim() {
                "" => None,
                "valid" => Some(Provenance::Valid),
                "pseudo" => Some(Provenance::Pseudo),
                _ => return Err(bad("bad provenance")),
            }
        } else {
            None
        };
        events.push(Event {
            x,
            y,
            t: fl::<F>(t),
            polarity: Polarity::from_i8(p).map_err(|_| bad("bad polarity"))?,
            provenance,
        });
    }
    EventStream::from_parts(width, height, threshold, duration, events)
}
