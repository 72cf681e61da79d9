//! `.ech` echogram rasters.
//!
//! Little-endian layout:
//!
//! | field            | type              |
//! |------------------|-------------------|
//! | magic            | `b"ECHO"`         |
//! | version          | u16 = 1           |
//! | width            | u32               |
//! | height           | u32               |
//! | n_channels       | u32               |
//! | frequencies_khz  | f32 x n_channels  |
//! | depth_min_m      | f32               |
//! | depth_max_m      | f32               |
//! | start_epoch_s    | i64               |
//! | duration_s       | f32               |
//! | payload          | f32 x n_channels x height x width |
//!
//! The payload is channel-major, then row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use echofinder_core::{Echogram, EchogramMeta};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"ECHO";
pub const VERSION: u16 = 1;

/// Header size in bytes for `n_channels` channels.
pub fn header_len(n_channels: usize) -> u64 {
    4 + 2 + 4 * 3 + 4 * n_channels as u64 + 4 + 4 + 8 + 4
}

/// Exact file size of an echogram with the given dimensions.
pub fn file_len(width: usize, height: usize, n_channels: usize) -> u64 {
    header_len(n_channels) + 4 * (width * height * n_channels) as u64
}

/// Writes `e` and returns the number of bytes written.
pub fn write_echogram<W: Write>(e: &Echogram, sink: &mut W) -> Result<u64> {
    let m = e.meta();
    let mut head = Vec::with_capacity(header_len(e.n_channels()) as usize);
    head.extend_from_slice(&MAGIC);
    head.extend_from_slice(&VERSION.to_le_bytes());
    for v in [e.width(), e.height(), e.n_channels()] {
        let v = u32::try_from(v).map_err(|_| Error::InvalidHeader("dimension exceeds u32"))?;
        head.extend_from_slice(&v.to_le_bytes());
    }
    for f in &m.frequencies_khz {
        head.extend_from_slice(&f.to_le_bytes());
    }
    head.extend_from_slice(&m.depth_min_m.to_le_bytes());
    head.extend_from_slice(&m.depth_max_m.to_le_bytes());
    head.extend_from_slice(&m.start_epoch_s.to_le_bytes());
    head.extend_from_slice(&m.duration_s.to_le_bytes());
    sink.write_all(&head)?;
    let mut buf = Vec::with_capacity(4 * e.width() * e.height());
    let plane = e.width() * e.height();
    for chunk in e.data().chunks(plane) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        sink.write_all(&buf)?;
    }
    Ok(head.len() as u64 + 4 * e.data().len() as u64)
}

/// Reads as many bytes as available up to `buf.len()`.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.buf[self.pos..self.pos + N].try_into().expect("sized slice");
        self.pos += N;
        out
    }
    fn u16(&mut self) -> u16 {
        u16::from_le_bytes(self.take())
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
    fn f32(&mut self) -> f32 {
        f32::from_le_bytes(self.take())
    }
    fn i64(&mut self) -> i64 {
        i64::from_le_bytes(self.take())
    }
}

/// Reads and validates one echogram; the source must end right after the
/// payload.
pub fn read_echogram<R: Read>(source: &mut R) -> Result<Echogram> {
    let mut fixed = [0u8; 18];
    let got = read_full(source, &mut fixed)?;
    if got >= 4 && fixed[..4] != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: fixed[..4].try_into().unwrap(),
        });
    }
    if got < fixed.len() {
        return Err(Error::Truncated {
            expected: fixed.len() as u64,
            found: got as u64,
        });
    }
    let mut c = Cursor { buf: &fixed, pos: 4 };
    let version = c.u16();
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let (width, height, n) = (c.u32() as usize, c.u32() as usize, c.u32() as usize);
    if n == 0 {
        return Err(Error::InvalidHeader("n_channels must be at least 1"));
    }
    if width == 0 || height == 0 {
        return Err(Error::InvalidHeader("width and height must be positive"));
    }
    if n > 1024 {
        return Err(Error::InvalidHeader("implausible channel count"));
    }
    let rest_len = (header_len(n) - fixed.len() as u64) as usize;
    let mut rest = vec![0u8; rest_len];
    let got = read_full(source, &mut rest)?;
    if got < rest_len {
        return Err(Error::Truncated {
            expected: header_len(n),
            found: (fixed.len() + got) as u64,
        });
    }
    let mut c = Cursor { buf: &rest, pos: 0 };
    let frequencies_khz = (0..n).map(|_| c.f32()).collect();
    let meta = EchogramMeta {
        frequencies_khz,
        depth_min_m: c.f32(),
        depth_max_m: c.f32(),
        start_epoch_s: c.i64(),
        duration_s: c.f32(),
    };

    let count = width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(n))
        .ok_or(Error::InvalidHeader("payload size overflows"))?;
    let payload_len = 4 * count as u64;
    let mut payload = Vec::new();
    let got = source.take(payload_len).read_to_end(&mut payload)? as u64;
    if got < payload_len {
        return Err(Error::Truncated {
            expected: header_len(n) + payload_len,
            found: header_len(n) + got,
        });
    }
    let mut probe = [0u8; 1];
    if read_full(source, &mut probe)? > 0 {
        let extra = 1 + std::io::copy(source, &mut std::io::sink())?;
        return Err(Error::TrailingBytes(extra));
    }
    let mut data = Vec::with_capacity(count);
    for (i, b) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(b.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::NonFiniteValue(header_len(n) + 4 * i as u64));
        }
        data.push(v);
    }
    Ok(Echogram::new(width, height, meta, data)?)
}

pub fn save_echogram(e: &Echogram, path: &Path) -> Result<u64> {
    let f = File::create(path).map_err(|err| Error::io(path, err))?;
    let mut w = BufWriter::new(f);
    let n = write_echogram(e, &mut w)?;
    w.flush().map_err(|err| Error::io(path, err))?;
    Ok(n)
}

pub fn load_echogram(path: &Path) -> Result<Echogram> {
    let f = File::open(path).map_err(|err| Error::io(path, err))?;
    read_echogram(&mut BufReader::new(f))
}
