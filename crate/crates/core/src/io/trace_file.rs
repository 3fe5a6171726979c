//! `TESB` binary trace batches.
//!
//! Little-endian layout:
//!
//! ```text
//! "TESB" | u16 version = 1 | u8 flags | u8 bits
//! f64 sample_rate_hz | f64 full_scale | u32 n_traces | u32 samples_per_trace
//! per trace: i16 × samples_per_trace, then (flags bit 0) f64 t0_true_s, u8 n_true
//! ```
//!
//! The pre-trigger length is not stored; the reader takes it from the run
//! configuration.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::pulse_sim::{DigitizerParams, GroundTruth, TraceBatch};

pub const MAGIC: &[u8; 4] = b"TESB";
pub const VERSION: u16 = 1;
const FLAG_TRUTH: u8 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 1 + 8 + 8 + 4 + 4;

pub fn write_batch<W: Write>(mut w: W, batch: &TraceBatch) -> Result<()> {
    let d = &batch.digitizer;
    let n = u32::try_from(batch.len()).map_err(|_| Error::Format("too many traces".into()))?;
    let len = u32::try_from(d.trace_length).map_err(|_| Error::Format("trace too long".into()))?;
    let flags = if batch.truth.is_some() { FLAG_TRUTH } else { 0 };
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[flags, d.bits])?;
    w.write_all(&d.sample_rate.to_le_bytes())?;
    w.write_all(&d.full_scale.to_le_bytes())?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&len.to_le_bytes())?;
    let mut row = Vec::with_capacity(2 * d.trace_length);
    for i in 0..batch.len() {
        row.clear();
        for &c in batch.codes(i) {
            row.extend_from_slice(&c.to_le_bytes());
        }
        w.write_all(&row)?;
        if let Some(t) = &batch.truth {
            w.write_all(&t[i].t0_true.to_le_bytes())?;
            w.write_all(&[t[i].n_true])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("file is truncated".into()),
        _ => Error::Io(e),
    })
}

/// Reads a batch written by [`write_batch`]; `pre_trigger` must be shorter
/// than the stored traces.
pub fn read_batch<R: Read>(mut r: R, pre_trigger: usize) -> Result<TraceBatch> {
    let mut h = [0u8; HEADER_LEN];
    read_exact(&mut r, &mut h)?;
    if &h[..4] != MAGIC {
        return Err(Error::Format("bad magic, not a TESB file".into()));
    }
    let version = u16::from_le_bytes([h[4], h[5]]);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let (flags, bits) = (h[6], h[7]);
    if flags & !FLAG_TRUTH != 0 {
        return Err(Error::Format(format!("unknown flags {flags:#04x}")));
    }
    let f64_at = |o: usize| f64::from_le_bytes(h[o..o + 8].try_into().unwrap());
    let u32_at = |o: usize| u32::from_le_bytes(h[o..o + 4].try_into().unwrap());
    let digitizer = DigitizerParams {
        sample_rate: f64_at(8),
        bits,
        full_scale: f64_at(16),
        trace_length: u32_at(28) as usize,
        pre_trigger,
    };
    digitizer
        .validate()
        .map_err(|e| Error::Format(format!("header: {e}")))?;
    let n = u32_at(24) as usize;
    let len = digitizer.trace_length;

    let mut samples = Vec::with_capacity(n * len);
    let mut truth = (flags & FLAG_TRUTH != 0).then(|| Vec::with_capacity(n));
    let mut row = vec![0u8; 2 * len];
    let mut tail = [0u8; 9];
    let (lo, hi) = (-(1i32 << (bits - 1)), (1i32 << (bits - 1)) - 1);
    let mut clipped = 0u64;
    for _ in 0..n {
        read_exact(&mut r, &mut row)?;
        for c in row.chunks_exact(2) {
            let v = i16::from_le_bytes([c[0], c[1]]);
            if i32::from(v) < lo || i32::from(v) > hi {
                return Err(Error::Format(format!("code {v} outside the {bits}-bit range")));
            }
            clipped += u64::from(i32::from(v) == lo || i32::from(v) == hi);
            samples.push(v);
        }
        if let Some(t) = truth.as_mut() {
            read_exact(&mut r, &mut tail)?;
            t.push(GroundTruth {
                t0_true: f64::from_le_bytes(tail[..8].try_into().unwrap()),
                n_true: tail[8],
            });
        }
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::Format("trailing bytes after the last trace".into()));
    }
    Ok(TraceBatch {
        digitizer,
        samples,
        truth,
        // Samples sitting on either rail; the file does not record clipping.
        clipped_samples: clipped,
        provenance: None,
    })
}

pub fn save_batch(path: &Path, batch: &TraceBatch) -> Result<()> {
    write_batch(BufWriter::new(File::create(path)?), batch)
}

pub fn load_batch(path: &Path, pre_trigger: usize) -> Result<TraceBatch> {
    read_batch(BufReader::new(File::open(path)?), pre_trigger)
}
