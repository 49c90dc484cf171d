//! Binary waveform file format.
//!
//! Little-endian layout:
//!
//! | offset | field            | type        |
//! |--------|------------------|-------------|
//! | 0      | magic `LSTW`     | 4 bytes     |
//! | 4      | version (= 1)    | u32         |
//! | 8      | sample_rate_hz   | f64         |
//! | 16     | t0_s             | f64         |
//! | 24     | n_samples        | u64         |
//! | 32     | interleaved I, Q | f32 pairs   |
//!
//! Samples are stored as 32-bit floats; writing a waveform quantizes it the
//! same way the simulator's ADC model does, so write-then-read is stable.

use crate::error::{Error, Result};
use crate::signal::Waveform;
use num_complex::Complex64;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"LSTW";
pub const VERSION: u32 = 1;

/// Quantize samples through f32, mirroring the file representation.
pub fn quantize_f32(w: &mut Waveform) {
    for s in w.samples.iter_mut() {
        *s = Complex64::new(s.re as f32 as f64, s.im as f32 as f64);
    }
}

/// Serialize a waveform to a writer.
pub fn write_waveform_to(mut out: impl Write, w: &Waveform) -> Result<()> {
    out.write_all(&MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&w.sample_rate.to_le_bytes())?;
    out.write_all(&w.t0.to_le_bytes())?;
    out.write_all(&(w.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(w.len() * 8);
    for s in &w.samples {
        buf.extend_from_slice(&(s.re as f32).to_le_bytes());
        buf.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Deserialize a waveform from a reader.
pub fn read_waveform_from(mut input: impl Read) -> Result<Waveform> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:02x?}, expected {:02x?}",
            magic, MAGIC
        )));
    }
    let mut u32buf = [0u8; 4];
    input.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let mut f64buf = [0u8; 8];
    input.read_exact(&mut f64buf)?;
    let sample_rate = f64::from_le_bytes(f64buf);
    input.read_exact(&mut f64buf)?;
    let t0 = f64::from_le_bytes(f64buf);
    input.read_exact(&mut f64buf)?;
    let n_samples = u64::from_le_bytes(f64buf) as usize;
    if !(sample_rate > 0.0) || !sample_rate.is_finite() {
        return Err(Error::Format("non-positive sample rate".into()));
    }

    let mut payload = vec![0u8; n_samples * 8];
    input.read_exact(&mut payload)?;
    let samples = payload
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]) as f64;
            Complex64::new(re, im)
        })
        .collect();
    Ok(Waveform {
        sample_rate,
        t0,
        samples,
    })
}

pub fn write_waveform(path: &Path, w: &Waveform) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_waveform_to(std::io::BufWriter::new(file), w)
}

pub fn read_waveform(path: &Path) -> Result<Waveform> {
    let file = std::fs::File::open(path)?;
    read_waveform_from(std::io::BufReader::new(file))
}
