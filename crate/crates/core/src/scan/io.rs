//! Scan file codecs.
//!
//! Native `.prs` layout, all little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 4 | magic `PRS\0` |
//! | 4 | format version (u32, currently 1) |
//! | 8 | rotation rate, Hz (f64) |
//! | 4 | azimuth count `A` (u32) |
//! | 8 | range resolution, m (f64) |
//! | 4 | range bin count `R` (u32) |
//! | 8 | beamwidth, rad (f64) |
//! | 1 | flags: bit 0 transmit frequency present, bit 1 sweep slope present |
//! | 8 | transmit frequency, Hz (f64, 0 when absent) |
//! | 8 | sweep slope, Hz/s (f64, 0 when absent) |
//! | 8 | beta (f64) |
//! | 8·A | azimuth timestamps, s (f64) |
//! | 8·A | azimuth angles, rad (f64) |
//! | 4·A·R | power, row-major by azimuth (f32) |
//!
//! Oxford-style scans are 8-bit grayscale PNGs with one row per azimuth; the
//! per-row metadata layout is described by [`OxfordCodec`].

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;
use std::str::FromStr;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::{PolarScan, RadarConfig};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PRS\0";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 4 + 8 + 4 + 8 + 1 + 8 + 8 + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanFormat {
    Native,
    OxfordPngRows,
}

impl FromStr for ScanFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "native" | "prs" => Ok(Self::Native),
            "oxford-png-rows" | "oxford" => Ok(Self::OxfordPngRows),
            other => Err(Error::InvalidInput(format!("unknown scan format '{other}'"))),
        }
    }
}

/// Where azimuth angles come from when decoding Oxford-style rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AzimuthMode {
    /// Encoder word stored in each row.
    #[default]
    Measured,
    /// `2πa/A`, ignoring the encoder.
    Uniform,
}

/// Row layout of the public Oxford radar PNGs (from the dataset SDK):
/// bytes `0..8` hold an i64 UNIX timestamp in microseconds, bytes `8..10`
/// a u16 encoder azimuth out of `encoder_size` counts per turn, byte `10`
/// a valid flag (255 = valid), and the remaining bytes the power per range
/// bin scaled to `0..=255`.
#[derive(Clone, Debug, PartialEq)]
pub struct OxfordCodec {
    pub timestamp_bytes: std::ops::Range<usize>,
    pub azimuth_bytes: std::ops::Range<usize>,
    pub valid_byte: usize,
    pub metadata_len: usize,
    pub encoder_size: u16,
    pub timestamp_scale: f64,
    pub range_resolution: f64,
    pub rotation_rate: f64,
}

pub const OXFORD_CODEC: OxfordCodec = OxfordCodec {
    timestamp_bytes: 0..8,
    azimuth_bytes: 8..10,
    valid_byte: 10,
    metadata_len: 11,
    encoder_size: 5600,
    timestamp_scale: 1e-6,
    range_resolution: 0.0432,
    rotation_rate: 4.0,
};

impl OxfordCodec {
    pub fn azimuth_from_word(&self, word: u16) -> f64 {
        word as f64 / self.encoder_size as f64 * std::f64::consts::TAU
    }

    /// Decodes `(timestamp s, azimuth rad, valid, power row)`.
    pub fn decode_row<'a>(&self, row: &'a [u8]) -> Result<(f64, f64, bool, &'a [u8])> {
        if row.len() <= self.metadata_len {
            return Err(Error::Format(format!(
                "row of {} bytes is too short for {} metadata bytes",
                row.len(),
                self.metadata_len
            )));
        }
        let mut ts = [0u8; 8];
        ts.copy_from_slice(&row[self.timestamp_bytes.clone()]);
        let micros = i64::from_le_bytes(ts);
        let word = u16::from_le_bytes([row[self.azimuth_bytes.start], row[self.azimuth_bytes.start + 1]]);
        Ok((
            micros as f64 * self.timestamp_scale,
            self.azimuth_from_word(word % self.encoder_size),
            row[self.valid_byte] == 255,
            &row[self.metadata_len..],
        ))
    }

    /// Encodes one row; used for fixtures and round trips.
    pub fn encode_row(&self, micros: i64, word: u16, valid: bool, power: &[u8]) -> Vec<u8> {
        let mut row = vec![0u8; self.metadata_len];
        row[self.timestamp_bytes.clone()].copy_from_slice(&micros.to_le_bytes());
        row[self.azimuth_bytes.clone()].copy_from_slice(&word.to_le_bytes());
        row[self.valid_byte] = if valid { 255 } else { 0 };
        row.extend_from_slice(power);
        row
    }
}

pub fn save_scan(scan: &PolarScan, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_scan(scan, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn write_scan(scan: &PolarScan, w: &mut impl Write) -> Result<()> {
    let c = scan.config();
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_f64::<LittleEndian>(c.rotation_rate)?;
    w.write_u32::<LittleEndian>(to_u32(c.azimuths_per_rotation)?)?;
    w.write_f64::<LittleEndian>(c.range_resolution)?;
    w.write_u32::<LittleEndian>(to_u32(c.range_bins)?)?;
    w.write_f64::<LittleEndian>(c.beamwidth)?;
    let flags = u8::from(c.transmit_freq.is_some()) | (u8::from(c.sweep_slope.is_some()) << 1);
    w.write_u8(flags)?;
    w.write_f64::<LittleEndian>(c.transmit_freq.unwrap_or(0.0))?;
    w.write_f64::<LittleEndian>(c.sweep_slope.unwrap_or(0.0))?;
    w.write_f64::<LittleEndian>(c.beta)?;
    for t in scan.azimuth_timestamps() {
        w.write_f64::<LittleEndian>(*t)?;
    }
    for a in scan.azimuth_angles() {
        w.write_f64::<LittleEndian>(*a)?;
    }
    for p in scan.power() {
        w.write_f32::<LittleEndian>(*p)?;
    }
    Ok(())
}

fn to_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::InvalidInput(format!("{n} does not fit the file format")))
}

pub fn load_scan(path: impl AsRef<Path>, format: ScanFormat) -> Result<PolarScan> {
    let bytes = fs::read(path)?;
    load_scan_from(&bytes, format, AzimuthMode::Measured)
}

/// Decodes a scan held in memory. Nothing is returned unless the whole
/// buffer decodes.
pub fn load_scan_from(bytes: &[u8], format: ScanFormat, azimuths: AzimuthMode) -> Result<PolarScan> {
    match format {
        ScanFormat::Native => decode_native(bytes),
        ScanFormat::OxfordPngRows => decode_oxford(bytes, &OXFORD_CODEC, azimuths),
    }
}

fn decode_native(bytes: &[u8]) -> Result<PolarScan> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("file of {} bytes is shorter than the header", bytes.len())));
    }
    let mut r = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic; not a native scan file".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let rotation_rate = r.read_f64::<LittleEndian>()?;
    let azimuths = r.read_u32::<LittleEndian>()? as usize;
    let range_resolution = r.read_f64::<LittleEndian>()?;
    let range_bins = r.read_u32::<LittleEndian>()? as usize;
    let beamwidth = r.read_f64::<LittleEndian>()?;
    let flags = r.read_u8()?;
    let ft = r.read_f64::<LittleEndian>()?;
    let slope = r.read_f64::<LittleEndian>()?;
    let beta = r.read_f64::<LittleEndian>()?;

    let expected = azimuths
        .checked_mul(range_bins)
        .and_then(|cells| cells.checked_mul(4))
        .and_then(|p| p.checked_add(16 * azimuths))
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} bytes for {azimuths}x{range_bins}, found {}",
            bytes.len()
        )));
    }
    let config = RadarConfig {
        rotation_rate,
        azimuths_per_rotation: azimuths,
        range_resolution,
        range_bins,
        beamwidth,
        transmit_freq: (flags & 1 != 0).then_some(ft),
        sweep_slope: (flags & 2 != 0).then_some(slope),
        beta,
    };
    let mut times = vec![0.0; azimuths];
    r.read_f64_into::<LittleEndian>(&mut times)?;
    let mut angles = vec![0.0; azimuths];
    r.read_f64_into::<LittleEndian>(&mut angles)?;
    let mut power = vec![0.0f32; azimuths * range_bins];
    r.read_f32_into::<LittleEndian>(&mut power)?;
    PolarScan::new(config, angles, times, power).map_err(|e| Error::Format(e.to_string()))
}

fn decode_oxford(bytes: &[u8], codec: &OxfordCodec, mode: AzimuthMode) -> Result<PolarScan> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?.into_luma8();
    let (width, height) = (img.width() as usize, img.height() as usize);
    if width <= codec.metadata_len {
        return Err(Error::Format(format!(
            "row length {width} leaves no range bins after {} metadata bytes",
            codec.metadata_len
        )));
    }
    if height == 0 {
        return Err(Error::Format("image has no rows".into()));
    }
    let raw = img.as_raw();
    let range_bins = width - codec.metadata_len;
    let mut times = Vec::with_capacity(height);
    let mut angles = Vec::with_capacity(height);
    let mut power = Vec::with_capacity(height * range_bins);
    for row in raw.chunks_exact(width) {
        let (t, azimuth, _valid, cells) = codec.decode_row(row)?;
        times.push(t);
        angles.push(azimuth);
        power.extend(cells.iter().map(|b| *b as f32 / 255.0));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Format("row timestamps are not strictly increasing".into()));
    }
    let config = RadarConfig {
        rotation_rate: codec.rotation_rate,
        azimuths_per_rotation: height,
        range_resolution: codec.range_resolution,
        range_bins,
        ..RadarConfig::default()
    };
    if mode == AzimuthMode::Uniform {
        angles = config.uniform_azimuth_angles();
    }
    PolarScan::new(config, angles, times, power).map_err(|e| Error::Format(e.to_string()))
}
