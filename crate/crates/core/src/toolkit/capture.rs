//! Binary capture container.
//!
//! ```text
//! offset      size  field
//! 0           8     magic "THZCAP01"
//! 8           4     metadata length M, u32 little-endian
//! 12          M     metadata, UTF-8 JSON
//! 12+M        8     payload value count V, u64 little-endian (even)
//! 20+M        4·V   payload: re₀ im₀ re₁ im₁ … as f32 little-endian
//! ```

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::write_atomic;
use crate::channel_sim::Scenario;
use crate::waveform::{BasebandSignal, FrameLayout, PulseShape};
use crate::{Error, Real, Result};

pub const MAGIC: &[u8; 8] = b"THZCAP01";
pub const SCHEMA_VERSION: u32 = 1;
const MAX_METADATA_BYTES: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptureKind {
    /// Transmitted sounding waveform.
    Transmit,
    /// Output of the channel.
    Receive,
    /// Transmitter looped straight into the receiver frontend.
    BackToBack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutMetadata {
    pub header_degree: u32,
    pub body_degree: u32,
    pub header_taps: Vec<u32>,
    pub body_taps: Vec<u32>,
    pub repetitions: usize,
    pub chip_duration_ns: f64,
    pub total_chips: usize,
}

impl LayoutMetadata {
    pub fn of<T: Real>(layout: &FrameLayout<T>) -> Self {
        Self {
            header_degree: layout.header.degree().unwrap_or(0),
            body_degree: layout.body.degree().unwrap_or(0),
            header_taps: layout.header.taps().to_vec(),
            body_taps: layout.body.taps().to_vec(),
            repetitions: layout.repetitions,
            chip_duration_ns: layout.chip_duration_ns.as_f64(),
            total_chips: layout.total_chips(),
        }
    }

    /// Rebuilds the frame layout the capture was produced with.
    pub fn to_layout<T: Real>(&self) -> Result<FrameLayout<T>> {
        let layout = FrameLayout::new(
            self.header_degree,
            self.body_degree,
            self.repetitions,
            T::lit(self.chip_duration_ns),
        )?;
        if layout.header.taps() != self.header_taps.as_slice() || layout.body.taps() != self.body_taps.as_slice() {
            return Err(Error::Format("capture uses non-default feedback taps".into()));
        }
        if layout.total_chips() != self.total_chips {
            return Err(Error::Format(format!(
                "capture frame length {} chips does not match its layout ({})",
                self.total_chips,
                layout.total_chips()
            )));
        }
        Ok(layout)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureMetadata {
    pub schema_version: u32,
    pub kind: CaptureKind,
    pub sample_rate_hz: f64,
    pub if_frequency_hz: f64,
    pub chip_duration_ns: f64,
    pub layout: LayoutMetadata,
    pub pulse: PulseShape<f64>,
    pub scenario: Option<Scenario>,
    pub seed: u64,
    /// Frames stored back to back, each in a slot of `frame_stride_samples`.
    pub frames: usize,
    pub frame_stride_samples: usize,
    /// Power in dBm of a unit-amplitude received component.
    pub power_reference_dbm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureFile {
    pub metadata: CaptureMetadata,
    pub samples: Vec<Complex<f32>>,
}

impl CaptureFile {
    pub fn from_signal<T: Real>(metadata: CaptureMetadata, signal: &BasebandSignal<T>) -> Self {
        let samples = signal
            .samples
            .iter()
            .map(|s| Complex::new(s.re.as_f64() as f32, s.im.as_f64() as f32))
            .collect();
        Self { metadata, samples }
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.metadata;
        if m.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported capture schema version {} (expected {SCHEMA_VERSION})",
                m.schema_version
            )));
        }
        if !(m.sample_rate_hz > 0.0 && m.sample_rate_hz.is_finite()) {
            return Err(Error::Format(format!("sample rate {} Hz", m.sample_rate_hz)));
        }
        if m.frames > 0 && m.frame_stride_samples == 0 {
            return Err(Error::Format("frame stride must be positive".into()));
        }
        if m.frames.saturating_mul(m.frame_stride_samples) > self.samples.len() {
            return Err(Error::Format(format!(
                "{} frames of {} samples exceed the {} stored samples",
                m.frames,
                m.frame_stride_samples,
                self.samples.len()
            )));
        }
        Ok(())
    }

    /// Whole payload as a signal at the capture's sample rate and IF.
    pub fn signal<T: Real>(&self) -> BasebandSignal<T> {
        self.slice(0, self.samples.len())
    }

    /// Samples of frame slot `i`.
    pub fn frame<T: Real>(&self, i: usize) -> Result<BasebandSignal<T>> {
        let m = &self.metadata;
        if i >= m.frames {
            return Err(Error::InvalidParameter(format!("frame {i} of {}", m.frames)));
        }
        // each slot is timed from its own start
        Ok(self.slice(i * m.frame_stride_samples, m.frame_stride_samples))
    }

    fn slice<T: Real>(&self, start: usize, len: usize) -> BasebandSignal<T> {
        let m = &self.metadata;
        let samples = self.samples[start..start + len]
            .iter()
            .map(|s| Complex::new(T::lit(s.re as f64), T::lit(s.im as f64)))
            .collect();
        let mut sig = BasebandSignal::new(samples, T::lit(m.sample_rate_hz));
        sig.if_frequency = T::lit(m.if_frequency_hz);
        sig
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let meta = serde_json::to_vec(&self.metadata)?;
        let mut out = Vec::with_capacity(20 + meta.len() + 8 * self.samples.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&(2 * self.samples.len() as u64).to_le_bytes());
        for s in &self.samples {
            out.extend_from_slice(&s.re.to_le_bytes());
            out.extend_from_slice(&s.im.to_le_bytes());
        }
        Ok(out)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| Error::Format("truncated capture header".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format("not a capture file (bad magic)".into()));
        }
        let mut len4 = [0u8; 4];
        r.read_exact(&mut len4).map_err(|_| Error::Format("truncated capture header".into()))?;
        let meta_len = u32::from_le_bytes(len4) as usize;
        if meta_len > MAX_METADATA_BYTES {
            return Err(Error::Format(format!("metadata block of {meta_len} bytes")));
        }
        let mut meta = vec![0u8; meta_len];
        r.read_exact(&mut meta).map_err(|_| Error::Format("truncated metadata".into()))?;
        let metadata: CaptureMetadata =
            serde_json::from_slice(&meta).map_err(|e| Error::Format(format!("capture metadata: {e}")))?;
        let mut len8 = [0u8; 8];
        r.read_exact(&mut len8).map_err(|_| Error::Format("truncated payload header".into()))?;
        let values = u64::from_le_bytes(len8);
        if values % 2 != 0 {
            return Err(Error::Format(format!("odd payload length {values}")));
        }
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        if payload.len() as u64 != values * 4 {
            return Err(Error::Format(format!(
                "payload holds {} bytes, header announces {} values",
                payload.len(),
                values
            )));
        }
        let samples = payload
            .chunks_exact(8)
            .map(|c| {
                Complex::new(
                    f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                    f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
                )
            })
            .collect();
        let file = Self { metadata, samples };
        file.validate()?;
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }
}
