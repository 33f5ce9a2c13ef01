//! Sounding waveform: m-sequence generation, the header + repeated-body frame,
//! and root-raised-cosine shaped BPSK modulation.
//!
//! Chips are mapped `0 → −1`, `1 → +1`. Pulse taps are scaled so that one
//! chip carries unit energy in continuous time, i.e. `Σ h² = samples_per_chip`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

/// Feedback taps (1-based register positions, output stage = `degree`) of a
/// primitive polynomial for every supported LFSR degree.
///
/// Taken from the maximal-length tap table of Xilinx XAPP052; each entry is
/// exercised by the exhaustive period test below.
const PRIMITIVE_TAPS: [&[u32]; 19] = [
    &[2, 1],
    &[3, 2],
    &[4, 3],
    &[5, 3],
    &[6, 5],
    &[7, 6],
    &[8, 6, 5, 4],
    &[9, 5],
    &[10, 7],
    &[11, 9],
    &[12, 6, 4, 1],
    &[13, 4, 3, 1],
    &[14, 5, 3, 1],
    &[15, 14],
    &[16, 15, 13, 4],
    &[17, 14],
    &[18, 11],
    &[19, 6, 2, 1],
    &[20, 17],
];

pub const MIN_DEGREE: u32 = 2;
pub const MAX_DEGREE: u32 = 20;

/// Default primitive feedback taps for `degree`.
pub fn default_taps(degree: u32) -> Result<&'static [u32]> {
    if !(MIN_DEGREE..=MAX_DEGREE).contains(&degree) {
        return Err(Error::OutOfRange {
            what: "LFSR degree",
            value: degree as f64,
            min: MIN_DEGREE as f64,
            max: MAX_DEGREE as f64,
        });
    }
    Ok(PRIMITIVE_TAPS[(degree - MIN_DEGREE) as usize])
}

/// A binary chip stream. For m-sequences the generating register is recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChipSequence {
    chips: Vec<bool>,
    degree: Option<u32>,
    taps: Vec<u32>,
}

impl ChipSequence {
    /// Wraps an arbitrary chip stream (no generator recorded).
    pub fn from_chips(chips: Vec<bool>) -> Self {
        Self {
            chips,
            degree: None,
            taps: Vec::new(),
        }
    }

    pub fn chips(&self) -> &[bool] {
        &self.chips
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    /// LFSR register length, if this is a generated m-sequence.
    pub fn degree(&self) -> Option<u32> {
        self.degree
    }

    pub fn taps(&self) -> &[u32] {
        &self.taps
    }

    /// `±1` symbols.
    pub fn bipolar<T: Real>(&self) -> Vec<T> {
        self.chips
            .iter()
            .map(|&c| if c { T::one() } else { -T::one() })
            .collect()
    }

    /// Periodic autocorrelation of the `±1` mapping at `lag`.
    pub fn periodic_autocorrelation(&self, lag: usize) -> i64 {
        let n = self.chips.len();
        (0..n)
            .map(|i| {
                if self.chips[i] == self.chips[(i + lag) % n] {
                    1
                } else {
                    -1
                }
            })
            .sum()
    }
}

/// Generates one period of the maximal-length sequence of a Fibonacci LFSR.
///
/// `taps` are 1-based register stages XOR-ed into the feedback, the output
/// being stage `degree` (so `{3, 2}` is `x³ + x² + 1`). `seed` is the initial
/// register content, bit `i` holding stage `i + 1`.
pub fn generate_mseq(degree: u32, taps: &[u32], seed: u32) -> Result<ChipSequence> {
    if !(MIN_DEGREE..=MAX_DEGREE).contains(&degree) {
        return Err(Error::OutOfRange {
            what: "LFSR degree",
            value: degree as f64,
            min: MIN_DEGREE as f64,
            max: MAX_DEGREE as f64,
        });
    }
    if taps.is_empty() || taps.iter().any(|&t| t == 0 || t > degree) {
        return Err(Error::InvalidParameter(format!(
            "feedback taps {taps:?} must lie in 1..={degree}"
        )));
    }
    if !taps.contains(&degree) {
        return Err(Error::InvalidParameter(format!(
            "feedback taps {taps:?} must include the output stage {degree}"
        )));
    }
    let mask: u32 = (1u32 << degree) - 1;
    if seed & mask == 0 || seed & !mask != 0 {
        return Err(Error::InvalidParameter(format!(
            "seed {seed:#x} must be a non-zero {degree}-bit register state"
        )));
    }

    let feedback_mask = taps.iter().fold(0u32, |m, &t| m | 1 << (t - 1));
    let expected = (1usize << degree) - 1;
    let mut chips = Vec::with_capacity(expected);
    let mut state = seed;
    for i in 0..expected {
        chips.push(state >> (degree - 1) & 1 == 1);
        let fb = (state & feedback_mask).count_ones() & 1;
        state = ((state << 1) | fb) & mask;
        if state == seed && i + 1 < expected {
            return Err(Error::NonPrimitive {
                degree,
                taps: taps.to_vec(),
                period: i + 1,
                expected,
            });
        }
    }

    let mut taps = taps.to_vec();
    taps.sort_unstable_by(|a, b| b.cmp(a));
    Ok(ChipSequence {
        chips,
        degree: Some(degree),
        taps,
    })
}

/// m-sequence of `degree` from the default primitive-polynomial table.
pub fn default_mseq(degree: u32, seed: u32) -> Result<ChipSequence> {
    generate_mseq(degree, default_taps(degree)?, seed)
}

/// The sounding frame: one long header sequence followed by a shorter body
/// sequence repeated `repetitions` times.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLayout<T: Real> {
    pub header: ChipSequence,
    pub body: ChipSequence,
    pub repetitions: usize,
    pub chip_duration_ns: T,
}

pub const DEFAULT_HEADER_DEGREE: u32 = 13;
pub const DEFAULT_BODY_DEGREE: u32 = 12;
pub const DEFAULT_REPETITIONS: usize = 16;
pub const DEFAULT_CHIP_DURATION_NS: f64 = 0.1;

impl<T: Real> FrameLayout<T> {
    pub fn new(
        header_degree: u32,
        body_degree: u32,
        repetitions: usize,
        chip_duration_ns: T,
    ) -> Result<Self> {
        if repetitions == 0 {
            return Err(Error::InvalidParameter("repetitions must be ≥ 1".into()));
        }
        if !(chip_duration_ns > T::zero()) {
            return Err(Error::InvalidParameter("chip duration must be > 0".into()));
        }
        Ok(Self {
            header: default_mseq(header_degree, 1)?,
            body: default_mseq(body_degree, 1)?,
            repetitions,
            chip_duration_ns,
        })
    }

    /// 8191-chip header, 16 × 4095-chip body, 0.1 ns chips.
    pub fn campaign() -> Self {
        Self::new(
            DEFAULT_HEADER_DEGREE,
            DEFAULT_BODY_DEGREE,
            DEFAULT_REPETITIONS,
            T::lit(DEFAULT_CHIP_DURATION_NS),
        )
        .expect("default layout is valid")
    }

    pub fn total_chips(&self) -> usize {
        self.header.len() + self.repetitions * self.body.len()
    }

    pub fn frame_duration_ns(&self) -> T {
        T::from_usize_lossy(self.total_chips()) * self.chip_duration_ns
    }

    pub fn chip_rate_hz(&self) -> T {
        T::lit(1e9) / self.chip_duration_ns
    }

    /// Longest excess delay the periodic body can resolve without aliasing.
    pub fn max_unambiguous_delay_ns(&self) -> T {
        T::from_usize_lossy(self.body.len()) * self.chip_duration_ns
    }

    /// Reciprocal of the frame duration.
    pub fn frame_rate_hz(&self) -> T {
        T::lit(1e9) / self.frame_duration_ns()
    }
}

/// `header ‖ body × repetitions`.
pub fn build_frame<T: Real>(layout: &FrameLayout<T>) -> ChipSequence {
    let mut chips = Vec::with_capacity(layout.total_chips());
    chips.extend_from_slice(layout.header.chips());
    for _ in 0..layout.repetitions {
        chips.extend_from_slice(layout.body.chips());
    }
    ChipSequence::from_chips(chips)
}

/// Root-raised-cosine pulse. `span_chips == 1` selects a rectangular pulse
/// one chip long.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseShape<T> {
    pub rolloff: T,
    pub span_chips: usize,
    pub samples_per_chip: usize,
}

impl<T: Real> Default for PulseShape<T> {
    fn default() -> Self {
        Self {
            rolloff: T::lit(0.25),
            span_chips: 12,
            samples_per_chip: 4,
        }
    }
}

impl<T: Real> PulseShape<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rolloff >= T::zero() && self.rolloff <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "rolloff {} outside [0, 1]",
                self.rolloff
            )));
        }
        if self.span_chips == 0 || self.samples_per_chip == 0 {
            return Err(Error::InvalidParameter(
                "span and samples per chip must be ≥ 1".into(),
            ));
        }
        Ok(())
    }

    pub fn is_rectangular(&self) -> bool {
        self.span_chips == 1
    }

    /// Filter taps, normalized to `Σ h² = samples_per_chip`.
    pub fn taps(&self) -> Vec<T> {
        let sps = self.samples_per_chip;
        if self.is_rectangular() {
            return vec![T::one(); sps];
        }
        let len = self.span_chips * sps + 1;
        let centre = T::from_usize_lossy(self.span_chips * sps) / T::lit(2.0);
        let beta = self.rolloff;
        let mut h: Vec<T> = (0..len)
            .map(|i| rrc_value((T::from_usize_lossy(i) - centre) / T::from_usize_lossy(sps), beta))
            .collect();
        let energy: T = h.iter().map(|v| *v * *v).sum();
        let scale = (T::from_usize_lossy(sps) / energy).sqrt();
        for v in h.iter_mut() {
            *v *= scale;
        }
        h
    }

    /// Tap index aligned with the chip instant.
    pub fn centre(&self) -> usize {
        if self.is_rectangular() {
            0
        } else {
            self.span_chips * self.samples_per_chip / 2
        }
    }

    /// `Σ h²` of the normalized taps.
    pub fn energy(&self) -> T {
        self.taps().iter().map(|v| *v * *v).sum()
    }

    /// One-sided occupied bandwidth `R_c (1 + β) / 2`.
    pub fn half_bandwidth_hz(&self, chip_rate_hz: T) -> T {
        chip_rate_hz * (T::one() + self.rolloff) / T::lit(2.0)
    }
}

/// Continuous RRC impulse response at `t` chips (unnormalized).
fn rrc_value<T: Real>(t: T, beta: T) -> T {
    let pi = T::PI();
    let one = T::one();
    let four = T::lit(4.0);
    let eps = T::lit(1e-9);
    if t.abs() < eps {
        return one - beta + four * beta / pi;
    }
    if beta > T::zero() && (t.abs() - one / (four * beta)).abs() < eps {
        let arg = pi / (four * beta);
        let two = T::lit(2.0);
        return beta / two.sqrt()
            * ((one + two / pi) * arg.sin() + (one - two / pi) * arg.cos());
    }
    let num = (pi * t * (one - beta)).sin() + four * beta * t * (pi * t * (one + beta)).cos();
    let den = pi * t * (one - (four * beta * t).powi(2));
    num / den
}

/// Uniformly sampled complex waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandSignal<T: Real> {
    pub samples: Vec<Complex<T>>,
    pub sample_rate: T,
    /// Carrier the samples are centred on, 0 for pure baseband.
    pub if_frequency: T,
    /// Time of sample 0 in seconds.
    pub origin_time: T,
}

impl<T: Real> BasebandSignal<T> {
    pub fn new(samples: Vec<Complex<T>>, sample_rate: T) -> Self {
        Self {
            samples,
            sample_rate,
            if_frequency: T::zero(),
            origin_time: T::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> T {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn mean_power(&self) -> T {
        if self.samples.is_empty() {
            return T::zero();
        }
        self.energy() / T::from_usize_lossy(self.samples.len())
    }

    pub fn sample_period_ns(&self) -> T {
        T::lit(1e9) / self.sample_rate
    }

    /// Removes the IF carrier, returning a pure baseband copy.
    pub fn to_baseband(&self) -> Self {
        if self.if_frequency == T::zero() {
            return self.clone();
        }
        let mut out = self.clone();
        rotate(&mut out.samples, -self.if_frequency, self.sample_rate, self.origin_time);
        out.if_frequency = T::zero();
        out
    }
}

/// Multiplies `x[n]` by `exp(j·2π·f·(t0 + n/fs))`.
pub(crate) fn rotate<T: Real>(x: &mut [Complex<T>], freq_hz: T, sample_rate: T, t0: T) {
    if freq_hz == T::zero() {
        return;
    }
    let step = T::TAU() * freq_hz / sample_rate;
    let base = T::TAU() * freq_hz * t0;
    for (n, s) in x.iter_mut().enumerate() {
        let ph = base + step * T::from_usize_lossy(n);
        *s = *s * Complex::from_polar(T::one(), ph);
    }
}

/// BPSK-maps `frame`, shapes it with `shape` and optionally moves it to
/// `if_frequency`. The output has `samples_per_chip` samples per chip and is
/// aligned so chip `k` peaks at sample `k·samples_per_chip`.
pub fn modulate<T: Real>(
    frame: &ChipSequence,
    shape: &PulseShape<T>,
    chip_rate_hz: T,
    if_frequency: T,
) -> Result<BasebandSignal<T>> {
    shape.validate()?;
    if shape.samples_per_chip < 2 {
        return Err(Error::InvalidParameter(
            "modulation needs at least 2 samples per chip".into(),
        ));
    }
    if frame.is_empty() {
        return Err(Error::Empty("chip stream"));
    }
    let sps = shape.samples_per_chip;
    let sample_rate = chip_rate_hz * T::from_usize_lossy(sps);
    let bandwidth = chip_rate_hz * (T::one() + shape.rolloff);
    let nyquist = sample_rate / T::lit(2.0);
    if if_frequency.abs() + bandwidth > nyquist {
        return Err(Error::Aliasing {
            if_frequency_hz: if_frequency.as_f64(),
            bandwidth_hz: bandwidth.as_f64(),
            nyquist_hz: nyquist.as_f64(),
        });
    }

    let h = shape.taps();
    let centre = shape.centre() as isize;
    let symbols = frame.bipolar::<T>();
    let len = symbols.len() * sps;
    let mut out = vec![Complex::new(T::zero(), T::zero()); len];
    for (k, &a) in symbols.iter().enumerate() {
        let origin = (k * sps) as isize - centre;
        for (i, &hv) in h.iter().enumerate() {
            let n = origin + i as isize;
            if n >= 0 && (n as usize) < len {
                out[n as usize].re += a * hv;
            }
        }
    }
    rotate(&mut out, if_frequency, sample_rate, T::zero());
    Ok(BasebandSignal {
        samples: out,
        sample_rate,
        if_frequency,
        origin_time: T::zero(),
    })
}

/// One period of the shaped body as a circularly convolved replica, the
/// local reference of the sliding correlator.
pub fn periodic_replica<T: Real>(seq: &ChipSequence, shape: &PulseShape<T>) -> Vec<Complex<T>> {
    let sps = shape.samples_per_chip;
    let n = seq.len() * sps;
    let h = shape.taps();
    let centre = shape.centre();
    let mut out = vec![Complex::new(T::zero(), T::zero()); n];
    for (k, a) in seq.bipolar::<T>().into_iter().enumerate() {
        for (i, &hv) in h.iter().enumerate() {
            let idx = (k * sps + i + n - centre % n) % n;
            out[idx].re += a * hv;
        }
    }
    out
}

/// Matched-filter chip decisions for a baseband or IF signal produced by
/// [`modulate`] with the same `shape`.
pub fn demodulate<T: Real>(signal: &BasebandSignal<T>, shape: &PulseShape<T>) -> Vec<bool> {
    let bb = signal.to_baseband();
    let sps = shape.samples_per_chip;
    let h = shape.taps();
    let centre = shape.centre();
    let chips = bb.samples.len() / sps;
    (0..chips)
        .map(|k| {
            // correlate against the pulse centred on chip k
            let mut acc = T::zero();
            for (i, &hv) in h.iter().enumerate() {
                let n = (k * sps + i) as isize - centre as isize;
                if n >= 0 && (n as usize) < bb.samples.len() {
                    acc += bb.samples[n as usize].re * hv;
                }
            }
            acc > T::zero()
        })
        .collect()
}
