//! Frame synchronization by normalized cross-correlation with the shaped
//! header.

use num_complex::Complex;

use crate::dsp::{self, FftPair};
use crate::error::{Error, Result};
use crate::waveform::{modulate, BasebandSignal, ChipSequence, PulseShape};
use crate::Real;

pub const DEFAULT_SYNC_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncResult<T> {
    /// Sample index of the first header chip.
    pub offset: usize,
    /// Normalized correlation magnitude in `[0, 1]` at `offset`.
    pub score: T,
}

/// Locates the header of `header_chips` (shaped with `shape` at
/// `chip_rate_hz`) in a baseband `signal`.
pub fn synchronize<T: Real>(
    signal: &BasebandSignal<T>,
    header_chips: &ChipSequence,
    shape: &PulseShape<T>,
    chip_rate_hz: T,
    threshold: T,
) -> Result<SyncResult<T>> {
    let header = modulate(header_chips, shape, chip_rate_hz, T::zero())?;
    synchronize_with(&signal.to_baseband(), &header.samples, threshold)
}

pub(crate) fn synchronize_with<T: Real>(
    signal: &BasebandSignal<T>,
    header: &[Complex<T>],
    threshold: T,
) -> Result<SyncResult<T>> {
    let x = &signal.samples;
    let lh = header.len();
    if x.len() < lh || lh == 0 {
        return Err(Error::NoFrameFound {
            score: 0.0,
            threshold: threshold.as_f64(),
        });
    }
    let n = dsp::next_fast_len(x.len() + lh);
    let plan = FftPair::new(n);
    let zero = Complex::new(T::zero(), T::zero());
    let mut a = x.clone();
    a.resize(n, zero);
    let mut b = header.to_vec();
    b.resize(n, zero);
    plan.forward(&mut a);
    plan.forward(&mut b);
    for (u, v) in a.iter_mut().zip(&b) {
        *u = *u * v.conj();
    }
    plan.inverse(&mut a);

    let h_norm = header.iter().map(|v| v.norm_sqr()).sum::<T>().sqrt();
    // running window energy of the received samples
    let mut cum = Vec::with_capacity(x.len() + 1);
    cum.push(0.0_f64);
    for v in x {
        let last = *cum.last().unwrap();
        cum.push(last + v.norm_sqr().as_f64());
    }
    let mut best = SyncResult {
        offset: 0,
        score: T::zero(),
    };
    for d in 0..=x.len() - lh {
        let e = (cum[d + lh] - cum[d]).max(0.0);
        if e <= 0.0 {
            continue;
        }
        let score = a[d].norm() / (h_norm * T::lit(e.sqrt()));
        if score > best.score {
            best = SyncResult { offset: d, score };
        }
    }
    if !(best.score >= threshold) {
        return Err(Error::NoFrameFound {
            score: best.score.as_f64(),
            threshold: threshold.as_f64(),
        });
    }
    Ok(best)
}
