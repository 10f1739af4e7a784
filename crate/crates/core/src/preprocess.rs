//! Baseband conversion, low-pass filtering, decimation, I/Q interleaving and
//! framing into standardized fixed-width vectors.
//!
//! The chain is: `mix_to_baseband → lowpass_decimate → interleave_iq →
//! frame_and_standardize`, composed by [`preprocess_waveform`]. Every stage
//! is a pure function; frame counts are predictable from config alone.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use thiserror::Error;

use crate::signal::{ComplexSignal, LabeledWaveform};

/// Number of taps in the windowed-sinc low-pass. Odd, so the filter has an
/// exact integer group delay and "same"-aligned convolution is symmetric.
pub const FIR_TAPS: usize = 127;

/// Frames whose raw standard deviation falls below this floor are mapped to
/// all-zeros rather than amplified noise.
pub const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("invalid preprocess config: {0}")]
    InvalidConfig(String),
    #[error("waveform sample rate {got} Hz does not match config {want} Hz")]
    SampleRateMismatch { got: f64, want: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct PreprocessConfig {
    pub carrier_hz: f64,
    pub sample_rate_hz: f64,
    pub bandwidth_hz: f64,
    /// Width of one frame in real (interleaved) samples.
    pub frame_width: usize,
    pub overlap_fraction: f64,
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if !(self.sample_rate_hz > self.bandwidth_hz && self.bandwidth_hz > 0.0) {
            return Err(PreprocessError::InvalidConfig(
                "need sample_rate > bandwidth > 0".into(),
            ));
        }
        if self.frame_width == 0 || self.frame_width % 2 != 0 {
            return Err(PreprocessError::InvalidConfig(
                "frame_width must be even and nonzero".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(PreprocessError::InvalidConfig(
                "overlap_fraction must be in [0,1)".into(),
            ));
        }
        if self.carrier_hz >= self.sample_rate_hz / 2.0 {
            return Err(PreprocessError::InvalidConfig(
                "carrier must be below Nyquist".into(),
            ));
        }
        Ok(())
    }
}

/// One standardized training frame.
#[derive(Clone, Debug)]
pub struct Frame {
    pub values: Vec<f64>,
    pub class_label: usize,
    pub task_id: usize,
    pub snr_db: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecimationStatus {
    Decimated { factor: usize },
    /// Requested band exceeds what decimation can honor (M < 1): the signal
    /// passes through untouched.
    PassThroughNoDecimation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FramingStatus {
    Ok,
    /// Input shorter than one frame: no frames produced.
    InputTooShort,
}

/// Multiplies by `exp(−j·2π·f_c·n/f_s)`, shifting the carrier down to DC.
/// (Down-conversion takes the −j sign; the +j variant would shift the band
/// further up.)
pub fn mix_to_baseband(x: &ComplexSignal, carrier_hz: f64) -> ComplexSignal {
    assert!(
        carrier_hz < x.sample_rate_hz / 2.0,
        "carrier must be below Nyquist"
    );
    let w = -TAU * carrier_hz / x.sample_rate_hz;
    let samples = x
        .samples
        .iter()
        .enumerate()
        .map(|(n, &s)| s * Complex64::from_polar(1.0, w * n as f64))
        .collect();
    ComplexSignal { samples, sample_rate_hz: x.sample_rate_hz }
}

/// Hamming-windowed sinc taps, normalized to unit DC gain.
/// `cutoff_norm` is the cutoff in cycles/sample (f_cutoff / f_s).
pub fn lowpass_taps(n_taps: usize, cutoff_norm: f64) -> Vec<f64> {
    assert!(n_taps % 2 == 1, "odd tap count required");
    let mid = (n_taps / 2) as f64;
    let mut taps: Vec<f64> = (0..n_taps)
        .map(|k| {
            let t = k as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * cutoff_norm
            } else {
                (TAU * cutoff_norm * t).sin() / (PI * t)
            };
            let window = 0.54 - 0.46 * (TAU * k as f64 / (n_taps - 1) as f64).cos();
            sinc * window
        })
        .collect();
    let gain: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= gain;
    }
    taps
}

/// "Same"-aligned FIR convolution with zero-padded edges.
pub fn fir_same(x: &[Complex64], taps: &[f64]) -> Vec<Complex64> {
    let mid = taps.len() / 2;
    let n = x.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        let lo = mid.saturating_sub(i);
        let hi = taps.len().min(n + mid - i);
        for k in lo..hi {
            acc += x[i + k - mid] * taps[k];
        }
        *o = acc;
    }
    out
}

/// Low-pass at `f_cutoff = f_BW/2`, then keep every ⌊M⌋-th sample with
/// `M = f_s / (2·f_cutoff)`. `M < 1` passes through with a warning status.
pub fn lowpass_decimate(x: &ComplexSignal, bandwidth_hz: f64) -> (ComplexSignal, DecimationStatus) {
    let f_cutoff = bandwidth_hz / 2.0;
    let m_exact = x.sample_rate_hz / (2.0 * f_cutoff);
    if m_exact < 1.0 {
        return (x.clone(), DecimationStatus::PassThroughNoDecimation);
    }
    let taps = lowpass_taps(FIR_TAPS, f_cutoff / x.sample_rate_hz);
    let filtered = fir_same(&x.samples, &taps);
    let m = m_exact.floor() as usize;
    let samples: Vec<Complex64> = filtered.iter().step_by(m).copied().collect();
    (
        ComplexSignal { samples, sample_rate_hz: x.sample_rate_hz / m as f64 },
        DecimationStatus::Decimated { factor: m },
    )
}

/// `[i1, q1, i2, q2, …]` — even indices carry I, odd carry Q.
pub fn interleave_iq(x: &ComplexSignal) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * x.len());
    for s in &x.samples {
        out.push(s.re);
        out.push(s.im);
    }
    out
}

/// Splits `v` into frames of `frame_width` at hop
/// `round(frame_width·(1−overlap))`, standardizing each frame to zero mean
/// and unit variance (population σ; frames under the std floor become
/// zeros). The trailing remainder is dropped.
pub fn frame_and_standardize(
    v: &[f64],
    cfg: &PreprocessConfig,
) -> (Vec<Vec<f64>>, FramingStatus) {
    let width = cfg.frame_width;
    if v.len() < width {
        return (Vec::new(), FramingStatus::InputTooShort);
    }
    let hop = ((width as f64) * (1.0 - cfg.overlap_fraction)).round().max(1.0) as usize;
    let mut frames = Vec::new();
    let mut start = 0;
    while start + width <= v.len() {
        let window = &v[start..start + width];
        let mean = window.iter().sum::<f64>() / width as f64;
        let var = window.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / width as f64;
        let std = var.sqrt();
        let frame = if std < STD_FLOOR {
            vec![0.0; width]
        } else {
            window.iter().map(|&x| (x - mean) / std).collect()
        };
        frames.push(frame);
        start += hop;
    }
    (frames, FramingStatus::Ok)
}

/// Full chain for one labeled waveform; labels and tags are stamped onto
/// every produced frame.
pub fn preprocess_waveform(
    w: &LabeledWaveform,
    cfg: &PreprocessConfig,
) -> Result<Vec<Frame>, PreprocessError> {
    cfg.validate()?;
    if (w.signal.sample_rate_hz - cfg.sample_rate_hz).abs() > 1e-6 {
        return Err(PreprocessError::SampleRateMismatch {
            got: w.signal.sample_rate_hz,
            want: cfg.sample_rate_hz,
        });
    }
    let mixed = mix_to_baseband(&w.signal, cfg.carrier_hz);
    let (narrow, _status) = lowpass_decimate(&mixed, cfg.bandwidth_hz);
    let real = interleave_iq(&narrow);
    let (windows, _status) = frame_and_standardize(&real, cfg);
    Ok(windows
        .into_iter()
        .map(|values| Frame {
            values,
            class_label: w.class_label,
            task_id: w.task_id,
            snr_db: w.snr_db,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, fs: f64, n: usize) -> ComplexSignal {
        let samples = (0..n)
            .map(|i| Complex64::from_polar(1.0, TAU * freq * i as f64 / fs))
            .collect();
        ComplexSignal { samples, sample_rate_hz: fs }
    }

    fn cfg(width: usize, overlap: f64) -> PreprocessConfig {
        PreprocessConfig {
            carrier_hz: 0.0,
            sample_rate_hz: 10e6,
            bandwidth_hz: 2e6,
            frame_width: width,
            overlap_fraction: overlap,
        }
    }

    #[test]
    fn zero_carrier_mix_is_identity() {
        let x = tone(1e5, 1e6, 64);
        let y = mix_to_baseband(&x, 0.0);
        assert_eq!(x, y);
    }

    #[test]
    fn decimation_arithmetic_is_exact() {
        let x = tone(1e5, 10e6, 1000);
        let (y, status) = lowpass_decimate(&x, 2e6);
        assert_eq!(status, DecimationStatus::Decimated { factor: 5 });
        assert_eq!(y.sample_rate_hz, 2e6);
        assert_eq!(y.len(), 200);
    }

    #[test]
    fn m_below_one_passes_through() {
        let x = tone(1e5, 1e6, 100);
        let (y, status) = lowpass_decimate(&x, 4e6);
        assert_eq!(status, DecimationStatus::PassThroughNoDecimation);
        assert_eq!(y, x);
    }

    #[test]
    fn m_equal_one_filters_without_decimation() {
        let x = tone(1e4, 1e6, 300);
        let (y, status) = lowpass_decimate(&x, 1e6);
        assert_eq!(status, DecimationStatus::Decimated { factor: 1 });
        assert_eq!(y.len(), x.len());
        assert_eq!(y.sample_rate_hz, 1e6);
        assert_ne!(y, x, "filtering must have acted");
    }

    #[test]
    fn interleave_layout() {
        let x = ComplexSignal {
            samples: vec![Complex64::new(1.0, 2.0), Complex64::new(3.0, 4.0)],
            sample_rate_hz: 1.0,
        };
        assert_eq!(interleave_iq(&x), vec![1.0, 2.0, 3.0, 4.0]);
        let empty = ComplexSignal { samples: vec![], sample_rate_hz: 1.0 };
        assert!(interleave_iq(&empty).is_empty());
    }

    #[test]
    fn framing_counts_and_moments() {
        let v: Vec<f64> = (0..2048).map(|i| (i as f64 * 0.37).sin() + 0.2).collect();
        let (frames, status) = frame_and_standardize(&v, &cfg(1024, 0.5));
        assert_eq!(status, FramingStatus::Ok);
        assert_eq!(frames.len(), 3, "offsets 0, 512, 1024");
        for f in &frames {
            let mean = f.iter().sum::<f64>() / f.len() as f64;
            let var = f.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / f.len() as f64;
            assert!(mean.abs() < 1e-7, "mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-6, "std {}", var.sqrt());
        }
    }

    #[test]
    fn constant_input_standardizes_to_zeros() {
        let v = vec![3.25; 1024];
        let (frames, _) = frame_and_standardize(&v, &cfg(1024, 0.0));
        assert_eq!(frames.len(), 1);
        assert!(frames[0].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn short_input_yields_status() {
        let v = vec![1.0; 100];
        let (frames, status) = frame_and_standardize(&v, &cfg(1024, 0.0));
        assert!(frames.is_empty());
        assert_eq!(status, FramingStatus::InputTooShort);
    }

    #[test]
    fn config_validation_rejects_bad_fields() {
        let mut c = cfg(1024, 0.5);
        c.frame_width = 1023;
        assert!(c.validate().is_err());
        let mut c = cfg(1024, 0.5);
        c.overlap_fraction = 1.0;
        assert!(c.validate().is_err());
        let mut c = cfg(1024, 0.5);
        c.bandwidth_hz = 20e6;
        assert!(c.validate().is_err());
        let mut c = cfg(1024, 0.5);
        c.carrier_hz = 6e6;
        assert!(c.validate().is_err());
    }
}
