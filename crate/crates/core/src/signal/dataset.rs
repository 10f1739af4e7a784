//! Balanced dataset assembly with parameter jitter and gridded SNR tags.

use rand::Rng;

use super::gen::{generate_pulse, Family, LabeledWaveform, PulseSpec, Scheme};
use super::noise::add_awgn;
use super::SignalError;
use crate::rng::{derive_seed, stream};

/// Inclusive uniform jitter range; `lo == hi` means the parameter is fixed
/// (and consumes no randomness, keeping zero-jitter runs maximally stable).
#[derive(Clone, Copy, Debug)]
pub struct Jitter {
    pub lo: f64,
    pub hi: f64,
}

impl Jitter {
    pub fn fixed(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "jitter range inverted");
        Self { lo, hi }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..self.hi)
        }
    }

    fn sample_count(&self, rng: &mut impl Rng) -> u32 {
        let (lo, hi) = (self.lo.round() as u32, self.hi.round() as u32);
        if lo >= hi {
            lo
        } else {
            rng.gen_range(lo..=hi)
        }
    }
}

/// Per-class generation recipe: a scheme plus jitter ranges for the burst
/// timing parameters.
#[derive(Clone, Debug)]
pub struct ClassSpec {
    pub label: usize,
    pub family: Family,
    pub scheme: Scheme,
    pub pulse_width_s: Jitter,
    pub pri_s: Jitter,
    pub pulses_per_burst: Jitter,
    pub bandwidth_hz: f64,
    pub sample_rate_hz: f64,
    pub carrier_offset_hz: f64,
}

/// Evenly spaced SNR grid `start, start+step, …, stop` (inclusive).
#[derive(Clone, Copy, Debug)]
pub struct SnrGrid {
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
}

impl SnrGrid {
    pub fn validate(&self) -> Result<(), SignalError> {
        if !(self.step_db > 0.0) {
            return Err(SignalError::InvalidSnrGrid("step must be > 0".into()));
        }
        if self.stop_db < self.start_db {
            return Err(SignalError::InvalidSnrGrid("stop < start".into()));
        }
        let span = (self.stop_db - self.start_db) / self.step_db;
        if (span - span.round()).abs() > 1e-9 {
            return Err(SignalError::InvalidSnrGrid(
                "step must divide the range exactly".into(),
            ));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop_db - self.start_db) / self.step_db).round() as usize + 1;
        (0..n).map(|i| self.start_db + i as f64 * self.step_db).collect()
    }
}

/// Builds a balanced labeled dataset: `n_per_class` waveforms per class,
/// timing jitter drawn per sample, SNR tags uniform over the grid.
///
/// Seed discipline: the *pulse* seed depends only on (seed, task, class), so
/// zero-jitter classes produce identical clean bursts across samples and
/// differ only in noise realization; jitter and noise use per-sample
/// streams. Two calls with equal arguments are bit-identical.
pub fn build_dataset(
    task_id: usize,
    classes: &[ClassSpec],
    n_per_class: usize,
    grid: &SnrGrid,
    seed: u64,
) -> Result<Vec<LabeledWaveform>, SignalError> {
    if classes.is_empty() {
        return Err(SignalError::EmptySpecList);
    }
    if n_per_class == 0 {
        return Err(SignalError::InvalidSpec("n_per_class must be >= 1".into()));
    }
    grid.validate()?;
    let snrs = grid.values();

    let mut out = Vec::with_capacity(classes.len() * n_per_class);
    for class in classes {
        let pulse_seed = derive_seed(seed, &[task_id as u64, class.label as u64]);
        for idx in 0..n_per_class {
            let mut jit = stream(seed, &[task_id as u64, class.label as u64, idx as u64, 0]);
            let spec = PulseSpec {
                family: class.family,
                scheme: class.scheme,
                pulse_width_s: class.pulse_width_s.sample(&mut jit),
                pri_s: class.pri_s.sample(&mut jit),
                pulses_per_burst: class.pulses_per_burst.sample_count(&mut jit),
                bandwidth_hz: class.bandwidth_hz,
                sample_rate_hz: class.sample_rate_hz,
                carrier_offset_hz: class.carrier_offset_hz,
            };
            let snr_db = snrs[jit.gen_range(0..snrs.len())];
            let clean = generate_pulse(&spec, pulse_seed)?;
            let noise_seed =
                derive_seed(seed, &[task_id as u64, class.label as u64, idx as u64, 1]);
            let noisy = add_awgn(&clean, snr_db, noise_seed)?;
            out.push(LabeledWaveform {
                signal: noisy,
                class_label: class.label,
                snr_db,
                task_id,
            });
        }
    }
    Ok(out)
}
