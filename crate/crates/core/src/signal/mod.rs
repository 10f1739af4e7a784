//! Labeled radar pulse waveform synthesis.
//!
//! Two families are supported, mirroring the two public pulse datasets the
//! classifier is aimed at:
//!
//! * **RadChar-like** — bursts with intra-pulse modulation drawn from
//!   {coherent pulse train, Barker, polyphase Barker, Frank, LFM};
//! * **RadNIST-like** — rectangular P0N pulses and Q3N phase-coded variants
//!   (Barker, Frank, Zadoff–Chu).
//!
//! A waveform is a burst of `pulses_per_burst` pulses at the configured PRI,
//! phase-coherent across the burst, unit power on-pulse, zero signal in the
//! inter-pulse gaps. Calibrated circular complex AWGN is added over the full
//! window, so low duty cycles genuinely lower the per-sample SNR.

mod codes;
mod dataset;
mod gen;
mod noise;

pub use codes::{barker, frank_phases, polyphase_barker_phases, zadoff_chu_phases};
pub use dataset::{build_dataset, ClassSpec, Jitter, SnrGrid};
pub use gen::{generate_pulse, ComplexSignal, Family, LabeledWaveform, PulseSpec, Scheme};
pub use noise::add_awgn;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("unsupported scheme {scheme:?} for family {family:?}")]
    UnsupportedScheme { family: Family, scheme: Scheme },
    #[error("invalid pulse spec: {0}")]
    InvalidSpec(String),
    #[error("cannot add noise to an empty or zero-power signal")]
    ZeroPower,
    #[error("dataset needs at least one class spec")]
    EmptySpecList,
    #[error("invalid SNR grid: {0}")]
    InvalidSnrGrid(String),
    #[error("unknown Barker length {0} (known: 2,3,4,5,7,11,13)")]
    UnknownBarkerLength(usize),
}
