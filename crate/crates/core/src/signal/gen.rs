//! Burst waveform synthesis for a single labeled pulse spec.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;

use super::codes::{barker_phases, frank_phases, polyphase_barker_phases, zadoff_chu_phases};
use super::SignalError;
use crate::rng::stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    RadCharLike,
    RadNistLike,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Unmodulated coherent pulse train (RadChar naming).
    CoherentPulseTrain,
    /// Biphase Barker code of the given length.
    Barker { length: usize },
    /// Progressive-phase polyphase Barker.
    PolyphaseBarker { length: usize },
    /// Frank polyphase code of order m (m² chips).
    Frank { m: usize },
    /// Linear frequency modulation sweeping `bandwidth` over the pulse.
    Lfm,
    /// Unmodulated rectangular pulse (RadNIST P0N naming).
    P0n,
    /// Zadoff–Chu phase code (RadNIST Q3N-style coded pulse).
    ZadoffChu { root: u32, length: usize },
}

impl Scheme {
    fn allowed_in(self, family: Family) -> bool {
        use Scheme::*;
        match family {
            Family::RadCharLike => matches!(
                self,
                CoherentPulseTrain | Barker { .. } | PolyphaseBarker { .. } | Frank { .. } | Lfm
            ),
            // Q3N coded variants: the phase codes; plus the unmodulated P0N.
            Family::RadNistLike => {
                matches!(self, P0n | Barker { .. } | Frank { .. } | ZadoffChu { .. })
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PulseSpec {
    pub family: Family,
    pub scheme: Scheme,
    pub pulse_width_s: f64,
    pub pri_s: f64,
    pub pulses_per_burst: u32,
    pub bandwidth_hz: f64,
    pub sample_rate_hz: f64,
    /// Carrier the burst is emitted on within the sampled band; the
    /// preprocessing chain mixes it back down.
    pub carrier_offset_hz: f64,
}

impl PulseSpec {
    pub fn validate(&self) -> Result<(), SignalError> {
        if !(self.pulse_width_s > 0.0) {
            return Err(SignalError::InvalidSpec("pulse_width must be > 0".into()));
        }
        if self.pri_s < self.pulse_width_s {
            return Err(SignalError::InvalidSpec("pri must be >= pulse_width".into()));
        }
        if self.pulses_per_burst < 1 {
            return Err(SignalError::InvalidSpec("pulses_per_burst must be >= 1".into()));
        }
        if self.sample_rate_hz < 2.0 * self.bandwidth_hz {
            return Err(SignalError::InvalidSpec(
                "sample_rate must be >= 2*bandwidth".into(),
            ));
        }
        if !self.scheme.allowed_in(self.family) {
            return Err(SignalError::UnsupportedScheme {
                family: self.family,
                scheme: self.scheme,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSignal {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
}

impl ComplexSignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean power over the whole window.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

#[derive(Clone, Debug)]
pub struct LabeledWaveform {
    pub signal: ComplexSignal,
    pub class_label: usize,
    pub snr_db: f64,
    pub task_id: usize,
}

/// Chip phase sequence for a coded scheme; `None` for unmodulated / LFM.
fn chip_phases(scheme: Scheme) -> Result<Option<Vec<f64>>, SignalError> {
    Ok(match scheme {
        Scheme::CoherentPulseTrain | Scheme::P0n | Scheme::Lfm => None,
        Scheme::Barker { length } => Some(barker_phases(length)?),
        Scheme::PolyphaseBarker { length } => Some(polyphase_barker_phases(length)?),
        Scheme::Frank { m } => Some(frank_phases(m)),
        Scheme::ZadoffChu { root, length } => Some(zadoff_chu_phases(root, length)),
    })
}

/// Synthesizes one burst. The only randomness is a uniform initial carrier
/// phase drawn from `seed`; everything else is a pure function of the spec.
///
/// On-pulse samples have exactly unit modulus (constant-envelope schemes),
/// so on-pulse mean power is 1. Inter-pulse gaps are zero.
pub fn generate_pulse(spec: &PulseSpec, seed: u64) -> Result<ComplexSignal, SignalError> {
    spec.validate()?;
    let fs = spec.sample_rate_hz;
    let n_total = (spec.pri_s * fs * spec.pulses_per_burst as f64).round() as usize;
    let n_pri = (spec.pri_s * fs).round() as usize;
    let n_on = ((spec.pulse_width_s * fs).round() as usize).min(n_pri).max(1);

    let chips = chip_phases(spec.scheme)?;
    let phi0: f64 = stream(seed, &[]).gen::<f64>() * TAU;
    let f_off = spec.carrier_offset_hz;
    let bw = spec.bandwidth_hz;
    let pw = spec.pulse_width_s;

    let mut samples = vec![Complex64::new(0.0, 0.0); n_total];
    for k in 0..spec.pulses_per_burst as usize {
        let start = (k as f64 * spec.pri_s * fs).round() as usize;
        for i in 0..n_on {
            let n = start + i;
            if n >= n_total {
                break;
            }
            // Global time keeps the carrier coherent across the burst.
            let t = n as f64 / fs;
            let modulation = match (&chips, spec.scheme) {
                (Some(ph), _) => {
                    // Equal chip durations: chip c spans samples
                    // [c·n_on/N, (c+1)·n_on/N).
                    let c = (i * ph.len()) / n_on;
                    ph[c.min(ph.len() - 1)]
                }
                (None, Scheme::Lfm) => {
                    // Sweep −bw/2 → +bw/2 over the pulse width.
                    let tl = i as f64 / fs;
                    TAU * (0.5 * bw / pw * tl * tl - 0.5 * bw * tl)
                }
                (None, _) => 0.0,
            };
            let phase = TAU * f_off * t + modulation + phi0;
            samples[n] = Complex64::from_polar(1.0, phase);
        }
    }
    Ok(ComplexSignal { samples, sample_rate_hz: fs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> PulseSpec {
        PulseSpec {
            family: Family::RadCharLike,
            scheme: Scheme::Lfm,
            pulse_width_s: 10e-6,
            pri_s: 20e-6,
            pulses_per_burst: 3,
            bandwidth_hz: 1e6,
            sample_rate_hz: 3.2e6,
            carrier_offset_hz: 0.0,
        }
    }

    #[test]
    fn on_pulse_power_is_exactly_unit() {
        let sig = generate_pulse(&base_spec(), 7).unwrap();
        let on: Vec<_> = sig.samples.iter().filter(|s| s.norm_sqr() > 0.0).collect();
        assert!(!on.is_empty());
        let p = on.iter().map(|s| s.norm_sqr()).sum::<f64>() / on.len() as f64;
        assert!((p - 1.0).abs() < 1e-6);
        // Duty cycle 50%: on-samples = ppb * round(pw*fs)
        assert_eq!(on.len(), 3 * 32);
    }

    #[test]
    fn deterministic_in_seed() {
        let a = generate_pulse(&base_spec(), 42).unwrap();
        let b = generate_pulse(&base_spec(), 42).unwrap();
        let c = generate_pulse(&base_spec(), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c, "different seeds must change the initial phase");
    }

    #[test]
    fn family_scheme_mismatches_are_rejected() {
        let mut s = base_spec();
        s.scheme = Scheme::P0n;
        assert!(matches!(
            generate_pulse(&s, 0),
            Err(SignalError::UnsupportedScheme { .. })
        ));
        s.family = Family::RadNistLike;
        assert!(generate_pulse(&s, 0).is_ok());
        s.scheme = Scheme::Lfm;
        assert!(matches!(
            generate_pulse(&s, 0),
            Err(SignalError::UnsupportedScheme { .. })
        ));
    }

    #[test]
    fn spec_invariants_are_enforced() {
        let mut s = base_spec();
        s.pri_s = 5e-6; // < pulse_width
        assert!(generate_pulse(&s, 0).is_err());
        let mut s = base_spec();
        s.bandwidth_hz = 2e6; // fs < 2*bw
        assert!(generate_pulse(&s, 0).is_err());
        let mut s = base_spec();
        s.pulses_per_burst = 0;
        assert!(generate_pulse(&s, 0).is_err());
    }

    #[test]
    fn barker13_chips_have_biphase_relative_phases_and_equal_durations() {
        // 13 chips * 4 samples each: pw = 52 samples at 3.2 MHz.
        let spec = PulseSpec {
            family: Family::RadCharLike,
            scheme: Scheme::Barker { length: 13 },
            pulse_width_s: 52.0 / 3.2e6,
            pri_s: 60.0 / 3.2e6,
            pulses_per_burst: 1,
            bandwidth_hz: 0.8e6,
            sample_rate_hz: 3.2e6,
            carrier_offset_hz: 0.0,
        };
        let sig = generate_pulse(&spec, 5).unwrap();
        let signs = crate::signal::barker(13).unwrap();
        for (i, chip_sign) in signs.iter().enumerate() {
            for j in 0..4 {
                let z = sig.samples[i * 4 + j] / sig.samples[0];
                let expected = if *chip_sign > 0 { 1.0 } else { -1.0 };
                assert!(
                    (z.re - expected).abs() < 1e-9 && z.im.abs() < 1e-9,
                    "chip {i} sample {j}: got {z}"
                );
            }
        }
    }
}
