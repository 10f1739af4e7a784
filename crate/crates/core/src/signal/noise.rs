//! Calibrated circular complex AWGN.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::gen::ComplexSignal;
use super::SignalError;
use crate::rng::stream;

/// Adds circular complex Gaussian noise such that
/// `10·log10(signal_power / noise_power) = snr_db`, with signal power
/// measured over the full window (gaps included). `snr_db = +∞` is the
/// no-noise sentinel and returns the input unchanged.
pub fn add_awgn(
    signal: &ComplexSignal,
    snr_db: f64,
    seed: u64,
) -> Result<ComplexSignal, SignalError> {
    if signal.is_empty() {
        return Err(SignalError::ZeroPower);
    }
    if snr_db.is_infinite() && snr_db > 0.0 {
        return Ok(signal.clone());
    }
    let p_sig = signal.mean_power();
    if p_sig <= 0.0 {
        return Err(SignalError::ZeroPower);
    }
    let p_noise = p_sig * 10f64.powf(-snr_db / 10.0);
    // Circular: half the power in each quadrature.
    let sigma = (p_noise / 2.0).sqrt();
    let mut rng = stream(seed, &[]);
    let samples = signal
        .samples
        .iter()
        .map(|&s| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            s + Complex64::new(sigma * re, sigma * im)
        })
        .collect();
    Ok(ComplexSignal { samples, sample_rate_hz: signal.sample_rate_hz })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_tone(n: usize) -> ComplexSignal {
        let samples = (0..n)
            .map(|i| Complex64::from_polar(1.0, 0.01 * i as f64))
            .collect();
        ComplexSignal { samples, sample_rate_hz: 1e6 }
    }

    #[test]
    fn zero_db_means_equal_powers() {
        let x = unit_tone(200_000);
        let y = add_awgn(&x, 0.0, 3).unwrap();
        let p_noise = y
            .samples
            .iter()
            .zip(&x.samples)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / x.len() as f64;
        assert!((p_noise - 1.0).abs() < 0.02, "noise power {p_noise}");
    }

    #[test]
    fn infinite_snr_is_identity() {
        let x = unit_tone(64);
        let y = add_awgn(&x, f64::INFINITY, 9).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn empty_and_zero_power_are_rejected() {
        let empty = ComplexSignal { samples: vec![], sample_rate_hz: 1.0 };
        assert!(add_awgn(&empty, 0.0, 0).is_err());
        let silent = ComplexSignal {
            samples: vec![Complex64::new(0.0, 0.0); 16],
            sample_rate_hz: 1.0,
        };
        assert!(add_awgn(&silent, 0.0, 0).is_err());
    }

    #[test]
    fn deterministic_in_seed() {
        let x = unit_tone(128);
        assert_eq!(add_awgn(&x, -5.0, 11).unwrap(), add_awgn(&x, -5.0, 11).unwrap());
        assert_ne!(add_awgn(&x, -5.0, 11).unwrap(), add_awgn(&x, -5.0, 12).unwrap());
    }
}
