//! Phase-code chip sequences: Barker, polyphase Barker, Frank, Zadoff–Chu.

use std::f64::consts::PI;

use super::SignalError;

/// Tabulated biphase Barker sign sequences (the complete set).
pub fn barker(length: usize) -> Result<&'static [i8], SignalError> {
    const B2: &[i8] = &[1, -1];
    const B3: &[i8] = &[1, 1, -1];
    const B4: &[i8] = &[1, 1, -1, 1];
    const B5: &[i8] = &[1, 1, 1, -1, 1];
    const B7: &[i8] = &[1, 1, 1, -1, -1, 1, -1];
    const B11: &[i8] = &[1, 1, 1, -1, -1, -1, 1, -1, -1, 1, -1];
    const B13: &[i8] = &[1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1];
    match length {
        2 => Ok(B2),
        3 => Ok(B3),
        4 => Ok(B4),
        5 => Ok(B5),
        7 => Ok(B7),
        11 => Ok(B11),
        13 => Ok(B13),
        n => Err(SignalError::UnknownBarkerLength(n)),
    }
}

/// Barker chip phases in {0, π}.
pub fn barker_phases(length: usize) -> Result<Vec<f64>, SignalError> {
    Ok(barker(length)?
        .iter()
        .map(|&s| if s > 0 { 0.0 } else { PI })
        .collect())
}

/// Polyphase Barker chips: the biphase Barker sequence under a progressive
/// phase rotation (total rotation π/2 across the code). Multiplying chip n
/// by e^{jθn} multiplies the aperiodic autocorrelation at lag k by e^{jθk},
/// so sidelobe *magnitudes* — the Barker property — are preserved while the
/// phases become genuinely polyphase.
pub fn polyphase_barker_phases(length: usize) -> Result<Vec<f64>, SignalError> {
    let step = PI / (2.0 * length as f64);
    Ok(barker_phases(length)?
        .into_iter()
        .enumerate()
        .map(|(n, p)| p + step * n as f64)
        .collect())
}

/// Frank code of order `m`: m² chips with phase 2π·i·j/m for row i, col j.
pub fn frank_phases(m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            out.push(2.0 * PI * (i * j) as f64 / m as f64);
        }
    }
    out
}

/// Zadoff–Chu sequence phases for the given root; length-n sequence with
/// constant amplitude and ideal periodic autocorrelation when
/// gcd(root, n) = 1. Odd n uses n(n+1), even n uses n².
pub fn zadoff_chu_phases(root: u32, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let kf = k as f64;
            let arg = if n % 2 == 1 { kf * (kf + 1.0) } else { kf * kf };
            -PI * root as f64 * arg / n as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Aperiodic autocorrelation magnitudes of a unit-modulus chip sequence.
    fn acf_mags(phases: &[f64]) -> Vec<f64> {
        let n = phases.len();
        (0..n)
            .map(|lag| {
                let (mut re, mut im) = (0.0, 0.0);
                for i in 0..n - lag {
                    let d = phases[i] - phases[i + lag];
                    re += d.cos();
                    im += d.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    #[test]
    fn all_barker_lengths_have_unit_peak_sidelobes() {
        for len in [2usize, 3, 4, 5, 7, 11, 13] {
            let mags = acf_mags(&barker_phases(len).unwrap());
            assert!((mags[0] - len as f64).abs() < 1e-9);
            for (lag, &m) in mags.iter().enumerate().skip(1) {
                assert!(
                    m <= 1.0 + 1e-9,
                    "Barker-{len} sidelobe {m} at lag {lag} exceeds 1"
                );
            }
        }
    }

    #[test]
    fn polyphase_rotation_preserves_acf_magnitudes() {
        for len in [5usize, 13] {
            let bi = acf_mags(&barker_phases(len).unwrap());
            let poly = acf_mags(&polyphase_barker_phases(len).unwrap());
            for (a, b) in bi.iter().zip(&poly) {
                assert!((a - b).abs() < 1e-9, "ACF magnitude changed: {a} vs {b}");
            }
        }
    }

    #[test]
    fn polyphase_chips_leave_the_biphase_alphabet() {
        let p = polyphase_barker_phases(13).unwrap();
        let off_axis = p
            .iter()
            .filter(|&&ph| {
                let m = (ph % PI).abs();
                m > 1e-6 && (PI - m).abs() > 1e-6
            })
            .count();
        assert!(off_axis > 5, "expected genuinely polyphase chips");
    }

    #[test]
    fn frank_code_structure() {
        let p = frank_phases(4);
        assert_eq!(p.len(), 16);
        assert_eq!(p[0], 0.0);
        // Row 1 advances by 2π/4 per column.
        assert!((p[5] - PI / 2.0).abs() < 1e-12);
        assert!((p[6] - PI).abs() < 1e-12);
    }

    #[test]
    fn zadoff_chu_has_flat_periodic_autocorrelation() {
        let n = 63;
        let p = zadoff_chu_phases(1, n);
        // Periodic ACF at nonzero lag should be ~0 for gcd(root, n)=1.
        for lag in 1..n {
            let (mut re, mut im) = (0.0, 0.0);
            for i in 0..n {
                let d = p[i] - p[(i + lag) % n];
                re += d.cos();
                im += d.sin();
            }
            let mag = (re * re + im * im).sqrt();
            assert!(mag < 1e-6, "ZC periodic sidelobe {mag} at lag {lag}");
        }
    }
}
