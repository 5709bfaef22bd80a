//! Seeded synthetic signals: speech-like tone complexes and a few noise types.
//! Used by tests, the toy SEGAN training set and the bundled corpus.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Gaussian white noise with the given standard deviation.
pub fn white_noise(len: usize, std: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| std * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect()
}

/// Sum of three sinusoids under a syllable-rate envelope, preceded by
/// `leading_silence` seconds of zeros. Peak amplitude is about `amplitude`.
pub fn speech_like(
    len: usize,
    sample_rate_hz: u32,
    amplitude: f64,
    leading_silence: f64,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = sample_rate_hz as f64;
    let f0 = rng.random_range(100.0..250.0);
    let partials: Vec<(f64, f64, f64)> = (0..3)
        .map(|i| {
            let f = f0 * rng.random_range(1.0 + 2.0 * i as f64..3.0 + 4.0 * i as f64);
            let a = 1.0 / (1.0 + i as f64);
            (f.min(0.45 * fs), a, rng.random_range(0.0..2.0 * PI))
        })
        .collect();
    let norm: f64 = partials.iter().map(|p| p.1).sum();
    let syllable_hz = rng.random_range(3.0..5.0);
    let env_phase = rng.random_range(0.0..2.0 * PI);
    let vibrato = rng.random_range(0.002..0.01);
    let onset = (leading_silence * fs) as usize;

    (0..len)
        .map(|n| {
            if n < onset {
                return 0.0;
            }
            let t = (n - onset) as f64 / fs;
            let env = (0.5 - 0.5 * (2.0 * PI * syllable_hz * t + env_phase).cos()).powi(2);
            let drift = 1.0 + vibrato * (2.0 * PI * 5.0 * t).sin();
            let s: f64 = partials
                .iter()
                .map(|&(f, a, ph)| a * (2.0 * PI * f * drift * t + ph).sin())
                .sum();
            amplitude * env * s / norm
        })
        .collect()
}

/// One-pole low-passed noise: a stand-in for brown/rumble noise.
pub fn lowpass_noise(len: usize, std: f64, pole: f64, seed: u64) -> Vec<f64> {
    let w = white_noise(len, 1.0, seed);
    let mut y = 0.0;
    let raw: Vec<f64> = w
        .iter()
        .map(|&x| {
            y = pole * y + (1.0 - pole) * x;
            y
        })
        .collect();
    let rms = (raw.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
    raw.iter().map(|v| std * v / rms.max(1e-300)).collect()
}

/// Mains hum with harmonics plus a little broadband noise.
pub fn hum_noise(len: usize, sample_rate_hz: u32, std: f64, seed: u64) -> Vec<f64> {
    let fs = sample_rate_hz as f64;
    let hiss = white_noise(len, 0.2, seed);
    let raw: Vec<f64> = (0..len)
        .map(|n| {
            let t = n as f64 / fs;
            (1..=5)
                .map(|h| (2.0 * PI * 50.0 * h as f64 * t).sin() / h as f64)
                .sum::<f64>()
                + hiss[n]
        })
        .collect();
    let rms = (raw.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
    raw.iter().map(|v| std * v / rms.max(1e-300)).collect()
}

/// Several overlapping speech-like voices.
pub fn babble_noise(len: usize, sample_rate_hz: u32, std: f64, seed: u64) -> Vec<f64> {
    let mut acc = vec![0.0; len];
    for v in 0..6u64 {
        let voice = speech_like(len, sample_rate_hz, 1.0, 0.0, seed.wrapping_mul(31).wrapping_add(v));
        acc.iter_mut().zip(voice).for_each(|(a, s)| *a += s);
    }
    let rms = (acc.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
    acc.iter().map(|v| std * v / rms.max(1e-300)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_bounded() {
        let a = speech_like(16000, 16000, 0.5, 0.1, 3);
        assert_eq!(a, speech_like(16000, 16000, 0.5, 0.1, 3));
        assert_ne!(a, speech_like(16000, 16000, 0.5, 0.1, 4));
        assert!(a.iter().all(|v| v.abs() <= 0.5 + 1e-12));
        assert!(a[..1600].iter().all(|&v| v == 0.0));
        assert!(a[1600..].iter().any(|&v| v.abs() > 0.1));
    }

    #[test]
    fn noise_levels() {
        for n in [
            lowpass_noise(8000, 0.3, 0.9, 1),
            hum_noise(8000, 16000, 0.3, 1),
            babble_noise(8000, 16000, 0.3, 1),
        ] {
            let rms = (n.iter().map(|v| v * v).sum::<f64>() / n.len() as f64).sqrt();
            assert!((rms - 0.3).abs() < 1e-9);
        }
        let w = white_noise(100_000, 0.5, 9);
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((var - 0.25).abs() < 0.01);
    }
}
