//! Noisy mixtures at exact target SNRs and the scenario matrix that enumerates
//! them (clean utterances × noise types × SNR levels).

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{mean_square, AudioClip, AudioError};

#[derive(Debug, Error)]
pub enum MixError {
    #[error("clean signal has zero power")]
    SilentClean,
    #[error("noise segment has zero power")]
    SilentNoise,
    #[error("sample rate mismatch: clean {clean} Hz, noise {noise} Hz")]
    RateMismatch { clean: u32, noise: u32 },
    #[error("target SNR must be finite, got {0}")]
    InvalidSnr(f64),
    #[error("empty {0} list")]
    EmptyList(&'static str),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

/// One mixture: which clean utterance, which noise, at what SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureScenario {
    pub clean_id: String,
    pub noise_id: String,
    pub snr_db: f64,
    /// Gain applied to the noise segment; unknown until the mixture is built.
    pub noise_scale: Option<f64>,
    pub seed: u64,
}

impl MixtureScenario {
    /// File-name friendly key, unique within a matrix.
    pub fn key(&self) -> String {
        format!("{}__{}__{}dB", self.clean_id, self.noise_id, self.snr_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseOffset {
    /// Uniform start offset drawn from the scenario seed.
    #[default]
    Seeded,
    /// Always start at the first noise sample.
    Zero,
}

/// Mix `clean` with a segment of `noise` so that the clean-to-noise power
/// ratio equals `snr_db`.
///
/// Noise shorter than the clean signal is tiled end to end. Powers are mean
/// squares over the clean-length region. The mixture is not clipped.
pub fn mix_at_snr(
    clean: &AudioClip,
    noise: &AudioClip,
    snr_db: f64,
    seed: u64,
    offset: NoiseOffset,
) -> Result<(AudioClip, MixtureScenario), MixError> {
    mix_with_ids(clean, noise, snr_db, seed, offset, "clean", "noise")
}

pub fn mix_with_ids(
    clean: &AudioClip,
    noise: &AudioClip,
    snr_db: f64,
    seed: u64,
    offset: NoiseOffset,
    clean_id: &str,
    noise_id: &str,
) -> Result<(AudioClip, MixtureScenario), MixError> {
    if clean.sample_rate_hz() != noise.sample_rate_hz() {
        return Err(MixError::RateMismatch {
            clean: clean.sample_rate_hz(),
            noise: noise.sample_rate_hz(),
        });
    }
    if !snr_db.is_finite() {
        return Err(MixError::InvalidSnr(snr_db));
    }
    let p_clean = clean.power();
    if p_clean == 0.0 {
        return Err(MixError::SilentClean);
    }
    if noise.is_empty() {
        return Err(MixError::SilentNoise);
    }

    let segment = noise_segment(clean.len(), noise.samples(), seed, offset);
    let p_noise = mean_square(&segment);
    if p_noise == 0.0 {
        return Err(MixError::SilentNoise);
    }
    let gain = (p_clean / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt();
    let mixed = clean
        .samples()
        .iter()
        .zip(&segment)
        .map(|(c, n)| c + gain * n)
        .collect();
    let scenario = MixtureScenario {
        clean_id: clean_id.to_string(),
        noise_id: noise_id.to_string(),
        snr_db,
        noise_scale: Some(gain),
        seed,
    };
    Ok((clean.with_samples(mixed)?, scenario))
}

fn noise_segment(len: usize, noise: &[f64], seed: u64, offset: NoiseOffset) -> Vec<f64> {
    let n = noise.len();
    let start = match offset {
        NoiseOffset::Zero => 0,
        NoiseOffset::Seeded => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if n >= len {
                rng.random_range(0..=n - len)
            } else {
                // tiled noise: any start inside one period is distinct
                rng.random_range(0..n)
            }
        }
    };
    (0..len).map(|i| noise[(start + i) % n]).collect()
}

/// Realized SNR of a (clean, mixture) pair in dB.
pub fn realized_snr_db(clean: &[f64], mixture: &[f64]) -> f64 {
    let residual: Vec<f64> = mixture.iter().zip(clean).map(|(m, c)| m - c).collect();
    10.0 * (mean_square(clean) / mean_square(&residual)).log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMatrix {
    pub clean_ids: Vec<String>,
    pub noise_ids: Vec<String>,
    pub snr_levels_db: Vec<f64>,
    pub scenarios: Vec<MixtureScenario>,
}

impl ScenarioMatrix {
    /// Number of distinct (noise, SNR) conditions.
    pub fn condition_count(&self) -> usize {
        self.scenarios
            .iter()
            .map(|s| (s.noise_id.as_str(), s.snr_db.to_bits()))
            .collect::<HashSet<_>>()
            .len()
    }
}

/// 64-bit FNV-1a; stable across platforms and releases, unlike `DefaultHasher`.
pub fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in *part {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        // separator so ("ab","c") != ("a","bc")
        h ^= 0xff;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn scenario_seed(clean_id: &str, noise_id: &str, snr_db: f64) -> u64 {
    stable_hash(&[
        clean_id.as_bytes(),
        noise_id.as_bytes(),
        &snr_db.to_bits().to_le_bytes(),
    ])
}

fn check_ids(ids: &[String], what: &'static str) -> Result<(), MixError> {
    if ids.is_empty() {
        return Err(MixError::EmptyList(what));
    }
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(MixError::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

/// Full Cartesian product in clean-major, then noise, then SNR order.
pub fn build_matrix(
    clean_ids: &[String],
    noise_ids: &[String],
    snr_levels_db: &[f64],
) -> Result<ScenarioMatrix, MixError> {
    check_ids(clean_ids, "clean id")?;
    check_ids(noise_ids, "noise id")?;
    if snr_levels_db.is_empty() {
        return Err(MixError::EmptyList("SNR level"));
    }
    if let Some(&bad) = snr_levels_db.iter().find(|s| !s.is_finite()) {
        return Err(MixError::InvalidSnr(bad));
    }
    let mut scenarios =
        Vec::with_capacity(clean_ids.len() * noise_ids.len() * snr_levels_db.len());
    for c in clean_ids {
        for n in noise_ids {
            for &snr in snr_levels_db {
                scenarios.push(MixtureScenario {
                    clean_id: c.clone(),
                    noise_id: n.clone(),
                    snr_db: snr,
                    noise_scale: None,
                    seed: scenario_seed(c, n, snr),
                });
            }
        }
    }
    Ok(ScenarioMatrix {
        clean_ids: clean_ids.to_vec(),
        noise_ids: noise_ids.to_vec(),
        snr_levels_db: snr_levels_db.to_vec(),
        scenarios,
    })
}
