//! Objective quality metrics: STOI, projection SDR, SI-SDR and an adapter
//! for an external PESQ scorer.

mod pesq;
mod sdr;
mod stoi;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{AudioClip, AudioError};

pub use pesq::{external_pesq, PesqCommand, DEFAULT_PESQ_PATTERN, PESQ_RANGE};
pub use sdr::{sdr, si_sdr, DEFAULT_SDR_FILTER_LEN};
pub use stoi::{stoi, STOI_RATE_HZ};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("signal too short: {0}")]
    TooShort(String),
    #[error("length mismatch: reference {reference}, estimate {estimate}")]
    LengthMismatch { reference: usize, estimate: usize },
    #[error("sample rate mismatch: reference {reference} Hz, estimate {estimate} Hz")]
    RateMismatch { reference: u32, estimate: u32 },
    #[error("reference signal is silent")]
    ZeroReference,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("external scorer failed: {0}")]
    ExternalToolFailure(String),
    #[error("score {0} outside the valid range")]
    RangeViolation(f64),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

/// Scores of one enhanced signal against its clean reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub clean_id: String,
    pub noise_id: String,
    pub snr_db: f64,
    pub algorithm: String,
    /// `stoi_raw` clamped to [0, 1].
    pub stoi: f64,
    pub stoi_raw: f64,
    /// May be `+inf` for a perfect estimate.
    pub sdr_db: f64,
    pub si_sdr_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pesq: Option<f64>,
}

/// STOI, SDR and SI-SDR of `enhanced` against `clean`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub stoi_raw: f64,
    pub sdr_db: f64,
    pub si_sdr_db: f64,
}

impl Scores {
    pub fn stoi(&self) -> f64 {
        self.stoi_raw.clamp(0.0, 1.0)
    }
}

pub fn score(
    clean: &AudioClip,
    enhanced: &AudioClip,
    sdr_filter_len: usize,
) -> Result<Scores, MetricError> {
    Ok(Scores {
        stoi_raw: stoi(clean, enhanced)?,
        sdr_db: sdr(clean, enhanced, sdr_filter_len)?,
        si_sdr_db: si_sdr(clean, enhanced)?,
    })
}
