//! Sample-accurate mono audio and the short-time primitives built on it.

mod fft;
mod frame;
mod resample;
mod wav;

pub use fft::{irfft, rfft, ComplexSpectrumFrame};
pub(crate) use frame::frame_samples;
pub use frame::{frame_signal, overlap_add, window, FrameSequence, WindowKind};
pub use resample::resample;
pub use wav::{read_wav, read_wav_bytes, write_wav, write_wav_bytes, WavEncoding};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed RIFF/WAVE container: {0}")]
    MalformedContainer(String),
    #[error("unsupported encoding: format tag {format_tag}, {bits} bits per sample")]
    UnsupportedEncoding { format_tag: u16, bits: u16 },
    #[error("expected a mono file, found {0} channels")]
    ChannelCountError(u16),
    #[error("invalid sample rate {0}")]
    InvalidSampleRate(u32),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("invalid framing: frame_len {frame_len}, hop {hop}, signal length {len}")]
    InvalidFraming {
        frame_len: usize,
        hop: usize,
        len: usize,
    },
    #[error("invalid FFT size {fft_size} for a frame of {frame_len} samples")]
    InvalidSize { fft_size: usize, frame_len: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mono signal with nominal range [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self, AudioError> {
        if sample_rate_hz == 0 {
            return Err(AudioError::InvalidSampleRate(sample_rate_hz));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFinite(i));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Mean square over the whole clip; 0 for an empty clip.
    pub fn power(&self) -> f64 {
        mean_square(&self.samples)
    }

    /// Same rate, new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self, AudioError> {
        Self::new(samples, self.sample_rate_hz)
    }
}

pub(crate) fn mean_square(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_rate_and_nan() {
        assert!(matches!(
            AudioClip::new(vec![0.0], 0),
            Err(AudioError::InvalidSampleRate(0))
        ));
        assert!(matches!(
            AudioClip::new(vec![0.0, f64::NAN], 16000),
            Err(AudioError::NonFinite(1))
        ));
    }

    #[test]
    fn duration_from_fields() {
        let clip = AudioClip::new(vec![0.0; 8000], 16000).unwrap();
        assert_eq!(clip.duration_seconds(), 0.5);
    }
}
