//! Log-spectral amplitude MMSE estimator with decision-directed a priori SNR
//! and a log-likelihood voice activity detector driving the noise update.

use serde::{Deserialize, Serialize};

use crate::audio::{irfft, rfft, window, AudioClip, ComplexSpectrumFrame, WindowKind};

use super::expint::exp_int_e1;
use super::EnhanceError;

pub const LOGMMSE_SAMPLE_RATE: u32 = 16000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogMmseParams {
    pub frame_ms: f64,
    pub overlap_fraction: f64,
    /// Decision-directed smoothing weight.
    pub alpha_dd: f64,
    pub ksi_min_db: f64,
    pub noise_init_frames: usize,
    pub vad_threshold: f64,
    pub noise_smooth_mu: f64,
    /// Upper clamp on the a posteriori SNR.
    pub gamma_max_db: f64,
}

impl Default for LogMmseParams {
    fn default() -> Self {
        Self {
            frame_ms: 20.0,
            overlap_fraction: 0.5,
            alpha_dd: 0.98,
            ksi_min_db: -25.0,
            noise_init_frames: 6,
            vad_threshold: 0.15,
            noise_smooth_mu: 0.98,
            gamma_max_db: 40.0,
        }
    }
}

impl LogMmseParams {
    pub fn validate(&self) -> Result<(), EnhanceError> {
        let bad = |msg: String| Err(EnhanceError::InvalidConfig(msg));
        if !(self.frame_ms > 0.0 && self.frame_ms.is_finite()) {
            return bad(format!("frame_ms must be positive, got {}", self.frame_ms));
        }
        if !(self.overlap_fraction > 0.0 && self.overlap_fraction < 1.0) {
            return bad(format!(
                "overlap_fraction must lie in (0, 1), got {}",
                self.overlap_fraction
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha_dd) {
            return bad(format!("alpha_dd must lie in [0, 1], got {}", self.alpha_dd));
        }
        if !(0.0..=1.0).contains(&self.noise_smooth_mu) {
            return bad(format!(
                "noise_smooth_mu must lie in [0, 1], got {}",
                self.noise_smooth_mu
            ));
        }
        if self.noise_init_frames == 0 {
            return bad("noise_init_frames must be at least 1".into());
        }
        if !self.ksi_min_db.is_finite() || !self.gamma_max_db.is_finite() {
            return bad("SNR bounds must be finite".into());
        }
        Ok(())
    }

    /// Frame length in samples, rounded up to even.
    pub fn frame_len(&self, sample_rate_hz: u32) -> usize {
        let n = (self.frame_ms * sample_rate_hz as f64 / 1000.0).round() as usize;
        n + n % 2
    }

    fn hop(&self, frame_len: usize) -> usize {
        ((frame_len as f64 * (1.0 - self.overlap_fraction)).round() as usize).clamp(1, frame_len)
    }
}

/// Classical LSA gain `ξ/(1+ξ)·exp(½·E1(v))`, `v = ξγ/(1+ξ)`. Exceeds one when
/// γ is small relative to ξ.
pub fn lsa_gain_unclamped(ksi: f64, gamma: f64) -> f64 {
    let a = ksi / (1.0 + ksi);
    let v = (a * gamma).max(1e-300);
    a * (0.5 * exp_int_e1(v)).exp()
}

/// LSA gain limited to unity.
pub fn lsa_gain(ksi: f64, gamma: f64) -> f64 {
    lsa_gain_unclamped(ksi, gamma).min(1.0)
}

fn periodogram(spec: &ComplexSpectrumFrame) -> Vec<f64> {
    spec.bins.iter().map(|c| c.norm_sqr()).collect()
}

pub fn logmmse(noisy: &AudioClip, params: &LogMmseParams) -> Result<AudioClip, EnhanceError> {
    params.validate()?;
    if noisy.sample_rate_hz() != LOGMMSE_SAMPLE_RATE {
        return Err(EnhanceError::UnsupportedRate {
            got: noisy.sample_rate_hz(),
            expected: LOGMMSE_SAMPLE_RATE,
        });
    }
    let x = noisy.samples();
    let frame_len = params.frame_len(noisy.sample_rate_hz());
    let needed = params.noise_init_frames * frame_len;
    if x.len() < needed {
        return Err(EnhanceError::TooShort {
            len: x.len(),
            needed,
        });
    }
    let hop = params.hop(frame_len);
    let nfft = (2 * frame_len).next_power_of_two();

    // scale so that shifted windows sum to (approximately) one
    let mut win = window(WindowKind::Hann, frame_len);
    let scale = hop as f64 / win.iter().sum::<f64>();
    win.iter_mut().for_each(|w| *w *= scale);

    let analyze = |frame: &[f64]| -> Result<ComplexSpectrumFrame, EnhanceError> {
        let windowed: Vec<f64> = frame.iter().zip(&win).map(|(s, w)| s * w).collect();
        Ok(rfft(&windowed, nfft)?)
    };

    // noise PSD from the leading frames of the unpadded signal
    let init_frames = params.noise_init_frames.min((x.len() - frame_len) / hop + 1);
    let mut noise_psd = vec![0.0; nfft / 2 + 1];
    for k in 0..init_frames {
        let p = periodogram(&analyze(&x[k * hop..k * hop + frame_len])?);
        noise_psd.iter_mut().zip(p).for_each(|(n, p)| *n += p);
    }
    noise_psd
        .iter_mut()
        .for_each(|n| *n = (*n / init_frames as f64).max(1e-30));

    // pad so every real sample is covered by the full set of overlapping frames
    let front = frame_len - hop;
    let mut padded = vec![0.0; front];
    padded.extend_from_slice(x);
    padded.extend(std::iter::repeat(0.0).take(frame_len));
    let n_frames = (padded.len() - frame_len) / hop + 1;

    let ksi_min = 10f64.powf(params.ksi_min_db / 10.0);
    let gamma_max = 10f64.powf(params.gamma_max_db / 10.0);
    let alpha = params.alpha_dd;
    let mu = params.noise_smooth_mu;

    let mut out = vec![0.0; padded.len()];
    let mut prev_amp2: Option<Vec<f64>> = None;
    for k in 0..n_frames {
        let start = k * hop;
        let mut spec = analyze(&padded[start..start + frame_len])?;
        let power = periodogram(&spec);
        let gamma: Vec<f64> = power
            .iter()
            .zip(&noise_psd)
            .map(|(p, n)| (p / n).min(gamma_max))
            .collect();
        let ksi: Vec<f64> = gamma
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                let ml = (g - 1.0).max(0.0);
                let prior = match &prev_amp2 {
                    Some(a2) => a2[i] / noise_psd[i],
                    None => 1.0,
                };
                (alpha * prior + (1.0 - alpha) * ml).max(ksi_min)
            })
            .collect();

        let llr = gamma
            .iter()
            .zip(&ksi)
            .map(|(g, x)| g * x / (1.0 + x) - (1.0 + x).ln())
            .sum::<f64>()
            / gamma.len() as f64;
        if llr < params.vad_threshold {
            noise_psd
                .iter_mut()
                .zip(&power)
                .for_each(|(n, p)| *n = (mu * *n + (1.0 - mu) * p).max(1e-30));
        }

        let mut amp2 = Vec::with_capacity(spec.bins.len());
        for (i, bin) in spec.bins.iter_mut().enumerate() {
            let g = lsa_gain(ksi[i], gamma[i]);
            *bin *= g;
            amp2.push(bin.norm_sqr());
        }
        prev_amp2 = Some(amp2);

        let frame_out = irfft(&spec)?;
        for (o, v) in out[start..start + frame_len].iter_mut().zip(&frame_out) {
            *o += v;
        }
    }

    Ok(noisy.with_samples(out[front..front + x.len()].to_vec())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn gain_limit_large_ksi() {
        for &gamma in &[0.5, 1.0, 10.0, 1e4] {
            assert!((lsa_gain(1e12, gamma) - 1.0).abs() < 1e-9);
        }
        // the unclamped estimator approaches exp(E1(γ)/2), which is above one
        let raw = lsa_gain_unclamped(1e12, 1.0);
        assert!((raw - (0.5 * exp_int_e1(1.0)).exp()).abs() < 1e-9);
        assert!(raw > 1.0);
    }

    #[test]
    fn gain_bounded_and_monotone_on_grid() {
        let ksi_min = 10f64.powf(-2.5);
        let ksis: Vec<f64> = (0..=60)
            .map(|i| ksi_min * (1e3 / ksi_min).powf(i as f64 / 60.0))
            .collect();
        for j in 0..=60 {
            let gamma = 1e-2 * 1e6f64.powf(j as f64 / 60.0);
            let mut prev = 0.0;
            for &ksi in &ksis {
                let g = lsa_gain(ksi, gamma);
                assert!(g > 0.0 && g <= 1.0, "ksi={ksi} gamma={gamma} g={g}");
                assert!(g >= prev);
                prev = g;
                let raw = lsa_gain_unclamped(ksi, gamma);
                assert!(raw > 0.0);
            }
        }
    }

    #[test]
    fn white_noise_is_suppressed() {
        let noise = synth::white_noise(32000, 0.1, 42);
        let clip = AudioClip::new(noise, 16000).unwrap();
        let out = logmmse(&clip, &LogMmseParams::default()).unwrap();
        assert_eq!(out.len(), clip.len());
        assert!(out.power() < 0.2 * clip.power(), "{}", out.power() / clip.power());
    }

    #[test]
    fn too_short_and_wrong_rate() {
        let p = LogMmseParams::default();
        let short = AudioClip::new(vec![0.1; 1919], 16000).unwrap();
        assert!(matches!(logmmse(&short, &p), Err(EnhanceError::TooShort { .. })));
        let ok = AudioClip::new(synth::white_noise(1920, 0.1, 1), 16000).unwrap();
        assert_eq!(logmmse(&ok, &p).unwrap().len(), 1920);
        let rate = AudioClip::new(vec![0.1; 8000], 8000).unwrap();
        assert!(matches!(
            logmmse(&rate, &p),
            Err(EnhanceError::UnsupportedRate { .. })
        ));
    }

    #[test]
    fn frame_geometry() {
        let p = LogMmseParams::default();
        assert_eq!(p.frame_len(16000), 320);
        assert_eq!(p.hop(320), 160);
        let odd = LogMmseParams {
            frame_ms: 20.06,
            ..Default::default()
        };
        assert_eq!(odd.frame_len(16000), 322);
    }

    #[test]
    fn invalid_params() {
        for p in [
            LogMmseParams { overlap_fraction: 1.0, ..Default::default() },
            LogMmseParams { alpha_dd: 1.5, ..Default::default() },
            LogMmseParams { noise_init_frames: 0, ..Default::default() },
        ] {
            assert!(p.validate().is_err());
        }
    }
}
