use crate::audio::{frame_samples, resample, rfft, window, AudioClip, WindowKind};

use super::MetricError;

pub const STOI_RATE_HZ: u32 = 10_000;
const SILENCE_FRAME: usize = 512;
const SILENCE_HOP: usize = 256;
const DYNAMIC_RANGE_DB: f64 = 40.0;
const FRAME: usize = 256;
const HOP: usize = 128;
const NFFT: usize = 512;
const BANDS: usize = 15;
const FIRST_CENTER_HZ: f64 = 150.0;
const SEGMENT: usize = 30;
const BETA_DB: f64 = -15.0;

/// Short-time objective intelligibility. The raw score lies in [-1, 1];
/// typical inputs land in [0, 1].
pub fn stoi(clean: &AudioClip, enhanced: &AudioClip) -> Result<f64, MetricError> {
    if clean.len() != enhanced.len() {
        return Err(MetricError::LengthMismatch {
            reference: clean.len(),
            estimate: enhanced.len(),
        });
    }
    if clean.sample_rate_hz() != enhanced.sample_rate_hz() {
        return Err(MetricError::RateMismatch {
            reference: clean.sample_rate_hz(),
            estimate: enhanced.sample_rate_hz(),
        });
    }
    if clean.duration_seconds() < 1.0 {
        return Err(MetricError::TooShort(format!(
            "{:.3} s of audio, need at least 1 s",
            clean.duration_seconds()
        )));
    }
    let x = resample(clean, STOI_RATE_HZ)?;
    let y = resample(enhanced, STOI_RATE_HZ)?;
    let (x, y) = remove_silent_frames(x.samples(), y.samples())?;

    let bands = third_octave_bands();
    let xb = band_envelopes(&x, &bands)?;
    let yb = band_envelopes(&y, &bands)?;
    let frames = xb[0].len();
    if frames < SEGMENT {
        return Err(MetricError::TooShort(format!(
            "{frames} active frames after silence removal, need {SEGMENT}"
        )));
    }

    let clip = 1.0 + 10f64.powf(-BETA_DB / 20.0);
    let mut total = 0.0;
    let mut count = 0usize;
    for m in SEGMENT..=frames {
        for (xr, yr) in xb.iter().zip(&yb) {
            let xs = &xr[m - SEGMENT..m];
            let ys = &yr[m - SEGMENT..m];
            let nx = xs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny = ys.iter().map(|v| v * v).sum::<f64>().sqrt();
            let alpha = if ny > 0.0 { nx / ny } else { 0.0 };
            let yc: Vec<f64> = ys
                .iter()
                .zip(xs)
                .map(|(&yv, &xv)| (alpha * yv).min(clip * xv))
                .collect();
            total += correlation(xs, &yc);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (x - ma, y - mb);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    let denom = (aa * bb).sqrt();
    if denom > 0.0 {
        ab / denom
    } else {
        0.0
    }
}

/// Drop frame pairs whose clean energy is more than 40 dB below the loudest
/// clean frame, then overlap-add the remaining windowed frames.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>), MetricError> {
    if x.len() < SILENCE_FRAME {
        return Err(MetricError::TooShort(format!(
            "{} samples at {STOI_RATE_HZ} Hz",
            x.len()
        )));
    }
    let xf = frame_samples(x, SILENCE_FRAME, SILENCE_HOP, WindowKind::Hann)?;
    let yf = frame_samples(y, SILENCE_FRAME, SILENCE_HOP, WindowKind::Hann)?;
    let energy: Vec<f64> = xf
        .frames
        .iter()
        .map(|f| 20.0 * f.iter().map(|v| v * v).sum::<f64>().sqrt().log10())
        .collect();
    let max = energy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(MetricError::ZeroReference);
    }
    let keep: Vec<usize> = (0..energy.len())
        .filter(|&k| energy[k] > max - DYNAMIC_RANGE_DB)
        .collect();
    let out_len = (keep.len() - 1) * SILENCE_HOP + SILENCE_FRAME;
    let mut xo = vec![0.0; out_len];
    let mut yo = vec![0.0; out_len];
    for (j, &k) in keep.iter().enumerate() {
        let start = j * SILENCE_HOP;
        for i in 0..SILENCE_FRAME {
            xo[start + i] += xf.frames[k][i];
            yo[start + i] += yf.frames[k][i];
        }
    }
    Ok((xo, yo))
}

/// Bin ranges `[lo, hi)` of the one-third-octave bands on the 512-point grid.
fn third_octave_bands() -> Vec<(usize, usize)> {
    let fs = STOI_RATE_HZ as f64;
    let nearest = |f: f64| ((f * NFFT as f64 / fs).round() as usize).min(NFFT / 2);
    (0..BANDS)
        .map(|j| {
            let cf = FIRST_CENTER_HZ * 2f64.powf(j as f64 / 3.0);
            (nearest(cf * 2f64.powf(-1.0 / 6.0)), nearest(cf * 2f64.powf(1.0 / 6.0)))
        })
        .collect()
}

/// `[band][frame]` envelope: root of summed squared bin magnitudes.
fn band_envelopes(x: &[f64], bands: &[(usize, usize)]) -> Result<Vec<Vec<f64>>, MetricError> {
    if x.len() < FRAME {
        return Ok(vec![Vec::new(); bands.len()]);
    }
    let w = window(WindowKind::Hann, FRAME);
    let frames = (x.len() - FRAME) / HOP + 1;
    let mut out = vec![Vec::with_capacity(frames); bands.len()];
    for k in 0..frames {
        let frame: Vec<f64> = x[k * HOP..k * HOP + FRAME]
            .iter()
            .zip(&w)
            .map(|(a, b)| a * b)
            .collect();
        let spec = rfft(&frame, NFFT)?;
        for (row, &(lo, hi)) in out.iter_mut().zip(bands) {
            row.push(spec.bins[lo..hi].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt());
        }
    }
    Ok(out)
}
