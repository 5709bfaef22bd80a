use std::f64::consts::PI;

use super::{AudioClip, AudioError};

const KAISER_BETA: f64 = 8.6;
/// Zero crossings of the interpolation kernel on each side, measured at the
/// lower of the two rates (32 taps per phase).
const ZERO_CROSSINGS: f64 = 16.0;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Modified Bessel function of the first kind, order zero.
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

struct PolyphaseFilter {
    /// For phase `p`: index of the first input tap relative to `floor(t)`, and the taps.
    phases: Vec<(i64, Vec<f64>)>,
}

impl PolyphaseFilter {
    fn new(up: u64, down: u64) -> Self {
        let ratio = (up as f64 / down as f64).min(1.0);
        let cutoff = ratio; // relative to the input Nyquist
        let half_width = ZERO_CROSSINGS / ratio;
        let i0_beta = bessel_i0(KAISER_BETA);
        let reach = half_width.ceil() as i64 + 1;
        let phases = (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                let mut first = None;
                let mut taps = Vec::new();
                for j in -reach..=reach {
                    let tau = frac - j as f64;
                    if tau.abs() >= half_width {
                        continue;
                    }
                    let r = tau / half_width;
                    let w = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta;
                    first.get_or_insert(j);
                    taps.push(cutoff * sinc(cutoff * tau) * w);
                }
                let sum: f64 = taps.iter().sum();
                taps.iter_mut().for_each(|t| *t /= sum);
                (first.unwrap_or(0), taps)
            })
            .collect();
        Self { phases }
    }
}

/// Windowed-sinc polyphase resampler (Kaiser window, beta 8.6). Samples outside
/// the clip are treated as zero.
pub fn resample(clip: &AudioClip, target_hz: u32) -> Result<AudioClip, AudioError> {
    if target_hz == 0 {
        return Err(AudioError::InvalidSampleRate(target_hz));
    }
    let source_hz = clip.sample_rate_hz();
    if source_hz == target_hz {
        return Ok(clip.clone());
    }
    let g = gcd(source_hz as u64, target_hz as u64);
    let up = target_hz as u64 / g;
    let down = source_hz as u64 / g;
    let filter = PolyphaseFilter::new(up, down);

    let x = clip.samples();
    let n_in = x.len() as u64;
    let n_out = (2 * n_in * up + down) / (2 * down);
    let out = (0..n_out)
        .map(|n| {
            let pos = n * down;
            let base = (pos / up) as i64;
            let (first, taps) = &filter.phases[(pos % up) as usize];
            let mut acc = 0.0;
            for (k, &h) in taps.iter().enumerate() {
                let i = base + first + k as i64;
                if i >= 0 && (i as u64) < n_in {
                    acc += h * x[i as usize];
                }
            }
            acc
        })
        .collect();
    AudioClip::new(out, target_hz)
}
