use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{AudioClip, AudioError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Rectangular,
    Hann,
    Hamming,
}

/// Periodic window coefficients, so that Hann at 50% overlap sums to one.
pub fn window(kind: WindowKind, len: usize) -> Vec<f64> {
    let n = len as f64;
    (0..len)
        .map(|i| {
            let c = (2.0 * PI * i as f64 / n).cos();
            match kind {
                WindowKind::Rectangular => 1.0,
                WindowKind::Hann => 0.5 - 0.5 * c,
                WindowKind::Hamming => 0.54 - 0.46 * c,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<Vec<f64>>,
    pub hop: usize,
    pub window: WindowKind,
}

impl FrameSequence {
    pub fn frame_len(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Frame `k` covers samples `[k*hop, k*hop + frame_len)`. A tail that does not
/// fill a whole frame is dropped.
pub fn frame_signal(
    clip: &AudioClip,
    frame_len: usize,
    hop: usize,
    window_kind: WindowKind,
) -> Result<FrameSequence, AudioError> {
    frame_samples(clip.samples(), frame_len, hop, window_kind)
}

pub(crate) fn frame_samples(
    x: &[f64],
    frame_len: usize,
    hop: usize,
    window_kind: WindowKind,
) -> Result<FrameSequence, AudioError> {
    if hop == 0 || hop > frame_len || frame_len > x.len() {
        return Err(AudioError::InvalidFraming {
            frame_len,
            hop,
            len: x.len(),
        });
    }
    let w = window(window_kind, frame_len);
    let count = (x.len() - frame_len) / hop + 1;
    let frames = (0..count)
        .map(|k| {
            x[k * hop..k * hop + frame_len]
                .iter()
                .zip(&w)
                .map(|(s, w)| s * w)
                .collect()
        })
        .collect();
    Ok(FrameSequence {
        frames,
        hop,
        window: window_kind,
    })
}

/// Weighted overlap-add. Each frame is multiplied by the synthesis window and
/// the sum is normalized by the accumulated analysis·synthesis envelope, so
/// samples covered by at least one frame with nonzero envelope are restored.
/// Output length is `(n-1)*hop + frame_len`.
pub fn overlap_add(seq: &FrameSequence, synthesis: WindowKind) -> Vec<f64> {
    let len = seq.frame_len();
    if seq.frames.is_empty() {
        return Vec::new();
    }
    let wa = window(seq.window, len);
    let ws = window(synthesis, len);
    let total = (seq.frames.len() - 1) * seq.hop + len;
    let mut out = vec![0.0; total];
    let mut envelope = vec![0.0; total];
    for (k, frame) in seq.frames.iter().enumerate() {
        let start = k * seq.hop;
        for i in 0..len {
            out[start + i] += frame[i] * ws[i];
            envelope[start + i] += wa[i] * ws[i];
        }
    }
    for (o, e) in out.iter_mut().zip(&envelope) {
        if *e > 1e-8 {
            *o /= e;
        } else {
            *o = 0.0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn clip(x: Vec<f64>) -> AudioClip {
        AudioClip::new(x, 16000).unwrap()
    }

    #[test]
    fn frame_count_and_tail_drop() {
        let c = clip((0..10).map(f64::from).collect());
        let seq = frame_signal(&c, 4, 2, WindowKind::Rectangular).unwrap();
        assert_eq!(seq.len(), 4);
        assert_eq!(seq.frames[3], vec![6.0, 7.0, 8.0, 9.0]);
        let seq = frame_signal(&c, 4, 3, WindowKind::Rectangular).unwrap();
        // frames at 0, 3, 6; samples 10.. would need an 11th
        assert_eq!(seq.len(), 3);
    }

    #[test]
    fn hann_exposes_coefficients() {
        let seq = frame_signal(&clip(vec![1.0; 8]), 8, 8, WindowKind::Hann).unwrap();
        assert_eq!(seq.frames[0], window(WindowKind::Hann, 8));
        assert_eq!(seq.frames[0][0], 0.0);
        assert!((seq.frames[0][4] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_framing() {
        let c = clip(vec![0.0; 10]);
        assert!(frame_signal(&c, 4, 0, WindowKind::Hann).is_err());
        assert!(frame_signal(&c, 4, 5, WindowKind::Hann).is_err());
        assert!(frame_signal(&c, 11, 2, WindowKind::Hann).is_err());
    }

    #[test]
    fn hann_half_overlap_reconstructs_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x: Vec<f64> = (0..4096).map(|_| rng.random_range(-1.0..1.0)).collect();
            let seq = frame_samples(&x, 256, 128, WindowKind::Hann).unwrap();
            let y = overlap_add(&seq, WindowKind::Rectangular);
            let err = x[128..y.len() - 128]
                .iter()
                .zip(&y[128..y.len() - 128])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "{err}");
        }
    }
}
