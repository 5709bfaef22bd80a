use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::AudioError;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// One-sided spectrum of a real frame: `fft_size / 2 + 1` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrumFrame {
    pub bins: Vec<Complex64>,
    pub fft_size: usize,
}

fn check_size(fft_size: usize, frame_len: usize) -> Result<(), AudioError> {
    if !fft_size.is_power_of_two() || frame_len > fft_size {
        return Err(AudioError::InvalidSize {
            fft_size,
            frame_len,
        });
    }
    Ok(())
}

/// Forward transform of a real frame, zero-padded to `fft_size`.
pub fn rfft(frame: &[f64], fft_size: usize) -> Result<ComplexSpectrumFrame, AudioError> {
    check_size(fft_size, frame.len())?;
    let mut buf: Vec<Complex64> = frame
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(fft_size)
        .collect();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(fft_size).process(&mut buf));
    buf.truncate(fft_size / 2 + 1);
    Ok(ComplexSpectrumFrame {
        bins: buf,
        fft_size,
    })
}

/// Inverse of [`rfft`]; returns `fft_size` real samples. The imaginary parts
/// of the DC and Nyquist bins are ignored.
pub fn irfft(spec: &ComplexSpectrumFrame) -> Result<Vec<f64>, AudioError> {
    let n = spec.fft_size;
    check_size(n, 0)?;
    if spec.bins.len() != n / 2 + 1 {
        return Err(AudioError::InvalidSize {
            fft_size: n,
            frame_len: spec.bins.len(),
        });
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[0] = Complex64::new(spec.bins[0].re, 0.0);
    for k in 1..n / 2 {
        buf[k] = spec.bins[k];
        buf[n - k] = spec.bins[k].conj();
    }
    if n > 1 {
        buf[n / 2] = Complex64::new(spec.bins[n / 2].re, 0.0);
    }
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n).process(&mut buf));
    let scale = 1.0 / n as f64;
    Ok(buf.iter().map(|c| c.re * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_dft(x: &[f64], n: usize) -> Vec<Complex64> {
        (0..=n / 2)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| {
                        let ang = -2.0 * std::f64::consts::PI * (k * t % n) as f64 / n as f64;
                        Complex64::new(v * ang.cos(), v * ang.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn delta_and_dc() {
        let mut x = vec![0.0; 16];
        x[0] = 1.0;
        let spec = rfft(&x, 16).unwrap();
        assert_eq!(spec.bins.len(), 9);
        for b in &spec.bins {
            assert!((b - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
        let spec = rfft(&[1.0; 16], 16).unwrap();
        assert!((spec.bins[0].re - 16.0).abs() < 1e-12);
        assert!(spec.bins[1..].iter().all(|b| b.norm() < 1e-12));
    }

    #[test]
    fn matches_naive_dft_and_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &n in &[8usize, 64, 512] {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let spec = rfft(&x, n).unwrap();
            for (a, b) in spec.bins.iter().zip(naive_dft(&x, n)) {
                assert!((a - b).norm() < 1e-9, "n={n}");
            }
            let back = irfft(&spec).unwrap();
            let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9);

            let energy: f64 = x.iter().map(|v| v * v).sum();
            let b = &spec.bins;
            let spectral = (b[0].norm_sqr()
                + 2.0 * b[1..n / 2].iter().map(|c| c.norm_sqr()).sum::<f64>()
                + b[n / 2].norm_sqr())
                / n as f64;
            assert!(((energy - spectral) / energy).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_pads_short_frames() {
        let spec = rfft(&[1.0, 2.0, 3.0], 8).unwrap();
        let back = irfft(&spec).unwrap();
        assert!((back[2] - 3.0).abs() < 1e-12 && back[3..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(rfft(&[0.0; 6], 6), Err(AudioError::InvalidSize { .. })));
        assert!(matches!(rfft(&[0.0; 9], 8), Err(AudioError::InvalidSize { .. })));
    }
}
