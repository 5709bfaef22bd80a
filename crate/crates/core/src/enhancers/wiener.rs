use crate::audio::AudioClip;

use super::EnhanceError;

/// Local-statistics time-domain Wiener filter.
///
/// For each sample the mean `m` and variance `v` over a centered window
/// (zero-padded at the edges) give `out = m + max(v − ν, 0)/max(v, ν)·(x − m)`.
/// `ν` defaults to the mean local variance.
pub fn wiener_filter(
    noisy: &AudioClip,
    window: usize,
    noise_power: Option<f64>,
) -> Result<AudioClip, EnhanceError> {
    let x = noisy.samples();
    if window < 3 || window % 2 == 0 || window > x.len() {
        return Err(EnhanceError::InvalidWindow {
            window,
            len: x.len(),
        });
    }
    if let Some(nu) = noise_power {
        if !(nu >= 0.0 && nu.is_finite()) {
            return Err(EnhanceError::InvalidConfig(format!(
                "noise power must be finite and non-negative, got {nu}"
            )));
        }
    }
    let (means, vars) = local_stats(x, window);
    let nu = noise_power.unwrap_or_else(|| vars.iter().sum::<f64>() / vars.len() as f64);

    let out = x
        .iter()
        .zip(means.iter().zip(&vars))
        .map(|(&xi, (&m, &v))| {
            let gain = wiener_gain(v, nu);
            if gain == 1.0 {
                xi
            } else {
                m + gain * (xi - m)
            }
        })
        .collect();
    Ok(noisy.with_samples(out)?)
}

/// Per-sample gain in [0, 1]. With ν = 0 the gain is one, including where the
/// local variance is zero.
pub(crate) fn wiener_gain(local_var: f64, nu: f64) -> f64 {
    let denom = local_var.max(nu);
    if denom == 0.0 {
        1.0
    } else {
        (local_var - nu).max(0.0) / denom
    }
}

fn local_stats(x: &[f64], window: usize) -> (Vec<f64>, Vec<f64>) {
    let half = (window / 2) as isize;
    let n = x.len() as isize;
    let at = |i: isize| if i < 0 || i >= n { 0.0 } else { x[i as usize] };
    let w = window as f64;
    let mut means = Vec::with_capacity(x.len());
    let mut vars = Vec::with_capacity(x.len());
    for i in 0..n {
        let m = (i - half..=i + half).map(at).sum::<f64>() / w;
        let v = (i - half..=i + half).map(|j| (at(j) - m).powi(2)).sum::<f64>() / w;
        means.push(m);
        vars.push(v);
    }
    (means, vars)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn clip(x: Vec<f64>) -> AudioClip {
        AudioClip::new(x, 16000).unwrap()
    }

    /// Naive per-sample evaluation with explicit zero padding.
    fn oracle(x: &[f64], window: usize) -> Vec<f64> {
        let half = window / 2;
        let mut padded = vec![0.0; half];
        padded.extend_from_slice(x);
        padded.extend(std::iter::repeat(0.0).take(half));
        let mut m = vec![0.0; x.len()];
        let mut v = vec![0.0; x.len()];
        for i in 0..x.len() {
            let seg = &padded[i..i + window];
            m[i] = seg.iter().sum::<f64>() / window as f64;
            v[i] = seg.iter().map(|s| (s - m[i]) * (s - m[i])).sum::<f64>() / window as f64;
        }
        let nu = v.iter().sum::<f64>() / v.len() as f64;
        (0..x.len())
            .map(|i| {
                if v[i] < nu {
                    m[i]
                } else {
                    m[i] + (v[i] - nu) / v[i] * (x[i] - m[i])
                }
            })
            .collect()
    }

    #[test]
    fn constant_input_collapses_to_local_mean() {
        for &w in &[3usize, 5, 7] {
            let out = wiener_filter(&clip(vec![0.3; 40]), w, None).unwrap();
            for &s in &out.samples()[w / 2..40 - w / 2] {
                assert!((s - 0.3).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_noise_power_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = clip(x);
        assert_eq!(wiener_filter(&c, 5, Some(0.0)).unwrap(), c);
    }

    #[test]
    fn matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = wiener_filter(&clip(x.clone()), 3, None).unwrap();
        for (a, b) in got.samples().iter().zip(oracle(&x, 3)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gain_in_unit_interval() {
        for &v in &[0.0, 1e-9, 0.1, 1.0, 5.0] {
            for &nu in &[0.0, 0.05, 1.0, 10.0] {
                let g = wiener_gain(v, nu);
                assert!((0.0..=1.0).contains(&g));
            }
        }
    }

    #[test]
    fn invalid_windows() {
        let c = clip(vec![0.0; 10]);
        for w in [0, 1, 2, 4, 11] {
            assert!(matches!(
                wiener_filter(&c, w, None),
                Err(EnhanceError::InvalidWindow { .. })
            ));
        }
    }
}
