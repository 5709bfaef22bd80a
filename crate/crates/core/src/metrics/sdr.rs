use crate::audio::AudioClip;

use super::MetricError;

pub const DEFAULT_SDR_FILTER_LEN: usize = 512;
const DAMPING: f64 = 1e-10;
const PERFECT_RATIO: f64 = 1e-30;
const REFINEMENT_STEPS: usize = 3;

fn check_pair(reference: &AudioClip, estimate: &AudioClip) -> Result<(), MetricError> {
    if reference.len() != estimate.len() {
        return Err(MetricError::LengthMismatch {
            reference: reference.len(),
            estimate: estimate.len(),
        });
    }
    if reference.sample_rate_hz() != estimate.sample_rate_hz() {
        return Err(MetricError::RateMismatch {
            reference: reference.sample_rate_hz(),
            estimate: estimate.sample_rate_hz(),
        });
    }
    Ok(())
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Compensated accumulator carrying roughly twice the working precision, so
/// that sums over the same exact products round to the same double.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    hi: f64,
    lo: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let s = self.hi + v;
        let bb = s - self.hi;
        self.lo += (self.hi - (s - bb)) + (v - bb);
        self.hi = s;
    }

    fn add_product(&mut self, a: f64, b: f64) {
        let (p, err) = two_product(a, b);
        self.add(p);
        self.lo += err;
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Veltkamp split of `a` into two halves of at most 26 significant bits.
#[inline]
fn split(a: f64) -> (f64, f64) {
    let c = 134_217_729.0 * a;
    let hi = c - (c - a);
    (hi, a - hi)
}

/// `a·b` and its exact rounding error (Dekker). Plain arithmetic rather than
/// `mul_add`, which is a library call on targets built without FMA.
#[inline]
fn two_product(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = Compensated::default();
    a.iter().zip(b).for_each(|(x, y)| acc.add_product(*x, *y));
    acc.value()
}

const LAG_BLOCK: usize = 8;

/// `c[k] = sum_{t >= k} a[t] b[t - k]` for `k < lags`, each a compensated
/// sum in increasing `t`. Lags are processed in blocks so the independent
/// accumulators can overlap in the pipeline.
fn lagged_products(a: &[f64], b: &[f64], lags: usize) -> Vec<Compensated> {
    let n = a.len();
    let mut out = Vec::with_capacity(lags);
    for k0 in (0..lags).step_by(LAG_BLOCK) {
        let m = LAG_BLOCK.min(lags - k0);
        let mut acc = [Compensated::default(); LAG_BLOCK];
        let full = (k0 + m - 1).min(n);
        for t in k0..full {
            for (q, slot) in acc.iter_mut().enumerate().take(m) {
                if t >= k0 + q {
                    slot.add_product(a[t], b[t - k0 - q]);
                }
            }
        }
        for t in full..n {
            let base = t - k0;
            for (q, slot) in acc.iter_mut().enumerate().take(m) {
                slot.add_product(a[t], b[base - q]);
            }
        }
        out.extend_from_slice(&acc[..m]);
    }
    out
}

fn ratio_db(target: f64, residual: f64) -> f64 {
    if residual < PERFECT_RATIO * target {
        f64::INFINITY
    } else {
        10.0 * (target / residual).log10()
    }
}

/// Signal-to-distortion ratio in dB after projecting `estimate` onto the
/// span of `reference` delayed by `0..filter_len` samples. Returns `+inf`
/// when the residual is negligible.
pub fn sdr(reference: &AudioClip, estimate: &AudioClip, filter_len: usize) -> Result<f64, MetricError> {
    check_pair(reference, estimate)?;
    if filter_len == 0 {
        return Err(MetricError::InvalidArgument("filter_len must be at least 1".into()));
    }
    let r = reference.samples();
    let e = estimate.samples();
    if energy(r) == 0.0 {
        return Err(MetricError::ZeroReference);
    }
    let n = r.len();
    let taps = filter_len.min(n);

    // Gram matrix of the truncated delayed copies: row 0 is the
    // autocorrelation, later rows follow by removing the samples that fall
    // off the end.
    let mut acc = vec![Compensated::default(); taps * taps];
    for (j, a) in lagged_products(r, r, taps).into_iter().enumerate() {
        acc[j * taps] = a;
        acc[j] = a;
    }
    for i in 0..taps - 1 {
        for j in i..taps - 1 {
            let mut v = acc[i * taps + j];
            v.add_product(-r[n - 1 - i], r[n - 1 - j]);
            acc[(i + 1) * taps + j + 1] = v;
            acc[(j + 1) * taps + i + 1] = v;
        }
    }
    let gram: Vec<f64> = acc.iter().map(|a| a.value()).collect();
    let rhs: Vec<f64> = lagged_products(e, r, taps).into_iter().map(Compensated::value).collect();

    let scale = (0..taps).map(|i| gram[i * taps + i]).sum::<f64>() / taps as f64;
    let chol = cholesky(&gram, taps, DAMPING * scale)?;
    let mut coef = cholesky_solve(&chol, taps, &rhs);
    for _ in 0..REFINEMENT_STEPS {
        let resid: Vec<f64> = (0..taps)
            .map(|i| {
                let mut a = Compensated::default();
                a.add(rhs[i]);
                (0..taps).for_each(|j| a.add_product(-gram[i * taps + j], coef[j]));
                a.value()
            })
            .collect();
        let delta = cholesky_solve(&chol, taps, &resid);
        coef.iter_mut().zip(&delta).for_each(|(c, d)| *c += d);
    }

    let mut target = vec![0.0; n];
    for (k, &c) in coef.iter().enumerate() {
        target[k..].iter_mut().zip(r).for_each(|(y, x)| *y += c * x);
    }
    let residual: f64 = e.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(ratio_db(energy(&target), residual))
}

/// Lower-triangular factor of `a + damping·I`.
fn cholesky(a: &[f64], n: usize, damping: f64) -> Result<Vec<f64>, MetricError> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j] - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
            if i == j {
                s += damping;
                if s <= 0.0 {
                    return Err(MetricError::InvalidArgument(
                        "reference delays are numerically degenerate".into(),
                    ));
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i * n + k] * y[k]).sum::<f64>()) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| l[k * n + i] * x[k]).sum::<f64>()) / l[i * n + i];
    }
    x
}

/// Scale-invariant SDR in dB on zero-meaned signals. `+inf` for an exact
/// rescaling of the reference.
pub fn si_sdr(reference: &AudioClip, estimate: &AudioClip) -> Result<f64, MetricError> {
    check_pair(reference, estimate)?;
    let demean = |x: &[f64]| {
        let mut acc = Compensated::default();
        x.iter().for_each(|&v| acc.add(v));
        let m = acc.value() / x.len().max(1) as f64;
        x.iter().map(|v| v - m).collect::<Vec<f64>>()
    };
    let r = demean(reference.samples());
    let e = demean(estimate.samples());
    let rr = dot(&r, &r);
    if rr == 0.0 {
        return Err(MetricError::ZeroReference);
    }
    let alpha = dot(&e, &r) / rr;
    let residual: f64 = e
        .iter()
        .zip(&r)
        .map(|(a, b)| {
            let d = (-alpha).mul_add(*b, *a);
            d * d
        })
        .sum();
    Ok(ratio_db(alpha * alpha * rr, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use proptest::prelude::*;

    fn clip(x: Vec<f64>) -> AudioClip {
        AudioClip::new(x, 16000).unwrap()
    }

    /// Remove from `v` its component in the span of `basis` (modified
    /// Gram-Schmidt, two passes).
    fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
        let mut q: Vec<Vec<f64>> = Vec::new();
        for b in basis {
            let mut u = b.clone();
            for _ in 0..2 {
                for qv in &q {
                    let d: f64 = u.iter().zip(qv).map(|(a, b)| a * b).sum();
                    u.iter_mut().zip(qv).for_each(|(a, b)| *a -= d * b);
                }
            }
            let norm = energy(&u).sqrt();
            if norm > 1e-9 {
                u.iter_mut().for_each(|a| *a /= norm);
                q.push(u);
            }
        }
        for _ in 0..2 {
            for qv in &q {
                let d: f64 = v.iter().zip(qv).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(qv).for_each(|(a, b)| *a -= d * b);
            }
        }
    }

    fn delayed(r: &[f64], taps: usize) -> Vec<Vec<f64>> {
        (0..taps)
            .map(|k| (0..r.len()).map(|t| if t >= k { r[t - k] } else { 0.0 }).collect())
            .collect()
    }

    #[test]
    fn identical_and_delayed_are_perfect() {
        let r = synth::speech_like(4000, 16000, 0.5, 0.0, 1);
        let mut noisy = r.clone();
        noisy
            .iter_mut()
            .zip(synth::white_noise(4000, 0.05, 2))
            .for_each(|(a, b)| *a += b);
        let reference = clip(noisy);
        assert_eq!(sdr(&reference, &reference, 512).unwrap(), f64::INFINITY);
        let mut d = vec![0.0; 5];
        d.extend_from_slice(&reference.samples()[..3995]);
        assert_eq!(sdr(&reference, &clip(d), 512).unwrap(), f64::INFINITY);
    }

    #[test]
    fn orthogonal_construction_gives_ten_db() {
        let taps = 64;
        let r = synth::white_noise(2000, 0.5, 3);
        let mut n = synth::white_noise(2000, 0.5, 4);
        orthogonalize(&mut n, &delayed(&r, taps));
        let g = (energy(&r) / 10.0 / energy(&n)).sqrt();
        n.iter_mut().for_each(|v| *v *= g);
        let est: Vec<f64> = r.iter().zip(&n).map(|(a, b)| a + b).collect();
        let v = sdr(&clip(r.clone()), &clip(est), taps).unwrap();
        assert!((v - 10.0).abs() < 0.01, "{v}");

        // more orthogonal distortion, lower score
        let mut prev = f64::INFINITY;
        for t in [0.5, 1.0, 2.0, 4.0] {
            let est: Vec<f64> = r.iter().zip(&n).map(|(a, b)| a + t * b).collect();
            let v = sdr(&clip(r.clone()), &clip(est), taps).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn two_product_is_exact() {
        let x = synth::white_noise(1000, 3.0, 8);
        for w in x.windows(2) {
            let (p, err) = two_product(w[0], w[1]);
            assert_eq!(p, w[0] * w[1]);
            assert_eq!(err, w[0].mul_add(w[1], -p));
        }
    }

    #[test]
    fn lagged_products_match_plain_dots() {
        let a = synth::white_noise(300, 1.0, 9);
        let b = synth::white_noise(300, 1.0, 10);
        for lags in [1, 7, 8, 9, 20, 300] {
            let c = lagged_products(&a, &b, lags);
            assert_eq!(c.len(), lags);
            for (k, v) in c.iter().enumerate() {
                assert_eq!(v.value(), dot(&a[k..], &b[..300 - k]), "lag {k}");
            }
        }
    }

    #[test]
    fn sdr_errors() {
        let z = clip(vec![0.0; 100]);
        let x = clip(synth::white_noise(100, 1.0, 1));
        assert!(matches!(sdr(&z, &x, 16), Err(MetricError::ZeroReference)));
        assert!(matches!(si_sdr(&z, &x), Err(MetricError::ZeroReference)));
        assert!(sdr(&x, &clip(vec![0.0; 99]), 16).is_err());
        assert!(sdr(&x, &x, 0).is_err());
    }

    #[test]
    fn si_sdr_closed_forms() {
        let r = synth::white_noise(1000, 1.0, 5);
        let x = clip(r.clone());
        let scaled = clip(r.iter().map(|v| 3.7 * v).collect());
        assert_eq!(si_sdr(&x, &scaled).unwrap(), f64::INFINITY);

        let m = r.iter().sum::<f64>() / r.len() as f64;
        let rc: Vec<f64> = r.iter().map(|v| v - m).collect();
        let mut w = synth::white_noise(1000, 1.0, 6);
        let ones = vec![1.0; 1000];
        orthogonalize(&mut w, &[ones, rc.clone()]);
        let g = (energy(&rc) / energy(&w)).sqrt();
        let est: Vec<f64> = r.iter().zip(&w).map(|(a, b)| a + g * b).collect();
        assert!(si_sdr(&x, &clip(est)).unwrap().abs() < 1e-9);
    }

    // Double-double accumulation for the oracle.
    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    fn dd_dot(a: &[f64], b: &[f64]) -> f64 {
        let (mut hi, mut lo) = (0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            let p = x * y;
            let pe = x.mul_add(*y, -p);
            let (s, e) = two_sum(hi, p);
            hi = s;
            lo += e + pe;
        }
        hi + lo
    }

    proptest! {
        #[test]
        fn si_sdr_matches_extended_oracle(
            r in prop::collection::vec(-1.0f64..1.0, 16..200),
            noise in prop::collection::vec(-1.0f64..1.0, 200),
            g in prop::sample::select(vec![0.1, 10.0, -2.5]),
        ) {
            let n = r.len();
            let e: Vec<f64> = r.iter().zip(&noise).map(|(a, b)| 0.8 * a + 0.3 * b).collect();
            let x = clip(r.clone());
            let y = clip(e.clone());
            let got = si_sdr(&x, &y).unwrap();

            let mr = dd_dot(&r, &vec![1.0; n]) / n as f64;
            let me = dd_dot(&e, &vec![1.0; n]) / n as f64;
            let rc: Vec<f64> = r.iter().map(|v| v - mr).collect();
            let ec: Vec<f64> = e.iter().map(|v| v - me).collect();
            let alpha = dd_dot(&ec, &rc) / dd_dot(&rc, &rc);
            let t: Vec<f64> = rc.iter().map(|v| alpha * v).collect();
            let res: Vec<f64> = ec.iter().zip(&t).map(|(a, b)| a - b).collect();
            let oracle = 10.0 * (dd_dot(&t, &t) / dd_dot(&res, &res)).log10();
            prop_assert!((got - oracle).abs() < 1e-9);

            let yg = clip(e.iter().map(|v| g * v).collect());
            prop_assert!((si_sdr(&x, &yg).unwrap() - got).abs() < 1e-9);
        }
    }
}
