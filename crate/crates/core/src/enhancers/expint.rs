//! Exponential integral E1(x) = ∫ₓ^∞ e^(−t)/t dt.

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// E1 for x > 0. Power series below 1, Lentz continued fraction above.
/// Returns +inf at 0 and NaN for negative input.
pub fn exp_int_e1(x: f64) -> f64 {
    if x.is_nan() || x < 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return f64::INFINITY;
    }
    if x < 1.0 {
        // E1(x) = -γ - ln x - Σ_{k≥1} (-x)^k / (k·k!)
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            let k = k as f64;
            term *= -x / k;
            let add = term / k;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        -EULER_GAMMA - x.ln() - sum
    } else {
        // E1(x) = e^{-x} / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...)))
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let delta = c * d;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ∫ₓ^∞ e^(−t)/t dt with t = x·e^u, i.e. ∫₀^∞ exp(−x·e^u) du, by composite
    /// Simpson over u until the integrand is below 1e-22 of its start.
    fn e1_quadrature(x: f64) -> f64 {
        let upper = (60.0 / x).ln().max(1.0);
        let n = 400_000;
        let h = upper / n as f64;
        let f = |u: f64| (-x * u.exp()).exp();
        let mut s = f(0.0) + f(upper);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn known_value_at_one() {
        let oracle = e1_quadrature(1.0);
        assert!((oracle - 0.219_383_934_395_520_3).abs() < 1e-12);
        assert!((exp_int_e1(1.0) - oracle).abs() < 1e-12);
    }

    #[test]
    fn matches_quadrature_oracle() {
        let mut x = 1e-6;
        while x <= 30.0 {
            let oracle = e1_quadrature(x);
            let got = exp_int_e1(x);
            assert!(((got - oracle) / oracle).abs() < 1e-9, "x={x}: {got} vs {oracle}");
            x *= 1.37;
        }
        for &x in &[0.999_999, 1.0, 1.000_001, 30.0] {
            let oracle = e1_quadrature(x);
            assert!(((exp_int_e1(x) - oracle) / oracle).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn edge_inputs() {
        assert_eq!(exp_int_e1(0.0), f64::INFINITY);
        assert!(exp_int_e1(-1.0).is_nan());
        assert!(exp_int_e1(800.0) >= 0.0);
    }
}
