//! Small numerical helpers shared across modules: standard-normal CDF and
//! quantile, overflow-safe log-sum-exp, and moment utilities.

/// Standard Gaussian CDF, Phi(x) = 0.5 * erfc(-x / sqrt(2)).
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse standard Gaussian CDF by bisection on `std_normal_cdf`.
///
/// Bisects until the bracket width falls below 1e-10. Requires `p` strictly
/// inside (0, 1); the quantile is unbounded at the endpoints.
pub fn std_normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile requires p in (0,1), got {p}");
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if std_normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// log(sum(exp(x_i))) with the usual max shift so large arguments cannot
/// overflow.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Arithmetic mean. Empty input is the caller's bug.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (divide by n, not n-1).
pub fn population_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_symmetry_and_anchors() {
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-15);
        // Phi(1.2815515655) = 0.9 to high precision.
        assert!((std_normal_cdf(1.2815515655446004) - 0.9).abs() < 1e-12);
        assert!((std_normal_cdf(-1.0) + std_normal_cdf(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quantile_inverts_cdf() {
        // Frozen reference values (erfinv evaluated at 30 digits).
        assert!((std_normal_quantile(0.9) - 1.2815515655446004).abs() < 1e-8);
        assert!((std_normal_quantile(0.99) - 2.3263478740408408).abs() < 1e-8);
        assert!(std_normal_quantile(0.5).abs() < 1e-9);
        for &p in &[0.01, 0.1, 0.3, 0.7, 0.975, 0.999] {
            let z = std_normal_quantile(p);
            assert!((std_normal_cdf(z) - p).abs() < 1e-10);
        }
    }

    #[test]
    fn log_sum_exp_handles_large_inputs() {
        let v = [1000.0, 1000.0];
        assert!((log_sum_exp(&v) - (1000.0 + 2.0_f64.ln())).abs() < 1e-9);
        let small = [-2.0_f64, -3.0, -4.0];
        let direct: f64 = small.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&small) - direct).abs() < 1e-12);
    }

    #[test]
    fn moments_match_hand_arithmetic() {
        assert_eq!(mean(&[2.0, 4.0, 6.0]), 4.0);
        assert!((population_variance(&[2.0, 4.0, 6.0]) - 8.0 / 3.0).abs() < 1e-15);
        assert_eq!(population_variance(&[5.0, 5.0, 5.0, 5.0]), 0.0);
    }
}
