//! Link-level QoS algebra: channel gain, reserved rate, effective capacity,
//! effective bandwidth, and delay bounds.
//!
//! Rates are measured in packets per second throughout; the QoS exponent
//! `theta` is per-packet.

use crate::stats::log_sum_exp;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light, km/s.
pub const LIGHT_SPEED_KM_S: f64 = 299792.458;

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("distance must be positive, got {0} km")]
    NonPositiveDistance(f64),
    #[error("queue delay bound is undefined at zero rate")]
    ZeroRate,
    #[error("effective bandwidth overflowed; theta too large for the demand scale")]
    Overflow,
}

/// Per-satellite link and QoS parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkParams {
    /// Available bandwidth per satellite, Hz.
    pub bandwidth_hz: f64,
    /// Packet size, bits.
    pub packet_size_bits: f64,
    /// Transmit power, W.
    pub tx_power_w: f64,
    /// Noise power, W.
    pub noise_power_w: f64,
    /// Pathloss exponent.
    pub pathloss_exp: f64,
    /// Linear antenna gain multiplying the received power.
    pub antenna_gain: f64,
    /// QoS exponent, per packet.
    pub qos_exponent: f64,
    /// Target delay-violation probability of the queue.
    pub delay_violation_target: f64,
    #[serde(default = "default_light_speed")]
    pub light_speed_km_s: f64,
}

fn default_light_speed() -> f64 {
    LIGHT_SPEED_KM_S
}

impl LinkParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.bandwidth_hz <= 0.0
            || self.packet_size_bits <= 0.0
            || self.tx_power_w <= 0.0
            || self.noise_power_w <= 0.0
        {
            return Err("bandwidth, packet size, tx power and noise power must be > 0".into());
        }
        if self.pathloss_exp <= 0.0 {
            return Err("pathloss exponent must be > 0".into());
        }
        if self.qos_exponent <= 0.0 {
            return Err("qos exponent must be > 0".into());
        }
        if self.delay_violation_target <= 0.0 || self.delay_violation_target >= 1.0 {
            return Err("delay violation target must lie in (0, 1)".into());
        }
        Ok(())
    }

    /// Spectral efficiency log2(1 + SNR) at slant distance `d_km`.
    pub fn spectral_efficiency(&self, d_km: f64) -> f64 {
        let h = channel_gain(d_km, self.pathloss_exp).expect("positive distance");
        let snr = self.tx_power_w * self.antenna_gain * h / self.noise_power_w;
        (1.0 + snr).log2()
    }

    /// Full-reservation rate of a visible satellite at `d_km`, packets/s.
    /// The per-satellite rate is linear in the reserved fraction, so this is
    /// the coefficient multiplying `b`.
    pub fn rate_coefficient(&self, d_km: f64) -> f64 {
        self.bandwidth_hz / self.packet_size_bits * self.spectral_efficiency(d_km)
    }
}

/// Demand model feeding the effective-bandwidth computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum DemandModel {
    /// Poisson arrivals with the given intensity, packets/s.
    Poisson { intensity: f64 },
    /// Gaussian demand with the given mean and variance.
    Gaussian { mean: f64, variance: f64 },
    /// Empirical demand samples, packets/s.
    Empirical { samples: Vec<f64> },
}

impl DemandModel {
    pub fn mean(&self) -> f64 {
        match self {
            DemandModel::Poisson { intensity } => *intensity,
            DemandModel::Gaussian { mean, .. } => *mean,
            DemandModel::Empirical { samples } => crate::stats::mean(samples),
        }
    }
}

/// Power-law channel gain h = d^{-delta}, with d converted to meters.
pub fn channel_gain(d_km: f64, pathloss_exp: f64) -> Result<f64, LinkError> {
    if d_km <= 0.0 {
        return Err(LinkError::NonPositiveDistance(d_km));
    }
    Ok((d_km * 1000.0).powf(-pathloss_exp))
}

/// Transmission rate in packets/s for coverage flag `a` and reserved
/// fraction `b`.
pub fn rate(a: bool, b: f64, params: &LinkParams, d_km: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&b));
    if !a || b == 0.0 {
        return 0.0;
    }
    b * params.rate_coefficient(d_km)
}

/// Effective capacity of a deterministic-service queue: identical to the
/// service rate for every QoS exponent.
pub fn effective_capacity(rate_pps: f64, _theta: f64) -> f64 {
    rate_pps
}

/// Queue delay bound for target violation probability `epsilon`.
pub fn queue_delay_bound(rate_pps: f64, theta: f64, epsilon: f64) -> Result<f64, LinkError> {
    if rate_pps <= 0.0 {
        return Err(LinkError::ZeroRate);
    }
    Ok(-epsilon.ln() / (theta * rate_pps))
}

/// Overall delay bound: queue bound plus propagation, or 0 when the
/// satellite carries no traffic.
pub fn total_delay(a: bool, b: f64, params: &LinkParams, d_km: f64) -> f64 {
    let r = rate(a, b, params, d_km);
    if r <= 0.0 {
        return 0.0;
    }
    -params.delay_violation_target.ln() / (params.qos_exponent * r)
        + d_km / params.light_speed_km_s
}

/// Effective bandwidth A(l, theta) = (1/theta) log E[exp(theta l)].
pub fn effective_bandwidth(model: &DemandModel, theta: f64) -> Result<f64, LinkError> {
    debug_assert!(theta > 0.0);
    let value = match model {
        DemandModel::Poisson { intensity } => intensity * (theta.exp() - 1.0) / theta,
        DemandModel::Gaussian { mean, variance } => mean + 0.5 * variance * theta,
        DemandModel::Empirical { samples } => {
            let scaled: Vec<f64> = samples.iter().map(|x| theta * x).collect();
            (log_sum_exp(&scaled) - (samples.len() as f64).ln()) / theta
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(LinkError::Overflow)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, Normal, Poisson};

    fn test_params() -> LinkParams {
        LinkParams {
            bandwidth_hz: 500e6,
            packet_size_bits: 8e7,
            tx_power_w: 10.0,
            noise_power_w: 4.3573018101887e-12,
            pathloss_exp: 2.5,
            antenna_gain: 1e5,
            qos_exponent: 0.05,
            delay_violation_target: 0.05,
            light_speed_km_s: LIGHT_SPEED_KM_S,
        }
    }

    #[test]
    fn channel_gain_reference_points() {
        // 1 m at delta 2.5 is the unit distance.
        assert!((channel_gain(0.001, 2.5).unwrap() - 1.0).abs() < 1e-12);
        // Frozen from arbitrary-precision evaluation of 550000^-2.5.
        let g = channel_gain(550.0, 2.5).unwrap();
        assert!((g - 4.457519751823088e-15).abs() / 4.457519751823088e-15 < 1e-12);
        // Halving the distance scales the gain by 2^2.5.
        let ratio = channel_gain(275.0, 2.5).unwrap() / g;
        assert!((ratio - 2.0_f64.powf(2.5)).abs() < 1e-9);
        assert!(channel_gain(0.0, 2.5).is_err());
    }

    #[test]
    fn default_noise_calibration_gives_ten_bits_per_hz() {
        // The scenario default pins log2(1+SNR) = 10 at 550 km.
        let params = test_params();
        assert!((params.spectral_efficiency(550.0) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn rate_zero_when_invisible_and_linear_in_b() {
        let params = test_params();
        assert_eq!(rate(false, 0.7, &params, 550.0), 0.0);
        assert_eq!(rate(true, 0.0, &params, 550.0), 0.0);
        let full = rate(true, 1.0, &params, 550.0);
        let half = rate(true, 0.5, &params, 550.0);
        assert!((half - 0.5 * full).abs() < 1e-12);
        // B/kappa * log2(1+SNR) = 500e6/8e7 * 10 = 62.5 packets/s.
        assert!((full - 62.5).abs() < 1e-9);
    }

    #[test]
    fn effective_capacity_is_the_rate() {
        assert_eq!(effective_capacity(0.0, 0.05), 0.0);
        assert_eq!(effective_capacity(117.3, 0.05), 117.3);
        assert_eq!(effective_capacity(117.3, 0.01), effective_capacity(117.3, 10.0));
    }

    #[test]
    fn queue_delay_bound_algebra() {
        // epsilon = e^-2, theta = 1, R = 2 -> exactly 1 s.
        let d = queue_delay_bound(2.0, 1.0, (-2.0_f64).exp()).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        // Doubling the rate halves the bound.
        let d2 = queue_delay_bound(4.0, 1.0, (-2.0_f64).exp()).unwrap();
        assert!((d - 2.0 * d2).abs() < 1e-12);
        // Substituting back reproduces the violation target.
        let eps = 0.05;
        let bound = queue_delay_bound(10.0, 0.05, eps).unwrap();
        assert!(((-0.05 * 10.0 * bound).exp() - eps).abs() < 1e-12);
        assert!(queue_delay_bound(0.0, 1.0, 0.05).is_err());
    }

    #[test]
    fn total_delay_includes_propagation() {
        let params = test_params();
        assert_eq!(total_delay(true, 0.0, &params, 550.0), 0.0);
        assert_eq!(total_delay(false, 1.0, &params, 550.0), 0.0);
        let d = total_delay(true, 1.0, &params, 550.0);
        // Frozen propagation term: 550 / 299792.458 s.
        let prop = 0.0018346025235898363;
        assert!(d >= prop);
        let queue = queue_delay_bound(62.5, 0.05, 0.05).unwrap();
        assert!((d - queue - prop).abs() < 1e-12);
    }

    #[test]
    fn poisson_effective_bandwidth_matches_monte_carlo() {
        let model = DemandModel::Poisson { intensity: 100.0 };
        let closed = effective_bandwidth(&model, 0.1).unwrap();
        assert!((closed - 105.17091807564762).abs() < 1e-9);

        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let poisson = Poisson::new(100.0).unwrap();
        let n = 1_000_000;
        let mut acc = 0.0f64;
        for _ in 0..n {
            let x: f64 = poisson.sample(&mut rng);
            acc += (0.1 * x).exp();
        }
        let mc = (acc / n as f64).ln() / 0.1;
        assert!((closed - mc).abs() < 0.5, "closed {closed} vs mc {mc}");
    }

    #[test]
    fn gaussian_effective_bandwidth_matches_monte_carlo() {
        let model = DemandModel::Gaussian { mean: 100.0, variance: 400.0 };
        let closed = effective_bandwidth(&model, 0.1).unwrap();
        assert!((closed - 120.0).abs() < 1e-12);

        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let normal = Normal::new(100.0, 20.0).unwrap();
        let n = 1_000_000;
        let mut acc = 0.0f64;
        for _ in 0..n {
            let x: f64 = normal.sample(&mut rng);
            acc += (0.1 * x).exp();
        }
        let mc = (acc / n as f64).ln() / 0.1;
        assert!((closed - mc).abs() < 0.5, "closed {closed} vs mc {mc}");
    }

    #[test]
    fn effective_bandwidth_theta_limit_is_the_mean() {
        let model = DemandModel::Poisson { intensity: 100.0 };
        let eb = effective_bandwidth(&model, 1e-8).unwrap();
        assert!((eb - 100.0).abs() / 100.0 < 1e-5);
    }

    #[test]
    fn empirical_converges_to_poisson_closed_form() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let poisson = Poisson::new(200.0).unwrap();
        let samples: Vec<f64> = (0..1_000_000).map(|_| poisson.sample(&mut rng)).collect();
        let emp = effective_bandwidth(&DemandModel::Empirical { samples }, 0.05).unwrap();
        let closed =
            effective_bandwidth(&DemandModel::Poisson { intensity: 200.0 }, 0.05).unwrap();
        assert!((emp - closed).abs() / closed < 0.01, "emp {emp} vs closed {closed}");
    }

    #[test]
    fn empirical_is_safe_against_overflow() {
        let model = DemandModel::Empirical { samples: vec![1e4, 2e4, 3e4] };
        // theta*x reaches 3e4*0.05 = 1500; naive exp would overflow. The
        // largest sample dominates: eb = 3e4 - ln(3)/0.05 + O(e^-500).
        let eb = effective_bandwidth(&model, 0.05).unwrap();
        assert!(eb.is_finite());
        assert!((eb - (3e4 - 3.0_f64.ln() / 0.05)).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn effective_bandwidth_nondecreasing_in_theta(
            lambda in 1.0f64..500.0,
            mean in 1.0f64..500.0,
            variance in 0.0f64..900.0,
        ) {
            let thetas = [1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.5];
            for model in [
                DemandModel::Poisson { intensity: lambda },
                DemandModel::Gaussian { mean, variance },
            ] {
                let mut prev = f64::NEG_INFINITY;
                for &theta in &thetas {
                    let eb = effective_bandwidth(&model, theta).unwrap();
                    prop_assert!(eb >= prev - 1e-9);
                    prop_assert!(eb >= model.mean() - 1e-6);
                    prev = eb;
                }
            }
        }

        #[test]
        fn delay_convex_decreasing_in_b(b in 0.05f64..0.95) {
            let params = test_params();
            let d = 700.0;
            let f = |x: f64| total_delay(true, x, &params, d);
            prop_assert!(f(b) > f(b + 0.05));
            // Midpoint convexity on an interior triple.
            let mid = f(b) + f(b + 0.04);
            prop_assert!(2.0 * f(b + 0.02) <= mid + 1e-12);
        }
    }
}
