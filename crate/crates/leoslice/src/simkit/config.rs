//! Scenario configuration: one TOML section per subsystem, with defaults
//! matching the reference scenario (Starlink Phase-1 shell over a 1.5-degree
//! area, 9 windows of 10 slots of 10 s).

use crate::constellation::{ConstellationConfig, GroundArea};
use crate::demand::{RegimeSegment, RegimeSpec, SegmentKind};
use crate::linkmodel::LinkParams;
use crate::predictor::PredictorConfig;
use crate::slicer::CostWeights;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Resource slicing scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Deterministic point prediction, plain effective-bandwidth thresholds,
    /// fixed within the window.
    Frs,
    /// Chance-constrained DT plan, fixed within the window.
    Fdtrs,
    /// Chance-constrained DT plan with the adaptive re-slicing loop.
    Adtrs,
    /// Oracle demand: thresholds are the actual empirical effective
    /// bandwidths.
    Perfect,
}

impl Scheme {
    pub fn label(&self, gamma: f64) -> String {
        match self {
            Scheme::Frs => "FRS".to_string(),
            Scheme::Fdtrs => format!("FDTRS-{gamma:.2}"),
            Scheme::Adtrs => format!("ADTRS-{gamma:.2}"),
            Scheme::Perfect => "PERFECT".to_string(),
        }
    }

    pub fn parse(name: &str) -> Result<Scheme, ConfigError> {
        match name.to_ascii_lowercase().as_str() {
            "frs" => Ok(Scheme::Frs),
            "fdtrs" => Ok(Scheme::Fdtrs),
            "adtrs" => Ok(Scheme::Adtrs),
            "perfect" | "perfect-rs" | "perfectrs" => Ok(Scheme::Perfect),
            other => Err(ConfigError::Invalid(format!("unknown scheme `{other}`"))),
        }
    }
}

/// How a slot is judged violated against the actual demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ViolationMode {
    /// Reserved capacity below the empirical effective bandwidth of the
    /// slot's actual samples (the strict reading).
    #[default]
    Empirical,
    /// Reserved capacity below the realized mean demand.
    Mean,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedConfig {
    pub demand: u64,
    pub training: u64,
    pub prediction: u64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self { demand: 1, training: 2, prediction: 3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSection {
    /// Number of slicing windows W.
    pub windows: usize,
    /// Slots per window T.
    pub window_len: usize,
    /// Slot duration tau in seconds; demand is sampled once per second.
    pub slot_duration_s: usize,
    /// Pre-horizon slots used to train the predictor before window 1.
    pub warmup_slots: usize,
    pub scheme: Scheme,
    /// Satisfaction level gamma.
    pub gamma: f64,
    /// Revision discount alpha.
    pub alpha: f64,
    pub big_m: f64,
    /// beta_1 expressed per MHz of reserved spectrum per slot.
    pub beta1_per_mhz: f64,
    /// beta_2 per second of worst-case delay per slot.
    pub beta2_per_s: f64,
    #[serde(default)]
    pub violation_mode: ViolationMode,
    /// Materiality gate of the cheaper-plan re-slice trigger.
    #[serde(default = "default_improvement_margin")]
    pub reslice_improvement_margin: f64,
    #[serde(default)]
    pub seeds: SeedConfig,
}

fn default_improvement_margin() -> f64 {
    0.02
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            windows: 9,
            window_len: 10,
            slot_duration_s: 10,
            warmup_slots: 120,
            scheme: Scheme::Adtrs,
            gamma: 0.9,
            alpha: 0.6,
            big_m: 1e9,
            beta1_per_mhz: 1.0,
            beta2_per_s: 100.0,
            violation_mode: ViolationMode::Empirical,
            reslice_improvement_margin: 0.02,
            seeds: SeedConfig::default(),
        }
    }
}

/// Demand source: synthetic regime segments or a CSV trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemandSection {
    /// "synthetic" or "trace".
    pub source: String,
    #[serde(default)]
    pub trace_path: Option<String>,
    /// Segments over the full trace (warmup plus horizon), seconds from 0.
    #[serde(default)]
    pub segments: Vec<RegimeSegment>,
}

impl Default for DemandSection {
    fn default() -> Self {
        Self { source: "synthetic".into(), trace_path: None, segments: Vec::new() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub constellation: ConstellationConfig,
    pub area: GroundArea,
    pub link: LinkParams,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub demand: DemandSection,
    #[serde(default)]
    pub predictor: PredictorConfig,
}

impl ScenarioConfig {
    /// Reference scenario with the calibrated defaults.
    pub fn reference() -> Self {
        Self {
            constellation: ConstellationConfig::starlink_phase1(),
            area: GroundArea {
                lat_min_deg: 30.0,
                lat_max_deg: 31.5,
                lon_min_deg: -84.0,
                lon_max_deg: -82.5,
                min_elevation_deg: 30.0,
            },
            link: LinkParams {
                bandwidth_hz: 500e6,
                packet_size_bits: 8e7,
                tx_power_w: 10.0,
                // Calibrated so a fully reserved satellite at 550 km runs at
                // log2(1+SNR) = 10 bit/s/Hz.
                noise_power_w: 4.3573018101887e-12,
                pathloss_exp: 2.5,
                antenna_gain: 1e5,
                qos_exponent: 0.05,
                delay_violation_target: 0.05,
                light_speed_km_s: crate::linkmodel::LIGHT_SPEED_KM_S,
            },
            sim: SimSection::default(),
            demand: DemandSection::default(),
            predictor: PredictorConfig::default(),
        }
    }

    pub fn horizon_slots(&self) -> usize {
        self.sim.windows * self.sim.window_len
    }

    pub fn total_trace_seconds(&self) -> usize {
        (self.sim.warmup_slots + self.horizon_slots()) * self.sim.slot_duration_s
    }

    pub fn weights(&self) -> CostWeights {
        CostWeights {
            resource_per_hz: self.sim.beta1_per_mhz / 1e6,
            delay_per_s: self.sim.beta2_per_s,
        }
    }

    /// The demand regime: configured segments, or the default non-stationary
    /// profile (a stationary warmup followed by four alternating
    /// Poisson/Gaussian segments with roughly +/-30% drift).
    pub fn regime(&self) -> RegimeSpec {
        if !self.demand.segments.is_empty() {
            return RegimeSpec {
                duration_s: self.total_trace_seconds(),
                segments: self.demand.segments.clone(),
            };
        }
        let warmup_s = self.sim.warmup_slots * self.sim.slot_duration_s;
        let horizon_s = self.horizon_slots() * self.sim.slot_duration_s;
        let q = horizon_s / 4;
        // The warmup itself drifts so the predictor learns to track levels
        // rather than a constant.
        RegimeSpec {
            duration_s: self.total_trace_seconds(),
            segments: vec![
                RegimeSegment {
                    start_second: 0,
                    kind: SegmentKind::Poisson { lambda_start: 60.0, lambda_end: 70.0 },
                },
                RegimeSegment {
                    start_second: warmup_s / 2,
                    kind: SegmentKind::Poisson { lambda_start: 70.0, lambda_end: 62.0 },
                },
                RegimeSegment {
                    start_second: warmup_s,
                    kind: SegmentKind::Poisson { lambda_start: 63.0, lambda_end: 72.0 },
                },
                RegimeSegment {
                    start_second: warmup_s + q,
                    kind: SegmentKind::Gaussian {
                        mean_start: 72.0,
                        mean_end: 62.0,
                        variance_start: 260.0,
                        variance_end: 200.0,
                    },
                },
                RegimeSegment {
                    start_second: warmup_s + 2 * q,
                    kind: SegmentKind::Poisson { lambda_start: 62.0, lambda_end: 70.0 },
                },
                RegimeSegment {
                    start_second: warmup_s + 3 * q,
                    kind: SegmentKind::Gaussian {
                        mean_start: 70.0,
                        mean_end: 78.0,
                        variance_start: 240.0,
                        variance_end: 290.0,
                    },
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.constellation.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.area.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.link.validate().map_err(ConfigError::Invalid)?;
        if self.sim.window_len == 0 || self.sim.windows == 0 || self.sim.slot_duration_s == 0 {
            return Err(ConfigError::Invalid("windows, window_len, slot_duration_s must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.sim.gamma) || self.sim.gamma <= 0.0 {
            return Err(ConfigError::Invalid("gamma must lie in (0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.sim.alpha) || self.sim.alpha <= 0.0 {
            return Err(ConfigError::Invalid("alpha must lie in (0, 1)".into()));
        }
        if self.sim.warmup_slots < self.predictor.history_len + 2 {
            return Err(ConfigError::Invalid(format!(
                "warmup_slots {} too small to train a history-{} predictor",
                self.sim.warmup_slots, self.predictor.history_len
            )));
        }
        match self.demand.source.as_str() {
            "synthetic" => {}
            "trace" => {
                let path = self.demand.trace_path.as_deref().ok_or_else(|| {
                    ConfigError::Invalid("trace source needs demand.trace_path".into())
                })?;
                if !Path::new(path).exists() {
                    return Err(ConfigError::Invalid(format!("trace file `{path}` not found")));
                }
            }
            other => {
                return Err(ConfigError::Invalid(format!(
                    "demand.source must be `synthetic` or `trace`, got `{other}`"
                )))
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Hex digest of the canonical serialized config, stamped into reports.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml().as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_config_validates_and_round_trips() {
        let config = ScenarioConfig::reference();
        config.validate().unwrap();
        let text = config.to_toml();
        let parsed = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(parsed.digest(), config.digest());
        assert_eq!(parsed.sim.windows, 9);
        assert_eq!(parsed.horizon_slots(), 90);
    }

    #[test]
    fn regime_covers_the_whole_trace() {
        let config = ScenarioConfig::reference();
        let regime = config.regime();
        regime.validate().unwrap();
        assert_eq!(regime.duration_s, config.total_trace_seconds());
        assert_eq!(regime.segments.len(), 6);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut config = ScenarioConfig::reference();
        config.sim.gamma = 1.0;
        assert!(config.validate().is_err());

        let mut config = ScenarioConfig::reference();
        config.demand.source = "trace".into();
        assert!(config.validate().is_err());

        let mut config = ScenarioConfig::reference();
        config.sim.warmup_slots = 5;
        assert!(config.validate().is_err());
    }

    #[test]
    fn scheme_labels() {
        assert_eq!(Scheme::Frs.label(0.9), "FRS");
        assert_eq!(Scheme::Fdtrs.label(0.9), "FDTRS-0.90");
        assert_eq!(Scheme::Adtrs.label(0.99), "ADTRS-0.99");
        assert_eq!(Scheme::Perfect.label(0.5), "PERFECT");
        assert!(Scheme::parse("adtrs").is_ok());
        assert!(Scheme::parse("nope").is_err());
    }
}
