//! Demand traces and slice-DT feature extraction.
//!
//! A trace holds one demand sample per second for the whole horizon. Traces
//! come from the synthetic non-stationary generator (piecewise
//! Poisson/Gaussian segments with linear parameter drift) or from a CSV
//! file; the feature extractor maps each slot's samples to (mean, variance).

use crate::stats::{mean, population_variance};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("slot ({w}, {t}) lies outside the trace duration")]
    OutOfRange { w: usize, t: usize },
    #[error("feature extraction on an empty slot")]
    EmptySlot,
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("trace schema violation: {0}")]
    SchemaError(String),
    #[error("invalid regime spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-second demand samples over a contiguous duration.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandTrace {
    /// samples[i] is the demand in packets/s during second i.
    pub samples: Vec<f64>,
}

impl DemandTrace {
    pub fn duration_s(&self) -> usize {
        self.samples.len()
    }
}

/// Demand feature of one slot: per-second mean and population variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandFeature {
    pub mean: f64,
    pub variance: f64,
}

/// Distribution kind of a synthetic segment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SegmentKind {
    /// Poisson intensity ramping linearly from `lambda_start` to `lambda_end`.
    Poisson { lambda_start: f64, lambda_end: f64 },
    /// Gaussian mean/variance ramping linearly across the segment.
    Gaussian {
        mean_start: f64,
        mean_end: f64,
        variance_start: f64,
        variance_end: f64,
    },
}

/// One segment of the synthetic generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeSegment {
    /// First second of the segment (inclusive).
    pub start_second: usize,
    #[serde(flatten)]
    pub kind: SegmentKind,
}

/// Piecewise regime specification covering `duration_s` seconds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub duration_s: usize,
    pub segments: Vec<RegimeSegment>,
}

impl RegimeSpec {
    pub fn validate(&self) -> Result<(), DemandError> {
        if self.duration_s == 0 {
            return Ok(());
        }
        if self.segments.is_empty() {
            return Err(DemandError::InvalidSpec("no segments".into()));
        }
        if self.segments[0].start_second != 0 {
            return Err(DemandError::InvalidSpec(
                "first segment must start at second 0".into(),
            ));
        }
        for pair in self.segments.windows(2) {
            if pair[1].start_second <= pair[0].start_second {
                return Err(DemandError::InvalidSpec(
                    "segments must be ordered and non-overlapping".into(),
                ));
            }
        }
        if self.segments.last().unwrap().start_second >= self.duration_s {
            return Err(DemandError::InvalidSpec(
                "last segment starts beyond the duration".into(),
            ));
        }
        Ok(())
    }

    fn segment_end(&self, idx: usize) -> usize {
        self.segments
            .get(idx + 1)
            .map(|s| s.start_second)
            .unwrap_or(self.duration_s)
    }
}

/// Generate a trace from the regime spec; deterministic for a fixed seed.
pub fn generate(spec: &RegimeSpec, seed: u64) -> Result<DemandTrace, DemandError> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(spec.duration_s);
    for (idx, segment) in spec.segments.iter().enumerate() {
        let start = segment.start_second;
        let end = spec.segment_end(idx).min(spec.duration_s);
        let len = (end - start) as f64;
        for i in start..end {
            // Parameter position within the segment; a one-second segment
            // sits at its start value.
            let u = if len > 1.0 { (i - start) as f64 / (len - 1.0) } else { 0.0 };
            let value = match &segment.kind {
                SegmentKind::Poisson { lambda_start, lambda_end } => {
                    let lambda = lambda_start + (lambda_end - lambda_start) * u;
                    Poisson::new(lambda.max(1e-9)).unwrap().sample(&mut rng)
                }
                SegmentKind::Gaussian {
                    mean_start,
                    mean_end,
                    variance_start,
                    variance_end,
                } => {
                    let m = mean_start + (mean_end - mean_start) * u;
                    let v = (variance_start + (variance_end - variance_start) * u).max(0.0);
                    Normal::new(m, v.sqrt()).unwrap().sample(&mut rng).max(0.0)
                }
            };
            samples.push(value);
        }
    }
    Ok(DemandTrace { samples })
}

/// The per-second samples of slot (w, t): seconds [g*tau, (g+1)*tau) where
/// g is the global slot index.
pub fn slot_samples(
    trace: &DemandTrace,
    w: usize,
    t: usize,
    window_len: usize,
    tau_s: usize,
) -> Result<&[f64], DemandError> {
    let global = w * window_len + t;
    let start = global * tau_s;
    let end = start + tau_s;
    if end > trace.samples.len() {
        return Err(DemandError::OutOfRange { w, t });
    }
    Ok(&trace.samples[start..end])
}

/// Feature extraction U: arithmetic mean and population variance.
pub fn extract_features(samples: &[f64]) -> Result<DemandFeature, DemandError> {
    if samples.is_empty() {
        return Err(DemandError::EmptySlot);
    }
    Ok(DemandFeature {
        mean: mean(samples),
        variance: population_variance(samples),
    })
}

/// Parse a `second,packets` CSV trace. Seconds must start at 0 and be
/// gap-free; packets must be nonnegative.
pub fn ingest_csv(path: &Path) -> Result<DemandTrace, DemandError> {
    let text = std::fs::read_to_string(path)?;
    parse_trace_csv(&text)
}

pub fn parse_trace_csv(text: &str) -> Result<DemandTrace, DemandError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "second,packets" => {}
        _ => {
            return Err(DemandError::SchemaError(
                "expected header `second,packets`".into(),
            ))
        }
    }
    let mut samples = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let second: usize = parts
            .next()
            .ok_or_else(|| DemandError::ParseError {
                line: line_no,
                message: "missing second column".into(),
            })?
            .trim()
            .parse()
            .map_err(|e| DemandError::ParseError {
                line: line_no,
                message: format!("bad second: {e}"),
            })?;
        let packets: f64 = parts
            .next()
            .ok_or_else(|| DemandError::ParseError {
                line: line_no,
                message: "missing packets column".into(),
            })?
            .trim()
            .parse()
            .map_err(|e| DemandError::ParseError {
                line: line_no,
                message: format!("bad packets: {e}"),
            })?;
        if parts.next().is_some() {
            return Err(DemandError::ParseError {
                line: line_no,
                message: "too many columns".into(),
            });
        }
        if second != samples.len() {
            return Err(DemandError::SchemaError(format!(
                "seconds must be gap-free and increasing; expected {} got {} (line {})",
                samples.len(),
                second,
                line_no
            )));
        }
        if packets < 0.0 {
            return Err(DemandError::SchemaError(format!(
                "negative packets at line {line_no}"
            )));
        }
        samples.push(packets);
    }
    Ok(DemandTrace { samples })
}

/// Serialize a trace in the `second,packets` CSV schema.
pub fn trace_to_csv(trace: &DemandTrace) -> String {
    let mut out = String::from("second,packets\n");
    for (i, v) in trace.samples.iter().enumerate() {
        out.push_str(&format!("{i},{v}\n"));
    }
    out
}

/// Default synthetic scenario: 900 s of warmup-free demand, four segments
/// alternating Poisson and Gaussian with about +/-30% linear drift.
pub fn default_regime(duration_s: usize) -> RegimeSpec {
    let q = duration_s / 4;
    RegimeSpec {
        duration_s,
        segments: vec![
            RegimeSegment {
                start_second: 0,
                kind: SegmentKind::Poisson { lambda_start: 40.0, lambda_end: 52.0 },
            },
            RegimeSegment {
                start_second: q,
                kind: SegmentKind::Gaussian {
                    mean_start: 52.0,
                    mean_end: 38.0,
                    variance_start: 180.0,
                    variance_end: 120.0,
                },
            },
            RegimeSegment {
                start_second: 2 * q,
                kind: SegmentKind::Poisson { lambda_start: 38.0, lambda_end: 50.0 },
            },
            RegimeSegment {
                start_second: 3 * q,
                kind: SegmentKind::Gaussian {
                    mean_start: 50.0,
                    mean_end: 65.0,
                    variance_start: 140.0,
                    variance_end: 200.0,
                },
            },
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constant_poisson(duration: usize, lambda: f64) -> RegimeSpec {
        RegimeSpec {
            duration_s: duration,
            segments: vec![RegimeSegment {
                start_second: 0,
                kind: SegmentKind::Poisson { lambda_start: lambda, lambda_end: lambda },
            }],
        }
    }

    #[test]
    fn poisson_segment_sample_mean_within_clt_bound() {
        let trace = generate(&constant_poisson(10_000, 200.0), 42).unwrap();
        let m = mean(&trace.samples);
        assert!(m > 196.0 && m < 204.0, "sample mean {m}");
    }

    #[test]
    fn zero_duration_gives_empty_trace() {
        let spec = RegimeSpec { duration_s: 0, segments: vec![] };
        let trace = generate(&spec, 1).unwrap();
        assert!(trace.samples.is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = default_regime(900);
        assert_eq!(generate(&spec, 9).unwrap(), generate(&spec, 9).unwrap());
        assert_ne!(generate(&spec, 9).unwrap(), generate(&spec, 10).unwrap());
    }

    #[test]
    fn slot_samples_partition_the_trace() {
        let trace = generate(&constant_poisson(300, 50.0), 5).unwrap();
        let mut seen = Vec::new();
        for w in 0..3 {
            for t in 0..10 {
                let s = slot_samples(&trace, w, t, 10, 10).unwrap();
                assert_eq!(s.len(), 10);
                seen.extend_from_slice(s);
            }
        }
        assert_eq!(seen, trace.samples);
        assert!(matches!(
            slot_samples(&trace, 3, 0, 10, 10),
            Err(DemandError::OutOfRange { .. })
        ));
    }

    #[test]
    fn feature_extraction_hand_values() {
        let f = extract_features(&[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(f.mean, 4.0);
        assert!((f.variance - 8.0 / 3.0).abs() < 1e-12);
        let c = extract_features(&[5.0, 5.0, 5.0, 5.0]).unwrap();
        assert_eq!(c.variance, 0.0);
        assert!(matches!(extract_features(&[]), Err(DemandError::EmptySlot)));
    }

    #[test]
    fn poisson_slot_dispersion_concentrates_near_one() {
        // Dispersion ratio variance/mean over tau=10 slots for lambda = 400.
        // Reference simulation (1e6 slots): P(ratio in (0.3, 3)) = 0.964 and
        // P(ratio in (0.2, 4)) = 0.992; asserted with margin for MC noise.
        let trace = generate(&constant_poisson(100_000, 400.0), 17).unwrap();
        let slots = 10_000;
        let mut inside = 0usize;
        let mut inside_wide = 0usize;
        for g in 0..slots {
            let f = extract_features(&trace.samples[g * 10..(g + 1) * 10]).unwrap();
            let ratio = f.variance / f.mean;
            if ratio > 0.3 && ratio < 3.0 {
                inside += 1;
            }
            if ratio > 0.2 && ratio < 4.0 {
                inside_wide += 1;
            }
        }
        assert!(inside as f64 / slots as f64 >= 0.95, "inside fraction {inside}/{slots}");
        assert!(inside_wide as f64 / slots as f64 >= 0.985, "wide fraction {inside_wide}/{slots}");
    }

    #[test]
    fn stationary_gaussian_features_recover_parameters() {
        let spec = RegimeSpec {
            duration_s: 20_000,
            segments: vec![RegimeSegment {
                start_second: 0,
                kind: SegmentKind::Gaussian {
                    mean_start: 300.0,
                    mean_end: 300.0,
                    variance_start: 400.0,
                    variance_end: 400.0,
                },
            }],
        };
        let trace = generate(&spec, 23).unwrap();
        let slots = 2000;
        let mut mean_acc = 0.0;
        let mut var_acc = 0.0;
        for g in 0..slots {
            let f = extract_features(&trace.samples[g * 10..(g + 1) * 10]).unwrap();
            mean_acc += f.mean;
            var_acc += f.variance;
        }
        let avg_mean = mean_acc / slots as f64;
        // Population variance over tau samples is biased by (tau-1)/tau.
        let avg_var = var_acc / slots as f64 / 0.9;
        assert!((avg_mean - 300.0).abs() / 300.0 < 0.05, "mean {avg_mean}");
        assert!((avg_var - 400.0).abs() / 400.0 < 0.05, "variance {avg_var}");
    }

    #[test]
    fn csv_round_trip_and_schema_errors() {
        let trace = parse_trace_csv("second,packets\n0,100\n1,110\n").unwrap();
        assert_eq!(trace.samples, vec![100.0, 110.0]);
        let again = parse_trace_csv(&trace_to_csv(&trace)).unwrap();
        assert_eq!(again, trace);

        assert!(matches!(
            parse_trace_csv("second,packets\n0,100\n2,110\n"),
            Err(DemandError::SchemaError(_))
        ));
        assert!(matches!(
            parse_trace_csv("second,packets\n0,-4\n"),
            Err(DemandError::SchemaError(_))
        ));
        assert!(matches!(
            parse_trace_csv("second,packets\n0,abc\n"),
            Err(DemandError::ParseError { line: 2, .. })
        ));
        assert!(matches!(
            parse_trace_csv("time,packets\n0,1\n"),
            Err(DemandError::SchemaError(_))
        ));
    }

    proptest! {
        #[test]
        fn features_are_permutation_invariant(mut samples in proptest::collection::vec(0.0f64..1000.0, 2..30)) {
            let a = extract_features(&samples).unwrap();
            samples.reverse();
            let b = extract_features(&samples).unwrap();
            prop_assert!((a.mean - b.mean).abs() < 1e-9);
            prop_assert!((a.variance - b.variance).abs().max(0.0) < 1e-6);
        }
    }
}
