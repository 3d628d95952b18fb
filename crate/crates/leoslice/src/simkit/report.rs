//! Run metrics and their serialized forms: per-slot CSV, the summary table,
//! and the full structured-text run report used for reproducibility checks.

use crate::twin::{events_to_csv, TwinEvent};
use std::fmt::Write as _;

/// Metrics of one simulated slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotMetrics {
    pub window: usize,
    /// Global slot index.
    pub slot: usize,
    /// Reserved spectrum summed over visible executed satellites, Hz.
    pub resource_hz: f64,
    /// Worst-case overall delay bound over the serving set, seconds.
    pub delay_cost_s: f64,
    pub violated: bool,
    pub active_satellites: usize,
    /// Reserved capacity, packets/s.
    pub capacity_pps: f64,
    /// The slot's actual demand level used for the violation check.
    pub demand_pps: f64,
    /// Executed reservations of the serving set, (satellite id, b).
    pub reservations: Vec<(usize, f64)>,
}

/// Full outcome of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scheme: String,
    pub config_digest: String,
    pub windows: usize,
    pub window_len: usize,
    pub per_slot: Vec<SlotMetrics>,
    pub repredictions: u32,
    pub infeasible_windows: usize,
    pub events: Vec<TwinEvent>,
}

impl RunReport {
    pub fn avg_resource_hz(&self) -> f64 {
        average(self.per_slot.iter().map(|m| m.resource_hz))
    }

    pub fn avg_delay_cost_s(&self) -> f64 {
        average(self.per_slot.iter().map(|m| m.delay_cost_s))
    }

    pub fn violation_rate(&self) -> f64 {
        if self.per_slot.is_empty() {
            return 0.0;
        }
        self.per_slot.iter().filter(|m| m.violated).count() as f64 / self.per_slot.len() as f64
    }

    /// Per-slot CSV for time-series plots.
    pub fn per_slot_csv(&self) -> String {
        let mut out = String::from(
            "slot,window,resource_hz,delay_cost_s,violated,active_sats,capacity_pps,demand_pps\n",
        );
        for m in &self.per_slot {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                m.slot,
                m.window,
                m.resource_hz,
                m.delay_cost_s,
                u8::from(m.violated),
                m.active_satellites,
                m.capacity_pps,
                m.demand_pps
            );
        }
        out
    }

    /// One summary row in the documented column order.
    pub fn summary_row(&self) -> String {
        format!(
            "{},{},{},{},{}\n",
            self.scheme,
            self.avg_resource_hz(),
            self.avg_delay_cost_s(),
            self.violation_rate(),
            self.repredictions
        )
    }

    pub fn events_csv(&self) -> String {
        events_to_csv(&self.events)
    }

    /// Complete structured-text serialization; byte-identical across reruns
    /// of the same config and seeds.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("leoslice-run v1\n");
        let _ = writeln!(out, "scheme {}", self.scheme);
        let _ = writeln!(out, "config_digest {}", self.config_digest);
        let _ = writeln!(out, "windows {}", self.windows);
        let _ = writeln!(out, "window_len {}", self.window_len);
        let _ = writeln!(out, "avg_resource_hz {}", self.avg_resource_hz());
        let _ = writeln!(out, "avg_delay_cost_s {}", self.avg_delay_cost_s());
        let _ = writeln!(out, "violation_rate {}", self.violation_rate());
        let _ = writeln!(out, "repredictions {}", self.repredictions);
        let _ = writeln!(out, "infeasible_windows {}", self.infeasible_windows);
        out.push_str("per_slot\n");
        out.push_str(&self.per_slot_csv());
        out
    }

    /// Parse the summary head of a serialized run report (per-slot rows are
    /// not reconstructed).
    pub fn summary_from_text(text: &str) -> Option<RunSummary> {
        let mut lines = text.lines();
        if lines.next()? != "leoslice-run v1" {
            return None;
        }
        let mut summary = RunSummary::default();
        for line in lines {
            if line == "per_slot" {
                break;
            }
            let (key, value) = line.split_once(' ')?;
            match key {
                "scheme" => summary.scheme = value.to_string(),
                "avg_resource_hz" => summary.avg_resource_hz = value.parse().ok()?,
                "avg_delay_cost_s" => summary.avg_delay_cost_s = value.parse().ok()?,
                "violation_rate" => summary.violation_rate = value.parse().ok()?,
                "repredictions" => summary.repredictions = value.parse().ok()?,
                _ => {}
            }
        }
        Some(summary)
    }
}

/// Summary row of a run, as consumed by the `report` subcommand.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub scheme: String,
    pub avg_resource_hz: f64,
    pub avg_delay_cost_s: f64,
    pub violation_rate: f64,
    pub repredictions: u32,
}

impl RunSummary {
    pub fn of(report: &RunReport) -> Self {
        Self {
            scheme: report.scheme.clone(),
            avg_resource_hz: report.avg_resource_hz(),
            avg_delay_cost_s: report.avg_delay_cost_s(),
            violation_rate: report.violation_rate(),
            repredictions: report.repredictions,
        }
    }
}

/// The summary CSV over several runs (`scheme,avg_resource_hz,delay_cost_s,
/// violation_rate,repredictions`).
pub fn summary_csv(summaries: &[RunSummary]) -> String {
    let mut out = String::from("scheme,avg_resource_hz,delay_cost_s,violation_rate,repredictions\n");
    for s in summaries {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.scheme, s.avg_resource_hz, s.avg_delay_cost_s, s.violation_rate, s.repredictions
        );
    }
    out
}

/// Human-readable summary table.
pub fn summary_table(summaries: &[RunSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>16} {:>12} {:>14} {:>14}",
        "scheme", "avg resource", "delay cost", "violation", "repredictions"
    );
    for s in summaries {
        let _ = writeln!(
            out,
            "{:<14} {:>13.1} MHz {:>10.3} s {:>13.1}% {:>14}",
            s.scheme,
            s.avg_resource_hz / 1e6,
            s.avg_delay_cost_s,
            s.violation_rate * 100.0,
            s.repredictions
        );
    }
    out
}

fn average(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v;
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> RunReport {
        RunReport {
            scheme: "ADTRS-0.90".into(),
            config_digest: "abc123".into(),
            windows: 1,
            window_len: 2,
            per_slot: vec![
                SlotMetrics {
                    window: 0,
                    slot: 0,
                    resource_hz: 2e8,
                    delay_cost_s: 1.5,
                    violated: false,
                    active_satellites: 1,
                    capacity_pps: 50.0,
                    demand_pps: 42.0,
                    reservations: vec![(3, 0.4)],
                },
                SlotMetrics {
                    window: 0,
                    slot: 1,
                    resource_hz: 3e8,
                    delay_cost_s: 2.5,
                    violated: true,
                    active_satellites: 2,
                    capacity_pps: 40.0,
                    demand_pps: 48.0,
                    reservations: vec![(3, 0.4), (5, 0.2)],
                },
            ],
            repredictions: 4,
            infeasible_windows: 0,
            events: Vec::new(),
        }
    }

    #[test]
    fn averages_and_rates() {
        let report = sample_report();
        assert!((report.avg_resource_hz() - 2.5e8).abs() < 1e-6);
        assert!((report.avg_delay_cost_s() - 2.0).abs() < 1e-12);
        assert!((report.violation_rate() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn csv_has_documented_columns_and_row_count() {
        let report = sample_report();
        let csv = report.per_slot_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "slot,window,resource_hz,delay_cost_s,violated,active_sats,capacity_pps,demand_pps"
        );
        assert_eq!(csv.lines().count(), 3);

        let summary = summary_csv(&[RunSummary::of(&report)]);
        assert!(summary
            .starts_with("scheme,avg_resource_hz,delay_cost_s,violation_rate,repredictions\n"));
        assert_eq!(summary.lines().count(), 2);
    }

    #[test]
    fn text_round_trip_preserves_summary() {
        let report = sample_report();
        let text = report.to_text();
        let summary = RunReport::summary_from_text(&text).unwrap();
        assert_eq!(summary, RunSummary::of(&report));
    }
}
